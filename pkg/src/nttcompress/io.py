"""Binary file formats.

TT / NTT container (all integers little-endian ``uint32``)::

    version, flag (0 = TT, 1 = NTT), d, dims[d], ranks[d-1]
    core_1 ... core_d   float64 little-endian, row-major (left, mode, right)

Sample set::

    d (uint32), dims[d] (uint32), N (uint64)
    N records of d uint32 indices, 1-based
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .errors import InvalidArgumentError
from .tensor_core import NonNegTensorTrain, TensorTrain

FORMAT_VERSION = 1
FLAG_TT = 0
FLAG_NTT = 1


class FileFormatError(InvalidArgumentError):
    pass


def write_tt(path, tt: TensorTrain) -> None:
    flag = FLAG_NTT if tt.is_nonnegative else FLAG_TT
    header = [FORMAT_VERSION, flag, tt.d, *tt.dims, *tt.ranks]
    with open(path, "wb") as fh:
        fh.write(np.asarray(header, dtype="<u4").tobytes())
        for core in tt.cores:
            fh.write(np.ascontiguousarray(core, dtype="<f8").tobytes())


def read_tt(path, require_ntt: bool = False) -> TensorTrain:
    """Load a container; returns :class:`NonNegTensorTrain` when the flag is set.

    The positivity of NTT files is re-verified on load.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12:
        raise FileFormatError(f"{path}: truncated header")
    version, flag, d = struct.unpack_from("<3I", data, 0)
    if version != FORMAT_VERSION:
        raise FileFormatError(f"{path}: unsupported format version {version}")
    if flag not in (FLAG_TT, FLAG_NTT):
        raise FileFormatError(f"{path}: bad sign flag {flag}")
    if d < 1:
        raise FileFormatError(f"{path}: d must be >= 1")
    if require_ntt and flag != FLAG_NTT:
        raise FileFormatError(f"{path}: not an NTT file (sign flag unset)")
    off = 12
    n_hdr = d + d - 1
    if len(data) < off + 4 * n_hdr:
        raise FileFormatError(f"{path}: truncated header")
    hdr = np.frombuffer(data, dtype="<u4", count=n_hdr, offset=off).astype(np.int64)
    off += 4 * n_hdr
    dims = hdr[:d]
    full = [1, *hdr[d:].tolist(), 1]
    cores = []
    for k in range(d):
        shape = (full[k], int(dims[k]), full[k + 1])
        count = shape[0] * shape[1] * shape[2]
        if len(data) < off + 8 * count:
            raise FileFormatError(f"{path}: truncated core {k}")
        cores.append(np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(shape))
        off += 8 * count
    if off != len(data):
        raise FileFormatError(f"{path}: {len(data) - off} trailing bytes")
    if flag == FLAG_NTT:
        try:
            return NonNegTensorTrain(cores)
        except InvalidArgumentError as exc:
            raise FileFormatError(f"{path}: NTT flag set but {exc}") from exc
    return TensorTrain(cores)


def write_samples(path, samples: np.ndarray, dims) -> None:
    """Write 0-based ``(N, d)`` samples as 1-based records."""
    samples = np.asarray(samples)
    dims = tuple(int(n) for n in dims)
    if samples.ndim != 2 or samples.shape[1] != len(dims):
        raise InvalidArgumentError(f"samples shape {samples.shape} does not match d={len(dims)}")
    if samples.size and (samples.min() < 0 or np.any(samples >= np.asarray(dims))):
        raise InvalidArgumentError("sample index out of range")
    with open(path, "wb") as fh:
        fh.write(np.asarray([len(dims), *dims], dtype="<u4").tobytes())
        fh.write(np.asarray([samples.shape[0]], dtype="<u8").tobytes())
        fh.write(np.ascontiguousarray(samples + 1, dtype="<u4").tobytes())


def read_samples(path) -> tuple:
    """Return ``(samples, dims)`` with 0-based ``int64`` samples."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4:
        raise FileFormatError(f"{path}: truncated header")
    (d,) = struct.unpack_from("<I", data, 0)
    off = 4
    if d < 1 or len(data) < off + 4 * d + 8:
        raise FileFormatError(f"{path}: truncated header")
    dims = tuple(int(x) for x in np.frombuffer(data, dtype="<u4", count=d, offset=off))
    off += 4 * d
    (n,) = struct.unpack_from("<Q", data, off)
    off += 8
    if len(data) != off + 4 * d * n:
        raise FileFormatError(f"{path}: expected {n} records of {d} indices")
    recs = np.frombuffer(data, dtype="<u4", count=d * n, offset=off).reshape(n, d)
    samples = recs.astype(np.int64) - 1
    if n and (samples.min() < 0 or np.any(samples >= np.asarray(dims))):
        raise FileFormatError(f"{path}: index out of range (records are 1-based)")
    return samples, dims
