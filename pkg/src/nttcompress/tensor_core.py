"""Tensor-train data model and exact contraction algebra.

Cores are stored as 3-way ``float64`` arrays of shape ``(r_{k-1}, n_k, r_k)``
with dummy boundary ranks ``r_0 = r_d = 1``. Multi-indices are 0-based
integer sequences (or ``(N, d)`` integer arrays for batched calls).
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateInputError, InvalidArgumentError


def _freeze(core):
    arr = np.array(core, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


class TensorTrain:
    """A real-valued tensor train.

    Parameters
    ----------
    cores : sequence of array_like
        Core ``k`` has shape ``(r_{k-1}, n_k, r_k)``; the first left rank and
        the last right rank must be 1.

    Attributes
    ----------
    d : int
        Number of modes.
    dims : tuple of int
        Mode sizes ``n_1..n_d``.
    ranks : tuple of int
        Interior bond ranks ``r_1..r_{d-1}``.
    """

    def __init__(self, cores: Sequence[np.ndarray]):
        cores = [_freeze(c) for c in cores]
        if len(cores) == 0:
            raise InvalidArgumentError("a tensor train needs at least one core")
        for k, c in enumerate(cores):
            if c.ndim != 3:
                raise InvalidArgumentError(f"core {k} has ndim {c.ndim}, expected 3")
            if min(c.shape) < 1:
                raise InvalidArgumentError(f"core {k} has an empty axis: {c.shape}")
        if cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
            raise InvalidArgumentError("boundary ranks must be 1")
        for k in range(len(cores) - 1):
            if cores[k].shape[2] != cores[k + 1].shape[0]:
                raise InvalidArgumentError(
                    f"rank mismatch between core {k} ({cores[k].shape}) "
                    f"and core {k + 1} ({cores[k + 1].shape})"
                )
        self._cores = tuple(cores)

    @property
    def cores(self) -> tuple:
        return self._cores

    @property
    def d(self) -> int:
        return len(self._cores)

    @property
    def dims(self) -> tuple:
        return tuple(c.shape[1] for c in self._cores)

    @property
    def ranks(self) -> tuple:
        return tuple(c.shape[2] for c in self._cores[:-1])

    @property
    def is_nonnegative(self) -> bool:
        return False

    def __len__(self):
        return self.d

    def __repr__(self):
        return f"{type(self).__name__}(dims={self.dims}, ranks={self.ranks})"

    def with_cores(self, cores):
        """Return a tensor train of the same class holding ``cores``."""
        return type(self)(cores)

    def to_dense(self) -> np.ndarray:
        """Full contraction into an ``n_1 x ... x n_d`` array (small tensors only)."""
        out = self._cores[0][0]
        for c in self._cores[1:]:
            out = np.tensordot(out, c, axes=([-1], [0]))
        return out[..., 0]


class NonNegTensorTrain(TensorTrain):
    """Tensor train whose cores are strictly positive entrywise."""

    def __init__(self, cores):
        super().__init__(cores)
        for k, c in enumerate(self._cores):
            if not np.all(c > 0):
                bad = tuple(int(i) for i in np.argwhere(~(c > 0))[0])
                raise InvalidArgumentError(
                    f"core {k} has a non-positive entry at {bad}: {c[bad]!r}"
                )

    @property
    def is_nonnegative(self) -> bool:
        return True

    def as_tt(self) -> TensorTrain:
        return TensorTrain(self._cores)


def random_tt(dims, ranks, rng, low=-1.0, high=1.0) -> TensorTrain:
    """Tensor train with i.i.d. uniform(low, high) core entries."""
    full = (1, *ranks, 1)
    return TensorTrain(
        [rng.uniform(low, high, size=(full[k], n, full[k + 1])) for k, n in enumerate(dims)]
    )


def random_ntt(dims, ranks, rng, low=1e-3, high=1.0) -> NonNegTensorTrain:
    full = (1, *ranks, 1)
    return NonNegTensorTrain(
        [rng.uniform(low, high, size=(full[k], n, full[k + 1])) for k, n in enumerate(dims)]
    )


def tt_from_dense(tensor: np.ndarray) -> TensorTrain:
    """Exact TT encoding of a dense array by sequential SVDs (no truncation).

    Only singular values that are exactly zero are dropped, so the result
    reproduces ``tensor`` up to rounding.
    """
    tensor = np.asarray(tensor, dtype=np.float64)
    dims = tensor.shape
    cores = []
    rest = tensor.reshape(1, -1)
    r_prev = 1
    for n in dims[:-1]:
        mat = rest.reshape(r_prev * n, -1)
        u, s, vt = np.linalg.svd(mat, full_matrices=False)
        keep = max(1, int(np.count_nonzero(s > 0)))
        cores.append(u[:, :keep].reshape(r_prev, n, keep))
        rest = s[:keep, None] * vt[:keep]
        r_prev = keep
    cores.append(rest.reshape(r_prev, dims[-1], 1))
    return TensorTrain(cores)


def _check_index_batch(tt: TensorTrain, idx) -> np.ndarray:
    idx = np.asarray(idx)
    if idx.ndim == 1:
        idx = idx[None, :]
    if idx.ndim != 2 or idx.shape[1] != tt.d:
        raise InvalidArgumentError(
            f"index batch has shape {idx.shape}, expected (N, {tt.d})"
        )
    if idx.size and (idx.min() < 0 or np.any(idx >= np.asarray(tt.dims))):
        raise InvalidArgumentError("index out of range for dims %s" % (tt.dims,))
    return idx.astype(np.intp, copy=False)


def tt_eval(tt: TensorTrain, idx: Sequence[int]) -> float:
    """Evaluate a single entry as a left-to-right product of core slices."""
    idx = np.asarray(idx)
    if idx.ndim != 1 or idx.shape[0] != tt.d:
        raise InvalidArgumentError(f"index {tuple(idx.tolist())} does not match d={tt.d}")
    return float(tt_eval_batch(tt, idx[None, :])[0])


def tt_eval_batch(tt: TensorTrain, idx) -> np.ndarray:
    """Evaluate many entries at once; ``idx`` has shape ``(N, d)``."""
    idx = _check_index_batch(tt, idx)
    vec = tt.cores[0][0, idx[:, 0], :]
    for k in range(1, tt.d):
        core = tt.cores[k]
        # (N, r) x (N, r, r') -> (N, r')
        vec = np.einsum("na,anb->nb", vec, core[:, idx[:, k], :])
    return vec[:, 0]


def mode_sums(tt: TensorTrain) -> list:
    """Per-core matrices ``sum_i core[:, i, :]``."""
    return [c.sum(axis=1) for c in tt.cores]


def tt_sum(tt: TensorTrain) -> float:
    """Sum of all entries: mode-sum each core then chain matrix-vector products."""
    vec = np.ones(1)
    for s in mode_sums(tt):
        vec = vec @ s
    return float(vec[0])


def tt_scale(tt: TensorTrain, c: float) -> TensorTrain:
    """Multiply the represented tensor by ``c`` (applied to the first core)."""
    cores = list(tt.cores)
    cores[0] = cores[0] * c
    return tt.with_cores(cores) if c > 0 or not tt.is_nonnegative else TensorTrain(cores)


def _check_same_shape(a: TensorTrain, b: TensorTrain):
    if a.d != b.d or a.dims != b.dims:
        raise InvalidArgumentError(f"shape mismatch: dims {a.dims} vs {b.dims}")


def tt_inner(a: TensorTrain, b: TensorTrain) -> float:
    """Frobenius inner product ``sum_i a(i) b(i)`` by transfer-matrix contraction."""
    _check_same_shape(a, b)
    env = np.ones((1, 1))
    for ca, cb in zip(a.cores, b.cores):
        # env (ra, rb); new (ra', rb') = sum_i ca[:, i, :]^T env cb[:, i, :]
        tmp = np.einsum("ab,bic->aic", env, cb)
        env = np.einsum("aid,aic->dc", ca, tmp)
    return float(env[0, 0])


def tt_log_inner(a: TensorTrain, b: TensorTrain) -> tuple:
    """Scale-stable inner product, returned as ``(sign, log|<a, b>|)``.

    The transfer matrix is renormalized after every core so that very long
    trains with large or tiny cores neither overflow nor underflow.
    """
    _check_same_shape(a, b)
    env = np.ones((1, 1))
    log_scale = 0.0
    for ca, cb in zip(a.cores, b.cores):
        tmp = np.einsum("ab,bic->aic", env, cb)
        env = np.einsum("aid,aic->dc", ca, tmp)
        m = np.max(np.abs(env))
        if m == 0.0:
            return 0.0, -math.inf
        env = env / m
        log_scale += math.log(m)
    val = env[0, 0]
    if val == 0.0:
        return 0.0, -math.inf
    return float(np.sign(val)), log_scale + math.log(abs(val))


def tt_norm(tt: TensorTrain) -> float:
    return math.sqrt(max(tt_inner(tt, tt), 0.0))


def tt_frob_normalize(tt: TensorTrain) -> TensorTrain:
    """Return ``tt / ||tt||_F``, spreading the scalar evenly over all cores.

    Using the d-th root keeps per-core magnitudes balanced, which matters for
    the barrier terms of the fitting stage.
    """
    sign, log_sq = tt_log_inner(tt, tt)
    if sign <= 0 or not math.isfinite(log_sq):
        raise DegenerateInputError("cannot normalize a tensor train with zero norm")
    factor = math.exp(-0.5 * log_sq / tt.d)
    return tt.with_cores([c * factor for c in tt.cores])


def tt_marginal(tt: TensorTrain, k: int) -> np.ndarray:
    """Unnormalized one-dimensional marginal of mode ``k`` (length ``n_k``)."""
    sums = mode_sums(tt)
    left = np.ones(1)
    for s in sums[:k]:
        left = left @ s
    right = np.ones(1)
    for s in reversed(sums[k + 1:]):
        right = s @ right
    return np.einsum("a,aib,b->i", left, tt.cores[k], right)


def right_mode_sum_vectors(tt: TensorTrain) -> list:
    """``out[k]`` contracts the mode-sums of cores ``k..d-1``; ``out[d] = [1]``."""
    out = [None] * (tt.d + 1)
    out[tt.d] = np.ones(1)
    for k in range(tt.d - 1, -1, -1):
        vec = tt.cores[k].sum(axis=1) @ out[k + 1]
        m = np.max(np.abs(vec))
        # rescaling keeps long trains in range; conditionals are scale-free
        out[k] = vec / m if m > 0 else vec
    return out


def ntt_sample(ntt: NonNegTensorTrain, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw i.i.d. multi-indices from the normalized NTT distribution.

    Sampling is autoregressive: the conditional of ``i_k`` given the prefix is
    the prefix row vector contracted with slice ``i_k`` and the precomputed
    right mode-sum vector.

    Returns
    -------
    ndarray of shape ``(count, d)``, 0-based indices.
    """
    if count < 1:
        raise InvalidArgumentError("count must be positive")
    if not np.all([np.all(c >= 0) for c in ntt.cores]):
        raise InvalidArgumentError("sampling requires non-negative cores")
    right = right_mode_sum_vectors(ntt)
    if not right[0][0] > 0:
        raise DegenerateInputError("normalization constant is not positive")
    out = np.empty((count, ntt.d), dtype=np.int64)
    left = np.ones((count, 1))
    for k, core in enumerate(ntt.cores):
        # weights[s, i] = left[s] @ core[:, i, :] @ right[k+1]
        w = np.einsum("sa,aib,b->si", left, core, right[k + 1])
        total = w.sum(axis=1, keepdims=True)
        if np.any(~(total > 0)):
            raise DegenerateInputError(f"conditional at mode {k} has zero mass")
        cdf = np.cumsum(w / total, axis=1)
        u = rng.random(count)
        choice = (u[:, None] > cdf).sum(axis=1)
        np.minimum(choice, core.shape[1] - 1, out=choice)
        out[:, k] = choice
        left = np.einsum("sa,sab->sb", left, core[:, choice, :].transpose(1, 0, 2))
        left /= left.max(axis=1, keepdims=True)
    return out


def entrywise_relative_error_details(
    oracle: Callable[[np.ndarray], np.ndarray],
    tt: TensorTrain,
    num_points: int,
    rng: np.random.Generator,
) -> tuple:
    """Mean relative entrywise error on uniformly random indices.

    Returns
    -------
    (mean_error, skipped) : (float, int)
        ``skipped`` counts sampled indices where the oracle is exactly zero.
    """
    if num_points < 1:
        raise InvalidArgumentError("num_points must be positive")
    idx = np.stack([rng.integers(0, n, size=num_points) for n in tt.dims], axis=1)
    ref = np.asarray(oracle(idx), dtype=np.float64)
    approx = tt_eval_batch(tt, idx)
    nz = ref != 0
    skipped = int(num_points - np.count_nonzero(nz))
    if skipped == num_points:
        raise DegenerateInputError("oracle is zero at every sampled index")
    err = np.abs(ref[nz] - approx[nz]) / np.abs(ref[nz])
    return float(err.mean()), skipped


def entrywise_relative_error(oracle, tt, num_points, rng) -> float:
    """Mean of ``|oracle(i) - tt(i)| / |oracle(i)|`` over random indices."""
    return entrywise_relative_error_details(oracle, tt, num_points, rng)[0]


def tt_log_eval_batch(tt: TensorTrain, idx) -> tuple:
    """Entries as ``(sign, log|value|)`` arrays, renormalizing after every core."""
    idx = _check_index_batch(tt, idx)
    vec = tt.cores[0][0, idx[:, 0], :]
    log_scale = np.zeros(idx.shape[0])
    for k in range(1, tt.d):
        m = np.max(np.abs(vec), axis=1)
        m = np.where(m > 0, m, 1.0)
        vec = vec / m[:, None]
        log_scale += np.log(m)
        vec = np.einsum("na,anb->nb", vec, tt.cores[k][:, idx[:, k], :])
    val = vec[:, 0]
    with np.errstate(divide="ignore"):
        return np.sign(val), log_scale + np.log(np.abs(val))


def tt_log_sum(tt: TensorTrain) -> tuple:
    """Scale-stable :func:`tt_sum` returned as ``(sign, log|sum|)``."""
    vec = np.ones(1)
    log_scale = 0.0
    for s in mode_sums(tt):
        vec = vec @ s
        m = np.max(np.abs(vec))
        if m == 0.0:
            return 0.0, -math.inf
        vec = vec / m
        log_scale += math.log(m)
    # vec has one entry and was just divided by its own magnitude
    return float(np.sign(vec[0])), log_scale
