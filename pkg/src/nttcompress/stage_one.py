"""Stage one: tensor-train compression from an entry oracle or from samples.

Both paths build, for every bond ``b`` (between modes ``b`` and ``b + 1``), a
sketched matrix ``Z_b`` whose truncated SVD yields the left factor ``A_lt``
of node ``b + 1`` and the right factor ``A_gt`` of node ``b``. For every node
``k`` a sketched tensor ``B_k`` is assembled and the core is recovered from
``A_lt @ F_k @ A_gt = B_k`` by two one-sided least-squares solves.

Bond ``b`` carries the left pivots/sketch over modes ``0..b`` and the right
pivots/sketch over modes ``b+1..d-1``; node ``k`` uses bond ``k - 1`` on its
left and bond ``k`` on its right.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError, NTTError
from .linear_solvers import least_squares_solve, truncated_svd
from .tensor_core import TensorTrain, tt_eval_batch

log = logging.getLogger(__name__)


class OracleError(NTTError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class EntryOracle:
    """Deterministic entry access to a (possibly unnormalized) tensor.

    ``fn`` maps an ``(N, d)`` array of 0-based indices to ``N`` values.
    The number of evaluated entries is tracked in ``queries``.
    """

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], dims: Sequence[int]):
        self.fn = fn
        self.dims = tuple(int(n) for n in dims)
        self.queries = 0

    @property
    def d(self) -> int:
        return len(self.dims)

    def __call__(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        single = idx.ndim == 1
        if single:
            idx = idx[None, :]
        if idx.shape[1] != self.d:
            raise InvalidArgumentError(f"oracle expects {self.d} indices, got {idx.shape[1]}")
        self.queries += idx.shape[0]
        try:
            vals = np.asarray(self.fn(idx), dtype=np.float64)
        except Exception as exc:
            bad = self._locate_failure(idx)
            raise OracleError(f"oracle failed at index {bad}: {exc}", index=bad) from exc
        if vals.shape != (idx.shape[0],):
            raise OracleError(f"oracle returned shape {vals.shape} for {idx.shape[0]} queries")
        return vals[0] if single else vals

    def _locate_failure(self, idx):
        for row in idx:
            try:
                self.fn(row[None, :])
            except Exception:
                return tuple(int(i) for i in row)
        return None

    @classmethod
    def from_dense(cls, tensor: np.ndarray) -> "EntryOracle":
        tensor = np.asarray(tensor, dtype=np.float64)
        return cls(lambda idx: tensor[tuple(idx.T)], tensor.shape)

    @classmethod
    def from_tt(cls, tt: TensorTrain) -> "EntryOracle":
        return cls(lambda idx: tt_eval_batch(tt, idx), tt.dims)


# ---------------------------------------------------------------------------
# pivots (TT-cross)


@dataclass
class PivotSet:
    """Nested index sets for TT-cross.

    ``left[b]`` is an ``(rt_b, b + 1)`` array of prefixes over modes ``0..b``;
    ``right[b]`` is an ``(rt_b, d - b - 1)`` array of suffixes over modes
    ``b+1..d-1``.
    """

    dims: tuple
    left: list
    right: list
    sweeps_run: int = 0

    @property
    def d(self) -> int:
        return len(self.dims)

    def counts(self) -> list:
        return [len(p) for p in self.left]

    def node_left(self, k: int) -> np.ndarray:
        return np.zeros((1, 0), dtype=np.int64) if k == 0 else self.left[k - 1]

    def node_right(self, k: int) -> np.ndarray:
        return np.zeros((1, 0), dtype=np.int64) if k == self.d - 1 else self.right[k]


def _full_ranks(ranks, d) -> list:
    if np.isscalar(ranks):
        return [int(ranks)] * (d - 1)
    ranks = [int(r) for r in ranks]
    if len(ranks) != d - 1:
        raise InvalidArgumentError(f"expected {d - 1} bond ranks, got {len(ranks)}")
    return ranks


def sketch_counts(dims, ranks, oversample: float = 2.0) -> list:
    """Per-bond pivot counts ``min(oversample * r_b, #prefixes, #suffixes)``."""
    d = len(dims)
    out = []
    for b, r in enumerate(_full_ranks(ranks, d)):
        if r < 1:
            raise InvalidArgumentError("ranks must be >= 1")
        n_left = int(np.prod(dims[: b + 1], dtype=float)) if b < 60 else 1 << 62
        n_right = int(np.prod(dims[b + 1:], dtype=float)) if d - b < 60 else 1 << 62
        out.append(int(max(1, min(int(np.ceil(oversample * r)), n_left, n_right))))
    # nested pivots: a bond cannot have more pivots than its neighbour's extensions
    changed = True
    while changed:
        changed = False
        for b in range(1, d - 1):
            cap = out[b - 1] * dims[b]
            if out[b] > cap:
                out[b], changed = cap, True
        for b in range(d - 3, -1, -1):
            cap = out[b + 1] * dims[b + 1]
            if out[b] > cap:
                out[b], changed = cap, True
    return out


def _distinct_rows(candidates: np.ndarray, count: int, rng) -> np.ndarray:
    pick = rng.permutation(len(candidates))[:count]
    return candidates[np.sort(pick)]


def _product_candidates(fixed: np.ndarray, n: int, append: bool) -> np.ndarray:
    """All ``(row, i)`` pairs when ``append`` (row-major), else all ``(i, row)`` pairs."""
    m = len(fixed)
    if append:
        reps = np.repeat(fixed, n, axis=0)
        vals = np.tile(np.arange(n), m)[:, None]
        return np.hstack([reps, vals])
    vals = np.repeat(np.arange(n), m)[:, None]
    reps = np.tile(fixed, (n, 1))
    return np.hstack([vals, reps])


def greedy_cross_rows(mat: np.ndarray, count: int, rng, rel_tol: float = 1e-14) -> np.ndarray:
    """Choose ``count`` distinct rows of ``mat`` by greedy cross approximation.

    Each step takes the entry of maximal absolute residual, records its row
    and subtracts the rank-one cross through it. When the residual vanishes
    the remaining rows are drawn at random among unused ones.
    """
    m = mat.shape[0]
    if count > m:
        raise InvalidArgumentError(f"cannot pick {count} rows out of {m}")
    res = np.array(mat, dtype=np.float64, copy=True)
    scale = np.max(np.abs(res)) if res.size else 0.0
    chosen = []
    used = np.zeros(m, dtype=bool)
    while len(chosen) < count:
        if scale == 0.0:
            break
        flat = np.argmax(np.abs(res))
        i, j = np.unravel_index(flat, res.shape)
        piv = res[i, j]
        if abs(piv) <= rel_tol * scale:
            break
        chosen.append(i)
        used[i] = True
        res -= np.outer(res[:, j], res[i, :]) / piv
        res[i, :] = 0.0
    if len(chosen) < count:
        rest = np.flatnonzero(~used)
        extra = rng.permutation(rest)[: count - len(chosen)]
        chosen.extend(int(e) for e in extra)
    return np.sort(np.asarray(chosen, dtype=np.int64))


def _query_grid(oracle: EntryOracle, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """``out[a, c] = oracle(rows[a] ++ cols[c])``."""
    R, C = len(rows), len(cols)
    idx = np.empty((R, C, rows.shape[1] + cols.shape[1]), dtype=np.int64)
    idx[:, :, : rows.shape[1]] = rows[:, None, :]
    idx[:, :, rows.shape[1]:] = cols[None, :, :]
    return oracle(idx.reshape(R * C, -1)).reshape(R, C)


def random_nested_pivots(dims, counts, rng) -> PivotSet:
    d = len(dims)
    right = [None] * (d - 1)
    nxt = np.zeros((1, 0), dtype=np.int64)
    for b in range(d - 2, -1, -1):
        cand = _product_candidates(nxt, dims[b + 1], append=False)
        right[b] = _distinct_rows(cand, counts[b], rng)
        nxt = right[b]
    left = [None] * (d - 1)
    prv = np.zeros((1, 0), dtype=np.int64)
    for b in range(d - 1):
        cand = _product_candidates(prv, dims[b], append=True)
        left[b] = _distinct_rows(cand, counts[b], rng)
        prv = left[b]
    return PivotSet(tuple(dims), left, right)


def select_pivots_cross(
    oracle: EntryOracle,
    ranks,
    oversample: float = 2.0,
    sweeps: int = 2,
    rng: Optional[np.random.Generator] = None,
) -> PivotSet:
    """Nested pivot sets from alternating greedy cross sweeps.

    Starting from random nested pivots, a forward pass re-selects the prefix
    set of every bond among the one-mode extensions of the previous bond's
    prefixes, and a backward pass does the same for suffixes. Stops early
    when a full sweep leaves every pivot set unchanged.
    """
    rng = np.random.default_rng() if rng is None else rng
    dims = oracle.dims
    d = len(dims)
    if d < 2:
        return PivotSet(tuple(dims), [], [], 0)
    counts = sketch_counts(dims, ranks, oversample)
    piv = random_nested_pivots(dims, counts, rng)
    for sweep in range(sweeps):
        old_left = [p.copy() for p in piv.left]
        old_right = [p.copy() for p in piv.right]
        prv = np.zeros((1, 0), dtype=np.int64)
        for b in range(d - 1):
            cand = _product_candidates(prv, dims[b], append=True)
            mat = _query_grid(oracle, cand, piv.right[b])
            piv.left[b] = cand[greedy_cross_rows(mat, counts[b], rng)]
            prv = piv.left[b]
        nxt = np.zeros((1, 0), dtype=np.int64)
        for b in range(d - 2, -1, -1):
            cand = _product_candidates(nxt, dims[b + 1], append=False)
            mat = _query_grid(oracle, piv.left[b], cand)
            piv.right[b] = cand[greedy_cross_rows(mat.T, counts[b], rng)]
            nxt = piv.right[b]
        piv.sweeps_run = sweep + 1
        unchanged = all(np.array_equal(a, b) for a, b in zip(old_left, piv.left)) and all(
            np.array_equal(a, b) for a, b in zip(old_right, piv.right)
        )
        if unchanged:
            break
    return piv


def build_Bk_vi(oracle: EntryOracle, pivots: PivotSet, k: int) -> np.ndarray:
    """``B_k[z, i, w] = P(left_z, i, right_w)`` with dummy axes at the boundary."""
    rows = pivots.node_left(k)
    cols = pivots.node_right(k)
    n = pivots.dims[k]
    R, C = len(rows), len(cols)
    idx = np.empty((R, n, C, pivots.d), dtype=np.int64)
    idx[..., :k] = rows[:, None, None, :]
    idx[..., k] = np.arange(n)[None, :, None]
    idx[..., k + 1:] = cols[None, None, :, :]
    return oracle(idx.reshape(-1, pivots.d)).reshape(R, n, C)


def build_Zk_vi(oracle: EntryOracle, pivots: PivotSet, b: int) -> np.ndarray:
    """``Z_b[z, w] = P(left_b[z], right_b[w])``."""
    return _query_grid(oracle, pivots.left[b], pivots.right[b])


# ---------------------------------------------------------------------------
# sketches (TT-sketch)


class SketchFamily:
    """Per-bond left/right sketch functions evaluated on samples.

    Subclasses implement ``left(b, Y)`` and ``right(b, Y)``. Each returns
    either an ``(N, count)`` value array or, for indicator sketches, an
    integer code array of length ``N`` (``-1`` meaning "no row") when
    ``codes=True``.
    """

    dims: tuple
    counts: list
    indicator: bool = False

    @property
    def d(self) -> int:
        return len(self.dims)

    def left(self, b, Y, codes=False):
        raise NotImplementedError

    def right(self, b, Y, codes=False):
        raise NotImplementedError

    def left_dense(self, b) -> np.ndarray:
        """Explicit sketch tensor ``(count, n_0, ..., n_b)`` (small sizes only)."""
        grid = np.indices(self.dims[: b + 1]).reshape(b + 1, -1).T
        Y = np.zeros((len(grid), self.d), dtype=np.int64)
        Y[:, : b + 1] = grid
        vals = _values(self.left(b, Y), self.counts[b])
        return vals.T.reshape((self.counts[b],) + tuple(self.dims[: b + 1]))

    def right_dense(self, b) -> np.ndarray:
        """Explicit sketch tensor ``(n_{b+1}, ..., n_{d-1}, count)``."""
        grid = np.indices(self.dims[b + 1:]).reshape(self.d - b - 1, -1).T
        Y = np.zeros((len(grid), self.d), dtype=np.int64)
        Y[:, b + 1:] = grid
        vals = _values(self.right(b, Y), self.counts[b])
        return vals.reshape(tuple(self.dims[b + 1:]) + (self.counts[b],))


def _values(out, count) -> np.ndarray:
    if out.ndim == 2:
        return out
    vals = np.zeros((out.shape[0], count))
    ok = out >= 0
    vals[np.flatnonzero(ok), out[ok]] = 1.0
    return vals


class PivotSketch(SketchFamily):
    """Indicator sketches of explicit prefix/suffix lists (e.g. a :class:`PivotSet`)."""

    indicator = True

    def __init__(self, pivots: PivotSet):
        self.pivots = pivots
        self.dims = tuple(pivots.dims)
        self.counts = pivots.counts()
        self._lookup_l = [self._table(p, pivots.dims[: b + 1]) for b, p in enumerate(pivots.left)]
        self._lookup_r = [self._table(p, pivots.dims[b + 1:]) for b, p in enumerate(pivots.right)]

    @staticmethod
    def _table(rows, dims):
        strides = _strides(dims)
        keys = rows @ strides
        return dict(zip(keys.tolist(), range(len(rows)))), strides

    def _code(self, lookup, Y):
        table, strides = lookup
        keys = Y @ strides
        return np.fromiter((table.get(k, -1) for k in keys.tolist()), dtype=np.int64, count=len(keys))

    def left(self, b, Y, codes=False):
        c = self._code(self._lookup_l[b], Y[:, : b + 1])
        return c if codes else _values(c, self.counts[b])

    def right(self, b, Y, codes=False):
        c = self._code(self._lookup_r[b], Y[:, b + 1:])
        return c if codes else _values(c, self.counts[b])


def _strides(dims) -> np.ndarray:
    dims = np.asarray(dims, dtype=np.int64)
    out = np.ones(len(dims), dtype=np.int64)
    for j in range(len(dims) - 2, -1, -1):
        out[j] = out[j + 1] * dims[j + 1]
    return out


class ClusterSketch(SketchFamily):
    """Indicator sketches over small coordinate clusters next to each cut.

    The right sketch of bond ``b`` is the one-hot encoding of the joint value
    of the modes ``b+1, b+2, ...`` nearest the cut, plus the last mode when
    ``include_far_end`` is set (the left sketch mirrors this with mode 0).
    The cluster grows until it has at least ``oversample * r_b`` joint values
    or ``max_width`` modes. Estimating the sketched systems then reduces to
    counting joint frequencies of a handful of coordinates, which keeps the
    estimator variance bounded independently of ``d``.
    """

    indicator = True

    def __init__(self, dims, ranks, oversample: float = 2.0, include_far_end: bool = True,
                 max_width: int = 8, max_count: int = 4096):
        self.dims = tuple(int(n) for n in dims)
        d = len(self.dims)
        ranks = _full_ranks(ranks, d)
        self.left_modes, self.right_modes, self.counts = [], [], []
        for b, r in enumerate(ranks):
            target = int(np.ceil(oversample * r))
            lm = self._grow(list(range(b, -1, -1)), 0 if include_far_end else None,
                            target, max_width, max_count)
            rm = self._grow(list(range(b + 1, d)), d - 1 if include_far_end else None,
                            target, max_width, max_count)
            nl = int(np.prod([self.dims[j] for j in lm]))
            nr = int(np.prod([self.dims[j] for j in rm]))
            self.left_modes.append(lm)
            self.right_modes.append(rm)
            self.counts.append((nl, nr))

    def _grow(self, order, far, target, max_width, max_count):
        modes = [order[0]]
        if far is not None and far not in modes:
            modes.append(far)
        size = int(np.prod([self.dims[m] for m in modes]))
        for j in order[1:]:
            if size >= target or len(modes) >= max_width:
                break
            if j in modes:
                continue
            if size * self.dims[j] > max_count:
                break
            modes.append(j)
            size *= self.dims[j]
        return sorted(modes)

    def left_count(self, b):
        return self.counts[b][0]

    def right_count(self, b):
        return self.counts[b][1]

    def left(self, b, Y, codes=False):
        modes = self.left_modes[b]
        c = Y[:, modes] @ _strides([self.dims[m] for m in modes])
        return c if codes else _values(c, self.counts[b][0])

    def right(self, b, Y, codes=False):
        modes = self.right_modes[b]
        c = Y[:, modes] @ _strides([self.dims[m] for m in modes])
        return c if codes else _values(c, self.counts[b][1])

    def left_dense(self, b):
        grid = np.indices(self.dims[: b + 1]).reshape(b + 1, -1).T
        Y = np.zeros((len(grid), self.d), dtype=np.int64)
        Y[:, : b + 1] = grid
        return self.left(b, Y).T.reshape((self.counts[b][0],) + tuple(self.dims[: b + 1]))

    def right_dense(self, b):
        grid = np.indices(self.dims[b + 1:]).reshape(self.d - b - 1, -1).T
        Y = np.zeros((len(grid), self.d), dtype=np.int64)
        Y[:, b + 1:] = grid
        return self.right(b, Y).reshape(tuple(self.dims[b + 1:]) + (self.counts[b][1],))


class RandomProductSketch(SketchFamily):
    """Dense random sketches: every row is a product over all modes on its side
    of independent uniform(-1, 1) per-mode value tables."""

    def __init__(self, dims, ranks, rng, oversample: float = 2.0):
        self.dims = tuple(int(n) for n in dims)
        d = len(self.dims)
        self.counts = sketch_counts(self.dims, ranks, oversample)
        self.tables_l, self.tables_r = [], []
        for b, c in enumerate(self.counts):
            self.tables_l.append([rng.uniform(-1, 1, size=(self.dims[j], c)) for j in range(b + 1)])
            self.tables_r.append([rng.uniform(-1, 1, size=(self.dims[j], c)) for j in range(b + 1, d)])

    def left(self, b, Y, codes=False):
        out = np.ones((Y.shape[0], self.counts[b]))
        for j, tab in enumerate(self.tables_l[b]):
            out *= tab[Y[:, j]]
        return out

    def right(self, b, Y, codes=False):
        out = np.ones((Y.shape[0], self.counts[b]))
        for off, tab in enumerate(self.tables_r[b]):
            out *= tab[Y[:, b + 1 + off]]
        return out


def _side_counts(sketches: SketchFamily, b: int) -> tuple:
    c = sketches.counts[b]
    return c if isinstance(c, tuple) else (c, c)


def _accumulate_pair(left, right, nl, nr, w, n=None, mid=None) -> np.ndarray:
    """Weighted sum of outer products left[j] x (onehot(mid[j])) x right[j]."""
    if left.ndim == 1 and right.ndim == 1:
        ok = (left >= 0) & (right >= 0)
        if n is None:
            key = left[ok] * nr + right[ok]
            return np.bincount(key, weights=w[ok], minlength=nl * nr).reshape(nl, nr)
        key = (left[ok] * n + mid[ok]) * nr + right[ok]
        return np.bincount(key, weights=w[ok], minlength=nl * n * nr).reshape(nl, n, nr)
    L = _values(left, nl) if left.ndim == 1 else left
    R = _values(right, nr) if right.ndim == 1 else right
    if n is None:
        return (L * w[:, None]).T @ R
    out = np.zeros((nl, n, nr))
    for i in range(n):
        m = mid == i
        if m.any():
            out[:, i, :] = (L[m] * w[m, None]).T @ R[m]
    return out


def _check_samples(samples, dims):
    samples = np.asarray(samples, dtype=np.int64)
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise InvalidArgumentError("sample set must be a non-empty (N, d) array")
    if samples.shape[1] != len(dims):
        raise InvalidArgumentError(f"samples have d={samples.shape[1]}, sketches d={len(dims)}")
    if samples.min() < 0 or np.any(samples >= np.asarray(dims)):
        raise InvalidArgumentError("sample index out of range")
    return samples


def _weights(samples, weights):
    if weights is None:
        return np.full(samples.shape[0], 1.0 / samples.shape[0])
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (samples.shape[0],):
        raise InvalidArgumentError("weights must have one entry per sample")
    return w / w.sum()


def _eval_side(sketches, side, b, Y):
    fn = sketches.left if side == "l" else sketches.right
    return fn(b, Y, codes=True) if sketches.indicator else fn(b, Y)


def estimate_Bk_de(samples, sketches: SketchFamily, k: int, weights=None) -> np.ndarray:
    """Empirical ``B_k[z, i, w] = mean_j S_lt(z, y_<k) 1(y_k = i) S_gt(y_>k, w)``.

    ``weights`` (optional) replaces the uniform ``1/N`` weighting.
    """
    samples = _check_samples(samples, sketches.dims)
    w = _weights(samples, weights)
    d = sketches.d
    n = sketches.dims[k]
    N = samples.shape[0]
    if k == 0:
        left, nl = np.zeros(N, dtype=np.int64), 1
    else:
        left, nl = _eval_side(sketches, "l", k - 1, samples), _side_counts(sketches, k - 1)[0]
    if k == d - 1:
        right, nr = np.zeros(N, dtype=np.int64), 1
    else:
        right, nr = _eval_side(sketches, "r", k, samples), _side_counts(sketches, k)[1]
    if left.ndim != right.ndim:
        left = _values(left, nl) if left.ndim == 1 else left
        right = _values(right, nr) if right.ndim == 1 else right
    return _accumulate_pair(left, right, nl, nr, w, n=n, mid=samples[:, k])


def estimate_Zk_de(samples, sketches: SketchFamily, b: int, weights=None) -> np.ndarray:
    """Empirical ``Z_b[z, w] = mean_j S_lt(z, y_<=b) S_gt(y_>b, w)``."""
    samples = _check_samples(samples, sketches.dims)
    w = _weights(samples, weights)
    nl, nr = _side_counts(sketches, b)
    left = _eval_side(sketches, "l", b, samples)
    right = _eval_side(sketches, "r", b, samples)
    if left.ndim != right.ndim:
        left = _values(left, nl) if left.ndim == 1 else left
        right = _values(right, nr) if right.ndim == 1 else right
    return _accumulate_pair(left, right, nl, nr, w)


# ---------------------------------------------------------------------------
# core solves and drivers


@dataclass
class CoreLinearSystem:
    """``A_lt @ F[:, i, :] @ A_gt = B[:, i, :]`` for every mode value ``i``."""

    A_lt: np.ndarray
    A_gt: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        R, n, C = self.B.shape
        if self.A_lt.shape[0] != R or self.A_gt.shape[1] != C:
            raise InvalidArgumentError(
                f"inconsistent system: A_lt {self.A_lt.shape}, A_gt {self.A_gt.shape}, B {self.B.shape}"
            )


def solve_core(system: CoreLinearSystem) -> np.ndarray:
    """Least-squares core ``F`` of shape ``(r_{k-1}, n, r_k)``."""
    A_lt, A_gt, B = system.A_lt, system.A_gt, system.B
    R, n, C = B.shape
    X = least_squares_solve(A_lt, B.reshape(R, n * C)).reshape(A_lt.shape[1], n, C)
    # right solve: X A_gt = B'  <=>  A_gt^T X^T = B'^T
    Xt = X.reshape(-1, C).T
    F = least_squares_solve(A_gt.T, Xt).T
    return F.reshape(A_lt.shape[1], n, A_gt.shape[0])


def _assemble(Zs, Bs, ranks) -> TensorTrain:
    d = len(Bs)
    A_lt = [np.ones((1, 1))] + [None] * (d - 1)
    A_gt = [None] * (d - 1) + [np.ones((1, 1))]
    for b, Z in enumerate(Zs):
        r = min(ranks[b], *Z.shape)
        A_lt[b + 1], A_gt[b] = truncated_svd(Z, r)
    cores = []
    for k in range(d):
        try:
            cores.append(solve_core(CoreLinearSystem(A_lt[k], A_gt[k], Bs[k])))
        except NTTError as exc:
            raise type(exc)(f"node {k}: {exc}") from exc
    return TensorTrain(cores)


def tt_cross_run(
    oracle: EntryOracle,
    ranks,
    oversample: float = 2.0,
    sweeps: int = 2,
    rng: Optional[np.random.Generator] = None,
    pivots: Optional[PivotSet] = None,
) -> TensorTrain:
    """TT-cross compression of an entry oracle."""
    d = oracle.d
    if d == 1:
        return TensorTrain([oracle(np.arange(oracle.dims[0])[:, None]).reshape(1, -1, 1)])
    ranks = _full_ranks(ranks, d)
    if pivots is None:
        pivots = select_pivots_cross(oracle, ranks, oversample, sweeps, rng)
    Zs = [build_Zk_vi(oracle, pivots, b) for b in range(d - 1)]
    Bs = [build_Bk_vi(oracle, pivots, k) for k in range(d)]
    return _assemble(Zs, Bs, ranks)


def tt_sketch_run(
    samples,
    ranks,
    sketches: Optional[SketchFamily] = None,
    weights=None,
    dims=None,
    chunk: int = 65536,
) -> TensorTrain:
    """TT-sketch compression of an empirical distribution.

    All ``Z_b`` and ``B_k`` accumulators are filled in a single streaming pass
    over chunks of the sample set. The output may have negative entries.
    """
    if sketches is None:
        if dims is None:
            raise InvalidArgumentError("dims are required when no sketch family is given")
        sketches = ClusterSketch(dims, ranks)
    dims = sketches.dims
    samples = _check_samples(samples, dims)
    d = len(dims)
    N = samples.shape[0]
    w_all = _weights(samples, weights)
    if d == 1:
        hist = np.bincount(samples[:, 0], weights=w_all, minlength=dims[0])
        return TensorTrain([hist.reshape(1, -1, 1)])
    ranks = _full_ranks(ranks, d)
    Zs = [np.zeros(_side_counts(sketches, b)) for b in range(d - 1)]
    Bs = []
    for k in range(d):
        nl = 1 if k == 0 else _side_counts(sketches, k - 1)[0]
        nr = 1 if k == d - 1 else _side_counts(sketches, k)[1]
        Bs.append(np.zeros((nl, dims[k], nr)))
    for start in range(0, N, chunk):
        Y = samples[start:start + chunk]
        w = w_all[start:start + chunk]
        n_rows = Y.shape[0]
        prev_left = np.zeros(n_rows, dtype=np.int64)
        prev_nl = 1
        for b in range(d):
            if b < d - 1:
                left = _eval_side(sketches, "l", b, Y)
                right = _eval_side(sketches, "r", b, Y)
                nl, nr = _side_counts(sketches, b)
            else:
                right, nr = np.zeros(n_rows, dtype=np.int64), 1
            pl, rr = prev_left, right
            if pl.ndim != rr.ndim:
                pl = _values(pl, prev_nl) if pl.ndim == 1 else pl
                rr = _values(rr, nr) if rr.ndim == 1 else rr
            Bs[b] += _accumulate_pair(pl, rr, prev_nl, nr, w, n=dims[b], mid=Y[:, b])
            if b < d - 1:
                l2, r2 = left, right
                if l2.ndim != r2.ndim:
                    l2 = _values(l2, nl) if l2.ndim == 1 else l2
                    r2 = _values(r2, nr) if r2.ndim == 1 else r2
                Zs[b] += _accumulate_pair(l2, r2, nl, nr, w)
                prev_left, prev_nl = left, nl
    return _assemble(Zs, Bs, ranks)
