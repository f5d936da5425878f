"""Stage two: fitting a strictly positive tensor train to a reference TT.

The objective is ``||P_G - F||_F^2 - sum_k mu_k sum log G_k``. It is
minimized by alternating over cores with one damped Newton step per visit.
For a fixed node ``k`` the quadratic part only involves the environment
matrices

* ``M_lt``, ``M_gt``: Gram matrices of the left/right partial contractions of G,
* ``L_lt``, ``L_gt``: cross Gram matrices between partial contractions of G and F,

so that with ``Q(X)_j = M_lt X_j M_gt`` and ``T_j = L_lt F_j L_gt^T`` (slice
``j`` of the core along the mode axis)::

    l0(G_k) = <G_k, Q(G_k)> - 2 <G_k, T> + ||F||^2.

The Hessian of ``l0`` in one slice is ``2 (M_lt kron M_gt)`` and slices do not
couple, so the Newton system splits into ``n`` independent ``a_l*a_r`` systems.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np

from .errors import (
    DegenerateInputError,
    DomainError,
    FitAborted,
    InvalidArgumentError,
    NTTError,
    NumericalBreakdownError,
    StaleCacheError,
    StalledLineSearchError,
)
from .linear_solvers import batched_cg, batched_spd_solve
from .tensor_core import NonNegTensorTrain, TensorTrain, tt_inner, tt_log_inner

log = logging.getLogger(__name__)

SOLVERS = ("direct", "cg", "pcg")
MIN_STEP = 1e-16
DECREMENT_TOL = 1e-12


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class FixedSchedule:
    """``mu <- max(decay * mu, mu_min)`` after every sweep, starting at ``mu0``."""

    mu0: float = 1e-3
    decay: float = 0.5
    mu_min: float = 1e-12

    def __post_init__(self):
        if not self.mu0 > 0 or not self.mu_min > 0:
            raise InvalidArgumentError("mu0 and mu_min must be positive")
        if not 0 < self.decay < 1:
            raise InvalidArgumentError("decay must lie in (0, 1)")


@dataclass(frozen=True)
class AdaptiveSchedule:
    """Gradient-weighted barrier schedule.

    Before each sweep every node gets
    ``mu_k = max(mu_min, min(mu_k_prev, sigma * mean(G_k * |grad l0|)))``,
    with ``mu_k_prev = mu0`` before the first sweep. With ``per_visit`` the
    rule is applied at every node visit instead.

    ``mu_min`` only guards against a singular Hessian; it sits far below the
    fixed schedule's floor because stopping ``mu`` at 1e-12 leaves the barrier
    holding up the small entries at a relative loss near 1e-11.
    """

    sigma: float = 0.2
    mu0: float = 1e-3
    mu_min: float = 1e-20
    per_visit: bool = False

    def __post_init__(self):
        if not self.sigma > 0 or not self.mu0 > 0 or not self.mu_min > 0:
            raise InvalidArgumentError("sigma, mu0 and mu_min must be positive")


BarrierSchedule = Union[FixedSchedule, AdaptiveSchedule]


@dataclass(frozen=True)
class FitOptions:
    """Knobs of :func:`ntt_fit_run`.

    Parameters
    ----------
    sweeps : int
        Number of forward+backward sweeps ``L``.
    solver : {"direct", "cg", "pcg"}
        How each slice Newton system is solved. ``pcg`` switches to plain CG
        once ``mu`` drops below ``pcg_switch_mu``.
    cg_max_iter, cg_tol : int, float
        Iteration cap and relative residual target of (P)CG.
    alpha, beta : float
        Armijo fraction and backtracking factor of the line search.
    newton_steps : int
        Newton iterations per node visit.
    warm_init_iters : int
        Multiplicative sweeps used by :func:`warm_init` when no start is given.
    target_loss : float, optional
        Stop once the relative squared Frobenius loss is at or below this.
    max_seconds : float, optional
        Stop after the first sweep that ends past this wall-clock budget.
    instrument : bool
        Also compute the Newton decrement at the new point of every step
        (one extra direct solve per step) and store it in the trace records.
    """

    sweeps: int = 100
    solver: str = "pcg"
    cg_max_iter: int = 100
    cg_tol: float = 1e-10
    alpha: float = 0.3
    beta: float = 0.5
    newton_steps: int = 1
    warm_init_iters: int = 10
    pcg_switch_mu: float = 1e-8
    target_loss: Optional[float] = None
    max_seconds: Optional[float] = None
    instrument: bool = False

    def __post_init__(self):
        if self.sweeps < 0:
            raise InvalidArgumentError("sweeps must be >= 0")
        if self.solver not in SOLVERS:
            raise InvalidArgumentError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.cg_max_iter < 1 or not self.cg_tol > 0:
            raise InvalidArgumentError("cg_max_iter must be >= 1 and cg_tol > 0")
        if not 0 < self.alpha < 0.5:
            raise InvalidArgumentError("alpha must lie in (0, 0.5)")
        if not 0 < self.beta < 1:
            raise InvalidArgumentError("beta must lie in (0, 1)")
        if self.newton_steps < 1 or self.warm_init_iters < 0:
            raise InvalidArgumentError("newton_steps must be >= 1 and warm_init_iters >= 0")
        if not self.pcg_switch_mu >= 0:
            raise InvalidArgumentError("pcg_switch_mu must be >= 0")


# ---------------------------------------------------------------------------
# trace


@dataclass
class NewtonRecord:
    """Diagnostics of one Newton step on one node."""

    sweep: int
    node: int
    mu: float
    decrement: float
    step: float
    loss_change: float
    slope: float
    decrement_after: Optional[float] = None


TRACE_HEADER = ("sweep", "wall_ms", "rel_sq_frob", "mean_mu", "mean_step", "mean_decrement")


@dataclass
class FitTrace:
    """Per-sweep convergence history of a fit."""

    sweeps: List[int] = field(default_factory=list)
    wall_ms: List[float] = field(default_factory=list)
    rel_sq_frob: List[float] = field(default_factory=list)
    mus: List[np.ndarray] = field(default_factory=list)
    mean_step: List[float] = field(default_factory=list)
    mean_decrement: List[float] = field(default_factory=list)
    records: List[NewtonRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.sweeps)

    def append(self, sweep, wall_ms, rel, mus, steps, decrements):
        if self.sweeps and sweep <= self.sweeps[-1]:
            raise InvalidArgumentError("sweep indices must increase")
        self.sweeps.append(int(sweep))
        self.wall_ms.append(float(wall_ms))
        self.rel_sq_frob.append(float(rel))
        self.mus.append(np.asarray(mus, dtype=np.float64).copy())
        self.mean_step.append(float(np.mean(steps)) if len(steps) else 0.0)
        self.mean_decrement.append(float(np.mean(decrements)) if len(decrements) else 0.0)

    def rows(self):
        for i in range(len(self.sweeps)):
            mean_mu = float(np.mean(self.mus[i])) if self.mus[i].size else 0.0
            yield (self.sweeps[i], self.wall_ms[i], self.rel_sq_frob[i], mean_mu,
                   self.mean_step[i], self.mean_decrement[i])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(TRACE_HEADER)
            for row in self.rows():
                writer.writerow([str(row[0])] + [format(v, ".17g") for v in row[1:]])

    def time_to_reach(self, level: float) -> Optional[float]:
        """Wall time (ms) of the first sweep with loss at or below ``level``."""
        for ms, rel in zip(self.wall_ms, self.rel_sq_frob):
            if rel <= level:
                return ms
        return None


def read_trace_csv(path) -> FitTrace:
    """Load a trace written by :meth:`FitTrace.to_csv` (per-node mu is lost)."""
    trace = FitTrace()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != TRACE_HEADER:
            raise InvalidArgumentError(f"unexpected trace header {header}")
        for row in reader:
            trace.append(int(row[0]), float(row[1]), float(row[2]), [float(row[3])],
                         [float(row[4])], [float(row[5])])
    return trace


# ---------------------------------------------------------------------------
# losses


def _check_pair(G: TensorTrain, F: TensorTrain):
    if G.d != F.d or G.dims != F.dims:
        raise InvalidArgumentError(f"shape mismatch: dims {G.dims} vs {F.dims}")


def loss_l0(G: TensorTrain, F: TensorTrain) -> float:
    """``||G - F||_F^2`` from three inner products (no dense tensors)."""
    _check_pair(G, F)
    return tt_inner(G, G) - 2.0 * tt_inner(G, F) + tt_inner(F, F)


def loss_barrier(core: np.ndarray) -> float:
    """``-sum log core``; raises :class:`DomainError` on a non-positive entry."""
    core = np.asarray(core, dtype=np.float64)
    if not np.all(core > 0):
        bad = tuple(int(i) for i in np.argwhere(~(core > 0))[0])
        raise DomainError(f"barrier undefined: entry {bad} = {core[bad]!r}")
    return float(-np.sum(np.log(core)))


# ---------------------------------------------------------------------------
# environments


def _left_gram(env, A, B):
    # sum_i A[:, i, :]^T env B[:, i, :]
    tmp = np.tensordot(env, B, axes=([1], [0]))  # (a, n, rb)
    return np.tensordot(A, tmp, axes=([0, 1], [0, 1]))


def _right_gram(env, A, B):
    # sum_i A[:, i, :] env B[:, i, :]^T
    tmp = np.tensordot(B, env.T, axes=([2], [0]))  # (rb, n, a)
    return np.tensordot(A, tmp, axes=([1, 2], [1, 2]))


class EnvironmentCache:
    """Environment matrices for every node, with staleness tracking.

    ``ML[k]``/``LL[k]`` contract cores ``0..k-1`` and ``MR[k]``/``LR[k]``
    contract cores ``k..d-1``; node ``k`` uses ``ML[k], MR[k+1], LL[k],
    LR[k+1]``. Every stored matrix remembers the core versions it was built
    from, so using an outdated one raises :class:`StaleCacheError`.

    The cache owns writable copies of the cores of G.
    """

    def __init__(self, G: TensorTrain, F: TensorTrain):
        _check_pair(G, F)
        self.cores = [np.array(c, dtype=np.float64) for c in G.cores]
        self.F = [np.asarray(c) for c in F.cores]
        self.d = G.d
        self.ff = tt_inner(F, F)
        one = np.ones((1, 1))
        d = self.d
        self.ML = [one] + [None] * d
        self.LL = [one] + [None] * d
        self.MR = [None] * d + [one]
        self.LR = [None] * d + [one]
        self._ver = [0] * d
        self._lstamp = [()] + [None] * d
        self._rstamp = [None] * d + [()]
        for k in range(d):
            self.advance_left(k)
        for k in range(d - 1, -1, -1):
            self.advance_right(k)

    # bookkeeping --------------------------------------------------------
    def set_core(self, k, core):
        self.cores[k] = core
        self._ver[k] += 1

    def left_fresh(self, k) -> bool:
        return self._lstamp[k] == tuple(self._ver[:k])

    def right_fresh(self, k) -> bool:
        return self._rstamp[k] == tuple(self._ver[k:])

    def advance_left(self, k):
        """Recompute ``ML[k+1], LL[k+1]`` from node ``k`` (requires fresh ``ML[k]``)."""
        if not self.left_fresh(k):
            raise StaleCacheError(f"left environment of node {k} is stale")
        G, F = self.cores[k], self.F[k]
        self.ML[k + 1] = _left_gram(self.ML[k], G, G)
        self.LL[k + 1] = _left_gram(self.LL[k], G, F)
        self._lstamp[k + 1] = tuple(self._ver[: k + 1])

    def advance_right(self, k):
        """Recompute ``MR[k], LR[k]`` from node ``k`` (requires fresh ``MR[k+1]``)."""
        if not self.right_fresh(k + 1):
            raise StaleCacheError(f"right environment of node {k} is stale")
        G, F = self.cores[k], self.F[k]
        self.MR[k] = _right_gram(self.MR[k + 1], G, G)
        self.LR[k] = _right_gram(self.LR[k + 1], G, F)
        self._rstamp[k] = tuple(self._ver[k:])

    def refresh_left(self):
        """Bring every left environment up to date (one O(d) pass)."""
        for k in range(self.d):
            if not self.left_fresh(k + 1):
                self.advance_left(k)

    def node(self, k):
        """``(M_lt, M_gt, L_lt, L_gt)`` for node ``k``; checks freshness."""
        if not (self.left_fresh(k) and self.right_fresh(k + 1)):
            raise StaleCacheError(f"environment of node {k} is stale")
        return self.ML[k], self.MR[k + 1], self.LL[k], self.LR[k + 1]

    def tt(self) -> NonNegTensorTrain:
        return NonNegTensorTrain(self.cores)

    def rel_loss_at(self, k) -> float:
        """Relative ``l0 / ||F||^2`` evaluated through node ``k``'s environment."""
        sub = NodeSubproblem.from_cache(self, k, 0.0)
        return sub.l0(self.cores[k]) / self.ff

    def max_deviation(self) -> float:
        """Largest relative deviation of fresh cached matrices from a rebuild."""
        ref = EnvironmentCache(TensorTrain(self.cores), TensorTrain(self.F))
        worst = 0.0
        for k in range(self.d + 1):
            pairs = []
            if self.left_fresh(k):
                pairs += [(self.ML[k], ref.ML[k]), (self.LL[k], ref.LL[k])]
            if self.right_fresh(k):
                pairs += [(self.MR[k], ref.MR[k]), (self.LR[k], ref.LR[k])]
            for a, b in pairs:
                scale = max(np.max(np.abs(b)), np.finfo(float).tiny)
                worst = max(worst, float(np.max(np.abs(a - b)) / scale))
        return worst


def build_cache(G: TensorTrain, F: TensorTrain) -> EnvironmentCache:
    """All environments by one left-to-right and one right-to-left pass."""
    return EnvironmentCache(G, F)


# ---------------------------------------------------------------------------
# single-node subproblem


class NodeSubproblem:
    """The objective restricted to one core, with the other cores frozen.

    Cores are handled in their natural ``(a_l, n, a_r)`` layout.
    """

    def __init__(self, M_lt, M_gt, target, mu, ff=0.0):
        self.M_lt = np.asarray(M_lt, dtype=np.float64)
        self.M_gt = np.asarray(M_gt, dtype=np.float64)
        self.target = np.asarray(target, dtype=np.float64)
        self.mu = float(mu)
        self.ff = float(ff)

    @classmethod
    def from_cache(cls, cache: EnvironmentCache, k: int, mu: float) -> "NodeSubproblem":
        M_lt, M_gt, L_lt, L_gt = cache.node(k)
        # T_j = L_lt F_j L_gt^T
        target = np.tensordot(L_lt, cache.F[k], axes=([1], [0])) @ L_gt.T
        return cls(M_lt, M_gt, target, mu, cache.ff)

    def quad(self, X):
        """``Q(X)_j = M_lt X_j M_gt``."""
        return np.tensordot(self.M_lt, X, axes=([1], [0])) @ self.M_gt

    def l0(self, core):
        return float(np.vdot(core, self.quad(core)) - 2.0 * np.vdot(core, self.target) + self.ff)

    def value(self, core):
        return self.l0(core) + self.mu * loss_barrier(core)

    def grad_l0(self, core):
        return 2.0 * (self.quad(core) - self.target)

    def gradient(self, core):
        return self.grad_l0(core) - self.mu / core

    def difference(self, core, direction, t, grad_l0=None):
        """Exact ``l(core + t*direction) - l(core)``.

        Written as first-order term plus curvature term plus barrier change so
        that no O(1) quantities are subtracted from each other.
        """
        if grad_l0 is None:
            grad_l0 = self.grad_l0(core)
        lin = t * float(np.vdot(grad_l0, direction))
        curv = t * t * float(np.vdot(direction, self.quad(direction)))
        bar = -self.mu * float(np.sum(np.log1p(t * direction / core)))
        return lin + curv + bar

    def hessian_slices(self, core):
        """Dense per-slice Hessians, shape ``(n, a_l*a_r, a_l*a_r)``."""
        K = 2.0 * np.kron(self.M_lt, self.M_gt)
        v = _slices(core)
        H = np.broadcast_to(K, (v.shape[0],) + K.shape).copy()
        idx = np.arange(K.shape[0])
        H[:, idx, idx] += self.mu / (v * v)
        return H


def _slices(core):
    """``(a_l, n, a_r)`` -> ``(n, a_l*a_r)`` row-major slice vectors."""
    a_l, n, a_r = core.shape
    return np.ascontiguousarray(core.transpose(1, 0, 2)).reshape(n, a_l * a_r)


def _unslices(V, shape):
    a_l, n, a_r = shape
    return np.ascontiguousarray(V.reshape(n, a_l, a_r).transpose(1, 0, 2))


def grad_node(cache: EnvironmentCache, k: int, mu: float, core=None) -> np.ndarray:
    """Gradient of the full objective with respect to core ``k``.

    ``2 (M_lt G_j M_gt - L_lt F_j L_gt^T) - mu / G`` slice by slice.
    """
    sub = NodeSubproblem.from_cache(cache, k, mu)
    return sub.gradient(cache.cores[k] if core is None else core)


def _solve_slices(M_lt, M_gt, mu, V, rhs, solver, cg_max_iter, cg_tol):
    """Solve ``(2 M_lt kron M_gt + mu diag(1/v_j^2)) x_j = rhs_j`` for every slice."""
    a_l, a_r = M_lt.shape[0], M_gt.shape[0]
    bar = mu / (V * V)
    if solver == "direct":
        K = 2.0 * np.kron(M_lt, M_gt)
        H = np.broadcast_to(K, (V.shape[0],) + K.shape).copy()
        idx = np.arange(K.shape[0])
        H[:, idx, idx] += bar
        return batched_spd_solve(H, rhs[:, :, None])[:, :, 0]

    def apply(P):
        X = P.reshape(-1, a_l, a_r)
        return 2.0 * (M_lt @ X @ M_gt).reshape(P.shape) + bar * P

    precond = bar if solver == "pcg" else None
    X, _, _ = batched_cg(apply, rhs, tol=cg_tol, max_iter=cg_max_iter, precond=precond)
    return X


def newton_direction_slice(v, M_lt, M_gt, mu, grad_slice, solver="direct",
                           cg_max_iter=100, cg_tol=1e-10) -> np.ndarray:
    """Newton step for one slice vector ``v`` (row-major ``a_l x a_r``).

    Solves ``(2 M_lt kron M_gt + mu diag(1/v^2)) dv = -grad_slice``.
    """
    v = np.asarray(v, dtype=np.float64)
    if not np.all(v > 0):
        raise DomainError("slice must be strictly positive")
    if solver not in SOLVERS:
        raise InvalidArgumentError(f"solver must be one of {SOLVERS}")
    out = _solve_slices(np.atleast_2d(M_lt), np.atleast_2d(M_gt), mu, v[None, :],
                        -np.asarray(grad_slice, dtype=np.float64)[None, :], solver,
                        cg_max_iter, cg_tol)
    return out[0]


def newton_direction(sub: NodeSubproblem, core, grad, solver="direct",
                     cg_max_iter=100, cg_tol=1e-10) -> np.ndarray:
    """Newton direction for a whole core (all slices solved together)."""
    V = _slices(core)
    try:
        X = _solve_slices(sub.M_lt, sub.M_gt, sub.mu, V, -_slices(grad), solver,
                          cg_max_iter, cg_tol)
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdownError(f"slice Hessian factorization failed: {exc}") from exc
    return _unslices(X, core.shape)


def newton_decrement(grad, direction) -> float:
    """``sqrt(-<grad, direction>)`` for a Newton (or CG-Newton) direction."""
    s = float(np.vdot(grad, direction))
    if s > DECREMENT_TOL:
        raise NumericalBreakdownError(
            f"<grad, direction> = {s!r} > 0: Hessian is not positive definite"
        )
    return math.sqrt(max(-s, 0.0))


def line_search(sub: NodeSubproblem, core, direction, alpha=0.3, beta=0.5, slope=None,
                grad_l0=None):
    """Backtracking search for ``t = beta**m``.

    Strict positivity of ``core + t*direction`` is tested before the Armijo
    condition ``l(core + t d) <= l(core) + alpha t <grad, d>``.

    Returns ``(t, loss_change)``.
    """
    if not (0 < alpha < 0.5 and 0 < beta < 1):
        raise InvalidArgumentError("need alpha in (0, 0.5) and beta in (0, 1)")
    if grad_l0 is None:
        grad_l0 = sub.grad_l0(core)
    if slope is None:
        slope = float(np.vdot(grad_l0 - sub.mu / core, direction))
    if not slope < 0:
        raise InvalidArgumentError(f"direction is not a descent direction (slope {slope!r})")
    t = 1.0
    while t >= MIN_STEP:
        if np.all(core + t * direction > 0):
            change = sub.difference(core, direction, t, grad_l0)
            if change <= alpha * t * slope:
                return t, change
        t *= beta
    raise StalledLineSearchError(f"line search step fell below {MIN_STEP}")


def _solver_for(options: FitOptions, mu: float) -> str:
    if options.solver == "pcg" and mu < options.pcg_switch_mu:
        return "cg"
    return options.solver


@dataclass
class NodeStats:
    mu: float
    step: float
    decrement: float


def newton_step(sub: NodeSubproblem, core, options: FitOptions, solver=None):
    """One damped Newton step. Returns ``(new_core, t, lam, change, slope)``."""
    solver = solver or _solver_for(options, sub.mu)
    g0 = sub.grad_l0(core)
    grad = g0 - sub.mu / core
    direction = newton_direction(sub, core, grad, solver, options.cg_max_iter, options.cg_tol)
    slope = float(np.vdot(grad, direction))
    lam = newton_decrement(grad, direction)
    # the achievable decrease is lam^2 / 2; below rounding of the loss there is nothing to gain
    scale = sub.ff + abs(float(np.vdot(core, g0))) + sub.mu * core.size
    if not slope < 0 or lam * lam <= 1e-20 * scale:
        return core, 0.0, lam, 0.0, slope
    t, change = line_search(sub, core, direction, options.alpha, options.beta, slope, g0)
    new = core + t * direction
    if not np.all(new > 0):
        raise NumericalBreakdownError("positivity lost after an accepted step")
    return new, t, lam, change, slope


def _decrement_at(sub: NodeSubproblem, core) -> float:
    grad = sub.gradient(core)
    direction = newton_direction(sub, core, grad, "direct")
    return newton_decrement(grad, direction)


def update_node(cache: EnvironmentCache, k: int, mu: float, options: FitOptions,
                records: Optional[list] = None, sweep: int = 0) -> NodeStats:
    """Run ``options.newton_steps`` Newton iterations on core ``k`` in place."""
    sub = NodeSubproblem.from_cache(cache, k, mu)
    core = cache.cores[k]
    steps, lams = [], []
    for _ in range(options.newton_steps):
        new, t, lam, change, slope = newton_step(sub, core, options)
        if records is not None:
            rec = NewtonRecord(sweep, k, mu, lam, t, change, slope)
            if options.instrument:
                rec.decrement_after = _decrement_at(sub, new)
            records.append(rec)
        steps.append(t)
        lams.append(lam)
        core = new
    cache.set_core(k, core)
    return NodeStats(mu, float(np.mean(steps)), float(np.mean(lams)))


def adaptive_mu(core, grad_l0, mu_prev, sigma, mu_min) -> float:
    """``max(mu_min, min(mu_prev, sigma * mean(core * |grad_l0|)))``."""
    core = np.asarray(core)
    mu_tilde = sigma * float(np.sum(core * np.abs(grad_l0))) / core.size
    return max(mu_min, min(mu_prev, mu_tilde))


# ---------------------------------------------------------------------------
# multiplicative baseline and initialization


def _check_positive_start(G0):
    if not isinstance(G0, NonNegTensorTrain):
        G0 = NonNegTensorTrain(G0.cores)
    return G0


def _sweep_order(d):
    return list(range(d)) + list(range(d - 1, -1, -1))


def _advance(cache, k, pos):
    """Advance the environments after updating node ``k`` at sweep position ``pos``.

    Forward visits extend the left environments. From the turning point on
    (node ``d-1`` is visited twice in a row) the right ones are extended.
    """
    if pos < cache.d - 1:
        cache.advance_left(k)
    else:
        cache.advance_right(k)


def multiplicative_update_run(
    F: TensorTrain,
    G0: TensorTrain,
    n_iter: int,
    floor: float = 1e-9,
    target_loss: Optional[float] = None,
    max_seconds: Optional[float] = None,
    return_trace: bool = False,
    _clock_start: Optional[float] = None,
):
    """Lee-Seung style multiplicative sweeps.

    Each visit applies ``G_k <- G_k * max(T, floor) / Q(G_k)`` where
    ``T = grad <F, G>`` and ``Q(G_k) = grad <G, G> / 2``; nodes are visited
    ``0..d-1`` then ``d-1..0``.
    """
    if n_iter < 0:
        raise InvalidArgumentError("n_iter must be >= 0")
    if not floor > 0:
        raise InvalidArgumentError("floor must be positive")
    G0 = _check_positive_start(G0)
    start = time.perf_counter() if _clock_start is None else _clock_start
    cache = EnvironmentCache(G0, F)
    trace = FitTrace()
    d = cache.d
    order = _sweep_order(d)
    for it in range(1, n_iter + 1):
        for pos, k in enumerate(order):
            sub = NodeSubproblem.from_cache(cache, k, 0.0)
            core = cache.cores[k]
            denom = sub.quad(core)
            new = core * np.maximum(sub.target, floor) / denom
            if not np.all(np.isfinite(new)) or not np.all(new > 0):
                raise NumericalBreakdownError(f"multiplicative update broke down at node {k}",
                                              iteration=it)
            cache.set_core(k, new)
            _advance(cache, k, pos)
        cache.refresh_left()
        rel = cache.rel_loss_at(0)
        trace.append(it, 1e3 * (time.perf_counter() - start), rel, [], [], [])
        if target_loss is not None and rel <= target_loss:
            break
        if max_seconds is not None and time.perf_counter() - start >= max_seconds:
            break
    G = cache.tt()
    return (G, trace) if return_trace else G


def rescale_cores(G: TensorTrain) -> NonNegTensorTrain:
    """Equalize core Frobenius norms without changing the represented tensor."""
    norms = np.array([np.linalg.norm(c) for c in G.cores])
    if not np.all(norms > 0):
        raise DegenerateInputError(f"core {int(np.argmin(norms))} has zero norm")
    logs = np.log(norms)
    c = np.exp(logs.mean() - logs)
    return NonNegTensorTrain([core * ck for core, ck in zip(G.cores, c)])


def _full_ranks(ranks, d):
    if np.isscalar(ranks):
        ranks = [int(ranks)] * (d - 1)
    ranks = [int(r) for r in ranks]
    if len(ranks) != d - 1:
        raise InvalidArgumentError(f"expected {d - 1} interior ranks, got {len(ranks)}")
    if min(ranks, default=1) < 1:
        raise InvalidArgumentError("ranks must be >= 1")
    return [1] + ranks + [1]


def warm_init(F: TensorTrain, ranks, rng: np.random.Generator, mult_iters: int = 10,
              low: float = 1e-3) -> NonNegTensorTrain:
    """Random positive start, scale-matched to ``F`` by multiplicative sweeps.

    Cores are drawn uniformly from ``(low, 1)``, uniformly rescaled so that
    ``||G||_F`` matches ``||F||_F``, refined by ``mult_iters`` multiplicative
    sweeps and finally balanced with :func:`rescale_cores`.

    The multiplicative floor shrinks entries whose reference gradient is
    negative by orders of magnitude per sweep, and a barrier Newton step can at
    most double an entry. Entries below ``low`` times the largest entry of
    their core are therefore raised to that level before balancing.
    """
    full = _full_ranks(ranks, F.d)
    cores = [rng.uniform(low, 1.0, size=(full[k], n, full[k + 1])) for k, n in enumerate(F.dims)]
    G = NonNegTensorTrain(cores)
    sf, log_ff = tt_log_inner(F, F)
    if sf <= 0:
        raise DegenerateInputError("reference tensor train has zero norm")
    _, log_gg = tt_log_inner(G, G)
    c = math.exp((log_ff - log_gg) / (2 * F.d))
    G = NonNegTensorTrain([core * c for core in G.cores])
    if mult_iters:
        G = multiplicative_update_run(F, G, mult_iters)
        G = NonNegTensorTrain([np.maximum(c, low * c.max()) for c in G.cores])
    return rescale_cores(G)


# ---------------------------------------------------------------------------
# driver


def _sweep_start_mus(cache, schedule, mus, first):
    if isinstance(schedule, FixedSchedule):
        if first:
            return np.full(cache.d, schedule.mu0)
        return np.maximum(mus * schedule.decay, schedule.mu_min)
    if schedule.per_visit:
        return mus
    cache.refresh_left()
    out = np.empty(cache.d)
    for k in range(cache.d):
        sub = NodeSubproblem.from_cache(cache, k, 0.0)
        core = cache.cores[k]
        out[k] = adaptive_mu(core, sub.grad_l0(core), mus[k], schedule.sigma, schedule.mu_min)
    return out


def ntt_fit_run(
    F: TensorTrain,
    options: FitOptions = FitOptions(),
    schedule: BarrierSchedule = AdaptiveSchedule(),
    G0: Optional[TensorTrain] = None,
    rng: Optional[np.random.Generator] = None,
    ranks=None,
):
    """Fit a strictly positive tensor train to ``F``.

    Parameters
    ----------
    F : TensorTrain
        Reference. It is not normalized here.
    G0 : TensorTrain, optional
        Strictly positive start. Without it :func:`warm_init` is called with
        ``ranks`` (default: the ranks of ``F``).

    Returns
    -------
    (NonNegTensorTrain, FitTrace)

    Raises
    ------
    FitAborted
        When a node update fails; ``exc.trace`` holds the sweeps completed.
    """
    start = time.perf_counter()
    if G0 is None:
        rng = np.random.default_rng() if rng is None else rng
        G0 = warm_init(F, F.ranks if ranks is None else ranks, rng, options.warm_init_iters)
    else:
        G0 = _check_positive_start(G0)
        _check_pair(G0, F)
    trace = FitTrace()
    if options.sweeps == 0:
        return G0, trace
    cache = EnvironmentCache(G0, F)
    if not cache.ff > 0:
        raise DegenerateInputError("reference tensor train has zero norm")
    d = cache.d
    order = _sweep_order(d)
    mus = np.full(d, schedule.mu0)
    records = []
    for sweep in range(1, options.sweeps + 1):
        mus = _sweep_start_mus(cache, schedule, mus, sweep == 1)
        steps, lams = [], []
        for pos, k in enumerate(order):
            try:
                if isinstance(schedule, AdaptiveSchedule) and schedule.per_visit:
                    sub = NodeSubproblem.from_cache(cache, k, 0.0)
                    core = cache.cores[k]
                    mus[k] = adaptive_mu(core, sub.grad_l0(core), mus[k], schedule.sigma,
                                         schedule.mu_min)
                stats = update_node(cache, k, float(mus[k]), options, records, sweep)
            except NTTError as exc:
                trace.records = records
                raise FitAborted(f"node {k} failed in sweep {sweep}: {exc}", trace=trace,
                                 node=k) from exc
            steps.append(stats.step)
            lams.append(stats.decrement)
            _advance(cache, k, pos)
        rel = cache.rel_loss_at(0)
        elapsed = time.perf_counter() - start
        trace.append(sweep, 1e3 * elapsed, rel, mus, steps, lams)
        log.debug("sweep %d: rel loss %.3e, mean mu %.3e", sweep, rel, float(np.mean(mus)))
        if not math.isfinite(rel):
            raise FitAborted(f"loss became non-finite in sweep {sweep}", trace=trace)
        if options.target_loss is not None and rel <= options.target_loss:
            break
        if options.max_seconds is not None and elapsed >= options.max_seconds:
            break
    trace.records = records
    return cache.tt(), trace
