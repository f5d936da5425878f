"""Built-in target distributions, an MCMC sampler and the NLL metric.

All models are evaluated in log space. Except for the heavy-tail model they
are nearest-neighbour chains, ``log p = sum_k u(z_k) + sum_k w(z_k, z_{k+1})``
(plus the wrap-around pair for the periodic Ising model), which gives exact
log-normalizers by transfer matrices and O(1) Metropolis updates.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from . import kernels
from .errors import DegenerateInputError, DomainError, InvalidArgumentError
from .stage_one import EntryOracle
from .tensor_core import TensorTrain, tt_log_eval_batch, tt_log_sum

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridSpec:
    lower: float
    upper: float
    n: int

    def __post_init__(self):
        if not self.lower < self.upper:
            raise InvalidArgumentError("grid requires lower < upper")
        if self.n < 2:
            raise InvalidArgumentError("grid requires n >= 2")

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.lower, self.upper, self.n)


def _check_d(d):
    if d < 2:
        raise InvalidArgumentError("models require d >= 2")


@dataclass(frozen=True)
class GinzburgLandau:
    gamma: float
    lam: float
    grid: GridSpec
    d: int

    def __post_init__(self):
        _check_d(self.d)

    @property
    def dims(self):
        return (self.grid.n,) * self.d

    def chain_tables(self):
        x = self.grid.points
        unary = -0.5 * self.lam * (1.0 - x**2) ** 2
        pair = -0.5 * self.gamma * (x[:, None] - x[None, :]) ** 2
        return unary, pair, False


@dataclass(frozen=True)
class GibbsKernel:
    beta: float
    grid: GridSpec
    d: int

    def __post_init__(self):
        _check_d(self.d)

    @property
    def dims(self):
        return (self.grid.n,) * self.d

    def chain_tables(self):
        x = self.grid.points
        return np.zeros_like(x), -self.beta * np.abs(x[:, None] - x[None, :]), False


@dataclass(frozen=True)
class HeavyTail:
    grid: GridSpec
    d: int

    def __post_init__(self):
        _check_d(self.d)

    @property
    def dims(self):
        return (self.grid.n,) * self.d

    def chain_tables(self):
        return None


@dataclass(frozen=True)
class PeriodicIsing:
    beta: float
    d: int

    def __post_init__(self):
        _check_d(self.d)

    @property
    def dims(self):
        return (2,) * self.d

    @property
    def spins(self):
        return np.array([-1.0, 1.0])

    def chain_tables(self):
        x = self.spins
        return np.zeros(2), self.beta * np.outer(x, x), True


ModelSpec = Union[GinzburgLandau, GibbsKernel, HeavyTail, PeriodicIsing]

MODEL_NAMES = ("gl", "gibbs", "heavytail", "ising")


def make_model(name: str, **params) -> ModelSpec:
    """Build a model from its short name and keyword parameters.

    Missing parameters default to the benchmark settings.
    """
    d = int(params.get("d", 30))
    n = int(params.get("n", 50))
    if name == "gl":
        grid = GridSpec(float(params.get("lower", -2.0)), float(params.get("upper", 2.0)), n)
        return GinzburgLandau(float(params.get("gamma", 0.16)), float(params.get("lam", 0.16)), grid, d)
    if name == "gibbs":
        grid = GridSpec(float(params.get("lower", -1.0)), float(params.get("upper", 1.0)), n)
        return GibbsKernel(float(params.get("beta", 0.3)), grid, d)
    if name == "heavytail":
        grid = GridSpec(float(params.get("lower", 0.0)), float(params.get("upper", 2.0)), n)
        return HeavyTail(grid, d)
    if name == "ising":
        return PeriodicIsing(float(params.get("beta", 0.5)), d)
    raise InvalidArgumentError(f"unknown model {name!r}; valid names: {', '.join(MODEL_NAMES)}")


def _check_idx(spec, idx):
    idx = np.asarray(idx, dtype=np.int64)
    single = idx.ndim == 1
    if single:
        idx = idx[None, :]
    if idx.ndim != 2 or idx.shape[1] != spec.d:
        raise InvalidArgumentError(f"index shape {idx.shape} invalid for d={spec.d}")
    if idx.size and (idx.min() < 0 or idx.max() >= spec.dims[0]):
        raise InvalidArgumentError("index out of range")
    return idx, single


def model_log_entry(spec: ModelSpec, idx):
    """Log of the unnormalized entry at one index or at each row of ``(N, d)``."""
    idx, single = _check_idx(spec, idx)
    if isinstance(spec, HeavyTail):
        z = spec.grid.points[idx]
        out = -np.log1p(np.sum(z * z, axis=1))
    else:
        unary, pair, periodic = spec.chain_tables()
        out = unary[idx].sum(axis=1) + pair[idx[:, :-1], idx[:, 1:]].sum(axis=1)
        if periodic:
            out = out + pair[idx[:, -1], idx[:, 0]]
    return float(out[0]) if single else out


def model_oracle(spec: ModelSpec) -> EntryOracle:
    return EntryOracle(lambda idx: np.exp(model_log_entry(spec, idx)), spec.dims)


def model_log_normalizer(spec: ModelSpec) -> float:
    """Exact ``log sum_i p(i)``.

    Chain models use log-scaled transfer-matrix products. The heavy-tail model
    uses ``1/(1+s) = int_0^inf exp(-t(1+s)) dt``, which factorizes over modes
    and leaves a one-dimensional quadrature.
    """
    if isinstance(spec, HeavyTail):
        x2 = spec.grid.points**2

        def integrand(t):
            return math.exp(-t + spec.d * logsumexp(-t * x2))

        # split where the integrand is concentrated to help the adaptive rule
        val = 0.0
        edges = [0.0, 1.0, 10.0, 100.0, np.inf]
        for a, b in zip(edges[:-1], edges[1:]):
            val += integrate.quad(integrand, a, b, epsabs=0.0, epsrel=1e-13, limit=200)[0]
        return math.log(val)
    unary, pair, periodic = spec.chain_tables()
    # T[a, b] = exp(u(a) + w(a, b)); log-domain matrix products
    logT = unary[:, None] + pair
    if periodic:
        logM = _log_matpow(logT, spec.d)
        return float(logsumexp(np.diag(logM)))
    logv = unary.copy()
    for _ in range(spec.d - 1):
        logv = logsumexp(logv[:, None] + pair + unary[None, :], axis=0)
    return float(logsumexp(logv))


def _log_matmul(A, B):
    return logsumexp(A[:, :, None] + B[None, :, :], axis=1)


def _log_matpow(logT, p):
    result = None
    base = logT
    while p:
        if p & 1:
            result = base if result is None else _log_matmul(result, base)
        base = _log_matmul(base, base)
        p >>= 1
    return result


def model_dense_log(spec: ModelSpec) -> np.ndarray:
    """Dense table of log-entries (small ``n**d`` only)."""
    grid = np.indices(spec.dims).reshape(spec.d, -1).T
    return model_log_entry(spec, grid).reshape(spec.dims)


@dataclass
class MCMCResult:
    samples: np.ndarray
    acceptance_rate: float
    steps: int


def mcmc_sample(
    spec: ModelSpec,
    N: int,
    burn_in: int = 10_000,
    thinning: int = 5,
    rng: Optional[np.random.Generator] = None,
    backend: Optional[str] = None,
    chunk: int = 1 << 20,
    return_info: bool = False,
):
    """Single-site Metropolis chain over the discrete index space.

    Each step picks a uniformly random mode and proposes a uniformly random
    different grid value for it; the proposal is accepted with probability
    ``min(1, exp(delta log p))``. After ``burn_in`` steps every ``thinning``-th
    state is recorded until ``N`` samples are collected.

    Random numbers are drawn in blocks of ``chunk`` steps, so the chain is
    reproducible for a fixed ``(rng, chunk)`` pair; changing ``chunk`` yields a
    different (equally valid) chain.

    Returns an ``(N, d)`` array of 0-based indices (or :class:`MCMCResult`
    when ``return_info``).
    """
    if N < 1:
        raise InvalidArgumentError("N must be >= 1")
    if thinning < 1 or burn_in < 0:
        raise InvalidArgumentError("thinning must be >= 1 and burn_in >= 0")
    rng = np.random.default_rng() if rng is None else rng
    kern = kernels.get_backend(backend)
    d, n = spec.d, spec.dims[0]
    tables = spec.chain_tables()
    if tables is None:
        heavy = True
        unary = np.zeros(n)
        pair = np.zeros((n, n))
        periodic = False
        sq = spec.grid.points**2
    else:
        heavy = False
        unary, pair, periodic = tables
        sq = np.zeros(n)
    unary = np.ascontiguousarray(unary, dtype=np.float64)
    pair = np.ascontiguousarray(pair, dtype=np.float64)
    sq = np.ascontiguousarray(sq, dtype=np.float64)
    state = rng.integers(0, n, size=d).astype(np.int64)
    out = np.empty((N, d), dtype=np.int64)
    scratch = np.empty((0, d), dtype=np.int64)
    accepted = 0
    steps = 0

    def draws(T):
        sites = rng.integers(0, d, size=T).astype(np.int64)
        props = rng.integers(0, n - 1, size=T).astype(np.int64)
        logu = np.log(rng.random(T))
        return sites, props, logu

    remaining = burn_in
    while remaining > 0:
        T = min(chunk, remaining)
        _, acc = kern.metropolis_run(state, unary, pair, periodic, heavy, sq, *draws(T),
                                     T + 1, 0, scratch)
        accepted += acc
        steps += T
        remaining -= T
    recorded = 0
    phase = 0
    while recorded < N:
        T = min(chunk, (N - recorded) * thinning - phase)
        rec, acc = kern.metropolis_run(state, unary, pair, periodic, heavy, sq, *draws(T),
                                       thinning, phase, out[recorded:])
        recorded += rec
        accepted += acc
        steps += T
        phase = (phase + T) % thinning
    rate = accepted / steps if steps else 1.0
    if not 0.0 <= rate <= 1.0:
        raise RuntimeError(f"acceptance rate {rate} out of range")
    log.debug("MCMC: %d steps, acceptance rate %.4f", steps, rate)
    if return_info:
        return MCMCResult(out, rate, steps)
    return out


def average_log_likelihood(model, samples, log_normalizer: Optional[float] = None) -> float:
    """``mean_j log P(y_j) - log Z`` for an NTT or a model spec."""
    samples = np.asarray(samples, dtype=np.int64)
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise InvalidArgumentError("samples must be a non-empty (N, d) array")
    if isinstance(model, TensorTrain):
        sign, logp = tt_log_eval_batch(model, samples)
        bad = np.flatnonzero(~(sign > 0))
        if bad.size:
            raise DomainError(
                f"model value is not positive at samples {samples[bad[:5]].tolist()}"
            )
        if log_normalizer is None:
            zs, log_normalizer = tt_log_sum(model)
            if not zs > 0:
                raise DegenerateInputError("model normalization is not positive")
    else:
        logp = model_log_entry(model, samples)
        if log_normalizer is None:
            log_normalizer = model_log_normalizer(model)
    return float(np.mean(logp) - log_normalizer)


def nll(model, samples, log_normalizer: Optional[float] = None) -> float:
    """Negative average log-likelihood of ``samples`` under the normalized model."""
    return -average_log_likelihood(model, samples, log_normalizer)
