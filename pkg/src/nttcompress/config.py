"""Run configuration for the command-line front end.

Configs are INI files with one flat section per stage::

    [model]       name, d, n, gamma, lam, beta, lower, upper
    [input]       tt, samples            (paths; relative to the config file)
    [stage_one]   method (cross | sketch), ranks, oversample, sweeps,
                  samples, burn_in, thinning
    [stage_two]   method (newton | multiplicative), ranks, schedule
                  (fixed | adaptive), sigma, mu0, decay, solver
                  (direct | cg | pcg), sweeps, warm_init_iters, target_loss,
                  cg_tol, cg_max_iter, baseline_sweeps
    [eval]        entrywise_points, nll (yes | no), nll_samples
    [sample]      count

Every key is optional; missing keys take the defaults of :class:`RunConfig`.
Command-line flags override the file.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

from .errors import InvalidArgumentError
from .models import MODEL_NAMES
from .ntt_fit import SOLVERS


class ConfigError(InvalidArgumentError):
    """Malformed or inconsistent run configuration."""


@dataclass(frozen=True)
class ModelBlock:
    name: str
    d: int = 30
    n: int = 50
    gamma: float = 0.16
    lam: float = 0.16
    beta: Optional[float] = None
    lower: Optional[float] = None
    upper: Optional[float] = None

    def params(self) -> dict:
        out = {"d": self.d, "n": self.n, "gamma": self.gamma, "lam": self.lam}
        for key in ("beta", "lower", "upper"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        return out


@dataclass(frozen=True)
class RunConfig:
    model: Optional[ModelBlock] = None
    tt_path: Optional[str] = None
    samples_path: Optional[str] = None
    # stage one
    s1_method: str = "cross"
    s1_ranks: int = 10
    s1_oversample: float = 2.0
    s1_sweeps: int = 2
    s1_samples: int = 500_000
    s1_burn_in: int = 10_000
    s1_thinning: int = 5
    # stage two
    s2_method: str = "newton"
    s2_ranks: int = 10
    schedule: str = "adaptive"
    sigma: float = 0.2
    mu0: float = 1e-3
    decay: float = 0.5
    solver: str = "pcg"
    sweeps: int = 100
    warm_init_iters: int = 10
    target_loss: Optional[float] = None
    cg_tol: float = 1e-10
    cg_max_iter: int = 100
    baseline_sweeps: int = 1000
    # evaluation
    entrywise_points: int = 100_000
    nll: bool = False
    nll_samples: int = 0
    # sampling
    count: int = 10_000
    seed: int = 0
    source: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        if self.s1_method not in ("cross", "sketch"):
            raise ConfigError(f"stage_one.method must be cross or sketch, got {self.s1_method!r}")
        if self.s2_method not in ("newton", "multiplicative"):
            raise ConfigError(f"stage_two.method must be newton or multiplicative, got {self.s2_method!r}")
        if self.schedule not in ("fixed", "adaptive"):
            raise ConfigError(f"stage_two.schedule must be fixed or adaptive, got {self.schedule!r}")
        if self.solver not in SOLVERS:
            raise ConfigError(f"stage_two.solver must be one of {', '.join(SOLVERS)}")
        if self.s1_ranks < 1 or self.s2_ranks < 1:
            raise ConfigError("ranks must be >= 1")
        if self.sweeps < 0 or self.baseline_sweeps < 0 or self.warm_init_iters < 0:
            raise ConfigError("sweep counts must be >= 0")
        if self.s1_samples < 1 or self.s1_thinning < 1 or self.s1_burn_in < 0:
            raise ConfigError("stage_one sampling parameters out of range")
        if self.entrywise_points < 0 or self.count < 1 or self.nll_samples < 0:
            raise ConfigError("eval/sample counts out of range")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.model is not None and self.model.name not in MODEL_NAMES:
            raise ConfigError(
                f"unknown model {self.model.name!r}; valid names: {', '.join(MODEL_NAMES)}"
            )
        for path in (self.tt_path, self.samples_path):
            if path is not None and not os.path.exists(path):
                raise ConfigError(f"referenced file does not exist: {path}")

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self

    def echo(self) -> dict:
        """Plain-dict view of the configuration for reports."""
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "model"}
        out["model"] = asdict(self.model) if self.model is not None else None
        return out


# (section, key, attribute, converter)
_KEYS = [
    ("input", "tt", "tt_path", str),
    ("input", "samples", "samples_path", str),
    ("stage_one", "method", "s1_method", str),
    ("stage_one", "ranks", "s1_ranks", int),
    ("stage_one", "oversample", "s1_oversample", float),
    ("stage_one", "sweeps", "s1_sweeps", int),
    ("stage_one", "samples", "s1_samples", int),
    ("stage_one", "burn_in", "s1_burn_in", int),
    ("stage_one", "thinning", "s1_thinning", int),
    ("stage_two", "method", "s2_method", str),
    ("stage_two", "ranks", "s2_ranks", int),
    ("stage_two", "schedule", "schedule", str),
    ("stage_two", "sigma", "sigma", float),
    ("stage_two", "mu0", "mu0", float),
    ("stage_two", "decay", "decay", float),
    ("stage_two", "solver", "solver", str),
    ("stage_two", "sweeps", "sweeps", int),
    ("stage_two", "warm_init_iters", "warm_init_iters", int),
    ("stage_two", "target_loss", "target_loss", float),
    ("stage_two", "cg_tol", "cg_tol", float),
    ("stage_two", "cg_max_iter", "cg_max_iter", int),
    ("stage_two", "baseline_sweeps", "baseline_sweeps", int),
    ("eval", "entrywise_points", "entrywise_points", int),
    ("eval", "nll", "nll", "bool"),
    ("eval", "nll_samples", "nll_samples", int),
    ("sample", "count", "count", int),
    ("run", "seed", "seed", int),
]

_MODEL_KEYS = {"name": str, "d": int, "n": int, "gamma": float, "lam": float,
               "beta": float, "lower": float, "upper": float}


def _parse_parser(cp: configparser.ConfigParser, base_dir: str) -> dict:
    known = {"model", "input", "stage_one", "stage_two", "eval", "sample", "run"}
    unknown = set(cp.sections()) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {', '.join(sorted(unknown))}")
    kw = {}
    if cp.has_section("model"):
        sec = cp["model"]
        extra = set(sec) - set(_MODEL_KEYS)
        if extra:
            raise ConfigError(f"unknown keys in [model]: {', '.join(sorted(extra))}")
        if "name" not in sec:
            raise ConfigError("[model] requires a name")
        try:
            kw["model"] = ModelBlock(**{k: _MODEL_KEYS[k](v) for k, v in sec.items()})
        except ValueError as exc:
            raise ConfigError(f"[model]: {exc}") from exc
    allowed = {}
    for section, key, attr, conv in _KEYS:
        allowed.setdefault(section, set()).add(key)
        if not cp.has_option(section, key):
            continue
        try:
            if conv == "bool":
                kw[attr] = cp.getboolean(section, key)
            else:
                kw[attr] = conv(cp.get(section, key))
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}") from exc
        if attr in ("tt_path", "samples_path"):
            kw[attr] = os.path.normpath(os.path.join(base_dir, kw[attr]))
    for section in cp.sections():
        if section == "model":
            continue
        extra = set(cp[section]) - allowed.get(section, set())
        if extra:
            raise ConfigError(f"unknown keys in [{section}]: {', '.join(sorted(extra))}")
    return kw


def load_config(path: Optional[str] = None, **overrides) -> RunConfig:
    """Read an INI config (or start from defaults) and apply ``overrides``."""
    kw = {}
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        cp = configparser.ConfigParser()
        try:
            cp.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        kw = _parse_parser(cp, os.path.dirname(os.path.abspath(path)))
    kw.update({k: v for k, v in overrides.items() if v is not None})
    kw["source"] = path
    try:
        return RunConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
