"""Two-stage pipeline runs and their reports.

A report is a JSON-compatible dict with the fixed top-level keys in
:data:`REPORT_KEYS`:

``command``
    Name of the command that produced it.
``seed``
    Root seed of all random streams.
``config``
    Echo of the effective :class:`~nttcompress.config.RunConfig`.
``stage_one``
    ``method``, ``ranks``, ``num_samples``, ``entrywise_error`` (vs the model
    oracle, ``null`` without a model) and ``has_negative_entries`` (whether
    a sampled entry of the stage-one tensor train was negative).
``stage_two``
    One entry per fitting strategy with ``final_loss`` and ``sweeps``.
``evaluation``
    ``entrywise_error`` of the fitted model vs the oracle, ``nll_model``,
    ``nll_true`` and the matching ``avg_loglik_*`` values; ``null`` when not
    available.
``timing``
    Wall-clock seconds per stage, per-strategy time ratios against the
    multiplicative baseline and times to reach fixed loss levels. This is
    the only machine-dependent block.
``artifacts``
    Sorted names of the files written next to the report.

Every other block is a deterministic function of the config and the seed.
"""

from __future__ import annotations

import json
import logging
import math
import os
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import RunConfig
from .errors import DomainError, InvalidArgumentError, NumericalBreakdownError
from .io import read_samples, read_tt, write_samples, write_tt
from .models import (
    make_model,
    mcmc_sample,
    model_log_entry,
    model_log_normalizer,
    model_oracle,
    nll,
)
from .ntt_fit import (
    AdaptiveSchedule,
    FitOptions,
    FitTrace,
    FixedSchedule,
    multiplicative_update_run,
    ntt_fit_run,
    warm_init,
)
from .stage_one import tt_cross_run, tt_sketch_run
from .tensor_core import TensorTrain, tt_log_eval_batch, tt_log_inner, tt_log_sum

log = logging.getLogger(__name__)

REPORT_KEYS = ("artifacts", "command", "config", "evaluation", "seed", "stage_one",
               "stage_two", "timing")
# (strategy name, schedule, solver); the baseline is added separately
STRATEGIES = (
    ("fixed_direct", "fixed", "direct"),
    ("adaptive_direct", "adaptive", "direct"),
    ("adaptive_cg", "adaptive", "cg"),
    ("adaptive_pcg", "adaptive", "pcg"),
)
BASELINE = "multiplicative"
PRIMARY = "adaptive_pcg"
REACH_LEVELS = (1e-3, 1e-5, 1e-8, 1e-10)

# Benchmark settings for the built-in examples.
BENCH_DEFAULTS = {
    "gl": dict(s1_method="cross", s1_ranks=10, s2_ranks=20, sweeps=60, target_loss=1e-11,
               baseline_sweeps=2000),
    "gibbs": dict(s1_method="cross", s1_ranks=20, s2_ranks=20, sweeps=60, target_loss=1e-11,
                  baseline_sweeps=2000),
    "heavytail": dict(s1_method="cross", s1_ranks=20, s2_ranks=20, sweeps=60,
                      target_loss=1e-11, baseline_sweeps=2000),
    "ising": dict(s1_method="sketch", s1_ranks=10, s2_ranks=10, sweeps=1500, target_loss=1e-6,
                  baseline_sweeps=5000, s1_thinning=30, nll=True),
}


def streams(seed: int) -> dict:
    """Independent generators for each random consumer of a run."""
    names = ("stage_one", "mcmc", "warm_init", "eval", "sample")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {n: np.random.default_rng(s) for n, s in zip(names, children)}


# ---------------------------------------------------------------------------
# reports


def new_report(command: str, cfg: RunConfig) -> dict:
    echo = cfg.echo()
    echo.pop("source", None)
    return {
        "artifacts": [],
        "command": command,
        "config": echo,
        "evaluation": None,
        "seed": cfg.seed,
        "stage_one": None,
        "stage_two": None,
        "timing": {},
    }


def _check_finite(obj, path="report"):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _check_finite(v, f"{path}.{k}")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _check_finite(v, f"{path}[{i}]")
    elif isinstance(obj, float) and not math.isfinite(obj):
        raise NumericalBreakdownError(f"{path} is not finite ({obj})")


def report_json(report: dict) -> str:
    if tuple(sorted(report)) != REPORT_KEYS:
        raise InvalidArgumentError(f"report keys {sorted(report)} differ from {REPORT_KEYS}")
    _check_finite(report)
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k in sorted(obj):
            yield from _flatten(obj[k], f"{prefix}.{k}" if prefix else k)
    elif isinstance(obj, list) and obj and all(isinstance(x, (dict, list)) for x in obj):
        for i, x in enumerate(obj):
            yield from _flatten(x, f"{prefix}[{i}]")
    else:
        yield prefix, obj


def report_text(report: dict) -> str:
    lines = [f"{key} = {_fmt(val)}" for key, val in _flatten(report)]
    return "\n".join(lines) + "\n"


def _fmt(val):
    if isinstance(val, float):
        return repr(val)
    if isinstance(val, list):
        return ", ".join(str(v) for v in val) if val else "(none)"
    return "null" if val is None else str(val)


def write_report(report: dict, out_dir: str, stem: str = "report") -> str:
    """Write ``<stem>.txt`` and its JSON twin ``<stem>.json``; return the text path."""
    report["artifacts"] = sorted(set(report["artifacts"]) | {f"{stem}.txt", f"{stem}.json"})
    text_path = os.path.join(out_dir, f"{stem}.txt")
    payload = report_json(report)
    with open(os.path.join(out_dir, f"{stem}.json"), "w") as fh:
        fh.write(payload)
    with open(text_path, "w") as fh:
        fh.write(report_text(report))
    return text_path


def deterministic_view(report: dict) -> dict:
    """The report without its wall-clock block."""
    return {k: v for k, v in report.items() if k != "timing"}


# ---------------------------------------------------------------------------
# metrics


def log_entrywise_error(spec, tt: TensorTrain, points: int, rng, log_scale: float = 0.0,
                        normalized: bool = False):
    """Mean relative entrywise error of ``exp(log_scale) * tt`` vs the model.

    Works in log space so that entries far below the float range still compare
    correctly. With ``normalized`` both sides are divided by their sums first
    (density estimation recovers the law only up to scale). Also returns
    whether any sampled entry of ``tt`` was negative.
    """
    if points < 1:
        return None, None
    idx = np.stack([rng.integers(0, n, size=points) for n in tt.dims], axis=1)
    ref = model_log_entry(spec, idx)
    sign, logv = tt_log_eval_batch(tt, idx)
    if normalized:
        zsign, log_z = tt_log_sum(tt)
        if not zsign > 0:
            raise DomainError("tensor train sum is not positive; cannot normalize")
        ref = ref - model_log_normalizer(spec)
        log_scale = -log_z
    approx = sign * np.exp(logv + log_scale - ref)
    return float(np.mean(np.abs(approx - 1.0))), bool(np.any(sign < 0))


def _log_norm(tt: TensorTrain) -> float:
    sign, log_sq = tt_log_inner(tt, tt)
    if sign <= 0:
        raise DomainError("tensor train has zero norm")
    return 0.5 * log_sq


def normalize(tt: TensorTrain):
    """``(tt / ||tt||_F, log ||tt||_F)`` with the factor spread over all cores."""
    log_norm = _log_norm(tt)
    factor = math.exp(-log_norm / tt.d)
    return tt.with_cores([c * factor for c in tt.cores]), log_norm


def rescale(tt: TensorTrain, log_factor: float) -> TensorTrain:
    """Multiply ``tt`` by ``exp(log_factor)``, spreading the factor over all cores."""
    factor = math.exp(log_factor / tt.d)
    return tt.with_cores([c * factor for c in tt.cores])


# ---------------------------------------------------------------------------
# stages


@dataclass
class StageOneResult:
    tt: TensorTrain
    samples: Optional[np.ndarray]
    seconds: float


def run_stage_one(cfg: RunConfig, rng: dict) -> StageOneResult:
    start = time.perf_counter()
    samples = None
    if cfg.s1_method == "cross":
        if cfg.model is None:
            raise InvalidArgumentError("stage_one.method = cross needs a [model] block")
        spec = make_model(cfg.model.name, **cfg.model.params())
        tt = tt_cross_run(model_oracle(spec), cfg.s1_ranks, oversample=cfg.s1_oversample,
                          sweeps=cfg.s1_sweeps, rng=rng["stage_one"])
    else:
        if cfg.samples_path is not None:
            samples, dims = read_samples(cfg.samples_path)
        elif cfg.model is not None:
            spec = make_model(cfg.model.name, **cfg.model.params())
            samples = mcmc_sample(spec, cfg.s1_samples, burn_in=cfg.s1_burn_in,
                                  thinning=cfg.s1_thinning, rng=rng["mcmc"])
            dims = spec.dims
        else:
            raise InvalidArgumentError("stage_one.method = sketch needs samples or a [model] block")
        tt = tt_sketch_run(samples, cfg.s1_ranks, dims=dims)
    return StageOneResult(tt, samples, time.perf_counter() - start)


def fit_options(cfg: RunConfig, solver: Optional[str] = None) -> FitOptions:
    return FitOptions(sweeps=cfg.sweeps, solver=solver or cfg.solver, cg_max_iter=cfg.cg_max_iter,
                      cg_tol=cfg.cg_tol, warm_init_iters=cfg.warm_init_iters,
                      target_loss=cfg.target_loss)


def make_schedule(cfg: RunConfig, kind: Optional[str] = None):
    kind = kind or cfg.schedule
    if kind == "fixed":
        return FixedSchedule(mu0=cfg.mu0, decay=cfg.decay)
    return AdaptiveSchedule(sigma=cfg.sigma, mu0=cfg.mu0)


def run_strategy(F: TensorTrain, G0, cfg: RunConfig, name: str):
    """Fit ``F`` from ``G0`` with one named strategy; returns ``(G, trace)``."""
    if name == BASELINE:
        return multiplicative_update_run(F, G0, cfg.baseline_sweeps, target_loss=cfg.target_loss,
                                         return_trace=True)
    for sname, kind, solver in STRATEGIES:
        if sname == name:
            return ntt_fit_run(F, fit_options(cfg, solver), make_schedule(cfg, kind), G0=G0)
    raise InvalidArgumentError(f"unknown strategy {name!r}")


def strategy_name(cfg: RunConfig) -> str:
    if cfg.s2_method == "multiplicative":
        return BASELINE
    return f"{cfg.schedule}_{cfg.solver}"


def _trace_summary(trace: FitTrace) -> dict:
    return {
        "final_loss": trace.rel_sq_frob[-1] if len(trace) else None,
        "sweeps": len(trace),
    }


def _reach_times(trace: FitTrace) -> dict:
    out = {}
    for level in REACH_LEVELS:
        t = trace.time_to_reach(level)
        out[f"{level:.0e}"] = None if t is None else t / 1e3
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_compress(cfg: RunConfig, out_dir: str) -> dict:
    rng = streams(cfg.seed)
    report = new_report("compress", cfg)
    s1 = run_stage_one(cfg, rng)
    write_tt(os.path.join(out_dir, "stage_one.tt"), s1.tt)
    report["artifacts"].append("stage_one.tt")
    if s1.samples is not None and cfg.samples_path is None:
        write_samples(os.path.join(out_dir, "samples.bin"), s1.samples, s1.tt.dims)
        report["artifacts"].append("samples.bin")
    report["stage_one"] = _stage_one_block(cfg, s1, rng)
    report["timing"]["stage_one_s"] = s1.seconds
    return report


def _stage_one_block(cfg, s1, rng):
    err, neg = None, None
    if cfg.model is not None:
        spec = make_model(cfg.model.name, **cfg.model.params())
        err, neg = log_entrywise_error(spec, s1.tt, cfg.entrywise_points, rng["eval"],
                                       normalized=cfg.s1_method == "sketch")
    elif cfg.entrywise_points:
        idx = np.stack([rng["eval"].integers(0, n, size=cfg.entrywise_points)
                        for n in s1.tt.dims], axis=1)
        neg = bool(np.any(tt_log_eval_batch(s1.tt, idx)[0] < 0))
    return {
        "entrywise_error": err,
        "has_negative_entries": neg,
        "method": cfg.s1_method,
        "num_samples": None if s1.samples is None else int(s1.samples.shape[0]),
        "ranks": list(s1.tt.ranks),
    }


def cmd_fit(cfg: RunConfig, out_dir: str, tt_path: Optional[str] = None) -> dict:
    tt_path = tt_path or cfg.tt_path
    if tt_path is None:
        raise InvalidArgumentError("fit needs an input tensor train ([input] tt or --input)")
    rng = streams(cfg.seed)
    report = new_report("fit", cfg)
    F, log_norm = normalize(read_tt(tt_path))
    start = time.perf_counter()
    G0 = warm_init(F, cfg.s2_ranks, rng["warm_init"], cfg.warm_init_iters)
    name = strategy_name(cfg)
    if name == BASELINE:
        G, trace = run_strategy(F, G0, cfg, BASELINE)
    else:
        G, trace = ntt_fit_run(F, fit_options(cfg), make_schedule(cfg), G0=G0)
    seconds = time.perf_counter() - start
    write_tt(os.path.join(out_dir, "fit.ntt"), rescale(G, log_norm))
    trace.to_csv(os.path.join(out_dir, f"trace_{name}.csv"))
    report["artifacts"] += ["fit.ntt", f"trace_{name}.csv"]
    report["stage_two"] = {name: _trace_summary(trace)}
    report["evaluation"] = _evaluate(cfg, G, log_norm, None, rng)
    report["timing"]["stage_two_s"] = {name: seconds}
    report["timing"]["time_to_reach_s"] = {name: _reach_times(trace)}
    return report


def _evaluate(cfg, G, log_norm, samples, rng) -> dict:
    out = {"avg_loglik_model": None, "avg_loglik_true": None, "entrywise_error": None,
           "nll_model": None, "nll_true": None}
    spec = make_model(cfg.model.name, **cfg.model.params()) if cfg.model is not None else None
    if spec is not None and cfg.entrywise_points:
        out["entrywise_error"], _ = log_entrywise_error(spec, G, cfg.entrywise_points,
                                                        rng["eval"], log_norm,
                                                        normalized=cfg.s1_method == "sketch")
    if cfg.nll and samples is not None:
        out["nll_model"] = nll(G, samples)
        out["avg_loglik_model"] = -out["nll_model"]
        if spec is not None:
            out["nll_true"] = nll(spec, samples)
            out["avg_loglik_true"] = -out["nll_true"]
    return out


def cmd_bench(cfg: RunConfig, out_dir: str) -> dict:
    """Stage one, then every fitting strategy and the baseline from one warm start."""
    rng = streams(cfg.seed)
    report = new_report("bench", cfg)
    s1 = run_stage_one(cfg, rng)
    write_tt(os.path.join(out_dir, "stage_one.tt"), s1.tt)
    report["artifacts"].append("stage_one.tt")
    report["stage_one"] = _stage_one_block(cfg, s1, rng)
    report["timing"]["stage_one_s"] = s1.seconds
    F, log_norm = normalize(s1.tt)
    G0 = warm_init(F, cfg.s2_ranks, rng["warm_init"], cfg.warm_init_iters)
    results, stage_two, seconds, reach = {}, {}, {}, {}
    for name in [s[0] for s in STRATEGIES] + [BASELINE]:
        start = time.perf_counter()
        G, trace = run_strategy(F, G0, cfg, name)
        seconds[name] = time.perf_counter() - start
        log.info("%s: %d sweeps, loss %.3e, %.1f s", name, len(trace),
                 trace.rel_sq_frob[-1] if len(trace) else float("nan"), seconds[name])
        trace.to_csv(os.path.join(out_dir, f"trace_{name}.csv"))
        report["artifacts"].append(f"trace_{name}.csv")
        results[name] = G
        stage_two[name] = _trace_summary(trace)
        reach[name] = _reach_times(trace)
    G = results[PRIMARY]
    write_tt(os.path.join(out_dir, "fit.ntt"), rescale(G, log_norm))
    report["artifacts"].append("fit.ntt")
    report["stage_two"] = stage_two
    report["evaluation"] = _evaluate(cfg, G, log_norm, s1.samples, rng)
    base = seconds[BASELINE]
    report["timing"].update({
        "stage_two_s": seconds,
        "ratio_vs_baseline": {k: (v / base if base > 0 else None) for k, v in seconds.items()},
        "time_to_reach_s": reach,
    })
    return report


def cmd_sample(cfg: RunConfig, out_dir: str, ntt_path: str, count: Optional[int] = None) -> dict:
    from .tensor_core import ntt_sample

    rng = streams(cfg.seed)
    report = new_report("sample", cfg)
    ntt = read_tt(ntt_path, require_ntt=True)
    count = cfg.count if count is None else count
    samples = ntt_sample(ntt, count, rng["sample"])
    write_samples(os.path.join(out_dir, "samples.bin"), samples, ntt.dims)
    report["artifacts"].append("samples.bin")
    return report


def cmd_eval(cfg: RunConfig, out_dir: str, ntt_path: str,
             samples_path: Optional[str] = None) -> dict:
    """Entrywise error vs the model oracle and NLL on a sample file."""
    rng = streams(cfg.seed)
    report = new_report("eval", cfg)
    G = read_tt(ntt_path)
    samples = None
    samples_path = samples_path or cfg.samples_path
    if samples_path is not None:
        samples, dims = read_samples(samples_path)
        if tuple(dims) != G.dims:
            raise InvalidArgumentError(f"sample dims {dims} differ from model dims {G.dims}")
    cfg_eval = cfg.with_overrides(nll=samples is not None or cfg.nll)
    report["evaluation"] = _evaluate(cfg_eval, G, 0.0, samples, rng)
    return report
