"""Command-line front end.

Commands: ``compress``, ``fit``, ``bench``, ``sample``, ``eval``. Exit status
is 0 on success, 2 on configuration or input errors and 3 on numerical
failures. Every command writes ``report.txt`` and ``report.json`` to ``--out``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import pipeline
from .config import ConfigError, ModelBlock, load_config
from .errors import InvalidArgumentError, NTTError
from .models import MODEL_NAMES

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("nttcompress")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration")
    common.add_argument("--seed", type=int, help="root random seed (unsigned 64-bit)")
    common.add_argument("--out", default=".", help="output directory (created if missing)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    p = argparse.ArgumentParser(prog="nttcompress",
                                description="Compress distribution tensors into positive tensor trains.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compress", parents=[common], help="stage one: build a tensor train")
    c.add_argument("--model", choices=MODEL_NAMES, help="built-in model (overrides [model] name)")
    c.add_argument("--samples", help="sample file for the sketch method")
    c.add_argument("--method", choices=("cross", "sketch"))
    c.add_argument("--ranks", type=int)

    f = sub.add_parser("fit", parents=[common], help="stage two: fit a positive tensor train")
    f.add_argument("--input", help="tensor train file to fit")
    f.add_argument("--model", choices=MODEL_NAMES, help="model used for entrywise evaluation")
    f.add_argument("--ranks", type=int)
    f.add_argument("--schedule", choices=("fixed", "adaptive"))
    f.add_argument("--solver", choices=("direct", "cg", "pcg"))
    f.add_argument("--method", choices=("newton", "multiplicative"))
    f.add_argument("--sweeps", type=int)

    b = sub.add_parser("bench", parents=[common], help="run a built-in example end to end")
    b.add_argument("name", choices=MODEL_NAMES)

    s = sub.add_parser("sample", parents=[common], help="draw samples from a positive tensor train")
    s.add_argument("--input", required=True, help="NTT file")
    s.add_argument("--count", type=int)

    e = sub.add_parser("eval", parents=[common], help="evaluate a tensor train against a model")
    e.add_argument("--input", required=True, help="tensor train file")
    e.add_argument("--model", choices=MODEL_NAMES)
    e.add_argument("--samples", help="sample file for the NLL")
    return p


def _with_model(cfg_kw: dict, args, cfg_file):
    name = getattr(args, "model", None)
    if name is None:
        return
    base = load_config(cfg_file).model
    if base is None or base.name != name:
        base = ModelBlock(name=name)
    cfg_kw["model"] = base


def build_config(args):
    kw = {"seed": args.seed}
    if args.command == "bench":
        base = load_config(args.config)
        model = base.model if base.model is not None else ModelBlock(name=args.name)
        if model.name != args.name:
            raise ConfigError(f"config describes model {model.name!r}, bench asked for {args.name!r}")
        defaults = dict(pipeline.BENCH_DEFAULTS[args.name])
        if args.config is not None:
            # explicit file values win over the benchmark defaults
            defaults = {k: v for k, v in defaults.items() if _not_in_file(args.config, k)}
        return load_config(args.config, model=model, **defaults, **kw)
    if args.command == "compress":
        kw.update(samples_path=args.samples, s1_method=args.method, s1_ranks=args.ranks)
        if args.samples is not None and args.method is None:
            kw["s1_method"] = "sketch"
    elif args.command == "fit":
        kw.update(tt_path=args.input, s2_ranks=args.ranks, schedule=args.schedule,
                  solver=args.solver, s2_method=args.method, sweeps=args.sweeps)
    elif args.command == "sample":
        kw.update(count=args.count)
    elif args.command == "eval":
        kw.update(samples_path=args.samples)
    _with_model(kw, args, args.config)
    return load_config(args.config, **kw)


def _not_in_file(path, attr) -> bool:
    import configparser

    from .config import _KEYS

    cp = configparser.ConfigParser()
    cp.read(path)
    for section, key, name, _ in _KEYS:
        if name == attr and cp.has_option(section, key):
            return False
    return True


def run(args) -> dict:
    cfg = build_config(args)
    os.makedirs(args.out, exist_ok=True)
    if args.command == "compress":
        report = pipeline.cmd_compress(cfg, args.out)
    elif args.command == "fit":
        report = pipeline.cmd_fit(cfg, args.out)
    elif args.command == "bench":
        report = pipeline.cmd_bench(cfg, args.out)
    elif args.command == "sample":
        report = pipeline.cmd_sample(cfg, args.out, args.input)
    else:
        report = pipeline.cmd_eval(cfg, args.out, args.input)
    pipeline.write_report(report, args.out)
    return report


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        report = run(args)
    except (InvalidArgumentError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"nttcompress {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NTTError as exc:
        print(f"nttcompress {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(pipeline.report_text(report), end="")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
