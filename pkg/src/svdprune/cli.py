"""Command-line front end: ``svdprune {prune,flops,bias}``.

Exit codes: 0 success, 2 usage error, 3 format/data error, 4 numerical error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from .bias_sim import BiasSimConfig, simulate_bias
from .errors import IoError, NumericalError, ParamError, SvdPruneError
from .flops import FlopsConfig, estimate_flops, format_table
from .matrix_io import load_matrix, save_matrix
from .prune import PruneConfig, prune

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

SCHEMA_VERSION = "1"
SCHEME_NAMES = {"all": "average_over_all", "attenders": "average_over_attenders"}


def _epsilon(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError(f"must be in (0, 1], got {text}")
    return value


def _bounded_int(lower):
    def parse(text):
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
        if value < lower:
            raise argparse.ArgumentTypeError(f"must be >= {lower}, got {value}")
        return value

    return parse


def _non_negative_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="svdprune", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prune", help="select vision tokens by leverage score")
    p.add_argument("input", nargs="?", help="NPY feature matrix (T x D)")
    p.add_argument("--epsilon", type=_epsilon, default=0.9, help="retained-variance threshold")
    p.add_argument("--min-tokens", type=_bounded_int(1), default=4)
    p.add_argument("--budget", type=_bounded_int(1), help="keep exactly this many tokens")
    p.add_argument("-o", "--output", help="path for the pruned NPY matrix")
    p.add_argument("--report", help="path for the JSON report (default: stdout)")
    p.add_argument("--indices-only", action="store_true", help="do not write a pruned matrix")
    p.add_argument("--batch", metavar="DIR", help="prune every .npy file in DIR")
    p.add_argument("--jobs", type=_bounded_int(1), default=1, help="batch worker threads")
    p.add_argument("--method", choices=("lapack", "jacobi"), default="lapack")
    p.set_defaults(handler=cmd_prune)

    f = sub.add_parser("flops", help="estimate pipeline FLOPs for retained vision tokens")
    f.add_argument("--vision-tokens", type=_bounded_int(1), nargs="+", required=True)
    f.add_argument("--text-tokens", type=_bounded_int(0))
    f.add_argument("--config", help="JSON file overriding FlopsConfig fields")
    f.add_argument("--format", choices=("json", "table"), default="table")
    f.set_defaults(handler=cmd_flops)

    b = sub.add_parser("bias", help="simulate positional bias of attention averaging")
    b.add_argument("--seq-len", type=_bounded_int(2), default=576)
    b.add_argument("--trials", type=_bounded_int(1), default=1000)
    b.add_argument("--self-boost", type=_non_negative_float, default=0.0)
    b.add_argument("--scheme", choices=tuple(SCHEME_NAMES), default="all")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", help="CSV output path (default: stdout)")
    b.set_defaults(handler=cmd_bias)
    return parser


def _fail(message, code):
    print(f"svdprune: error: {message}", file=sys.stderr)
    return code


def _exit_code(exc: SvdPruneError) -> int:
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    if isinstance(exc, ParamError):
        return EXIT_USAGE
    return EXIT_DATA


def build_report(input_path, cfg: PruneConfig, matrix, result) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "input_path": str(input_path),
        "T": matrix.rows,
        "D": matrix.cols,
        "epsilon": cfg.epsilon,
        "min_tokens": cfg.min_tokens,
        "mode": cfg.mode,
        "budget": cfg.budget,
        "truncation_rank": result.truncation_rank,
        "singular_values": result.factors.singular_values.tolist(),
        "variance_cumulative": result.variance.cumulative.tolist(),
        "leverage_scores": result.leverage_scores.tolist(),
        "selected_indices": result.selected_indices.tolist(),
        "m": result.m,
        "cumulative_leverage_at_m": result.cumulative_leverage_at_m,
    }


def _write_json(data, path):
    text = json.dumps(data, indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w") as fp:
            fp.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path!r}: {exc.strerror}") from exc


def _prune_one(input_path, cfg, output, report, method):
    matrix = load_matrix(input_path)
    result = prune(matrix, cfg, method=method)
    if output is not None:
        save_matrix(result.pruned, output)
    _write_json(build_report(input_path, cfg, matrix, result), report)


def _batch_inputs(directory: Path):
    return sorted(
        p for p in directory.iterdir() if p.suffix == ".npy" and not p.name.endswith(".pruned.npy")
    )


def cmd_prune(args, parser) -> int:
    if args.indices_only and args.output:
        parser.error("--indices-only cannot be combined with --output")
    cfg = PruneConfig(epsilon=args.epsilon, min_tokens=args.min_tokens, budget=args.budget)

    if args.batch is None:
        if args.input is None:
            parser.error("an input file or --batch DIR is required")
        try:
            _prune_one(args.input, cfg, args.output, args.report, args.method)
        except SvdPruneError as exc:
            return _fail(f"{args.input}: {exc}", _exit_code(exc))
        return EXIT_OK

    if args.input is not None or args.output or args.report:
        parser.error("--batch writes sibling files; do not pass INPUT, --output or --report")
    directory = Path(args.batch)
    if not directory.is_dir():
        return _fail(f"{directory}: not a directory", EXIT_DATA)

    def run(path):
        stem = path.name[: -len(".npy")]
        output = None if args.indices_only else directory / f"{stem}.pruned.npy"
        try:
            _prune_one(path, cfg, output, directory / f"{stem}.report.json", args.method)
        except SvdPruneError as exc:
            return path, exc
        return path, None

    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        outcomes = list(pool.map(run, _batch_inputs(directory)))
    code = EXIT_OK
    for path, exc in outcomes:
        if exc is not None:
            _fail(f"{path}: {exc}", _exit_code(exc))
            code = max(code, _exit_code(exc))
    print(f"processed {len(outcomes)} file(s), {sum(e is not None for _, e in outcomes)} failed")
    return code


def cmd_flops(args, parser) -> int:
    try:
        cfg = FlopsConfig.from_json(args.config) if args.config else FlopsConfig()
        if args.text_tokens is not None:
            cfg = replace(cfg, text_tokens=args.text_tokens)
        reports = [estimate_flops(n, cfg) for n in args.vision_tokens]
    except ParamError as exc:
        parser.error(str(exc))
    except OSError as exc:
        parser.error(f"cannot read config: {exc}")

    if args.format == "json":
        data = [r.as_dict() for r in reports]
        _write_json(data[0] if len(data) == 1 else data, None)
    else:
        print(format_table(reports))
    return EXIT_OK


def cmd_bias(args, parser) -> int:
    cfg = BiasSimConfig(
        seq_len=args.seq_len,
        trials=args.trials,
        self_boost=args.self_boost,
        scheme=SCHEME_NAMES[args.scheme],
        seed=args.seed,
    )
    profile = simulate_bias(cfg)
    summary = f"argmax_position {profile.argmax_position}"
    if args.out:
        try:
            profile.to_csv(args.out)
        except OSError as exc:
            return _fail(f"cannot write {args.out!r}: {exc.strerror}", EXIT_DATA)
        print(summary)
    else:
        profile.write_csv(sys.stdout)
        print(summary, file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    precision = os.environ.get("SVDPRUNE_PRECISION")
    if precision not in (None, "", "double"):
        parser.error(f"SVDPRUNE_PRECISION={precision!r} is not supported (only 'double')")
    return args.handler(args, parser)


if __name__ == "__main__":
    sys.exit(main())
