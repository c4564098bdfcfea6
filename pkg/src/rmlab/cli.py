"""Command-line entry point: ``rmlab <command> [flags]``.

Reports go to stdout as JSON; sample tables go to ``--out`` (or stdout for
``simulate``). Exit codes: 0 ok, 1 usage error, 2 a verdict failed, 3 I/O.
"""

import argparse
import csv
import io
import json
import os
import statistics
import sys
import time
from dataclasses import asdict, dataclass

from . import experiments, linalg
from .errors import InvalidParams, RmlabError
from .experiments import DEFAULT_TOLERANCES, FIELDS, ExperimentConfig, SpectralSample
from .matgen import MatrixParams, derive_stream, sample_matrix

EXIT_OK, EXIT_USAGE, EXIT_VERDICT, EXIT_IO = 0, 1, 2, 3
COMMANDS = ("simulate", "verify-clt", "error-scaling", "bulk-check", "identity-check", "bench")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class Command:
    name: str
    config: ExperimentConfig
    format: str = "csv"
    out: str = None
    repeat: int = 5
    bins: int = 40
    lo: float = None
    hi: float = None


@dataclass(frozen=True)
class BenchResult:
    p: int
    n: int
    t_estimators: float
    t_full_eigen: float
    speedup: float


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _grid(text):
    try:
        pairs = []
        for item in text.split(","):
            p, n = item.split(":")
            pairs.append((int(p), int(n)))
        return tuple(pairs)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected p1:n1,p2:n2,..., got {text!r}")


def _build_parser():
    common = _Parser(add_help=False, allow_abbrev=False)
    common.add_argument("--p", type=int, default=256, help="rows (default 256)")
    common.add_argument("--n", type=int, default=512, help="columns (default 512)")
    common.add_argument("--mu", type=float, default=1.0, help="entry mean (default 1)")
    common.add_argument("--sigma", type=float, default=1.0, help="entry std (default 1)")
    common.add_argument(
        "--seed", type=int, default=None, help="master seed (default $RMLAB_SEED, else 42)"
    )
    common.add_argument("--reps", type=int, default=100, help="replications (default 100)")
    common.add_argument(
        "--parallelism", type=int, default=1, help="worker processes, 0 = all cores (default 1)"
    )
    common.add_argument("--grid", type=_grid, default=None, help='sizes "p1:n1,p2:n2,..."')
    common.add_argument("--out", default=None, help="write samples to PATH")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument(
        "--eigensolver",
        choices=experiments.EIGENSOLVERS,
        default="dense",
        help="route for lambda2 and the centered lambda1 (default dense)",
    )
    common.add_argument("--repeat", type=int, default=5, help="bench timing runs (default 5, min 3)")
    common.add_argument("--bins", type=int, default=40, help="bulk-check histogram bins")
    common.add_argument("--lo", type=float, default=None, help="bulk-check range start (default a - 0.1)")
    common.add_argument("--hi", type=float, default=None, help="bulk-check range end (default b + 0.1)")
    tol_help = ", ".join(f"{k.replace('_', '-')}={v}" for k, v in DEFAULT_TOLERANCES.items())
    parser = _Parser(
        prog="rmlab",
        allow_abbrev=False,
        description="Monte Carlo checks for the largest eigenvalue of noncentral sample covariance matrices.",
        epilog=f"Tolerance overrides: --tol-KEY VALUE with KEY one of: {tol_help}",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], allow_abbrev=False)
    return parser


def _tolerances(extra):
    tols = {}
    items = list(extra)
    while items:
        flag = items.pop(0)
        value = None
        if "=" in flag:
            flag, value = flag.split("=", 1)
        if not flag.startswith("--tol-"):
            raise UsageError(f"unrecognized argument: {flag}")
        key = flag[len("--tol-") :].replace("-", "_")
        if key not in DEFAULT_TOLERANCES:
            raise UsageError(f"unknown tolerance {flag}")
        if value is None:
            if not items:
                raise UsageError(f"{flag} needs a value")
            value = items.pop(0)
        try:
            tols[key] = float(value)
        except ValueError:
            raise UsageError(f"{flag} expects a number, got {value!r}")
        if not tols[key] >= 0:
            raise UsageError(f"{flag} must be non-negative")
    return tols


def parse(argv, env=None):
    """Turn an argument list into a Command; raises UsageError on bad input."""
    env = os.environ if env is None else env
    args, extra = _build_parser().parse_known_args(list(argv))
    tolerances = _tolerances(extra)
    seed = args.seed
    if seed is None:
        raw = env.get("RMLAB_SEED")
        try:
            seed = int(raw) if raw else 42
        except ValueError:
            raise UsageError(f"RMLAB_SEED must be an integer, got {raw!r}")
    if args.reps < 1:
        raise UsageError(f"--reps must be >= 1, got {args.reps}")
    if args.parallelism < 0:
        raise UsageError(f"--parallelism must be >= 0, got {args.parallelism}")
    if args.command == "bench" and args.repeat < 3:
        raise UsageError(f"--repeat must be >= 3, got {args.repeat}")
    if args.command == "error-scaling" and (not args.grid or len(args.grid) < 3):
        raise UsageError("--grid needs at least 3 sizes for error-scaling")
    if args.bins < 1:
        raise UsageError(f"--bins must be >= 1, got {args.bins}")
    try:
        params = MatrixParams(args.p, args.n, args.mu, args.sigma, seed)
    except InvalidParams as exc:
        flag = "--p" if args.p < 1 else "--n" if args.n < 1 else "--mu" if args.mu < 0 else "--sigma"
        raise UsageError(f"{flag}: {exc}")
    try:
        config = ExperimentConfig(
            params=params,
            replications=args.reps,
            parallelism=args.parallelism,
            size_grid=args.grid,
            tolerances=tolerances,
            output_path=args.out,
            eigensolver=args.eigensolver,
        )
    except InvalidParams as exc:
        raise UsageError(f"--grid: {exc}")
    return Command(
        name=args.command,
        config=config,
        format=args.format,
        out=args.out,
        repeat=args.repeat,
        bins=args.bins,
        lo=args.lo,
        hi=args.hi,
    )


# -- persistence --------------------------------------------------------------


def _num(value):
    """17 significant digits: round-trip exact for binary64."""
    return format(float(value), ".17g")


def _row(sample):
    return [str(sample.rep_index)] + [_num(getattr(sample, f)) for f in FIELDS[1:]]


def samples_text(samples, fmt, params=None):
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["rep", *FIELDS[1:]])
        for s in samples:
            writer.writerow(_row(s))
        return buf.getvalue()
    if fmt == "json":
        # numbers are written by hand so both formats carry the same decimals
        records = []
        for s in samples:
            values = _row(s)
            body = ", ".join(f'"{k}": {v}' for k, v in zip(("rep", *FIELDS[1:]), values))
            records.append("    {" + body + "}")
        head = json.dumps(experiments._params_dict(params) if params else {})
        inner = ",\n".join(records)
        return f'{{"params": {head}, "samples": [\n{inner}\n]}}\n' if records else (
            f'{{"params": {head}, "samples": []}}\n'
        )
    raise InvalidParams(f"unknown format {fmt!r}")


def write_samples(samples, path, fmt="csv", params=None):
    text = samples_text(samples, fmt, params)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _sample(record):
    return SpectralSample(
        rep_index=int(record["rep"]),
        **{f: float(record[f]) for f in FIELDS[1:]},
    )


def parse_samples(text, fmt="csv"):
    if fmt == "csv":
        return [_sample(row) for row in csv.DictReader(io.StringIO(text))]
    return [_sample(rec) for rec in json.loads(text)["samples"]]


def read_samples(path, fmt="csv"):
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_samples(fh.read(), fmt)


# -- bench --------------------------------------------------------------------


def _median_time(fn, repeat):
    fn()  # warm-up, excluded
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return statistics.median(times)


def run_bench(params, repeat=5, size_limit=linalg.DEFAULT_SIZE_LIMIT):
    """Median wall-clock of both estimators against a full Jacobi eigensolve.

    Both paths run on the same pre-sampled X; the full path forms the
    smaller Gram matrix and diagonalizes it.
    """
    if repeat < 3:
        raise InvalidParams(f"repeat must be >= 3, got {repeat}")
    if min(params.p, params.n) > size_limit:
        raise linalg.SizeExceeded(f"min(p, n) = {min(params.p, params.n)} exceeds {size_limit}")
    X = sample_matrix(params, derive_stream(params.seed, 0))

    def estimators():
        linalg.estimator_one(X)
        linalg.estimator_two(X)

    def full():
        linalg.full_spectrum(linalg.gram(X), size_limit=size_limit)

    t_est = _median_time(estimators, repeat)
    t_full = _median_time(full, repeat)
    return BenchResult(
        p=params.p,
        n=params.n,
        t_estimators=t_est,
        t_full_eigen=t_full,
        speedup=t_full / t_est,
    )


# -- main ---------------------------------------------------------------------


def _emit(payload):
    sys.stdout.write(json.dumps(payload, indent=2, allow_nan=False) + "\n")


def _run(cmd):
    cfg = cmd.config
    if cmd.name == "simulate":
        samples = experiments.run_replications(cfg)
        if cmd.out:
            write_samples(samples, cmd.out, cmd.format, cfg.params)
        else:
            sys.stdout.write(samples_text(samples, cmd.format, cfg.params))
        return EXIT_OK
    if cmd.name == "bench":
        _emit(asdict(run_bench(cfg.params, cmd.repeat)))
        return EXIT_OK
    if cmd.name == "verify-clt":
        report = experiments.verify_clt(cfg)
    elif cmd.name == "error-scaling":
        report = experiments.error_scaling(cfg)
    elif cmd.name == "bulk-check":
        report = experiments.bulk_check(cfg, bins=cmd.bins, lo=cmd.lo, hi=cmd.hi)
    else:
        report = experiments.identity_checks(cfg)
    samples = getattr(report, "samples", None)
    if cmd.out and samples is not None:
        write_samples(samples, cmd.out, cmd.format, cfg.params)
    _emit(report.to_dict())
    return EXIT_OK if report.passed else EXIT_VERDICT


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        cmd = parse(argv)
    except UsageError as exc:
        sys.stderr.write(f"rmlab: usage error: {exc}\n")
        return EXIT_USAGE
    try:
        return _run(cmd)
    except OSError as exc:
        sys.stderr.write(f"rmlab: I/O error: {exc}\n")
        return EXIT_IO
    except RmlabError as exc:
        sys.stderr.write(f"rmlab: {type(exc).__name__}: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
