"""Command-line entry point ``rbdeconv``.

Subcommands ``bench``, ``phase``, ``noise``, ``deblur`` and ``check``. Results
go to ``--out`` as CSV with a JSON sidecar (``<out>.json``), or to stdout.
Exit status: 0 on success, 1 when ``check`` finds a failing property, 2 on
invalid arguments.
"""
import argparse
import csv
import io
import json
import logging
import sys

import numpy as np

from .. import __version__
from .._core import BACKEND
from ..solvers import SolverConfig
from .checks import run_check
from .imaging import KERNEL_KINDS, make_kernel, read_pgm, test_image, write_pgm
from .runners import (
    ALGORITHMS,
    THREADS_ENV,
    ExperimentSpec,
    ImageProblem,
    fit_slope,
    run_bench,
    run_deblur,
    run_noise,
    run_phase,
    thread_count,
)

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _algo_list(text):
    algos = [a.strip().upper() for a in text.split(",") if a.strip()]
    bad = [a for a in algos if a not in ALGORITHMS]
    if bad or not algos:
        raise argparse.ArgumentTypeError(f"unknown algorithm(s) {bad}; choose from {','.join(ALGORITHMS)}")
    return algos


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rbdeconv",
        description="Blind deconvolution experiments on the rank-one quotient manifold.",
        epilog=f"Set {THREADS_ENV}=n to run independent trials on n threads.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, K=100, N=100, L="600", trials=20):
        p.add_argument("--K", type=int, default=K, help="length of h (default %(default)s)")
        p.add_argument("--N", type=int, default=N, help="length of m (default %(default)s)")
        p.add_argument("--L", type=_int_list, default=_int_list(L), help="measurement count(s), comma separated")
        p.add_argument("--trials", type=int, default=trials, help="random trials per grid point")
        p.add_argument("--seed", type=int, default=0, help="root random seed")
        p.add_argument("--iters", type=int, default=2000, help="iteration limit per solve")
        p.add_argument("--out", help="CSV output path (JSON sidecar written next to it)")

    p = sub.add_parser("bench", help="operation counts per algorithm")
    common(p)
    p.add_argument("--algo", type=_algo_list, default=list(ALGORITHMS), help="comma separated subset of ROBB,NCBT,NCBB,AMA")

    p = sub.add_parser("phase", help="success rate against L/(K+N)")
    common(p, K=50, N=50, trials=100)
    p.add_argument("--ratio-grid", type=_float_list, default=[1.0, 1.5, 2.0, 2.5])
    p.add_argument("--algo", type=_algo_list, default=list(ALGORITHMS))

    p = sub.add_parser("noise", help="RMSE in dB against SNR in dB (ROBB)")
    common(p, L="500,1000", trials=10)
    p.add_argument("--snr-grid", type=_float_list, default=[10.0, 20.0, 30.0, 40.0, 50.0, 60.0])

    p = sub.add_parser("deblur", help="blind image deblurring with a Haar subspace")
    p.add_argument("--image", help="8-bit binary PGM with power-of-two sides (default: 256x256 camera)")
    p.add_argument("--kernel", choices=KERNEL_KINDS, default="motion")
    p.add_argument("--kernel-len", type=int, default=12)
    p.add_argument("--theta", type=float, default=45.0, help="motion angle in degrees")
    p.add_argument("--N", type=int, default=1250, help="number of Haar columns")
    p.add_argument("--dilate", type=int, default=0, help="grow the known support by this many pixels")
    p.add_argument("--iters", type=int, default=80)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV of checkpoints; the restored image goes to <out>.pgm")

    p = sub.add_parser("check", help="run the invariant suite")
    p.add_argument("--K", type=int, default=8)
    p.add_argument("--N", type=int, default=6)
    p.add_argument("--L", type=int, default=120)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="JSON report path (default stdout)")
    return parser


def _csv_text(rows):
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def _emit(rows, out, meta):
    text = _csv_text(rows)
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "w", newline="") as fh:
        fh.write(text)
    with open(out + ".json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=list)
        fh.write("\n")


def _meta(args, spec=None, **extra):
    meta = {
        "command": args.command,
        "version": __version__,
        "backend": BACKEND,
        "threads": thread_count(),
        "args": {k: v for k, v in vars(args).items() if k not in ("out", "verbose")},
    }
    if spec is not None:
        meta["spec"] = spec.as_dict()
    meta.update(extra)
    return meta


def _spec(args, kind):
    try:
        return ExperimentSpec(
            kind=kind,
            K=args.K,
            N=args.N,
            L=tuple(args.L),
            ratio_grid=tuple(getattr(args, "ratio_grid", (1.0, 1.5, 2.0, 2.5))),
            snr_grid=tuple(getattr(args, "snr_grid", (10.0, 20.0, 30.0, 40.0, 50.0, 60.0))),
            trials=args.trials,
            seed=args.seed,
            algos=tuple(getattr(args, "algo", ALGORITHMS)),
            max_iter=args.iters,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_bench(args):
    spec = _spec(args, "bench")
    _emit(run_bench(spec), args.out, _meta(args, spec, scale="full problem size; reduced trial count"))
    return EXIT_OK


def cmd_phase(args):
    spec = _spec(args, "phase")
    _emit(run_phase(spec), args.out, _meta(args, spec, scale="full problem size; coarse ratio grid"))
    return EXIT_OK


def cmd_noise(args):
    spec = _spec(args, "noise")
    rows = run_noise(spec)
    slopes = {
        L: fit_slope([r["snr_db"] for r in rows if r["L"] == L], [r["rmse_db"] for r in rows if r["L"] == L])
        for L in spec.L
    }
    _emit(rows, args.out, _meta(args, spec, slopes={str(k): v for k, v in slopes.items()}))
    return EXIT_OK


def cmd_deblur(args):
    if args.kernel_len < 1 or args.dilate < 0 or args.iters < 1 or args.N < 1:
        raise UsageError("--kernel-len, --N and --iters must be positive and --dilate non-negative")
    try:
        image = read_pgm(args.image) if args.image else test_image(256)
        problem = ImageProblem(image, make_kernel(args.kernel, args.kernel_len, args.theta), args.N)
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    marks = tuple(k for k in range(20, args.iters + 1, 20)) or (args.iters,)
    if args.iters not in marks:
        marks = marks + (args.iters,)
    cfg = SolverConfig(max_iter=args.iters, rel_residual_tol=None, checkpoints=marks)
    res = run_deblur(problem, cfg, dilate=args.dilate, seed=args.seed)
    meta = _meta(
        args,
        image_shape=list(problem.shape),
        K=res.K,
        relres=res.relres,
        relerr=res.relerr,
        energy_fraction=res.energy_fraction,
        scale="256x256 image instead of 1024x1024; N scaled accordingly",
    )
    _emit(res.checkpoints, args.out, meta)
    if args.out:
        write_pgm(args.out + ".pgm", res.image)
    return EXIT_OK


def cmd_check(args):
    report = run_check(seed=args.seed, L=args.L, K=args.K, N=args.N)
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for c in report["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['detail']}", file=sys.stderr)
    return EXIT_OK if report["passed"] else EXIT_CHECK_FAILED


COMMANDS = {
    "bench": cmd_bench,
    "phase": cmd_phase,
    "noise": cmd_noise,
    "deblur": cmd_deblur,
    "check": cmd_check,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on malformed arguments
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        thread_count()
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.error(str(exc))
    except ValueError as exc:
        if str(exc).startswith(THREADS_ENV):
            parser.error(str(exc))
        raise


if __name__ == "__main__":
    sys.exit(main())
