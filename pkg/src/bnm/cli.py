"""Command line interface.

Subcommands: metrics, grad-check, sample-stats, bench, train. All write CSV
to standard output or ``--out``. Exit codes: 0 success, 1 usage error,
2 input validation failure, 3 numerical failure.
"""
import argparse
import csv
import io
import sys
from dataclasses import replace

import numpy as np

from bnm import bench, gradients, metrics, sampling, trainer
from bnm.errors import BnmError, NumericalError, ValidationError
from bnm.matrix import from_rows, read_matrix, softmax
from bnm.samples import gap_filtered_matrix, selection_stable_mask, sharp_matrix

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

GRAD_TOLERANCES = {"entropy": 1e-7, "frobenius": 1e-7, "nuclear": 1e-5, "fast": 1e-7}
GRAD_STEPS = {"entropy": 1e-6, "frobenius": 1e-6, "nuclear": 1e-5, "fast": 1e-6}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".6g")
    return str(value)


def write_csv(header, rows, out):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    text = buf.getvalue()
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- metrics

def cmd_metrics(args):
    values = read_matrix(args.input)
    A = from_rows(values, check_rows=not args.no_validate)
    d = metrics.resolve_d(A, args.d)
    rep = metrics.bounds_report(A)
    row = [A.rows, A.cols, rep.entropy, rep.frobenius, rep.nuclear,
           metrics.fast_nuclear_norm(A, d), metrics.predicted_category_count(A),
           metrics.effective_rank(A), rep.chain_ok]
    write_csv(["b", "c", "entropy", "frobenius", "nuclear", "fast_nuclear",
               "predicted_categories", "effective_rank", "chain_ok"], [row], args.out)


# ------------------------------------------------------------- grad-check

def grad_check_case(objective, b, c, seed, probes, d=None, step=None):
    """Run one finite-difference check; returns (report, resampled draws)."""
    rng = np.random.default_rng(seed)
    step = GRAD_STEPS[objective] if step is None else step
    resampled = 0
    mask = None
    scale_step = True
    if objective == "entropy":
        A = softmax(rng.standard_normal((b, c))).values
        f, g = metrics.entropy, gradients.entropy_grad
    elif objective == "frobenius":
        A = softmax(rng.standard_normal((b, c))).values
        f, g = metrics.frobenius_norm, gradients.frobenius_grad
    elif objective == "nuclear":
        A, resampled = gap_filtered_matrix(rng, b, c)
        f, g = metrics.nuclear_norm, gradients.nuclear_grad
        scale_step = False
    elif objective == "fast":
        A = sharp_matrix(rng, b, c)
        d = metrics.resolve_d(A, d)
        f = lambda a: metrics.fast_nuclear_norm(a, d)  # noqa: E731
        g = lambda a: gradients.fast_nuclear_grad(a, d)  # noqa: E731
        mask = selection_stable_mask(A, d, step)
    else:
        raise UsageError(f"unknown objective {objective!r}")
    report = gradients.finite_diff_check(f, g, A, step=step, probes=probes, seed=seed,
                                         mask=mask, scale_step=scale_step)
    return report, resampled


def cmd_grad_check(args):
    if args.d is not None and (args.objective != "fast" or not 1 <= args.d <= args.c):
        raise UsageError(f"--d must lie in [1, --c={args.c}] and is only valid with --objective fast")
    if args.b < 1 or args.c < 2 or args.probes < 1:
        raise UsageError("need --b >= 1, --c >= 2 and --probes >= 1")
    report, resampled = grad_check_case(args.objective, args.b, args.c, args.seed,
                                        args.probes, d=args.d, step=args.step)
    tol = GRAD_TOLERANCES[args.objective]
    passed = report.max_rel_error < tol
    write_csv(["objective", "b", "c", "seed", "probes", "step", "resampled",
               "max_rel_error", "max_abs_error", "tolerance", "passed"],
              [[args.objective, args.b, args.c, args.seed, report.probe_count, report.step,
                resampled, report.max_rel_error, report.max_abs_error, tol, passed]], args.out)
    return EXIT_OK if passed else EXIT_NUMERIC


# ----------------------------------------------------------- sample-stats

def cmd_sample_stats(args):
    if args.c < 1 or args.b < 1 or args.trials < 1:
        raise UsageError("need --c, --b and --trials >= 1")
    header = ["source", "c", "b", "trials", "ratio_0", "ratio_1", "ratio_2", "ratio_3plus"]
    rows = []
    stats = sampling.occupancy_monte_carlo(args.c, args.b, args.trials, args.seed, workers=args.workers)
    rows.append(["monte_carlo", stats.c, stats.b, stats.trials, *stats.as_row()])
    if args.analytic:
        exact = sampling.occupancy_analytic(args.c, args.b)
        rows.append(["analytic", exact.c, exact.b, exact.trials, *exact.as_row()])
    write_csv(header, rows, args.out)


# ------------------------------------------------------------------ bench

def parse_sizes(text):
    sizes = []
    for item in text.split(","):
        try:
            b, c = item.lower().split("x")
            sizes.append((int(b), int(c)))
        except ValueError:
            raise UsageError(f"bad size {item!r}; expected BxC") from None
        if sizes[-1][0] < 1 or sizes[-1][1] < 2:
            raise UsageError(f"bad size {item!r}; need B >= 1 and C >= 2")
    return sizes


def cmd_bench(args):
    if args.repeats < 1:
        raise UsageError("--repeats must be >= 1")
    if args.kernels:
        sizes = parse_sizes(args.sizes) if args.sizes else [(16, 16), (36, 65), (64, 64), (128, 126)]
        res = bench.compare_kernels(sizes, args.repeats, args.seed)
        write_csv(["b", "c", "kernel", "repeats", "total_seconds"],
                  [[r.b, r.c, r.kernel, r.repeats, r.total_seconds] for r in res], args.out)
        return
    sizes = parse_sizes(args.sizes) if args.sizes else list(bench.REFERENCE_SIZES)
    res = bench.run_bench(sizes, args.repeats, args.seed, svd_method=args.svd)
    write_csv(["b", "c", "method", "repeats", "total_seconds"],
              [[r.b, r.c, r.method, r.repeats, r.total_seconds] for r in res], args.out)


# ------------------------------------------------------------------ train

def cmd_train(args):
    variant = args.variant
    if args.fast:
        if variant not in ("BNM", "BNM2"):
            raise UsageError("--fast applies to BNM and BNM2 only")
        variant = "F" + variant
    task = trainer.CANONICAL_TASK
    task = replace(task, seed=args.task_seed if args.task_seed is not None else task.seed)
    if args.separation is not None:
        task = replace(task, class_separation=args.separation)
    data = trainer.generate_dataset(task)
    overrides = dict(lam=args.lam, seed=args.seed, k=args.k, d=args.d,
                     legacy_multibatch_norm=args.legacy_multibatch_norm)
    for name in ("steps", "learning_rate", "batch_source", "batch_target", "w_nuclear", "w_frobenius"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.d is not None and not 1 <= args.d <= task.categories:
        raise UsageError(f"--d must lie in [1, {task.categories}]")
    try:
        _, log = trainer.run_variant(variant, data, **overrides)
    except ValidationError as exc:
        raise UsageError(str(exc)) from None
    write_csv(list(trainer.LOG_COLUMNS),
              [[r[k] for k in trainer.LOG_COLUMNS] for r in log.records], args.out)


# ---------------------------------------------------------------- parsing

def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=7, help="random seed (default 7)")
    common.add_argument("--out", help="write CSV here instead of standard output")

    parser = _Parser(prog="bnm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("metrics", parents=[common], help="norms and diversity of a matrix file")
    p.add_argument("input")
    p.add_argument("--d", type=int, help="columns kept by the fast nuclear norm")
    p.add_argument("--no-validate", action="store_true", help="skip the row-sum check")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("grad-check", parents=[common], help="finite-difference gradient check")
    p.add_argument("--objective", choices=sorted(GRAD_TOLERANCES), required=True)
    p.add_argument("--b", type=int, default=8)
    p.add_argument("--c", type=int, default=5)
    p.add_argument("--probes", type=int, default=50)
    p.add_argument("--d", type=int)
    p.add_argument("--step", type=float)
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("sample-stats", parents=[common], help="batch category occupancy")
    p.add_argument("--c", type=int, required=True)
    p.add_argument("--b", type=int, required=True)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--analytic", action="store_true", help="append the closed-form row")
    p.set_defaults(func=cmd_sample_stats)

    p = sub.add_parser("bench", parents=[common], help="time BNM, EntMin and FBNM")
    p.add_argument("--repeats", type=int, default=1000)
    p.add_argument("--sizes", help="comma-separated BxC list (default: six reference sizes from 100x100 to 1000x1000)")
    p.add_argument("--svd", choices=("lapack", "jacobi"), default="lapack",
                   help="exact nuclear norm backend for BNM")
    p.add_argument("--kernels", action="store_true",
                   help="compare the compiled and pure-Python Jacobi kernels instead")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("train", parents=[common], help="train on the synthetic two-domain task")
    p.add_argument("--variant", choices=trainer.TRAIN_VARIANTS, default="BNM")
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--lr", dest="learning_rate", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--batch-source", type=int)
    p.add_argument("--batch-target", type=int)
    p.add_argument("--k", type=int, default=1, help="batches per multi-batch norm update")
    p.add_argument("--d", type=int)
    p.add_argument("--fast", action="store_true", help="use the fast nuclear norm (BNM -> FBNM)")
    p.add_argument("--legacy-multibatch-norm", action="store_true",
                   help="normalize multi-batch norms by one batch size instead of K*B")
    p.add_argument("--w-nuclear", type=float)
    p.add_argument("--w-frobenius", type=float)
    p.add_argument("--task-seed", type=int, help="synthetic data seed (default: canonical task)")
    p.add_argument("--separation", type=float, help="class mean spacing of the synthetic task")
    p.set_defaults(func=cmd_train)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code = args.func(args)
    except UsageError as exc:
        print(f"bnm {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"bnm {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"bnm {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, BnmError) as exc:
        print(f"bnm {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
