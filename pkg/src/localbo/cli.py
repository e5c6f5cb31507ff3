"""``bench``: run experiments, summarize traces, emit the bound-comparison
dataset, and benchmark the numerical backends.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from ._backend import BACKENDS, active_backend
from .gp import NumericalBreakdown
from .harness import ConfigError, fig1_demo, load_config, resolve_output_dir, run_experiment, summarize
from .inner_opt import OptFailure

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    out_dir = resolve_output_dir(cfg, args.out)
    run_experiment(cfg, out_dir, jobs=args.jobs, overwrite=args.overwrite)
    print(f"wrote traces, summary.csv and manifest.json to {out_dir}")
    return 0


def _cmd_summarize(args) -> int:
    text = summarize(args.dir)
    out = Path(args.out) if args.out else Path(args.dir) / "summary.csv"
    out.write_text(text)
    print(f"wrote {out}")
    return 0


def _cmd_fig1(args) -> int:
    inst = fig1_demo(args.seed, args.out)
    coverage = float(np.mean(inst.f_true <= inst.ucb))
    print(f"wrote {args.out} (UCB coverage on grid: {coverage:.3f})")
    return 0


def _cmd_backends(args) -> int:
    """Time the compiled kernel core against the pure-NumPy fallback."""
    from .kernels import KernelSpec

    spec = KernelSpec.isotropic("rbf", args.dim, 0.7)
    rng = np.random.default_rng(0)
    A = rng.uniform(0, 1, (args.size, args.dim))
    B = rng.uniform(0, 1, (args.size, args.dim))
    theta = rng.uniform(-1, 1, 4)
    state0 = rng.uniform(-0.05, 0.05, 4)
    print(f"active backend: {active_backend()}; available: {sorted(BACKENDS)}")
    header = f"{'op':<18}" + "".join(f"{name:>14}" for name in sorted(BACKENDS))
    print(header)
    ops = {
        "kern_matrix": lambda c: c.kern_matrix(spec._code, spec.lengthscales, spec.signal_variance, A, B),
        "kern_grads": lambda c: c.kern_grads(spec._code, spec.lengthscales, spec.signal_variance, A[:16], B),
        "kern_cross_hess": lambda c: c.kern_cross_hess(spec._code, spec.lengthscales, spec.signal_variance, A[:4], B[:64]),
        "cartpole_episode": lambda c: c.cartpole_episode(theta, state0, 500),
    }
    for op_name, fn in ops.items():
        times = []
        for name in sorted(BACKENDS):
            core = BACKENDS[name]
            fn(core)  # warm up
            tic = time.perf_counter()
            for _ in range(args.repeat):
                fn(core)
            times.append((time.perf_counter() - tic) / args.repeat * 1e6)
        print(f"{op_name:<18}" + "".join(f"{t:>11.1f} us" for t in times))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a seeded experiment from a YAML config")
    p_run.add_argument("config", help="path to the experiment config")
    p_run.add_argument("--out", default=None, help="output directory (default from config / $BENCH_OUT_ROOT)")
    p_run.add_argument("--jobs", type=int, default=1, help="parallel replications")
    p_run.add_argument("--overwrite", action="store_true", help="replace artifacts in a used directory")
    p_run.set_defaults(fn=_cmd_run)

    p_sum = sub.add_parser("summarize", help="rebuild summary.csv from trace files")
    p_sum.add_argument("dir", help="directory holding *_rep*.jsonl traces")
    p_sum.add_argument("--out", default=None, help="summary path (default <dir>/summary.csv)")
    p_sum.set_defaults(fn=_cmd_summarize)

    p_fig = sub.add_parser("fig1", help="write the 1-D bound-comparison dataset")
    p_fig.add_argument("--seed", type=int, default=42)
    p_fig.add_argument("--out", required=True, help="output CSV path")
    p_fig.set_defaults(fn=_cmd_fig1)

    p_back = sub.add_parser("backends", help="benchmark compiled vs pure numerical core")
    p_back.add_argument("--size", type=int, default=256, help="points per side of the pairwise ops")
    p_back.add_argument("--dim", type=int, default=8)
    p_back.add_argument("--repeat", type=int, default=20)
    p_back.set_defaults(fn=_cmd_backends)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalBreakdown, OptFailure) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
