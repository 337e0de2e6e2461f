"""Command-line entry point: ``lpgcn <command> [options]``.

Exit codes: 0 success, 1 input error, 2 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .bounds import BoundRow
from .data import load_dataset, make_synthetic, save_dataset
from .errors import InputError, NumericalError
from .graph import FilterKind, build_filter, compute_ge, spectral_radius
from .runner import (BOUND_COLUMNS, ExperimentConfig, bound_rows, emit_plotdata, load_config,
                     run_experiment, write_bounds_csv)
from .sgd import train
from .stability import twin_train, write_metrics_csv


def _common(p):
    p.add_argument("--config", metavar="PATH", help="key = value experiment config")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--normalize-features", action="store_true", default=None,
                   help="scale feature rows to unit l2 norm")
    p.add_argument("--eps-sparsity", type=float, metavar="X", help="magnitude counted as zero (default 1e-6)")
    p.add_argument("--threads", type=int, metavar="N", help="worker threads (fallback: LPGCN_THREADS)")


def build_parser():
    parser = argparse.ArgumentParser(prog="lpgcn", description="lp-regularised GCN stability experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model on the first grid cell")
    _common(p)
    p.add_argument("--out", metavar="PATH", help="write per-epoch metrics CSV here")

    p = sub.add_parser("twin", help="train on D and D^i and report parameter distances")
    _common(p)
    p.add_argument("--index", type=int, help="training node to perturb (default: drawn from the seed)")
    p.add_argument("--out", metavar="PATH", help="write per-epoch metrics CSV here")

    p = sub.add_parser("sweep", help="run the configured grid and write its output files")
    _common(p)
    p.add_argument("--output-dir", metavar="DIR", help="override the config output_dir")

    p = sub.add_parser("bounds", help="print theory bounds for every grid cell")
    _common(p)

    p = sub.add_parser("spectral", help="largest absolute filter eigenvalue and g_e")
    _common(p)
    p.add_argument("--dataset", metavar="DIR", help="dataset directory (instead of --config)")
    p.add_argument("--filter", action="append", help="filter kind; repeatable (default: all four)")
    p.add_argument("--tol", type=float, default=1e-8)

    p = sub.add_parser("synth", help="write a synthetic SBM dataset directory")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--d", type=int, default=500)
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--edge-prob", type=float, default=0.05)
    p.add_argument("--homophily", type=float, default=0.3)
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--features", choices=("binary", "gaussian"), default="binary")
    p.add_argument("--density", type=float, default=0.02, help="base rate of active binary features")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("plotdata", help="aggregate a metrics CSV for plotting")
    p.add_argument("metrics", metavar="METRICS_CSV")
    p.add_argument("--kind", choices=("gap", "distance", "sparsity"), required=True)
    p.add_argument("--out", metavar="PATH")
    return parser


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("LPGCN_THREADS")
    return int(env) if env else None


def _config(args):
    overrides = dict(seed=args.seed, normalize_features=args.normalize_features,
                     eps_sparsity=args.eps_sparsity, threads=_threads(args))
    if args.config:
        return load_config(args.config, **overrides)
    return ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})


def _print_final(metrics, file=None):
    file = file or sys.stdout
    row = metrics.final
    if row is None:
        print("no epochs run", file=file)
        return
    print(f"epoch {row.epoch}: train_error={row.train_error:.6g} test_error={row.test_error:.6g} "
          f"gen_gap={row.gen_gap:.6g} param_distance={row.param_distance:.6g} "
          f"sparsity_pct={row.sparsity_pct:.4g}", file=file)


def _metric_rows(metrics, cfg, run_id):
    for r in metrics.rows:
        yield (run_id, cfg.p, cfg.filter_kind.value, r.epoch, r.train_error, r.test_error, r.gen_gap,
               r.param_distance, r.sparsity_pct, cfg.seed)


def cmd_train(args):
    exp = _config(args)
    ds, _ = exp.load_data()
    cfg = exp.train_config()
    _, _, metrics = train(ds, cfg)
    _print_final(metrics)
    if args.out:
        write_metrics_csv(args.out, _metric_rows(metrics, cfg, "train"))
    return 0


def cmd_twin(args):
    exp = _config(args)
    ds, _ = exp.load_data()
    cfg = exp.train_config()
    i = args.index if args.index is not None else exp.perturb_index
    if i is None:
        i = int(np.random.default_rng([cfg.seed, 7]).choice(ds.train_idx))
    run = twin_train(ds, cfg, i)
    print(f"perturbed node {run.perturbed_index} <- node {run.replacement.source}")
    _print_final(run.run_a.metrics)
    if args.out:
        write_metrics_csv(args.out, _metric_rows(run.run_a.metrics, cfg, "twin"))
    return 0


def cmd_sweep(args):
    paths = run_experiment(_config(args), output_dir=args.output_dir)
    for kind, path in paths.items():
        print(f"{kind}: {path}")
    return 0


def cmd_bounds(args):
    exp = _config(args)
    ds, _ = exp.load_data()
    rows = bound_rows(ds, exp)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(BOUND_COLUMNS)
    for row in rows:
        writer.writerow([f"{v:.6g}" if isinstance(v, float) else v
                         for v in (getattr(row, c) for c in BOUND_COLUMNS)])
    return 0


def cmd_spectral(args):
    if args.dataset:
        ds, _ = load_dataset(args.dataset, normalize=bool(args.normalize_features))
    else:
        ds, _ = _config(args).load_data()
    kinds = [FilterKind.parse(f) for f in args.filter] if args.filter else list(FilterKind)
    print("filter,lambda_max_abs,iterations,residual,g_e")
    for kind in kinds:
        filt = build_filter(ds.graph, kind)
        est = spectral_radius(filt, tol=args.tol)
        print(f"{kind.value},{est.lambda_max_abs:.10g},{est.iterations_used},{est.residual:.3g},"
              f"{compute_ge(filt, ds.features):.10g}")
    return 0


def cmd_synth(args):
    ds = make_synthetic(args.n, args.d, args.classes, args.edge_prob, args.homophily, args.seed,
                        separation=args.separation, features=args.features, density=args.density)
    root = save_dataset(ds, args.out)
    print(f"wrote {ds.n} nodes, {ds.graph.nnz // 2} edges to {root}")
    return 0


def cmd_plotdata(args):
    print(emit_plotdata(args.metrics, args.kind, args.out))
    return 0


COMMANDS = {"train": cmd_train, "twin": cmd_twin, "sweep": cmd_sweep, "bounds": cmd_bounds,
            "spectral": cmd_spectral, "synth": cmd_synth, "plotdata": cmd_plotdata}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"lpgcn: error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"lpgcn: numerical error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"lpgcn: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
