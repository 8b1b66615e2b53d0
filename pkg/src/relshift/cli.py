"""Command-line interface: fit, cv, simulate, check-bounds.

Exit codes: 0 success, 2 input/validation error, 3 numerical failure.
All randomness flows from ``--seed``; ``--threads`` (or RELSHIFT_THREADS)
controls fold-level parallelism and does not change results.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import io as rio
from .errors import NumericalError, RelshiftError
from .model import fit as model_fit
from .model import truncate_and_aggregate
from .penalty import KINDS, PenaltySpec, TREE_KINDS
from .simulate import make_scenario, SCENARIOS
from .solver import SolverConfig
from .theorycheck import theorem1_check
from .tuning import cross_validate

_EXIT_VALIDATION = 2
_EXIT_NUMERICAL = 3


def _default_threads():
    env = os.environ.get("RELSHIFT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def build_parser():
    parser = argparse.ArgumentParser(prog="relshift",
                                     description="relative-shift regression on compositions")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--config", help="JSON file with a solver config block")
        p.add_argument("--out", required=True, help="output directory")

    pf = sub.add_parser("fit", help="fit at a fixed or CV-selected lambda")
    pf.add_argument("--x", required=True, help="composition CSV")
    pf.add_argument("--y", required=True, help="response CSV")
    pf.add_argument("--covariates", help="covariate CSV")
    pf.add_argument("--tree", help="Newick tree file")
    pf.add_argument("--penalty", required=True, choices=KINDS)
    pf.add_argument("--lambda", dest="lam", required=True,
                    help='penalty strength, or "auto" for cross-validation')
    pf.add_argument("--weights", help="CSV of node_label,weight overrides")
    pf.add_argument("--cv-k", type=int, default=5)
    pf.add_argument("--n-lambda", type=int, default=50)
    pf.add_argument("--ratio", type=float, default=1e-3)
    pf.add_argument("--one-se", action="store_true",
                    help="select the largest lambda within one SE of the CV minimum")
    pf.add_argument("--truncate", type=float, default=1e-4,
                    help="interpretation threshold for tree fits")
    add_common(pf)

    pc = sub.add_parser("cv", help="cross-validate the lambda path")
    for flag in ("--x", "--y"):
        pc.add_argument(flag, required=True)
    pc.add_argument("--covariates")
    pc.add_argument("--tree")
    pc.add_argument("--penalty", required=True, choices=KINDS)
    pc.add_argument("--weights")
    pc.add_argument("--cv-k", type=int, default=5)
    pc.add_argument("--n-lambda", type=int, default=50)
    pc.add_argument("--ratio", type=float, default=1e-3)
    pc.add_argument("--one-se", action="store_true")
    pc.add_argument("--truncate", type=float, default=1e-4)
    add_common(pc)

    ps = sub.add_parser("simulate", help="write seeded scenario replicates")
    ps.add_argument("--scenario", required=True, choices=sorted(SCENARIOS))
    ps.add_argument("--reps", type=int, default=1)
    ps.add_argument("--snr", type=float, default=None)
    add_common(ps)

    pb = sub.add_parser("check-bounds", help="Monte-Carlo the prediction bound")
    pb.add_argument("--penalty", required=True, choices=list(TREE_KINDS))
    pb.add_argument("--delta", type=float, default=0.1)
    pb.add_argument("--replicates", type=int, default=500)
    pb.add_argument("--n", type=int, default=100)
    pb.add_argument("--sigma", type=float, default=0.5)
    add_common(pb)
    return parser


def _solver_config(args):
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            return SolverConfig.from_dict(json.load(fh))
    return SolverConfig()


def _load_inputs(args):
    x, _ = rio.load_composition_csv(args.x)
    y, y_ids = rio.read_response_csv(args.y)
    label_sets = [y_ids]
    sources = [args.x, args.y]
    cov_vals = cov_ids = None
    if args.covariates:
        cov_vals, cov_ids, _ = rio.read_matrix_csv(args.covariates)
        label_sets.append(cov_ids)
        sources.append(args.covariates)
    order, positions = rio.align_samples(x.row_labels, *label_sets, sources=sources)
    from .composition import CompositionMatrix

    x = CompositionMatrix(x.values[positions[0]], order, x.col_labels, check=False)
    y = y[positions[1]]
    covariates = cov_vals[positions[2]] if cov_vals is not None else None
    tree = rio.read_newick_file(args.tree) if args.tree else None
    spec = _build_spec(args, tree, x.p)
    return x, y, covariates, spec


def _build_spec(args, tree, p):
    node_weights = None
    if args.penalty in TREE_KINDS:
        if tree is None:
            raise RelshiftError(f"penalty {args.penalty!r} requires --tree")
        if getattr(args, "weights", None):
            node_weights = _read_node_weights(args.weights, tree)
    return PenaltySpec.for_kind(args.penalty, tree=tree, p=p, node_weights=node_weights)


def _read_node_weights(path, tree):
    import pandas as pd

    df = pd.read_csv(path, header=None, names=["label", "weight"])
    by_label = {tree.node_label(u): u for u in range(1, tree.n_nodes + 1)}
    weights = np.ones(tree.n_nodes + 1)
    for _, row in df.iterrows():
        lab = str(row["label"])
        if lab not in by_label:
            raise RelshiftError(f"{path}: unknown node label {lab!r}")
        weights[by_label[lab]] = float(row["weight"])
    return weights


def _write_fit(outdir, result, cv_result=None):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rio.write_json(outdir / "model.json", result.to_dict())
    (outdir / "summary.txt").write_text(rio.fit_summary_text(result), encoding="utf-8")
    if cv_result is not None:
        rio.write_json(outdir / "cv.json", cv_result.to_dict())


def _cmd_fit(args):
    x, y, covariates, spec = _load_inputs(args)
    config = _solver_config(args)
    threads = args.threads if args.threads is not None else _default_threads()
    cv_result = None
    if args.lam == "auto":
        cv_result = cross_validate(x, y, spec, covariates=covariates, k=args.cv_k,
                                   n_lambda=args.n_lambda, ratio=args.ratio,
                                   seed=args.seed, config=config, one_se=args.one_se,
                                   threads=threads)
        result = cv_result.refit
    else:
        result = model_fit(x, y, spec, float(args.lam), covariates=covariates,
                           config=config)
    if result.gamma is not None and args.truncate > 0:
        result = truncate_and_aggregate(result, args.truncate)
    _write_fit(args.out, result, cv_result)
    return 0


def _cmd_cv(args):
    args.lam = "auto"
    return _cmd_fit(args)


def _cmd_simulate(args):
    overrides = {}
    if args.snr is not None:
        overrides["snr"] = args.snr
    out = Path(args.out)
    for rep in range(args.reps):
        ds = make_scenario(args.scenario, seed=args.seed + rep, **overrides)
        rio.write_dataset(out / f"rep{rep:03d}", ds)
    return 0


def _cmd_check_bounds(args):
    from .simulate import smalltree_tree

    tree = smalltree_tree()
    beta_star = np.array([0.5, 0.5, 0.5, 0.5, 2.0, 2.0])
    report = theorem1_check(tree, beta_star, args.penalty, sigma=args.sigma,
                            delta=args.delta, replicates=args.replicates,
                            n=args.n, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rio.bound_report_csv(out / "bound_replicates.csv", report)
    rio.write_json(out / "bound_summary.json", report.summary_dict())
    return 0


_COMMANDS = {
    "fit": _cmd_fit,
    "cv": _cmd_cv,
    "simulate": _cmd_simulate,
    "check-bounds": _cmd_check_bounds,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return _EXIT_NUMERICAL
    except (RelshiftError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
