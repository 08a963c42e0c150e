"""Command-line front end: fit, scan, simulate, diagnose, oracle.

Exit codes: 0 success, 1 usage error, 2 data error, 3 fit failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .diag import borda_ordering, cross_tab, first_order_marginals, map_classify
from .dataio import (
    DataFormatError,
    Dataset,
    TiePolicy,
    mixture_from_dict,
    read_dataset,
    read_fit,
    simulate_dataset,
    write_dataset,
    write_fit,
)
from .fit import Family, FitError, FitResult, fit_mixture
from .oracle import run_checks
from .select import ModelScore, model_scan

__all__ = ["dispatch", "render_report", "main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_FIT = 3

NEAR_UNIFORM_GAP = 0.02  # max_i p_i - 1/K below this flags a component


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="rankmix",
        description="Mixture modeling of complete rankings (distance-based and "
        "extended Plackett-Luce families).",
    )
    sub = parser.add_subparsers(dest="command")

    def add_data_opts(p):
        p.add_argument("--input", required=True, help="dataset CSV")
        p.add_argument(
            "--format",
            default="rankings",
            choices=["rankings", "orderings", "quantitative"],
            help="input layout",
        )
        p.add_argument(
            "--direction",
            default="decreasing",
            choices=["decreasing", "increasing"],
            help="rank 1 meaning for quantitative input",
        )
        p.add_argument(
            "--ties",
            default="error",
            choices=[t.value for t in TiePolicy],
            help="tie policy for quantitative input",
        )

    def add_fit_opts(p):
        p.add_argument("--starts", type=int, default=50, help="EM starts")
        p.add_argument("--seed", type=int, default=0, help="master seed")
        p.add_argument("--tol", type=float, default=1e-6, help="Aitken tolerance")
        p.add_argument("--max-iter", type=int, default=1000, help="EM iteration cap")
        p.add_argument("--dmax", type=int, default=1, help="reference-order search radius")

    p_fit = sub.add_parser("fit", help="fit one family at one G")
    add_data_opts(p_fit)
    p_fit.add_argument("--family", required=True, choices=[f.value for f in Family])
    p_fit.add_argument("--G", required=True, help="number of components")
    add_fit_opts(p_fit)
    p_fit.add_argument("--output", required=True, help="fit JSON path")

    p_scan = sub.add_parser("scan", help="fit families x G range, rank by BIC")
    add_data_opts(p_scan)
    p_scan.add_argument(
        "--families",
        default=",".join(f.value for f in Family),
        help="comma-separated families",
    )
    p_scan.add_argument("--G", required=True, help="G or range like 1..4")
    add_fit_opts(p_scan)
    p_scan.add_argument("--output", required=True, help="output directory")

    p_sim = sub.add_parser("simulate", help="draw a labeled synthetic dataset")
    p_sim.add_argument("--mixture", required=True, help="mixture spec JSON")
    p_sim.add_argument("--N", type=int, required=True, help="number of units")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--output", required=True, help="dataset CSV path")

    p_diag = sub.add_parser("diagnose", help="marginals, Borda, cross-tab")
    add_data_opts(p_diag)
    p_diag.add_argument("--fit", help="fit JSON for MAP classification")
    p_diag.add_argument("--output", required=True, help="output directory")

    p_oracle = sub.add_parser("oracle", help="run brute-force cross-checks")
    p_oracle.add_argument("--seed", type=int, default=0)
    return parser


def _parse_g_range(text: str) -> list[int]:
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        values = list(range(int(lo), int(hi) + 1))
    else:
        values = [int(text)]
    if not values or any(g < 1 for g in values):
        raise UsageError(f"invalid G specification {text!r}")
    return values


def _load_dataset(args) -> Dataset:
    return read_dataset(
        args.input,
        args.format,
        direction=args.direction,
        ties=TiePolicy(args.ties),
        seed=args.seed if hasattr(args, "seed") else None,
    )


def _fit_config(args) -> dict:
    return {
        "n_starts": args.starts,
        "tol": args.tol,
        "max_iter": args.max_iter,
        "d_max": args.dmax,
    }


def render_report(
    scores: list[ModelScore] | None, fit: FitResult, dataset: Dataset
) -> str:
    """Human-readable summary: scan table, then per-component estimates.

    Support components list items by decreasing estimated support (the
    modal ordering); components indistinguishable from the uniform model
    are flagged.
    """
    mix = fit.mixture
    lines = []
    if scores:
        lines.append("family       G     loglik   nu        BIC")
        for s in scores:
            lines.append(
                f"{s.family.value:<12} {s.n_components:<3} {s.loglik:10.3f} {s.nu:4d} {s.bic:10.3f}"
            )
        lines.append("")
    lines.append(
        f"family: {mix.family.value}  K: {mix.k}  G: {mix.g}  N: {dataset.n}"
    )
    lines.append(
        f"loglik: {fit.final_loglik:.4f}  BIC: {fit.bic:.4f}  "
        f"converged: {'yes' if fit.converged else 'no'} ({fit.iterations} iterations)"
    )
    names = dataset.item_names
    for g, (w, comp) in enumerate(zip(mix.weights, mix.components), start=1):
        if mix.family is Family.DB:
            near_uniform = comp.lam < NEAR_UNIFORM_GAP
            flag = "  [near-uniform]" if near_uniform else ""
            lines.append(f"component {g}: weight {w:.3f}{flag}")
            modal = np.argsort(np.array(comp.sigma.entries))
            lines.append(
                "  modal ordering: " + " > ".join(names[i] for i in modal)
            )
            lines.append(f"  concentration: {comp.lam:.4f}")
        else:
            support = np.array(comp.support)
            near_uniform = support.max() - 1.0 / mix.k < NEAR_UNIFORM_GAP
            flag = "  [near-uniform]" if near_uniform else ""
            lines.append(f"component {g}: weight {w:.3f}{flag}")
            modal = np.lexsort((np.arange(mix.k), -support))
            lines.append(
                "  modal ordering: " + " > ".join(names[i] for i in modal)
            )
            lines.append(
                "  support: " + " ".join(f"{v:.4f}" for v in comp.support)
            )
            lines.append(f"  reference order: {tuple(comp.rho.entries)}")
    lines.append(f"weights sum: {sum(mix.weights):.3f}")
    return "\n".join(lines)


def _write_marginals(dataset: Dataset, outdir: Path) -> None:
    matrix = first_order_marginals(dataset.rankings)
    with (outdir / "marginals.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["item"] + [f"rank{j}" for j in range(1, dataset.k + 1)])
        for i, name in enumerate(dataset.item_names):
            writer.writerow([name] + [f"{v:.6f}" for v in matrix[i]])


def _cmd_fit(args) -> int:
    g_values = _parse_g_range(args.G)
    if len(g_values) != 1:
        raise UsageError("fit takes a single G; use scan for ranges")
    dataset = _load_dataset(args)
    result = fit_mixture(
        dataset.orderings(),
        args.family,
        g_values[0],
        n_starts=args.starts,
        seed=args.seed,
        tol=args.tol,
        max_iter=args.max_iter,
        d_max=args.dmax,
    )
    write_fit(result, args.output, seed=args.seed, config=_fit_config(args))
    print(render_report(None, result, dataset))
    return EXIT_OK


def _cmd_scan(args) -> int:
    dataset = _load_dataset(args)
    families = [Family(f.strip()) for f in args.families.split(",") if f.strip()]
    if not families:
        raise UsageError("no families given")
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    scan = model_scan(
        dataset.orderings(),
        families,
        _parse_g_range(args.G),
        n_starts=args.starts,
        seed=args.seed,
        tol=args.tol,
        max_iter=args.max_iter,
        d_max=args.dmax,
    )
    with (outdir / "scores.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["family", "G", "loglik", "nu", "bic"])
        for s in scan.scores:
            writer.writerow([s.family.value, s.n_components, repr(s.loglik), s.nu, repr(s.bic)])
    write_fit(scan.best_fit, outdir / "best_fit.json", seed=args.seed, config=_fit_config(args))
    for family, g, message in scan.failures:
        print(f"warning: {family.value} G={g} failed: {message}", file=sys.stderr)
    print(render_report(scan.scores, scan.best_fit, dataset))
    return EXIT_OK


def _cmd_simulate(args) -> int:
    try:
        doc = json.loads(Path(args.mixture).read_text())
        mix = mixture_from_dict(doc)
    except (OSError, ValueError, KeyError) as exc:
        raise DataFormatError(f"{args.mixture}: {exc}") from exc
    dataset = simulate_dataset(mix, args.N, args.seed)
    write_dataset(dataset, args.output)
    print(f"wrote {dataset.n} rankings (K={dataset.k}) to {args.output}")
    return EXIT_OK


def _cmd_diagnose(args) -> int:
    dataset = _load_dataset(args)
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_marginals(dataset, outdir)
    borda = borda_ordering(dataset.rankings)
    print(
        "Borda ordering: "
        + " > ".join(dataset.item_names[i - 1] for i in borda.entries)
    )
    if args.fit:
        doc = read_fit(args.fit)
        labels = map_classify(np.array(doc["responsibilities"]))
        if dataset.truth_labels is not None:
            table = cross_tab(list(labels), list(dataset.truth_labels))
            with (outdir / "cross_tab.csv").open("w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["cluster"] + [str(v) for v in table.col_values])
                for i, row_value in enumerate(table.row_values):
                    writer.writerow([row_value] + [str(v) for v in table.table[i]])
            print(f"ARI vs truth labels: {table.ari:.4f}")
        else:
            print("no truth labels in dataset; skipping cross-tab")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    checks = run_checks(args.seed)
    width = max(len(c.name) for c in checks)
    failed = False
    for check in checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"{check.name:<{width}}  max err {check.max_error:.3e}  tol {check.tolerance:.0e}  {status}")
        failed = failed or not check.passed
    return EXIT_FIT if failed else EXIT_OK


def dispatch(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage()
            return EXIT_USAGE
        handler = {
            "fit": _cmd_fit,
            "scan": _cmd_scan,
            "simulate": _cmd_simulate,
            "diagnose": _cmd_diagnose,
            "oracle": _cmd_oracle,
        }[args.command]
        return handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FitError as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return EXIT_FIT


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))
