"""Dataset ingestion, fit serialization, and synthetic data generation.

CSV layout: a header of item names (optionally followed by a literal
``label`` column), then one unit per row.  Ranking files store the rank
of each item, ordering files the item at each rank, quantitative files
raw responses that are converted to rankings on load.  Fit results
serialize to a single JSON document that is sufficient to reproduce the
run.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .fit import Family, FitResult, Mixture
from .models import DbParams, EplParams, sample_db, sample_epl
from .perms import Permutation, inverse
from .select import count_free_params

__all__ = [
    "Dataset",
    "TiePolicy",
    "DataFormatError",
    "rank_quantitative",
    "read_dataset",
    "write_dataset",
    "simulate_dataset",
    "mixture_to_dict",
    "mixture_from_dict",
    "write_fit",
    "read_fit",
]

FIT_KEYS = (
    "family",
    "K",
    "G",
    "weights",
    "components",
    "loglik_trace",
    "bic",
    "nu",
    "seed",
    "config",
    "responsibilities",
)


class DataFormatError(ValueError):
    """A file or row violates the dataset contract."""


class TiePolicy(Enum):
    ERROR = "error"
    STABLE_BY_INDEX = "stable"
    RANDOM_SEEDED = "random"


@dataclass(frozen=True)
class Dataset:
    """Complete rankings with item names and optional ground-truth labels."""

    rankings: tuple[Permutation, ...]
    item_names: tuple[str, ...]
    truth_labels: tuple | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "rankings", tuple(self.rankings))
        object.__setattr__(self, "item_names", tuple(self.item_names))
        if self.truth_labels is not None:
            object.__setattr__(self, "truth_labels", tuple(self.truth_labels))
        if not self.rankings:
            raise ValueError("dataset needs at least one unit")
        k = self.rankings[0].k
        if any(r.k != k for r in self.rankings):
            raise ValueError("all rankings must share the same K")
        if len(self.item_names) != k:
            raise ValueError(f"{len(self.item_names)} item names for K={k}")
        if self.truth_labels is not None and len(self.truth_labels) != len(self.rankings):
            raise ValueError("one truth label per unit required")

    @property
    def n(self) -> int:
        return len(self.rankings)

    @property
    def k(self) -> int:
        return self.rankings[0].k

    def orderings(self) -> list[Permutation]:
        """The same data in the ordering view (rank -> item)."""
        return [inverse(r) for r in self.rankings]


def default_item_names(k: int) -> tuple[str, ...]:
    return tuple(f"item{i}" for i in range(1, k + 1))


def rank_quantitative(
    matrix,
    direction: str = "decreasing",
    ties: TiePolicy = TiePolicy.ERROR,
    seed: int | None = None,
    item_names: Sequence[str] | None = None,
) -> Dataset:
    """Convert per-unit quantitative responses to complete rankings.

    With ``decreasing`` the largest value gets rank 1 (``increasing``
    flips that).  Ties are a modeling error by default since the ranking
    models forbid them; opt in to index-stable or seeded-random breaking.
    """
    values = np.asarray(matrix, dtype=float)
    if values.ndim != 2:
        raise ValueError("quantitative input must be an N x K matrix")
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values))[0]
        raise DataFormatError(f"non-finite value at row {bad[0] + 1}, column {bad[1] + 1}")
    if direction not in ("decreasing", "increasing"):
        raise ValueError(f"direction must be decreasing or increasing, got {direction!r}")
    ties = TiePolicy(ties)
    n, k = values.shape
    rng = np.random.default_rng(seed)
    keys = -values if direction == "decreasing" else values
    rankings = []
    for s in range(n):
        row = keys[s]
        if ties is TiePolicy.ERROR:
            uniq, counts = np.unique(row, return_counts=True)
            if np.any(counts > 1):
                tied_value = uniq[np.argmax(counts > 1)]
                cols = [str(c + 1) for c in np.flatnonzero(row == tied_value)]
                raise DataFormatError(
                    f"tied values in row {s + 1} (columns {', '.join(cols)}); "
                    "choose a tie policy to break them"
                )
            tiebreak = np.arange(k)
        elif ties is TiePolicy.STABLE_BY_INDEX:
            tiebreak = np.arange(k)
        else:
            tiebreak = rng.permutation(k)
        order = np.lexsort((tiebreak, row))  # items from rank 1 to rank K
        ranking = np.empty(k, dtype=int)
        ranking[order] = np.arange(1, k + 1)
        rankings.append(Permutation(tuple(ranking)))
    names = tuple(item_names) if item_names is not None else default_item_names(k)
    return Dataset(tuple(rankings), names)


def _parse_header(header: list[str]) -> tuple[tuple[str, ...], bool]:
    if not header:
        raise DataFormatError("empty header")
    has_label = header[-1].strip().lower() == "label"
    names = tuple(h.strip() for h in (header[:-1] if has_label else header))
    if len(names) < 2:
        raise DataFormatError("need at least two item columns")
    return names, has_label


def _parse_label(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        return text


def read_dataset(
    path,
    fmt: str = "rankings",
    *,
    direction: str = "decreasing",
    ties: TiePolicy = TiePolicy.ERROR,
    seed: int | None = None,
) -> Dataset:
    """Load a dataset from CSV; see the module docstring for the layout.

    Ordering rows are converted to rankings on load.  Any non-bijective
    row is rejected with its line number; nothing is silently repaired.
    """
    if fmt not in ("rankings", "orderings", "quantitative"):
        raise ValueError(f"unknown format {fmt!r}")
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        names, has_label = _parse_header(header)
        k = len(names)
        rows: list[list[str]] = []
        labels: list = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            expected = k + 1 if has_label else k
            if len(row) != expected:
                raise DataFormatError(
                    f"{path}:{lineno}: expected {expected} cells, got {len(row)}"
                )
            if has_label:
                labels.append(_parse_label(row[-1]))
                row = row[:-1]
            rows.append(row)

    if fmt == "quantitative":
        try:
            matrix = np.array([[float(c) for c in row] for row in rows])
        except ValueError as exc:
            raise DataFormatError(f"{path}: non-numeric cell ({exc})") from None
        dataset = rank_quantitative(
            matrix, direction=direction, ties=ties, seed=seed, item_names=names
        )
        return Dataset(dataset.rankings, names, tuple(labels) if has_label else None)

    rankings = []
    for offset, row in enumerate(rows):
        lineno = offset + 2
        try:
            entries = tuple(int(c) for c in row)
        except ValueError:
            raise DataFormatError(f"{path}:{lineno}: non-integer cell") from None
        try:
            perm = Permutation(entries)
        except ValueError as exc:
            raise DataFormatError(f"{path}:{lineno}: {exc}") from None
        if perm.k != k:
            raise DataFormatError(f"{path}:{lineno}: expected K={k}, got {perm.k}")
        rankings.append(inverse(perm) if fmt == "orderings" else perm)
    if not rankings:
        raise DataFormatError(f"{path}: no data rows")
    return Dataset(tuple(rankings), names, tuple(labels) if has_label else None)


def write_dataset(dataset: Dataset, path, fmt: str = "rankings") -> None:
    """Write a dataset as CSV in the ranking or ordering representation."""
    if fmt not in ("rankings", "orderings"):
        raise ValueError(f"cannot write format {fmt!r}")
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        header = list(dataset.item_names)
        if dataset.truth_labels is not None:
            header.append("label")
        writer.writerow(header)
        for s, ranking in enumerate(dataset.rankings):
            perm = ranking if fmt == "rankings" else inverse(ranking)
            row = [str(v) for v in perm.entries]
            if dataset.truth_labels is not None:
                row.append(str(dataset.truth_labels[s]))
            writer.writerow(row)


def simulate_dataset(mix: Mixture, n: int, seed: int) -> Dataset:
    """Draw a labeled synthetic dataset from a fitted or hand-built mixture.

    Component membership is sampled from the weights, then each unit is
    drawn from its component's sampler; truth labels record the 1-based
    component of every unit.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    g = mix.g
    labels = rng.choice(g, size=n, p=np.asarray(mix.weights))
    component_seeds = rng.integers(2**63, size=g)
    pools: list[list[Permutation]] = []
    for idx, comp in enumerate(mix.components):
        count = int((labels == idx).sum())
        if count == 0:
            pools.append([])
            continue
        if mix.family is Family.DB:
            pools.append(sample_db(comp, count, int(component_seeds[idx])))
        else:
            pools.append(sample_epl(comp, count, int(component_seeds[idx])))
    cursors = [0] * g
    rankings = []
    for lab in labels:
        ordering = pools[lab][cursors[lab]]
        cursors[lab] += 1
        rankings.append(inverse(ordering))
    return Dataset(
        tuple(rankings),
        default_item_names(mix.k),
        tuple(int(lab) + 1 for lab in labels),
    )


def mixture_to_dict(mix: Mixture) -> dict:
    components = []
    for comp in mix.components:
        if mix.family is Family.DB:
            components.append({"sigma": list(comp.sigma.entries), "lambda": comp.lam})
        else:
            components.append({"rho": list(comp.rho.entries), "p": list(comp.support)})
    return {
        "family": mix.family.value,
        "weights": list(mix.weights),
        "components": components,
    }


def mixture_from_dict(doc: dict) -> Mixture:
    family = Family(doc["family"])
    components = []
    for comp in doc["components"]:
        if family is Family.DB:
            components.append(DbParams(Permutation(tuple(comp["sigma"])), float(comp["lambda"])))
        else:
            components.append(EplParams(Permutation(tuple(comp["rho"])), tuple(comp["p"])))
    return Mixture(tuple(doc["weights"]), tuple(components), family)


def write_fit(result: FitResult, path, *, seed: int, config: dict) -> None:
    """Serialize a fit result (with the run's seed and configuration) to JSON."""
    mix = result.mixture
    doc = {
        "family": mix.family.value,
        "K": mix.k,
        "G": mix.g,
        "weights": list(mix.weights),
        "components": mixture_to_dict(mix)["components"],
        "loglik_trace": list(result.loglik_trace),
        "bic": result.bic,
        "nu": count_free_params(mix.family, mix.g, mix.k),
        "seed": seed,
        "config": dict(config),
        "responsibilities": [list(row) for row in np.asarray(result.responsibilities)],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def read_fit(path) -> dict:
    """Load and validate a fit document; the mixture is reconstructed under
    the ``mixture`` key."""
    doc = json.loads(Path(path).read_text())
    missing = [key for key in FIT_KEYS if key not in doc]
    if missing:
        raise DataFormatError(f"{path}: missing fit keys {missing}")
    doc["mixture"] = mixture_from_dict(doc)
    return doc
