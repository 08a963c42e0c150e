"""Exploratory and post-fit diagnostics for ranking datasets.

First-order marginal matrices, Borda orderings, MAP classification,
contingency tables with the adjusted Rand index, and the K=3 choice-axiom
residuals that separate stagewise models with a free reference order from
the forward Plackett-Luce family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .perms import Permutation, enumerate_permutations

__all__ = [
    "CrossTab",
    "first_order_marginals",
    "borda_ordering",
    "map_classify",
    "cross_tab",
    "iia_residuals",
]


def first_order_marginals(data: Sequence[Permutation]) -> np.ndarray:
    """K x K matrix of observed relative frequencies of (item, rank) pairs.

    Entry (i, j) is the share of units ranking item i+1 at position j+1.
    Complete rankings make the matrix doubly stochastic.
    """
    if len(data) == 0:
        raise ValueError("empty dataset")
    k = data[0].k
    if any(r.k != k for r in data):
        raise ValueError("all units must share the same K")
    m = np.zeros((k, k))
    for ranking in data:
        for item, rank in enumerate(ranking.entries):
            m[item, rank - 1] += 1.0
    return m / len(data)


def borda_ordering(data: Sequence[Permutation], best_first: bool = True) -> Permutation:
    """Items listed by mean rank; ties broken by item index.

    ``best_first`` lists the most-preferred item (smallest mean rank)
    first; flipping it lists items from the largest mean rank instead.
    """
    if len(data) == 0:
        raise ValueError("empty dataset")
    k = data[0].k
    mean_rank = np.zeros(k)
    for ranking in data:
        mean_rank += ranking.entries
    key = mean_rank if best_first else -mean_rank
    order = np.lexsort((np.arange(k), key))
    return Permutation(tuple(int(i) + 1 for i in order))


def map_classify(zhat: np.ndarray) -> np.ndarray:
    """Per-unit argmax group label (1-based); ties go to the lowest group."""
    z = np.asarray(zhat, dtype=float)
    if z.ndim != 2:
        raise ValueError("responsibility matrix must be two-dimensional")
    return np.argmax(z, axis=1) + 1


@dataclass(frozen=True)
class CrossTab:
    table: np.ndarray
    row_values: tuple
    col_values: tuple
    ari: float


def _ari_from_table(table: np.ndarray) -> float:
    n = int(table.sum())
    index = sum(math.comb(int(v), 2) for v in table.flat)
    row_index = sum(math.comb(int(v), 2) for v in table.sum(axis=1))
    col_index = sum(math.comb(int(v), 2) for v in table.sum(axis=0))
    expected = row_index * col_index / math.comb(n, 2) if n >= 2 else 0.0
    max_index = 0.5 * (row_index + col_index)
    if max_index == expected:
        return 1.0
    return (index - expected) / (max_index - expected)


def cross_tab(labels: Sequence, truth_labels: Sequence) -> CrossTab:
    """Contingency table of two partitions plus their adjusted Rand index."""
    if len(labels) != len(truth_labels):
        raise ValueError(
            f"label sequences differ in length: {len(labels)} vs {len(truth_labels)}"
        )
    rows = tuple(sorted(set(labels)))
    cols = tuple(sorted(set(truth_labels)))
    table = np.zeros((len(rows), len(cols)), dtype=int)
    ri = {v: i for i, v in enumerate(rows)}
    ci = {v: i for i, v in enumerate(cols)}
    for a, b in zip(labels, truth_labels):
        table[ri[a], ci[b]] += 1
    return CrossTab(table, rows, cols, _ari_from_table(table))


# The six orderings of S_3 in the roles they play in the choice-axiom
# conditions: each ratio of probabilities on the left must equal the
# matching ratio of first-place masses on the right for a forward PL.
_S3 = [p.entries for p in enumerate_permutations(3)]


def iia_residuals(q: Mapping[tuple[int, ...], float]) -> tuple[float, float, float]:
    """Left-minus-right residuals of the three K=3 choice-axiom conditions.

    ``q`` maps each ordering of three items to its probability.  All three
    residuals vanish exactly when ``q`` is consistent with a forward
    Plackett-Luce model (constant pairwise choice ratios across stages).
    """
    probs = {}
    for key in _S3:
        if key not in q:
            raise ValueError(f"missing ordering {key}")
        value = float(q[key])
        if value < 0.0:
            raise ValueError(f"negative probability for {key}")
        probs[key] = value
    if abs(sum(probs.values()) - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {sum(probs.values())!r}, not 1")

    q123, q132 = probs[(1, 2, 3)], probs[(1, 3, 2)]
    q213, q231 = probs[(2, 1, 3)], probs[(2, 3, 1)]
    q312, q321 = probs[(3, 1, 2)], probs[(3, 2, 1)]
    first1 = q123 + q132
    first2 = q213 + q231
    first3 = q312 + q321
    denominators = {
        "q_(1,3,2)": q132,
        "q_(2,3,1)": q231,
        "q_(3,2,1)": q321,
        "mass of item-2-first": first2,
        "mass of item-3-first": first3,
    }
    for name, value in denominators.items():
        if value == 0.0:
            raise ValueError(f"degenerate distribution: {name} is zero")
    r1 = q123 / q132 - first2 / first3
    r2 = q213 / q231 - first1 / first3
    r3 = q312 / q321 - first1 / first2
    return (r1, r2, r3)
