"""Permutation algebra on {1..K}: construction, composition, metrics,
enumeration, and Kendall neighborhoods.

A ``Permutation`` is stored in one-line notation as a tuple of ranks:
position ``i`` holds the value assigned to item ``i``. The same type is
used for rankings (item -> rank) and, through :func:`inverse`, for
orderings (rank -> item).

>>> p = Permutation((2, 3, 1))
>>> inverse(p).entries
(3, 1, 2)
>>> compose(p, inverse(p)).entries
(1, 2, 3)
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterator

import numpy as np

__all__ = [
    "Permutation",
    "Metric",
    "identity",
    "backward",
    "inverse",
    "compose",
    "distance",
    "enumerate_permutations",
    "kendall_neighborhood",
    "random_permutation",
]

MAX_ENUM_K = 9


@dataclass(frozen=True)
class Permutation:
    """A bijection on {1..K} in one-line notation."""

    entries: tuple[int, ...]

    def __post_init__(self) -> None:
        entries = tuple(int(v) for v in self.entries)
        object.__setattr__(self, "entries", entries)
        k = len(entries)
        if k < 2:
            raise ValueError(f"permutation needs K >= 2, got K={k}")
        if sorted(entries) != list(range(1, k + 1)):
            raise ValueError(f"not a bijection on 1..{k}: {entries}")

    @property
    def k(self) -> int:
        return len(self.entries)

    def __call__(self, i: int) -> int:
        """Value at position ``i`` (1-based)."""
        return self.entries[i - 1]

    def __iter__(self) -> Iterator[int]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __repr__(self) -> str:
        return f"Permutation({self.entries})"


class Metric(Enum):
    KENDALL = "kendall"
    SPEARMAN = "spearman"
    FOOTRULE = "footrule"
    CAYLEY = "cayley"


def identity(k: int) -> Permutation:
    return Permutation(tuple(range(1, k + 1)))


def backward(k: int) -> Permutation:
    """The reversal (K+1) - e, i.e. (K, K-1, ..., 1)."""
    return Permutation(tuple(range(k, 0, -1)))


def inverse(p: Permutation) -> Permutation:
    """The inverse bijection: q(p(i)) = i.

    Applied to a ranking it yields the matching ordering and vice versa.
    """
    out = [0] * p.k
    for i, v in enumerate(p.entries, start=1):
        out[v - 1] = i
    return Permutation(tuple(out))


def compose(a: Permutation, b: Permutation) -> Permutation:
    """Functional composition: result(t) = a(b(t))."""
    if a.k != b.k:
        raise ValueError(f"dimension mismatch: {a.k} vs {b.k}")
    return Permutation(tuple(a.entries[v - 1] for v in b.entries))


def _n_cycles(p: Permutation) -> int:
    seen = [False] * p.k
    cycles = 0
    for start in range(p.k):
        if seen[start]:
            continue
        cycles += 1
        j = start
        while not seen[j]:
            seen[j] = True
            j = p.entries[j] - 1
    return cycles


def distance(metric: Metric, x: Permutation, y: Permutation) -> float:
    """Distance between two permutations under the given metric.

    Kendall counts pairwise disagreements, Spearman sums squared rank
    differences, Footrule sums absolute rank differences, and Cayley is
    K minus the number of cycles of x^-1 y.  All four are right-invariant.
    """
    if x.k != y.k:
        raise ValueError(f"dimension mismatch: {x.k} vs {y.k}")
    xe, ye = x.entries, y.entries
    if metric is Metric.KENDALL:
        k = x.k
        d = 0
        for i in range(k - 1):
            for j in range(i + 1, k):
                if (xe[i] - xe[j]) * (ye[i] - ye[j]) < 0:
                    d += 1
        return float(d)
    if metric is Metric.SPEARMAN:
        return float(sum((a - b) ** 2 for a, b in zip(xe, ye)))
    if metric is Metric.FOOTRULE:
        return float(sum(abs(a - b) for a, b in zip(xe, ye)))
    if metric is Metric.CAYLEY:
        return float(x.k - _n_cycles(compose(inverse(x), y)))
    raise ValueError(f"unknown metric: {metric!r}")


def enumerate_permutations(k: int) -> list[Permutation]:
    """All K! permutations in lexicographic order (2 <= K <= 9)."""
    if not 2 <= k <= MAX_ENUM_K:
        raise ValueError(f"enumeration supports 2 <= K <= {MAX_ENUM_K}, got {k}")
    return [Permutation(t) for t in itertools.permutations(range(1, k + 1))]


def _adjacent_rank_swaps(p: Permutation) -> list[Permutation]:
    """The K-1 permutations obtained by swapping the entries holding
    values j and j+1; these are exactly the Kendall-distance-1 neighbors."""
    pos = [0] * (p.k + 1)
    for i, v in enumerate(p.entries):
        pos[v] = i
    out = []
    for j in range(1, p.k):
        e = list(p.entries)
        a, b = pos[j], pos[j + 1]
        e[a], e[b] = e[b], e[a]
        out.append(Permutation(tuple(e)))
    return out


def kendall_neighborhood(center: Permutation, d_max: int) -> set[Permutation]:
    """All permutations q != center with Kendall distance d(q, center) <= d_max.

    Breadth-first over adjacent-value swaps; each swap changes the Kendall
    distance to the center by exactly one, so BFS depth equals distance.
    """
    if d_max < 1:
        raise ValueError(f"d_max must be >= 1, got {d_max}")
    frontier = {center}
    seen = {center}
    for _ in range(min(d_max, center.k * (center.k - 1) // 2)):
        nxt = set()
        for p in frontier:
            for q in _adjacent_rank_swaps(p):
                if q not in seen:
                    seen.add(q)
                    nxt.add(q)
        frontier = nxt
        if not frontier:
            break
    seen.discard(center)
    return seen


def random_permutation(k: int, rng: np.random.Generator) -> Permutation:
    return Permutation(tuple(int(v) + 1 for v in rng.permutation(k)))
