"""Probability models on permutations.

Two families are implemented:

* the distance-based (Mallows-Kendall) model, an exponential family
  peaked at a central ranking ``sigma`` with concentration ``lam``;
* the extended Plackett-Luce model, a multistage model whose selection
  order is itself a permutation parameter ``rho`` (``rho = e`` recovers
  the forward Plackett-Luce, ``rho = (K+1)-e`` the backward one).

All pmfs work in the log domain and take *orderings* as input; the
distance-based density internally inverts to the ranking view.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .perms import Metric, Permutation, distance, identity, inverse

__all__ = [
    "LAMBDA_CAP",
    "SUPPORT_FLOOR",
    "DbParams",
    "EplParams",
    "kendall_partition",
    "log_kendall_partition",
    "db_log_pmf",
    "epl_log_pmf",
    "sample_db",
    "sample_epl",
    "expected_kendall_distance",
    "solve_lambda",
]

# Concentrations are clamped here: a component with lam=50 is numerically
# degenerate (exp(-50) ~ 2e-22) without overflowing anything downstream.
LAMBDA_CAP = 50.0

# Support probabilities never drop below this, keeping log pmfs finite.
SUPPORT_FLOOR = 1e-12


@dataclass(frozen=True)
class DbParams:
    """Central ranking and concentration of one distance-based component."""

    sigma: Permutation
    lam: float

    def __post_init__(self) -> None:
        if not self.lam >= 0.0:
            raise ValueError(f"concentration must be >= 0, got {self.lam}")

    @property
    def k(self) -> int:
        return self.sigma.k


@dataclass(frozen=True)
class EplParams:
    """Reference order and support probabilities of one extended PL component."""

    rho: Permutation
    support: tuple[float, ...]

    def __post_init__(self) -> None:
        support = tuple(float(v) for v in self.support)
        object.__setattr__(self, "support", support)
        if len(support) != self.rho.k:
            raise ValueError(
                f"support length {len(support)} != K={self.rho.k}"
            )
        if any(v <= 0.0 for v in support):
            raise ValueError("support entries must be strictly positive")
        total = math.fsum(support)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"support must sum to 1, got {total!r}")

    @property
    def k(self) -> int:
        return self.rho.k


def log_kendall_partition(lam: float, k: int) -> float:
    """log Z(lam) for the Kendall metric.

    Z(lam) = prod_{j=1}^{K} (1 - e^{-j lam}) / (1 - e^{-lam}), the closed
    form of sum_{pi} e^{-lam d_K(pi, sigma)}; independent of sigma by
    right-invariance.  At lam = 0 this is K!.
    """
    if lam < 0.0:
        raise ValueError(f"concentration must be >= 0, got {lam}")
    if k < 2:
        raise ValueError(f"K must be >= 2, got {k}")
    if lam == 0.0:
        return math.lgamma(k + 1)
    log_base = math.log(-math.expm1(-lam))
    return math.fsum(
        math.log(-math.expm1(-j * lam)) - log_base for j in range(1, k + 1)
    )


def kendall_partition(lam: float, k: int) -> float:
    """Normalization constant Z(lam) of the Mallows-Kendall model."""
    if lam == 0.0:
        log_kendall_partition(lam, k)  # argument validation
        return float(math.factorial(k))
    return math.exp(log_kendall_partition(lam, k))


def db_log_pmf(ordering: Permutation, params: DbParams) -> float:
    """Log probability of an ordering under the distance-based model.

    The model lives on rankings, so the input ordering is inverted before
    taking the Kendall distance to the central ranking:
    log P = -lam * d_K(pi, sigma) - log Z(lam).
    """
    if ordering.k != params.k:
        raise ValueError(f"dimension mismatch: {ordering.k} vs {params.k}")
    ranking = inverse(ordering)
    d = distance(Metric.KENDALL, ranking, params.sigma)
    return -params.lam * d - log_kendall_partition(params.lam, params.k)


def epl_log_pmf(ordering: Permutation, params: EplParams) -> float:
    """Log probability of an ordering under the extended Plackett-Luce model.

    log prod_t p_{ordering(rho(t))} / sum_{v=t}^{K} p_{ordering(rho(v))}:
    the item picked at stage t receives rank rho(t), with selection
    probabilities renormalized over the items still available.
    """
    if ordering.k != params.k:
        raise ValueError(f"dimension mismatch: {ordering.k} vs {params.k}")
    p = params.support
    picked = [p[ordering(r) - 1] for r in params.rho.entries]
    out = 0.0
    tail = 0.0
    for t in range(len(picked) - 1, -1, -1):
        tail += picked[t]
        out += math.log(picked[t]) - math.log(tail)
    return out


def sample_epl(params: EplParams, n: int, seed: int) -> list[Permutation]:
    """Draw n i.i.d. orderings from the extended Plackett-Luce model.

    Stage t selects one of the remaining items with probability
    proportional to its support and assigns it rank rho(t).  The
    stagewise renormalized draws are realized with the Gumbel-max trick:
    sorting log p_i + G_i descending reproduces the selection sequence
    distribution exactly.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    k = params.k
    rng = np.random.default_rng(seed)
    scores = np.log(params.support) + rng.gumbel(size=(n, k))
    selection = np.argsort(-scores, axis=1)  # items picked at stages 1..K
    rho_pos = np.array([r - 1 for r in params.rho.entries])
    orderings = np.empty((n, k), dtype=int)
    orderings[:, rho_pos] = selection + 1
    return [Permutation(tuple(row)) for row in orderings]


def sample_db(params: DbParams, n: int, seed: int) -> list[Permutation]:
    """Draw n i.i.d. orderings from the Mallows-Kendall model.

    Sequential-insertion construction, exact for the Kendall metric:
    item j enters the ordering jumping over i previously placed items
    with probability proportional to e^{-lam i}; the result is then
    relabeled to move the mode from the identity to sigma.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    k = params.k
    lam = min(params.lam, LAMBDA_CAP)
    rng = np.random.default_rng(seed)
    disp = np.zeros((n, k), dtype=int)
    for j in range(2, k + 1):
        cdf = np.cumsum(np.exp(-lam * np.arange(j)))
        cdf /= cdf[-1]
        disp[:, j - 1] = np.searchsorted(cdf, rng.random(n), side="right")
    sigma_inv = inverse(params.sigma).entries
    out = []
    for s in range(n):
        seq: list[int] = []
        for j in range(1, k + 1):
            seq.insert(j - 1 - disp[s, j - 1], j)
        out.append(Permutation(tuple(sigma_inv[v - 1] for v in seq)))
    return out


def expected_kendall_distance(lam: float, k: int) -> float:
    """Mean Kendall distance to the central ranking, E[d_K] = -d log Z / d lam.

    Equals K / (e^lam - 1) - sum_{j=1}^{K} j / (e^{j lam} - 1); strictly
    decreasing from K(K-1)/4 at lam = 0 towards 0.
    """
    if lam < 0.0:
        raise ValueError(f"concentration must be >= 0, got {lam}")
    if k < 2:
        raise ValueError(f"K must be >= 2, got {k}")
    if lam == 0.0:
        return k * (k - 1) / 4.0
    out = k / math.expm1(lam) if lam <= 700 else 0.0
    for j in range(1, k + 1):
        if j * lam <= 700:
            out -= j / math.expm1(j * lam)
    return out


def solve_lambda(target: float, k: int) -> float:
    """Concentration whose expected Kendall distance equals ``target``.

    Bisection on a bracketing interval whose upper bound expands
    geometrically.  Boundary cases: targets at or above the uniform mean
    K(K-1)/4 give 0, non-positive targets (or targets below what the
    concentration cap can reach) give LAMBDA_CAP.
    """
    if k < 2:
        raise ValueError(f"K must be >= 2, got {k}")
    max_mean = k * (k - 1) / 4.0
    if target >= max_mean:
        return 0.0
    if target <= 0.0 or expected_kendall_distance(LAMBDA_CAP, k) >= target:
        return LAMBDA_CAP
    lo, hi = 0.0, 1.0
    while expected_kendall_distance(hi, k) > target:
        lo = hi
        hi *= 2.0
        if hi >= LAMBDA_CAP:
            hi = LAMBDA_CAP
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if expected_kendall_distance(mid, k) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
