"""Brute-force reference implementations for small K.

Everything here recodes the model formulas from scratch on top of the
permutation primitives only; no code is shared with the model or fitting
modules, so agreement between the two sides is evidence, not tautology.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .perms import Metric, Permutation, distance, enumerate_permutations, inverse

__all__ = [
    "brute_pmf_mass",
    "brute_central_ranking",
    "brute_best_rho",
    "OracleCheck",
    "run_checks",
]

MAX_MASS_K = 6
MAX_CENTRAL_K = 8
MAX_RHO_K = 6


def _db_weight(ordering: Permutation, sigma: Permutation, lam: float) -> float:
    return math.exp(-lam * distance(Metric.KENDALL, inverse(ordering), sigma))


def _epl_prob(ordering: Permutation, rho: Permutation, support: Sequence[float]) -> float:
    remaining = list(range(1, ordering.k + 1))
    prob = 1.0
    for stage in range(1, ordering.k + 1):
        item = ordering(rho(stage))
        prob *= support[item - 1] / sum(support[i - 1] for i in remaining)
        remaining.remove(item)
    return prob


def brute_pmf_mass(family: str, params) -> float:
    """Total probability mass of a re-coded pmf summed over all of S_K.

    ``family`` is ``"db"`` or ``"epl"``; parameters are the matching
    parameter objects.  The DB mass uses the enumerated normalization
    constant, so this mostly certifies the enumeration machinery; the EPL
    mass genuinely checks that the stagewise product is a distribution.
    """
    k = params.k
    if k > MAX_MASS_K:
        raise ValueError(f"brute-force mass needs K <= {MAX_MASS_K}, got {k}")
    everything = enumerate_permutations(k)
    if family == "db":
        z = math.fsum(_db_weight(q, params.sigma, params.lam) for q in everything)
        return math.fsum(_db_weight(q, params.sigma, params.lam) / z for q in everything)
    if family == "epl":
        return math.fsum(_epl_prob(q, params.rho, params.support) for q in everything)
    raise ValueError(f"unknown family {family!r}")


def brute_central_ranking(
    data: Sequence[Permutation], weights: Sequence[float]
) -> Permutation:
    """Exhaustive argmin of the weighted Kendall distance; lexicographic ties.

    ``data`` holds orderings, matching the fitting interfaces; they are
    inverted to rankings before measuring distances.
    """
    k = data[0].k
    if k > MAX_CENTRAL_K:
        raise ValueError(f"exhaustive search needs K <= {MAX_CENTRAL_K}, got {k}")
    if len(weights) != len(data):
        raise ValueError("one weight per unit required")
    rankings = [inverse(q) for q in data]
    best, best_cost = None, math.inf
    for sigma in enumerate_permutations(k):
        cost = math.fsum(
            w * distance(Metric.KENDALL, r, sigma) for w, r in zip(weights, rankings)
        )
        if cost < best_cost:
            best, best_cost = sigma, cost
    return best


def brute_best_rho(
    data: Sequence[Permutation], weights: Sequence[float], support: Sequence[float]
) -> Permutation:
    """Exhaustive argmin of the reference-order objective; lexicographic ties."""
    k = data[0].k
    if k > MAX_RHO_K:
        raise ValueError(f"exhaustive search needs K <= {MAX_RHO_K}, got {k}")
    if len(weights) != len(data):
        raise ValueError("one weight per unit required")
    best, best_cost = None, math.inf
    for rho in enumerate_permutations(k):
        cost = 0.0
        for w, ordering in zip(weights, data):
            picked = [support[ordering(rho(t)) - 1] for t in range(1, k + 1)]
            tail = 0.0
            unit = 0.0
            for value in reversed(picked):
                tail += value
                unit += math.log(tail)
            cost += w * unit
        if cost < best_cost:
            best, best_cost = rho, cost
    return best


def rho_objective(
    data: Sequence[Permutation], weights: Sequence[float], support: Sequence[float], rho: Permutation
) -> float:
    """The weighted log-remaining-mass objective minimized by the rho search."""
    cost = 0.0
    for w, ordering in zip(weights, data):
        picked = [support[ordering(rho(t)) - 1] for t in range(1, rho.k + 1)]
        tail = 0.0
        unit = 0.0
        for value in reversed(picked):
            tail += value
            unit += math.log(tail)
        cost += w * unit
    return cost


@dataclass(frozen=True)
class OracleCheck:
    name: str
    max_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance


def run_checks(seed: int = 0) -> list[OracleCheck]:
    """Cross-validate the fast implementations against the brute-force ones."""
    from .fit import m_step_db, update_reference_order
    from .models import (
        DbParams,
        EplParams,
        db_log_pmf,
        epl_log_pmf,
        expected_kendall_distance,
        kendall_partition,
    )
    from .perms import random_permutation

    rng = np.random.default_rng(seed)
    checks = []

    err = 0.0
    for k in (3, 4, 5):
        for _ in range(10):
            sigma = random_permutation(k, rng)
            lam = float(rng.uniform(0.0, 4.0))
            err = max(err, abs(brute_pmf_mass("db", DbParams(sigma, lam)) - 1.0))
            p = rng.dirichlet(np.ones(k))
            epl = EplParams(random_permutation(k, rng), tuple(p / p.sum()))
            err = max(err, abs(brute_pmf_mass("epl", epl) - 1.0))
    checks.append(OracleCheck("pmf normalization (brute force)", err, 1e-10))

    err = 0.0
    for k in (3, 4, 5, 6):
        e = enumerate_permutations(k)
        for lam in (0.01, 0.5, 2.0):
            z_enum = math.fsum(
                math.exp(-lam * distance(Metric.KENDALL, q, e[0])) for q in e
            )
            err = max(err, abs(kendall_partition(lam, k) - z_enum) / z_enum)
            mean_enum = (
                math.fsum(
                    distance(Metric.KENDALL, q, e[0])
                    * math.exp(-lam * distance(Metric.KENDALL, q, e[0]))
                    for q in e
                )
                / z_enum
            )
            err = max(err, abs(expected_kendall_distance(lam, k) - mean_enum))
    checks.append(OracleCheck("partition function vs enumeration", err, 1e-10))

    err = 0.0
    for k in (3, 4, 5):
        for _ in range(5):
            sigma = random_permutation(k, rng)
            lam = float(rng.uniform(0.0, 3.0))
            params = DbParams(sigma, lam)
            p = rng.dirichlet(np.ones(k))
            epl = EplParams(random_permutation(k, rng), tuple(p / p.sum()))
            zd = math.fsum(_db_weight(q, sigma, lam) for q in enumerate_permutations(k))
            for q in enumerate_permutations(k):
                err = max(
                    err,
                    abs(math.exp(db_log_pmf(q, params)) - _db_weight(q, sigma, lam) / zd),
                )
                err = max(
                    err,
                    abs(math.exp(epl_log_pmf(q, epl)) - _epl_prob(q, epl.rho, epl.support)),
                )
    checks.append(OracleCheck("pmf values, fast vs brute force", err, 1e-12))

    mismatches = 0.0
    for _ in range(25):
        k = 5
        data = [random_permutation(k, rng) for _ in range(20)]
        zhat = rng.dirichlet(np.ones(2), size=20)
        _, comps = m_step_db(data, zhat)
        for g in range(2):
            ref = brute_central_ranking(data, zhat[:, g])
            if ref != comps[g].sigma:
                mismatches += 1.0
    checks.append(OracleCheck("central ranking, m-step vs exhaustive", mismatches, 0.0))

    err = 0.0
    for _ in range(25):
        k = 4
        data = [random_permutation(k, rng) for _ in range(15)]
        w = rng.uniform(0.1, 1.0, size=15)
        p = rng.dirichlet(np.ones(k))
        p = tuple(p / p.sum())
        start = random_permutation(k, rng)
        local = update_reference_order(data, w, p, start, d_max=k * (k - 1) // 2)
        ref = brute_best_rho(data, w, p)
        err = max(
            err,
            abs(rho_objective(data, w, p, local) - rho_objective(data, w, p, ref)),
        )
    checks.append(OracleCheck("reference order, ball search vs exhaustive", err, 1e-12))
    return checks
