"""Maximum-likelihood fitting of ranking mixtures by EM / hybrid EMM.

Distance-based mixtures use a classical EM: responsibilities, then exact
weighted-consensus and concentration updates per component.  Support
families (forward/backward Plackett-Luce and extended PL) use the hybrid
EMM: each M-step performs one minorize-maximize update of the support
probabilities per component, followed (extended PL only) by a greedy
local search over reference orders within a Kendall ball, and finally
the weight update.  Convergence is assessed with the Aitken acceleration
criterion on the observed log-likelihood trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Sequence, Union

import numpy as np
from scipy.special import logsumexp

from .models import (
    SUPPORT_FLOOR,
    DbParams,
    EplParams,
    log_kendall_partition,
    solve_lambda,
)
from .perms import (
    Permutation,
    backward,
    enumerate_permutations,
    identity,
    inverse,
    random_permutation,
)
from .select import bic as bic_value
from .select import count_free_params

__all__ = [
    "Family",
    "Mixture",
    "FitResult",
    "ComponentCollapseError",
    "FitError",
    "e_step",
    "m_step_db",
    "mm_update_support",
    "update_reference_order",
    "aitken_converged",
    "initial_mixture",
    "fit_mixture",
]

ComponentParams = Union[DbParams, EplParams]

# A component whose responsibility column sums below this has collapsed.
COLLAPSE_EPS = 1e-10

# Exact enumeration of the weighted-consensus argmin is used up to this K;
# beyond it a Borda-started steepest descent over adjacent swaps takes over.
EXACT_CONSENSUS_MAX_K = 8


class ComponentCollapseError(RuntimeError):
    """A mixture component lost all its responsibility mass."""


class FitError(RuntimeError):
    """No EM start produced a usable fit."""


class Family(Enum):
    DB = "db"
    PL_FORWARD = "pl-forward"
    PL_BACKWARD = "pl-backward"
    EPL = "epl"

    @property
    def uses_support(self) -> bool:
        return self is not Family.DB


@dataclass(frozen=True)
class Mixture:
    """Weights plus a homogeneous set of component parameters."""

    weights: tuple[float, ...]
    components: tuple[ComponentParams, ...]
    family: Family

    def __post_init__(self) -> None:
        weights = tuple(float(w) for w in self.weights)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "family", Family(self.family))
        if len(self.components) < 1:
            raise ValueError("mixture needs G >= 1 components")
        if len(weights) != len(self.components):
            raise ValueError("one weight per component required")
        if any(w <= 0.0 for w in weights):
            raise ValueError("weights must be strictly positive")
        if abs(math.fsum(weights) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {math.fsum(weights)!r}")
        want = DbParams if self.family is Family.DB else EplParams
        if any(not isinstance(c, want) for c in self.components):
            raise ValueError(f"{self.family.value} mixture needs {want.__name__} components")
        ks = {c.k for c in self.components}
        if len(ks) != 1:
            raise ValueError(f"components disagree on K: {sorted(ks)}")
        k = ks.pop()
        if self.family is Family.PL_FORWARD:
            if any(c.rho != identity(k) for c in self.components):
                raise ValueError("forward PL components must have rho = e")
        if self.family is Family.PL_BACKWARD:
            if any(c.rho != backward(k) for c in self.components):
                raise ValueError("backward PL components must have rho = (K+1)-e")

    @property
    def g(self) -> int:
        return len(self.components)

    @property
    def k(self) -> int:
        return self.components[0].k


@dataclass(frozen=True)
class FitResult:
    """Outcome of one mixture fit (best of all EM starts)."""

    mixture: Mixture
    responsibilities: np.ndarray
    loglik_trace: tuple[float, ...]
    converged: bool
    iterations: int
    bic: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "loglik_trace", tuple(self.loglik_trace))
        trace = self.loglik_trace
        if any(b < a - 1e-8 for a, b in zip(trace, trace[1:])):
            raise ValueError("log-likelihood trace decreased beyond tolerance")
        z = np.asarray(self.responsibilities, dtype=float)
        object.__setattr__(self, "responsibilities", z)
        if z.ndim != 2 or z.shape[1] != self.mixture.g:
            raise ValueError("responsibility matrix shape does not match mixture")
        if np.any(z < 0) or np.max(np.abs(z.sum(axis=1) - 1.0)) > 1e-10:
            raise ValueError("responsibility rows must be non-negative and sum to 1")

    @property
    def final_loglik(self) -> float:
        return self.loglik_trace[-1]


# ---------------------------------------------------------------------------
# array plumbing


def _orderings_matrix(data: Sequence[Permutation]) -> np.ndarray:
    """(N, K) matrix of 0-based item indices, row s listing items by rank."""
    if len(data) == 0:
        raise ValueError("empty dataset")
    k = data[0].k
    if any(q.k != k for q in data):
        raise ValueError("all units must share the same K")
    return np.array([[v - 1 for v in q.entries] for q in data], dtype=np.int64)


class _FitArrays:
    """Per-dataset precomputations shared across EM starts."""

    def __init__(self, data: Sequence[Permutation]):
        self.orderings = _orderings_matrix(data)
        self.n, self.k = self.orderings.shape
        self._ranks = None
        self._pair_orient = None

    @property
    def ranks(self) -> np.ndarray:
        """(N, K): 0-based rank of each item."""
        if self._ranks is None:
            n, k = self.orderings.shape
            self._ranks = np.empty_like(self.orderings)
            np.put_along_axis(
                self._ranks, self.orderings, np.broadcast_to(np.arange(k), (n, k)), axis=1
            )
        return self._ranks

    @property
    def pair_orient(self) -> np.ndarray:
        """(N, P) booleans over item pairs i<j: unit ranks item i above item j."""
        if self._pair_orient is None:
            iu_i, iu_j = np.triu_indices(self.k, 1)
            self._pair_orient = self.ranks[:, iu_i] < self.ranks[:, iu_j]
        return self._pair_orient


@lru_cache(maxsize=4)
def _enum_rankings(k: int) -> tuple[np.ndarray, np.ndarray]:
    """All rankings of S_K (lexicographic) plus their pair orientations."""
    perms = np.array([p.entries for p in enumerate_permutations(k)], dtype=np.int64)
    iu_i, iu_j = np.triu_indices(k, 1)
    return perms, perms[:, iu_i] < perms[:, iu_j]


def _sigma_pair_orient(sigma: Permutation) -> np.ndarray:
    arr = np.array(sigma.entries)
    iu_i, iu_j = np.triu_indices(sigma.k, 1)
    return arr[iu_i] < arr[iu_j]


def _kendall_to_sigma(pair_orient: np.ndarray, sigma: Permutation) -> np.ndarray:
    """Kendall distance of every unit's ranking to sigma."""
    return (pair_orient != _sigma_pair_orient(sigma)).sum(axis=1)


def _floor_normalize(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    p = p / p.sum()
    p = np.maximum(p, SUPPORT_FLOOR)
    return p / p.sum()


def _rho_positions(rho: Permutation) -> np.ndarray:
    return np.array([r - 1 for r in rho.entries])


def _epl_selection_tails(
    orderings: np.ndarray, rho_pos: np.ndarray, p: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Stagewise selected supports and their remaining-mass tails (both N x K)."""
    picked = p[orderings[:, rho_pos]]
    tails = np.cumsum(picked[:, ::-1], axis=1)[:, ::-1]
    return picked, tails


def _epl_log_pmf_rows(
    orderings: np.ndarray, rho_pos: np.ndarray, p: np.ndarray
) -> np.ndarray:
    picked, tails = _epl_selection_tails(orderings, rho_pos, p)
    return np.log(picked).sum(axis=1) - np.log(tails).sum(axis=1)


def _log_pmf_matrix(arrays: _FitArrays, mixture_like) -> np.ndarray:
    family, components = mixture_like
    n = arrays.n
    out = np.empty((n, len(components)))
    for g, comp in enumerate(components):
        if comp.k != arrays.k:
            raise ValueError(f"dimension mismatch: data K={arrays.k}, component K={comp.k}")
        if family is Family.DB:
            d = _kendall_to_sigma(arrays.pair_orient, comp.sigma)
            out[:, g] = -comp.lam * d - log_kendall_partition(comp.lam, comp.k)
        else:
            out[:, g] = _epl_log_pmf_rows(
                arrays.orderings, _rho_positions(comp.rho), np.asarray(comp.support)
            )
    return out


def _responsibilities_from(log_pmf: np.ndarray, weights) -> tuple[np.ndarray, float]:
    log_mix = log_pmf + np.log(np.asarray(weights, dtype=float))
    row_lse = logsumexp(log_mix, axis=1)
    if not np.all(np.isfinite(row_lse)):
        raise FitError("some unit has zero likelihood under every component")
    z = np.exp(log_mix - row_lse[:, None])
    return z, float(row_lse.sum())


# ---------------------------------------------------------------------------
# public operations


def e_step(data: Sequence[Permutation], mix: Mixture) -> np.ndarray:
    """Posterior component memberships, z_sg proportional to w_g * pmf_g(unit s).

    Computed in the log domain through a log-sum-exp normalization; each
    row of the result sums to one.
    """
    arrays = _FitArrays(data)
    log_pmf = _log_pmf_matrix(arrays, (mix.family, mix.components))
    z, _ = _responsibilities_from(log_pmf, mix.weights)
    return z


def _consensus_exact(pair_orient: np.ndarray, w: np.ndarray, k: int) -> Permutation:
    """Exhaustive argmin of the weighted Kendall objective, lexicographic ties."""
    above = w @ pair_orient  # weight preferring i over j, pairs i<j
    below = w.sum() - above
    perms, orient = _enum_rankings(k)
    cost = orient @ below + (~orient) @ above
    return Permutation(tuple(perms[int(np.argmin(cost))]))


def _pair_weight_matrix(pair_orient: np.ndarray, w: np.ndarray, k: int) -> np.ndarray:
    above = w @ pair_orient
    iu_i, iu_j = np.triu_indices(k, 1)
    a = np.zeros((k, k))
    a[iu_i, iu_j] = above
    a[iu_j, iu_i] = w.sum() - above
    return a


def _consensus_cost(a: np.ndarray, sigma: Permutation) -> float:
    order = np.argsort(np.array(sigma.entries))  # items from best to worst rank
    cost = 0.0
    for pos in range(len(order)):
        cost += a[order[pos + 1 :], order[pos]].sum()
    return float(cost)


def _descend_consensus(a: np.ndarray, sigma: Permutation) -> Permutation:
    """Steepest descent over adjacent-rank swaps until no improvement."""
    order = list(np.argsort(np.array(sigma.entries)))
    while True:
        deltas = [
            a[order[j], order[j + 1]] - a[order[j + 1], order[j]]
            for j in range(len(order) - 1)
        ]
        j = int(np.argmin(deltas))
        if not deltas[j] < 0.0:
            break
        order[j], order[j + 1] = order[j + 1], order[j]
    sigma_out = np.empty(len(order), dtype=int)
    sigma_out[order] = np.arange(1, len(order) + 1)
    return Permutation(tuple(sigma_out))


def _borda_start(ranks: np.ndarray, w: np.ndarray) -> Permutation:
    k = ranks.shape[1]
    mean_rank = w @ ranks
    order = np.lexsort((np.arange(k), mean_rank))
    sigma = np.empty(k, dtype=int)
    sigma[order] = np.arange(1, k + 1)
    return Permutation(tuple(sigma))


def _consensus_ranking(
    arrays: _FitArrays, w: np.ndarray, prev: Permutation | None
) -> Permutation:
    k = arrays.k
    if k <= EXACT_CONSENSUS_MAX_K:
        return _consensus_exact(arrays.pair_orient, w, k)
    a = _pair_weight_matrix(arrays.pair_orient, w, k)
    candidates = [_descend_consensus(a, _borda_start(arrays.ranks, w))]
    if prev is not None:
        candidates.append(_descend_consensus(a, prev))
    return min(candidates, key=lambda s: (_consensus_cost(a, s), s.entries))


def _m_step_db_arrays(
    arrays: _FitArrays, zhat: np.ndarray, prev: Sequence[DbParams] | None
) -> tuple[np.ndarray, list[DbParams]]:
    col_sums = zhat.sum(axis=0)
    if np.any(col_sums < COLLAPSE_EPS):
        raise ComponentCollapseError(
            f"component {int(np.argmin(col_sums)) + 1} has no responsibility mass"
        )
    weights = col_sums / zhat.shape[0]
    components = []
    for g in range(zhat.shape[1]):
        col = zhat[:, g]
        sigma = _consensus_ranking(arrays, col, prev[g].sigma if prev else None)
        mean_d = float(col @ _kendall_to_sigma(arrays.pair_orient, sigma)) / col_sums[g]
        components.append(DbParams(sigma, solve_lambda(mean_d, arrays.k)))
    return weights, components


def m_step_db(
    data: Sequence[Permutation], zhat: np.ndarray
) -> tuple[np.ndarray, list[DbParams]]:
    """Weight, central-ranking and concentration updates for a DB mixture.

    w_g is the mean responsibility; sigma_g minimizes the responsibility-
    weighted Kendall distance (exact enumeration up to K=8, Borda-started
    local search beyond); lam_g matches the weighted mean distance.
    """
    arrays = _FitArrays(data)
    zhat = np.asarray(zhat, dtype=float)
    if zhat.ndim != 2 or zhat.shape[0] != arrays.n:
        raise ValueError("responsibility matrix must be N x G")
    return _m_step_db_arrays(arrays, zhat, prev=None)


def _mm_support_arrays(
    orderings: np.ndarray, z_col: np.ndarray, rho_pos: np.ndarray, p: np.ndarray
) -> np.ndarray:
    n, k = orderings.shape
    picked, tails = _epl_selection_tails(orderings, rho_pos, p)
    inv_tail_cum = np.cumsum(1.0 / tails, axis=1)
    # stage[s, i] = selection stage at which unit s picks item i
    selected = orderings[:, rho_pos]
    stage = np.empty_like(selected)
    np.put_along_axis(stage, selected, np.broadcast_to(np.arange(k), (n, k)), axis=1)
    denom = z_col @ np.take_along_axis(inv_tail_cum, stage, axis=1)
    raw = z_col.sum() / denom
    return _floor_normalize(raw)


def mm_update_support(
    data: Sequence[Permutation],
    zhat_col: np.ndarray,
    rho_g: Permutation,
    p_g: Sequence[float],
) -> np.ndarray:
    """One minorize-maximize update of the support probabilities.

    p_i' = sum_s z_s / sum_s z_s sum_t delta_sti / tail_st, where delta_sti
    flags item i as still unselected at stage t and tail_st is the support
    mass of the items still available; the result is renormalized to the
    simplex, which leaves the pmf unchanged.
    """
    orderings = _orderings_matrix(data)
    z_col = np.asarray(zhat_col, dtype=float)
    if z_col.shape != (orderings.shape[0],):
        raise ValueError("one responsibility weight per unit required")
    if np.all(z_col <= 0.0):
        raise ValueError("responsibility weights must not be all zero")
    return _mm_support_arrays(orderings, z_col, _rho_positions(rho_g), np.asarray(p_g, float))


def _rho_objective(
    orderings: np.ndarray, z_col: np.ndarray, p: np.ndarray, rho_pos: np.ndarray
) -> float:
    _, tails = _epl_selection_tails(orderings, rho_pos, p)
    return float(z_col @ np.log(tails).sum(axis=1))


@lru_cache(maxsize=65536)
def _kendall_ball(center: tuple[int, ...], d_max: int) -> tuple[tuple[int, ...], ...]:
    """Lexicographically sorted tuples at Kendall distance 1..d_max from center.

    Same breadth-first construction as :func:`rankmix.perms.kendall_neighborhood`
    but on raw tuples, cheap enough for the EM inner loop.
    """
    k = len(center)
    frontier = {center}
    seen = {center}
    for _ in range(min(d_max, k * (k - 1) // 2)):
        nxt = set()
        for row in frontier:
            pos = {v: i for i, v in enumerate(row)}
            for j in range(k - 1):
                e = list(row)
                a, b = pos[j], pos[j + 1]
                e[a], e[b] = e[b], e[a]
                cand = tuple(e)
                if cand not in seen:
                    seen.add(cand)
                    nxt.add(cand)
        frontier = nxt
        if not frontier:
            break
    seen.discard(center)
    return tuple(sorted(seen))


def _update_rho_once_pos(
    orderings: np.ndarray,
    z_col: np.ndarray,
    p: np.ndarray,
    rho_pos: tuple[int, ...],
    d_max: int,
) -> tuple[int, ...]:
    """One ball search step on 0-based stage-to-rank tuples.

    All candidates are scored in a single batched pass; ties keep the
    current tuple, then fall to the lexicographically smallest candidate.
    """
    candidates = _kendall_ball(rho_pos, d_max)
    if not candidates:
        return rho_pos
    # score the current tuple through the same batched path so that exact
    # ties (e.g. uniform support) resolve toward it
    cand_matrix = np.array((rho_pos,) + candidates)  # (1 + C, K)
    picked = p[orderings[:, cand_matrix]]  # (N, 1 + C, K)
    tails = np.cumsum(picked[:, :, ::-1], axis=2)[:, :, ::-1]
    objectives = z_col @ np.log(tails).sum(axis=2)
    best = int(np.argmin(objectives[1:]))
    if objectives[1 + best] < objectives[0]:
        return candidates[best]
    return rho_pos


def _update_rho_once(
    orderings: np.ndarray,
    z_col: np.ndarray,
    p: np.ndarray,
    rho: Permutation,
    d_max: int,
) -> Permutation:
    out = _update_rho_once_pos(
        orderings, z_col, p, tuple(_rho_positions(rho)), d_max
    )
    return Permutation(tuple(v + 1 for v in out))


def update_reference_order(
    data: Sequence[Permutation],
    zhat_col: np.ndarray,
    p_g: Sequence[float],
    rho_g: Permutation,
    d_max: int,
) -> Permutation:
    """Best reference order within a Kendall ball around the current one.

    Minimizes the weighted sum of log remaining-mass terms (the only part
    of the log-likelihood that depends on rho); ties keep the current rho,
    then fall to the lexicographically smallest candidate.
    """
    if d_max < 1:
        raise ValueError(f"d_max must be >= 1, got {d_max}")
    orderings = _orderings_matrix(data)
    return _update_rho_once(
        orderings, np.asarray(zhat_col, float), np.asarray(p_g, float), rho_g, d_max
    )


def aitken_converged(l_prev2: float, l_prev: float, l_curr: float, tol: float) -> bool:
    """Aitken acceleration stopping rule on three consecutive log-likelihoods.

    Extrapolates the limit l_inf = l_prev + (l_curr - l_prev) / (1 - a)
    with a = (l_curr - l_prev) / (l_prev - l_prev2) and fires when the
    extrapolated limit is within tol of the current value.  An exactly
    flat trace counts as converged.
    """
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    if l_prev2 == l_prev == l_curr:
        return True
    if l_prev == l_prev2:
        return False
    a = (l_curr - l_prev) / (l_prev - l_prev2)
    if a == 1.0:
        return False
    l_inf = l_prev + (l_curr - l_prev) / (1.0 - a)
    return abs(l_inf - l_curr) < tol


# ---------------------------------------------------------------------------
# full EM / EMM driver

# Iterations spent fitting each seeded group before the mixture EM starts.
PREFIT_ITERS = 40

# MM steps used when rescoring candidate stage orders on their own support.
SUPPORT_REFIT_ITERS = 25

# The refit and reversal probes only fire once the MM step moves the support
# by less than this; while the support is still travelling they are wasted.
PROBE_TRIGGER = 1e-3


def _stage_swaps(rho_pos: tuple[int, ...]) -> tuple[tuple[int, ...], ...]:
    """Tuples obtained by swapping the ranks assigned at consecutive stages."""
    return tuple(
        rho_pos[:t] + (rho_pos[t + 1], rho_pos[t]) + rho_pos[t + 2 :]
        for t in range(len(rho_pos) - 1)
    )


def _search_rho_pos(
    orderings: np.ndarray,
    z_col: np.ndarray,
    p: np.ndarray,
    rho_pos: tuple[int, ...],
    d_max: int,
) -> tuple[tuple[int, ...], bool]:
    """One greedy step over the Kendall ball plus the stage-adjacent swaps.

    The stage swaps sit at Kendall distances up to 2K-3, so this probes a
    sparse slice of a wider ball; without them the reference-order walk
    strands in spurious optima (the Kendall-1 landscape of the stagewise
    objective is heavily multimodal).
    """
    candidates = tuple(
        sorted(set(_kendall_ball(rho_pos, d_max)) | set(_stage_swaps(rho_pos)))
    )
    if not candidates:
        return rho_pos, False
    cand_matrix = np.array((rho_pos,) + candidates)
    picked = p[orderings[:, cand_matrix]]
    tails = np.cumsum(picked[:, :, ::-1], axis=2)[:, :, ::-1]
    objectives = z_col @ np.log(tails).sum(axis=2)
    best = int(np.argmin(objectives[1:]))
    if objectives[1 + best] < objectives[0]:
        return candidates[best], True
    return rho_pos, False


def _weighted_component_loglik(
    orderings: np.ndarray, z_col: np.ndarray, rho_pos, p: np.ndarray
) -> float:
    picked = p[orderings[:, np.asarray(rho_pos)]]
    tails = np.cumsum(picked[:, ::-1], axis=1)[:, ::-1]
    return float(z_col @ (np.log(picked) - np.log(tails)).sum(axis=1))


def _batched_support_refit(
    orderings: np.ndarray,
    z_col: np.ndarray,
    cand_matrix: np.ndarray,
    p0: np.ndarray,
    iters: int,
) -> tuple[np.ndarray, np.ndarray]:
    """MM-refit the support under every candidate stage order at once.

    Returns the refitted supports (C, K) and each candidate's weighted
    log-likelihood at its own refit (C,).
    """
    n, k = orderings.shape
    c = cand_matrix.shape[0]
    selected = orderings[:, cand_matrix]  # (N, C, K)
    stage = np.empty_like(selected)
    np.put_along_axis(stage, selected, np.broadcast_to(np.arange(k), (n, c, k)), axis=2)
    supports = np.broadcast_to(p0, (c, k)).copy()
    mass = z_col.sum()
    cidx = np.arange(c)[None, :, None]
    for _ in range(iters):
        picked = supports[cidx, selected]
        tails = np.cumsum(picked[:, :, ::-1], axis=2)[:, :, ::-1]
        per_item = np.take_along_axis(np.cumsum(1.0 / tails, axis=2), stage, axis=2)
        denom = np.einsum("s,sck->ck", z_col, per_item)
        supports = mass / denom
        supports /= supports.sum(axis=1, keepdims=True)
        supports = np.maximum(supports, SUPPORT_FLOOR)
        supports /= supports.sum(axis=1, keepdims=True)
    picked = supports[cidx, selected]
    tails = np.cumsum(picked[:, :, ::-1], axis=2)[:, :, ::-1]
    logliks = z_col @ (np.log(picked) - np.log(tails)).sum(axis=2)
    return supports, logliks


def _update_epl_component(
    arrays: _FitArrays,
    z_col: np.ndarray,
    comp: EplParams,
    d_max: int,
    search_rho: bool,
    memo: dict | None = None,
    memo_key: int = 0,
) -> EplParams:
    """One generalized M-step for a support component.

    A single MM support update, then (extended PL only) a tiered greedy
    search over stage orders, every tier accepted only on strict
    improvement so the observed log-likelihood keeps its ascent guarantee:

    1. walk over the Kendall ball plus stage-adjacent swaps, candidates
       scored at the current support;
    2. when the walk stalls, the same neighbors scored on a short support
       refit each (a stalled (rho, p) pair is self-consistent, and moves
       that pay off only after the support adapts are invisible to 1);
    3. finally a probe of the reversed stage order, refit from scratch
       (forward and backward representations are near-equivalent, so no
       sequence of local moves crosses between them).

    Tiers 2 and 3 only run once the support has nearly stopped moving,
    and are skipped while the stage order is unchanged since their last
    failure for this component.
    """
    old_support = np.asarray(comp.support)
    p = _mm_support_arrays(arrays.orderings, z_col, _rho_positions(comp.rho), old_support)
    if not search_rho:
        return EplParams(comp.rho, tuple(p))
    rho_pos = tuple(_rho_positions(comp.rho))
    memo = memo if memo is not None else {}
    settled = float(np.max(np.abs(p - old_support))) < PROBE_TRIGGER
    while True:
        rho_pos, accepted = _search_rho_pos(arrays.orderings, z_col, p, rho_pos, d_max)
        if accepted:
            continue
        if not settled:
            break
        current = _weighted_component_loglik(arrays.orderings, z_col, rho_pos, p)

        if memo.get(("profile", memo_key)) != rho_pos:
            candidates = tuple(
                sorted(set(_kendall_ball(rho_pos, d_max)) | set(_stage_swaps(rho_pos)))
            )
            supports, logliks = _batched_support_refit(
                arrays.orderings, z_col, np.array(candidates), p, SUPPORT_REFIT_ITERS
            )
            best = int(np.argmax(logliks))
            if logliks[best] > current:
                rho_pos, p = candidates[best], supports[best]
                continue
            memo[("profile", memo_key)] = rho_pos

        if memo.get(("reverse", memo_key)) != rho_pos:
            probe_pos = tuple(reversed(rho_pos))
            p_probe = np.full(arrays.k, 1.0 / arrays.k)
            for _ in range(8):
                for _ in range(SUPPORT_REFIT_ITERS):
                    p_probe = _mm_support_arrays(
                        arrays.orderings, z_col, np.array(probe_pos), p_probe
                    )
                probe_pos, accepted = _search_rho_pos(
                    arrays.orderings, z_col, p_probe, probe_pos, d_max
                )
                if not accepted:
                    break
            if _weighted_component_loglik(arrays.orderings, z_col, probe_pos, p_probe) > current:
                rho_pos, p = probe_pos, p_probe
                continue
            memo[("reverse", memo_key)] = rho_pos
        break
    return EplParams(Permutation(tuple(v + 1 for v in rho_pos)), tuple(p))


def _seed_partition(arrays: _FitArrays, rng: np.random.Generator, g: int) -> np.ndarray:
    """Hard unit-to-group assignment from distance-weighted seed units.

    The first seed is uniform; later seeds are drawn with probability
    proportional to the squared Kendall distance to the closest chosen
    seed, then every unit joins its nearest seed (ties to the lower group).
    """
    seeds = [int(rng.integers(arrays.n))]
    while len(seeds) < g:
        nearest = np.min(
            [(arrays.pair_orient != arrays.pair_orient[s]).sum(axis=1) for s in seeds],
            axis=0,
        ).astype(float)
        total = (nearest**2).sum()
        if total > 0:
            seeds.append(int(rng.choice(arrays.n, p=nearest**2 / total)))
        else:
            seeds.append(int(rng.integers(arrays.n)))
    dists = (arrays.pair_orient[:, None, :] != arrays.pair_orient[seeds][None, :, :]).sum(
        axis=2
    )
    return np.argmin(dists, axis=1)


def initial_mixture(
    data: Sequence[Permutation],
    family: Family,
    n_components: int,
    rng: np.random.Generator,
    d_max: int = 1,
) -> Mixture:
    """One random EM starting point.

    Distance-based components copy the central ranking of a random unit
    with concentration 1.  Support components start from a random
    reference order and a Dirichlet(1) support draw, then burn in on one
    block of a distance-weighted seed partition of the data: mixtures of
    stagewise models started from unstructured parameters collapse onto a
    single pooled fit, so each component is pre-shaped on its own block
    before the first E-step.
    """
    family = Family(family)
    k = data[0].k
    components: list[ComponentParams] = []
    if family is Family.DB:
        for _ in range(n_components):
            sigma = inverse(data[int(rng.integers(len(data)))])
            components.append(DbParams(sigma, 1.0))
    else:
        arrays = _FitArrays(data)
        hard = _seed_partition(arrays, rng, n_components)
        for g in range(n_components):
            col = (hard == g).astype(float)
            if col.sum() < 1.0:
                col = np.full(arrays.n, 1.0 / arrays.n)
            p = _floor_normalize(rng.dirichlet(np.ones(k)))
            if family is Family.EPL:
                rho = random_permutation(k, rng)
            elif family is Family.PL_FORWARD:
                rho = identity(k)
            else:
                rho = backward(k)
            comp = EplParams(rho, tuple(p))
            memo: dict = {}
            for _ in range(PREFIT_ITERS):
                updated = _update_epl_component(
                    arrays, col, comp, d_max, family is Family.EPL, memo
                )
                if updated == comp:
                    break
                comp = updated
            components.append(comp)
    weights = tuple([1.0 / n_components] * n_components)
    return Mixture(weights, tuple(components), family)


def _m_step_support(
    arrays: _FitArrays,
    zhat: np.ndarray,
    components: Sequence[EplParams],
    family: Family,
    d_max: int,
    memo: dict | None = None,
) -> tuple[np.ndarray, list[EplParams]]:
    col_sums = zhat.sum(axis=0)
    if np.any(col_sums < COLLAPSE_EPS):
        raise ComponentCollapseError(
            f"component {int(np.argmin(col_sums)) + 1} has no responsibility mass"
        )
    new_components = [
        _update_epl_component(
            arrays, zhat[:, g], comp, d_max, family is Family.EPL, memo, g
        )
        for g, comp in enumerate(components)
    ]
    return col_sums / zhat.shape[0], new_components


@dataclass
class _RunOutcome:
    weights: np.ndarray
    components: list[ComponentParams]
    responsibilities: np.ndarray
    trace: list[float]
    converged: bool


def _run_em(
    arrays: _FitArrays,
    family: Family,
    start: Mixture,
    tol: float,
    max_iter: int,
    d_max: int,
) -> _RunOutcome:
    weights = np.asarray(start.weights, dtype=float)
    components: list[ComponentParams] = list(start.components)
    trace: list[float] = []
    converged = False
    zhat = None
    memo: dict = {}
    for it in range(max_iter + 1):
        log_pmf = _log_pmf_matrix(arrays, (family, components))
        zhat, loglik = _responsibilities_from(log_pmf, weights)
        trace.append(loglik)
        if len(trace) >= 3 and aitken_converged(trace[-3], trace[-2], trace[-1], tol):
            converged = True
            break
        if it == max_iter:
            break
        if family is Family.DB:
            weights, components = _m_step_db_arrays(arrays, zhat, prev=components)
        else:
            weights, components = _m_step_support(
                arrays, zhat, components, family, d_max, memo
            )
    return _RunOutcome(weights, components, zhat, trace, converged)


def fit_mixture(
    data: Sequence[Permutation],
    family: Family | str,
    n_components: int,
    *,
    n_starts: int = 50,
    seed: int = 0,
    tol: float = 1e-6,
    max_iter: int = 1000,
    d_max: int = 1,
) -> FitResult:
    """Fit a G-component mixture by EM/EMM, best of ``n_starts`` random starts.

    Args:
        data: complete orderings, all on the same item set.
        family: ``db``, ``pl-forward``, ``pl-backward`` or ``epl``.
        n_components: number of mixture components G.
        n_starts: independent random initializations; the run with the
            highest final log-likelihood wins, ties to the earlier start.
        seed: master seed; each start draws from its own spawned stream,
            so identical inputs reproduce the result bit for bit.
        tol: Aitken convergence tolerance.
        max_iter: EM iteration cap per start.
        d_max: Kendall search radius for reference-order updates.

    Returns:
        FitResult with the fitted mixture, final responsibilities, the
        log-likelihood trace of the winning run, and its BIC.

    Raises:
        FitError: if every start loses a component to collapse.
    """
    family = Family(family)
    if n_components < 1:
        raise ValueError(f"G must be >= 1, got {n_components}")
    if n_starts < 1:
        raise ValueError(f"n_starts must be >= 1, got {n_starts}")
    arrays = _FitArrays(data)
    best: _RunOutcome | None = None
    failures: list[str] = []
    for child in np.random.SeedSequence(seed).spawn(n_starts):
        rng = np.random.default_rng(child)
        start = initial_mixture(data, family, n_components, rng, d_max)
        try:
            run = _run_em(arrays, family, start, tol, max_iter, d_max)
        except ComponentCollapseError as exc:
            failures.append(str(exc))
            continue
        if best is None or run.trace[-1] > best.trace[-1]:
            best = run
    if best is None:
        raise FitError(
            f"all {n_starts} starts collapsed; last failure: {failures[-1]}"
        )
    mixture = Mixture(tuple(best.weights), tuple(best.components), family)
    nu = count_free_params(family, n_components, arrays.k)
    return FitResult(
        mixture=mixture,
        responsibilities=best.responsibilities,
        loglik_trace=tuple(best.trace),
        converged=best.converged,
        iterations=len(best.trace) - 1,
        bic=bic_value(best.trace[-1], nu, arrays.n),
    )
