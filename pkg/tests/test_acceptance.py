"""Acceptance suite: one test per criterion, run with ``pytest -v`` (add
``-s`` to see the per-criterion PASS lines and timings)."""

import math
import time

import numpy as np
import pytest

from rankmix.dataio import TiePolicy, rank_quantitative, simulate_dataset, write_fit
from rankmix.diag import cross_tab, iia_residuals, map_classify
from rankmix.fit import Family, Mixture, fit_mixture, m_step_db, update_reference_order
from rankmix.models import (
    DbParams,
    EplParams,
    epl_log_pmf,
    expected_kendall_distance,
    kendall_partition,
    sample_epl,
)
from rankmix.oracle import (
    brute_best_rho,
    brute_central_ranking,
    brute_pmf_mass,
    rho_objective,
)
from rankmix.perms import (
    Metric,
    Permutation,
    distance,
    enumerate_permutations,
    identity,
    inverse,
    random_permutation,
)
from rankmix.select import model_scan


def report(name, t0):
    print(f"\nACCEPTANCE {name}: PASS ({time.time() - t0:.1f}s)")


def geometric_support(k, ratio):
    p = ratio ** np.arange(k)
    return tuple(p / p.sum())


def support_peaked_at(order, shape):
    p = np.empty(len(order))
    for stage, item in enumerate(order):
        p[item - 1] = shape[stage]
    return tuple(p)


@pytest.fixture(scope="module")
def recovery_truth():
    """Well-separated two-component mixture for the recovery criteria."""
    shape = geometric_support(5, 0.18)
    comp1 = EplParams(Permutation((3, 1, 2, 5, 4)), support_peaked_at((1, 2, 3, 4, 5), shape))
    comp2 = EplParams(Permutation((1, 2, 3, 5, 4)), support_peaked_at((5, 4, 3, 2, 1), shape))
    return Mixture((0.6, 0.4), (comp1, comp2), Family.EPL)


@pytest.fixture(scope="module")
def recovery_dataset(recovery_truth):
    return simulate_dataset(recovery_truth, 500, seed=2024)


def test_criterion_01_normalization_suite():
    # 50 random parameter draws per family per K in {3,4,5,6}, mass = 1
    t0 = time.time()
    rng = np.random.default_rng(1)
    worst = 0.0
    for k in (3, 4, 5, 6):
        for _ in range(50):
            db = DbParams(random_permutation(k, rng), float(rng.uniform(0.0, 5.0)))
            worst = max(worst, abs(brute_pmf_mass("db", db) - 1.0))
            p = rng.dirichlet(np.ones(k))
            epl = EplParams(random_permutation(k, rng), tuple(p / p.sum()))
            worst = max(worst, abs(brute_pmf_mass("epl", epl) - 1.0))
    assert worst < 1e-10
    assert time.time() - t0 < 30.0
    report("1 normalization", t0)


def test_criterion_02_partition_identity():
    t0 = time.time()
    for k in range(2, 8):
        everything = enumerate_permutations(k)
        e = identity(k)
        dists = [distance(Metric.KENDALL, q, e) for q in everything]
        for lam in (0.01, 0.1, 1.0, 5.0, 20.0):
            weights = [math.exp(-lam * d) for d in dists]
            z_enum = math.fsum(weights)
            assert abs(kendall_partition(lam, k) - z_enum) / z_enum < 1e-10
            mean_enum = math.fsum(d * w for d, w in zip(dists, weights)) / z_enum
            assert abs(expected_kendall_distance(lam, k) - mean_enum) < 1e-10
    report("2 partition identity", t0)


def test_criterion_03_pl_reduction():
    t0 = time.time()

    def independent_pl_log(ordering, p):
        remaining = list(range(1, ordering.k + 1))
        out = 0.0
        for rank in range(1, ordering.k + 1):
            item = ordering(rank)
            out += math.log(p[item - 1] / math.fsum(p[i - 1] for i in remaining))
            remaining.remove(item)
        return out

    rng = np.random.default_rng(2)
    everything = enumerate_permutations(5)
    for _ in range(20):
        p = rng.dirichlet(np.ones(5))
        p = tuple(p / p.sum())
        params = EplParams(identity(5), p)
        for q in everything:
            assert abs(epl_log_pmf(q, params) - independent_pl_log(q, p)) < 1e-12
    report("3 PL reduction", t0)


def test_criterion_04_appendix_separation():
    # 19-point simplex grid: uniform + 18 non-uniform points
    t0 = time.time()
    import itertools

    grid = [(1 / 3, 1 / 3, 1 / 3)]
    for base, denom in (((1, 2, 3), 6), ((1, 1, 4), 6), ((1, 2, 5), 8), ((1, 1, 6), 8)):
        for perm in sorted(set(itertools.permutations(base))):
            grid.append(tuple(v / denom for v in perm))
    assert len(grid) == 19

    swapped = Permutation((2, 1, 3))
    for p in grid:
        params = EplParams(swapped, p)
        q = {s.entries: math.exp(epl_log_pmf(s, params)) for s in enumerate_permutations(3)}
        residuals = np.abs(iia_residuals(q))
        if p == (1 / 3, 1 / 3, 1 / 3):
            assert np.max(residuals) < 1e-12
        else:
            assert np.max(residuals) > 1e-6
    report("4 appendix separation", t0)


def test_criterion_05_monotone_ascent():
    # 200 randomized fits across all four families, G in {1,2,3}, K in {4,5}
    t0 = time.time()
    rng = np.random.default_rng(3)
    grid = [
        (family, g, k)
        for family in Family
        for g in (1, 2, 3)
        for k in (4, 5)
    ]
    for i in range(200):
        family, g, k = grid[i % len(grid)]
        components = []
        for _ in range(g):
            if family is Family.DB:
                components.append(
                    DbParams(random_permutation(k, rng), float(rng.uniform(0.3, 2.0)))
                )
            else:
                p = rng.dirichlet(np.full(k, 0.8))
                p = tuple(p / p.sum())
                if family is Family.EPL:
                    rho = random_permutation(k, rng)
                elif family is Family.PL_FORWARD:
                    rho = identity(k)
                else:
                    rho = Permutation(tuple(range(k, 0, -1)))
                components.append(EplParams(rho, p))
        w = rng.dirichlet(np.full(g, 5.0))
        mix = Mixture(tuple(w / w.sum()), tuple(components), family)
        data = simulate_dataset(mix, 40, seed=10_000 + i)
        result = fit_mixture(
            data.orderings(), family, g, n_starts=2, seed=i, max_iter=150
        )
        trace = result.loglik_trace
        assert all(b >= a - 1e-8 for a, b in zip(trace, trace[1:]))
    assert time.time() - t0 < 300.0
    report("5 monotone ascent", t0)


def test_criterion_06_parameter_count():
    t0 = time.time()
    from rankmix.select import count_free_params

    assert count_free_params(Family.EPL, 5, 13) == 69
    report("6 parameter count", t0)


def test_criterion_07_synthetic_recovery(recovery_truth, recovery_dataset):
    t0 = time.time()
    result = fit_mixture(recovery_dataset.orderings(), Family.EPL, 2, n_starts=50, seed=7)
    fitted = result.mixture

    def pairing_error(order):
        weight_err = max(
            abs(fitted.weights[order[g]] - recovery_truth.weights[g]) for g in range(2)
        )
        support_err = max(
            np.max(
                np.abs(
                    np.array(fitted.components[order[g]].support)
                    - np.array(recovery_truth.components[g].support)
                )
            )
            for g in range(2)
        )
        return weight_err, support_err

    weight_err, support_err = min(
        (pairing_error(order) for order in ((0, 1), (1, 0))),
        key=lambda pair: max(pair),
    )
    assert weight_err < 0.05
    assert support_err < 0.05
    labels = map_classify(result.responsibilities)
    ari = cross_tab(list(labels), list(recovery_dataset.truth_labels)).ari
    assert ari >= 0.9
    assert time.time() - t0 < 120.0
    report("7 synthetic recovery", t0)


def test_criterion_08_db_recovery():
    t0 = time.time()
    sigma1 = identity(6)
    sigma2 = Permutation((3, 4, 5, 6, 1, 2))
    assert distance(Metric.KENDALL, sigma1, sigma2) == 8
    truth = Mixture(
        (0.55, 0.45), (DbParams(sigma1, 2.0), DbParams(sigma2, 2.0)), Family.DB
    )
    dataset = simulate_dataset(truth, 400, seed=77)
    result = fit_mixture(dataset.orderings(), Family.DB, 2, n_starts=10, seed=5)
    by_sigma = {c.sigma: c for c in result.mixture.components}
    assert set(by_sigma) == {sigma1, sigma2}
    for sigma in (sigma1, sigma2):
        assert abs(by_sigma[sigma].lam - 2.0) / 2.0 < 0.10
    labels = map_classify(result.responsibilities)
    ari = cross_tab(list(labels), list(dataset.truth_labels)).ari
    assert ari >= 0.95
    report("8 DB recovery", t0)


def test_criterion_09_bic_order_selection(recovery_truth):
    t0 = time.time()
    hits = 0
    for rep in range(10):
        dataset = simulate_dataset(recovery_truth, 500, seed=3000 + rep)
        scan = model_scan(
            dataset.orderings(),
            [Family.EPL],
            range(1, 5),
            n_starts=6,
            seed=rep,
            tol=1e-5,
            max_iter=300,
        )
        hits += scan.best.n_components == 2
    assert hits >= 9
    report(f"9 BIC order selection ({hits}/10)", t0)


def test_criterion_10_monotone_invariance(tmp_path):
    t0 = time.time()
    rng = np.random.default_rng(4)
    matrix = rng.normal(size=(60, 4))
    # strictly increasing per-row transform: row-specific positive affine
    # map inside an exponential
    scale = rng.uniform(0.5, 2.0, size=(60, 1))
    shift = rng.normal(size=(60, 1))
    transformed = np.exp(scale * matrix + shift)

    first = rank_quantitative(matrix, ties=TiePolicy.ERROR)
    second = rank_quantitative(transformed, ties=TiePolicy.ERROR)
    assert first == second

    paths = []
    for tag, dataset in (("a", first), ("b", second)):
        result = fit_mixture(dataset.orderings(), Family.EPL, 2, n_starts=4, seed=13)
        path = tmp_path / f"fit_{tag}.json"
        write_fit(
            result,
            path,
            seed=13,
            config={"n_starts": 4, "tol": 1e-6, "max_iter": 1000, "d_max": 1},
        )
        paths.append(path)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    report("10 monotone invariance", t0)


def test_criterion_11_oracle_equivalence():
    t0 = time.time()
    rng = np.random.default_rng(5)
    for _ in range(100):
        data = [random_permutation(5, rng) for _ in range(30)]
        zhat = rng.dirichlet(np.ones(2), size=30)
        _, components = m_step_db(data, zhat)
        for g in range(2):
            assert components[g].sigma == brute_central_ranking(data, zhat[:, g])

    for _ in range(100):
        data = [random_permutation(4, rng) for _ in range(15)]
        w = rng.uniform(0.1, 1.0, size=15)
        p = rng.dirichlet(np.ones(4))
        p = tuple(p / p.sum())
        local = update_reference_order(
            data, w, p, random_permutation(4, rng), d_max=6
        )
        best = brute_best_rho(data, w, p)
        assert abs(
            rho_objective(data, w, p, local) - rho_objective(data, w, p, best)
        ) < 1e-12
    report("11 oracle equivalence", t0)
