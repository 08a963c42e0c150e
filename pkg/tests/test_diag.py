import itertools
import math

import numpy as np
import pytest

from rankmix.diag import (
    borda_ordering,
    cross_tab,
    first_order_marginals,
    iia_residuals,
    map_classify,
)
from rankmix.models import EplParams, epl_log_pmf
from rankmix.perms import Permutation, enumerate_permutations, identity, random_permutation


def induced_distribution(params):
    return {
        q.entries: math.exp(epl_log_pmf(q, params)) for q in enumerate_permutations(3)
    }


# a 20-point simplex grid: the uniform point plus 19 distinct non-uniform ones
SIMPLEX_GRID = [(1 / 3, 1 / 3, 1 / 3)]
for base, denom in (((1, 2, 3), 6), ((1, 1, 4), 6), ((1, 2, 5), 8), ((1, 1, 6), 8)):
    for perm in sorted(set(itertools.permutations(base))):
        SIMPLEX_GRID.append(tuple(v / denom for v in perm))
SIMPLEX_GRID.append((0.45, 0.35, 0.2))


class TestMarginals:
    def test_single_ranking(self):
        m = first_order_marginals([identity(3)])
        assert np.array_equal(m, np.eye(3))

    def test_full_symmetric_group(self):
        m = first_order_marginals(enumerate_permutations(3))
        assert np.allclose(m, 1 / 3)

    def test_two_unit_example(self):
        m = first_order_marginals([Permutation((1, 2, 3)), Permutation((2, 1, 3))])
        expected = np.array([[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]])
        assert np.allclose(m, expected)

    def test_doubly_stochastic(self):
        rng = np.random.default_rng(51)
        data = [random_permutation(6, rng) for _ in range(40)]
        m = first_order_marginals(data)
        assert np.all(m >= 0) and np.all(m <= 1)
        assert np.allclose(m.sum(axis=0), 1.0, atol=1e-10)
        assert np.allclose(m.sum(axis=1), 1.0, atol=1e-10)

    def test_empty(self):
        with pytest.raises(ValueError):
            first_order_marginals([])


class TestBorda:
    def test_single_ranking(self):
        ranking = Permutation((2, 3, 1))
        # the unit's own ordering: item 3 first, then 1, then 2
        assert borda_ordering([ranking]) == Permutation((3, 1, 2))

    def test_symmetric_data_tie_break(self):
        assert borda_ordering(enumerate_permutations(3)) == identity(3)

    def test_mean_rank_example(self):
        data = [Permutation((1, 2, 3)), Permutation((1, 3, 2))]
        # mean ranks (1, 2.5, 2.5): tie between items 2 and 3 goes to item 2
        assert borda_ordering(data) == identity(3)

    def test_direction_flag(self):
        data = [Permutation((1, 2, 3)), Permutation((1, 2, 3))]
        assert borda_ordering(data, best_first=False) == Permutation((3, 2, 1))

    def test_unit_order_invariance(self):
        rng = np.random.default_rng(52)
        data = [random_permutation(5, rng) for _ in range(15)]
        shuffled = [data[i] for i in rng.permutation(len(data))]
        assert borda_ordering(data) == borda_ordering(shuffled)


class TestMapClassify:
    def test_examples(self):
        z = np.array([[0.9, 0.1], [0.5, 0.5], [0.2, 0.8]])
        assert list(map_classify(z)) == [1, 1, 2]

    def test_argmax_property(self):
        rng = np.random.default_rng(53)
        z = rng.dirichlet(np.ones(4), size=50)
        labels = map_classify(z)
        for s, g in enumerate(labels):
            assert np.all(z[s, g - 1] >= z[s])


class TestCrossTab:
    def test_perfect_agreement(self):
        out = cross_tab([1, 1, 2, 2], [1, 1, 2, 2])
        assert np.array_equal(out.table, np.array([[2, 0], [0, 2]]))
        assert out.ari == 1.0

    def test_constant_labels(self):
        out = cross_tab([1, 1, 1, 1], ["a", "a", "b", "b"])
        assert out.ari == pytest.approx(0.0, abs=1e-12)

    def test_hand_built_table(self):
        labels = [1, 1, 2, 2, 3, 3]
        truth = ["x", "y", "x", "x", "y", "y"]
        out = cross_tab(labels, truth)
        assert out.row_values == (1, 2, 3)
        assert out.col_values == ("x", "y")
        assert np.array_equal(out.table, np.array([[1, 1], [2, 0], [0, 2]]))

    def test_label_permutation_invariance(self):
        a = cross_tab([1, 1, 2, 2, 3], [1, 1, 2, 2, 2])
        b = cross_tab([3, 3, 1, 1, 2], [2, 2, 1, 1, 1])
        assert a.ari == pytest.approx(b.ari, abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            cross_tab([1, 2], [1, 2, 3])


class TestIiaResiduals:
    def test_uniform_distribution(self):
        q = {p.entries: 1 / 6 for p in enumerate_permutations(3)}
        assert iia_residuals(q) == pytest.approx((0.0, 0.0, 0.0), abs=1e-12)

    def test_forward_pl_satisfies(self):
        q = induced_distribution(EplParams(identity(3), (0.5, 0.3, 0.2)))
        assert np.max(np.abs(iia_residuals(q))) < 1e-12

    def test_forward_pl_grid(self):
        for p in SIMPLEX_GRID:
            q = induced_distribution(EplParams(identity(3), p))
            assert np.max(np.abs(iia_residuals(q))) < 1e-12

    def test_swapped_stage_order_violates(self):
        q = induced_distribution(EplParams(Permutation((2, 1, 3)), (0.5, 0.3, 0.2)))
        assert np.max(np.abs(iia_residuals(q))) > 1e-6

    def test_swapped_stage_order_grid(self):
        uniform = (1 / 3, 1 / 3, 1 / 3)
        for p in SIMPLEX_GRID:
            q = induced_distribution(EplParams(Permutation((2, 1, 3)), p))
            residuals = np.abs(iia_residuals(q))
            if p == uniform:
                assert np.max(residuals) < 1e-12
            else:
                assert np.max(residuals) > 1e-6

    def test_matches_appendix_table(self):
        # the induced distribution under stage order (2,1,3) in closed form
        p1, p2, p3 = 0.5, 0.3, 0.2
        params = EplParams(Permutation((2, 1, 3)), (p1, p2, p3))
        expected = {
            (1, 2, 3): p2 * p1 / (1 - p2),
            (1, 3, 2): p3 * p1 / (1 - p3),
            (2, 1, 3): p1 * p2 / (1 - p1),
            (2, 3, 1): p3 * p2 / (1 - p3),
            (3, 1, 2): p1 * p3 / (1 - p1),
            (3, 2, 1): p2 * p3 / (1 - p2),
        }
        got = induced_distribution(params)
        for key, value in expected.items():
            assert got[key] == pytest.approx(value, abs=1e-12)

    def test_degenerate_distribution_rejected(self):
        q = {p.entries: 0.0 for p in enumerate_permutations(3)}
        q[(1, 2, 3)] = 1.0
        with pytest.raises(ValueError):
            iia_residuals(q)

    def test_invalid_mass(self):
        q = {p.entries: 0.25 for p in enumerate_permutations(3)}
        with pytest.raises(ValueError):
            iia_residuals(q)
