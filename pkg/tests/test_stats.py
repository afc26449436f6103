import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dcmix.stats import _average_ranks, importance_correlation_matrix, spearman_rho


def closed_form_rho(xs, ys):
    """1 - 6*sum(d^2)/(n(n^2-1)); valid only when there are no ties."""
    rx = np.argsort(np.argsort(xs)) + 1
    ry = np.argsort(np.argsort(ys)) + 1
    n = len(xs)
    d = rx - ry
    return 1.0 - 6.0 * float(np.sum(d * d)) / (n * (n * n - 1))


class TestAverageRanks:
    def test_no_ties(self):
        np.testing.assert_array_equal(_average_ranks(np.array([0.3, 0.1, 0.9])), [2, 1, 3])

    def test_ties_get_average_position(self):
        np.testing.assert_array_equal(
            _average_ranks(np.array([5.0, 5.0, 1.0, 7.0])), [2.5, 2.5, 1.0, 4.0]
        )

    def test_all_tied(self):
        np.testing.assert_array_equal(_average_ranks(np.array([2.0, 2.0, 2.0])), [2.0, 2.0, 2.0])


class TestSpearman:
    def test_identical_order_is_one(self):
        assert spearman_rho([0.82, 0.21, 0.22], [3.0, 1.0, 2.0]) == pytest.approx(1.0)

    def test_reversed_order_is_minus_one(self):
        assert spearman_rho([1, 2, 3, 4], [9, 7, 5, 3]) == pytest.approx(-1.0)

    def test_known_swap_value(self):
        # [TRIVIAL] single adjacent swap on n=4: 1 - 6*2/60 = 0.8
        assert spearman_rho([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)

    def test_all_permutations_match_closed_form(self):
        # [DERIVED] the no-ties closed form is an independent oracle
        base = np.array([0.4, 1.2, 2.2, 3.9])
        for perm in itertools.permutations([10.0, 20.0, 30.0, 40.0]):
            perm = np.array(perm)
            assert spearman_rho(base, perm) == pytest.approx(closed_form_rho(base, perm))

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="equal-length"):
            spearman_rho([1, 2, 3], [1, 2])

    def test_single_element_rejected(self):
        with pytest.raises(ValueError, match="at least 2"):
            spearman_rho([1.0], [2.0])

    def test_constant_vector_rejected(self):
        with pytest.raises(ValueError, match="zero rank variance"):
            spearman_rho([3.0, 3.0, 3.0], [1.0, 2.0, 3.0])

    @given(
        st.lists(st.floats(-100, 100), min_size=3, max_size=8, unique=True),
    )
    def test_self_correlation_is_one(self, xs):
        assert spearman_rho(xs, xs) == pytest.approx(1.0)

    @given(
        st.permutations(list(range(5))),
        st.permutations(list(range(5))),
    )
    def test_symmetric_and_bounded(self, xs, ys):
        xs, ys = np.array(xs, float), np.array(ys, float)
        rho = spearman_rho(xs, ys)
        assert -1.0 - 1e-12 <= rho <= 1.0 + 1e-12
        assert rho == pytest.approx(spearman_rho(ys, xs))


class TestCorrelationMatrix:
    def test_symmetric_unit_diagonal(self):
        names, mat = importance_correlation_matrix(
            {
                "a": np.array([0.8, 0.2, 0.3]),
                "b": np.array([0.7, 0.3, 0.1]),
                "c": np.array([0.1, 0.9, 0.5]),
            }
        )
        assert names == ["a", "b", "c"]
        np.testing.assert_allclose(np.diag(mat), 1.0)
        np.testing.assert_allclose(mat, mat.T)

    def test_pair_entry_matches_direct_call(self):
        a, b = np.array([0.8, 0.2, 0.3]), np.array([0.1, 0.9, 0.5])
        _, mat = importance_correlation_matrix({"a": a, "b": b})
        assert mat[0, 1] == pytest.approx(spearman_rho(a, b))

    def test_cluster_sort_is_a_permutation(self):
        vectors = {
            "a": np.array([0.9, 0.1, 0.1]),
            "b": np.array([0.8, 0.2, 0.1]),
            "c": np.array([0.1, 0.2, 0.9]),
        }
        plain_names, plain = importance_correlation_matrix(vectors)
        names, mat = importance_correlation_matrix(vectors, cluster_sort=True)
        assert sorted(names) == sorted(plain_names)
        perm = [plain_names.index(n) for n in names]
        np.testing.assert_allclose(mat, plain[np.ix_(perm, perm)])

    def test_inconsistent_lengths_rejected(self):
        with pytest.raises(ValueError, match="lengths"):
            importance_correlation_matrix({"a": np.ones(3), "b": np.arange(4)})
