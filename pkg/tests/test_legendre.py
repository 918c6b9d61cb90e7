"""Tests for the normalized Legendre basis and moment tensors."""

import numpy as np
import pytest

import oracles
from chaoseig.legendre import (
    basis_matrix,
    build_moment_matrices,
    build_triple_tensor,
    dump_coordinate_text,
    eval_univariate,
    eval_univariate_all,
    evaluate_expansion,
    gauss_rule,
    univariate_raise,
    univariate_triple,
)
from chaoseig.multiindex import generate_index_set, generate_index_set_by_size


@pytest.fixture(scope="module")
def small_set():
    return generate_index_set_by_size(6, varsigma=3.2)


@pytest.fixture(scope="module")
def medium_set():
    return generate_index_set_by_size(12, varsigma=3.2)


class TestUnivariate:
    def test_degree_zero_constant(self):
        x = np.linspace(-1, 1, 7)
        np.testing.assert_allclose(eval_univariate(0, x), np.ones(7))

    def test_degree_one_at_one(self):
        assert eval_univariate(1, 1.0) == pytest.approx(np.sqrt(3), abs=1e-15)

    def test_frozen_degree_two_value(self):
        # closed form sqrt(5)(3x^2-1)/2 at x = 0.5 equals -sqrt(5)/8
        assert eval_univariate(2, 0.5) == pytest.approx(
            -0.27950849718747371, abs=1e-15)

    def test_matches_numpy_legval(self):
        x = np.linspace(-1, 1, 23)
        for p in range(9):
            np.testing.assert_allclose(
                eval_univariate(p, x), oracles.legval_normalized(p, x),
                atol=1e-13)

    def test_orthonormal_by_quadrature(self):
        pmax = 8
        x, w = gauss_rule(pmax + 1)
        V = eval_univariate_all(pmax, x)
        G = (V * w) @ V.T
        np.testing.assert_allclose(G, np.eye(pmax + 1), atol=1e-13)


class TestUnivariateMoments:
    def test_triple_orthonormality_cases(self):
        for p in range(6):
            assert univariate_triple(0, p, p) == pytest.approx(1.0, abs=1e-13)
        assert univariate_triple(0, 0, 1) == 0.0

    def test_triple_frozen_value(self):
        assert univariate_triple(1, 1, 2) == pytest.approx(
            0.89442719099991588, abs=1e-14)

    def test_triple_structural_zeros_exact(self):
        assert univariate_triple(1, 1, 3) == 0.0  # odd sum
        assert univariate_triple(1, 2, 5) == 0.0  # triangle violation
        assert univariate_triple(0, 2, 4) == 0.0

    def test_triple_symmetry(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a, b, c = rng.integers(0, 7, size=3)
            v = univariate_triple(a, b, c)
            assert v == univariate_triple(c, a, b) == univariate_triple(b, c, a)

    def test_triple_against_quadrature_oracle(self):
        for a in range(5):
            for b in range(5):
                for c in range(5):
                    x, w = np.polynomial.legendre.leggauss(10)
                    ref = np.sum(w / 2.0 * oracles.legval_normalized(a, x)
                                 * oracles.legval_normalized(b, x)
                                 * oracles.legval_normalized(c, x))
                    assert univariate_triple(a, b, c) == pytest.approx(
                        ref, abs=1e-13)

    def test_raise_frozen_values(self):
        assert univariate_raise(0) == pytest.approx(0.57735026918962576,
                                                    abs=1e-15)
        assert univariate_raise(1) == pytest.approx(0.51639777949432225,
                                                    abs=1e-15)

    def test_raise_against_quadrature(self):
        x, w = np.polynomial.legendre.leggauss(12)
        for p in range(6):
            ref = np.sum(w / 2.0 * x * oracles.legval_normalized(p, x)
                         * oracles.legval_normalized(p + 1, x))
            assert univariate_raise(p) == pytest.approx(ref, abs=1e-14)

    def test_raise_off_neighbor_moments_vanish(self):
        x, w = np.polynomial.legendre.leggauss(14)
        for p in range(5):
            for q in range(5):
                if abs(p - q) != 1:
                    val = np.sum(w / 2.0 * x * oracles.legval_normalized(p, x)
                                 * oracles.legval_normalized(q, x))
                    assert abs(val) < 1e-14


class TestMomentMatrices:
    def test_zero_set_identity_only(self):
        aset = generate_index_set(0.999, varsigma=3.2)
        mats = build_moment_matrices(aset)
        assert len(mats) == 1
        np.testing.assert_allclose(mats[0].toarray(), [[1.0]])

    def test_two_member_set(self):
        # {0, e_1} gives the single off-diagonal raise value 1/sqrt(3)
        aset = generate_index_set_by_size(2, varsigma=3.2)
        mats = build_moment_matrices(aset)
        expected = np.array([[0.0, 0.57735026918962576],
                             [0.57735026918962576, 0.0]])
        np.testing.assert_allclose(mats[1].toarray(), expected, atol=1e-15)

    def test_against_tensor_quadrature_oracle(self, medium_set):
        mats = build_moment_matrices(medium_set)
        ref = oracles.raise_matrices_dense(medium_set)
        assert len(mats) == len(ref) + 1
        for m in range(1, len(mats)):
            np.testing.assert_allclose(mats[m].toarray(), ref[m - 1],
                                       atol=1e-12)

    def test_structure(self, medium_set):
        mats = build_moment_matrices(medium_set)
        for G in mats[1:]:
            A = G.toarray()
            np.testing.assert_allclose(A, A.T, atol=0)
            assert np.all(np.diag(A) == 0)
            assert np.max((A != 0).sum(axis=1)) <= 2


class TestTripleTensor:
    def test_zero_slice_identity(self, medium_set):
        tt = build_triple_tensor(medium_set)
        np.testing.assert_allclose(tt.matrix(0).toarray(),
                                   np.eye(len(medium_set)), atol=1e-13)

    def test_neighbor_entry_value(self):
        aset = generate_index_set_by_size(8, varsigma=3.2)
        e1 = ((1, 1),)
        e1e1 = ((1, 2),)
        assert e1 in aset and e1e1 in aset
        tt = build_triple_tensor(aset)
        a = aset.position(e1)
        entry = tt.matrix(a)[aset.position(e1), aset.position(e1e1)]
        assert entry == pytest.approx(0.89442719099991588, abs=1e-14)

    def test_full_tensor_against_quadrature_oracle(self, small_set):
        tt = build_triple_tensor(small_set)
        ref = oracles.triple_tensor_dense(small_set)
        P = len(small_set)
        dense = np.zeros((P, P, P))
        for a in range(P):
            dense[a] = tt.matrix(a).toarray()
        np.testing.assert_allclose(dense, ref, atol=1e-13)

    def test_full_symmetry(self, medium_set):
        tt = build_triple_tensor(medium_set)
        P = len(medium_set)
        dense = np.array([tt.matrix(a).toarray() for a in range(P)])
        np.testing.assert_allclose(dense, dense.transpose(1, 0, 2), atol=1e-14)
        np.testing.assert_allclose(dense, dense.transpose(2, 1, 0), atol=1e-14)

    def test_contractions_match_dense(self, medium_set):
        tt = build_triple_tensor(medium_set)
        P = len(medium_set)
        rng = np.random.default_rng(11)
        dense = np.array([tt.matrix(a).toarray() for a in range(P)])
        H = rng.standard_normal((P, P))
        s = rng.standard_normal(P)
        t = rng.standard_normal(P)
        np.testing.assert_allclose(tt.contract_gram(H),
                                   np.einsum("abc,bc->a", dense, H),
                                   atol=1e-12)
        np.testing.assert_allclose(tt.congruence(s, t),
                                   np.einsum("abc,b,c->a", dense, s, t),
                                   atol=1e-12)
        np.testing.assert_allclose(tt.multiply_matrix(s),
                                   np.einsum("abc,a->bc", dense, s),
                                   atol=1e-12)


class TestExpansion:
    def test_constant_expansion(self, small_set):
        coeffs = np.zeros(len(small_set))
        coeffs[0] = 2.0
        y = np.zeros((5, small_set.max_dimension))
        np.testing.assert_allclose(evaluate_expansion(coeffs, small_set, y),
                                   2.0 * np.ones(5))

    def test_linear_coordinate_expansion(self, small_set):
        # s(y) = y_1 has single coefficient 1/sqrt(3) on the first-order index
        coeffs = np.zeros(len(small_set))
        coeffs[small_set.position(((1, 1),))] = 1.0 / np.sqrt(3.0)
        y = np.zeros(small_set.max_dimension)
        y[0] = 0.3
        assert evaluate_expansion(coeffs, small_set, y) == pytest.approx(
            0.3, abs=1e-15)

    def test_basis_orthonormal_under_quadrature(self, medium_set):
        pts, w, _ = oracles.tensor_grid(medium_set)
        B = basis_matrix(medium_set, pts)
        G = (B * w[:, None]).T @ B
        np.testing.assert_allclose(G, np.eye(len(medium_set)), atol=1e-12)

    def test_mean_variance_formulas(self, medium_set):
        rng = np.random.default_rng(5)
        coeffs = rng.standard_normal(len(medium_set))
        pts, w, _ = oracles.tensor_grid(medium_set)
        vals = evaluate_expansion(coeffs, medium_set, pts)
        mean_quad = np.sum(w * vals)
        var_quad = np.sum(w * (vals - mean_quad) ** 2)
        assert mean_quad == pytest.approx(coeffs[0], abs=1e-12)
        assert var_quad == pytest.approx(np.sum(coeffs[1:] ** 2), abs=1e-12)

    def test_spatial_block_evaluation(self, small_set):
        rng = np.random.default_rng(9)
        coeffs = rng.standard_normal((len(small_set), 4))
        y = rng.uniform(-1, 1, size=(3, small_set.max_dimension))
        B = basis_matrix(small_set, y)
        np.testing.assert_allclose(evaluate_expansion(coeffs, small_set, y),
                                   B @ coeffs, atol=1e-14)

    def test_dimension_mismatch_rejected(self, small_set):
        with pytest.raises(ValueError):
            evaluate_expansion(np.ones(3), small_set, np.zeros(8))


def test_coordinate_dump_format(tmp_path, small_set):
    mats = build_moment_matrices(small_set)
    path = tmp_path / "gm1.txt"
    dump_coordinate_text(mats[1], path)
    lines = path.read_text().strip().split("\n")
    assert lines[0].startswith("# shape=")
    row, col, val = lines[1].split()
    assert int(row) >= 0 and int(col) >= 0
    assert np.isfinite(float(val))
