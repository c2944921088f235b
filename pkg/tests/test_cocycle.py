import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from qpspec.cocycle import (
    ScaledMatrix,
    SymplecticForm,
    as_cocycle,
    block_recursion_check,
    exterior_power,
    high_wedge_from_inverse,
    propagate,
    symplectic_defect,
    transfer_matrix,
    transfer_product,
)
from qpspec.errors import StripViolationError
from qpspec.sampling import Phase


def test_symplectic_form_squares_to_minus_identity():
    om = SymplecticForm(3).matrix
    np.testing.assert_allclose(om @ om, -np.eye(6), atol=0)


def test_scaled_matrix_round_trip(rng):
    mat = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    sm = ScaledMatrix.from_matrix(mat)
    np.testing.assert_allclose(sm.represented(), mat, atol=1e-14)
    assert np.linalg.norm(sm.unit, ord=2) == pytest.approx(1.0)


def test_scaled_matmul_tracks_huge_products(rng):
    # 200 factors of norm ~e^3 would overflow float64 as a raw product
    base = ScaledMatrix.from_matrix(np.exp(3.0) * np.eye(2))
    acc = base
    for _ in range(199):
        acc = acc.matmul(base)
    assert acc.log_scale == pytest.approx(600.0)
    np.testing.assert_allclose(acc.unit, np.eye(2), atol=1e-13)


def test_scaled_matrix_rejects_zero():
    with pytest.raises(ValueError):
        ScaledMatrix.from_matrix(np.zeros((2, 2)))


def test_log_singular_values_descend(rng):
    mat = rng.standard_normal((5, 5))
    lsv = ScaledMatrix.from_matrix(mat).log_singular_values()
    assert np.all(np.diff(lsv) <= 1e-12)
    np.testing.assert_allclose(np.exp(lsv), np.linalg.svd(mat, compute_uv=False), rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(
    arrays(np.float64, (4, 4), elements=st.floats(-2, 2)),
    arrays(np.float64, (4, 4), elements=st.floats(-2, 2)),
    st.integers(1, 4),
)
def test_exterior_power_is_multiplicative(a, b, j):
    prod = exterior_power(a @ b, j)
    np.testing.assert_allclose(prod, exterior_power(a, j) @ exterior_power(b, j), atol=1e-8)


def test_exterior_power_top_is_determinant(rng):
    mat = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    top = exterior_power(mat, 4)
    assert top.shape == (1, 1)
    assert top[0, 0] == pytest.approx(np.linalg.det(mat))


def test_exterior_power_vs_explicit_minors(rng):
    mat = rng.standard_normal((4, 4))
    w2 = exterior_power(mat, 2)
    # lexicographic subsets of size 2 from {0,1,2,3}
    subsets = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    for a, rows in enumerate(subsets):
        for b, cols in enumerate(subsets):
            minor = np.linalg.det(mat[np.ix_(rows, cols)])
            assert w2[a, b] == pytest.approx(minor)


def test_high_wedge_matches_direct_minors(rng):
    for k, j in [(4, 3), (6, 4), (6, 5), (6, 6)]:
        mat = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
        np.testing.assert_allclose(
            high_wedge_from_inverse(mat, j), exterior_power(mat, j), atol=1e-10
        )


def test_transfer_matrix_symplectic_on_real_torus(amo3, rng):
    for theta in rng.uniform(0.0, 1.0, 10):
        m = transfer_matrix(amo3, 0.5, Phase(theta))
        assert symplectic_defect(m) < 1e-12


def test_transfer_matrix_defect_off_torus(amo3):
    # complexified phases break conjugate-symplecticity in general
    m = transfer_matrix(amo3, 0.5, Phase(0.1, eps=0.05))
    assert symplectic_defect(m) > 1e-3


def test_symplectic_defect_rejects_odd_dimension():
    with pytest.raises(ValueError):
        symplectic_defect(np.eye(3))


def test_transfer_factor_strip_guard(amo3):
    with pytest.raises(StripViolationError):
        transfer_matrix(amo3, 0.0, Phase(0.0, eps=amo3.delta + 0.1))


def test_propagate_matches_dense_product(block_demo, rng):
    n = 8
    theta = float(rng.uniform())
    cocycle = as_cocycle(block_demo, 0.3)
    chain = propagate(cocycle, np.array([theta]), 0.0, n)[1].single()
    dense = np.eye(2 * block_demo.d, dtype=complex)
    for step in range(n):
        p = Phase(theta + step * block_demo.omega.omega)
        dense = transfer_matrix(block_demo, 0.3, p) @ dense
    np.testing.assert_allclose(chain.represented(), dense, atol=1e-10)


def test_propagate_wedge_chain_consistent(coupled2, rng):
    # wedge of the product == product of the wedges, per theta
    theta = rng.uniform(0.0, 1.0, 3)
    out = propagate(as_cocycle(coupled2, 0.2), theta, 0.0, 12, wedges=(1, 2, 3))
    m = out[1].represented()
    for j in (2, 3):
        np.testing.assert_allclose(
            out[j].represented(), exterior_power(m, j), atol=1e-9
        )


def test_transfer_product_recursion(amo3, rng):
    res = block_recursion_check(amo3, 0.7, Phase(float(rng.uniform())), 6)
    assert res < 1e-12


def test_constant_cocycle_powers():
    mat = np.array([[2.0, 1.0], [0.0, 0.5]])
    out = propagate(as_cocycle(mat), np.array([0.0]), 0.0, 5)[1].single()
    np.testing.assert_allclose(out.represented(), np.linalg.matrix_power(mat, 5), atol=1e-12)


def test_transfer_product_single_step_matches_matrix(amo3):
    p = Phase(0.25)
    one = transfer_product(amo3, 1.1, p, 1)
    np.testing.assert_allclose(one.represented(), transfer_matrix(amo3, 1.1, p), atol=1e-14)
