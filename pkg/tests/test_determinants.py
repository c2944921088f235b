import cmath
import math

import numpy as np
import pytest

from qpspec.determinants import (
    LOGDET_ONE,
    LogDet,
    assemble,
    det_values_grid,
    detp_residual,
    dirichlet_det,
    dirichlet_values,
    green_entry_dirichlet,
    green_entry_periodic,
    logdet_banded,
    logdet_dense,
    minor_bound_check,
    minor_mu,
    periodic_block_det,
)
from qpspec.errors import SingularEnergyError
from qpspec.families import free_family
from qpspec.sampling import Phase


def free_dirichlet_oracle(n, E):
    # tridiagonal with zero diagonal and unit hopping: eigenvalues 2cos(k pi/(n+1))
    lam = 2 * np.cos(np.arange(1, n + 1) * np.pi / (n + 1))
    return complex(np.prod(lam - E))


def test_logdet_value_round_trip():
    z = -2.3 + 1.7j
    ld = LogDet.from_value(z)
    assert ld.value() == pytest.approx(z)
    assert abs(ld.phase_unit) == pytest.approx(1.0)


def test_logdet_algebra():
    a = LogDet.from_value(3.0 + 4.0j)
    b = LogDet.from_value(-0.5j)
    assert a.mul(b).value() == pytest.approx((3 + 4j) * (-0.5j))
    assert a.div(b).value() == pytest.approx((3 + 4j) / (-0.5j))
    assert a.mul(LOGDET_ONE).value() == pytest.approx(a.value())


def test_logdet_singular_paths():
    zero = LogDet.from_value(0.0)
    assert zero.is_singular
    assert zero.value() == 0j
    with pytest.raises(SingularEnergyError):
        LOGDET_ONE.div(zero)


def test_logdet_dense_matches_slogdet(rng):
    for _ in range(10):
        mat = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        ld = logdet_dense(mat)
        sign, logabs = np.linalg.slogdet(mat)
        assert ld.log_mag == pytest.approx(logabs, abs=1e-10)
        assert ld.phase_unit == pytest.approx(sign, abs=1e-10)


def test_logdet_banded_matches_dense(block_demo):
    op = assemble(block_demo, (0, 15), "dirichlet", Phase(0.3))
    banded = logdet_banded(*op.banded_ab(0.7))
    mat = op.dense()
    np.fill_diagonal(mat, np.diag(mat) - 0.7)
    dense = logdet_dense(mat)
    assert banded.log_mag == pytest.approx(dense.log_mag, abs=1e-10)
    assert banded.phase_unit == pytest.approx(dense.phase_unit, abs=1e-10)


def test_free_dirichlet_det_closed_form(free):
    for n in (1, 2, 7, 16):
        ld = dirichlet_det(free, Phase(0.0), 0.3, n)
        assert ld.value() == pytest.approx(free_dirichlet_oracle(n, 0.3), rel=1e-12)


def test_free_periodic_det_small_cases(free):
    # circulant with zero diagonal and unit neighbors: det = -4 (n=2), 2 (n=3)
    assert periodic_block_det(free, Phase(0.0), 0.0, 2).value() == pytest.approx(-4.0)
    assert periodic_block_det(free, Phase(0.0), 0.0, 3).value() == pytest.approx(2.0)


def test_det_size_guards(free):
    with pytest.raises(ValueError):
        dirichlet_det(free, Phase(0.0), 0.0, 0)
    with pytest.raises(ValueError):
        periodic_block_det(free, Phase(0.0), 0.0, 1)


def test_single_site_assembly(amo3):
    op = assemble(amo3, (0, 0), "dirichlet", Phase(0.2))
    assert op.dim == 1
    assert op.hermitian_residual() < 1e-14


def test_periodic_det_identity_residual(amo3, block_demo, rng):
    for fam in (amo3, block_demo):
        for eps in (0.0, 0.01):
            for n in (4, 16):
                res = detp_residual(fam, Phase(float(rng.uniform()), eps), 0.5, n)
                assert res < 1e-8


def test_char_poly_route_matches_dense_at_small_scale(amo3, block_demo):
    from qpspec.cocycle import transfer_product
    from qpspec.determinants import propagator_det_minus_identity

    for fam in (amo3, block_demo):
        m = transfer_product(fam, 0.5, Phase(0.3), 4).represented()
        expect = logdet_dense(m - np.eye(m.shape[0]))
        got = propagator_det_minus_identity(fam, 0.5, Phase(0.3), 4)
        assert got.log_mag == pytest.approx(expect.log_mag, abs=1e-10)
        assert got.phase_unit == pytest.approx(expect.phase_unit, abs=1e-10)


def test_periodic_det_identity_survives_large_scale(amo3):
    # n L ~ 70 logs here; forming the product and subtracting I cannot reach
    # this accuracy, the wedge-trace expansion can
    assert detp_residual(amo3, Phase(0.37), 0.5, 64) < 1e-8


def test_green_dirichlet_formula_vs_direct(amo3, rng):
    z = 0.4 + 0.3j
    for _ in range(5):
        theta = float(rng.uniform())
        k, j = sorted(rng.choice(12, size=2, replace=False))
        if k == j:
            continue
        formula = green_entry_dirichlet(amo3, Phase(theta), z, (0, 11), int(k), int(j), method="formula")
        direct = green_entry_dirichlet(amo3, Phase(theta), z, (0, 11), int(k), int(j), method="direct")
        assert formula == pytest.approx(direct, rel=1e-9)


def test_green_dirichlet_formula_route_guards(block_demo, amo3):
    with pytest.raises(ValueError):
        green_entry_dirichlet(block_demo, Phase(0.1), 0.5 + 0.1j, (0, 7), 0, 3, method="formula")
    with pytest.raises(ValueError):
        green_entry_dirichlet(amo3, Phase(0.1), 0.5 + 0.1j, (0, 7), 3, 3, method="formula")
    with pytest.raises(IndexError):
        green_entry_dirichlet(amo3, Phase(0.1), 0.5 + 0.1j, (0, 7), 0, 9)


def test_green_periodic_formula_vs_direct(amo3, block_demo, rng):
    z = -0.2 + 0.25j
    for fam, interval in ((amo3, (0, 9)), (block_demo, (0, 11))):
        for _ in range(4):
            theta = float(rng.uniform())
            k = int(rng.integers(interval[0], interval[1] + 1))
            j = int(rng.integers(interval[0], interval[1] + 1))
            formula = green_entry_periodic(fam, Phase(theta), z, interval, k, j, method="formula")
            direct = green_entry_periodic(fam, Phase(theta), z, interval, k, j, method="direct")
            assert formula == pytest.approx(direct, rel=1e-8, abs=1e-12)


def test_minor_shift_covariance(amo3):
    # deleting labels in [l, m-1] equals deleting shifted labels at theta + l omega
    theta, E = 0.17, 0.6
    ell, m = 2, 8
    x, y = 3, 6
    lhs = minor_mu(amo3, Phase(theta), E, (ell, m - 1), x, y)
    rhs = minor_mu(
        amo3, Phase(theta + ell * amo3.omega.omega), E, (0, m - ell - 1), x - ell, y - ell
    )
    assert lhs.log_mag == pytest.approx(rhs.log_mag, abs=1e-9)
    assert lhs.phase_unit == pytest.approx(rhs.phase_unit, abs=1e-9)


def test_scalar_recursion_matches_lu(amo3):
    w = np.array([0.05, 0.31, 0.77, 0.5 + 0.02j])
    lm, ph = dirichlet_values(amo3, 0.5, 24, w)
    for i, wi in enumerate(w):
        op = assemble(amo3, (0, 23), "dirichlet", Phase(float(wi.real), float(wi.imag)))
        ld = logdet_banded(*op.banded_ab(0.5))
        assert lm[i] == pytest.approx(ld.log_mag, abs=1e-9)
        assert ph[i] == pytest.approx(ld.phase_unit, abs=1e-9)


def test_det_values_grid_periodic_kind(amo3):
    w = np.array([0.11, 0.42])
    lm, ph = det_values_grid(amo3, 0.5, 6, "periodic", w)
    for i, wi in enumerate(w):
        ld = periodic_block_det(amo3, Phase(float(wi)), 0.5, 6)
        assert lm[i] == pytest.approx(ld.log_mag, abs=1e-10)
        assert ph[i] == pytest.approx(ld.phase_unit, abs=1e-10)


def test_det_values_grid_block_dirichlet(block_demo):
    w = np.array([0.23])
    lm, ph = det_values_grid(block_demo, 0.4, 5, "dirichlet", w)
    ld = dirichlet_det(block_demo, Phase(0.23), 0.4, 5)
    assert lm[0] == pytest.approx(ld.log_mag, abs=1e-10)
    assert ph[0] == pytest.approx(ld.phase_unit, abs=1e-10)


def test_dirichlet_values_rejects_blocks(block_demo):
    with pytest.raises(ValueError):
        dirichlet_values(block_demo, 0.0, 4, np.array([0.0]))


def test_dead_point_keeps_sentinel(free):
    # E an exact eigenvalue of the n=1 restriction: D_1(theta) = v - E = -E
    lm, _ = dirichlet_values(free, 0.0, 1, np.array([0.0]))
    assert lm[0] == -math.inf


def test_minor_bound_sampler_runs(amo3, rng):
    rep = minor_bound_check(amo3, 0.5, 24, trials=20, rng=rng, grid=100)
    assert rep.trials == 20
    assert np.isfinite(rep.max_slack_offdiag)
    assert np.isfinite(rep.max_slack_diag)
