import numpy as np
import pytest

from qpspec.cocycle import as_cocycle
from qpspec.errors import StripViolationError
from qpspec.families import amo_family
from qpspec.lyapunov import (
    acceleration,
    convergence_gap,
    finite_scale_le,
    lipschitz_eps_constant,
    lyapunov_profile,
    propagate_checkpoints,
)

# supercritical almost Mathieu: the top exponent on the spectrum is log(lam),
# so lam=3 at E=0.5 gives a sharp oracle for the wedge route
AMO_L1_ORACLE = np.log(3.0)


def test_amo_top_exponent_matches_coupling_log(amo3):
    es = finite_scale_le(amo3, 0.5, 0.0, 128, 200)
    assert es.L(1) == pytest.approx(AMO_L1_ORACLE, abs=5e-3)
    assert es.L_sum(1) == es.L(1)


def test_exponent_duality_on_real_torus(coupled2):
    es = finite_scale_le(coupled2, 0.2, 0.0, 64, 100)
    assert np.max(np.abs(es.singles + es.singles[::-1])) < 1e-10


def test_singles_descend(coupled2):
    es = finite_scale_le(coupled2, 0.2, 0.0, 64, 100)
    assert np.all(np.diff(es.singles) <= 1e-10)


def test_sv_route_agrees_at_small_spread(coupled2):
    # singular values read off one SVD are trustworthy while n*(L_1 - L_j) < ~21
    es = finite_scale_le(coupled2, 0.2, 0.0, 16, 100)
    assert np.max(np.abs(es.l_sums - es.sv_l_sums)) < 1e-9


def test_sv_route_degrades_at_large_spread(amo3):
    # documents why the wedge chain is the primary route, not a bug
    es = finite_scale_le(amo3, 0.5, 0.0, 128, 50)
    assert not np.all(np.isfinite(es.sv_l_sums)) or (
        np.max(np.abs(es.l_sums - es.sv_l_sums)) > 1e-6
    )


def test_profile_even_in_eps(amo3):
    prof = lyapunov_profile(amo3, 0.5, [-0.03, 0.0, 0.03], 64, 150)
    np.testing.assert_allclose(prof.l_sums[0], prof.l_sums[2], atol=1e-12)
    assert prof.duality_defect() < 1e-10


def test_profile_convex_in_eps(amo3):
    prof = lyapunov_profile(amo3, 0.5, [0.0, 0.02, 0.04], 64, 150)
    top = prof.l_sums[:, 0]
    assert top[0] + top[2] - 2 * top[1] >= -1e-9


def test_acceleration_quantizes_to_one(amo3):
    est = acceleration(amo3, 0.5, 0.05, 64, 120)
    assert est[0].kappa_rounded == 1
    assert est[0].kappa_hat == pytest.approx(1.0, abs=0.01)
    assert est[0].residual < 1e-4
    assert not est[0].degraded
    # L^2 is the log of a unimodular determinant here, so its slope vanishes
    assert est[1].kappa_rounded == 0


def test_acceleration_sees_potential_degree():
    fam = amo_family(lam=100.0, degree=2)
    est = acceleration(fam, 0.5, 0.05, 64, 120)
    assert est[0].kappa_rounded == 2


def test_acceleration_guards_strip(amo3):
    with pytest.raises(StripViolationError):
        acceleration(amo3, 0.5, amo3.delta, 64, 40)


def test_checkpoints_match_direct_products(amo3):
    thetas = np.arange(80) / 80
    table = propagate_checkpoints(as_cocycle(amo3, 0.5), thetas, 0.0, [16, 64], wedges=(1,))
    for n in (16, 64):
        direct = finite_scale_le(amo3, 0.5, 0.0, n, 80).L_sum(1)
        assert table[1][n] == pytest.approx(direct, abs=1e-12)


def test_convergence_gap_shrinks(amo3):
    gaps = convergence_gap(amo3, 0.5, 0.0, [16, 32, 64], 80)
    assert gaps[64] == 0.0
    assert gaps[16] > gaps[32] > 0.0


def test_convergence_gap_warns_below_positivity(free):
    with pytest.warns(UserWarning, match="positivity"):
        convergence_gap(free, 0.0, 0.0, [8, 16], 40, positivity_nu=0.1)


def test_lipschitz_constant_tracks_acceleration_slope(amo3):
    # supercritical profile is affine with slope 2*pi per unit acceleration
    lip = lipschitz_eps_constant(amo3, 0.5, [0.0, 0.01, 0.02], 32, 60)
    assert 2.0 < lip < 2 * np.pi + 0.3
