"""Finite-volume spectra, density-of-states windows, and Holder regression.

Window counts go through two independent routes: exact eigenvalue counting
(dense Hermitian diagonalization, band-aware) and the resolvent-trace bound
(2 eta / N) Im tr G(E + i eta), which dominates the count pointwise.  The
large-deviation measures compare per-phase determinant growth against the
grid-mean exponent at the same scale.  Deviation thresholds are caller
supplied throughout; n^{-1/2} is the documented stand-in default since the
theory's n^{-gamma} comes with no explicit gamma.

Arithmetic certificates for the frequency (Diophantine floor, admissible
scale sequences) live here too: the Holder experiment is only meaningful
once both are in hand.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import InsufficientDataError, NotDiophantineError
from .family import OperatorFamily, det_b_log_average
from .frequency import circle_norm
from .sampling import Phase


def _hermitian_guard(op) -> None:
    res = op.hermitian_residual()
    if res > 1e-9:
        raise ValueError(f"operator is not Hermitian at this phase (residual {res:.3e})")


def finite_volume_spectrum(fam: OperatorFamily, theta: float, interval, boundary: str = "dirichlet") -> np.ndarray:
    """Sorted real eigenvalues of H restricted to ``interval``.

    Scalar families go through the tridiagonal solver after rotating the
    hopping phases away (a diagonal unitary conjugation, spectrum unchanged);
    block families use the Hermitian band solver; periodic boundary falls back
    to a dense matrix because of the corner blocks.
    """
    from .determinants import assemble

    op = assemble(fam, tuple(interval), boundary, Phase(float(theta), 0.0))
    _hermitian_guard(op)
    if boundary == "periodic":
        mat = op.dense()
        np.fill_diagonal(mat, np.diag(mat).real)
        return np.sort(np.linalg.eigvalsh(mat))
    ab, kl, ku = op.banded_ab(0.0)
    lower = ab[kl + ku :]
    if fam.d == 1:
        diag = lower[0].real.copy()
        if diag.size == 1:
            return diag
        off = np.abs(lower[1][:-1])
        return np.sort(sla.eigvalsh_tridiagonal(diag, off))
    return np.sort(sla.eig_banded(lower, lower=True, eigvals_only=True))


@dataclass(frozen=True)
class IDSCurve:
    """Finite-volume eigenvalue counting function theta |-> N_Lambda.

    Evaluation returns the fraction of eigenvalues strictly below E, so the
    curve is monotone with range [0, 1] and jumps exactly at eigenvalues.
    """

    N: int
    theta: float
    energies: np.ndarray

    def __call__(self, E):
        return np.searchsorted(self.energies, E, side="left") / self.energies.size


def ids_curve(fam: OperatorFamily, theta: float, N: int, boundary: str = "dirichlet") -> IDSCurve:
    if N < 1:
        raise ValueError("N must be >= 1")
    energies = finite_volume_spectrum(fam, theta, (0, N - 1), boundary)
    return IDSCurve(N=int(N), theta=float(theta), energies=energies)


def ids_estimate(fam: OperatorFamily, theta: float, E: float, N: int) -> float:
    """Fraction of Dirichlet eigenvalues of H|_[0, N-1] below E."""
    return float(ids_curve(fam, theta, N)(E))


def resolvent_trace_im(fam: OperatorFamily, theta: float, z: complex, N: int, chunk: int = 256) -> float:
    """Im tr (H|_[0,N-1] - z)^{-1} with Dirichlet boundary, Im z != 0.

    Scalar families use the two-sided pivot recursion for the diagonal of a
    tridiagonal inverse (O(N)); block families solve banded systems against
    identity columns in chunks so the dense inverse never materializes.
    """
    from .determinants import assemble

    z = complex(z)
    if z.imag == 0:
        raise ValueError("resolvent trace needs Im z != 0")
    op = assemble(fam, (0, N - 1), "dirichlet", Phase(float(theta), 0.0))
    ab, kl, ku = op.banded_ab(z)
    dim = ab.shape[1]
    if fam.d == 1 and dim > 1:
        a = ab[kl + ku]
        sub = ab[kl + ku + 1][:-1]
        sup = ab[kl + ku - 1][1:]
        delta = np.empty(dim, dtype=complex)
        mu = np.empty(dim, dtype=complex)
        delta[0] = a[0]
        for j in range(1, dim):
            delta[j] = a[j] - sub[j - 1] * sup[j - 1] / delta[j - 1]
        mu[-1] = a[-1]
        for j in range(dim - 2, -1, -1):
            mu[j] = a[j] - sub[j] * sup[j] / mu[j + 1]
        return float(np.sum((1.0 / (delta + mu - a)).imag))
    band = ab[kl:]
    total = 0.0
    for lo in range(0, dim, chunk):
        hi = min(lo + chunk, dim)
        rhs = np.zeros((dim, hi - lo), dtype=complex)
        rhs[np.arange(lo, hi), np.arange(hi - lo)] = 1.0
        sol = sla.solve_banded((kl, ku), band, rhs)
        total += float(np.sum(sol[np.arange(lo, hi), np.arange(hi - lo)].imag))
    return total


@dataclass(frozen=True)
class WindowCount:
    """Normalized spectral-window count and its resolvent-trace majorant.

    eigen = #{eigenvalues in [E-eta, E+eta)} / dim is exact; resolvent =
    (2 eta / dim) Im tr G(E + i eta) >= eigen holds pointwise because every
    windowed eigenvalue contributes at least 1 to the trace sum.
    """

    eigen: float
    resolvent: float


def window_count(fam: OperatorFamily, theta: float, E: float, eta: float, N: int) -> WindowCount:
    if eta <= 0:
        raise ValueError("eta must be positive")
    energies = finite_volume_spectrum(fam, theta, (0, N - 1))
    dim = energies.size
    lo = np.searchsorted(energies, E - eta, side="left")
    hi = np.searchsorted(energies, E + eta, side="left")
    res = 2.0 * eta / dim * resolvent_trace_im(fam, theta, complex(E, eta), N)
    return WindowCount(eigen=float((hi - lo) / dim), resolvent=float(res))


def fit_power_law(x, y):
    """Least-squares exponent of y ~ c * x^beta.

    Returns (beta, rms residual of the log-log fit).  Exact power laws come
    back bit-accurate because the regression is linear in log space.
    """
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    if lx.size < 2:
        raise InsufficientDataError("power-law fit needs >= 2 points")
    coeffs = np.polyfit(lx, ly, 1)
    resid = np.polyval(coeffs, lx) - ly
    return float(coeffs[0]), float(np.sqrt(np.mean(resid**2)))


def tau_window(eta: float, kappa: int) -> float:
    """Auxiliary scale eta^{1/(2 kappa)} coupling window width to volume."""
    if eta <= 0 or kappa < 1:
        raise ValueError("need eta > 0 and kappa >= 1")
    return float(eta ** (1.0 / (2.0 * kappa)))


@dataclass(frozen=True)
class HolderReport:
    """Log-log regression of phase-averaged window counts against width.

    eta_grid is stored strictly decreasing; d_values and resolvent_values are
    aligned with it (zero-count points stay visible here even though the fit
    drops them).  beta_bound = 1/(2 kappa_rounded) is the theoretical slope
    floor; confidence is the rms log residual of the fit.
    """

    eta_grid: np.ndarray
    d_values: np.ndarray
    resolvent_values: np.ndarray
    beta_hat: float
    beta_bound: float
    confidence: float
    phases: np.ndarray
    dropped: int


def holder_fit(
    fam: OperatorFamily,
    E0: float,
    eta_grid,
    N: int,
    phases: int = 8,
    kappa_rounded: int | None = None,
    nu_gap: float | None = 0.05,
    gate_n: int = 256,
    gate_grid: int = 200,
) -> HolderReport:
    """Fit log(window count) vs log(2 eta) around E0, averaged over phases.

    The positivity gate L_d(E0) > nu_gap runs first: the Holder prediction
    only applies with a gapped top exponent.  Pass nu_gap=None to skip the
    gate (the regression itself is meaningful for any family, e.g. the free
    Laplacian inside its band, where the IDS is locally Lipschitz).  Phases
    may be an int (evenly spaced offsets with a half-step shift, so theta = 0
    symmetry points are avoided) or an explicit sequence.
    """
    from .lyapunov import acceleration, finite_scale_le

    eta_grid = np.sort(np.asarray(eta_grid, dtype=float))[::-1].copy()
    if eta_grid.size < 3:
        raise InsufficientDataError("eta_grid needs >= 3 points")
    if np.any(eta_grid <= 0) or np.any(np.diff(eta_grid) >= 0):
        raise ValueError("eta_grid must be positive with distinct entries")
    if eta_grid[-1] < 1.0 / N:
        warnings.warn(
            f"smallest eta {eta_grid[-1]:.3e} is below the eigenvalue spacing "
            f"resolution ~1/N = {1.0 / N:.3e}; counts there may be all zero",
            stacklevel=2,
        )

    if nu_gap is not None:
        gate = finite_scale_le(fam, E0, 0.0, gate_n, gate_grid)
        if gate.L(fam.d) <= nu_gap:
            raise ValueError(
                f"positivity gate failed: L_{fam.d}({E0}) = {gate.L(fam.d):.4f} <= nu_gap = {nu_gap}"
            )
    if kappa_rounded is None:
        est = acceleration(fam, E0, 0.0, gate_n, gate_grid)[fam.d - 1]
        kappa_rounded = est.kappa_rounded
    if kappa_rounded < 1:
        warnings.warn(f"kappa_rounded = {kappa_rounded} < 1; slope floor degenerate", stacklevel=2)
        beta_bound = math.inf
    else:
        beta_bound = 1.0 / (2.0 * kappa_rounded)

    if np.ndim(phases) == 0:
        m = int(phases)
        phase_list = (np.arange(m) + 0.5) / m
    else:
        phase_list = np.asarray(phases, dtype=float)
    counts = np.zeros((phase_list.size, eta_grid.size))
    resolvents = np.zeros_like(counts)
    for i, th in enumerate(phase_list):
        energies = finite_volume_spectrum(fam, th, (0, N - 1))
        dim = energies.size
        lo = np.searchsorted(energies, E0 - eta_grid, side="left")
        hi = np.searchsorted(energies, E0 + eta_grid, side="left")
        counts[i] = (hi - lo) / dim
        for k, eta in enumerate(eta_grid):
            resolvents[i, k] = (
                2.0 * eta / dim * resolvent_trace_im(fam, th, complex(E0, eta), N)
            )
    d_values = counts.mean(axis=0)
    resolvent_values = resolvents.mean(axis=0)

    usable = d_values > 0
    dropped = int(np.sum(~usable))
    if dropped:
        warnings.warn(f"dropping {dropped} eta points with zero window count", stacklevel=2)
    if np.sum(usable) < 3:
        raise InsufficientDataError(
            f"only {int(np.sum(usable))} eta points have nonzero counts; need >= 3"
        )
    beta_hat, confidence = fit_power_law(2.0 * eta_grid[usable], d_values[usable])
    return HolderReport(
        eta_grid=eta_grid,
        d_values=d_values,
        resolvent_values=resolvent_values,
        beta_hat=beta_hat,
        beta_bound=beta_bound,
        confidence=confidence,
        phases=phase_list,
        dropped=dropped,
    )


_LDT_KINDS = ("propagator", "dirichlet", "periodic")


def ldt_measure(
    fam: OperatorFamily,
    E: float,
    eps: float,
    n: int,
    grid: int,
    deviation: float,
    kind: str = "propagator",
) -> float:
    """Fraction of the phase grid inside the large-deviation set.

    propagator: (1/n) log||wedge_d M_n(theta + i eps)|| against its own grid
    mean (the scale-n exponent).  dirichlet / periodic: (1/n) log of the
    determinant against <log|det B(. + i eps)|> + L^d(n), the growth rate the
    determinant identities give; for scalar families with b == 1 this is the
    scale-n exponent itself.
    """
    if deviation <= 0:
        raise ValueError("deviation must be positive")
    if kind not in _LDT_KINDS:
        raise ValueError(f"kind must be one of {_LDT_KINDS}")
    from .cocycle import as_cocycle, propagate
    from .determinants import det_values_grid

    thetas = np.arange(grid) / grid
    prod = propagate(as_cocycle(fam, E), thetas, eps, n, wedges=(fam.d,))[fam.d]
    l_top = float(np.mean(prod.log_norm())) / n
    if kind == "propagator":
        values = prod.log_norm() / n
        reference = l_top
    else:
        log_mag, _ = det_values_grid(fam, E, n, kind, thetas + 1j * eps)
        values = log_mag / n
        reference = l_top + det_b_log_average(fam, eps, grid)
    return float(np.mean(values < reference - deviation))


@dataclass(frozen=True)
class DiophantineCertificate:
    """Verified floor ||k omega|| >= a / |k|^A for all 0 < |k| <= k_max."""

    a: float
    A: float
    k_max: int
    worst_k: int


_A_CANDIDATES = tuple(1.0 + 0.5 * i for i in range(19))


def diophantine_certificate(omega, k_max: int, a_floor: float = 1e-3, chunk: int = 1 << 20) -> DiophantineCertificate:
    """Smallest exponent A in {1, 1.5, ..., 10} whose floor a stays >= a_floor.

    The scan over k is exhaustive (vectorized in chunks), so the certificate
    is its own verification; the worst k always lands on a continued-fraction
    convergent denominator, which tests assert separately.  Exact rationals
    hit ||k omega|| = 0 and raise; near-rationals fail every candidate A and
    raise too.
    """
    k_max = int(k_max)
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    w = float(getattr(omega, "omega", omega))
    best = {A: (math.inf, 0) for A in _A_CANDIDATES}
    for lo in range(1, k_max + 1, chunk):
        ks = np.arange(lo, min(lo + chunk, k_max + 1), dtype=float)
        norms = circle_norm(ks * w)
        if np.any(norms == 0.0):
            k_bad = int(ks[np.argmax(norms == 0.0)])
            raise NotDiophantineError(f"||{k_bad} * omega|| = 0: omega is rational")
        for A in _A_CANDIDATES:
            vals = norms * ks**A
            i = int(np.argmin(vals))
            if vals[i] < best[A][0]:
                best[A] = (float(vals[i]), int(ks[i]))
    for A in _A_CANDIDATES:
        a, worst = best[A]
        if a >= a_floor:
            return DiophantineCertificate(a=a, A=float(A), k_max=k_max, worst_k=worst)
    raise NotDiophantineError(
        f"no exponent up to {_A_CANDIDATES[-1]} reaches floor {a_floor}: "
        f"omega is rational or Liouville-like at this cutoff"
    )


@dataclass(frozen=True)
class AdmissibleScales:
    """First members of {n >= N0: ||n omega|| <= kappa0} and their max gap."""

    kappa0: float
    N0: int
    scales: tuple
    max_gap: int


def admissible_scales(omega, kappa0: float, N0: int, count: int, scan_limit: int = 10**8) -> AdmissibleScales:
    w = float(getattr(omega, "omega", omega))
    kappa0 = float(kappa0)
    if kappa0 <= 0:
        raise ValueError("kappa0 must be positive")
    if count < 1:
        raise ValueError("count must be >= 1")
    if kappa0 >= 0.5:
        warnings.warn("kappa0 >= 1/2 admits every scale (degenerate)", stacklevel=2)
    found: list[int] = []
    lo = int(N0)
    chunk = 1 << 16
    while len(found) < count:
        if lo > N0 + scan_limit:
            raise RuntimeError(
                f"found only {len(found)}/{count} admissible scales within {scan_limit} of N0"
            )
        ns = np.arange(lo, lo + chunk)
        hits = ns[circle_norm(ns * w) <= kappa0]
        found.extend(int(x) for x in hits[: count - len(found)])
        lo += chunk
    gaps = np.diff(found)
    return AdmissibleScales(
        kappa0=kappa0,
        N0=int(N0),
        scales=tuple(found),
        max_gap=int(gaps.max()) if gaps.size else 0,
    )


@dataclass(frozen=True)
class NeighborhoodReport:
    """Certified radius around E0 where the working inequalities held.

    nu_gap is the measured L_d(E0) floor (the lower bound the neighborhood
    must keep half of); kappa0 the central acceleration; violations counts
    grid points that failed in the final round (0 when certified).
    """

    E0: float
    radius: float
    nu_gap: float
    kappa0: int
    violations: int


def energy_neighborhood(
    fam: OperatorFamily,
    E0: float,
    radius: float = 0.05,
    n: int = 128,
    grid: int = 128,
    e_points: int = 5,
    eps_points: int = 3,
    slack: float = 0.02,
    max_rounds: int = 3,
) -> NeighborhoodReport:
    """Shrink radius until L_d(E, eps) >= L_d(E0)/2, kappa(E) <= kappa(E0),
    and L^d(E, eps) <= L^d(E, 0) + 2 pi kappa(E0) eps hold on a coarse grid.

    All three are checked with additive ``slack`` because scale-n exponents
    fluctuate at O(1/n).  Rounds that fail halve the radius and warn.
    """
    from .lyapunov import acceleration, finite_scale_le

    base = finite_scale_le(fam, E0, 0.0, n, grid)
    nu = base.L(fam.d)
    kappa0 = acceleration(fam, E0, 0.0, n, grid)[fam.d - 1].kappa_rounded
    eps_cap = min(fam.delta / 2.0, 0.03)
    eps_values = np.linspace(0.0, eps_cap, eps_points)
    r = float(radius)
    violations = 0
    for _ in range(max_rounds):
        violations = 0
        for E in np.linspace(E0 - r, E0 + r, e_points):
            at_zero = finite_scale_le(fam, E, 0.0, n, grid)
            if at_zero.L(fam.d) < nu / 2.0 - slack:
                violations += 1
            kap = acceleration(fam, E, 0.0, n, grid)[fam.d - 1]
            if kap.kappa_hat > kappa0 + 0.25:
                violations += 1
            for eps in eps_values[1:]:
                here = finite_scale_le(fam, E, eps, n, grid)
                if here.L(fam.d) < nu / 2.0 - slack:
                    violations += 1
                if here.L_sum(fam.d) > at_zero.L_sum(fam.d) + 2 * math.pi * kappa0 * eps + slack:
                    violations += 1
        if violations == 0:
            break
        warnings.warn(
            f"{violations} grid violations at radius {r:.4f}; shrinking", stacklevel=2
        )
        r *= 0.5
    return NeighborhoodReport(
        E0=float(E0), radius=r, nu_gap=float(nu), kappa0=int(kappa0), violations=violations
    )
