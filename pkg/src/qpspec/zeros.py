"""Argument-principle zero counting on circles, balls, and annuli.

The determinants are Laurent polynomials in z = e^{2pi i (theta + i eps)}, so
counts over an annulus come out as a difference of two circle windings (the
pole order at 0 cancels).  All contour evaluations are carried as
(log-magnitude, unit phase) pairs because the values range over e^{+-nL}.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .determinants import det_values_grid
from .errors import ContourDegenerateError, LemmaViolationReport, StripViolationError
from .family import OperatorFamily
from .frequency import circle_norm

_TWO_PI = 2.0 * math.pi
_JITTERS = (1.0, 0.97, 1.03, 0.94, 1.06)


def _values_as_logmag_phase(out):
    if isinstance(out, tuple):
        lm, ph = out
        return np.asarray(lm, dtype=float), np.asarray(ph, dtype=complex)
    vals = np.asarray(out, dtype=complex)
    mags = np.abs(vals)
    with np.errstate(divide="ignore", invalid="ignore"):
        lm = np.where(mags > 0, np.log(np.where(mags > 0, mags, 1.0)), -np.inf)
        ph = np.where(mags > 0, vals / np.where(mags > 0, mags, 1.0), 1.0 + 0j)
    return lm, ph


def det_point_function(fam: OperatorFamily, E: complex, n: int, kind: str, shift: int = 0):
    """z-plane evaluator of the chosen determinant, pre-shifted by e^{2pi i k omega}.

    Returns a callable mapping an array of nonzero complex z to
    (log-magnitude, unit phase) arrays.  Any log branch works: the torus
    variable w = log(z)/(2pi i) enters only through e^{2pi i w}.
    """
    if kind not in ("dirichlet", "periodic"):
        raise ValueError(f"unknown determinant kind {kind!r}")
    omega = fam.omega.omega

    def g(z):
        z = np.asarray(z, dtype=complex)
        w = shift * omega + np.log(z) / (2j * np.pi)
        if float(np.max(np.abs(w.imag))) > fam.delta + 1e-12:
            raise StripViolationError(float(np.max(np.abs(w.imag))), fam.delta)
        return det_values_grid(fam, E, n, kind, w)

    return g


@dataclass(frozen=True)
class WindingResult:
    value: int
    points_used: int
    depth: int
    residual: float


def winding_number(g, radius: float, center: complex = 0j, initial_points: int = 256,
                   max_points: int = 1 << 18, max_depth: int = 40,
                   floor_drop: float = 46.0, residual_tol: float = 0.1) -> WindingResult:
    """Total phase change of g around the circle, over 2*pi.

    Samples adaptively until every phase increment is below pi/2; a sample
    whose log-magnitude drops more than floor_drop below the contour max (or
    an exact zero) aborts with a contour-degenerate error, since the argument
    principle needs a zero-free contour.

    Uniform sampling cannot detect a winding of one whole turn (or more) per
    step: the increments alias to zero and refinement never fires.  Callers
    that know a winding bound W must pass initial_points > 4 W.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    ts = np.arange(initial_points) / initial_points
    lm, ph = _values_as_logmag_phase(g(center + radius * np.exp(2j * np.pi * ts)))
    depth = 0
    while True:
        if np.any(~np.isfinite(lm)) or float(np.max(lm) - np.min(lm)) > floor_drop:
            raise ContourDegenerateError(
                f"contour magnitude dips {float(np.max(lm) - np.min(lm)):.1f} logs below its max",
                radius=radius,
            )
        dphi = np.angle(np.roll(ph, -1) / ph)
        bad = np.abs(dphi) >= np.pi / 2
        if not np.any(bad):
            break
        if depth >= max_depth or ts.size >= max_points:
            raise ContourDegenerateError(
                f"refinement exhausted at {ts.size} points with {int(np.sum(bad))} wide arcs",
                radius=radius,
            )
        left = ts[bad]
        right = np.where(bad, np.roll(ts, -1), 0.0)[bad]
        right = np.where(right <= left, right + 1.0, right)
        mids = ((left + right) / 2) % 1.0
        lm_new, ph_new = _values_as_logmag_phase(g(center + radius * np.exp(2j * np.pi * mids)))
        ts = np.concatenate([ts, mids])
        order = np.argsort(ts)
        ts, lm, ph = ts[order], np.concatenate([lm, lm_new])[order], np.concatenate([ph, ph_new])[order]
        depth += 1
    total = float(np.sum(dphi)) / _TWO_PI
    value = int(round(total))
    residual = abs(total - value)
    if residual >= residual_tol:
        raise ContourDegenerateError(
            f"winding sum {total:.4f} not close to an integer", radius=radius
        )
    return WindingResult(value=value, points_used=int(ts.size), depth=depth, residual=residual)


def _winding_with_jitter(g, radius: float, center: complex = 0j, **kw) -> WindingResult:
    last = None
    for jit in _JITTERS:
        try:
            return winding_number(g, radius * jit, center=center, **kw)
        except ContourDegenerateError as err:
            last = err
    raise last


@dataclass(frozen=True)
class AnnulusSpec:
    """Annulus {e^{2pi i (theta + i eps')}: |eps'| <= eps_half} around the unit circle."""

    eps_half: float

    def __post_init__(self):
        if self.eps_half <= 0:
            raise ValueError("eps_half must be positive")

    @property
    def radii(self) -> tuple:
        return (math.exp(-_TWO_PI * self.eps_half), math.exp(_TWO_PI * self.eps_half))


@dataclass(frozen=True)
class ZeroCountReport:
    n: int
    count: int
    normalized: float
    kappa_ref: float
    discrepancy: float
    contour_points_used: int
    refinement_depth: int


def _degree_cap(fam: OperatorFamily, n: int) -> int:
    """Upper bound on the determinant's Laurent degree (and any circle winding)."""
    return n * fam.d * max(_mode_degree(fam.v), _mode_degree(fam.b), 1)


def annulus_zero_count(fam: OperatorFamily, E: complex, n: int, spec: AnnulusSpec,
                       kind: str = "dirichlet", kappa_ref: float = float("nan"),
                       initial_points: int = 256, admissibility_kappa0: float = 0.1) -> ZeroCountReport:
    """Zeros of the determinant in the annulus: winding(outer) - winding(inner).

    The contour sampling is floored at 8x the Laurent degree cap: a uniform
    grid with one whole phase turn per step aliases to an apparent winding of
    zero, and the degree cap bounds every circle winding the determinant can
    produce.
    """
    if spec.eps_half > fam.delta / 2 + 1e-12:
        raise StripViolationError(2 * spec.eps_half, fam.delta)
    initial_points = max(initial_points, 8 * _degree_cap(fam, n))
    if kind == "periodic" and circle_norm(n * fam.omega.omega) > admissibility_kappa0:
        warnings.warn(
            f"n={n} is not admissible at kappa0={admissibility_kappa0} "
            f"(||n omega|| = {circle_norm(n * fam.omega.omega):.4f}); periodic counts may be unstable",
            stacklevel=2,
        )
    g = det_point_function(fam, E, n, kind)
    inner_r, outer_r = AnnulusSpec(spec.eps_half).radii
    outer = _winding_with_jitter(g, outer_r, initial_points=initial_points)
    inner = _winding_with_jitter(g, inner_r, initial_points=initial_points)
    count = outer.value - inner.value
    normalized = count / (2 * n)
    return ZeroCountReport(
        n=n,
        count=count,
        normalized=normalized,
        kappa_ref=kappa_ref,
        discrepancy=abs(normalized - kappa_ref) if math.isfinite(kappa_ref) else float("nan"),
        contour_points_used=outer.points_used + inner.points_used,
        refinement_depth=max(outer.depth, inner.depth),
    )


def ball_zero_count(fam: OperatorFamily, E: complex, n: int, shift: int, z0: complex,
                    r: float, kind: str = "dirichlet", initial_points: int = 64) -> int:
    """Zeros of z -> det(e^{2pi i shift omega} z, E) inside B(z0, r)."""
    g = det_point_function(fam, E, n, kind, shift=shift)
    return winding_number(g, r, center=z0, initial_points=initial_points).value


def locate_ball_zeros(g, center: complex, radius: float, count: int,
                      initial_points: int = 512, refine_rounds: int = 3) -> np.ndarray:
    """Zeros inside the circle via power-sum contour moments.

    p_m = (1/2pi i) oint z^m dlog g recovers the power sums of the enclosed
    zeros; Newton's identities turn them into a monic polynomial.  Each root
    is then polished by re-running the moment on a shrinking circle around it.
    """
    if count == 0:
        return np.empty(0, dtype=complex)

    def moments(cen, rad, m_max, pts):
        ts = np.arange(pts) / pts
        z = cen + rad * np.exp(2j * np.pi * ts)
        lm, ph = _values_as_logmag_phase(g(z))
        if np.any(~np.isfinite(lm)):
            raise ContourDegenerateError("zero on moment contour", radius=rad)
        dlog = np.diff(lm, append=lm[0]) + 1j * np.angle(np.roll(ph, -1) / ph)
        z_mid = cen + rad * np.exp(2j * np.pi * (ts + 0.5 / pts))
        return np.array([np.sum(z_mid**m * dlog) / (2j * np.pi) for m in range(1, m_max + 1)])

    p = moments(center, radius, count, initial_points)
    e = np.zeros(count + 1, dtype=complex)
    e[0] = 1.0
    for k in range(1, count + 1):
        acc = 0j
        for i in range(1, k + 1):
            acc += (-1) ** (i - 1) * e[k - i] * p[i - 1]
        e[k] = acc / k
    coeffs = np.array([(-1) ** k * e[k] for k in range(count + 1)])
    roots = np.roots(coeffs)

    for round_i in range(refine_rounds):
        rho = radius * (0.08 * 0.25**round_i)
        polished = []
        for z_hat in roots:
            try:
                local = winding_number(g, rho, center=z_hat, initial_points=64).value
                if local < 1:
                    polished.append(z_hat)
                    continue
                p1 = moments(z_hat, rho, 1, 256)[0]
                polished.append(p1 / local)
            except ContourDegenerateError:
                polished.append(z_hat)
        roots = np.array(polished)
    return roots


@dataclass(frozen=True)
class ShiftSearchResult:
    n: int
    kind: str
    z0: complex
    r: float
    k: int
    count: int
    ring_index: int
    accept_radius: float
    zeros: tuple
    shifts_tested: int


def default_search_radius(n: int, exponent: float = 1.5,
                          clamp: tuple = (1e-4, 1e-2)) -> float:
    """r_n = e^{-(log n)^exponent}, clamped so desk-scale contours resolve."""
    return float(np.clip(math.exp(-math.log(n) ** exponent), *clamp))


def local_shift_search(fam: OperatorFamily, E: complex, n: int, z0: complex,
                       r: float | None = None, eps_margin: float = 0.1,
                       kappa_cap: int = 2, kind: str = "dirichlet") -> ShiftSearchResult:
    """Find a shift k with at most kappa_cap determinant zeros near z0.

    Scans k = 0, +-1, +-2, ... within |k| < (1 - eps_margin) n/2, accepting
    the first shift whose count inside B(z0, 4(kappa_cap+2) r) stays at or
    below kappa_cap.  A zero-free ring B(4(C0+1)r) \\ B(4 C0 r) then exists
    for some C0 <= kappa_cap + 1 by pigeonhole; its inner-ball zeros are
    located and returned.
    """
    if r is None:
        r = default_search_radius(n)
    k_limit = int(math.ceil((1 - eps_margin) * n / 2)) - 1
    if k_limit < 0:
        raise ValueError("scan window empty; n too small for eps_margin")
    sep = np.array([circle_norm(m * fam.omega.omega) for m in range(1, 2 * k_limit + 1)])
    if sep.size and float(np.min(sep)) <= 2 * r:
        raise ValueError(
            f"shifted balls overlap: min ||m omega|| = {float(np.min(sep)):.3e} <= 2r = {2 * r:.3e}"
        )
    accept_radius = 4 * (kappa_cap + 2) * r
    g_cache: dict[int, object] = {}

    def counted(shift, radius):
        if shift not in g_cache:
            g_cache[shift] = det_point_function(fam, E, n, kind, shift=shift)
        return _winding_with_jitter(g_cache[shift], radius, center=z0, initial_points=64).value

    shifts = [0]
    for k in range(1, k_limit + 1):
        shifts.extend([k, -k])
    tested = 0
    for k in shifts:
        tested += 1
        try:
            big = counted(k, accept_radius)
        except ContourDegenerateError:
            continue
        if not 0 <= big <= kappa_cap:
            continue
        ring_counts = {}
        for c in range(1, kappa_cap + 3):
            try:
                ring_counts[c] = counted(k, 4 * c * r)
            except ContourDegenerateError:
                ring_counts[c] = None
        for c0 in range(1, kappa_cap + 2):
            lo, hi = ring_counts.get(c0), ring_counts.get(c0 + 1)
            if lo is None or hi is None or lo != hi:
                continue
            zeros = locate_ball_zeros(g_cache[k], z0, 4 * c0 * r, lo)
            return ShiftSearchResult(
                n=n, kind=kind, z0=complex(z0), r=float(r), k=int(k), count=int(lo),
                ring_index=int(c0), accept_radius=float(accept_radius),
                zeros=tuple(complex(z) for z in zeros), shifts_tested=tested,
            )
    raise LemmaViolationReport(
        f"no shift with <= {kappa_cap} zeros in B(z0, {accept_radius:.2e}) "
        f"within |k| <= {k_limit}",
        scanned=shifts,
    )


@dataclass(frozen=True)
class FactorizedBoundReport:
    n: int
    samples: int
    min_value: float
    threshold: float
    l_top: float
    passed: bool


def factorized_lower_bound_check(fam: OperatorFamily, E: complex, n: int,
                                 result: ShiftSearchResult, sample_count: int = 200,
                                 rng=None, grid: int = 500,
                                 slack_per_n: float = 0.1) -> FactorizedBoundReport:
    """Spot-check log|D_n(e^{2pi i k omega} z)| >= n L(E,n) + sum_j log|z - z_j| - slack.

    Samples z uniformly over B(z0, (4 C0 + 3) r), staying clear of the located
    zeros (the log factors absorb them in exact arithmetic but not at a
    sampled point's floating floor).  Scalar families only: the factorized
    form divides by a product over scalar zeros.
    """
    if fam.d != 1:
        raise ValueError("factorized bound applies to scalar (d=1) families")
    from .lyapunov import finite_scale_le

    l_top = finite_scale_le(fam, E, 0.0, n, grid).L(1)
    g = det_point_function(fam, E, n, result.kind, shift=result.k)
    zeros = np.array(result.zeros, dtype=complex)
    rng = np.random.default_rng(rng)
    rad = (4 * result.ring_index + 3) * result.r
    samples = []
    while len(samples) < sample_count:
        batch = sample_count - len(samples)
        rho = rad * np.sqrt(rng.random(batch))
        ang = rng.random(batch)
        z = result.z0 + rho * np.exp(2j * np.pi * ang)
        if zeros.size:
            dist = np.min(np.abs(z[:, None] - zeros[None, :]), axis=1)
            z = z[dist > 1e-3 * result.r]
        samples.extend(z.tolist())
    z = np.array(samples[:sample_count])
    lm, _ = _values_as_logmag_phase(g(z))
    correction = np.zeros(z.shape)
    if zeros.size:
        correction = np.sum(np.log(np.abs(z[:, None] - zeros[None, :])), axis=1)
    values = lm - n * l_top - correction
    min_value = float(np.min(values))
    threshold = -slack_per_n * n
    return FactorizedBoundReport(
        n=n, samples=sample_count, min_value=min_value, threshold=threshold,
        l_top=l_top, passed=min_value >= threshold,
    )


def eta_stability_check(fam: OperatorFamily, E: complex, eta: float, n: int,
                        result: ShiftSearchResult) -> tuple:
    """Do the C0-ring circle counts survive an energy perturbation E -> E + i eta?"""
    counts = {}
    for label, radius in (("inner", 4 * result.ring_index * result.r),
                          ("outer", 4 * (result.ring_index + 1) * result.r)):
        g0 = det_point_function(fam, E, n, result.kind, shift=result.k)
        g1 = det_point_function(fam, E + 1j * eta, n, result.kind, shift=result.k)
        counts[label] = (
            _winding_with_jitter(g0, radius, center=result.z0, initial_points=64).value,
            _winding_with_jitter(g1, radius, center=result.z0, initial_points=64).value,
        )
    equal = all(a == b for a, b in counts.values())
    return equal, counts


def _mode_degree(f) -> int:
    return max((abs(m) for m in f.coefficients), default=0)


def companion_roots(fam: OperatorFamily, E: complex, n: int, kind: str = "dirichlet"):
    """All zeros of the determinant's Laurent polynomial, via FFT + companion matrix.

    Circle samples are normalized by the contour's max log before the FFT,
    so only the relative coefficient sizes survive (np.roots is scale-free).
    Returns (roots, pole_order) where pole_order counts the trimmed trailing
    (most negative degree) coefficients.
    """
    degree_cap = _degree_cap(fam, n)
    size = 256
    while size < 2 * degree_cap + 2:
        size *= 2
    g = det_point_function(fam, E, n, kind)
    ts = np.arange(size) / size
    lm, ph = _values_as_logmag_phase(g(np.exp(2j * np.pi * ts)))
    vals = np.exp(lm - np.max(lm)) * ph
    c = np.fft.fft(vals) / size
    # degrees -cap..cap wrap around the FFT index ring
    degrees = np.arange(-degree_cap, degree_cap + 1)
    coeffs = c[degrees % size]
    keep = np.abs(coeffs) > 1e-13 * np.max(np.abs(coeffs))
    if not np.any(keep):
        return np.empty(0, dtype=complex), 0
    lo = int(np.argmax(keep))
    hi = int(len(keep) - np.argmax(keep[::-1]) - 1)
    trimmed = coeffs[lo:hi + 1]
    pole_order = -int(degrees[lo])
    if trimmed.size < 2:
        return np.empty(0, dtype=complex), pole_order
    return np.roots(trimmed[::-1]), pole_order
