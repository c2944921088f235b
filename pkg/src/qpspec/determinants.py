"""Finite-volume operators, log-scaled determinants, minors, Green entries.

Every determinant is carried as (log-magnitude, unit phase): |D_n| grows like
e^{nL} and overflows doubles near n ~ 700/L, while the Green/Cramer quotients
of interest stay moderate.  An exact pivot magnitude below 1e-300 becomes the
singularity sentinel log_mag = -inf rather than an exception, so zero-search
code can bracket through singular energies.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .errors import SingularEnergyError
from .family import OperatorFamily, det_b_log_average
from .sampling import Phase, eval_sampling_grid, eval_star_grid

_PIVOT_FLOOR = 1e-300
_DENSE_CAP = 6000


@dataclass(frozen=True)
class LogDet:
    log_mag: float
    phase_unit: complex

    @classmethod
    def from_value(cls, z: complex) -> "LogDet":
        z = complex(z)
        mag = abs(z)
        if mag < _PIVOT_FLOOR:
            return cls(-math.inf, 1.0 + 0j)
        return cls(math.log(mag), z / mag)

    @property
    def is_singular(self) -> bool:
        return self.log_mag == -math.inf

    def value(self) -> complex:
        if self.is_singular:
            return 0.0 + 0j
        return math.exp(self.log_mag) * self.phase_unit

    def mul(self, other: "LogDet") -> "LogDet":
        return LogDet(self.log_mag + other.log_mag, self.phase_unit * other.phase_unit)

    def div(self, other: "LogDet") -> "LogDet":
        if other.is_singular:
            raise SingularEnergyError("division by a singular determinant")
        return LogDet(self.log_mag - other.log_mag, self.phase_unit / other.phase_unit)


LOGDET_ONE = LogDet(0.0, 1.0 + 0j)


def _accumulate_diag(diag: np.ndarray, swaps: int) -> LogDet:
    mags = np.abs(diag)
    if np.any(mags < _PIVOT_FLOOR):
        return LogDet(-math.inf, 1.0 + 0j)
    log_mag = float(np.sum(np.log(mags)))
    phase = complex(np.prod(diag / mags)) * (-1.0 if swaps % 2 else 1.0)
    phase /= abs(phase)  # renormalize drift from the long product
    return LogDet(log_mag, phase)


def logdet_dense(mat: np.ndarray) -> LogDet:
    """LU with partial pivoting, log-accumulated.  The dense oracle route."""
    mat = np.ascontiguousarray(mat, dtype=complex)
    if mat.shape[0] != mat.shape[1]:
        raise ValueError("matrix must be square")
    lu, piv = sla.lu_factor(mat, check_finite=False)
    swaps = int(np.sum(piv != np.arange(mat.shape[0])))
    return _accumulate_diag(np.diag(lu), swaps)


def logdet_banded(ab: np.ndarray, kl: int, ku: int) -> LogDet:
    """Banded LU (LAPACK gbtrf) with running log accumulation.

    ab is the (2*kl+ku+1, N) band storage of the matrix; after factorization
    U's diagonal sits in row kl+ku and the pivot vector is 1-based.
    """
    lub, ipiv, info = lapack.zgbtrf(ab, kl=kl, ku=ku)
    if info < 0:
        raise ValueError(f"gbtrf: illegal argument {-info}")
    # scipy's wrapper hands back 0-based pivots (unlike raw LAPACK).
    swaps = int(np.sum(ipiv != np.arange(ab.shape[1])))
    return _accumulate_diag(lub[kl + ku, :], swaps)


@dataclass(frozen=True)
class FiniteOperator:
    """An assembled restriction H|_[a,b] (no energy shift applied)."""

    fam: OperatorFamily
    interval: tuple
    boundary: str  # "dirichlet" | "periodic"
    phase: Phase
    diag_blocks: np.ndarray  # (m, d, d), site-ascending
    hop_blocks: np.ndarray  # (m-1, d, d): B at theta+(s+1) omega, s = 0..m-2
    star_blocks: np.ndarray  # same sites, starred continuation
    corner_b: np.ndarray | None = None  # periodic: B(theta + l omega)
    corner_bstar: np.ndarray | None = None

    @property
    def n_blocks(self) -> int:
        return self.diag_blocks.shape[0]

    @property
    def dim(self) -> int:
        return self.n_blocks * self.fam.d

    def position(self, x: int) -> int:
        """Matrix position of scalar operator label x in [a, b].

        Dirichlet ordering is site-ascending; the periodic corner layout lists
        sites in descending order (components inside a block stay ascending).
        """
        a, b = self.interval
        if not a <= x <= b:
            raise IndexError(f"label {x} outside interval {self.interval}")
        d = self.fam.d
        s, c = divmod(x - a, d)
        if self.boundary == "dirichlet":
            return s * d + c
        return (self.n_blocks - 1 - s) * d + c

    def dense(self) -> np.ndarray:
        if self.dim > _DENSE_CAP:
            raise ValueError(f"dense assembly capped at {_DENSE_CAP}, need {self.dim}")
        d, m = self.fam.d, self.n_blocks
        out = np.zeros((self.dim, self.dim), dtype=complex)
        if self.boundary == "dirichlet":
            for s in range(m):
                out[s * d:(s + 1) * d, s * d:(s + 1) * d] = self.diag_blocks[s]
            for s in range(m - 1):
                out[s * d:(s + 1) * d, (s + 1) * d:(s + 2) * d] = self.hop_blocks[s]
                out[(s + 1) * d:(s + 2) * d, s * d:(s + 1) * d] = self.star_blocks[s]
            return out
        # Periodic: block row i holds site m-1-i.
        for i in range(m):
            s = m - 1 - i
            out[i * d:(i + 1) * d, i * d:(i + 1) * d] = self.diag_blocks[s]
        for i in range(m - 1):
            s = m - 1 - i  # row i couples down to site s-1 = row i+1
            out[i * d:(i + 1) * d, (i + 1) * d:(i + 2) * d] = self.star_blocks[s - 1]
            out[(i + 1) * d:(i + 2) * d, i * d:(i + 1) * d] = self.hop_blocks[s - 1]
        out[:d, (m - 1) * d:] += self.corner_b
        out[(m - 1) * d:, :d] += self.corner_bstar
        return out

    def banded_ab(self, energy: complex) -> tuple:
        """(ab, kl, ku) storage of (H - E) for LAPACK gbtrf; Dirichlet only."""
        if self.boundary != "dirichlet":
            raise ValueError("banded storage only for Dirichlet assemblies")
        d, m, n = self.fam.d, self.n_blocks, self.dim
        kl = ku = 2 * d - 1
        ab = np.zeros((2 * kl + ku + 1, n), dtype=complex)

        def put(i_arr, j_arr, vals):
            ab[kl + ku + i_arr - j_arr, j_arr] = vals

        s_idx = np.arange(m)
        for p in range(d):
            for q in range(d):
                i = s_idx * d + p
                j = s_idx * d + q
                vals = self.diag_blocks[:, p, q].copy()
                if p == q:
                    vals = vals - energy
                put(i, j, vals)
        if m > 1:
            h_idx = np.arange(m - 1)
            for p in range(d):
                for q in range(d):
                    put(h_idx * d + p, (h_idx + 1) * d + q, self.hop_blocks[:, p, q])
                    put((h_idx + 1) * d + p, h_idx * d + q, self.star_blocks[:, p, q])
        return ab, kl, ku

    def hermitian_residual(self) -> float:
        res = float(np.max(np.abs(self.diag_blocks - self.diag_blocks.conj().transpose(0, 2, 1))))
        if self.hop_blocks.size:
            res = max(res, float(np.max(np.abs(self.star_blocks - self.hop_blocks.conj().transpose(0, 2, 1)))))
        if self.boundary == "periodic":
            res = max(res, float(np.max(np.abs(self.corner_bstar - self.corner_b.conj().T))))
        return res


def assemble(fam: OperatorFamily, interval, boundary: str, p: Phase) -> FiniteOperator:
    """Assemble H restricted to the scalar interval [a, b].

    Dirichlet follows the site-ascending layout of the operator action;
    periodic uses the descending corner-block layout, with corner blocks
    accumulated onto the off-diagonals when the interval has just two blocks.
    """
    a, b = int(interval[0]), int(interval[1])
    if b < a:
        raise ValueError("empty interval")
    d = fam.d
    length = b - a + 1
    if boundary not in ("dirichlet", "periodic"):
        raise ValueError(f"unknown boundary {boundary!r}")
    if boundary == "periodic" and length < 2 * d:
        raise ValueError("periodic assembly needs at least two blocks")
    if d > 1 or boundary == "periodic":
        if a % d or length % d:
            raise ValueError("interval must be block-aligned for d >= 2 / periodic")
    ell = a // d
    m = length // d
    theta, eps = p.theta, p.eps
    sites = theta + (ell + np.arange(m)) * fam.omega.omega
    diag_blocks = eval_sampling_grid(fam.v, sites, eps)
    hop_sites = theta + (ell + 1 + np.arange(max(m - 1, 0))) * fam.omega.omega
    hop_blocks = eval_sampling_grid(fam.b, hop_sites, eps)
    star_blocks = eval_star_grid(fam.b, hop_sites, eps)
    corner_b = corner_bstar = None
    if boundary == "periodic":
        corner_site = np.array([theta + ell * fam.omega.omega])
        corner_b = eval_sampling_grid(fam.b, corner_site, eps)[0]
        corner_bstar = eval_star_grid(fam.b, corner_site, eps)[0]
    return FiniteOperator(
        fam=fam,
        interval=(a, b),
        boundary=boundary,
        phase=p,
        diag_blocks=diag_blocks,
        hop_blocks=hop_blocks,
        star_blocks=star_blocks,
        corner_b=corner_b,
        corner_bstar=corner_bstar,
    )


def dirichlet_det(fam: OperatorFamily, p: Phase, E: complex, n: int) -> LogDet:
    """D_n = det(H|_[0, n-1 blocks] - E) via banded LU."""
    if n < 1:
        raise ValueError("need n >= 1")
    op = assemble(fam, (0, n * fam.d - 1), "dirichlet", p)
    return logdet_banded(*op.banded_ab(E))


def periodic_block_det(fam: OperatorFamily, p: Phase, E: complex, n: int) -> LogDet:
    """f_n = det(H^p|_[0, nd-1] - E); dense LU (corners break bandedness)."""
    if n < 2:
        raise ValueError("periodic determinant needs n >= 2")
    op = assemble(fam, (0, n * fam.d - 1), "periodic", p)
    mat = op.dense()
    np.fill_diagonal(mat, np.diag(mat) - E)
    return logdet_dense(mat)


def propagator_det_minus_identity(fam: OperatorFamily, E: complex, p: Phase, n: int) -> LogDet:
    """log det(M_n - I) via the characteristic-polynomial expansion.

    det(M - I) = sum_j (-1)^{k-j} tr(wedge_j M); each exterior power comes
    from its own renormalized wedge chain, so every trace is relatively
    accurate at any scale.  Forming M_n and subtracting I instead destroys
    the result once the scale passes ~37 logs: the contracting spectrum of
    the formed product sits below float noise, and n L_1 reaches that already
    at desk sizes (n = 64 for the lambda = 3 almost Mathieu family).
    """
    from .cocycle import as_cocycle, propagate

    k = 2 * fam.d
    chains = propagate(as_cocycle(fam, E), np.array([p.theta]), p.eps, n, wedges=range(1, k + 1))
    log_mags = [0.0]  # j = 0 term: trace of the empty wedge is 1
    phases = [(-1.0 + 0j) ** k]
    for j in range(1, k + 1):
        sm = chains[j]
        tr = complex(np.trace(sm.unit[0]))
        if abs(tr) == 0.0:
            continue
        log_mags.append(float(sm.log_scale[0]) + math.log(abs(tr)))
        phases.append((-1.0 + 0j) ** (k - j) * tr / abs(tr))
    a = np.array(log_mags)
    ph = np.array(phases)
    top = float(np.max(a))
    total = complex(np.sum(ph * np.exp(a - top)))
    if abs(total) < _PIVOT_FLOOR:
        return LogDet(-math.inf, 1.0 + 0j)
    return LogDet(top + math.log(abs(total)), total / abs(total))


def detp_residual(fam: OperatorFamily, p: Phase, E: complex, n: int) -> float:
    """| log|f_n| - log|det(M_n - I)| - sum_j log|det B(theta + j omega)| |.

    Left side via LU on the assembled periodic matrix, right side via the
    scaled propagator chains; the identity holds on the whole strip.
    """
    lhs = periodic_block_det(fam, p, E, n)
    det_part = propagator_det_minus_identity(fam, E, p, n)
    js = p.theta + np.arange(n) * fam.omega.omega
    b_dets = np.linalg.det(eval_sampling_grid(fam.b, js, p.eps))
    if lhs.is_singular or det_part.is_singular or np.any(np.abs(b_dets) < _PIVOT_FLOOR):
        return math.inf
    rhs_log = det_part.log_mag + float(np.sum(np.log(np.abs(b_dets))))
    return abs(lhs.log_mag - rhs_log)


def green_entry_dirichlet(fam: OperatorFamily, p: Phase, E: complex, interval, k: int, j: int,
                          method: str = "auto") -> complex:
    """Entry (k, j) of (H|_[l, m] - E)^{-1}.

    The formula route (d=1, k < j) is the three-determinant quotient with the
    hopping bridge, evaluated in log space; the direct route solves the
    banded system and is the oracle.
    """
    ell, m = int(interval[0]), int(interval[1])
    if not (ell <= k <= m and ell <= j <= m):
        raise IndexError("entry indices outside interval")
    if method == "auto":
        method = "formula" if (fam.d == 1 and k < j) else "direct"
    if method == "direct":
        op = assemble(fam, (ell, m), "dirichlet", p)
        ab, kl, ku = op.banded_ab(E)
        rhs = np.zeros(op.dim, dtype=complex)
        rhs[op.position(j)] = 1.0
        lub, ipiv, info = lapack.zgbtrf(ab, kl=kl, ku=ku)
        if info > 0:
            raise SingularEnergyError("finite operator singular at this energy")
        sol, info = lapack.zgbtrs(lub, kl, ku, rhs, ipiv)
        return complex(sol[op.position(k)])
    if fam.d != 1:
        raise ValueError("formula route only for scalar (d=1) families")
    if not k < j:
        raise ValueError("formula route needs k < j; use method='direct'")
    omega = fam.omega.omega
    denom = dirichlet_det(fam, Phase(p.theta + ell * omega, p.eps), E, m - ell + 1)
    if denom.is_singular:
        raise SingularEnergyError("denominator determinant vanished")
    left = dirichlet_det(fam, Phase(p.theta + ell * omega, p.eps), E, k - ell) if k > ell else LOGDET_ONE
    right = dirichlet_det(fam, Phase(p.theta + (j + 1) * omega, p.eps), E, m - j) if j < m else LOGDET_ONE
    bridge_sites = p.theta + (np.arange(k, j) + 1) * omega
    bridge_vals = eval_sampling_grid(fam.b, bridge_sites, p.eps)[:, 0, 0]
    bridge = LOGDET_ONE
    for val in bridge_vals:
        bridge = bridge.mul(LogDet.from_value(val))
    sign = -1.0 if (k + j) % 2 else 1.0
    num = left.mul(bridge).mul(right)
    out = num.div(denom)
    return sign * complex(cmath.exp(complex(out.log_mag, 0)) * out.phase_unit) if not num.is_singular else 0j


def minor_mu(fam: OperatorFamily, p: Phase, E: complex, interval, x: int, y: int) -> LogDet:
    """Determinant of (H^p|interval - E) with row of label x, column of label y deleted.

    Labels are scalar operator indices; they are mapped into the descending
    periodic layout before deletion.  Satisfies the shift covariance
    mu_{[ld, md-1], x, y}(theta) = mu_{[0, (m-l)d-1], x-ld, y-ld}(theta + l omega).
    """
    op = assemble(fam, tuple(interval), "periodic", p)
    mat = op.dense()
    np.fill_diagonal(mat, np.diag(mat) - E)
    keep = np.ones(op.dim, dtype=bool)
    rows = keep.copy()
    cols = keep.copy()
    rows[op.position(x)] = False
    cols[op.position(y)] = False
    return logdet_dense(mat[np.ix_(rows, cols)])


def green_entry_periodic(fam: OperatorFamily, p: Phase, E: complex, interval, k: int, j: int,
                         method: str = "auto") -> complex:
    """Entry (k, j) of the periodic-boundary Green's function.

    Formula route: Cramer minor with the cofactor sign; direct route inverts
    the assembled matrix.
    """
    op = assemble(fam, tuple(interval), "periodic", p)
    if method == "auto":
        method = "formula"
    if method == "direct":
        mat = op.dense()
        np.fill_diagonal(mat, np.diag(mat) - E)
        rhs = np.zeros(op.dim, dtype=complex)
        rhs[op.position(j)] = 1.0
        sol = sla.solve(mat, rhs)
        return complex(sol[op.position(k)])
    ell = interval[0] // fam.d
    n = (interval[1] - interval[0] + 1) // fam.d
    denom = periodic_block_det(fam, Phase(p.theta + ell * fam.omega.omega, p.eps), E, n)
    if denom.is_singular:
        raise SingularEnergyError("periodic determinant vanished")
    mu = minor_mu(fam, p, E, interval, j, k)  # deleting row of j, column of k
    sign = -1.0 if (op.position(k) + op.position(j)) % 2 else 1.0
    out = mu.div(denom)
    if mu.is_singular:
        return 0j
    return sign * complex(cmath.exp(complex(out.log_mag, 0)) * out.phase_unit)


def dirichlet_values(fam: OperatorFamily, E: complex, n: int, w: np.ndarray):
    """(log|D_n|, unit phase) at complex torus points w, scalar families.

    Three-term recursion D_j = (v_{j-1}-E) D_{j-1} - b_{j-1} b^{(*)}_{j-1} D_{j-2}
    with a per-point scale factored out each step; a dead point (exact zero
    along the way) keeps a -inf log and a placeholder phase.
    """
    if fam.d != 1:
        raise ValueError("scalar recursion needs d=1; use det_values_grid")
    w = np.asarray(w)
    omega = fam.omega.omega
    sites = w[None, :] + np.arange(n)[:, None] * omega
    v = eval_sampling_grid(fam.v, sites.ravel(), 0.0)[:, 0, 0].reshape(n, -1)
    hop_sites = sites[1:].ravel() if n > 1 else np.empty(0, dtype=complex)
    b = eval_sampling_grid(fam.b, hop_sites, 0.0)[:, 0, 0].reshape(max(n - 1, 0), w.size)
    bs = eval_star_grid(fam.b, hop_sites, 0.0)[:, 0, 0].reshape(max(n - 1, 0), w.size)

    a = v[0] - E
    prev = np.ones_like(a)
    scale = np.zeros(w.shape, dtype=float)
    for j in range(1, n):
        a, prev = (v[j] - E) * a - b[j - 1] * bs[j - 1] * prev, a
        m = np.maximum(np.abs(a), np.abs(prev))
        alive = m > 0
        np.divide(a, m, out=a, where=alive)
        np.divide(prev, m, out=prev, where=alive)
        scale += np.where(alive, np.log(np.where(alive, m, 1.0)), -745.0)
    mag = np.abs(a)
    alive = mag > 0
    lm = np.where(alive, scale + np.log(np.where(alive, mag, 1.0)), -math.inf)
    ph = np.where(alive, a / np.where(alive, mag, 1.0), 1.0 + 0j)
    return lm, ph


def det_values_grid(fam: OperatorFamily, E: complex, n: int, kind: str, w: np.ndarray):
    """(log-magnitude, unit phase) of the chosen determinant at each torus point."""
    if kind == "dirichlet" and fam.d == 1:
        return dirichlet_values(fam, E, n, w)
    w = np.asarray(w)
    lm = np.empty(w.shape, dtype=float)
    ph = np.empty(w.shape, dtype=complex)
    interval = (0, n * fam.d - 1)
    for i, wi in enumerate(w.ravel()):
        op = assemble(fam, interval, kind, Phase(wi, 0.0))
        if kind == "dirichlet":
            ld = logdet_banded(*op.banded_ab(E))
        else:
            mat = op.dense()
            np.fill_diagonal(mat, np.diag(mat) - E)
            ld = logdet_dense(mat)
        lm.flat[i], ph.flat[i] = ld.log_mag, ld.phase_unit
    return lm, ph


@dataclass(frozen=True)
class MinorBoundReport:
    n: int
    trials: int
    max_slack_offdiag: float
    max_slack_diag: float
    fitted_constant: float
    l_sum_d: float
    l_sum_dm1: float
    log_det_b_avg: float


def minor_bound_check(fam: OperatorFamily, E, n: int, trials: int, rng=None,
                      grid: int = 500, positivity_nu: float = 0.05) -> MinorBoundReport:
    """Sample admissible minors of the periodic matrix against their growth bounds.

    Off-diagonal samples follow the hypothesis 3d <= y <= (n-1)d - 1 with x in
    the first or last block; the bound's main term is
    n<log|det B|> + logaddexp(l L^{d-1} + (n-l) L^d, l L^d + (n-l) L^{d-1}).
    Diagonal samples use x = y in [2d, n(d)-2d-1] against n(L^d + <log|det B|>).
    Slack = log|mu| minus the main term, with empirical n-scale exponents; the
    lemma constants are reported as a fitted constant, not asserted.
    """
    from .lyapunov import finite_scale_le

    rng = np.random.default_rng(rng)
    d = fam.d
    exps = finite_scale_le(fam, E, 0.0, n, grid)
    l_d = exps.L_sum(d)
    l_dm1 = exps.L_sum(d - 1) if d > 1 else 0.0
    if exps.L(d) <= positivity_nu:
        import warnings

        warnings.warn(f"L_d(n)={exps.L(d):.4g} at or below positivity gate {positivity_nu}", stacklevel=2)
    logdetb = det_b_log_average(fam, 0.0, grid)
    interval = (0, n * d - 1)
    worst_off = -math.inf
    worst_diag = -math.inf
    for _ in range(trials):
        theta = float(rng.random())
        p = Phase(theta, 0.0)
        y = int(rng.integers(3 * d, (n - 1) * d))
        x_choices = list(range(d)) + list(range((n - 1) * d, n * d))
        x = int(x_choices[rng.integers(len(x_choices))])
        ell_blk = y // d
        mu = minor_mu(fam, p, E, interval, x, y)
        main = n * logdetb + np.logaddexp(
            ell_blk * l_dm1 * 1.0 + (n - ell_blk) * l_d, ell_blk * l_d + (n - ell_blk) * l_dm1
        )
        if not mu.is_singular:
            worst_off = max(worst_off, mu.log_mag - float(main))
        xy = int(rng.integers(2 * d, n * d - 2 * d))
        mu2 = minor_mu(fam, p, E, interval, xy, xy)
        if not mu2.is_singular:
            worst_diag = max(worst_diag, mu2.log_mag - n * (l_d + logdetb))
    return MinorBoundReport(
        n=n,
        trials=trials,
        max_slack_offdiag=worst_off,
        max_slack_diag=worst_diag,
        fitted_constant=math.exp(max(worst_off, 0.0)),
        l_sum_d=l_d,
        l_sum_dm1=l_dm1,
        log_det_b_avg=logdetb,
    )
