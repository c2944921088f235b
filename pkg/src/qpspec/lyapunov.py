"""Finite-scale Lyapunov exponents, complexified profiles, acceleration.

The j-th exponent sums are evaluated through exterior-power products:
L^j(n) = (1/n) <log ||wedge_j M_n||>.  Each wedge order is propagated as its
own renormalized product, so only the TOP singular value of each product is
ever needed.  Reading deep singular values off one SVD of M_n loses all
absolute accuracy once n*(L_1 - L_j) passes ~30 (double-precision floor), so
that direct route is exposed only as a cross-check, valid at small n or for
families with nearly equal exponents.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .cocycle import ScaledMatrix, as_cocycle, exterior_power, propagate, _cocycle_omega
from .errors import StripViolationError


def _grid_thetas(grid: int) -> np.ndarray:
    if grid < 1:
        raise ValueError("grid must be >= 1")
    return np.arange(grid) / grid


@dataclass(frozen=True)
class ExponentSet:
    """All finite-scale exponents of one (E, eps, n, grid) evaluation.

    l_sums[j-1] = L^j(n) from the wedge route; singles are differences.
    sv_l_sums is the singular-value route on the full product (cross-check).
    """

    n: int
    eps: float
    grid: int
    l_sums: np.ndarray
    sv_l_sums: np.ndarray

    @property
    def singles(self) -> np.ndarray:
        return np.diff(self.l_sums, prepend=0.0)

    def L(self, j: int) -> float:
        return float(self.singles[j - 1])

    def L_sum(self, j: int) -> float:
        return float(self.l_sums[j - 1])


def finite_scale_le(fam, E, eps: float, n: int, grid: int) -> ExponentSet:
    """Grid-averaged exponents L_j(n), L^j(n) at phase offset i*eps."""
    cocycle = as_cocycle(fam, E)
    k = cocycle.k
    thetas = _grid_thetas(grid)
    products = propagate(cocycle, thetas, eps, n, wedges=range(1, k + 1))
    l_sums = np.array([np.mean(products[j].log_norm()) / n for j in range(1, k + 1)])
    sv = products[1].log_singular_values()  # (grid, k), descending
    sv_l_sums = np.mean(np.cumsum(sv, axis=-1), axis=0) / n
    return ExponentSet(n=n, eps=eps, grid=grid, l_sums=l_sums, sv_l_sums=sv_l_sums)


@dataclass(frozen=True)
class LyapunovProfile:
    n: int
    grid_size: int
    eps_values: list
    l_sums: np.ndarray  # (n_eps, k): L^j
    dim: int

    @property
    def singles(self) -> np.ndarray:
        return np.diff(self.l_sums, axis=1, prepend=0.0)

    def L(self, eps_index: int, j: int) -> float:
        return float(self.singles[eps_index, j - 1])

    def L_sum(self, eps_index: int, j: int) -> float:
        return float(self.l_sums[eps_index, j - 1])

    def duality_defect(self) -> float:
        """max_j |L_j + L_{k+1-j}| at each eps; meaningful at eps=0, real E."""
        s = self.singles
        return float(np.max(np.abs(s + s[:, ::-1])))


def lyapunov_profile(fam, E, eps_values, n: int, grid: int) -> LyapunovProfile:
    rows = [finite_scale_le(fam, E, eps, n, grid).l_sums for eps in eps_values]
    k = len(rows[0])
    return LyapunovProfile(
        n=n, grid_size=grid, eps_values=list(eps_values), l_sums=np.array(rows), dim=k // 2
    )


@dataclass(frozen=True)
class AccelerationEstimate:
    j: int
    kappa_hat: float
    kappa_rounded: int
    slope_window: tuple
    residual: float
    degraded: bool = False


def acceleration(fam, E, eps0: float, n: int, grid: int, h: float = 0.005,
                 residual_threshold: float = 0.01) -> list:
    """One-sided slope of eps -> L^j_eps(n) over {eps0+h, eps0+2h, eps0+3h}.

    The slope normalized by 2*pi estimates the integer acceleration; the
    linear-fit residual flags windows that straddle a quantization breakpoint.
    """
    cocycle = as_cocycle(fam, E)
    delta = getattr(getattr(cocycle, "fam", None), "delta", np.inf)
    if eps0 + 3 * h > delta + 1e-15:
        raise StripViolationError(eps0 + 3 * h, delta)
    eps_pts = np.array([eps0 + h, eps0 + 2 * h, eps0 + 3 * h])
    table = np.array([finite_scale_le(fam, E, e, n, grid).l_sums for e in eps_pts])
    out = []
    for jm1 in range(table.shape[1]):
        coeffs = np.polyfit(eps_pts, table[:, jm1], 1)
        fit = np.polyval(coeffs, eps_pts)
        residual = float(np.max(np.abs(fit - table[:, jm1])))
        kappa_hat = float(coeffs[0] / (2 * np.pi))
        out.append(
            AccelerationEstimate(
                j=jm1 + 1,
                kappa_hat=kappa_hat,
                kappa_rounded=int(round(kappa_hat)),
                slope_window=(float(eps_pts[0]), float(eps_pts[-1])),
                residual=residual,
                degraded=residual > residual_threshold,
            )
        )
    return out


def propagate_checkpoints(cocycle, thetas, eps: float, checkpoints, wedges=(1,)) -> dict:
    """One running product per wedge order, sampling <log norm>/n at checkpoints.

    Returns {j: {n: value}} with value = (1/n) <log ||wedge_j M_n||>.
    """
    checkpoints = list(checkpoints)
    omega = _cocycle_omega(cocycle)
    acc: dict[int, ScaledMatrix] = {}
    out: dict[int, dict] = {j: {} for j in wedges}
    step = 0
    for target in checkpoints:
        while step < target:
            factor = cocycle.factor_grid(thetas + step * omega, eps)
            for j in wedges:
                sm = ScaledMatrix.from_matrix(exterior_power(factor, j) if j > 1 else factor)
                acc[j] = sm if step == 0 else sm.matmul(acc[j])
            step += 1
        for j in wedges:
            out[j][target] = float(np.mean(acc[j].log_norm()) / target)
    return out


def convergence_gap(fam, E, eps: float, n_list, grid: int, positivity_nu: float = 0.0) -> dict:
    """Table n -> L^d_eps(n) - L^d_eps(n_max) along one running product."""
    n_list = list(n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be strictly ascending")
    cocycle = as_cocycle(fam, E)
    d = cocycle.k // 2
    thetas = _grid_thetas(grid)
    wedges = (d,) if d == 1 else (d - 1, d)
    table = propagate_checkpoints(cocycle, thetas, eps, n_list, wedges)
    n_max = n_list[-1]
    l_d_single = table[d][n_max] - (table[d - 1][n_max] if d > 1 else 0.0)
    if l_d_single <= positivity_nu:
        warnings.warn(
            f"L_d(n_max)={l_d_single:.4g} not above positivity threshold {positivity_nu}",
            stacklevel=2,
        )
    return {n: table[d][n] - table[d][n_max] for n in n_list}


def uniform_upper_defect(fam, E, eps: float, n: int, grid: int, n_ref: int | None = None) -> float:
    """max over the grid of (1/n) log||wedge_d M_n|| - L^d_eps(n_ref)."""
    cocycle = as_cocycle(fam, E)
    d = cocycle.k // 2
    if n_ref is None:
        n_ref = 10 * n
    thetas = _grid_thetas(grid)
    prod = propagate(cocycle, thetas, eps, n, wedges=(d,))[d]
    pointwise = prod.log_norm() / n
    ref = finite_scale_le(fam, E, eps, n_ref, grid).L_sum(d)
    return float(np.max(pointwise) - ref)


def lipschitz_eps_constant(fam, E, eps_grid, n: int, grid: int) -> float:
    """Empirical Lipschitz constant of eps -> L^j_eps(n) over an eps grid."""
    eps_grid = np.asarray(list(eps_grid), dtype=float)
    if eps_grid.size < 2:
        raise ValueError("need at least two eps points")
    table = np.array([finite_scale_le(fam, E, e, n, grid).l_sums for e in eps_grid])
    diffs = np.abs(np.diff(table, axis=0))
    steps = np.abs(np.diff(eps_grid))[:, None]
    return float(np.max(diffs / steps))
