"""Transfer matrices, log-scaled propagator products, exterior powers.

Propagators grow like e^{nL}; raw products overflow doubles near n ~ 700/L,
so every product step renormalizes into a (unit, log_scale) pair.  All core
routines are vectorized over a leading grid axis of phases.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import IllConditionedBlockError, StripViolationError
from .family import OperatorFamily
from .sampling import Phase, eval_sampling_grid, eval_star_grid


def spectral_norms(mats: np.ndarray) -> np.ndarray:
    """Largest singular value along the last two axes."""
    return np.linalg.svd(mats, compute_uv=False)[..., 0]


@dataclass(frozen=True)
class SymplecticForm:
    """The standard form Omega with identity off-diagonal d x d blocks."""

    d: int

    @property
    def matrix(self) -> np.ndarray:
        eye = np.eye(self.d)
        zero = np.zeros((self.d, self.d))
        return np.block([[zero, eye], [-eye, zero]])


@dataclass(frozen=True)
class ScaledMatrix:
    """exp(log_scale) * unit, with ||unit|| kept at 1 after every product.

    Supports a leading batch axis: unit (..., k, k), log_scale (...).
    """

    unit: np.ndarray
    log_scale: np.ndarray

    @classmethod
    def from_matrix(cls, mat) -> "ScaledMatrix":
        mat = np.asarray(mat, dtype=complex)
        norms = spectral_norms(mat)
        if np.any(norms == 0.0):
            raise ValueError("cannot scale an exactly zero matrix")
        unit = mat / norms[..., None, None]
        return cls(unit=unit, log_scale=np.log(norms))

    def matmul(self, other: "ScaledMatrix") -> "ScaledMatrix":
        prod = self.unit @ other.unit
        norms = spectral_norms(prod)
        if np.any(norms == 0.0):
            raise ValueError("product collapsed to zero; factors not invertible")
        return ScaledMatrix(
            unit=prod / norms[..., None, None],
            log_scale=self.log_scale + other.log_scale + np.log(norms),
        )

    def represented(self) -> np.ndarray:
        """The matrix itself; overflows for log_scale beyond ~709."""
        return np.exp(self.log_scale)[..., None, None] * self.unit

    def log_norm(self) -> np.ndarray:
        """log of the spectral norm of the represented matrix."""
        return self.log_scale + np.log(spectral_norms(self.unit))

    def log_singular_values(self) -> np.ndarray:
        """log sigma_j, descending.  Small sigma_j of the unit lose absolute
        accuracy below ~1e-16 * sigma_1; callers needing deep singular values
        at large n should go through exterior powers instead."""
        sv = np.linalg.svd(self.unit, compute_uv=False)
        with np.errstate(divide="ignore"):
            return self.log_scale[..., None] + np.log(sv)

    def single(self) -> "ScaledMatrix":
        """Strip a singleton batch axis."""
        return ScaledMatrix(unit=self.unit[0], log_scale=float(self.log_scale[0]))


def _batched_minor_dets(sub: np.ndarray) -> np.ndarray:
    """Determinants over the trailing (j, j) axes; closed forms for j <= 3."""
    j = sub.shape[-1]
    if j == 2:
        return sub[..., 0, 0] * sub[..., 1, 1] - sub[..., 0, 1] * sub[..., 1, 0]
    if j == 3:
        a, b, c = sub[..., 0, 0], sub[..., 0, 1], sub[..., 0, 2]
        d, e, f = sub[..., 1, 0], sub[..., 1, 1], sub[..., 1, 2]
        g, h, i = sub[..., 2, 0], sub[..., 2, 1], sub[..., 2, 2]
        return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)
    return np.linalg.det(sub)


def exterior_power(mat: np.ndarray, j: int) -> np.ndarray:
    """j-th exterior power: entries are j x j minors on lexicographic subsets."""
    mat = np.asarray(mat)
    k = mat.shape[-1]
    if mat.shape[-2] != k:
        raise ValueError("matrix must be square")
    if not 1 <= j <= k:
        raise ValueError(f"wedge order {j} outside 1..{k}")
    if j == 1:
        return mat.copy()
    subsets = np.array(list(itertools.combinations(range(k), j)))
    rows = subsets[:, None, :, None]
    cols = subsets[None, :, None, :]
    sub = mat[..., rows, cols]  # (..., C, C, j, j)
    return _batched_minor_dets(sub)


def _complement_signs(k: int, j: int) -> tuple:
    """Complement permutation and parity signs linking wedge j to wedge k-j.

    Jacobi's minor identity gives, for invertible M,
        wedge_{k-j}(M) = det(M) * (D P) wedge_j(M^{-1})^T (D P)^T
    with P the subset-complement permutation and D the diagonal of
    (-1)^{sum of subset indices}.
    """
    low = list(itertools.combinations(range(k), j))
    high = list(itertools.combinations(range(k), k - j))
    idx_of_low = {s: i for i, s in enumerate(low)}
    perm = np.array([idx_of_low[tuple(sorted(set(range(k)) - set(s)))] for s in high])
    signs = np.array([(-1) ** sum(s) for s in high], dtype=float)
    return perm, signs


def high_wedge_from_inverse(mat: np.ndarray, j: int) -> np.ndarray:
    """wedge_j via the complementary minors of the inverse; needs invertibility.

    Cheaper than direct minors when j > k/2, and exactly multiplicative in
    the same sense, so chains built from it stay consistent.
    """
    mat = np.asarray(mat)
    k = mat.shape[-1]
    det = np.linalg.det(mat)
    if j == k:
        return det[..., None, None]
    low = exterior_power(np.linalg.inv(mat), k - j)
    perm, signs = _complement_signs(k, k - j)
    mapped = low.swapaxes(-1, -2)[..., perm[:, None], perm[None, :]]
    return det[..., None, None] * signs[:, None] * signs[None, :] * mapped


def symplectic_defect(mat: np.ndarray) -> float:
    """Operator norm of M* Omega M - Omega; zero iff M is conjugate-symplectic."""
    mat = np.asarray(mat, dtype=complex)
    k = mat.shape[-1]
    if k % 2 != 0 or mat.shape[-2] != k:
        raise ValueError("matrix must be square of even dimension")
    omega = SymplecticForm(k // 2).matrix
    defect = mat.conj().T @ omega @ mat - omega
    return float(np.linalg.norm(defect, ord=2))


class TransferCocycle:
    """Factor evaluator theta -> M_E(theta) for an operator family."""

    def __init__(self, fam: OperatorFamily, E: complex):
        self.fam = fam
        self.E = E
        self.k = 2 * fam.d

    def factor_grid(self, thetas: np.ndarray, eps: float) -> np.ndarray:
        fam, d = self.fam, self.fam.d
        thetas = np.atleast_1d(np.asarray(thetas))
        im_max = abs(eps) + (float(np.max(np.abs(thetas.imag))) if np.iscomplexobj(thetas) else 0.0)
        if im_max > fam.delta + 1e-15:
            raise StripViolationError(im_max, fam.delta)
        b = eval_sampling_grid(fam.b, thetas, eps)
        sv = np.linalg.svd(b, compute_uv=False)
        with np.errstate(divide="ignore"):
            cond = sv[..., 0] / sv[..., -1]
        worst = int(np.argmax(cond))
        if not np.all(cond <= fam.cond_cap):
            raise IllConditionedBlockError(float(cond[worst]), theta=float(thetas[worst]))
        b_inv = np.linalg.inv(b)
        b_star = eval_star_grid(fam.b, thetas, eps)
        v = eval_sampling_grid(fam.v, thetas, eps)
        ev = self.E * np.eye(d) - v
        out = np.zeros((thetas.size, 2 * d, 2 * d), dtype=complex)
        out[:, :d, :d] = ev @ b_inv
        out[:, :d, d:] = -b_star
        out[:, d:, :d] = b_inv
        return out


class ConstantCocycle:
    """A theta-independent cocycle given by a fixed matrix."""

    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=complex)
        self.k = self.matrix.shape[-1]
        self.omega_value = 0.0

    def factor_grid(self, thetas: np.ndarray, eps: float) -> np.ndarray:
        return np.broadcast_to(self.matrix, (np.size(thetas), self.k, self.k)).copy()


def as_cocycle(fam, E=None):
    if isinstance(fam, OperatorFamily):
        return TransferCocycle(fam, E)
    if isinstance(fam, (TransferCocycle, ConstantCocycle)):
        return fam
    return ConstantCocycle(fam)


def _cocycle_omega(cocycle) -> float:
    if isinstance(cocycle, TransferCocycle):
        return cocycle.fam.omega.omega
    return getattr(cocycle, "omega_value", 0.0)


def propagate(cocycle, thetas, eps: float, n: int, wedges=(1,)) -> dict:
    """n-step products of the cocycle, and of its exterior powers, over a grid.

    Returns {j: ScaledMatrix} where each entry represents wedge_j(M_n(theta))
    for every theta in the grid.  Factor order follows the propagator
    convention: the step-j factor at theta + j*omega multiplies on the left.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    omega = _cocycle_omega(cocycle)
    acc: dict[int, ScaledMatrix] = {}
    for step in range(n):
        try:
            factor = cocycle.factor_grid(thetas + step * omega, eps)
        except IllConditionedBlockError as err:
            raise IllConditionedBlockError(err.cond, step=step, theta=err.theta) from err
        k = factor.shape[-1]
        for j in wedges:
            if j == 1:
                fj = factor
            elif 2 * j > k:  # transfer factors are invertible by the cond cap
                fj = high_wedge_from_inverse(factor, j)
            else:
                fj = exterior_power(factor, j)
            sm = ScaledMatrix.from_matrix(fj)
            acc[j] = sm if step == 0 else sm.matmul(acc[j])
    return acc


def transfer_matrix(fam: OperatorFamily, E: complex, p: Phase) -> np.ndarray:
    """The one-step 2d x 2d transfer matrix at a single phase."""
    return TransferCocycle(fam, E).factor_grid(np.array([p.theta]), p.eps)[0]


def transfer_product(fam: OperatorFamily, E: complex, p: Phase, n: int) -> ScaledMatrix:
    """The n-step propagator at a single phase, as a ScaledMatrix."""
    out = propagate(as_cocycle(fam, E), np.array([p.theta]), p.eps, n)
    return out[1].single()


def block_recursion_check(fam: OperatorFamily, E: complex, p: Phase, n: int) -> float:
    """Max relative residual of the four block recursions tying M_n to M_{n-1}.

    Both sides are computed independently: the left from the n-step product,
    the right from the (n-1)-step product at theta+omega combined with the
    one-step blocks at theta.
    """
    if n < 2:
        raise ValueError("recursion check needs n >= 2")
    d = fam.d
    m_n = transfer_product(fam, E, p, n)
    m_prev = transfer_product(fam, E, Phase(p.theta + fam.omega.omega, p.eps), n - 1)

    thetas = np.array([p.theta])
    b = eval_sampling_grid(fam.b, thetas, p.eps)[0]
    b_star = eval_star_grid(fam.b, thetas, p.eps)[0]
    v = eval_sampling_grid(fam.v, thetas, p.eps)[0]
    b_inv = np.linalg.inv(b)
    v_minus_e = v - E * np.eye(d)

    # Compare at the scale of M_n: divide both sides by exp(m_n.log_scale).
    rel = np.exp(m_prev.log_scale - m_n.log_scale)
    ul, ur = m_prev.unit[:d, :d] * rel, m_prev.unit[:d, d:] * rel
    ll, lr = m_prev.unit[d:, :d] * rel, m_prev.unit[d:, d:] * rel

    rhs = {
        "UL": -ul @ v_minus_e @ b_inv + ur @ b_inv,
        "UR": -ul @ b_star,
        "LL": -ll @ v_minus_e @ b_inv + lr @ b_inv,
        "LR": -ll @ b_star,
    }
    lhs = {
        "UL": m_n.unit[:d, :d],
        "UR": m_n.unit[:d, d:],
        "LL": m_n.unit[d:, :d],
        "LR": m_n.unit[d:, d:],
    }
    worst = 0.0
    for key in rhs:
        num = np.linalg.norm(lhs[key] - rhs[key], ord=2)
        den = max(np.linalg.norm(lhs[key], ord=2), np.linalg.norm(rhs[key], ord=2), 1e-300)
        worst = max(worst, num / den)
    return worst
