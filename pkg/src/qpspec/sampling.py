"""Matrix-valued trigonometric polynomials on the complexified torus.

A sampling function is a finite Fourier sum f(w) = sum_m c_m e^{2 pi i m w}
with d x d matrix coefficients, evaluated on the strip |Im w| <= strip_delta.
General analytic data must be pre-truncated to a finite sum by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import StripViolationError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Phase:
    """A point theta + i*eps of the complexified torus."""

    theta: float
    eps: float = 0.0


@dataclass(frozen=True)
class SamplingFunction:
    dim: int
    coefficients: dict = field(default_factory=dict)  # mode -> (d,d) complex array
    hermitian_flag: bool = False
    strip_delta: float = 0.5

    def __post_init__(self):
        coeffs = {}
        for m, c in self.coefficients.items():
            c = np.asarray(c, dtype=complex)
            if c.shape != (self.dim, self.dim):
                raise ValueError(f"mode {m}: coefficient shape {c.shape} != ({self.dim},{self.dim})")
            if np.any(c != 0.0):
                coeffs[int(m)] = c
        object.__setattr__(self, "coefficients", coeffs)

    def star(self) -> "SamplingFunction":
        """The analytic continuation of theta -> f(theta)^* off the real torus.

        If f = sum_m c_m e^{2 pi i m w} then on the real torus f(theta)^* =
        sum_m c_{-m}^* e^{2 pi i m theta}; being itself a trig polynomial, that
        sum is the unique analytic extension.
        """
        conj = {-m: c.conj().T for m, c in self.coefficients.items()}
        return SamplingFunction(self.dim, conj, self.hermitian_flag, self.strip_delta)

    def hermitian_residual(self, samples: int = 64) -> float:
        thetas = np.arange(samples) / samples
        vals = eval_sampling_grid(self, thetas, 0.0)
        return float(np.max(np.abs(vals - vals.conj().transpose(0, 2, 1))))

    def to_dict(self) -> dict:
        modes = {
            str(m): [[[float(z.real), float(z.imag)] for z in row] for row in c]
            for m, c in sorted(self.coefficients.items())
        }
        return {
            "dim": self.dim,
            "strip_delta": self.strip_delta,
            "hermitian": self.hermitian_flag,
            "modes": modes,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SamplingFunction":
        dim = int(data["dim"])
        coeffs = {}
        for m, rows in data["modes"].items():
            mat = np.array([[complex(re, im) for re, im in row] for row in rows])
            coeffs[int(m)] = mat
        return cls(
            dim=dim,
            coefficients=coeffs,
            hermitian_flag=bool(data.get("hermitian", False)),
            strip_delta=float(data.get("strip_delta", 0.5)),
        )


def constant(matrix, strip_delta: float = 0.5, hermitian: bool | None = None) -> SamplingFunction:
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.ndim == 0:
        matrix = matrix.reshape(1, 1)
    if hermitian is None:
        hermitian = bool(np.allclose(matrix, matrix.conj().T))
    return SamplingFunction(matrix.shape[0], {0: matrix}, hermitian, strip_delta)


def scalar_cosine(amplitude: float, degree: int = 1, strip_delta: float = 0.5) -> SamplingFunction:
    """v(theta) = 2*amplitude*cos(2 pi * degree * theta) as a 1x1 function."""
    c = np.array([[amplitude]], dtype=complex)
    return SamplingFunction(1, {degree: c, -degree: c}, True, strip_delta)


def eval_sampling(f: SamplingFunction, p: Phase) -> np.ndarray:
    """f evaluated at theta + i*eps; raises outside the strip."""
    out = eval_sampling_grid(f, np.array([p.theta]), p.eps)
    return out[0]


def eval_sampling_grid(f: SamplingFunction, thetas, eps: float) -> np.ndarray:
    """Vectorized evaluation at (thetas + i*eps); returns (len(thetas), d, d).

    thetas may be complex (contour evaluations); the strip check covers the
    total imaginary part.
    """
    thetas = np.atleast_1d(np.asarray(thetas))
    w = thetas + 1j * eps
    im_max = float(np.max(np.abs(w.imag))) if w.size else 0.0
    if im_max > f.strip_delta + 1e-15:
        raise StripViolationError(im_max, f.strip_delta)
    out = np.zeros((thetas.size, f.dim, f.dim), dtype=complex)
    for m, c in f.coefficients.items():
        out += np.exp(2j * np.pi * m * w)[:, None, None] * c
    return out


def eval_star_grid(f: SamplingFunction, thetas, eps: float) -> np.ndarray:
    """f^{(*)} on a grid: conjugated coefficients with negated modes."""
    return eval_sampling_grid(f.star(), thetas, eps)
