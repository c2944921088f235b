"""Built-in operator families used by the CLI and the verification suite."""

from __future__ import annotations

import numpy as np

from .family import OperatorFamily
from .frequency import Frequency, golden
from .sampling import SamplingFunction, constant, scalar_cosine

# Strip on which the built-in sampling functions are evaluated; the family
# delta below is what analysis routines actually use.
_STRIP = 1.0
_DEFAULT_DELTA = 0.1


def _resolve_omega(omega) -> Frequency:
    if isinstance(omega, Frequency):
        return omega
    if omega is None or omega == "golden":
        return golden()
    return Frequency.from_float(float(omega))


def free_family(omega=None, delta: float = _DEFAULT_DELTA) -> OperatorFamily:
    """Free Laplacian: d=1, b = 1, v = 0."""
    return OperatorFamily(
        d=1,
        omega=_resolve_omega(omega),
        b=constant(np.eye(1), _STRIP),
        v=SamplingFunction(1, {}, True, _STRIP),
        delta=delta,
    )


def amo_family(lam: float, omega=None, degree: int = 1, delta: float = _DEFAULT_DELTA) -> OperatorFamily:
    """Almost Mathieu potential v = 2*lam*cos(2 pi degree theta), b = 1."""
    return OperatorFamily(
        d=1,
        omega=_resolve_omega(omega),
        b=constant(np.eye(1), _STRIP),
        v=scalar_cosine(lam, degree, _STRIP),
        delta=delta,
    )


def block_demo_family(omega=None, delta: float = _DEFAULT_DELTA) -> OperatorFamily:
    """A d=2 Jacobi block family with Hermitian-valued hopping.

    B is a Hermitian trig polynomial (so its starred continuation equals B
    itself), invertible on the strip; V is a Hermitian trig polynomial with a
    complex off-diagonal mode.  Coefficients are fixed so the verification
    suite can treat this family as a frozen fixture.
    """
    b_mode = np.array([[0.15, 0.10], [0.05, 0.12]], dtype=complex)
    b = SamplingFunction(
        2,
        {0: np.eye(2, dtype=complex), 1: b_mode, -1: b_mode.conj().T},
        hermitian_flag=True,
        strip_delta=_STRIP,
    )
    v_mode = np.array([[0.5, 0.2 + 0.1j], [0.15 - 0.05j, 0.4]], dtype=complex)
    v = SamplingFunction(
        2,
        {
            0: np.array([[0.3, 0.1], [0.1, -0.2]], dtype=complex),
            1: v_mode,
            -1: v_mode.conj().T,
        },
        hermitian_flag=True,
        strip_delta=_STRIP,
    )
    return OperatorFamily(d=2, omega=_resolve_omega(omega), b=b, v=v, delta=delta)


def coupled_amo_family(d: int = 2, lam: float = 1.5, coupling: float = 0.05,
                       omega=None, delta: float = _DEFAULT_DELTA) -> OperatorFamily:
    """d weakly coupled almost Mathieu copies at staggered phase offsets.

    All copies share lam, so the top d exponents stay within O(coupling) of
    log(lam): the whole profile fits in a narrow band, which keeps the direct
    singular-value route accurate at large n (it loses the j-th value once
    n*(L_1 - L_j) passes the double-precision exponent budget).
    """
    if d < 2:
        raise ValueError("use amo_family for d=1")
    offsets = np.arange(d) / d
    mode1 = np.diag(lam * np.exp(2j * np.pi * offsets))
    couple = np.zeros((d, d), dtype=complex)
    for i in range(d - 1):
        couple[i, i + 1] = coupling
        couple[i + 1, i] = coupling
    v = SamplingFunction(
        d,
        {0: couple, 1: mode1, -1: mode1.conj().T},
        hermitian_flag=True,
        strip_delta=_STRIP,
    )
    b_mode = np.full((d, d), 0.3 * coupling, dtype=complex)
    b = SamplingFunction(
        d,
        {0: np.eye(d, dtype=complex), 1: b_mode, -1: b_mode.conj().T},
        hermitian_flag=True,
        strip_delta=_STRIP,
    )
    return OperatorFamily(d=d, omega=_resolve_omega(omega), b=b, v=v, delta=delta)


def random_family(d: int, rng=None, omega=None, delta: float = _DEFAULT_DELTA,
                  modes: int = 2, scale: float = 0.4) -> OperatorFamily:
    """Random Hermitian trig-polynomial family, B kept near the identity."""
    rng = np.random.default_rng(rng)

    def herm_poly(base_scale, diag_boost=0.0):
        coeffs = {}
        h0 = base_scale * (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
        coeffs[0] = (h0 + h0.conj().T) / 2 + diag_boost * np.eye(d)
        for m in range(1, modes + 1):
            c = base_scale * (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / (2 * m)
            coeffs[m] = c
            coeffs[-m] = c.conj().T
        return SamplingFunction(d, coeffs, hermitian_flag=True, strip_delta=_STRIP)

    return OperatorFamily(
        d=d,
        omega=_resolve_omega(omega),
        b=herm_poly(0.1 * scale, diag_boost=1.0),
        v=herm_poly(scale),
        delta=delta,
    )


_BUILTINS = {
    "free": free_family,
    "amo": amo_family,
    "block-demo": block_demo_family,
    "coupled-amo": coupled_amo_family,
}


def builtin_family(name: str, params: dict | None = None) -> OperatorFamily:
    params = dict(params or {})
    if name not in _BUILTINS:
        raise ValueError(f"unknown family {name!r}; known: {sorted(_BUILTINS)}")
    if "lambda" in params:
        params["lam"] = params.pop("lambda")
    return _BUILTINS[name](**params)
