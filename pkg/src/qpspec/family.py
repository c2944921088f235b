"""Operator families: block size, frequency, hopping B, potential V, strip."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IllConditionedBlockError
from .frequency import Frequency
from .sampling import SamplingFunction, eval_sampling_grid

# Structural checks at construction sample this many phases per eps level.
_CHECK_GRID = 211


@dataclass(frozen=True)
class OperatorFamily:
    d: int
    omega: Frequency
    b: SamplingFunction
    v: SamplingFunction
    delta: float
    cond_cap: float = 1e12

    def __post_init__(self):
        if self.b.dim != self.d or self.v.dim != self.d:
            raise ValueError("sampling dimensions must match block size d")
        if not self.v.hermitian_flag:
            raise ValueError("potential must carry the hermitian flag")
        if self.v.hermitian_residual() > 1e-10:
            raise ValueError("potential flagged hermitian but is not, to tolerance")
        for sf in (self.b, self.v):
            if sf.strip_delta < self.delta - 1e-15:
                raise ValueError("sampling strip narrower than family delta")
        thetas = np.arange(_CHECK_GRID) / _CHECK_GRID
        for eps in (-self.delta, -self.delta / 2, 0.0, self.delta / 2, self.delta):
            vals = eval_sampling_grid(self.b, thetas, eps)
            dets = np.linalg.det(vals)
            if np.min(np.abs(dets)) < 1e-14:
                raise IllConditionedBlockError(np.inf, theta=float(thetas[np.argmin(np.abs(dets))]))

    def serialize(self) -> dict:
        return {
            "d": self.d,
            "omega": self.omega.omega,
            "delta": self.delta,
            "b": self.b.to_dict(),
            "v": self.v.to_dict(),
        }

    @classmethod
    def deserialize(cls, data: dict) -> "OperatorFamily":
        return cls(
            d=int(data["d"]),
            omega=Frequency.from_float(float(data["omega"])),
            b=SamplingFunction.from_dict(data["b"]),
            v=SamplingFunction.from_dict(data["v"]),
            delta=float(data["delta"]),
        )


def det_b_log_average(fam: OperatorFamily, eps: float, grid: int) -> float:
    """<log |det B(. + i eps)|> averaged over an equispaced phase grid."""
    thetas = np.arange(grid) / grid
    dets = np.linalg.det(eval_sampling_grid(fam.b, thetas, eps))
    return float(np.mean(np.log(np.abs(dets))))
