"""Exception types shared across the package."""


class QpspecError(Exception):
    """Base class for all package-specific failures."""


class StripViolationError(QpspecError, ValueError):
    """Evaluation requested outside the strip of analyticity."""

    def __init__(self, eps: float, delta: float):
        super().__init__(f"|eps|={abs(eps):.6g} exceeds strip half-width delta={delta:.6g}")
        self.eps = eps
        self.delta = delta


class IllConditionedBlockError(QpspecError, ValueError):
    """A hopping block was numerically singular at some phase.

    ``step`` is the propagation step index at which the failure occurred
    (None for a one-shot evaluation), ``cond`` the offending condition estimate.
    """

    def __init__(self, cond: float, step=None, theta=None):
        where = "" if step is None else f" at step {step}"
        super().__init__(f"hopping block condition {cond:.3e} exceeds cap{where}")
        self.cond = cond
        self.step = step
        self.theta = theta


class SingularEnergyError(QpspecError, ValueError):
    """A determinant in a denominator vanished (log-magnitude sentinel -inf)."""


class ContourDegenerateError(QpspecError, RuntimeError):
    """A winding contour passed too close to a zero even after radius jitter."""

    def __init__(self, msg, radius=None):
        super().__init__(msg)
        self.radius = radius


class NotDiophantineError(QpspecError, ValueError):
    """Frequency failed a Diophantine certificate (some ||k*omega|| is zero)."""


class InsufficientDataError(QpspecError, ValueError):
    """A regression was attempted with fewer usable points than required."""


class LemmaViolationReport(QpspecError, RuntimeError):
    """Shift search exhausted its scan without finding an admissible shift.

    Diagnostic rather than fatal: indicates either an underestimated zero-count
    cap or numerics too coarse for the requested radius.
    """

    def __init__(self, msg, scanned=None):
        super().__init__(msg)
        self.scanned = scanned or []
