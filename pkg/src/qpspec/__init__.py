"""Quasiperiodic block Jacobi operators: transfer cocycles, determinants,
zero counting, and integrated density of states estimation."""

__version__ = "0.1.0"

from .cocycle import (
    ScaledMatrix,
    SymplecticForm,
    TransferCocycle,
    as_cocycle,
    block_recursion_check,
    exterior_power,
    propagate,
    symplectic_defect,
    transfer_matrix,
    transfer_product,
)
from .determinants import (
    FiniteOperator,
    LogDet,
    assemble,
    det_values_grid,
    detp_residual,
    dirichlet_det,
    dirichlet_values,
    green_entry_dirichlet,
    green_entry_periodic,
    logdet_banded,
    logdet_dense,
    minor_bound_check,
    minor_mu,
    periodic_block_det,
)
from .errors import (
    ContourDegenerateError,
    IllConditionedBlockError,
    InsufficientDataError,
    LemmaViolationReport,
    NotDiophantineError,
    QpspecError,
    SingularEnergyError,
    StripViolationError,
)
from .families import (
    amo_family,
    block_demo_family,
    builtin_family,
    coupled_amo_family,
    free_family,
    random_family,
)
from .family import OperatorFamily, det_b_log_average
from .frequency import Frequency, circle_norm, continued_fraction, convergents, golden
from .ids import (
    AdmissibleScales,
    DiophantineCertificate,
    HolderReport,
    IDSCurve,
    WindowCount,
    admissible_scales,
    diophantine_certificate,
    energy_neighborhood,
    finite_volume_spectrum,
    fit_power_law,
    holder_fit,
    ids_curve,
    ids_estimate,
    ldt_measure,
    resolvent_trace_im,
    tau_window,
    window_count,
)
from .lyapunov import (
    AccelerationEstimate,
    ExponentSet,
    LyapunovProfile,
    acceleration,
    finite_scale_le,
    lyapunov_profile,
)
from .sampling import Phase, SamplingFunction
from .zeros import (
    AnnulusSpec,
    FactorizedBoundReport,
    ShiftSearchResult,
    WindingResult,
    ZeroCountReport,
    annulus_zero_count,
    ball_zero_count,
    companion_roots,
    default_search_radius,
    det_point_function,
    eta_stability_check,
    factorized_lower_bound_check,
    local_shift_search,
    locate_ball_zeros,
    winding_number,
)
