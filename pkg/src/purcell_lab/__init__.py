"""Qubit relaxation through a lossy, populated cavity: numerics + rate theory."""

from .fockspace import (
    TruncatedSpace,
    OperatorMatrix,
    Superoperator,
    ladder_operators,
    vectorize,
    unvectorize,
    lindblad_superoperator,
)
from .model import (
    SystemParams,
    DriveParams,
    PolaritonFrame,
    DisplacedFrame,
    bare_hamiltonian,
    polariton_frame,
    displaced_frame,
)
from .liouvillian import (
    TermToggles,
    GeneratorBundle,
    build_bare,
    build_blackbox,
    build_displaced,
    build_jc,
)
from .perturbation import (
    UnperturbedModeSet,
    PerturbationResult,
    Gamma2Breakdown,
    DiagnosticsReport,
    RateReport,
    decoupled_block,
    unperturbed_modes,
    pt_corrections,
    gamma_thermal_analytic,
    gamma_thermal_pt,
    gamma_coherent_analytic,
    gamma_jc_analytic,
    diagnostics,
    rate_report,
)
from .spectral import (
    ModeLabel,
    SpectralMode,
    FitResult,
    T1DiagResult,
    steady_state,
    spectrum,
    block_labels,
    t1_rate_diag,
    evolve,
    t1_rate_fit,
)

__all__ = [
    "TruncatedSpace",
    "OperatorMatrix",
    "Superoperator",
    "ladder_operators",
    "vectorize",
    "unvectorize",
    "lindblad_superoperator",
    "SystemParams",
    "DriveParams",
    "PolaritonFrame",
    "DisplacedFrame",
    "bare_hamiltonian",
    "polariton_frame",
    "displaced_frame",
    "TermToggles",
    "GeneratorBundle",
    "build_bare",
    "build_blackbox",
    "build_displaced",
    "build_jc",
    "ModeLabel",
    "SpectralMode",
    "FitResult",
    "T1DiagResult",
    "steady_state",
    "spectrum",
    "block_labels",
    "t1_rate_diag",
    "evolve",
    "t1_rate_fit",
    "UnperturbedModeSet",
    "PerturbationResult",
    "Gamma2Breakdown",
    "DiagnosticsReport",
    "RateReport",
    "decoupled_block",
    "unperturbed_modes",
    "pt_corrections",
    "gamma_thermal_analytic",
    "gamma_thermal_pt",
    "gamma_coherent_analytic",
    "gamma_jc_analytic",
    "diagnostics",
    "rate_report",
]

__version__ = "0.1.0"
