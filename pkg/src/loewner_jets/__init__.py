"""Normal forms and Loewner chains for discrete and continuous dilation families, on polynomial jets."""

from ._kernels import BACKEND
from .chains import ChainJets, build_chain, normality_diagnostic, subordination_residual, transfer_map
from .continuous import HerglotzSpec, SchedulePiece, discretize, extend_to_real_times, integrate_evolution, pde_residual
from .errors import (
    CertificateError,
    ComplexResonanceError,
    ContractViolation,
    NonConvergenceError,
    NonInvertibleError,
    SmallDivisorError,
)
from .families import DiscreteFamily, TriangularFamily, growth_constants
from .jets import JetMap, coefficient_norm, compose, evaluate, homogeneous_part, invert
from .normalize import autonomous_linearize, normalize_family, solve_homological, stage_eliminate
from .scenarios import build_scenario, run_assertions
from .spectrum import Spectrum, enumerate_resonances

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CertificateError",
    "ChainJets",
    "ComplexResonanceError",
    "ContractViolation",
    "DiscreteFamily",
    "HerglotzSpec",
    "JetMap",
    "NonConvergenceError",
    "NonInvertibleError",
    "SchedulePiece",
    "SmallDivisorError",
    "Spectrum",
    "TriangularFamily",
    "autonomous_linearize",
    "build_chain",
    "build_scenario",
    "coefficient_norm",
    "compose",
    "discretize",
    "enumerate_resonances",
    "evaluate",
    "extend_to_real_times",
    "growth_constants",
    "homogeneous_part",
    "integrate_evolution",
    "invert",
    "normality_diagnostic",
    "normalize_family",
    "pde_residual",
    "run_assertions",
    "solve_homological",
    "stage_eliminate",
    "subordination_residual",
    "transfer_map",
]
