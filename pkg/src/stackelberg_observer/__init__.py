"""Observer-feedback Stackelberg strategies for two-player linear-quadratic games.

A follower and a leader each see only their own output. Feedback gains come
from the coupled Riccati equations, observer gains from a Lyapunov LMI, and
the cost of estimating instead of measuring the state is evaluated exactly.
"""

from .config import RunConfig, load_bundled, parse_config
from .costs import (
    CorrectionTerms,
    CostReport,
    DecayProfile,
    correction_terms,
    cost_report,
    decay_profile,
    exact_costs,
    lyapunov_solve,
    paper_corrections,
)
from .errors import StackelbergError
from .linalg import StabilityVerdict, power_stability, spectral_norm
from .model import CostWeights, SystemModel
from .observer import (
    ObserverDesign,
    assemble_error_matrix,
    certify,
    design_observer,
    synthesize_dual_riccati,
    synthesize_lmi,
)
from .simulation import Trajectory, augmented_matrix, simulate
from .solver import StackelbergSolution, riccati_residuals, solve_are, stagewise_optimality_check

__version__ = "0.1.0"

__all__ = [
    "CorrectionTerms",
    "CostReport",
    "CostWeights",
    "DecayProfile",
    "ObserverDesign",
    "RunConfig",
    "StabilityVerdict",
    "StackelbergError",
    "StackelbergSolution",
    "SystemModel",
    "Trajectory",
    "assemble_error_matrix",
    "augmented_matrix",
    "certify",
    "correction_terms",
    "cost_report",
    "decay_profile",
    "design_observer",
    "exact_costs",
    "load_bundled",
    "lyapunov_solve",
    "paper_corrections",
    "parse_config",
    "power_stability",
    "riccati_residuals",
    "simulate",
    "solve_are",
    "spectral_norm",
    "stagewise_optimality_check",
    "synthesize_dual_riccati",
    "synthesize_lmi",
]
