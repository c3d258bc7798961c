"""Sound field diffuseness from spherical-harmonic signal covariance."""
from .covariance import eigenvalues, estimate_covariance, mismatch_xi, truncate
from .estimators import (
    DiffusenessProfile,
    comedie,
    dirac,
    drr_to_beta,
    gamma0,
    profile,
    reference_mu0,
    thiele_gover,
)
from .experiments import SweepSpec, run_sweep, run_transition
from .field_sim import (
    ScenarioConfig,
    SHSignalBlock,
    Source,
    analytic_covariance,
    packed_scenario,
    synthesize,
)
from .sh_math import Direction, DirectionSet, eval_sh, fibonacci_grid, packing_directions, sh_vector

__version__ = "0.1.0"
