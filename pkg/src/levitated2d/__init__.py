"""Two-dimensional motion of a levitated nanoparticle coupled to an optical cavity.

Linearized quantum Langevin model, heterodyne spectra, steady-state Gaussian
state characterization, spectral fitting, stochastic simulation and sweeps.
"""

__version__ = "0.1.0"

from .errors import (
    DegenerateError,
    DiscordConditionError,
    InstabilityError,
    ModelError,
    NumericalError,
    PhysicalityError,
    PoleError,
    SimulationDivergedError,
    ValidationError,
)
from .fitting import FitConfig, FitResult, SpectrumData, fit, load_psd
from .gaussian import (
    StateMetrics,
    discord,
    ground_state_probability,
    max_discord_over_angle,
    occupancy,
    purity,
    rotated_discord,
    state_metrics,
    symplectic_data,
)
from .model import SystemParams, bright_mode_params, chi_cav, chi_mech, overlap_parameter
from .presets import preset, table1
from .simulate import SimConfig, integrate, sample_covariance, welch_psd
from .spectrum import decompose, heterodyne_psd, transfer_matrix_psd, weighted_bright_psd
from .steady_state import build_diffusion, build_drift, check_stability, mechanical_block, solve_lyapunov, steady_state
from .sweep import fig3_grid, fig3_params, fig3_point, grid_sweep
