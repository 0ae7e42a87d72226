"""riccilab: Ricci flow and local Ricci flow on symmetry-reduced geometries.

Warped products over a 1D base and products of Einstein factors, with
curvature scales, good covers, glued cutoffs, lifespan monitors and
Gaussian transfer-rate analysis; verified against a brute-force
coordinate oracle.
"""

from .covers import (Ball, CoverRecipe, GoodCover, build_cover, trivial_cover,
                     uniform_cover, verify_cover)
from .cutoffs import Cutoff, ball_cutoff, build_chi, smooth_transition
from .errors import RicciLabError
from .flow import (FlowControls, FlowTrajectory, run_exhaustion, run_flow,
                   stability_dt, step)
from .monitors import (BarrierSpec, LifespanBounds, MonitorConstants,
                       barrier_margin, doubling_time, equivalence_factor,
                       evolution_residuals, generalized_doubling_time, h_inf,
                       theoretical_lifespan_bounds)
from .oracle import OracleValues, oracle_curvature_grid, validate_against_oracle
from .products import (EinsteinFactor, EinsteinProductState,
                       einstein_product_state, extinction_time)
from .profiles import CurvatureProfile, curvature_scale
from .transfer import (DecayFit, check_decay_hypothesis, fit_gaussian_decay,
                       temporal_growth_profile)
from .warped import (CurvatureField, WarpedState, constant_curvature_state,
                     eval_warped_geometry, eval_with_derivatives,
                     ricci_covariant_derivatives)

__version__ = "0.1.0"
