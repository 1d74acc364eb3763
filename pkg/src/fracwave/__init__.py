"""
fracwave: spectral solver and study harness for the fractional telegraph
equation ``u_tt + (-Delta)^s u + a(x) u + b(x) u_t = 0`` on a periodic box,
with singular coefficients handled through mollified nets.
"""
from .errors import *  # noqa: F401,F403
from .grid import Field, Grid, SpectralField, forward, inverse, l2_inner, make_grid
from .fracops import frac_laplacian, hs_norm, l2_norm, lp_norm, norm1, norm2, sobolev_check
from .mollify import (
    coefficient_net,
    fit_moderateness,
    make_mollifier,
    mollifying_net,
    negligible_perturbation,
    regularize,
)
from .propagate import (
    SolverState,
    StepperConfig,
    Trajectory,
    cfl_bound,
    evolve,
    free_flow,
    leapfrog_step,
    local_flow,
    modal_oracle,
    strang_step,
)
from .duhamel import SourceTerm, direct_source_solve, duhamel_solve

__version__ = "0.1.0"
