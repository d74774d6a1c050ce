"""Direct and inverse source problems for the time-fractional pseudo-parabolic
equation built on the one-dimensional Dunkl operator."""

from .dunkl import (
    PhysicalFunction,
    PhysicalGrid,
    ProblemParams,
    SpectralFunction,
    SpectralGrid,
    dunkl_apply,
    dunkl_apply_sq,
    dunkl_transform,
    inverse_dunkl_transform,
    l2_norm,
    measure_weight,
    sobolev_h2_norm,
)
from .forward import Grids, SolutionField, SpectralField, solve_forward, solve_forward_spectral, \
    solve_forward_spectral_ibp, spectral_symbol
from .fractional import TimeGrid, caputo_l1, spectral_ode_residual
from .inverse import SourcePair, recover_source_spectral, recover_state_spectral, solve_isp, stability_report
from .specfun import MLParams, bessel_j_normalized, dunkl_kernel, gamma_fn, mittag_leffler

__version__ = "0.1.0"
