"""Numerical laboratory for hydrostatic channel flow on a periodic strip."""

from .grid import Grid, ScalarX, SpectralField, ddx, from_spectral, to_spectral, y_calculus
from .gevrey import GevreyParams, WeightTable, gevrey_norm, j_field, tau_schedule, weight_Mj
from .physics import (
    CompatibilityReport,
    FlowState,
    build_convex_compatible_data,
    check_compatibility,
    h_datum,
    pressure_gradient,
    recover_v,
    vorticity_bc,
)

__version__ = "0.1.0"
