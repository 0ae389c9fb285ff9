"""Sectional solvers for the collision-induced nonlinear breakage equation.

The volume-average method (VAM) in one and two property coordinates, a
midpoint and a fixed-pivot baseline, five grid families, reference
solutions and convergence-order studies.
"""

from .analysis import EOCReport, eoc_study, family_grid, l1_error, moments, relative_moment_error
from .grid import Grid, bisect, build_family, build_geometric, build_locally_uniform, build_oscillatory, build_random, build_uniform
from .integrator import IntegrationError, IntegratorConfig, ObservationSeries, integrate
from .kernels import KernelSpec, KernelSpec2D, builtin, builtin_names, custom_kernel, validate
from .reference import project_reference, reference, reference_density
from .scheme1d import Scheme1D, allocate, birth_death_flux, precompute_tables, rhs_midpoint, rhs_vam
from .scheme2d import Grid2D, Scheme2D, State2D, precompute_tables2d, rhs_vam2d

__version__ = "0.1.0"
