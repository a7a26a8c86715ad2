"""Principal eigenvalue of nonlocal diffusion operators with deformation kernels."""

from .kernel import (
    DeformationKernel,
    MapSpec,
    Profile,
    kernel_eval,
    kernel_mass,
    profile_eval,
    profile_mass,
    profile_second_moment,
)
from .discretize import DiscreteOperator, Grid, apply_operator, assemble_operator, build_grid
from .spectra import ConvergenceTable, SpectralResult, rayleigh_quotient, smallest_eigenpair, sweep_radius
from .bounds import (
    BoundReport,
    closed_form_linear,
    finite_radius_bound,
    lower_bound_thm2,
    upper_bound_candidate,
    upper_bound_sup,
)
from .witnesses import (
    OverlapReport,
    composed_witness,
    expansive_geometric_witness,
    jordan_rotation_witness,
    jordan_shear_witness,
    power_law_witness,
)
from .evolution import fit_decay_rate, simulate, stability_limit

__version__ = "0.1.0"
