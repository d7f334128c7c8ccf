"""Principal spectrum points of time-periodic cooperative nonlocal dispersal operators."""

from .grid import SpatialGrid, TimeGrid, build_spatial_grid, build_time_grid, quadrature
from .fields import (KernelSet, MatrixField, check_structure, constant_field, kernel_second_moment,
                     kernel_set, rescale_kernel, sample_field)
from .operator import (OperatorSpec, apply_spatial, assemble_dense, build_bc_variant, resolvent_N,
                       restrict_to_subdomain)
from .floquet import (SpectralResult, adjoint_spectral_bound, domain_perturbation_constant, existence_criteria,
                      frozen_time_bound, lambda_A_profile, period_map_apply, spectral_bound)

__version__ = "0.1.0"
