"""Meshfree generalized multiscale FEM with exponential time integration."""
from .basis import (LocalEigenBasis, MultiscaleSpace, build_multiscale_space,
                    coarse_interpolant_report, coarse_matrices, cubic_spline_kernel,
                    local_spectral_basis, local_spectral_bases, shape_functions)
from .coarsening import (CoverReport, Neighborhoods, PointCloud, build_neighborhoods,
                         compute_density, compute_radii, coverage_diagnostics,
                         generate_point_cloud, overlap_distances, overlap_spectral_bound,
                         with_radii)
from .config import ExperimentConfig, load_config, save_config
from .errors import (ConfigError, CoverageError, InputError, MultiscaleError, NumericalError,
                     PencilError, SolverError, SpaceConstructionError, UnsupportedFeatureError)
from .experiments import ErrorTable, run_reference, run_sweep, setup_problem
from .export import export_field_vtk, export_table_csv
from .fem import (FineMesh, PermeabilityField, apply_dirichlet, assemble_load, assemble_mass,
                  assemble_stiffness, build_fine_system, build_structured_mesh)
from .linalg import (EigenPencilDecomp, apply_phi1_pencil, csr_from_triplets, phi, phi_scalar,
                     spd_solve, sym_generalized_eig)
from .permeability import generate_permeability, load_permeability
from .timeint import (SolveResult, TimeGrid, coarse_pencil_eig, fine_backward_euler,
                      make_source, mfgmsfem_ei_run, mfgmsfem_fd_run, project_initial)

__version__ = "0.1.0"
