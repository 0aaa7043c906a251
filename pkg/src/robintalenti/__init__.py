"""Talenti-type comparison for the Robin Poisson problem: FEM on the domain, radial quadrature on the ball."""

from .fem import (FemSolution, RobinSystem, SolverError, assemble, boundary_integral, boundary_min,
                  energy, first_eigenpair, flux_residual, solve)
from .geometry import (DomainSpec, Mesh, Source, isoperimetric_constant, make_domain, mesh_generate,
                       read_mesh, schwarz_ball, unit_ball_volume, write_mesh)
from .radial import (RadialProfile, counterexample_balls, counterexample_disks,
                     fundamental_identity_residual, radial_eigenvalue, radial_solve)
from .rearrange import (LorentzIndex, MonotoneProfile, WeightedSamples, decreasing_rearrangement,
                        distribution_function, lorentz_norm, read_profile_csv, schwarz_profile,
                        source_rearrangement, write_profile_csv)
from .verify import (Check, ComparisonReport, check_bossel_daners, check_boundary_lemma,
                     check_fundamental_integrated, check_vm_bound, compare_lorentz,
                     compare_pointwise_2d, run_counterexample_suite)

__version__ = "0.1.0"
