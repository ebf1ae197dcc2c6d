"""Foldy-Lax multiple scattering by clusters of dielectric-plasmonic dimers."""

from .assembly import (BlockSystem, ReducedSystem, assemble_B, assemble_Psi,
                       assemble_full_system, assemble_reduced_system, assemble_source)
from .effective import (dimer_polarizability, dominant_polarizability, effective_tensors,
                        local_fields, number_density, scaling_sweep, susceptibilities)
from .fields import (IncidentWave, far_field, far_field_grid, incident_fields,
                     reduced_far_field, reduced_scattered_field, scattered_field,
                     scattering_cross_section)
from .geometry import (ClusterGeometry, DimerSites, ScalingParams, make_lattice_cluster,
                       make_random_cluster, validate_geometry)
from .materials import (ModelParams, PolarizationTensors, check_invertibility, check_regime,
                        isotropic_tensor, wavenumber_from_resonance)
from .solver import SolveReport, perturbation_gap, solve, solve_block_iterative, solve_dense

__version__ = "0.1.0"
