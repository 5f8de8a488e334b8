"""Two-dimensional Navier-Stokes on the unit square with boundary forcing."""
from .boundary import BoundaryTrace, NoiseBasis, boundary_flux, tangential_antiderivative
from .elliptic import solve_clamped_biharmonic, solve_dirichlet_laplace, solve_dirichlet_poisson
from .extension import (StreamData, boundary_h1_norm, boundary_trace, cutoff_gradient_check,
                        cutoff_profile, cutoff_radii, extend_boundary_field, hopf_cutoff,
                        hopf_extension, hopf_trilinear_ratio, lift_Q, trace_error)
from .grid import SquareDomain, VelocityField, curl_of_stream, divergence, stream_modes
from .probes import (DecayFit, DissipativityReport, NSSystem, decay_probe, dissipativity_probe,
                     h1_seminorm, lipschitz_probe, random_initial_state)
from .projection import leray_project
from .solver import NSParams, SeparableLift, Trajectory, energy_audit, resolve, solve_homogeneous

__all__ = [
    "BoundaryTrace", "NoiseBasis", "boundary_flux", "tangential_antiderivative",
    "solve_clamped_biharmonic", "solve_dirichlet_laplace", "solve_dirichlet_poisson",
    "StreamData", "boundary_h1_norm", "boundary_trace", "cutoff_gradient_check", "cutoff_profile",
    "cutoff_radii", "extend_boundary_field", "hopf_cutoff", "hopf_extension", "hopf_trilinear_ratio",
    "lift_Q", "trace_error", "SquareDomain", "VelocityField", "curl_of_stream", "divergence",
    "stream_modes", "DecayFit", "DissipativityReport", "NSSystem", "decay_probe",
    "dissipativity_probe", "h1_seminorm", "lipschitz_probe", "random_initial_state",
    "leray_project", "NSParams", "SeparableLift", "Trajectory", "energy_audit", "resolve",
    "solve_homogeneous",
]
