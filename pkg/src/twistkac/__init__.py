"""Twisted oscillators and free fields: closed forms, Fock-space oracle and Monte Carlo."""

from .twist import (DivergenceError, PolyPotential, Superpotential, TwistSpec, check_twist_invariance,
                    gamma, grad_squared, is_singular, validate_potential)
from .oscillator import (bare_covariance, fourier_coefficient, mass_renormalized_Z, pair_correlation,
                         pair_correlation_extended, partition_function, zero_mass_covariance,
                         zero_mass_kernel)
from .normal_order import (OrderedPolynomial, normal_order, ordered_diagonal_two_point_multicomponent,
                           ordered_two_point)
from .paths import (MomentRequest, check_integration_by_parts, estimate_moment_mc,
                    reflection_positivity_check, sample_path, wick_moment)
from .fock import (TimeOrderedRequest, assemble_hamiltonian, build_fock, holonomy_residual, trotter_trace,
                   twisted_expectation, twisted_trace)
from .nongaussian import (canonical_bound_sweep, gibbs_expectation_mc, relative_partition_mc,
                          zero_mass_sweep)
from .field import (FieldSpec, covariance_spectrum, cutoff_field, field_covariance_coefficient,
                    field_partition_function, field_relative_partition_mc, momentum_lattice,
                    sample_random_field, zero_mass_field_sweep)

__version__ = "0.1.0"
