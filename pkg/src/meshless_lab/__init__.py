"""Meshless strong-collocation lab for the mixed Poisson problem.

Modules
-------
geometry
    Domains, boundary partitions, point sets, fill and separation distance.
sobolev
    Integer and fractional Sobolev norms by quadrature, sampling parameters.
kernels
    Kernel jets, trial spaces and best approximation.
poisson
    The operator ``L`` and manufactured problems.
testing
    Test discretizations and their weighted discrete norm.
solver
    Collocation assembly, least squares and the stability factor.
verifier
    Empirical checks of scaling and sampling inequalities.
lab
    Convergence studies and rate fitting.
"""
from .geometry import Domain, PointSet, fill_distance, generate_point_set, separation_distance
from .kernels import JetOrderError, Kernel, TrialSpace, kernel_jet, trial_best_fit, trial_eval
from .lab import StudyConfig, fit_rate, measure_epsilon, predicted_order, run_study
from .poisson import PoissonProblem, apply_L_component, manufactured
from .sobolev import (SamplingParameters, SobolevOrder, admissible_lmax, correction_factor, gagliardo_seminorm,
                      seminorm, sobolev_norm)
from .solver import assemble, estimate_stability_factor, solve_least_squares
from .testing import TestDiscretization, build_test_discretization, discrete_norm, discretize, operator_norm_estimate
from .verifier import compare_mu_orders, verify_fractional_relation, verify_sampling_inequality

__version__ = "0.1.0"
