"""Periodic solutions of multi-time Hamilton equations by the dual action.

For a strictly convex H(t, u) with quadratic growth, critical points v of

    Phi(v) = int [ 1/2 G(v*, v) + H*(t, v*) ] dt,   v* = (delta x J) dv/dt,

give T-periodic solutions w = grad H*(t, v*) of (delta x J) dw/dt + grad H(t, w) = 0.
The package discretizes Phi on a periodic tensor grid and searches for its
critical points.
"""

__version__ = "0.1.0"

from .core import (MultiTimeGrid, PeriodicField, Scheme, apply_K, apply_K_adjoint, derivative, mean,
                   metric_inner, partial, polysymplectic_apply, project_off_kernel, state_dim, zero_mean_project)
from .conjugate import (BoundReport, ConjugateResult, ConjugationError, ConvexityError, Growth, HamiltonianModel,
                        check_gradient_bound, check_growth_bounds, conjugate, conjugate_batch, grad_conjugate)
from .hamiltonians import conjugate_model, quadratic, quartic_radial, saturating_radial, time_scaled
from .action import ActionProblem, eval_phi, eval_psi, grad_phi, phi_and_grad, psi_dual_form
from .solver import (SolveConfig, SolveError, SolveReport, mean_shift_check, recover_w, solve_periodic,
                     verify_hamilton)
from .classical import (LagrangianModel, TrajectoryField, divergence_check, energy_moment_tensor,
                        euler_lagrange_residual, first_integral_check, free_field, hamilton_equivalence_check,
                        hamiltonian_from_lagrangian, harmonic_oscillator, helmholtz, legendre_L_to_H)
from .scenario import Scenario, ScenarioError, load_scenario
