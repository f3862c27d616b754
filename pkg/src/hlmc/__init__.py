"""Kinetic Langevin samplers built on the exact harmonic integrator.

The target potential splits into a diagonal quadratic part, integrated
exactly in distribution, and a convex perturbation applied as gradient
kicks.  The package provides the first-order (pg) and symmetric
second-order (pgp) compositions, an OBABO baseline, a twisted-metric
coupling harness with contraction-rate fits, and an invariant-bias
step-size study with deterministic quadrature references.
"""

from .coupling import (ContractionConstants, CoupleResult, EpsilonBudget,
                       ExperimentRecord, RateFit, TwistedMetric,
                       contraction_constants, couple_run, epsilon_budget,
                       fit_rate, rho_distance)
from .harmonic import (CoeffSet, HarmonicCoeffs, NoiseDraw, Regime,
                       assemble_noise_matrix, compute_coeffs,
                       covariance_oracle, g_step, noise_matrix_direct,
                       series_expm, verification_grid)
from .metrics import (BiasSweepResult, BiasSweepRow, MomentReport, OrderFit,
                      bias_sweep, estimate_moments, linear_chain_cov,
                      reference_moments, wasserstein2_exact)
from .potential import (PhaseState, PotentialModel, StepValidityReport,
                        gaussian_model, grad_u, logistic_model, model_by_name,
                        oscillation_model, u_value, validate_step)
from .samplers import (ChainOutput, NumericalAbort, Scheme, SchemeConfig,
                       make_stepper, obabo_step, p_step, pg_step, pgp_step,
                       run_chain, stream_generator)

__version__ = "0.1.0"

__all__ = [
    "BiasSweepResult", "BiasSweepRow", "ChainOutput", "CoeffSet",
    "ContractionConstants", "CoupleResult", "EpsilonBudget",
    "ExperimentRecord", "HarmonicCoeffs",
    "MomentReport", "NoiseDraw", "NumericalAbort", "OrderFit", "PhaseState",
    "PotentialModel", "RateFit", "Regime", "Scheme", "SchemeConfig",
    "StepValidityReport", "TwistedMetric", "assemble_noise_matrix",
    "bias_sweep", "compute_coeffs", "contraction_constants", "couple_run",
    "covariance_oracle", "epsilon_budget", "estimate_moments", "fit_rate",
    "g_step", "gaussian_model", "grad_u", "linear_chain_cov",
    "logistic_model", "make_stepper", "model_by_name", "noise_matrix_direct",
    "obabo_step", "oscillation_model", "p_step", "pg_step", "pgp_step",
    "reference_moments", "rho_distance", "run_chain", "series_expm",
    "stream_generator", "u_value", "validate_step", "verification_grid",
    "wasserstein2_exact",
]
