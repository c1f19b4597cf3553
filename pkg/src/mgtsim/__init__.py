"""Spectral simulation of the Moore-Gibson-Thompson equation with structured nonlinearity.

The abstract operator ``A`` is diagonal in an eigenbasis, so the first-order
system for ``(u, u_t, u_tt)`` splits into independent 3x3 blocks, one per
eigenvalue.  Submodules:

``spectral_core``  eigenvalue model, fractional powers, sine transform
``block_system``   the block generator, its inverse, spectrum, norms, fractional powers
``semigroup``      exact propagators, decay measurement, resolvent probes
``nonlinearity``   structured nonlinearities and their estimate probes
``mild_solver``    Picard iteration on the Duhamel formula and reference integrators
``diagnostics``    the property-suite runner
``config``, ``cli`` configuration files and the command-line interface
"""
from .block_system import (
    BlockOperator,
    MgtParams,
    StateTriple,
    UnstableParametersError,
    apply_generator,
    apply_generator_inverse,
    spectrum,
    stability_condition,
    y_alpha_norm,
    y_minus1_norm,
    y_norm,
)
from .config import ConfigError, RunConfig, load_config, parse_config
from .diagnostics import Report, run_suite
from .mild_solver import SolverConfig, Trajectory, continue_solution, picard_solve, reference_integrate
from .nonlinearity import Nonlinearity, apply_F
from .semigroup import decay_rate, evolve_linear, propagators, sectoriality_probe
from .spectral_core import SpectralOperator, TransformPair, make_dirichlet_power_operator, make_sequence_operator

__all__ = [
    "BlockOperator", "MgtParams", "StateTriple", "UnstableParametersError", "apply_generator",
    "apply_generator_inverse", "spectrum", "stability_condition", "y_alpha_norm", "y_minus1_norm", "y_norm",
    "ConfigError", "RunConfig", "load_config", "parse_config", "Report", "run_suite", "SolverConfig",
    "Trajectory", "continue_solution", "picard_solve", "reference_integrate", "Nonlinearity", "apply_F",
    "decay_rate", "evolve_linear", "propagators", "sectoriality_probe", "SpectralOperator", "TransformPair",
    "make_dirichlet_power_operator", "make_sequence_operator",
]
__version__ = "0.1.0"
