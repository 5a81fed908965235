"""Spike patterns in a reaction-diffusion-ODE receptor model on [0, 1]."""

from .diagnostics import RunDiagnostics, SpikeCriteria, detect_spikes, growth_order, mass_bound_monitor
from .grid import Cosine, CosineForm, Eigenmode, Field, Mesh1D, Spline, Uniform, assemble_fem, l1_norm, l2_norm
from .integrator import IntegratorConfig, NonlinearMode, Scheme, State, simulate, simulate_linearized
from .kinetics import (
    Branch,
    FullModelParams,
    KineticParams,
    ModelParams,
    Stability,
    classify_kinetic_stability,
    constant_steady_states,
    reduce_full_params,
    steady_state,
)
from .stability import critical_diffusion, ddi_report, lambda_pm
from .steady_bvp import NoMonotoneSolution, SteadyProfile, periodic_profile, reflect, shoot_monotone

__version__ = "0.1.0"
