"""Differentiable railroad trajectory optimization with natural-language
traces, LM-backed explanations, and evaluation harnesses."""

from .scenario import (
    CostField,
    Obstacle,
    PhysicsParams,
    Scenario,
    StateCommand,
    apply_command,
    decode_scenario,
    encode_scenario,
    generate_scenario,
    to_grid,
)
from .geometry import CurveParams, bezier_derivatives, bezier_point, curvature, segment_length
from .autodiff import Dual, check_gradient, grad
from .simulator import SimResult, SimulationError, StepRecord, loss, obstacle_accel, position_cost, sim_step, simulate
from .optimize import OptimizerConfig, OptRun, lr_at, opt_step, run_optimization
from .trace import Bin, TraceLine, bin_magnitude, compass16, phi_e, phi_r, phi_u, render_trace

__version__ = "0.1.0"
