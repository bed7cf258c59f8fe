"""Forward simulation of the train along the Bezier track.

The track is split into N parameter intervals. Each step evaluates position,
curvature and arc length, accumulates driving/friction/drag/obstacle
accelerations, solves the constant-acceleration kinematics for the traversal
time, and integrates the velocity (clamped to [v_min, v_max]). Totals are
left Riemann sums; cost weights the per-step cost density by arc length.

Everything is generic over plain floats and dual scalars, so a single code
path serves both measurement and differentiation, and values computed under
differentiation are bit-identical to plain runs.
"""
from __future__ import annotations

import csv
import functools
import importlib.resources
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import perlin
from .geometry import CurveParams, bezier_point, curvature_ex, sample_points, segment_length, segment_lengths, curvature_profile
from .scenario import CostField, Obstacle, PhysicsParams, Scenario

EPS_ACCEL = 1e-9

FIXTURE_NAME = "reference_steps_v1.csv"
FIXTURE_COLUMNS = ("step", "time", "acceleration", "air_resistance", "cost", "curvature", "velocity")


class SimulationError(RuntimeError):
    def __init__(self, step: int, message: str):
        self.step = step
        super().__init__(message)


@dataclass
class StepRecord:
    m: int
    x: object  # 2-vector (plain or dual)
    v_in: object
    kappa: object
    a_drive: object
    a_fric: object
    a_air: object
    a_obs: object
    a_net: object
    s: object
    t: object
    c: object
    v_out: object
    influences: frozenset[str]


@dataclass
class SimResult:
    steps: list[StepRecord]
    total_time: object
    total_cost: object
    total_length: object

    def detach(self) -> "SimResult":
        """Plain-float copy (drops derivative information)."""

        def f(v):
            return np.asarray(ad.value_of(v), dtype=float) if np.ndim(ad.value_of(v)) else float(ad.value_of(v))

        steps = [
            StepRecord(
                m=r.m, x=f(r.x), v_in=f(r.v_in), kappa=f(r.kappa),
                a_drive=f(r.a_drive), a_fric=f(r.a_fric), a_air=f(r.a_air),
                a_obs=f(r.a_obs), a_net=f(r.a_net), s=f(r.s), t=f(r.t),
                c=f(r.c), v_out=f(r.v_out), influences=r.influences,
            )
            for r in self.steps
        ]
        return SimResult(steps, f(self.total_time), f(self.total_cost), f(self.total_length))


# -- obstacle and cost terms ---------------------------------------------------


def obstacle_accel(x, obstacles: list[Obstacle]):
    """Deceleration -sum_i penalty_i * max(0, 1 - d_i / (2 r_i)); <= 0."""
    total = 0.0
    for o in obstacles:
        dx = x[0] - o.center[0]
        dy = x[1] - o.center[1]
        d = ad.sqrt(dx * dx + dy * dy)
        total = total + o.penalty * ad.maximum(0.0, 1.0 - d / o.influence_radius)
    return -total


@functools.lru_cache(maxsize=32)
def _perm_table(seed: int) -> np.ndarray:
    return perlin.permutation_table(seed)


def global_cost(x, cost_field: CostField):
    """Terrain cost offset + amplitude * noise in [offset-amp, offset+amp]."""
    perm = _perm_table(cost_field.seed)
    noise = perlin.fractal2(
        x[0] * cost_field.frequency, x[1] * cost_field.frequency, perm, cost_field.octaves
    )
    return cost_field.offset + cost_field.amplitude * noise


def local_cost(x, obstacles: list[Obstacle]):
    """Gaussian bumps sum_i cost_i * exp(-d_i^2 / (2 r_i^2))."""
    total = 0.0
    for o in obstacles:
        dx = x[0] - o.center[0]
        dy = x[1] - o.center[1]
        d2 = dx * dx + dy * dy
        total = total + o.cost * ad.exp(-d2 / (2.0 * o.radius * o.radius))
    return total


def position_cost(x, cost_field: CostField, obstacles: list[Obstacle]):
    """Cost density at a point: global terrain plus local obstacle cost."""
    return global_cost(x, cost_field) + local_cost(x, obstacles)


def influence_set(x, obstacles: list[Obstacle]) -> frozenset[str]:
    xv = np.asarray(ad.value_of(x[0])), np.asarray(ad.value_of(x[1]))
    names = []
    for o in obstacles:
        d = float(np.hypot(xv[0] - o.center[0], xv[1] - o.center[1]))
        if d < o.influence_radius:
            names.append(o.nickname)
    return frozenset(names)


# -- single-step dynamics ------------------------------------------------------


def _step_dynamics(m: int, v, kappa, s, a_obs, phys: PhysicsParams):
    a_drive = phys.a_base * ad.exp(-phys.kappa_gain * kappa)
    a_fric = -phys.mu_fric * ad.sign(v)
    a_air = -phys.mu_air * v * ad.absolute(v)
    a_net = a_drive + a_fric + a_air + a_obs
    if abs(ad.float_of(a_net)) < EPS_ACCEL:
        t = s / v
    else:
        disc = v * v + 2.0 * a_net * s
        if ad.float_of(disc) < 0.0:
            raise SimulationError(m, f"train stalls in interval {m}")
        t = (-v + ad.sqrt(disc)) / a_net
    v_out = ad.clip(v + a_net * t, phys.v_min, phys.v_max)
    return a_drive, a_fric, a_air, a_net, t, v_out


def sim_step(m: int, v_m, theta, scenario: Scenario) -> StepRecord:
    """One interval of the forward pass at velocity ``v_m``."""
    phys = scenario.physics
    N = phys.n_steps
    curve = CurveParams(theta)
    u = m / N
    x = bezier_point(curve, u)
    kappa, _ = curvature_ex(curve, u)
    s = segment_length(curve, m, N)
    c = position_cost(x, scenario.cost_field, scenario.obstacles)
    a_obs = obstacle_accel(x, scenario.obstacles)
    a_drive, a_fric, a_air, a_net, t, v_out = _step_dynamics(m, v_m, kappa, s, a_obs, phys)
    return StepRecord(
        m=m, x=x, v_in=v_m, kappa=kappa, a_drive=a_drive, a_fric=a_fric,
        a_air=a_air, a_obs=a_obs, a_net=a_net, s=s, t=t, c=c, v_out=v_out,
        influences=influence_set(x, scenario.obstacles),
    )


# -- full forward pass ---------------------------------------------------------


def _batched_field_terms(X, scenario: Scenario, N: int):
    """Cost density, obstacle deceleration, and influence sets for all steps."""
    obstacles = scenario.obstacles
    sigma_g = global_cost((X[:, 0], X[:, 1]), scenario.cost_field)
    if not obstacles:
        return sigma_g, np.zeros(N), [frozenset()] * N

    centers = np.array([o.center for o in obstacles])
    radii = np.array([o.radius for o in obstacles])
    penalties = np.array([o.penalty for o in obstacles])
    costs = np.array([o.cost for o in obstacles])

    dx = X[:, 0].reshape(N, 1) - centers[None, :, 0]
    dy = X[:, 1].reshape(N, 1) - centers[None, :, 1]
    d2 = dx * dx + dy * dy
    d = ad.sqrt(d2)

    sigma_o = ad.asum(costs[None, :] * ad.exp(d2 * (-0.5 / (radii * radii))[None, :]), axis=1)
    hat = ad.maximum(np.zeros((N, len(obstacles))), 1.0 - d * (0.5 / radii)[None, :])
    a_obs = -ad.asum(penalties[None, :] * hat, axis=1)

    inside = ad.value_of(d) < (2.0 * radii)[None, :]
    names = [o.nickname for o in obstacles]
    influences = [
        frozenset(names[j] for j in np.nonzero(inside[m])[0]) for m in range(N)
    ]
    return sigma_g + sigma_o, a_obs, influences


def simulate(theta, scenario: Scenario) -> SimResult:
    """Run the N-step forward pass; ``theta`` may carry dual scalars."""
    phys = scenario.physics
    N = phys.n_steps
    curve = CurveParams(theta)
    us = np.arange(N) / N

    X = sample_points(curve, us)
    kappa = curvature_profile(curve, us)
    s = segment_lengths(curve, N)
    c, a_obs, influences = _batched_field_terms(X, scenario, N)

    v = phys.v0
    records: list[StepRecord] = []
    times = []
    for m in range(N):
        a_drive, a_fric, a_air, a_net, t, v_out = _step_dynamics(
            m, v, kappa[m], s[m], a_obs[m], phys
        )
        records.append(
            StepRecord(
                m=m, x=X[m], v_in=v, kappa=kappa[m], a_drive=a_drive,
                a_fric=a_fric, a_air=a_air, a_obs=a_obs[m], a_net=a_net,
                s=s[m], t=t, c=c[m], v_out=v_out, influences=influences[m],
            )
        )
        times.append(t)
        v = v_out

    total_time = ad.asum(ad.stack(times))
    total_cost = ad.asum(c * s)
    total_length = ad.asum(s)
    return SimResult(records, total_time, total_cost, total_length)


def cost_grid(scenario: Scenario, res: int = 100) -> np.ndarray:
    """(res, res) raster of the cost density at cell centers, row-major in y."""
    centers = (np.arange(res) + 0.5) / res
    gx, gy = np.meshgrid(centers, centers)  # gy varies along rows
    x, y = gx.ravel(), gy.ravel()
    values = global_cost((x, y), scenario.cost_field)
    for o in scenario.obstacles:
        d2 = (x - o.center[0]) ** 2 + (y - o.center[1]) ** 2
        values = values + o.cost * np.exp(-d2 / (2.0 * o.radius * o.radius))
    return values.reshape(res, res)


def loss(result: SimResult, p: int = 1):
    """Objective total_time^p + total_cost^p for p in {1, 2, 3}."""
    if p not in (1, 2, 3):
        raise ValueError("objective exponent must be 1, 2, or 3")
    return result.total_time**p + result.total_cost**p


def weighted_loss(result: SimResult, p: int = 1, w_time: float = 1.0, w_cost: float = 1.0):
    if p not in (1, 2, 3):
        raise ValueError("objective exponent must be 1, 2, or 3")
    return w_time * result.total_time**p + w_cost * result.total_cost**p


# -- reference fixture ---------------------------------------------------------


def load_fixture(path=None) -> dict[str, np.ndarray]:
    """The 25-step reference table as column arrays."""
    if path is None:
        ref = importlib.resources.files("railtrace").joinpath("data", FIXTURE_NAME)
        text = ref.read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    rows = list(csv.DictReader(text.splitlines()))
    missing = set(FIXTURE_COLUMNS) - set(rows[0].keys())
    if missing:
        raise ValueError(f"fixture missing columns: {sorted(missing)}")
    return {col: np.array([float(r[col]) for r in rows]) for col in FIXTURE_COLUMNS}


@dataclass
class FixtureRowCheck:
    step: int
    accel_expected: float
    accel_computed: float
    accel_ok: bool
    air_expected: float
    air_computed: float
    air_ok: bool
    velocity_expected: float
    velocity_computed: float
    velocity_ok: bool

    @property
    def ok(self) -> bool:
        return self.accel_ok and self.air_ok and self.velocity_ok


def check_fixture(
    fixture: dict[str, np.ndarray],
    physics: PhysicsParams | None = None,
    accel_tol: float = 2e-3,
    air_tol: float = 1e-3,
    vel_tol: float = 5e-3,
    accel_exact_rows: int = 7,
) -> list[FixtureRowCheck]:
    """Verify the acceleration/drag/velocity laws against the fixture.

    The acceleration law is exact for the first ``accel_exact_rows`` rows;
    afterwards obstacle deceleration may subtract, so the computed value only
    needs to be >= table - tol.
    """
    phys = physics or PhysicsParams()
    steps = fixture["step"].astype(int)
    v_prev = phys.v0
    t_prev = 0.0
    out = []
    for i, step in enumerate(steps):
        kappa = fixture["curvature"][i]
        a_table = fixture["acceleration"][i]
        a_law = phys.a_base * np.exp(-phys.kappa_gain * kappa) - phys.mu_fric - phys.mu_air * v_prev**2
        if i < accel_exact_rows:
            accel_ok = abs(a_law - a_table) < accel_tol
        else:
            accel_ok = a_law >= a_table - accel_tol
        air = phys.mu_air * v_prev**2
        air_ok = abs(air - fixture["air_resistance"][i]) < air_tol
        dt = fixture["time"][i] - t_prev
        v_rec = v_prev + a_table * dt
        vel_ok = abs(v_rec - fixture["velocity"][i]) < vel_tol
        out.append(
            FixtureRowCheck(
                step=int(step),
                accel_expected=float(a_table), accel_computed=float(a_law), accel_ok=bool(accel_ok),
                air_expected=float(fixture["air_resistance"][i]), air_computed=float(air), air_ok=bool(air_ok),
                velocity_expected=float(fixture["velocity"][i]), velocity_computed=float(v_rec), velocity_ok=bool(vel_ok),
            )
        )
        v_prev = fixture["velocity"][i]
        t_prev = fixture["time"][i]
    return out
