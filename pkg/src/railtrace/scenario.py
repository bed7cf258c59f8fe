"""World state: obstacles, control points, cost field, physics constants.

Scenarios are plain immutable-by-convention values. Generation is a pure
function of its arguments; the codec produces canonical bytes (sorted keys,
9 significant digits) so equal scenarios serialize identically.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .rng import STREAM_CTRL_JITTER, STREAM_NICKNAMES, STREAM_OBSTACLES, stream

GRID_SIZE = 100

ADJECTIVES = ("small", "big")
NOUNS = (
    "barn", "barrel", "bench", "bridge", "building", "bush", "car", "crate",
    "fence", "flowerbed", "fountain", "garden", "gate", "hill", "house",
    "hut", "kiosk", "lamp", "pond", "river", "rock", "sandbox", "shed",
    "silo", "statue", "tower", "tree", "valley", "wall", "well",
)

COMMAND_KINDS = (
    "add_obstacle",
    "remove_obstacle",
    "move_obstacle",
    "modify_obstacle",
    "modify_ctrl_point",
)

DEFAULT_RADIUS = 0.05
DEFAULT_PENALTY = 5.0
DEFAULT_COST = 3.0


class ScenarioError(ValueError):
    pass


class CommandError(ScenarioError):
    pass


class SchemaError(ScenarioError):
    def __init__(self, fieldname: str, message: str):
        self.fieldname = fieldname
        super().__init__(f"scenario field '{fieldname}': {message}")


def q9(x: float) -> float:
    """Quantize to 9 significant digits (the codec's float precision)."""
    return float(f"{float(x):.9g}")


def to_grid(p) -> tuple[int, int]:
    """World point -> integer cell in the 100x100 grid."""
    x, y = float(p[0]), float(p[1])
    if math.isnan(x) or math.isnan(y):
        raise ScenarioError("cannot grid-quantize NaN coordinates")
    gx = min(max(int(math.floor(x * GRID_SIZE)), 0), GRID_SIZE - 1)
    gy = min(max(int(math.floor(y * GRID_SIZE)), 0), GRID_SIZE - 1)
    return gx, gy


def grid_to_world(g) -> tuple[float, float]:
    """Grid cell -> world coordinates of its center."""
    gx, gy = int(g[0]), int(g[1])
    if not (0 <= gx < GRID_SIZE and 0 <= gy < GRID_SIZE):
        raise ScenarioError(f"grid position ({gx}, {gy}) outside 0..{GRID_SIZE - 1}")
    return (gx + 0.5) / GRID_SIZE, (gy + 0.5) / GRID_SIZE


@dataclass(frozen=True)
class Obstacle:
    nickname: str
    center: tuple[float, float]
    radius: float
    penalty: float
    cost: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ScenarioError(f"obstacle '{self.nickname}': radius must be > 0")
        if self.penalty < 0 or self.cost < 0:
            raise ScenarioError(f"obstacle '{self.nickname}': penalty and cost must be >= 0")

    @property
    def influence_radius(self) -> float:
        return 2.0 * self.radius


@dataclass(frozen=True)
class PhysicsParams:
    a_base: float = 5.0
    kappa_gain: float = 0.15
    mu_fric: float = 0.2
    mu_air: float = 0.5
    v0: float = 1.0
    v_min: float = 0.05
    v_max: float = 5.0
    n_steps: int = 100

    def __post_init__(self):
        for name in ("a_base", "kappa_gain", "mu_fric", "mu_air", "v0", "v_min", "v_max"):
            if getattr(self, name) <= 0:
                raise ScenarioError(f"physics parameter {name} must be positive")
        if self.v_min >= self.v_max:
            raise ScenarioError("v_min must be < v_max")
        if self.n_steps < 2:
            raise ScenarioError("n_steps must be >= 2")


@dataclass(frozen=True)
class CostField:
    seed: int
    frequency: float = 3.0
    octaves: int = 2
    amplitude: float = 0.25
    offset: float = 0.35

    def __post_init__(self):
        if self.octaves < 1:
            raise ScenarioError("cost field octaves must be >= 1")
        if self.offset < self.amplitude:
            raise ScenarioError("cost field offset must be >= amplitude (keeps cost nonnegative)")


@dataclass
class Scenario:
    obstacles: list[Obstacle]
    ctrl_points: np.ndarray  # (n+1, 2) float64; first/last are fixed
    cost_field: CostField
    physics: PhysicsParams
    seed: int = 0

    def __post_init__(self):
        self.ctrl_points = np.asarray(self.ctrl_points, dtype=float)
        if self.ctrl_points.ndim != 2 or self.ctrl_points.shape[1] != 2:
            raise ScenarioError("ctrl_points must have shape (n+1, 2)")
        if len(self.ctrl_points) < 2:
            raise ScenarioError("need at least 2 control points")
        names = [o.nickname for o in self.obstacles]
        if len(set(names)) != len(names):
            dup = next(n for n in names if names.count(n) > 1)
            raise ScenarioError(f"duplicate obstacle nickname '{dup}'")

    @property
    def fixed_indices(self) -> tuple[int, int]:
        return 0, len(self.ctrl_points) - 1

    def obstacle(self, nickname: str) -> Obstacle:
        for o in self.obstacles:
            if o.nickname == nickname:
                return o
        raise CommandError(f"no obstacle named '{nickname}'")


def generate_scenario(
    seed: int,
    n_obstacles: int,
    n_ctrl: int,
    physics: PhysicsParams | None = None,
    cost_field: CostField | None = None,
) -> Scenario:
    """Seeded random world; identical arguments give identical scenarios."""
    if n_ctrl < 2:
        raise ScenarioError("n_ctrl must be >= 2")
    vocab_size = len(ADJECTIVES) * len(NOUNS)
    if n_obstacles > vocab_size:
        raise ScenarioError(
            f"nickname vocabulary exhausted: {n_obstacles} obstacles requested, "
            f"{vocab_size} nicknames available"
        )

    name_rng = stream(seed, STREAM_NICKNAMES)
    combos = [f"{a} {n}" for a in ADJECTIVES for n in NOUNS]
    picks = name_rng.permutation(vocab_size)[:n_obstacles]
    nicknames = [combos[i] for i in picks]

    obs_rng = stream(seed, STREAM_OBSTACLES)
    obstacles = []
    for nickname in nicknames:
        cx, cy = obs_rng.uniform(0.1, 0.9, size=2)
        radius = obs_rng.uniform(0.03, 0.07)
        penalty = obs_rng.uniform(2.0, 6.0)
        cost = obs_rng.uniform(0.3, 1.2)
        obstacles.append(
            Obstacle(nickname, (q9(cx), q9(cy)), q9(radius), q9(penalty), q9(cost))
        )

    ts = np.linspace(0.0, 1.0, n_ctrl)
    pts = np.stack([0.05 + 0.9 * ts, 0.05 + 0.9 * ts], axis=1)
    if n_ctrl > 2:
        jitter = stream(seed, STREAM_CTRL_JITTER).normal(0.0, 0.02, size=(n_ctrl - 2, 2))
        pts[1:-1] += jitter
    pts = np.array([[q9(x), q9(y)] for x, y in pts])

    return Scenario(
        obstacles=obstacles,
        ctrl_points=pts,
        cost_field=cost_field or CostField(seed=seed),
        physics=physics or PhysicsParams(),
        seed=seed,
    )


# -- state-modification commands ---------------------------------------------


@dataclass(frozen=True)
class StateCommand:
    """One state change; positions are grid cells, other fields world units."""

    kind: str
    nickname: str | None = None
    center: tuple[int, int] | None = None
    radius: float | None = None
    penalty: float | None = None
    cost: float | None = None
    index: int | None = None
    position: tuple[int, int] | None = None

    def __post_init__(self):
        if self.kind not in COMMAND_KINDS:
            raise CommandError(f"unknown command kind '{self.kind}'")
        need = {
            "add_obstacle": ("nickname", "center"),
            "remove_obstacle": ("nickname",),
            "move_obstacle": ("nickname", "center"),
            "modify_obstacle": ("nickname",),
            "modify_ctrl_point": ("index", "position"),
        }[self.kind]
        for name in need:
            if getattr(self, name) is None:
                raise CommandError(f"{self.kind} requires field '{name}'")
        for grid in (self.center, self.position):
            if grid is not None:
                gx, gy = grid
                if not (0 <= int(gx) < GRID_SIZE and 0 <= int(gy) < GRID_SIZE):
                    raise CommandError(
                        f"{self.kind}: grid position ({gx}, {gy}) outside 0..{GRID_SIZE - 1}"
                    )

    @staticmethod
    def from_obj(obj: dict) -> "StateCommand":
        """Validate a JSON-style dict ({"type": ..., ...}) into a command."""
        if not isinstance(obj, dict):
            raise CommandError(f"command must be an object, got {type(obj).__name__}")
        kind = obj.get("type") or obj.get("kind")
        if kind is None:
            raise CommandError("command missing 'type'")
        known = {"type", "kind", "nickname", "center", "radius", "penalty", "cost", "index", "position"}
        unknown = set(obj) - known
        if unknown:
            raise CommandError(f"unknown command field(s): {sorted(unknown)}")

        def grid(key):
            v = obj.get(key)
            if v is None:
                return None
            if not (isinstance(v, (list, tuple)) and len(v) == 2):
                raise CommandError(f"{key} must be [gx, gy]")
            return int(v[0]), int(v[1])

        def num(key):
            v = obj.get(key)
            return None if v is None else float(v)

        idx = obj.get("index")
        return StateCommand(
            kind=str(kind),
            nickname=obj.get("nickname"),
            center=grid("center"),
            radius=num("radius"),
            penalty=num("penalty"),
            cost=num("cost"),
            index=None if idx is None else int(idx),
            position=grid("position"),
        )


def apply_command(s: Scenario, c: StateCommand) -> Scenario:
    """Apply one command; returns a new scenario, never mutates the input."""
    obstacles = list(s.obstacles)
    ctrl = s.ctrl_points.copy()

    if c.kind == "add_obstacle":
        if any(o.nickname == c.nickname for o in obstacles):
            raise CommandError(f"obstacle '{c.nickname}' already exists")
        cx, cy = grid_to_world(c.center)
        obstacles.append(
            Obstacle(
                nickname=c.nickname,
                center=(cx, cy),
                radius=c.radius if c.radius is not None else DEFAULT_RADIUS,
                penalty=c.penalty if c.penalty is not None else DEFAULT_PENALTY,
                cost=c.cost if c.cost is not None else DEFAULT_COST,
            )
        )
    elif c.kind == "remove_obstacle":
        target = s.obstacle(c.nickname)
        obstacles = [o for o in obstacles if o.nickname != target.nickname]
    elif c.kind == "move_obstacle":
        target = s.obstacle(c.nickname)
        moved = replace(target, center=grid_to_world(c.center))
        obstacles = [moved if o.nickname == target.nickname else o for o in obstacles]
    elif c.kind == "modify_obstacle":
        target = s.obstacle(c.nickname)
        changes = {
            k: v
            for k, v in (("radius", c.radius), ("penalty", c.penalty), ("cost", c.cost))
            if v is not None
        }
        if not changes:
            raise CommandError("modify_obstacle changes nothing (give radius/penalty/cost)")
        modified = replace(target, **changes)
        obstacles = [modified if o.nickname == target.nickname else o for o in obstacles]
    else:  # modify_ctrl_point
        if not 0 <= c.index < len(ctrl):
            raise CommandError(f"control point index {c.index} out of range 0..{len(ctrl) - 1}")
        if c.index in s.fixed_indices:
            raise CommandError(f"control point {c.index} is a fixed endpoint")
        ctrl[c.index] = grid_to_world(c.position)

    return Scenario(
        obstacles=obstacles,
        ctrl_points=ctrl,
        cost_field=s.cost_field,
        physics=s.physics,
        seed=s.seed,
    )


# -- codec --------------------------------------------------------------------


def scenario_to_obj(s: Scenario) -> dict:
    return {
        "seed": int(s.seed),
        "physics": {
            "a_base": q9(s.physics.a_base),
            "kappa_gain": q9(s.physics.kappa_gain),
            "mu_fric": q9(s.physics.mu_fric),
            "mu_air": q9(s.physics.mu_air),
            "v0": q9(s.physics.v0),
            "v_min": q9(s.physics.v_min),
            "v_max": q9(s.physics.v_max),
            "n_steps": int(s.physics.n_steps),
        },
        "cost_field": {
            "seed": int(s.cost_field.seed),
            "frequency": q9(s.cost_field.frequency),
            "octaves": int(s.cost_field.octaves),
            "amplitude": q9(s.cost_field.amplitude),
            "offset": q9(s.cost_field.offset),
        },
        "ctrl_points": [[q9(x), q9(y)] for x, y in s.ctrl_points],
        "obstacles": [
            {
                "nickname": o.nickname,
                "center": [q9(o.center[0]), q9(o.center[1])],
                "radius": q9(o.radius),
                "penalty": q9(o.penalty),
                "cost": q9(o.cost),
            }
            for o in s.obstacles
        ],
    }


def encode_scenario(s: Scenario) -> bytes:
    """Canonical bytes: sorted keys, compact separators, 9-digit floats."""
    return json.dumps(scenario_to_obj(s), sort_keys=True, separators=(",", ":")).encode("utf-8")


def _require(obj: dict, key: str, kind, path: str):
    if key not in obj:
        raise SchemaError(f"{path}{key}", "missing")
    v = obj[key]
    if kind is float and isinstance(v, (int, float)) and not isinstance(v, bool):
        return float(v)
    if kind is int and isinstance(v, int) and not isinstance(v, bool):
        return int(v)
    if kind in (list, dict, str) and isinstance(v, kind):
        return v
    raise SchemaError(f"{path}{key}", f"expected {kind.__name__}, got {type(v).__name__}")


def _pair(v, path: str) -> tuple[float, float]:
    if not (isinstance(v, list) and len(v) == 2 and all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in v)):
        raise SchemaError(path, "expected [x, y] numbers")
    return float(v[0]), float(v[1])


def scenario_from_obj(obj: dict) -> Scenario:
    if not isinstance(obj, dict):
        raise SchemaError("$", "expected a JSON object")
    seed = _require(obj, "seed", int, "")
    phys_o = _require(obj, "physics", dict, "")
    physics = PhysicsParams(
        a_base=_require(phys_o, "a_base", float, "physics."),
        kappa_gain=_require(phys_o, "kappa_gain", float, "physics."),
        mu_fric=_require(phys_o, "mu_fric", float, "physics."),
        mu_air=_require(phys_o, "mu_air", float, "physics."),
        v0=_require(phys_o, "v0", float, "physics."),
        v_min=_require(phys_o, "v_min", float, "physics."),
        v_max=_require(phys_o, "v_max", float, "physics."),
        n_steps=_require(phys_o, "n_steps", int, "physics."),
    )
    cf_o = _require(obj, "cost_field", dict, "")
    cost_field = CostField(
        seed=_require(cf_o, "seed", int, "cost_field."),
        frequency=_require(cf_o, "frequency", float, "cost_field."),
        octaves=_require(cf_o, "octaves", int, "cost_field."),
        amplitude=_require(cf_o, "amplitude", float, "cost_field."),
        offset=_require(cf_o, "offset", float, "cost_field."),
    )
    ctrl_raw = _require(obj, "ctrl_points", list, "")
    ctrl = [_pair(p, f"ctrl_points[{i}]") for i, p in enumerate(ctrl_raw)]
    if len(ctrl) < 2:
        raise SchemaError("ctrl_points", "need at least 2 points")
    obstacles = []
    seen = set()
    for i, o in enumerate(_require(obj, "obstacles", list, "")):
        if not isinstance(o, dict):
            raise SchemaError(f"obstacles[{i}]", "expected object")
        path = f"obstacles[{i}]."
        nickname = _require(o, "nickname", str, path)
        if nickname in seen:
            raise SchemaError(f"{path}nickname", f"duplicate nickname '{nickname}'")
        seen.add(nickname)
        obstacles.append(
            Obstacle(
                nickname=nickname,
                center=_pair(_require(o, "center", list, path), f"{path}center"),
                radius=_require(o, "radius", float, path),
                penalty=_require(o, "penalty", float, path),
                cost=_require(o, "cost", float, path),
            )
        )
    return Scenario(
        obstacles=obstacles,
        ctrl_points=np.array(ctrl),
        cost_field=cost_field,
        physics=physics,
        seed=seed,
    )


def decode_scenario(data: bytes | str) -> Scenario:
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as e:
        raise SchemaError("$", f"invalid JSON: {e}") from e
    return scenario_from_obj(obj)


def scenarios_equal(a: Scenario, b: Scenario) -> bool:
    return encode_scenario(a) == encode_scenario(b)
