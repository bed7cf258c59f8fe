import numpy as np
import pytest

from railtrace.scenario import CostField, Obstacle, PhysicsParams, Scenario


@pytest.fixture
def flat_cost_field():
    """Perlin amplitude zero: cost density is exactly the offset."""
    return CostField(seed=0, frequency=3.0, octaves=1, amplitude=0.0, offset=0.35)


def make_scenario(
    ctrl_points,
    obstacles=(),
    n_steps=100,
    cost_field=None,
    physics=None,
    seed=0,
):
    return Scenario(
        obstacles=list(obstacles),
        ctrl_points=np.asarray(ctrl_points, dtype=float),
        cost_field=cost_field or CostField(seed=seed),
        physics=physics or PhysicsParams(n_steps=n_steps),
        seed=seed,
    )


def straight_scenario(n_steps=100, cost_field=None, **kw):
    return make_scenario(
        [[0.05, 0.05], [0.95, 0.95]],
        n_steps=n_steps,
        cost_field=cost_field,
        **kw,
    )


def obstacle(nickname="small pond", center=(0.5, 0.5), radius=0.05, penalty=2.0, cost=1.0):
    return Obstacle(nickname=nickname, center=center, radius=radius, penalty=penalty, cost=cost)
