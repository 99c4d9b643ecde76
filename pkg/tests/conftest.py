import math

import numpy as np
import pytest

from coop_forecaster.config import GenConfig, ModelConfig, TrainConfig
from coop_forecaster.Scenario.types import AgentTrack, LaneSegment, ObservedState, Scenario, Truth, View

TINY_T = 10
TINY_H = 5


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run training-based acceptance tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


# =============================================================================
# CONFIGS
# =============================================================================


@pytest.fixture
def tiny_model_config() -> ModelConfig:
    return ModelConfig(d=8, n_heads=2, motion_sa_layers=1, st_sa_layers=1, edge_sa_layers=1, mfg_layers=1,
                       alg_layers=1, cig_layers=1, K=3, lane_range=50.0, history_steps=TINY_T,
                       future_steps=TINY_H, ffn_ratio=2)


@pytest.fixture
def tiny_gen_config() -> GenConfig:
    return GenConfig(n_agents=4, n_views=3, history_steps=TINY_T, future_steps=TINY_H, arm_length=30.0,
                     lane_sample_step=6.0, occlusion_sectors=1)


@pytest.fixture
def tiny_train_config() -> TrainConfig:
    return TrainConfig(epochs=2, batch_size=2, lr0=1e-2, val_split=0.0)


# =============================================================================
# HAND-BUILT SCENARIOS
# =============================================================================


def make_state(x: float, y: float, heading=(1.0, 0.0), speed: float = 5.0, length: float = 4.5,
               width: float = 1.9) -> ObservedState:
    return ObservedState((float(x), float(y)), tuple(heading), length, width, tuple(heading), speed)


def line_track(track_id: int, start, velocity, steps: int = TINY_T, missing=(), agent_type: str = "car",
               offset=(0.0, 0.0)) -> AgentTrack:
    """Constant-velocity track; `velocity` is metres per step, `missing` lists unobserved steps."""
    speed = math.hypot(*velocity)
    heading = (velocity[0] / speed, velocity[1] / speed) if speed > 0 else (1.0, 0.0)
    frames = []
    for t in range(steps):
        if t in missing:
            frames.append(None)
            continue
        frames.append(make_state(start[0] + offset[0] + t * velocity[0], start[1] + offset[1] + t * velocity[1],
                                 heading, speed * 10.0))
    return AgentTrack(track_id, agent_type, tuple(frames))


def line_future(start, velocity, steps: int = TINY_T, horizon: int = TINY_H) -> tuple:
    return tuple((start[0] + (steps + h) * velocity[0], start[1] + (steps + h) * velocity[1]) for h in range(horizon))


def simple_lanes() -> tuple[LaneSegment, ...]:
    return (
        LaneSegment((-20.0, 0.0), (0.0, 0.0), "straight", "normal"),
        LaneSegment((0.0, 0.0), (20.0, 0.0), "straight", "intersection"),
        LaneSegment((0.0, -20.0), (0.0, 0.0), "left", "normal"),
    )


def two_view_scenario(scenario_id: str = "s0", missing_target=(), offset=(0.0, 0.0)) -> Scenario:
    """
    Ego view sees agents 1 (target, moving +x) and 2 (moving +y); the
    infrastructure view sees agent 1 again (slightly shifted) and agent 3.
    """
    a1, v1 = (-10.0, 0.0), (0.5, 0.0)
    a2, v2 = (5.0, -15.0), (0.0, 0.6)
    a3, v3 = (15.0, 8.0), (-0.4, 0.0)
    ego = View(0, "ego", (
        line_track(1, a1, v1, missing=missing_target),
        line_track(2, a2, v2),
    ), pose=(-20.0, 0.0, 1.0, 0.0))
    infra = View(1, "infrastructure", (
        line_track(7, a1, v1, offset=(0.1, 0.05)),
        line_track(9, a3, v3),
    ), pose=(10.0, 10.0, -math.sqrt(0.5), -math.sqrt(0.5)))
    truth = Truth(
        identities={(0, 1): 1, (0, 2): 2, (1, 7): 1, (1, 9): 3},
        futures={1: line_future(a1, v1), 2: line_future(a2, v2), 3: line_future(a3, v3)},
    )
    scenario = Scenario(scenario_id, (ego, infra), simple_lanes(), TINY_T, TINY_H, 0.1, (0, 1), truth)
    scenario.validate()
    return scenario


@pytest.fixture
def scenario() -> Scenario:
    return two_view_scenario()


# =============================================================================
# FINITE DIFFERENCES
# =============================================================================


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-4)
    return float(np.max(np.abs(analytic - numeric) / scale))


def numeric_gradient(loss_fn, tensor, h: float = 1e-5, max_entries: int | None = None) -> tuple[np.ndarray, list]:
    """Central differences of scalar `loss_fn()` w.r.t. entries of `tensor.data` (optionally a subset)."""
    flat = tensor.data.reshape(-1)
    indices = list(range(flat.size))
    if max_entries is not None and flat.size > max_entries:
        indices = list(np.linspace(0, flat.size - 1, max_entries).astype(int))
    numeric = np.zeros(len(indices))
    for n, i in enumerate(indices):
        original = flat[i]
        flat[i] = original + h
        plus = loss_fn()
        flat[i] = original - h
        minus = loss_fn()
        flat[i] = original
        numeric[n] = (plus - minus) / (2.0 * h)
    return numeric, indices
