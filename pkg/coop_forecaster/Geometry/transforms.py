import math
from dataclasses import replace

import numpy as np

from coop_forecaster.Scenario.types import AgentTrack, LaneSegment, ObservedState, Scenario, Truth, View
from coop_forecaster.Utils.errors import GeometryError
from coop_forecaster.Utils.logger import get_logger

UNIT_TOLERANCE = 1e-6
RENORMALIZE_TOLERANCE = 1e-3


def checked_heading(r) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    norm = float(np.hypot(r[0], r[1]))
    deviation = abs(norm - 1.0)
    if deviation <= UNIT_TOLERANCE:
        return r
    if deviation <= RENORMALIZE_TOLERANCE:
        get_logger().log_warning(f"heading {r.tolist()} has norm {norm:.6f}; normalized")
        return r / norm
    raise GeometryError(f"heading {r.tolist()} is not a unit vector (norm {norm})")


def rotate_into_frame(r, v) -> np.ndarray:
    """Express v in the frame whose +x axis is the unit heading r: (c vx + s vy, -s vx + c vy)."""
    c, s = checked_heading(r)
    v = np.asarray(v, dtype=np.float64)
    return np.array([c * v[0] + s * v[1], -s * v[0] + c * v[1]])


def rotate_batch(r, vectors: np.ndarray) -> np.ndarray:
    """rotate_into_frame for every row of an (..., 2) array."""
    c, s = checked_heading(r)
    vectors = np.asarray(vectors, dtype=np.float64)
    return np.stack([c * vectors[..., 0] + s * vectors[..., 1], -s * vectors[..., 0] + c * vectors[..., 1]], axis=-1)


def rotate_out_of_frame(r, vectors: np.ndarray) -> np.ndarray:
    """Inverse of rotate_batch: agent-frame vectors back to world axes."""
    c, s = checked_heading(r)
    vectors = np.asarray(vectors, dtype=np.float64)
    return np.stack([c * vectors[..., 0] - s * vectors[..., 1], s * vectors[..., 0] + c * vectors[..., 1]], axis=-1)


def _rigid(theta: float, translation) -> tuple:
    c, s = math.cos(theta), math.sin(theta)
    tx, ty = float(translation[0]), float(translation[1])

    def point(p):
        return (c * p[0] - s * p[1] + tx, s * p[0] + c * p[1] + ty)

    def direction(u):
        return (c * u[0] - s * u[1], s * u[0] + c * u[1])

    return point, direction


def apply_rigid_transform(scenario: Scenario, theta: float, translation) -> Scenario:
    """Rotate every position, heading and lane by theta, then translate."""
    point, direction = _rigid(theta, translation)

    def state(s: ObservedState | None) -> ObservedState | None:
        if s is None:
            return None
        return replace(s, position=point(s.position), heading=direction(s.heading),
                       bbox_heading=direction(s.bbox_heading))

    views = []
    for view in scenario.views:
        tracks = tuple(AgentTrack(t.track_id, t.agent_type, tuple(state(f) for f in t.frames)) for t in view.tracks)
        pose = None
        if view.pose is not None:
            pose = (*point(view.pose[:2]), *direction(view.pose[2:]))
        views.append(View(view.view_id, view.kind, tracks, pose))
    lanes = tuple(LaneSegment(point(lane.start), point(lane.end), lane.turn, lane.road_type)
                  for lane in scenario.lanes)
    truth = None
    if scenario.truth is not None:
        futures = {agent: tuple(point(p) for p in positions) for agent, positions in scenario.truth.futures.items()}
        truth = Truth(dict(scenario.truth.identities), futures)
    return replace(scenario, views=tuple(views), lanes=lanes, truth=truth)
