"""
Array view of one scenario that the encoders and fusion layers index into.

Tracks with fewer than two observed frames carry no motion and are left out.
Track order is (view_id, track_id); missing frames hold placeholder positions
that every encoder masks out.
"""

import math
from dataclasses import dataclass

import numpy as np

from coop_forecaster.Association.pruning import candidate_pairs
from coop_forecaster.config import ModelConfig
from coop_forecaster.Scenario.types import ROAD_TYPES, TURNS, Scenario, TrackKey
from coop_forecaster.Utils.errors import EncodingError

MIN_TRACK_FRAMES = 2


def rotate_rows(headings: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Row-wise frame rotation: headings (N, 2), vectors (N, ..., 2)."""
    shape = (headings.shape[0],) + (1,) * (vectors.ndim - 2)
    c = headings[:, 0].reshape(shape)
    s = headings[:, 1].reshape(shape)
    return np.stack([c * vectors[..., 0] + s * vectors[..., 1], -s * vectors[..., 0] + c * vectors[..., 1]], axis=-1)


def lane_attribute_index(turn: str, road_type: str) -> int:
    return TURNS.index(turn) * len(ROAD_TYPES) + ROAD_TYPES.index(road_type)


def heading_bin(r_i: np.ndarray, r_j: np.ndarray, n_bins: int = 12) -> int:
    """Relative heading of r_j seen from r_i, in bins of 360/n_bins degrees centred on 0."""
    x = r_i[0] * r_j[0] + r_i[1] * r_j[1]
    y = -r_i[1] * r_j[0] + r_i[0] * r_j[1]
    width = 2.0 * math.pi / n_bins
    return int(math.floor(math.atan2(y, x) / width + 0.5)) % n_bins


@dataclass
class SceneIndex:
    scenario_id: str
    keys: list[TrackKey]
    view_ids: np.ndarray  # (N,)
    ego_view_mask: np.ndarray  # (N,) True for tracks of the ego view
    positions: np.ndarray  # (N, T, 2) world positions, placeholders at missing steps
    observed: np.ndarray  # (N, T) bool
    last_step: np.ndarray  # (N,) last observed step
    current_position: np.ndarray  # (N, 2)
    heading: np.ndarray  # (N, 2) reference heading
    anchor_position: np.ndarray  # (2,) ego pose
    anchor_heading: np.ndarray  # (2,)
    candidates: list[tuple[int, int]]  # non-pruned cross-view pairs, first index in the earlier view
    lane_starts: np.ndarray  # (L, 2)
    lane_vectors: np.ndarray  # (L, 2)
    lane_attrs: np.ndarray  # (L,) attribute-table rows
    lane_in_range: np.ndarray  # (N, L) bool

    @property
    def n_tracks(self) -> int:
        return len(self.keys)

    @property
    def present_now(self) -> np.ndarray:
        return self.observed[:, -1]

    def index_of(self, key: TrackKey) -> int:
        return self.keys.index(key)


def build_scene_index(scenario: Scenario, cfg: ModelConfig) -> SceneIndex:
    if scenario.T != cfg.history_steps:
        raise EncodingError(f"scenario {scenario.scenario_id} has T={scenario.T}, model expects {cfg.history_steps}")
    ego = scenario.ego_view
    if ego.pose is None:
        raise EncodingError(f"scenario {scenario.scenario_id}: ego view carries no pose")

    keys = [key for key in scenario.track_keys() if scenario.track(key).n_observed >= MIN_TRACK_FRAMES]
    tracks = [scenario.track(key) for key in keys]
    n, steps = len(keys), scenario.T
    positions = np.zeros((n, steps, 2))
    observed = np.zeros((n, steps), dtype=bool)
    for i, track in enumerate(tracks):
        positions[i] = track.positions()
        observed[i] = track.observed
    last_step = np.array([track.last_step for track in tracks], dtype=np.int64)
    current = np.array([track.current.position for track in tracks]).reshape(n, 2)
    heading = np.array([track.reference_heading() for track in tracks]).reshape(n, 2)

    position_of = {key: i for i, key in enumerate(keys)}
    candidates = [(position_of[a], position_of[b]) for a, b in candidate_pairs(scenario)
                  if a in position_of and b in position_of]

    lane_starts = np.array([lane.start for lane in scenario.lanes], dtype=np.float64).reshape(-1, 2)
    lane_ends = np.array([lane.end for lane in scenario.lanes], dtype=np.float64).reshape(-1, 2)
    lane_attrs = np.array([lane_attribute_index(lane.turn, lane.road_type) for lane in scenario.lanes], dtype=np.int64)
    distances = np.linalg.norm(current[:, None, :] - lane_starts[None, :, :], axis=-1)

    return SceneIndex(
        scenario_id=scenario.scenario_id,
        keys=keys,
        view_ids=np.array([key[0] for key in keys], dtype=np.int64),
        ego_view_mask=np.array([key[0] == ego.view_id for key in keys], dtype=bool),
        positions=positions,
        observed=observed,
        last_step=last_step,
        current_position=current,
        heading=heading,
        anchor_position=np.array(ego.pose[:2], dtype=np.float64),
        anchor_heading=np.array(ego.pose[2:], dtype=np.float64),
        candidates=candidates,
        lane_starts=lane_starts,
        lane_vectors=lane_ends - lane_starts,
        lane_attrs=lane_attrs,
        lane_in_range=distances <= cfg.lane_range,
    )


def connected_components(n_nodes: int, edges: list[tuple[int, int]]) -> list[list[int]]:
    """Union-find components, each sorted, listed by smallest member."""
    parent = list(range(n_nodes))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        root_a, root_b = find(a), find(b)
        if root_a != root_b:
            parent[max(root_a, root_b)] = min(root_a, root_b)
    groups: dict[int, list[int]] = {}
    for node in range(n_nodes):
        groups.setdefault(find(node), []).append(node)
    return sorted(groups.values(), key=lambda members: members[0])


def representative(index: SceneIndex, members: list[int]) -> int:
    """Ego-view member if any, otherwise the member with most observed frames; lowest index breaks ties."""
    pool = [m for m in members if index.ego_view_mask[m]] or members
    return min(pool, key=lambda m: (-int(index.observed[m].sum()), m))
