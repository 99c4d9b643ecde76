import numpy as np

from coop_forecaster.Scenario.types import AgentTrack, Scenario, TrackKey, View

MBR_MARGIN = 2.0  # metres added on every side of a track's bounding rectangle


def track_mbr(track: AgentTrack, margin: float = MBR_MARGIN) -> tuple[float, float, float, float]:
    """Axis-aligned rectangle (x_min, y_min, x_max, y_max) of the observed positions, inflated by `margin`."""
    points = np.array([state.position for state in track.frames if state is not None])
    x_min, y_min = points.min(axis=0)
    x_max, y_max = points.max(axis=0)
    return x_min - margin, y_min - margin, x_max + margin, y_max + margin


def _disjoint(a: tuple, b: tuple) -> bool:
    return a[2] < b[0] or b[2] < a[0] or a[3] < b[1] or b[3] < a[1]


def is_pruned(track_a: AgentTrack, track_b: AgentTrack) -> bool:
    if track_a.agent_type != track_b.agent_type:
        return True
    return _disjoint(track_mbr(track_a), track_mbr(track_b))


def pre_prune(view_a: View, view_b: View) -> np.ndarray:
    """Candidate mask over view_a.tracks x view_b.tracks; True = survives pruning."""
    boxes_b = [track_mbr(track) for track in view_b.tracks]
    mask = np.zeros((len(view_a.tracks), len(view_b.tracks)), dtype=bool)
    for i, track_a in enumerate(view_a.tracks):
        box_a = track_mbr(track_a)
        for j, track_b in enumerate(view_b.tracks):
            mask[i, j] = track_a.agent_type == track_b.agent_type and not _disjoint(box_a, boxes_b[j])
    return mask


def view_order(scenario: Scenario) -> list[int]:
    """Ego view first, then the others by ascending view id."""
    ego = scenario.ego_view.view_id
    return [ego] + sorted(view.view_id for view in scenario.views if view.view_id != ego)


def view_pairs(scenario: Scenario) -> list[tuple[int, int]]:
    order = view_order(scenario)
    return [(order[a], order[b]) for a in range(len(order)) for b in range(a + 1, len(order))]


def candidate_pairs(scenario: Scenario) -> list[tuple[TrackKey, TrackKey]]:
    """Every non-pruned cross-view track pair in canonical view-pair order."""
    pairs = []
    for view_a, view_b in view_pairs(scenario):
        first, second = scenario.view(view_a), scenario.view(view_b)
        mask = pre_prune(first, second)
        for i, j in zip(*np.nonzero(mask)):
            pairs.append(((view_a, first.tracks[i].track_id), (view_b, second.tracks[j].track_id)))
    return pairs
