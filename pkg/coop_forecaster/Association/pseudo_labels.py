"""
Cross-view pseudo labels from per-frame box matching.

For every view pair and every frame the boxes present in both views are
matched by maximum-IoU assignment. Each frame's accepted matches add a vote to
their track pair; pairs with at least `eps_length` votes are kept and
conflicts (a track in several kept pairs) are resolved greedily by vote count,
then mean IoU, then the lower track ids.
"""

from dataclasses import dataclass, field

import numpy as np

from coop_forecaster.Association.hungarian import hungarian_max
from coop_forecaster.Association.pruning import pre_prune, view_pairs
from coop_forecaster.config import LabelGenConfig
from coop_forecaster.Geometry.rect_iou import Rect, iou_bev
from coop_forecaster.Scenario.types import Scenario, TrackKey, View

PairKey = tuple[TrackKey, TrackKey]


@dataclass
class PseudoLabels:
    view_pair: tuple[int, int]
    counts: dict[PairKey, int] = field(default_factory=dict)  # accepted pair -> matched frames
    mean_iou: dict[PairKey, float] = field(default_factory=dict)

    @property
    def pairs(self) -> set[PairKey]:
        return set(self.counts)


@dataclass
class ScenarioLabels:
    scenario_id: str
    per_view_pair: list[PseudoLabels]

    def positives(self) -> set[PairKey]:
        return set().union(*(labels.pairs for labels in self.per_view_pair)) if self.per_view_pair else set()


def frame_weights(view_a: View, view_b: View, candidates: np.ndarray, t: int,
                  tau_iou: float) -> tuple[list[int], list[int], np.ndarray]:
    """IoU matrix over the boxes present at frame t, gated by tau_iou and the candidate mask."""
    rows = [i for i, track in enumerate(view_a.tracks) if track.frames[t] is not None]
    cols = [j for j, track in enumerate(view_b.tracks) if track.frames[t] is not None]
    weights = np.zeros((len(rows), len(cols)))
    for r, i in enumerate(rows):
        rect_a = Rect.from_state(view_a.tracks[i].frames[t])
        for c, j in enumerate(cols):
            if candidates[i, j]:
                weights[r, c] = iou_bev(rect_a, Rect.from_state(view_b.tracks[j].frames[t]))
    weights[weights < tau_iou] = 0.0
    return rows, cols, weights


def resolve_conflicts(counts: dict[PairKey, int], iou_sums: dict[PairKey, float],
                      eps_length: int) -> dict[PairKey, int]:
    accepted = [pair for pair, count in counts.items() if count >= eps_length]
    accepted.sort(key=lambda pair: (-counts[pair], -iou_sums[pair] / counts[pair], pair))
    used: set[TrackKey] = set()
    kept: dict[PairKey, int] = {}
    for pair in accepted:
        if pair[0] in used or pair[1] in used:
            continue
        used.update(pair)
        kept[pair] = counts[pair]
    return kept


def label_view_pair(scenario: Scenario, view_a_id: int, view_b_id: int, cfg: LabelGenConfig) -> PseudoLabels:
    view_a, view_b = scenario.view(view_a_id), scenario.view(view_b_id)
    labels = PseudoLabels((view_a_id, view_b_id))
    if not view_a.tracks or not view_b.tracks:
        return labels
    candidates = pre_prune(view_a, view_b)
    counts: dict[PairKey, int] = {}
    iou_sums: dict[PairKey, float] = {}
    for t in range(scenario.T):
        rows, cols, weights = frame_weights(view_a, view_b, candidates, t, cfg.tau_iou)
        if weights.size == 0:
            continue
        for r, c in hungarian_max(weights):
            if weights[r, c] <= cfg.tau_iou:
                continue
            pair = ((view_a_id, view_a.tracks[rows[r]].track_id), (view_b_id, view_b.tracks[cols[c]].track_id))
            counts[pair] = counts.get(pair, 0) + 1
            iou_sums[pair] = iou_sums.get(pair, 0.0) + float(weights[r, c])

    labels.counts = resolve_conflicts(counts, iou_sums, cfg.eps_length)
    labels.mean_iou = {pair: iou_sums[pair] / counts[pair] for pair in labels.counts}
    return labels


def generate_pseudo_labels(scenario: Scenario, cfg: LabelGenConfig) -> ScenarioLabels:
    return ScenarioLabels(
        scenario.scenario_id,
        [label_view_pair(scenario, a, b, cfg) for a, b in view_pairs(scenario)],
    )
