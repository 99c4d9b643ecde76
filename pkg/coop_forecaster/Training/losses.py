from dataclasses import dataclass

import numpy as np

from coop_forecaster.Model.fusion import AssociationSet
from coop_forecaster.Model.network import ModelOutput
from coop_forecaster.Model.scene_graph import SceneIndex, rotate_rows
from coop_forecaster.Numerics import tensor as T
from coop_forecaster.Numerics.tensor import Tensor
from coop_forecaster.Scenario.types import Scenario, TrackKey
from coop_forecaster.Utils.errors import MetricError

PROBABILITY_FLOOR = 1e-12


@dataclass
class WinnerSelection:
    winners: np.ndarray  # (M,) k* per decoded agent
    targets: np.ndarray  # (M, H, 2) agent-frame displacement targets


@dataclass
class LossTerms:
    """Per-term sums and the counts they are averaged over."""
    dis_sum: Tensor | float
    dis_count: int
    reg_sum: Tensor | float
    reg_count: int
    cls_sum: Tensor | float
    cls_count: int


def agent_frame_targets(scenario: Scenario, index: SceneIndex, rows: np.ndarray) -> np.ndarray:
    """r_i^T (gt_t - p_i^T) for each decoded row."""
    if scenario.truth is None:
        raise MetricError(f"scenario {scenario.scenario_id} has no ground-truth futures")
    futures = np.stack([scenario.truth.future_of(index.keys[row]) for row in rows])
    offsets = futures - index.current_position[rows][:, None, :]
    return rotate_rows(index.heading[rows], offsets)


def select_winners(locations: np.ndarray, targets: np.ndarray) -> WinnerSelection:
    """k* = argmin_k mean_t ||mu_k^t - target^t||; argmin keeps the lowest k on ties."""
    errors = np.linalg.norm(locations - targets[:, None, :, :], axis=-1).mean(axis=-1)
    return WinnerSelection(np.argmin(errors, axis=1), targets)


def label_vector(association: AssociationSet, index: SceneIndex, positives: set[tuple[TrackKey, TrackKey]]) -> np.ndarray:
    keys = index.keys
    return np.array([1.0 if (keys[i], keys[j]) in positives or (keys[j], keys[i]) in positives else 0.0
                     for i, j in association.candidates])


def loss_dis(association: AssociationSet, labels: np.ndarray) -> tuple[Tensor | float, int]:
    """Summed binary cross-entropy over candidates, softplus(z) - y z, and the candidate count."""
    if association.logits is None or len(association.candidates) == 0:
        return 0.0, 0
    z = association.logits
    return T.sum_(T.softplus(z) - z * labels), len(association.candidates)


def _winner_rows(tensor: Tensor, winners: np.ndarray) -> Tensor:
    count, modes = tensor.shape[0], tensor.shape[1]
    flat = T.reshape(tensor, (count * modes, *tensor.shape[2:]))
    return T.take_rows(flat, np.arange(count) * modes + winners)


def loss_reg(locations: Tensor, scales: Tensor, selection: WinnerSelection) -> tuple[Tensor, int]:
    """Winner-mode Laplace NLL summed over agents, steps and axes: log(2b) + |target - mu| / b."""
    mu = _winner_rows(locations, selection.winners)
    b = _winner_rows(scales, selection.winners)
    nll = T.log(b * 2.0) + T.abs_(T.sub(selection.targets, mu)) / b
    count, horizon = selection.targets.shape[0], selection.targets.shape[1]
    return T.sum_(nll), count * horizon


def loss_cls(probabilities: Tensor, selection: WinnerSelection) -> tuple[Tensor, int]:
    """-log p_k* summed over agents, p floored at 1e-12."""
    count, modes = probabilities.shape
    chosen = T.take_rows(T.reshape(probabilities, (count * modes,)), np.arange(count) * modes + selection.winners)
    return T.sum_(-T.log(T.clamp_min(chosen, PROBABILITY_FLOOR))), count


def scenario_loss_terms(scenario: Scenario, output: ModelOutput,
                        positives: set[tuple[TrackKey, TrackKey]]) -> LossTerms:
    rows = output.decoded_rows
    targets = agent_frame_targets(scenario, output.index, rows)
    selection = select_winners(output.modes.locations.data, targets)
    dis_sum, dis_count = loss_dis(output.association, label_vector(output.association, output.index, positives))
    reg_sum, reg_count = loss_reg(output.modes.locations, output.modes.scales, selection)
    cls_sum, cls_count = loss_cls(output.modes.probabilities, selection)
    return LossTerms(dis_sum, dis_count, reg_sum, reg_count, cls_sum, cls_count)


def combine_terms(terms: list[LossTerms], weights: tuple[float, float, float]) -> tuple[Tensor, dict[str, float]]:
    """Batch means per term (agent-averaged across scenarios), weighted sum as the total."""
    totals = {}
    parts = []
    for name, weight in zip(("dis", "reg", "cls"), weights):
        count = sum(getattr(t, f"{name}_count") for t in terms)
        sums = [getattr(t, f"{name}_sum") for t in terms if getattr(t, f"{name}_count") > 0]
        if count == 0 or not sums:
            totals[name] = 0.0
            continue
        total = sums[0]
        for extra in sums[1:]:
            total = total + extra
        mean = total * (1.0 / count)
        totals[name] = float(mean.item())
        parts.append(mean * weight)
    loss = parts[0]
    for extra in parts[1:]:
        loss = loss + extra
    totals["total"] = float(loss.item())
    return loss, totals
