import itertools
from dataclasses import replace

import numpy as np
import pytest
from conftest import line_track, two_view_scenario

from coop_forecaster.Association.hungarian import assignment_weight, hungarian_max
from coop_forecaster.Association.labels_io import read_labels, write_labels
from coop_forecaster.Association.metrics import AssociationCounts, association_counts, association_metrics, true_pairs
from coop_forecaster.Association.pruning import candidate_pairs, is_pruned, track_mbr, view_pairs
from coop_forecaster.Association.pseudo_labels import generate_pseudo_labels, resolve_conflicts
from coop_forecaster.config import LabelGenConfig
from coop_forecaster.Utils.errors import AssociationMetricError, ContractError

TARGET_PAIR = ((0, 1), (1, 7))


def _brute_force(weights: np.ndarray) -> float:
    n, m = weights.shape
    if n <= m:
        return max(sum(weights[i, c] for i, c in enumerate(cols)) for cols in itertools.permutations(range(m), n))
    return _brute_force(weights.T)


# =============================================================================
# HUNGARIAN ASSIGNMENT
# =============================================================================


@pytest.mark.parametrize("shape", [(3, 3), (4, 4), (2, 5), (5, 3), (1, 4)])
def test_hungarian_matches_brute_force(shape):
    rng = np.random.default_rng(sum(shape))
    for _ in range(10):
        weights = rng.uniform(0.0, 1.0, size=shape)
        pairs = hungarian_max(weights)
        assert len(pairs) == min(shape)
        assert len({row for row, _ in pairs}) == len({col for _, col in pairs}) == len(pairs)
        assert assignment_weight(weights, pairs) == pytest.approx(_brute_force(weights))


def test_hungarian_edge_cases():
    assert hungarian_max(np.zeros((0, 3))) == []
    assert hungarian_max([[0.2, 0.9], [0.8, 0.1]]) == [(0, 1), (1, 0)]
    with pytest.raises(ContractError):
        hungarian_max([[np.inf, 0.0], [0.0, 0.0]])


# =============================================================================
# PRUNING
# =============================================================================


def test_pruning_by_type_and_bounding_rectangle():
    a = line_track(1, (0.0, 0.0), (1.0, 0.0))
    near = line_track(2, (0.0, 3.0), (1.0, 0.0))
    far = line_track(3, (0.0, 30.0), (1.0, 0.0))
    bike = line_track(4, (0.0, 0.0), (1.0, 0.0), agent_type="cyclist")
    assert track_mbr(a) == (-2.0, -2.0, 11.0, 2.0)
    assert not is_pruned(a, near)
    assert is_pruned(a, far)
    assert is_pruned(a, bike)


def test_candidate_pairs_follow_view_order(scenario):
    assert view_pairs(scenario) == [(0, 1)]
    assert candidate_pairs(scenario) == [TARGET_PAIR]


# =============================================================================
# PSEUDO LABELS
# =============================================================================


def test_pseudo_labels_find_the_shared_agent(scenario):
    labels = generate_pseudo_labels(scenario, LabelGenConfig())
    assert labels.positives() == {TARGET_PAIR}
    per_pair = labels.per_view_pair[0]
    assert per_pair.counts[TARGET_PAIR] == scenario.T
    assert 0.8 < per_pair.mean_iou[TARGET_PAIR] <= 1.0


def test_short_overlaps_are_rejected():
    scenario = two_view_scenario(missing_target=tuple(range(6)))
    assert generate_pseudo_labels(scenario, LabelGenConfig(eps_length=5)).positives() == set()
    assert generate_pseudo_labels(scenario, LabelGenConfig(eps_length=4)).positives() == {TARGET_PAIR}


def test_conflicts_keep_the_most_supported_pair():
    a, b, c = (0, 1), (1, 5), (1, 6)
    counts = {(a, b): 6, (a, c): 8}
    kept = resolve_conflicts(counts, {(a, b): 5.4, (a, c): 4.0}, eps_length=5)
    assert kept == {(a, c): 8}
    tied = resolve_conflicts({(a, b): 6, (a, c): 6}, {(a, b): 3.0, (a, c): 4.2}, eps_length=5)
    assert tied == {(a, c): 6}


def test_labels_file_round_trip(tmp_path, scenario):
    labels = generate_pseudo_labels(scenario, LabelGenConfig())
    path = str(tmp_path / "labels.jsonl")
    write_labels([labels], path)
    loaded = read_labels(path)
    assert loaded[scenario.scenario_id].positives() == labels.positives()


# =============================================================================
# ASSOCIATION METRICS
# =============================================================================


def test_true_pairs_and_counts(scenario):
    assert true_pairs(scenario) == {TARGET_PAIR}
    counts = association_counts([((1, 7), (0, 1)), ((0, 2), (1, 9))], scenario)
    assert counts == AssociationCounts(1, 1, 0)
    assert association_metrics([], scenario) == (1.0, 0.0, 0.0)
    precision, recall, f1 = association_metrics([TARGET_PAIR], scenario)
    assert (precision, recall, f1) == (1.0, 1.0, 1.0)


def test_counts_add_up():
    total = AssociationCounts(2, 1, 0) + AssociationCounts(1, 0, 3)
    assert total == AssociationCounts(3, 1, 3)
    assert total.precision == 0.75
    assert total.recall == 0.5
    assert total.f1 == pytest.approx(0.6)


def test_metrics_need_ground_truth(scenario):
    with pytest.raises(AssociationMetricError):
        true_pairs(replace(scenario, truth=None))
