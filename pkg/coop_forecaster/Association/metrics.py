from dataclasses import dataclass
from typing import Iterable

from coop_forecaster.Scenario.types import Scenario, TrackKey
from coop_forecaster.Utils.errors import AssociationMetricError

PairKey = tuple[TrackKey, TrackKey]


def _canonical(pair: PairKey) -> PairKey:
    return (pair[0], pair[1]) if pair[0] <= pair[1] else (pair[1], pair[0])


@dataclass
class AssociationCounts:
    true_positives: int = 0
    false_positives: int = 0
    false_negatives: int = 0

    def __add__(self, other: 'AssociationCounts') -> 'AssociationCounts':
        return AssociationCounts(self.true_positives + other.true_positives,
                                 self.false_positives + other.false_positives,
                                 self.false_negatives + other.false_negatives)

    @property
    def precision(self) -> float:
        predicted = self.true_positives + self.false_positives
        return 1.0 if predicted == 0 else self.true_positives / predicted

    @property
    def recall(self) -> float:
        actual = self.true_positives + self.false_negatives
        return 1.0 if actual == 0 else self.true_positives / actual

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 0.0 if p + r == 0 else 2.0 * p * r / (p + r)


def true_pairs(scenario: Scenario) -> set[PairKey]:
    """Every cross-view track pair that observes one physical agent."""
    if scenario.truth is None:
        raise AssociationMetricError(f"scenario {scenario.scenario_id} carries no ground-truth identities")
    keys = scenario.track_keys()
    identities = scenario.truth.identities
    pairs = set()
    for i, a in enumerate(keys):
        for b in keys[i + 1:]:
            if a[0] != b[0] and identities[a] == identities[b]:
                pairs.add(_canonical((a, b)))
    return pairs


def association_counts(predicted: Iterable[PairKey], scenario: Scenario) -> AssociationCounts:
    truth = true_pairs(scenario)
    predicted = {_canonical(pair) for pair in predicted}
    hits = len(predicted & truth)
    return AssociationCounts(hits, len(predicted) - hits, len(truth) - hits)


def association_metrics(predicted: Iterable[PairKey], scenario: Scenario) -> tuple[float, float, float]:
    """Precision, recall and F1; precision is 1 for an empty prediction."""
    counts = association_counts(predicted, scenario)
    return counts.precision, counts.recall, counts.f1
