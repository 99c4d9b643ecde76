"""
Evaluation loops shared by `eval`, `robust` and training-time validation.

Every harness perturbs the scenarios, hands them to a `Forecaster` and reduces
the world-frame forecasts to a `MetricsReport` plus association counts.
"""

from dataclasses import dataclass, replace
from typing import Sequence

from coop_forecaster.Association.metrics import AssociationCounts, association_counts
from coop_forecaster.config import DEFAULT_EVAL_CONFIG, EvalConfig
from coop_forecaster.Evaluation.metrics import MetricsReport, agent_row, forecast_metrics
from coop_forecaster.Geometry.resync import drop_latest, resync_track
from coop_forecaster.Model.base_forecaster import Forecaster
from coop_forecaster.Numerics.params import Rng
from coop_forecaster.Scenario.dataset import mask_views
from coop_forecaster.Scenario.types import AgentTrack, Scenario
from coop_forecaster.Utils.errors import MetricError, ResyncError
from coop_forecaster.Utils.logger import get_logger

COOPERATION_SETTINGS = {
    "vehicle-only": ("infrastructure", "vehicle"),
    "V2I": ("vehicle",),
    "V2V": ("infrastructure",),
    "V2V&I": (),
}


@dataclass
class EvaluationResult:
    forecaster: str
    scenarios: int
    metrics: MetricsReport
    association: AssociationCounts

    def as_record(self, setting: str, value="") -> dict:
        return {
            "setting": setting,
            "value": value,
            "forecaster": self.forecaster,
            "scenarios": self.scenarios,
            **self.metrics.as_record(),
            "assoc_precision": self.association.precision,
            "assoc_recall": self.association.recall,
            "assoc_f1": self.association.f1,
        }


def _evaluated_keys(scenario: Scenario, target_only: bool) -> list:
    if target_only:
        return [scenario.target]
    ego = scenario.ego_view
    return [(ego.view_id, track.track_id) for track in sorted(ego.tracks, key=lambda t: t.track_id)
            if track.n_observed >= 2]


def evaluate(forecaster: Forecaster, scenarios: Sequence[Scenario],
             eval_config: EvalConfig = DEFAULT_EVAL_CONFIG) -> EvaluationResult:
    rows, counts = [], AssociationCounts()
    for scenario in scenarios:
        if scenario.truth is None:
            raise MetricError(f"scenario {scenario.scenario_id} carries no ground truth")
        scenario = mask_views(scenario, eval_config.mask_views)
        forecast = forecaster.predict(scenario)
        for key in _evaluated_keys(scenario, eval_config.target_only):
            agent = forecast.for_track(key)
            if agent is None:
                raise MetricError(f"scenario {scenario.scenario_id}: {forecaster.name} has no forecast for track {key}")
            rows.append(agent_row(scenario.scenario_id, f"{key[0]}:{key[1]}", agent.world_trajectories(),
                                  scenario.truth.future_of(key), eval_config.miss_threshold))
        counts = counts + association_counts(forecast.associations, scenario)
    return EvaluationResult(forecaster.name, len(scenarios), forecast_metrics(rows), counts)


def _replace_cooperative_tracks(scenario: Scenario, transform) -> Scenario:
    """Apply `transform(track) -> track | None` to every non-ego track; None removes the track."""
    views = []
    for view in scenario.views:
        if view.kind == "ego":
            views.append(view)
            continue
        tracks = tuple(t for t in (transform(track) for track in view.tracks) if t is not None)
        views.append(replace(view, tracks=tracks))
    return replace(scenario, views=tuple(views))


def delay_scenario(scenario: Scenario, drop: int) -> Scenario:
    """Cooperative views lose their latest `drop` frames, then are resynchronized by extrapolation."""
    if drop == 0:
        return scenario

    def resync(track: AgentTrack) -> AgentTrack | None:
        try:
            return resync_track(track, drop)
        except ResyncError as exc:
            get_logger().log_warning(f"scenario {scenario.scenario_id}: {exc}; dropping without refill")
            return drop_latest(track, drop)

    return _replace_cooperative_tracks(scenario, resync)


def drop_frames(scenario: Scenario, ratio: float, rng: Rng) -> Scenario:
    """Each cooperative per-frame observation is removed independently with probability `ratio`."""

    def thin(track: AgentTrack) -> AgentTrack | None:
        draws = rng.random(len(track.frames))
        frames = tuple(None if state is None or u < ratio else state for state, u in zip(track.frames, draws))
        if all(state is None for state in frames):
            return None
        return replace(track, frames=frames)

    return _replace_cooperative_tracks(scenario, thin)


def latency_harness(forecaster: Forecaster, scenarios: Sequence[Scenario], k_frames: Sequence[int],
                    eval_config: EvalConfig = DEFAULT_EVAL_CONFIG) -> dict[int, EvaluationResult]:
    results = {}
    for k in k_frames:
        if k not in (0, 1, 2):
            raise ResyncError(f"latency must be 0, 1 or 2 frames, got {k}")
        results[k] = evaluate(forecaster, [delay_scenario(s, k) for s in scenarios], eval_config)
    return results


def droploss_harness(forecaster: Forecaster, scenarios: Sequence[Scenario], ratios: Sequence[float],
                     seed: int, eval_config: EvalConfig = DEFAULT_EVAL_CONFIG) -> dict[float, EvaluationResult]:
    """Every ratio reuses the same per-scenario streams, so thinning is nested across ratios."""
    results = {}
    for ratio in ratios:
        if not 0.0 <= ratio <= 1.0:
            raise MetricError(f"drop ratio must lie in [0, 1], got {ratio}")
        streams = Rng(seed).split(len(scenarios))
        results[ratio] = evaluate(forecaster, [drop_frames(s, ratio, rng) for s, rng in zip(scenarios, streams)],
                                  eval_config)
    return results


def cooperation_sweep(forecaster: Forecaster, scenarios: Sequence[Scenario],
                      eval_config: EvalConfig = DEFAULT_EVAL_CONFIG) -> dict[str, EvaluationResult]:
    results = {}
    for setting, kinds in COOPERATION_SETTINGS.items():
        masked = tuple(sorted(set(eval_config.mask_views) | set(kinds)))
        results[setting] = evaluate(forecaster, scenarios, replace(eval_config, mask_views=masked))
    return results
