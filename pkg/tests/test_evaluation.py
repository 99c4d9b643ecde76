from dataclasses import replace

import numpy as np
import pytest
from conftest import TINY_T, line_track, two_view_scenario

from coop_forecaster.config import EvalConfig
from coop_forecaster.Evaluation.baseline import ConstantVelocityForecaster, constant_velocity
from coop_forecaster.Evaluation.harness import (COOPERATION_SETTINGS, cooperation_sweep, delay_scenario, drop_frames,
                                                droploss_harness, evaluate, latency_harness)
from coop_forecaster.Evaluation.metrics import (agent_row, compute_ade, compute_fde, compute_is_missed,
                                                forecast_metrics)
from coop_forecaster.Model.network import V2XGraphForecaster, init_params
from coop_forecaster.Numerics.params import Rng
from coop_forecaster.Utils.errors import MetricError, ResyncError


# =============================================================================
# METRICS
# =============================================================================


def test_displacement_metrics_on_known_offsets():
    truth = np.zeros((4, 2))
    forecasts = np.stack([np.tile([3.0, 4.0], (4, 1)), np.outer(np.arange(1.0, 5.0), [1.0, 0.0])])
    np.testing.assert_allclose(compute_ade(forecasts, truth), [5.0, 2.5])
    np.testing.assert_allclose(compute_fde(forecasts, truth), [5.0, 4.0])
    assert compute_is_missed(forecasts, truth, 2.0)
    assert not compute_is_missed(forecasts, truth, 4.0)


def test_aggregation_is_order_independent():
    truth = np.zeros((3, 2))
    rows = [agent_row(f"s{i}", "0:1", np.full((2, 3, 2), float(i)), truth, 2.0) for i in range(4)]
    report = forecast_metrics(rows)
    shuffled = forecast_metrics(rows[::-1])
    assert report.min_ade == shuffled.min_ade
    assert report.n_agents == 4
    assert report.miss_rate == pytest.approx(0.5)
    assert report.as_record()["agents"] == 4
    assert list(report.per_scenario()["scenario_id"]) == ["s0", "s1", "s2", "s3"]


def test_metric_errors():
    with pytest.raises(MetricError):
        forecast_metrics([])
    with pytest.raises(MetricError):
        agent_row("s", "0:1", np.zeros((2, 3, 2)), np.zeros((4, 2)), 2.0)


# =============================================================================
# CONSTANT-VELOCITY BASELINE
# =============================================================================


def test_constant_velocity_extrapolates_over_gaps():
    track = line_track(1, (0.0, 0.0), (1.0, 0.5), missing=(8, 9))
    np.testing.assert_allclose(constant_velocity(track, 3), [[10.0, 5.0], [11.0, 5.5], [12.0, 6.0]])


def test_baseline_is_exact_on_straight_lines(scenario):
    result = evaluate(ConstantVelocityForecaster(), [scenario])
    assert result.metrics.min_ade == pytest.approx(0.0, abs=1e-9)
    assert result.metrics.miss_rate == 0.0
    # No associations predicted: precision 1 by convention, recall 0
    assert (result.association.precision, result.association.recall) == (1.0, 0.0)
    record = result.as_record("eval")
    assert record["forecaster"] == "constant_velocity" and record["scenarios"] == 1


# =============================================================================
# HARNESSES
# =============================================================================


def test_all_agent_evaluation_covers_ego_tracks(scenario):
    result = evaluate(ConstantVelocityForecaster(), [scenario], EvalConfig(target_only=False))
    assert result.metrics.n_agents == 2
    assert list(result.metrics.breakdown["track"]) == ["0:1", "0:2"]


def test_evaluation_requires_ground_truth(scenario):
    with pytest.raises(MetricError):
        evaluate(ConstantVelocityForecaster(), [replace(scenario, truth=None)])


def test_delay_only_touches_cooperative_views(scenario):
    delayed = delay_scenario(scenario, 2)
    assert delayed.ego_view == scenario.ego_view
    for before, after in zip(scenario.view(1).tracks, delayed.view(1).tracks):
        for a, b in zip(before.frames, after.frames):
            np.testing.assert_allclose(b.position, a.position, atol=1e-9)
    assert delay_scenario(scenario, 0) is scenario


def test_delay_falls_back_to_dropping_short_tracks():
    scenario = two_view_scenario()
    short = line_track(7, (-10.0, 0.0), (0.5, 0.0), missing=tuple(range(8)))
    views = (scenario.views[0], replace(scenario.views[1], tracks=(short, scenario.views[1].tracks[1])))
    delayed = delay_scenario(replace(scenario, views=views), 2)
    assert [t.track_id for t in delayed.view(1).tracks] == [9]


def test_frame_drops_are_nested_and_bounded(scenario):
    assert drop_frames(scenario, 0.0, Rng(3)) == scenario
    assert drop_frames(scenario, 1.0, Rng(3)).view(1).tracks == ()
    light = drop_frames(scenario, 0.3, Rng(5))
    heavy = drop_frames(scenario, 0.6, Rng(5))
    for track in heavy.view(1).tracks:
        kept_heavy = set(track.observed_steps)
        kept_light = set(light.view(1).track(track.track_id).observed_steps)
        assert kept_heavy <= kept_light
    assert heavy.ego_view == scenario.ego_view


def test_harness_argument_checks(scenario):
    forecaster = ConstantVelocityForecaster()
    with pytest.raises(ResyncError):
        latency_harness(forecaster, [scenario], [3])
    with pytest.raises(MetricError):
        droploss_harness(forecaster, [scenario], [1.5], seed=0)


def test_harnesses_return_one_result_per_setting(scenario):
    forecaster = ConstantVelocityForecaster()
    scenarios = [scenario, two_view_scenario("s1", missing_target=(3,))]
    latency = latency_harness(forecaster, scenarios, [0, 1, 2])
    assert sorted(latency) == [0, 1, 2]
    drops = droploss_harness(forecaster, scenarios, [0.0, 0.5], seed=1)
    assert drops[0.0].metrics.min_ade == pytest.approx(drops[0.5].metrics.min_ade)
    sweep = cooperation_sweep(forecaster, scenarios)
    assert list(sweep) == list(COOPERATION_SETTINGS)
    assert all(result.scenarios == 2 for result in sweep.values())


def test_total_frame_loss_equals_masked_cooperation(scenario, tiny_model_config):
    forecaster = V2XGraphForecaster(init_params(tiny_model_config), tiny_model_config)
    scenarios = [scenario, two_view_scenario("s1", missing_target=(2, 3, 4))]
    dropped = droploss_harness(forecaster, scenarios, [1.0], seed=0)[1.0]
    masked = evaluate(forecaster, scenarios, EvalConfig(mask_views=("infrastructure", "vehicle")))
    assert dropped.as_record("x") == masked.as_record("x")
    assert latency_harness(forecaster, scenarios, [0])[0].as_record("x") == evaluate(forecaster, scenarios).as_record("x")


def test_latency_on_straight_lines_matches_no_latency(tiny_model_config):
    scenarios = []
    for n in range(3):
        base = two_view_scenario(f"s{n}", missing_target=(n + 2,))
        # The second cooperative track leaves the infrastructure view early
        leaving = line_track(9, (15.0, 8.0), (-0.4, 0.0), missing=range(6 - n, TINY_T))
        infra = replace(base.views[1], tracks=(base.views[1].tracks[0], leaving))
        scenarios.append(replace(base, views=(base.views[0], infra)))
    assert all(delay_scenario(s, 2).view(1).tracks[1] == s.view(1).tracks[1] for s in scenarios)

    forecaster = V2XGraphForecaster(init_params(tiny_model_config), tiny_model_config)
    eval_config = EvalConfig(target_only=False)
    results = latency_harness(forecaster, scenarios, [0, 2], eval_config)
    for field in ("min_ade", "min_fde", "miss_rate"):
        assert getattr(results[2].metrics, field) == pytest.approx(getattr(results[0].metrics, field), abs=1e-9)
    for s in scenarios:
        plain, delayed = forecaster.predict(s), forecaster.predict(delay_scenario(s, 2))
        assert plain.agents.keys() == delayed.agents.keys()
        for key, agent in plain.agents.items():
            np.testing.assert_allclose(delayed.agents[key].world_trajectories(), agent.world_trajectories(),
                                       atol=1e-9)
