import json
from dataclasses import replace

import pytest
from conftest import TINY_T, make_state, two_view_scenario

from coop_forecaster.Numerics.params import Rng
from coop_forecaster.Scenario.dataset import mask_views, observed_fraction, partition_sizes, split_dataset, take_fraction
from coop_forecaster.Scenario.generator import generate_dataset, generate_scenario
from coop_forecaster.Scenario.scenario_io import (parse_scenario, read_scenarios, scenario_to_dict, serialize_scenario,
                                                  write_scenarios)
from coop_forecaster.Utils.errors import InvariantViolation, ScenarioParseError, SplitError


# =============================================================================
# GENERATOR
# =============================================================================


def test_generator_is_deterministic(tiny_gen_config):
    first = generate_dataset(tiny_gen_config, 3, seed=5)
    second = generate_dataset(tiny_gen_config, 3, seed=5)
    assert [serialize_scenario(s) for s in first] == [serialize_scenario(s) for s in second]
    assert [s.scenario_id for s in first] == ["000000", "000001", "000002"]


def test_different_seeds_give_different_scenarios(tiny_gen_config):
    first = generate_dataset(tiny_gen_config, 1, seed=1)[0]
    second = generate_dataset(tiny_gen_config, 1, seed=2)[0]
    assert serialize_scenario(first) != serialize_scenario(second)


def test_generated_scenarios_satisfy_invariants(tiny_gen_config):
    for scenario in generate_dataset(tiny_gen_config, 4, seed=11):
        scenario.validate()
        kinds = [view.kind for view in scenario.views]
        assert kinds[0] == "ego" and kinds.count("ego") == 1
        assert len(scenario.views) == tiny_gen_config.n_views
        assert scenario.track(scenario.target).n_observed >= 2
        # The target is never the ego vehicle itself
        assert scenario.truth.identities[scenario.target] != 0
        for key in scenario.track_keys():
            assert len(scenario.truth.future_of(key)) == tiny_gen_config.future_steps


def test_generate_scenario_accepts_explicit_stream(tiny_gen_config):
    scenario = generate_scenario(tiny_gen_config, Rng(123), scenario_id="x")
    again = generate_scenario(tiny_gen_config, Rng(123), scenario_id="x")
    assert scenario == again


# =============================================================================
# FILE FORMAT
# =============================================================================


def test_write_then_read_returns_equal_scenarios(tmp_path, tiny_gen_config):
    scenarios = generate_dataset(tiny_gen_config, 2, seed=3) + [two_view_scenario("hand", missing_target=(2, 3))]
    path = str(tmp_path / "data" / "scenarios.jsonl")
    assert write_scenarios(scenarios, path) == 3
    assert read_scenarios(path) == scenarios


def test_floats_survive_a_file_round_trip_bit_for_bit(tmp_path):
    base = two_view_scenario()
    awkward = replace(base.views[1].tracks[1], frames=(make_state(0.1 + 0.2, 1.0 / 3.0),) * TINY_T)
    scenario = replace(base, views=(base.views[0], replace(base.views[1], tracks=(base.views[1].tracks[0], awkward))))
    assert "0.30000000000000004" in serialize_scenario(scenario)
    path = str(tmp_path / "scenarios.jsonl")
    write_scenarios([scenario], path)
    restored = read_scenarios(path)[0].track((1, 9)).frames[0].position
    assert restored == (0.1 + 0.2, 1.0 / 3.0)


def test_missing_frames_are_null(scenario):
    document = scenario_to_dict(two_view_scenario(missing_target=(4,)))
    assert document["views"][0]["tracks"][0]["frames"][4] is None
    assert document["views"][0]["tracks"][0]["frames"][5]["t"] == 5


def test_parse_errors_report_line_number(tmp_path, scenario):
    good = serialize_scenario(scenario)
    path = tmp_path / "bad.jsonl"
    path.write_text(good + "\n" + good[:-10] + "\n")
    with pytest.raises(ScenarioParseError) as info:
        read_scenarios(str(path))
    assert info.value.line_number == 2
    assert "line 2" in str(info.value)


def test_invariant_violations_are_not_parse_errors(scenario):
    document = scenario_to_dict(scenario)
    document["views"][0]["tracks"][0]["frames"][0]["r"] = [1.0, 1.0]
    with pytest.raises(InvariantViolation, match="line 7"):
        parse_scenario(json.dumps(document), line_number=7)
    document = scenario_to_dict(scenario)
    document["version"] = 2
    with pytest.raises(ScenarioParseError):
        parse_scenario(json.dumps(document))


def test_target_must_belong_to_ego_view(scenario):
    with pytest.raises(InvariantViolation, match="target"):
        replace(scenario, target=(1, 7)).validate()


# =============================================================================
# SPLITS AND VIEW MASKING
# =============================================================================


def test_partition_sizes_use_largest_remainder():
    assert partition_sizes(10, [0.7, 0.2, 0.1]) == [7, 2, 1]
    assert partition_sizes(7, [0.5, 0.5]) == [4, 3]
    with pytest.raises(SplitError):
        partition_sizes(2, [0.9, 0.1])
    with pytest.raises(SplitError):
        partition_sizes(10, [0.5, 0.4])


def test_split_is_a_seeded_partition():
    scenarios = [two_view_scenario(f"s{i}") for i in range(10)]
    train, val = split_dataset(scenarios, [0.8, 0.2], seed=1)
    assert len(train) == 8 and len(val) == 2
    assert sorted(s.scenario_id for s in train + val) == sorted(s.scenario_id for s in scenarios)
    again = split_dataset(scenarios, [0.8, 0.2], seed=1)
    assert [s.scenario_id for s in again[1]] == [s.scenario_id for s in val]


def test_take_fraction_rounds_up():
    scenarios = [two_view_scenario(f"s{i}") for i in range(10)]
    assert len(take_fraction(scenarios, 0.25, seed=0)) == 3
    assert take_fraction(scenarios, 1.0, seed=0) == scenarios
    picked = take_fraction(scenarios, 0.5, seed=4)
    assert [s.scenario_id for s in picked] == sorted(s.scenario_id for s in picked)
    with pytest.raises(SplitError):
        take_fraction(scenarios, 0.0, seed=0)


def test_mask_views_empties_cooperative_views_only(scenario):
    masked = mask_views(scenario, ["infrastructure", "vehicle"])
    assert masked.view(1).tracks == ()
    assert masked.ego_view == scenario.ego_view
    assert mask_views(scenario, []) is scenario


def test_observed_fraction(scenario):
    assert observed_fraction(scenario) == 1.0
    assert observed_fraction(two_view_scenario(missing_target=(0, 1, 2, 3, 4))) == 0.5
