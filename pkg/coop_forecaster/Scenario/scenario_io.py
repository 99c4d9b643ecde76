"""
Line-delimited JSON scenario files, one scenario object per line.

Floats are written with Python's shortest round-trip repr, so a decimal value
read back is bit-identical to the one written. Missing frames are `null`.
"""

import json
import os
from typing import Iterable, Iterator

from coop_forecaster.Scenario.types import AgentTrack, LaneSegment, ObservedState, Scenario, Truth, View
from coop_forecaster.Utils.errors import InvariantViolation, ScenarioParseError

FORMAT_VERSION = 1


def _state_to_dict(t: int, state: ObservedState) -> dict:
    return {
        "t": t,
        "p": list(state.position),
        "r": list(state.heading),
        "bbox": [state.length, state.width, *state.bbox_heading],
        "speed": state.speed,
    }


def scenario_to_dict(scenario: Scenario) -> dict:
    document = {
        "version": FORMAT_VERSION,
        "scenario_id": scenario.scenario_id,
        "dt": scenario.dt,
        "T": scenario.T,
        "H": scenario.H,
        "target": {"view": scenario.target[0], "track": scenario.target[1]},
        "views": [
            {
                "view_id": view.view_id,
                "kind": view.kind,
                "pose": list(view.pose) if view.pose is not None else None,
                "tracks": [
                    {
                        "track_id": track.track_id,
                        "agent_type": track.agent_type,
                        "frames": [None if state is None else _state_to_dict(t, state)
                                   for t, state in enumerate(track.frames)],
                    }
                    for track in view.tracks
                ],
            }
            for view in scenario.views
        ],
        "map": [
            {"start": list(lane.start), "end": list(lane.end), "turn": lane.turn, "road_type": lane.road_type}
            for lane in scenario.lanes
        ],
    }
    if scenario.truth is not None:
        document["truth"] = {
            "identities": [{"view": view, "track": track, "agent": agent}
                           for (view, track), agent in sorted(scenario.truth.identities.items())],
            "futures": [{"agent": agent, "positions": [list(p) for p in positions]}
                        for agent, positions in sorted(scenario.truth.futures.items())],
        }
    return document


def _pair(values) -> tuple[float, float]:
    if not isinstance(values, list) or len(values) != 2:
        raise ValueError(f"expected a 2-vector, got {values!r}")
    return float(values[0]), float(values[1])


def _state_from_dict(record: dict, t: int) -> ObservedState:
    if record["t"] != t:
        raise ValueError(f"frame index {record['t']} stored at position {t}")
    bbox = record["bbox"]
    if len(bbox) != 4:
        raise ValueError(f"bbox needs 4 values, got {len(bbox)}")
    return ObservedState(
        position=_pair(record["p"]),
        heading=_pair(record["r"]),
        length=float(bbox[0]),
        width=float(bbox[1]),
        bbox_heading=(float(bbox[2]), float(bbox[3])),
        speed=float(record["speed"]),
    )


def scenario_from_dict(document: dict) -> Scenario:
    if document.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported version {document.get('version')!r}")
    views = []
    for view in document["views"]:
        tracks = tuple(
            AgentTrack(
                int(track["track_id"]),
                track["agent_type"],
                tuple(None if frame is None else _state_from_dict(frame, t)
                      for t, frame in enumerate(track["frames"])),
            )
            for track in view["tracks"]
        )
        pose = view.get("pose")
        views.append(View(int(view["view_id"]), view["kind"], tracks,
                          tuple(float(v) for v in pose) if pose is not None else None))
    lanes = tuple(LaneSegment(_pair(lane["start"]), _pair(lane["end"]), lane["turn"], lane["road_type"])
                  for lane in document["map"])
    truth = None
    if document.get("truth") is not None:
        identities = {(int(r["view"]), int(r["track"])): int(r["agent"]) for r in document["truth"]["identities"]}
        futures = {int(r["agent"]): tuple(_pair(p) for p in r["positions"]) for r in document["truth"]["futures"]}
        truth = Truth(identities, futures)
    return Scenario(
        scenario_id=str(document["scenario_id"]),
        views=tuple(views),
        lanes=lanes,
        T=int(document["T"]),
        H=int(document["H"]),
        dt=float(document["dt"]),
        target=(int(document["target"]["view"]), int(document["target"]["track"])),
        truth=truth,
    )


def serialize_scenario(scenario: Scenario) -> str:
    return json.dumps(scenario_to_dict(scenario), separators=(",", ":"))


def parse_scenario(line: str, line_number: int | None = None) -> Scenario:
    try:
        scenario = scenario_from_dict(json.loads(line))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ScenarioParseError(f"schema violation: {exc}", line_number) from exc
    try:
        scenario.validate()
    except InvariantViolation as exc:
        prefix = f"line {line_number}: " if line_number is not None else ""
        raise InvariantViolation(f"{prefix}{exc}") from exc
    return scenario


def iter_scenarios(path: str) -> Iterator[Scenario]:
    """Stream scenarios one line at a time; blank lines are skipped."""
    with open(path, "r") as file:
        for line_number, line in enumerate(file, start=1):
            if line.strip():
                yield parse_scenario(line, line_number)


def read_scenarios(path: str) -> list[Scenario]:
    return list(iter_scenarios(path))


def write_scenarios(scenarios: Iterable[Scenario], path: str) -> int:
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    count = 0
    with open(path, "w") as file:
        for scenario in scenarios:
            file.write(serialize_scenario(scenario) + "\n")
            count += 1
    return count
