import json
import os
from typing import Iterable

from coop_forecaster.Association.pseudo_labels import PseudoLabels, ScenarioLabels
from coop_forecaster.Utils.errors import ScenarioParseError


def labels_to_records(labels: ScenarioLabels) -> list[dict]:
    return [
        {
            "scenario_id": labels.scenario_id,
            "view_pair": list(per_pair.view_pair),
            "pairs": [{"a": list(a), "b": list(b), "count": count} for (a, b), count in sorted(per_pair.counts.items())],
        }
        for per_pair in labels.per_view_pair
    ]


def write_labels(all_labels: Iterable[ScenarioLabels], path: str) -> None:
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    with open(path, "w") as file:
        for labels in all_labels:
            for record in labels_to_records(labels):
                file.write(json.dumps(record, separators=(",", ":")) + "\n")


def read_labels(path: str) -> dict[str, ScenarioLabels]:
    """Labels keyed by scenario id, view pairs kept in file order."""
    by_scenario: dict[str, ScenarioLabels] = {}
    with open(path, "r") as file:
        for line_number, line in enumerate(file, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                per_pair = PseudoLabels(
                    (int(record["view_pair"][0]), int(record["view_pair"][1])),
                    {((int(p["a"][0]), int(p["a"][1])), (int(p["b"][0]), int(p["b"][1]))): int(p["count"])
                     for p in record["pairs"]},
                )
                scenario_id = str(record["scenario_id"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError, IndexError) as exc:
                raise ScenarioParseError(f"labels schema violation: {exc}", line_number) from exc
            by_scenario.setdefault(scenario_id, ScenarioLabels(scenario_id, [])).per_view_pair.append(per_pair)
    return by_scenario
