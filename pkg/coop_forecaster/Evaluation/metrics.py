"""Best-of-K displacement metrics over world-frame forecasts."""

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from coop_forecaster.Utils.errors import MetricError

BREAKDOWN_COLUMNS = ["scenario_id", "track", "min_ade", "min_fde", "missed"]


def compute_ade(forecasted_trajectories: np.ndarray, gt_trajectory: np.ndarray) -> np.ndarray:
    """(K,) average displacement error of each of K (K, H, 2) trajectories against (H, 2) truth."""
    return np.mean(np.linalg.norm(forecasted_trajectories - gt_trajectory, axis=2), axis=1)


def compute_fde(forecasted_trajectories: np.ndarray, gt_trajectory: np.ndarray) -> np.ndarray:
    """(K,) error at the final step."""
    return np.linalg.norm((forecasted_trajectories - gt_trajectory)[:, -1], axis=-1)


def compute_is_missed(forecasted_trajectories: np.ndarray, gt_trajectory: np.ndarray,
                      miss_threshold: float = 2.0) -> bool:
    """Missed when even the best mode ends farther than the threshold from the truth."""
    return bool(np.min(compute_fde(forecasted_trajectories, gt_trajectory)) > miss_threshold)


@dataclass
class MetricsReport:
    min_ade: float
    min_fde: float
    miss_rate: float
    n_agents: int
    breakdown: pd.DataFrame = field(repr=False)

    def per_scenario(self) -> pd.DataFrame:
        return (self.breakdown.groupby("scenario_id", sort=True)[["min_ade", "min_fde", "missed"]]
                .mean().reset_index())

    def as_record(self) -> dict:
        return {"agents": self.n_agents, "min_ade": self.min_ade, "min_fde": self.min_fde, "miss_rate": self.miss_rate}


def agent_row(scenario_id: str, track: str, trajectories: np.ndarray, truth: np.ndarray,
              miss_threshold: float) -> dict:
    trajectories = np.asarray(trajectories, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if trajectories.ndim != 3 or trajectories.shape[1:] != truth.shape:
        raise MetricError(
            f"scenario {scenario_id} track {track}: forecast shape {trajectories.shape} does not match truth {truth.shape}"
        )
    return {
        "scenario_id": scenario_id,
        "track": track,
        "min_ade": float(np.min(compute_ade(trajectories, truth))),
        "min_fde": float(np.min(compute_fde(trajectories, truth))),
        "missed": compute_is_missed(trajectories, truth, miss_threshold),
    }


def forecast_metrics(rows: list[dict]) -> MetricsReport:
    """Aggregate agent rows; sums run in (scenario_id, track) order so the result is order independent."""
    if not rows:
        raise MetricError("no agents to evaluate")
    breakdown = pd.DataFrame(rows, columns=BREAKDOWN_COLUMNS).sort_values(["scenario_id", "track"], kind="stable")
    breakdown = breakdown.reset_index(drop=True)
    count = len(breakdown)
    ade = float(sum(breakdown["min_ade"].tolist())) / count
    fde = float(sum(breakdown["min_fde"].tolist())) / count
    miss = float(sum(bool(m) for m in breakdown["missed"].tolist())) / count
    return MetricsReport(ade, fde, miss, count, breakdown)
