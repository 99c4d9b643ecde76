"""
Scenario and training visualizer

Renders two kinds of SVG:
1. Scenario view: lane map, per-view tracks, association links, ground truth and predicted modes
2. Training curves from the history CSV (losses, validation metrics, association F1)

Output is byte-stable for a given input so the SVGs can be diffed.
"""

import os

import matplotlib as mpl

mpl.use('Agg')

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from coop_forecaster.Model.base_forecaster import ScenarioForecast  # noqa: E402
from coop_forecaster.Scenario.types import Scenario  # noqa: E402

# =============================================================================
# STYLE
# =============================================================================

SVG_HASH_SALT = "coop-forecaster"
LANE_COLOR = "lightgray"
TRUTH_COLOR = "crimson"
MODE_COLOR = "forestgreen"
LINK_COLOR = "dimgray"
VIEW_COLORS = {"ego": "steelblue", "infrastructure": "darkorange", "vehicle": "mediumpurple"}

mpl.rcParams['svg.hashsalt'] = SVG_HASH_SALT
mpl.rcParams['svg.fonttype'] = 'none'


def _save(fig, path: str) -> None:
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    fig.savefig(path, format="svg", metadata={'Date': None})
    plt.close(fig)


# =============================================================================
# SCENARIO PLOT
# =============================================================================


def plot_scenario(scenario: Scenario, path: str, forecast: ScenarioForecast | None = None) -> None:
    """
    Draw one scenario.

    Lanes are grey, every view's observed tracks carry the view kind's color,
    association links are dashed between the tracks' current positions, the
    target's ground-truth future is red and predicted modes are green.
    """
    fig, ax = plt.subplots(1, 1, figsize=(8, 8))

    for lane in scenario.lanes:
        ax.plot([lane.start[0], lane.end[0]], [lane.start[1], lane.end[1]], color=LANE_COLOR, linewidth=0.8,
                zorder=1)

    labelled = set()
    for view in sorted(scenario.views, key=lambda v: v.view_id):
        color = VIEW_COLORS[view.kind]
        for track in view.tracks:
            points = np.array([state.position for state in track.frames if state is not None])
            label = view.kind if view.kind not in labelled else None
            labelled.add(view.kind)
            ax.plot(points[:, 0], points[:, 1], color=color, linewidth=1.2, alpha=0.8, label=label, zorder=3)
            ax.scatter(points[-1, 0], points[-1, 1], color=color, s=10, zorder=4)
        if view.pose is not None:
            ax.scatter(view.pose[0], view.pose[1], color=color, marker="s", s=40, edgecolors="black", zorder=5)

    if scenario.truth is not None:
        future = scenario.truth.future_of(scenario.target)
        current = np.array(scenario.track(scenario.target).current.position)
        path_xy = np.vstack([current, future])
        ax.plot(path_xy[:, 0], path_xy[:, 1], color=TRUTH_COLOR, linewidth=2, label="ground truth", zorder=6)

    if forecast is not None:
        for a, b in forecast.associations:
            pa = scenario.track(a).current.position
            pb = scenario.track(b).current.position
            ax.plot([pa[0], pb[0]], [pa[1], pb[1]], color=LINK_COLOR, linestyle="--", linewidth=1, zorder=5)
        agent = forecast.for_track(scenario.target)
        if agent is not None:
            for k, trajectory in enumerate(agent.world_trajectories()):
                xy = np.vstack([agent.origin, trajectory])
                ax.plot(xy[:, 0], xy[:, 1], color=MODE_COLOR, linewidth=1.5, alpha=0.8,
                        label="predicted modes" if k == 0 else None, zorder=7)

    ax.set_aspect("equal")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_title(f"Scenario {scenario.scenario_id}")
    ax.grid(True, alpha=0.3)
    ax.legend(loc='upper right', fontsize=8)
    _save(fig, path)


# =============================================================================
# TRAINING CURVES
# =============================================================================


def plot_history(history: pd.DataFrame, path: str) -> None:
    fig, ax = plt.subplots(3, 1, figsize=(10, 9), sharex=True)

    for column, color in (("loss_dis", "darkorange"), ("loss_reg", "steelblue"), ("loss_cls", "mediumpurple")):
        ax[0].plot(history["epoch"], history[column], color=color, linewidth=1.5, label=column)
    ax[0].set_ylabel("Loss")
    ax[0].set_title("Training Losses")
    ax[0].legend(loc='upper right', fontsize=8)
    ax[0].grid(True, alpha=0.3)

    if "val_min_ade" in history and history["val_min_ade"].notna().any():
        ax[1].plot(history["epoch"], history["val_min_ade"], color="steelblue", linewidth=1.5, label="minADE")
        ax[1].plot(history["epoch"], history["val_min_fde"], color="crimson", linewidth=1.5, label="minFDE")
        ax[1].legend(loc='upper right', fontsize=8)
        ax[2].plot(history["epoch"], history["assoc_f1"], color="forestgreen", linewidth=2, label="F1")
        ax[2].plot(history["epoch"], history["val_miss_rate"], color="gray", linestyle="--", label="MR")
        ax[2].legend(loc='lower right', fontsize=8)
    ax[1].set_ylabel("Error (m)")
    ax[1].set_title("Validation Displacement")
    ax[1].grid(True, alpha=0.3)
    ax[2].set_xlabel("Epoch")
    ax[2].set_ylabel("Ratio")
    ax[2].set_title("Association F1 and Miss Rate")
    ax[2].grid(True, alpha=0.3)

    plt.tight_layout()
    _save(fig, path)
