"""
Synthetic cooperative scenarios.

Agent 0 is the ego car. View 0 is the ego view (sensor on agent 0), view 1 a
fixed infrastructure sensor on the junction corner, and every further view a
sensor on agent (view index - 1). Agents drive inbound arm -> manoeuvre ->
outbound arm of the intersection map with a speed profile clip(v0 + a t).
"""

import math
from dataclasses import dataclass

import numpy as np

from coop_forecaster.config import GenConfig
from coop_forecaster.Numerics.params import Rng
from coop_forecaster.Scenario.lane_map import MANEUVERS, IntersectionMap, Route
from coop_forecaster.Scenario.types import AgentTrack, ObservedState, Scenario, Truth, View
from coop_forecaster.Utils.errors import GenerationError
from coop_forecaster.Utils.logger import get_logger

# type: (weight, length, width, min speed, max speed)
AGENT_PROFILES = {
    "car": (0.60, 4.6, 1.9, 4.0, 12.0),
    "van": (0.10, 5.2, 2.0, 4.0, 11.0),
    "truck": (0.06, 8.5, 2.5, 3.5, 9.0),
    "bus": (0.05, 11.0, 2.8, 3.5, 9.0),
    "cyclist": (0.08, 1.8, 0.6, 2.5, 6.0),
    "motorcyclist": (0.05, 2.1, 0.8, 4.0, 11.0),
    "tricyclist": (0.03, 2.6, 1.2, 2.5, 6.0),
    "pedestrian": (0.03, 0.6, 0.6, 1.0, 2.0),
}
MIN_SPEED = 0.5
MAX_SPEED = 20.0
MIN_GAP = 4.0  # Minimum centre distance between two agents over the observed window
SPAWN_ATTEMPTS = 50
FRAGMENT_GAP = 3  # Occlusion gaps of at least this many frames may split a track
NOISE_CLIP = 6.0  # Noise norm is clipped at NOISE_CLIP * sigma


@dataclass
class AgentPlan:
    agent_type: str
    route: Route
    stations: np.ndarray  # Arc length per step, T + H entries
    speeds: np.ndarray

    def state(self, step: int) -> tuple[np.ndarray, np.ndarray, float]:
        position, heading = self.route.pose(float(self.stations[step]))
        return position, heading, float(self.speeds[step])


@dataclass(frozen=True)
class OcclusionSector:
    bearing: float  # radians, world frame
    half_width: float  # radians
    min_range: float  # metres; only agents farther than this are hidden

    def hides(self, offset: np.ndarray) -> bool:
        distance = math.hypot(offset[0], offset[1])
        if distance < self.min_range:
            return False
        delta = math.atan2(offset[1], offset[0]) - self.bearing
        delta = (delta + math.pi) % (2.0 * math.pi) - math.pi
        return abs(delta) <= self.half_width


def _speed_profile(v0: float, accel: float, steps: int, dt: float) -> np.ndarray:
    return np.clip(v0 + accel * dt * np.arange(steps), MIN_SPEED, MAX_SPEED)


def _plan_agent(cfg: GenConfig, lane_map: IntersectionMap, rng: Rng, agent_type: str) -> AgentPlan:
    steps = cfg.history_steps + cfg.future_steps
    arm = rng.integers(4)
    maneuver = MANEUVERS[rng.choice(cfg.maneuver_weights)]
    route = lane_map.route(arm, maneuver)
    _, _, _, v_min, v_max = AGENT_PROFILES[agent_type]
    v0 = rng.uniform(v_min, v_max)
    accel = rng.uniform(-cfg.max_accel, cfg.max_accel) if rng.random() < cfg.accel_prob else 0.0
    speeds = _speed_profile(v0, accel, steps, cfg.dt)

    # s_k = s_{k-1} + v_{k-1} dt, anchored so the current frame sits near the junction entry
    travelled = np.concatenate([[0.0], np.cumsum(speeds[:-1] * cfg.dt)])
    current = cfg.history_steps - 1
    s_current = rng.uniform(cfg.arm_length - 35.0, cfg.arm_length + 5.0)
    stations = s_current + travelled - travelled[current]
    return AgentPlan(agent_type, route, stations, speeds)


def _pick_type(rng: Rng) -> str:
    names = list(AGENT_PROFILES)
    return names[rng.choice([AGENT_PROFILES[name][0] for name in names])]


def _observed_positions(plan: AgentPlan, steps: int) -> np.ndarray:
    return np.array([plan.state(t)[0] for t in range(steps)])


def _plan_agents(cfg: GenConfig, lane_map: IntersectionMap, rng: Rng) -> list[AgentPlan]:
    plans: list[AgentPlan] = []
    paths: list[np.ndarray] = []
    for agent in range(cfg.n_agents):
        for _ in range(SPAWN_ATTEMPTS):
            agent_type = "car" if agent == 0 or agent < cfg.n_views - 1 else _pick_type(rng)
            plan = _plan_agent(cfg, lane_map, rng, agent_type)
            path = _observed_positions(plan, cfg.history_steps)
            if all(np.min(np.linalg.norm(path - other, axis=1)) >= MIN_GAP for other in paths):
                plans.append(plan)
                paths.append(path)
                break
        else:
            if agent < max(1, cfg.n_views - 1):
                raise GenerationError(f"could not place sensor-carrying agent {agent} without overlap")
            get_logger().log_warning(f"agent {agent} skipped: no collision-free placement")
    return plans


def _sensor_positions(cfg: GenConfig, lane_map: IntersectionMap, plans: list[AgentPlan]) -> list[tuple]:
    """Per view: (kind, carrier agent or None, T x 2 sensor positions, current pose)."""
    steps = cfg.history_steps
    current = steps - 1
    sensors = []
    for view in range(cfg.n_views):
        if view == 1:
            corner = lane_map.half_size + 6.0
            positions = np.tile([corner, corner], (steps, 1))
            sensors.append(("infrastructure", None, positions, (corner, corner, -math.sqrt(0.5), -math.sqrt(0.5))))
            continue
        carrier = 0 if view == 0 else view - 1
        positions = _observed_positions(plans[carrier], steps)
        position, heading, _ = plans[carrier].state(current)
        pose = (float(position[0]), float(position[1]), float(heading[0]), float(heading[1]))
        sensors.append(("ego" if view == 0 else "vehicle", carrier, positions, pose))
    return sensors


def _sectors(cfg: GenConfig, rng: Rng, view: int) -> list[OcclusionSector]:
    sectors = []
    for _ in range(cfg.occlusion_sectors):
        sectors.append(OcclusionSector(rng.uniform(-math.pi, math.pi),
                                       math.radians(cfg.occlusion_half_width_deg),
                                       rng.uniform(8.0, 30.0)))
    for view_index, bearing_deg, half_width_deg, min_range in cfg.fixed_sectors:
        if int(view_index) == view:
            sectors.append(OcclusionSector(math.radians(bearing_deg), math.radians(half_width_deg), float(min_range)))
    return sectors


def _fragments(visible: np.ndarray, rng: Rng, probability: float) -> list[list[int]]:
    """Split the visible steps into per-track runs at long occlusion gaps."""
    steps = [int(t) for t in np.flatnonzero(visible)]
    if not steps:
        return []
    pieces = [[steps[0]]]
    for previous, step in zip(steps[:-1], steps[1:]):
        if step - previous - 1 >= FRAGMENT_GAP and rng.random() < probability:
            pieces.append([step])
        else:
            pieces[-1].append(step)
    return pieces


def _noise(rng: Rng, sigma: float) -> np.ndarray:
    sample = sigma * np.asarray(rng.normal(2))
    norm = float(np.hypot(sample[0], sample[1]))
    if norm > NOISE_CLIP * sigma > 0.0:
        sample = sample * (NOISE_CLIP * sigma / norm)
    return sample


def generate_scenario(cfg: GenConfig, rng: Rng, scenario_id: str = "0") -> Scenario:
    cfg.validate()
    plan_rng, sector_rng, noise_rng, fragment_rng, id_rng, target_rng = rng.split(6)
    lane_map = IntersectionMap(cfg.arm_length, cfg.lane_spacing, cfg.lane_sample_step)
    plans = _plan_agents(cfg, lane_map, plan_rng)
    steps = cfg.history_steps
    true_positions = [_observed_positions(plan, steps) for plan in plans]

    views: list[View] = []
    identities: dict[tuple[int, int], int] = {}
    for view, (kind, carrier, sensor_positions, pose) in enumerate(_sensor_positions(cfg, lane_map, plans)):
        sectors = _sectors(cfg, sector_rng, view)
        raw_tracks: list[tuple[int, list[ObservedState | None]]] = []
        for agent, plan in enumerate(plans):
            offsets = true_positions[agent] - sensor_positions
            in_range = np.linalg.norm(offsets, axis=1) <= cfg.detection_range
            if agent == carrier:
                visible = np.ones(steps, dtype=bool)
            else:
                visible = in_range & ~np.array([any(sector.hides(o) for sector in sectors) for o in offsets])
            noise = [_noise(noise_rng, cfg.noise_sigma) for _ in range(steps)]
            _, length, width, _, _ = AGENT_PROFILES[plan.agent_type]
            for run in _fragments(visible, fragment_rng, cfg.fragmentation_prob):
                frames: list[ObservedState | None] = [None] * steps
                for t in run:
                    position, heading, speed = plan.state(t)
                    observed = position + noise[t]
                    unit = (float(heading[0]), float(heading[1]))
                    frames[t] = ObservedState((float(observed[0]), float(observed[1])), unit,
                                              length, width, unit, speed)
                raw_tracks.append((agent, frames))

        track_ids = id_rng.permutation(len(raw_tracks))
        tracks = []
        for (agent, frames), track_id in zip(raw_tracks, track_ids):
            tracks.append(AgentTrack(int(track_id), plans[agent].agent_type, tuple(frames)))
            identities[(view, int(track_id))] = agent
        tracks.sort(key=lambda track: track.track_id)
        views.append(View(view, kind, tuple(tracks), pose))

    eligible = sorted(
        (0, track.track_id) for track in views[0].tracks
        if identities[(0, track.track_id)] != 0 and track.n_observed >= 2
    )
    if not eligible:
        raise GenerationError("no eligible ego-visible target agent")
    target = eligible[target_rng.integers(len(eligible))]

    futures = {}
    for agent, plan in enumerate(plans):
        future = [plan.state(steps + h)[0] for h in range(cfg.future_steps)]
        futures[agent] = tuple((float(p[0]), float(p[1])) for p in future)

    scenario = Scenario(
        scenario_id=scenario_id,
        views=tuple(views),
        lanes=tuple(lane_map.lane_segments()),
        T=cfg.history_steps,
        H=cfg.future_steps,
        dt=cfg.dt,
        target=target,
        truth=Truth(identities, futures),
    )
    scenario.validate()
    return scenario


def generate_dataset(cfg: GenConfig, count: int, seed: int | None = None,
                     max_attempts_per_scenario: int = 20) -> list[Scenario]:
    """`count` scenarios; a failed attempt is logged and retried from the next stream."""
    root = Rng(cfg.seed if seed is None else seed)
    logger = get_logger()
    scenarios = []
    while len(scenarios) < count:
        index = len(scenarios)
        for attempt in range(max_attempts_per_scenario):
            stream = Rng(root.next_u64())
            try:
                scenarios.append(generate_scenario(cfg, stream, scenario_id=f"{index:06d}"))
                break
            except GenerationError as exc:
                logger.log_warning(f"scenario {index} attempt {attempt} discarded: {exc}")
        else:
            raise GenerationError(f"scenario {index}: {max_attempts_per_scenario} attempts failed")
    return scenarios
