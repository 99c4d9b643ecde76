import math
from dataclasses import dataclass, field

import numpy as np

from coop_forecaster.Utils.errors import InvariantViolation

AGENT_TYPES = ("car", "truck", "cyclist", "pedestrian", "bus", "van", "motorcyclist", "tricyclist")
VIEW_KINDS = ("ego", "infrastructure", "vehicle")
TURNS = ("left", "right", "straight")
ROAD_TYPES = ("intersection", "normal")

UNIT_TOLERANCE = 1e-9
MOVING_SPEED = 0.1  # Below this speed a heading is not trusted

TrackKey = tuple[int, int]  # (view_id, track_id)
Vec2 = tuple[float, float]


def _is_unit(vector: Vec2, tolerance: float = UNIT_TOLERANCE) -> bool:
    return abs(math.hypot(vector[0], vector[1]) - 1.0) <= tolerance


@dataclass(frozen=True)
class ObservedState:
    position: Vec2
    heading: Vec2
    length: float
    width: float
    bbox_heading: Vec2
    speed: float

    def validate(self) -> None:
        if not all(math.isfinite(v) for v in (*self.position, *self.heading, *self.bbox_heading,
                                              self.length, self.width, self.speed)):
            raise InvariantViolation("observed state has non-finite values")
        if not _is_unit(self.heading):
            raise InvariantViolation(f"heading {self.heading} is not a unit vector (|r|=1 ± 1e-9)")
        if not _is_unit(self.bbox_heading):
            raise InvariantViolation(f"bbox heading {self.bbox_heading} is not a unit vector")
        if self.length <= 0 or self.width <= 0:
            raise InvariantViolation(f"bbox extents must be positive, got {self.length}x{self.width}")


@dataclass(frozen=True)
class AgentTrack:
    track_id: int
    agent_type: str
    frames: tuple[ObservedState | None, ...]

    def validate(self) -> None:
        if self.agent_type not in AGENT_TYPES:
            raise InvariantViolation(f"track {self.track_id}: unknown agent type {self.agent_type!r}")
        if not any(state is not None for state in self.frames):
            raise InvariantViolation(f"track {self.track_id}: no observed frame")
        for state in self.frames:
            if state is not None:
                state.validate()

    @property
    def observed(self) -> np.ndarray:
        return np.array([state is not None for state in self.frames], dtype=bool)

    @property
    def observed_steps(self) -> list[int]:
        return [t for t, state in enumerate(self.frames) if state is not None]

    @property
    def n_observed(self) -> int:
        return sum(state is not None for state in self.frames)

    @property
    def last_step(self) -> int:
        return self.observed_steps[-1]

    @property
    def current(self) -> ObservedState:
        return self.frames[self.last_step]

    def positions(self) -> np.ndarray:
        """T x 2 observed positions; missing steps hold 0."""
        out = np.zeros((len(self.frames), 2))
        for t, state in enumerate(self.frames):
            if state is not None:
                out[t] = state.position
        return out

    def reference_heading(self) -> np.ndarray:
        """Heading of the latest frame moving faster than 0.1 m/s, (1, 0) if none is."""
        for state in reversed(self.frames):
            if state is not None and state.speed > MOVING_SPEED:
                return np.array(state.heading)
        return np.array([1.0, 0.0])


@dataclass(frozen=True)
class View:
    view_id: int
    kind: str
    tracks: tuple[AgentTrack, ...]
    pose: tuple[float, float, float, float] | None = None  # x, y, cos, sin of the sensor at the current frame

    def validate(self, steps: int) -> None:
        if self.kind not in VIEW_KINDS:
            raise InvariantViolation(f"view {self.view_id}: unknown kind {self.kind!r}")
        ids = [track.track_id for track in self.tracks]
        if len(set(ids)) != len(ids):
            raise InvariantViolation(f"view {self.view_id}: duplicate track ids")
        for track in self.tracks:
            if len(track.frames) != steps:
                raise InvariantViolation(
                    f"view {self.view_id} track {track.track_id}: {len(track.frames)} frames, expected T={steps}"
                )
            track.validate()
        if self.pose is not None and not _is_unit(self.pose[2:]):
            raise InvariantViolation(f"view {self.view_id}: pose heading is not a unit vector")

    def track(self, track_id: int) -> AgentTrack:
        for candidate in self.tracks:
            if candidate.track_id == track_id:
                return candidate
        raise KeyError(f"view {self.view_id} has no track {track_id}")


@dataclass(frozen=True)
class LaneSegment:
    start: Vec2
    end: Vec2
    turn: str
    road_type: str

    def validate(self) -> None:
        if self.start == self.end:
            raise InvariantViolation(f"lane segment starts and ends at {self.start}")
        if self.turn not in TURNS:
            raise InvariantViolation(f"unknown lane turn {self.turn!r}")
        if self.road_type not in ROAD_TYPES:
            raise InvariantViolation(f"unknown road type {self.road_type!r}")

    @property
    def vector(self) -> np.ndarray:
        return np.subtract(self.end, self.start)


@dataclass(frozen=True)
class Truth:
    identities: dict[TrackKey, int]  # (view_id, track_id) -> global agent id
    futures: dict[int, tuple[Vec2, ...]]  # agent id -> H future world positions

    def future_of(self, key: TrackKey) -> np.ndarray:
        return np.array(self.futures[self.identities[key]], dtype=np.float64)


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    views: tuple[View, ...]
    lanes: tuple[LaneSegment, ...]
    T: int
    H: int
    dt: float
    target: TrackKey
    truth: Truth | None = field(default=None)

    def validate(self) -> None:
        if self.T < 2 or self.H < 2:
            raise InvariantViolation(f"horizons must satisfy T, H ≥ 2 (T={self.T}, H={self.H})")
        if self.dt <= 0:
            raise InvariantViolation(f"dt must be positive, got {self.dt}")
        egos = [view for view in self.views if view.kind == "ego"]
        if len(egos) != 1:
            raise InvariantViolation(f"exactly one ego view required, found {len(egos)}")
        view_ids = [view.view_id for view in self.views]
        if len(set(view_ids)) != len(view_ids):
            raise InvariantViolation("duplicate view ids")
        for view in self.views:
            view.validate(self.T)
        for lane in self.lanes:
            lane.validate()
        if self.target[0] != egos[0].view_id or self.target not in set(self.track_keys()):
            raise InvariantViolation(f"target {self.target} is not a track of the ego view")
        if self.truth is not None:
            for key in self.track_keys():
                if key not in self.truth.identities:
                    raise InvariantViolation(f"truth does not cover track {key}")
                agent = self.truth.identities[key]
                if agent not in self.truth.futures or len(self.truth.futures[agent]) != self.H:
                    raise InvariantViolation(f"truth future of agent {agent} does not span H={self.H} steps")

    @property
    def ego_view(self) -> View:
        return next(view for view in self.views if view.kind == "ego")

    def view(self, view_id: int) -> View:
        for view in self.views:
            if view.view_id == view_id:
                return view
        raise KeyError(f"no view {view_id}")

    def track(self, key: TrackKey) -> AgentTrack:
        return self.view(key[0]).track(key[1])

    def track_keys(self) -> list[TrackKey]:
        """All tracks ordered by (view_id, track_id)."""
        return sorted((view.view_id, track.track_id) for view in self.views for track in view.tracks)

    def kind_of(self, view_id: int) -> str:
        return self.view(view_id).kind
