from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from coop_forecaster.Geometry.transforms import rotate_out_of_frame
from coop_forecaster.Scenario.types import Scenario, TrackKey


@dataclass
class AgentForecast:
    key: TrackKey  # decoded (representative) track
    locations: np.ndarray  # (K, H, 2) agent-frame displacements
    scales: np.ndarray  # (K, H, 2)
    probabilities: np.ndarray  # (K,)
    origin: np.ndarray  # (2,) current world position of the track
    heading: np.ndarray  # (2,) reference heading of the track
    members: tuple[TrackKey, ...] = ()  # every track fused into this agent

    def world_trajectories(self) -> np.ndarray:
        return self.origin + rotate_out_of_frame(self.heading, self.locations)


@dataclass
class ScenarioForecast:
    scenario_id: str
    agents: dict[TrackKey, AgentForecast]
    associations: list[tuple[TrackKey, TrackKey]] = field(default_factory=list)

    def for_track(self, key: TrackKey) -> AgentForecast | None:
        if key in self.agents:
            return self.agents[key]
        for forecast in self.agents.values():
            if key in forecast.members:
                return forecast
        return None


class Forecaster(ABC):
    name: str = "forecaster"

    @abstractmethod
    def predict(self, scenario: Scenario) -> ScenarioForecast:
        pass
