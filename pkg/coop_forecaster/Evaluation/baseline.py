import numpy as np

from coop_forecaster.Geometry.transforms import rotate_batch
from coop_forecaster.Model.base_forecaster import AgentForecast, Forecaster, ScenarioForecast
from coop_forecaster.Scenario.types import AgentTrack, Scenario


def constant_velocity(track: AgentTrack, horizon: int) -> np.ndarray:
    """(H, 2) world positions extrapolated from the last two observed states."""
    steps = track.observed_steps
    t0, t1 = steps[-2], steps[-1]
    p0, p1 = np.array(track.frames[t0].position), np.array(track.frames[t1].position)
    velocity = (p1 - p0) / (t1 - t0)
    lags = (len(track.frames) - 1 - t1) + np.arange(1, horizon + 1)
    return p1 + lags[:, None] * velocity


class ConstantVelocityForecaster(Forecaster):
    """Single-mode constant-velocity extrapolation for every track with two observed frames."""

    name = "constant_velocity"

    def predict(self, scenario: Scenario) -> ScenarioForecast:
        agents = {}
        for key in scenario.track_keys():
            track = scenario.track(key)
            if track.n_observed < 2:
                continue
            origin = np.array(track.current.position)
            heading = track.reference_heading()
            future = constant_velocity(track, scenario.H)
            agents[key] = AgentForecast(
                key=key,
                locations=rotate_batch(heading, future - origin)[None],
                scales=np.ones((1, scenario.H, 2)),
                probabilities=np.ones(1),
                origin=origin,
                heading=heading,
                members=(key,),
            )
        return ScenarioForecast(scenario.scenario_id, agents)
