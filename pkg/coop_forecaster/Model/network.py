from dataclasses import dataclass, fields

import numpy as np

from coop_forecaster.config import ModelConfig
from coop_forecaster.Model.base_forecaster import AgentForecast, Forecaster, ScenarioForecast
from coop_forecaster.Model.decoder import DecodedModes, declare_decoder, decode_multimodal
from coop_forecaster.Model.encoders import declare_encoders, encode_edges, encode_motion, encode_st
from coop_forecaster.Model.fusion import (AssociationSet, alg_step, cig_step, declare_fusion, mfg_neighbourhood,
                                          mfg_step, predict_association)
from coop_forecaster.Model.scene_graph import SceneIndex, build_scene_index, connected_components, representative
from coop_forecaster.Numerics.params import ParamStore
from coop_forecaster.Numerics.tensor import Tensor
from coop_forecaster.Scenario.types import Scenario
from coop_forecaster.Utils.errors import ConfigError, ContractError, EncodingError


@dataclass(frozen=True)
class AblationSwitches:
    no_mfg: bool = False
    no_alg: bool = False
    no_cig: bool = False
    mask_coop_in_mfg: bool = False
    mask_coop_in_alg: bool = False
    mask_coop_in_cig: bool = False
    fully_connected_A: bool = False

    @classmethod
    def from_names(cls, names) -> 'AblationSwitches':
        known = {f.name for f in fields(cls)}
        for name in names:
            if name not in known:
                raise ConfigError(f"ablate: unknown switch {name!r} (known: {', '.join(sorted(known))})")
        return cls(**{name: True for name in names})

    def names(self) -> list[str]:
        return [f.name for f in fields(self) if getattr(self, f.name)]


NO_ABLATION = AblationSwitches()


@dataclass
class ModelOutput:
    index: SceneIndex
    features: dict[str, Tensor]
    directed: list[tuple[int, int]]
    e_st: Tensor | None
    association: AssociationSet
    components: list[list[int]]
    decoded_rows: np.ndarray
    modes: DecodedModes


def init_params(cfg: ModelConfig, seed: int | None = None) -> ParamStore:
    """Declare every weight; draw order follows declaration order so a seed fixes all values."""
    cfg.validate()
    store = ParamStore(cfg.init_seed if seed is None else seed)
    root = store.scope("")
    declare_encoders(root, cfg)
    declare_fusion(root, cfg)
    declare_decoder(root, cfg)
    return store


def model_forward(scenario: Scenario, params: ParamStore, cfg: ModelConfig, mode: str = "train",
                  switches: AblationSwitches = NO_ABLATION) -> ModelOutput:
    """
    Full pass: encoders, association, MFG -> ALG -> CIG, decoder.

    "train" decodes every track; "infer" decodes one representative per
    connected component of the predicted association graph.
    """
    if mode not in ("train", "infer"):
        raise ContractError(f"unknown forward mode {mode!r}")
    if scenario.H != cfg.future_steps:
        raise EncodingError(f"scenario {scenario.scenario_id} has H={scenario.H}, model decodes {cfg.future_steps}")
    index = build_scene_index(scenario, cfg)
    root = params.scope("")

    v_mot, _ = encode_motion(index, root, cfg)
    v_st, states = encode_st(index, root, cfg)
    directed = index.candidates + [(j, i) for i, j in index.candidates]
    e_st = encode_edges(index, states, root, cfg, directed)
    association = predict_association(e_st, index.candidates, root, cfg, switches.fully_connected_A)
    adjacency = association.adjacency(index.n_tracks)

    v_mfg = v_mot
    if not switches.no_mfg:
        hood = mfg_neighbourhood(index, association, directed, switches.mask_coop_in_mfg)
        v_mfg = mfg_step(v_mot, e_st, hood, root, cfg)
    v_alg = v_mfg if switches.no_alg else alg_step(v_mfg, index, root, cfg, switches.mask_coop_in_alg)
    v_cig = v_alg if switches.no_cig else cig_step(v_alg, index, adjacency, root, cfg, switches.mask_coop_in_cig)
    features = {"v_st": v_st, "v_mot": v_mot, "v_mfg": v_mfg, "v_alg": v_alg, "v_cig": v_cig}

    if mode == "train":
        components = [[i] for i in range(index.n_tracks)]
    else:
        components = connected_components(index.n_tracks, association.edges())
    rows = np.array([representative(index, members) for members in components], dtype=np.int64)
    modes = decode_multimodal(features, rows, root, cfg)
    return ModelOutput(index, features, directed, e_st, association, components, rows, modes)


def output_to_forecast(output: ModelOutput) -> ScenarioForecast:
    index, modes = output.index, output.modes
    agents = {}
    for r, (row, members) in enumerate(zip(output.decoded_rows, output.components)):
        key = index.keys[row]
        agents[key] = AgentForecast(
            key=key,
            locations=modes.locations.data[r].copy(),
            scales=modes.scales.data[r].copy(),
            probabilities=modes.probabilities.data[r].copy(),
            origin=index.current_position[row].copy(),
            heading=index.heading[row].copy(),
            members=tuple(index.keys[m] for m in members),
        )
    associations = [(index.keys[i], index.keys[j]) for i, j in output.association.edges()]
    return ScenarioForecast(index.scenario_id, agents, associations)


class V2XGraphForecaster(Forecaster):
    name = "v2x_graph"

    def __init__(self, params: ParamStore, cfg: ModelConfig, switches: AblationSwitches = NO_ABLATION) -> None:
        self.params = params
        self.cfg = cfg
        self.switches = switches

    def predict(self, scenario: Scenario) -> ScenarioForecast:
        return output_to_forecast(model_forward(scenario, self.params, self.cfg, "infer", self.switches))
