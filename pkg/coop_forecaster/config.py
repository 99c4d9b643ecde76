import json
import os
from dataclasses import asdict, dataclass, field, fields

from coop_forecaster.Utils.errors import ConfigError

CONFIG_ENV_VAR = "COOP_FORECASTER_CONFIG"
VIEW_KINDS = ("ego", "infrastructure", "vehicle")


def _require(condition: bool, section: str, name: str, constraint: str) -> None:
    if not condition:
        raise ConfigError(f"{section}.{name}: {constraint}")


@dataclass
class GenConfig:
    n_agents: int = 8  # Agents per scenario, the ego vehicle included
    n_views: int = 3  # Ego, infrastructure, then cooperative vehicles
    arm_length: float = 60.0  # Intersection arm length (m)
    lane_spacing: float = 3.5  # Lane width / spacing (m)
    lane_sample_step: float = 2.0  # Lane centerline sampling step (m)
    noise_sigma: float = 0.15  # Per-axis position noise (m), clipped at 6 sigma
    occlusion_sectors: int = 2  # Random occluders per view
    occlusion_half_width_deg: float = 12.0  # Angular half width of a random occluder
    detection_range: float = 70.0  # Sensor range (m)
    fragmentation_prob: float = 0.5  # Chance that an occlusion gap >= 3 frames splits a track
    history_steps: int = 40  # T
    future_steps: int = 40  # H
    dt: float = 0.1  # Seconds per step
    maneuver_weights: tuple[float, float, float] = (0.5, 0.25, 0.25)  # Straight, left, right
    accel_prob: float = 0.3  # Share of agents with non-zero longitudinal acceleration
    max_accel: float = 1.5  # |a| bound (m/s^2)
    seed: int = 0
    fixed_sectors: tuple = ()  # (view_index, bearing_deg, half_width_deg, min_range_m) occluders

    def validate(self) -> None:
        s = "gen"
        _require(self.n_agents >= 1, s, "n_agents", "n_agents ≥ 1")
        _require(self.n_views >= 1, s, "n_views", "n_views ≥ 1")
        _require(self.n_views <= self.n_agents + 1, s, "n_views",
                 "n_views ≤ n_agents + 1 (each vehicle view rides on a non-ego agent)")
        _require(self.arm_length > 0, s, "arm_length", "arm_length > 0")
        _require(self.lane_spacing > 0, s, "lane_spacing", "lane_spacing > 0")
        _require(self.lane_sample_step > 0, s, "lane_sample_step", "lane_sample_step > 0")
        _require(self.noise_sigma >= 0, s, "noise_sigma", "σ ≥ 0")
        _require(self.occlusion_sectors >= 0, s, "occlusion_sectors", "occlusion_sectors ≥ 0")
        _require(self.detection_range > 0, s, "detection_range", "detection_range > 0")
        _require(0.0 <= self.fragmentation_prob <= 1.0, s, "fragmentation_prob", "0 ≤ p ≤ 1")
        _require(self.history_steps >= 2, s, "history_steps", "T ≥ 2")
        _require(self.future_steps >= 2, s, "future_steps", "H ≥ 2")
        _require(self.dt > 0, s, "dt", "dt > 0")
        _require(len(self.maneuver_weights) == 3 and min(self.maneuver_weights) >= 0
                 and sum(self.maneuver_weights) > 0, s, "maneuver_weights", "three non-negative weights, sum > 0")
        _require(0.0 <= self.accel_prob <= 1.0, s, "accel_prob", "0 ≤ p ≤ 1")
        _require(self.max_accel >= 0, s, "max_accel", "max_accel ≥ 0")
        for sector in self.fixed_sectors:
            _require(len(sector) == 4 and 0 <= sector[0] < self.n_views, s, "fixed_sectors",
                     "(view_index < n_views, bearing_deg, half_width_deg, min_range_m)")


@dataclass
class LabelGenConfig:
    tau_iou: float = 0.1  # Minimum per-frame IoU of a valid match
    eps_length: int = 5  # Minimum matched-frame count of an accepted pair

    def validate(self) -> None:
        _require(0.0 <= self.tau_iou < 1.0, "labels", "tau_iou", "0 ≤ tau_iou < 1")
        _require(self.eps_length >= 1, "labels", "eps_length", "eps_length ≥ 1")


@dataclass
class ModelConfig:
    d: int = 128  # Hidden width
    n_heads: int = 16
    motion_sa_layers: int = 4
    st_sa_layers: int = 2
    edge_sa_layers: int = 2
    mfg_layers: int = 3
    alg_layers: int = 1
    cig_layers: int = 3
    K: int = 6  # Forecast modes
    lane_range: float = 50.0  # Lane observation range (m)
    assoc_threshold: float = 0.5  # Pair associated iff sigmoid(logit) > threshold
    history_steps: int = 40  # T the encoders are sized for
    future_steps: int = 40  # H the decoder emits
    ffn_ratio: int = 4  # Feed-forward hidden width = ffn_ratio * d
    heading_bins: int = 12  # Relative-heading attribute bins
    layer_norm: bool = True  # Pre-norm residual blocks
    init_seed: int = 0

    def validate(self) -> None:
        s = "model"
        _require(self.d >= 1, s, "d", "d ≥ 1")
        _require(self.n_heads >= 1, s, "n_heads", "n_heads ≥ 1")
        _require(self.d % self.n_heads == 0, s, "d", f"d % n_heads == 0 (d={self.d}, n_heads={self.n_heads})")
        for name in ("motion_sa_layers", "st_sa_layers", "edge_sa_layers", "mfg_layers", "alg_layers", "cig_layers"):
            _require(getattr(self, name) >= 0, s, name, f"{name} ≥ 0")
        _require(self.K >= 1, s, "K", "K ≥ 1")
        _require(self.lane_range > 0, s, "lane_range", "lane_range > 0")
        _require(0.0 <= self.assoc_threshold < 1.0, s, "assoc_threshold", "0 ≤ threshold < 1")
        _require(self.history_steps >= 2, s, "history_steps", "T ≥ 2")
        _require(self.future_steps >= 2, s, "future_steps", "H ≥ 2")
        _require(self.ffn_ratio >= 1, s, "ffn_ratio", "ffn_ratio ≥ 1")
        _require(self.heading_bins >= 1, s, "heading_bins", "heading_bins ≥ 1")


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 8  # Scenarios per optimizer step
    lr0: float = 1e-3
    weight_decay: float = 1e-4
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    seed: int = 0
    loss_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)  # L_dis, L_reg, L_cls
    grad_clip: float = 5.0  # Global-norm clip, <= 0 disables
    fraction: float = 1.0  # Share of the training split used (scalability sweep)
    label_disturbance: float = 0.0  # Probability of flipping a candidate's pseudo label
    val_split: float = 0.2  # Held-out share when `train` receives a single data file

    def validate(self) -> None:
        s = "train"
        _require(self.epochs >= 1, s, "epochs", "epochs ≥ 1")
        _require(self.batch_size >= 1, s, "batch_size", "batch_size ≥ 1")
        _require(self.lr0 > 0, s, "lr0", "lr0 > 0")
        _require(self.weight_decay >= 0, s, "weight_decay", "weight_decay ≥ 0")
        _require(len(self.betas) == 2 and all(0.0 <= b < 1.0 for b in self.betas), s, "betas", "0 ≤ beta < 1")
        _require(self.eps > 0, s, "eps", "eps > 0")
        _require(len(self.loss_weights) == 3 and all(w > 0 for w in self.loss_weights), s, "loss_weights",
                 "three positive weights")
        _require(0.0 < self.fraction <= 1.0, s, "fraction", "0 < fraction ≤ 1")
        _require(0.0 <= self.label_disturbance <= 1.0, s, "label_disturbance", "0 ≤ p ≤ 1")
        _require(0.0 <= self.val_split < 1.0, s, "val_split", "0 ≤ val_split < 1")


@dataclass
class EvalConfig:
    miss_threshold: float = 2.0  # Final-step miss distance (m)
    target_only: bool = True  # Score the scenario target agent only
    mask_views: tuple[str, ...] = ()  # View kinds emptied before evaluation
    drop_ratios: tuple[float, ...] = (0.1, 0.3, 0.5)
    latency_frames: tuple[int, ...] = (0, 1, 2)
    seed: int = 0

    def validate(self) -> None:
        s = "eval"
        _require(self.miss_threshold > 0, s, "miss_threshold", "miss_threshold > 0")
        _require(all(kind in VIEW_KINDS[1:] for kind in self.mask_views), s, "mask_views",
                 "kinds ⊆ {infrastructure, vehicle}")
        _require(all(0.0 <= r <= 1.0 for r in self.drop_ratios), s, "drop_ratios", "0 ≤ ratio ≤ 1")
        _require(all(k in (0, 1, 2) for k in self.latency_frames), s, "latency_frames", "k ∈ {0, 1, 2}")


@dataclass
class PathsConfig:
    data: str = "data/scenarios.jsonl"
    val_data: str = ""  # Optional separate validation file
    labels: str = "data/labels.jsonl"
    checkpoint: str = "checkpoints/model.ckpt"
    reports: str = "reports"

    def validate(self) -> None:
        _require(bool(self.data), "paths", "data", "non-empty path")


@dataclass
class RunConfig:
    gen: GenConfig = field(default_factory=GenConfig)
    labels: LabelGenConfig = field(default_factory=LabelGenConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)

    def validate(self) -> None:
        for section in (self.gen, self.labels, self.model, self.train, self.eval, self.paths):
            section.validate()


DEFAULT_GEN_CONFIG = GenConfig()
DEFAULT_LABEL_CONFIG = LabelGenConfig()
DEFAULT_MODEL_CONFIG = ModelConfig()
DEFAULT_TRAIN_CONFIG = TrainConfig()
DEFAULT_EVAL_CONFIG = EvalConfig()
DEFAULT_RUN_CONFIG = RunConfig()

_SECTIONS = {
    "gen": GenConfig,
    "labels": LabelGenConfig,
    "model": ModelConfig,
    "train": TrainConfig,
    "eval": EvalConfig,
    "paths": PathsConfig,
}


def _to_tuple(value):
    if isinstance(value, (list, tuple)):
        return tuple(_to_tuple(item) for item in value)
    return value


def build_section(cls, values: dict, section: str):
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ConfigError(f"{section}.{unknown[0]}: unknown key")
    kwargs = {}
    for name, value in values.items():
        default = getattr(cls(), name)
        if isinstance(default, tuple):
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"{section}.{name}: expected a list")
            value = _to_tuple(value)
        elif isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"{section}.{name}: expected true/false")
        elif isinstance(default, int):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{section}.{name}: expected an integer")
        elif isinstance(default, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{section}.{name}: expected a number")
            value = float(value)
        elif isinstance(default, str) and not isinstance(value, str):
            raise ConfigError(f"{section}.{name}: expected a string")
        kwargs[name] = value
    return cls(**kwargs)


def config_from_dict(document: dict) -> RunConfig:
    if not isinstance(document, dict):
        raise ConfigError("config: top level must be an object")
    unknown = sorted(set(document) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown section")
    sections = {}
    for name, cls in _SECTIONS.items():
        values = document.get(name, {})
        if not isinstance(values, dict):
            raise ConfigError(f"{name}: section must be an object")
        sections[name] = build_section(cls, values, name)
    config = RunConfig(**sections)
    config.validate()
    return config


def config_to_dict(config: RunConfig) -> dict:
    return asdict(config)


def load_config(path: str | None = None) -> RunConfig:
    path = path or os.environ.get(CONFIG_ENV_VAR)
    if not path:
        config = RunConfig()
        config.validate()
        return config
    if not os.path.exists(path):
        raise ConfigError(f"config: file not found: {path}")
    with open(path, "r") as file:
        try:
            document = json.load(file)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: {path} is not valid JSON ({exc})") from exc
    return config_from_dict(document)


def save_config(config: RunConfig, path: str) -> None:
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    with open(path, "w") as file:
        json.dump(config_to_dict(config), file, indent=2, sort_keys=True)
        file.write("\n")
