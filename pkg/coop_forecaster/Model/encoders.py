import numpy as np

from coop_forecaster.config import ModelConfig
from coop_forecaster.Geometry.transforms import rotate_batch
from coop_forecaster.Model.scene_graph import SceneIndex, rotate_rows
from coop_forecaster.Numerics import tensor as T
from coop_forecaster.Numerics.layers import (declare_attention_block, declare_layer_norm, declare_mlp, layer_norm,
                                             linear, mlp_forward, self_attention_block)
from coop_forecaster.Numerics.params import ParamScope
from coop_forecaster.Numerics.tensor import Tensor
from coop_forecaster.Utils.errors import EncodingError


def declare_encoders(params: ParamScope, cfg: ModelConfig) -> None:
    d, steps, hidden = cfg.d, cfg.history_steps, cfg.ffn_ratio * cfg.d

    motion = params.scope("motion")
    declare_mlp(motion.scope("embed"), [2, d, d])
    motion.zeros("pad", (d,))
    motion.zeros("pe", (steps, d))
    for k in range(cfg.motion_sa_layers):
        declare_attention_block(motion.scope(f"block{k}"), d, hidden)
    declare_layer_norm(motion.scope("norm_out"), d)

    st = params.scope("st")
    declare_mlp(st.scope("embed"), [2, d, d])
    st.zeros("pe", (steps, d))
    for k in range(cfg.st_sa_layers):
        declare_attention_block(st.scope(f"block{k}"), d, hidden)
    declare_layer_norm(st.scope("norm_out"), d)

    declare_mlp(params.scope("lane.embed"), [2, d, d])
    declare_mlp(params.scope("relation.embed"), [2, d, d])

    edge = params.scope("edge")
    edge.linear("proj", 2 * d, d)
    for k in range(cfg.edge_sa_layers):
        declare_attention_block(edge.scope(f"block{k}"), d, hidden)
    declare_layer_norm(edge.scope("norm_out"), d)


def _finish(params: ParamScope, x: Tensor, cfg: ModelConfig) -> Tensor:
    return layer_norm(params.scope("norm_out"), x) if cfg.layer_norm else x


def motion_inputs(index: SceneIndex) -> tuple[np.ndarray, np.ndarray]:
    """Rotated per-step displacements (N, T, 2) and the mask of steps that have one."""
    valid = np.zeros_like(index.observed)
    valid[:, 1:] = index.observed[:, 1:] & index.observed[:, :-1]
    steps = np.zeros_like(index.positions)
    steps[:, 1:] = index.positions[:, 1:] - index.positions[:, :-1]
    rotated = rotate_rows(index.heading, steps)
    return np.where(valid[..., None], rotated, 0.0), valid


def encode_motion(index: SceneIndex, params: ParamScope, cfg: ModelConfig) -> tuple[Tensor, Tensor]:
    """
    Causal temporal encoder over heading-aligned displacements.

    Steps without a displacement (missing frame at t or t-1) take the learnable
    padding token. Returns v_mot (N, d), read at each track's last observed
    step, and the full hidden sequence (N, T, d).
    """
    if (index.observed.sum(axis=1) < 2).any():
        raise EncodingError(f"scenario {index.scenario_id}: motion encoding needs two observed frames per track")
    motion = params.scope("motion")
    inputs, valid = motion_inputs(index)
    n, steps = valid.shape
    tokens = T.where(valid[..., None], mlp_forward(motion.scope("embed"), Tensor(inputs)), motion["pad"])
    hidden = tokens + motion["pe"]
    causal = np.tril(np.ones((steps, steps), dtype=bool))
    for k in range(cfg.motion_sa_layers):
        hidden = self_attention_block(motion.scope(f"block{k}"), hidden, causal, cfg.n_heads, cfg.layer_norm)
    hidden = _finish(motion, hidden, cfg)
    rows = np.arange(n) * steps + index.last_step
    v_mot = T.take_rows(T.reshape(hidden, (n * steps, cfg.d)), rows)
    return v_mot, hidden


def st_inputs(index: SceneIndex) -> np.ndarray:
    """Observed positions in the ego pose frame; missing steps are zero."""
    local = rotate_batch(index.anchor_heading, index.positions - index.anchor_position)
    return np.where(index.observed[..., None], local, 0.0)


def encode_st(index: SceneIndex, params: ParamScope, cfg: ModelConfig) -> tuple[Tensor, Tensor]:
    """Bidirectional encoder over ego-frame positions; returns v_st (N, d) and per-step states (N, T, d)."""
    st = params.scope("st")
    hidden = mlp_forward(st.scope("embed"), Tensor(st_inputs(index))) + st["pe"]
    key_mask = index.observed[:, None, :]
    for k in range(cfg.st_sa_layers):
        hidden = self_attention_block(st.scope(f"block{k}"), hidden, key_mask, cfg.n_heads, cfg.layer_norm)
    states = _finish(st, hidden, cfg)
    weights = index.observed[..., None].astype(np.float64)
    counts = index.observed.sum(axis=1, keepdims=True).astype(np.float64)
    v_st = T.sum_(states * weights, axis=1) * (1.0 / counts)
    return v_st, states


def encode_lanes(index: SceneIndex, params: ParamScope, track_rows: np.ndarray, lane_rows: np.ndarray) -> Tensor:
    """v_map for (track, lane) pairs: lane vector in the querying track's heading frame."""
    inputs = rotate_rows(index.heading[track_rows], index.lane_vectors[lane_rows])
    return mlp_forward(params.scope("lane.embed"), Tensor(inputs))


def encode_relative(params: ParamScope, headings: np.ndarray, offsets: np.ndarray) -> Tensor:
    """e_rs from offsets p_i - p_j rotated into the frame of track i."""
    return mlp_forward(params.scope("relation.embed"), Tensor(rotate_rows(headings, offsets)))


def encode_agent_relations(index: SceneIndex, params: ParamScope, sources: np.ndarray,
                           targets: np.ndarray) -> Tensor:
    offsets = index.current_position[sources] - index.current_position[targets]
    return encode_relative(params, index.heading[sources], offsets)


def encode_lane_relations(index: SceneIndex, params: ParamScope, track_rows: np.ndarray,
                          lane_rows: np.ndarray) -> Tensor:
    offsets = index.current_position[track_rows] - index.lane_starts[lane_rows]
    return encode_relative(params, index.heading[track_rows], offsets)


def encode_edges(index: SceneIndex, states: Tensor, params: ParamScope, cfg: ModelConfig,
                 directed: list[tuple[int, int]]) -> Tensor | None:
    """
    e_st for directed track pairs: per-step concat of both tracks' ST states
    (zero where either frame is missing), projected, self-attended, mean-pooled.
    """
    if not directed:
        return None
    edge = params.scope("edge")
    sources = np.array([i for i, _ in directed], dtype=np.int64)
    targets = np.array([j for _, j in directed], dtype=np.int64)
    both = (index.observed[sources] & index.observed[targets])[..., None].astype(np.float64)
    tokens = T.concat([T.take_rows(states, sources), T.take_rows(states, targets)], axis=-1) * both
    hidden = linear(edge.scope("proj"), tokens)
    steps = index.observed.shape[1]
    full = np.ones((steps, steps), dtype=bool)
    for k in range(cfg.edge_sa_layers):
        hidden = self_attention_block(edge.scope(f"block{k}"), hidden, full, cfg.n_heads, cfg.layer_norm)
    return T.mean(_finish(edge, hidden, cfg), axis=1)
