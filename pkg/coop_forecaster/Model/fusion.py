"""
Association classifier and the three fusion subgraphs.

Each fusion layer is a pre-norm cross-attention block from a track (query) to
its neighbour set (keys/values). Tracks whose neighbour set is empty are not
computed and keep their input row bit for bit.
"""

from dataclasses import dataclass

import numpy as np

from coop_forecaster.config import ModelConfig
from coop_forecaster.Model.encoders import encode_agent_relations, encode_lane_relations, encode_lanes
from coop_forecaster.Model.scene_graph import SceneIndex, heading_bin
from coop_forecaster.Numerics import tensor as T
from coop_forecaster.Numerics.layers import cross_attention_block, declare_attention_block, declare_mlp, mlp_forward
from coop_forecaster.Numerics.params import ParamScope
from coop_forecaster.Numerics.tensor import Tensor

LANE_ATTRIBUTE_ROWS = 6  # 3 turn directions x 2 road types


@dataclass
class AssociationSet:
    candidates: list[tuple[int, int]]  # scene-index rows, earlier view first
    logits: Tensor | None  # (C,)
    associated: np.ndarray  # (C,) bool

    @property
    def probabilities(self) -> np.ndarray:
        if self.logits is None:
            return np.zeros(0)
        return 1.0 / (1.0 + np.exp(-self.logits.data))

    def edges(self) -> list[tuple[int, int]]:
        return [pair for pair, on in zip(self.candidates, self.associated) if on]

    def adjacency(self, n_tracks: int) -> np.ndarray:
        """Symmetric boolean A over scene-index rows."""
        matrix = np.zeros((n_tracks, n_tracks), dtype=bool)
        for i, j in self.edges():
            matrix[i, j] = matrix[j, i] = True
        return matrix


@dataclass
class Neighbourhood:
    nodes: np.ndarray  # (M,) rows being updated
    neighbours: np.ndarray  # (M, D) indices into the key/value source, padded with 0
    mask: np.ndarray  # (M, D) True for real neighbours
    extras: list[np.ndarray]  # per additional key/value term, (M, D) row indices


def declare_fusion(params: ParamScope, cfg: ModelConfig) -> None:
    d, hidden = cfg.d, cfg.ffn_ratio * cfg.d
    declare_mlp(params.scope("assoc"), [d, d, 1])
    for k in range(cfg.mfg_layers):
        declare_attention_block(params.scope(f"mfg.block{k}"), d, hidden, cross=True)
    params.zeros("alg.attributes", (LANE_ATTRIBUTE_ROWS, d))
    for k in range(cfg.alg_layers):
        declare_attention_block(params.scope(f"alg.block{k}"), d, hidden, cross=True)
    params.zeros("cig.attributes", (cfg.heading_bins, d))
    for k in range(cfg.cig_layers):
        declare_attention_block(params.scope(f"cig.block{k}"), d, hidden, cross=True)


def predict_association(e_st: Tensor | None, candidates: list[tuple[int, int]], params: ParamScope,
                        cfg: ModelConfig, fully_connected: bool = False) -> AssociationSet:
    """One logit per candidate from e_st of its forward orientation; associated iff sigmoid(logit) > threshold."""
    if not candidates:
        return AssociationSet([], None, np.zeros(0, dtype=bool))
    forward = T.slice_(e_st, slice(0, len(candidates)))
    logits = T.reshape(mlp_forward(params.scope("assoc"), forward), (len(candidates),))
    if fully_connected:
        associated = np.ones(len(candidates), dtype=bool)
    else:
        probabilities = 1.0 / (1.0 + np.exp(-logits.data))
        associated = probabilities > cfg.assoc_threshold
    return AssociationSet(list(candidates), logits, associated)


def _pack(rows: dict[int, list[tuple]]) -> Neighbourhood | None:
    """Pad per-node neighbour lists (tuples of index columns) into rectangular arrays."""
    nodes = sorted(node for node, items in rows.items() if items)
    if not nodes:
        return None
    width = max(len(rows[node]) for node in nodes)
    columns = len(rows[nodes[0]][0])
    packed = np.zeros((columns, len(nodes), width), dtype=np.int64)
    mask = np.zeros((len(nodes), width), dtype=bool)
    for r, node in enumerate(nodes):
        for c, item in enumerate(rows[node]):
            packed[:, r, c] = item
            mask[r, c] = True
    return Neighbourhood(np.array(nodes, dtype=np.int64), packed[0], mask, list(packed[1:]))


def _attend(block: ParamScope, v: Tensor, hood: Neighbourhood, kv: Tensor, cfg: ModelConfig) -> Tensor:
    query = T.reshape(T.take_rows(v, hood.nodes), (len(hood.nodes), 1, cfg.d))
    updated = cross_attention_block(block, query, kv, hood.mask[:, None, :], cfg.n_heads, cfg.layer_norm)
    return T.scatter_rows(v, hood.nodes, T.reshape(updated, (len(hood.nodes), cfg.d)))


def mfg_neighbourhood(index: SceneIndex, association: AssociationSet, directed: list[tuple[int, int]],
                      ego_only: bool = False) -> Neighbourhood | None:
    """Associated cross-view tracks, used symmetrically; columns are (neighbour row, e_st row of i->j)."""
    edge_row = {pair: r for r, pair in enumerate(directed)}
    rows: dict[int, list[tuple]] = {}
    for i, j in association.edges():
        for a, b in ((i, j), (j, i)):
            if ego_only and not index.ego_view_mask[b]:
                continue
            rows.setdefault(a, []).append((b, edge_row[(a, b)]))
    for items in rows.values():
        items.sort()
    return _pack(rows)


def mfg_step(v: Tensor, e_st: Tensor | None, hood: Neighbourhood | None, params: ParamScope,
             cfg: ModelConfig) -> Tensor:
    """v_i <- block(v_i, {v_j + e_st_ij}) over associated neighbours, mfg_layers times."""
    if hood is None:
        return v
    for k in range(cfg.mfg_layers):
        kv = T.take_rows(v, hood.neighbours) + T.take_rows(e_st, hood.extras[0])
        v = _attend(params.scope(f"mfg.block{k}"), v, hood, kv, cfg)
    return v


def alg_neighbourhood(index: SceneIndex, ego_only: bool = False) -> tuple[Neighbourhood | None, np.ndarray, np.ndarray]:
    """Lanes within range per track; columns are (flat pair row, lane row)."""
    track_rows, lane_rows = np.nonzero(index.lane_in_range)
    if ego_only:
        keep = index.ego_view_mask[track_rows]
        track_rows, lane_rows = track_rows[keep], lane_rows[keep]
    rows: dict[int, list[tuple]] = {}
    for flat, (i, lane) in enumerate(zip(track_rows.tolist(), lane_rows.tolist())):
        rows.setdefault(i, []).append((flat, lane))
    return _pack(rows), track_rows, lane_rows


def alg_step(v: Tensor, index: SceneIndex, params: ParamScope, cfg: ModelConfig,
             ego_only: bool = False) -> Tensor:
    """v_i <- block(v_i, {v_map_il + e_rs_il + a_l}) over in-range lanes, alg_layers times."""
    hood, track_rows, lane_rows = alg_neighbourhood(index, ego_only)
    if hood is None or cfg.alg_layers == 0:
        return v
    lane_tokens = (encode_lanes(index, params, track_rows, lane_rows)
                   + encode_lane_relations(index, params, track_rows, lane_rows)
                   + T.take_rows(params["alg.attributes"], index.lane_attrs[lane_rows]))
    kv = T.take_rows(lane_tokens, hood.neighbours)
    for k in range(cfg.alg_layers):
        v = _attend(params.scope(f"alg.block{k}"), v, hood, kv, cfg)
    return v


def cig_neighbourhood(index: SceneIndex, adjacency: np.ndarray, cfg: ModelConfig,
                      ego_only: bool = False) -> tuple[Neighbourhood | None, list[tuple[int, int]], list[int]]:
    """
    Tracks present at the current frame: same-view tracks and cross-view tracks
    not associated with i. Columns are (neighbour row, pair row, heading bin).
    """
    present = index.present_now
    pairs: list[tuple[int, int]] = []
    bins: list[int] = []
    rows: dict[int, list[tuple]] = {}
    for i in range(index.n_tracks):
        if not present[i]:
            continue
        for j in range(index.n_tracks):
            if j == i or not present[j] or adjacency[i, j]:
                continue
            if ego_only and not index.ego_view_mask[j]:
                continue
            bin_ij = heading_bin(index.heading[i], index.heading[j], cfg.heading_bins)
            rows.setdefault(i, []).append((j, len(pairs), bin_ij))
            pairs.append((i, j))
            bins.append(bin_ij)
    return _pack(rows), pairs, bins


def cig_step(v: Tensor, index: SceneIndex, adjacency: np.ndarray, params: ParamScope, cfg: ModelConfig,
             ego_only: bool = False) -> Tensor:
    """v_i <- block(v_i, {v_j + e_rs_ij + a_ij}) over interacting tracks, cig_layers times."""
    hood, pairs, _ = cig_neighbourhood(index, adjacency, cfg, ego_only)
    if hood is None or cfg.cig_layers == 0:
        return v
    sources = np.array([i for i, _ in pairs], dtype=np.int64)
    targets = np.array([j for _, j in pairs], dtype=np.int64)
    relation = encode_agent_relations(index, params, sources, targets)
    edge_terms = T.take_rows(relation, hood.extras[0]) + T.take_rows(params["cig.attributes"], hood.extras[1])
    for k in range(cfg.cig_layers):
        kv = T.take_rows(v, hood.neighbours) + edge_terms
        v = _attend(params.scope(f"cig.block{k}"), v, hood, kv, cfg)
    return v
