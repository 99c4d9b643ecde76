from dataclasses import dataclass

import numpy as np

from coop_forecaster.config import ModelConfig
from coop_forecaster.Numerics import tensor as T
from coop_forecaster.Numerics.layers import declare_mlp, mlp_forward
from coop_forecaster.Numerics.params import ParamScope
from coop_forecaster.Numerics.tensor import Tensor

SCALE_FLOOR = 1e-3
FEATURE_ORDER = ("v_st", "v_mot", "v_mfg", "v_alg", "v_cig")


@dataclass
class DecodedModes:
    locations: Tensor  # (M, K, H, 2) agent-frame displacements from the current position
    scales: Tensor  # (M, K, H, 2) Laplace scales b > 0
    probabilities: Tensor  # (M, K)


def declare_decoder(params: ParamScope, cfg: ModelConfig) -> None:
    width = len(FEATURE_ORDER) * cfg.d
    declare_mlp(params.scope("decoder.trajectory"), [width, 2 * cfg.d, cfg.K * cfg.future_steps * 4])
    declare_mlp(params.scope("decoder.probability"), [width, cfg.d, cfg.K])


def decode_multimodal(features: dict[str, Tensor], rows: np.ndarray, params: ParamScope,
                      cfg: ModelConfig) -> DecodedModes:
    """Two heads over concat[v_st, v_mot, v_mfg, v_alg, v_cig] of the decoded rows."""
    bundle = T.concat([T.take_rows(features[name], rows) for name in FEATURE_ORDER], axis=-1)
    count = len(rows)
    raw = T.reshape(mlp_forward(params.scope("decoder.trajectory"), bundle), (count, cfg.K, cfg.future_steps, 4))
    locations = T.slice_(raw, (Ellipsis, slice(0, 2)))
    scales = T.softplus(T.slice_(raw, (Ellipsis, slice(2, 4)))) + SCALE_FLOOR
    probabilities = T.softmax(mlp_forward(params.scope("decoder.probability"), bundle), axis=-1)
    return DecodedModes(locations, scales, probabilities)
