import math
from dataclasses import dataclass, field

import numpy as np

from coop_forecaster.Numerics.params import ParamStore
from coop_forecaster.Utils.errors import NumericFailure


@dataclass
class AdamState:
    step: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)


def cosine_lr(lr0: float, step: int, total_steps: int) -> float:
    if total_steps <= 0:
        return lr0
    return lr0 * 0.5 * (1.0 + math.cos(math.pi * step / total_steps))


def global_grad_norm(grads: dict[str, np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for _, g in sorted(grads.items())))


def clip_grad_norm(grads: dict[str, np.ndarray], max_norm: float) -> tuple[dict[str, np.ndarray], float]:
    norm = global_grad_norm(grads)
    if max_norm <= 0 or norm <= max_norm:
        return grads, norm
    scale = max_norm / norm
    return {name: g * scale for name, g in grads.items()}, norm


def adamw_step(
    params: ParamStore,
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
    weight_decay: float = 0.0
) -> tuple[ParamStore, AdamState]:
    """Decoupled weight decay: theta <- theta - lr*wd*theta, then the bias-corrected Adam update."""
    missing = [name for name in params if name not in grads]
    if missing:
        raise NumericFailure(f"no gradient for parameters: {missing[:5]}")
    for name in params:
        if not np.isfinite(grads[name]).all():
            bad = int(np.count_nonzero(~np.isfinite(grads[name])))
            raise NumericFailure(f"non-finite gradient in {name} ({bad} entries) at step {state.step + 1}")

    beta1, beta2 = betas
    state.step += 1
    correction1 = 1.0 - beta1 ** state.step
    correction2 = 1.0 - beta2 ** state.step
    for name in params:
        grad = grads[name]
        m = state.first_moment.get(name, np.zeros_like(grad))
        v = state.second_moment.get(name, np.zeros_like(grad))
        m = beta1 * m + (1.0 - beta1) * grad
        v = beta2 * v + (1.0 - beta2) * grad * grad
        state.first_moment[name] = m
        state.second_moment[name] = v

        theta = params[name].data
        theta = theta - lr * weight_decay * theta
        theta = theta - lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
        params.assign(name, theta)
    return params, state
