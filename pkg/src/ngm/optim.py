"""Gradient-ascent Adam with global-norm clipping.

Objectives here are maximized (log-likelihoods, expected rewards), so the
update moves parameters along the gradient, not against it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatchError
from .seq2seq import Seq2SeqModel


@dataclass
class OptimizerState:
    lr: float = 1e-2
    clip_norm: float = 5.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def init_optimizer(model: Seq2SeqModel, lr: float = 1e-2,
                   clip_norm: float = 5.0) -> OptimizerState:
    return OptimizerState(
        lr=lr, clip_norm=clip_norm,
        m={k: np.zeros_like(p) for k, p in model.params.items()},
        v={k: np.zeros_like(p) for k, p in model.params.items()})


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))


def optimizer_step(state: OptimizerState, model: Seq2SeqModel,
                   grads: dict[str, np.ndarray]) -> None:
    """Clip to the global norm budget, then apply one ascent step in place."""
    for name, p in model.params.items():
        if name not in grads or grads[name].shape != p.shape:
            raise ShapeMismatchError(f"gradient block {name} missing or misshapen")
    norm = global_norm(grads)
    scale = state.clip_norm / norm if norm > state.clip_norm else 1.0
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for name, p in model.params.items():
        g = grads[name] * scale
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p += state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
