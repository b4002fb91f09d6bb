"""Adaptive-moment parameter updates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


class NonFiniteGradientError(RuntimeError):
    """A parameter gradient contains NaN or infinity."""


@dataclass
class OptimizerState:
    """Per-parameter first/second moment accumulators plus step counter."""

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    stability_eps: float = 1e-8
    step: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)


def optimizer_step(
    params: dict[str, Tensor],
    state: OptimizerState,
    grad_clip: float | None = None,
) -> None:
    """One adaptive-moment update of `params` in place; missing grads count as zero.

    `grad_clip`, when set, rescales the global gradient norm down to that value.
    """
    grads: dict[str, np.ndarray] = {}
    for name, p in params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.values)
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient in parameter '{name}'")
        grads[name] = g

    if grad_clip is not None:
        total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
        if total > grad_clip:
            scale = grad_clip / total
            grads = {name: g * scale for name, g in grads.items()}

    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1**t
    bias2 = 1.0 - b2**t
    for name, p in params.items():
        g = grads[name]
        m = state.first_moment.setdefault(name, np.zeros_like(p.values))
        v = state.second_moment.setdefault(name, np.zeros_like(p.values))
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.values -= state.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + state.stability_eps)


def zero_grads(params: dict[str, Tensor]) -> None:
    for p in params.values():
        p.grad = None
