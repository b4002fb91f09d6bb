"""Multilayer-perceptron parameters and forward application."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, add, matmul, rectifier


class MlpParams:
    """Weight matrices and bias vectors of a fully-connected rectifier network.

    Layer count and widths are fixed at construction; weights are row-major
    [fan_in, fan_out] so activations are row vectors.
    """

    def __init__(self, weights: list[Tensor], biases: list[Tensor]):
        if len(weights) != len(biases):
            raise ValueError("weights and biases must pair up layer by layer")
        for k, (w, b) in enumerate(zip(weights, biases)):
            if w.shape[1] != b.shape[0]:
                raise ValueError(f"layer {k}: weight {w.shape} incompatible with bias {b.shape}")
            if k > 0 and weights[k - 1].shape[1] != w.shape[0]:
                raise ValueError(
                    f"layer {k}: fan-in {w.shape[0]} does not match previous fan-out "
                    f"{weights[k - 1].shape[1]}"
                )
        self.weights = weights
        self.biases = biases

    @classmethod
    def create(cls, rng: np.random.Generator, widths: list[int]) -> "MlpParams":
        """He-initialized parameters for the given layer widths."""
        weights, biases = [], []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            scale = np.sqrt(2.0 / fan_in)
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(Tensor(rng.normal(0.0, scale, size=(fan_in, fan_out)), requires_grad=True))
            biases.append(Tensor(rng.uniform(-bound, bound, size=fan_out), requires_grad=True))
        return cls(weights, biases)

    @property
    def widths(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def apply(self, x, activate_final: bool = False) -> Tensor:
        """Forward pass; rectifier between layers, optionally after the last."""
        h = x
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = add(matmul(h, w), b)
            if k < last or activate_final:
                h = rectifier(h)
        return h

    def named(self, prefix: str) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"{prefix}.{k}.W"] = w
            out[f"{prefix}.{k}.b"] = b
        return out

    def copy_values_from(self, other: "MlpParams") -> None:
        for dst, src in zip(self.weights + self.biases, other.weights + other.biases):
            np.copyto(dst.values, src.values)
