"""Fraction-conditioned quantile network and the scalar Q baseline."""

from __future__ import annotations

import numpy as np

from ..autodiff import MlpParams, Tensor, cosine_basis, mul, no_grad


class QuantileNetwork:
    """Return-quantile approximator Z_tau(s, a).

    A state-embedding MLP and a cosine fraction embedding are merged by a
    Hadamard product and fed to a head MLP with one output per action.
    """

    def __init__(
        self,
        obs_dim: int,
        n_actions: int,
        rng: np.random.Generator,
        width: int = 128,
        n_basis: int = 64,
        state_depth: int = 2,
    ):
        self.obs_dim = obs_dim
        self.n_actions = n_actions
        self.width = width
        self.n_basis = n_basis
        self.state_depth = state_depth
        self.state_mlp = MlpParams.create(rng, [obs_dim] + [width] * state_depth)
        self.frac_layer = MlpParams.create(rng, [n_basis, width])
        self.head = MlpParams.create(rng, [width, width, n_actions])

    def forward(self, obs_rows: np.ndarray, tau_rows: np.ndarray) -> Tensor:
        """Quantile values for row-aligned (state, fraction) pairs -> [rows, actions]."""
        psi = self.state_mlp.apply(Tensor(obs_rows), activate_final=True)
        phi = self.frac_layer.apply(cosine_basis(tau_rows, self.n_basis), activate_final=True)
        return self.head.apply(mul(psi, phi))

    def quantile_values(self, obs: np.ndarray, taus: np.ndarray) -> np.ndarray:
        """Untracked forward for a batch of states with per-state fractions.

        obs: [B, obs_dim], taus: [B, K] -> values [B, K, n_actions].
        """
        obs = np.atleast_2d(obs)
        taus = np.atleast_2d(taus)
        batch, k = taus.shape
        with no_grad():
            out = self.forward(np.repeat(obs, k, axis=0), taus.reshape(-1))
        return out.values.reshape(batch, k, self.n_actions)

    def params(self) -> dict[str, Tensor]:
        out = self.state_mlp.named("state_mlp")
        out.update(self.frac_layer.named("frac_layer"))
        out.update(self.head.named("head"))
        return out

    def clone(self) -> "QuantileNetwork":
        twin = object.__new__(QuantileNetwork)
        twin.obs_dim, twin.n_actions = self.obs_dim, self.n_actions
        twin.width, twin.n_basis = self.width, self.n_basis
        twin.state_depth = self.state_depth
        twin.state_mlp = _clone_mlp(self.state_mlp)
        twin.frac_layer = _clone_mlp(self.frac_layer)
        twin.head = _clone_mlp(self.head)
        return twin

    def copy_from(self, other: "QuantileNetwork") -> None:
        self.state_mlp.copy_values_from(other.state_mlp)
        self.frac_layer.copy_values_from(other.frac_layer)
        self.head.copy_values_from(other.head)


class ScalarQNetwork:
    """Plain action-value MLP for the DQN baseline."""

    def __init__(self, obs_dim: int, n_actions: int, rng: np.random.Generator, width: int = 128):
        self.obs_dim = obs_dim
        self.n_actions = n_actions
        self.width = width
        self.mlp = MlpParams.create(rng, [obs_dim, width, width, n_actions])

    def forward(self, obs: np.ndarray) -> Tensor:
        return self.mlp.apply(Tensor(np.atleast_2d(obs)))

    def q_values(self, obs: np.ndarray) -> np.ndarray:
        with no_grad():
            return self.forward(obs).values

    def params(self) -> dict[str, Tensor]:
        return self.mlp.named("q_mlp")

    def clone(self) -> "ScalarQNetwork":
        twin = object.__new__(ScalarQNetwork)
        twin.obs_dim, twin.n_actions, twin.width = self.obs_dim, self.n_actions, self.width
        twin.mlp = _clone_mlp(self.mlp)
        return twin

    def copy_from(self, other: "ScalarQNetwork") -> None:
        self.mlp.copy_values_from(other.mlp)


def _clone_mlp(src: MlpParams) -> MlpParams:
    weights = [Tensor(w.values.copy(), requires_grad=True) for w in src.weights]
    biases = [Tensor(b.values.copy(), requires_grad=True) for b in src.biases]
    return MlpParams(weights, biases)
