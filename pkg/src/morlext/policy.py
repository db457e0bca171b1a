"""Gaussian MLP policies, value networks, and flat parameter vectors.

All trainable state lives in plain numpy arrays. A policy (and optionally
its critic) flattens losslessly into a single float64 vector with a
recorded layout, which is the representation every other module operates
on: training updates it, directional differences subtract it, and the
extension stage takes linear combinations of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .envs import VectorRewardEnv

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class MlpSpec:
    """Fully-connected tanh network shape: (input, hidden..., output)."""

    layer_sizes: tuple[int, ...]
    activation: str = "tanh"

    def __post_init__(self) -> None:
        if len(self.layer_sizes) < 3:
            raise ValueError("need at least one hidden layer")
        if any(s < 1 for s in self.layer_sizes):
            raise ValueError("all layer sizes must be >= 1")
        if self.activation != "tanh":
            raise ValueError(f"unsupported activation {self.activation!r}")

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1


class Mlp:
    """Weights and biases for an MlpSpec; tanh hidden layers, linear output."""

    def __init__(self, spec: MlpSpec, weights: list[np.ndarray], biases: list[np.ndarray]):
        self.spec = spec
        self.weights = weights
        self.biases = biases

    @classmethod
    def init(cls, spec: MlpSpec, rng: np.random.Generator, out_scale: float = 1.0) -> "Mlp":
        weights, biases = [], []
        sizes = spec.layer_sizes
        for i in range(spec.n_layers):
            fan_in = sizes[i]
            scale = 1.0 / np.sqrt(fan_in)
            if i == spec.n_layers - 1:
                scale *= out_scale
            weights.append(rng.normal(0.0, scale, size=(sizes[i], sizes[i + 1])))
            biases.append(np.zeros(sizes[i + 1]))
        return cls(spec, weights, biases)

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = x
        for i in range(self.spec.n_layers - 1):
            h = np.tanh(h @ self.weights[i] + self.biases[i])
        return h @ self.weights[-1] + self.biases[-1]

    def forward_cached(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Forward pass keeping post-activation values for backprop."""
        acts = [x]
        h = x
        for i in range(self.spec.n_layers - 1):
            h = np.tanh(h @ self.weights[i] + self.biases[i])
            acts.append(h)
        return h @ self.weights[-1] + self.biases[-1], acts

    def backward(
        self, grad_out: np.ndarray, acts: list[np.ndarray]
    ) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Grads of a scalar loss wrt weights/biases given d(loss)/d(output)."""
        grad_w: list[np.ndarray | None] = [None] * self.spec.n_layers
        grad_b: list[np.ndarray | None] = [None] * self.spec.n_layers
        delta = grad_out
        for i in range(self.spec.n_layers - 1, -1, -1):
            grad_w[i] = acts[i].T @ delta
            grad_b[i] = delta.sum(axis=0)
            if i > 0:
                # tanh'(z) = 1 - tanh(z)^2, and acts[i] stores tanh(z).
                delta = (delta @ self.weights[i].T) * (1.0 - acts[i] ** 2)
        return grad_w, grad_b  # type: ignore[return-value]


@dataclass
class GaussianPolicy:
    """Diagonal-Gaussian actor: an MLP mean plus state-independent log stds."""

    mean_net: Mlp
    log_std: np.ndarray

    @property
    def act_dim(self) -> int:
        return self.log_std.shape[0]

    @classmethod
    def init(cls, spec: MlpSpec, rng: np.random.Generator, log_std_init: float = 0.0) -> "GaussianPolicy":
        # Small final-layer scale keeps untrained mean actions near zero.
        net = Mlp.init(spec, rng, out_scale=0.01)
        return cls(mean_net=net, log_std=np.full(spec.layer_sizes[-1], log_std_init))


@dataclass
class ActorCritic:
    """Actor plus value network, flattened together for joint extrapolation."""

    policy: GaussianPolicy
    value_net: Mlp

    @classmethod
    def init(
        cls,
        actor_spec: MlpSpec,
        critic_spec: MlpSpec,
        rng: np.random.Generator,
        log_std_init: float = 0.0,
    ) -> "ActorCritic":
        policy = GaussianPolicy.init(actor_spec, rng, log_std_init)
        value_net = Mlp.init(critic_spec, rng)
        return cls(policy=policy, value_net=value_net)


def default_specs(obs_dim: int, act_dim: int, hidden: tuple[int, ...] = (64, 64)) -> tuple[MlpSpec, MlpSpec]:
    """Standard actor/critic shapes for an environment."""
    return (
        MlpSpec((obs_dim, *hidden, act_dim)),
        MlpSpec((obs_dim, *hidden, 1)),
    )


# ---------------------------------------------------------------------------
# Flat parameter vectors


@lru_cache(maxsize=None)
def _offsets_table(
    entries: tuple[tuple[str, tuple[int, ...]], ...]
) -> dict[str, tuple[int, int, tuple[int, ...]]]:
    table = {}
    pos = 0
    for key, shape in entries:
        n = math.prod(shape)
        table[key] = (pos, pos + n, shape)
        pos += n
    return table


@dataclass(frozen=True)
class ParamLayout:
    """Ordered (key, shape) blocks defining one flattening of a network."""

    entries: tuple[tuple[str, tuple[int, ...]], ...]

    @property
    def size(self) -> int:
        return sum(math.prod(shape) for _, shape in self.entries)

    def offsets(self) -> dict[str, tuple[int, int, tuple[int, ...]]]:
        return _offsets_table(self.entries)

    def has_critic(self) -> bool:
        return any(key.startswith("critic.") for key, _ in self.entries)


@dataclass
class ParameterVector:
    """Flat float64 view of all trainable parameters plus its layout."""

    data: np.ndarray
    layout: ParamLayout

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.shape != (self.layout.size,):
            raise ValueError(
                f"data has {self.data.shape[0]} entries but layout describes {self.layout.size}"
            )

    def copy(self) -> "ParameterVector":
        return ParameterVector(self.data.copy(), self.layout)

    def block(self, key: str) -> np.ndarray:
        start, end, shape = self.layout.offsets()[key]
        return self.data[start:end].reshape(shape)


def _mlp_entries(prefix: str, spec: MlpSpec) -> list[tuple[str, tuple[int, ...]]]:
    entries = []
    sizes = spec.layer_sizes
    for i in range(spec.n_layers):
        entries.append((f"{prefix}.W{i}", (sizes[i], sizes[i + 1])))
        entries.append((f"{prefix}.b{i}", (sizes[i + 1],)))
    return entries


@lru_cache(maxsize=None)
def policy_layout(actor_spec: MlpSpec, critic_spec: MlpSpec | None = None) -> ParamLayout:
    entries = _mlp_entries("actor", actor_spec)
    entries.append(("actor.log_std", (actor_spec.layer_sizes[-1],)))
    if critic_spec is not None:
        entries.extend(_mlp_entries("critic", critic_spec))
    return ParamLayout(tuple(entries))


def _pack(layout: ParamLayout, blocks: dict[str, np.ndarray]) -> ParameterVector:
    data = np.empty(layout.size)
    pos = 0
    for key, shape in layout.entries:
        n = math.prod(shape)
        data[pos : pos + n] = np.asarray(blocks[key]).reshape(-1)
        pos += n
    return ParameterVector(data, layout)


def flatten(model: GaussianPolicy | ActorCritic) -> ParameterVector:
    """Flatten an actor (or actor-critic pair) into one ParameterVector."""
    if isinstance(model, ActorCritic):
        policy, critic = model.policy, model.value_net
    else:
        policy, critic = model, None
    blocks: dict[str, np.ndarray] = {}
    for i, (w, b) in enumerate(zip(policy.mean_net.weights, policy.mean_net.biases)):
        blocks[f"actor.W{i}"] = w
        blocks[f"actor.b{i}"] = b
    blocks["actor.log_std"] = policy.log_std
    layout_critic = None
    if critic is not None:
        for i, (w, b) in enumerate(zip(critic.weights, critic.biases)):
            blocks[f"critic.W{i}"] = w
            blocks[f"critic.b{i}"] = b
        layout_critic = critic.spec
    return _pack(policy_layout(policy.mean_net.spec, layout_critic), blocks)


def _mlp_from_vector(theta: ParameterVector, prefix: str, spec: MlpSpec, copy: bool) -> Mlp:
    weights, biases = [], []
    for i in range(spec.n_layers):
        w = theta.block(f"{prefix}.W{i}")
        b = theta.block(f"{prefix}.b{i}")
        weights.append(w.copy() if copy else w)
        biases.append(b.copy() if copy else b)
    return Mlp(spec, weights, biases)


def _check_layout(theta: ParameterVector, actor_spec: MlpSpec, critic_spec: MlpSpec | None) -> None:
    expected = policy_layout(actor_spec, critic_spec)
    if theta.layout != expected:
        raise ValueError("parameter layout does not match the given network spec")


def unflatten(
    theta: ParameterVector,
    actor_spec: MlpSpec,
    critic_spec: MlpSpec | None = None,
    copy: bool = True,
) -> GaussianPolicy | ActorCritic:
    """Inverse of flatten. With copy=False the networks are views into theta."""
    _check_layout(theta, actor_spec, critic_spec)
    log_std = theta.block("actor.log_std")
    policy = GaussianPolicy(
        mean_net=_mlp_from_vector(theta, "actor", actor_spec, copy),
        log_std=log_std.copy() if copy else log_std,
    )
    if critic_spec is None:
        return policy
    return ActorCritic(policy=policy, value_net=_mlp_from_vector(theta, "critic", critic_spec, copy))


def actor_from_vector(theta: ParameterVector, copy: bool = False) -> GaussianPolicy:
    """Rebuild just the actor from a ParameterVector using its own layout."""
    sizes = []
    for key, shape in theta.layout.entries:
        if key.startswith("actor.W"):
            if not sizes:
                sizes.append(shape[0])
            sizes.append(shape[1])
    spec = MlpSpec(tuple(sizes))
    log_std = theta.block("actor.log_std")
    return GaussianPolicy(
        mean_net=_mlp_from_vector(theta, "actor", spec, copy),
        log_std=log_std.copy() if copy else log_std,
    )


# ---------------------------------------------------------------------------
# Acting and evaluation


def gaussian_log_prob(actions: np.ndarray, means: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    """Log density of a diagonal Gaussian, rows = samples."""
    std = np.exp(log_std)
    z = (actions - means) / std
    return -0.5 * np.sum(z**2, axis=-1) - np.sum(log_std) - 0.5 * actions.shape[-1] * LOG_2PI


def act(
    policy: GaussianPolicy, obs: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, float]:
    """Sample an action and its exact log probability (before any clipping)."""
    obs = np.asarray(obs, dtype=np.float64)
    mean = policy.mean_net.forward(obs[None, :])[0]
    std = np.exp(policy.log_std)
    action = mean + std * rng.standard_normal(policy.act_dim)
    logp = gaussian_log_prob(action[None, :], mean[None, :], policy.log_std)[0]
    return action, float(logp)


@dataclass
class ReturnVector:
    """Per-objective mean episodic return and how many episodes it averages."""

    values: np.ndarray
    episodes_averaged: int = 1

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("return vector contains non-finite entries")
        if self.episodes_averaged < 1:
            raise ValueError("episodes_averaged must be >= 1")


def evaluate_returns(
    theta: ParameterVector,
    env: VectorRewardEnv,
    episodes: int,
    seed: int,
    deterministic: bool = True,
) -> ReturnVector:
    """Mean undiscounted episodic return vector over a bank of rollouts.

    Episodes run in lockstep (the environments are fixed-horizon), so the
    whole evaluation is `horizon` batched network passes regardless of the
    episode count. deterministic=True plays the policy mean.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    policy = actor_from_vector(theta)
    rng = np.random.default_rng(seed)
    obs = env.reset_batch(episodes, rng)
    totals = np.zeros((episodes, env.spec.d))
    std = np.exp(policy.log_std)
    for _ in range(env.spec.horizon):
        means = policy.mean_net.forward(obs)
        if deterministic:
            actions = means
        else:
            actions = means + std * rng.standard_normal(means.shape)
        obs, rewards = env.step_batch(obs, actions)
        totals += rewards
    return ReturnVector(values=totals.mean(axis=0), episodes_averaged=episodes)
