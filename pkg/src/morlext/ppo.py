"""Minimal clipped-surrogate PPO over a scalarized vector reward.

Gradients are computed analytically for the fixed network family (tanh
MLP mean, state-independent log stds, tanh MLP critic); there is no
autodiff anywhere. `loss_and_grad` is a pure function of the flat
parameter vector, which makes the whole update finite-difference
checkable coordinate by coordinate.

One update minimizes

    L = -E[min(r A, clip(r, 1-eps, 1+eps) A)] + c_v E[(V(s) - R)^2] - c_e H

with r the likelihood ratio, A the (batch-normalized) GAE advantage and
H the Gaussian entropy. Advantages are normalized once per batch, the
value loss is unclipped, and gradients are clipped by global norm.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO

import numpy as np

from .envs import VectorRewardEnv, check_weight
from .policy import (
    ActorCritic,
    MlpSpec,
    ParameterVector,
    default_specs,
    flatten,
    gaussian_log_prob,
    unflatten,
)


class DivergenceError(RuntimeError):
    """Raised when an update produces a non-finite loss."""


@dataclass(frozen=True)
class PpoConfig:
    steps_per_batch: int = 512
    learning_rate: float = 3e-4
    gamma: float = 0.995
    gae_lambda: float = 0.95
    minibatches: int = 32
    epochs: int = 10
    clip: float = 0.2
    value_coeff: float = 0.5
    entropy_coeff: float = 0.0
    max_grad_norm: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ValueError("gae_lambda must be in [0, 1]")
        if self.clip <= 0:
            raise ValueError("clip must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class RolloutBuffer:
    """One batch of on-policy experience, rewards already scalarized."""

    observations: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    scalar_rewards: np.ndarray
    value_estimates: np.ndarray
    dones: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray

    def __len__(self) -> int:
        return self.observations.shape[0]


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    gamma: float,
    lam: float,
    bootstrap_value: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimates and value targets.

    delta_t = r_t + gamma * v_{t+1} * (1 - done_t) - v_t, accumulated
    backwards with factor gamma * lam and cut at episode boundaries;
    returns are advantages + values. `bootstrap_value` stands in for
    v_{T} after the last stored transition.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    if not (rewards.shape == values.shape == dones.shape):
        raise ValueError("rewards, values and dones must have equal length")
    n = rewards.shape[0]
    next_values = np.append(values[1:], bootstrap_value)
    not_done = 1.0 - dones.astype(np.float64)
    deltas = rewards + gamma * next_values * not_done - values
    advantages = np.empty(n)
    acc = 0.0
    for t in range(n - 1, -1, -1):
        acc = deltas[t] + gamma * lam * not_done[t] * acc
        advantages[t] = acc
    return advantages, advantages + values


# ---------------------------------------------------------------------------
# Loss and analytic gradient


def loss_and_grad(
    theta: ParameterVector,
    actor_spec: MlpSpec,
    critic_spec: MlpSpec,
    obs: np.ndarray,
    actions: np.ndarray,
    log_probs_old: np.ndarray,
    advantages: np.ndarray,
    returns: np.ndarray,
    cfg: PpoConfig,
) -> tuple[float, np.ndarray]:
    """PPO loss on a minibatch and its exact gradient wrt the flat vector."""
    model = unflatten(theta, actor_spec, critic_spec, copy=False)
    assert isinstance(model, ActorCritic)
    actor = model.policy.mean_net
    critic = model.value_net
    log_std = model.policy.log_std
    n = obs.shape[0]

    means, actor_acts = actor.forward_cached(obs)
    std = np.exp(log_std)
    inv_var = 1.0 / std**2
    log_probs = gaussian_log_prob(actions, means, log_std)
    ratios = np.exp(log_probs - log_probs_old)
    clipped = np.clip(ratios, 1.0 - cfg.clip, 1.0 + cfg.clip)
    unclipped_term = ratios * advantages
    clipped_term = clipped * advantages
    policy_loss = -np.mean(np.minimum(unclipped_term, clipped_term))

    values_out, critic_acts = critic.forward_cached(obs)
    values = values_out[:, 0]
    value_err = values - returns
    value_loss = np.mean(value_err**2)

    entropy = float(np.sum(log_std) + 0.5 * log_std.shape[0] * (1.0 + np.log(2.0 * np.pi)))
    loss = policy_loss + cfg.value_coeff * value_loss - cfg.entropy_coeff * entropy
    if not np.isfinite(loss):
        raise DivergenceError(f"non-finite PPO loss ({loss})")

    # min(.,.) subgradient: take the unclipped branch on ties, matching the
    # convention that the surrogate's gradient vanishes only when clipping
    # is strictly active.
    use_unclipped = unclipped_term <= clipped_term
    grad_ratio = np.where(use_unclipped, advantages, 0.0)
    grad_logp = -(grad_ratio * ratios) / n

    diff = actions - means
    grad_means = grad_logp[:, None] * diff * inv_var
    grad_log_std = np.sum(grad_logp[:, None] * (diff**2 * inv_var - 1.0), axis=0)
    grad_log_std -= cfg.entropy_coeff  # dH/dlog_std = 1 per dimension
    actor_gw, actor_gb = actor.backward(grad_means, actor_acts)

    grad_values = (2.0 * cfg.value_coeff / n) * value_err
    critic_gw, critic_gb = critic.backward(grad_values[:, None], critic_acts)

    grad = ParameterVector(np.zeros(theta.layout.size), theta.layout)
    for i in range(actor.spec.n_layers):
        grad.block(f"actor.W{i}")[...] = actor_gw[i]
        grad.block(f"actor.b{i}")[...] = actor_gb[i]
    grad.block("actor.log_std")[...] = grad_log_std
    for i in range(critic.spec.n_layers):
        grad.block(f"critic.W{i}")[...] = critic_gw[i]
        grad.block(f"critic.b{i}")[...] = critic_gb[i]
    return float(loss), grad.data


class Adam:
    """Adam over a flat parameter vector."""

    def __init__(self, size: int, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad**2
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        params -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def clip_grad_norm(grad: np.ndarray, max_norm: float) -> np.ndarray:
    norm = float(np.linalg.norm(grad))
    if norm > max_norm > 0:
        return grad * (max_norm / norm)
    return grad


def ppo_update(
    theta: ParameterVector,
    buffer: RolloutBuffer,
    cfg: PpoConfig,
    actor_spec: MlpSpec,
    critic_spec: MlpSpec,
    rng: np.random.Generator,
    optimizer: Adam | None = None,
) -> ParameterVector:
    """Run `epochs` passes of minibatch clipped-surrogate descent.

    The input vector is not mutated. Pass `optimizer` to carry Adam
    moments across batches within a training run.
    """
    theta = theta.copy()
    if optimizer is None:
        optimizer = Adam(theta.layout.size, cfg.learning_rate)
    n = len(buffer)
    mb_size = max(1, n // cfg.minibatches)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, mb_size):
            idx = order[start : start + mb_size]
            _, grad = loss_and_grad(
                theta,
                actor_spec,
                critic_spec,
                buffer.observations[idx],
                buffer.actions[idx],
                buffer.log_probs[idx],
                buffer.advantages[idx],
                buffer.returns[idx],
                cfg,
            )
            optimizer.step(theta.data, clip_grad_norm(grad, cfg.max_grad_norm))
    return theta


# ---------------------------------------------------------------------------
# Rollout collection and the training loop


def collect_rollout(
    theta: ParameterVector,
    env: VectorRewardEnv,
    weight: np.ndarray,
    cfg: PpoConfig,
    rng: np.random.Generator,
    actor_spec: MlpSpec,
    critic_spec: MlpSpec,
    carry: tuple[np.ndarray, int] | None,
) -> tuple[RolloutBuffer, tuple[np.ndarray, int]]:
    """Gather one on-policy batch, scalarizing rewards at storage time.

    Episodes auto-reset at the horizon; `carry` is the (observation,
    step index) of an episode left unfinished by the previous batch.
    """
    model = unflatten(theta, actor_spec, critic_spec, copy=False)
    assert isinstance(model, ActorCritic)
    actor = model.policy.mean_net
    std = np.exp(model.policy.log_std)
    horizon = env.spec.horizon

    n = cfg.steps_per_batch
    obs_buf = np.empty((n, env.spec.obs_dim))
    act_buf = np.empty((n, env.spec.act_dim))
    logp_buf = np.empty(n)
    rew_buf = np.empty(n)
    done_buf = np.empty(n, dtype=bool)

    if carry is None:
        obs = env.reset_batch(1, rng)[0]
        step_index = 0
    else:
        obs, step_index = carry

    for t in range(n):
        mean = actor.forward(obs[None, :])[0]
        noise = rng.standard_normal(env.spec.act_dim)
        action = mean + std * noise
        logp = gaussian_log_prob(action[None, :], mean[None, :], model.policy.log_std)[0]
        next_obs, rewards = env.step_batch(obs[None, :], action[None, :])
        step_index += 1
        done = step_index >= horizon
        obs_buf[t] = obs
        act_buf[t] = action
        logp_buf[t] = logp
        rew_buf[t] = rewards[0] @ weight
        done_buf[t] = done
        if done:
            obs = env.reset_batch(1, rng)[0]
            step_index = 0
        else:
            obs = next_obs[0]

    critic = model.value_net
    values = critic.forward(obs_buf)[:, 0]
    bootstrap = 0.0 if done_buf[-1] else float(critic.forward(obs[None, :])[0, 0])
    advantages, returns = compute_gae(
        rew_buf, values, done_buf, cfg.gamma, cfg.gae_lambda, bootstrap
    )
    advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)
    buffer = RolloutBuffer(
        observations=obs_buf,
        actions=act_buf,
        log_probs=logp_buf,
        scalar_rewards=rew_buf,
        value_estimates=values,
        dones=done_buf,
        advantages=advantages,
        returns=returns,
    )
    return buffer, (obs, step_index)


@dataclass
class TrainState:
    """Optimizer moments plus the unfinished-episode carry, for resuming."""

    optimizer: Adam
    carry: tuple[np.ndarray, int] | None = None


def train(
    theta: ParameterVector,
    env: VectorRewardEnv,
    weight: np.ndarray,
    total_steps: int,
    cfg: PpoConfig,
    seed: int,
    log_stream: IO[str] | None = None,
    state: TrainState | None = None,
) -> ParameterVector:
    """Train under one preference weight until the step budget is consumed.

    Whole batches only: the number of environment steps taken is
    `(total_steps // steps_per_batch) * steps_per_batch`. total_steps=0
    returns the input unchanged. Fully reproducible from (theta, seed).
    """
    weight = check_weight(weight, env.spec.d)
    actor_spec, critic_spec = specs_from_layout(theta)
    n_batches = int(total_steps) // cfg.steps_per_batch
    if n_batches == 0:
        return theta.copy()
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    if state is None:
        state = TrainState(optimizer=Adam(theta.layout.size, cfg.learning_rate))
    theta = theta.copy()
    for batch_index in range(n_batches):
        buffer, state.carry = collect_rollout(
            theta, env, weight, cfg, rng, actor_spec, critic_spec, state.carry
        )
        theta = ppo_update(theta, buffer, cfg, actor_spec, critic_spec, rng, state.optimizer)
        if log_stream is not None:
            mean_ep = float(buffer.scalar_rewards.sum() / max(1, buffer.dones.sum()))
            log_stream.write(
                f"steps={(batch_index + 1) * cfg.steps_per_batch} "
                f"scalar_return_per_episode={mean_ep:.4f} "
                f"value_residual={float(np.mean((buffer.value_estimates - buffer.returns) ** 2)):.4f}\n"
            )
    return theta


def specs_from_layout(theta: ParameterVector) -> tuple[MlpSpec, MlpSpec]:
    """Recover (actor_spec, critic_spec) from a combined parameter layout."""
    actor_sizes: list[int] = []
    critic_sizes: list[int] = []
    for key, shape in theta.layout.entries:
        for prefix, sizes in (("actor.W", actor_sizes), ("critic.W", critic_sizes)):
            if key.startswith(prefix):
                if not sizes:
                    sizes.append(shape[0])
                sizes.append(shape[1])
    if not critic_sizes:
        raise ValueError("parameter vector has no critic block; train needs an actor-critic layout")
    return MlpSpec(tuple(actor_sizes)), MlpSpec(tuple(critic_sizes))


def init_actor_critic(env: VectorRewardEnv, seed: int, hidden: tuple[int, ...] = (64, 64)) -> ParameterVector:
    """Fresh flat actor-critic parameters for an environment."""
    actor_spec, critic_spec = default_specs(env.spec.obs_dim, env.spec.act_dim, hidden)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return flatten(ActorCritic.init(actor_spec, critic_spec, rng))
