"""Lightweight value-based learner sized for edge deployment.

A fully connected Q-network (ReLU hidden layers, linear output) trained by
plain stochastic gradient descent on the mean squared TD error, with a
bounded FIFO experience replay and a periodically synced target network.
Everything is numpy; there is no framework dependency.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class DimensionError(ValueError):
    """Input shape incompatible with the network."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


@dataclass
class Hyperparams:
    learning_rate: float = 0.01
    gamma: float = 0.95
    target_update_freq: int = 100
    batch_size: int = 16
    buffer_capacity: int = 5000
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int = 45000
    # transitions required in the buffer before updates begin; dilutes the
    # rare terminal-penalty samples that otherwise dominate tiny early batches
    warmup: int = 1000
    # per-sample TD-error bound applied to the gradient only (the reported
    # loss stays unclipped); None disables clipping so divergence surfaces
    td_error_clip: float | None = None

    def __post_init__(self):
        if not (0.0 < self.gamma < 1.0):
            raise ValueError(f"gamma must be in (0,1), got {self.gamma}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise ValueError("batch_size must be >= 1 and <= buffer_capacity")
        if self.target_update_freq < 1:
            raise ValueError("target_update_freq must be >= 1")
        if self.epsilon_decay_steps < 1:
            raise ValueError("epsilon_decay_steps must be >= 1")
        if self.warmup < self.batch_size:
            raise ValueError("warmup must be >= batch_size")
        if self.td_error_clip is not None and self.td_error_clip <= 0:
            raise ValueError("td_error_clip must be positive when set")

    def epsilon_at(self, step: int) -> float:
        """Linear schedule from epsilon_start to epsilon_end over decay_steps."""
        frac = min(max(step, 0) / self.epsilon_decay_steps, 1.0)
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac


@dataclass(frozen=True)
class Transition:
    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    done: bool


class MlpPolicy:
    """Fully connected Q-network: ReLU hidden layers, identity output."""

    def __init__(self, layer_sizes: Sequence[int], weights=None, biases=None):
        sizes = tuple(int(s) for s in layer_sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError(f"layer_sizes needs >= 2 positive entries, got {sizes}")
        self.layer_sizes = sizes
        if weights is None:
            weights = [np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])]
            biases = [np.zeros(b) for b in sizes[1:]]
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        for w, b, (a, o) in zip(self.weights, self.biases, zip(sizes[:-1], sizes[1:])):
            if w.shape != (a, o) or b.shape != (o,):
                raise DimensionError(
                    f"parameter shapes {w.shape}/{b.shape} do not match layers {a}->{o}"
                )

    @classmethod
    def initialize(cls, layer_sizes: Sequence[int], rng: np.random.Generator) -> "MlpPolicy":
        """Seeded uniform init in +-sqrt(6/(fan_in+fan_out)), zero biases."""
        sizes = tuple(int(s) for s in layer_sizes)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(sizes, weights, biases)

    def copy(self) -> "MlpPolicy":
        return MlpPolicy(
            self.layer_sizes,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def param_count(self) -> int:
        return param_count(self.layer_sizes)

    def forward(self, obs: np.ndarray) -> np.ndarray:
        """Action values for a single observation."""
        x = np.asarray(obs, dtype=np.float64)
        if x.shape != (self.layer_sizes[0],):
            raise DimensionError(
                f"observation shape {x.shape} does not match input size {self.layer_sizes[0]}"
            )
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            x = x @ w + b
            if i < len(self.weights) - 1:
                x = np.maximum(x, 0.0)
        return x

    def forward_batch(self, obs: np.ndarray) -> np.ndarray:
        x = np.asarray(obs, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.layer_sizes[0]:
            raise DimensionError(
                f"batch shape {x.shape} does not match input size {self.layer_sizes[0]}"
            )
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            x = x @ w + b
            if i < len(self.weights) - 1:
                x = np.maximum(x, 0.0)
        return x


def param_count(layer_sizes: Sequence[int]) -> int:
    """Total parameters: sum over layers of fan_in*fan_out + fan_out."""
    sizes = list(layer_sizes)
    return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))


def policy_to_dict(policy: MlpPolicy) -> dict:
    """Flat serialization: layer sizes header plus row-major parameter list.

    Parameters are ordered W0 (row-major), b0, W1, b1, ... so the layout is
    reconstructible from the header alone.
    """
    flat: list[float] = []
    for w, b in zip(policy.weights, policy.biases):
        flat.extend(w.reshape(-1).tolist())
        flat.extend(b.tolist())
    return {"layer_sizes": list(policy.layer_sizes), "params": flat}


def policy_from_dict(data: dict) -> MlpPolicy:
    sizes = [int(s) for s in data["layer_sizes"]]
    params = np.asarray(data["params"], dtype=np.float64)
    if params.size != param_count(sizes):
        raise ValueError(
            f"expected {param_count(sizes)} params for layers {sizes}, got {params.size}"
        )
    weights, biases, pos = [], [], 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(params[pos : pos + fan_in * fan_out].reshape(fan_in, fan_out))
        pos += fan_in * fan_out
        biases.append(params[pos : pos + fan_out].copy())
        pos += fan_out
    return MlpPolicy(sizes, weights, biases)


def save_policy(policy: MlpPolicy, path) -> None:
    with open(path, "w") as f:
        json.dump(policy_to_dict(policy), f)


def load_policy(path) -> MlpPolicy:
    with open(path) as f:
        return policy_from_dict(json.load(f))


def select_action(values: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy over action values; greedy ties go to the lowest index."""
    if not (0.0 <= epsilon <= 1.0):
        raise ValueError(f"epsilon must be in [0,1], got {epsilon}")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(0, len(values)))
    return int(np.argmax(values))


def bellman_target(
    reward: float, done: bool, gamma: float, next_values: np.ndarray
) -> float:
    """One-step target: the reward, bootstrapped by gamma * max next value unless terminal."""
    if done:
        return float(reward)
    return float(reward + gamma * np.max(next_values))


class ReplayBuffer:
    """Bounded FIFO transition store with uniform seeded sampling."""

    def __init__(self, capacity: int = 5000):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._ring: list[Transition] = []
        self._next = 0
        self.inserted = 0

    def __len__(self) -> int:
        return len(self._ring)

    def add(self, transition: Transition) -> None:
        if len(self._ring) < self.capacity:
            self._ring.append(transition)
        else:
            self._ring[self._next] = transition
        self._next = (self._next + 1) % self.capacity
        self.inserted += 1

    def items(self) -> list[Transition]:
        """Stored transitions in insertion order, oldest first."""
        return self._ring[self._next :] + self._ring[: self._next]

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        if batch_size > len(self._ring):
            raise ValueError(
                f"cannot sample {batch_size} from buffer of {len(self._ring)}"
            )
        idx = rng.choice(len(self._ring), size=batch_size, replace=False)
        return [self._ring[i] for i in idx]


def train_step(
    policy: MlpPolicy,
    target: MlpPolicy,
    batch: Sequence[Transition],
    hp: Hyperparams,
) -> float:
    """One SGD update on the mean squared TD error over the batch.

    Only the taken action's value contributes per sample. Returns the
    pre-update loss; raises DivergenceError if it is not finite. With
    td_error_clip set, each sample's error is bounded inside the gradient
    (the returned loss is still computed from the raw errors), which keeps
    rare large-penalty targets from destabilizing the update.
    """
    if len(batch) != hp.batch_size:
        raise ValueError(f"batch size {len(batch)} != configured {hp.batch_size}")

    obs = np.stack([t.obs for t in batch])
    next_obs = np.stack([t.next_obs for t in batch])
    actions = np.array([t.action for t in batch], dtype=np.intp)
    rewards = np.array([t.reward for t in batch], dtype=np.float64)
    dones = np.array([t.done for t in batch], dtype=np.float64)

    next_q = target.forward_batch(next_obs)
    targets = rewards + hp.gamma * next_q.max(axis=1) * (1.0 - dones)

    # forward with cached pre/post activations for backprop
    activations = [obs]
    x = obs
    for i, (w, b) in enumerate(zip(policy.weights, policy.biases)):
        x = x @ w + b
        if i < len(policy.weights) - 1:
            x = np.maximum(x, 0.0)
        activations.append(x)

    q = activations[-1]
    batch_idx = np.arange(len(batch))
    err = q[batch_idx, actions] - targets
    loss = float(np.mean(err**2))
    if not np.isfinite(loss):
        raise DivergenceError(f"non-finite training loss: {loss}")

    # d(loss)/d(q) is nonzero only at the taken actions
    grad_err = err
    if hp.td_error_clip is not None:
        grad_err = np.clip(err, -hp.td_error_clip, hp.td_error_clip)
    grad_out = np.zeros_like(q)
    grad_out[batch_idx, actions] = 2.0 * grad_err / len(batch)

    grads_w = [None] * len(policy.weights)
    grads_b = [None] * len(policy.biases)
    delta = grad_out
    for i in range(len(policy.weights) - 1, -1, -1):
        grads_w[i] = activations[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ policy.weights[i].T
            delta = delta * (activations[i] > 0.0)

    for w, b, gw, gb in zip(policy.weights, policy.biases, grads_w, grads_b):
        w -= hp.learning_rate * gw
        b -= hp.learning_rate * gb
    return loss


def sync_target(policy: MlpPolicy, target: MlpPolicy) -> None:
    """Copy policy parameters into the target network exactly."""
    if policy.layer_sizes != target.layer_sizes:
        raise DimensionError("policy and target layer sizes differ")
    for tw, w in zip(target.weights, policy.weights):
        tw[...] = w
    for tb, b in zip(target.biases, policy.biases):
        tb[...] = b


class DqnAgent:
    """Owns the policy, target, replay buffer, and training schedule."""

    def __init__(
        self,
        layer_sizes: Sequence[int],
        hp: Hyperparams,
        init_rng: np.random.Generator,
        explore_rng: np.random.Generator,
        replay_rng: np.random.Generator,
    ):
        self.hp = hp
        self.policy = MlpPolicy.initialize(layer_sizes, init_rng)
        self.target = self.policy.copy()
        self.buffer = ReplayBuffer(hp.buffer_capacity)
        self.explore_rng = explore_rng
        self.replay_rng = replay_rng
        self.train_steps = 0
        self.action_steps = 0

    def act(self, obs: np.ndarray, greedy: bool = False) -> int:
        values = self.policy.forward(obs)
        epsilon = 0.0 if greedy else self.hp.epsilon_at(self.action_steps)
        if not greedy:
            self.action_steps += 1
        return select_action(values, epsilon, self.explore_rng)

    def record(self, transition: Transition) -> None:
        self.buffer.add(transition)

    def train(self) -> float | None:
        """Run one train step if the buffer is warm; sync the target every tau steps."""
        if len(self.buffer) < self.hp.warmup:
            return None
        batch = self.buffer.sample(self.hp.batch_size, self.replay_rng)
        loss = train_step(self.policy, self.target, batch, self.hp)
        self.train_steps += 1
        if self.train_steps % self.hp.target_update_freq == 0:
            sync_target(self.policy, self.target)
        return loss
