"""DDPG agent with action embedding: replay, target networks, training loop.

The actor outputs a continuous point in [-1, 1]^3; the environment sees the
embedded discrete triple. The critic consumes the continuous action (three
reals appended to the state). The critic target runs the target actor's
output through the embedding (snapped to the chosen bin's center) before
scoring, while the policy gradient is taken at the raw actor output, so
the embedding never enters differentiation.
"""

from __future__ import annotations

import copy
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import actions
from .config import DdpgConfig
from .nets import Adam, Mlp, soft_update

CHECKPOINT_VERSION = 1


class DivergenceError(RuntimeError):
    """Training loss blew up or went non-finite; a diagnostic checkpoint is saved."""

    def __init__(self, message: str, checkpoint_path=None):
        super().__init__(message)
        self.checkpoint_path = checkpoint_path


class ReplayBuffer:
    """Fixed-capacity ring buffer of (s, a_cont, r, s') transitions."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int = actions.ACTION_DIM):
        self.capacity = int(capacity)
        self.s = np.zeros((capacity, state_dim))
        self.a = np.zeros((capacity, action_dim))
        self.r = np.zeros(capacity)
        self.s2 = np.zeros((capacity, state_dim))
        self.cursor = 0
        self.count = 0

    def __len__(self) -> int:
        return min(self.count, self.capacity)

    def add(self, s, a, r, s2):
        i = self.cursor
        self.s[i] = s
        self.a[i] = a
        self.r[i] = r
        self.s2[i] = s2
        self.cursor = (self.cursor + 1) % self.capacity
        self.count += 1

    def sample(self, rng: np.random.Generator, batch_size: int):
        n = len(self)
        if n == 0:
            return None
        idx = rng.integers(0, n, size=batch_size)
        return self.s[idx], self.a[idx], self.r[idx], self.s2[idx]


@dataclass
class EpisodeStats:
    episode_return: float
    mean_critic_loss: float
    mean_actor_grad_norm: float
    steps: int
    updates: int


@dataclass
class OuNoise:
    """Ornstein-Uhlenbeck exploration process (optional alternative)."""

    scale: float
    theta: float = 0.15
    dim: int = actions.ACTION_DIM
    state: np.ndarray = field(default_factory=lambda: np.zeros(actions.ACTION_DIM))

    def reset(self):
        self.state = np.zeros(self.dim)

    def sample(self, rng) -> np.ndarray:
        self.state = (self.state - self.theta * self.state
                      + self.scale * rng.standard_normal(self.dim))
        return self.state


class DdpgAgent:
    """Actor-critic pair with targets, replay, and embedded-action updates."""

    def __init__(self, state_dim: int, cfg: DdpgConfig, seed: int = 0):
        self.cfg = cfg
        self.state_dim = int(state_dim)
        self.rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xDD9]))
        hidden = [int(h) for h in cfg.hidden]
        self.actor = Mlp([state_dim, *hidden, actions.ACTION_DIM], output="tanh",
                         rng=self.rng, dropout=cfg.dropout)
        self.critic = Mlp([state_dim + actions.ACTION_DIM, *hidden, 1],
                          output="linear", rng=self.rng, dropout=cfg.dropout)
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()
        self.actor_opt = Adam(self.actor.parameters(), lr=cfg.actor_lr)
        self.critic_opt = Adam(self.critic.parameters(), lr=cfg.critic_lr)
        self.buffer = ReplayBuffer(cfg.buffer_size, state_dim)
        self.ou = OuNoise(cfg.noise_scale) if cfg.noise_process == "ou" else None
        self.warmup = cfg.warmup if cfg.warmup is not None else cfg.batch_size
        self.updates_done = 0

    # ------------------------------------------------------------------
    def act(self, state: np.ndarray, explore: bool = False) -> np.ndarray:
        a, _ = self.actor.forward(state, train=False)
        a = a[0]
        if explore:
            if self.ou is not None:
                a = a + self.ou.sample(self.rng)
            else:
                a = a + self.cfg.noise_scale * self.rng.standard_normal(a.shape)
        return np.clip(a, -1.0, 1.0)

    def act_triple(self, state: np.ndarray, explore: bool = False):
        a = self.act(state, explore=explore)
        return a, actions.embed(a)

    def _target_action(self, s2: np.ndarray) -> np.ndarray:
        a2, _ = self.target_actor.forward(s2, train=False)
        return actions.snap(np.clip(a2, -1.0, 1.0))

    # ------------------------------------------------------------------
    def critic_update(self, batch) -> float:
        if batch is None:
            warnings.warn("empty batch: critic update skipped")
            return 0.0
        s, a, r, s2 = batch
        b = len(r)
        a2 = self._target_action(s2)
        q2, _ = self.target_critic.forward(np.concatenate([s2, a2], axis=1),
                                           train=False)
        y = r + self.cfg.gamma * q2[:, 0]
        q, cache = self.critic.forward(np.concatenate([s, a], axis=1),
                                       train=True, rng=self.rng)
        resid = q[:, 0] - y
        loss = float(np.mean(resid**2))
        self._check_divergence(loss)
        dy = (2.0 / b) * resid[:, None]
        grads, _ = self.critic.backward(cache, dy)
        self.critic_opt.step(self.critic.parameters(), grads)
        return loss

    def actor_update(self, batch) -> float:
        if batch is None:
            warnings.warn("empty batch: actor update skipped")
            return 0.0
        s = batch[0]
        b = s.shape[0]
        a, cache_a = self.actor.forward(s, train=True, rng=self.rng)
        x = np.concatenate([s, a], axis=1)
        _, cache_c = self.critic.forward(x, train=False)
        dq = np.full((b, 1), 1.0 / b)
        _, dx = self.critic.backward(cache_c, dq)
        da = dx[:, self.state_dim:]
        grads, _ = self.actor.backward(cache_a, da)
        gnorm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
        if not np.isfinite(gnorm):
            raise DivergenceError("actor gradient is not finite")
        # gradient ascent on Q: Adam minimizes, so negate
        self.actor_opt.step(self.actor.parameters(), [-g for g in grads])
        return gnorm

    def soft_update(self):
        soft_update(self.target_critic, self.critic, self.cfg.tau)
        soft_update(self.target_actor, self.actor, self.cfg.tau)

    def update(self) -> tuple[float, float] | None:
        """One critic + actor + target step from a sampled mini-batch."""
        if len(self.buffer) < max(self.warmup, 1):
            return None
        batch = self.buffer.sample(self.rng, self.cfg.batch_size)
        loss = self.critic_update(batch)
        gnorm = self.actor_update(batch)
        self.soft_update()
        self.updates_done += 1
        return loss, gnorm

    def _check_divergence(self, loss: float):
        if not np.isfinite(loss) or loss > self.cfg.divergence_loss_cap:
            raise DivergenceError(f"critic loss diverged: {loss!r}")

    # ------------------------------------------------------------------
    def store(self, s, a_cont, r, s2):
        a = actions.snap(a_cont) if self.cfg.store_snapped_action else a_cont
        self.buffer.add(s, a, r, s2)

    def save(self, path, extra_meta: dict | None = None):
        path = Path(path)
        meta = {
            "version": CHECKPOINT_VERSION,
            "state_dim": self.state_dim,
            "hidden": [int(h) for h in self.cfg.hidden],
            "dropout": self.cfg.dropout,
            "buffer_stats": {
                "capacity": self.buffer.capacity,
                "stored": len(self.buffer),
                "total_seen": self.buffer.count,
            },
        }
        if extra_meta:
            meta.update(extra_meta)
        arrays = {"meta": np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)}
        for tag, net in (("actor", self.actor), ("critic", self.critic),
                         ("t_actor", self.target_actor), ("t_critic", self.target_critic)):
            for i, p in enumerate(net.parameters()):
                arrays[f"{tag}_{i}"] = p
        np.savez(path, **arrays)
        return path

    @classmethod
    def load(cls, path, cfg: DdpgConfig, seed: int = 0) -> "DdpgAgent":
        data = np.load(path)
        meta = json.loads(bytes(data["meta"]).decode())
        if meta["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['version']}")
        cfg = copy.deepcopy(cfg)
        cfg.hidden = meta["hidden"]
        agent = cls(meta["state_dim"], cfg, seed=seed)
        for tag, net in (("actor", agent.actor), ("critic", agent.critic),
                         ("t_actor", agent.target_actor),
                         ("t_critic", agent.target_critic)):
            for i, p in enumerate(net.parameters()):
                p[...] = data[f"{tag}_{i}"]
        return agent


def train_on_env(agent: DdpgAgent, env, explore: bool = True,
                 learn: bool = True) -> EpisodeStats:
    """Run one episode, storing transitions and updating every TTI."""
    state = env.reset()
    if agent.ou is not None:
        agent.ou.reset()
    total = 0.0
    losses = []
    gnorms = []
    steps = 0
    while not env.done:
        a_cont, triple = agent.act_triple(state, explore=explore)
        out = env.step(triple)
        if learn:
            agent.store(state, a_cont, out.reward, out.state)
            result = agent.update()
            if result is not None:
                losses.append(result[0])
                gnorms.append(result[1])
        total += out.reward
        state = out.state
        steps += 1
    return EpisodeStats(
        episode_return=total,
        mean_critic_loss=float(np.mean(losses)) if losses else 0.0,
        mean_actor_grad_norm=float(np.mean(gnorms)) if gnorms else 0.0,
        steps=steps,
        updates=len(losses),
    )
