"""Per-TTI decision policies the evaluation harness can run."""

from __future__ import annotations

import numpy as np

from . import actions, scheduling
from .env import DirectDecision


class StaticTriplePolicy:
    """Always applies one fixed (prioritizer, allocator, precoder) triple."""

    def __init__(self, triple: actions.ActionTriple):
        self.triple = triple
        self.name = triple.name

    def select(self, env, state):
        return self.triple


class AgentPolicy:
    """Greedy (no exploration) policy of a trained DDPG agent."""

    def __init__(self, agent, name: str = "learned"):
        self.agent = agent
        self.name = name

    def select(self, env, state):
        return actions.embed(self.agent.act(state, explore=False))


BASELINE_LABELS = {
    "orfa": "ORFA (simplified)",
    "ublaa": "UBLAA (simplified)",
    "lwdf-pf": "LWDF-PF (simplified)",
}


class BaselinePolicy:
    """Simplified literature baseline driving the environment directly."""

    def __init__(self, key: str):
        key = key.lower()
        if key not in scheduling.BASELINES:
            raise ValueError(f"unknown baseline '{key}'; "
                             f"choose from {sorted(scheduling.BASELINES)}")
        self.key = key
        self._fn = scheduling.BASELINES[key]
        self.name = BASELINE_LABELS[key]

    def select(self, env, state):
        o_t, alloc, precoder, label = self._fn(env.scheduling_context())
        return DirectDecision(order=o_t, alloc=alloc, precoder=precoder, label=label)


class RandomTriplePolicy:
    """Uniform random triple each TTI; used for fuzzing and constraint suites."""

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)
        self.name = "random"

    def select(self, env, state):
        return actions.ALL_TRIPLES[self.rng.integers(len(actions.ALL_TRIPLES))]
