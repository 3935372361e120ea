"""Orchestration: training protocol, multi-seed evaluation, compare, sweep.

Every produced data file embeds the resolved config hash and the seed
list; re-running with identical inputs reproduces the metric files byte
for byte (wall-clock timings live in a separate, non-reproducible report).
"""

from __future__ import annotations

import copy
import csv
import json
import multiprocessing
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import actions, traffic
from .config import LabConfig, config_from_dict, dump_config
from .ddpg import DdpgAgent, DivergenceError, train_on_env
from .env import MimoEnv
from .policies import (AgentPolicy, BASELINE_LABELS, BaselinePolicy,
                       StaticTriplePolicy)

#: most-selected static combinations, used as the benchmark set
BENCHMARK_TRIPLES = [
    "CQI-MinG75-AS",
    "Delay-MinG75-ACE",
    "Remain-MinG50-ACE",
    "CQI-PF50-ACE",
    "FIFO-FSO-AS",
]


def make_env(cfg: LabConfig, seed: int, ratios: dict | None = None,
             horizon: int | None = None, trace_path=None) -> MimoEnv:
    return MimoEnv(cfg, seed=seed, ratios=ratios, horizon=horizon,
                   trace_path=trace_path)


def resolve_policy(spec: str, cfg: LabConfig):
    """Map a policy spec to a policy object.

    Accepted forms: a static triple name ("CQI-MinG75-AS"), a baseline key
    ("orfa" | "ublaa" | "lwdf-pf"), or a path to a trained checkpoint.
    """
    key = spec.strip()
    if key.lower() in BASELINE_LABELS:
        return BaselinePolicy(key.lower())
    try:
        return StaticTriplePolicy(actions.parse_triple(key))
    except ValueError:
        pass
    path = Path(key)
    if path.exists():
        agent = DdpgAgent.load(path, copy.deepcopy(cfg.ddpg))
        return AgentPolicy(agent, name=f"learned[{path.name}]")
    raise ValueError(
        f"cannot resolve policy '{spec}': not a baseline "
        f"({sorted(BASELINE_LABELS)}), not one of the {len(actions.ALL_TRIPLES)} "
        "static triples (e.g. 'CQI-MinG75-AS'), and no checkpoint file at that path"
    )


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class RunReport:
    policy: str
    seeds: list
    per_seed: list  # dicts: seed, utility, throughput_bps, total_reward, steps
    utility_mean: float
    throughput_mean_bps: float
    action_freq: dict
    short_term_samples: list
    config_hash: str
    wall_clock_s: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def metrics_dict(self) -> dict:
        """Deterministic part, serialized into the reproducible metrics file."""
        return {
            "policy": self.policy,
            "seeds": list(self.seeds),
            "per_seed": self.per_seed,
            "utility_mean": self.utility_mean,
            "throughput_mean_bps": self.throughput_mean_bps,
            "action_freq": self.action_freq,
            "short_term_samples": self.short_term_samples,
            "config_hash": self.config_hash,
        }


def _eval_single(cfg_dict: dict, policy_spec: str, seed: int,
                 ratios: dict | None, horizon: int | None) -> dict:
    cfg = config_from_dict(cfg_dict)
    policy = resolve_policy(policy_spec, cfg)
    env = make_env(cfg, seed, ratios=ratios, horizon=horizon)
    metrics = env.run_episode(policy)
    return {
        "seed": seed,
        "utility": metrics.normalized_utility,
        "throughput_bps": metrics.throughput_bps,
        "total_reward": metrics.total_reward,
        "steps": metrics.steps,
        "action_freq": metrics.action_freq,
        "short_term": metrics.short_term,
        "expired_total": metrics.diagnostics.get("expired_total", 0),
    }


def evaluate_policy(cfg: LabConfig, policy_spec: str, seeds=None,
                    ratios: dict | None = None, horizon: int | None = None,
                    workers: int | None = None) -> RunReport:
    """Run one policy over the seed list and aggregate in seed order."""
    seeds = list(cfg.eval.seeds) if seeds is None else list(seeds)
    workers = cfg.run.workers if workers is None else workers
    started = time.time()
    jobs = [(cfg.to_dict(), policy_spec, s, ratios, horizon) for s in seeds]
    if workers > 1 and len(jobs) > 1:
        # fork keeps workers from re-importing the entry script
        with multiprocessing.get_context("fork").Pool(workers) as pool:
            results = pool.starmap(_eval_single, jobs)
    else:
        results = [_eval_single(*j) for j in jobs]
    results.sort(key=lambda r: seeds.index(r["seed"]))

    freq_total: dict[str, float] = {}
    for r in results:
        for k, v in r["action_freq"].items():
            freq_total[k] = freq_total.get(k, 0.0) + v
    n = len(results)
    action_freq = {k: v / n for k, v in sorted(freq_total.items())}
    short_term = [
        {"seed": r["seed"], "window": w, "utility": u, "sessions": c}
        for r in results for (w, u, c) in r["short_term"]
    ]
    per_seed = [
        {k: r[k] for k in ("seed", "utility", "throughput_bps",
                           "total_reward", "steps", "expired_total")}
        for r in results
    ]
    policy_name = resolve_policy(policy_spec, cfg).name
    return RunReport(
        policy=policy_name,
        seeds=seeds,
        per_seed=per_seed,
        utility_mean=float(np.mean([r["utility"] for r in results])),
        throughput_mean_bps=float(np.mean([r["throughput_bps"] for r in results])),
        action_freq=action_freq,
        short_term_samples=short_term,
        config_hash=cfg.hash(),
        wall_clock_s=time.time() - started,
    )


def compare_policies(cfg: LabConfig, policy_specs, seeds=None,
                     workers: int | None = None) -> dict[str, RunReport]:
    if len(policy_specs) < 2:
        raise ValueError("compare needs at least two policies")
    return {spec: evaluate_policy(cfg, spec, seeds=seeds, workers=workers)
            for spec in policy_specs}


def sweep(cfg: LabConfig, axis: str, values, policy_specs, seeds=None,
          workers: int | None = None) -> list[dict]:
    """One evaluation per (axis value, policy); axis is 'antennas' or 'ues'."""
    if axis not in ("antennas", "ues"):
        raise ValueError("sweep axis must be 'antennas' or 'ues'")
    values = list(values)
    if values != sorted(values):
        raise ValueError("sweep values must be sorted ascending")
    rows = []
    for value in values:
        swept = cfg.copy()
        if axis == "antennas":
            swept.system.antennas = int(value)
        else:
            scale = int(value) / cfg.system.total_ues
            swept.system.total_ues = int(value)
            swept.system.avg_concurrent_ues = cfg.system.avg_concurrent_ues * scale
            swept.system.ue_slots = max(1, int(round(cfg.system.ue_slots * scale)))
        swept.validate()
        for spec in policy_specs:
            report = evaluate_policy(swept, spec, seeds=seeds, workers=workers)
            rows.append({
                "axis": axis, "value": int(value), "policy": report.policy,
                "utility_mean": report.utility_mean,
                "throughput_mean_bps": report.throughput_mean_bps,
                "per_seed_utility": [r["utility"] for r in report.per_seed],
            })
    return rows


# ---------------------------------------------------------------------------
# training protocol


@dataclass
class TrainResult:
    checkpoint: Path
    curve_rows: list  # dicts: episode, epoch, block, return, critic_loss, grad_norm
    epochs_run: int
    converged: bool
    config_hash: str
    wall_clock_s: float = 0.0


def _block_list(cfg: LabConfig) -> list[tuple[str, int]]:
    return [(name, i) for name in sorted(traffic.TRAFFIC_TYPES)
            for i in range(cfg.train.blocks_per_type)]


def train_agent(cfg: LabConfig, seed: int | None = None,
                progress=None) -> tuple[DdpgAgent, TrainResult]:
    """Train on shuffled single-type data blocks until plateau or max epochs.

    Each block is a fixed, seeded single-traffic-type episode; one epoch
    visits every block once in random order. Convergence is a return
    plateau: the last `plateau_epochs` epoch returns staying within
    `plateau_tol` (relative) of each other.
    """
    started = time.time()
    seed = cfg.train.train_seed if seed is None else int(seed)
    probe = make_env(cfg, seed=seed, horizon=1)
    agent = DdpgAgent(probe.state_dim, cfg.ddpg, seed=seed)
    order_rng = np.random.default_rng(np.random.SeedSequence([seed, 0xB10C]))
    blocks = _block_list(cfg)
    curve_rows = []
    epoch_returns = []
    episode = 0
    converged = False
    envs = {
        (name, i): make_env(
            cfg, seed=seed + 1000 * (i + 1) + ord(name),
            ratios={name: 1.0}, horizon=cfg.train.block_horizon_ttis)
        for (name, i) in blocks
    }
    for epoch in range(cfg.train.max_epochs):
        idx = order_rng.permutation(len(blocks))
        block_returns = []
        for j in idx:
            name, i = blocks[int(j)]
            stats = train_on_env(agent, envs[(name, i)], explore=True, learn=True)
            episode += 1
            block_returns.append(stats.episode_return)
            curve_rows.append({
                "episode": episode, "epoch": epoch, "block": f"{name}{i}",
                "return": stats.episode_return,
                "critic_loss": stats.mean_critic_loss,
                "grad_norm": stats.mean_actor_grad_norm,
            })
        epoch_returns.append(float(np.mean(block_returns)))
        if progress is not None:
            progress(epoch, epoch_returns[-1])
        k = cfg.train.plateau_epochs
        if len(epoch_returns) >= k:
            window = epoch_returns[-k:]
            scale = max(abs(float(np.mean(window))), 1e-9)
            if (max(window) - min(window)) <= cfg.train.plateau_tol * scale:
                converged = True
                break
    result = TrainResult(checkpoint=None, curve_rows=curve_rows,
                         epochs_run=len(epoch_returns), converged=converged,
                         config_hash=cfg.hash(),
                         wall_clock_s=time.time() - started)
    return agent, result


# ---------------------------------------------------------------------------
# persistence


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")


def _write_csv(path: Path, rows: list[dict], columns: list[str]):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({c: row.get(c, "") for c in columns})


def write_run_report(out_dir: Path, report: RunReport, cfg: LabConfig,
                     stem: str = "metrics"):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / f"{stem}.json", report.metrics_dict())
    _write_json(out_dir / "report.json",
                {**report.metrics_dict(), "wall_clock_s": report.wall_clock_s})
    _write_csv(out_dir / "per_seed.csv", report.per_seed,
               ["seed", "utility", "throughput_bps", "total_reward",
                "steps", "expired_total"])
    freq_rows = [{"action": k, "frequency": v, "config_hash": report.config_hash}
                 for k, v in report.action_freq.items()]
    _write_csv(out_dir / "action_freq.csv", freq_rows,
               ["action", "frequency", "config_hash"])
    st_rows = [{**row, "config_hash": report.config_hash}
               for row in report.short_term_samples]
    _write_csv(out_dir / "short_term_utility.csv", st_rows,
               ["seed", "window", "utility", "sessions", "config_hash"])
    dump_config(cfg, out_dir / "config_resolved.yaml")


def write_train_result(out_dir: Path, agent: DdpgAgent, result: TrainResult,
                       cfg: LabConfig) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt = out_dir / "checkpoint.npz"
    agent.save(ckpt, extra_meta={"config_hash": result.config_hash})
    result.checkpoint = ckpt
    _write_csv(out_dir / "curves.csv", result.curve_rows,
               ["episode", "epoch", "block", "return", "critic_loss", "grad_norm"])
    _write_json(out_dir / "train_report.json", {
        "epochs_run": result.epochs_run,
        "converged": result.converged,
        "episodes": len(result.curve_rows),
        "config_hash": result.config_hash,
    })
    dump_config(cfg, out_dir / "config_resolved.yaml")
    return ckpt
