"""Hyperparameter variants for the headline-comparison training."""
import sys
import time

import numpy as np

sys.path.insert(0, "src")

from mimolab.config import LabConfig
from mimolab import harness
from mimolab.policies import AgentPolicy


def acceptance_config(scenario=2, **ddpg_kw):
    cfg = LabConfig()
    cfg.system.antennas = 16
    cfg.system.total_ues = 60
    cfg.system.avg_concurrent_ues = 12.0
    cfg.system.ue_slots = 16
    cfg.system.cell_radius_m = 400.0
    cfg.system.horizon_ttis = 2000
    cfg.traffic.scenario = scenario
    cfg.ce.candidates, cfg.ce.elites, cfg.ce.iterations = 16, 4, 4
    cfg.ddpg.hidden = [64, 64]
    cfg.ddpg.batch_size = 128
    cfg.ddpg.buffer_size = 30000
    cfg.ddpg.noise_scale = 0.2
    cfg.ddpg.dropout = 0.0
    for k, v in ddpg_kw.items():
        setattr(cfg.ddpg, k, v)
    cfg.train.blocks_per_type = 2
    cfg.train.block_horizon_ttis = 500
    cfg.train.max_epochs = 14
    return cfg.validate()


def main():
    variant = sys.argv[1] if len(sys.argv) > 1 else "A"
    kw = {
        "A": dict(actor_lr=5e-4, critic_lr=2e-3),
        "B": dict(actor_lr=1e-3, critic_lr=2e-3),
    }[variant]
    t0 = time.time()
    cfg = acceptance_config(**kw)
    agent, result = harness.train_agent(
        cfg, seed=777,
        progress=lambda e, r: print(f"epoch {e}: {r:.1f}", flush=True))
    print(f"[{variant}] trained {result.epochs_run} epochs in {time.time()-t0:.0f}s",
          flush=True)
    policy = AgentPolicy(agent)
    seeds = list(range(6))
    for scenario in (2, 5):
        cfg_s = acceptance_config(scenario, **kw)
        best = harness.evaluate_policy(cfg_s, "FIFO-FSO-AS", seeds=seeds)
        b_vals = [r["utility"] for r in best.per_seed]
        us = [harness.make_env(cfg_s, s).run_episode(policy).normalized_utility
              for s in seeds]
        print(f"[{variant}] scen{scenario}: learned {np.mean(us):.3f} "
              f"{np.round(us,2)} vs FIFO-FSO-AS {np.mean(b_vals):.3f} "
              f"{np.round(b_vals,2)}", flush=True)
    m = harness.make_env(acceptance_config(2, **kw), 0).run_episode(policy)
    top = sorted(m.action_freq.items(), key=lambda kv: -kv[1])[:6]
    print(f"[{variant}] top actions:", top, flush=True)
    print(f"[{variant}] total {time.time()-t0:.0f}s", flush=True)


if __name__ == "__main__":
    main()
