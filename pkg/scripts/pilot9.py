"""Pilot for the headline comparison: train on blocks, eval on scenarios 2/5."""
import sys
import time

import numpy as np

sys.path.insert(0, "src")

from mimolab.config import LabConfig
from mimolab import harness
from mimolab.policies import AgentPolicy


def acceptance_config(scenario=2):
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
    cfg.ddpg.noise_scale = 0.25
    cfg.ddpg.dropout = 0.0
    cfg.train.blocks_per_type = 1
    cfg.train.block_horizon_ttis = 800
    cfg.train.max_epochs = 10
    return cfg.validate()


def main():
    t0 = time.time()
    cfg = acceptance_config()
    agent, result = harness.train_agent(
        cfg, seed=777, progress=lambda e, r: print(f"epoch {e}: {r:.1f}", flush=True))
    print(f"trained {result.epochs_run} epochs in {time.time()-t0:.0f}s "
          f"converged={result.converged}", flush=True)

    policy = AgentPolicy(agent)
    seeds = list(range(6))
    for scenario in (2, 5):
        print(f"=== scenario {scenario}")
        cfg_s = acceptance_config(scenario)
        for spec in harness.BENCHMARK_TRIPLES + ["lwdf-pf"]:
            rep = harness.evaluate_policy(cfg_s, spec, seeds=seeds, workers=3)
            vals = [r["utility"] for r in rep.per_seed]
            print(f"  {spec:22s} {np.mean(vals):.3f} {np.round(vals, 2)}", flush=True)
        us = []
        for seed in seeds:
            m = harness.make_env(cfg_s, seed).run_episode(policy)
            us.append(m.normalized_utility)
        print(f"  {'LEARNED':22s} {np.mean(us):.3f} {np.round(us, 2)}", flush=True)
        m = harness.make_env(cfg_s, seeds[0]).run_episode(policy)
        top = sorted(m.action_freq.items(), key=lambda kv: -kv[1])[:6]
        print("  top actions:", top, flush=True)
    print(f"total {time.time()-t0:.0f}s")


if __name__ == "__main__":
    main()
