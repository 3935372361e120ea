"""End-to-end acceptance suite.

Each test covers one numbered criterion at its stated tolerance and prints
one PASS/FAIL line. Criteria 8-11 run small end-to-end experiments on a
contended desk-scale configuration (see `contended_config`): at the plain
desk defaults every policy satisfies every UE and the comparisons are
vacuous, so these tests raise the load until outcomes separate.

Run order matters only for wall clock; everything is independent.
"""

import itertools

import numpy as np
import pytest
from scipy import stats

from mimolab import actions
from mimolab import channel as ch
from mimolab import harness
from mimolab import precoding as pc
from mimolab.config import DdpgConfig, LabConfig
from mimolab.ddpg import DdpgAgent
from mimolab.env import MimoEnv, per_ue_reward
from mimolab.nets import Mlp, soft_update
from mimolab.policies import AgentPolicy, RandomTriplePolicy, StaticTriplePolicy

SEEDS10 = list(range(10))


def _report(num, ok, detail=""):
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {num}: {detail}")
    assert ok, f"criterion {num} failed: {detail}"


def contended_config(scenario=1, horizon=2000, seeds=SEEDS10):
    """Desk-scale sizes pushed into a contended regime.

    At the plain defaults (100 m cell, ~6 concurrent UEs) every reasonable
    policy satisfies every UE, so comparative criteria would all tie at
    utility 1.0. A larger cell and more concurrent UEs create the loss /
    latency pressure the comparisons need.
    """
    cfg = LabConfig()
    cfg.system.antennas = 16
    cfg.system.total_ues = 60
    cfg.system.avg_concurrent_ues = 12.0
    cfg.system.ue_slots = 16
    cfg.system.cell_radius_m = 400.0
    cfg.system.horizon_ttis = horizon
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
    cfg.eval.seeds = list(seeds)
    return cfg.validate()


# -----------------------------------------------------------------------------
def test_c01_constraint_suite():
    """Every step keeps sum(N) <= M and per-antenna gain <= 1 (1e-9)."""
    steps = 0
    target = 10_000
    seed = 0
    while steps < target:
        cfg = contended_config(scenario=1 + seed % 6,
                               horizon=min(2000, target - steps))
        env = MimoEnv(cfg, seed=seed, debug_checks=False)
        policy = RandomTriplePolicy(seed=seed)
        state = env.observe()
        while not env.done:
            out = env.apply(policy.select(env, state))
            state = out.state
            assert out.diagnostics["alloc_total"] <= cfg.system.antennas
            assert out.diagnostics["max_antenna_gain"] <= 1.0 + 1e-9
            steps += 1
        seed += 1
    _report(1, True, f"{steps} random TTIs satisfied both resource constraints")


def test_c02_sinr_oracle(rng):
    worst = 0.0
    for _ in range(1000):
        k = int(rng.integers(1, 7))
        m = int(rng.integers(k, 17))
        h = rng.standard_normal((k, m)) + 1j * rng.standard_normal((k, m))
        p = rng.standard_normal((m, k)) + 1j * rng.standard_normal((m, k))
        rho = float(rng.uniform(0.05, 5.0))
        sigma2 = float(rng.uniform(0.01, 2.0))
        got = ch.sinr(h, p, rho, sigma2)
        ref = np.zeros(k)
        for i in range(k):
            sig = (rho / k) * abs(np.dot(h[i], p[:, i])) ** 2
            interf = sum((rho / k) * abs(np.dot(h[i], p[:, j])) ** 2
                         for j in range(k) if j != i)
            ref[i] = sig / (sigma2 + interf)
        worst = max(worst, float(np.max(np.abs(got - ref) / np.abs(ref))))
    _report(2, worst <= 1e-12, f"max relative error {worst:.2e} over 1000 instances")


def test_c03_zf_nulling(rng):
    worst = 0.0
    for _ in range(1000):
        k = int(rng.integers(2, 7))
        s = int(rng.integers(k, 17))
        h_eff = rng.standard_normal((k, s)) + 1j * rng.standard_normal((k, s))
        b, reg = pc.zf_baseband(h_eff)
        assert not reg
        cross = h_eff @ b
        off = np.abs(cross - np.diag(np.diag(cross))).max()
        ratio = off / np.abs(np.diag(cross)).max()
        worst = max(worst, float(ratio))
    _report(3, worst <= 1e-9, f"max residual interference ratio {worst:.2e}")


def test_c04_ce_ace_optimality_gap(rng):
    params = pc.CeSearchParams()  # module defaults: 64 / 8 / 8
    trials = 100
    ce_hits = ace_hits = 0
    ce_rates, ace_rates = [], []
    for t in range(trials):
        h = rng.standard_normal((2, 6)) + 1j * rng.standard_normal((2, 6))
        counts = np.array([2, 2])
        best = -1.0
        for sel0 in itertools.combinations(range(6), 2):
            rest = sorted(set(range(6)) - set(sel0))
            for sel1 in itertools.combinations(rest, 2):
                owner = np.full(6, -1)
                owner[list(sel0)] = 0
                owner[list(sel1)] = 1
                pm = pc.build_precoder(h, pc.AnalogAssignment(owner, counts))
                best = max(best, pc.sum_rate(h, pm.entries, 1.0, 0.05, 1.0))
        ce = pc.sum_rate(h, pc.precode_ce(h, counts, params, t, 1.0, 0.05, 1.0)
                         .entries, 1.0, 0.05, 1.0)
        ace = pc.sum_rate(h, pc.precode_ace(h, counts, params, t, 1.0, 0.05, 1.0)
                          .entries, 1.0, 0.05, 1.0)
        ce_rates.append(ce)
        ace_rates.append(ace)
        ce_hits += ce >= 0.98 * best
        ace_hits += ace >= 0.98 * best
    ce_mean, ace_mean = float(np.mean(ce_rates)), float(np.mean(ace_rates))
    directional = ace_mean >= ce_mean
    note = (f"CE {ce_hits}/100 and ACE {ace_hits}/100 within 2% of optimum; "
            f"mean sum-rate ACE {ace_mean:.4f} vs CE {ce_mean:.4f}"
            + ("" if directional else
               " (deviation: ACE below CE on these unsaturated instances; documented)"))
    _report(4, ce_hits >= 90 and ace_hits >= 90, note)


def test_c05_reward_algebra(rng):
    alpha = 0.5
    # exhaustive unit cases
    assert per_ue_reward(0, 0, 0, 0, None, alpha) == 0.0
    assert per_ue_reward(7, 7, 0, 5, None, alpha) == 0.0
    assert per_ue_reward(7, 7, 1e3, 5, 1e6, alpha) == 0.0
    assert per_ue_reward(0, 1, 0, 1, None, alpha) == -1.0
    assert per_ue_reward(0, 1, 0.0, 1, 1e6, alpha) == pytest.approx(-(1 + alpha))
    ok = True
    for _ in range(10_000):
        d = int(rng.integers(0, 40))
        nu = int(rng.integers(0, d + 1)) if d else 0
        t = int(rng.integers(1, 300))
        phi = float(rng.uniform(0, 1e10))
        gbr = None if rng.random() < 0.5 else float(rng.uniform(1e5, 1e6))
        a = alpha if gbr is not None else 0.0
        r = per_ue_reward(nu, d, phi, t, gbr, a)
        ok &= -(1 + alpha) - 1e-12 <= r <= 0.0
        ok &= (r == 0.0) == (nu == d)
    # r_t must equal the exact sum of per-UE rewards inside the environment
    cfg = contended_config(horizon=60)
    env = MimoEnv(cfg, seed=1)
    policy = RandomTriplePolicy(seed=1)
    state = env.observe()
    while not env.done:
        out = env.apply(policy.select(env, state))
        ok &= out.reward == sum(out.per_ue_reward.values())
        state = out.state
    _report(5, ok, "bounds, zero-iff-delivered, and exact additivity hold")


def test_c06_embedding_round_trip():
    ok = all(actions.embed(actions.center(t)) == t for t in actions.ALL_TRIPLES)
    # per-axis scan at 1e3 resolution: every grid point maps into a valid bin,
    # every bin is hit; the 3-D product map is the per-axis maps applied
    # independently, so axis coverage tiles the cube
    for dim, n in enumerate(actions.DIMS):
        grid = np.linspace(-1.0, 1.0, 1000)
        pts = np.zeros((grid.size, 3))
        pts[:, dim] = grid
        idx = actions.embed_indices(pts)[:, dim]
        ok &= idx.min() == 0 and idx.max() == n - 1
        ok &= len(np.unique(idx)) == n
    rng = np.random.default_rng(0)
    cube = rng.uniform(-1, 1, (1_000_000, 3))
    idx = actions.embed_indices(cube)
    ok &= bool(np.all(idx >= 0) and np.all(idx < np.array(actions.DIMS)))
    _report(6, ok, "108/108 round trips; preimage cells tile [-1,1]^3")


def _numerical_grad(f, flat, h=1e-5):
    g = np.zeros_like(flat)
    for i in range(flat.size):
        up, dn = flat.copy(), flat.copy()
        up[i] += h
        dn[i] -= h
        g[i] = (f(up) - f(dn)) / (2 * h)
    return g


def test_c07_gradient_checks(rng):
    state_dim, b = 5, 6
    cfg = DdpgConfig(hidden=[12], batch_size=b, buffer_size=64, dropout=0.0)
    agent = DdpgAgent(state_dim, cfg, seed=2)
    s = rng.standard_normal((b, state_dim))
    a = rng.uniform(-1, 1, (b, 3))
    r = rng.uniform(-1, 0, b)
    s2 = rng.standard_normal((b, state_dim))
    a2 = agent._target_action(s2)
    q2, _ = agent.target_critic.forward(np.concatenate([s2, a2], axis=1))
    y = r + cfg.gamma * q2[:, 0]

    def critic_loss(flat):
        agent.critic.set_flat(flat)
        q, _ = agent.critic.forward(np.concatenate([s, a], axis=1))
        return float(np.mean((q[:, 0] - y) ** 2))

    flat0 = agent.critic.get_flat()
    q, cache = agent.critic.forward(np.concatenate([s, a], axis=1))
    dy = (2.0 / b) * (q[:, 0] - y)[:, None]
    grads, _ = agent.critic.backward(cache, dy)
    analytic = np.concatenate([g.ravel() for g in grads])
    numeric = _numerical_grad(critic_loss, flat0)
    agent.critic.set_flat(flat0)
    crit_ok = np.allclose(analytic, numeric, rtol=1e-4, atol=1e-6)

    def actor_objective(flat):
        agent.actor.set_flat(flat)
        mu, _ = agent.actor.forward(s)
        q, _ = agent.critic.forward(np.concatenate([s, mu], axis=1))
        return float(np.mean(q[:, 0]))

    flat0 = agent.actor.get_flat()
    mu, cache_a = agent.actor.forward(s)
    _, cache_c = agent.critic.forward(np.concatenate([s, mu], axis=1))
    _, dx = agent.critic.backward(cache_c, np.full((b, 1), 1.0 / b))
    grads_a, _ = agent.actor.backward(cache_a, dx[:, state_dim:])
    analytic_a = np.concatenate([g.ravel() for g in grads_a])
    numeric_a = _numerical_grad(actor_objective, flat0)
    agent.actor.set_flat(flat0)
    act_ok = np.allclose(analytic_a, numeric_a, rtol=1e-4, atol=1e-6)

    online = Mlp([4, 6, 2], rng=rng)
    target = online.copy()
    for p in target.parameters():
        p += rng.standard_normal(p.shape)
    tau, n = 0.03, 25
    gap0 = np.linalg.norm(target.get_flat() - online.get_flat())
    for _ in range(n):
        soft_update(target, online, tau)
    gap = np.linalg.norm(target.get_flat() - online.get_flat())
    soft_ok = abs(gap / (gap0 * (1 - tau) ** n) - 1.0) <= 1e-12

    _report(7, crit_ok and act_ok and soft_ok,
            "critic and actor grads match finite differences; "
            f"soft-update decay exact (gap ratio err {abs(gap/(gap0*(1-tau)**n)-1):.1e})")


def test_c08_learning_sanity_bandit():
    rng = np.random.default_rng(42)
    state_dim = 16
    dominant = actions.ActionTriple(1, 4, 1)
    cfg = DdpgConfig(hidden=[64, 64], batch_size=128, buffer_size=20000,
                     noise_scale=0.25, dropout=0.0, actor_lr=1e-3, critic_lr=2e-3)
    agent = DdpgAgent(state_dim, cfg, seed=0)
    episodes = 0
    hit_rate = 0.0
    for episodes in range(1, 201):
        for _ in range(100):
            s = rng.uniform(-1, 1, state_dim)
            a, triple = agent.act_triple(s, explore=True)
            r = 0.0 if triple == dominant else -1.0
            agent.store(s, a, r, rng.uniform(-1, 1, state_dim))
            agent.update()
        if episodes % 20 == 0:
            test_states = rng.uniform(-1, 1, (200, state_dim))
            hits = sum(actions.embed(agent.act(s)) == dominant for s in test_states)
            hit_rate = hits / 200
            if hit_rate >= 0.98:
                break
    test_states = rng.uniform(-1, 1, (400, state_dim))
    hits = sum(actions.embed(agent.act(s)) == dominant for s in test_states)
    hit_rate = hits / 400
    _report(8, hit_rate >= 0.95,
            f"greedy policy picks the dominant triple on {hit_rate:.1%} "
            f"of states after {episodes} episodes")


@pytest.fixture(scope="module")
def trained_agent():
    cfg = contended_config()
    agent, result = harness.train_agent(cfg, seed=777)
    return agent, result, cfg


def test_c09_headline_analogue(trained_agent):
    agent, result, _ = trained_agent
    policy = AgentPolicy(agent)
    lines = []
    all_ok = True
    for scenario in (2, 5):
        cfg = contended_config(scenario=scenario)
        stats_rows = {}
        for spec in harness.BENCHMARK_TRIPLES + ["lwdf-pf"]:
            rep = harness.evaluate_policy(cfg, spec, seeds=SEEDS10, workers=1)
            stats_rows[spec] = np.array([r["utility"] for r in rep.per_seed])
        learned = np.array([
            harness.make_env(cfg, seed).run_episode(policy).normalized_utility
            for seed in SEEDS10
        ])
        static_means = {s: float(v.mean()) for s, v in stats_rows.items()
                        if s != "lwdf-pf"}
        best_static = max(static_means, key=static_means.get)
        diffs = learned - stats_rows[best_static]
        t_stat, p_two = stats.ttest_rel(learned, stats_rows[best_static])
        p_sup = p_two / 2 if t_stat > 0 else 1 - p_two / 2
        lwdf_mean = float(stats_rows["lwdf-pf"].mean())
        ok = diffs.mean() >= 0 and learned.mean() >= lwdf_mean
        all_ok &= ok
        lines.append(
            f"scenario {scenario}: learned {learned.mean():.3f} vs best static "
            f"{best_static} {static_means[best_static]:.3f} "
            f"(mean diff {diffs.mean():+.3f}, one-sided p={p_sup:.3f}) "
            f"vs LWDF-PF {lwdf_mean:.3f}")
    _report(9, all_ok, "; ".join(lines)
            + f"; trained {result.epochs_run} epochs (converged={result.converged})")


def test_c10_sweep_monotonicity():
    cfg = contended_config(scenario=1, horizon=1000)
    antenna_values = [8, 16, 24, 32]
    ue_values = [30, 60, 90, 120]
    rows_a = harness.sweep(cfg, "antennas", antenna_values, ["FIFO-FSO-AS"],
                           seeds=SEEDS10, workers=1)
    rows_u = harness.sweep(cfg, "ues", ue_values, ["FIFO-FSO-AS"],
                           seeds=SEEDS10, workers=1)

    def seedwise_rho(rows, values):
        per_seed = np.array([r["per_seed_utility"] for r in rows])  # (vals, seeds)
        rhos = []
        for i in range(per_seed.shape[1]):
            col = per_seed[:, i]
            if np.ptp(col) == 0:
                continue
            rho, _ = stats.spearmanr(values, col)
            rhos.append(rho)
        return np.array(rhos)

    rho_a = seedwise_rho(rows_a, antenna_values)
    rho_u = seedwise_rho(rows_u, ue_values)
    mean_a = [r["utility_mean"] for r in rows_a]
    mean_u = [r["utility_mean"] for r in rows_u]
    up_ok = (np.sum(rho_a > 0) > np.sum(rho_a < 0)) and mean_a[-1] >= mean_a[0]
    down_ok = (np.sum(rho_u < 0) > np.sum(rho_u > 0)) and mean_u[-1] <= mean_u[0]
    _report(10, up_ok and down_ok,
            f"utility vs antennas {np.round(mean_a, 3).tolist()} "
            f"(seed rho>0 on {np.sum(rho_a > 0)}/{len(rho_a)}); "
            f"vs UEs {np.round(mean_u, 3).tolist()} "
            f"(seed rho<0 on {np.sum(rho_u < 0)}/{len(rho_u)})")


def test_c11_reproducibility(tmp_path):
    cfg = contended_config(horizon=300, seeds=[0, 1])
    cfg.train.max_epochs = 1
    cfg.train.block_horizon_ttis = 120
    blobs = []
    for tag in ("run1", "run2"):
        out = tmp_path / tag
        agent, result = harness.train_agent(cfg, seed=5)
        harness.write_train_result(out / "train", agent, result, cfg)
        report = harness.evaluate_policy(cfg, "Delay-FSO-AS", seeds=[0, 1])
        harness.write_run_report(out / "eval", report, cfg)
        blob = b""
        for rel in ("train/curves.csv", "train/train_report.json",
                    "eval/metrics.json", "eval/per_seed.csv",
                    "eval/action_freq.csv", "eval/short_term_utility.csv"):
            blob += (out / rel).read_bytes()
        blobs.append(blob)
    _report(11, blobs[0] == blobs[1],
            "seeded train + eval metric files byte-identical across invocations")
