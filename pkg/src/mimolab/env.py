"""MDP environment: state encoding, componentized-action step, reward, metrics.

One `MimoEnv` instance simulates a single cell for one episode. Each TTI
the caller supplies either an `ActionTriple` (prioritizer, allocator,
precoder) or a `DirectDecision` (used by the literature baselines, which
bypass the componentized action space). The environment then runs
scheduling -> precoding -> SINR/rate -> packet delivery, produces the
per-UE penalty rewards, and tracks the episode's QoS metrics.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import channel as ch
from . import precoding, scheduling, traffic
from .actions import ActionTriple
from .config import LabConfig
from .precoding import CeSearchParams

#: per-UE-slot features: cqi, backlog, deadline margin, 6x type one-hot, GBR deficit
SLOT_FEATURES = 10
GLOBAL_FEATURES = 2
#: reference antenna count used only to normalize the M state feature
ANTENNA_NORM_REF = 128.0
#: session-end window width for the short-term utility metric, in TTIs
SHORT_TERM_WINDOW = 100


@dataclass
class DirectDecision:
    """Explicit scheduling outcome, for policies outside the action space."""

    order: list
    alloc: dict
    precoder: str  # "AS" | "CE" | "ACE" | "MMSE"
    label: str


@dataclass
class StepOutcome:
    state: np.ndarray
    reward: float
    per_ue_reward: dict
    phi: dict
    done: bool
    diagnostics: dict = field(default_factory=dict)


@dataclass
class EpisodeMetrics:
    normalized_utility: float
    throughput_bps: float
    session_records: list  # (end_tti, ue_id, utility, vacuous_flag)
    short_term: list  # (window_index, mean_utility, session_count)
    action_freq: dict
    total_reward: float
    steps: int
    diagnostics: dict = field(default_factory=dict)


def per_ue_reward(nu: int, d_total: int, sum_phi_bps: float, active_ttis: int,
                  gbr_bps: float | None, alpha: float,
                  pace_clamp: bool = True, pace_floor: float = 1e-6) -> float:
    """Penalty reward: (nu/|D| - 1) * (1 + alpha*(1 - sum_phi/(t*GBR))).

    The pace factor applies only to GBR traffic (alpha is treated as 0
    otherwise) and, when clamping is on, is floored at a small positive
    value so the product stays nonpositive and vanishes exactly when all
    generated packets have been delivered.
    """
    if d_total <= 0:
        return 0.0
    incompletion = nu / d_total - 1.0
    if gbr_bps is None or alpha == 0.0:
        return incompletion
    pace = sum_phi_bps / (active_ttis * gbr_bps) if active_ttis > 0 else 0.0
    factor = 1.0 + alpha * (1.0 - pace)
    if pace_clamp:
        factor = max(factor, pace_floor)
    return incompletion * factor


@dataclass
class _SessionPlan:
    ue_id: int
    type_name: str
    start_tti: int
    duration_ttis: int


def _type_counts(ratios: dict[str, float], k_total: int) -> dict[str, int]:
    """Split k_total UEs across types proportionally (largest remainder)."""
    names = sorted(ratios)
    weights = np.array([ratios[n] for n in names], dtype=float)
    shares = scheduling.largest_remainder(weights, k_total)
    return dict(zip(names, (int(s) for s in shares)))


class MimoEnv:
    """Single-cell downlink environment over a fixed horizon of TTIs."""

    def __init__(self, cfg: LabConfig, seed: int, ratios: dict | None = None,
                 horizon: int | None = None, trace_path=None,
                 debug_checks: bool = True, ue_relabel=None):
        cfg.validate()
        self.cfg = cfg
        self.seed = int(seed)
        self.ratios = ratios if ratios is not None else cfg.resolved_ratios()
        self.horizon = int(horizon) if horizon is not None else cfg.system.horizon_ttis
        self.trace_path = trace_path
        self.debug_checks = debug_checks
        #: optional UE id permutation, for permutation-symmetry checks
        self.ue_relabel = None if ue_relabel is None else np.asarray(ue_relabel, int)

        s = cfg.system
        self.m = s.antennas
        self.rho = s.tx_power_w
        self.w = s.bandwidth_hz
        self.t_i = s.tti_seconds
        self.sigma2 = ch.noise_power_w(s.bandwidth_hz, cfg.channel.noise_figure_db)
        self.ce_params = CeSearchParams(cfg.ce.candidates, cfg.ce.elites,
                                        cfg.ce.iterations, cfg.ce.smoothing)
        self._trace_file = None
        self.reset()

    # ------------------------------------------------------------------
    @property
    def state_dim(self) -> int:
        return self.cfg.system.ue_slots * SLOT_FEATURES + GLOBAL_FEATURES

    def reset(self) -> np.ndarray:
        cfg = self.cfg
        self.topology = ch.generate_topology(self.seed, cfg.system.cell_radius_m,
                                             cfg.system.total_ues)
        self._traffic_rng = np.random.default_rng(
            np.random.SeedSequence([self.seed, 0x7AFF]))
        self._plans = self._build_plans()
        if self.ue_relabel is not None:
            perm = self.ue_relabel
            relabeled = self.topology.positions.copy()
            relabeled[perm] = self.topology.positions
            self.topology.positions = relabeled
            for plan in self._plans:
                plan.ue_id = int(perm[plan.ue_id])
        self.channel = ch.ChannelProcess(
            self.topology, cfg.channel.pathloss_exponent, cfg.channel.carrier_hz,
            cfg.channel.ar1_coeff, self.seed, cfg.channel.pathloss_ref_distance_m)
        self._next_plan = 0
        self.active: dict[int, traffic.UeSession] = {}
        self.pf_history: dict[int, float] = {}
        self.t = 1
        self.done = False
        self._h = None
        self._cqi: dict[int, int] = {}
        self._records: list = []
        self._action_counts: dict[str, int] = {}
        self._bits_credited = 0.0
        self._expired_total = 0
        self._steps = 0
        self._total_reward = 0.0
        self._sched_counts: list = []
        if self.trace_path is not None:
            if self._trace_file is not None:
                self._trace_file.close()
            self._trace_file = open(self.trace_path, "w")
        self._begin_tti()
        return self.observe()

    def _build_plans(self) -> list:
        cfg = self.cfg
        k = cfg.system.total_ues
        window = max(1, int(self.horizon * cfg.traffic.arrival_window_frac))
        mean_hold = cfg.traffic.session_mean_ttis
        if mean_hold is None:
            mean_hold = cfg.system.avg_concurrent_ues * window / k
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0x5E55]))
        counts = _type_counts(self.ratios, k)
        type_pool = [name for name in sorted(counts) for _ in range(counts[name])]
        rng.shuffle(type_pool)
        starts = np.sort(rng.uniform(1, window + 1, size=k)).astype(int)
        durations = np.maximum(1, rng.exponential(mean_hold, size=k).astype(int))
        return [
            _SessionPlan(ue_id=i, type_name=type_pool[i],
                         start_tti=int(starts[i]), duration_ttis=int(durations[i]))
            for i in range(k)
        ]

    # ------------------------------------------------------------------
    def _begin_tti(self):
        """Admissions, arrivals, expiry, and channel/CQI feedback for TTI t."""
        cfg = self.cfg
        while (self._next_plan < len(self._plans)
               and self._plans[self._next_plan].start_tti <= self.t
               and len(self.active) < cfg.system.ue_slots):
            plan = self._plans[self._next_plan]
            self._next_plan += 1
            gen_end = min(self.t + plan.duration_ttis - 1, self.horizon)
            session = traffic.UeSession(
                ue_id=plan.ue_id, ttype=traffic.TRAFFIC_TYPES[plan.type_name],
                start_tti=self.t, gen_end_tti=gen_end, tti_seconds=self.t_i)
            self.active[plan.ue_id] = session
            self.pf_history[plan.ue_id] = cfg.scheduling.pf_history_floor_bps
        expired_now = 0
        for session in self.active.values():
            traffic.generate_arrivals(session, self.t, self._traffic_rng)
            expired_now += traffic.expire(session, self.t)
        self._expired_total += expired_now
        self._expired_this_tti = expired_now
        ues = sorted(self.active)
        if ues:
            self._h = self.channel.realize(ues, self.t, self.m)
            norm_sq = np.sum(np.abs(self._h.entries) ** 2, axis=1)
            snr = self.rho * norm_sq / (self.m * self.sigma2)
            snr_db = 10.0 * np.log10(np.maximum(snr, 1e-30))
            self._cqi = {ue: int(c) for ue, c in zip(ues, ch.cqi_map(snr_db))}
            self._h_norm_sq = dict(zip(ues, norm_sq))
        else:
            self._h = None
            self._cqi = {}
            self._h_norm_sq = {}

    def scheduling_context(self) -> scheduling.SchedulingContext:
        backlogged = sum(1 for s in self.active.values() if s.queue)
        estimator = scheduling.RateEstimator(
            self._h_norm_sq, self.rho, self.sigma2, self.m, backlogged, self.w)
        return scheduling.SchedulingContext(
            tti=self.t, m=self.m, tti_seconds=self.t_i,
            sessions=self.active, cqi=self._cqi, estimator=estimator,
            pf_history=self.pf_history,
            pf_floor=self.cfg.scheduling.pf_history_floor_bps)

    # ------------------------------------------------------------------
    def step(self, action: ActionTriple) -> StepOutcome:
        return self.apply(action)

    def apply(self, decision) -> StepOutcome:
        if self.done:
            raise RuntimeError("episode finished; call reset()")
        if isinstance(decision, ActionTriple):
            ctx = self.scheduling_context()
            o_t = scheduling.prioritize(decision.prioritizer, ctx)
            alloc = scheduling.allocate(decision.allocator, o_t, ctx)
            precoder = decision.precoder.value
            label = decision.name
        elif isinstance(decision, DirectDecision):
            o_t, alloc, precoder, label = (decision.order, decision.alloc,
                                           decision.precoder, decision.label)
        else:
            raise TypeError(f"unsupported decision {type(decision)!r}")

        serve = [ue for ue in o_t if alloc.get(ue, 0) >= 1]
        phi: dict[int, float] = {}
        sum_rate_served = 0.0
        zf_regularized = False
        alloc_total = 0
        max_gain = 0.0
        if serve:
            counts = np.array([alloc[ue] for ue in serve], dtype=int)
            alloc_total = int(counts.sum())
            if self.debug_checks:
                assert alloc_total <= self.m, "antenna budget exceeded"
            rows = np.stack([self._h.row_of(ue) for ue in serve])
            ce_rng = np.random.default_rng(
                np.random.SeedSequence([self.seed, 0xCE, self.t]))
            pm = precoding.precode(precoder, rows, counts, self.ce_params, ce_rng,
                                   self.rho, self.sigma2, self.w, column_ues=serve)
            max_gain = float(precoding.per_antenna_gain(pm.entries).max())
            if self.debug_checks:
                assert max_gain <= 1.0 + precoding.GAIN_TOL, "per-antenna gain violated"
            sinr_vec = ch.sinr(rows, pm.entries, self.rho, self.sigma2)
            phi_vec = ch.rate(sinr_vec, self.w)
            phi = {ue: float(r) for ue, r in zip(serve, phi_vec)}
            sum_rate_served = float(phi_vec.sum())
            zf_regularized = pm.regularized

        rcfg = self.cfg.reward
        rewards: dict[int, float] = {}
        for ue in sorted(self.active):
            session = self.active[ue]
            traffic.deliver(session, phi.get(ue, 0.0), self.t, self.t_i)
            alpha = rcfg.alpha_gbr if session.ttype.has_gbr else 0.0
            rewards[ue] = per_ue_reward(
                session.delivered, session.total_generated, session.sum_phi_bps,
                session.active_ttis, session.ttype.gbr_bps, alpha,
                rcfg.pace_clamp, rcfg.pace_floor)
        reward = sum(rewards.values())

        scheduling.update_pf_history(self.pf_history, phi, sorted(self.active),
                                     self.cfg.scheduling.pf_beta)
        self._action_counts[label] = self._action_counts.get(label, 0) + 1
        self._sched_counts.append(len(serve))
        self._steps += 1
        self._total_reward += reward

        for ue in list(self.active):
            session = self.active[ue]
            if session.is_drained(self.t):
                self._conclude(session, self.t)

        if self._trace_file is not None:
            self._trace_file.write(json.dumps({
                "tti": self.t, "action": label, "order": list(o_t),
                "alloc": {str(k): int(v) for k, v in alloc.items()},
                "phi_bps": {str(k): round(v, 3) for k, v in phi.items()},
                "reward": reward,
            }) + "\n")

        diagnostics = {
            "scheduled": len(serve),
            "sum_rate_bps": sum_rate_served,
            "expired": self._expired_this_tti,
            "zf_regularized": zf_regularized,
            "alloc_total": alloc_total,
            "max_antenna_gain": max_gain,
        }
        self.t += 1
        if self.t > self.horizon:
            self.done = True
            for ue in sorted(self.active):
                self._conclude(self.active[ue], self.horizon)
            if self._trace_file is not None:
                self._trace_file.close()
                self._trace_file = None
        else:
            self._begin_tti()
        return StepOutcome(state=self.observe(), reward=reward,
                           per_ue_reward=rewards, phi=phi, done=self.done,
                           diagnostics=diagnostics)

    def _conclude(self, session: traffic.UeSession, end_tti: int):
        u, vacuous = traffic.utility(session)
        self._bits_credited += session.bits_credited
        self._records.append((end_tti, session.ue_id, u, vacuous))
        self.channel.drop(session.ue_id)
        self.pf_history.pop(session.ue_id, None)
        del self.active[session.ue_id]

    # ------------------------------------------------------------------
    def observe(self) -> np.ndarray:
        cfg = self.cfg
        vec = np.zeros(self.state_dim)
        type_index = {name: i for i, name in enumerate(sorted(traffic.TRAFFIC_TYPES))}
        clip = cfg.reward.deadline_clip_ttis
        for slot, ue in enumerate(sorted(self.active)[: cfg.system.ue_slots]):
            session = self.active[ue]
            base = slot * SLOT_FEATURES
            vec[base] = self._cqi.get(ue, 0) / ch.CQI_MAX
            backlog = session.backlog_bytes()
            vec[base + 1] = min(1.0, math.log1p(backlog)
                                / math.log1p(cfg.reward.backlog_scale_bytes))
            head = session.head_deadline()
            margin = clip if head is None else min(max(head - self.t, 0), clip)
            vec[base + 2] = margin / clip
            vec[base + 3 + type_index[session.ttype.name]] = 1.0
            if session.ttype.has_gbr:
                avg = session.avg_rate_bps()
                vec[base + 9] = min(1.0, max(0.0, 1.0 - avg / session.ttype.gbr_bps))
        vec[-2] = min(1.0, len(self.active) / (2.0 * cfg.system.avg_concurrent_ues))
        vec[-1] = min(1.0, self.m / ANTENNA_NORM_REF)
        return vec

    # ------------------------------------------------------------------
    def run_episode(self, policy) -> EpisodeMetrics:
        state = self.reset()
        while not self.done:
            decision = policy.select(self, state)
            out = self.apply(decision)
            state = out.state
        return self.episode_metrics()

    def episode_metrics(self) -> EpisodeMetrics:
        records = sorted(self._records)
        # vacuous sessions (no data ever requested) carry no QoS information
        utilities = [u for (_, _, u, vacuous) in records if not vacuous]
        norm_u = float(np.mean(utilities)) if utilities else 0.0
        elapsed = max(1, self._steps) * self.t_i
        windows: dict[int, list] = {}
        for end_tti, _, u, vacuous in records:
            if not vacuous:
                windows.setdefault(end_tti // SHORT_TERM_WINDOW, []).append(u)
        short_term = [(w, float(np.mean(us)), len(us))
                      for w, us in sorted(windows.items())]
        total_actions = max(1, sum(self._action_counts.values()))
        freq = {k: v / total_actions for k, v in sorted(self._action_counts.items())}
        return EpisodeMetrics(
            normalized_utility=norm_u,
            throughput_bps=self._bits_credited / elapsed,
            session_records=records,
            short_term=short_term,
            action_freq=freq,
            total_reward=self._total_reward,
            steps=self._steps,
            diagnostics={
                "expired_total": self._expired_total,
                "mean_scheduled": float(np.mean(self._sched_counts))
                if self._sched_counts else 0.0,
            },
        )
