"""UE prioritizers, antenna allocators, and simplified literature baselines.

All sorting is deterministic: ties break by ascending UE id. Allocators
never exceed the antenna budget M. Rate-vs-antennas decisions made before
precoding use an interference-free beamforming proxy exposed through
`RateEstimator`, so the proxy can be swapped without touching allocators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .actions import AllocMethod, Prioritizer
from .traffic import UeSession


class RateEstimator:
    """Pre-precoding rate proxy: W*log2(1 + rho*N*|h_k|^2 / (M*sigma2*n_active)).

    Monotone non-decreasing in the antenna count N, which is all the
    allocators rely on.
    """

    def __init__(self, h_norm_sq: dict[int, float], rho: float, sigma2: float,
                 m: int, n_active: int, bandwidth_hz: float):
        self.h_norm_sq = h_norm_sq
        self.rho = rho
        self.sigma2 = sigma2
        self.m = m
        self.n_active = max(1, n_active)
        self.w = bandwidth_hz

    def rate(self, ue: int, n: int) -> float:
        if n <= 0:
            return 0.0
        snr = self.rho * n * self.h_norm_sq[ue] / (self.m * self.sigma2 * self.n_active)
        return self.w * math.log2(1.0 + snr)


@dataclass
class SchedulingContext:
    """Per-TTI view the schedulers operate on."""

    tti: int
    m: int
    tti_seconds: float
    sessions: dict[int, UeSession]  # all active sessions, keyed by UE id
    cqi: dict[int, int]
    estimator: RateEstimator
    pf_history: dict[int, float]
    pf_floor: float = 1e3

    def backlogged(self) -> list[int]:
        return sorted(ue for ue, s in self.sessions.items() if s.queue)

    def pf_ratio(self, ue: int) -> float:
        inst = self.estimator.rate(ue, 1)
        hist = max(self.pf_history.get(ue, self.pf_floor), self.pf_floor)
        return inst / hist


def prioritize(method: Prioritizer, ctx: SchedulingContext) -> list[int]:
    """Order backlogged UEs by the method's key; ties by ascending UE id."""
    ues = ctx.backlogged()
    if method is Prioritizer.CQI:
        key = lambda ue: (-ctx.cqi.get(ue, 0), ue)
    elif method is Prioritizer.DELAY:
        key = lambda ue: (ctx.sessions[ue].head_deadline() - ctx.tti, ue)
    elif method is Prioritizer.REMAIN:
        key = lambda ue: (-ctx.sessions[ue].remaining_packets(), ue)
    elif method is Prioritizer.FIFO:
        key = lambda ue: (ctx.sessions[ue].earliest_arrival(), ue)
    else:
        raise ValueError(f"unknown prioritizer {method}")
    return sorted(ues, key=key)


def n_fullsatisfy(session: UeSession, estimator: RateEstimator,
                  tti_seconds: float, m: int) -> tuple[int, bool]:
    """Smallest antenna count that clears the UE's queued bits in one TTI.

    Binary search over the monotone estimator; returns (M, True) when even
    the full array cannot satisfy the backlog.
    """
    need = session.backlog_bits()
    if need <= 0:
        return 0, False
    ue = session.ue_id
    if estimator.rate(ue, m) * tti_seconds < need:
        return m, True
    lo, hi = 1, m
    while lo < hi:
        mid = (lo + hi) // 2
        if estimator.rate(ue, mid) * tti_seconds >= need:
            hi = mid
        else:
            lo = mid + 1
    return lo, False


def _fso_walk(order, ctx: SchedulingContext, budget: int, alloc: dict[int, int]):
    for ue in order:
        if budget <= 0:
            break
        nfs, _ = n_fullsatisfy(ctx.sessions[ue], ctx.estimator, ctx.tti_seconds, ctx.m)
        grant = min(nfs, budget)
        if grant >= 1:
            alloc[ue] = alloc.get(ue, 0) + grant
            budget -= grant
    return budget


def allocate_fso(o_t: list[int], ctx: SchedulingContext) -> dict[int, int]:
    """Fully satisfy UEs in priority order until the antenna budget runs out."""
    alloc: dict[int, int] = {}
    _fso_walk(o_t, ctx, ctx.m, alloc)
    return alloc


def allocate_ming(o_t: list[int], ctx: SchedulingContext, iota: float) -> dict[int, int]:
    """Even minimum-guarantee share for a head subset of O_t, FSO for the rest.

    The guaranteed subset size is floor(iota*M / min N^fs), clamped to
    [1, |O_t|]; each guaranteed UE receives the minimum full-satisfy count.
    """
    if not o_t:
        return {}
    nfs = {}
    for ue in o_t:
        n, _ = n_fullsatisfy(ctx.sessions[ue], ctx.estimator, ctx.tti_seconds, ctx.m)
        nfs[ue] = n
    positive = [n for n in nfs.values() if n > 0]
    if not positive:
        return {}
    g = min(positive)
    n_guaranteed = int(iota * ctx.m / g)
    n_guaranteed = max(1, min(n_guaranteed, len(o_t)))
    alloc: dict[int, int] = {}
    budget = ctx.m
    for ue in o_t[:n_guaranteed]:
        grant = min(g, budget)
        if grant >= 1:
            alloc[ue] = grant
            budget -= grant
    _fso_walk(o_t[n_guaranteed:], ctx, budget, alloc)
    return alloc


def largest_remainder(weights: np.ndarray, total: int) -> np.ndarray:
    """Apportion `total` units proportionally to weights, each share >= 1.

    Conserves the total exactly whenever len(weights) <= total.
    """
    weights = np.asarray(weights, dtype=float)
    n = len(weights)
    if n == 0:
        return np.zeros(0, dtype=int)
    wsum = weights.sum()
    if wsum <= 0:
        weights = np.ones(n)
        wsum = float(n)
    quota = total * weights / wsum
    shares = np.floor(quota).astype(int)
    frac = quota - shares
    leftover = total - shares.sum()
    for i in np.lexsort((np.arange(n), -frac))[:leftover]:
        shares[i] += 1
    # enforce the minimum of one antenna per scheduled UE
    while np.any(shares == 0) and shares.max() > 1:
        shares[int(np.argmax(shares == 0))] += 1
        shares[int(np.argmax(shares))] -= 1
    return shares


def allocate_pf(o_t: list[int], ctx: SchedulingContext, iota: float) -> dict[int, int]:
    """Proportional-fair: top ceil(iota*|O_t|) UEs share M by rate/history ratio."""
    if not o_t:
        return {}
    n_sched = min(math.ceil(iota * len(o_t)), ctx.m)
    subset = o_t[:n_sched]
    weights = np.array([ctx.pf_ratio(ue) for ue in subset])
    shares = largest_remainder(weights, ctx.m)
    return {ue: int(s) for ue, s in zip(subset, shares) if s >= 1}


def allocate(method: AllocMethod, o_t: list[int], ctx: SchedulingContext) -> dict[int, int]:
    if method.kind == "FSO":
        return allocate_fso(o_t, ctx)
    if method.kind == "MinG":
        return allocate_ming(o_t, ctx, method.iota)
    if method.kind == "PF":
        return allocate_pf(o_t, ctx, method.iota)
    raise ValueError(f"unknown allocator {method}")


def update_pf_history(ctx_history: dict[int, float], phi: dict[int, float],
                      active_ues, beta: float):
    """Moving-average throughput history; unscheduled UEs decay toward zero."""
    for ue in active_ues:
        prev = ctx_history.get(ue, 0.0)
        ctx_history[ue] = (1.0 - beta) * prev + beta * phi.get(ue, 0.0)


# --- simplified literature baselines -------------------------------------
#
# Each returns (ordered UE set, allocation, precoder token, label). These are
# documented simplifications of the published systems, reduced to the parts
# compatible with this simulator's antenna-allocation pipeline.


def baseline_orfa(ctx: SchedulingContext):
    """PF ranking + discrete water-filling on marginal rates + MMSE baseband."""
    ues = ctx.backlogged()
    if not ues:
        return [], {}, "MMSE", "ORFA (simplified)"
    order = sorted(ues, key=lambda ue: (-ctx.pf_ratio(ue), ue))
    scheduled = order[: min(len(order), ctx.m)]
    grants = {ue: 0 for ue in scheduled}
    est = ctx.estimator
    for _ in range(ctx.m):
        # highest marginal rate wins; exact ties rotate to the least-served UE
        best_ue, best_key = None, None
        for ue in scheduled:
            gain = est.rate(ue, grants[ue] + 1) - est.rate(ue, grants[ue])
            if gain <= 0.0:
                continue
            key = (-gain, grants[ue], ue)
            if best_key is None or key < best_key:
                best_ue, best_key = ue, key
        if best_ue is None:
            break
        grants[best_ue] += 1
    alloc = {ue: n for ue, n in grants.items() if n >= 1}
    o_t = [ue for ue in order if ue in alloc]
    return o_t, alloc, "MMSE", "ORFA (simplified)"


def _ublaa_need_bits(s: UeSession, tti_seconds: float) -> float:
    need = s.backlog_bits()
    if s.ttype.has_gbr:
        target = s.ttype.gbr_bps * (s.active_ttis + 1)
        need += max(0.0, target - s.sum_phi_bps) * tti_seconds
    return need


def baseline_ublaa(ctx: SchedulingContext):
    """Greedy antenna-by-antenna grants by marginal utility toward QoS deficits.

    The marginal utility of one more antenna is the additional deliverable
    bits toward the UE's backlog/GBR deficit, weighted by how close the UE
    is to violating its loss bound.
    """
    ues = ctx.backlogged()
    if not ues:
        return [], {}, "AS", "UBLAA (simplified)"
    est = ctx.estimator
    need = {ue: _ublaa_need_bits(ctx.sessions[ue], ctx.tti_seconds) for ue in ues}

    def urgency(ue: int) -> float:
        s = ctx.sessions[ue]
        loss_now = s.expired / s.total_generated if s.total_generated else 0.0
        headroom = max(s.ttype.error_rate - loss_now, 1e-6)
        return 1.0 / headroom

    grants = {ue: 0 for ue in ues}
    first_grant: dict[int, int] = {}
    for step in range(ctx.m):
        best_ue, best_mu = None, 0.0
        for ue in ues:
            n = grants[ue]
            gained = (min(est.rate(ue, n + 1) * ctx.tti_seconds, need[ue])
                      - min(est.rate(ue, n) * ctx.tti_seconds, need[ue]))
            mu = urgency(ue) * gained
            if mu > best_mu + 1e-12:
                best_ue, best_mu = ue, mu
        if best_ue is None:
            break
        if grants[best_ue] == 0:
            first_grant[best_ue] = step
        grants[best_ue] += 1
    alloc = {ue: n for ue, n in grants.items() if n >= 1}
    o_t = sorted(alloc, key=lambda ue: (first_grant[ue], ue))
    return o_t, alloc, "AS", "UBLAA (simplified)"


def baseline_lwdf_pf(ctx: SchedulingContext):
    """Weighted-delay x PF-ratio ranking with an even split over top UEs."""
    ues = ctx.backlogged()
    if not ues:
        return [], {}, "ACE", "LWDF-PF (simplified)"

    def key(ue: int):
        margin = max(1, ctx.sessions[ue].head_deadline() - ctx.tti)
        return (-(ctx.pf_ratio(ue) / margin), ue)

    order = sorted(ues, key=key)
    n = min(len(order), ctx.m)
    top = order[:n]
    base, rem = divmod(ctx.m, n)
    alloc = {ue: base + (1 if i < rem else 0) for i, ue in enumerate(top)}
    alloc = {ue: cnt for ue, cnt in alloc.items() if cnt >= 1}
    o_t = [ue for ue in top if ue in alloc]
    return o_t, alloc, "ACE", "LWDF-PF (simplified)"


BASELINES = {
    "orfa": baseline_orfa,
    "ublaa": baseline_ublaa,
    "lwdf-pf": baseline_lwdf_pf,
}
