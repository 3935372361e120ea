"""Traffic sessions: typed packet arrivals, deadline bookkeeping, QoS utility.

Six built-in traffic types mirror common 5QI-style applications. A session
owns a queue of pending packets; `deliver` credits transmitted bits in
earliest-deadline-first order, `expire` drops packets past their deadline,
and `utility` evaluates the all-or-nothing QoS verdict (loss bound, and the
guaranteed bit rate averaged over the session's active TTIs).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field


@dataclass(frozen=True)
class TrafficType:
    name: str
    application: str
    packet_bytes: int
    mean_arrival_ms: float
    latency_ms: float
    gbr_bps: float | None
    error_rate: float

    @property
    def has_gbr(self) -> bool:
        return self.gbr_bps is not None


TRAFFIC_TYPES: dict[str, TrafficType] = {
    "A": TrafficType("A", "VoIP", 200, 15.0, 100.0, 0.112e6, 1e-2),
    "B": TrafficType("B", "Video", 1250, 5.0, 150.0, 0.8e6, 1e-3),
    "C": TrafficType("C", "Online Game", 500, 8.0, 50.0, 0.72e6, 1e-3),
    "D": TrafficType("D", "VR/AR", 1250, 2.0, 10.0, None, 1e-6),
    "E": TrafficType("E", "Video Streaming", 1250, 10.0, 100.0, None, 1e-3),
    "F": TrafficType("F", "FTP", 1250, 6.0, 300.0, None, 1e-2),
}


@dataclass
class Packet:
    pid: int
    size_bytes: int
    arrival_tti: int
    deadline_tti: int
    bits_delivered: float = 0.0
    served_ttis: list = field(default_factory=list)
    status: str = "pending"

    @property
    def size_bits(self) -> float:
        return 8.0 * self.size_bytes


class UeSession:
    """One UE's traffic session: packet queue plus delivery/rate counters."""

    def __init__(self, ue_id: int, ttype: TrafficType, start_tti: int,
                 gen_end_tti: int, tti_seconds: float):
        self.ue_id = ue_id
        self.ttype = ttype
        self.start_tti = start_tti
        self.gen_end_tti = gen_end_tti
        self.tti_seconds = tti_seconds
        self.latency_ttis = max(1, int(round(ttype.latency_ms * 1e-3 / tti_seconds)))
        self.queue: deque[Packet] = deque()
        self.total_generated = 0
        self.delivered = 0  # nu: packets fully received in time
        self.expired = 0
        self.sum_phi_bps = 0.0  # cumulative realized rate over active TTIs
        self.active_ttis = 0
        self.bits_credited = 0.0
        self._next_pid = 0

    def backlog_bits(self) -> float:
        return sum(p.size_bits - p.bits_delivered for p in self.queue)

    def backlog_bytes(self) -> float:
        return self.backlog_bits() / 8.0

    def head_deadline(self) -> int | None:
        return self.queue[0].deadline_tti if self.queue else None

    def earliest_arrival(self) -> int | None:
        return self.queue[0].arrival_tti if self.queue else None

    def remaining_packets(self) -> int:
        """|D_k| - nu: generated packets not (yet) successfully received."""
        return self.total_generated - self.delivered

    def avg_rate_bps(self) -> float:
        return self.sum_phi_bps / self.active_ttis if self.active_ttis else 0.0

    def is_drained(self, tti: int) -> bool:
        """True once generation stopped and every packet is resolved."""
        return tti > self.gen_end_tti and not self.queue


def generate_arrivals(session: UeSession, tti: int, rng) -> list[Packet]:
    """Poisson arrivals for one TTI; each packet carries its type's deadline."""
    t = session.ttype
    if tti < session.start_tti or tti > session.gen_end_tti:
        return []
    if not math.isfinite(t.mean_arrival_ms):
        return []
    lam = (session.tti_seconds * 1e3) / t.mean_arrival_ms
    n = int(rng.poisson(lam))
    new = []
    for _ in range(n):
        pkt = Packet(
            pid=session._next_pid,
            size_bytes=t.packet_bytes,
            arrival_tti=tti,
            deadline_tti=tti + session.latency_ttis,
        )
        session._next_pid += 1
        session.total_generated += 1
        session.queue.append(pkt)
        new.append(pkt)
    return new


def deliver(session: UeSession, phi_bps: float, tti: int, tti_seconds: float) -> float:
    """Credit phi*T_I bits to queued packets in deadline order.

    Returns the bits actually consumed (transmitted) this TTI. The realized
    rate is appended to the session's rate history whether or not any data
    moved, so the GBR average spans every active TTI.
    """
    if phi_bps < 0:
        raise ValueError("phi must be non-negative")
    session.sum_phi_bps += phi_bps
    session.active_ttis += 1
    budget = phi_bps * tti_seconds
    used = 0.0
    while budget > 0 and session.queue:
        pkt = session.queue[0]
        need = pkt.size_bits - pkt.bits_delivered
        credit = min(need, budget)
        pkt.bits_delivered += credit
        budget -= credit
        used += credit
        pkt.served_ttis.append(tti)
        if pkt.bits_delivered >= pkt.size_bits:
            pkt.status = "delivered"
            session.queue.popleft()
            session.delivered += 1
        else:
            break
    session.bits_credited += used
    return used


def expire(session: UeSession, tti: int) -> int:
    """Drop pending packets whose deadline has passed; they count as losses."""
    dropped = 0
    while session.queue and session.queue[0].deadline_tti < tti:
        pkt = session.queue.popleft()
        pkt.status = "expired"
        session.expired += 1
        dropped += 1
    return dropped


def utility(session: UeSession) -> tuple[int, bool]:
    """All-or-nothing QoS verdict: (0 or 1, vacuous-flag).

    1 iff the loss ratio stays within the type's error bound and, for GBR
    types, the average realized rate over active TTIs meets the GBR.
    Latency enters through expiry: late packets never count as delivered.
    A session that generated nothing is vacuously satisfied (flagged).
    """
    if session.total_generated == 0:
        return 1, True
    loss = 1.0 - session.delivered / session.total_generated
    if loss > session.ttype.error_rate:
        return 0, False
    if session.ttype.has_gbr and session.avg_rate_bps() < session.ttype.gbr_bps:
        return 0, False
    return 1, False
