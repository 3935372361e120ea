"""UE topology, per-TTI channel realizations, SINR, rate, and CQI feedback.

The channel substitutes a log-distance path-loss law with temporally
correlated Rayleigh fading (AR(1) across TTIs) for a measured channel
model. Entry (k, m) of the channel matrix is sqrt(pathloss(d_k)) * g_{k,m}
where g is unit-average-power complex Gaussian.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 2.998e8
THERMAL_NOISE_DBM_HZ = -174.0

CQI_MIN_DB = -6.0
CQI_STEP_DB = 2.0
CQI_MAX = 15


@dataclass
class Topology:
    """UE drop: positions in meters relative to the BS at the origin."""

    positions: np.ndarray  # (K, 2)
    radius: float

    @property
    def n_ues(self) -> int:
        return self.positions.shape[0]

    def distances(self) -> np.ndarray:
        return np.linalg.norm(self.positions, axis=1)


def generate_topology(seed: int, radius: float, k_total: int) -> Topology:
    """Drop k_total UEs uniformly on a disk (PPP conditioned on the count)."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    if k_total < 1:
        raise ValueError("k_total must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x70D0]))
    r = radius * np.sqrt(rng.uniform(size=k_total))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=k_total)
    pos = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    return Topology(positions=pos, radius=float(radius))


def pathloss_db(distance_m, exponent: float, carrier_hz: float, ref_m: float = 1.0):
    """Log-distance path loss: free-space loss at ref_m plus 10*n*log10(d/ref)."""
    d = np.maximum(np.asarray(distance_m, dtype=float), ref_m)
    pl_ref = 20.0 * np.log10(4.0 * np.pi * ref_m * carrier_hz / SPEED_OF_LIGHT)
    return pl_ref + 10.0 * exponent * np.log10(d / ref_m)


def pathloss_gain(distance_m, exponent: float, carrier_hz: float, ref_m: float = 1.0):
    return 10.0 ** (-pathloss_db(distance_m, exponent, carrier_hz, ref_m) / 10.0)


def noise_power_w(bandwidth_hz: float, noise_figure_db: float) -> float:
    """Thermal noise power over the system bandwidth, in watts."""
    dbm = THERMAL_NOISE_DBM_HZ + 10.0 * np.log10(bandwidth_hz) + noise_figure_db
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass
class ChannelMatrix:
    entries: np.ndarray  # (K_r, M) complex
    tti: int
    ue_ids: list = field(default_factory=list)

    def row_of(self, ue_id: int) -> np.ndarray:
        return self.entries[self.ue_ids.index(ue_id)]


class ChannelProcess:
    """Per-UE AR(1) fading over a fixed topology.

    The innovation for (ue, tti) is drawn from a counter-style generator
    keyed on (seed, ue, tti), so realizations are reproducible
    byte-for-byte for a fixed seed and call sequence. The AR(1) state is
    owned by one environment instance and must not be shared.
    """

    def __init__(self, topology: Topology, exponent: float, carrier_hz: float,
                 ar1_coeff: float, seed: int, ref_m: float = 1.0):
        if not 0.0 <= ar1_coeff < 1.0:
            raise ValueError("ar1_coeff must be in [0, 1)")
        self.topology = topology
        self.rho_ch = float(ar1_coeff)
        self.seed = int(seed)
        self._amp = np.sqrt(
            pathloss_gain(topology.distances(), exponent, carrier_hz, ref_m)
        )
        self._gain: dict[int, np.ndarray] = {}

    def _innovation(self, ue: int, tti: int, m: int) -> np.ndarray:
        rng = np.random.default_rng(
            np.random.SeedSequence([self.seed, int(ue), int(tti)])
        )
        w = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        return w / np.sqrt(2.0)

    def realize(self, active_ues, tti: int, m: int) -> ChannelMatrix:
        ues = list(active_ues)
        if not ues:
            raise ValueError("active_ues must be non-empty")
        rows = np.empty((len(ues), m), dtype=complex)
        sqrt_innov = np.sqrt(1.0 - self.rho_ch**2)
        for i, ue in enumerate(ues):
            if not 0 <= ue < self.topology.n_ues:
                raise ValueError(f"unknown UE id {ue}")
            w = self._innovation(ue, tti, m)
            prev = self._gain.get(ue)
            g = w if prev is None else self.rho_ch * prev + sqrt_innov * w
            self._gain[ue] = g
            rows[i] = self._amp[ue] * g
        return ChannelMatrix(entries=rows, tti=tti, ue_ids=ues)

    def drop(self, ue: int):
        """Forget the fading state of a departed UE."""
        self._gain.pop(ue, None)


def sinr(h: np.ndarray, p: np.ndarray, rho: float, sigma2: float) -> np.ndarray:
    """Per-UE linear SINR for channel rows h (K x M) and precoder p (M x K).

    SINR_k = (rho/K)|h_k.p_k|^2 / (sigma2 + (rho/K) sum_{j!=k} |h_k.p_j|^2)
    with K the number of served UEs (power split evenly).
    """
    h = np.asarray(h)
    p = np.asarray(p)
    if h.ndim != 2 or p.ndim != 2:
        raise ValueError("h and p must be 2-D arrays")
    if h.shape[1] != p.shape[0] or h.shape[0] != p.shape[1]:
        raise ValueError(
            f"dimension mismatch: h is {h.shape}, p is {p.shape} "
            "(need h (K,M) and p (M,K))"
        )
    k = h.shape[0]
    cross = np.abs(h @ p) ** 2  # cross[i, j] = |h_i . p_j|^2
    scale = rho / k
    signal = scale * np.diag(cross)
    interference = scale * (cross.sum(axis=1) - np.diag(cross))
    return signal / (sigma2 + interference)


def rate(sinr_linear, bandwidth_hz: float):
    """Shannon rate W*log2(1 + SINR) in bits/s (base-2: thresholds are in bits)."""
    s = np.asarray(sinr_linear, dtype=float)
    if np.any(s < 0):
        raise ValueError("SINR must be non-negative")
    out = bandwidth_hz * np.log2(1.0 + s)
    return float(out) if np.ndim(sinr_linear) == 0 else out


def cqi_map(sinr_db):
    """Quantize SINR in dB to a 0..15 CQI with 2 dB steps from -6 dB."""
    s = np.asarray(sinr_db, dtype=float)
    level = np.floor((s - CQI_MIN_DB) / CQI_STEP_DB) + 1.0
    out = np.clip(level, 0, CQI_MAX).astype(int)
    return int(out) if np.ndim(sinr_db) == 0 else out
