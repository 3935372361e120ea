"""Hybrid precoding: antenna-selection analog stage + ZF/MMSE baseband.

The analog stage is a selection network: each antenna is routed to at most
one UE, with per-UE antenna counts fixed by the allocator. The baseband
stage zero-forces over the union of selected antennas. Three analog-stage
searches are provided: greedy antenna selection (AS), cross-entropy (CE),
and adaptive cross-entropy (ACE, elite weights proportional to sum-rate).

Every returned matrix satisfies the per-antenna gain budget
sum_k |p^m_k| <= 1 after `normalize_gain`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import rate, sinr

GAIN_TOL = 1e-9
ZF_RIDGE = 1e-6
_Q_FLOOR = 1e-4


@dataclass
class CeSearchParams:
    n_candidates: int = 64
    n_elites: int = 8
    n_iterations: int = 8
    smoothing: float = 0.7

    def validate(self) -> "CeSearchParams":
        if self.n_candidates < 1 or self.n_iterations < 1:
            raise ValueError("n_candidates and n_iterations must be >= 1")
        if not 0 <= self.n_elites < self.n_candidates:
            raise ValueError("need 0 <= n_elites < n_candidates")
        if not 0.0 < self.smoothing <= 1.0:
            raise ValueError("smoothing must be in (0, 1]")
        return self


@dataclass
class AnalogAssignment:
    """Antenna -> UE-column routing; -1 marks an unused antenna."""

    antenna_to_col: np.ndarray  # (M,) int
    counts: np.ndarray  # (K,) int, antennas per UE column

    @property
    def selected(self) -> np.ndarray:
        return np.flatnonzero(self.antenna_to_col >= 0)


@dataclass
class PrecodingMatrix:
    entries: np.ndarray  # (M, K) complex
    column_ues: list | None = None
    regularized: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def n_served(self) -> int:
        return self.entries.shape[1]


def _check_counts(h: np.ndarray, counts) -> np.ndarray:
    counts = np.asarray(counts, dtype=int)
    k, m = h.shape
    if counts.shape != (k,):
        raise ValueError(f"counts shape {counts.shape} does not match {k} UE rows")
    if np.any(counts < 1):
        raise ValueError("every served UE needs at least one antenna")
    if counts.sum() > m:
        raise ValueError(f"allocation {counts.sum()} exceeds {m} antennas (allocator bug)")
    return counts


def greedy_selection(h: np.ndarray, counts) -> AnalogAssignment:
    """Assign antennas greedily by largest |h_{k,m}| while UE k has budget."""
    counts = _check_counts(h, counts)
    k, m = h.shape
    gains = np.abs(h).astype(float)
    budget = counts.copy()
    owner = np.full(m, -1, dtype=int)
    for _ in range(int(counts.sum())):
        masked = np.where((budget > 0)[:, None], gains, -np.inf)
        flat = int(np.argmax(masked))
        row, col = divmod(flat, m)
        owner[col] = row
        budget[row] -= 1
        gains[:, col] = -np.inf
    return AnalogAssignment(antenna_to_col=owner, counts=counts)


def zf_baseband(h_eff: np.ndarray, ridge: float = ZF_RIDGE):
    """Zero-forcing digital stage: Moore-Penrose pseudo-inverse of h_eff.

    Rank-deficient effective channels fall back to a Tikhonov-regularized
    inverse; the second return value flags that path.
    """
    h_eff = np.asarray(h_eff)
    k = h_eff.shape[0]
    if np.linalg.matrix_rank(h_eff) < k:
        gram = h_eff @ h_eff.conj().T
        b = h_eff.conj().T @ np.linalg.inv(gram + ridge * np.eye(k))
        return b, True
    return np.linalg.pinv(h_eff), False


def mmse_baseband(h_eff: np.ndarray, rho: float, sigma2: float):
    """Regularized inverse with the noise-to-power loading of linear MMSE."""
    h_eff = np.asarray(h_eff)
    k = h_eff.shape[0]
    load = sigma2 * k / max(rho, 1e-30)
    gram = h_eff @ h_eff.conj().T
    return h_eff.conj().T @ np.linalg.inv(gram + load * np.eye(k))


def normalize_gain(p: np.ndarray) -> np.ndarray:
    """Scale by the smallest global factor enforcing sum_k |p^m_k| <= 1 per antenna."""
    p = np.asarray(p)
    if p.size == 0:
        return p
    worst = float(np.abs(p).sum(axis=1).max())
    if worst > 1.0:
        return p / worst
    return p


def per_antenna_gain(p: np.ndarray) -> np.ndarray:
    return np.abs(np.asarray(p)).sum(axis=1)


def sum_rate(h: np.ndarray, p: np.ndarray, rho: float, sigma2: float, w: float) -> float:
    """Sum of per-UE Shannon rates; the elite score for CE/ACE."""
    return float(rate(sinr(h, p, rho, sigma2), w).sum())


def build_precoder(h: np.ndarray, assignment: AnalogAssignment, digital: str = "zf",
                   rho: float | None = None, sigma2: float | None = None,
                   column_ues=None) -> PrecodingMatrix:
    """Assemble the full M x K matrix for an analog assignment."""
    k, m = h.shape
    sel = assignment.selected
    if sel.size == 0:
        raise ValueError("assignment selects no antennas")
    h_eff = h[:, sel]
    if digital == "mmse":
        b = mmse_baseband(h_eff, rho, sigma2)
        regularized = False
    elif digital == "zf":
        b, regularized = zf_baseband(h_eff)
    else:
        raise ValueError(f"unknown digital stage '{digital}'")
    p = np.zeros((m, k), dtype=complex)
    p[sel, :] = b
    p = normalize_gain(p)
    return PrecodingMatrix(entries=p, column_ues=list(column_ues) if column_ues else None,
                           regularized=regularized,
                           meta={"digital": digital, "selected": sel})


def precode_as(h: np.ndarray, counts, column_ues=None, digital: str = "zf",
               rho: float | None = None, sigma2: float | None = None) -> PrecodingMatrix:
    """Greedy antenna selection followed by the digital stage."""
    assignment = greedy_selection(h, counts)
    pm = build_precoder(h, assignment, digital=digital, rho=rho, sigma2=sigma2,
                        column_ues=column_ues)
    pm.meta["method"] = "AS" if digital == "zf" else f"AS+{digital}"
    pm.meta["assignment"] = assignment
    return pm


def _sample_assignments(q: np.ndarray, counts: np.ndarray, n: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Draw n assignments respecting per-UE counts from preferences q (M x K).

    Weighted sampling without replacement per UE column via the Gumbel
    top-k trick, batched over candidates. Returns (n, M) owner arrays.
    """
    m, k = q.shape
    keys = np.log(q.T)[None, :, :] + rng.gumbel(size=(n, k, m))
    owner = np.full((n, m), -1, dtype=int)
    free = np.ones((n, m), dtype=bool)
    rows = np.arange(n)
    for col in range(k):
        take = int(counts[col])
        masked = np.where(free, keys[:, col, :], -np.inf)
        pick = np.argpartition(-masked, take - 1, axis=1)[:, :take]
        flat_rows = np.repeat(rows, take)
        owner[flat_rows, pick.ravel()] = col
        free[flat_rows, pick.ravel()] = False
    return owner


def _score_assignments(h: np.ndarray, owners: np.ndarray, rho: float,
                       sigma2: float, w: float) -> np.ndarray:
    """Batched ZF sum-rate of candidate assignments.

    With an exact zero-forcing baseband, cross terms vanish and every UE
    sees h_k.p_k = 1/s after the per-antenna gain normalization by s, so
    the sum-rate reduces to K*W*log2(1 + rho/(K*sigma2*s^2)).
    """
    k, m = h.shape
    n, s_count = owners.shape[0], int((owners[0] >= 0).sum())
    sel = np.argsort(owners < 0, axis=1, kind="stable")[:, :s_count]  # (n, S)
    h_eff = np.moveaxis(h[:, sel], 1, 0)  # (n, K, S)
    gram = h_eff @ h_eff.conj().transpose(0, 2, 1)
    try:
        inv = np.linalg.inv(gram)
    except np.linalg.LinAlgError:
        ridge = ZF_RIDGE * np.eye(k)
        inv = np.linalg.inv(gram + ridge)
    b = h_eff.conj().transpose(0, 2, 1) @ inv  # (n, S, K)
    row_gain = np.abs(b).sum(axis=2)
    s_norm = np.maximum(row_gain.max(axis=1), 1.0)
    per_ue_sinr = rho / (k * sigma2 * s_norm**2)
    return k * w * np.log2(1.0 + per_ue_sinr)


def _cross_entropy_search(h, counts, params: CeSearchParams, seed, rho, sigma2, w,
                          adaptive: bool, column_ues=None) -> PrecodingMatrix:
    counts = _check_counts(h, counts)
    params.validate()
    k, m = h.shape
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    q = np.full((m, k), 1.0 / m)
    best_score = -np.inf
    best_owner = None
    curve = []
    for _ in range(params.n_iterations):
        owners = _sample_assignments(q, counts, params.n_candidates, rng)
        scores = _score_assignments(h, owners, rho, sigma2, w)
        top = int(np.argmax(scores))
        if scores[top] > best_score:
            best_score = float(scores[top])
            best_owner = owners[top].copy()
        elite_idx = np.argsort(-scores, kind="stable")[: params.n_elites]
        if len(elite_idx) > 0:
            if adaptive:
                elite_scores = scores[elite_idx]
                total = elite_scores.sum()
                weights = (elite_scores / total if total > 0
                           else np.full(len(elite_idx), 1.0 / len(elite_idx)))
            else:
                weights = np.full(len(elite_idx), 1.0 / len(elite_idx))
            q_fit = np.zeros_like(q)
            for wgt, ci in zip(weights, elite_idx):
                owner = owners[ci]
                used = owner >= 0
                q_fit[np.flatnonzero(used), owner[used]] += wgt
            q = params.smoothing * q_fit + (1.0 - params.smoothing) * q
            q = np.maximum(q, _Q_FLOOR)
            q = q / q.sum(axis=0, keepdims=True)
        curve.append(best_score)
    best_assignment = AnalogAssignment(antenna_to_col=best_owner, counts=counts)
    pm = build_precoder(h, best_assignment, column_ues=column_ues)
    pm.meta["method"] = "ACE" if adaptive else "CE"
    pm.meta["assignment"] = best_assignment
    pm.meta["best_sum_rate"] = best_score
    pm.meta["best_curve"] = curve
    return pm


def precode_ce(h, counts, params: CeSearchParams, seed, rho, sigma2, w,
               column_ues=None) -> PrecodingMatrix:
    """Cross-entropy search over analog assignments, uniform elite weights."""
    return _cross_entropy_search(h, counts, params, seed, rho, sigma2, w,
                                 adaptive=False, column_ues=column_ues)


def precode_ace(h, counts, params: CeSearchParams, seed, rho, sigma2, w,
                column_ues=None) -> PrecodingMatrix:
    """CE variant weighting elites by their achieved sum-rate."""
    return _cross_entropy_search(h, counts, params, seed, rho, sigma2, w,
                                 adaptive=True, column_ues=column_ues)


def precode(method: str, h, counts, params: CeSearchParams, seed, rho, sigma2, w,
            column_ues=None) -> PrecodingMatrix:
    """Dispatch on the precoder token: AS, CE, ACE, or MMSE (AS analog + MMSE)."""
    method = method.upper()
    if method == "AS":
        return precode_as(h, counts, column_ues=column_ues)
    if method == "CE":
        return precode_ce(h, counts, params, seed, rho, sigma2, w, column_ues)
    if method == "ACE":
        return precode_ace(h, counts, params, seed, rho, sigma2, w, column_ues)
    if method == "MMSE":
        return precode_as(h, counts, column_ues=column_ues, digital="mmse",
                          rho=rho, sigma2=sigma2)
    raise ValueError(f"unknown precoder '{method}'")
