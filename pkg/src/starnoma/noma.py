"""Decoding order, SIC rates, closed-form power allocation, overhead accounting.

Rates follow the downlink SIC convention consistent with the closed-form
allocation: user k (sorted, index 0 strongest) cancels all weaker users'
signals and is interfered only by the stronger users j < k, through its own
channel gain:

    R_k = log2(1 + p_k g_k / (g_k * sum_{j<k} p_j + sigma^2)).

Under this convention the back-substitution allocation meets every target
rate of users 2..K with equality and uses full power.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import SystemGeometry


class InfeasibleProblemError(RuntimeError):
    """Raised when a long-term problem admits no feasible solution."""


@dataclass(frozen=True)
class NomaConfig:
    """Transmit power budget, noise, per-user rate targets, coherence length."""

    p_max: float
    sigma2: float
    gamma: np.ndarray               # (K,) bps/Hz targets, in decoding order
    t_coherence: float
    decoding_order: np.ndarray = field(default=None)  # permutation, default identity

    def __post_init__(self):
        object.__setattr__(self, "gamma", np.asarray(self.gamma, dtype=float))
        if self.p_max <= 0 or self.sigma2 <= 0:
            raise ValueError("p_max and sigma2 must be positive")
        if np.any(self.gamma < 0):
            raise ValueError("rate targets must be non-negative")
        if self.t_coherence <= 0:
            raise ValueError("t_coherence must be positive")
        if self.decoding_order is None:
            object.__setattr__(self, "decoding_order", np.arange(len(self.gamma)))
        else:
            order = np.asarray(self.decoding_order, dtype=int)
            if sorted(order.tolist()) != list(range(len(self.gamma))):
                raise ValueError("decoding_order must be a permutation of 0..K-1")
            object.__setattr__(self, "decoding_order", order)

    @property
    def n_users(self) -> int:
        return len(self.gamma)


@dataclass(frozen=True)
class PowerAllocation:
    """Per-user NOMA powers with feasibility verdict; zeros when infeasible."""

    p: np.ndarray
    feasible: bool
    slack: float

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))


@dataclass(frozen=True)
class RateReport:
    """Raw and overhead-adjusted per-user rates (bps/Hz)."""

    per_user_rate: np.ndarray
    per_user_adjusted: np.ndarray
    sum_adjusted: float
    overhead_symbols: float


def decoding_order(geo: SystemGeometry) -> np.ndarray:
    """Permutation sorting users by ascending BS distance (strongest first)."""
    d = geo.bs_user_distances()
    if np.unique(d).size != d.size:
        raise ValueError("tied BS-user distances: perturb the geometry")
    return np.argsort(d)


def sic_rates(gains: np.ndarray, p: np.ndarray, sigma2: float) -> np.ndarray:
    """Per-user SIC rates for gains/powers sorted by decoding order."""
    gains = np.asarray(gains, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(gains <= 0):
        raise ValueError("channel power gains must be positive")
    interf = gains * np.concatenate(([0.0], np.cumsum(p)[:-1]))
    return np.log2(1.0 + p * gains / (interf + sigma2))


def optimal_power_allocation(gains: np.ndarray, cfg: NomaConfig) -> PowerAllocation:
    """Back-substitution allocation: targets met exactly for users 2..K,
    remaining power to user 1; infeasibility reported via the flag."""
    gains = np.asarray(gains, dtype=float)
    if np.any(gains <= 0):
        raise ValueError("channel power gains must be positive")
    k_total = len(gains)
    thresholds = 2.0 ** cfg.gamma
    p = np.zeros(k_total)
    for k in range(k_total - 1, 0, -1):
        c = (thresholds[k] - 1.0) / thresholds[k]
        p[k] = c * (cfg.p_max - p[k + 1:].sum() + cfg.sigma2 / gains[k])
    p[0] = cfg.p_max - p[1:].sum()
    feasible = bool(np.all(p[1:] > 0.0) and
                    p[0] >= (thresholds[0] - 1.0) * cfg.sigma2 / gains[0])
    if not feasible:
        return PowerAllocation(np.zeros(k_total), False, cfg.p_max)
    return PowerAllocation(p, True, float(cfg.p_max - p.sum()))


def adjusted_rates(raw: np.ndarray, overhead: float, t_c: float) -> RateReport:
    """Scale rates by the training-overhead factor (1 - overhead / t_c)."""
    raw = np.asarray(raw, dtype=float)
    if not 0 <= overhead < t_c:
        raise ValueError("overhead must satisfy 0 <= overhead < t_coherence")
    factor = 1.0 - overhead / t_c
    adj = factor * raw
    return RateReport(raw, adj, float(adj.sum()), overhead)


def outage_report(n_users: int, overhead: float) -> RateReport:
    """All-zero report for blocks where the allocation is infeasible."""
    z = np.zeros(n_users)
    return RateReport(z, z, 0.0, overhead)
