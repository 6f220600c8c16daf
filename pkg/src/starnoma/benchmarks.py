"""Comparison schemes: orthogonal-access baselines and the conventional
two-surface RIS restriction."""

from __future__ import annotations

import numpy as np

from .bte import BteSolution, PenaltySchedule, optimize_long_term
from .channel import REGION_R, REGION_T, ChannelRealization, StatisticalCsi
from .coefficients import SurfacePartition, align_phases, partition_to_coefficients
from .noma import (NomaConfig, PowerAllocation, RateReport, adjusted_rates,
                   outage_report)
from .pte import aligned_gains, partition_search


def fdma_rates(realization: ChannelRealization, partition: SurfacePartition,
               cfg: NomaConfig) -> tuple[PowerAllocation, RateReport]:
    """Orthogonal frequency access with the partition-protocol surface setup.

    Each user gets a 1/K band with per-band noise sigma^2/K.  Powers meet the
    targets minimally on the aligned (allocation-side) gains with the
    remainder to user 1; reported rates use the realized channels.
    """
    k_total = realization.n_users
    overhead = partition.n_assigned + k_total
    if overhead >= cfg.t_coherence:
        return PowerAllocation(np.zeros(k_total), False, cfg.p_max), outage_report(k_total, overhead)
    phases = align_phases(realization, partition)
    approx = aligned_gains(realization, partition) ** 2
    band_noise = cfg.sigma2 / k_total
    p_min = (2.0 ** (k_total * cfg.gamma) - 1.0) * band_noise / approx
    if p_min.sum() > cfg.p_max:
        return PowerAllocation(np.zeros(k_total), False, cfg.p_max), outage_report(k_total, overhead)
    p = p_min.copy()
    p[0] += cfg.p_max - p_min.sum()
    coeffs = partition_to_coefficients(partition, phases)
    regions = realization.user_regions
    realized = np.abs([realization.h[k] + realization.w[k] @ coeffs.for_region(regions[k])
                       for k in range(k_total)]) ** 2
    rates = np.log2(1.0 + p * realized / band_noise) / k_total
    pa = PowerAllocation(p, True, float(cfg.p_max - p.sum()))
    return pa, adjusted_rates(rates, overhead, cfg.t_coherence)


def tdma_rates(realization: ChannelRealization, cfg: NomaConfig) -> RateReport:
    """Orthogonal time access: each user is served alone for 1/K of the block
    with the whole surface in its region's mode and phases aligned to it,
    at full transmit power.  Training costs M + 1 symbols per sub-block."""
    k_total = realization.n_users
    m = realization.n_elements
    overhead = k_total * (m + 1)
    if overhead >= cfg.t_coherence:
        return outage_report(k_total, overhead)
    mags = np.abs(realization.h) + np.abs(realization.w).sum(axis=1)
    rates = np.log2(1.0 + cfg.p_max * mags ** 2 / cfg.sigma2) / k_total
    return adjusted_rates(rates, overhead, cfg.t_coherence)


def cr_mode_mask(m_elements: int) -> np.ndarray:
    """Fixed half-and-half mode split of the conventional two-surface setup."""
    if m_elements % 2:
        raise ValueError("the conventional-RIS benchmark needs an even element count")
    mask = np.empty(m_elements, dtype="<U1")
    mask[: m_elements // 2] = REGION_T
    mask[m_elements // 2:] = REGION_R
    return mask


def cr_noma(scsi: StatisticalCsi, cfg: NomaConfig, protocol: str,
            sched: PenaltySchedule | None = None):
    """Conventional RIS-aided NOMA: one transmit-only and one reflect-only
    surface of M/2 elements each.

    For the statistical-beamforming protocol the element modes are frozen to
    the half split and the penalty optimizer tunes the rest; for the
    partition protocol the search runs within each half.  Returns the same
    long-term object as the corresponding protocol.
    """
    m = scsi.n_elements
    if m % 2:
        raise ValueError("the conventional-RIS benchmark needs an even element count")
    if protocol == "bte":
        return optimize_long_term(scsi, cfg, sched, mode_mask=cr_mode_mask(m))
    if protocol == "pte":
        capacity = {REGION_T: m // 2, REGION_R: m // 2}
        partition, _ = partition_search(scsi, cfg, region_capacity=capacity)
        return partition
    raise ValueError("protocol must be 'bte' or 'pte'")
