"""Long-term surface-partition protocol.

Step 1 finds the smallest per-user element counts that satisfy the
expected-gain decoding-order chain and the closed-form power-allocation
feasibility; step 2 greedily reassigns elements away from the strongest
user while the approximate sum-rate keeps improving.  The short-term step
aligns each subsurface to its owner's direct link and allocates powers on
the resulting aligned gains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, StatisticalCsi
from .coefficients import SurfacePartition, align_phases, partition_to_coefficients
from .expectations import expected_gain_pte, expected_rate_pte
from .noma import (InfeasibleProblemError, NomaConfig, PowerAllocation, RateReport,
                   adjusted_rates, optimal_power_allocation, outage_report, sic_rates)


@dataclass(frozen=True)
class PartitionSearchState:
    """One accepted refinement step."""

    counts: np.ndarray
    sum_rate: float
    powers: np.ndarray
    iteration: int


def partition_gains(scsi: StatisticalCsi, counts) -> np.ndarray:
    return np.array([expected_gain_pte(scsi, int(c), k) for k, c in enumerate(counts)])


def evaluate_partition(scsi: StatisticalCsi, cfg: NomaConfig, counts):
    """Expected gains, ordering/power feasibility, and the approximate
    adjusted sum-rate of a counts vector (overhead sum(counts) + K)."""
    counts = np.asarray(counts, dtype=int)
    gains = partition_gains(scsi, counts)
    ordered = bool(np.all(np.diff(gains) < 0.0))
    pa = optimal_power_allocation(gains, cfg)
    if not (ordered and pa.feasible):
        return False, gains, pa, -np.inf
    rates = expected_rate_pte(gains, pa.p, cfg.sigma2, cfg.t_coherence,
                              int(counts.sum()), cfg.n_users)
    return True, gains, pa, float(rates.sum())


def min_counts_for_order(scsi: StatisticalCsi, m_k0: int, m_total: int | None = None,
                         floors=None):
    """Smallest counts satisfying the expected-gain ordering chain.

    The weakest user K gets ``m_k0``; walking up from user K-1 to user 2,
    each count starts at the next-weaker user's count (or its floor) and is
    incremented until the ordering holds, which Lemma-3 monotonicity makes a
    finite search.  The remaining elements go to user 1.  Returns None when
    the assigned counts exceed the surface size.
    """
    if m_k0 < 1:
        raise ValueError("the weakest user needs at least one element")
    k_total = scsi.n_users
    m_total = scsi.n_elements if m_total is None else m_total
    counts = np.zeros(k_total, dtype=int)
    if k_total == 1:
        counts[0] = m_total
        return counts
    floors = np.zeros(k_total, dtype=int) if floors is None else np.asarray(floors, dtype=int)
    counts[k_total - 1] = max(m_k0, floors[k_total - 1])
    for k in range(k_total - 2, 0, -1):
        target = expected_gain_pte(scsi, int(counts[k + 1]), k + 1)
        c = max(int(counts[k + 1]), int(floors[k]))
        while expected_gain_pte(scsi, c, k) <= target:
            c += 1
            if c > m_total:
                return None
        counts[k] = c
    assigned = int(counts[1:].sum())
    if assigned > m_total:
        return None
    counts[0] = m_total - assigned
    return counts


def _region_leftover_counts(scsi, counts, capacities):
    """Distribute each region's unused budget to its strongest user."""
    counts = counts.copy()
    regions = np.array(scsi.user_regions)
    for region, cap in capacities.items():
        users = np.nonzero(regions == region)[0]
        if len(users) == 0:
            continue
        used = int(counts[users].sum())
        if used > cap:
            return None
        counts[users[0]] += cap - used
    return counts


def initial_partition(scsi: StatisticalCsi, cfg: NomaConfig,
                      region_capacity: dict[str, int] | None = None) -> SurfacePartition:
    """Step 1: grow counts from the minimum-ordering assignment until the
    closed-form power allocation is feasible on the expected gains."""
    m_total = scsi.n_elements if region_capacity is None else sum(region_capacity.values())
    k_total = scsi.n_users
    floors = np.zeros(k_total, dtype=int)
    m_k0 = 1
    while True:
        counts = min_counts_for_order(scsi, m_k0, m_total, floors)
        if counts is not None and region_capacity is not None:
            base = counts.copy()
            base[0] = 0
            counts = _region_leftover_counts(scsi, base, region_capacity)
        if counts is None:
            raise InfeasibleProblemError("no surface partition can meet the rate targets")
        feasible, _, _, _ = evaluate_partition(scsi, cfg, counts)
        if feasible:
            return _build_partition(scsi, counts, region_capacity)
        # grow every assigned count by at least one and repeat
        floors = counts.copy() + 1
        floors[0] = 0
        m_k0 += 1
        if m_k0 > m_total:
            raise InfeasibleProblemError("no surface partition can meet the rate targets")


def _build_partition(scsi, counts, region_capacity):
    if region_capacity is None:
        return SurfacePartition.from_counts(counts, scsi.user_regions)
    return SurfacePartition.from_region_layout(counts, scsi.user_regions, region_capacity)


def _donors(scsi, region_capacity):
    """Users that elements are taken from in step 2: the strongest user
    overall, or the strongest user of each region when modes are frozen."""
    if region_capacity is None:
        return [0]
    regions = np.array(scsi.user_regions)
    donors = []
    for region in dict.fromkeys(scsi.user_regions):
        users = np.nonzero(regions == region)[0]
        donors.append(int(users[0]))
    return donors


def _refine(scsi, cfg, start: SurfacePartition, region_capacity=None):
    counts = start.counts.copy()
    feasible, _, pa, best = evaluate_partition(scsi, cfg, counts)
    if not feasible:
        raise ValueError("refinement requires a feasible starting partition")
    regions = np.array(scsi.user_regions)
    donors = _donors(scsi, region_capacity)
    trace = [PartitionSearchState(counts.copy(), best, pa.p.copy(), 0)]
    for iteration in range(1, int(counts.sum()) + 1):
        improved = False
        for k in range(1, scsi.n_users):
            donor = donors[0] if region_capacity is None else \
                next((d for d in donors if regions[d] == regions[k]), None)
            if donor is None or donor == k or counts[donor] <= 0:
                continue
            cand = counts.copy()
            cand[donor] -= 1
            cand[k] += 1
            ok, _, pa_c, rate = evaluate_partition(scsi, cfg, cand)
            if ok and rate > best:
                counts, best = cand, rate
                trace.append(PartitionSearchState(counts.copy(), rate, pa_c.p.copy(), iteration))
                improved = True
                break
        if not improved:
            break
    return _build_partition(scsi, counts, region_capacity), trace


def refine_partition(start: SurfacePartition, scsi: StatisticalCsi, cfg: NomaConfig,
                     region_capacity: dict[str, int] | None = None) -> SurfacePartition:
    """Step 2: accept single-element reassignments from the strongest user
    while they increase the approximate sum-rate and stay feasible."""
    partition, _ = _refine(scsi, cfg, start, region_capacity)
    return partition


def partition_search(scsi: StatisticalCsi, cfg: NomaConfig,
                     region_capacity: dict[str, int] | None = None):
    """Run both steps; returns (partition, trace of accepted states)."""
    start = initial_partition(scsi, cfg, region_capacity)
    return _refine(scsi, cfg, start, region_capacity)


def approx_sum_rate(scsi: StatisticalCsi, cfg: NomaConfig, partition: SurfacePartition) -> float:
    feasible, _, _, rate = evaluate_partition(scsi, cfg, partition.counts)
    return rate if feasible else 0.0


def aligned_gains(realization: ChannelRealization, partition: SurfacePartition) -> np.ndarray:
    """Own-subsurface aligned effective channel magnitudes |h_k| + sum |q_k|."""
    mags = np.abs(realization.h).astype(float)
    for k, (lo, hi) in enumerate(partition.index_ranges):
        mags[k] += np.abs(realization.w[k, lo:hi]).sum()
    return mags


def short_term_pte(realization: ChannelRealization, partition: SurfacePartition,
                   cfg: NomaConfig):
    """Per-block phase alignment, power allocation on the aligned gains, and
    both rate reports: the allocation-side approximation, and the realized
    rates through the full physical channel (cross-subsurface terms
    included).  Returns (phases, PowerAllocation, approx report, realized
    report)."""
    k_total = realization.n_users
    overhead = partition.n_assigned + k_total
    phases = align_phases(realization, partition)
    approx = aligned_gains(realization, partition) ** 2
    order = cfg.decoding_order
    pa = optimal_power_allocation(approx[order], cfg)
    if not pa.feasible:
        zero = outage_report(k_total, overhead)
        return phases, pa, zero, zero
    coeffs = partition_to_coefficients(partition, phases)
    regions = realization.user_regions
    realized = np.abs([realization.h[k] + realization.w[k] @ coeffs.for_region(regions[k])
                       for k in range(k_total)]) ** 2
    def report(gains):
        rates_sorted = sic_rates(gains[order], pa.p, cfg.sigma2)
        rates = np.empty(k_total)
        rates[order] = rates_sorted
        return adjusted_rates(rates, overhead, cfg.t_coherence)
    return phases, pa, report(approx), report(realized)
