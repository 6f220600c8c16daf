"""Transmission/reflection coefficient vectors and surface partitions under
the mode-switching protocol."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import REGION_R, REGION_T, REGIONS, ChannelRealization


@dataclass(frozen=True)
class StarCoefficients:
    """Per-element transmission and reflection coefficients."""

    v_t: np.ndarray
    v_r: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "v_t", np.asarray(self.v_t, dtype=complex))
        object.__setattr__(self, "v_r", np.asarray(self.v_r, dtype=complex))
        if self.v_t.shape != self.v_r.shape:
            raise ValueError("v_t and v_r must have the same length")

    @property
    def n_elements(self) -> int:
        return len(self.v_t)

    def for_region(self, region: str) -> np.ndarray:
        return self.v_t if region == REGION_T else self.v_r


@dataclass(frozen=True)
class CoefficientsVerdict:
    """Worst-case violations of the energy and binary-amplitude constraints."""

    energy_violation: float
    binary_violation: float
    ok: bool


@dataclass(frozen=True)
class SurfacePartition:
    """Element-to-user assignment into contiguous subsurfaces.

    Block k belongs to user k (decoding order); ``modes[k]`` is the region of
    the owning user, i.e. the mode all of that block's elements operate in.
    In the standard layout the blocks cover the whole surface in user order;
    the region-constrained layout used by the conventional-RIS benchmark may
    leave elements of an unpopulated region unassigned.
    """

    counts: np.ndarray                         # (K,) non-negative ints
    index_ranges: tuple[tuple[int, int], ...]  # [lo, hi) per user
    modes: tuple[str, ...]
    m_total: int

    def __post_init__(self):
        object.__setattr__(self, "counts", np.asarray(self.counts, dtype=int))
        if np.any(self.counts < 0):
            raise ValueError("element counts must be non-negative")
        if any(s not in REGIONS for s in self.modes):
            raise ValueError(f"modes must be one of {REGIONS}")
        claimed = np.zeros(self.m_total, dtype=bool)
        for (lo, hi), c in zip(self.index_ranges, self.counts):
            if hi - lo != c or lo < 0 or hi > self.m_total:
                raise ValueError("index ranges must match counts and fit the surface")
            if np.any(claimed[lo:hi]):
                raise ValueError("index ranges must be disjoint")
            claimed[lo:hi] = True

    @property
    def n_assigned(self) -> int:
        return int(self.counts.sum())

    @property
    def n_users(self) -> int:
        return len(self.counts)

    @classmethod
    def from_counts(cls, counts, regions) -> "SurfacePartition":
        """Standard layout: contiguous blocks in decoding order covering the
        surface; user 0 owns the first block."""
        counts = np.asarray(counts, dtype=int)
        edges = np.concatenate(([0], np.cumsum(counts)))
        ranges = tuple((int(edges[k]), int(edges[k + 1])) for k in range(len(counts)))
        return cls(counts, ranges, tuple(regions), int(counts.sum()))

    @classmethod
    def from_region_layout(cls, counts, regions, capacities: dict[str, int]) -> "SurfacePartition":
        """Region-constrained layout: transmission-mode blocks pack the first
        ``capacities['t']`` elements, reflection-mode blocks the rest."""
        counts = np.asarray(counts, dtype=int)
        m_total = sum(capacities.values())
        for region, cap in capacities.items():
            used = sum(int(c) for c, s in zip(counts, regions) if s == region)
            if used > cap:
                raise ValueError(f"region '{region}' exceeds its element budget")
        offsets = {REGION_T: 0, REGION_R: capacities.get(REGION_T, 0)}
        ranges = []
        for k, region in enumerate(regions):
            lo = offsets[region]
            hi = lo + int(counts[k])
            ranges.append((lo, hi))
            offsets[region] = hi
        return cls(counts, tuple(ranges), tuple(regions), m_total)

    def element_modes(self) -> np.ndarray:
        """Mode tag per element ('' for unassigned elements)."""
        out = np.full(self.m_total, "", dtype="<U1")
        for (lo, hi), mode in zip(self.index_ranges, self.modes):
            out[lo:hi] = mode
        return out


def validate(coeffs: StarCoefficients, binary_required: bool = False,
             tol: float = 1e-12) -> CoefficientsVerdict:
    """Report the worst energy-conservation violation max(|vt|^2+|vr|^2-1) and
    the worst binary-amplitude violation max(|v| - |v|^2).

    ``ok`` allows violations up to ``tol`` so exactly-constructed unit-modulus
    entries pass despite float rounding of |e^{j theta}|.
    """
    amp_t = np.abs(coeffs.v_t)
    amp_r = np.abs(coeffs.v_r)
    energy = float(np.max(amp_t ** 2 + amp_r ** 2 - 1.0, initial=0.0))
    binary = float(max(np.max(amp_t - amp_t ** 2, initial=0.0),
                       np.max(amp_r - amp_r ** 2, initial=0.0)))
    ok = energy <= tol and (not binary_required or binary <= tol)
    return CoefficientsVerdict(max(energy, 0.0), binary, ok)


def partition_to_coefficients(partition: SurfacePartition, phases: np.ndarray) -> StarCoefficients:
    """Realize a partition as binary coefficients: each assigned element gets
    amplitude 1 in its owner's mode with the given phase, 0 in the other
    mode; unassigned elements stay off."""
    phases = np.asarray(phases, dtype=float)
    if len(phases) != partition.m_total:
        raise ValueError("need one phase per element")
    v_t = np.zeros(partition.m_total, dtype=complex)
    v_r = np.zeros(partition.m_total, dtype=complex)
    modes = partition.element_modes()
    unit = np.exp(1j * phases)
    v_t[modes == REGION_T] = unit[modes == REGION_T]
    v_r[modes == REGION_R] = unit[modes == REGION_R]
    return StarCoefficients(v_t, v_r)


def align_phases(real: ChannelRealization, partition: SurfacePartition) -> np.ndarray:
    """Phase of each element aligning its owner's cascaded channel with the
    owner's direct link: theta_n = angle(h_k) - angle(q_k[n]).

    A direct channel that is exactly zero is treated as having angle 0;
    unassigned elements get phase 0.
    """
    if partition.m_total != real.n_elements:
        raise ValueError("partition does not match the realization size")
    phases = np.zeros(real.n_elements)
    for k, (lo, hi) in enumerate(partition.index_ranges):
        if hi == lo:
            continue
        hk = real.h[k]
        h_angle = 0.0 if hk == 0 else np.angle(hk)
        phases[lo:hi] = h_angle - np.angle(real.w[k, lo:hi])
    return phases
