"""System geometry, statistical CSI, and per-block channel realizations.

Conventions used throughout the package:

* Users are indexed in decoding order (index 0 is the user nearest to the
  BS, i.e. the strongest user, decoded last).  ``drop_users`` returns
  geometries already sorted this way.
* Cascaded channels are stored in row form: ``w[k]`` holds the entries of
  ``r_k^H diag(g)``, so the effective channel of user k is the plain dot
  product ``h[k] + w[k] @ v_s`` (no extra conjugation).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

REGION_T = "t"
REGION_R = "r"
REGIONS = (REGION_T, REGION_R)


@dataclass(frozen=True)
class SystemGeometry:
    """Node positions (meters) and the region tag of every user."""

    bs_position: np.ndarray
    ris_position: np.ndarray
    user_positions: np.ndarray      # (K, 3)
    user_regions: tuple[str, ...]   # 't' or 'r' per user

    def __post_init__(self):
        object.__setattr__(self, "bs_position", np.asarray(self.bs_position, dtype=float))
        object.__setattr__(self, "ris_position", np.asarray(self.ris_position, dtype=float))
        object.__setattr__(self, "user_positions", np.atleast_2d(np.asarray(self.user_positions, dtype=float)))
        if self.user_positions.shape[0] < 1:
            raise ValueError("at least one user is required")
        if len(self.user_regions) != self.user_positions.shape[0]:
            raise ValueError("one region tag per user is required")
        if any(s not in REGIONS for s in self.user_regions):
            raise ValueError(f"region tags must be one of {REGIONS}")
        d = self.bs_user_distances()
        if np.unique(d).size != d.size:
            raise ValueError("BS-user distances must be distinct (perturb positions)")

    @property
    def n_users(self) -> int:
        return self.user_positions.shape[0]

    def bs_user_distances(self) -> np.ndarray:
        return np.linalg.norm(self.user_positions - self.bs_position, axis=1)

    def ris_user_distances(self) -> np.ndarray:
        return np.linalg.norm(self.user_positions - self.ris_position, axis=1)

    def bs_ris_distance(self) -> float:
        return float(np.linalg.norm(self.ris_position - self.bs_position))


@dataclass(frozen=True)
class PathLossModel:
    """Power-law path loss: gain = 10^(rho0_db/10) * (d/d0)^(-alpha)."""

    rho0_db: float = -30.0
    d0: float = 1.0
    alpha_bs: float = 2.0
    alpha_sk: float = 2.2
    alpha_k: float = 3.5

    def __post_init__(self):
        if self.d0 <= 0:
            raise ValueError("d0 must be positive")
        if min(self.alpha_bs, self.alpha_sk, self.alpha_k) <= 0:
            raise ValueError("path-loss exponents must be positive")


def path_loss(d, alpha: float, model: PathLossModel):
    """Linear power gain of a link of length ``d`` with exponent ``alpha``."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("link distance must be positive")
    out = 10.0 ** (model.rho0_db / 10.0) * (d / model.d0) ** (-alpha)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class StatisticalCsi:
    """Long-term channel knowledge: path losses, Rician factors, LoS components.

    ``w_los[k]`` stores the cascaded LoS row ``r_los_k^H diag(g_los)`` so that
    ``w_los[k] @ v`` is the LoS part of the surface contribution for user k.
    """

    delta_bs: float
    delta_sk: np.ndarray            # (K,)
    delta_k: np.ndarray             # (K,)
    kappa1: float
    kappa2: float
    g_los: np.ndarray               # (M,) unit-modulus
    r_los: np.ndarray               # (K, M) unit-modulus rows
    w_los: np.ndarray = field(default=None)  # (K, M) cascaded rows
    user_regions: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kappa1 < 0 or self.kappa2 < 0:
            raise ValueError("Rician factors must be non-negative")
        if self.w_los is None:
            object.__setattr__(self, "w_los", np.conj(self.r_los) * self.g_los[None, :])

    @property
    def n_users(self) -> int:
        return len(self.delta_k)

    @property
    def n_elements(self) -> int:
        return len(self.g_los)


@dataclass(frozen=True)
class ChannelRealization:
    """One coherence block: direct, BS-RIS, RIS-user and cascaded channels.

    ``w[k]`` is the row ``r_k^H diag(g)``: effective channel = h[k] + w[k] @ v_s.
    """

    h: np.ndarray                   # (K,)
    g: np.ndarray                   # (M,)
    r: np.ndarray                   # (K, M)
    w: np.ndarray                   # (K, M)
    user_regions: tuple[str, ...] = ()

    @property
    def n_users(self) -> int:
        return len(self.h)

    @property
    def n_elements(self) -> int:
        return len(self.g)


def drop_users(center, radius: float, counts: tuple[int, int], rng_seed,
               bs_position=(0.0, 0.0, 1.0)) -> SystemGeometry:
    """Drop K_t + K_r users uniformly in the horizontal disc around ``center``.

    Users are placed at height 0, tagged 't'/'r' per ``counts``, and then
    sorted by ascending BS distance so that index 0 is the strongest user
    (identity decoding order).  Deterministic for a fixed seed.
    """
    k_t, k_r = counts
    k_total = k_t + k_r
    if k_total < 1:
        raise ValueError("at least one user is required")
    if radius <= 0:
        raise ValueError("drop radius must be positive")
    center = np.asarray(center, dtype=float)
    rng = np.random.default_rng(rng_seed)
    rad = radius * np.sqrt(rng.uniform(size=k_total))
    ang = rng.uniform(0.0, 2.0 * np.pi, size=k_total)
    pos = np.zeros((k_total, 3))
    pos[:, 0] = center[0] + rad * np.cos(ang)
    pos[:, 1] = center[1] + rad * np.sin(ang)
    regions = np.array([REGION_T] * k_t + [REGION_R] * k_r)
    bs = np.asarray(bs_position, dtype=float)
    order = np.argsort(np.linalg.norm(pos - bs, axis=1))
    return SystemGeometry(bs, center, pos[order], tuple(str(s) for s in regions[order]))


def _steering(array_origin: np.ndarray, target: np.ndarray, m_elements: int) -> np.ndarray:
    """Half-wavelength ULA response at the RIS toward ``target`` (unit modulus)."""
    d = np.asarray(target, dtype=float) - np.asarray(array_origin, dtype=float)
    azimuth = np.arctan2(d[1], d[0])
    m = np.arange(m_elements)
    return np.exp(1j * np.pi * m * np.sin(azimuth))


def derive_statistical_csi(geo: SystemGeometry, model: PathLossModel,
                           kappa1: float, kappa2: float, m_elements: int,
                           rng_seed=None) -> StatisticalCsi:
    """Build statistical CSI from geometry: path losses plus steering-vector LoS.

    LoS components are deterministic functions of the geometry (ULA steering
    from azimuths); ``rng_seed`` is accepted for interface stability but
    unused.
    """
    delta_bs = path_loss(geo.bs_ris_distance(), model.alpha_bs, model)
    delta_sk = path_loss(geo.ris_user_distances(), model.alpha_sk, model)
    delta_k = path_loss(geo.bs_user_distances(), model.alpha_k, model)
    g_los = _steering(geo.ris_position, geo.bs_position, m_elements)
    r_los = np.stack([_steering(geo.ris_position, geo.user_positions[k], m_elements)
                      for k in range(geo.n_users)])
    return StatisticalCsi(float(delta_bs), delta_sk, delta_k, float(kappa1), float(kappa2),
                          g_los, r_los, user_regions=tuple(geo.user_regions))


def _sample_parts(scsi: StatisticalCsi, rng: np.random.Generator, shape_prefix=()):
    """Draw NLoS/direct fading with a fixed draw order (g, r, h) for determinism."""
    m, k = scsi.n_elements, scsi.n_users
    def cn(*shape):
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    g_nlos = cn(*shape_prefix, m)
    r_nlos = cn(*shape_prefix, k, m)
    h_hat = cn(*shape_prefix, k)
    a1 = np.sqrt(scsi.kappa1 / (scsi.kappa1 + 1.0))
    b1 = np.sqrt(1.0 / (scsi.kappa1 + 1.0))
    a2 = np.sqrt(scsi.kappa2 / (scsi.kappa2 + 1.0))
    b2 = np.sqrt(1.0 / (scsi.kappa2 + 1.0))
    g = np.sqrt(scsi.delta_bs) * (a1 * scsi.g_los + b1 * g_nlos)
    r = np.sqrt(scsi.delta_sk)[:, None] * (a2 * scsi.r_los + b2 * r_nlos)
    h = np.sqrt(scsi.delta_k) * h_hat
    return h, g, r


def sample_channels(scsi: StatisticalCsi, rng_seed) -> ChannelRealization:
    """Sample one coherence block (Rician RIS links, Rayleigh direct links)."""
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    h, g, r = _sample_parts(scsi, rng)
    w = np.conj(r) * g[None, :]
    return ChannelRealization(h, g, r, w, scsi.user_regions)


def sample_channels_batch(scsi: StatisticalCsi, n: int, rng_seed):
    """Vectorized sampler for Monte-Carlo oracles: returns (h, g, r, w) with a
    leading trial axis of length ``n``."""
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    h, g, r = _sample_parts(scsi, rng, shape_prefix=(n,))
    w = np.conj(r) * g[:, None, :]
    return h, g, r, w


def effective_channel(real: ChannelRealization, v_t: np.ndarray, v_r: np.ndarray,
                      k: int, region: str) -> complex:
    """Effective BS-user channel h_k + w_k^H v_s for the user's own region."""
    if len(v_t) != real.n_elements or len(v_r) != real.n_elements:
        raise ValueError("coefficient vectors must have length M")
    v_s = v_t if region == REGION_T else v_r
    return complex(real.h[k] + real.w[k] @ v_s)


def subsurface_channel(real: ChannelRealization, partition, j: int, k: int) -> np.ndarray:
    """Cascaded channel rows between subsurface ``j`` and user ``k``.

    Returns the slice of ``w[k]`` on subsurface j's element indices: the own
    subsurface channel for j == k, the cross-subsurface channel otherwise.
    """
    if not (0 <= j < partition.n_users) or not (0 <= k < real.n_users):
        raise ValueError("subsurface or user index out of range")
    lo, hi = partition.index_ranges[j]
    if hi > real.n_elements:
        raise ValueError("partition does not fit the realization")
    return real.w[k, lo:hi]
