"""Closed-form expected channel power gains and Jensen rate approximations.

Two families are provided: the statistical-beamforming protocol works with
the expected gain of the full coefficient vector (``expected_gain_bte``),
the surface-partition protocol with the expected gain of an aligned
subsurface of a given size (``expected_gain_pte``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .channel import REGION_T, StatisticalCsi


def laguerre_half(x):
    """Laguerre function L_{1/2}(x) for x <= 0.

    Evaluated through the Bessel identity
    L_{1/2}(x) = e^{x/2} [(1 - x) I_0(-x/2) - x I_1(-x/2)],
    using exponentially scaled Bessel functions so large Rician factors stay
    stable.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x > 0):
        raise ValueError("laguerre_half is defined here for x <= 0 (x = -kappa)")
    z = -x / 2.0
    out = (1.0 - x) * special.ive(0, z) - x * special.ive(1, z)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class BteExpectationParams:
    """Coefficients of the expected-gain closed form.

    epsilon_k weighs the coherent LoS term |wbar_k^H v|^2, zeta_k the
    per-element incoherent term; epsilon_k + zeta_k = delta_bs * delta_sk.
    """

    epsilon_k: np.ndarray
    zeta_k: np.ndarray

    @classmethod
    def from_scsi(cls, scsi: StatisticalCsi) -> "BteExpectationParams":
        k1, k2 = scsi.kappa1, scsi.kappa2
        denom = (k1 + 1.0) * (k2 + 1.0)
        base = scsi.delta_bs * scsi.delta_sk
        return cls(k1 * k2 * base / denom, (k1 + k2 + 1.0) * base / denom)


def expected_gain_bte(scsi: StatisticalCsi, params: BteExpectationParams,
                      v_t: np.ndarray, v_r: np.ndarray, k: int, region: str) -> float:
    """Expected effective channel power gain of user k for fixed coefficients:
    delta_k + eps_k |wbar_k^H v_s|^2 + zeta_k sum_m |v_s[m]|^2."""
    v_s = v_t if region == REGION_T else v_r
    coherent = np.abs(scsi.w_los[k] @ v_s) ** 2
    return float(scsi.delta_k[k] + params.epsilon_k[k] * coherent
                 + params.zeta_k[k] * np.sum(np.abs(v_s) ** 2))


def _sic_rate_terms(gains, p, sigma2):
    gains = np.asarray(gains, dtype=float)
    p = np.asarray(p, dtype=float)
    interf = gains * np.concatenate(([0.0], np.cumsum(p)[:-1]))
    return np.log2(1.0 + p * gains / (interf + sigma2))


def expected_rate_bte(gains, p, sigma2: float, t_c: float, n_users: int) -> np.ndarray:
    """Jensen approximation of the expected adjusted rates (overhead K)."""
    return (1.0 - n_users / t_c) * _sic_rate_terms(gains, p, sigma2)


def expected_gain_pte(scsi: StatisticalCsi, m_k: int, k: int) -> float:
    """Expected power gain of user k served by an aligned subsurface of m_k
    elements: direct power, incoherent surface power, pairwise coherent term,
    and the direct/surface cross term."""
    if m_k < 0:
        raise ValueError("element count must be non-negative")
    k1, k2 = scsi.kappa1, scsi.kappa2
    denom = (k1 + 1.0) * (k2 + 1.0)
    lag = laguerre_half(-k1) * laguerre_half(-k2)
    base = scsi.delta_bs * scsi.delta_sk[k]
    pairwise = np.pi ** 2 * base * m_k * (m_k - 1) / (16.0 * denom) * lag ** 2
    cross = np.sqrt(np.pi ** 3 * scsi.delta_k[k] * base / (16.0 * denom)) * lag * m_k
    return float(scsi.delta_k[k] + base * m_k + pairwise + cross)


def expected_rate_pte(gains, p, sigma2: float, t_c: float,
                      m_elements: int, n_users: int) -> np.ndarray:
    """Jensen approximation of the expected adjusted rates (overhead M + K)."""
    if m_elements + n_users >= t_c:
        raise ValueError("training overhead M + K must be below t_coherence")
    return (1.0 - (m_elements + n_users) / t_c) * _sic_rate_terms(gains, p, sigma2)
