"""Per-user effective channels, SINR and Shannon rates for one time slot.

Per-user channels are row vectors: ``h_bk = H_bu[:, k]`` (length M) and
``h_rk = H_ru[:, k]`` (length N); ``H_br`` is N x M.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization
from .starris import StarElements, per_user_coeffs


@dataclass(frozen=True)
class NoiseModel:
    sigma2: float
    bandwidth: float = 1e6
    p_max: float = 1.0

    def __post_init__(self):
        if self.sigma2 <= 0 or self.bandwidth <= 0 or self.p_max <= 0:
            raise ValueError("sigma2, bandwidth and p_max must be positive")

    @classmethod
    def from_link_budget(cls, bandwidth: float = 1e6, noise_figure_db: float = 10.0,
                         p_max: float = 1.0, density_dbm_hz: float = -174.0) -> "NoiseModel":
        dbm = density_dbm_hz + 10 * np.log10(bandwidth) + noise_figure_db
        return cls(sigma2=10 ** ((dbm - 30) / 10), bandwidth=bandwidth, p_max=p_max)


def total_power(w: np.ndarray) -> float:
    return float(np.sum(np.abs(w) ** 2))


def effective_channel(h_bk: np.ndarray, h_rk: np.ndarray, theta_k: np.ndarray,
                      h_br: np.ndarray) -> np.ndarray:
    h_bk, h_rk = np.ravel(h_bk), np.ravel(h_rk)
    n, m = h_br.shape
    if h_bk.shape != (m,) or h_rk.shape != (n,) or theta_k.shape != (n, n):
        raise ValueError(
            f"shape mismatch: h_bk {h_bk.shape}, h_rk {h_rk.shape}, "
            f"theta {theta_k.shape}, H_br {h_br.shape}")
    return h_bk + h_rk @ theta_k @ h_br


def effective_channels(ch: ChannelRealization, coeffs: np.ndarray) -> np.ndarray:
    """All users at once; ``coeffs`` is the (K, N) stack of Theta_k diagonals.
    Returns a (K, M) array, row k being user k's effective channel."""
    return ch.h_bu.T + (ch.h_ru.T * coeffs) @ ch.h_br


def sinr(k: int, w: np.ndarray, eff: np.ndarray, noise: NoiseModel) -> float:
    gains = np.abs(np.asarray(eff[k]) @ w) ** 2
    interference = np.delete(gains, k).sum()
    return float(gains[k] / (interference + noise.sigma2))


def sinr_all(w: np.ndarray, eff: np.ndarray, noise: NoiseModel) -> np.ndarray:
    gains = np.abs(eff @ w) ** 2  # [k, u] = |h_k w_u|^2
    signal = np.diag(gains).copy()
    np.fill_diagonal(gains, 0.0)
    return signal / (gains.sum(axis=1) + noise.sigma2)


def rate(gamma, bandwidth: float):
    return bandwidth * np.log2(1.0 + np.asarray(gamma, dtype=float))


def user_rates(ch: ChannelRealization, coeffs: np.ndarray, w: np.ndarray,
               noise: NoiseModel) -> np.ndarray:
    return rate(sinr_all(w, effective_channels(ch, coeffs), noise), noise.bandwidth)


def sum_rate(ch: ChannelRealization, regions, e: StarElements, w: np.ndarray,
             noise: NoiseModel) -> float:
    coeffs = per_user_coeffs(e, np.asarray([int(r) for r in regions]))
    return float(user_rates(ch, coeffs, w, noise).sum())
