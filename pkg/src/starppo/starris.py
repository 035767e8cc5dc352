"""Energy-splitting STAR-RIS element state and its diagonal response matrices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Region


class ElementStateError(ValueError):
    pass


def wrap_phase(x):
    """Map phases into (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=float), 2 * np.pi)


def coupling_residual(beta, theta_r, theta_t) -> np.ndarray:
    return beta * np.sqrt(np.clip(1.0 - beta ** 2, 0.0, None)) * np.cos(theta_r - theta_t)


@dataclass(frozen=True)
class StarElements:
    beta: np.ndarray     # reflection amplitude per element
    theta_t: np.ndarray
    theta_r: np.ndarray

    def validate(self, tol: float = 1e-9) -> None:
        b, tt, tr = self.beta, self.theta_t, self.theta_r
        if not (b.shape == tt.shape == tr.shape) or b.ndim != 1:
            raise ElementStateError("beta/theta_t/theta_r must be equal-length vectors")
        if np.any(b < 0) or np.any(b > 1):
            raise ElementStateError("beta outside [0, 1]")
        for name, th in (("theta_t", tt), ("theta_r", tr)):
            if np.any(th <= -np.pi - 1e-12) or np.any(th > np.pi + 1e-12):
                raise ElementStateError(f"{name} outside (-pi, pi]")
        if np.max(np.abs(coupling_residual(b, tr, tt)), initial=0.0) > tol:
            raise ElementStateError("phase/amplitude coupling violated")

    @property
    def reflection_coeffs(self) -> np.ndarray:
        return self.beta * np.exp(1j * self.theta_r)

    @property
    def transmission_coeffs(self) -> np.ndarray:
        return np.sqrt(1.0 - self.beta ** 2) * np.exp(1j * self.theta_t)


def build_matrices(e: StarElements) -> tuple[np.ndarray, np.ndarray]:
    e.validate()
    return np.diag(e.reflection_coeffs), np.diag(e.transmission_coeffs)


def select_theta(region: Region, mats: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    theta_r, theta_t = mats
    return theta_r if region == Region.REFLECTION else theta_t


def per_user_coeffs(e: StarElements, region_bits: np.ndarray) -> np.ndarray:
    """Diagonals of each user's Theta_k stacked as a (K, N) array."""
    bits = np.asarray(region_bits).astype(bool)[:, None]
    return np.where(bits, e.reflection_coeffs[None, :], e.transmission_coeffs[None, :])
