"""Channel synthesis: Rician BS->RIS link with array responses, Rayleigh access
links, and the urban LoS/NLoS path-loss pair (3GPP TR 36.873 style)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .geometry import USER_HEIGHT, GeometryError, Position3D

SPEED_OF_LIGHT = 299_792_458.0


class ChannelConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelConfig:
    """Carrier frequency in GHz; spacings in metres (None -> half wavelength).

    ``n_x`` is the number of RIS elements per row; None picks the integer
    square root of N when the panel is square.
    """
    f_c: float = 5.0
    rician_q: float = 10.0
    d_a: float | None = None
    d_e: float | None = None
    n_x: int | None = None

    def __post_init__(self):
        if self.f_c <= 0:
            raise ChannelConfigError("carrier frequency must be positive")
        if self.rician_q < 0:
            raise ChannelConfigError("Rician factor must be non-negative")
        for name in ("d_a", "d_e"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ChannelConfigError(f"{name} must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / (self.f_c * 1e9)

    @property
    def antenna_spacing(self) -> float:
        return self.wavelength / 2 if self.d_a is None else self.d_a

    @property
    def element_spacing(self) -> float:
        return self.wavelength / 2 if self.d_e is None else self.d_e

    def row_length(self, n: int) -> int:
        if self.n_x is not None:
            nx = self.n_x
        else:
            nx = math.isqrt(n)
            if nx * nx != n:
                raise ChannelConfigError(
                    f"N={n} is not a square; set n_x explicitly")
        if nx <= 0 or n % nx:
            raise ChannelConfigError(f"n_x={nx} does not divide N={n}")
        return nx


class ChannelRealization(NamedTuple):
    h_br: np.ndarray  # (N, M) BS -> RIS
    h_bu: np.ndarray  # (M, K) BS -> users, one column per user
    h_ru: np.ndarray  # (N, K) RIS -> users, one column per user


def db_to_gain(db):
    return 10.0 ** (-np.asarray(db, dtype=float) / 10.0)


def gain_to_db(gain):
    return -10.0 * np.log10(gain)


def angles(bs: Position3D, ris: Position3D) -> tuple[float, float, float]:
    """Azimuth AoA, azimuth AoD and elevation AoA of the BS->RIS LoS path."""
    dx, dy, dz = ris.x - bs.x, ris.y - bs.y, ris.z - bs.z
    d_h = math.hypot(dx, dy)
    if d_h < 1e-9:
        raise GeometryError("BS and RIS share the same horizontal position")
    phi_a = math.asin(max(-1.0, min(1.0, dy / d_h)))
    phi_d = math.pi / 2 - phi_a
    # elevation from the full 3-D distance: same as dz/d_h to first order
    # at the far-field geometry and stays inside asin's domain
    psi_a = math.atan2(dz, d_h)
    return phi_a, phi_d, psi_a


def steering_bs(m: int, phi_d: float, cfg: ChannelConfig) -> np.ndarray:
    idx = np.arange(m)
    phase = 2 * np.pi * idx * cfg.antenna_spacing * math.sin(phi_d) / cfg.wavelength
    return np.exp(1j * phase)


def steering_ris(n: int, phi_a: float, psi_a: float, cfg: ChannelConfig) -> np.ndarray:
    """Uniform planar array response, element n at row n // N_x, column n % N_x."""
    nx = cfg.row_length(n)
    idx = np.arange(n)
    row, col = idx // nx, idx % nx
    s = math.sin(phi_a)
    phase = (2 * np.pi * cfg.element_spacing / cfg.wavelength
             * (row * s * math.sin(psi_a) + col * s * math.cos(psi_a)))
    return np.exp(1j * phase)


def pathloss_los_db(d, f_c):
    d = np.maximum(np.asarray(d, dtype=float), 1.0)
    return 22.0 * np.log10(d) + 28.0 + 20.0 * np.log10(f_c)


def pathloss_nlos_db(d, f_c, z_tx):
    d = np.maximum(np.asarray(d, dtype=float), 1.0)
    nlos = 36.7 * np.log10(d) + 22.7 + 26.0 * np.log10(f_c) - 0.3 * (z_tx - USER_HEIGHT)
    return np.maximum(pathloss_los_db(d, f_c), nlos)


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """i.i.d. CN(0, 1) entries."""
    z = rng.standard_normal((2, *shape))
    return (z[0] + 1j * z[1]) * math.sqrt(0.5)


def synth_h_br(cfg: ChannelConfig, bs: Position3D, ris: Position3D, n: int, m: int,
               rng: np.random.Generator) -> np.ndarray:
    phi_a, phi_d, psi_a = angles(bs, ris)
    a_r = steering_ris(n, phi_a, psi_a, cfg)
    a_b = steering_bs(m, phi_d, cfg)
    gain = float(db_to_gain(pathloss_los_db(bs.distance(ris), cfg.f_c)))
    q = cfg.rician_q
    scatter = complex_gaussian(rng, (n, m))
    if math.isinf(q):
        return math.sqrt(gain) * np.outer(a_r, a_b.conj())
    los = np.outer(a_r, a_b.conj())
    return math.sqrt(gain) * (math.sqrt(q / (q + 1)) * los + math.sqrt(1 / (q + 1)) * scatter)


def synth_rayleigh(cfg: ChannelConfig, tx: Position3D, users: np.ndarray, rows: int,
                   z_tx: float, rng: np.random.Generator) -> np.ndarray:
    """Rayleigh columns, one per user; ``users`` is a (K, 3) array."""
    users = np.atleast_2d(np.asarray(users, dtype=float))
    d = np.linalg.norm(users - tx.as_array(), axis=1)
    gain = db_to_gain(pathloss_nlos_db(d, cfg.f_c, z_tx))
    return complex_gaussian(rng, (rows, users.shape[0])) * np.sqrt(gain)


def synth_all(cfg: ChannelConfig, bs: Position3D, ris: Position3D, users: np.ndarray,
              n: int, m: int, rng: np.random.Generator) -> ChannelRealization:
    """Draw one time slot's channels. Draw order is fixed: H_br, H_bu, H_ru."""
    h_br = synth_h_br(cfg, bs, ris, n, m, rng)
    h_bu = synth_rayleigh(cfg, bs, users, m, bs.z, rng)
    h_ru = synth_rayleigh(cfg, ris, users, n, ris.z, rng)
    return ChannelRealization(h_br, h_bu, h_ru)
