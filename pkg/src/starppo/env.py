"""STAR-RIS deployment + hybrid beamforming as an episodic MDP.

Action layout (all entries in [-1, 1]), D = 3N + 2MK + 3:

    [theta_T (N) | beta (N) | theta_R sign (N) | BS phase (MK) | BS amplitude (MK) |
     x_move | y_move | orientation]

BS entries map to ``W[m, k]`` at flat index ``m * K + k``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import channel as chn
from .geometry import (USER_HEIGHT, MobilityConfig, Orientation2D, Position3D,
                       classify_regions, move_ris, place_users, step_users_array)
from .link import NoiseModel, user_rates
from .starris import StarElements, per_user_coeffs, wrap_phase


class EnvConfigError(ValueError):
    pass


class EnvLifecycleError(RuntimeError):
    pass


class Scheme(str, enum.Enum):
    DEPLOYMENT = "deployment"
    FIXED_POSITION = "fixed_position"
    FIXED_POSE = "fixed_position_and_orientation"
    NO_RIS = "no_ris"

    @property
    def moves(self) -> bool:
        return self is Scheme.DEPLOYMENT

    @property
    def turns(self) -> bool:
        return self in (Scheme.DEPLOYMENT, Scheme.FIXED_POSITION)


@dataclass
class EnvConfig:
    m: int = 4
    n: int = 25
    k: int = 6
    horizon: int = 50
    bs: tuple[float, float, float] = (2000.0, 2000.0, 5.0)
    ris0: tuple[float, float, float] = (0.0, 0.0, 10.0)
    ori0_angle: float = 0.0
    x_max: float = 5.0
    y_max: float = 5.0
    bandwidth: float = 1e6
    p_max: float = 1.0
    noise_figure_db: float = 10.0
    sigma2: float | None = None
    state_scale: float = 1e6
    scheme: Scheme = Scheme.DEPLOYMENT
    channel: chn.ChannelConfig = field(default_factory=chn.ChannelConfig)
    mobility: MobilityConfig = field(default_factory=MobilityConfig)

    def __post_init__(self):
        self.scheme = Scheme(self.scheme)
        self.bs = tuple(float(v) for v in self.bs)
        self.ris0 = tuple(float(v) for v in self.ris0)

    def validate(self) -> None:
        if min(self.m, self.n, self.k, self.horizon) < 1:
            raise EnvConfigError("M, N, K and horizon must be positive")
        if self.x_max < 0 or self.y_max < 0:
            raise EnvConfigError("movement bounds must be non-negative")
        if self.state_scale <= 0:
            raise EnvConfigError("state_scale must be positive")
        try:
            self.channel.row_length(self.n)
        except chn.ChannelConfigError as exc:
            raise EnvConfigError(str(exc)) from exc
        if np.hypot(self.bs[0] - self.ris0[0], self.bs[1] - self.ris0[1]) == 0:
            raise EnvConfigError("BS and initial RIS positions coincide horizontally")
        self.noise  # noqa: B018 - raises on non-positive values

    @property
    def noise(self) -> NoiseModel:
        if self.sigma2 is not None:
            return NoiseModel(self.sigma2, self.bandwidth, self.p_max)
        return NoiseModel.from_link_budget(self.bandwidth, self.noise_figure_db, self.p_max)

    @property
    def obs_dim(self) -> int:
        return 2 * (self.m * self.k + self.n * self.m + self.n * self.k) + self.k

    @property
    def action_dim(self) -> int:
        return 3 * self.n + 2 * self.m * self.k + 3


class DecodedAction(NamedTuple):
    elements: StarElements
    w: np.ndarray
    dx: float
    dy: float
    ori: Orientation2D


def decode_action(a: np.ndarray, cfg: EnvConfig) -> DecodedAction:
    n, mk = cfg.n, cfg.m * cfg.k
    a = np.clip(np.asarray(a, dtype=float), -1.0, 1.0)
    if a.shape != (cfg.action_dim,):
        raise EnvConfigError(f"action length {a.shape} != ({cfg.action_dim},)")
    theta_t = wrap_phase(np.pi * a[:n])
    beta = (a[n:2 * n] + 1.0) / 2.0
    shift = np.where(a[2 * n:3 * n] > 0, np.pi / 2, -np.pi / 2)
    theta_r = wrap_phase(theta_t + shift)
    o = 3 * n
    phase = np.pi * a[o:o + mk]
    amp = (a[o + mk:o + 2 * mk] + 1.0) / 2.0
    w = (amp * np.exp(1j * phase)).reshape(cfg.m, cfg.k)
    norm = np.linalg.norm(w)
    if norm > 0:
        w = w * min(1.0, np.sqrt(cfg.p_max) / norm)
    dx, dy, ori = a[-3:]
    return DecodedAction(StarElements(beta, theta_t, theta_r), w,
                         float(cfg.x_max * dx), float(cfg.y_max * dy),
                         Orientation2D.from_angle(np.pi * ori))


def build_state(ch: chn.ChannelRealization, region_bits, scale: float) -> np.ndarray:
    parts = []
    for h in (ch.h_bu, ch.h_br, ch.h_ru):
        parts.append(h.real.ravel() * scale)
        parts.append(h.imag.ravel() * scale)
    parts.append(np.asarray(region_bits, dtype=float))
    return np.concatenate(parts)


def unflatten_state(obs: np.ndarray, m: int, n: int, k: int, scale: float):
    """Inverse of build_state: returns (ChannelRealization, region bits)."""
    out, pos = [], 0
    for shape in ((m, k), (n, m), (n, k)):
        size = shape[0] * shape[1]
        re = obs[pos:pos + size].reshape(shape) / scale
        im = obs[pos + size:pos + 2 * size].reshape(shape) / scale
        out.append(re + 1j * im)
        pos += 2 * size
    h_bu, h_br, h_ru = out
    return chn.ChannelRealization(h_br, h_bu, h_ru), obs[pos:pos + k].astype(np.int64)


@dataclass
class StepResult:
    obs: np.ndarray
    reward: float
    done: bool
    info: dict


class StarRisEnv:
    """Single environment instance. Not thread-safe; one per rollout worker."""

    def __init__(self, cfg: EnvConfig, seed: int | None = None):
        cfg.validate()
        self.cfg = cfg
        self.noise = cfg.noise
        self.bs = Position3D(*cfg.bs)
        self.center = (cfg.ris0[0], cfg.ris0[1])
        self._seed_streams(seed)
        self._t = 0
        self._done = True

    @property
    def obs_dim(self) -> int:
        return self.cfg.obs_dim

    @property
    def action_dim(self) -> int:
        return self.cfg.action_dim

    def _seed_streams(self, seed: int | None) -> None:
        # separate streams for mobility and for each channel matrix, so user
        # paths and direct links do not depend on N or on the scheme
        ss = np.random.SeedSequence(seed)
        self.rng, self._rng_br, self._rng_bu, self._rng_ru = (
            np.random.default_rng(s) for s in ss.spawn(4))

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self._seed_streams(seed)
        cfg = self.cfg
        self.ris = Position3D(*cfg.ris0)
        self.ori = Orientation2D.from_angle(cfg.ori0_angle)
        xy = place_users(cfg.k, cfg.mobility, self.center, self.rng)
        self.users = np.column_stack([xy, np.full(cfg.k, USER_HEIGHT)])
        self._draw()
        self._t = 0
        self._done = False
        return build_state(self.channels, self.regions, cfg.state_scale)

    def _draw(self) -> None:
        cfg = self.cfg
        self.channels = chn.ChannelRealization(
            chn.synth_h_br(cfg.channel, self.bs, self.ris, cfg.n, cfg.m, self._rng_br),
            chn.synth_rayleigh(cfg.channel, self.bs, self.users, cfg.m, self.bs.z, self._rng_bu),
            chn.synth_rayleigh(cfg.channel, self.ris, self.users, cfg.n, self.ris.z, self._rng_ru))
        self.regions = classify_regions(self.users, self.bs, self.ris, self.ori)

    def step(self, a: np.ndarray) -> StepResult:
        if self._done:
            raise EnvLifecycleError("step() called on a finished episode; call reset()")
        cfg = self.cfg
        dec = decode_action(a, cfg)
        if cfg.scheme.moves:
            self.ris = move_ris(self.ris, dec.dx, dec.dy, cfg.x_max, cfg.y_max)
        if cfg.scheme.turns:
            self.ori = dec.ori
        xy = step_users_array(self.users[:, :2], cfg.mobility, self.center, self.rng)
        self.users = np.column_stack([xy, self.users[:, 2]])
        self._draw()
        if cfg.scheme is Scheme.NO_RIS:
            coeffs = np.zeros((cfg.k, cfg.n), dtype=complex)
        else:
            coeffs = per_user_coeffs(dec.elements, self.regions)
        rates = user_rates(self.channels, coeffs, dec.w, self.noise)
        self._t += 1
        self._done = self._t >= cfg.horizon
        info = {
            "t": self._t,
            "rates": rates,
            "ris": self.ris,
            "ori": self.ori,
            "regions": self.regions.copy(),
            "channels": self.channels,
            "coeffs": coeffs,
            "elements": dec.elements,
            "w": dec.w,
        }
        obs = build_state(self.channels, self.regions, cfg.state_scale)
        return StepResult(obs, float(rates.sum()), self._done, info)
