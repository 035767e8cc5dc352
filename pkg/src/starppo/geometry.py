"""Positions, STAR-RIS orientation, region test and user mobility."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

USER_HEIGHT = 1.5


class GeometryError(ValueError):
    pass


class Region(enum.IntEnum):
    TRANSMISSION = 0
    REFLECTION = 1


@dataclass(frozen=True)
class Position3D:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if self.z < 0:
            raise GeometryError(f"height must be non-negative, got z={self.z}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def distance(self, other: "Position3D") -> float:
        return float(np.sqrt((self.x - other.x) ** 2 + (self.y - other.y) ** 2
                             + (self.z - other.z) ** 2))


@dataclass(frozen=True)
class Orientation2D:
    x_ori: float
    y_ori: float

    @classmethod
    def from_angle(cls, phi: float) -> "Orientation2D":
        return cls(float(np.cos(phi)), float(np.sin(phi)))

    @classmethod
    def normalized(cls, x: float, y: float) -> "Orientation2D":
        norm = np.hypot(x, y)
        if norm < 1e-12:
            raise GeometryError("orientation vector has zero length")
        return cls(x / norm, y / norm)

    def __neg__(self) -> "Orientation2D":
        return Orientation2D(-self.x_ori, -self.y_ori)


@dataclass(frozen=True)
class MobilityConfig:
    square_side: float = 1000.0
    max_step: float = 1.0
    boundary_mode: str = "reflect"

    def __post_init__(self):
        if self.square_side <= 0:
            raise GeometryError("square_side must be positive")
        if self.max_step < 0:
            raise GeometryError("max_step must be non-negative")
        if self.boundary_mode != "reflect":
            raise GeometryError(f"unsupported boundary mode {self.boundary_mode!r}")


def region_score(user: Position3D, bs: Position3D, ris: Position3D,
                 ori: Orientation2D) -> float:
    """Product of the signed sides of BS and user w.r.t. the line through the
    RIS along its orientation. Positive means both lie on the same side."""
    if np.hypot(ori.x_ori, ori.y_ori) < 1e-12:
        raise GeometryError("orientation vector has zero length")
    # (x_R + x_o) y_R - (y_R + y_o) x_R, expanded so that negating the
    # orientation negates every term exactly in floating point
    c = ori.x_ori * ris.y - ori.y_ori * ris.x
    side_bs = ori.y_ori * bs.x - ori.x_ori * bs.y + c
    side_user = ori.y_ori * user.x - ori.x_ori * user.y + c
    return side_bs * side_user


def classify_region(user: Position3D, bs: Position3D, ris: Position3D,
                    ori: Orientation2D) -> Region:
    # f == 0 (user on the surface line) counts as transmission
    if region_score(user, bs, ris, ori) > 0:
        return Region.REFLECTION
    return Region.TRANSMISSION


def classify_regions(users_xy: np.ndarray, bs: Position3D, ris: Position3D,
                     ori: Orientation2D) -> np.ndarray:
    """Vectorised classify_region over a (K, 2|3) array; returns 1 for reflection."""
    if np.hypot(ori.x_ori, ori.y_ori) < 1e-12:
        raise GeometryError("orientation vector has zero length")
    c = ori.x_ori * ris.y - ori.y_ori * ris.x
    side_bs = ori.y_ori * bs.x - ori.x_ori * bs.y + c
    side_users = ori.y_ori * users_xy[:, 0] - ori.x_ori * users_xy[:, 1] + c
    return (side_bs * side_users > 0).astype(np.int64)


def move_ris(ris: Position3D, dx: float, dy: float, x_max: float,
             y_max: float) -> Position3D:
    # the action decoder already bounds |dx| <= x_max and |dy| <= y_max
    return Position3D(ris.x + dx, ris.y + dy, ris.z)


def _reflect(v: np.ndarray, lo: float, hi: float) -> np.ndarray:
    span = hi - lo
    u = np.mod(v - lo, 2.0 * span)
    return lo + np.where(u > span, 2.0 * span - u, u)


def step_users_array(xy: np.ndarray, cfg: MobilityConfig, center: tuple[float, float],
                     rng: np.random.Generator) -> np.ndarray:
    """Random-walk step for a (K, 2) array of ground positions."""
    if cfg.max_step == 0:
        return xy.copy()
    step = rng.uniform(-cfg.max_step, cfg.max_step, size=xy.shape)
    half = cfg.square_side / 2.0
    out = np.empty_like(xy)
    for axis in range(2):
        out[:, axis] = _reflect(xy[:, axis] + step[:, axis],
                                center[axis] - half, center[axis] + half)
    return out


def step_users(users: list[Position3D], cfg: MobilityConfig, rng: np.random.Generator,
               center: tuple[float, float] = (0.0, 0.0)) -> list[Position3D]:
    xy = np.array([[u.x, u.y] for u in users], dtype=float)
    new = step_users_array(xy, cfg, center, rng)
    return [Position3D(float(p[0]), float(p[1]), u.z) for p, u in zip(new, users)]


def place_users(k: int, cfg: MobilityConfig, center: tuple[float, float],
                rng: np.random.Generator) -> np.ndarray:
    half = cfg.square_side / 2.0
    xy = rng.uniform(-half, half, size=(k, 2))
    return xy + np.asarray(center, dtype=float)
