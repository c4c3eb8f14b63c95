"""Egocentric top-down observation with ray-cast visibility (camera stand-in)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .world import Adversary, Prop, RobotState, World

WALL = 1.0
PROP = 0.8
AGENT = 0.65
FREE_NEAR = 0.5


@dataclass(frozen=True)
class CameraConfig:
    """Robot sits at the bottom centre looking up; the raster spans
    ``range_m`` forward and ``range_m`` across."""

    side: int = 56
    range_m: float = 4.0
    fov_deg: float = 70.0
    blind_range: float = 0.6      # low props closer than this are not seen
    rays: int | None = None       # default 2 * side
    march: float = 0.05           # ray-march step, m

    @property
    def pixel(self) -> float:
        return self.range_m / self.side


def _pixel_grid(cfg: CameraConfig):
    s, px = cfg.side, cfg.pixel
    i, j = np.meshgrid(np.arange(s), np.arange(s), indexing="ij")
    fwd = (s - i - 0.5) * px
    left = (s / 2 - j - 0.5) * px
    return fwd, left


_GRIDS: dict[CameraConfig, tuple[np.ndarray, np.ndarray]] = {}


def _occupied(world: World, floor: str, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    g = world.grid(floor)
    r = np.rint(y / g.resolution).astype(int)
    c = np.rint(x / g.resolution).astype(int)
    out = np.ones(x.shape, dtype=bool)
    ok = (r >= 0) & (r < g.height) & (c >= 0) & (c < g.width)
    out[ok] = g.cells[r[ok], c[ok]]
    return out


def visible_obstacles(world: World, robot: RobotState, cfg: CameraConfig):
    """(x, y, radius, intensity) of props and agents the camera can see."""
    out = []
    for ox, oy, rad, obj in world.obstacles_on(robot.floor):
        if isinstance(obj, Prop):
            if obj.low and math.hypot(ox - robot.x, oy - robot.y) < cfg.blind_range:
                continue
            out.append((ox, oy, rad, PROP))
        elif isinstance(obj, Adversary):
            out.append((ox, oy, rad, AGENT))
    return out


def render_observation(world: World, robot: RobotState, cfg: CameraConfig | None = None) -> np.ndarray:
    """(side, side) float32 raster: 0 unseen, free space fading from 0.5
    with range, walls 1.0, props 0.8, agents 0.65."""
    cfg = cfg or CameraConfig()
    if cfg not in _GRIDS:
        _GRIDS[cfg] = _pixel_grid(cfg)
    fwd, left = _GRIDS[cfg]
    h = robot.heading
    ch, sh = math.cos(h), math.sin(h)
    wx = robot.x + fwd * ch - left * sh
    wy = robot.y + fwd * sh + left * ch
    rho = np.hypot(fwd, left)
    phi = np.arctan2(left, fwd)
    half = math.radians(cfg.fov_deg) / 2
    in_view = (np.abs(phi) <= half) & (rho <= cfg.range_m)

    # first-hit distance along each ray
    n_rays = cfg.rays or 2 * cfg.side
    angles = np.linspace(-half, half, n_rays)
    steps = np.arange(1, int(math.ceil(cfg.range_m / cfg.march)) + 1) * cfg.march
    ra = h + angles
    rx = robot.x + np.cos(ra)[:, None] * steps[None, :]
    ry = robot.y + np.sin(ra)[:, None] * steps[None, :]
    occ = _occupied(world, robot.floor, rx, ry)
    hit = np.where(occ.any(axis=1), steps[np.argmax(occ, axis=1)], np.inf)
    obstacles = visible_obstacles(world, robot, cfg)
    for ox, oy, rad, _ in obstacles:
        # ray-circle intersection, nearest positive root
        dx, dy = ox - robot.x, oy - robot.y
        b = dx * np.cos(ra) + dy * np.sin(ra)
        disc = b * b - (dx * dx + dy * dy - rad * rad)
        t = np.where(disc >= 0, b - np.sqrt(np.maximum(disc, 0)), np.inf)
        t = np.where(t >= 0, t, np.where(disc >= 0, 0.0, np.inf))
        hit = np.minimum(hit, t)

    k = np.clip(np.rint((phi + half) / (2 * half) * (n_rays - 1)).astype(int), 0, n_rays - 1)
    visible = in_view & (rho <= hit[k] + cfg.pixel)

    img = np.zeros((cfg.side, cfg.side), dtype=np.float32)
    free_val = FREE_NEAR * (1 - 0.5 * rho / cfg.range_m)
    img[visible] = free_val[visible]
    wall = visible & _occupied(world, robot.floor, wx, wy)
    img[wall] = WALL
    for ox, oy, rad, val in obstacles:
        inside = visible & ((wx - ox) ** 2 + (wy - oy) ** 2 <= (rad + cfg.pixel / 2) ** 2)
        img[inside] = val
    return img
