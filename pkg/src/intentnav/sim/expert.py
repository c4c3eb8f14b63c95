"""Scripted expert: pure pursuit toward the route plus dynamic-window sampling."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .world import ClearanceMap, RobotState, World, point_clearance


class NoFeasibleControl(RuntimeError):
    """Every forward velocity sample collides within the horizon."""


@dataclass(frozen=True)
class ExpertConfig:
    lookahead: float = 1.0          # m, pure-pursuit target distance
    horizon: int = 15               # ticks simulated per sample
    speeds: tuple[float, ...] = (1.0, 0.8, 0.6, 0.4, 0.2)
    turns: int = 21                 # samples over [-1, 1]
    margin: float = 0.06            # m beyond the safe distance
    comfort: float = 0.45           # m, clearance below this is penalised
    w_target: float = 1.0
    w_speed: float = 0.3
    w_clear: float = 2.0
    w_turn: float = 0.1
    slow_radius: float = 1.5        # m, speed ramps down near the route end


_CMAPS: dict[int, tuple[object, ClearanceMap]] = {}


def clearance_map(grid) -> ClearanceMap:
    key = id(grid)
    if key not in _CMAPS or _CMAPS[key][0] is not grid:
        _CMAPS[key] = (grid, ClearanceMap(grid))
    return _CMAPS[key][1]


def project_onto(path: np.ndarray, p: np.ndarray) -> tuple[int, float]:
    """(segment index, arc length) of the closest point of a polyline to ``p``."""
    if len(path) == 1:
        return 0, 0.0
    a, b = path[:-1], path[1:]
    ab = b - a
    L2 = np.maximum((ab ** 2).sum(1), 1e-18)
    t = np.clip(((p - a) * ab).sum(1) / L2, 0.0, 1.0)
    d = np.hypot(*(a + t[:, None] * ab - p).T)
    k = int(np.argmin(d))
    seg = np.sqrt(L2)
    s = float(seg[:k].sum() + t[k] * seg[k])
    return k, s


def point_at(path: np.ndarray, s: float) -> np.ndarray:
    if len(path) == 1:
        return path[0].copy()
    seg = np.hypot(*np.diff(path, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    if s >= cum[-1]:
        return path[-1].copy()
    k = int(np.searchsorted(cum, s, side="right") - 1)
    t = (s - cum[k]) / max(seg[k], 1e-18)
    return path[k] + t * (path[k + 1] - path[k])


def rollouts(robot: RobotState, v: np.ndarray, w: np.ndarray, dt: float, steps: int):
    """Unicycle rollouts for arrays of (v, w) in physical units: (n, steps) x, y."""
    t = np.arange(1, steps + 1) * dt
    h = robot.heading + w[:, None] * t[None, :]
    straight = np.abs(w) < 1e-9
    ws = np.where(straight, 1.0, w)[:, None]
    x = np.where(straight[:, None], robot.x + v[:, None] * math.cos(robot.heading) * t,
                 robot.x + v[:, None] / ws * (np.sin(h) - math.sin(robot.heading)))
    y = np.where(straight[:, None], robot.y + v[:, None] * math.sin(robot.heading) * t,
                 robot.y - v[:, None] / ws * (np.cos(h) - math.cos(robot.heading)))
    return x, y


def scripted_expert(world: World, route, robot: RobotState, cfg: ExpertConfig | None = None) -> tuple[float, float]:
    """Normalised (v, theta) that tracks ``route`` (GridPath or (K, 2) metric
    polyline in the robot's floor frame) while keeping clear of walls, props
    and agents known to the simulator."""
    V, W, ok, score = _samples(world, route, robot, cfg or ExpertConfig())
    best = int(np.argmax(score))
    return float(V[best]), float(W[best])


def perturbed_expert(world: World, route, robot: RobotState, offset: float,
                     cfg: ExpertConfig | None = None) -> tuple[tuple[float, float], tuple[float, float]]:
    """(expert control, safe sample nearest to the expert's choice with its
    turn rate shifted by ``offset``)."""
    V, W, ok, score = _samples(world, route, robot, cfg or ExpertConfig())
    best = int(np.argmax(score))
    d = np.where(ok, np.hypot(V - V[best], W - np.clip(W[best] + offset, -1.0, 1.0)), np.inf)
    near = int(np.argmin(d))
    return (float(V[best]), float(W[best])), (float(V[near]), float(W[near]))


def _samples(world: World, route, robot: RobotState, cfg: ExpertConfig):
    sim = world.config
    path = np.asarray(route.polyline if hasattr(route, "polyline") else route, dtype=float).reshape(-1, 2)
    p = robot.xy
    _, s = project_onto(path, p)
    total = float(np.hypot(*np.diff(path, axis=0).T).sum()) if len(path) > 1 else 0.0
    remaining = max(total - s, 0.0) + float(np.linalg.norm(p - point_at(path, s)))
    target = point_at(path, s + cfg.lookahead)
    cap = min(1.0, max(remaining / cfg.slow_radius, 0.2))

    # pure pursuit reference turn
    dx, dy = target - p
    alpha = math.atan2(dy, dx) - robot.heading
    alpha = math.atan2(math.sin(alpha), math.cos(alpha))
    dist = max(math.hypot(dx, dy), 1e-6)
    w_pp = 2.0 * sim.v_max * cap * math.sin(alpha) / dist / sim.theta_max
    w_pp = float(np.clip(w_pp, -1.0, 1.0))

    turns = np.linspace(-1.0, 1.0, cfg.turns)
    vs = np.array(cfg.speeds) * cap
    V, W = np.meshgrid(vs, turns, indexing="ij")
    V, W = V.ravel(), W.ravel()
    if abs(alpha) > math.pi / 2:
        # facing away from the route: turn in place toward it
        V = np.concatenate([V, np.zeros(cfg.turns)])
        W = np.concatenate([W, turns])
    x, y = rollouts(robot, V * sim.v_max, W * sim.theta_max, sim.dt, cfg.horizon)
    clear = clearance_map(world.grid(robot.floor)).lookup(x, y)
    for ox, oy, rad, _ in world.obstacles_on(robot.floor):
        clear = np.minimum(clear, np.hypot(x - ox, y - oy) - rad)
    min_clear = clear.min(axis=1)
    now, _ = point_clearance(world, robot.floor, robot.x, robot.y)
    need = sim.safe_distance + cfg.margin
    # when already inside the margin, accept samples that do not get closer
    ok = (min_clear >= need) | ((now < need) & (min_clear >= now - 1e-3) & (clear[:, 0] >= now))
    moving = V > 0
    if not np.any(ok & moving) and not np.any(ok & ~moving):
        raise NoFeasibleControl(f"no collision-free sample at ({robot.x:.2f}, {robot.y:.2f})")
    if not np.any(ok & moving) and abs(alpha) <= math.pi / 2:
        raise NoFeasibleControl(f"no collision-free sample at ({robot.x:.2f}, {robot.y:.2f})")
    end = np.stack([x[:, -1], y[:, -1]], axis=1)
    far = point_at(path, s + cfg.lookahead + cfg.horizon * sim.dt * sim.v_max * cap)
    score = (-cfg.w_target * np.hypot(*(end - far).T)
             + cfg.w_speed * V
             - cfg.w_clear * np.maximum(cfg.comfort - min_clear, 0.0)
             - cfg.w_turn * np.abs(W - w_pp))
    return V, W, ok, np.where(ok, score, -np.inf)
