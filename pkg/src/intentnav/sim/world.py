"""World state, unicycle kinematics and collision geometry."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..mapsys import FloorplanGrid, MapBundle

SAFE_DISTANCE = 0.20   # m


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2 * math.pi)
    if a <= 0:
        a += 2 * math.pi
    return a - math.pi


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.1
    v_max: float = 1.0          # m/s
    theta_max: float = 1.0      # rad/s
    safe_distance: float = SAFE_DISTANCE

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")


@dataclass(frozen=True)
class RobotState:
    x: float
    y: float
    heading: float
    floor: str
    v: float = 0.0       # last command, normalised
    theta: float = 0.0

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class Prop:
    """A static obstacle absent from the floorplan (e.g. a basket).

    ``low`` props fall into the camera's near blind cone.
    """

    x: float
    y: float
    floor: str
    radius: float = 0.10
    low: bool = True


@dataclass(frozen=True)
class Adversary:
    """A pedestrian that repeatedly steps into the robot's way.

    Phases: "idle" (out of the way), "approaching" (walking to the spot in
    front of the robot) and "blocking" (standing there). Only a blocking
    agent is an obstacle.
    """

    x: float
    y: float
    floor: str
    radius: float = 0.25
    speed: float = 3.0              # m/s while approaching
    max_blocks: int = 15
    cooldown_ticks: int = 10        # idle ticks between blocks
    timeout_ticks: int = 150        # a block unresolved this long fails
    goal_xy: tuple[float, float] | None = None
    min_goal_distance: float = 3.0  # no new block this close to the goal
    phase: str = "idle"
    reach: float = 1.0              # distance ahead of the robot for this block
    block_index: int = 0
    block_ticks: int = 0            # ticks spent in the current phase
    collided: bool = False


@dataclass(frozen=True)
class World:
    bundle: MapBundle
    props: tuple[Prop, ...] = ()
    agents: tuple[Adversary, ...] = ()
    config: SimConfig = field(default_factory=SimConfig)
    tick: int = 0
    rng: np.random.Generator | None = field(default=None, compare=False, repr=False)
    floors: dict = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "floors", self.bundle.floorplan_map)

    def grid(self, floor: str) -> FloorplanGrid:
        return self.floors[floor]

    def obstacles_on(self, floor: str) -> list[tuple[float, float, float, object]]:
        """(x, y, radius, source) of every dynamic or unmapped obstacle on a floor."""
        out = [(p.x, p.y, p.radius, p) for p in self.props if p.floor == floor]
        out += [(a.x, a.y, a.radius, a) for a in self.agents if a.floor == floor and a.phase == "blocking"]
        return out


# --------------------------------------------------------------------------
# geometry

def wall_clearance(grid: FloorplanGrid, x: float, y: float, window: float = 1.0) -> float:
    """Exact distance from a point to the nearest occupied cell box (cells
    outside the map count as occupied), searched within ``window`` meters."""
    res = grid.resolution
    r_c, c_c = y / res, x / res
    span = int(math.ceil(window / res)) + 1
    r0, r1 = int(math.floor(r_c)) - span, int(math.ceil(r_c)) + span
    c0, c1 = int(math.floor(c_c)) - span, int(math.ceil(c_c)) + span
    rows = np.arange(r0, r1 + 1)
    cols = np.arange(c0, c1 + 1)
    occ = np.ones((len(rows), len(cols)), dtype=bool)
    rr0, rr1 = max(r0, 0), min(r1, grid.height - 1)
    cc0, cc1 = max(c0, 0), min(c1, grid.width - 1)
    if rr0 <= rr1 and cc0 <= cc1:
        occ[rr0 - r0:rr1 - r0 + 1, cc0 - c0:cc1 - c0 + 1] = grid.cells[rr0:rr1 + 1, cc0:cc1 + 1]
    ri, ci = np.nonzero(occ)
    if ri.size == 0:
        return window
    dx = np.maximum(np.abs(x - cols[ci] * res) - res / 2, 0.0)
    dy = np.maximum(np.abs(y - rows[ri] * res) - res / 2, 0.0)
    return float(min(np.hypot(dx, dy).min(), window))


def point_clearance(world: World, floor: str, x: float, y: float) -> tuple[float, object | None]:
    """(clearance, nearest obstacle object or None for walls)."""
    best, src = wall_clearance(world.grid(floor), x, y), None
    for ox, oy, r, obj in world.obstacles_on(floor):
        d = math.hypot(x - ox, y - oy) - r
        if d < best:
            best, src = d, obj
    return best, src


def in_collision(world: World, floor: str, x: float, y: float) -> bool:
    return point_clearance(world, floor, x, y)[0] < world.config.safe_distance


@dataclass
class ClearanceMap:
    """Approximate wall clearance on a fine raster (for fast trajectory checks)."""

    grid: FloorplanGrid
    fine: float = 0.05
    dist: np.ndarray = field(init=False, repr=False)
    factor: int = field(init=False)

    def __post_init__(self):
        k = max(1, int(math.ceil(self.grid.resolution / self.fine)))
        self.factor = k
        occ = np.kron(self.grid.cells.astype(np.uint8), np.ones((k, k), dtype=np.uint8)).astype(bool)
        occ = np.pad(occ, 1, constant_values=True)
        step = self.grid.resolution / k
        self.step = step
        # distance from each fine cell centre to the nearest occupied fine cell centre
        self.dist = ndimage.distance_transform_edt(~occ) * step - step / 2

    def lookup(self, x, y) -> np.ndarray:
        """Vectorised clearance at metric points (under-estimates by < one fine cell)."""
        k, res = self.factor, self.grid.resolution
        # fine index: cell (r, c) covers [r*res - res/2, r*res + res/2)
        fi = np.floor((np.asarray(y) + res / 2) / self.step).astype(int) + 1
        fj = np.floor((np.asarray(x) + res / 2) / self.step).astype(int) + 1
        h, w = self.dist.shape
        ok = (fi >= 0) & (fi < h) & (fj >= 0) & (fj < w)
        out = np.full(np.shape(fi), -1.0)
        out[ok] = self.dist[fi[ok], fj[ok]] - self.step
        return out


# --------------------------------------------------------------------------
# dynamics

def integrate_unicycle(x: float, y: float, h: float, v: float, w: float, dt: float):
    if abs(w) < 1e-9:
        return x + v * math.cos(h) * dt, y + v * math.sin(h) * dt, wrap_angle(h)
    h2 = h + w * dt
    return (x + v / w * (math.sin(h2) - math.sin(h)),
            y - v / w * (math.cos(h2) - math.cos(h)),
            wrap_angle(h2))


def step_agents(world: World, robot: RobotState) -> tuple[tuple[Adversary, ...], list]:
    from .scenario import advance_adversary  # policy lives with the scenario rules

    agents, events = [], []
    for a in world.agents:
        a2, ev = advance_adversary(a, robot, world)
        agents.append(a2)
        events.extend(ev)
    return tuple(agents), events


def step_world(world: World, robot: RobotState, control, dt: float | None = None):
    """Advance one tick. Returns (world', robot', events).

    Controls are normalised to [-1, 1] and scaled by v_max / theta_max. A
    move that would end inside an obstacle is cancelled; any pose closer
    than the safe distance to an obstacle emits a collision event.
    """
    cfg = world.config
    dt = cfg.dt if dt is None else dt
    if not dt > 0:
        raise ValueError("dt must be > 0")
    v = float(np.clip(control[0], -1.0, 1.0))
    th = float(np.clip(control[1], -1.0, 1.0))
    agents, events = step_agents(world, robot)
    world2 = dataclasses.replace(world, agents=agents, tick=world.tick + 1)
    nx, ny, nh = integrate_unicycle(robot.x, robot.y, robot.heading, v * cfg.v_max, th * cfg.theta_max, dt)
    clear, src = point_clearance(world2, robot.floor, nx, ny)
    if clear <= 0.0:
        new = dataclasses.replace(robot, heading=nh, v=v, theta=th)
        clear, src = point_clearance(world2, robot.floor, robot.x, robot.y)
        events.append(("collision", _describe(src), "blocked"))
    else:
        new = RobotState(nx, ny, nh, robot.floor, v, th)
        if clear < cfg.safe_distance:
            events.append(("collision", _describe(src), f"{clear:.3f}"))
    if any(e[0] == "collision" for e in events) and isinstance(src, Adversary):
        world2 = dataclasses.replace(world2, agents=tuple(
            dataclasses.replace(a, collided=True) if a is src else a for a in world2.agents))
    return world2, new, events


def _describe(src) -> str:
    if src is None:
        return "wall"
    if isinstance(src, Prop):
        return f"prop@{src.x:.2f},{src.y:.2f}"
    return "adversary"
