"""Scenarios: sketch maps, props, the blocking pedestrian and task fixtures."""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..mapsys import (ExitNode, ExitType, FloorplanGrid, MapBundle, ParseError, build_bundle,
                      bundle_from_json, bundle_to_json, load_bundle)
from .odometry import OdometryModel
from .world import Adversary, Prop, RobotState, SimConfig, World, wall_clearance

STEP_RULES = ("goal", "props", "blocks")
INTERVENTION_RULES = ("reset", "terminate")


# --------------------------------------------------------------------------
# sketches

@dataclass(frozen=True)
class Sketch:
    """ASCII floorplans: '#' is wall, anything else is free. Each character
    covers ``char_m`` meters. Markers: 'S' start, 'G' goal, 'o' a low prop,
    'O' a tall prop, 'A' the pedestrian, lowercase letters are exits
    described in ``exits``."""

    floors: dict[str, tuple[str, ...]]
    char_m: float = 1.0
    resolution: float = 0.25
    exits: dict[str, dict] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"char_m": self.char_m, "resolution": self.resolution,
                "floors": {k: list(v) for k, v in self.floors.items()}, "exits": self.exits}

    @classmethod
    def from_json(cls, d: dict) -> "Sketch":
        return cls({k: tuple(v) for k, v in d["floors"].items()}, float(d.get("char_m", 1.0)),
                   float(d.get("resolution", 0.25)), dict(d.get("exits", {})))


def parse_floor(lines, char_m: float, resolution: float, fid: str):
    """(FloorplanGrid, {marker: [(x, y) metric block centres]})."""
    k = int(round(char_m / resolution))
    if k < 1 or abs(k * resolution - char_m) > 1e-9:
        raise ParseError(f"char_m {char_m} is not a multiple of resolution {resolution}", fid)
    width = max(len(l) for l in lines)
    rows = [l.ljust(width, "#") for l in lines]
    occ = np.array([[ch == "#" for ch in row] for row in rows], dtype=bool)
    cells = np.kron(occ.astype(np.uint8), np.ones((k, k), dtype=np.uint8)).astype(bool)
    markers: dict[str, list[tuple[float, float]]] = {}
    for i, row in enumerate(rows):
        for j, ch in enumerate(row):
            if ch not in "#. ":
                c = (j * k + (k - 1) / 2) * resolution
                r = (i * k + (k - 1) / 2) * resolution
                markers.setdefault(ch, []).append((c, r))
    return FloorplanGrid(fid, resolution, cells), markers


def sketch_bundle(sketch: Sketch):
    """(bundle, markers per floor)."""
    fps, exits, marks = [], [], {}
    for fid in sorted(sketch.floors):
        grid, m = parse_floor(sketch.floors[fid], sketch.char_m, sketch.resolution, fid)
        fps.append(grid)
        marks[fid] = m
        for ch, pts in sorted(m.items()):
            if not ch.islower() or ch == "o":
                continue
            spec = sketch.exits.get(ch)
            if spec is None:
                raise ParseError(f"exit marker {ch!r} has no description", fid)
            x, y = pts[0]
            exits.append(ExitNode(spec.get("id", ch), fid, ExitType(spec.get("type", "indoor")),
                                  float(spec.get("margin", 1.0)) / sketch.resolution,
                                  (x / sketch.resolution, y / sketch.resolution), sketch.resolution,
                                  connection=spec.get("connection")))
    return build_bundle(fps, exits, provenance={"source": "sketch"}), marks


# --------------------------------------------------------------------------
# scenario

@dataclass(frozen=True)
class PropSpec:
    x: float
    y: float
    floor: str
    radius: float = 0.10
    low: bool = True
    jitter: tuple[float, float] = (0.0, 0.0)   # uniform +/- offsets drawn per seed


@dataclass(frozen=True)
class AdversarySpec:
    floor: str
    max_blocks: int = 15
    cooldown_ticks: int = 10
    timeout_ticks: int = 150
    radius: float = 0.25
    speed: float = 3.0
    min_goal_distance: float = 3.0


@dataclass(frozen=True)
class Scenario:
    name: str
    bundle: MapBundle
    start: tuple[str, float, float, float]       # floor, x, y, heading
    goal: tuple[str, float, float]
    props: tuple[PropSpec, ...] = ()
    adversary: AdversarySpec | None = None
    steps: str = "goal"
    intervention: str = "reset"
    max_ticks: int = 2000
    odometry: OdometryModel = OdometryModel()
    seeds: tuple[int, ...] = (0,)
    sim: SimConfig = SimConfig()
    goal_tolerance: float = 1.0
    sketch: Sketch | None = None

    def __post_init__(self):
        if self.steps not in STEP_RULES:
            raise ValueError(f"unknown step rule {self.steps!r}")
        if self.intervention not in INTERVENTION_RULES:
            raise ValueError(f"unknown intervention rule {self.intervention!r}")
        if self.steps == "blocks" and self.adversary is None:
            raise ValueError("the blocks step rule needs an adversary")

    def instantiate(self, seed: int) -> tuple[World, RobotState]:
        rng = np.random.default_rng(seed)
        props = []
        for p in self.props:
            jx, jy = p.jitter
            dx = rng.uniform(-jx, jx) if jx else 0.0
            dy = rng.uniform(-jy, jy) if jy else 0.0
            props.append(Prop(p.x + dx, p.y + dy, p.floor, p.radius, p.low))
        agents = ()
        if self.adversary is not None:
            a = self.adversary
            gxy = (self.goal[1], self.goal[2]) if self.goal[0] == a.floor else None
            agents = (Adversary(self.start[1], self.start[2], a.floor, a.radius, a.speed, a.max_blocks,
                                a.cooldown_ticks, a.timeout_ticks, gxy, a.min_goal_distance),)
        world = World(self.bundle, tuple(props), agents, self.sim, 0, rng)
        f, x, y, h = self.start
        return world, RobotState(x, y, h, f)

    # JSON --------------------------------------------------------------
    def to_json(self) -> dict:
        m = {"sketch": self.sketch.to_json()} if self.sketch else {"bundle": bundle_to_json(self.bundle)}
        return {
            "name": self.name, "map": m,
            "start": dict(zip(("floor", "x", "y", "heading"), self.start)),
            "goal": dict(zip(("floor", "x", "y"), self.goal)),
            "props": [dataclasses.asdict(p) for p in self.props],
            "adversary": None if self.adversary is None else dataclasses.asdict(self.adversary),
            "steps": self.steps, "intervention": self.intervention, "max_ticks": self.max_ticks,
            "odometry": self.odometry.to_json(), "seeds": list(self.seeds),
            "sim": dataclasses.asdict(self.sim), "goal_tolerance": self.goal_tolerance,
        }

    @classmethod
    def from_json(cls, d: dict, base: Path | None = None) -> "Scenario":
        try:
            m = d["map"]
            sketch = None
            if "sketch" in m:
                sketch = Sketch.from_json(m["sketch"])
                bundle, _ = sketch_bundle(sketch)
            elif "bundle" in m:
                bundle = bundle_from_json(m["bundle"])
            elif "bundle_path" in m:
                bundle, _ = load_bundle((base or Path(".")) / m["bundle_path"])
            else:
                raise ParseError("map needs one of sketch, bundle, bundle_path", "map")
            s, g = d["start"], d["goal"]
            props = tuple(PropSpec(float(p["x"]), float(p["y"]), str(p["floor"]), float(p.get("radius", 0.1)),
                                   bool(p.get("low", True)), tuple(p.get("jitter", (0.0, 0.0))))
                          for p in d.get("props", []))
            adv = d.get("adversary")
            return cls(
                name=str(d["name"]), bundle=bundle,
                start=(str(s["floor"]), float(s["x"]), float(s["y"]), float(s.get("heading", 0.0))),
                goal=(str(g["floor"]), float(g["x"]), float(g["y"])),
                props=props, adversary=None if adv is None else AdversarySpec(**adv),
                steps=d.get("steps", "goal"), intervention=d.get("intervention", "reset"),
                max_ticks=int(d.get("max_ticks", 2000)),
                odometry=OdometryModel(**d.get("odometry", {})),
                seeds=tuple(int(x) for x in d.get("seeds", [0])),
                sim=SimConfig(**d.get("sim", {})), goal_tolerance=float(d.get("goal_tolerance", 1.0)),
                sketch=sketch)
        except ParseError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{type(exc).__name__}: {exc}", str(d.get("name", "scenario"))) from exc

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_json(), indent=1) + "\n")
        return path


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"{path}:{exc.lineno}:{exc.colno}") from exc
    return Scenario.from_json(doc, path.parent)


def from_sketch(name: str, sketch: Sketch, **kw) -> Scenario:
    """Scenario whose start, goal, props and pedestrian come from sketch markers."""
    bundle, marks = sketch_bundle(sketch)
    start = goal = None
    props, adv = [], None
    for fid in sorted(marks):
        m = marks[fid]
        if "S" in m:
            start = (fid, *m["S"][0], float(kw.pop("heading", 0.0)))
        if "G" in m:
            goal = (fid, *m["G"][0])
        props += [PropSpec(x, y, fid, low=True) for x, y in m.get("o", [])]
        props += [PropSpec(x, y, fid, radius=0.25, low=False) for x, y in m.get("O", [])]
        if "A" in m:
            adv = AdversarySpec(fid)
    if start is None or goal is None:
        raise ParseError("sketch needs one 'S' and one 'G'", name)
    kw.setdefault("props", tuple(props))
    kw.setdefault("adversary", adv)
    return Scenario(name, bundle, start, goal, sketch=sketch, **kw)


# --------------------------------------------------------------------------
# pedestrian policy

def advance_adversary(a: Adversary, robot: RobotState, world: World) -> tuple[Adversary, list]:
    """One tick of the blocking pedestrian. It walks to a spot 1 to 1.2 m
    ahead of the robot, stands there, and starts the next block once the
    robot has gone past it or a collision was counted."""
    dt = world.config.dt
    fx, fy = math.cos(robot.heading), math.sin(robot.heading)
    rep = dataclasses.replace
    if a.phase == "blocking":
        ahead = (a.x - robot.x) * fx + (a.y - robot.y) * fy
        outcome = None
        if a.collided:
            outcome = "fail"
        elif ahead < -a.radius:
            outcome = "success"
        elif a.block_ticks >= a.timeout_ticks:
            outcome = "fail"
        if outcome is None:
            return rep(a, block_ticks=a.block_ticks + 1), []
        return (rep(a, phase="idle", block_ticks=0, collided=False, block_index=a.block_index + 1),
                [("block_end", str(a.block_index), outcome)])
    if a.floor != robot.floor:
        return rep(a, phase="idle", block_ticks=0), []
    if a.phase == "approaching":
        tx, ty = robot.x + a.reach * fx, robot.y + a.reach * fy
        if wall_clearance(world.grid(a.floor), tx, ty) < a.radius + 0.05:
            return rep(a, phase="idle", block_ticks=0), []
        d = math.hypot(tx - a.x, ty - a.y)
        step = a.speed * dt
        if d <= step:
            return (rep(a, x=tx, y=ty, phase="blocking", block_ticks=0),
                    [("block_start", str(a.block_index), f"{tx:.2f},{ty:.2f}")])
        return rep(a, x=a.x + (tx - a.x) * step / d, y=a.y + (ty - a.y) * step / d), []
    # idle
    ticks = a.block_ticks + 1
    near_goal = a.goal_xy is not None and math.hypot(robot.x - a.goal_xy[0],
                                                     robot.y - a.goal_xy[1]) <= a.min_goal_distance
    if a.block_index >= a.max_blocks or ticks < a.cooldown_ticks or near_goal:
        return rep(a, block_ticks=ticks), []
    reach = float(world.rng.uniform(1.0, 1.2)) if world.rng is not None else 1.1
    return rep(a, phase="approaching", reach=reach, block_ticks=0), []


# --------------------------------------------------------------------------
# builders

def _corridor_bundle(fid: str, length: float, width: float, resolution: float) -> MapBundle:
    """Straight corridor along x with one-cell walls; free interior spans
    y in [resolution, width + resolution)."""
    w = int(round(length / resolution)) + 2
    h = int(round(width / resolution)) + 2
    occ = np.zeros((h, w), dtype=bool)
    occ[0, :] = occ[-1, :] = True
    occ[:, 0] = occ[:, -1] = True
    return build_bundle([FloorplanGrid(fid, resolution, occ)], [], provenance={"source": "corridor"})


def blind_spot_scenario(n_props: int = 5, spacing: float = 5.0, width: float = 3.0,
                        jitter: float = 0.3, resolution: float = 0.1, seeds=tuple(range(20))) -> Scenario:
    """Corridor with low props 5 m apart near the centre line; they drop out of
    view when closer than the camera's blind range."""
    first = 4.0
    length = first + (n_props - 1) * spacing + 5.0
    bundle = _corridor_bundle("hall", length, width, resolution)
    yc = resolution / 2 + width / 2
    props = tuple(PropSpec(first + i * spacing, yc, "hall", 0.10, True, (0.0, jitter))
                  for i in range(n_props))
    return Scenario("blind_spot", bundle, ("hall", 1.0, yc, 0.0), ("hall", length - 1.5, yc), props,
                    steps="props", max_ticks=900, seeds=tuple(seeds))


def adversary_scenario(length: float = 52.0, width: float = 3.0, blocks: int = 15,
                       resolution: float = 0.1, seeds=tuple(range(10))) -> Scenario:
    bundle = _corridor_bundle("hall", length, width, resolution)
    yc = resolution / 2 + width / 2
    return Scenario("adversary", bundle, ("hall", 1.0, yc, 0.0), ("hall", length - 1.5, yc),
                    adversary=AdversarySpec("hall", max_blocks=blocks), steps="blocks",
                    max_ticks=2400, seeds=tuple(seeds))


L_CORRIDOR = Sketch({"floor": (
    "#########",
    "#......G#",
    "#.......#",
    "#..######",
    "#..#",
    "#..#",
    "#..#",
    "#..#",
    "#S.#",
    "####",
)}, char_m=1.0, resolution=0.25)


def l_corridor_scenario(seeds=tuple(range(10))) -> Scenario:
    """Drive up the sketch, then bend toward +x. With x to the right and y
    down the rows this is a counter-clockwise, i.e. left, turn."""
    return from_sketch("l_corridor", L_CORRIDOR, heading=-math.pi / 2, seeds=tuple(seeds), max_ticks=600)


# hand-sketched task fixtures (1 character = 1 m)
TASK_SKETCHES: dict[str, Sketch] = {
    # A: office corridors with two bends
    "A": Sketch({"office": (
        "######################",
        "#S...................#",
        "#....................#",
        "#################....#",
        "#################....#",
        "#G...................#",
        "#....................#",
        "######################",
    )}),
    # B: open plaza with building blocks
    "B": Sketch({"plaza": (
        "####################",
        "#S.................#",
        "#..................#",
        "#...###.....###....#",
        "#...###.....###....#",
        "#..................#",
        "#..................#",
        "#.......####.......#",
        "#.......####.......#",
        "#..................#",
        "#.................G#",
        "####################",
    )}),
    # C: two buildings joined by a linkway
    "C": Sketch({
        "west": (
            "############",
            "#S.........#",
            "#..........#",
            "#.......a..#",
            "#..........#",
            "############",
        ),
        "east": (
            "############",
            "#..........#",
            "#..b.......#",
            "#..........#",
            "#.........G#",
            "############",
        ),
    }, exits={"a": {"type": "linkway", "margin": 1.0, "connection": "b"},
              "b": {"type": "linkway", "margin": 1.0, "connection": "a"}}),
    # D: two floors joined by stairs
    "D": Sketch({
        "level1": (
            "##############",
            "#S...........#",
            "#............#",
            "##########...#",
            "#.........s..#",
            "##############",
        ),
        "level2": (
            "##############",
            "#..t.........#",
            "#............#",
            "#...##########",
            "#............#",
            "#...........G#",
            "##############",
        ),
    }, exits={"s": {"type": "stairs", "margin": 1.0, "connection": "t"},
              "t": {"type": "stairs", "margin": 1.0, "connection": "s"}}),
    # E: maze with unmapped clutter
    "E": Sketch({"maze": (
        "#######################",
        "#S....#...............#",
        "#.....#.....o.........#",
        "#..o..#..#######......#",
        "#.....#..#.....#......#",
        "#........#.....#.o##..#",
        "#........#.....#..##..#",
        "######...#..#..#......#",
        "#........#..#.........#",
        "#........#..#......o..#",
        "#...######..######..###",
        "#.................#o..#",
        "#.................#..G#",
        "#######################",
    )}),
}


def task_scenario(task: str, seeds=(0,)) -> Scenario:
    sk = TASK_SKETCHES[task]
    headings = {"A": 0.0, "B": 0.0, "C": 0.0, "D": 0.0, "E": math.pi / 2}
    return from_sketch(f"task_{task}", sk, heading=headings[task], seeds=tuple(seeds), max_ticks=1500)


def drift_route_scenario(leg: float = 40.0, margin: float = 3.0, sigma_t: float = 0.05,
                         resolution: float = 0.25, seeds=(0,)) -> Scenario:
    """Three floors, each a ``leg``-meter corridor; stairs join the far end
    of one floor to the near end of the next."""
    fps, exits = [], []
    w = int(round(leg / resolution)) + 2
    h = int(round(3.0 / resolution)) + 2
    names = ("floor1", "floor2", "floor3")
    yc = (h - 1) / 2
    for k, fid in enumerate(names):
        occ = np.zeros((h, w), dtype=bool)
        occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
        fps.append(FloorplanGrid(fid, resolution, occ))
        m = margin / resolution
        if k > 0:
            exits.append(ExitNode(f"{fid}.in", fid, ExitType.STAIRS, m, (2.0 / resolution, yc), resolution,
                                  connection=f"{names[k - 1]}.out"))
        if k < len(names) - 1:
            exits.append(ExitNode(f"{fid}.out", fid, ExitType.STAIRS, m, (w - 1 - 2.0 / resolution, yc),
                                  resolution, connection=f"{names[k + 1]}.in"))
    bundle = build_bundle(fps, exits, provenance={"source": "drift_route"})
    y = yc * resolution
    return Scenario("drift_route", bundle, ("floor1", 1.0, y, 0.0), ("floor3", (w - 2) * resolution - 1.0, y),
                    odometry=OdometryModel(sigma_t=sigma_t), max_ticks=3000, seeds=tuple(seeds))


BUILTIN = ("blind_spot", "adversary", "l_corridor", "drift_route") + tuple(f"task_{t}" for t in TASK_SKETCHES)


def builtin_scenario(name: str, seeds=None) -> Scenario:
    """A built-in scenario by name; ``seeds`` overrides its default seed list."""
    if name.startswith("task_") and name[5:] in TASK_SKETCHES:
        sc = task_scenario(name[5:])
    elif name == "blind_spot":
        sc = blind_spot_scenario()
    elif name == "adversary":
        sc = adversary_scenario()
    elif name == "l_corridor":
        sc = l_corridor_scenario()
    elif name == "drift_route":
        sc = drift_route_scenario()
    else:
        raise KeyError(f"unknown scenario {name!r}; built-ins are {', '.join(BUILTIN)}")
    return sc if seeds is None else dataclasses.replace(sc, seeds=tuple(seeds))
