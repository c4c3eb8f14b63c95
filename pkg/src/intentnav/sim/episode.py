"""Closed-loop episodes, controller wrappers, logs and demonstration collection."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..decision.net import DecisionNet
from ..decision.train import DemoDataset, DemoRecord
from ..dlm import DLM
from ..intention import IntentionTracker, build_intention_plan, transition_intention
from ..mapsys import EdgeKind, MapPosition
from ..planner import GridPath, Planner, PlanningError, RoutePlan, Transition
from .expert import (ExpertConfig, NoFeasibleControl, perturbed_expert, point_at, project_onto,
                     scripted_expert)
from .odometry import (PoseEstimate, exit_detected, integrate_odometry, odometry_read,
                       position_error, re_anchor, true_delta)
from .render import CameraConfig, render_observation
from .scenario import Scenario
from .world import Adversary, RobotState, World, point_clearance, step_world, wrap_angle

log = logging.getLogger(__name__)

PLANNER_CLEARANCE = 0.45   # m of inflation used for the robot's grid planning


# --------------------------------------------------------------------------
# controllers

@dataclass
class PolicyContext:
    world: World
    robot: RobotState
    estimate: PoseEstimate
    route: np.ndarray                  # first leg from the estimate, metric
    truth_route: np.ndarray | None     # first leg from ground truth (privileged)


class Policy:
    """Controller interface: ``act`` maps (observation, intention, context) to
    normalised (v, theta). Only the expert may read privileged context."""

    name = "policy"
    needs_truth_route = False

    def __init__(self):
        self.forward_calls = 0
        self.forward_seconds = 0.0
        self.label = None         # control to record when it differs from the executed one

    def reset(self, seed: int) -> None:
        pass

    def act(self, obs: np.ndarray, dlm: DLM, ctx: PolicyContext) -> tuple[float, float]:
        raise NotImplementedError


class ExpertPolicy(Policy):
    """Scripted expert. With ``noise`` > 0 the executed turn rate carries an
    AR(1) perturbation while ``label`` keeps the clean command, so recorded
    demonstrations include recoveries from off-nominal states."""

    name = "expert"
    needs_truth_route = True

    def __init__(self, cfg: ExpertConfig | None = None, noise: float = 0.0, rho: float = 0.9):
        super().__init__()
        self.cfg = cfg or ExpertConfig()
        self.noise, self.rho = noise, rho
        self._rng = np.random.default_rng(0)
        self._eps = 0.0

    def reset(self, seed):
        self._rng = np.random.default_rng([seed, 11])
        self._eps = 0.0

    def act(self, obs, dlm, ctx):
        self.forward_calls += 1
        if self.noise <= 0:
            return scripted_expert(ctx.world, ctx.truth_route, ctx.robot, self.cfg)
        self._eps = self.rho * self._eps + math.sqrt(1 - self.rho ** 2) * self.noise * self._rng.standard_normal()
        # the executed command is the safe sample closest to the perturbed one
        self.label, executed = perturbed_expert(ctx.world, ctx.truth_route, ctx.robot, self._eps, self.cfg)
        return executed


class PathTrackerPolicy(Policy):
    """Pure pursuit on the estimated route with no perception at all."""

    name = "path_tracker"

    def __init__(self, lookahead: float = 1.0, speed: float = 0.8):
        super().__init__()
        self.lookahead, self.speed = lookahead, speed

    def act(self, obs, dlm, ctx):
        self.forward_calls += 1
        est = ctx.estimate
        path = ctx.route
        _, s = project_onto(path, est.xy)
        speed = self.speed
        if dlm is DLM.STOP:
            # slow down over the last metre and halt at the route end
            total = float(np.hypot(*np.diff(path, axis=0).T).sum()) if len(path) > 1 else 0.0
            remaining = max(total - s, 0.0)
            if remaining < 0.1:
                return 0.0, 0.0
            speed *= min(1.0, max(remaining, 0.2))
        tx, ty = point_at(path, s + self.lookahead) - est.xy
        alpha = wrap_angle(math.atan2(ty, tx) - est.heading)
        if abs(alpha) > math.pi / 2:
            return 0.0, float(np.sign(alpha))
        d = max(math.hypot(tx, ty), 1e-6)
        return speed, float(np.clip(2 * speed * math.sin(alpha) / d, -1.0, 1.0))


class NetPolicy(Policy):
    """A learned controller. Intentions the net has no cell for (transition
    modes) are fed as GoForward; Stop is an output override inside the net."""

    def __init__(self, net: DecisionNet, name: str | None = None):
        super().__init__()
        self.net = net
        self.name = name or net.config.kind
        self.state = net.initial_state(1)

    def reset(self, seed):
        self.state = self.net.initial_state(1)

    def act(self, obs, dlm, ctx):
        mode = dlm if (dlm is DLM.STOP or dlm.value in self.net.modes) else DLM.GO_FORWARD
        t0 = time.perf_counter()
        (v, th), self.state = self.net.act(obs, mode, self.state)
        self.forward_seconds += time.perf_counter() - t0
        self.forward_calls += 1
        return float(np.clip(v, -1, 1)), float(np.clip(th, -1, 1))


# --------------------------------------------------------------------------
# logs

LOG_COLUMNS = ("tick", "floor", "x", "y", "heading", "est_floor", "est_x", "est_y", "est_heading",
               "v", "theta", "intention", "events")


@dataclass
class TrajectoryLog:
    scenario: str
    policy: str
    seed: int
    dt: float
    rows: list[tuple] = field(default_factory=list)
    step_flags: list[bool] = field(default_factory=list)
    interventions: int = 0
    reached_goal: bool = False
    anchors: list[dict] = field(default_factory=list)
    detected_exits: list[str] = field(default_factory=list)
    forward_calls: int = 0

    @property
    def ticks(self) -> int:
        return len(self.rows)

    @property
    def time(self) -> float:
        return self.ticks * self.dt

    @property
    def successes(self) -> int:
        return int(sum(self.step_flags))

    @property
    def n_steps(self) -> int:
        return len(self.step_flags)

    def positions(self) -> np.ndarray:
        return np.array([(r[2], r[3]) for r in self.rows], dtype=float).reshape(-1, 2)

    def continuous_segments(self) -> list[np.ndarray]:
        """Ground-truth position runs not broken by floor changes or resets."""
        segs, cur, floor = [], [], None
        for r in self.rows:
            jump = "intervention" in r[12] or "anchor" in r[12] or "transition" in r[12]
            if cur and (r[1] != floor or jump):
                segs.append(np.array(cur))
                cur = []
            cur.append((r[2], r[3]))
            floor = r[1]
        if cur:
            segs.append(np.array(cur))
        return segs

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for r in self.rows:
            w.writerow([r[0], r[1], *(f"{v:.6f}" for v in r[2:5]), r[5], *(f"{v:.6f}" for v in r[6:9]),
                        f"{r[9]:.6f}", f"{r[10]:.6f}", r[11], r[12]])
        return buf.getvalue()

    def summary(self) -> dict:
        return {"scenario": self.scenario, "policy": self.policy, "seed": self.seed, "dt": self.dt,
                "ticks": self.ticks, "time": round(self.time, 6), "steps": [bool(f) for f in self.step_flags],
                "successes": self.successes, "n": self.n_steps, "interventions": self.interventions,
                "reached_goal": self.reached_goal, "anchors": self.anchors,
                "detected_exits": self.detected_exits}

    def write(self, directory: str | Path, stem: str | None = None) -> tuple[Path, Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        stem = stem or f"{self.scenario}_{self.policy}_{self.seed}"
        c, j = d / f"{stem}.csv", d / f"{stem}.json"
        c.write_text(self.csv_text())
        j.write_text(json.dumps(self.summary(), indent=1, sort_keys=True) + "\n")
        return c, j

    @classmethod
    def read(cls, csv_path: str | Path) -> "TrajectoryLog":
        csv_path = Path(csv_path)
        meta = json.loads(csv_path.with_suffix(".json").read_text())
        out = cls(meta["scenario"], meta["policy"], meta["seed"], meta["dt"],
                  step_flags=list(meta["steps"]), interventions=meta["interventions"],
                  reached_goal=meta["reached_goal"], anchors=meta["anchors"],
                  detected_exits=meta["detected_exits"])
        with csv_path.open() as fh:
            rd = csv.reader(fh)
            next(rd)
            for r in rd:
                out.rows.append((int(r[0]), r[1], float(r[2]), float(r[3]), float(r[4]), r[5], float(r[6]),
                                 float(r[7]), float(r[8]), float(r[9]), float(r[10]), r[11], r[12]))
        return out


# --------------------------------------------------------------------------
# step bookkeeping

class StepTracker:
    """Per-step success flags s_i for the three step rules."""

    def __init__(self, scenario: Scenario, world: World, ref: np.ndarray):
        self.rule = scenario.steps
        self.flags: list[bool | None] = []
        self._ok = True
        self.marks: list[float] = []
        if self.rule == "goal":
            self.flags = [None]
        elif self.rule == "props":
            floor = scenario.start[0]
            self.marks = sorted(project_onto(ref, np.array([p.x, p.y]))[1]
                                for p in world.props if p.floor == floor)
            self.flags = [None] * len(self.marks)
            self.progress = 0.0
            self.ref = ref
        self.open_blocks: dict[str, int] = {}

    def _current(self) -> int | None:
        for i, f in enumerate(self.flags):
            if f is None:
                return i
        return None

    def failure(self) -> None:
        if self.rule == "props":
            self._ok = False

    def update(self, robot: RobotState, events: list, reached: bool) -> None:
        if self.rule == "goal":
            if reached:
                self.flags[0] = True
        elif self.rule == "props":
            self.progress = max(self.progress, project_onto(self.ref, robot.xy)[1])
            while (i := self._current()) is not None and self.progress > self.marks[i] + 0.3:
                self.flags[i] = self._ok
                self._ok = True
        else:
            for e in events:
                if e[0] == "block_start":
                    self.open_blocks[e[1]] = len(self.flags)
                    self.flags.append(None)
                elif e[0] == "block_end" and e[1] in self.open_blocks:
                    self.flags[self.open_blocks.pop(e[1])] = e[2] == "success"

    def final(self) -> list[bool]:
        return [bool(f) for f in self.flags]


# --------------------------------------------------------------------------
# episode

def make_planner(scenario: Scenario) -> Planner:
    res = min(f.resolution for f in scenario.bundle.floorplans)
    return Planner(scenario.bundle, inflation=math.ceil(PLANNER_CLEARANCE / res - 1e-9))


def _first_leg(route: RoutePlan) -> tuple[GridPath, Transition | None]:
    legs = list(route.legs)
    first = next(l for l in legs if isinstance(l, GridPath))
    i = legs.index(first)
    nxt = next((l for l in legs[i + 1:] if isinstance(l, Transition)), None)
    return first, nxt


class IntentionScheduler:
    """Keeps one intention plan per leg so that control points are consumed
    across ticks. The plan is rebuilt only when the leg or its terminal mode
    changes; per-tick replans steer the robot but do not move the control
    points."""

    def __init__(self):
        self.key = None
        self.tracker: IntentionTracker | None = None

    def __call__(self, route: RoutePlan, est: PoseEstimate) -> DLM:
        leg, nxt = _first_leg(route)
        terminal = DLM.STOP if nxt is None else transition_intention(
            EdgeKind.INTER if nxt.kind == "inter" else EdgeKind.LAYER, nxt.exit_type)
        key = (leg.floorplan_id, terminal, nxt.to_id if nxt is not None else None)
        if self.tracker is None or key != self.key:
            self.key = key
            self.tracker = IntentionTracker(build_intention_plan(leg, terminal=terminal), skip_start=True)
        return self.tracker.update(est.xy)


def _reference(planner: Planner, robot: RobotState, goal: MapPosition) -> np.ndarray:
    leg, _ = _first_leg(planner.replan(MapPosition(robot.floor, robot.x, robot.y), goal))
    return leg.polyline


def intervention_pose(world: World, robot: RobotState, path: np.ndarray, step: float = 0.1,
                      margin: float = 0.15) -> RobotState:
    """Nearest path point at or ahead of the robot's projection that is clear
    of every obstacle, facing along the path."""
    _, s0 = project_onto(path, robot.xy)
    total = float(np.hypot(*np.diff(path, axis=0).T).sum()) if len(path) > 1 else 0.0
    need = world.config.safe_distance + margin
    s = s0
    best = point_at(path, total)
    while s <= total:
        p = point_at(path, s)
        if point_clearance(world, robot.floor, float(p[0]), float(p[1]))[0] >= need:
            best = p
            break
        s += step
    ahead = point_at(path, min(s + 0.3, total)) - best
    if np.hypot(*ahead) < 1e-9:
        ahead = best - point_at(path, max(s - 0.3, 0.0))
    h = math.atan2(ahead[1], ahead[0]) if np.hypot(*ahead) > 1e-9 else robot.heading
    return RobotState(float(best[0]), float(best[1]), wrap_angle(h), robot.floor)


def _shift(est: PoseEstimate, before: RobotState, after: RobotState) -> PoseEstimate:
    """Move the estimate by the same rigid displacement as the ground truth."""
    return PoseEstimate(after.floor if est.frame == before.floor else est.frame,
                        est.x + after.x - before.x, est.y + after.y - before.y,
                        wrap_angle(est.heading + after.heading - before.heading))


def run_episode(policy: Policy, scenario: Scenario, seed: int, *, camera: CameraConfig | None = None,
                anchoring: bool = True, max_ticks: int | None = None, recorder=None,
                planner: Planner | None = None) -> TrajectoryLog:
    """Closed loop: replan from the estimate, derive the intention, render,
    act, step; collisions trigger an intervention that resets the robot onto
    the planned path (or ends the episode, per the scenario rule)."""
    camera = camera or CameraConfig()
    planner = planner or make_planner(scenario)
    world, robot = scenario.instantiate(seed)
    goal = MapPosition(*scenario.goal)
    odo_rng = np.random.default_rng([seed, 7])
    est = PoseEstimate.of(robot)
    policy.reset(seed)
    calls0 = policy.forward_calls
    out = TrajectoryLog(scenario.name, policy.name, seed, scenario.sim.dt)
    ref = _reference(planner, robot, goal)
    steps = StepTracker(scenario, world, ref)
    exits = scenario.bundle.exit_map
    route = None
    scheduler = IntentionScheduler()
    limit = scenario.max_ticks if max_ticks is None else max_ticks
    for tick in range(limit):
        events: list = []
        try:
            route = planner.replan(MapPosition(est.frame, est.x, est.y), goal)
        except PlanningError as exc:
            events.append(("plan_failed", type(exc).__name__, ""))
            if route is None:
                break
        dlm = scheduler(route, est)
        est_leg, est_next = _first_leg(route)
        truth_route, truth_next = None, None
        if policy.needs_truth_route or est_next is not None:
            try:
                truth_plan = planner.replan(MapPosition(robot.floor, robot.x, robot.y), goal)
                tleg, truth_next = _first_leg(truth_plan)
                truth_route = tleg.polyline
            except PlanningError:
                truth_route = ref
        obs = render_observation(world, robot, camera)
        ctx = PolicyContext(world, robot, est, est_leg.polyline, truth_route)
        stuck = False
        policy.label = None
        try:
            control = policy.act(obs, dlm, ctx)
        except NoFeasibleControl as exc:
            control, stuck = (0.0, 0.0), True
            events.append(("no_feasible_control", "", str(exc)))
        if recorder is not None:
            recorder(obs, dlm, control if policy.label is None or stuck else policy.label)
        before = robot
        world, robot, ev = step_world(world, robot, control)
        events += ev
        est = integrate_odometry(est, odometry_read(scenario.odometry, true_delta(before, robot), odo_rng))

        if stuck or any(e[0] == "collision" for e in ev):
            out.interventions += 1
            steps.failure()
            world = dataclasses.replace(world, agents=tuple(
                dataclasses.replace(a, collided=True) if a.phase == "blocking" else a for a in world.agents))
            if scenario.intervention == "terminate":
                events.append(("terminated", "", ""))
                out.rows.append(_row(tick, robot, est, control, dlm, events))
                break
            moved = intervention_pose(world, robot, ref)
            est = _shift(est, robot, moved)
            robot = moved
            events.append(("intervention", f"{robot.x:.2f},{robot.y:.2f}", ""))

        # topological transitions
        for tr in (est_next, truth_next):
            if tr is None or tr.kind != "inter":
                continue
            dep = exits[tr.from_id]
            if exit_detected(robot, dep):
                arr = exits[tr.to_id]
                out.detected_exits += [dep.id, arr.id]
                before = robot
                p = arr.metric_position
                landed = RobotState(float(p[0]), float(p[1]), robot.heading, arr.floorplan_id)
                try:
                    ref = _reference(planner, landed, goal)
                    d = point_at(ref, 0.5) - ref[0]
                    if np.hypot(*d) > 1e-9:
                        landed = dataclasses.replace(landed, heading=math.atan2(d[1], d[0]))
                except PlanningError:
                    pass
                robot = landed
                est = _shift(est, before, robot)
                events.append(("transition", dep.id, arr.id))
                if anchoring:
                    est = re_anchor(est, arr, True)
                    err = position_error(est, robot)
                    out.anchors.append({"tick": tick, "exit": arr.id, "error": err})
                    events.append(("anchor", arr.id, f"{err:.6f}"))
                break

        reached = robot.floor == goal.frame and math.hypot(robot.x - goal.x, robot.y - goal.y) <= scenario.goal_tolerance
        steps.update(robot, events, reached)
        out.rows.append(_row(tick, robot, est, control, dlm, events))
        if reached:
            out.reached_goal = True
            break
    out.step_flags = steps.final()
    out.forward_calls = policy.forward_calls - calls0
    return out


def _row(tick, robot, est, control, dlm, events) -> tuple:
    ev = ";".join(":".join(str(x) for x in e if x != "") for e in events)
    return (tick, robot.floor, robot.x, robot.y, robot.heading, est.frame, est.x, est.y, est.heading,
            float(control[0]), float(control[1]), dlm.value, ev)


# --------------------------------------------------------------------------
# odometry replay

def replay_odometry(trace: TrajectoryLog, scenario: Scenario, seed: int, anchoring: bool,
                    model=None) -> list[float]:
    """Re-run the odometry over a logged ground-truth trajectory with a new
    noise seed; returns the position error after every tick."""
    model = model or scenario.odometry
    rng = np.random.default_rng([seed, 7])
    exits = scenario.bundle.exit_map
    f, x, y, h = scenario.start
    prev = RobotState(x, y, h, f)
    est = PoseEstimate.of(prev)
    errors = []
    for r in trace.rows:
        cur = RobotState(r[2], r[3], r[4], r[1])
        evs = r[12].split(";") if r[12] else []
        jump = next((e for e in evs if e.startswith("transition") or e.startswith("intervention")), None)
        if jump is None:
            est = integrate_odometry(est, odometry_read(model, true_delta(prev, cur), rng))
        else:
            # the tick's own motion is folded into the jump; no odometry for teleports
            est = _shift(est, prev, cur)
            if jump.startswith("transition") and anchoring:
                est = re_anchor(est, exits[jump.split(":")[2]], True)
        errors.append(position_error(est, cur))
        prev = cur
    return errors


# --------------------------------------------------------------------------
# demonstrations

def collect_demonstrations(scenarios, expert: Policy | None = None, episodes: int = 10,
                           ticks: int | None = None, camera: CameraConfig | None = None,
                           seed0: int = 0) -> tuple[DemoDataset | None, list[str]]:
    """Record (observation, intention, expert control) per tick. Episodes where
    the expert needs an intervention, or that record nothing, are skipped."""
    expert = expert or ExpertPolicy()
    camera = camera or CameraConfig()
    seqs: list[list[DemoRecord]] = []
    notes: list[str] = []
    for scenario in scenarios:
        planner = make_planner(scenario)
        for k in range(episodes):
            seed = seed0 + k
            recs: list[DemoRecord] = []

            def rec(obs, dlm, control, recs=recs):
                recs.append(DemoRecord(obs.copy(), dlm, float(np.clip(control[0], -1, 1)),
                                       float(np.clip(control[1], -1, 1)), len(recs) * scenario.sim.dt))

            trace = run_episode(expert, scenario, seed, camera=camera, max_ticks=ticks, recorder=rec,
                                planner=planner)
            if trace.interventions:
                notes.append(f"{scenario.name} seed {seed}: skipped, expert needed "
                             f"{trace.interventions} intervention(s)")
            elif not recs:
                notes.append(f"{scenario.name} seed {seed}: skipped, zero-length episode")
            else:
                seqs.append(recs)
    for n in notes:
        log.warning(n)
    return (DemoDataset.from_sequences(seqs) if seqs else None), notes
