"""Drifting odometry and exit-based re-anchoring."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from ..mapsys import ExitNode
from .world import RobotState, wrap_angle


@dataclass(frozen=True)
class OdometryModel:
    """Random-walk odometry error.

    Per step, translation noise has std ``sigma_t * sqrt(d)`` (d in m) on each
    body axis, and heading noise has std ``sigma_r * sqrt(|dtheta|) +
    sigma_t * sqrt(d)``. Variances therefore grow linearly with distance and
    rotation, independent of the step size. Biases are relative scale errors.
    """

    sigma_t: float = 0.0      # per sqrt(m)
    sigma_r: float = 0.0      # per sqrt(rad)
    bias_t: float = 0.0
    bias_r: float = 0.0

    @property
    def exact(self) -> bool:
        return self.sigma_t == 0 and self.sigma_r == 0 and self.bias_t == 0 and self.bias_r == 0

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class PoseEstimate:
    frame: str
    x: float
    y: float
    heading: float

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @classmethod
    def of(cls, robot: RobotState) -> "PoseEstimate":
        return cls(robot.floor, robot.x, robot.y, robot.heading)


@dataclass(frozen=True)
class OdometryDelta:
    """Motion in the body frame of the starting pose."""

    dx: float
    dy: float
    dtheta: float


def true_delta(before: RobotState, after: RobotState) -> OdometryDelta:
    c, s = math.cos(before.heading), math.sin(before.heading)
    gx, gy = after.x - before.x, after.y - before.y
    return OdometryDelta(c * gx + s * gy, -s * gx + c * gy, wrap_angle(after.heading - before.heading))


def odometry_read(model: OdometryModel, delta: OdometryDelta, rng: np.random.Generator) -> OdometryDelta:
    if model.exact:
        return delta
    d = math.hypot(delta.dx, delta.dy)
    n = rng.standard_normal(3)
    st = model.sigma_t * math.sqrt(d)
    sr = model.sigma_r * math.sqrt(abs(delta.dtheta)) + st
    return OdometryDelta(delta.dx * (1 + model.bias_t) + st * n[0],
                         delta.dy * (1 + model.bias_t) + st * n[1],
                         delta.dtheta * (1 + model.bias_r) + sr * n[2])


def integrate_odometry(est: PoseEstimate, delta: OdometryDelta) -> PoseEstimate:
    c, s = math.cos(est.heading), math.sin(est.heading)
    return PoseEstimate(est.frame, est.x + c * delta.dx - s * delta.dy,
                        est.y + s * delta.dx + c * delta.dy,
                        wrap_angle(est.heading + delta.dtheta))


def exit_detected(robot: RobotState, exit_node: ExitNode) -> bool:
    """Place-recognition stand-in: ground truth within the exit's margin."""
    if robot.floor != exit_node.floorplan_id:
        return False
    p = exit_node.metric_position
    return math.hypot(robot.x - p[0], robot.y - p[1]) <= exit_node.margin_m


def re_anchor(est: PoseEstimate, exit_node: ExitNode, detected: bool) -> PoseEstimate:
    """Snap the position estimate onto a detected exit; heading is kept."""
    if not detected:
        return est
    p = exit_node.metric_position
    return PoseEstimate(exit_node.floorplan_id, float(p[0]), float(p[1]), est.heading)


def position_error(est: PoseEstimate, robot: RobotState) -> float:
    return math.hypot(est.x - robot.x, est.y - robot.y)
