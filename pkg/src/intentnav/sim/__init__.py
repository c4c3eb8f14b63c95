"""Deterministic 2D simulator for closed-loop evaluation and data collection."""
from .world import (SAFE_DISTANCE, Adversary, ClearanceMap, Prop, RobotState, SimConfig, World,
                    integrate_unicycle, point_clearance, step_world, wall_clearance, wrap_angle)
from .odometry import (OdometryDelta, OdometryModel, PoseEstimate, exit_detected, integrate_odometry,
                       odometry_read, position_error, re_anchor, true_delta)
from .render import CameraConfig, render_observation
from .expert import ExpertConfig, NoFeasibleControl, perturbed_expert, scripted_expert
from .scenario import (AdversarySpec, PropSpec, Scenario, Sketch, adversary_scenario, advance_adversary,
                       blind_spot_scenario, drift_route_scenario, from_sketch, l_corridor_scenario,
                       load_scenario, parse_floor, sketch_bundle, task_scenario, TASK_SKETCHES, BUILTIN,
                       builtin_scenario)
from .episode import (ExpertPolicy, NetPolicy, PathTrackerPolicy, Policy, PolicyContext, StepTracker,
                      TrajectoryLog, collect_demonstrations, intervention_pose, make_planner,
                      replay_odometry, run_episode)
