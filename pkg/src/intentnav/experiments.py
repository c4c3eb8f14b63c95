"""Desk-scale experiment runners shared by the CLI, scripts and acceptance tests."""
from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field

import numpy as np

from . import eval as ev
from .decision.net import DecisionNet, NetConfig, baseline_config, build_baseline
from .decision.synthetic import dataset_loss, make_mode_task, theta_separation
from .decision.train import DemoDataset, TrainConfig, tbptt_train
from .sim import (CameraConfig, ExpertPolicy, NetPolicy, PathTrackerPolicy, TrajectoryLog,
                  blind_spot_scenario, collect_demonstrations, drift_route_scenario, make_planner,
                  replay_odometry, run_episode, task_scenario)

# reduced widths so that training fits a single CPU core
SIM_CAMERA = CameraConfig(side=32, range_m=3.2)
SIM_NET = NetConfig(input_side=32, channels=(8, 16, 16), head_hidden=32, dropout=0.0)
SIM_TRAIN = TrainConfig(seq_len=60, frame_stride=1, k1=5, k2=10, batch_size=12, base_lr=3e-3 / 120,
                        dropout=0.0, input_side=32, epochs=1000, lr_decay_epochs=(), max_iters=300)

SYNTH_SIDE = 24
SYNTH_NET = NetConfig(input_side=SYNTH_SIDE, channels=(8, 16, 16), head_hidden=32, dropout=0.0)
SYNTH_TRAIN = TrainConfig(seq_len=20, frame_stride=1, k1=5, k2=10, batch_size=12, base_lr=3e-3 / 120,
                          dropout=0.0, input_side=SYNTH_SIDE, epochs=1000, lr_decay_epochs=(),
                          max_iters=200)


# --------------------------------------------------------------------------
# mode-conditioned toy task

@dataclass
class SyntheticResult:
    kind: str
    loss_before: float
    loss_after: float
    separation: float
    iterations: int
    seconds: float


def synthetic_experiment(kinds=("decision", "no_multimodal_memory"), train: TrainConfig = SYNTH_TRAIN,
                         net: NetConfig = SYNTH_NET, n_sequences: int = 24, length: int = 20,
                         seed: int = 1) -> dict[str, SyntheticResult]:
    ds = make_mode_task(n_sequences, length, net.input_side, np.random.default_rng(seed))
    out = {}
    for kind in kinds:
        model = DecisionNet(baseline_config(kind, net))
        t0 = time.perf_counter()
        before = dataset_loss(model, ds)
        res = tbptt_train(model, ds, train, np.random.default_rng(0))
        after = dataset_loss(model, ds)
        sep = theta_separation(model, net.input_side, np.random.default_rng(seed + 4))
        out[kind] = SyntheticResult(kind, before, after, sep, res.iterations, time.perf_counter() - t0)
    return out


# --------------------------------------------------------------------------
# blind-spot ordering

@dataclass
class BlindSpotResult:
    logs: dict[str, list[TrajectoryLog]]
    nets: dict[str, DecisionNet]
    dataset_size: int
    notes: list[str]
    throughput: dict[str, float | None] = field(default_factory=dict)

    def rates(self, kind: str) -> tuple[float, float]:
        trials = [ev.trial_of(l) for l in self.logs[kind]]
        return ev.success_rate(trials), ev.completion_rate(trials)


def train_controller(kind: str, dataset: DemoDataset, net: NetConfig = SIM_NET,
                     train: TrainConfig = SIM_TRAIN, seed: int = 0) -> DecisionNet:
    model = build_baseline(kind, dataclasses.replace(net, seed=seed))
    tbptt_train(model, dataset, train, np.random.default_rng(seed))
    return model


def blind_spot_experiment(kinds=("decision", "cnn_reactive"), eval_seeds=tuple(range(20)),
                          demo_episodes: int = 24, demo_seed0: int = 1000, noise: float = 0.4,
                          camera: CameraConfig = SIM_CAMERA, net: NetConfig = SIM_NET,
                          train: TrainConfig = SIM_TRAIN, seed: int = 0,
                          dataset: DemoDataset | None = None) -> BlindSpotResult:
    """Collect perturbed expert demonstrations on held-out prop layouts, train
    each controller kind identically, then evaluate on ``eval_seeds``."""
    scenario = blind_spot_scenario()
    notes: list[str] = []
    if dataset is None:
        dataset, notes = collect_demonstrations([scenario], ExpertPolicy(noise=noise), demo_episodes,
                                                camera=camera, seed0=demo_seed0)
    planner = make_planner(scenario)
    result = BlindSpotResult({}, {}, len(dataset), notes)
    for kind in kinds:
        model = train_controller(kind, dataset, net, train, seed)
        policy = NetPolicy(model)
        result.nets[kind] = model
        result.logs[kind] = [run_episode(policy, scenario, s, camera=camera, planner=planner)
                             for s in eval_seeds]
        result.throughput[kind] = ev.throughput_of(policy)
    return result


# --------------------------------------------------------------------------
# closed-loop fixtures

def task_experiment(tasks: str = "ABCDE", seeds=(0,), policies=None) -> dict[str, dict[str, list[TrajectoryLog]]]:
    """``runs[policy][task]`` for the scripted expert and the path tracker."""
    policies = policies or {"expert": ExpertPolicy(), "path_tracker": PathTrackerPolicy()}
    runs: dict[str, dict[str, list[TrajectoryLog]]] = {name: {} for name in policies}
    for task in tasks:
        scenario = task_scenario(task, seeds=tuple(seeds))
        planner = make_planner(scenario)
        for name, policy in policies.items():
            runs[name][task] = [run_episode(policy, scenario, s, planner=planner) for s in seeds]
    return runs


# --------------------------------------------------------------------------
# drift and anchoring

@dataclass
class DriftResult:
    anchored: TrajectoryLog
    expected_exits: list[str]
    terminal_errors: np.ndarray     # without anchoring, one per seed
    largest_margin: float

    @property
    def exceed_fraction(self) -> float:
        return float(np.mean(self.terminal_errors > self.largest_margin))


def drift_experiment(seeds=tuple(range(50)), sigma_t: float = 0.05, margin: float = 3.0,
                     trace_seed: int = 0) -> DriftResult:
    """One anchored expert run over three floorplans, then the same
    ground-truth trajectory replayed through fresh odometry noise with
    anchoring switched off."""
    scenario = drift_route_scenario(margin=margin, sigma_t=sigma_t)
    trace = run_episode(ExpertPolicy(), scenario, trace_seed, anchoring=True)
    expected = sorted(e.id for e in scenario.bundle.exits)
    errors = np.array([replay_odometry(trace, scenario, s, anchoring=False)[-1] for s in seeds])
    largest = max(e.margin_m for e in scenario.bundle.exits)
    return DriftResult(trace, expected, errors, largest)
