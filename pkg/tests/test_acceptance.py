"""Acceptance suite: one test per criterion, each checked at its stated tolerance
and wall-clock budget. The terminal summary prints one PASS/FAIL line per criterion."""
import filecmp
import math
import time

import numpy as np
import pytest

from intentnav import eval as ev
from intentnav.cli import main
from intentnav.decision import tensor as T
from intentnav.decision.gradcheck import check_gradients
from intentnav.decision.layers import MemoryCellParams, MemoryCellState, MemoryLayer, memory_cell_step, memory_layer_step
from intentnav.decision.net import DecisionNet, forward, full_scale_config, tiny_config
from intentnav.decision.tensor import Tensor
from intentnav.dlm import DLM
from intentnav.experiments import blind_spot_experiment, drift_experiment, synthetic_experiment, task_experiment
from intentnav.intention import hausdorff_to_polyline, rdp_indices, rdp_simplify
from intentnav.mapsys import bundle_to_json, complete_intra_edges, load_bundle, prune_road_network, save_bundle
from intentnav.planner import Unreachable, astar, plan_topological

from test_eval import FIXED
from test_intention import random_polyline
from test_mapsys import exit_node, random_roads, two_floor_bundle
from test_planner import SQRT2, brute_force_weight, graph_bundle, grid_oracle_cost, random_grid, random_graph

GF, TL, TR = DLM.GO_FORWARD.value, DLM.TURN_LEFT.value, DLM.TURN_RIGHT.value


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.1f} s, budget {self.seconds} s"


@pytest.mark.criterion(1, "planner oracle equivalence", 10)
def test_criterion_01_planner_oracles(record_property):
    with Budget(10):
        for seed in range(100):
            occ, a, b = random_grid(seed)
            want, got = grid_oracle_cost(occ, a, b), astar(occ, a, b)
            if math.isfinite(want):
                assert got is not None and got[1] + got[2] * SQRT2 == pytest.approx(want, abs=1e-9), seed
            else:
                assert got is None, seed
        for seed in range(50):
            n, edges = random_graph(seed)
            want = brute_force_weight(n, edges, 0, n - 1)
            bundle = graph_bundle(n, edges)
            if math.isfinite(want):
                assert plan_topological(bundle, "e0", f"e{n - 1}").weight == want, seed
            else:
                with pytest.raises(Unreachable):
                    plan_topological(bundle, "e0", f"e{n - 1}")
    record_property("measured", "100 grids, 50 graphs")


@pytest.mark.criterion(2, "RDP containment and idempotence", 5)
def test_criterion_02_rdp(record_property):
    worst = 0.0
    with Budget(5):
        for seed in range(200):
            pts, eps = random_polyline(seed)
            assert len(pts) <= 30
            simp = pts[rdp_indices(pts, eps)]
            d = hausdorff_to_polyline(pts, simp)
            assert d <= eps, seed
            assert np.array_equal(rdp_simplify(simp, eps), simp), seed
            worst = max(worst, d / eps if eps > 0 else 0.0)
    record_property("measured", f"max hausdorff/eps {worst:.3f}")


def _sum_sq(h):
    return T.sum_all(T.mul(h, h))


@pytest.mark.criterion(3, "gradient checks", 60)
def test_criterion_03_gradients(record_property):
    C, H, W, steps, tol = 4, 6, 6, 3, 1e-4
    rng = np.random.default_rng(0)
    errs = {}
    with Budget(60):
        x, w, b = (T.parameter(rng.standard_normal(s)) for s in ((2, C, H, W), (C, C, 3, 3), (C,)))
        probe = rng.standard_normal((2, C, H, W))
        for stride in (1, 2):
            out_shape = T.conv2d(x, w, b, stride, 1).shape
            pr = rng.standard_normal(out_shape)
            e = check_gradients(lambda: T.sum_all(T.mul(T.conv2d(x, w, b, stride, 1), pr)), {"x": x, "w": w, "b": b})
            errs[f"conv s{stride}"] = max(e.values())

        g, beta = T.parameter(rng.standard_normal(C)), T.parameter(rng.standard_normal(C))
        e = check_gradients(lambda: T.sum_all(T.mul(T.group_norm(x, 2, g, beta), probe)),
                            {"x": x, "gamma": g, "beta": beta})
        errs["group_norm"] = max(e.values())

        # batch of one row keeps the element-wise finite differences inside the budget
        cell = MemoryCellParams.init(C, C, H, W, rng, groups=2, dtype="float64")
        xs = [Tensor(rng.standard_normal((1, C, H, W))) for _ in range(steps)]

        def cell_loss():
            s, total = MemoryCellState.zeros(1, C, H, W, dtype="float64"), None
            for xt in xs:
                s, h = memory_cell_step(cell, s, xt)
                total = _sum_sq(h) if total is None else T.add(total, _sum_sq(h))
            return total

        errs["memory_cell"] = max(check_gradients(cell_loss, cell.named()).values())

        layer = MemoryLayer((GF, TL, TR), C, C, H, W, rng, groups=2, dtype="float64")
        modes = [[TL], [TR], [TL]]

        def layer_loss():
            s, total = layer.zero_state(1), None
            for xt, m in zip(xs, modes):
                s, h = layer.step(s, m, xt)
                total = _sum_sq(h) if total is None else T.add(total, _sum_sq(h))
            return total

        errs["multimodal_layer"] = max(check_gradients(layer_loss, layer.parameters()).values())

        net = DecisionNet(tiny_config(channels=(C, C, C), head_hidden=5, dtype="float64"))
        v = T.parameter(rng.standard_normal((3, C)))
        names = [TL, TR, GF]
        params = {k: p for k, p in net.parameters().items() if k.startswith("head.")}
        params["v"] = v
        hp = rng.standard_normal((3, 2))
        errs["heads"] = max(check_gradients(lambda: T.sum_all(T.mul(net.head_forward(v, names), hp)), params).values())
    record_property("measured", f"max rel err {max(errs.values()):.2e}")
    assert max(errs.values()) <= tol, errs


@pytest.mark.criterion(4, "multimodal isolation", 5)
def test_criterion_04_isolation(record_property):
    with Budget(5):
        rng = np.random.default_rng(7)
        for trial in range(30):
            layer = MemoryLayer((GF, TL, TR), 2, 4, 5, 5, np.random.default_rng(trial), groups=2, dtype="float64")
            modes = [str(m) for m in rng.choice([GF, TL, TR], size=int(rng.integers(1, 10)))]
            xs = [Tensor(rng.random((1, 2, 5, 5))) for _ in modes]
            states = layer.zero_state(1)
            for m, xt in zip(modes, xs):
                states, _ = memory_layer_step(layer, states, m, xt)
            for mode in set(modes):
                solo = layer.zero_state(1)
                for m, xt in zip(modes, xs):
                    if m == mode:
                        solo, _ = memory_layer_step(layer, solo, m, xt)
                assert np.array_equal(solo[mode].c.data, states[mode].c.data)
                assert np.array_equal(solo[mode].h.data, states[mode].h.data)
    record_property("measured", "30 random mode sequences bit-exact")


@pytest.mark.criterion(5, "normalization and zero net", 60)
def test_criterion_05_normalization(record_property):
    worst_mean = worst_var = 0.0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        groups = [1, 2, 4][seed % 3]
        x = rng.standard_normal((2, 8, 5, 5)) * rng.uniform(2.0, 50.0) + rng.normal(0, 5)
        out = T.group_norm(Tensor(x), groups).data.reshape(2, groups, -1)
        worst_mean = max(worst_mean, np.abs(out.mean(axis=2)).max())
        worst_var = max(worst_var, np.abs(out.var(axis=2) - 1.0).max())
    record_property("measured", f"|mean| {worst_mean:.1e}, |var-1| {worst_var:.1e}")
    assert worst_mean <= 1e-6 and worst_var <= 1e-5

    cfg = full_scale_config()
    net = DecisionNet(cfg, zero=True)
    obs = np.random.default_rng(0).random((cfg.in_channels, cfg.input_side, cfg.input_side)).astype(np.float32)
    state = net.initial_state()
    for mode in (DLM.TURN_LEFT, DLM.GO_FORWARD):
        y, state = forward(net, obs, mode, state)
        assert np.array_equal(y.data, np.zeros((1, 2)))


@pytest.mark.criterion(6, "training smoke and anti-mode-collapse", 600)
def test_criterion_06_synthetic(record_property):
    with Budget(600):
        res = synthetic_experiment()
    dec, abl = res["decision"], res["no_multimodal_memory"]
    record_property("measured", f"loss {dec.loss_before:.3f}->{dec.loss_after:.4f} in {dec.iterations} it, "
                                f"separation {dec.separation:.3f} vs ablation {abl.separation:.3f}")
    assert dec.iterations <= 200
    assert dec.loss_after <= 0.1 * dec.loss_before
    assert dec.separation >= 0.5
    assert abl.separation <= 0.5 * dec.separation


@pytest.mark.criterion(7, "blind-spot ordering", 900)
def test_criterion_07_blind_spot(record_property):
    with Budget(900):
        res = blind_spot_experiment()
    sr_d, cr_d = res.rates("decision")
    sr_c, cr_c = res.rates("cnn_reactive")
    record_property("measured", f"decision SR {sr_d:.2f} CR {cr_d:.2f}; cnn_reactive SR {sr_c:.2f} CR {cr_c:.2f}")
    assert len(res.logs["decision"]) == 20
    assert sr_d >= sr_c
    assert cr_d > cr_c


@pytest.mark.criterion(8, "closed-loop tasks A-E", 300)
def test_criterion_08_tasks(record_property):
    with Budget(300):
        runs = task_experiment()
    for task, logs in runs["expert"].items():
        trials = [ev.trial_of(l) for l in logs]
        assert ev.success_rate(trials) == 1.0, task
        assert all(l.interventions == 0 for l in logs), task
    tracker = {t: sum(l.interventions for l in logs) for t, logs in runs["path_tracker"].items()}
    record_property("measured", "path tracker interventions " + " ".join(f"{t}:{n}" for t, n in tracker.items()))
    assert tracker["E"] >= 1


@pytest.mark.criterion(9, "drift and anchor", 120)
def test_criterion_09_drift(record_property):
    with Budget(120):
        res = drift_experiment()
    detected = set()
    for row in res.anchored.rows:
        for event in filter(None, row[-1].split(";")):
            kind, *ids = event.split(":")
            if kind == "transition":
                detected.update(ids)
    record_property("measured", f"anchors {len(res.anchored.anchors)}, exceed fraction {res.exceed_fraction:.2f}")
    assert res.anchored.reached_goal
    assert sorted(detected) == res.expected_exits
    assert res.anchored.anchors and all(a["error"] == 0.0 for a in res.anchored.anchors)
    assert len(res.terminal_errors) == 50
    assert res.exceed_fraction >= 0.8


@pytest.mark.criterion(10, "metric formulas", 5)
def test_criterion_10_metrics(record_property):
    with Budget(5):
        for trials, sr, cr in FIXED:
            assert ev.success_rate(trials) == float(sr)
            assert ev.completion_rate(trials) == pytest.approx(float(cr), abs=1e-15)
        t = np.arange(0, 1.0 + 1e-9, 0.01)
        const_v = ev.smoothness(np.stack([2 * t, -t], 1), 0.01)
        cubic = ev.smoothness(np.stack([t ** 3, np.zeros_like(t)], 1), 0.01)
        assert const_v <= 1e-9
        assert abs(cubic - 6.0) <= 1e-3
        rng = np.random.default_rng(0)
        for _ in range(1000):
            n = int(rng.integers(1, 20))
            trials = [(int(rng.integers(0, n + 1)), n) for _ in range(int(rng.integers(1, 30)))]
            assert ev.completion_rate(trials) >= ev.success_rate(trials)
    record_property("measured", f"jerk const-v {const_v:.1e}, cubic {cubic:.6f}")


@pytest.mark.criterion(11, "map construction", 5)
def test_criterion_11_maps(tmp_path, record_property):
    with Budget(5):
        for n in range(10):
            edges = complete_intra_edges([exit_node(f"e{i}", pos=(i, i * i % 7)) for i in range(n)])
            assert len(edges) == n * (n - 1) // 2
            assert len({e.key for e in edges}) == len(edges)
        b = two_floor_bundle()
        back, problems = load_bundle(save_bundle(b, tmp_path / "b.json"))
        assert problems == [] and bundle_to_json(back) == bundle_to_json(b)
        for seed in range(50):
            raw = random_roads(seed)
            once = prune_road_network(raw)
            assert prune_road_network(once).to_json() == once.to_json()
            assert once.total_length() == pytest.approx(raw.total_length(), rel=1e-9)
    record_property("measured", "N=0..9, 50 way-sets")


@pytest.mark.criterion(12, "eval determinism", 300)
def test_criterion_12_determinism(tmp_path, capsys, record_property):
    args = ["eval", "--scenario", "task_A", "task_C", "task_E", "--policy", "expert", "path_tracker",
            "--seeds", "0-1", "--ablation"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    # wall-clock timing files are the only timestamped outputs
    skip = {"timing.json", "ablation_throughput.txt", "ablation_throughput.csv"}
    compared = 0
    for sub in ("logs", "reports"):
        names = sorted(str(p.relative_to(a / sub)) for p in (a / sub).rglob("*") if p.is_file() and p.name not in skip)
        match, mismatch, errors = filecmp.cmpfiles(a / sub, b / sub, names, shallow=False)
        assert mismatch == [] and errors == [], (mismatch, errors)
        compared += len(match)
    record_property("measured", f"{compared} files byte-identical")
    assert compared > 0
