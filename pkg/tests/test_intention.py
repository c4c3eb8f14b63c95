import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intentnav.dlm import DLM
from intentnav.intention import (LPE_SIZE, DegenerateWindow, IntentionPlan, IntentionTracker, SignedCurvatureSample,
                                 TooFewPoints, UnknownTransition, build_intention_plan, current_intention,
                                 dlm_from_curvature, hausdorff_to_polyline, rdp_indices, rdp_simplify, render_lpe,
                                 save_png, signed_curvature, transition_intention)
from intentnav.mapsys import EdgeKind, ExitType, FloorplanGrid
from intentnav.planner import GridPath


def random_polyline(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 31))
    return np.cumsum(rng.normal(size=(n, 2)), axis=0), float(rng.uniform(0.0, 2.0))


# --------------------------------------------------------------------------
# RDP

def test_rdp_examples():
    assert rdp_simplify([(0, 0), (1, 0), (2, 0)], 0.1).tolist() == [[0, 0], [2, 0]]
    assert len(rdp_simplify([(0, 0), (1, 1), (2, 0)], 0.5)) == 3
    assert rdp_simplify([(0, 0), (1, 1), (2, 0)], 1.5).tolist() == [[0, 0], [2, 0]]
    # exactly at epsilon is dropped
    assert rdp_simplify([(0, 0), (1, 1), (2, 0)], 1.0).tolist() == [[0, 0], [2, 0]]


def test_rdp_errors():
    with pytest.raises(TooFewPoints):
        rdp_simplify([(0, 0)], 0.1)
    with pytest.raises(ValueError):
        rdp_simplify([(0, 0), (1, 1)], -1.0)


@pytest.mark.parametrize("seed", range(200))
def test_rdp_containment_and_idempotence(seed):
    pts, eps = random_polyline(seed)
    idx = rdp_indices(pts, eps)
    simp = pts[idx]
    assert idx[0] == 0 and idx[-1] == len(pts) - 1
    assert hausdorff_to_polyline(pts, simp) <= eps
    assert np.array_equal(rdp_simplify(simp, eps), simp)


# --------------------------------------------------------------------------
# curvature and DLM

def circle(radius, n=40, ccw=True):
    t = np.linspace(0, math.pi, n) * (1 if ccw else -1)
    return np.stack([radius * np.cos(t), radius * np.sin(t)], axis=1)


def test_curvature_straight():
    line = np.stack([np.arange(10.0), np.zeros(10)], axis=1)
    assert signed_curvature(line, 5).kappa == 0.0


def test_curvature_circle_both_ways():
    assert signed_curvature(circle(2.0), 20).kappa == pytest.approx(0.5, abs=1e-6)
    assert signed_curvature(circle(2.0, ccw=False), 20).kappa == pytest.approx(-0.5, abs=1e-6)


def test_curvature_degenerate_and_ends():
    p = np.array([(0, 0), (1, 0), (1, 0), (1, 0), (2, 0), (3, 0), (4, 0)], float)
    with pytest.raises(DegenerateWindow):
        signed_curvature(p, 3, window=1)
    assert signed_curvature(circle(2.0), 0).kappa == 0.0


@given(st.floats(0.5, 50.0), st.integers(5, 30))
def test_curvature_mirror_antisymmetric(radius, i):
    c = circle(radius)
    mirrored = c * np.array([1.0, -1.0])
    assert signed_curvature(mirrored, i).kappa == pytest.approx(-signed_curvature(c, i).kappa, rel=1e-9)


def test_dlm_rules():
    assert dlm_from_curvature(SignedCurvatureSample(0, 0.0), 0.3) is DLM.GO_FORWARD
    assert dlm_from_curvature(SignedCurvatureSample(0, 0.5), 0.3) is DLM.TURN_LEFT
    assert dlm_from_curvature(SignedCurvatureSample(0, -0.5), 0.3) is DLM.TURN_RIGHT
    assert dlm_from_curvature(SignedCurvatureSample(0, 0.3), 0.3) is DLM.TURN_LEFT
    for k in (-3.0, 0.0, 3.0):
        assert dlm_from_curvature(SignedCurvatureSample(0, k), 0.3, at_goal=True) is DLM.STOP
    with pytest.raises(ValueError):
        dlm_from_curvature(SignedCurvatureSample(0, 0.0), 0.0)


def test_transition_intention():
    assert transition_intention(EdgeKind.INTER, ExitType.STAIRS) is DLM.UPSTAIRS
    assert transition_intention(EdgeKind.INTER, ExitType.LINKWAY) is DLM.LINKWAY
    assert transition_intention(EdgeKind.INTER, ExitType.ELEVATOR) is DLM.TAKE_ELEVATOR
    with pytest.raises(UnknownTransition):
        transition_intention(EdgeKind.INTRA, ExitType.STAIRS)


# --------------------------------------------------------------------------
# plans

def dense(*corners, step=0.3):
    pts = [np.asarray(corners[0], float)]
    for a, b in zip(corners[:-1], corners[1:]):
        a, b = np.asarray(a, float), np.asarray(b, float)
        n = max(1, int(round(np.linalg.norm(b - a) / step)))
        pts += [a + (b - a) * k / n for k in range(1, n + 1)]
    return np.array(pts)


def test_plan_straight():
    p = build_intention_plan(dense((0, 0), (30, 0)))
    assert p.dlms == (DLM.GO_FORWARD, DLM.STOP)


def test_plan_left_corner():
    p = build_intention_plan(dense((0, 0), (20, 0), (20, 20)))
    assert p.dlms == (DLM.GO_FORWARD, DLM.TURN_LEFT, DLM.STOP)
    assert p.points[1].tolist() == [20.0, 0.0]
    assert p.radii[1] == 5.0


def test_plan_short_corner_radius_capped():
    p = build_intention_plan(dense((0, 0), (4, 0), (4, 4)))
    assert p.dlms[1] is DLM.TURN_LEFT
    assert p.radii[1] == pytest.approx(2.0) and p.radii[1] < 5.0


def test_plan_from_grid_path_and_json(tmp_path):
    gp = GridPath("g", tuple((0, c) for c in range(20)) + tuple((r, 19) for r in range(1, 20)), 0.5, 37, 0)
    p = build_intention_plan(gp)
    assert p.dlms[-1] is DLM.STOP and DLM.TURN_LEFT in p.dlms
    p.save(tmp_path / "p.json")
    import json
    back = IntentionPlan.from_json(json.loads((tmp_path / "p.json").read_text()))
    assert back.dlms == p.dlms and np.array_equal(back.points, p.points)


def random_route(seed):
    rng = np.random.default_rng(seed)
    corners = [np.zeros(2)]
    heading = 0.0
    for _ in range(int(rng.integers(1, 6))):
        heading += rng.choice([-1, 1]) * math.pi / 2
        corners.append(corners[-1] + rng.uniform(4, 15) * np.array([math.cos(heading), math.sin(heading)]))
    return dense(*corners)


@pytest.mark.parametrize("seed", range(20))
def test_plan_mirror_swaps_turns(seed):
    path = random_route(seed)
    p = build_intention_plan(path)
    q = build_intention_plan(path * np.array([1.0, -1.0]))
    assert q.dlms == p.mirrored_dlms()


@pytest.mark.parametrize("seed", range(10))
def test_plan_scale_covariance(seed):
    path = random_route(seed)
    base = build_intention_plan(path, 0.6, 0.25)
    for s in (0.5, 3.0):
        assert build_intention_plan(path * s, 0.6 * s, 0.25 / s).dlms == base.dlms


def test_plan_only_core_modes():
    for seed in range(10):
        assert all(d.is_core for d in build_intention_plan(random_route(seed)).dlms)


# --------------------------------------------------------------------------
# scheduling

def test_current_intention_examples():
    p = build_intention_plan(dense((0, 0), (40, 0), (40, 20)))
    assert current_intention((20.0, 0.0), p) is DLM.GO_FORWARD
    assert current_intention((36.0, 0.0), p) is DLM.TURN_LEFT
    assert current_intention((40.0, 20.5), p) is DLM.STOP


@pytest.mark.parametrize("seed", range(20))
def test_tracker_visits_points_in_order_once(seed):
    path = random_route(seed)
    plan = build_intention_plan(path)
    tracker = IntentionTracker(plan)
    seen = []
    for p in path:
        d = tracker.update(p)
        seen.append((d, tracker.emitted[-1] if d is not DLM.GO_FORWARD else None))
    assert tracker.emitted == sorted(set(tracker.emitted))
    assert seen[-1][0] is DLM.STOP
    # every non-filler run comes from one control point, in plan order
    runs = [s for i, s in enumerate(seen) if s[1] is not None and (i == 0 or seen[i - 1] != s)]
    want = [(plan.dlms[k], k) for k in tracker.emitted if plan.dlms[k] is not DLM.GO_FORWARD]
    assert runs == want


def test_tracker_no_backtracking():
    p = build_intention_plan(dense((0, 0), (40, 0), (40, 20)))
    tr = IntentionTracker(p)
    assert tr.update((38.0, 0.0)) is DLM.TURN_LEFT
    assert tr.update((40.0, 8.0)) is DLM.GO_FORWARD
    assert tr.update((38.0, 0.0)) is DLM.GO_FORWARD


# --------------------------------------------------------------------------
# LPE

def random_grid(seed=0):
    return FloorplanGrid("g", 0.25, np.random.default_rng(seed).random((60, 60)) < 0.3)


def test_lpe_straight_paths():
    g = FloorplanGrid("g", 0.25, np.zeros((80, 80), bool))
    img = render_lpe(g, [(5, 10), (10, 10)], [(10, 10), (15, 10)], (10.0, 10.0, 0.0))
    c = LPE_SIZE // 2
    assert img.shape == (LPE_SIZE, LPE_SIZE, 3) and img.dtype == np.uint8
    red, blue = np.argwhere(img[..., 0]), np.argwhere(img[..., 2])
    assert set(red[:, 1]) == {c} and set(blue[:, 1]) == {c}
    assert red[:, 0].min() == c and blue[:, 0].max() == c
    assert img[c, c, 0] == img[c, c, 2] == 255
    assert (img[..., 1] == 255).all()


def test_lpe_empty_history_and_off_map():
    g = FloorplanGrid("g", 0.25, np.zeros((20, 20), bool))
    img = render_lpe(g, [], [(2.5, 2.5), (4, 2.5)], (2.5, 2.5, 0.0))
    c = LPE_SIZE // 2
    assert np.argwhere(img[..., 0]).tolist() == [[c, c]]
    assert img[0, 0, 1] == 0


@pytest.mark.parametrize("theta", [0.0, 0.3, 1.9])
def test_lpe_rotation(theta):
    g = random_grid()
    hist, fut = [(5, 7.5), (7.5, 7.5)], [(7.5, 7.5), (7.5, 11)]
    a = render_lpe(g, hist, fut, (7.5, 7.5, theta))
    b = render_lpe(g, hist, fut, (7.5, 7.5, theta + math.pi / 2))
    # rotate a clockwise about the centre pixel rather than the array midpoint
    rotated = np.roll(np.rot90(a, -1), 1, axis=1)
    assert (rotated == b).all(axis=2).mean() >= 0.99


def test_save_png(tmp_path):
    from PIL import Image

    img = render_lpe(random_grid(), [], [], (7.5, 7.5, 0.0))
    save_png(img, tmp_path / "x.png")
    assert np.array_equal(np.asarray(Image.open(tmp_path / "x.png")), img)
