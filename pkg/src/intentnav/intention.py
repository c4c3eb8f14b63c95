"""Planner-to-controller interface: DLM symbols from path curvature at RDP
control points, influence radii, and LPE image rendering."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dlm import DLM
from .mapsys import EdgeKind, ExitType, FloorplanGrid

DEFAULT_THRESHOLD = 0.25     # 1/m
DEFAULT_WINDOW = 3           # polyline vertices
INFLUENCE_RADIUS = 5.0       # m
GOAL_RADIUS = 1.0            # m
LPE_SIZE = 224
LPE_WINDOW = 10.0            # m per side


class TooFewPoints(ValueError):
    pass


class DegenerateWindow(ValueError):
    pass


class UnknownTransition(ValueError):
    pass


# --------------------------------------------------------------------------
# geometry

def point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance of each row of ``p`` to segment ab."""
    p = np.atleast_2d(p)
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(p - a, axis=1)
    t = np.clip((p - a) @ ab / denom, 0.0, 1.0)
    return np.linalg.norm(p - (a + t[:, None] * ab), axis=1)


def rdp_indices(points, epsilon: float) -> list[int]:
    """Indices kept by Ramer-Douglas-Peucker; a point survives only if it is
    strictly farther than ``epsilon`` from the current chord."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 2:
        raise TooFewPoints("need at least two points")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    keep = np.zeros(len(pts), dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, len(pts) - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        d = point_segment_distance(pts[i + 1:j], pts[i], pts[j])
        k = int(np.argmax(d))
        if d[k] > epsilon:
            m = i + 1 + k
            keep[m] = True
            stack.append((m, j))
            stack.append((i, m))
    return [int(i) for i in np.flatnonzero(keep)]


def rdp_simplify(points, epsilon: float) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    return pts[rdp_indices(pts, epsilon)]


def hausdorff_to_polyline(points, polyline) -> float:
    """max over ``points`` of the distance to the nearest segment of ``polyline``."""
    pts, poly = np.asarray(points, float), np.asarray(polyline, float)
    if len(poly) == 1:
        return float(np.linalg.norm(pts - poly[0], axis=1).max())
    best = np.full(len(pts), np.inf)
    for a, b in zip(poly[:-1], poly[1:]):
        best = np.minimum(best, point_segment_distance(pts, a, b))
    return float(best.max())


@dataclass(frozen=True)
class SignedCurvatureSample:
    s: float        # arc length at the sample, m
    kappa: float    # 1/m, left turn positive


def arc_lengths(path) -> np.ndarray:
    p = np.asarray(path, dtype=float)
    return np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(p, axis=0), axis=1))])


def signed_curvature(path, index: int, window: int = DEFAULT_WINDOW) -> SignedCurvatureSample:
    """Curvature of the circle through (p[i-w], p[i], p[i+w]); the window is
    shortened near the ends of the path."""
    p = np.asarray(path, dtype=float)
    n = len(p)
    if not 0 <= index < n:
        raise IndexError(index)
    w = min(window, index, n - 1 - index)
    s = float(arc_lengths(p)[index])
    if w <= 0:
        return SignedCurvatureSample(s, 0.0)
    a = p[index] - p[index - w]
    b = p[index + w] - p[index]
    c = p[index + w] - p[index - w]
    la, lb, lc = np.linalg.norm(a), np.linalg.norm(b), np.linalg.norm(c)
    if la == 0 or lb == 0:
        raise DegenerateWindow(f"coincident points around index {index}")
    cross = a[0] * b[1] - a[1] * b[0]
    if lc == 0:
        # the path doubles back on itself: treat as a maximal turn
        return SignedCurvatureSample(s, math.copysign(2.0 / la, cross) if cross else 2.0 / la)
    return SignedCurvatureSample(s, float(2.0 * cross / (la * lb * lc)))


def dlm_from_curvature(sample: SignedCurvatureSample, threshold: float = DEFAULT_THRESHOLD,
                       at_goal: bool = False) -> DLM:
    if not threshold > 0:
        raise ValueError("threshold must be > 0")
    if at_goal:
        return DLM.STOP
    if abs(sample.kappa) < threshold:
        return DLM.GO_FORWARD
    return DLM.TURN_LEFT if sample.kappa > 0 else DLM.TURN_RIGHT


def transition_intention(edge_kind, exit_type) -> DLM:
    """Mode emitted while crossing between floorplans or map layers."""
    kind = EdgeKind(edge_kind)
    if kind is EdgeKind.INTRA:
        raise UnknownTransition("intra edges carry no transition")
    et = ExitType(exit_type) if exit_type is not None else None
    if et is ExitType.STAIRS:
        return DLM.UPSTAIRS
    if et is ExitType.LINKWAY:
        return DLM.LINKWAY
    if et is ExitType.ELEVATOR:
        return DLM.TAKE_ELEVATOR
    return DLM.GO_FORWARD


# --------------------------------------------------------------------------
# plans

@dataclass(frozen=True)
class IntentionPlan:
    points: np.ndarray              # (K, 2) metric control points
    dlms: tuple[DLM, ...]
    radii: np.ndarray               # (K,)
    midpoints: np.ndarray           # (K-1, 2)
    curvature: np.ndarray           # (K,) signed curvature at each control point

    def __len__(self) -> int:
        return len(self.dlms)

    def to_json(self) -> dict:
        return {"points": self.points.tolist(), "dlms": [d.value for d in self.dlms],
                "radii": self.radii.tolist(), "midpoints": self.midpoints.tolist(),
                "curvature": self.curvature.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "IntentionPlan":
        return cls(np.asarray(d["points"], float).reshape(-1, 2), tuple(DLM(x) for x in d["dlms"]),
                   np.asarray(d["radii"], float), np.asarray(d["midpoints"], float).reshape(-1, 2),
                   np.asarray(d["curvature"], float))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    def mirrored_dlms(self) -> tuple[DLM, ...]:
        return tuple(d.mirrored() for d in self.dlms)


def _dedupe(path: np.ndarray) -> np.ndarray:
    keep = np.concatenate([[True], np.any(np.diff(path, axis=0) != 0, axis=1)])
    return path[keep]


def build_intention_plan(path, rdp_epsilon: float | None = None,
                         curvature_threshold: float = DEFAULT_THRESHOLD, *,
                         resolution: float | None = None, window: int = DEFAULT_WINDOW,
                         influence_radius: float = INFLUENCE_RADIUS, goal_radius: float = GOAL_RADIUS,
                         terminal: DLM = DLM.STOP) -> IntentionPlan:
    """Control points from RDP over a dense metric path.

    Interior points are labelled from the signed curvature of the dense path
    at the vertex; the first point is GoForward and the last one carries
    ``terminal`` (Stop at the goal, or a transition mode at an exit). Each
    radius is min(``influence_radius``, distance to the nearest neighbouring
    midpoint); a terminal Stop uses ``goal_radius`` instead of the 5 m value.
    """
    if hasattr(path, "polyline"):
        resolution = path.resolution if resolution is None else resolution
        path = path.polyline
    dense = _dedupe(np.asarray(path, dtype=float).reshape(-1, 2))
    if rdp_epsilon is None:
        rdp_epsilon = 2.0 * (resolution if resolution is not None else 0.3)
    if len(dense) == 1:
        p = dense[:1]
        r = goal_radius if terminal is DLM.STOP else influence_radius
        return IntentionPlan(p, (terminal,), np.array([r]), np.zeros((0, 2)), np.zeros(1))
    idx = rdp_indices(dense, rdp_epsilon)
    pts = dense[idx]
    kappas = np.array([signed_curvature(dense, i, window).kappa for i in idx])
    dlms = [DLM.GO_FORWARD]
    for k in range(1, len(idx) - 1):
        dlms.append(dlm_from_curvature(SignedCurvatureSample(0.0, kappas[k]), curvature_threshold))
    dlms.append(terminal)
    mids = (pts[:-1] + pts[1:]) / 2.0
    radii = np.empty(len(pts))
    for k in range(len(pts)):
        near = [np.linalg.norm(pts[k] - mids[j]) for j in (k - 1, k) if 0 <= j < len(mids)]
        base = goal_radius if (k == len(pts) - 1 and terminal is DLM.STOP) else influence_radius
        radii[k] = min(base, min(near))
    return IntentionPlan(pts, tuple(dlms), radii, mids, kappas)


@dataclass
class IntentionTracker:
    """Monotone consumption of one plan's control points.

    A point is consumed once the pose has been inside its disk and left it,
    or once a later point's disk has been entered. ``skip_start`` consumes
    the first point immediately (plans that begin at the robot).
    """

    plan: IntentionPlan
    skip_start: bool = False
    next_index: int = 0
    _inside: int | None = field(default=None, repr=False)
    emitted: list[int] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if len(self.plan) == 0:
            raise ValueError("empty plan")
        if self.skip_start and len(self.plan) > 1:
            self.next_index = 1

    def update(self, pose_xy) -> DLM:
        p = np.asarray(pose_xy, dtype=float)[:2]
        d = np.linalg.norm(self.plan.points - p, axis=1)
        if self._inside is not None and d[self._inside] > self.plan.radii[self._inside]:
            if self._inside < len(self.plan) - 1:
                self.next_index = self._inside + 1
            self._inside = None
        cands = [k for k in range(self.next_index, len(self.plan)) if d[k] <= self.plan.radii[k]]
        if not cands:
            return DLM.GO_FORWARD
        k = min(cands, key=lambda j: (d[j], j))
        self.next_index = k
        if self._inside != k:
            self.emitted.append(k)
        self._inside = k
        return self.plan.dlms[k]


def current_intention(pose_xy, plan: IntentionPlan, tracker: IntentionTracker | None = None) -> DLM:
    """DLM for a pose; pass a tracker to keep consumption state across calls."""
    return (tracker or IntentionTracker(plan)).update(pose_xy)


# --------------------------------------------------------------------------
# LPE

def _draw_polyline(img: np.ndarray, pix: np.ndarray, channel: int) -> None:
    size = img.shape[0]
    if len(pix) == 1:
        pts = pix
    else:
        pieces = []
        for a, b in zip(pix[:-1], pix[1:]):
            n = int(np.ceil(np.max(np.abs(b - a)) * 2)) + 1
            pieces.append(a + np.linspace(0.0, 1.0, n)[:, None] * (b - a))
        pts = np.concatenate(pieces)
    rc = np.rint(pts).astype(int)
    ok = (rc[:, 0] >= 0) & (rc[:, 0] < size) & (rc[:, 1] >= 0) & (rc[:, 1] < size)
    rc = rc[ok]
    img[rc[:, 0], rc[:, 1], channel] = 255


def render_lpe(grid: FloorplanGrid, history, future, pose, window_m: float = LPE_WINDOW,
               size: int = LPE_SIZE) -> np.ndarray:
    """(size, size, 3) uint8 image centred on the pose with the heading up.

    Green holds free space of the map crop (off-map counts as occupied), red
    the recently travelled path, blue the planned path ahead. The centre
    pixel (size//2, size//2) is where both paths meet.
    """
    x0, y0, th = float(pose[0]), float(pose[1]), float(pose[2])
    px = window_m / size
    c0 = size // 2
    rows, cols = np.mgrid[0:size, 0:size]
    fwd = (c0 - rows) * px
    left = (c0 - cols) * px
    ct, st = math.cos(th), math.sin(th)
    wx = x0 + fwd * ct - left * st
    wy = y0 + fwd * st + left * ct
    r = np.rint(wy / grid.resolution).astype(int)
    c = np.rint(wx / grid.resolution).astype(int)
    inside = (r >= 0) & (r < grid.height) & (c >= 0) & (c < grid.width)
    free = np.zeros((size, size), dtype=bool)
    free[inside] = ~grid.cells[r[inside], c[inside]]
    img = np.zeros((size, size, 3), dtype=np.uint8)
    img[..., 1] = np.where(free, 255, 0)

    def to_pix(poly):
        poly = np.asarray(poly, dtype=float).reshape(-1, 2)
        if len(poly) == 0:
            return poly
        dx, dy = poly[:, 0] - x0, poly[:, 1] - y0
        f = dx * ct + dy * st
        lft = -dx * st + dy * ct
        return np.stack([c0 - f / px, c0 - lft / px], axis=1)

    for poly, ch in ((history, 0), (future, 2)):
        pix = to_pix(poly)
        if len(pix):
            _draw_polyline(img, pix, ch)
    img[c0, c0, 0] = img[c0, c0, 2] = 255
    return img


def save_png(img: np.ndarray, path: str | Path) -> None:
    from PIL import Image

    Image.fromarray(img).save(path)
