"""Global planning: Dijkstra over the Exit graph, 8-connected A* over
occupancy grids, route stitching and per-tick replanning."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .mapsys import (EdgeKind, ExitNode, ExitType, FloorplanGrid, MapBundle, MapPosition, TopoEdge,
                     prune_road_network)

SQRT2 = math.sqrt(2.0)
MARGIN_COST = 5.0   # step cost multiplier inside the inflated margin (distance fields)
# (dr, dc, diagonal)
MOVES = [(-1, 0, False), (1, 0, False), (0, -1, False), (0, 1, False),
         (-1, -1, True), (-1, 1, True), (1, -1, True), (1, 1, True)]
START, GOAL = "@start", "@goal"


class PlanningError(Exception):
    pass


class Unreachable(PlanningError):
    pass


class UnknownId(PlanningError, KeyError):
    pass


class StartOccupied(PlanningError, ValueError):
    pass


class GoalOccupied(PlanningError, ValueError):
    pass


class NoPath(PlanningError):
    def __init__(self, message: str, segment: str | None = None):
        super().__init__(f"{message} (segment {segment})" if segment else message)
        self.segment = segment


Cell = tuple[int, int]
Target = "str | MapPosition"


@dataclass(frozen=True)
class TopoPath:
    nodes: tuple[str, ...]
    hops: tuple[TopoEdge, ...]
    weight: float


@dataclass(frozen=True)
class GridPath:
    floorplan_id: str
    cells: tuple[Cell, ...]
    resolution: float
    n_straight: int
    n_diagonal: int

    @property
    def cost(self) -> float:
        """Length in meters."""
        return (self.n_straight + self.n_diagonal * SQRT2) * self.resolution

    @property
    def polyline(self) -> np.ndarray:
        """(K, 2) metric points, x = col * res, y = row * res."""
        c = np.asarray(self.cells, dtype=float).reshape(-1, 2)
        return np.stack([c[:, 1], c[:, 0]], axis=1) * self.resolution

    def to_json(self) -> dict:
        return {"floorplan": self.floorplan_id, "cells": [list(c) for c in self.cells], "cost": self.cost}


@dataclass(frozen=True)
class Transition:
    """Crossing between floorplans or onto / along the road layer."""

    kind: str               # "inter" | "layer" | "road"
    from_id: str
    to_id: str
    exit_type: ExitType | None = None
    length: float = 0.0

    def to_json(self) -> dict:
        return {"transition": self.kind, "from": self.from_id, "to": self.to_id,
                "exitType": None if self.exit_type is None else self.exit_type.value,
                "length": self.length}


@dataclass(frozen=True)
class RoutePlan:
    legs: tuple[GridPath | Transition, ...]
    topo: TopoPath
    goal: str

    @property
    def segments(self) -> list[GridPath]:
        return [leg for leg in self.legs if isinstance(leg, GridPath)]

    @property
    def transitions(self) -> list[Transition]:
        return [leg for leg in self.legs if isinstance(leg, Transition)]

    def to_json(self) -> dict:
        return {"exits": [n for n in self.topo.nodes if n not in (START, GOAL)],
                "weight": self.topo.weight, "goal": self.goal,
                "legs": [leg.to_json() for leg in self.legs]}


# --------------------------------------------------------------------------
# grid search

def inflate(grid_occ: np.ndarray, radius_cells: float) -> np.ndarray:
    """Occupied cells grown by a disk of ``radius_cells``."""
    if radius_cells <= 0:
        return grid_occ.copy()
    r = int(math.floor(radius_cells))
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    disk = (yy ** 2 + xx ** 2) <= radius_cells ** 2
    return ndimage.binary_dilation(grid_occ, structure=disk)


def _neighbors(occ: np.ndarray, r: int, c: int):
    h, w = occ.shape
    for dr, dc, diag in MOVES:
        nr, nc = r + dr, c + dc
        if not (0 <= nr < h and 0 <= nc < w) or occ[nr, nc]:
            continue
        if diag and (occ[r + dr, c] or occ[r, c + dc]):
            continue  # no corner cutting
        yield nr, nc, diag


def astar(occ: np.ndarray, start: Cell, goal: Cell) -> tuple[list[Cell], int, int] | None:
    """8-connected A* with a Euclidean heuristic; ties on (f, h, cell)."""
    def h(cell):
        return math.hypot(cell[0] - goal[0], cell[1] - goal[1])

    g = {start: (0, 0)}
    parent: dict[Cell, Cell] = {}
    heap = [(h(start), h(start), start)]
    closed = set()
    while heap:
        _, _, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        if cur == goal:
            path = [cur]
            while path[-1] in parent:
                path.append(parent[path[-1]])
            ns, nd = g[cur]
            return path[::-1], ns, nd
        closed.add(cur)
        ns, nd = g[cur]
        for nr, nc, diag in _neighbors(occ, *cur):
            nxt = (nr, nc)
            if nxt in closed:
                continue
            cand = (ns, nd + 1) if diag else (ns + 1, nd)
            old = g.get(nxt)
            if old is None or cand[0] + cand[1] * SQRT2 < old[0] + old[1] * SQRT2:
                g[nxt] = cand
                parent[nxt] = cur
                hv = h(nxt)
                heapq.heappush(heap, (cand[0] + cand[1] * SQRT2 + hv, hv, nxt))
    return None


def plan_grid(grid: FloorplanGrid, start: Cell, goal: Cell, inflation: float = 0.0) -> GridPath:
    """Cost-minimal 8-connected path between two free cells.

    With ``inflation`` > 0 obstacles are first grown by that many cells (start
    and goal cells stay usable); if the inflated grid has no path the raw
    grid is searched instead.
    """
    occ = grid.cells
    for cell, err in ((start, StartOccupied), (goal, GoalOccupied)):
        r, c = cell
        if not (0 <= r < grid.height and 0 <= c < grid.width) or occ[r, c]:
            raise err(f"cell {cell} is not free on {grid.id}")
    result = None
    if inflation > 0:
        infl = inflate(occ, inflation)
        infl[start] = infl[goal] = False
        result = astar(infl, start, goal)
    if result is None:
        result = astar(occ, start, goal)
    if result is None:
        raise NoPath(f"no path {start} -> {goal} on {grid.id}")
    cells, ns, nd = result
    return GridPath(grid.id, tuple(cells), grid.resolution, ns, nd)


def distance_field(occ: np.ndarray, root: Cell, penalty: np.ndarray | None = None) -> np.ndarray:
    """Dijkstra flood from ``root`` in cell units; unreachable cells are inf.
    Entering cell n costs its step length times (1 + penalty[n])."""
    dist = np.full(occ.shape, np.inf)
    if occ[root]:
        return dist
    dist[root] = 0.0
    heap = [(0.0, root)]
    while heap:
        d, cur = heapq.heappop(heap)
        if d > dist[cur]:
            continue
        for nr, nc, diag in _neighbors(occ, *cur):
            nd = d + (SQRT2 if diag else 1.0) * (1.0 if penalty is None else 1.0 + penalty[nr, nc])
            if nd < dist[nr, nc]:
                dist[nr, nc] = nd
                heapq.heappush(heap, (nd, (nr, nc)))
    return dist


def descend(occ: np.ndarray, dist: np.ndarray, start: Cell,
            penalty: np.ndarray | None = None) -> tuple[list[Cell], int, int]:
    """Follow a distance field from ``start`` down to its root."""
    path, ns, nd = [start], 0, 0
    cur = start
    while dist[cur] > 0:
        best = None
        f = 1.0 if penalty is None else 1.0 + penalty[cur]
        for nr, nc, diag in _neighbors(occ, *cur):
            cand = (dist[nr, nc] + (SQRT2 if diag else 1.0) * f, diag, (nr, nc))
            if best is None or cand < best:
                best = cand
        if best is None or not np.isfinite(best[0]):
            raise NoPath(f"cell {cur} is not connected to the field root")
        cur = best[2]
        nd, ns = (nd + 1, ns) if best[1] else (nd, ns + 1)
        path.append(cur)
    return path, ns, nd


def nearest_finite(dist: np.ndarray, cell: Cell) -> Cell | None:
    """The reachable cell closest (Euclidean, then row-major) to ``cell``."""
    if 0 <= cell[0] < dist.shape[0] and 0 <= cell[1] < dist.shape[1] and np.isfinite(dist[cell]):
        return cell
    rr, cc = np.nonzero(np.isfinite(dist))
    if rr.size == 0:
        return None
    d2 = (rr - cell[0]) ** 2 + (cc - cell[1]) ** 2
    i = int(np.lexsort((cc, rr, d2))[0])
    return int(rr[i]), int(cc[i])


def exit_cell(e: ExitNode) -> Cell:
    return int(round(e.position[1])), int(round(e.position[0]))


def position_cell(grid: FloorplanGrid, pos: MapPosition) -> Cell:
    r, c = grid.cell_of((pos.x, pos.y))
    return min(max(r, 0), grid.height - 1), min(max(c, 0), grid.width - 1)


# --------------------------------------------------------------------------
# topological search

@dataclass(frozen=True)
class RoadEdge(TopoEdge):
    """A pruned road way used as a graph edge."""

    way_id: str = ""


def topo_adjacency(bundle: MapBundle) -> dict[str, list[tuple[str, float, TopoEdge]]]:
    """Undirected adjacency over exits and road nodes, with road ways as edges."""
    adj: dict[str, list[tuple[str, float, TopoEdge]]] = {e.id: [] for e in bundle.exits}
    for n in bundle.roads.nodes:
        adj.setdefault(n, [])
    edges = list(bundle.edges)
    roads = bundle.roads
    if roads.ways:
        if not roads.pruned:
            roads = prune_road_network(roads)
        for w in roads.ways:
            if w.nodes[0] != w.nodes[-1]:
                edges.append(RoadEdge(w.nodes[0], w.nodes[-1], float(w.length), EdgeKind.LAYER, None, w.id))
    for e in edges:
        adj.setdefault(e.u, []).append((e.v, e.weight, e))
        adj.setdefault(e.v, []).append((e.u, e.weight, e))
    for k in adj:
        adj[k].sort(key=lambda t: (t[0], t[1]))
    return adj


def dijkstra(adj, source: str, target: str) -> TopoPath:
    if source not in adj:
        raise UnknownId(source)
    if target not in adj:
        raise UnknownId(target)
    dist = {source: 0.0}
    prev: dict[str, tuple[str, TopoEdge]] = {}
    heap = [(0.0, source)]
    done = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == target:
            break
        for v, w, e in adj[u]:
            nd = d + w
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                prev[v] = (u, e)
                heapq.heappush(heap, (nd, v))
    if target not in done:
        raise Unreachable(f"{target} is not reachable from {source}")
    nodes, hops = [target], []
    while nodes[-1] != source:
        u, e = prev[nodes[-1]]
        hops.append(e)
        nodes.append(u)
    return TopoPath(tuple(nodes[::-1]), tuple(hops[::-1]), dist[target])


# --------------------------------------------------------------------------
# planner with cached distance fields

@dataclass
class Planner:
    """Plans over one bundle; caches grid distance fields rooted at exits and
    at fixed goal positions so per-tick replanning stays cheap."""

    bundle: MapBundle
    inflation: float = 1.0
    _grids: dict = field(default_factory=dict, repr=False)
    _fields: dict = field(default_factory=dict, repr=False)
    _adj: dict | None = field(default=None, repr=False)
    _segments: dict = field(default_factory=dict, repr=False)
    _penalties: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._fps = self.bundle.floorplan_map
        self._exits = self.bundle.exit_map

    # grids -----------------------------------------------------------------
    def search_grid(self, fid: str) -> np.ndarray:
        if fid not in self._grids:
            self._grids[fid] = inflate(self._fps[fid].cells, self.inflation)
        return self._grids[fid]

    def penalty(self, fid: str) -> np.ndarray:
        if fid not in self._penalties:
            raw = self._fps[fid].cells
            self._penalties[fid] = (self.search_grid(fid) & ~raw) * (MARGIN_COST - 1.0)
        return self._penalties[fid]

    def field(self, fid: str, root: Cell) -> tuple[np.ndarray, np.ndarray]:
        """(raw grid, distance field) rooted at ``root``. Cells inside the
        inflated margin stay passable but cost MARGIN_COST times more, so
        every free cell is reachable while clear routes are preferred."""
        key = (fid, root)
        if key not in self._fields:
            raw = self._fps[fid].cells
            if raw[root]:
                raise GoalOccupied(f"cell {root} is occupied on {fid}")
            penalty = self.penalty(fid)
            self._fields[key] = (raw, distance_field(raw, root, penalty))
        return self._fields[key]

    def _resolve(self, target) -> tuple[str, Cell]:
        if isinstance(target, MapPosition):
            if target.frame not in self._fps:
                raise UnknownId(target.frame)
            return target.frame, position_cell(self._fps[target.frame], target)
        if target not in self._exits:
            raise UnknownId(target)
        e = self._exits[target]
        return e.floorplan_id, exit_cell(e)

    def grid_distance(self, fid: str, cell: Cell, root: Cell) -> float:
        occ, dist = self.field(fid, root)
        near = nearest_finite(dist, cell)
        if near is None:
            return math.inf
        gap = math.hypot(near[0] - cell[0], near[1] - cell[1])
        return (dist[near] + gap) * self._fps[fid].resolution

    # topology --------------------------------------------------------------
    def adjacency(self):
        if self._adj is None:
            self._adj = topo_adjacency(self.bundle)
        return self._adj

    def plan_topological(self, start, goal) -> TopoPath:
        base = self.adjacency()
        adj = {k: list(v) for k, v in base.items()}
        s_id, g_id = start, goal
        if isinstance(start, MapPosition):
            s_id = START
            adj[START] = self._attach(start, START, adj)
        elif start not in adj:
            raise UnknownId(start)
        if isinstance(goal, MapPosition):
            g_id = GOAL
            adj[GOAL] = self._attach(goal, GOAL, adj)
        elif goal not in adj:
            raise UnknownId(goal)
        if isinstance(start, MapPosition) and isinstance(goal, MapPosition) and start.frame == goal.frame:
            fid, sc = self._resolve(start)
            _, gc = self._resolve(goal)
            d = self.grid_distance(fid, sc, gc)
            if math.isfinite(d):
                e = TopoEdge(START, GOAL, d, EdgeKind.INTRA)
                adj[START].append((GOAL, d, e))
                adj[GOAL].append((START, d, e))
        return dijkstra(adj, s_id, g_id)

    def _attach(self, pos: MapPosition, name: str, adj) -> list:
        fid, cell = self._resolve(pos)
        out = []
        for e in sorted(self.bundle.exits_on(fid), key=lambda x: x.id):
            d = self.grid_distance(fid, cell, exit_cell(e))
            if math.isfinite(d):
                edge = TopoEdge(name, e.id, d, EdgeKind.INTRA)
                out.append((e.id, d, edge))
                adj[e.id] = adj[e.id] + [(name, d, edge)]
        return out

    # stitching -------------------------------------------------------------
    def _point(self, node: str, start, goal) -> tuple[str, Cell] | None:
        if node == START:
            return self._resolve(start)
        if node == GOAL:
            return self._resolve(goal)
        if node in self._exits:
            return self._resolve(node)
        return None  # road node

    def stitch(self, topo: TopoPath, start=None, goal=None, first_leg_by_field: bool = False) -> RoutePlan:
        legs: list[GridPath | Transition] = []
        pending: list[tuple[str, Cell, Cell, str]] = []  # (fid, a, b, segment name)

        def flush():
            if not pending:
                return
            fid = pending[0][0]
            cells: list[Cell] = []
            ns = nd = 0
            for _, a, b, name in pending:
                part = self._segment(fid, a, b, name, use_field=first_leg_by_field and not legs)
                cells.extend(part.cells if not cells else part.cells[1:])
                ns += part.n_straight
                nd += part.n_diagonal
            legs.append(GridPath(fid, tuple(cells), self._fps[fid].resolution, ns, nd))
            pending.clear()

        for (u, v), hop in zip(zip(topo.nodes[:-1], topo.nodes[1:]), topo.hops):
            pu, pv = self._point(u, start, goal), self._point(v, start, goal)
            if pu and pv and pu[0] == pv[0] and hop.kind is EdgeKind.INTRA:
                if pending and pending[-1][0] != pu[0]:
                    flush()
                pending.append((pu[0], pu[1], pv[1], f"{u}->{v}"))
                continue
            flush()
            if isinstance(hop, RoadEdge):
                legs.append(Transition("road", u, v, None, hop.weight))
            elif hop.kind is EdgeKind.INTER:
                legs.append(Transition("inter", u, v, self._exits[u].exit_type, hop.weight))
            else:
                legs.append(Transition("layer", u, v, None, hop.weight))
        flush()
        goal_name = goal if isinstance(goal, str) else f"{goal.frame}:{goal.x:.3f},{goal.y:.3f}"
        return RoutePlan(tuple(legs), topo, goal_name)

    def _segment(self, fid: str, a: Cell, b: Cell, name: str, use_field: bool) -> GridPath:
        grid = self._fps[fid]
        if use_field:
            occ, dist = self.field(fid, b)
            near = nearest_finite(dist, a)
            if near is None:
                raise NoPath(f"goal cell {b} unreachable on {fid}", name)
            cells, ns, nd = descend(occ, dist, near, self.penalty(fid))
            if near != a:
                cells = [a] + cells   # off-grid pose: first hop re-joins the free space
            return GridPath(fid, tuple(cells), grid.resolution, ns, nd)
        key = (fid, a, b)
        if key not in self._segments:
            try:
                self._segments[key] = plan_grid(grid, a, b, self.inflation)
            except (StartOccupied, GoalOccupied, NoPath) as exc:
                raise NoPath(str(exc), name) from exc
        return self._segments[key]

    # entry points ----------------------------------------------------------
    def plan(self, start, goal) -> RoutePlan:
        return self.stitch(self.plan_topological(start, goal), start, goal)

    def replan(self, pose: MapPosition, goal) -> RoutePlan:
        """Fresh route from the current estimate; the leg from the pose is read
        off a cached goal-rooted distance field."""
        if pose.frame not in self._fps:
            raise UnknownId(pose.frame)
        topo = self.plan_topological(pose, goal)
        return self.stitch(topo, pose, goal, first_leg_by_field=True)


def plan_topological(bundle: MapBundle, start, goal, inflation: float = 1.0) -> TopoPath:
    return Planner(bundle, inflation).plan_topological(start, goal)


def stitch(bundle: MapBundle, topo: TopoPath, start=None, goal=None, inflation: float = 1.0) -> RoutePlan:
    return Planner(bundle, inflation).stitch(topo, start, goal)


def replan(bundle: MapBundle, pose: MapPosition, goal, planner: Planner | None = None) -> RoutePlan:
    return (planner or Planner(bundle)).replan(pose, goal)
