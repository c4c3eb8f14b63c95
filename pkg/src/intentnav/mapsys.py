"""Two-level map: an Exit graph over floorplan occupancy grids plus a pruned
outdoor road network.

Pixel coordinates are (x, y) = (column, row). A floorplan-frame metric
position is pixel * resolution, so cell (r, c) is centred at
(c * res, r * res).
"""
from __future__ import annotations

import dataclasses
import itertools
import json
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

EARTH_RADIUS_M = 6_371_008.8


class MapError(Exception):
    pass


class EmptyImage(MapError, ValueError):
    pass


class InvalidResolution(MapError, ValueError):
    pass


class DanglingWayReference(MapError, KeyError):
    pass


class MixedFloorplans(MapError, ValueError):
    pass


class ImplausibleMeasurement(MapError, ValueError):
    pass


class FrameMismatch(MapError, ValueError):
    pass


class ParseError(MapError, ValueError):
    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


class ExitType(str, Enum):
    INDOOR = "indoor"
    OUTDOOR = "outdoor"
    STAIRS = "stairs"
    LINKWAY = "linkway"
    ELEVATOR = "elevator"   # extension: elevator lobby exits


class EdgeKind(str, Enum):
    INTRA = "intra"
    INTER = "inter"
    LAYER = "layer"


@dataclass(frozen=True)
class ExitNode:
    id: str
    floorplan_id: str
    exit_type: ExitType
    margin: float
    position: tuple[float, float]
    resolution: float
    gps: tuple[float, float] | None = None
    connection: str | None = None

    @property
    def metric_position(self) -> np.ndarray:
        return np.asarray(self.position, dtype=float) * self.resolution

    @property
    def margin_m(self) -> float:
        return self.margin * self.resolution

    def to_json(self) -> dict:
        return {"id": self.id, "floorplanId": self.floorplan_id, "type": self.exit_type.value,
                "margin": self.margin, "position": list(self.position),
                "gps": None if self.gps is None else list(self.gps),
                "connection": self.connection, "resolution": self.resolution}

    @classmethod
    def from_json(cls, d: dict) -> "ExitNode":
        return cls(id=str(d["id"]), floorplan_id=str(d["floorplanId"]), exit_type=ExitType(d["type"]),
                   margin=d["margin"], position=tuple(d["position"]), resolution=d["resolution"],
                   gps=None if d.get("gps") is None else tuple(d["gps"]),
                   connection=d.get("connection"))


@dataclass(frozen=True, eq=False)
class FloorplanGrid:
    """Binary occupancy raster; ``cells[r, c]`` is True where occupied."""

    id: str
    resolution: float
    cells: np.ndarray
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.resolution > 0:
            raise InvalidResolution(f"resolution must be > 0, got {self.resolution}")
        cells = np.asarray(self.cells, dtype=bool)
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def free(self) -> np.ndarray:
        return ~self.cells

    def in_bounds(self, x: float, y: float) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def cell_of(self, point_m) -> tuple[int, int]:
        """(row, col) of the cell whose centre is nearest to a metric point."""
        x, y = point_m
        return int(round(y / self.resolution)), int(round(x / self.resolution))

    def cell_center(self, row: int, col: int) -> np.ndarray:
        return np.array([col * self.resolution, row * self.resolution])

    def __eq__(self, other):
        if not isinstance(other, FloorplanGrid):
            return NotImplemented
        return (self.id == other.id and self.resolution == other.resolution
                and tuple(self.origin) == tuple(other.origin) and np.array_equal(self.cells, other.cells))

    def __hash__(self):
        return hash((self.id, self.resolution, self.cells.shape))


@dataclass(frozen=True)
class TopoEdge:
    u: str
    v: str
    weight: float
    kind: EdgeKind
    lower_bound: float | None = None   # straight-line distance, for intra edges

    @property
    def key(self) -> frozenset:
        return frozenset((self.u, self.v))

    def other(self, node: str) -> str:
        return self.v if node == self.u else self.u


@dataclass(frozen=True)
class RoadNode:
    id: str
    lat: float
    lon: float


@dataclass(frozen=True)
class Way:
    id: str
    street_id: str
    nodes: tuple[str, ...]
    length: float | None = None     # explicit length overrides geodesic segment lengths


@dataclass(frozen=True)
class RoadNetwork:
    nodes: dict[str, RoadNode] = field(default_factory=dict)
    ways: tuple[Way, ...] = ()
    pruned: bool = False

    def total_length(self) -> float:
        return sum(sum(seg_len for *_, seg_len in _way_segments(w, self.nodes)) for w in self.ways)

    def to_json(self) -> dict:
        return {"nodes": [{"id": n.id, "lat": n.lat, "lon": n.lon} for n in self.nodes.values()],
                "ways": [{"id": w.id, "street_id": w.street_id, "nodes": list(w.nodes),
                          **({} if w.length is None else {"length": w.length})} for w in self.ways],
                "pruned": self.pruned}

    @classmethod
    def from_json(cls, d: dict) -> "RoadNetwork":
        nodes = {str(n["id"]): RoadNode(str(n["id"]), float(n["lat"]), float(n["lon"]))
                 for n in d.get("nodes", [])}
        ways = tuple(Way(str(w["id"]), str(w.get("street_id", w["id"])), tuple(str(x) for x in w["nodes"]),
                         w.get("length")) for w in d.get("ways", []))
        return cls(nodes, ways, bool(d.get("pruned", False)))


@dataclass(frozen=True)
class MapBundle:
    floorplans: tuple[FloorplanGrid, ...] = ()
    exits: tuple[ExitNode, ...] = ()
    edges: tuple[TopoEdge, ...] = ()
    roads: RoadNetwork = field(default_factory=RoadNetwork)
    provenance: dict = field(default_factory=dict)

    @property
    def floorplan_map(self) -> dict[str, FloorplanGrid]:
        return {f.id: f for f in self.floorplans}

    @property
    def exit_map(self) -> dict[str, ExitNode]:
        return {e.id: e for e in self.exits}

    def floorplan(self, fid: str) -> FloorplanGrid:
        return self.floorplan_map[fid]

    def exits_on(self, fid: str) -> list[ExitNode]:
        return [e for e in self.exits if e.floorplan_id == fid]

    def edge(self, u: str, v: str) -> TopoEdge:
        key = frozenset((u, v))
        for e in self.edges:
            if e.key == key:
                return e
        raise KeyError(f"no edge {u} - {v}")

    def with_edge_weight(self, u: str, v: str, measured: float) -> "MapBundle":
        """New bundle with one edge re-weighted by a measured traversal."""
        old = self.edge(u, v)
        new = update_edge_weight(old, measured)
        return dataclasses.replace(self, edges=tuple(new if e is old else e for e in self.edges))


@dataclass(frozen=True)
class MapPosition:
    """A metric position in the frame of one floorplan."""

    frame: str
    x: float
    y: float


@dataclass(frozen=True)
class Violation:
    code: str
    subject: str
    message: str

    def __str__(self) -> str:
        return f"[{self.code}] {self.subject}: {self.message}"


# --------------------------------------------------------------------------
# floorplans

def luminance_free(pixel) -> bool:
    """Default colour rule: luminance above half scale is free space."""
    return _luminance(np.asarray(pixel, dtype=float)[None, None])[0, 0] > 0.5


def _luminance(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=float)
    scale = 255.0 if img.max(initial=0) > 1.0 else 1.0
    if img.ndim == 2:
        return img / scale
    rgb = img[..., :3]
    if rgb.shape[-1] < 3:
        return rgb[..., 0] / scale
    return (0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]) / scale


def binarize_floorplan(image, resolution: float, free_rule: Callable | None = None,
                       fid: str = "floorplan", origin=(0.0, 0.0)) -> FloorplanGrid:
    """Occupancy grid from a raster: a cell is free iff its pixel passes ``free_rule``.

    ``free_rule`` receives one pixel (scalar or channel vector). When omitted
    the luminance rule is applied to the whole image at once.
    """
    img = np.asarray(image)
    if img.size == 0 or img.ndim < 2:
        raise EmptyImage("floorplan image has no pixels")
    if not (isinstance(resolution, (int, float)) and resolution > 0):
        raise InvalidResolution(f"resolution must be > 0, got {resolution}")
    if free_rule is None:
        free = _luminance(img) > 0.5
    else:
        h, w = img.shape[:2]
        free = np.array([[bool(free_rule(img[r, c])) for c in range(w)] for r in range(h)], dtype=bool)
    return FloorplanGrid(fid, float(resolution), ~free, tuple(origin))


def load_raster(path: str | Path) -> np.ndarray:
    """Read a PNG or PGM floorplan raster."""
    from PIL import Image

    with Image.open(path) as im:
        if im.mode not in ("L", "RGB", "RGBA"):
            im = im.convert("RGB")
        return np.asarray(im)


def encode_cells(cells: np.ndarray) -> str:
    """Row-major run-length code: '<count><symbol>' with '.' free and '#' occupied."""
    flat = np.asarray(cells, dtype=bool).ravel()
    if flat.size == 0:
        return ""
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    starts = np.concatenate([[0], change])
    ends = np.concatenate([change, [flat.size]])
    return "".join(f"{e - s}{'#' if flat[s] else '.'}" for s, e in zip(starts, ends))


_RUN = re.compile(r"(\d+)([.#])")


def decode_cells(code: str, width: int, height: int) -> np.ndarray:
    pos, runs = 0, []
    for m in _RUN.finditer(code):
        if m.start() != pos:
            raise ParseError(f"bad run-length token at offset {pos}")
        runs.append((int(m.group(1)), m.group(2) == "#"))
        pos = m.end()
    if pos != len(code):
        raise ParseError(f"bad run-length token at offset {pos}")
    flat = np.concatenate([np.full(n, occ, dtype=bool) for n, occ in runs]) if runs else np.zeros(0, bool)
    if flat.size != width * height:
        raise ParseError(f"{flat.size} cells encoded, expected {width}x{height}")
    return flat.reshape(height, width)


# --------------------------------------------------------------------------
# road network

def haversine(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp, dl = p2 - p1, math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


def _way_segments(way: Way, nodes: dict[str, RoadNode]):
    """(u, v, length) per consecutive node pair; an explicit way length is
    spread over the segments in proportion to their geodesic lengths."""
    for n in way.nodes:
        if n not in nodes:
            raise DanglingWayReference(f"way {way.id} references missing node {n}")
    pairs = list(zip(way.nodes[:-1], way.nodes[1:]))
    geo = [haversine(nodes[a].lat, nodes[a].lon, nodes[b].lat, nodes[b].lon) for a, b in pairs]
    if way.length is not None and len(pairs) == 1:
        geo = [float(way.length)]
    elif way.length is not None and pairs:
        total = sum(geo)
        geo = [way.length * g / total for g in geo] if total > 0 else [way.length / len(pairs)] * len(pairs)
    return [(a, b, g) for (a, b), g in zip(pairs, geo)]


def prune_road_network(raw: RoadNetwork) -> RoadNetwork:
    """Keep dead-ends, self-loop starts, intersections and street-id changes.

    Every chain of segments between two retained nodes becomes one two-node
    way whose explicit length is the accumulated polyline length.
    """
    segs = []   # (u, v, length, way index)
    for wi, w in enumerate(raw.ways):
        segs.extend((a, b, L, wi) for a, b, L in _way_segments(w, raw.nodes))
    incident: dict[str, list[int]] = {}
    for si, (a, b, _, _) in enumerate(segs):
        incident.setdefault(a, []).append(si)
        incident.setdefault(b, []).append(si)

    def street(si):
        return raw.ways[segs[si][3]].street_id

    keep = set()
    for n, inc in incident.items():
        if len(inc) != 2 or len({street(s) for s in inc}) > 1:
            keep.add(n)
    for w in raw.ways:
        if len(w.nodes) > 1 and w.nodes[0] == w.nodes[-1]:
            keep.add(w.nodes[0])

    visited = [False] * len(segs)
    chains = []   # (start, end, length, [segment ids])

    def walk(start, si):
        path, length, node = [], 0.0, start
        while True:
            visited[si] = True
            path.append(si)
            a, b, L, _ = segs[si]
            length += L
            node = b if a == node else a
            if node in keep:
                return node, length, path
            nxt = [s for s in incident[node] if not visited[s]]
            if not nxt:
                return node, length, path
            si = nxt[0]

    def walk_from(sources):
        for n in sorted(sources):
            for si in sorted(incident.get(n, []), key=lambda s: (segs[s][1] if segs[s][0] == n else segs[s][0], s)):
                if not visited[si]:
                    end, length, path = walk(n, si)
                    chains.append((n, end, length, path))

    walk_from(keep)
    # cycles with no retained node: anchor each at its smallest node id
    while not all(visited):
        component = {n for si, v in enumerate(visited) if not v for n in segs[si][:2]}
        anchor = min(component)
        keep.add(anchor)
        walk_from([anchor])

    ways, used = [], set()
    for u, v, length, path in chains:
        way_ids = {segs[s][3] for s in path}
        src = raw.ways[next(iter(way_ids))]
        whole = len(way_ids) == 1 and len(path) == len(src.nodes) - 1
        wid = src.id if whole else f"{u}-{v}"
        base, k = wid, 1
        while wid in used:
            k += 1
            wid = f"{base}#{k}"
        used.add(wid)
        ways.append(Way(wid, street(path[0]), (u, v), length))
    nodes = {n: raw.nodes[n] for n in sorted(keep) if n in raw.nodes}
    return RoadNetwork(nodes, tuple(sorted(ways, key=lambda w: w.id)), pruned=True)


# --------------------------------------------------------------------------
# topology

def complete_intra_edges(exits: Iterable[ExitNode]) -> list[TopoEdge]:
    """All C(N, 2) exit pairs of one floorplan, weighted by Euclidean distance."""
    exits = sorted(exits, key=lambda e: e.id)
    if len({e.floorplan_id for e in exits}) > 1:
        raise MixedFloorplans(sorted({e.floorplan_id for e in exits}))
    out = []
    for a, b in itertools.combinations(exits, 2):
        d = float(np.hypot(*(np.asarray(a.position, float) - np.asarray(b.position, float)))) * a.resolution
        out.append(TopoEdge(a.id, b.id, d, EdgeKind.INTRA, lower_bound=d))
    return out


def update_edge_weight(edge: TopoEdge, measured_distance: float) -> TopoEdge:
    """Latest measurement wins, guarded by the straight-line lower bound."""
    if not measured_distance > 0:
        raise ImplausibleMeasurement(f"measured distance must be > 0, got {measured_distance}")
    if edge.lower_bound is not None and measured_distance < edge.lower_bound - 1e-12:
        raise ImplausibleMeasurement(
            f"{measured_distance} m is shorter than the straight line {edge.lower_bound} m")
    return dataclasses.replace(edge, weight=float(measured_distance))


def exit_reached(pose: MapPosition, exit_node: ExitNode) -> bool:
    if pose.frame != exit_node.floorplan_id:
        raise FrameMismatch(f"pose in frame {pose.frame}, exit {exit_node.id} on {exit_node.floorplan_id}")
    d = math.hypot(pose.x - exit_node.metric_position[0], pose.y - exit_node.metric_position[1])
    return d <= exit_node.margin_m


def nearest_road_node(roads: RoadNetwork, gps: tuple[float, float]) -> str | None:
    if not roads.nodes:
        return None
    return min(roads.nodes.values(), key=lambda n: (haversine(gps[0], gps[1], n.lat, n.lon), n.id)).id


def build_bundle(floorplans: Iterable[FloorplanGrid], exits: Iterable[ExitNode],
                 roads: RoadNetwork | None = None, extra_edges: Iterable[TopoEdge] = (),
                 provenance: dict | None = None) -> MapBundle:
    """Assemble a bundle: complete intra edges per floorplan, an inter edge per
    connection pair, a layer edge from each outdoor exit to its nearest road node."""
    floorplans, exits = tuple(floorplans), tuple(exits)
    roads = roads or RoadNetwork()
    if roads.ways and not roads.pruned:
        roads = prune_road_network(roads)
    edges: list[TopoEdge] = []
    for fp in floorplans:
        edges.extend(complete_intra_edges([e for e in exits if e.floorplan_id == fp.id]))
    seen = set()
    for e in exits:
        if e.connection and frozenset((e.id, e.connection)) not in seen:
            seen.add(frozenset((e.id, e.connection)))
            edges.append(TopoEdge(*sorted((e.id, e.connection)), 0.0, EdgeKind.INTER))
        if e.exit_type is ExitType.OUTDOOR and e.gps is not None:
            rn = nearest_road_node(roads, e.gps)
            if rn is not None:
                edges.append(TopoEdge(e.id, rn, 0.0, EdgeKind.LAYER))
    edges.extend(extra_edges)
    return MapBundle(floorplans, exits, tuple(edges), roads, dict(provenance or {}))


# --------------------------------------------------------------------------
# validation

def validate_bundle(bundle: MapBundle) -> list[Violation]:
    out: list[Violation] = []
    fps: dict[str, FloorplanGrid] = {}
    for fp in bundle.floorplans:
        if fp.id in fps:
            out.append(Violation("duplicate-floorplan", fp.id, "floorplan id is not unique"))
        fps[fp.id] = fp
    exits: dict[str, ExitNode] = {}
    for e in bundle.exits:
        if e.id in exits:
            out.append(Violation("duplicate-exit", e.id, "exit id is not unique"))
        exits[e.id] = e
    for e in bundle.exits:
        if not e.resolution > 0:
            out.append(Violation("resolution", e.id, f"resolution {e.resolution} must be > 0"))
        if e.margin < 0:
            out.append(Violation("margin", e.id, f"negative margin {e.margin}"))
        if e.exit_type is ExitType.OUTDOOR and e.gps is None:
            out.append(Violation("gps", e.id, "outdoor exit without gps"))
        fp = fps.get(e.floorplan_id)
        if fp is None:
            out.append(Violation("missing-floorplan", e.id, f"floorplan {e.floorplan_id} does not exist"))
        else:
            if not fp.in_bounds(*e.position):
                out.append(Violation("bounds", e.id, f"position {e.position} outside {fp.id}"))
            if e.resolution != fp.resolution:
                out.append(Violation("resolution", e.id,
                                     f"resolution {e.resolution} differs from floorplan {fp.resolution}"))
        if e.connection is not None:
            other = exits.get(e.connection)
            if other is None:
                out.append(Violation("dangling-connection", e.id, f"connection {e.connection} does not exist"))
            else:
                if other.floorplan_id == e.floorplan_id:
                    out.append(Violation("connection-floorplan", e.id,
                                         f"connection {other.id} is on the same floorplan"))
                if other.connection != e.id:
                    out.append(Violation("connection-backref", e.id,
                                         f"{other.id} does not connect back"))
    road_ids = set(bundle.roads.nodes)
    for rid in sorted(road_ids & set(exits)):
        out.append(Violation("id-clash", rid, "road node id equals an exit id"))
    seen = set()
    for edge in bundle.edges:
        name = f"{edge.u}-{edge.v}"
        if (edge.key, edge.kind) in seen:
            out.append(Violation("duplicate-edge", name, "edge listed twice"))
        seen.add((edge.key, edge.kind))
        a, b = exits.get(edge.u), exits.get(edge.v)
        if edge.kind is EdgeKind.LAYER:
            ends = [edge.u in exits, edge.v in exits]
            roads_ok = [edge.u in road_ids, edge.v in road_ids]
            if sorted(ends) != [False, True] or sorted(roads_ok) != [False, True]:
                out.append(Violation("layer-edge", name, "layer edge must join one exit and one road node"))
            if edge.weight < 0:
                out.append(Violation("weight", name, "negative weight"))
            continue
        if a is None or b is None:
            missing = edge.u if a is None else edge.v
            out.append(Violation("dangling-edge", name, f"endpoint {missing} does not exist"))
            continue
        if edge.kind is EdgeKind.INTRA:
            if a.floorplan_id != b.floorplan_id:
                out.append(Violation("intra-edge", name, "intra edge spans two floorplans"))
            else:
                straight = float(np.hypot(*(a.metric_position - b.metric_position)))
                if not edge.weight > 0:
                    out.append(Violation("weight", name, "intra edge weight must be > 0"))
                elif edge.weight < straight - 1e-9:
                    out.append(Violation("weight", name,
                                         f"weight {edge.weight} below straight line {straight}"))
        elif edge.kind is EdgeKind.INTER:
            if a.floorplan_id == b.floorplan_id:
                out.append(Violation("inter-edge", name, "inter edge joins exits on one floorplan"))
            if edge.weight < 0:
                out.append(Violation("weight", name, "negative weight"))
    for w in bundle.roads.ways:
        for n in w.nodes:
            if n not in road_ids:
                out.append(Violation("dangling-way", w.id, f"node {n} does not exist"))
    return out


# --------------------------------------------------------------------------
# persistence

def bundle_to_json(bundle: MapBundle) -> dict:
    return {
        "floorplans": [{"id": f.id, "width": f.width, "height": f.height, "resolution": f.resolution,
                        "origin": list(f.origin), "cells": encode_cells(f.cells)} for f in bundle.floorplans],
        "exits": [e.to_json() for e in bundle.exits],
        "edges": [{"u": e.u, "v": e.v, "weight": e.weight, "kind": e.kind.value,
                   **({} if e.lower_bound is None else {"lowerBound": e.lower_bound})}
                  for e in bundle.edges],
        "roads": bundle.roads.to_json(),
        "provenance": bundle.provenance,
    }


def bundle_from_json(doc: dict) -> MapBundle:
    def section(name):
        v = doc.get(name, [])
        if not isinstance(v, list):
            raise ParseError("expected a list", name)
        return v

    if not isinstance(doc, dict):
        raise ParseError("top level must be an object")
    fps, exits, edges = [], [], []
    for i, f in enumerate(section("floorplans")):
        loc = f"floorplans[{i}]"
        try:
            cells = decode_cells(f["cells"], int(f["width"]), int(f["height"]))
            fps.append(FloorplanGrid(str(f["id"]), float(f["resolution"]), cells,
                                     tuple(f.get("origin", (0.0, 0.0)))))
        except ParseError as exc:
            raise ParseError(str(exc), loc) from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{type(exc).__name__}: {exc}", loc) from exc
    for i, e in enumerate(section("exits")):
        try:
            exits.append(ExitNode.from_json(e))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{type(exc).__name__}: {exc}", f"exits[{i}]") from exc
    for i, e in enumerate(section("edges")):
        try:
            edges.append(TopoEdge(str(e["u"]), str(e["v"]), float(e["weight"]), EdgeKind(e["kind"]),
                                  e.get("lowerBound")))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{type(exc).__name__}: {exc}", f"edges[{i}]") from exc
    try:
        roads = RoadNetwork.from_json(doc.get("roads") or {})
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{type(exc).__name__}: {exc}", "roads") from exc
    return MapBundle(tuple(fps), tuple(exits), tuple(edges), roads, dict(doc.get("provenance") or {}))


def save_bundle(bundle: MapBundle, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(bundle_to_json(bundle), indent=1) + "\n")
    return path


def load_bundle(path: str | Path) -> tuple[MapBundle, list[Violation]]:
    """Parse a bundle file; validation problems are returned, not raised."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"{path}:{exc.lineno}:{exc.colno}") from exc
    bundle = bundle_from_json(doc)
    return bundle, validate_bundle(bundle)


def load_road_export(path: str | Path) -> RoadNetwork:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"{path}:{exc.lineno}:{exc.colno}") from exc
    return RoadNetwork.from_json(doc)
