"""Navigation graph: load, validate, and query the world the agent explores.

The graph file is UTF-8 text, one record per line:

    V <id> <x> <y> <z> <0|1 included>
    E <id_a> <id_b>

``#`` starts a comment. Edge weights are Euclidean distances computed from
the endpoint positions, never stored. Viewpoints flagged ``0`` are dropped at
load time together with their incident edges, so a loaded graph only ever
contains usable nodes.
"""

from __future__ import annotations

import heapq
import math
import threading
from dataclasses import dataclass
from typing import IO, Iterable

from .errors import DataError

TWO_PI = 2.0 * math.pi

# Planar distances below this are treated as coincident for bearing purposes.
COINCIDENT_EPS = 1e-12


class GraphFormatError(DataError):
    """Raised for malformed graph files; message carries the line number."""


class UnknownViewpointError(DataError):
    """Raised when a query names a viewpoint the graph does not contain."""


@dataclass(frozen=True)
class Pose:
    """Heading in [0, 2pi) measured clockwise from world +x, elevation in [-pi/2, pi/2]."""

    heading: float
    elevation: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading", self.heading % TWO_PI)
        if not -math.pi / 2 <= self.elevation <= math.pi / 2:
            raise ValueError(f"elevation out of range: {self.elevation}")

    def orientation_tuple(self) -> tuple[float, float, float, float]:
        """(sin heading, cos heading, sin elevation, cos elevation)."""
        return (
            math.sin(self.heading),
            math.cos(self.heading),
            math.sin(self.elevation),
            math.cos(self.elevation),
        )


@dataclass(frozen=True)
class Viewpoint:
    id: str
    position: tuple[float, float, float]
    included: bool = True

    def __post_init__(self):
        if not all(math.isfinite(c) for c in self.position):
            raise ValueError(f"non-finite position for viewpoint {self.id!r}")


class NavGraph:
    """Immutable undirected graph of included viewpoints.

    Safe for concurrent reads once constructed. Shortest-path results are
    memoized per source node behind a lock.
    """

    def __init__(self, viewpoints: Iterable[Viewpoint], edges: Iterable[tuple[str, str]]):
        self._viewpoints: dict[str, Viewpoint] = {}
        seen: set[str] = set()
        for vp in viewpoints:
            if vp.id in seen:
                raise DataError(f"duplicate viewpoint id {vp.id!r}")
            seen.add(vp.id)
            if vp.included:
                self._viewpoints[vp.id] = vp
        self._adj: dict[str, dict[str, float]] = {vid: {} for vid in self._viewpoints}
        for a, b in edges:
            if a == b:
                raise DataError(f"self-loop on {a!r}")
            if a not in self._viewpoints or b not in self._viewpoints:
                continue  # edge touched an excluded viewpoint; drop it
            w = _euclidean(self._viewpoints[a].position, self._viewpoints[b].position)
            if w <= 0.0:
                raise DataError(f"zero-length edge {a!r}-{b!r}")
            self._adj[a][b] = w
            self._adj[b][a] = w
        self._ids = tuple(sorted(self._viewpoints))
        self._sp_cache: dict[str, tuple[dict[str, float], dict[str, str]]] = {}
        self._sp_lock = threading.Lock()

    # -- basic queries ---------------------------------------------------

    def __len__(self) -> int:
        return len(self._viewpoints)

    def __contains__(self, vid: str) -> bool:
        return vid in self._viewpoints

    def ids(self) -> tuple[str, ...]:
        """All viewpoint ids, sorted."""
        return self._ids

    def viewpoint(self, vid: str) -> Viewpoint:
        try:
            return self._viewpoints[vid]
        except KeyError:
            raise UnknownViewpointError(f"unknown viewpoint {vid!r}") from None

    def edges(self) -> list[tuple[str, str, float]]:
        """Undirected edges once each, sorted by (a, b) with a < b."""
        out = []
        for a, nbrs in self._adj.items():
            for b, w in nbrs.items():
                if a < b:
                    out.append((a, b, w))
        out.sort()
        return out

    def edge_weight(self, a: str, b: str) -> float | None:
        self.viewpoint(a)
        self.viewpoint(b)
        return self._adj[a].get(b)

    # -- spec operations ---------------------------------------------------

    def neighbors(self, vid: str) -> list[str]:
        """Adjacent viewpoint ids, sorted; empty for an isolated node."""
        self.viewpoint(vid)
        return sorted(self._adj[vid])

    def geodesic_distance(self, a: str, b: str) -> float | None:
        """Length in meters of the shortest weighted path, or None if unreachable."""
        self.viewpoint(a)
        self.viewpoint(b)
        if a == b:
            return 0.0
        dist, _ = self._dijkstra(a)
        return dist.get(b)

    def shortest_path(self, a: str, b: str) -> list[str] | None:
        """Viewpoint ids of the shortest weighted path a..b, or None if unreachable.

        Ties between equal-length paths are broken toward lexicographically
        smaller predecessors, so the result is canonical.
        """
        self.viewpoint(a)
        self.viewpoint(b)
        if a == b:
            return [a]
        dist, pred = self._dijkstra(a)
        if b not in dist and b != a:
            return None
        path = [b]
        while path[-1] != a:
            path.append(pred[path[-1]])
        path.reverse()
        return path

    def bearing(self, a: str, b: str) -> Pose:
        """Pose of the straight move a -> b.

        Heading is the planar angle in [0, 2pi) clockwise from +x toward +y;
        elevation is atan2(rise, planar distance).
        """
        pa = self.viewpoint(a).position
        pb = self.viewpoint(b).position
        return bearing_between(pa, pb)

    # -- internals ---------------------------------------------------------

    def _dijkstra(self, source: str) -> tuple[dict[str, float], dict[str, str]]:
        with self._sp_lock:
            cached = self._sp_cache.get(source)
        if cached is not None:
            return cached
        dist: dict[str, float] = {source: 0.0}
        pred: dict[str, str] = {}
        done: set[str] = set()
        heap: list[tuple[float, str]] = [(0.0, source)]
        while heap:
            d, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            for v, w in self._adj[u].items():
                nd = d + w
                old = dist.get(v)
                if old is None or nd < old:
                    dist[v] = nd
                    pred[v] = u
                    heapq.heappush(heap, (nd, v))
                elif nd == old and u < pred.get(v, u):
                    pred[v] = u  # canonical tie-break
        result = (dist, pred)
        with self._sp_lock:
            self._sp_cache[source] = result
        return result


def bearing_between(pa: tuple[float, float, float], pb: tuple[float, float, float]) -> Pose:
    dx = pb[0] - pa[0]
    dy = pb[1] - pa[1]
    dz = pb[2] - pa[2]
    planar = math.hypot(dx, dy)
    if planar < COINCIDENT_EPS:
        raise DataError(f"bearing undefined between coplanar-coincident positions {pa} and {pb}")
    heading = math.atan2(dy, dx) % TWO_PI
    elevation = math.atan2(dz, planar)
    return Pose(heading=heading, elevation=elevation)


def signed_heading_delta(target: float, current: float) -> float:
    """Normalized heading difference in (-pi, pi]; positive means clockwise (right)."""
    d = (target - current) % TWO_PI
    if d > math.pi:
        d -= TWO_PI
    return d


def _euclidean(pa: tuple[float, float, float], pb: tuple[float, float, float]) -> float:
    return math.dist(pa, pb)


def load_graph(source: IO[str] | str) -> NavGraph:
    """Parse a graph file (stream or text) into a validated NavGraph.

    Errors report the 1-based line number. Redeclaring an edge, in either
    order, is rejected so the adjacency is symmetric by construction.
    """
    if isinstance(source, str):
        lines = source.splitlines()
    else:
        lines = source.read().splitlines()

    viewpoints: list[Viewpoint] = []
    declared: dict[str, bool] = {}  # id -> included, for edge validation
    edges: list[tuple[str, str]] = []
    seen_edges: dict[frozenset[str], int] = {}

    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        kind = fields[0]
        if kind == "V":
            if len(fields) != 6:
                raise GraphFormatError(f"line {lineno}: V record needs id, x, y, z, included")
            vid = fields[1]
            if vid in declared:
                raise GraphFormatError(f"line {lineno}: duplicate viewpoint id {vid!r}")
            try:
                x, y, z = (float(fields[i]) for i in (2, 3, 4))
            except ValueError:
                raise GraphFormatError(f"line {lineno}: bad coordinate in V record") from None
            if fields[5] not in ("0", "1"):
                raise GraphFormatError(f"line {lineno}: included flag must be 0 or 1")
            included = fields[5] == "1"
            declared[vid] = included
            try:
                viewpoints.append(Viewpoint(id=vid, position=(x, y, z), included=included))
            except ValueError as e:
                raise GraphFormatError(f"line {lineno}: {e}") from None
        elif kind == "E":
            if len(fields) != 3:
                raise GraphFormatError(f"line {lineno}: E record needs two viewpoint ids")
            a, b = fields[1], fields[2]
            if a == b:
                raise GraphFormatError(f"line {lineno}: self-loop on {a!r}")
            for vid in (a, b):
                if vid not in declared:
                    raise GraphFormatError(f"line {lineno}: edge references unknown id {vid!r}")
            key = frozenset((a, b))
            if key in seen_edges:
                raise GraphFormatError(
                    f"line {lineno}: edge {a!r}-{b!r} already declared on line {seen_edges[key]}"
                )
            seen_edges[key] = lineno
            edges.append((a, b))
        else:
            raise GraphFormatError(f"line {lineno}: unknown record kind {kind!r}")

    try:
        return NavGraph(viewpoints, edges)
    except DataError as e:
        raise GraphFormatError(str(e)) from None


def serialize_graph(graph: NavGraph) -> str:
    """Canonical text form: sorted V records then sorted E records, %.6f coords.

    load_graph(serialize_graph(g)) reproduces g, and serializing again gives
    byte-identical text.
    """
    out = []
    for vid in graph.ids():
        vp = graph.viewpoint(vid)
        x, y, z = vp.position
        out.append(f"V {vid} {x:.6f} {y:.6f} {z:.6f} 1")
    for a, b, _ in graph.edges():
        out.append(f"E {a} {b}")
    return "\n".join(out) + "\n" if out else ""
