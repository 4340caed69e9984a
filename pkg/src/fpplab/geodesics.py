"""Exact passage times, geodesic DAGs and Busemann differences.

Point-to-hyperplane geodesics use the hyperplane ``H_n = {x_1 = n/2}``.  For
odd ``n`` the hyperplane cuts the edges between ``x_1 = (n-1)/2`` and
``x_1 = (n+1)/2`` in half; we never build half-vertices.  Instead the
environment is doubled beforehand (:func:`fpplab.lattice.double_weights`),
so that half of a crossing edge is still an integer, and a geodesic is
recorded by its last lattice vertex.

A hyperplane geodesic stops at its first contact with ``H_n``: all of its
lattice vertices except (for even ``n``) the final one lie strictly on the
source's side.
"""

from __future__ import annotations

import heapq
import json
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Mapping, Sequence

import numpy as np

from .lattice import Box, EdgeRef, Environment, Vertex, diameter

INF = 1 << 60


# ---------------------------------------------------------------------------
# Sources and fields


@dataclass(frozen=True)
class SourceSpec:
    """A single vertex, a vertex set, or the hyperplane ``H_n`` (one or both sides)."""

    kind: str
    vertices: tuple[Vertex, ...] = ()
    n: int | None = None
    side: int | None = None

    @classmethod
    def vertex(cls, v: Sequence[int]) -> "SourceSpec":
        return cls("vertex", (tuple(v),))

    @classmethod
    def vertex_set(cls, vs) -> "SourceSpec":
        return cls("set", tuple(sorted(tuple(v) for v in vs)))

    @classmethod
    def hyperplane(cls, n: int, side: int | None = None) -> "SourceSpec":
        if side not in (None, -1, 1):
            raise ValueError("side must be -1 (x_1 < n/2), +1 (x_1 > n/2) or None")
        return cls("hyperplane", (), int(n), side)


@dataclass(frozen=True, eq=False)
class TimeField:
    """Scaled passage times from a source to every vertex of the box."""

    source: SourceSpec
    times: np.ndarray
    box: Box
    scale: int
    env_fingerprint: str

    def __getitem__(self, v: Sequence[int]) -> int:
        t = int(self.times[self.box.index(v)])
        if t >= INF:
            raise KeyError(f"{tuple(v)} not reached from {self.source}")
        return t

    def physical(self, v: Sequence[int]):
        from fractions import Fraction

        return Fraction(self[v], self.scale)


def side_of(n: int, v: Sequence[int]) -> int:
    """-1 if ``x_1 < n/2``, +1 if ``x_1 > n/2``; 0 on the hyperplane."""
    twice = 2 * v[0]
    return (twice > n) - (twice < n)


@dataclass(frozen=True)
class HalfSpace:
    """Lattice vertices strictly on one side of ``H_n`` and their exits."""

    n: int
    side: int
    allowed: np.ndarray          # bool mask over vertices
    exits: dict[int, tuple[int, int, int]]  # layer vertex -> (partner, edge id, exit cost)


def half_space(env: Environment, n: int, side: int) -> HalfSpace:
    box = env.box
    top = box.topology
    x1 = top.coords[:, 0]
    if side < 0:
        allowed = 2 * x1 < n
        layer_x = (n + 1) // 2 - 1
        step = 1
    else:
        allowed = 2 * x1 > n
        layer_x = n // 2 + 1
        step = -1
    if not (box.lo[0] <= layer_x <= box.hi[0] and box.lo[0] <= layer_x + step <= box.hi[0]):
        raise IndexError(f"hyperplane H_{n} (side {side}) not inside {box}")
    stride = int(top.strides[0])
    w = env.weights
    exits = {}
    for a in np.flatnonzero(x1 == layer_x).tolist():
        partner = a + step * stride
        e = int(top.edge_id[min(a, partner), 0])
        we = int(w[e])
        if n % 2:
            if we % 2:
                raise ValueError("odd crossing weight: apply double_weights for odd n")
            cost = we // 2
        else:
            cost = we
        exits[a] = (partner, e, cost)
    return HalfSpace(n, side, allowed, exits)


def _dijkstra_heap(nbrs, w, size, seeds, allowed):
    dist = [INF] * size
    heap = []
    for v, d0 in seeds:
        if d0 < dist[v]:
            dist[v] = d0
            heap.append((d0, v))
    heapq.heapify(heap)
    pop, push = heapq.heappop, heapq.heappush
    while heap:
        d, u = pop(heap)
        if d > dist[u]:
            continue
        for v, e in nbrs[u]:
            if allowed is not None and not allowed[v]:
                continue
            nd = d + w[e]
            if nd < dist[v]:
                dist[v] = nd
                push(heap, (nd, v))
    return dist


def _dijkstra_bucket(nbrs, w, size, seeds, allowed):
    """Dial's bucket queue; buckets keyed by exact integer distance."""
    dist = [INF] * size
    buckets = defaultdict(list)
    pending = 0
    for v, d0 in seeds:
        if d0 < dist[v]:
            dist[v] = d0
            buckets[d0].append(v)
            pending += 1
    if not pending:
        return dist
    d = min(buckets)
    while pending:
        bucket = buckets.pop(d, None)
        if bucket is None:
            d += 1
            continue
        while bucket:
            u = bucket.pop()
            pending -= 1
            if dist[u] != d:
                continue
            for v, e in nbrs[u]:
                if allowed is not None and not allowed[v]:
                    continue
                nd = d + w[e]
                if nd < dist[v]:
                    dist[v] = nd
                    pending += 1
                    if nd == d:
                        bucket.append(v)
                    else:
                        buckets[nd].append(v)
        d += 1
    return dist


BACKENDS = {"heap": _dijkstra_heap, "bucket": _dijkstra_bucket}


def _run(env: Environment, seeds, allowed=None, backend: str = "bucket") -> np.ndarray:
    try:
        fn = BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown backend {backend!r}") from None
    top = env.box.topology
    mask = None if allowed is None else allowed.tolist()
    return np.array(fn(top.neighbors, env.wlist, top.n, seeds, mask), dtype=np.int64)


def shortest_field(env: Environment, source: SourceSpec, backend: str = "bucket") -> TimeField:
    """Exact passage times ``T(source, .)``.

    For a hyperplane source the field is computed on the requested side(s);
    vertices of an even ``H_n`` get time 0 and vertices on an unrequested
    side stay unreached.
    """
    box = env.box
    if source.kind in ("vertex", "set"):
        seeds = [(box.index(v), 0) for v in source.vertices]
        times = _run(env, seeds, None, backend)
    elif source.kind == "hyperplane":
        n = source.n
        sides = (-1, 1) if source.side is None else (source.side,)
        times = np.full(box.n_vertices, INF, dtype=np.int64)
        for s in sides:
            hs = half_space(env, n, s)
            part = _run(env, [(a, c) for a, (_, _, c) in hs.exits.items()], hs.allowed, backend)
            times = np.minimum(times, part)
            if n % 2 == 0:
                times[[p for p, _, _ in hs.exits.values()]] = 0
    else:
        raise ValueError(f"unknown source kind {source.kind!r}")
    return TimeField(source, times, box, env.scale, env.fingerprint)


class FieldCache:
    """Memoised point fields and half-space fields for one environment."""

    def __init__(self, env: Environment, backend: str = "bucket"):
        self.env = env
        self.backend = backend
        self._point: dict[int, np.ndarray] = {}
        self._half: dict[tuple, tuple[HalfSpace, np.ndarray]] = {}
        self._restricted: dict[tuple, np.ndarray] = {}

    def point(self, v: Sequence[int] | int) -> np.ndarray:
        i = v if isinstance(v, (int, np.integer)) else self.env.box.index(v)
        i = int(i)
        if i not in self._point:
            self._point[i] = _run(self.env, [(i, 0)], None, self.backend)
        return self._point[i]

    def T(self, x, y) -> int:
        box = self.env.box
        return int(self.point(y)[box.index(x)])

    def half(self, n: int, side: int) -> tuple[HalfSpace, np.ndarray]:
        key = (n, side)
        if key not in self._half:
            hs = half_space(self.env, n, side)
            seeds = [(a, c) for a, (_, _, c) in hs.exits.items()]
            self._half[key] = (hs, _run(self.env, seeds, hs.allowed, self.backend))
        return self._half[key]

    def point_within(self, v: int, n: int, side: int) -> np.ndarray:
        key = (v, n, side)
        if key not in self._restricted:
            hs, _ = self.half(n, side)
            self._restricted[key] = _run(self.env, [(v, 0)], hs.allowed, self.backend)
        return self._restricted[key]


# ---------------------------------------------------------------------------
# Geodesic DAGs


@dataclass(frozen=True)
class HyperplaneEndpoint:
    """Where a geodesic meets ``H_n``.

    ``vertex`` is the last lattice vertex of the geodesic: a point of ``H_n``
    for even ``n``, the near end of the crossing edge for odd ``n``.
    """

    n: int
    lateral: tuple[int, ...]
    vertex: Vertex
    crossing: EdgeRef | None = None

    def in_lambda(self, c2: int) -> bool:
        return all(abs(z) <= c2 * self.n for z in self.lateral)


@dataclass(frozen=True, eq=False)
class GeodesicDag:
    """All edges lying on some geodesic between fixed terminals, oriented
    from the source side.  Zero-weight edges may appear in both
    orientations; geodesics are the *simple* source-to-sink paths."""

    env: Environment
    kind: str                      # "point" or "hyperplane"
    source: int
    sinks: frozenset
    total: int
    edges: tuple[tuple[int, int], ...]
    target: int | None = None
    n: int | None = None
    side: int | None = None
    exit_cost: Mapping | None = None   # hyperplane: cost charged after the last vertex

    @cached_property
    def succ(self) -> dict[int, tuple[int, ...]]:
        out: dict[int, list[int]] = defaultdict(list)
        for u, v in self.edges:
            out[u].append(v)
        return {u: tuple(sorted(vs)) for u, vs in out.items()}

    @cached_property
    def vertex_set(self) -> frozenset:
        vs = {self.source} | set(self.sinks)
        for u, v in self.edges:
            vs.add(u)
            vs.add(v)
        return frozenset(vs)

    def coords(self, i: int) -> Vertex:
        return self.env.box.topology.coord_list[i]

    def path_coords(self, path: Sequence[int]) -> list[Vertex]:
        cl = self.env.box.topology.coord_list
        return [cl[i] for i in path]

    def path_cost(self, path: Sequence[int]) -> int:
        """Scaled time of an index path, counting the half crossing for odd ``n``."""
        top = self.env.box.topology
        w = self.env.weights
        total = 0
        for a, b in zip(path, path[1:]):
            lo, hi = min(a, b), max(a, b)
            k = _axis_of(top, hi - lo)
            e = int(top.edge_id[lo, k]) if k is not None else -1
            if e < 0 or int(top.ev[e]) != hi:
                raise ValueError("not a lattice path")
            total += int(w[e])
        if self.kind == "hyperplane":
            total += int(self.exit_cost[path[-1]])
        return total

    def is_geodesic(self, path: Sequence[int]) -> bool:
        return (
            len(path) > 0
            and path[0] == self.source
            and path[-1] in self.sinks
            and len(set(path)) == len(path)
            and self.path_cost(path) == self.total
        )

    def endpoints(self) -> list[HyperplaneEndpoint]:
        if self.kind != "hyperplane":
            raise ValueError("endpoints are defined for hyperplane DAGs")
        return sorted((self.endpoint_of(s) for s in self.sinks), key=lambda e: e.vertex)

    def endpoint_of(self, sink: int) -> HyperplaneEndpoint:
        v = self.coords(sink)
        crossing = None
        if self.n % 2:
            other = (v[0] + (1 if self.side < 0 else -1),) + v[1:]
            crossing = EdgeRef.between(v, other)
        return HyperplaneEndpoint(self.n, v[1:], v, crossing)

    def token(self, sink: int) -> int:
        """Bit index representing the point where a path ending at ``sink``
        meets ``H_n`` (the half-vertex for odd ``n``)."""
        return sink if self.kind == "point" or self.n % 2 == 0 else self.env.box.n_vertices + sink


def _axis_of(top, diff: int):
    for k, s in enumerate(top.strides.tolist()):
        if diff == s:
            return k
    return None


def _dag_edges(top, w, fwd, bwd, total):
    eu, ev = top.eu, top.ev
    forward = fwd[eu] + w + bwd[ev] == total
    backward = fwd[ev] + w + bwd[eu] == total
    pairs = list(zip(eu[forward].tolist(), ev[forward].tolist()))
    pairs += list(zip(ev[backward].tolist(), eu[backward].tolist()))
    return pairs


def geodesic_dag(env: Environment, s: Sequence[int], t: Sequence[int],
                 cache: FieldCache | None = None) -> GeodesicDag:
    """DAG of all geodesics from ``s`` to ``t``.

    Edge ``u -> v`` is kept iff ``T(s,u) + tau(u,v) + T(v,t) = T(s,t)``.
    """
    box = env.box
    si, ti = box.index(s), box.index(t)
    if si == ti:
        raise ValueError("terminals must differ")
    cache = cache or FieldCache(env)
    fwd, bwd = cache.point(si), cache.point(ti)
    total = int(fwd[ti])
    edges = _dag_edges(box.topology, env.weights, fwd, bwd, total)
    return GeodesicDag(env, "point", si, frozenset([ti]), total, tuple(sorted(edges)), target=ti)


def hyperplane_time(env2x: Environment, x: Sequence[int], n: int,
                    cache: FieldCache | None = None) -> int:
    """Scaled ``T(x, H_n)``; odd ``n`` requires a doubled environment."""
    side = side_of(n, x)
    if side == 0:
        raise ValueError(f"{tuple(x)} lies on H_{n}")
    cache = cache or FieldCache(env2x)
    _, bwd = cache.half(n, side)
    return int(bwd[env2x.box.index(x)])


def hyperplane_dag(env2x: Environment, x: Sequence[int], n: int,
                   cache: FieldCache | None = None) -> GeodesicDag:
    """DAG of all geodesics from ``x`` to ``H_n`` (first contact)."""
    side = side_of(n, x)
    if side == 0:
        raise ValueError(f"{tuple(x)} lies on H_{n}")
    box = env2x.box
    cache = cache or FieldCache(env2x)
    hs, bwd = cache.half(n, side)
    xi = box.index(x)
    fwd = cache.point_within(xi, n, side)
    total = int(bwd[xi])
    edges = _dag_edges(box.topology, env2x.weights, fwd, bwd, total)
    sinks, exit_cost = [], {}
    for a, (partner, _, c) in hs.exits.items():
        if fwd[a] + c == total:
            if n % 2:
                sinks.append(a)
                exit_cost[a] = c
            else:
                edges.append((a, partner))
                sinks.append(partner)
                exit_cost[partner] = 0
    return GeodesicDag(env2x, "hyperplane", xi, frozenset(sinks), total, tuple(sorted(edges)),
                       n=n, side=side, exit_cost=exit_cost)


def canonical_geodesic(dag: GeodesicDag) -> list[int]:
    """Lexicographically smallest geodesic (as a vertex-index sequence)."""
    src, sinks, succ = dag.source, dag.sinks, dag.succ
    if src in sinks:
        return [src]
    path, on = [src], {src}
    stack = [iter(succ.get(src, ()))]
    while stack:
        for v in stack[-1]:
            if v in on:
                continue
            if v in sinks:
                return path + [v]
            path.append(v)
            on.add(v)
            stack.append(iter(succ.get(v, ())))
            break
        else:
            stack.pop()
            on.discard(path.pop())
    raise ValueError("DAG has no source-to-sink path")


def iter_geodesics(dag: GeodesicDag, cap: int | None = None) -> Iterator[list[int]]:
    """All geodesics (simple DAG paths) in lexicographic order.

    Raises ``OverflowError`` after ``cap`` paths.
    """
    src, sinks, succ = dag.source, dag.sinks, dag.succ
    count = 0

    def emit(p):
        nonlocal count
        count += 1
        if cap is not None and count > cap:
            raise OverflowError(f"more than {cap} geodesics")
        return p

    if src in sinks:
        yield emit([src])
        if dag.kind == "point":
            return
    path, on = [src], {src}
    stack = [iter(succ.get(src, ()))]
    while stack:
        advanced = False
        for v in stack[-1]:
            if v in on:
                continue
            if v in sinks:
                yield emit(path + [v])
                if dag.kind == "point" or not succ.get(v):
                    continue
            path.append(v)
            on.add(v)
            stack.append(iter(succ.get(v, ())))
            advanced = True
            break
        if not advanced:
            stack.pop()
            on.discard(path.pop())


def busemann(env: Environment, x, y, z, cache: FieldCache | None = None) -> int:
    """Scaled ``B_z(x, y) = T(x, z) - T(y, z)``."""
    cache = cache or FieldCache(env)
    f = cache.point(z)
    box = env.box
    return int(f[box.index(x)]) - int(f[box.index(y)])


def dag_touches_boundary(dag: GeodesicDag, box: Box | None = None) -> bool:
    box = box or dag.env.box
    if box == dag.env.box:
        mask = box.topology.on_boundary
        return bool(any(mask[v] for v in dag.vertex_set))
    for v in dag.vertex_set:
        c = dag.coords(v)
        if not box.contains(c) or any(x in (a, b) for x, a, b in zip(c, box.lo, box.hi)):
            return True
    return False


def dag_diameter(dag: GeodesicDag) -> int:
    return diameter(dag.path_coords(sorted(dag.vertex_set)))


@dataclass(frozen=True)
class BoxPolicy:
    """Margins ``kappa * n`` around the terminals, doubled up to ``kappa_max``."""

    kappa: int = 1
    kappa_max: int = 4

    def __post_init__(self):
        if not 1 <= self.kappa <= self.kappa_max:
            raise ValueError("need 1 <= kappa <= kappa_max")

    def margin(self, n: int, kappa: int | None = None) -> int:
        return max(1, (self.kappa if kappa is None else kappa) * n)

    def kappas(self) -> list[int]:
        out, k = [], self.kappa
        while k <= self.kappa_max:
            out.append(k)
            k *= 2
        return out


def dag_to_json(dag: GeodesicDag, witness: Sequence[Sequence[int]] | None = None) -> dict:
    """Debug/golden-test export of a DAG (coordinates, scaled times)."""
    c = dag.coords
    doc = {
        "kind": dag.kind,
        "source": list(c(dag.source)),
        "scale": dag.env.scale,
        "total_time": dag.total,
        "edges": [[list(c(u)), list(c(v))] for u, v in dag.edges],
    }
    if dag.kind == "point":
        doc["target"] = list(c(dag.target))
    else:
        doc["n"] = dag.n
        doc["endpoints"] = [
            {"vertex": list(e.vertex), "lateral": list(e.lateral),
             "crossing": None if e.crossing is None else [list(e.crossing.base), e.crossing.axis]}
            for e in dag.endpoints()
        ]
    if witness is not None:
        doc["witness"] = [[list(c(v)) for v in p] for p in witness]
    return doc


def dump_dag(dag: GeodesicDag, witness=None) -> str:
    return json.dumps(dag_to_json(dag, witness), sort_keys=True)
