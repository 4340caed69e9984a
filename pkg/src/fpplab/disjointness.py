"""Decision procedures for disjoint geodesics.

Every procedure returns a :class:`Decision`.  ``True`` always comes with a
witness pair of index paths; callers can re-check it with
:func:`verify_pair`.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

from .flow import FlowNetwork
from .geodesics import (
    FieldCache,
    GeodesicDag,
    dag_touches_boundary,
    geodesic_dag,
    hyperplane_dag,
    iter_geodesics,
    side_of,
)
from .lattice import Environment, unit


class Outcome(enum.Enum):
    TRUE = "true"
    FALSE = "false"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class Decision:
    outcome: Outcome
    reason: str = ""
    witness: tuple | None = None
    touches_boundary: bool = False
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.outcome is Outcome.TRUE and self.witness is None:
            raise ValueError("a True decision needs a witness")

    @property
    def is_true(self) -> bool:
        return self.outcome is Outcome.TRUE

    @property
    def is_false(self) -> bool:
        return self.outcome is Outcome.FALSE

    @property
    def decided(self) -> bool:
        return self.outcome is not Outcome.UNDECIDED

    @property
    def value(self) -> bool | None:
        return None if self.outcome is Outcome.UNDECIDED else self.outcome is Outcome.TRUE

    def negate(self) -> "Decision":
        flip = {Outcome.TRUE: Outcome.FALSE, Outcome.FALSE: Outcome.TRUE}
        if self.outcome is Outcome.UNDECIDED:
            return self
        out = flip[self.outcome]
        # a negated True has no witness; a negated False cannot carry one
        if out is Outcome.TRUE:
            return Decision(out, self.reason, (), self.touches_boundary, dict(self.info))
        return Decision(out, self.reason, None, self.touches_boundary, dict(self.info))

    def with_boundary(self, touches: bool) -> "Decision":
        return Decision(self.outcome, self.reason, self.witness, touches, dict(self.info))


def true(reason, witness, **info) -> Decision:
    return Decision(Outcome.TRUE, reason, tuple(tuple(p) for p in witness), info=info)


def false(reason, **info) -> Decision:
    return Decision(Outcome.FALSE, reason, info=info)


def undecided(reason, **info) -> Decision:
    return Decision(Outcome.UNDECIDED, reason, info=info)


@dataclass(frozen=True)
class Budget:
    max_nodes: int = 10**6
    max_geodesics: int = 10**5

    def __post_init__(self):
        if self.max_nodes < 1 or self.max_geodesics < 1:
            raise ValueError("budgets must be positive")


class OracleOverflow(OverflowError):
    """Raised when exhaustive geodesic enumeration exceeds its cap."""


# ---------------------------------------------------------------------------
# Vertex-split flows


class _SplitFlow:
    """Lattice vertices split into ``in -> out`` arcs; a super source and sink."""

    def __init__(self, vertices, arcs, sources, sinks, vcap=None):
        vcap = vcap or {}
        order = sorted(set(vertices))
        self.loc = {v: k for k, v in enumerate(order)}
        self.order = order
        n = 2 * len(order)
        self.S, self.T = n, n + 1
        net = FlowNetwork(n + 2)
        for v in order:
            k = self.loc[v]
            net.add_arc(2 * k, 2 * k + 1, vcap.get(v, 1), 0)
        for u, v, c in arcs:
            net.add_arc(2 * self.loc[u] + 1, 2 * self.loc[v], 1, c)
        for v, cap, c in sources:
            net.add_arc(self.S, 2 * self.loc[v], cap, c)
        for v, cap, c in sinks:
            net.add_arc(2 * self.loc[v] + 1, self.T, cap, c)
        self.net = net

    def run(self, units: int = 2):
        flow, cost = self.net.min_cost_flow(self.S, self.T, units)
        paths = []
        for p in self.net.decompose(self.S, self.T):
            inner = p[1:-1]
            paths.append([self.order[x // 2] for x in inner[::2]])
        return flow, cost, paths


def _dag_arcs(dags: Sequence[GeodesicDag], drop_into=(), drop_out_of=()):
    """Union of DAG edges with their weights, minus arcs entering
    ``drop_into`` or leaving ``drop_out_of``."""
    env = dags[0].env
    top = env.box.topology
    w = env.wlist
    seen = set()
    arcs = []
    verts = set()
    for dag in dags:
        if dag.env is not env and dag.env != env:
            raise ValueError("DAGs must share one environment")
        verts |= dag.vertex_set
        for u, v in dag.edges:
            if (u, v) in seen or v in drop_into or u in drop_out_of:
                continue
            seen.add((u, v))
            lo, hi = (u, v) if u < v else (v, u)
            k = _axis(top, hi - lo)
            arcs.append((u, v, w[int(top.edge_id[lo, k])]))
    arcs.sort()
    return verts, arcs


def _axis(top, diff):
    for k, s in enumerate(top.strides.tolist()):
        if s == diff:
            return k
    raise ValueError("not a lattice edge")


def _cost(env: Environment, path: Sequence[int]) -> int:
    top = env.box.topology
    w = env.wlist
    total = 0
    for a, b in zip(path, path[1:]):
        lo, hi = (a, b) if a < b else (b, a)
        total += w[int(top.edge_id[lo, _axis(top, hi - lo)])]
    return total


def verify_pair(dag_a: GeodesicDag, dag_b: GeodesicDag, witness, shared=frozenset()) -> bool:
    """Both paths are geodesics of their DAGs and meet only inside ``shared``."""
    pa, pb = witness
    if not (dag_a.is_geodesic(list(pa)) and dag_b.is_geodesic(list(pb))):
        return False
    common = set(pa) & set(pb)
    if not common <= set(shared):
        return False
    if dag_a.kind == "hyperplane" and dag_b.kind == "hyperplane" and dag_a.n % 2:
        # distinct half-vertices on the crossing edges
        if pa[-1] == pb[-1]:
            return False
    return True


# ---------------------------------------------------------------------------
# Same-terminal pairs (Menger)


def internally_disjoint_pair(dag: GeodesicDag) -> Decision:
    """Two geodesics of ``dag`` sharing only the terminals (point DAG) or only
    the source (hyperplane DAG).  Exact unit-capacity flow; never Undecided."""
    if not dag.edges and dag.source not in dag.sinks:
        raise ValueError("empty DAG")
    src = dag.source
    if dag.kind == "point":
        tgt = dag.target
        verts, arcs = _dag_arcs([dag], drop_into={src}, drop_out_of={tgt})
        sf = _SplitFlow(verts, arcs, [(src, 2, 0)], [(tgt, 2, 0)], {src: 2, tgt: 2})
    else:
        verts, arcs = _dag_arcs([dag], drop_into={src})
        sinks = [(a, 1, dag.exit_cost[a]) for a in sorted(dag.sinks)]
        sf = _SplitFlow(verts | {src}, arcs, [(src, 2, 0)], sinks, {src: 2})
    flow, _, paths = sf.run(2)
    touches = dag_touches_boundary(dag)
    if flow >= 2:
        return true("menger", paths).with_boundary(touches)
    return false("menger").with_boundary(touches)


def oracle_internally_disjoint(dag: GeodesicDag, cap: int = 10**5) -> Decision:
    """Exhaustive check over all pairs of geodesics of one DAG."""
    geos = _enumerate(dag, cap)
    if dag.kind == "point":
        allowed = (1 << dag.source) | (1 << dag.target)
    else:
        allowed = 1 << dag.source
    masks = [(_mask(dag, p), p) for p in geos]
    for i, (ma, pa) in enumerate(masks):
        for mb, pb in masks[i + 1:]:
            if (ma & mb) & ~allowed == 0:
                return true("oracle", (pa, pb))
    return false("oracle")


# ---------------------------------------------------------------------------
# Two sources towards a hyperplane


def hyperplane_disjoint_pair(env2x: Environment, x, y, n: int,
                             cache: FieldCache | None = None) -> Decision:
    """Disjoint geodesics from ``x`` and from ``y`` to ``H_n``.

    Minimum-cost vertex-disjoint 2-flow from ``{x, y}`` to the crossing
    points; a disjoint geodesic pair exists iff the optimum equals
    ``T(x,H_n) + T(y,H_n)``.  Exact; never Undecided.
    """
    if tuple(x) == tuple(y):
        raise ValueError("sources must differ")
    if side_of(n, x) != side_of(n, y):
        raise ValueError("sources must lie on the same side of the hyperplane")
    cache = cache or FieldCache(env2x)
    da = hyperplane_dag(env2x, x, n, cache)
    db = hyperplane_dag(env2x, y, n, cache)
    return _hyperplane_pair(da, db)


def _hyperplane_pair(da: GeodesicDag, db: GeodesicDag) -> Decision:
    xs, ys = da.source, db.source
    verts, arcs = _dag_arcs([da, db], drop_into={xs, ys})
    exits = dict(da.exit_cost)
    exits.update(db.exit_cost)
    sinks = [(a, 1, c) for a, c in sorted(exits.items())]
    sf = _SplitFlow(verts, arcs, [(xs, 1, 0), (ys, 1, 0)], sinks)
    flow, cost, paths = sf.run(2)
    touches = dag_touches_boundary(da) or dag_touches_boundary(db)
    target = da.total + db.total
    if flow < 2 or cost != target:
        return false("min-cost-flow", cost=cost, target=target).with_boundary(touches)
    pa = next(p for p in paths if p[0] == xs)
    pb = next(p for p in paths if p[0] == ys)
    return true("min-cost-flow", (pa, pb), cost=cost).with_boundary(touches)


def source_disjoint_hyperplane_pair(env2x: Environment, i: int, j: int, n: int,
                                    cache: FieldCache | None = None) -> Decision:
    """The event that some geodesics from ``i e_2`` and ``j e_2`` to ``H_n`` are disjoint."""
    if i == j:
        raise ValueError("i and j must differ")
    d = env2x.box.d
    return hyperplane_disjoint_pair(env2x, unit(d, 1, i), unit(d, 1, j), n, cache)


def two_sources_one_sink(env: Environment, x, y, u, cache: FieldCache | None = None) -> Decision:
    """Geodesics ``x -> u`` and ``y -> u`` meeting only at ``u``."""
    box = env.box
    xi, yi, ui = box.index(x), box.index(y), box.index(u)
    if len({xi, yi, ui}) < 3:
        raise ValueError("x, y, u must be distinct")
    cache = cache or FieldCache(env)
    da = geodesic_dag(env, x, u, cache)
    db = geodesic_dag(env, y, u, cache)
    verts, arcs = _dag_arcs([da, db], drop_into={xi, yi}, drop_out_of={ui})
    sf = _SplitFlow(verts, arcs, [(xi, 1, 0), (yi, 1, 0)], [(ui, 2, 0)], {ui: 2})
    flow, cost, paths = sf.run(2)
    target = da.total + db.total
    touches = dag_touches_boundary(da) or dag_touches_boundary(db)
    if flow < 2 or cost != target:
        return false("min-cost-flow", cost=cost, target=target).with_boundary(touches)
    pa = next(p for p in paths if p[0] == xi)
    pb = next(p for p in paths if p[0] == yi)
    return true("min-cost-flow", (pa, pb)).with_boundary(touches)


# ---------------------------------------------------------------------------
# Paired endpoints


def _reach(succ, start: int, goal, blocked) -> list[int] | None:
    """BFS path from ``start`` to a vertex in ``goal`` avoiding ``blocked``."""
    if start in blocked:
        return None
    if start in goal:
        return [start]
    parent = {start: None}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in succ.get(u, ()):
            if v in parent or v in blocked:
                continue
            parent[v] = u
            if v in goal:
                path = [v]
                while parent[path[-1]] is not None:
                    path.append(parent[path[-1]])
                return path[::-1]
            queue.append(v)
    return None


def disjoint_dag_paths(dag_a: GeodesicDag, dag_b: GeodesicDag, budget: Budget = Budget()) -> Decision:
    """Exhaustive search for vertex-disjoint geodesics, one from each DAG.

    Depth-first over simple paths of the smaller DAG; a branch is cut as
    soon as either DAG can no longer complete a path that avoids the partial
    path.  Exact unless the node budget runs out.
    """
    swap = len(dag_b.vertex_set) < len(dag_a.vertex_set)
    p, q = (dag_b, dag_a) if swap else (dag_a, dag_b)
    q_vertices = q.vertex_set
    forbid = {q.source} | (set(q.sinks) if q.kind == "point" else set())
    if p.source in forbid:
        return false("search", nodes=0)
    p_succ, q_succ, p_sinks, q_sinks = p.succ, q.succ, p.sinks, q.sinks
    nodes = 0

    def found(pp, qq):
        pair = (qq, pp) if swap else (pp, qq)
        return true("search", pair, nodes=nodes)

    path = [p.source]
    used = {p.source}
    if p.source in p_sinks:
        qq = _reach(q_succ, q.source, q_sinks, used)
        if qq is not None:
            return found(list(path), qq)
    if _reach(q_succ, q.source, q_sinks, used) is None:
        return false("search", nodes=0)
    stack = [iter(p_succ.get(p.source, ()))]
    while stack:
        advanced = False
        for v in stack[-1]:
            if v in used or v in forbid:
                continue
            nodes += 1
            if nodes > budget.max_nodes:
                return undecided("budget-exhausted", nodes=nodes)
            used.add(v)
            if v in q_vertices and _reach(q_succ, q.source, q_sinks, used) is None:
                used.discard(v)
                continue
            if v in p_sinks:
                qq = _reach(q_succ, q.source, q_sinks, used)
                if qq is not None:
                    return found(path + [v], qq)
                if p.kind == "point" or not p_succ.get(v):
                    used.discard(v)
                    continue
            elif _reach(p_succ, v, p_sinks, (used - {v}) | forbid) is None:
                used.discard(v)
                continue
            path.append(v)
            stack.append(iter(p_succ.get(v, ())))
            advanced = True
            break
        if not advanced:
            stack.pop()
            used.discard(path.pop())
    return false("search", nodes=nodes)


def paired_disjoint(env: Environment, s1, t1, s2, t2, budget: Budget = Budget(),
                    cache: FieldCache | None = None) -> Decision:
    """Disjoint geodesics ``s1 -> t1`` and ``s2 -> t2``.

    Tier 1: unpaired min-cost 2-flow on the union of both geodesic DAGs;
    no flow or cost above ``T(s1,t1) + T(s2,t2)`` decides False.
    Tier 2: a correctly paired optimal flow decides True.
    Tier 3: :func:`disjoint_dag_paths`.
    """
    box = env.box
    ids = [box.index(v) for v in (s1, t1, s2, t2)]
    if ids[0] == ids[1] or ids[2] == ids[3]:
        raise ValueError("each pair needs distinct terminals")
    if {ids[0], ids[1]} & {ids[2], ids[3]}:
        raise ValueError("the two terminal pairs overlap")
    cache = cache or FieldCache(env)
    d1 = geodesic_dag(env, s1, t1, cache)
    d2 = geodesic_dag(env, s2, t2, cache)
    return paired_disjoint_dags(d1, d2, budget)


def paired_disjoint_dags(d1: GeodesicDag, d2: GeodesicDag, budget: Budget = Budget()) -> Decision:
    s1, t1, s2, t2 = d1.source, d1.target, d2.source, d2.target
    touches = dag_touches_boundary(d1) or dag_touches_boundary(d2)
    target = d1.total + d2.total
    verts, arcs = _dag_arcs([d1, d2], drop_into={s1, s2}, drop_out_of={t1, t2})
    sf = _SplitFlow(verts, arcs, [(s1, 1, 0), (s2, 1, 0)], [(t1, 1, 0), (t2, 1, 0)])
    flow, cost, paths = sf.run(2)
    if flow < 2 or cost > target:
        return false("tier1", cost=cost, target=target).with_boundary(touches)
    by_start = {p[0]: p for p in paths}
    p1, p2 = by_start[s1], by_start[s2]
    if p1[-1] == t1 and p2[-1] == t2 and cost == target:
        return true("tier2", (p1, p2)).with_boundary(touches)
    dec = disjoint_dag_paths(d1, d2, budget)
    reason = "tier3" if dec.decided else dec.reason
    return Decision(dec.outcome, reason, dec.witness, touches, dec.info)


def _enumerate(dag: GeodesicDag, cap: int) -> list[list[int]]:
    try:
        return list(iter_geodesics(dag, cap))
    except OverflowError as exc:
        raise OracleOverflow(str(exc)) from None


def _mask(dag: GeodesicDag, path) -> int:
    m = 0
    for v in path:
        m |= 1 << v
    if dag.kind == "hyperplane":
        m |= 1 << dag.token(path[-1])
    return m


def oracle_dag_pair(dag_a: GeodesicDag, dag_b: GeodesicDag, cap: int = 10**5) -> Decision:
    """Exhaustive: is some geodesic of ``dag_a`` disjoint from some geodesic of ``dag_b``?"""
    ga = {}
    for p in _enumerate(dag_a, cap):
        ga.setdefault(_mask(dag_a, p), p)
    gb = {}
    for p in _enumerate(dag_b, cap):
        gb.setdefault(_mask(dag_b, p), p)
    for ma, pa in ga.items():
        for mb, pb in gb.items():
            if ma & mb == 0:
                return true("oracle", (pa, pb))
    return false("oracle")


def oracle_pair_disjoint(env: Environment, s1, t1, s2, t2, cap: int = 10**5) -> Decision:
    """Ground truth for :func:`paired_disjoint` by full enumeration."""
    cache = FieldCache(env)
    return oracle_dag_pair(geodesic_dag(env, s1, t1, cache), geodesic_dag(env, s2, t2, cache), cap)


def intersects_all_pairs(dag_a: GeodesicDag, dag_b: GeodesicDag, budget: Budget = Budget()) -> Decision:
    """Whether every geodesic of ``dag_a`` meets every geodesic of ``dag_b``."""
    if dag_a.env is not dag_b.env and dag_a.env != dag_b.env:
        raise ValueError("DAGs must share one environment")
    if dag_a.kind == dag_b.kind == "hyperplane" and dag_a.n == dag_b.n and dag_a.side == dag_b.side:
        if dag_a.source == dag_b.source:
            return true("same-source", ((), ()))
        dec = _hyperplane_pair(dag_a, dag_b)
    elif dag_a.kind == dag_b.kind == "point":
        terms = {dag_a.source, dag_a.target} & {dag_b.source, dag_b.target}
        if terms:
            return true("shared-terminal", ((), ()))
        dec = paired_disjoint_dags(dag_a, dag_b, budget)
    else:
        dec = disjoint_dag_paths(dag_a, dag_b, budget)
    return dec.negate()
