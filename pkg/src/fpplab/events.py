"""Event detectors and checkable edge-modification constructions.

Hyperplane events for odd ``n`` run on a doubled environment; :func:`detect`
doubles internally, while functions whose first argument is named ``env2x``
expect the caller to have applied :func:`fpplab.lattice.double_weights`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .disjointness import (
    Budget,
    Decision,
    false,
    internally_disjoint_pair,
    intersects_all_pairs,
    paired_disjoint,
    source_disjoint_hyperplane_pair,
    true,
    two_sources_one_sink,
    undecided,
)
from .geodesics import (
    BoxPolicy,
    FieldCache,
    HyperplaneEndpoint,
    canonical_geodesic,
    dag_touches_boundary,
    geodesic_dag,
    hyperplane_dag,
    hyperplane_time,
)
from .lattice import (
    Box,
    EdgeRef,
    Environment,
    Vertex,
    add,
    diameter,
    double_weights,
    enumerate_sphere,
    set_edge,
    sphere_adjacent_pairs,
    unit,
)

# ---------------------------------------------------------------------------
# Event specifications


@dataclass(frozen=True)
class Thm1Item1:
    """Disjoint geodesics ``0 -> n e_1`` and ``e_2 -> n e_1 + e_2``."""

    n: int
    name = "thm1_item1"


@dataclass(frozen=True)
class Thm1Item2:
    """Disjoint geodesics ``0 -> y`` and ``e_2 -> y'`` for adjacent ``y, y'`` on the sphere."""

    n: int
    y: Vertex
    y2: Vertex
    name = "thm1_item2"


@dataclass(frozen=True)
class Thm2Item1:
    """Two geodesics ``0 -> n e_1`` sharing only their endpoints."""

    n: int
    name = "thm2_item1"


@dataclass(frozen=True)
class Thm2Item2:
    """Two geodesics ``0 -> u`` sharing only their endpoints, ``u`` on the sphere."""

    n: int
    u: Vertex
    name = "thm2_item2"


@dataclass(frozen=True)
class An:
    """Disjoint geodesics from ``i e_2`` and ``j e_2`` to ``H_n``."""

    i: int
    j: int
    n: int
    name = "a_n"


@dataclass(frozen=True)
class Gn:
    """``A_n(0, 1)`` with both witnesses of diameter at most ``c2 * n``."""

    n: int
    c2: int = 4
    name = "g_n"


@dataclass(frozen=True)
class SameSourceHyperplane:
    """Two geodesics ``0 -> H_n`` sharing only the vertex 0."""

    n: int
    name = "same_source_hyperplane"


@dataclass(frozen=True)
class CoexLevel:
    """Both ``{B_y(0,e_2) < K}`` and ``{B_y(0,e_2) >= K}`` meet the sphere of radius ``n``."""

    n: int
    K: int
    name = "coex_level"


EventSpec = Thm1Item1 | Thm1Item2 | Thm2Item1 | Thm2Item2 | An | Gn | SameSourceHyperplane | CoexLevel
HYPERPLANE_EVENTS = (An, Gn, SameSourceHyperplane)


def event_points(spec, d: int) -> list[Vertex]:
    """Vertices the policy box must surround."""
    o, e1, e2 = (0,) * d, unit(d, 0), unit(d, 1)
    n = spec.n
    if n < 1:
        raise ValueError("n must be >= 1")
    corners = [(-n,) * d, (n,) * d]
    if isinstance(spec, Thm1Item1):
        return [o, unit(d, 0, n), e2, add(unit(d, 0, n), e2)]
    if isinstance(spec, Thm2Item1):
        return [o, unit(d, 0, n)]
    if isinstance(spec, (Thm1Item2, Thm2Item2, CoexLevel)):
        return [o, e2] + corners
    if isinstance(spec, An):
        return [unit(d, 1, spec.i), unit(d, 1, spec.j), unit(d, 0, -(-n // 2))]
    if isinstance(spec, (Gn, SameSourceHyperplane)):
        return [o, e2, unit(d, 0, -(-n // 2))]
    raise TypeError(f"unknown event {spec!r}")


def policy_box(spec, d: int, kappa: int, policy: BoxPolicy = BoxPolicy()) -> Box:
    return Box.around(event_points(spec, d), policy.margin(spec.n, kappa))


# ---------------------------------------------------------------------------
# Detection


def _check_sphere(env: Environment, n: int, *vs):
    sphere = set(enumerate_sphere(env.box, n))
    for v in vs:
        if tuple(v) not in sphere:
            raise IndexError(f"{tuple(v)} is not on the sphere of radius {n}")


def detect(spec, env: Environment, budget: Budget = Budget(), cache: FieldCache | None = None) -> Decision:
    """Decide ``spec`` in ``env`` (physical scale; doubled internally when needed)."""
    d = env.box.d
    o, e2 = (0,) * d, unit(d, 1)
    n = spec.n
    if isinstance(spec, HYPERPLANE_EVENTS):
        env2x = double_weights(env) if n % 2 else env
        cache = cache if (cache is not None and cache.env is env2x) else FieldCache(env2x)
        if isinstance(spec, An):
            return source_disjoint_hyperplane_pair(env2x, spec.i, spec.j, n, cache)
        if isinstance(spec, SameSourceHyperplane):
            return internally_disjoint_pair(hyperplane_dag(env2x, o, n, cache))
        return _detect_gn(env2x, n, spec.c2, cache)
    cache = cache or FieldCache(env)
    if isinstance(spec, Thm1Item1):
        ne1 = unit(d, 0, n)
        return paired_disjoint(env, o, ne1, e2, add(ne1, e2), budget, cache)
    if isinstance(spec, Thm1Item2):
        y, y2 = tuple(spec.y), tuple(spec.y2)
        _check_sphere(env, n, y, y2)
        if sum(abs(a - b) for a, b in zip(y, y2)) != 1:
            raise ValueError("y and y' must be adjacent")
        if y == e2 or y2 == o:
            # the two geodesics would share a terminal
            return false("shared-terminal")
        return paired_disjoint(env, o, y, e2, y2, budget, cache)
    if isinstance(spec, Thm2Item1):
        return internally_disjoint_pair(geodesic_dag(env, o, unit(d, 0, n), cache))
    if isinstance(spec, Thm2Item2):
        _check_sphere(env, n, spec.u)
        return internally_disjoint_pair(geodesic_dag(env, o, spec.u, cache))
    if isinstance(spec, CoexLevel):
        return _detect_coex(env, n, spec.K, cache)
    raise TypeError(f"unknown event {spec!r}")


def _detect_coex(env, n, K, cache):
    box = env.box
    sphere = enumerate_sphere(box, n)
    b = _busemann_on(env, sphere, cache)
    k = K * env.scale
    below = [y for y, v in zip(sphere, b) if v < k]
    above = [y for y, v in zip(sphere, b) if v >= k]
    if below and above:
        return true("level-sets", ((box.index(below[0]),), (box.index(above[0]),)))
    return false("level-sets")


def _busemann_on(env, targets, cache) -> list[int]:
    d = env.box.d
    f0, f1 = cache.point((0,) * d), cache.point(unit(d, 1))
    idx = [env.box.index(y) for y in targets]
    return (f0[idx] - f1[idx]).tolist()


def family_candidates(kind: str, n: int, d: int, box: Box | None = None) -> list:
    """All candidate specs behind an ``exists y ~ y'`` / ``exists u`` statement."""
    box = box or Box.cube(d, n)
    if kind == Thm1Item2.name:
        out = []
        for y, y2 in sphere_adjacent_pairs(box, n):
            out.append(Thm1Item2(n, y, y2))
            out.append(Thm1Item2(n, y2, y))
        return out
    if kind == Thm2Item2.name:
        return [Thm2Item2(n, u) for u in enumerate_sphere(box, n)]
    raise ValueError(f"{kind} is not a sphere family")


# ---------------------------------------------------------------------------
# The statistic D and G_n


def d_statistic(env2x: Environment, n: int, cache: FieldCache | None = None) -> int:
    """Scaled ``T(0, H_n) - T(e_2, H_n)``."""
    d = env2x.box.d
    cache = cache or FieldCache(env2x)
    return hyperplane_time(env2x, (0,) * d, n, cache) - hyperplane_time(env2x, unit(d, 1), n, cache)


def is_integer_time(env: Environment, scaled: int) -> bool:
    return scaled % env.scale == 0


@dataclass(frozen=True)
class GnWitness:
    gamma0: tuple[Vertex, ...]
    gamma1: tuple[Vertex, ...]
    U: tuple[HyperplaneEndpoint, HyperplaneEndpoint]
    in_lambda: bool


def gn_witness(env2x: Environment, n: int, c2: int = 4, cache: FieldCache | None = None) -> GnWitness | None:
    """The canonical disjoint pair from 0 and ``e_2`` to ``H_n`` when both
    have diameter at most ``c2 * n``; ``None`` otherwise."""
    cache = cache or FieldCache(env2x)
    dec = source_disjoint_hyperplane_pair(env2x, 0, 1, n, cache)
    return _gn_from(env2x, n, c2, dec, cache)


def _gn_from(env2x, n, c2, dec, cache):
    if not dec.is_true:
        return None
    d = env2x.box.d
    g0 = hyperplane_dag(env2x, (0,) * d, n, cache)
    g1 = hyperplane_dag(env2x, unit(d, 1), n, cache)
    p0, p1 = (g0.path_coords(p) for p in dec.witness)
    if diameter(p0) > c2 * n or diameter(p1) > c2 * n:
        return None
    u = (g0.endpoint_of(dec.witness[0][-1]), g1.endpoint_of(dec.witness[1][-1]))
    return GnWitness(tuple(p0), tuple(p1), u, all(e.in_lambda(c2) for e in u))


def _detect_gn(env2x, n, c2, cache):
    dec = source_disjoint_hyperplane_pair(env2x, 0, 1, n, cache)
    w = _gn_from(env2x, n, c2, dec, cache)
    if w is not None:
        return Decision(dec.outcome, "canonical-pair", dec.witness, dec.touches_boundary,
                        {"in_lambda": w.in_lambda, "U": [list(e.lateral) for e in w.U]})
    if not dec.is_true:
        return dec
    return undecided("diameter-search").with_boundary(dec.touches_boundary)


# ---------------------------------------------------------------------------
# Surgery reports


@dataclass
class SurgeryReport:
    name: str
    premise: bool
    env: Environment
    value: Fraction | None = None
    witnesses: tuple = ()
    verified: bool | None = None
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "surgery": self.name,
            "premise": self.premise,
            "value": None if self.value is None else str(self.value),
            "verified": self.verified,
            "witnesses": [[list(v) for v in p] for p in self.witnesses],
            "environment": self.env.fingerprint,
            "surgery_log": [[s.edge, s.old, s.new] for s in self.env.surgery_log],
            "details": {k: _plain(v) for k, v in self.details.items()},
        }


def _plain(v):
    if isinstance(v, (Fraction,)):
        return str(v)
    if isinstance(v, (tuple, list)):
        return [_plain(x) for x in v]
    if isinstance(v, np.integer):
        return int(v)
    return v


def _no_premise(name, env, **details) -> SurgeryReport:
    return SurgeryReport(name, False, env, details=details)


def _cost(env: Environment, path: Sequence[Vertex]) -> int:
    return env.path_time(list(path))


def _only_shared(p, q, allowed) -> bool:
    return set(map(tuple, p)) & set(map(tuple, q)) <= set(map(tuple, allowed))


def surgery_prop24(env2x: Environment, n: int, cache: FieldCache | None = None) -> SurgeryReport:
    """Set the edge ``{0, e_2}`` to ``|D|`` when ``A_n(0,1)`` holds and ``D`` is an integer.

    With ``D >= 0`` two geodesics from 0 sharing only 0 are built as
    ``gamma_0`` and ``(0, e_2) + gamma_1``; with ``D < 0`` the roles of 0 and
    ``e_2`` are swapped.  Verification re-costs both witnesses in the
    modified environment and re-decides the event there by flow.
    """
    name = "prop24"
    d = env2x.box.d
    o, e2 = (0,) * d, unit(d, 1)
    cache = cache or FieldCache(env2x)
    a_n = source_disjoint_hyperplane_pair(env2x, 0, 1, n, cache)
    D = d_statistic(env2x, n, cache)
    if not a_n.is_true:
        return _no_premise(name, env2x, reason="A_n(0,1) fails", D=Fraction(D, env2x.scale))
    if not is_integer_time(env2x, D):
        return _no_premise(name, env2x, reason="D not an integer", D=Fraction(D, env2x.scale))
    g0 = hyperplane_dag(env2x, o, n, cache)
    gamma0, gamma1 = (g0.path_coords(p) for p in a_n.witness)
    if D >= 0:
        src, other, mine, theirs = o, e2, gamma0, gamma1
    else:
        src, other, mine, theirs = e2, o, gamma1, gamma0
    delta = abs(D)
    mod = set_edge(env2x, EdgeRef.between(o, e2), delta)
    w1, w2 = list(mine), [src] + list(theirs)
    mcache = FieldCache(mod)
    t_mod = hyperplane_time(mod, src, n, mcache)
    dag = hyperplane_dag(mod, src, n, mcache)
    half = _exit_cost(mod, n, w1[-1]), _exit_cost(mod, n, w2[-1])
    witnesses_ok = (
        _cost(mod, w1) + half[0] == t_mod
        and _cost(mod, w2) + half[1] == t_mod
        and len(set(w2)) == len(w2)
        and _only_shared(w1, w2, [src])
    )
    flow_ok = internally_disjoint_pair(dag).is_true
    return SurgeryReport(name, True, mod, Fraction(delta, mod.scale), (tuple(w1), tuple(w2)),
                         witnesses_ok and flow_ok,
                         {"D": Fraction(D, env2x.scale), "source": list(src),
                          "witness_check": witnesses_ok, "flow_check": flow_ok})


def _exit_cost(env2x: Environment, n: int, v: Vertex) -> int:
    """Cost charged after the last lattice vertex of a hyperplane geodesic."""
    if n % 2 == 0:
        return 0
    side = -1 if 2 * v[0] < n else 1
    return env2x.weight(v, (v[0] - side,) + tuple(v[1:])) // 2


def surgery_claim25(env2x: Environment, n: int, cache: FieldCache | None = None) -> SurgeryReport:
    """Lower the crossing edge ``E_0`` of the canonical ``gamma_0`` by one.

    Premise: odd ``n``, ``A_n(0,1)``, ``D`` and ``T(0, H_n)`` both
    half-integers (integer-valued physical weights).
    """
    name = "claim25"
    d = env2x.box.d
    o = (0,) * d
    if n % 2 == 0:
        return _no_premise(name, env2x, reason="n even")
    if env2x.scale != 2:
        return _no_premise(name, env2x, reason="needs integer physical weights (doubled scale 2)")
    cache = cache or FieldCache(env2x)
    a_n = source_disjoint_hyperplane_pair(env2x, 0, 1, n, cache)
    D = d_statistic(env2x, n, cache)
    t0 = hyperplane_time(env2x, o, n, cache)
    if not a_n.is_true:
        return _no_premise(name, env2x, reason="A_n(0,1) fails")
    if is_integer_time(env2x, D):
        return _no_premise(name, env2x, reason="D is an integer")
    if is_integer_time(env2x, t0):
        return _no_premise(name, env2x, reason="T(0,H_n) is an integer")
    g0 = hyperplane_dag(env2x, o, n, cache)
    e0 = g0.endpoint_of(a_n.witness[0][-1]).crossing
    i0 = env2x.weight(e0)
    mod = set_edge(env2x, e0, i0 - env2x.scale)
    mcache = FieldCache(mod)
    still = source_disjoint_hyperplane_pair(mod, 0, 1, n, mcache)
    g0m = hyperplane_dag(mod, o, n, mcache)
    canon = canonical_geodesic(g0m)
    same_edge = g0m.endpoint_of(canon[-1]).crossing == e0
    D2 = d_statistic(mod, n, mcache)
    d_ok = D2 == D - 1 and is_integer_time(mod, D2)
    wit = tuple(tuple(g0m.path_coords(p)) for p in still.witness) if still.is_true else ()
    return SurgeryReport(name, True, mod, Fraction(i0 - env2x.scale, env2x.scale), wit,
                         still.is_true and same_edge and d_ok,
                         {"E0": [list(e0.base), e0.axis], "i0": Fraction(i0, env2x.scale),
                          "D": Fraction(D, env2x.scale), "D_after": Fraction(D2, mod.scale),
                          "a_n_after": still.is_true, "same_crossing": same_edge, "d_integer": d_ok})


# ---------------------------------------------------------------------------
# Sphere scans and the coexistence surgeries


def scan_sphere_K(env: Environment, n: int, K: int, cache: FieldCache | None = None):
    """First adjacent pair ``y ~ y'`` of the sphere with ``B_y < K <= B_{y'}``.

    Returns ``(y, y', Delta)`` with ``Delta = T(0,y) - K - T(e_2,y')``
    (scaled), or ``None``.  Pairs are visited in lexicographic order, each
    in both orientations.
    """
    d = env.box.d
    cache = cache or FieldCache(env)
    k = K * env.scale
    f0, f1 = cache.point((0,) * d), cache.point(unit(d, 1))
    box = env.box
    for a, b in sphere_adjacent_pairs(box, n):
        ia, ib = box.index(a), box.index(b)
        ba, bb = int(f0[ia] - f1[ia]), int(f0[ib] - f1[ib])
        if ba < k <= bb:
            return a, b, int(f0[ia]) - k - int(f1[ib])
        if bb < k <= ba:
            return b, a, int(f0[ib]) - k - int(f1[ia])
    return None


def surgery_claim33(env: Environment, n: int, K: int, budget: Budget = Budget(),
                    cache: FieldCache | None = None) -> SurgeryReport:
    """Set ``{y, y'}`` to ``|Delta|`` so that ``0`` and ``e_2`` (with head start
    ``K``) reach ``u`` at the same time along geodesics meeting only at ``u``."""
    name = "claim33"
    d = env.box.d
    o, e2 = (0,) * d, unit(d, 1)
    cache = cache or FieldCache(env)
    found = scan_sphere_K(env, n, K, cache)
    if found is None:
        return _no_premise(name, env, reason="no sign change on the sphere")
    y, y2, delta = found
    if y2 in (o, e2):
        # only possible for n = 1: a geodesic would degenerate to a point
        return _no_premise(name, env, reason="terminal overlap")
    pair = paired_disjoint(env, o, y, e2, y2, budget, cache)
    if not pair.is_true:
        return _no_premise(name, env, reason=f"paired decision {pair.outcome.value}", y=y, y2=y2)
    box = env.box
    gamma, gamma2 = ([box.topology.coord_list[i] for i in p] for p in pair.witness)
    mod = set_edge(env, EdgeRef.between(y, y2), abs(delta))
    if delta >= 0:
        u, w1, w2 = y, gamma, gamma2 + [y]
    else:
        u, w1, w2 = y2, gamma + [y2], gamma2
    mcache = FieldCache(mod)
    t0, t1 = mcache.T(o, u), mcache.T(e2, u)
    level_ok = t0 == K * mod.scale + t1
    wit_ok = (
        _cost(mod, w1) == t0 and _cost(mod, w2) == t1
        and len(set(w1)) == len(w1) and len(set(w2)) == len(w2)
        and _only_shared(w1, w2, [u])
    )
    flow_ok = two_sources_one_sink(mod, o, e2, u, mcache).is_true
    return SurgeryReport(name, True, mod, Fraction(abs(delta), mod.scale), (tuple(w1), tuple(w2)),
                         level_ok and wit_ok and flow_ok,
                         {"y": y, "y2": y2, "Delta": Fraction(delta, env.scale), "u": u, "K": K,
                          "level_check": level_ok, "witness_check": wit_ok, "flow_check": flow_ok})


def claim33_event(env: Environment, K: int, u: Vertex, cache: FieldCache | None = None) -> Decision:
    """``T(0,u) = K + T(e_2,u)`` with geodesics from 0 and ``e_2`` meeting only at ``u``."""
    d = env.box.d
    o, e2 = (0,) * d, unit(d, 1)
    u = tuple(u)
    if u in (o, e2):
        return false("terminal-overlap")
    cache = cache or FieldCache(env)
    if cache.T(o, u) != K * env.scale + cache.T(e2, u):
        return false("level")
    return two_sources_one_sink(env, o, e2, u, cache)


def surgery_claim34(env: Environment, n: int, K: int, u: Vertex,
                    cache: FieldCache | None = None) -> SurgeryReport:
    """Set ``{0, e_2}`` to ``|K|`` so that two geodesics to ``u`` share only their endpoints.

    For ``K < 0`` the roles of 0 and ``e_2`` are swapped.
    """
    name = "claim34"
    d = env.box.d
    o, e2 = (0,) * d, unit(d, 1)
    u = tuple(u)
    cache = cache or FieldCache(env)
    ev = claim33_event(env, K, u, cache)
    if not ev.is_true:
        return _no_premise(name, env, reason=f"claim33 event: {ev.reason}")
    box = env.box
    g1, g2 = ([box.topology.coord_list[i] for i in p] for p in ev.witness)
    if K >= 0:
        src, w1, w2 = o, g1, [o] + g2
    else:
        src, w1, w2 = e2, g2, [e2] + g1
    mod = set_edge(env, EdgeRef.between(o, e2), abs(K) * env.scale)
    mcache = FieldCache(mod)
    t = mcache.T(src, u)
    wit_ok = (
        _cost(mod, w1) == t and _cost(mod, w2) == t
        and len(set(w2)) == len(w2)
        and _only_shared(w1, w2, [src, u])
    )
    flow_ok = internally_disjoint_pair(geodesic_dag(mod, src, u, mcache)).is_true
    return SurgeryReport(name, True, mod, Fraction(abs(K)), (tuple(w1), tuple(w2)),
                         wit_ok and flow_ok,
                         {"u": u, "K": K, "source": list(src),
                          "witness_check": wit_ok, "flow_check": flow_ok})


# ---------------------------------------------------------------------------
# Gluing across H_n and the chain property


def half_box(n: int, m: int, d: int = 2) -> Box:
    """Left half box ``x_1 in [-m, n/2]``, other axes ``[-m, m+1]``."""
    if n % 2:
        raise ValueError("half boxes need even n")
    return Box((-m,) + (-m,) * (d - 1), (n // 2,) + (m + 1,) * (d - 1))


def glue_halves(envL: Environment, envR: Environment, n: int) -> Environment:
    """Left edges from ``envL``; right edges pulled back from ``envR`` under
    ``x_1 -> n - x_1``.  Edges inside ``H_n`` come from ``envL``."""
    if envL.box != envR.box or envL.scale != envR.scale:
        raise ValueError("halves must share box and scale")
    lb = envL.box
    if lb.hi[0] * 2 != n:
        raise ValueError("left half must end on H_n")
    box = Box(lb.lo, (n - lb.lo[0],) + lb.hi[1:])
    top, ltop = box.topology, lb.topology
    base = top.coords[top.eu]
    axis = top.eaxis
    left = (base[:, 0] + (axis == 0)) * 2 <= n
    refl = base.copy()
    refl[:, 0] = n - base[:, 0] - (axis == 0)
    src = np.where(left[:, None], base, refl)
    lin = ((src - ltop.lo) * ltop.strides).sum(axis=1)
    ids = ltop.edge_id[lin, axis]
    w = np.where(left, envL.weights[ids], envR.weights[ids])
    return Environment(box, w, envL.scale, {"glued": n})


def _reflect_path(path, n):
    return [(n - v[0],) + tuple(v[1:]) for v in path]


def symmetrization_check(envL: Environment, envR: Environment, n: int, c2: int = 4) -> bool:
    """When both halves have the good event with matching endpoints, the
    glued concatenations are disjoint geodesics ``0 -> n e_1`` and
    ``e_2 -> n e_1 + e_2``.  Vacuously true otherwise."""
    if n % 2:
        raise NotImplementedError("odd n is not supported by the gluing check")
    return symmetrization_report(envL, envR, n, c2)["verified"]


def symmetrization_report(envL: Environment, envR: Environment, n: int, c2: int = 4) -> dict:
    if n % 2:
        raise NotImplementedError("odd n is not supported by the gluing check")
    wl, wr = gn_witness(envL, n, c2), gn_witness(envR, n, c2)
    premise = wl is not None and wr is not None and all(
        a.lateral == b.lateral for a, b in zip(wl.U, wr.U))
    if not premise:
        return {"premise": False, "verified": True}
    glued = glue_halves(envL, envR, n)
    d = glued.box.d
    p0 = list(wl.gamma0) + _reflect_path(wr.gamma0, n)[::-1][1:]
    p1 = list(wl.gamma1) + _reflect_path(wr.gamma1, n)[::-1][1:]
    cache = FieldCache(glued)
    ne1 = unit(d, 0, n)
    ok = (
        p0[0] == (0,) * d and p0[-1] == ne1
        and p1[0] == unit(d, 1) and p1[-1] == add(ne1, unit(d, 1))
        and _cost(glued, p0) == cache.T(p0[0], p0[-1])
        and _cost(glued, p1) == cache.T(p1[0], p1[-1])
        and len(set(p0)) == len(p0) and len(set(p1)) == len(p1)
        and not set(p0) & set(p1)
    )
    return {"premise": True, "verified": bool(ok), "paths": (p0, p1), "glued": glued}


class Indeterminate(RuntimeError):
    """A step of a chain check could not be decided within budget."""


def mn_chain_check(env2x: Environment, n: int, C: int, budget: Budget = Budget(),
                   cache: FieldCache | None = None) -> bool:
    """If every geodesic from ``i e_2`` meets every geodesic from ``(i+1) e_2``
    then the endpoints of the first set are endpoints of the second, for
    ``i = 0 .. C n - 1``."""
    d = env2x.box.d
    cache = cache or FieldCache(env2x)
    dags = [hyperplane_dag(env2x, unit(d, 1, i), n, cache) for i in range(C * n + 1)]
    ok = True
    for i in range(C * n):
        dec = intersects_all_pairs(dags[i], dags[i + 1], budget)
        if not dec.decided:
            raise Indeterminate(f"step {i}: {dec.reason}")
        if dec.is_true:
            ends_i = {e.lateral for e in dags[i].endpoints()}
            ends_j = {e.lateral for e in dags[i + 1].endpoints()}
            ok = ok and ends_i <= ends_j
    return ok


# ---------------------------------------------------------------------------
# Busemann statistics


@dataclass(frozen=True)
class CoexStats:
    direction: Vertex
    pair: tuple[Vertex, Vertex]
    horizon: int
    scale: int
    positive: tuple[int, ...]   # B_{k x}(p, q), k = 1..N (scaled)
    negative: tuple[int, ...]   # k = -1..-N
    bound: int                  # T(p, q), scaled
    levels: dict                # K -> (count below K, count at least K), over both sides

    @property
    def upper_proxy(self) -> Fraction:
        return Fraction(max(self.positive), self.scale)

    @property
    def lower_proxy(self) -> Fraction:
        return Fraction(min(self.negative), self.scale)

    @property
    def coexistence_proxy(self) -> bool:
        return self.lower_proxy < self.upper_proxy

    def to_json(self) -> dict:
        return {
            "direction": list(self.direction), "pair": [list(p) for p in self.pair],
            "horizon": self.horizon, "scale": self.scale,
            "positive": list(self.positive), "negative": list(self.negative),
            "upper_proxy": str(self.upper_proxy), "lower_proxy": str(self.lower_proxy),
            "levels": {str(k): list(v) for k, v in sorted(self.levels.items())},
        }


def coex_stats(env: Environment, horizon: int, direction: Vertex | None = None,
               offset: int = 0, cache: FieldCache | None = None) -> CoexStats:
    """``B_{k x}(p, q)`` for ``k = +-1 .. +-horizon``.

    By default ``x = e_2`` and ``(p, q) = (0, e_2)``; with ``direction = e_1``
    the pair is ``(a e_1, (a+1) e_1)`` for ``a = offset``.
    """
    d = env.box.d
    x = unit(d, 1) if direction is None else tuple(direction)
    if x == unit(d, 1):
        p, q = (0,) * d, unit(d, 1)
    else:
        p, q = unit(d, 0, offset), unit(d, 0, offset + 1)
    for k in (horizon, -horizon):
        if not env.box.contains(tuple(k * c for c in x)):
            raise IndexError(f"horizon {horizon} along {x} leaves {env.box}")
    cache = cache or FieldCache(env)
    fp, fq = cache.point(p), cache.point(q)
    box = env.box

    def b(k):
        i = box.index(tuple(k * c for c in x))
        return int(fp[i] - fq[i])

    pos = tuple(b(k) for k in range(1, horizon + 1))
    neg = tuple(b(-k) for k in range(1, horizon + 1))
    S = math.ceil(env.max_weight / env.scale)
    allv = pos + neg
    levels = {K: (sum(v < K * env.scale for v in allv), sum(v >= K * env.scale for v in allv))
              for K in range(-S, S + 1)}
    return CoexStats(x, (p, q), horizon, env.scale, pos, neg, int(fq[box.index(p)]), levels)
