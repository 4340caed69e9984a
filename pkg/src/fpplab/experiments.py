"""Sample loops behind the surgery, coexistence, percolation and oracle commands."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

from .disjointness import (
    Budget,
    OracleOverflow,
    internally_disjoint_pair,
    oracle_dag_pair,
    oracle_internally_disjoint,
    oracle_pair_disjoint,
    paired_disjoint,
    source_disjoint_hyperplane_pair,
)
from .events import (
    SurgeryReport,
    coex_stats,
    scan_sphere_K,
    surgery_claim25,
    surgery_claim33,
    surgery_claim34,
    surgery_prop24,
)
from .geodesics import FieldCache, dag_diameter, dag_touches_boundary, geodesic_dag, hyperplane_dag
from .lattice import Box, WeightDist, double_weights, extend_environment, sample_environment, unit
from .percolation import clusters
from .rng import derive_stream


def surgery_box(kind: str, n: int, d: int = 2) -> Box:
    if kind in ("prop24", "claim25"):
        return Box.around([(0,) * d, unit(d, 1), unit(d, 0, -(-n // 2))], n)
    return Box.cube(d, 2 * n)


def surgery_sample(kind: str, n: int, K: int, dist: WeightDist, master: int, index: int,
                   d: int = 2, budget: Budget = Budget()) -> SurgeryReport:
    """One environment, one surgery.  ``claim34`` runs on the output of ``claim33``."""
    env = sample_environment(surgery_box(kind, n, d), dist, derive_stream(master, index))
    if kind == "prop24":
        return surgery_prop24(double_weights(env), n)
    if kind == "claim25":
        return surgery_claim25(double_weights(env), n)
    first = surgery_claim33(env, n, K, budget)
    if kind == "claim33":
        return first
    if not first.premise:
        return SurgeryReport("claim34", False, env, details={"reason": "claim33 premise fails"})
    return surgery_claim34(first.env, n, K, first.details["u"])


@dataclass
class SurgeryTally:
    samples: int = 0
    premise: int = 0
    verified: int = 0
    failures: list = field(default_factory=list)

    def add(self, rep: SurgeryReport, where):
        self.samples += 1
        if rep.premise:
            self.premise += 1
            if rep.verified:
                self.verified += 1
            else:
                self.failures.append(where)

    def to_json(self) -> dict:
        return {"samples": self.samples, "premise": self.premise, "verified": self.verified,
                "failures": [list(f) for f in self.failures]}


def run_surgeries(kind: str, n_list, K_list, dist: WeightDist, samples: int, master: int,
                  d: int = 2, budget: Budget = Budget(), sink=None) -> dict:
    """Tally premise hits and verifications per ``(n, K)``.

    ``sink`` (optional) receives ``(n, K, index, report)`` for every sample.
    """
    out = {}
    Ks = K_list if kind in ("claim33", "claim34") else [0]
    for pos, n in enumerate(n_list):
        for K in Ks:
            tally = SurgeryTally()
            for s in range(samples):
                index = pos * samples + s
                rep = surgery_sample(kind, n, K, dist, master, index, d, budget)
                tally.add(rep, (n, K, index))
                if sink is not None:
                    sink(n, K, index, rep)
            out[(n, K)] = tally
    return out


def coexist_sample(n: int, horizon: int, dist: WeightDist, master: int, index: int,
                   d: int = 2, box_radius: int | None = None):
    radius = box_radius if box_radius is not None else max(horizon, n) + n
    if radius < max(horizon, n):
        raise ValueError(f"box radius {radius} smaller than horizon/sphere {max(horizon, n)}")
    env = sample_environment(Box.cube(d, radius), dist, derive_stream(master, index))
    cache = FieldCache(env)
    stats = coex_stats(env, horizon, cache=cache)
    S = int(dist.max_atom.__ceil__())
    hits = {K: scan_sphere_K(env, n, K, cache) is not None for K in range(-S, S + 1)}
    return stats, hits


def perc_sample(M, radius: int, dist: WeightDist, master: int, index: int, d: int = 2) -> dict:
    env = sample_environment(Box.cube(d, radius), dist, derive_stream(master, index))
    lab = clusters(env, M)
    return {"clusters": lab.n_clusters, "largest_fraction": lab.largest_fraction,
            "touches_all_faces": lab.touches_all_faces}


@dataclass
class OracleTally:
    compared: int = 0
    agree: int = 0
    contradictions: int = 0
    undecided: int = 0
    skipped: int = 0

    def to_json(self):
        return dict(self.__dict__)


def _distinct_vertices(stream, box: Box, k: int):
    picks = []
    while len(picks) < k:
        v = box.vertex(stream.randbelow(box.n_vertices))
        if v not in picks:
            picks.append(v)
    return picks


def oracle_diff_sample(dist: WeightDist, radius: int, master: int, index: int, d: int = 2,
                       cap: int = 20000, budget: Budget = Budget()) -> dict:
    """Compare every exact procedure with the enumeration oracle on one environment."""
    stream = derive_stream(master, index)
    box = Box.cube(d, radius)
    env = sample_environment(box, dist, stream)
    s1, t1, s2, t2 = _distinct_vertices(stream, box, 4)
    cache = FieldCache(env)
    out = {}
    try:
        truth = oracle_pair_disjoint(env, s1, t1, s2, t2, cap)
        got = paired_disjoint(env, s1, t1, s2, t2, budget, cache)
        out["paired"] = (got.value, truth.value)
    except OracleOverflow:
        out["paired"] = None
    dag = geodesic_dag(env, s1, t1, cache)
    try:
        out["menger"] = (internally_disjoint_pair(dag).value, oracle_internally_disjoint(dag, cap).value)
    except OracleOverflow:
        out["menger"] = None
    n = 1 + stream.randbelow(2 * radius - 1)
    env2x = double_weights(env)
    c2 = FieldCache(env2x)
    try:
        truth = oracle_dag_pair(hyperplane_dag(env2x, (0,) * d, n, c2), hyperplane_dag(env2x, unit(d, 1), n, c2), cap)
        out["hyperplane"] = (source_disjoint_hyperplane_pair(env2x, 0, 1, n, c2).value, truth.value)
    except OracleOverflow:
        out["hyperplane"] = None
    return out


def run_oracle_diff(dist: WeightDist, radius: int, samples: int, master: int, d: int = 2,
                    cap: int = 20000, budget: Budget = Budget()) -> dict[str, OracleTally]:
    tallies = {k: OracleTally() for k in ("paired", "menger", "hyperplane")}
    for s in range(samples):
        res = oracle_diff_sample(dist, radius, master, s, d, cap, budget)
        for key, pair in res.items():
            t = tallies[key]
            if pair is None:
                t.skipped += 1
                continue
            got, truth = pair
            t.compared += 1
            if got is None:
                t.undecided += 1
            elif got == truth:
                t.agree += 1
            else:
                t.contradictions += 1
    return tallies


def spread_sample(n: int, dist: WeightDist, master: int, index: int, d: int = 2,
                  factor: int = 4) -> int | None:
    """Diameter of the union of hyperplane geodesics from the origin to ``H_n``.

    The box starts at radius ``2 n`` and grows to ``(factor + 1) n`` (weights
    already drawn are kept) so any union wider than ``factor n`` is visible;
    ``None`` if the union still reaches the boundary.
    """
    stream = derive_stream(master, index)
    env = None
    for radius in (2 * n, (factor + 1) * n):
        box = Box.cube(d, radius)
        env = sample_environment(box, dist, stream) if env is None else extend_environment(env, box, dist, stream)
        dag = hyperplane_dag(double_weights(env), (0,) * d, n)
        if not dag_touches_boundary(dag):
            return dag_diameter(dag)
    return None


def spread_tail(n: int, dist: WeightDist, samples: int, master: int, d: int = 2,
                factor: int = 4) -> tuple[int, int, int]:
    """``(exceed, decided, boundary)``: how many samples have a geodesic union
    wider than ``factor n``, how many were measured, how many hit the box."""
    exceed = boundary = 0
    for s in range(samples):
        diam = spread_sample(n, dist, master, s, d, factor)
        if diam is None:
            boundary += 1
        elif diam > factor * n:
            exceed += 1
    return exceed, samples - boundary, boundary


def histogram(values) -> dict:
    return {str(k): v for k, v in sorted(Counter(values).items(), key=lambda kv: Fraction(kv[0]))}
