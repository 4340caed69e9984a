"""Threshold percolation of the environment and regularized passage times.

An edge is *open* at threshold ``M`` when its physical weight is at most
``M``.  The largest open cluster in the box stands in for the infinite
cluster.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from .geodesics import FieldCache
from .lattice import Box, Environment, Vertex, WeightDist, _as_fraction, sample_environment
from .rng import derive_stream


@dataclass(frozen=True, eq=False)
class ClusterLabeling:
    M: Fraction
    labels: np.ndarray          # cluster id per vertex, ids ordered by smallest member
    sizes: np.ndarray
    largest: int
    open_edges: np.ndarray      # bool per edge
    box: Box

    @property
    def n_clusters(self) -> int:
        return len(self.sizes)

    def label(self, v: Sequence[int]) -> int:
        return int(self.labels[self.box.index(v)])

    def in_largest(self, v: Sequence[int]) -> bool:
        return self.label(v) == self.largest

    @cached_property
    def largest_members(self) -> np.ndarray:
        return np.flatnonzero(self.labels == self.largest)

    @property
    def largest_fraction(self) -> float:
        return float(self.sizes[self.largest]) / len(self.labels)

    @cached_property
    def touches_all_faces(self) -> bool:
        """Whether the largest cluster meets every face of the box."""
        c = self.box.topology.coords[self.largest_members]
        return all(
            (c[:, k] == lo).any() and (c[:, k] == hi).any()
            for k, (lo, hi) in enumerate(zip(self.box.lo, self.box.hi))
        )


def _find(parent: list[int], x: int) -> int:
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        parent[x], x = root, parent[x]
    return root


def clusters(env: Environment, M) -> ClusterLabeling:
    """Union-find labelling of clusters of edges with weight at most ``M``."""
    M = _as_fraction(M)
    if M < 0:
        raise ValueError("threshold must be non-negative")
    top = env.box.topology
    open_edges = env.weights * M.denominator <= M.numerator * env.scale
    parent = list(range(top.n))
    for u, v in zip(top.eu[open_edges].tolist(), top.ev[open_edges].tolist()):
        ru, rv = _find(parent, u), _find(parent, v)
        if ru != rv:
            if ru < rv:
                parent[rv] = ru
            else:
                parent[ru] = rv
    roots = np.array([_find(parent, x) for x in range(top.n)], dtype=np.int64)
    _, labels = np.unique(roots, return_inverse=True)
    sizes = np.bincount(labels)
    largest = int(np.argmax(sizes))
    return ClusterLabeling(M, labels.astype(np.int64), sizes, largest, open_edges, env.box)


def chemical_distance(lab: ClusterLabeling, env: Environment, x, y) -> float | int:
    """Hop count between ``x`` and ``y`` using open edges only."""
    box = env.box
    xi, yi = box.index(x), box.index(y)
    if lab.labels[xi] != lab.labels[yi]:
        return math.inf
    if xi == yi:
        return 0
    nbrs = box.topology.neighbors
    is_open = lab.open_edges
    dist = {xi: 0}
    queue = deque([xi])
    while queue:
        u = queue.popleft()
        for v, e in nbrs[u]:
            if is_open[e] and v not in dist:
                dist[v] = dist[u] + 1
                if v == yi:
                    return dist[v]
                queue.append(v)
    return math.inf


def regularized_index(lab: ClusterLabeling, v: Sequence[int]) -> int:
    """Linear index of ``v^M``: the l1-closest vertex of the largest cluster,
    lexicographically smallest among ties."""
    members = lab.largest_members
    if len(members) == 0:
        raise ValueError("empty cluster")
    coords = lab.box.topology.coords
    dist = np.abs(coords[members] - np.asarray(v, dtype=np.int64)).sum(axis=1)
    return int(members[int(np.argmin(dist))])


def regularized_point(lab: ClusterLabeling, v: Sequence[int]) -> Vertex:
    return lab.box.topology.coord_list[regularized_index(lab, v)]


def regularized_map(lab: ClusterLabeling) -> np.ndarray:
    """``v^M`` (as a linear index) for every vertex of the box."""
    members = lab.largest_members
    if len(members) == 0:
        raise ValueError("empty cluster")
    coords = lab.box.topology.coords
    out = np.empty(len(coords), dtype=np.int64)
    pts = coords[members]
    step = max(1, 2_000_000 // max(1, len(members)))
    for start in range(0, len(coords), step):
        block = coords[start:start + step]
        dist = np.abs(block[:, None, :] - pts[None, :, :]).sum(axis=2)
        out[start:start + step] = members[np.argmin(dist, axis=1)]
    return out


def t_regularized(env: Environment, M, x, y, lab: ClusterLabeling | None = None,
                  cache: FieldCache | None = None) -> int:
    """Scaled ``T^M(x, y) = T(x^M, y^M)``."""
    lab = lab or clusters(env, M)
    cache = cache or FieldCache(env)
    xm, ym = regularized_index(lab, x), regularized_index(lab, y)
    return int(cache.point(ym)[xm])


# ---------------------------------------------------------------------------
# Empirical norm and Cesaro fractions


def _scaled_direction(x: Sequence[int], k: int) -> Vertex:
    return tuple(k * c for c in x)


def standard_box(x: Sequence[int], n: int) -> Box:
    """Box around ``0`` and ``n x`` with margin ``max(2, n)``."""
    return Box.around([(0,) * len(x), _scaled_direction(x, n)], max(2, n))


@dataclass(frozen=True)
class MuEstimate:
    direction: Vertex
    M: Fraction
    ladder: tuple[int, ...]
    means: tuple[float, ...]
    half_widths: tuple[float, ...]
    counts: tuple[int, ...]
    mu_hat: float

    @property
    def trend(self) -> str:
        diffs = np.diff(self.means)
        if len(diffs) == 0 or np.all(diffs == 0):
            return "flat"
        if np.all(diffs <= 0):
            return "decreasing"
        if np.all(diffs >= 0):
            return "increasing"
        return "mixed"

    def rows(self):
        return [(n, m, h, c) for n, m, h, c in zip(self.ladder, self.means, self.half_widths, self.counts)]


def _mean_hw(values: Sequence[float], z: float) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    if len(arr) < 2:
        return mean, math.inf
    return mean, float(z * arr.std(ddof=1) / math.sqrt(len(arr)))


def mu_estimate(dist: WeightDist, M, x: Sequence[int], ladder: Sequence[int], samples: int,
                master: int, z: float = 1.96) -> MuEstimate:
    """Sample means of ``T^M(0, n x) / n`` along a ladder of ``n``.

    ``mu_hat`` is the mean at the largest ``n``.
    """
    ladder = tuple(int(n) for n in ladder)
    if not ladder or any(b <= a for a, b in zip(ladder, ladder[1:])) or ladder[0] < 1:
        raise ValueError("ladder must be a strictly increasing list of positive integers")
    if samples < 1:
        raise ValueError("need at least one sample")
    x = tuple(x)
    o = (0,) * len(x)
    means, hws = [], []
    for pos, n in enumerate(ladder):
        box = standard_box(x, n)
        vals = []
        for s in range(samples):
            env = sample_environment(box, dist, derive_stream(master, pos * samples + s))
            t = t_regularized(env, M, o, _scaled_direction(x, n))
            vals.append(t / env.scale / n)
        m, h = _mean_hw(vals, z)
        means.append(m)
        hws.append(h)
    return MuEstimate(x, _as_fraction(M), ladder, tuple(means), tuple(hws),
                      (samples,) * len(ladder), means[-1])


@dataclass(frozen=True)
class CesaroResult:
    fraction: float
    mu_hat: float
    eps: float
    samples: int
    counts: tuple[int, ...]          # per k = 1..N: samples with B >= mu_hat (1 - eps)
    means: tuple[float, ...]         # per k: mean of B^M_{kx}(0, x)
    half_widths: tuple[float, ...]

    def rows(self):
        return [(k + 1, m, h, c) for k, (m, h, c) in enumerate(zip(self.means, self.half_widths, self.counts))]


def cesaro_fraction(dist: WeightDist, M, x: Sequence[int], N: int, eps: float, samples: int,
                    master: int, mu_hat: float | None = None, z: float = 1.96) -> CesaroResult:
    """Fraction of ``k <= N`` whose empirical ``P[B^M_{kx}(0,x) >= mu (1-eps)]``
    reaches ``1 - eps``."""
    if N < 1 or samples < 1:
        raise ValueError("N and samples must be positive")
    x = tuple(x)
    if mu_hat is None:
        mu_hat = mu_estimate(dist, M, x, [N], samples, master, z).mu_hat
    threshold = mu_hat * (1 - eps)
    o = (0,) * len(x)
    box = standard_box(x, N)
    per_k = [[] for _ in range(N)]
    for s in range(samples):
        env = sample_environment(box, dist, derive_stream(master, (1 << 32) + s))
        lab = clusters(env, M)
        cache = FieldCache(env)
        f0 = cache.point(regularized_index(lab, o))
        f1 = cache.point(regularized_index(lab, x))
        for k in range(1, N + 1):
            t = regularized_index(lab, _scaled_direction(x, k))
            per_k[k - 1].append(Fraction(int(f0[t]) - int(f1[t]), env.scale))
    counts, means, hws = [], [], []
    for vals in per_k:
        counts.append(sum(v >= threshold for v in vals))
        m, h = _mean_hw([float(v) for v in vals], z)
        means.append(m)
        hws.append(h)
    good = sum(c >= (1 - eps) * samples for c in counts)
    return CesaroResult(good / N, mu_hat, eps, samples, tuple(counts), tuple(means), tuple(hws))


def write_table(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".10g")
    return v
