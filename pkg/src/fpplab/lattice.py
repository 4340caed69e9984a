"""Finite boxes of Z^d, i.i.d. edge-weight environments and their transforms.

All weights are stored as non-negative integers at a scale ``Q``: a stored
weight ``w`` stands for the physical passage time ``w / Q``.  Keeping every
time an exact integer is what makes geodesic ties decidable.

Vertices are integer tuples.  A box numbers its vertices in lexicographic
order of coordinates, so comparing linear indices compares vertices
lexicographically.  Axis ``0`` is the direction of ``e_1``, axis ``1`` that
of ``e_2``.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .rng import Xoshiro256pp

Vertex = tuple[int, ...]

# Bond percolation thresholds of Z^d (d=2 exact, others numerical).
P_C = {2: 0.5, 3: 0.2488126, 4: 0.1601314, 5: 0.1181718, 6: 0.0942019}


def unit(d: int, axis: int, length: int = 1) -> Vertex:
    v = [0] * d
    v[axis] = length
    return tuple(v)


def add(u: Sequence[int], v: Sequence[int]) -> Vertex:
    return tuple(a + b for a, b in zip(u, v))


# ---------------------------------------------------------------------------
# Boxes and edges


@dataclass(frozen=True)
class Box:
    """Closed integer box ``[lo_0, hi_0] x ... x [lo_{d-1}, hi_{d-1}]``."""

    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def __post_init__(self):
        lo, hi = tuple(int(x) for x in self.lo), tuple(int(x) for x in self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(lo) != len(hi) or len(lo) < 2:
            raise ValueError("box needs matching bounds in dimension >= 2")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"empty box: lo={lo} hi={hi}")
        if math.prod(b - a + 1 for a, b in zip(lo, hi)) >= 1 << 63:
            raise ValueError("box too large")

    @classmethod
    def cube(cls, d: int, radius: int) -> "Box":
        return cls((-radius,) * d, (radius,) * d)

    @classmethod
    def around(cls, points: Iterable[Sequence[int]], margin: int) -> "Box":
        """Bounding box of ``points`` grown by ``margin`` on every side."""
        pts = np.asarray(list(points), dtype=np.int64)
        return cls(tuple(pts.min(axis=0) - margin), tuple(pts.max(axis=0) + margin))

    @property
    def d(self) -> int:
        return len(self.lo)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(b - a + 1 for a, b in zip(self.lo, self.hi))

    @property
    def n_vertices(self) -> int:
        return math.prod(self.shape)

    @property
    def topology(self) -> "Topology":
        return _topology(self.lo, self.hi)

    def contains(self, v: Sequence[int]) -> bool:
        return len(v) == self.d and all(a <= x <= b for a, x, b in zip(self.lo, v, self.hi))

    def contains_box(self, other: "Box") -> bool:
        return all(a <= c for a, c in zip(self.lo, other.lo)) and all(
            d >= b for b, d in zip(other.hi, self.hi)
        )

    def index(self, v: Sequence[int]) -> int:
        if not self.contains(v):
            raise IndexError(f"vertex {tuple(v)} outside box {self}")
        idx = 0
        for a, x, s in zip(self.lo, v, self.shape):
            idx = idx * s + (x - a)
        return idx

    def vertex(self, i: int) -> Vertex:
        if not 0 <= i < self.n_vertices:
            raise IndexError(i)
        out = []
        for a, s in zip(reversed(self.lo), reversed(self.shape)):
            i, r = divmod(i, s)
            out.append(a + r)
        return tuple(reversed(out))

    def vertices(self) -> Iterable[Vertex]:
        return (self.vertex(i) for i in range(self.n_vertices))

    def edge_count(self) -> int:
        shape = self.shape
        return sum(
            math.prod(s - (j == k) for j, s in enumerate(shape)) for k in range(self.d)
        )

    def grow(self, margin: int) -> "Box":
        return Box(tuple(a - margin for a in self.lo), tuple(b + margin for b in self.hi))


class Topology:
    """Index arrays shared by every environment on one box shape."""

    def __init__(self, lo: tuple[int, ...], hi: tuple[int, ...]):
        self.lo = np.array(lo, dtype=np.int64)
        self.hi = np.array(hi, dtype=np.int64)
        shape = tuple(int(b - a + 1) for a, b in zip(lo, hi))
        self.shape = shape
        self.d = len(shape)
        n = math.prod(shape)
        self.n = n
        strides = [1] * self.d
        for k in range(self.d - 2, -1, -1):
            strides[k] = strides[k + 1] * shape[k + 1]
        self.strides = np.array(strides, dtype=np.int64)
        grid = np.indices(shape, dtype=np.int64).reshape(self.d, n).T
        self.coords = grid + self.lo
        has_edge = grid < (np.array(shape) - 1)
        rows, axes = np.nonzero(has_edge)
        self.eu = rows.astype(np.int64)
        self.ev = self.eu + self.strides[axes]
        self.eaxis = axes.astype(np.int64)
        self.m = len(self.eu)
        self.edge_id = np.full((n, self.d), -1, dtype=np.int64)
        self.edge_id[self.eu, self.eaxis] = np.arange(self.m)
        self.on_boundary = np.any((grid == 0) | (grid == np.array(shape) - 1), axis=1)

    @cached_property
    def neighbors(self) -> list[list[tuple[int, int]]]:
        """``neighbors[v]`` is a list of ``(w, edge_id)`` in increasing ``w``."""
        nb: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        for e, (u, v) in enumerate(zip(self.eu.tolist(), self.ev.tolist())):
            nb[u].append((v, e))
            nb[v].append((u, e))
        for lst in nb:
            lst.sort()
        return nb

    @cached_property
    def coord_list(self) -> list[Vertex]:
        return [tuple(c) for c in self.coords.tolist()]


@lru_cache(maxsize=64)
def _topology(lo: tuple[int, ...], hi: tuple[int, ...]) -> Topology:
    return Topology(lo, hi)


@dataclass(frozen=True, order=True)
class EdgeRef:
    """Canonical undirected edge ``{base, base + e_axis}``."""

    base: Vertex
    axis: int

    def endpoints(self) -> tuple[Vertex, Vertex]:
        return self.base, add(self.base, unit(len(self.base), self.axis))

    def id_in(self, box: Box) -> int:
        top = box.topology
        if not (0 <= self.axis < box.d):
            raise IndexError(f"bad axis {self.axis}")
        eid = int(top.edge_id[box.index(self.base), self.axis])
        if eid < 0:
            raise IndexError(f"edge {self} leaves box {box}")
        return eid

    @classmethod
    def between(cls, u: Sequence[int], v: Sequence[int]) -> "EdgeRef":
        diff = [b - a for a, b in zip(u, v)]
        nonzero = [k for k, x in enumerate(diff) if x]
        if len(nonzero) != 1 or abs(diff[nonzero[0]]) != 1:
            raise ValueError(f"{tuple(u)} and {tuple(v)} are not neighbours")
        k = nonzero[0]
        return cls(tuple(u) if diff[k] == 1 else tuple(v), k)

    @classmethod
    def from_id(cls, box: Box, eid: int) -> "EdgeRef":
        top = box.topology
        return cls(top.coord_list[int(top.eu[eid])], int(top.eaxis[eid]))


def enumerate_sphere(box: Box, n: int) -> list[Vertex]:
    """Vertices of the sup-norm sphere of radius ``n`` about 0, lexicographic."""
    if n < 0:
        raise ValueError("radius must be non-negative")
    if not (box.contains((-n,) * box.d) and box.contains((n,) * box.d)):
        raise IndexError(f"sphere of radius {n} not contained in {box}")
    top = box.topology
    norm = np.abs(top.coords).max(axis=1)
    return [top.coord_list[i] for i in np.flatnonzero(norm == n)]


def sphere_adjacent_pairs(box: Box, n: int) -> list[tuple[Vertex, Vertex]]:
    """Adjacent pairs ``(y, y')`` of the sphere, ``y < y'``, in lexicographic order."""
    sphere = enumerate_sphere(box, n)
    members = set(sphere)
    pairs = []
    for y in sphere:
        for k in range(box.d):
            z = add(y, unit(box.d, k))
            if z in members:
                pairs.append((y, z))
    pairs.sort()
    return pairs


def diameter(vertices: Iterable[Sequence[int]]) -> int:
    """Sup-norm diameter of a finite vertex set."""
    pts = np.asarray(list(vertices), dtype=np.int64)
    if pts.size == 0:
        raise ValueError("diameter of an empty set")
    return int((pts.max(axis=0) - pts.min(axis=0)).max())


# ---------------------------------------------------------------------------
# Weight distributions


def _as_fraction(x) -> Fraction:
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


@dataclass(frozen=True)
class WeightDist:
    """Finitely supported law of the passage time of one edge.

    ``atoms`` are physical values (rationals, increasing); ``probs`` their
    exact probabilities.  With ``theorem2=True`` the support must be
    exactly ``{0, 1, ..., S}``.
    """

    atoms: tuple[Fraction, ...]
    probs: tuple[Fraction, ...]
    name: str = ""
    theorem2: bool = False

    def __post_init__(self):
        atoms = tuple(_as_fraction(a) for a in self.atoms)
        probs = tuple(_as_fraction(p) for p in self.probs)
        if len(atoms) != len(probs) or not atoms:
            raise ValueError("atoms and probabilities must be non-empty and aligned")
        order = sorted(range(len(atoms)), key=atoms.__getitem__)
        atoms = tuple(atoms[i] for i in order)
        probs = tuple(probs[i] for i in order)
        if len(set(atoms)) != len(atoms):
            raise ValueError("repeated atom")
        if any(a < 0 for a in atoms):
            raise ValueError("negative atom")
        if any(p <= 0 for p in probs):
            raise ValueError("atom probabilities must be positive")
        if sum(probs) != 1:
            raise ValueError(f"probabilities sum to {sum(probs)}, not 1")
        if self.theorem2 and atoms != tuple(Fraction(k) for k in range(len(atoms))):
            raise ValueError("integer-support regime needs support exactly {0, ..., S}")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)
        if not self.name:
            body = ",".join(f"{a}:{p}" for a, p in zip(atoms, probs))
            object.__setattr__(self, "name", "{" + body + "}")

    @classmethod
    def from_mapping(cls, mapping: Mapping, name: str = "", theorem2: bool = False) -> "WeightDist":
        items = list(mapping.items())
        return cls(tuple(k for k, _ in items), tuple(v for _, v in items), name, theorem2)

    @classmethod
    def constant(cls, value=1) -> "WeightDist":
        return cls((value,), (1,))

    @classmethod
    def uniform(cls, values: Iterable) -> "WeightDist":
        values = list(values)
        return cls(tuple(values), tuple(Fraction(1, len(values)) for _ in values))

    @cached_property
    def scale(self) -> int:
        return math.lcm(*(a.denominator for a in self.atoms))

    @cached_property
    def scaled_atoms(self) -> tuple[int, ...]:
        return tuple(int(a * self.scale) for a in self.atoms)

    @cached_property
    def thresholds(self) -> list[int]:
        cum, out = Fraction(0), []
        for p in self.probs:
            cum += p
            out.append(math.floor(cum * (1 << 53)))
        return out

    @property
    def is_deterministic(self) -> bool:
        return len(self.atoms) == 1

    @property
    def p_zero(self) -> Fraction:
        return self.probs[0] if self.atoms[0] == 0 else Fraction(0)

    @property
    def max_atom(self) -> Fraction:
        return self.atoms[-1]

    def prob_at_most(self, m) -> Fraction:
        m = _as_fraction(m)
        return sum((p for a, p in zip(self.atoms, self.probs) if a <= m), Fraction(0))

    def subcritical_zeros(self, d: int) -> bool:
        """Whether P[tau = 0] is below the bond percolation threshold."""
        pc = P_C.get(d, 1.0 / (2 * d - 1))
        return float(self.p_zero) < pc

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "atoms": [str(a) for a in self.atoms],
            "probs": [str(p) for p in self.probs],
            "theorem2": self.theorem2,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "WeightDist":
        if "atoms" in obj and isinstance(obj["atoms"], Mapping):
            return cls.from_mapping(obj["atoms"], obj.get("name", ""), obj.get("theorem2", False))
        return cls(tuple(obj["atoms"]), tuple(obj["probs"]), obj.get("name", ""),
                   obj.get("theorem2", False))


# ---------------------------------------------------------------------------
# Environments


@dataclass(frozen=True)
class SurgeryStep:
    edge: int
    old: int
    new: int


@dataclass(frozen=True, eq=False)
class Environment:
    """Scaled integer weight for every canonical edge of ``box``."""

    box: Box
    weights: np.ndarray
    scale: int = 1
    provenance: Mapping = field(default_factory=dict)
    surgery_log: tuple[SurgeryStep, ...] = ()

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.int64)
        if w.shape != (self.box.topology.m,):
            raise ValueError(f"expected {self.box.topology.m} weights, got {w.shape}")
        if (w < 0).any():
            raise ValueError("negative weight")
        if self.scale < 1:
            raise ValueError("scale must be >= 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __eq__(self, other):
        if not isinstance(other, Environment):
            return NotImplemented
        return (
            self.box == other.box
            and self.scale == other.scale
            and np.array_equal(self.weights, other.weights)
        )

    __hash__ = None

    @cached_property
    def wlist(self) -> list[int]:
        return self.weights.tolist()

    @cached_property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(repr((self.box.lo, self.box.hi, self.scale)).encode())
        h.update(self.weights.astype("<i8").tobytes())
        return h.hexdigest()[:16]

    @property
    def max_weight(self) -> int:
        return int(self.weights.max()) if len(self.weights) else 0

    def edge_id(self, e: EdgeRef | int) -> int:
        if isinstance(e, EdgeRef):
            return e.id_in(self.box)
        if not 0 <= e < len(self.weights):
            raise IndexError(e)
        return int(e)

    def weight(self, u: Sequence[int], v: Sequence[int] | None = None) -> int:
        """Scaled weight of an edge given as an ``EdgeRef`` or two endpoints."""
        e = u if v is None else EdgeRef.between(u, v)
        return int(self.weights[self.edge_id(e)])

    def physical(self, scaled: int) -> Fraction:
        return Fraction(scaled, self.scale)

    def path_time(self, path: Sequence[Sequence[int]]) -> int:
        return sum(self.weight(a, b) for a, b in zip(path, path[1:]))

    def replace(self, weights, scale=None, log=None, **prov) -> "Environment":
        provenance = dict(self.provenance)
        provenance.update(prov)
        return Environment(self.box, weights, self.scale if scale is None else scale,
                           provenance, self.surgery_log if log is None else log)

    def unmodified(self) -> "Environment":
        """Environment before any logged surgery."""
        w = self.weights.copy()
        for step in reversed(self.surgery_log):
            w[step.edge] = step.old
        return self.replace(w, log=())

    def replay(self) -> np.ndarray:
        """Reapply the surgery log to :meth:`unmodified` weights."""
        w = self.unmodified().weights.copy()
        for step in self.surgery_log:
            w[step.edge] = step.new
        return w


def sample_environment(box: Box, dist: WeightDist, stream: Xoshiro256pp, **provenance) -> Environment:
    """One i.i.d. draw per canonical edge, in lexicographic (vertex, axis) order."""
    idx = stream.draw_indices(dist.thresholds, box.topology.m)
    table = np.array(dist.scaled_atoms, dtype=np.int64)
    weights = table[np.array(idx, dtype=np.int64)] if idx else np.zeros(0, np.int64)
    prov = {"distribution": dist.name}
    prov.update(provenance)
    return Environment(box, weights, dist.scale, prov)


def constant_environment(box: Box, value: int = 1, scale: int = 1) -> Environment:
    return Environment(box, np.full(box.topology.m, value, dtype=np.int64), scale,
                       {"distribution": f"constant {Fraction(value, scale)}"})


def map_edges(src: Box, dst: Box) -> np.ndarray:
    """Edge ids in ``dst`` of every canonical edge of ``src`` (``src`` inside ``dst``)."""
    if not dst.contains_box(src):
        raise ValueError("source box must lie inside destination box")
    s, t = src.topology, dst.topology
    base = s.coords[s.eu]
    lin = ((base - t.lo) * t.strides).sum(axis=1)
    return t.edge_id[lin, s.eaxis]


def restrict_environment(env: Environment, box: Box) -> Environment:
    ids = map_edges(box, env.box)
    return Environment(box, env.weights[ids], env.scale, dict(env.provenance))


def extend_environment(env: Environment, box: Box, dist: WeightDist,
                       stream: Xoshiro256pp) -> Environment:
    """Grow ``env`` to ``box``: old edges keep their weights, new edges are
    drawn from ``stream`` in the new box's canonical order."""
    if env.surgery_log:
        raise ValueError("cannot extend a modified environment")
    if env.scale != dist.scale:
        raise ValueError("distribution scale does not match environment")
    ids = map_edges(env.box, box)
    m = box.topology.m
    fresh = np.ones(m, dtype=bool)
    fresh[ids] = False
    n_new = int(fresh.sum())
    idx = stream.draw_indices(dist.thresholds, n_new)
    weights = np.empty(m, dtype=np.int64)
    weights[ids] = env.weights
    weights[fresh] = np.array(dist.scaled_atoms, dtype=np.int64)[np.array(idx, dtype=np.int64)]
    return Environment(box, weights, env.scale, dict(env.provenance))


def set_edge(env: Environment, e: EdgeRef | int, value: int) -> Environment:
    """Copy of ``env`` with one edge set to ``value`` (scaled)."""
    value = int(value)
    if value < 0:
        raise ValueError("edge weights must be non-negative")
    eid = env.edge_id(e)
    w = env.weights.copy()
    old = int(w[eid])
    w[eid] = value
    return env.replace(w, log=env.surgery_log + (SurgeryStep(eid, old, value),))


def reflect_environment(env: Environment, n: int, axis: int = 0) -> Environment:
    """Pull weights back under ``x_axis -> n - x_axis``."""
    box = env.box
    if box.lo[axis] + box.hi[axis] != n:
        raise IndexError(f"box not symmetric under x_{axis} -> {n} - x_{axis}")
    top = box.topology
    base = top.coords[top.eu].copy()
    base[:, axis] = n - base[:, axis]
    along = top.eaxis == axis
    base[along, axis] -= 1
    lin = ((base - top.lo) * top.strides).sum(axis=1)
    pre = top.edge_id[lin, top.eaxis]
    return env.replace(env.weights[pre], log=(), reflected=(n, axis))


def double_weights(env: Environment) -> Environment:
    """Multiply every weight and the scale by 2; physical times unchanged."""
    if env.max_weight >= 1 << 62 or env.scale >= 1 << 62:
        raise OverflowError("doubling overflows 64-bit scaled weights")
    log = tuple(SurgeryStep(s.edge, 2 * s.old, 2 * s.new) for s in env.surgery_log)
    return env.replace(env.weights * 2, scale=env.scale * 2, log=log)


# ---------------------------------------------------------------------------
# Binary container

MAGIC = b"FPPE"
FORMAT_VERSION = 1


def save_environment(env: Environment, path: str | Path) -> Path:
    """Write ``path`` (binary weights) and ``path.json`` (provenance)."""
    path = Path(path)
    if env.max_weight >= 1 << 32:
        raise OverflowError("weights do not fit the u32 container")
    box = env.box
    header = MAGIC + struct.pack("<HH", FORMAT_VERSION, box.d)
    for a, b in zip(box.lo, box.hi):
        header += struct.pack("<ii", a, b)
    header += struct.pack("<QQ", env.scale, len(env.weights))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(env.weights.astype("<u4").tobytes())
    sidecar = {
        "fingerprint": env.fingerprint,
        "provenance": {k: _jsonable(v) for k, v in env.provenance.items()},
        "surgery_log": [[s.edge, s.old, s.new] for s in env.surgery_log],
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return path


def load_environment(path: str | Path) -> Environment:
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != MAGIC:
        raise ValueError("not an FPPE container")
    version, d = struct.unpack_from("<HH", data, 4)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported container version {version}")
    off = 8
    lo, hi = [], []
    for _ in range(d):
        a, b = struct.unpack_from("<ii", data, off)
        lo.append(a)
        hi.append(b)
        off += 8
    scale, m = struct.unpack_from("<QQ", data, off)
    off += 16
    weights = np.frombuffer(data, dtype="<u4", count=m, offset=off).astype(np.int64)
    prov, log = {}, ()
    side = Path(str(path) + ".json")
    if side.exists():
        meta = json.loads(side.read_text())
        prov = meta.get("provenance", {})
        log = tuple(SurgeryStep(*s) for s in meta.get("surgery_log", []))
    return Environment(Box(tuple(lo), tuple(hi)), weights, int(scale), prov, log)


def _jsonable(v):
    if isinstance(v, (Fraction,)):
        return str(v)
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    return v
