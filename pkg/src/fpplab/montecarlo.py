"""Reproducible Monte Carlo estimation of event probabilities.

Each sample owns a random stream derived from ``(master, index)``; workers
return per-sample outcome codes and aggregation only sums counts, so the
result does not depend on the number of workers or their scheduling.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .disjointness import Budget, Outcome, undecided
from .events import (
    An,
    CoexLevel,
    Gn,
    SameSourceHyperplane,
    Thm1Item1,
    Thm1Item2,
    Thm2Item1,
    Thm2Item2,
    detect,
    family_candidates,
    policy_box,
)
from .geodesics import BoxPolicy, FieldCache
from .lattice import Box, WeightDist, extend_environment, sample_environment
from .rng import derive_stream, mix64, splitmix64  # noqa: F401  (re-exported)

CSV_COLUMNS = [
    "event", "n", "samples", "true", "false", "undecided",
    "p_lo", "p_lo_ci_lo", "p_lo_ci_hi", "p_hi", "p_hi_ci_lo", "p_hi_ci_hi",
    "seconds", "seed",
]

TRUE, FALSE, UNDECIDED = 1, 0, 2
_CODE = {Outcome.TRUE: TRUE, Outcome.FALSE: FALSE, Outcome.UNDECIDED: UNDECIDED}


def wilson(k: int, total: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for ``k`` successes out of ``total``."""
    if total <= 0:
        raise ValueError("total must be positive")
    if not 0 <= k <= total:
        raise ValueError("need 0 <= k <= total")
    p = k / total
    z2 = z * z
    denom = 1 + z2 / total
    centre = (p + z2 / (2 * total)) / denom
    half = z * math.sqrt(p * (1 - p) / total + z2 / (4 * total * total)) / denom
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == total else min(1.0, centre + half)
    return lo, hi


# ---------------------------------------------------------------------------
# Event families


@dataclass(frozen=True)
class EventFamily:
    """An event kind plus its fixed parameters; ``n`` is supplied per run."""

    kind: str
    i: int = 0
    j: int = 1
    c2: int = 4
    K: int = 0

    KINDS = ("thm1_item1", "thm1_item2", "thm2_item1", "thm2_item2",
             "a_n", "g_n", "same_source_hyperplane", "coex_level")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.kind == "a_n" and self.i == self.j:
            raise ValueError("a_n needs i != j")

    @property
    def label(self) -> str:
        if self.kind == "a_n":
            return f"a_n({self.i};{self.j})"
        if self.kind == "g_n":
            return f"g_n(c2={self.c2})"
        if self.kind == "coex_level":
            return f"coex_level(K={self.K})"
        return self.kind

    @property
    def is_scan(self) -> bool:
        return self.kind in ("thm1_item2", "thm2_item2")

    def candidates(self, n: int, d: int) -> list:
        if self.is_scan:
            return family_candidates(self.kind, n, d)
        k = self.kind
        if k == "thm1_item1":
            return [Thm1Item1(n)]
        if k == "thm2_item1":
            return [Thm2Item1(n)]
        if k == "a_n":
            return [An(self.i, self.j, n)]
        if k == "g_n":
            return [Gn(n, self.c2)]
        if k == "same_source_hyperplane":
            return [SameSourceHyperplane(n)]
        return [CoexLevel(n, self.K)]

    def box(self, n: int, d: int, kappa: int, policy: BoxPolicy) -> Box:
        return policy_box(self.candidates(n, d)[0] if not self.is_scan else _sphere_spec(self.kind, n, d),
                          d, kappa, policy)

    def to_json(self) -> dict:
        return {"kind": self.kind, "i": self.i, "j": self.j, "c2": self.c2, "K": self.K}


def _sphere_spec(kind, n, d):
    o = (0,) * d
    return Thm2Item2(n, o) if kind == "thm2_item2" else Thm1Item2(n, o, o)


def sample_outcomes(family: EventFamily, n: int, dist: WeightDist, master: int, index: int,
                    budget: Budget, policy: BoxPolicy, d: int = 2) -> tuple[tuple[int, ...], bool]:
    """Outcome code per candidate for one sample, and whether the box was invalid.

    The box grows with the policy while any relevant DAG touches its
    boundary; weights already drawn are kept.
    """
    stream = derive_stream(master, index)
    specs = family.candidates(n, d)
    env = None
    decisions = None
    for kappa in policy.kappas():
        box = family.box(n, d, kappa, policy)
        env = sample_environment(box, dist, stream) if env is None else extend_environment(env, box, dist, stream)
        cache = FieldCache(env)
        decisions = [detect(s, env, budget, cache) for s in specs]
        if not any(dec.touches_boundary for dec in decisions):
            return tuple(_CODE[dec.outcome] for dec in decisions), False
    decisions = [undecided("box-invalid") if dec.touches_boundary else dec for dec in decisions]
    return tuple(_CODE[dec.outcome] for dec in decisions), True


def _chunk_worker(args):
    family, n, dist, master, indices, budget, policy, d = args
    return [sample_outcomes(family, n, dist, master, i, budget, policy, d) for i in indices]


@dataclass(frozen=True)
class EstimateRecord:
    event: str
    n: int
    samples: int
    true: int
    false: int
    undecided: int
    box_invalid: int
    seed: int
    z: float = 1.96
    seconds: float | None = None
    candidate: str | None = None
    fingerprint: str = ""

    def __post_init__(self):
        if self.true + self.false + self.undecided != self.samples:
            raise ValueError("counts do not add up to the sample count")

    @property
    def p_lo(self) -> float:
        return self.true / self.samples

    @property
    def p_hi(self) -> float:
        return (self.true + self.undecided) / self.samples

    @property
    def ci_lo(self) -> tuple[float, float]:
        return wilson(self.true, self.samples, self.z)

    @property
    def ci_hi(self) -> tuple[float, float]:
        return wilson(self.true + self.undecided, self.samples, self.z)

    def row(self, with_time: bool = False) -> list:
        return [
            self.event, self.n, self.samples, self.true, self.false, self.undecided,
            _f(self.p_lo), _f(self.ci_lo[0]), _f(self.ci_lo[1]),
            _f(self.p_hi), _f(self.ci_hi[0]), _f(self.ci_hi[1]),
            _f(self.seconds) if (with_time and self.seconds is not None) else "",
            self.seed,
        ]

    def to_json(self, with_time: bool = False) -> dict:
        doc = dict(zip(CSV_COLUMNS, self.row(with_time)))
        doc["seconds"] = self.seconds if with_time else None
        doc["box_invalid"] = self.box_invalid
        doc["candidate"] = self.candidate
        doc["config_fingerprint"] = self.fingerprint
        return doc


def _f(x: float) -> str:
    return format(float(x), ".10g")


def estimate(family: EventFamily, n: int, dist: WeightDist, samples: int, master: int,
             budget: Budget = Budget(), policy: BoxPolicy = BoxPolicy(), d: int = 2,
             threads: int = 1, z: float = 1.96, fingerprint: str = "",
             chunk: int = 64) -> EstimateRecord:
    """Tally one event family at one ``n`` over ``samples`` environments.

    For sphere families (``exists y ~ y'`` / ``exists u``) counts are kept
    per candidate and the candidate with the most True samples is reported.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    start = time.perf_counter()
    indices = list(range(samples))
    chunks = [indices[k:k + chunk] for k in range(0, samples, chunk)]
    tasks = [(family, n, dist, master, c, budget, policy, d) for c in chunks]
    if threads > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = [r for part in pool.map(_chunk_worker, tasks) for r in part]
    else:
        results = [r for t in tasks for r in _chunk_worker(t)]
    codes = np.array([r[0] for r in results], dtype=np.int64)
    invalid = sum(r[1] for r in results)
    t_counts = (codes == TRUE).sum(axis=0)
    best = int(np.argmax(t_counts))
    col = codes[:, best]
    candidate = None
    if family.is_scan:
        candidate = repr(family.candidates(n, d)[best])
    return EstimateRecord(
        family.label, n, samples, int((col == TRUE).sum()), int((col == FALSE).sum()),
        int((col == UNDECIDED).sum()), int(invalid), master, z,
        time.perf_counter() - start, candidate, fingerprint,
    )


@dataclass
class ScanResult:
    records: list[EstimateRecord]
    slope: float
    slope_se: float
    points: list[tuple[float, float]] = field(default_factory=list)

    def to_json(self, with_time: bool = False) -> dict:
        return {
            "records": [r.to_json(with_time) for r in self.records],
            "log_points": [[_f(a), _f(b)] for a, b in self.points],
            "slope": None if math.isnan(self.slope) else _f(self.slope),
            "slope_se": None if math.isnan(self.slope_se) else _f(self.slope_se),
        }


def log_slope(ns: Sequence[int], ps: Sequence[float]) -> tuple[float, float, list]:
    """Least-squares slope of ``log p`` against ``log n`` and its standard error."""
    pts = [(math.log(n), math.log(p)) for n, p in zip(ns, ps) if p > 0]
    if len(pts) < 2:
        return math.nan, math.nan, pts
    x = np.array([a for a, _ in pts])
    y = np.array([b for _, b in pts])
    xm = x - x.mean()
    sxx = float((xm ** 2).sum())
    slope = float((xm * (y - y.mean())).sum() / sxx)
    if len(pts) < 3:
        return slope, math.nan, pts
    resid = y - (y.mean() + slope * xm)
    se = math.sqrt(float((resid ** 2).sum()) / (len(pts) - 2) / sxx)
    return slope, se, pts


def scan_n(family: EventFamily, ns: Sequence[int], dist: WeightDist, samples: int, master: int,
           budget: Budget = Budget(), policy: BoxPolicy = BoxPolicy(), d: int = 2,
           threads: int = 1, z: float = 1.96, fingerprint: str = "") -> ScanResult:
    ns = list(ns)
    if not ns or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("n-list must be non-empty and increasing")
    records = [estimate(family, n, dist, samples, master, budget, policy, d, threads, z, fingerprint)
               for n in ns]
    slope, se, pts = log_slope(ns, [r.p_lo for r in records])
    return ScanResult(records, slope, se, pts)


# ---------------------------------------------------------------------------
# Output


def records_csv(records: Sequence[EstimateRecord], fingerprint: str, with_time: bool = False) -> str:
    buf = io.StringIO()
    buf.write(f"# config_fingerprint: {fingerprint}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow(r.row(with_time))
    return buf.getvalue()


def read_records_csv(text: str) -> list[dict]:
    """Parse the CSV schema back (comment lines skipped)."""
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    if not rows:
        raise ValueError("no records")
    missing = set(CSV_COLUMNS) - set(rows[0])
    if missing:
        raise ValueError(f"missing columns: {sorted(missing)}")
    return rows


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
