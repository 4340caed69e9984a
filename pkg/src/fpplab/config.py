"""Run configuration: one JSON document fully specifies a run."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

from .disjointness import Budget
from .geodesics import BoxPolicy
from .lattice import WeightDist
from .montecarlo import EventFamily


class ConfigError(ValueError):
    pass


SURGERIES = ("prop24", "claim25", "claim33", "claim34")


def parse_distribution(spec) -> WeightDist:
    """``{"constant": c}``, ``{"uniform": [...]}`` or ``{"atoms": {value: prob}}``."""
    if not isinstance(spec, dict) or len(spec.keys() - {"name", "theorem2"}) != 1:
        raise ConfigError("distribution must have exactly one of constant/uniform/atoms")
    name = spec.get("name", "")
    theorem2 = bool(spec.get("theorem2", False))
    try:
        if "constant" in spec:
            return WeightDist((spec["constant"],), (1,), name, theorem2)
        if "uniform" in spec:
            vals = [Fraction(str(v)) for v in spec["uniform"]]
            return WeightDist(tuple(vals), tuple(Fraction(1, len(vals)) for _ in vals), name, theorem2)
        if "atoms" in spec:
            items = [(Fraction(str(k)), Fraction(str(v))) for k, v in spec["atoms"].items()]
            return WeightDist(tuple(a for a, _ in items), tuple(p for _, p in items), name, theorem2)
    except (ValueError, ZeroDivisionError, TypeError) as exc:
        raise ConfigError(f"bad distribution: {exc}") from None
    raise ConfigError("distribution must have exactly one of constant/uniform/atoms")


@dataclass(frozen=True)
class RunConfig:
    distribution: dict
    d: int = 2
    event: dict = field(default_factory=lambda: {"kind": "thm1_item1"})
    n_list: tuple = (2, 4)
    samples: int = 100
    seed: int = 1
    budget: dict = field(default_factory=lambda: {"max_nodes": 10**6, "max_geodesics": 10**5})
    box_policy: dict = field(default_factory=lambda: {"kappa": 1, "kappa_max": 4})
    c2: int = 4
    z: float = 1.96
    record_timing: bool = False
    surgery: str = "prop24"
    K_list: tuple = (0,)
    horizon: int = 8
    box_radius: int | None = None
    M: str = "1"
    direction: tuple = (1, 0)
    ladder: tuple = (2, 4, 8)
    eps: float = 0.25
    N: int = 16
    oracle: dict = field(default_factory=lambda: {"radius": 3, "cap": 20000})
    output_stem: str | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "distribution" not in doc:
            raise ConfigError("config needs a distribution")
        doc = dict(doc)
        for key in ("n_list", "K_list", "direction", "ladder"):
            if key in doc:
                if not isinstance(doc[key], list):
                    raise ConfigError(f"{key} must be a list")
                doc[key] = tuple(doc[key])
        if "M" in doc:
            doc["M"] = str(doc["M"])
        try:
            cfg = cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(doc)

    def validate(self):
        def positive_int(name, v, minimum=1):
            if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
                raise ConfigError(f"{name} must be an integer >= {minimum}")

        positive_int("d", self.d, 2)
        positive_int("samples", self.samples)
        positive_int("c2", self.c2)
        positive_int("horizon", self.horizon)
        positive_int("N", self.N)
        if not isinstance(self.seed, int) or not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if not self.n_list or any(not isinstance(n, int) or n < 1 for n in self.n_list):
            raise ConfigError("n_list must hold positive integers")
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise ConfigError("n_list must be increasing")
        if self.surgery not in SURGERIES:
            raise ConfigError(f"surgery must be one of {SURGERIES}")
        if not self.K_list or any(not isinstance(k, int) for k in self.K_list):
            raise ConfigError("K_list must hold integers")
        if len(self.direction) != self.d or not any(self.direction):
            raise ConfigError("direction must be a non-zero vector of length d")
        if self.box_radius is not None:
            positive_int("box_radius", self.box_radius)
        if not 0 < self.eps <= 1:
            raise ConfigError("eps must lie in (0, 1]")
        if not self.z > 0:
            raise ConfigError("z must be positive")
        try:
            if Fraction(self.M) < 0:
                raise ConfigError("M must be non-negative")
        except (ValueError, ZeroDivisionError):
            raise ConfigError("M must be a rational number") from None
        self.dist()
        self.family()
        self.make_budget()
        self.policy()

    # typed views -------------------------------------------------------------

    def dist(self) -> WeightDist:
        return parse_distribution(self.distribution)

    def family(self) -> EventFamily:
        ev = dict(self.event)
        ev.setdefault("c2", self.c2)
        try:
            return EventFamily(**ev)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad event: {exc}") from None

    def make_budget(self) -> Budget:
        try:
            return Budget(**self.budget)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad budget: {exc}") from None

    def policy(self) -> BoxPolicy:
        try:
            return BoxPolicy(**self.box_policy)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad box policy: {exc}") from None

    def to_json(self) -> dict:
        doc = asdict(self)
        for key in ("n_list", "K_list", "direction", "ladder"):
            doc[key] = list(doc[key])
        return doc

    @property
    def fingerprint(self) -> str:
        canon = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def with_seed(self, seed: int) -> "RunConfig":
        doc = self.to_json()
        doc["seed"] = seed
        return RunConfig.from_dict(doc)
