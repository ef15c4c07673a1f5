"""Experiment configuration: a JSON object model with a strict schema.

Unknown keys are rejected everywhere: a typo in a config must fail loudly
before any computation starts, not silently fall back to a default.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..embedding import METHODS, EmbedConfig, normalize_method
from ..errors import ConfigError
from ..ranking import RANKERS

SCENARIOS = (
    "methods_vs_n",
    "repeated_vs_random",
    "landmark_vs_random",
    "dimension_sweep",
    "cross_subject",
    "pooling",
    "single_fit",
)

BUDGET_RULES = ("fixed", "3nlog2n", "3n2log2n")

# per-scenario extra knobs (everything has a default)
SCENARIO_PARAMS: dict[str, dict[str, Any]] = {
    "methods_vs_n": {},
    "repeated_vs_random": {"l_values": [3, 5], "base_m": 2000},
    "landmark_vs_random": {"k_values": [4, 6, 8, 10, 12, 14]},
    "dimension_sweep": {"dims": [1, 2, 3, 4, 5], "train_size": 1500, "test_size": 250},
    "cross_subject": {"n_subjects": 3, "train_size": 1500, "test_size": 250},
    "pooling": {"n_sessions": 5, "trials": 20},
    "single_fit": {"export_embedding": True},
}


def _reject_unknown(obj: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def budget(rule: str, n: int, m: int | None = None) -> int:
    """Triplet budget for n items under the named growth rule."""
    if n < 3:
        raise ValueError(f"budget needs n >= 3, got {n}")
    if rule == "fixed":
        if m is None:
            raise ValueError("fixed budget rule needs m")
        return m
    if rule == "3nlog2n":
        return math.ceil(3 * n * math.log2(n))
    if rule == "3n2log2n":
        return math.ceil(3 * n * n * math.log2(n))
    raise ValueError(f"unknown budget rule {rule!r}, expected one of {BUDGET_RULES}")


@dataclass(frozen=True)
class BudgetSpec:
    rule: str = "3nlog2n"
    m: int | None = None

    def __post_init__(self):
        if self.rule not in BUDGET_RULES:
            raise ConfigError(f"budget rule must be one of {BUDGET_RULES}, got {self.rule!r}")
        if self.rule == "fixed" and (self.m is None or self.m < 1):
            raise ConfigError("fixed budget rule needs a positive m")

    def for_n(self, n: int) -> int:
        return budget(self.rule, n, self.m)

    @classmethod
    def from_dict(cls, obj: dict) -> "BudgetSpec":
        _reject_unknown(obj, {"rule", "m"}, "budget")
        return cls(**obj)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"rule": self.rule}
        if self.m is not None:
            out["m"] = self.m
        return out


@dataclass(frozen=True)
class DataSpec:
    """Data source: synthetic unit-cube points, a vector file, or answer files."""

    kind: str = "unit_cube"
    n: tuple[int, ...] = (100,)
    d: int = 3
    path: str | None = None
    answer_paths: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("unit_cube", "vectors", "answers"):
            raise ConfigError(f"data kind must be unit_cube|vectors|answers, got {self.kind!r}")
        if self.kind == "unit_cube":
            if not self.n or any(v < 3 for v in self.n):
                raise ConfigError("unit_cube data needs n values >= 3")
            if self.d < 1:
                raise ConfigError("unit_cube data needs d >= 1")
        if self.kind == "vectors" and not self.path:
            raise ConfigError("vectors data needs a path")
        if self.kind == "answers" and not self.answer_paths:
            raise ConfigError("answers data needs answer_paths")

    @classmethod
    def from_dict(cls, obj: dict) -> "DataSpec":
        _reject_unknown(obj, {"kind", "n", "d", "path", "answer_paths"}, "data")
        obj = dict(obj)
        if "n" in obj:
            n = obj["n"]
            obj["n"] = tuple(n) if isinstance(n, (list, tuple)) else (n,)
        if "answer_paths" in obj:
            obj["answer_paths"] = tuple(obj["answer_paths"])
        return cls(**obj)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind}
        if self.kind == "unit_cube":
            out["n"] = list(self.n)
            out["d"] = self.d
        elif self.kind == "vectors":
            out["path"] = self.path
        else:
            out["answer_paths"] = list(self.answer_paths)
        return out


_EMBED_KEYS = {
    "d", "max_iters", "learning_rate", "tolerance", "restarts",
    "margin", "alpha", "init_scale",
}


def embed_config_from_dict(obj: dict) -> EmbedConfig:
    _reject_unknown(obj, _EMBED_KEYS, "embed")
    try:
        return EmbedConfig(**obj)
    except ValueError as ex:
        raise ConfigError(str(ex)) from ex


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: str
    data: DataSpec = DataSpec()
    budget: BudgetSpec = BudgetSpec()
    noise_p: tuple[float, ...] = (0.0,)
    methods: tuple[str, ...] = ("SOE",)
    embed: EmbedConfig = EmbedConfig(d=3)
    runs: int = 1
    seed: int = 0
    out: str | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        for p in self.noise_p:
            if not 0.0 <= p < 0.5:
                raise ConfigError(f"noise_p values must be in [0, 0.5), got {p}")
        known = set(METHODS) | set(RANKERS)
        for name in self.methods:
            if _canonical_method(name) not in known:
                raise ConfigError(f"unknown method {name!r}, expected one of {sorted(known)}")
        defaults = SCENARIO_PARAMS[self.scenario]
        _reject_unknown(self.params, set(defaults), f"params for {self.scenario}")
        merged = {**defaults, **self.params}
        object.__setattr__(self, "params", merged)

    @property
    def embedding_methods(self) -> tuple[str, ...]:
        return tuple(m for m in map(_canonical_method, self.methods) if m in METHODS)

    @property
    def ranking_methods(self) -> tuple[str, ...]:
        return tuple(m for m in map(_canonical_method, self.methods) if m in RANKERS)

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentSpec":
        _reject_unknown(
            obj,
            {"scenario", "data", "budget", "noise_p", "methods", "embed",
             "runs", "seed", "out", "params"},
            "experiment spec",
        )
        kwargs: dict[str, Any] = {"scenario": obj.get("scenario")}
        if kwargs["scenario"] is None:
            raise ConfigError("experiment spec needs a scenario")
        if "data" in obj:
            kwargs["data"] = DataSpec.from_dict(obj["data"])
        if "budget" in obj:
            kwargs["budget"] = BudgetSpec.from_dict(obj["budget"])
        if "noise_p" in obj:
            p = obj["noise_p"]
            kwargs["noise_p"] = tuple(p) if isinstance(p, (list, tuple)) else (p,)
        if "methods" in obj:
            kwargs["methods"] = tuple(obj["methods"])
        if "embed" in obj:
            kwargs["embed"] = embed_config_from_dict(obj["embed"])
        for key in ("runs", "seed", "out"):
            if key in obj:
                kwargs[key] = obj[key]
        if "params" in obj:
            if not isinstance(obj["params"], dict):
                raise ConfigError("params must be an object")
            kwargs["params"] = dict(obj["params"])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "data": self.data.to_dict(),
            "budget": self.budget.to_dict(),
            "noise_p": list(self.noise_p),
            "methods": list(self.methods),
            "embed": self.embed.to_dict(),
            "runs": self.runs,
            "seed": self.seed,
            "out": self.out,
            "params": dict(self.params),
        }


def _canonical_method(name: str):
    if name in RANKERS:
        return name
    try:
        return normalize_method(name)
    except ValueError:
        return name


def load_spec(path: str | Path) -> ExperimentSpec:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as ex:
        raise ConfigError(f"config {path} is not valid JSON: {ex}") from ex
    if not isinstance(obj, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return ExperimentSpec.from_dict(obj)
