"""INI experiment configuration with sections [model], [distribution], [experiment]."""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..combing import DirectionSpec
from ..environment import WeightDistribution
from ..errors import ConfigError, FormatError
from ..groups import DEFAULT_RELAXATIONS, GroupModel, build_model

KINDS = ("velocity", "b_velocity", "coarse_grain", "frequency", "direction",
         "coalescence", "variance", "counterexample", "concentration", "clt")

_CORE_KEYS = {"kind", "seed", "directions", "n_grid", "b_grid", "replications",
              "workers", "budget_relaxations", "output"}


def _ints(text: str, what: str) -> list[int]:
    text = text.strip()
    if not text:
        return []
    try:
        if ".." in text and "," not in text:
            # "10..60:10" is a shorthand for 10,20,...,60
            span, _, step = text.partition(":")
            lo, hi = span.split("..")
            return list(range(int(lo), int(hi) + 1, int(step or 1)))
        return [int(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"[experiment] {what}: expected integers, got {text!r}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    model: dict
    distribution: dict
    seed: int = 0
    directions: tuple[str, ...] = ()
    n_grid: tuple[int, ...] = ()
    b_grid: tuple[int, ...] = ()
    replications: int = 100
    workers: int = 1
    budget_relaxations: int = DEFAULT_RELAXATIONS
    output: str | None = None
    params: dict = field(default_factory=dict)
    text: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"[experiment] kind: unknown experiment {self.kind!r}")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ConfigError("[experiment] n_grid must be strictly increasing")
        if any(n < 0 for n in self.n_grid):
            raise ConfigError("[experiment] n_grid entries must be nonnegative")
        if self.replications < 1:
            raise ConfigError("[experiment] replications must be >= 1")
        if self.kind == "variance" and self.replications < 2:
            raise ConfigError("[experiment] variance estimates need replications >= 2")
        if self.workers < 1:
            raise ConfigError("[experiment] workers must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("[experiment] seed must be a 64-bit unsigned integer")

    @property
    def config_hash(self) -> str:
        # resolved settings, so command-line overrides change the hash
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def build_model(self) -> GroupModel:
        return build_model(dict(self.model))

    def build_distribution(self) -> WeightDistribution:
        return WeightDistribution.from_config(self.distribution)

    def build_directions(self, model: GroupModel) -> list[DirectionSpec]:
        return [DirectionSpec.parse(d, model) for d in self.directions]

    def get(self, key: str, default=None, cast=str):
        if key not in self.params:
            return default
        raw = self.params[key]
        try:
            if cast is bool:
                return str(raw).strip().lower() in ("1", "true", "yes", "on")
            return cast(raw)
        except ValueError:
            raise ConfigError(f"[experiment] {key}: cannot read {raw!r}") from None

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "model": self.model, "distribution": self.distribution,
            "seed": self.seed, "directions": list(self.directions),
            "n_grid": list(self.n_grid), "b_grid": list(self.b_grid),
            "replications": self.replications,
            "budget_relaxations": self.budget_relaxations, "params": self.params,
        }


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        if line is None and getattr(exc, "errors", None):
            line = exc.errors[0][0]
        raise FormatError(f"{source}: {exc.message if hasattr(exc, 'message') else exc}",
                          line) from None
    for sec in ("model", "distribution"):
        if not parser.has_section(sec):
            raise ConfigError(f"{source}: missing section [{sec}]")
    model = dict(parser["model"])
    dist = dict(parser["distribution"])
    exp = dict(parser["experiment"]) if parser.has_section("experiment") else {"kind": "velocity"}
    try:
        seed = int(exp.get("seed", "0"))
        reps = int(exp.get("replications", "100"))
        workers = int(exp.get("workers", "1"))
        budget = int(float(exp.get("budget_relaxations", str(DEFAULT_RELAXATIONS))))
    except ValueError as exc:
        raise ConfigError(f"{source}: [experiment] {exc}") from None
    directions = tuple(d.strip() for d in exp.get("directions", "").split(",") if d.strip())
    params = {k: v for k, v in exp.items() if k not in _CORE_KEYS}
    cfg = ExperimentConfig(
        kind=exp.get("kind", "velocity").strip(), model=model, distribution=dist,
        seed=seed, directions=directions,
        n_grid=tuple(_ints(exp.get("n_grid", ""), "n_grid")),
        b_grid=tuple(_ints(exp.get("b_grid", ""), "b_grid")),
        replications=reps, workers=workers, budget_relaxations=budget,
        output=exp.get("output"), params=params, text=text,
    )
    # fail early on bad model or distribution descriptors
    model_obj = cfg.build_model()
    cfg.build_distribution()
    cfg.build_directions(model_obj)
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))
