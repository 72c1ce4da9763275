"""Deterministic i.i.d. edge weights.

A weight is a pure function of ``(seed, canonical edge bytes)``: a keyed
BLAKE2b digest is turned into a uniform variate in (0, 1) and pushed through
the quantile function of the chosen law. Queries from different basepoints,
domains, processes or orders therefore see one and the same environment.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np
from scipy import special

from .errors import ConfigError, DomainError
from .groups import EdgeId, GroupModel, edge_bytes, edge_from

_STD = NormalDist()
_DISCRETE = {"bernoulli", "discrete", "constant", "dirac", "geometric", "poisson", "atom"}


@dataclass(frozen=True)
class WeightDistribution:
    """Atomless law on [0, inf) with closed-form first two moments."""

    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        k, p = self.kind, self.params
        if k in _DISCRETE:
            raise ConfigError(f"distribution {k!r} has atoms; edge weights must be atomless")
        if k == "uniform":
            if len(p) != 2 or not 0 <= p[0] < p[1]:
                raise ConfigError("uniform needs 0 <= a < b")
        elif k == "bounded-away":
            if len(p) != 2 or not 0 < p[0] < p[1]:
                raise ConfigError("bounded-away needs 0 < a < b")
        elif k == "exponential":
            if len(p) != 1 or not p[0] > 0:
                raise ConfigError("exponential needs rate > 0")
        elif k == "truncated-gaussian":
            if len(p) != 2 or not p[1] > 0:
                raise ConfigError("truncated-gaussian needs mean and sd > 0")
        else:
            raise ConfigError(f"unknown distribution kind {k!r}")

    @classmethod
    def uniform(cls, a: float = 0.0, b: float = 1.0):
        return cls("uniform", (float(a), float(b)))

    @classmethod
    def bounded_away(cls, a: float, b: float):
        return cls("bounded-away", (float(a), float(b)))

    @classmethod
    def exponential(cls, rate: float = 1.0):
        return cls("exponential", (float(rate),))

    @classmethod
    def truncated_gaussian(cls, mean: float = 1.0, sd: float = 1.0):
        return cls("truncated-gaussian", (float(mean), float(sd)))

    @classmethod
    def from_config(cls, section: dict) -> "WeightDistribution":
        kind = str(section.get("kind", "uniform")).strip()
        try:
            if kind in ("uniform", "bounded-away"):
                a = float(section.get("a", 0.0 if kind == "uniform" else 1.0))
                b = float(section.get("b", 1.0 if kind == "uniform" else 2.0))
                return cls(kind, (a, b))
            if kind == "exponential":
                return cls(kind, (float(section.get("rate", 1.0)),))
            if kind == "truncated-gaussian":
                return cls(kind, (float(section.get("mean", 1.0)), float(section.get("sd", 1.0))))
        except ValueError as exc:
            raise ConfigError(f"bad distribution parameter: {exc}") from None
        return cls(kind, ())

    def descriptor(self) -> dict:
        names = {"uniform": ("a", "b"), "bounded-away": ("a", "b"),
                 "exponential": ("rate",), "truncated-gaussian": ("mean", "sd")}[self.kind]
        return {"kind": self.kind, **dict(zip(names, self.params))}

    @property
    def sub_gaussian(self) -> bool:
        # exponential tails are admitted but lie outside the sub-Gaussian class
        return self.kind != "exponential"

    @property
    def bounds(self) -> tuple[float, float]:
        if self.kind in ("uniform", "bounded-away"):
            return self.params
        return 0.0, math.inf

    def _tg(self):
        m, s = self.params
        alpha = -m / s
        tail = _STD.cdf(-alpha)  # P(Z > alpha)
        return m, s, alpha, tail

    @property
    def mean(self) -> float:
        if self.kind in ("uniform", "bounded-away"):
            a, b = self.params
            return 0.5 * (a + b)
        if self.kind == "exponential":
            return 1.0 / self.params[0]
        m, s, alpha, tail = self._tg()
        return m + s * _STD.pdf(alpha) / tail

    @property
    def variance(self) -> float:
        if self.kind in ("uniform", "bounded-away"):
            a, b = self.params
            return (b - a) ** 2 / 12.0
        if self.kind == "exponential":
            return 1.0 / self.params[0] ** 2
        m, s, alpha, tail = self._tg()
        h = _STD.pdf(alpha) / tail
        return s * s * (1.0 + alpha * h - h * h)

    def ppf(self, u: float) -> float:
        """Quantile function at ``u`` in (0, 1)."""
        if self.kind in ("uniform", "bounded-away"):
            a, b = self.params
            return a + (b - a) * u
        if self.kind == "exponential":
            return -math.log1p(-u) / self.params[0]
        m, s, alpha, tail = self._tg()
        lo = _STD.cdf(alpha)
        return m + s * _STD.inv_cdf(lo + u * tail)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind in ("uniform", "bounded-away"):
            a, b = self.params
            return np.clip((x - a) / (b - a), 0.0, 1.0)
        if self.kind == "exponential":
            return np.where(x > 0, -np.expm1(-self.params[0] * np.maximum(x, 0)), 0.0)
        m, s, alpha, tail = self._tg()
        lo = special.ndtr(alpha)
        return np.where(x > 0, (special.ndtr((x - m) / s) - lo) / tail, 0.0)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        u = rng.random(size)
        if self.kind in ("uniform", "bounded-away"):
            a, b = self.params
            return a + (b - a) * u
        if self.kind == "exponential":
            return -np.log1p(-u) / self.params[0]
        m, s, alpha, tail = self._tg()
        lo = special.ndtr(alpha)
        return m + s * special.ndtri(lo + u * tail)


def _key(seed: int) -> bytes:
    if not 0 <= seed < 2**64:
        raise DomainError("seed must be a 64-bit unsigned integer")
    return seed.to_bytes(8, "little")


def hash_uniform(seed: int, data: bytes) -> float:
    """Keyed digest of ``data`` mapped to the open interval (0, 1)."""
    h = int.from_bytes(hashlib.blake2b(data, key=_key(seed), digest_size=8).digest(), "little")
    return ((h >> 11) + 0.5) / 9007199254740992.0


def derive_seed(seed: int, *parts) -> int:
    """Child seed for a labelled sub-stream, e.g. a replication index."""
    tag = "|".join(str(p) for p in parts).encode()
    digest = hashlib.blake2b(tag, key=_key(seed), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass
class Environment:
    """Edge-weight field on the Cayley graph of ``model``.

    ``clamp`` optionally forces every weight into ``[lo, hi]``. The per-instance
    cache only memoises the pure map and never changes values.
    """

    model: GroupModel
    seed: int
    dist: WeightDistribution
    clamp: tuple[float, float] | None = None
    cache: dict | None = field(default=None, repr=False)

    def __post_init__(self):
        self._key = _key(self.seed)
        self._prefix = (self.model.signature + "|").encode()

    def raw_weight(self, e: EdgeId) -> float:
        data = self._prefix + f"{self.model.encode(e.u)}|{e.label}".encode()
        h = int.from_bytes(hashlib.blake2b(data, key=self._key, digest_size=8).digest(), "little")
        return self.dist.ppf(((h >> 11) + 0.5) / 9007199254740992.0)

    def weight(self, e: EdgeId) -> float:
        cache = self.cache
        if cache is not None:
            w = cache.get(e)
            if w is not None:
                return w
        w = self.raw_weight(e)
        if self.clamp is not None:
            lo, hi = self.clamp
            w = min(max(w, lo), hi)
        if cache is not None:
            cache[e] = w
        return w

    def step_weight(self, x, s: str, y=None) -> float:
        return self.weight(edge_from(self.model, x, s, y))

    def with_cache(self) -> "Environment":
        return Environment(self.model, self.seed, self.dist, self.clamp, {})

    def edge_bytes(self, e: EdgeId) -> bytes:
        return edge_bytes(self.model, e)


def weight(env: Environment, e: EdgeId) -> float:
    return env.weight(e)


def truncate(env: Environment, eps_prime: float, big_m: float) -> Environment:
    """Same environment with every weight clamped into ``[eps_prime, big_m]``."""
    if not 0 < eps_prime < big_m:
        raise DomainError("truncation needs 0 < eps_prime < M")
    lo, hi = eps_prime, big_m
    if env.clamp is not None:
        # composing clamps is again a clamp
        a, b = env.clamp
        lo, hi = min(max(a, eps_prime), big_m), min(max(b, eps_prime), big_m)
    return Environment(env.model, env.seed, env.dist, (lo, hi),
                       {} if env.cache is not None else None)


def truncated_tail_check(dist: WeightDistribution, big_m: float, eps: float, n: int,
                         replications: int, seed: int = 0, chunk: int = 2000) -> float:
    """Monte Carlo estimate of P(sum_i (X_i - M)_+ >= eps * n)."""
    if n < 1 or replications < 1:
        raise DomainError("n and replications must be positive")
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < replications:
        m = min(chunk, replications - done)
        x = dist.sample(rng, (m, n))
        excess = np.maximum(x - big_m, 0.0).sum(axis=1)
        hits += int((excess >= eps * n).sum())
        done += m
    return hits / replications
