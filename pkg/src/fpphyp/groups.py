"""Group models, word metric and implicit Cayley-graph neighbourhoods.

Elements are plain hashable normal forms so that searches can store them in
dicts and heaps directly:

* free and free-mixed models use reduced words over the free basis, encoded as
  tuples of nonzero ints (``i`` is the i-th basis letter, ``-i`` its inverse);
* cyclic-multi models (``Z`` with generators ``±1..±m``) use plain ints.

A power generator such as ``b^2`` is one letter of the generating set ``S``
(label ``"b2"``) whose free-basis expansion is ``(2, 2)``.
"""
from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Hashable, Iterable, NamedTuple

from .errors import BudgetExceeded, ConfigError, DomainError

Element = Hashable

DEFAULT_RELAXATIONS = 50_000_000

_LETTERS = "abcdefghijklmnopqrstuvwxyz"


class Budget:
    """Counter of edge relaxations shared by BFS and Dijkstra searches."""

    def __init__(self, relaxations: int = DEFAULT_RELAXATIONS):
        self.cap = int(relaxations)
        self.used = 0

    def spend(self, k: int = 1) -> None:
        self.used += k
        if self.used > self.cap:
            raise BudgetExceeded("edge relaxations", self.cap)


@dataclass(frozen=True)
class GeneratorSet:
    """Symmetric generating set with its canonical tie-break order."""

    labels: tuple[str, ...]
    inverse: dict[str, str]
    step_weight: dict[str, int]
    expansion: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise ConfigError("generator labels must be distinct")
        for s in self.labels:
            t = self.inverse.get(s)
            if t is None or t not in self.labels or self.inverse.get(t) != s:
                raise ConfigError(f"inverse map is not an involution at {s!r}")

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise DomainError(f"unknown generator label {label!r}") from None

    def tokenize(self, text: str) -> list[str]:
        """Split a label word by longest match; blanks, commas and dots separate."""
        text = re.sub(r"[\s,.·*]+", "", text)
        if text in ("", "1", "e"):
            return []
        by_len = sorted(self.labels, key=len, reverse=True)
        out: list[str] = []
        i = 0
        while i < len(text):
            for s in by_len:
                if text.startswith(s, i):
                    out.append(s)
                    i += len(s)
                    break
            else:
                raise DomainError(f"cannot parse label word {text!r} at offset {i}")
        return out


class EdgeId(NamedTuple):
    """Canonical undirected edge: ``u`` is the smaller endpoint, ``u·label = v``."""

    u: Element
    v: Element
    label: str


class GroupModel:
    """Interface shared by the catalog models."""

    kind: str
    generators: GeneratorSet
    identity: Element
    bridge_labels: frozenset[str] = frozenset()

    # -- to be provided by subclasses
    def multiply(self, x: Element, s: str) -> Element:
        raise NotImplementedError

    def product(self, x: Element, y: Element) -> Element:
        raise NotImplementedError

    def inverse(self, x: Element) -> Element:
        raise NotImplementedError

    def length(self, x: Element) -> int:
        raise NotImplementedError

    def parse(self, text: str) -> Element:
        raise NotImplementedError

    def format(self, x: Element) -> str:
        raise NotImplementedError

    def encode(self, x: Element) -> str:
        raise NotImplementedError

    @property
    def signature(self) -> str:
        raise NotImplementedError

    def descriptor(self) -> dict:
        raise NotImplementedError

    # -- shared behaviour
    def key(self, x: Element):
        return x

    def distance(self, x: Element, y: Element) -> int:
        return self.length(self.product(self.inverse(x), y))

    def neighbors(self, x: Element) -> list[tuple[str, Element]]:
        return [(s, self.multiply(x, s)) for s in self.generators.labels]

    def evaluate(self, labels: Iterable[str], start: Element | None = None) -> Element:
        x = self.identity if start is None else start
        for s in labels:
            x = self.multiply(x, s)
        return x

    @property
    def is_tree(self) -> bool:
        return self.bridge_labels == frozenset(self.generators.labels)

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.signature}>"


def _syllables(word: tuple[int, ...]):
    """Yield (letter, exponent) runs of a reduced word."""
    i = 0
    while i < len(word):
        g = abs(word[i])
        sign = 1 if word[i] > 0 else -1
        j = i
        while j < len(word) and word[j] == word[i]:
            j += 1
        yield g, sign * (j - i)
        i = j


def _append(x: tuple[int, ...], word: Iterable[int]) -> tuple[int, ...]:
    out = list(x)
    for letter in word:
        if out and out[-1] == -letter:
            out.pop()
        else:
            out.append(letter)
    return tuple(out)


class FreeModel(GroupModel):
    """Free group of rank ``k`` generated by ``g^{±1},...,g^{±m_g}`` per basis letter.

    ``powers[i]`` is the largest power of the i-th basis letter included in ``S``;
    all ones gives the standard generating set.
    """

    def __init__(self, rank: int = 2, powers: Iterable[int] | None = None):
        if not 1 <= rank <= len(_LETTERS):
            raise ConfigError(f"rank must be in 1..{len(_LETTERS)}")
        powers = tuple(powers) if powers is not None else (1,) * rank
        if len(powers) != rank or any(int(p) < 1 for p in powers):
            raise ConfigError("powers must list one positive integer per basis letter")
        self.rank = rank
        self.powers = tuple(int(p) for p in powers)
        self.kind = "free" if all(p == 1 for p in self.powers) else "free-mixed"
        labels: list[str] = []
        inverse: dict[str, str] = {}
        weight: dict[str, int] = {}
        expansion: dict[str, tuple[int, ...]] = {}
        bridges = set()
        for i, m in enumerate(self.powers):
            lo, up = _LETTERS[i], _LETTERS[i].upper()
            for p in range(m, 0, -1):
                suffix = "" if p == 1 else str(p)
                pos, neg = lo + suffix, up + suffix
                labels += [pos, neg]
                inverse[pos], inverse[neg] = neg, pos
                weight[pos] = weight[neg] = p
                expansion[pos] = (i + 1,) * p
                expansion[neg] = (-(i + 1),) * p
                if m == 1:
                    bridges.update((pos, neg))
        self.generators = GeneratorSet(tuple(labels), inverse, weight, expansion)
        self.bridge_labels = frozenset(bridges)
        self.identity = ()

    @property
    def signature(self) -> str:
        return f"{self.kind}:{self.rank}:{','.join(map(str, self.powers))}"

    def descriptor(self) -> dict:
        return {"kind": self.kind, "rank": self.rank, "powers": list(self.powers)}

    def multiply(self, x, s):
        try:
            return _append(x, self.generators.expansion[s])
        except KeyError:
            raise DomainError(f"unknown generator label {s!r}") from None

    def product(self, x, y):
        return _append(x, y)

    def inverse(self, x):
        return tuple(-a for a in reversed(x))

    def length(self, x) -> int:
        if self.kind == "free":
            return len(x)
        powers = self.powers
        total = 0
        i, n = 0, len(x)
        while i < n:
            a = x[i]
            j = i + 1
            while j < n and x[j] == a:
                j += 1
            total += -(-(j - i) // powers[abs(a) - 1])
            i = j
        return total

    def distance(self, x, y) -> int:
        p = 0
        n = min(len(x), len(y))
        while p < n and x[p] == y[p]:
            p += 1
        if self.kind == "free":
            return len(x) + len(y) - 2 * p
        return self.length(tuple(-a for a in reversed(x[p:])) + y[p:])

    def parse(self, text: str):
        text = text.strip()
        if text in ("", "1", "e", "id"):
            return ()
        word: list[int] = []
        pos = 0
        for m in re.finditer(r"\s*([A-Za-z])(?:\^(-?\d+))?\s*", text):
            if m.start() != pos:
                break
            pos = m.end()
            ch = m.group(1)
            i = _LETTERS.index(ch.lower())
            if i >= self.rank:
                raise DomainError(f"letter {ch!r} not in rank-{self.rank} free basis")
            e = int(m.group(2)) if m.group(2) is not None else 1
            if ch.isupper():
                e = -e
            word.extend([(i + 1) if e > 0 else -(i + 1)] * abs(e))
        if pos != len(text):
            raise DomainError(f"cannot parse group element {text!r}")
        return _append((), word)

    def format(self, x) -> str:
        if not x:
            return "1"
        parts = []
        for g, e in _syllables(x):
            parts.append(_LETTERS[g - 1] + ("" if e == 1 else f"^{e}"))
        return "".join(parts)

    def encode(self, x) -> str:
        return ",".join(map(str, x))


class CyclicModel(GroupModel):
    """``Z`` with generating set ``{±1, ..., ±m}``; elements are ints."""

    kind = "cyclic-multi"

    def __init__(self, m: int = 1):
        if int(m) < 1:
            raise ConfigError("cyclic-multi modulus m must be >= 1")
        self.m = int(m)
        labels: list[str] = []
        inverse: dict[str, str] = {}
        weight: dict[str, int] = {}
        expansion: dict[str, int] = {}
        for p in range(self.m, 0, -1):
            pos, neg = f"+{p}", f"-{p}"
            labels += [pos, neg]
            inverse[pos], inverse[neg] = neg, pos
            weight[pos] = weight[neg] = p
            expansion[pos], expansion[neg] = p, -p
        self.generators = GeneratorSet(tuple(labels), inverse, weight, expansion)
        self.bridge_labels = frozenset(labels) if self.m == 1 else frozenset()
        self.identity = 0

    @property
    def signature(self) -> str:
        return f"cyclic-multi:{self.m}"

    def descriptor(self) -> dict:
        return {"kind": self.kind, "m": self.m}

    def multiply(self, x, s):
        try:
            return x + self.generators.expansion[s]
        except KeyError:
            raise DomainError(f"unknown generator label {s!r}") from None

    def product(self, x, y):
        return x + y

    def inverse(self, x):
        return -x

    def length(self, x) -> int:
        return -(-abs(x) // self.m)

    def distance(self, x, y) -> int:
        return -(-abs(y - x) // self.m)

    def parse(self, text: str):
        try:
            return int(text.strip())
        except ValueError:
            raise DomainError(f"cannot parse integer element {text!r}") from None

    def format(self, x) -> str:
        return str(x)

    def encode(self, x) -> str:
        return str(x)


class AutomaticModel(GroupModel):
    """A catalog group re-presented through a supplied geodesic automaton.

    Multiplication is delegated to ``base``; the word metric is computed by
    BFS over the Cayley graph (no closed form is assumed), so this model is
    only practical on small balls.
    """

    kind = "automatic"

    def __init__(self, base: GroupModel, automaton, bfs_budget: int = 2_000_000):
        self.base = base
        self.automaton = automaton
        self.generators = base.generators
        self.identity = base.identity
        self.bridge_labels = frozenset()
        self._budget = bfs_budget
        self._dist = {self.identity: 0}
        self._frontier = deque([self.identity])

    @property
    def signature(self) -> str:
        return f"automatic[{self.base.signature}]"

    def descriptor(self) -> dict:
        return {"kind": self.kind, "base": self.base.descriptor()}

    def multiply(self, x, s):
        return self.base.multiply(x, s)

    def product(self, x, y):
        return self.base.product(x, y)

    def inverse(self, x):
        return self.base.inverse(x)

    def length(self, x) -> int:
        # Incremental BFS from the identity; the table only grows, so results
        # match an uncached search.
        while x not in self._dist:
            if not self._frontier or len(self._dist) > self._budget:
                raise BudgetExceeded("automatic-model BFS vertices", self._budget)
            u = self._frontier.popleft()
            du = self._dist[u]
            for _, v in self.base.neighbors(u):
                if v not in self._dist:
                    self._dist[v] = du + 1
                    self._frontier.append(v)
        return self._dist[x]

    def parse(self, text):
        return self.base.parse(text)

    def format(self, x):
        return self.base.format(x)

    def encode(self, x):
        return self.base.encode(x)

    def key(self, x):
        return self.base.key(x)


def build_model(descriptor: dict) -> GroupModel:
    """Construct a model from a config descriptor (see README for keys)."""
    kind = str(descriptor.get("kind", "free")).strip()
    if kind in ("free", "free-mixed"):
        rank = int(descriptor.get("rank", 2))
        powers = descriptor.get("powers")
        if isinstance(powers, str):
            powers = parse_powers(powers, rank)
        if kind == "free-mixed" and powers is None:
            powers = (1,) * (rank - 1) + (2,)
        model = FreeModel(rank, powers)
        if kind == "free-mixed" and model.kind != "free-mixed":
            raise ConfigError("free-mixed model needs at least one power > 1")
        return model
    if kind == "cyclic-multi":
        return CyclicModel(int(descriptor.get("m", 2)))
    if kind == "automatic":
        from .combing import load_automaton

        if "base" in descriptor:
            base_desc = dict(descriptor["base"])
        else:
            # flat INI form: base_kind, base_rank, base_powers, base_m
            base_desc = {k[5:]: v for k, v in descriptor.items() if k.startswith("base_")}
        if "automaton" not in descriptor:
            raise ConfigError("automatic model needs an automaton file")
        base = build_model(base_desc)
        return AutomaticModel(base, load_automaton(descriptor["automaton"], base))
    raise ConfigError(f"unknown model kind {kind!r}")


def parse_powers(text: str, rank: int) -> tuple[int, ...]:
    """Parse ``"b:2"`` or ``"1,2"`` into a per-letter power tuple."""
    text = text.strip()
    powers = [1] * rank
    if not text:
        return tuple(powers)
    if ":" in text:
        for item in text.split(","):
            letter, _, p = item.partition(":")
            i = _LETTERS.index(letter.strip())
            if i >= rank:
                raise ConfigError(f"power annotation for letter outside rank: {item!r}")
            powers[i] = int(p)
        return tuple(powers)
    values = [int(v) for v in text.split(",")]
    if len(values) != rank:
        raise ConfigError("powers list length must equal rank")
    return tuple(values)


# ---------------------------------------------------------------------------
# edges

def canonical_edge(model: GroupModel, x: Element, y: Element) -> EdgeId:
    for s, z in model.neighbors(x):
        if z == y:
            return edge_from(model, x, s, y)
    raise DomainError(f"{model.format(x)} and {model.format(y)} are not adjacent")


def edge_from(model: GroupModel, x: Element, s: str, y: Element | None = None) -> EdgeId:
    """Canonical edge through ``x`` and ``x·s`` without a neighbour search."""
    if y is None:
        y = model.multiply(x, s)
    if model.key(x) <= model.key(y):
        return EdgeId(x, y, s)
    return EdgeId(y, x, model.generators.inverse[s])


def edge_bytes(model: GroupModel, e: EdgeId) -> bytes:
    return f"{model.signature}|{model.encode(e.u)}|{e.label}".encode()


# ---------------------------------------------------------------------------
# balls, spheres, geodesics

def ball(model: GroupModel, center: Element | None = None, radius: int = 0,
         budget: Budget | None = None) -> dict:
    """Exact ball as ``{element: distance}`` by BFS over neighbours."""
    if radius < 0:
        raise DomainError("radius must be nonnegative")
    budget = budget or Budget()
    center = model.identity if center is None else center
    dist = {center: 0}
    frontier = [center]
    for r in range(1, radius + 1):
        nxt = []
        for u in frontier:
            budget.spend(len(model.generators.labels))
            for _, v in model.neighbors(u):
                if v not in dist:
                    dist[v] = r
                    nxt.append(v)
        frontier = nxt
    return dist


def sphere(model: GroupModel, n: int, center: Element | None = None,
           budget: Budget | None = None) -> list:
    b = ball(model, center, n, budget)
    return [x for x, d in b.items() if d == n]


def geodesic_labels(model: GroupModel, x: Element, y: Element) -> list[str]:
    """Lexicographically least geodesic label word (canonical label order)."""
    labels = []
    remaining = model.distance(x, y)
    v = x
    while remaining > 0:
        for s, w in model.neighbors(v):
            if model.distance(w, y) == remaining - 1:
                labels.append(s)
                v = w
                remaining -= 1
                break
        else:  # pragma: no cover - impossible for a correct metric
            raise DomainError("distance oracle is inconsistent")
    return labels


def word_geodesic(model: GroupModel, x: Element, y: Element) -> list:
    """Vertices of the canonical word geodesic from ``x`` to ``y`` (inclusive)."""
    path = [x]
    for s in geodesic_labels(model, x, y):
        path.append(model.multiply(path[-1], s))
    return path


def free_sphere_size(rank: int, n: int) -> int:
    return 1 if n == 0 else 2 * rank * (2 * rank - 1) ** (n - 1)


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


__all__ = [
    "AutomaticModel", "Budget", "CyclicModel", "EdgeId", "Element", "FreeModel",
    "GeneratorSet", "GroupModel", "ball", "build_model", "canonical_edge",
    "edge_bytes", "edge_from", "free_sphere_size", "geodesic_labels",
    "parse_powers", "sphere", "word_geodesic"
]
