"""First passage times by lazy Dijkstra over the implicit Cayley graph.

Searches only ever touch the vertices they pop; a :class:`Domain` filters
which vertices may be entered. For free and free-mixed models an exact
pruning rule is applied by default: the Cayley graph is a tree of coset
graphs glued at cut vertices, so a simple path between two vertices only
visits the cosets (and bridge edges) crossed by their word geodesic. Any
other move would have to come back through the same cut vertex and can
never lie on an optimal path.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .errors import DomainError, UnreachableError
from .groups import Budget, FreeModel, GroupModel, edge_from, word_geodesic

TIE_RTOL = 1e-12


class Domain:
    """Vertex set allowed in a search, always inside a bounding ball."""

    kind = "domain"

    def __init__(self, model: GroupModel, center, radius: int):
        self.model = model
        self.center = center
        self.radius = radius
        self._memo: dict = {}

    def in_bounds(self, v) -> bool:
        return self.model.distance(self.center, v) <= self.radius

    def _test(self, v) -> bool:
        return self.in_bounds(v)

    def contains(self, v) -> bool:
        hit = self._memo.get(v)
        if hit is None:
            hit = self._memo[v] = self._test(v)
        return hit

    def describe(self) -> dict:
        return {"kind": self.kind, "center": self.model.format(self.center),
                "radius": self.radius}


class BallDomain(Domain):
    kind = "ball"


class CylinderDomain(Domain):
    """Vertices within distance ``B`` of a base path (a word geodesic)."""

    kind = "cylinder"

    def __init__(self, model: GroupModel, path: list, B: int):
        if B < 0:
            raise DomainError("cylinder width B must be nonnegative")
        super().__init__(model, path[0], len(path) - 1 + B)
        self.path = list(path)
        self.B = B

    def _test(self, v) -> bool:
        d0 = self.model.distance(self.path[0], v)
        # d(v, p_j) >= |d0 - j| restricts the indices worth checking
        lo = max(0, d0 - self.B)
        hi = min(len(self.path) - 1, d0 + self.B)
        dist = self.model.distance
        return any(dist(self.path[j], v) <= self.B for j in range(lo, hi + 1))

    def describe(self) -> dict:
        return {"kind": self.kind, "B": self.B, "from": self.model.format(self.path[0]),
                "to": self.model.format(self.path[-1])}


class SetDomain(Domain):
    """Explicit member set (regions between hyperplanes are built this way)."""

    kind = "region"

    def __init__(self, model: GroupModel, members, center, radius: int):
        super().__init__(model, center, radius)
        self.members = frozenset(members)

    def _test(self, v) -> bool:
        return v in self.members


class CustomDomain(Domain):
    kind = "custom"

    def __init__(self, model: GroupModel, predicate: Callable, center, radius: int):
        super().__init__(model, center, radius)
        self.predicate = predicate

    def _test(self, v) -> bool:
        return self.in_bounds(v) and bool(self.predicate(v))


def default_domain(model: GroupModel, x, y) -> BallDomain:
    d = model.distance(x, y)
    return BallDomain(model, x, 2 * d + 2)


@dataclass
class PassageResult:
    time: float
    path: list
    relaxations: int
    near_ties: int = 0
    weights: list = field(default_factory=list)

    @property
    def edges(self) -> int:
        return max(len(self.path) - 1, 0)


class _Pruner:
    """Moves admissible for a simple path between a source and targets."""

    def __init__(self, model: FreeModel, source, targets):
        self.model = model
        self.cosets: set = set()
        self.bridges: set = set()
        letter = {s: abs(e[0]) for s, e in model.generators.expansion.items()}
        self.letter = letter
        for y in targets:
            path = word_geodesic(model, source, y)
            for u, v in zip(path, path[1:]):
                for s in model.generators.labels:
                    if model.multiply(u, s) == v:
                        break
                self.cosets.add(self._coset(u, letter[s]))
                if s in model.bridge_labels:
                    self.bridges.add(edge_from(model, u, s, v))

    @staticmethod
    def _coset(u: tuple, g: int):
        i = len(u)
        while i > 0 and abs(u[i - 1]) == g:
            i -= 1
        return u[:i], g

    def allowed(self, u, s: str) -> bool:
        if self._coset(u, self.letter[s]) not in self.cosets:
            return False
        if s in self.model.bridge_labels:
            return edge_from(self.model, u, s) in self.bridges
        return True


def passage_times(env, x, targets: Iterable, domain: Domain | None = None,
                  prune: bool = True, budget: Budget | None = None) -> list[PassageResult]:
    """Passage times from ``x`` to every target in one Dijkstra sweep."""
    model = env.model
    targets = list(targets)
    if domain is None:
        far = max(targets, key=lambda t: model.distance(x, t))
        domain = default_domain(model, x, far)
    budget = budget or Budget()
    for v in [x, *targets]:
        if not domain.contains(v):
            raise DomainError(f"{model.format(v)} lies outside the query domain")
    pruner = None
    if prune and isinstance(model, FreeModel):
        pruner = _Pruner(model, x, [t for t in targets if t != x])
    labels = model.generators.labels
    dist = {x: 0.0}
    prev: dict = {x: None}
    settled: set = set()
    pending = set(targets)
    pending.discard(x)
    heap = [(0.0, 0, x)]
    counter = 1
    start_used = budget.used
    near_ties = 0
    while heap and pending:
        du, _, u = heapq.heappop(heap)
        if u in settled:
            continue
        settled.add(u)
        pending.discard(u)
        if not pending:
            break
        budget.spend(len(labels))
        for s in labels:
            if pruner is not None and not pruner.allowed(u, s):
                continue
            v = model.multiply(u, s)
            if v in settled or not domain.contains(v):
                continue
            nd = du + env.step_weight(u, s, v)
            dv = dist.get(v)
            if dv is None or nd < dv:
                if dv is not None and dv - nd <= TIE_RTOL * dv:
                    near_ties += 1
                dist[v] = nd
                prev[v] = (u, s)
                heapq.heappush(heap, (nd, counter, v))
                counter += 1
            elif nd - dv <= TIE_RTOL * dv:
                near_ties += 1
    if pending:
        missing = model.format(next(iter(pending)))
        raise UnreachableError(f"{missing} is unreachable inside the {domain.kind} domain")
    out = []
    for y in targets:
        path = [y]
        ws = []
        while prev[path[-1]] is not None:
            u, s = prev[path[-1]]
            ws.append(env.step_weight(u, s, path[-1]))
            path.append(u)
        path.reverse()
        ws.reverse()
        out.append(PassageResult(math.fsum(ws), path, budget.used - start_used, near_ties, ws))
    return out


def passage_time(env, x, y, domain: Domain | None = None, prune: bool = True,
                 budget: Budget | None = None) -> PassageResult:
    """Minimal total weight over paths from ``x`` to ``y`` inside ``domain``.

    ``time`` is the exactly rounded sum of the weights along the returned
    path; with ``domain=None`` a ball of radius ``2 d(x, y) + 2`` about ``x``
    is used.
    """
    if x == y:
        return PassageResult(0.0, [x], 0)
    return passage_times(env, x, [y], domain, prune, budget)[0]


def restricted_passage_time(env, x, y, B: int, base: list | None = None,
                            prune: bool = True, budget: Budget | None = None) -> PassageResult:
    """Passage time inside the width-``B`` cylinder around a word geodesic."""
    model = env.model
    base = base if base is not None else word_geodesic(model, x, y)
    return passage_time(env, x, y, CylinderDomain(model, base, B), prune, budget)


def omega_geodesic_ray(env, basepoint, direction, horizon: int, radius: int | None = None,
                       B: int | None = None, prune: bool = True,
                       budget: Budget | None = None) -> PassageResult:
    """Optimal path from ``basepoint`` to the ``horizon``-th point of a ray.

    The search domain is a cylinder of width ``B`` about the ray segment when
    ``B`` is given, else a ball about ``basepoint`` (default radius
    ``2 d + 2``).
    """
    model = env.model
    pts = direction.ray_points(model, horizon)
    target = pts[-1]
    if B is not None:
        base = word_geodesic(model, basepoint, pts[0])[:-1] + pts
        domain: Domain = CylinderDomain(model, base, B)
    else:
        d = model.distance(basepoint, target)
        domain = BallDomain(model, basepoint, radius if radius is not None else 2 * d + 2)
    return passage_time(env, basepoint, target, domain, prune, budget)


def shared_prefix(p: list, q: list) -> int:
    n = 0
    for a, b in zip(p, q):
        if a != b:
            break
        n += 1
    return n


def ray_stabilization(env, basepoint, direction, horizons, **kw) -> list[dict]:
    """Prefix agreement of optimal paths to successive horizons."""
    horizons = list(horizons)
    paths = [omega_geodesic_ray(env, basepoint, direction, n, **kw).path for n in horizons]
    report = []
    for (n, p), (m, q) in zip(zip(horizons, paths), zip(horizons[1:], paths[1:])):
        k = shared_prefix(p, q)
        report.append({"horizon": n, "next": m, "shared_prefix": k,
                       "first_divergence": None if k == len(p) else k})
    return report


def geodesic_stats(env, pairs, domain_for=None, prune: bool = True,
                   budget: Budget | None = None) -> list[dict]:
    """Edge count of the optimal path against the word distance, per pair."""
    model = env.model
    out = []
    for x, y in pairs:
        dom = domain_for(x, y) if domain_for else None
        res = passage_time(env, x, y, dom, prune, budget)
        d = model.distance(x, y)
        out.append({"distance": d, "path_edges": res.edges, "time": res.time,
                    "ratio": res.edges / d if d else 1.0})
    return out
