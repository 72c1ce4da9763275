"""Hyperbolicity diagnostics and the ray geometry used by the experiments.

Everything here works on finite pieces: rays are given by their first
vertices and hyperplanes are materialised inside an explicit working ball.
A ray prefix of length ``2R`` is enough for exact projections of every
vertex of ``ball(1, R)``, since ``d(x, x_j) >= j - |x|``.
"""
from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field
from itertools import combinations

from .errors import DomainError
from .groups import Budget, GroupModel, ball, word_geodesic
from .metric import SetDomain


def gromov_product(model: GroupModel, x, y, o) -> float:
    d = model.distance
    return 0.5 * (d(x, o) + d(y, o) - d(x, y))


@dataclass
class DeltaReport:
    delta: float
    triangles: int
    radius: int
    exhaustive: bool
    witness: tuple | None = None


def _side_slack(model, side, others, floor: int = 0) -> int:
    worst = floor
    for v in side:
        best = math.inf
        for w in others:
            d = model.distance(v, w)
            if d < best:
                best = d
                if best <= worst:
                    break
        worst = max(worst, best)
    return worst


def triangle_slack(model: GroupModel, x, y, z, geodesic=None, floor: int = 0) -> int:
    """Largest distance from a point of one side to the union of the other two.

    Values below ``floor`` are reported as ``floor`` (used to skip work once a
    running maximum is known).
    """
    geodesic = geodesic or (lambda u, v: word_geodesic(model, u, v))
    p = geodesic(x, y)
    q = geodesic(y, z)
    r = geodesic(z, x)
    worst = _side_slack(model, p, q + r, floor)
    worst = _side_slack(model, q, r + p, worst)
    return _side_slack(model, r, p + q, worst)


def delta_estimate(model: GroupModel, radius: int, samples: int | None = None,
                   seed: int = 0, budget: Budget | None = None) -> DeltaReport:
    """Thinness of canonical geodesic triangles with one corner at the identity.

    By left invariance every triangle is a translate of one with a corner at
    the identity, so the two other corners range over ``ball(1, radius)``;
    all pairs are checked unless ``samples`` is given.
    """
    pts = sorted(ball(model, radius=radius, budget=budget), key=model.key)
    e = model.identity
    if samples is None:
        pairs = combinations(pts, 2)
        count = len(pts) * (len(pts) - 1) // 2
    else:
        rng = random.Random(seed)
        pairs = [tuple(rng.sample(pts, 2)) for _ in range(samples)]
        count = samples
    cache: dict = {}

    def geodesic(u, v):
        # canonical geodesics are translates of those leaving the identity
        g = model.product(model.inverse(u), v)
        path = cache.get(g)
        if path is None:
            path = cache[g] = word_geodesic(model, e, g)
        return [model.product(u, w) for w in path]

    best, witness = 0, None
    for y, z in pairs:
        s = triangle_slack(model, e, y, z, geodesic, best)
        if s > best:
            best, witness = s, (model.format(y), model.format(z))
    return DeltaReport(float(best), count, radius, samples is None, witness)


def project_to_ray(model: GroupModel, x, ray: list) -> list[int]:
    """All indices of ray vertices nearest to ``x``."""
    ds = [model.distance(x, p) for p in ray]
    m = min(ds)
    return [j for j, d in enumerate(ds) if d == m]


def ray_distance(model: GroupModel, x, ray: list) -> int:
    return min(model.distance(x, p) for p in ray)


@dataclass
class Hyperplane:
    ray: list
    index: int
    elementary_set: frozenset
    thickened_set: frozenset
    delta: float
    ball: frozenset = field(repr=False)
    projections: dict = field(repr=False)

    def side(self, x) -> str:
        if x not in self.ball:
            raise DomainError("vertex outside the working ball")
        if x in self.thickened_set:
            return "on"
        proj = self.projections[x]
        return "plus" if proj[0] > self.index else "minus"


def working_ray(model: GroupModel, direction, radius: int, extra: int = 0) -> list:
    return direction.ray_points(model, 2 * radius + 2 + extra)


def ray_projections(model: GroupModel, ray: list, members) -> dict:
    return {x: project_to_ray(model, x, ray) for x in members}


def thicken(model: GroupModel, seeds, members, width: int) -> set:
    """``width``-neighbourhood of ``seeds`` taken inside ``members`` by BFS."""
    out = set(seeds)
    frontier = list(out)
    for _ in range(width):
        nxt = []
        for u in frontier:
            for _, v in model.neighbors(u):
                if v in members and v not in out:
                    out.add(v)
                    nxt.append(v)
        frontier = nxt
    return out


def hyperplane(model: GroupModel, ray: list, i: int, members, delta: float = 0.0,
               projections: dict | None = None) -> Hyperplane:
    """Vertices projecting to ``ray[i]``, thickened by ``2 delta`` in the ball.

    Vertices whose nearest-point set straddles ``i`` without containing it
    are added to the thickened set, so every vertex off it projects strictly
    to one side.
    """
    members = frozenset(members)
    if ray[i] not in members:
        raise DomainError("working ball must contain the hyperplane base point")
    proj = projections if projections is not None else ray_projections(model, ray, members)
    elementary = {x for x in members if i in proj[x]}
    straddle = {x for x in members if x not in elementary and proj[x][0] < i < proj[x][-1]}
    thick = thicken(model, elementary, members, int(math.ceil(2 * delta))) | straddle
    return Hyperplane(ray, i, frozenset(elementary), frozenset(thick), delta, members, proj)


def half_space_side(h: Hyperplane, x) -> str:
    return h.side(x)


def separation_check(model: GroupModel, h: Hyperplane) -> dict:
    """Exhaustive cut test: plus and minus sides are disconnected off ``h``."""
    plus = [x for x in h.ball if x not in h.thickened_set and h.side(x) == "plus"]
    seen = set(plus)
    queue = deque(plus)
    violations = []
    while queue:
        u = queue.popleft()
        for _, v in model.neighbors(u):
            if v in h.ball and v not in h.thickened_set and v not in seen:
                seen.add(v)
                if h.side(v) == "minus":
                    violations.append(model.format(v))
                queue.append(v)
    minus = sum(1 for x in h.ball if x not in h.thickened_set and h.side(x) == "minus")
    return {"plus": len(plus), "minus": minus, "violations": violations}


def crossing_paths_check(model: GroupModel, h: Hyperplane, samples: int, seed: int = 0) -> dict:
    """Random two-leg geodesic paths from plus to minus inside the ball must meet ``h``."""
    rng = random.Random(seed)
    order = sorted(h.ball, key=model.key)
    plus = [x for x in order if h.side(x) == "plus"]
    minus = [x for x in order if h.side(x) == "minus"]
    failures = 0
    tested = 0
    if not plus or not minus:
        return {"paths": 0, "failures": 0}
    for _ in range(samples):
        a, b, c = rng.choice(plus), rng.choice(minus), rng.choice(order)
        # a random detour through c, kept only if it stays in the ball
        path = word_geodesic(model, a, c) + word_geodesic(model, c, b)[1:]
        if not all(v in h.ball for v in path):
            continue
        tested += 1
        if not any(v in h.thickened_set for v in path):
            failures += 1
    return {"paths": tested, "failures": failures}


def nesting_threshold(model: GroupModel, ray: list, members, indices, max_gap: int,
                      delta: float = 0.0) -> dict:
    """Smallest gap ``k`` with ``H_{i+k}`` entirely on the plus side of ``H_i``.

    Checked for every ``i`` in ``indices`` inside the working ball; ``None``
    when no gap up to ``max_gap`` works.
    """
    members = frozenset(members)
    proj = ray_projections(model, ray, members)
    planes: dict = {}

    def plane(j):
        if j not in planes:
            planes[j] = hyperplane(model, ray, j, members, delta, proj)
        return planes[j]

    for k in range(1, max_gap + 1):
        ok = True
        for i in indices:
            if ray[i + k] not in members:
                raise DomainError(f"ray vertex {i + k} lies outside the working ball")
            h = plane(i)
            if any(x in h.thickened_set or h.side(x) != "plus"
                   for x in plane(i + k).thickened_set):
                ok = False
                break
        if ok:
            return {"threshold": k, "indices": list(indices), "max_gap": max_gap}
    return {"threshold": None, "indices": list(indices), "max_gap": max_gap}


def region_domain(model: GroupModel, ray: list, i: int, D: int, members,
                  delta: float = 0.0) -> SetDomain:
    """Vertices between two hyperplanes, both included."""
    proj = ray_projections(model, ray, members)
    h1 = hyperplane(model, ray, i, members, delta, proj)
    h2 = hyperplane(model, ray, i + D, members, delta, proj)
    between = {x for x in members
               if x not in h1.thickened_set and x not in h2.thickened_set
               and h1.side(x) == "plus" and h2.side(x) == "minus"}
    region = set(h1.thickened_set) | set(h2.thickened_set) | between
    radius = max(model.length(x) for x in members)
    return SetDomain(model, region, model.identity, radius)


def divergence_profile(model: GroupModel, ray: list, i: int, D: int, radii,
                       working_radius: int, budget: Budget | None = None) -> list[dict]:
    """Shortest path from ``H_i`` to ``H_{i+D}`` avoiding the open R-neighbourhood of the ray.

    ``length`` is ``None`` when no such path exists inside the working ball.
    """
    members = ball(model, radius=working_radius, budget=budget)
    proj = ray_projections(model, ray, members)
    src = {x for x in members if i in proj[x]}
    dst = {x for x in members if i + D in proj[x]}
    rdist = {x: model.distance(x, ray[proj[x][0]]) for x in members}
    out = []
    for R in radii:
        allowed = {x for x in members if rdist[x] >= R}
        start = [x for x in src if x in allowed]
        goal = {x for x in dst if x in allowed}
        length = None
        depth = {x: 0 for x in start}
        queue = deque(start)
        while queue:
            u = queue.popleft()
            if u in goal:
                length = depth[u]
                break
            for _, v in model.neighbors(u):
                if v in allowed and v not in depth:
                    depth[v] = depth[u] + 1
                    queue.append(v)
        out.append({"R": R, "length": length})
    return out
