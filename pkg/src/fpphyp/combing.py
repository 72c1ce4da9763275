"""Geodesic automata, their spectral and Markov data, cone measures and rays.

An automaton is a deterministic labelled digraph whose every state accepts;
state 0 is the initial state. ``analyze`` extracts the strongly connected
structure, the growth rate, the averaged eigenprojections and the induced
Markov chain on states; the other functions are built on that result.
"""
from __future__ import annotations

import math
import re
from collections import deque
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DomainError, FormatError, NumericError, SamplingError
from .groups import GroupModel, ball, sphere

MAXIMAL_RTOL = 1e-9
ZERO_RTOL = 1e-12


@dataclass
class GeodesicAutomaton:
    labels: tuple[str, ...]
    names: list[str]
    trans: list[dict[str, int]]

    def __post_init__(self):
        ordered = []
        for row in self.trans:
            ordered.append({s: row[s] for s in self.labels if s in row})
        self.trans = ordered
        seen = {0}
        queue = deque([0])
        while queue:
            p = queue.popleft()
            for q in self.trans[p].values():
                if q not in seen:
                    seen.add(q)
                    queue.append(q)
        missing = [self.names[p] for p in range(len(self.names)) if p not in seen]
        if missing:
            raise FormatError(f"states unreachable from the initial state: {missing}")

    @property
    def n_states(self) -> int:
        return len(self.names)

    def step(self, p: int | None, s: str) -> int | None:
        if p is None:
            return None
        return self.trans[p].get(s)

    def run(self, word, start: int = 0) -> int | None:
        p = start
        for s in word:
            p = self.step(p, s)
        return p

    def accepts(self, word) -> bool:
        return self.run(word) is not None

    def edges(self):
        for p, row in enumerate(self.trans):
            for s, q in row.items():
                yield p, s, q

    def matrix(self) -> np.ndarray:
        m = np.zeros((self.n_states, self.n_states))
        for p, _, q in self.edges():
            m[p, q] += 1
        return m

    def incoming_labels(self) -> list[set[str]]:
        inc: list[set[str]] = [set() for _ in self.names]
        for _, s, q in self.edges():
            inc[q].add(s)
        return inc

    @property
    def label_determined(self) -> bool:
        """True when every state is entered by a single label."""
        return all(len(x) <= 1 for x in self.incoming_labels())

    def accepted_words(self, max_len: int):
        """Yield ``(word, state)`` for all accepted words up to ``max_len``."""
        layer = [((), 0)]
        yield (), 0
        for _ in range(max_len):
            nxt = []
            for w, p in layer:
                for s, q in self.trans[p].items():
                    item = (w + (s,), q)
                    nxt.append(item)
                    yield item
            layer = nxt

    def to_text(self) -> str:
        lines = [f"states {self.n_states} initial 1"]
        for p, s, q in self.edges():
            lines.append(f"{p + 1} {s} {q + 1}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# construction

def parse_automaton(text: str, labels) -> GeodesicAutomaton:
    labels = tuple(labels)
    known = set(labels)
    n = initial = None
    trans: list[dict[str, int]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if n is None:
            m = re.fullmatch(r"states\s+(\d+)\s+initial\s+(\d+)", line)
            if not m:
                raise FormatError("expected header 'states N initial I'", lineno)
            n, initial = int(m.group(1)), int(m.group(2))
            if n < 1 or not 1 <= initial <= n:
                raise FormatError("initial state out of range", lineno)
            trans = [{} for _ in range(n)]
            continue
        if len(parts) != 3:
            raise FormatError("expected 'from label to'", lineno)
        try:
            p, q = int(parts[0]), int(parts[2])
        except ValueError:
            raise FormatError("state ids must be integers", lineno) from None
        s = parts[1]
        if not (1 <= p <= n and 1 <= q <= n):
            raise FormatError(f"state id out of range 1..{n}", lineno)
        if s not in known:
            raise FormatError(f"unknown generator label {s!r}", lineno)
        if s in trans[p - 1]:
            raise FormatError(f"nondeterministic: state {p} has two {s!r} transitions", lineno)
        trans[p - 1][s] = q - 1
    if n is None:
        raise FormatError("empty automaton file")
    # renumber so that the initial state is index 0
    order = [initial - 1] + [i for i in range(n) if i != initial - 1]
    pos = {old: new for new, old in enumerate(order)}
    names = [str(old + 1) for old in order]
    new_trans = [{s: pos[q] for s, q in trans[old].items()} for old in order]
    return GeodesicAutomaton(labels, names, new_trans)


def load_automaton(source, model: GroupModel) -> GeodesicAutomaton:
    """Read an automaton file; ``source`` is a path or a file-like object."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text()
    return parse_automaton(text, model.generators.labels)


def _letter_families(model: GroupModel):
    """Group labels into (family, sign) runs ordered by decreasing power."""
    gens = model.generators
    fams: dict[tuple, list[tuple[int, str]]] = {}
    for s in gens.labels:
        e = gens.expansion[s]
        if isinstance(e, int):
            fam = (0, 1 if e > 0 else -1)
        else:
            fam = (abs(e[0]), 1 if e[0] > 0 else -1)
        fams.setdefault(fam, []).append((gens.step_weight[s], s))
    return {f: sorted(v, reverse=True) for f, v in fams.items()}


def builtin_automaton(model: GroupModel) -> GeodesicAutomaton:
    """Automaton of lexicographically least geodesics for the catalog models.

    Per basis letter with largest power ``m`` the accepted syllables are
    ``(g^m)^k g^r`` with ``0 <= r < m``; consecutive syllables use different
    basis letters.
    """
    if model.kind == "automatic":
        return model.automaton
    if model.kind not in ("free", "free-mixed", "cyclic-multi"):
        raise DomainError(f"no builtin automaton for {model.kind!r}")
    fams = _letter_families(model)
    names = ["init"]
    full: dict[tuple, int] = {}
    end: dict[tuple, int] = {}
    for fam, powers in fams.items():
        full[fam] = len(names)
        names.append(powers[0][1])
        if len(powers) > 1:
            end[fam] = len(names)
            names.append(powers[-1][1] + ".end")
    trans: list[dict[str, int]] = [dict() for _ in names]

    def entry(row: dict, fam):
        for p, s in fams[fam]:
            row[s] = full[fam] if p == fams[fam][0][0] else end[fam]

    for fam in fams:
        entry(trans[0], fam)
        for other in fams:
            if other[0] != fam[0]:
                entry(trans[full[fam]], other)
                if fam in end:
                    entry(trans[end[fam]], other)
        # a full syllable may be extended in the same direction
        entry(trans[full[fam]], fam)
    return GeodesicAutomaton(model.generators.labels, names, trans)


def refine_by_incoming_label(aut: GeodesicAutomaton) -> GeodesicAutomaton:
    """Split states by the label used to enter them (same language)."""
    start = (0, None)
    index = {start: 0}
    names = [aut.names[0]]
    trans: list[dict[str, int]] = [{}]
    queue = deque([start])
    while queue:
        node = queue.popleft()
        p, _ = node
        for s, q in aut.trans[p].items():
            nxt = (q, s)
            if nxt not in index:
                index[nxt] = len(names)
                names.append(f"{aut.names[q]}<{s}")
                trans.append({})
                queue.append(nxt)
            trans[index[node]][s] = index[nxt]
    return GeodesicAutomaton(aut.labels, names, trans)


# ---------------------------------------------------------------------------
# verification

@dataclass
class LanguageReport:
    radius: int
    words_checked: int
    ball_size: int
    non_geodesic: list = field(default_factory=list)
    non_injective: list = field(default_factory=list)
    non_surjective: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.non_geodesic or self.non_injective or self.non_surjective)

    @property
    def violations(self) -> int:
        return len(self.non_geodesic) + len(self.non_injective) + len(self.non_surjective)

    def as_dict(self) -> dict:
        return {
            "radius": self.radius, "words_checked": self.words_checked,
            "ball_size": self.ball_size, "ok": self.ok,
            "non_geodesic": self.non_geodesic, "non_injective": self.non_injective,
            "non_surjective": self.non_surjective,
        }


def verify_geodesic_language(aut: GeodesicAutomaton, model: GroupModel,
                             radius: int, limit: int = 50) -> LanguageReport:
    """Compare accepted words up to ``radius`` against the BFS ball.

    At most ``limit`` examples of each violation are kept.
    """
    target = ball(model, radius=radius)
    report = LanguageReport(radius, 0, len(target))
    seen: dict = {}
    for word, _ in aut.accepted_words(radius):
        report.words_checked += 1
        g = model.evaluate(word)
        text = " ".join(word)
        dist = target.get(g)
        if dist != len(word):
            if len(report.non_geodesic) < limit:
                report.non_geodesic.append(
                    {"word": text, "length": len(word), "distance": dist
                     if dist is not None else model.length(g)})
        if g in seen:
            if len(report.non_injective) < limit:
                report.non_injective.append(
                    {"element": model.format(g), "words": [seen[g], text]})
        else:
            seen[g] = text
    for g in target:
        if g not in seen and len(report.non_surjective) < limit:
            report.non_surjective.append(model.format(g))
    return report


# ---------------------------------------------------------------------------
# spectral analysis

@dataclass(frozen=True)
class ComponentData:
    components: list[tuple[int, ...]]
    component_of: list[int]
    dag: frozenset
    lambdas: list[float]
    maximal: list[bool]
    periods: list[int]
    d: int


@dataclass(frozen=True)
class SpectralData:
    lam: float
    r: np.ndarray
    l: np.ndarray
    residual_r: float
    residual_l: float
    iterations: int


@dataclass(frozen=True)
class MarkovData:
    N: np.ndarray
    mu: np.ndarray
    edge_prob: list[dict[str, float]]
    dead_ends: tuple[int, ...]
    row_residual: float
    mu_residual: float


@dataclass(frozen=True)
class Analysis:
    automaton: GeodesicAutomaton
    components: ComponentData
    spectral: SpectralData
    markov: MarkovData

    @property
    def lam(self) -> float:
        return self.spectral.lam

    @property
    def d(self) -> int:
        return self.components.d


def _perron_value(a: np.ndarray, cap: int) -> float:
    """Spectral radius of an irreducible nonnegative block.

    Power iteration on ``I + A`` (primitive) squeezed between the
    Collatz-Wielandt bounds.
    """
    n = a.shape[0]
    if n == 1:
        return float(a[0, 0])
    b = a + np.eye(n)
    x = np.ones(n)
    lo = hi = 0.0
    for _ in range(cap):
        y = b @ x
        ratio = y / x
        lo, hi = ratio.min(), ratio.max()
        if hi - lo <= 1e-15 * hi:
            return float(0.5 * (lo + hi) - 1.0)
        x = y / y.max()
    raise NumericError("Perron value did not converge", hi - lo)


def _period(nodes: tuple[int, ...], succ) -> int:
    members = set(nodes)
    root = nodes[0]
    level = {root: 0}
    queue = deque([root])
    g = 0
    while queue:
        u = queue.popleft()
        for v in succ(u):
            if v not in members:
                continue
            if v not in level:
                level[v] = level[u] + 1
                queue.append(v)
            else:
                g = math.gcd(g, level[u] + 1 - level[v])
    return abs(g)


def _sccs(n: int, edge_pairs) -> tuple[int, np.ndarray]:
    rows = [p for p, _ in edge_pairs]
    cols = [q for _, q in edge_pairs]
    graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    return connected_components(graph, directed=True, connection="strong")


def component_data(aut: GeodesicAutomaton, rtol: float = MAXIMAL_RTOL,
                   cap: int = 200_000) -> ComponentData:
    m = aut.matrix()
    pairs = sorted({(p, q) for p, _, q in aut.edges()})
    _, labels = _sccs(aut.n_states, pairs)
    # renumber components by their smallest state so output is stable
    first: dict[int, int] = {}
    for p, c in enumerate(labels):
        first.setdefault(int(c), len(first))
    comp_of = [first[int(c)] for c in labels]
    comps = [tuple(p for p in range(aut.n_states) if comp_of[p] == c) for c in range(len(first))]
    dag = frozenset((comp_of[p], comp_of[q]) for p, q in pairs if comp_of[p] != comp_of[q])
    lambdas = []
    for nodes in comps:
        idx = list(nodes)
        lambdas.append(_perron_value(m[np.ix_(idx, idx)], cap))
    lam = max(lambdas)
    if lam < 1.0:
        raise NumericError("growth rate below 1: the accepted language is finite", 1.0 - lam)
    maximal = [abs(x - lam) <= rtol * lam for x in lambdas]
    succ = lambda u: aut.trans[u].values()  # noqa: E731
    periods = []
    for nodes, is_max in zip(comps, maximal):
        has_edge = any(comp_of[q] == comp_of[nodes[0]] for p in nodes for q in succ(p))
        periods.append(_period(nodes, succ) if has_edge else 0)
    d = reduce(math.lcm, [p for p, mx in zip(periods, maximal) if mx], 1)
    _check_single_maximal(len(comps), dag, maximal)
    return ComponentData(comps, comp_of, dag, lambdas, maximal, periods, d)


def _check_single_maximal(n: int, dag, maximal) -> None:
    children: dict[int, list[int]] = {}
    for a, b in dag:
        children.setdefault(a, []).append(b)
    for c in range(n):
        if not maximal[c]:
            continue
        stack = list(children.get(c, ()))
        seen = set()
        while stack:
            x = stack.pop()
            if x in seen:
                continue
            seen.add(x)
            if maximal[x]:
                raise DomainError(
                    f"maximal components {c} and {x} lie on one path of the component DAG")
            stack.extend(children.get(x, ()))


def averaged_projection(m: np.ndarray, lam: float, v: np.ndarray, window: int,
                        tol: float = 1e-13, cap: int = 200_000) -> tuple[np.ndarray, int]:
    """Cesaro limit of ``lam^-i M^i v``.

    The averages are taken over consecutive windows of ``window`` terms (a
    multiple of every maximal period) which converge to the same limit as the
    running average but geometrically fast.
    """
    u = v.astype(float)
    prev = None
    it = 0
    while it < cap:
        acc = np.zeros_like(u)
        for _ in range(window):
            acc += u
            u = (m @ u) / lam
            it += 1
        acc /= window
        if prev is not None:
            scale = max(np.abs(acc).max(), 1e-300)
            if np.abs(acc - prev).max() <= tol * scale:
                return acc, it
        prev = acc
    raise NumericError("averaged power iteration did not converge",
                       float(np.abs(acc - prev).max()))


def analyze(aut: GeodesicAutomaton, rtol: float = MAXIMAL_RTOL,
            cap: int = 200_000) -> Analysis:
    comps = component_data(aut, rtol, cap)
    m = aut.matrix()
    lam = max(comps.lambdas)
    n = aut.n_states
    r, it_r = averaged_projection(m, lam, np.ones(n), comps.d, cap=cap)
    e0 = np.zeros(n)
    e0[0] = 1.0
    l, it_l = averaged_projection(m.T, lam, e0, comps.d, cap=cap)
    r[np.abs(r) <= ZERO_RTOL * np.abs(r).max()] = 0.0
    l[np.abs(l) <= ZERO_RTOL * np.abs(l).max()] = 0.0
    r = np.maximum(r, 0.0)
    l = np.maximum(l, 0.0)
    scale_r = max(r.max(), 1.0)
    scale_l = max(l.max(), 1.0)
    res_r = float(np.abs(m @ r - lam * r).max() / scale_r)
    res_l = float(np.abs(m.T @ l - lam * l).max() / scale_l)
    spectral = SpectralData(lam, r, l, res_r, res_l, it_r + it_l)

    big_n = np.zeros((n, n))
    edge_prob: list[dict[str, float]] = []
    dead = []
    for p in range(n):
        row: dict[str, float] = {}
        if r[p] > 0:
            for s, q in aut.trans[p].items():
                w = r[q] / (lam * r[p])
                row[s] = w
                big_n[p, q] += w
        else:
            big_n[p, p] = 1.0
            dead.append(p)
        edge_prob.append(row)
    mass = r * l
    if mass.sum() <= 0:
        raise NumericError("stationary weights vanish", float(mass.sum()))
    mu = mass / mass.sum()
    row_res = float(np.abs(big_n.sum(axis=1) - 1.0).max())
    mu_res = float(np.abs(mu @ big_n - mu).max())
    markov = MarkovData(big_n, mu, edge_prob, tuple(dead), row_res, mu_res)
    return Analysis(aut, comps, spectral, markov)


# ---------------------------------------------------------------------------
# cone measure and counting

def accepted_word(aut: GeodesicAutomaton, model: GroupModel, g) -> list[str]:
    """The accepted word evaluating to ``g`` (depth-first, distance pruned)."""
    n = model.length(g)
    stack = [(0, model.identity, [])]
    while stack:
        p, x, word = stack.pop()
        if len(word) == n:
            if x == g:
                return word
            continue
        remaining = n - len(word)
        options = []
        for s, q in aut.trans[p].items():
            y = model.multiply(x, s)
            if model.distance(y, g) == remaining - 1:
                options.append((q, y, word + [s]))
        stack.extend(reversed(options))
    raise DomainError(f"{model.format(g)} has no accepted representative")


def cone_measure(analysis: Analysis, model: GroupModel, g) -> float:
    """Boundary measure of the cone of ``g``: product of transition weights."""
    aut = analysis.automaton
    p = 0
    value = 1.0
    for s in accepted_word(aut, model, g):
        value *= analysis.markov.edge_prob[p].get(s, 0.0)
        p = aut.trans[p][s]
    return value


def cone_children(analysis: Analysis, model: GroupModel, g) -> list[tuple[object, float]]:
    aut = analysis.automaton
    word = accepted_word(aut, model, g)
    p = aut.run(word)
    out = []
    for s in aut.trans[p]:
        h = model.multiply(g, s)
        out.append((h, cone_measure(analysis, model, h)))
    return out


def uniform_comparability(analysis: Analysis, model: GroupModel, n: int, C: int,
                          samples: int | None = None, seed: int = 0) -> dict:
    """Uniform share of ``N_C(g) ∩ G_n`` against its cone-measure share.

    Reports the extreme ratios over the sampled ``g`` in the sphere; no
    comparability constant is asserted.
    """
    shell = sorted(sphere(model, n), key=model.key)
    nu = {h: cone_measure(analysis, model, h) for h in shell}
    total = math.fsum(nu.values())
    centers = shell
    if samples is not None and samples < len(shell):
        rng = np.random.default_rng(seed)
        centers = [shell[i] for i in sorted(rng.choice(len(shell), samples, replace=False))]
    ratios = []
    for g in centers:
        near = [h for h, d in ball(model, g, C).items() if model.length(h) == n]
        uniform = len(near) / len(shell)
        mass = math.fsum(nu[h] for h in near) / total
        ratios.append(uniform / mass if mass > 0 else math.inf)
    return {"n": n, "C": C, "sphere": len(shell), "centers": len(centers),
            "min_ratio": min(ratios), "max_ratio": max(ratios)}


def sphere_count(aut: GeodesicAutomaton, n: int) -> int:
    """Number of accepted words of length ``n`` in exact integer arithmetic."""
    if n < 0:
        raise DomainError("n must be nonnegative")
    vec = {0: 1}
    for _ in range(n):
        nxt: dict[int, int] = {}
        for p, c in vec.items():
            for q in aut.trans[p].values():
                nxt[q] = nxt.get(q, 0) + c
        vec = nxt
    return sum(vec.values())


def growth_check(aut: GeodesicAutomaton, n_max: int, lam: float | None = None) -> dict:
    if lam is None:
        lam = max(component_data(aut).lambdas)
    ratios = []
    vec = {0: 1}
    for n in range(n_max + 1):
        count = sum(vec.values())
        ratios.append(math.exp(math.log(count) - n * math.log(lam)) if count else 0.0)
        nxt: dict[int, int] = {}
        for p, c in vec.items():
            for q in aut.trans[p].values():
                nxt[q] = nxt.get(q, 0) + c
        vec = nxt
    return {"lambda": lam, "n_max": n_max, "sup": max(ratios), "inf": min(ratios),
            "ratios": ratios}


# ---------------------------------------------------------------------------
# block chains and frequencies

def gth_stationary(p: np.ndarray) -> np.ndarray:
    """Stationary vector of an irreducible row-stochastic matrix (GTH elimination)."""
    a = np.array(p, dtype=float)
    n = a.shape[0]
    for k in range(n - 1, 0, -1):
        s = a[k, :k].sum()
        if s <= 0:
            raise NumericError("chain is not irreducible", 0.0)
        a[:k, k] /= s
        a[:k, :k] += np.outer(a[:k, k], a[k, :k])
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = pi[:k] @ a[:k, k]
    return pi / pi.sum()


@dataclass(frozen=True)
class BlockChain:
    k: int
    start: int
    tuples: list[tuple[int, ...]]
    index: dict
    P: np.ndarray
    initial: np.ndarray
    classes: list[list[int]]
    periods: list[int]
    stationary: list[np.ndarray]
    reachable_classes: list[int]
    residual: float

    def spelling(self, aut: GeodesicAutomaton, t: int) -> tuple[str, ...]:
        inc = aut.incoming_labels()
        return tuple(next(iter(inc[q])) for q in self.tuples[t])


def k_tuple_chain(analysis: Analysis, k: int, start: int = 0) -> BlockChain:
    """Chain on consecutive length-``k`` blocks of states, started at ``start``."""
    if k < 1 or k % analysis.d:
        raise DomainError(f"block length {k} must be a positive multiple of d={analysis.d}")
    aut = analysis.automaton
    if not aut.label_determined:
        raise DomainError("automaton is not label-determined; use refine_by_incoming_label")
    big_n = analysis.markov.N

    def blocks_from(p: int):
        # yields (tuple, probability) for the next k states after p
        frontier = [((), p, 1.0)]
        for _ in range(k):
            nxt = []
            for t, u, w in frontier:
                for q in np.nonzero(big_n[u])[0]:
                    nxt.append((t + (int(q),), int(q), w * big_n[u, q]))
            frontier = nxt
        return [(t, w) for t, _, w in frontier]

    index: dict = {}
    tuples: list[tuple[int, ...]] = []
    rows: dict[int, list[tuple[tuple, float]]] = {}
    first = blocks_from(start)
    queue = deque()
    for t, _ in first:
        if t not in index:
            index[t] = len(tuples)
            tuples.append(t)
            queue.append(t)
    while queue:
        t = queue.popleft()
        out = blocks_from(t[-1])
        rows[index[t]] = out
        for u, _ in out:
            if u not in index:
                index[u] = len(tuples)
                tuples.append(u)
                queue.append(u)
    size = len(tuples)
    P = np.zeros((size, size))
    for i, out in rows.items():
        for u, w in out:
            P[i, index[u]] += w
    init = np.zeros(size)
    for t, w in first:
        init[index[t]] += w

    pairs = [(int(i), int(j)) for i, j in zip(*np.nonzero(P))]
    _, lab = _sccs(size, pairs)
    comp_members: dict[int, list[int]] = {}
    for i, c in enumerate(lab):
        comp_members.setdefault(int(c), []).append(i)
    closed = []
    for c, members in sorted(comp_members.items(), key=lambda kv: kv[1][0]):
        mset = set(members)
        if all(j in mset for i in members for j in np.nonzero(P[i])[0]):
            closed.append(members)
    succ = lambda u: np.nonzero(P[u])[0]  # noqa: E731
    periods = [_period(tuple(c), succ) for c in closed]
    bad = [p for p in periods if p != 1]
    if bad:
        raise DomainError(f"recurrent block classes have periods {bad}")
    stationary = []
    residual = 0.0
    for members in closed:
        sub = P[np.ix_(members, members)]
        pi = gth_stationary(sub)
        residual = max(residual, float(np.abs(pi @ sub - pi).max()))
        stationary.append(pi)
    if residual > 1e-12:
        raise NumericError("stationary solve inaccurate", residual)
    # which classes the chain can enter from the start block distribution
    seen = set(np.nonzero(init)[0].tolist())
    stack = list(seen)
    while stack:
        i = stack.pop()
        for j in np.nonzero(P[i])[0]:
            if int(j) not in seen:
                seen.add(int(j))
                stack.append(int(j))
    reach = [c for c, members in enumerate(closed) if members[0] in seen]
    return BlockChain(k, start, tuples, index, P, init, closed, periods,
                      stationary, reach, residual)


def predicted_frequency(analysis: Analysis, word, start: int = 0,
                        chain: BlockChain | None = None) -> float:
    """Limiting share of aligned length-|word| blocks equal to ``word``."""
    word = tuple(word)
    if not word or len(word) % analysis.d:
        raise DomainError(f"word length must be a positive multiple of d={analysis.d}")
    if chain is None or chain.k != len(word) or chain.start != start:
        chain = k_tuple_chain(analysis, len(word), start)
    if len(chain.reachable_classes) > 1:
        raise DomainError(
            "several recurrent block classes are reachable from the start state; "
            "the limit frequency is random; pass a start state inside one class")
    if not chain.reachable_classes:
        return 0.0
    c = chain.reachable_classes[0]
    members = chain.classes[c]
    pi = chain.stationary[c]
    aut = analysis.automaton
    return float(sum(pi[j] for j, t in enumerate(members)
                     if chain.spelling(aut, t) == word))


def sample_ray(analysis: Analysis, seed: int, n: int, start: int = 0) -> list[str]:
    """Length-``n`` accepted word drawn from the induced Markov chain."""
    if n < 0:
        raise DomainError("n must be nonnegative")
    aut = analysis.automaton
    rng = np.random.default_rng(seed)
    tables = []
    for p in range(aut.n_states):
        probs = analysis.markov.edge_prob[p]
        labs = list(probs)
        cum = np.cumsum([probs[s] for s in labs])
        tables.append((labs, cum))
    u = rng.random(n)
    word = []
    p = start
    for i in range(n):
        labs, cum = tables[p]
        if not labs:
            raise SamplingError(f"dead-end state {aut.names[p]!r} reached after {i} steps")
        j = int(np.searchsorted(cum, u[i] * cum[-1], side="right"))
        s = labs[min(j, len(labs) - 1)]
        word.append(s)
        p = aut.trans[p][s]
    return word


def block_frequencies(word, k: int) -> dict[tuple[str, ...], float]:
    """Empirical share of aligned length-``k`` blocks."""
    blocks = len(word) // k
    counts: dict[tuple[str, ...], int] = {}
    for i in range(blocks):
        b = tuple(word[i * k:(i + 1) * k])
        counts[b] = counts.get(b, 0) + 1
    return {b: c / blocks for b, c in counts.items()} if blocks else {}


# ---------------------------------------------------------------------------
# directions

@dataclass(frozen=True)
class DirectionSpec:
    """A geodesic ray from the identity given by a label word.

    ``pole``: ``period`` repeated forever; ``eventually-periodic``: ``prefix``
    then ``period`` forever; ``explicit``: the finite word ``prefix``.
    """

    kind: str
    prefix: tuple[str, ...] = ()
    period: tuple[str, ...] = ()

    @classmethod
    def pole(cls, word) -> "DirectionSpec":
        return cls("pole", (), tuple(word))

    @classmethod
    def eventually_periodic(cls, prefix, period) -> "DirectionSpec":
        return cls("eventually-periodic", tuple(prefix), tuple(period))

    @classmethod
    def explicit(cls, word) -> "DirectionSpec":
        return cls("explicit", tuple(word), ())

    @classmethod
    def parse(cls, text: str, model: GroupModel) -> "DirectionSpec":
        """``pole:w``, ``periodic:u|w``, ``explicit:w`` or a bare word (pole)."""
        kind, _, body = text.strip().partition(":")
        if not body:
            kind, body = "pole", kind
        tok = model.generators.tokenize
        if kind == "pole":
            return cls.pole(tok(body))
        if kind in ("periodic", "eventually-periodic"):
            u, _, w = body.partition("|")
            return cls.eventually_periodic(tok(u), tok(w))
        if kind == "explicit":
            return cls.explicit(tok(body))
        raise DomainError(f"unknown direction kind {kind!r}")

    def __post_init__(self):
        if self.kind in ("pole", "eventually-periodic") and not self.period:
            raise DomainError("periodic directions need a nonempty period")

    def label(self) -> str:
        if self.kind == "pole":
            return "pole:" + "".join(self.period)
        if self.kind == "explicit":
            return "explicit:" + "".join(self.prefix)
        return f"periodic:{''.join(self.prefix)}|{''.join(self.period)}"

    def ray_word(self, n: int) -> list[str]:
        if self.kind == "explicit":
            if n > len(self.prefix):
                raise DomainError(f"explicit direction has only {len(self.prefix)} letters")
            return list(self.prefix[:n])
        out = list(self.prefix[:n])
        while len(out) < n:
            out.extend(self.period[: n - len(out)])
        return out

    def ray_points(self, model: GroupModel, n: int) -> list:
        pts = [model.identity]
        for s in self.ray_word(n):
            pts.append(model.multiply(pts[-1], s))
        return pts

    def check(self, aut: GeodesicAutomaton) -> None:
        """Raise unless every finite prefix of the ray is accepted."""
        p = aut.run(self.prefix)
        if p is None:
            raise DomainError(f"direction {self.label()} leaves the geodesic language")
        if self.kind == "explicit":
            return
        seen = set()
        while p not in seen:
            seen.add(p)
            p = aut.run(self.period, start=p)
            if p is None:
                raise DomainError(f"direction {self.label()} leaves the geodesic language")
