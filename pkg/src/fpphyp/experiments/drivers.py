"""Monte Carlo drivers.

Each experiment kind provides three pieces:

* ``prepare(cfg, ctx)`` runs once in the parent before the manifest is
  written and returns plain data shared by all replications (sampled
  directions, predictions, pilot-calibrated gates);
* ``replicate(cfg, prep, i)`` is a pure function of the config, that shared
  data and the replication index, and returns that replication's records;
* ``summarize(cfg, prep, records)`` returns ``(summary, gates)`` where gates
  map a name to a pass flag.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import product as cartesian
from typing import Callable

import numpy as np
from scipy import integrate, stats

from ..combing import (DirectionSpec, analyze, builtin_automaton, block_frequencies,
                       k_tuple_chain, predicted_frequency, sample_ray)
from ..environment import Environment, WeightDistribution, derive_seed
from ..errors import ConfigError, DomainError
from ..geometry import (delta_estimate, gromov_product, nesting_threshold, project_to_ray,
                        working_ray)
from ..groups import Budget, CyclicModel, FreeModel, ball, word_geodesic
from ..metric import (BallDomain, CylinderDomain, passage_time, passage_times)
from .stats import (bootstrap_var_ci, is_nondecreasing, is_nonincreasing, linear_fit,
                    log_slope, mean_se, origin_fit, unbiased_var, var_se)

MONO_RTOL = 1e-12


# ---------------------------------------------------------------------------
# per-process context

class Context:
    def __init__(self, cfg):
        self.cfg = cfg
        self.model = cfg.build_model()
        self.dist = cfg.build_distribution()
        self._analysis = None

    @property
    def automaton(self):
        return builtin_automaton(self.model)

    @property
    def analysis(self):
        if self._analysis is None:
            self._analysis = analyze(self.automaton)
        return self._analysis

    def env(self, tag: str, i: int, model=None) -> Environment:
        return Environment(model or self.model, derive_seed(self.cfg.seed, tag, i),
                           self.dist, cache={})

    def budget(self) -> Budget:
        return Budget(self.cfg.budget_relaxations)


_CONTEXTS: dict[str, Context] = {}


def context(cfg) -> Context:
    key = json.dumps(cfg.to_dict(), sort_keys=True)
    ctx = _CONTEXTS.get(key)
    if ctx is None:
        if len(_CONTEXTS) > 16:
            _CONTEXTS.clear()
        ctx = _CONTEXTS[key] = Context(cfg)
    return ctx


def _directions(cfg, ctx, prep) -> list[DirectionSpec]:
    return [DirectionSpec.parse(d, ctx.model) for d in prep["directions"]]


def _checked_directions(cfg, ctx, n_max: int, sampled: int = 0) -> list[str]:
    out = []
    for spec in cfg.build_directions(ctx.model):
        spec.check(ctx.automaton)
        out.append(spec.label())
    for j in range(sampled):
        word = sample_ray(ctx.analysis, derive_seed(cfg.seed, "direction", j), n_max)
        out.append(DirectionSpec.explicit(word).label())
    if not out:
        raise ConfigError("[experiment] directions: at least one direction is required")
    return out


def _grid(cfg) -> list[int]:
    if not cfg.n_grid:
        raise ConfigError("[experiment] n_grid is required")
    return list(cfg.n_grid)


def _times_along(cfg, ctx, env, spec: DirectionSpec, ns: list[int]) -> list:
    """Passage results from the identity to ``x_n`` for each n in ``ns``."""
    model = ctx.model
    n_max = max(ns)
    pts = spec.ray_points(model, n_max)
    mode = cfg.get("domain", "ball")
    prune = cfg.get("prune", True, bool)
    if mode == "cylinder":
        width = cfg.get("B", 3, int)
        return [passage_time(env, pts[0], pts[n], CylinderDomain(model, pts[: n + 1], width),
                             prune, ctx.budget()) for n in ns]
    if mode != "ball":
        raise ConfigError(f"[experiment] domain: unknown domain {mode!r}")
    factor = cfg.get("ball_factor", 2, int)
    dom = BallDomain(model, pts[0], factor * n_max + 2)
    targets = [pts[n] for n in ns]
    res = passage_times(env, pts[0], targets, dom, prune, ctx.budget())
    return res


# ---------------------------------------------------------------------------
# shared replicate: passage times along directions

TIMES_FIELDS = ["replication", "direction", "n", "time", "edges", "near_ties"]


def _prepare_times(cfg, ctx) -> dict:
    ns = _grid(cfg)
    return {"directions": _checked_directions(cfg, ctx, max(ns),
                                              cfg.get("sampled_directions", 0, int))}


def _replicate_times(cfg, prep, i) -> list[dict]:
    ctx = context(cfg)
    env = ctx.env("rep", i)
    ns = _grid(cfg)
    out = []
    for label, spec in zip(prep["directions"], _directions(cfg, ctx, prep)):
        for n, res in zip(ns, _times_along(cfg, ctx, env, spec, ns)):
            out.append({"replication": i, "direction": label, "n": n, "time": res.time,
                        "edges": res.edges, "near_ties": res.near_ties})
    return out


def _by(records, *keys) -> dict:
    out: dict = {}
    for r in records:
        out.setdefault(tuple(r[k] for k in keys), []).append(r)
    return out


# ---------------------------------------------------------------------------
# velocity

def _summarize_velocity(cfg, prep, records):
    ctx = context(cfg)
    groups = _by(records, "direction", "n")
    per_dir: dict = {}
    for label in prep["directions"]:
        rows = []
        for n in _grid(cfg):
            if n == 0:
                continue
            est, se = mean_se([r["time"] / n for r in groups[(label, n)]])
            rows.append({"n": n, "estimate": est, "se": se,
                         "ci95": [est - 1.96 * se, est + 1.96 * se]})
        diffs = [abs(b["estimate"] - a["estimate"]) for a, b in zip(rows, rows[1:])]
        per_dir[label] = {"by_n": rows, "successive_differences": diffs,
                          "cauchy_tail": max(diffs[-2:]) if diffs else None}
    finals = {k: v["by_n"][-1] for k, v in per_dir.items()}
    ests = [f["estimate"] for f in finals.values()]
    ses = [f["se"] for f in finals.values()]
    summary = {
        "mean_weight": ctx.dist.mean,
        "beyond_sub_gaussian": not ctx.dist.sub_gaussian,
        "directions": per_dir,
        "comparison": {
            "spread": max(ests) - min(ests),
            "max_se": max(ses),
            "consistent_within_3se": (max(ests) - min(ests)) <= 3 * math.sqrt(2) * max(ses),
            "note": "agreement over finitely many sampled directions is evidence only",
        },
    }
    gates = {}
    expect = cfg.get("expect_velocity", None, float)
    if expect is not None:
        for label, f in finals.items():
            gates[f"velocity_within_3se[{label}]"] = abs(f["estimate"] - expect) <= 3 * f["se"]
    return summary, gates


# ---------------------------------------------------------------------------
# B-velocity

B_FIELDS = ["replication", "direction", "n", "B", "time_B", "time_ball", "edges_B"]


def _prepare_bvel(cfg, ctx):
    if not cfg.b_grid:
        raise ConfigError("[experiment] b_grid is required")
    return {"directions": _checked_directions(cfg, ctx, max(_grid(cfg)))}


def _replicate_bvel(cfg, prep, i):
    ctx = context(cfg)
    model = ctx.model
    env = ctx.env("rep", i)
    ns = _grid(cfg)
    n_max = max(ns)
    factor = cfg.get("ball_factor", 2, int)
    radius = max(factor * n_max + 2, n_max + max(cfg.b_grid))
    out = []
    for label, spec in zip(prep["directions"], _directions(cfg, ctx, prep)):
        pts = spec.ray_points(model, n_max)
        whole = passage_times(env, pts[0], [pts[n] for n in ns],
                              BallDomain(model, pts[0], radius), True, ctx.budget())
        for n, full in zip(ns, whole):
            for B in cfg.b_grid:
                res = passage_time(env, pts[0], pts[n], CylinderDomain(model, pts[: n + 1], B),
                                   True, ctx.budget())
                out.append({"replication": i, "direction": label, "n": n, "B": B,
                            "time_B": res.time, "time_ball": full.time, "edges_B": res.edges})
    return out


def _summarize_bvel(cfg, prep, records):
    eps = cfg.get("epsilon", 0.05, float)
    gate_b = cfg.get("gate_B", max(cfg.b_grid), int)
    max_fraction = cfg.get("max_fraction", None, float)
    ns = [n for n in _grid(cfg) if n > 0]
    monotone_b = True
    above_ball = True
    for (_, _, _), rows in _by(records, "replication", "direction", "n").items():
        rows = sorted(rows, key=lambda r: r["B"])
        tb = [r["time_B"] for r in rows]
        if not is_nonincreasing(tb, MONO_RTOL * max(tb)):
            monotone_b = False
        if any(t < r["time_ball"] * (1 - MONO_RTOL) for t, r in zip(tb, rows)):
            above_ball = False
    per = {}
    groups = _by(records, "direction", "B", "n")
    fractions: dict = {}
    for label in prep["directions"]:
        curves = {}
        for B in cfg.b_grid:
            rows_out = []
            for n in ns:
                rs = groups[(label, B, n)]
                est, se = mean_se([r["time_B"] / n for r in rs])
                ball_est, _ = mean_se([r["time_ball"] / n for r in rs])
                frac = float(np.mean([r["time_B"] >= r["time_ball"] + eps * n for r in rs]))
                fractions[(label, B, n)] = frac
                rows_out.append({"n": n, "velocity_B": est, "se": se,
                                 "velocity_ball": ball_est, "gap": est - ball_est,
                                 "fraction_gap_ge_eps_n": frac})
            curves[str(B)] = rows_out
        per[label] = curves
    summary = {"epsilon": eps, "curves": per, "monotone_in_B": monotone_b,
               "restricted_above_ball": above_ball}
    gates = {"monotone_in_B": monotone_b, "restricted_above_ball": above_ball}
    for label in prep["directions"]:
        fr = [fractions[(label, gate_b, n)] for n in ns]
        gates[f"fraction_nonincreasing[{label},B={gate_b}]"] = is_nonincreasing(fr)
        if max_fraction is not None:
            gates[f"fraction_at_max_n<={max_fraction}[{label},B={gate_b}]"] = fr[-1] <= max_fraction
    return summary, gates


# ---------------------------------------------------------------------------
# coarse-grained velocity

CG_FIELDS = ["replication", "item", "key", "time"]


def _prepare_cg(cfg, ctx):
    an = ctx.analysis
    k = cfg.get("scale", 2, int)
    if k % an.d:
        raise DomainError(f"scale {k} is not a multiple of the automaton period d={an.d}")
    blocks = cfg.get("blocks", 50, int)
    if cfg.directions:
        spec = cfg.build_directions(ctx.model)[0]
        spec.check(ctx.automaton)
        ray = spec.ray_word(blocks * k)
    else:
        ray = sample_ray(an, derive_seed(cfg.seed, "direction", 0), blocks * k)
    counts: dict = {}
    for j in range(blocks):
        w = tuple(ray[j * k:(j + 1) * k])
        counts[w] = counts.get(w, 0) + 1
    stationary: dict = {}
    try:
        chain = k_tuple_chain(an, k)
    except DomainError:
        chain = None
    if chain is not None and len(chain.reachable_classes) == 1:
        c = chain.reachable_classes[0]
        for j, t in enumerate(chain.classes[c]):
            w = chain.spelling(an.automaton, t)
            stationary[w] = stationary.get(w, 0.0) + float(chain.stationary[c][j])
    words = sorted(set(counts) | {w for w, f in stationary.items() if f > 0})
    return {"ray": list(ray), "scale": k, "blocks": blocks,
            "words": [list(w) for w in words],
            "freqs": [counts.get(w, 0) / blocks for w in words],
            "stationary": [stationary.get(w, 0.0) for w in words] if stationary else None}


def _replicate_cg(cfg, prep, i):
    ctx = context(cfg)
    model = ctx.model
    env = ctx.env("rep", i)
    B = cfg.get("B", 2, int)
    k = prep["scale"]
    ray = prep["ray"]
    pts = [model.identity]
    for s in ray:
        pts.append(model.multiply(pts[-1], s))
    out = []
    for j in range(prep["blocks"]):
        seg = pts[j * k:(j + 1) * k + 1]
        res = passage_time(env, seg[0], seg[-1], CylinderDomain(model, seg, B), True, ctx.budget())
        out.append({"replication": i, "item": "segment", "key": str(j), "time": res.time})
    wenv = ctx.env("word", i)
    for w in prep["words"]:
        seg = [model.identity]
        for s in w:
            seg.append(model.multiply(seg[-1], s))
        res = passage_time(wenv, seg[0], seg[-1], CylinderDomain(model, seg, B), True, ctx.budget())
        out.append({"replication": i, "item": "word", "key": "".join(w), "time": res.time})
    return out


def _summarize_cg(cfg, prep, records):
    m = prep["blocks"]
    segs = _by([r for r in records if r["item"] == "segment"], "replication")
    running = np.zeros(m)
    per_rep = []
    for _, rows in sorted(segs.items()):
        t = np.array([r["time"] for r in sorted(rows, key=lambda r: int(r["key"]))])
        running += np.cumsum(t) / np.arange(1, m + 1)
        per_rep.append(t.mean())
    running /= len(segs)
    est, se = mean_se(per_rep)
    words = _by([r for r in records if r["item"] == "word"], "key")
    word_means = [mean_se([r["time"] for r in words[("".join(w),)]]) for w in prep["words"]]

    def weighted(freqs):
        pred = sum(f * mu_w for f, (mu_w, _) in zip(freqs, word_means))
        return pred, math.sqrt(sum((f * se_w) ** 2 for f, (_, se_w) in zip(freqs, word_means)))

    pred, pred_se = weighted(prep["freqs"])
    jumps = np.abs(np.diff(running)) * np.arange(1, m)
    summary = {"scale": prep["scale"], "blocks": m, "cesaro_final": est, "se": se,
               "predicted": pred, "predicted_se": pred_se, "running_average": running.tolist(),
               "max_scaled_increment": float(jumps.max()) if jumps.size else 0.0}
    if prep["stationary"] is not None:
        summary["stationary_predicted"], summary["stationary_predicted_se"] = \
            weighted(prep["stationary"])
    tol = 2 * math.sqrt(se ** 2 + pred_se ** 2)
    return summary, {"cesaro_matches_prediction_2se": abs(est - pred) <= tol}


# ---------------------------------------------------------------------------
# frequency

FREQ_FIELDS = ["replication", "word", "blocks", "count", "frequency"]


def _expand_words(cfg, ctx) -> list[tuple[str, ...]]:
    raw = cfg.get("words", "all:2")
    d = ctx.analysis.d
    out: list[tuple[str, ...]] = []
    for item in raw.split(","):
        item = item.strip()
        if not item:
            continue
        if item.startswith("all:"):
            kmax = int(item[4:])
            for k in range(1, kmax + 1):
                if k % d == 0:
                    out.extend(cartesian(ctx.model.generators.labels, repeat=k))
        else:
            out.append(tuple(ctx.model.generators.tokenize(item)))
    return out


def _prepare_freq(cfg, ctx):
    an = ctx.analysis
    start = cfg.get("start_state", 0, int)
    words = _expand_words(cfg, ctx)
    chains: dict = {}
    preds = []
    for w in words:
        k = len(w)
        if k not in chains:
            chains[k] = k_tuple_chain(an, k, start)
        preds.append(predicted_frequency(an, w, start, chains[k]))
    return {"words": [list(w) for w in words], "predicted": preds, "start": start}


def _replicate_freq(cfg, prep, i):
    ctx = context(cfg)
    length = cfg.get("length", 100000, int)
    ray = sample_ray(ctx.analysis, derive_seed(cfg.seed, "ray", i), length, prep["start"])
    tables: dict = {}
    out = []
    for w in prep["words"]:
        k = len(w)
        if k not in tables:
            tables[k] = block_frequencies(ray, k)
        blocks = length // k
        f = tables[k].get(tuple(w), 0.0)
        out.append({"replication": i, "word": " ".join(w), "blocks": blocks,
                    "count": int(round(f * blocks)), "frequency": f})
    return out


def _summarize_freq(cfg, prep, records):
    tol = cfg.get("tolerance", 0.02, float)
    groups = _by(records, "word")
    rows = []
    ok = True
    for w, pred in zip(prep["words"], prep["predicted"]):
        rs = groups[(" ".join(w),)]
        emp, se = mean_se([r["frequency"] for r in rs])
        if len(rs) == 1:
            se = math.sqrt(max(emp * (1 - emp), 0.0) / rs[0]["blocks"])
        err = abs(emp - pred)
        ok &= err <= tol
        rows.append({"word": " ".join(w), "empirical": emp, "se": se, "predicted": pred,
                     "abs_error": err, "within_3se": err <= 3 * se if se > 0 else err == 0})
    return {"tolerance": tol, "words": rows}, {f"all_within_{tol}": ok}


# ---------------------------------------------------------------------------
# direction

DIR_FIELDS = ["replication", "n", "kappa", "tail_min_product", "r_omega", "word_through_c",
              "edges"]


def _prepare_dir(cfg, ctx):
    n_max = max(_grid(cfg))
    labels = _checked_directions(cfg, ctx, n_max)
    if len(labels) == 1:
        spec = DirectionSpec.parse(labels[0], ctx.model)
        if spec.kind != "pole":
            raise ConfigError("[experiment] directions: give two directions or one pole")
        inv = ctx.model.generators.inverse
        opposite = DirectionSpec.pole([inv[s] for s in reversed(spec.period)])
        opposite.check(ctx.automaton)
        labels.append(opposite.label())
    return {"directions": labels[:2]}


def _replicate_dir(cfg, prep, i):
    ctx = context(cfg)
    model = ctx.model
    env = ctx.env("rep", i)
    C = cfg.get("C", 2, int)
    o = model.identity
    fwd, back = _directions(cfg, ctx, prep)
    out = []
    for n in _grid(cfg):
        x = fwd.ray_points(model, n)[-1]
        y = back.ray_points(model, n)[-1]
        path = passage_time(env, o, x, None, True, ctx.budget()).path
        L = len(path) - 1
        kappa = 0.0
        tail = math.inf
        for m in range(L + 1):
            for m2 in range(m + 1, L + 1):
                g = gromov_product(model, path[m], path[m2], o)
                kappa = max(kappa, m - g)
                if m >= L // 2:
                    tail = min(tail, g)
        through = min(model.distance(v, o) for v in word_geodesic(model, x, y)) <= C
        res = passage_time(env, x, y, None, True, ctx.budget())
        r_omega = min(model.distance(v, o) for v in res.path)
        out.append({"replication": i, "n": n, "kappa": kappa,
                    "tail_min_product": tail if math.isfinite(tail) else None,
                    "r_omega": r_omega, "word_through_c": through, "edges": L})
    return out


def _summarize_dir(cfg, prep, records):
    rows = []
    for n in _grid(cfg):
        rs = [r for r in records if r["n"] == n]
        r_om = np.array([r["r_omega"] for r in rs if r["word_through_c"]])
        rows.append({
            "n": n, "kappa_max": max(r["kappa"] for r in rs),
            "r_omega_max": int(r_om.max()) if r_om.size else None,
            "r_omega_median": float(np.median(r_om)) if r_om.size else None,
            "r_omega_q90": float(np.quantile(r_om, 0.9)) if r_om.size else None,
            "pairs_through_c": int(r_om.size),
        })
    gates = {}
    expect = cfg.get("expect_kappa", None, float)
    if expect is not None:
        gates["kappa_at_most_expected"] = all(r["kappa_max"] <= expect for r in rows)
    return {"directions": prep["directions"], "by_n": rows}, gates


# ---------------------------------------------------------------------------
# coalescence

COAL_FIELDS = ["replication", "n", "coalesced", "common_index", "suffix_match",
               "blocks_3d5", "blocks_total"]


def _coalescence_rep(cfg, prep, i, tag):
    ctx = context(cfg)
    model = ctx.model
    env = ctx.env(tag, i)
    o1 = model.parse(cfg.get("o1", "1"))
    o2 = model.parse(cfg.get("o2", "1"))
    ns = _grid(cfg)
    big_n = max(ns) + cfg.get("tail", 10, int)
    D = cfg.get("D", 5, int)
    spec = _directions(cfg, ctx, prep)[0]
    pts = spec.ray_points(model, big_n)
    p1 = passage_time(env, o1, pts[-1], None, True, ctx.budget()).path
    p2 = passage_time(env, o2, pts[-1], None, True, ctx.budget()).path
    pos2 = {v: j for j, v in enumerate(p2)}
    common = next(((j, v) for j, v in enumerate(p1) if v in pos2), None)
    if common is None:
        idx, suffix = None, False
    else:
        j1, v = common
        idx = min(project_to_ray(model, v, pts))
        suffix = p1[j1:] == p2[pos2[v]:]
    shared = ({frozenset(e) for e in zip(p1, p1[1:])}
              & {frozenset(e) for e in zip(p2, p2[1:])})
    counts: dict[int, int] = {}
    for e in shared:
        u = min(e, key=model.key)
        b = min(project_to_ray(model, u, pts)) // D
        counts[b] = counts.get(b, 0) + 1
    total = big_n // D
    good = sum(1 for b in range(total) if counts.get(b, 0) >= 3 * D / 5)
    return [{"replication": i, "n": n,
             "coalesced": common is not None and suffix and idx <= n,
             "common_index": idx, "suffix_match": suffix,
             "blocks_3d5": good, "blocks_total": total} for n in ns]


def _prepare_coal(cfg, ctx):
    prep = {"directions": _checked_directions(cfg, ctx, max(_grid(cfg)))[:1]}
    reps = cfg.get("pilot_replications", min(50, cfg.replications), int)
    target = cfg.get("gate_target", 0.95, float)
    n_max = max(_grid(cfg))
    hits = []
    for i in range(reps):
        rows = _coalescence_rep(cfg, prep, i, "pilot")
        hits.append(next(r for r in rows if r["n"] == n_max)["coalesced"])
    p = float(np.mean(hits))
    se = math.sqrt(p * (1 - p) / reps)
    prep["pilot"] = {"replications": reps, "fraction": p, "se": se,
                     "gate": min(target, p - 3 * se), "target": target}
    radius = cfg.get("geometry_radius", 7, int)
    if radius > 0:
        prep["geometry"] = _hyperplane_report(ctx, prep["directions"][0], radius)
    return prep


def _hyperplane_report(ctx, label: str, radius: int) -> dict:
    """Empirical thinness and hyperplane nesting gap along the coalescence ray."""
    model = ctx.model
    delta = delta_estimate(model, min(radius, 3)).delta
    spec = DirectionSpec.parse(label, model)
    ray = working_ray(model, spec, radius)
    members = ball(model, radius=radius)
    # the base point and every candidate partner must lie inside the ball
    max_gap = min(2 * math.ceil(2 * delta) + 2, radius - 1)
    nest = nesting_threshold(model, ray, members, [1], max_gap, delta)
    return {"radius": radius, "delta": delta, "nesting_threshold": nest["threshold"]}


def _replicate_coal(cfg, prep, i):
    return _coalescence_rep(cfg, prep, i, "rep")


def _summarize_coal(cfg, prep, records):
    ns = _grid(cfg)
    fr = []
    rows = []
    for n in ns:
        rs = [r for r in records if r["n"] == n]
        f = float(np.mean([r["coalesced"] for r in rs]))
        fr.append(f)
        rows.append({"n": n, "fraction": f, "se": math.sqrt(f * (1 - f) / len(rs)),
                     "suffix_match_rate": float(np.mean([r["suffix_match"] for r in rs]))})
    summary = {"by_n": rows, "pilot": prep["pilot"], "geometry": prep.get("geometry")}
    if context(cfg).dist.kind == "bounded-away":
        last = [r for r in records if r["n"] == ns[-1]]
        summary["blocks_3d5_mean_share"] = float(np.mean(
            [r["blocks_3d5"] / r["blocks_total"] for r in last if r["blocks_total"]]))
    gates = {"fraction_nondecreasing": is_nondecreasing(fr),
             "fraction_at_max_n_ge_pilot_gate": fr[-1] >= prep["pilot"]["gate"]}
    return summary, gates


# ---------------------------------------------------------------------------
# variance

def _summarize_var(cfg, prep, records):
    label = prep["directions"][0]
    ns = [n for n in _grid(cfg) if n > 0]
    rng = np.random.default_rng(derive_seed(cfg.seed, "bootstrap", 0))
    groups = _by(records, "direction", "n")
    rows = []
    for n in ns:
        t = [r["time"] for r in groups[(label, n)]]
        e = [r["edges"] for r in groups[(label, n)]]
        v = unbiased_var(t)
        lo, hi = bootstrap_var_ci(t, rng, cfg.get("bootstrap", 1000, int))
        rows.append({"n": n, "var": v, "var_se": var_se(t), "ci95": [lo, hi],
                     "var_over_n": v / n, "mean_edges": float(np.mean(e))})
    fit = linear_fit(ns, [r["var"] for r in rows]) if len(ns) >= 2 else None
    ofit = origin_fit(ns, [r["var"] for r in rows])
    kesten = max(r["var"] / r["mean_edges"] for r in rows)
    summary = {"direction": label, "by_n": rows, "fit": fit, "origin_fit": ofit,
               "kesten_C": kesten, "replications_below_100": cfg.replications < 100}
    gates = {"kesten_C_finite": math.isfinite(kesten)}
    if fit is not None:
        gates["slope_positive"] = fit["slope"] > 0
    min_r2 = cfg.get("min_r2", None, float)
    if min_r2 is not None and fit is not None:
        gates[f"r2>={min_r2}"] = fit["r2"] >= min_r2
    exp_slope = cfg.get("expect_slope", None, float)
    if exp_slope is not None:
        rtol = cfg.get("slope_rtol", 0.1, float)
        gates["slope_near_expected"] = abs(ofit["slope"] - exp_slope) <= rtol * exp_slope
    exp_vn = cfg.get("expect_var_per_n", None, float)
    if exp_vn is not None:
        rtol = cfg.get("var_rtol", 0.15, float)
        gates["var_over_n_near_expected"] = all(
            abs(r["var_over_n"] - exp_vn) <= rtol * exp_vn for r in rows)
    return summary, gates


# ---------------------------------------------------------------------------
# counterexamples

CE_FIELDS = ["replication", "part", "n", "time"]


def strict_gap_precondition(dist: WeightDistribution) -> None:
    a, b = dist.bounds
    if not 2 * a < b:
        raise DomainError(f"need 2a < b for the strict inequality, got a={a}, b={b}")


def pdf(dist: WeightDistribution, x: float) -> float:
    if dist.kind in ("uniform", "bounded-away"):
        a, b = dist.params
        return 1.0 / (b - a) if a <= x <= b else 0.0
    if dist.kind == "exponential":
        lam = dist.params[0]
        return lam * math.exp(-lam * x) if x >= 0 else 0.0
    m, s = dist.params
    if x < 0:
        return 0.0
    tail = stats.norm.sf(-m / s)
    return stats.norm.pdf((x - m) / s) / (s * tail)


def min_sum_bound(dist: WeightDistribution, epsabs: float = 1e-10) -> float:
    """E[min(X, Y1 + Y2)] as the double integral of P(X > t) P(Y1 + Y2 > t)."""
    lo, hi = dist.bounds
    upper = 2 * hi if math.isfinite(hi) else float(dist.ppf(1 - 1e-15)) * 2

    def integrand(y, t):
        sx = 1.0 - float(dist.cdf(t))
        sy = 1.0 - float(dist.cdf(t - y))
        return sx * sy * pdf(dist, y)

    ylo, yhi = lo, (hi if math.isfinite(hi) else upper)
    # P(Y1+Y2 > t) = P(Y2 > t) for t < lo handled by the same integrand
    val, _ = integrate.dblquad(integrand, 0.0, upper, ylo, yhi, epsabs=epsabs, epsrel=1e-10)
    return val


def _alternation_word(exponents) -> list[str]:
    word: list[str] = []
    for j, e in enumerate(exponents):
        word.extend(["a" if j % 2 == 0 else "b2"] * e)
    return word


def _prepare_ce(cfg, ctx):
    dist = ctx.dist
    prep = {"mu": dist.mean}
    try:
        strict_gap_precondition(dist)
        prep["bound"] = min_sum_bound(dist)
        prep["gamma_status"] = "ok"
    except DomainError as exc:
        prep["bound"] = None
        prep["gamma_status"] = f"precondition failed: {exc}"
    exps = [int(v) for v in cfg.get("alternation", "2,4,8,16").split(",")]
    prep["alternation"] = exps
    return prep


def _parts(cfg) -> list[str]:
    parts = [p.strip() for p in cfg.get("parts", "gamma2,mixed,alternation").split(",")]
    unknown = set(parts) - {"gamma2", "mixed", "alternation"}
    if unknown:
        raise ConfigError(f"[experiment] parts: unknown parts {sorted(unknown)}")
    return parts


def _replicate_ce(cfg, prep, i):
    ctx = context(cfg)
    parts = _parts(cfg)
    out = []
    n_g = cfg.get("n_gamma", 200, int)
    n_m = cfg.get("n_mixed", 40, int)
    if "gamma2" in parts:
        z = CyclicModel(2)
        env = ctx.env("gamma", i, z)
        res = passage_time(env, 0, 2 * n_g, BallDomain(z, 0, 2 * n_g + 2), True, ctx.budget())
        out.append({"replication": i, "part": "gamma2", "n": n_g, "time": res.time})
    fm = FreeModel(2, (1, 2))
    env = ctx.env("mixed", i, fm)
    if "mixed" in parts:
        for part, spec in (("mixed_a", DirectionSpec.pole(["a"])),
                           ("mixed_b", DirectionSpec.pole(["b2"]))):
            pts = spec.ray_points(fm, n_m)
            res = passage_time(env, pts[0], pts[-1], None, True, ctx.budget())
            out.append({"replication": i, "part": part, "n": n_m, "time": res.time})
    if "alternation" not in parts:
        return out
    word = _alternation_word(prep["alternation"])
    pts = DirectionSpec.explicit(word).ray_points(fm, len(word))
    checkpoints = np.cumsum(prep["alternation"]).tolist()
    res = passage_times(env, pts[0], [pts[k] for k in checkpoints],
                        BallDomain(fm, pts[0], 2 * len(word) + 2), True, ctx.budget())
    for k, r in zip(checkpoints, res):
        out.append({"replication": i, "part": "alternation", "n": k, "time": r.time})
    return out


def _summarize_ce(cfg, prep, records):
    mu = prep["mu"]
    parts = _by(records, "part")

    def vel(part):
        return mean_se([r["time"] / r["n"] for r in parts[(part,)]])

    summary: dict = {"mu": mu}
    gates = {}
    if ("gamma2",) in parts:
        g_est, g_se = vel("gamma2")
        summary["gamma2"] = {"estimate": g_est, "se": g_se, "bound": prep["bound"],
                             "status": prep["gamma_status"]}
        if prep["bound"] is not None:
            gates["gamma2_below_mu_3se"] = g_est < mu - 3 * g_se
            gates["gamma2_below_bound_plus_3se"] = g_est <= prep["bound"] + 3 * g_se
    if ("mixed_a",) in parts:
        a_est, a_se = vel("mixed_a")
        b_est, b_se = vel("mixed_b")
        summary["mixed"] = {"v_a": a_est, "se_a": a_se, "v_b": b_est, "se_b": b_se}
        gates["v_a_within_2se_of_mu"] = abs(a_est - mu) <= 2 * a_se
        gates["v_b_below_mu_3se"] = b_est < mu - 3 * b_se
    if ("alternation",) in parts:
        alt = []
        for (k,), rs in sorted(_by(parts[("alternation",)], "n").items()):
            m, se = mean_se([r["time"] / k for r in rs])
            alt.append({"length": k, "ratio": m, "se": se})
        summary["alternation"] = alt
    return summary, gates


# ---------------------------------------------------------------------------
# concentration and CLT

def _summarize_conc(cfg, prep, records):
    eps = cfg.get("epsilon", 0.05, float)
    ratio = cfg.get("length_ratio", 1.5, float)
    label = prep["directions"][0]
    groups = _by(records, "direction", "n")
    ns = [n for n in _grid(cfg) if n > 0]
    low, longp = [], []
    for n in ns:
        rs = groups[(label, n)]
        low.append(float(np.mean([r["time"] <= eps * n for r in rs])))
        longp.append(float(np.mean([r["edges"] >= ratio * n for r in rs])))
    summary = {"epsilon": eps, "length_ratio": ratio, "n": ns,
               "lower_tail": low, "length_tail": longp,
               "lower_tail_log_slope": log_slope(ns, low),
               "length_tail_log_slope": log_slope(ns, longp)}
    return summary, {}


def _summarize_clt(cfg, prep, records):
    label = prep["directions"][0]
    groups = _by(records, "direction", "n")
    rows = []
    for n in _grid(cfg):
        if n == 0:
            continue
        t = np.array([r["time"] for r in groups[(label, n)]])
        z = (t - t.mean()) / t.std(ddof=1)
        ad = stats.anderson(z, dist="norm")
        crit = dict(zip(ad.significance_level.tolist(), ad.critical_values.tolist()))
        rows.append({"n": n, "skewness": float(stats.skew(t)),
                     "excess_kurtosis": float(stats.kurtosis(t)),
                     "anderson_darling": float(ad.statistic), "critical_1pct": crit.get(1.0)})
    return {"by_n": rows, "replications_below_1000": cfg.replications < 1000}, {}


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Driver:
    fields: list[str]
    prepare: Callable
    replicate: Callable
    summarize: Callable


DRIVERS: dict[str, Driver] = {
    "velocity": Driver(TIMES_FIELDS, _prepare_times, _replicate_times, _summarize_velocity),
    "b_velocity": Driver(B_FIELDS, _prepare_bvel, _replicate_bvel, _summarize_bvel),
    "coarse_grain": Driver(CG_FIELDS, _prepare_cg, _replicate_cg, _summarize_cg),
    "frequency": Driver(FREQ_FIELDS, _prepare_freq, _replicate_freq, _summarize_freq),
    "direction": Driver(DIR_FIELDS, _prepare_dir, _replicate_dir, _summarize_dir),
    "coalescence": Driver(COAL_FIELDS, _prepare_coal, _replicate_coal, _summarize_coal),
    "variance": Driver(TIMES_FIELDS, _prepare_times, _replicate_times, _summarize_var),
    "counterexample": Driver(CE_FIELDS, _prepare_ce, _replicate_ce, _summarize_ce),
    "concentration": Driver(TIMES_FIELDS, _prepare_times, _replicate_times, _summarize_conc),
    "clt": Driver(TIMES_FIELDS, _prepare_times, _replicate_times, _summarize_clt),
}
