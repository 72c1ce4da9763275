import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from fpphyp import ConfigError, DomainError
from fpphyp.environment import (Environment, WeightDistribution, derive_seed, hash_uniform,
                                truncate, truncated_tail_check, weight)
from fpphyp.groups import FreeModel, ball, edge_from

F2 = FreeModel(2)

DISTS = [
    WeightDistribution.uniform(0, 1),
    WeightDistribution.bounded_away(1, 2),
    WeightDistribution.exponential(2.0),
    WeightDistribution.truncated_gaussian(0.5, 1.0),
]
SCIPY = {
    "uniform": lambda p: stats.uniform(p[0], p[1] - p[0]),
    "bounded-away": lambda p: stats.uniform(p[0], p[1] - p[0]),
    "exponential": lambda p: stats.expon(scale=1 / p[0]),
    "truncated-gaussian": lambda p: stats.truncnorm(-p[0] / p[1], np.inf, loc=p[0], scale=p[1]),
}


def edges_of(model, radius):
    out = set()
    for x in ball(model, radius=radius):
        for s, _ in model.neighbors(x):
            out.add(edge_from(model, x, s))
    return sorted(out, key=lambda e: (model.encode(e.u), e.label))


@pytest.mark.parametrize("dist", DISTS, ids=lambda d: d.kind)
def test_moments_match_scipy(dist):
    ref = SCIPY[dist.kind](dist.params)
    assert dist.mean == pytest.approx(ref.mean(), rel=1e-9)
    assert dist.variance == pytest.approx(ref.var(), rel=1e-9)
    u = np.linspace(0.01, 0.99, 25)
    assert np.allclose([dist.ppf(x) for x in u], ref.ppf(u), rtol=1e-9)
    assert np.allclose(dist.cdf(ref.ppf(u)), u, rtol=1e-9)


@pytest.mark.parametrize("dist", DISTS, ids=lambda d: d.kind)
def test_environment_weights_follow_law(dist):
    env = Environment(F2, 1234, dist)
    w = np.array([env.weight(e) for e in edges_of(F2, 5)][:5000])
    ref = SCIPY[dist.kind](dist.params)
    assert stats.kstest(w, ref.cdf).pvalue > 1e-3


def test_hash_uniform_ks():
    u = np.array([hash_uniform(99, i.to_bytes(8, "little")) for i in range(100_000)])
    assert stats.kstest(u, "uniform").statistic <= 0.006
    assert 0 < u.min() and u.max() < 1


@pytest.mark.parametrize("dist", DISTS, ids=lambda d: d.kind)
def test_sample_moments(dist):
    x = dist.sample(np.random.default_rng(2024), 1_000_000)
    se_mean = math.sqrt(dist.variance / x.size)
    assert abs(x.mean() - dist.mean) <= 4 * se_mean
    m4 = np.mean((x - x.mean()) ** 4)
    se_var = math.sqrt((m4 - x.var() ** 2) / x.size)
    assert abs(x.var(ddof=1) - dist.variance) <= 4 * se_var


def test_weights_are_deterministic_and_symmetric():
    env = Environment(F2, 7, WeightDistribution.uniform())
    x = F2.parse("ab")
    y = F2.multiply(x, "b")
    assert env.step_weight(x, "b") == env.step_weight(y, "B")
    assert env.step_weight(x, "b") == Environment(F2, 7, WeightDistribution.uniform()).step_weight(x, "b")
    assert env.step_weight(x, "b") != Environment(F2, 8, WeightDistribution.uniform()).step_weight(x, "b")
    cached = env.with_cache()
    e = edge_from(F2, x, "b")
    assert weight(cached, e) == weight(env, e) == weight(cached, e)


def test_models_do_not_share_streams():
    e = edge_from(F2, F2.identity, "a")
    m = FreeModel(2, (1, 2))
    other = edge_from(m, m.identity, "a")
    dist = WeightDistribution.uniform()
    assert Environment(F2, 1, dist).weight(e) != Environment(m, 1, dist).weight(other)


def test_derive_seed():
    assert derive_seed(5, "rep", 1) == derive_seed(5, "rep", 1)
    assert derive_seed(5, "rep", 1) != derive_seed(5, "rep", 2)
    assert derive_seed(5, "rep", 1) != derive_seed(6, "rep", 1)
    assert 0 <= derive_seed(5, "x") < 2**64
    with pytest.raises(DomainError):
        derive_seed(-1, "x")


def test_rejects_bad_laws():
    for bad in (("bernoulli", (0.5,)), ("uniform", (1.0, 0.5)), ("bounded-away", (0.0, 1.0)),
                ("exponential", (-1.0,)), ("cauchy", ())):
        with pytest.raises(ConfigError):
            WeightDistribution(*bad)
    assert WeightDistribution.from_config({"kind": "bounded-away", "a": "1", "b": "3"}).params == (1, 3)
    assert not WeightDistribution.exponential().sub_gaussian
    assert WeightDistribution.uniform().sub_gaussian


def test_truncate_clamps():
    env = Environment(F2, 3, WeightDistribution.exponential(1.0))
    t = truncate(env, 0.2, 1.5)
    for e in edges_of(F2, 3):
        raw = env.weight(e)
        assert t.weight(e) == min(max(raw, 0.2), 1.5)
    tt = truncate(t, 0.5, 3.0)
    assert tt.clamp == (0.5, 1.5)
    for args in ((0.0, 1.0), (1.0, 1.0), (2.0, 1.0)):
        with pytest.raises(DomainError):
            truncate(env, *args)


def test_truncated_tail_check():
    dist = WeightDistribution.exponential(1.0)
    p_far = truncated_tail_check(dist, 6.0, 0.05, 50, 2000, seed=1)
    p_near = truncated_tail_check(dist, 1.0, 0.05, 50, 2000, seed=1)
    assert p_far < p_near
    assert p_far < 0.05
    # uniform weights never exceed 1
    assert truncated_tail_check(WeightDistribution.uniform(), 1.0, 0.01, 10, 500) == 0.0


@given(st.floats(1e-9, 1 - 1e-9))
def test_ppf_cdf_inverse(u):
    for dist in DISTS:
        assert float(dist.cdf(dist.ppf(u))) == pytest.approx(u, abs=1e-9)
