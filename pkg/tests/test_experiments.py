import json
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats as sps

from fpphyp import BudgetExceeded, ConfigError, DomainError, FormatError
from fpphyp.environment import WeightDistribution
from fpphyp.experiments import parse_config, run_experiment
from fpphyp.experiments.drivers import min_sum_bound, strict_gap_precondition
from fpphyp.experiments.io import read_records
from fpphyp.experiments.stats import (bootstrap_var_ci, is_nondecreasing, is_nonincreasing,
                                      linear_fit, mean_se, origin_fit, var_se)

HEADER = """
[model]
kind = {model}
rank = 2
powers = {powers}
[distribution]
kind = uniform
a = 0
b = 1
[experiment]
seed = 31
"""


def config(kind, model="free", powers="1,1", **extra):
    body = HEADER.format(model=model, powers=powers) + f"kind = {kind}\n"
    body += "".join(f"{k} = {v}\n" for k, v in extra.items())
    return parse_config(body)


def test_parse_config_fields():
    cfg = config("velocity", directions="a, pole:b", n_grid="10..30:10", replications=5)
    assert cfg.n_grid == (10, 20, 30)
    assert [d.label() for d in cfg.build_directions(cfg.build_model())] == ["pole:a", "pole:b"]
    assert cfg.config_hash == config("velocity", directions="a, pole:b", n_grid="10..30:10",
                                     replications=5).config_hash
    assert cfg.with_overrides(seed=4).seed == 4
    assert cfg.with_overrides(seed=4).config_hash != cfg.config_hash


@pytest.mark.parametrize("text", [
    "[distribution]\nkind = uniform\n[experiment]\nkind = velocity\n",
    HEADER.format(model="free", powers="1,1") + "kind = nonsense\n",
    HEADER.format(model="free", powers="1,1") + "kind = velocity\nn_grid = 20,10\n",
    HEADER.format(model="free", powers="1,1") + "kind = variance\nn_grid = 5\nreplications = 1\n",
    HEADER.format(model="free", powers="1,1").replace("seed = 31", "seed = -3")
    + "kind = velocity\n",
])
def test_bad_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_unparseable_config_reports_line():
    with pytest.raises(FormatError) as exc:
        parse_config("[model]\nkind = free\nno equals sign here\n")
    assert exc.value.line is not None


def test_stats_against_scipy():
    rng = np.random.default_rng(0)
    x = np.arange(10.0)
    y = 2.0 * x + 1 + rng.normal(0, 0.1, 10)
    fit = linear_fit(x, y)
    ref = sps.linregress(x, y)
    assert fit["slope"] == pytest.approx(ref.slope, rel=1e-12)
    assert fit["intercept"] == pytest.approx(ref.intercept, rel=1e-10)
    assert fit["r2"] == pytest.approx(ref.rvalue ** 2, rel=1e-12)
    assert origin_fit(x, 3 * x)["slope"] == pytest.approx(3.0)
    m, se = mean_se(y)
    assert se == pytest.approx(sps.sem(y), rel=1e-12)
    z = rng.normal(size=4000)
    lo, hi = bootstrap_var_ci(z, np.random.default_rng(1), 400)
    assert lo < 1.0 < hi
    # normal data: SE of the variance is about sqrt(2/n)
    assert var_se(z) == pytest.approx(math.sqrt(2 / 4000), rel=0.1)
    assert is_nondecreasing([0.1, 0.1, 0.3]) and not is_nondecreasing([0.2, 0.1])
    assert is_nonincreasing([0.3, 0.3, 0.1])


def test_min_sum_bound_oracles():
    # quadrature must be good to 1e-4; check two orders tighter
    # uniform(0,1): the closed form is 11/24
    assert min_sum_bound(WeightDistribution.uniform()) == pytest.approx(
        float(Fraction(11, 24)), abs=1e-6)
    # exponential(rate): integral of exp(-2 rate t)(1 + rate t) gives 3/(4 rate)
    assert min_sum_bound(WeightDistribution.exponential(2.0)) == pytest.approx(3 / 8, abs=1e-6)
    strict_gap_precondition(WeightDistribution.uniform())
    with pytest.raises(DomainError):
        strict_gap_precondition(WeightDistribution.bounded_away(1, 1.5))


def test_velocity_run_outputs(tmp_path):
    cfg = config("velocity", directions="a", n_grid="4,8", replications=6)
    res = run_experiment(cfg, tmp_path)
    rows = read_records(tmp_path / "records.csv")
    assert list(rows[0]) == ["replication", "direction", "n", "time", "edges", "near_ties"]
    assert len(rows) == 12
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seed"] == 31 and manifest["config_sha256"] == cfg.config_hash
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["passed"] == res.passed
    # repr floats round-trip exactly
    assert [float(r["time"]) for r in rows] == [r["time"] for r in res.records]


@pytest.mark.parametrize("kind, extra", [
    ("velocity", {"directions": "a", "n_grid": "3,6", "sampled_directions": 1}),
    ("variance", {"directions": "a", "n_grid": "3,6"}),
    ("frequency", {"length": 2000, "words": "all:1"}),
    ("coarse_grain", {"scale": 2, "blocks": 4}),
])
def test_worker_count_does_not_change_records(tmp_path, kind, extra):
    cfg = config(kind, replications=4, **extra)
    run_experiment(cfg, tmp_path / "w1", workers=1)
    run_experiment(cfg, tmp_path / "w2", workers=2)
    one = (tmp_path / "w1" / "records.csv").read_bytes()
    assert one == (tmp_path / "w2" / "records.csv").read_bytes()


def test_budget_abort_keeps_manifest(tmp_path):
    cfg = config("velocity", directions="a", n_grid="20", replications=2,
                 domain="ball", prune="false")
    cfg = cfg.with_overrides(budget_relaxations=50)
    with pytest.raises(BudgetExceeded):
        run_experiment(cfg, tmp_path)
    assert (tmp_path / "manifest.json").exists()
    assert json.loads((tmp_path / "summary.json").read_text())["aborted"] is True
    assert not (tmp_path / "records.csv").exists()


def test_mixed_drivers_small(tmp_path):
    mixed = {"model": "free-mixed", "powers": "b:2"}
    cases = [
        ("b_velocity", {"directions": "pole:b2", "n_grid": "4,8", "b_grid": "1,3"}),
        ("coalescence", {"directions": "pole:a", "o2": "b", "n_grid": "4,8",
                         "pilot_replications": 4}),
        ("direction", {"directions": "pole:a, pole:b2", "n_grid": "6"}),
        ("concentration", {"directions": "pole:b2", "n_grid": "6"}),
        ("clt", {"directions": "pole:b2", "n_grid": "6"}),
        ("counterexample", {"n_gamma": 10, "n_mixed": 6, "alternation": "1,2"}),
    ]
    for kind, extra in cases:
        cfg = config(kind, replications=4, **mixed, **extra)
        res = run_experiment(cfg, tmp_path / kind)
        assert res.records, kind
        assert (tmp_path / kind / "summary.json").exists()


def test_coalescence_is_exact_through_bridge():
    # both rays toward a^inf must cross the bridge edge from 1 to a
    cfg = config("coalescence", model="free-mixed", powers="b:2", directions="pole:a",
                 o2="b", n_grid="5,10", replications=6, pilot_replications=4)
    res = run_experiment(cfg)
    assert all(row["fraction"] == 1.0 for row in res.summary["by_n"])


def test_shipped_configs_parse():
    from pathlib import Path

    from fpphyp.experiments import load_config
    paths = sorted((Path(__file__).parent.parent / "configs").glob("*.ini"))
    assert paths
    for path in paths:
        cfg = load_config(path)
        assert cfg.seed == 20261018


def test_automatic_model_from_ini(tmp_path):
    from fpphyp.combing import builtin_automaton
    from fpphyp.groups import FreeModel

    aut = tmp_path / "f2.aut"
    aut.write_text(builtin_automaton(FreeModel(2)).to_text())
    cfg = parse_config(f"""
[model]
kind = automatic
base_kind = free
base_rank = 2
automaton = {aut}
[distribution]
kind = uniform
[experiment]
kind = velocity
directions = a
n_grid = 4
replications = 3
""")
    model = cfg.build_model()
    assert model.kind == "automatic"
    g = FreeModel(2).parse("ab^2")
    assert model.length(g) == 3
    res = run_experiment(cfg)
    assert len(res.records) == 3
