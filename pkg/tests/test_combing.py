import io
import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fpphyp import DomainError, FormatError
from fpphyp.combing import (DirectionSpec, accepted_word, analyze, block_frequencies,
                            builtin_automaton, cone_children, cone_measure, growth_check,
                            gth_stationary, k_tuple_chain, load_automaton, parse_automaton,
                            predicted_frequency, refine_by_incoming_label, sample_ray,
                            sphere_count, uniform_comparability, verify_geodesic_language)
from fpphyp.groups import CyclicModel, FreeModel, ball, sphere

F2 = FreeModel(2)
MIXED = FreeModel(2, (1, 2))
Z1 = CyclicModel(1)
Z2 = CyclicModel(2)


@pytest.fixture(scope="module")
def f2():
    return analyze(builtin_automaton(F2))


@pytest.fixture(scope="module")
def mixed():
    return analyze(builtin_automaton(MIXED))


def test_builtin_state_counts():
    assert builtin_automaton(F2).n_states == 5
    assert builtin_automaton(MIXED).n_states == 7
    assert builtin_automaton(Z1).n_states == 3
    assert builtin_automaton(Z2).n_states == 5


@pytest.mark.parametrize("model", [F2, MIXED, Z1, Z2], ids=lambda m: m.signature)
def test_builtin_language_verifies(model):
    radius = 5 if model.kind != "cyclic-multi" else 12
    rep = verify_geodesic_language(builtin_automaton(model), model, radius)
    assert rep.ok, rep.as_dict()
    assert rep.words_checked == rep.ball_size


@pytest.mark.parametrize("model", [F2, MIXED, Z2], ids=lambda m: m.signature)
def test_lambda_against_numpy_eigvals(model):
    aut = builtin_automaton(model)
    ref = max(abs(np.linalg.eigvals(aut.matrix())))
    assert analyze(aut).lam == pytest.approx(ref, rel=1e-9)


def test_f2_spectral_data(f2):
    assert f2.lam == pytest.approx(3.0, abs=1e-9)
    assert f2.d == 1
    assert np.allclose(f2.spectral.r / f2.spectral.r[1], [4 / 3, 1, 1, 1, 1], atol=1e-12)
    assert f2.markov.row_residual < 1e-12
    assert f2.markov.mu_residual < 1e-12


def test_mixed_lambda(mixed):
    # the a-part contributes 2 + 1 and the b-part has growth 1 + sqrt 2 inside
    ref = max(abs(np.linalg.eigvals(builtin_automaton(MIXED).matrix())))
    assert mixed.lam == pytest.approx(ref, rel=1e-12)
    assert mixed.lam == pytest.approx(3.8284271247, abs=1e-9)


@pytest.mark.parametrize("model", [F2, MIXED, Z2], ids=lambda m: m.signature)
def test_sphere_count_matches_bfs(model):
    aut = builtin_automaton(model)
    dist = ball(model, radius=8 if model is not MIXED else 6)
    top = max(dist.values())
    for n in range(top + 1):
        assert sphere_count(aut, n) == sum(1 for d in dist.values() if d == n)


def test_mixed_sphere_counts():
    aut = builtin_automaton(MIXED)
    assert [sphere_count(aut, n) for n in range(6)] == [1, 6, 22, 86, 326, 1254]


def test_growth_ratios_bounded(f2):
    rep = growth_check(f2.automaton, 20, f2.lam)
    assert rep["inf"] > 0.5 and rep["sup"] < 2.0


def test_cyclic_components():
    an = analyze(builtin_automaton(Z1))
    assert an.lam == pytest.approx(1.0)
    assert sum(an.components.maximal) == 2
    an2 = analyze(builtin_automaton(Z2))
    assert an2.lam == pytest.approx(1.0)
    r = an2.spectral.r / an2.spectral.r[1]
    assert np.allclose(r, [2, 1, 0, 1, 0], atol=1e-12)
    names = an2.automaton.names
    mu = dict(zip(names, an2.markov.mu))
    assert mu["+2"] == pytest.approx(0.5) and mu["-2"] == pytest.approx(0.5)
    with pytest.raises(DomainError):
        predicted_frequency(an2, ["+2"])


def test_cone_measures_f2(f2):
    assert cone_measure(f2, F2, F2.parse("a")) == pytest.approx(0.25)
    assert cone_measure(f2, F2, F2.parse("ab")) == pytest.approx(1 / 12)
    assert cone_measure(f2, F2, F2.identity) == 1.0


def test_cone_additivity_exact_on_f2_ball(f2):
    # on F2 every cone weight is 1/4 * (1/3)^(n-1); compare to rationals
    for g, n in ball(F2, radius=5).items():
        expected = Fraction(1) if n == 0 else Fraction(1, 4) * Fraction(1, 3) ** (n - 1)
        assert cone_measure(f2, F2, g) == pytest.approx(float(expected), rel=1e-12)
        kids = cone_children(f2, F2, g)
        assert math.fsum(m for _, m in kids) == pytest.approx(cone_measure(f2, F2, g), rel=1e-12)


def test_cone_additivity_mixed(mixed):
    for g in sphere(MIXED, 3):
        total = math.fsum(m for _, m in cone_children(mixed, MIXED, g))
        assert total == pytest.approx(cone_measure(mixed, MIXED, g), rel=1e-12)
    assert math.fsum(cone_measure(mixed, MIXED, g) for g in sphere(MIXED, 4)) == \
        pytest.approx(1.0, abs=1e-12)


def test_accepted_word_is_least(f2):
    assert accepted_word(f2.automaton, F2, F2.parse("ab^-1")) == ["a", "B"]


def test_automaton_round_trip():
    aut = builtin_automaton(MIXED)
    again = parse_automaton(aut.to_text(), MIXED.generators.labels)
    for w, _ in aut.accepted_words(4):
        assert again.accepts(w)
    assert sum(1 for _ in again.accepted_words(4)) == sum(1 for _ in aut.accepted_words(4))
    loaded = load_automaton(io.StringIO(aut.to_text()), MIXED)
    assert loaded.n_states == aut.n_states


@pytest.mark.parametrize("text, line", [
    ("nonsense\n", 1),
    ("states 2 initial 1\n1 a 3\n", 2),
    ("states 2 initial 1\n1 q 2\n", 2),
    ("states 2 initial 1\n1 a 2\n1 a 1\n", 3),
    ("states 2 initial 1\n1 a\n", 2),
])
def test_format_errors_carry_line(text, line):
    with pytest.raises(FormatError) as exc:
        parse_automaton(text, F2.generators.labels)
    assert exc.value.line == line


def test_unreachable_state_rejected():
    with pytest.raises(FormatError):
        parse_automaton("states 2 initial 1\n2 a 2\n", F2.generators.labels)


def test_defective_automata_reported():
    # drop the b-transition out of init: elements starting with b are missed
    text = "\n".join(line for line in builtin_automaton(F2).to_text().splitlines()
                     if line != "1 b 4")
    aut = parse_automaton(text, F2.generators.labels)
    rep = verify_geodesic_language(aut, F2, 3)
    assert rep.non_surjective and not rep.ok
    bad = parse_automaton("states 3 initial 1\n1 a 2\n2 A 3\n", F2.generators.labels)
    rep = verify_geodesic_language(bad, F2, 2)
    assert rep.non_geodesic


def test_refinement_preserves_language(mixed):
    aut = mixed.automaton
    ref = refine_by_incoming_label(aut)
    assert ref.label_determined
    assert sorted(w for w, _ in ref.accepted_words(4)) == sorted(w for w, _ in aut.accepted_words(4))


def test_gth_against_eigenvector():
    p = np.array([[0.5, 0.5, 0.0], [0.2, 0.3, 0.5], [0.6, 0.0, 0.4]])
    vals, vecs = np.linalg.eig(p.T)
    v = np.real(vecs[:, np.argmin(abs(vals - 1))])
    assert np.allclose(gth_stationary(p), v / v.sum(), atol=1e-14)


def test_k_tuple_chain_f2(f2):
    chain = k_tuple_chain(f2, 2)
    assert len(chain.reachable_classes) == 1
    pairs = [w for w in product(F2.generators.labels, repeat=2)
             if predicted_frequency(f2, w, chain=chain) > 0]
    assert len(pairs) == 12
    assert predicted_frequency(f2, ["a", "b"], chain=chain) == pytest.approx(1 / 12, abs=1e-12)
    assert predicted_frequency(f2, ["a", "A"], chain=chain) == 0.0
    assert predicted_frequency(f2, ["a"]) == pytest.approx(0.25, abs=1e-12)


def test_sample_ray_deterministic_and_accepted(f2):
    w1 = sample_ray(f2, 11, 500)
    assert w1 == sample_ray(f2, 11, 500)
    assert w1 != sample_ray(f2, 12, 500)
    assert f2.automaton.accepts(w1)


def test_sample_ray_frequencies(mixed):
    word = sample_ray(mixed, 3, 40_000)
    freqs = block_frequencies(word, 1)
    for s in MIXED.generators.labels:
        assert freqs.get((s,), 0.0) == pytest.approx(predicted_frequency(mixed, [s]), abs=0.02)


def test_direction_spec():
    spec = DirectionSpec.parse("periodic:b|a", F2)
    assert spec.ray_word(4) == ["b", "a", "a", "a"]
    assert DirectionSpec.parse("b2", MIXED).ray_word(2) == ["b2", "b2"]
    assert DirectionSpec.parse("pole:ab", F2).label() == "pole:ab"
    DirectionSpec.pole(["b2"]).check(builtin_automaton(MIXED))
    with pytest.raises(DomainError):
        DirectionSpec.pole(["b"]).check(builtin_automaton(MIXED))
    with pytest.raises(DomainError):
        DirectionSpec.pole(["a", "A"]).check(builtin_automaton(F2))
    with pytest.raises(DomainError):
        DirectionSpec.explicit(["a"]).ray_word(3)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 60))
def test_sampled_rays_are_geodesic(seed, n):
    an = analyze(builtin_automaton(MIXED))
    word = sample_ray(an, seed, n)
    assert MIXED.length(MIXED.evaluate(word)) == n


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from(["a", "A", "b", "B"]), min_size=1, max_size=40),
       st.integers(1, 4))
def test_block_frequencies_sum_to_one(word, k):
    freqs = block_frequencies(word, k)
    if len(word) >= k:
        assert math.fsum(freqs.values()) == pytest.approx(1.0)
    else:
        assert freqs == {}


def test_uniform_comparability(f2, mixed):
    # the free-group sphere is uniform under the cone measure
    rep = uniform_comparability(f2, F2, 5, 2)
    assert rep["min_ratio"] == pytest.approx(1.0, rel=1e-12)
    assert rep["max_ratio"] == pytest.approx(1.0, rel=1e-12)
    rep = uniform_comparability(mixed, MIXED, 4, 1, samples=50, seed=2)
    assert rep["centers"] == 50
    assert 0 < rep["min_ratio"] <= rep["max_ratio"] < math.inf
