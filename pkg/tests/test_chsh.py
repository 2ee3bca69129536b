import json
import math

import numpy as np
import pytest

from helpers import projection_probability, random_state
from hybridbell.chsh import (
    TSIRELSON,
    AngleSettings,
    bell_value,
    bell_value_closed,
    canonical_bell_value,
    canonical_settings,
    correlation,
    correlation_closed,
    horodecki_max,
    joint_probability,
    joint_probability_closed,
    optimize_settings,
    rotated_f,
    rotated_u,
)
from hybridbell.continuum import inner, make_grid
from hybridbell.errors import InvalidArgumentError
from hybridbell.hybrid import VIOLATION_THRESHOLD, schmidt_decompose, state_with_kappa, state_with_overlap

R2 = math.sqrt(2)


@pytest.fixture(scope="module")
def maximal():
    st = state_with_overlap(math.pi / 4, 0.0)
    return st, schmidt_decompose(st)


@pytest.fixture(scope="module")
def skewed():
    st = state_with_overlap(0.55, 0.35)
    return st, schmidt_decompose(st)


def test_rotated_u(maximal):
    _, s = maximal
    np.testing.assert_allclose(rotated_u(s, 0, 1), s.u1)
    np.testing.assert_allclose(rotated_u(s, 0, 2), s.u2)
    np.testing.assert_allclose(rotated_u(s, math.pi / 2, 1), s.u2, atol=1e-16)
    np.testing.assert_allclose(rotated_u(s, math.pi / 2, 2), -s.u1, atol=1e-16)
    np.testing.assert_allclose(rotated_u(s, math.pi / 4, 1), [1 / R2, 1 / R2], atol=1e-15)
    with pytest.raises(InvalidArgumentError):
        rotated_u(s, 0, 3)


def test_rotated_f(skewed):
    _, s = skewed
    np.testing.assert_allclose(rotated_f(s, 0, 1).amplitudes, s.f1.amplitudes)
    np.testing.assert_allclose(rotated_f(s, 0, 2).amplitudes, s.f2.amplitudes)
    np.testing.assert_allclose(rotated_f(s, math.pi / 2, 1).amplitudes, s.f2.amplitudes, atol=1e-16)
    for beta in np.random.default_rng(0).uniform(-4, 4, 20):
        fs = [rotated_f(s, beta, j) for j in (1, 2)]
        gram = np.array([[inner(a, b) for b in fs] for a in fs])
        np.testing.assert_allclose(gram, np.eye(2), atol=1e-9)


def test_joint_probability_schmidt_basis(skewed):
    st, s = skewed
    assert joint_probability(st, s, 1, 1, 0, 0) == pytest.approx(s.kappa1**2, abs=1e-12)
    assert joint_probability(st, s, 1, 2, 0, 0) == pytest.approx(0, abs=1e-12)
    assert joint_probability(st, s, 2, 2, 0, 0) == pytest.approx(s.kappa2**2, abs=1e-12)


def test_joint_probability_maximal_pi8(maximal):
    st, s = maximal
    # oracle: explicit double sum over polarization and grid with hand-built rotated vectors
    u = s.u1
    f = math.cos(math.pi / 8) * s.f1 + math.sin(math.pi / 8) * s.f2
    oracle = projection_probability(st, u, f)
    assert oracle == pytest.approx(math.cos(math.pi / 8) ** 2 / 2, abs=1e-12)
    assert joint_probability(st, s, 1, 1, 0, math.pi / 8) == pytest.approx(oracle, abs=1e-12)
    assert oracle == pytest.approx(0.42678, abs=5e-6)


def test_joint_probabilities_match_closed_form_and_sum_to_one():
    rng = np.random.default_rng(5)
    grid = make_grid("uniform-trapezoid", 256, (-10, 10))
    for _ in range(20):
        st = random_state(rng, grid)
        s = schmidt_decompose(st)
        a, b = rng.uniform(-math.pi, math.pi, 2)
        probs = {(i, j): joint_probability(st, s, i, j, a, b) for i in (1, 2) for j in (1, 2)}
        assert sum(probs.values()) == pytest.approx(1, abs=1e-10)
        for (i, j), p in probs.items():
            assert 0 <= p <= 1
            assert p == pytest.approx(joint_probability_closed(s.kappa1, s.kappa2, i, j, a, b), abs=1e-10)
            u = rotated_u(s, a, i)
            assert p == pytest.approx(projection_probability(st, u, rotated_f(s, b, j)), abs=1e-12)
        p1 = s.kappa1**2 * math.cos(a) ** 2 + s.kappa2**2 * math.sin(a) ** 2
        assert probs[1, 1] + probs[1, 2] == pytest.approx(p1, abs=1e-10)


def test_joint_probability_rejects_foreign_schmidt(maximal, skewed):
    with pytest.raises(InvalidArgumentError):
        joint_probability(maximal[0], skewed[1], 1, 1, 0, 0)


def test_correlation_examples(skewed, maximal):
    st, s = skewed
    assert correlation(st, s, 0, 0) == pytest.approx(1, abs=1e-10)
    assert correlation(st, s, 0, math.pi / 4) == pytest.approx(0, abs=1e-10)
    st, s = maximal
    assert correlation(st, s, math.pi / 8, math.pi / 8) == pytest.approx(1, abs=1e-10)


def test_correlation_closed_form_and_shift_symmetry():
    rng = np.random.default_rng(9)
    grid = make_grid("uniform-trapezoid", 128, (-10, 10))
    st = random_state(rng, grid)
    s = schmidt_decompose(st)
    worst = 0.0
    for a, b in rng.uniform(-math.pi, math.pi, (10_000, 2)):
        c = correlation(st, s, a, b)
        worst = max(worst, abs(c))
        assert c == pytest.approx(correlation_closed(s.kappa1, s.kappa2, a, b), abs=1e-10)
    assert worst <= 1 + 1e-12
    for a, b in rng.uniform(-math.pi, math.pi, (50, 2)):
        assert correlation(st, s, a + math.pi / 2, b + math.pi / 2) == pytest.approx(
            correlation(st, s, a, b), abs=1e-10)


def test_canonical_settings_exact():
    c = canonical_settings()
    assert c.as_tuple() == (0.0, math.pi / 4, math.pi / 8, 3 * math.pi / 8)
    assert c.alpha == 0
    assert c.beta_prime - c.beta == pytest.approx(math.pi / 4, abs=1e-16)


def test_settings_stored_modulo_pi():
    s = AngleSettings(math.pi + 0.1, -0.2, 2 * math.pi + 0.3, 0.4)
    assert s.alpha == pytest.approx(0.1) and s.alpha_prime == pytest.approx(math.pi - 0.2)
    assert s.beta == pytest.approx(0.3)
    with pytest.raises(InvalidArgumentError):
        AngleSettings(float("nan"), 0, 0, 0)


def test_bell_value_canonical_examples(maximal):
    st, s = maximal
    r = bell_value(st, s, canonical_settings())
    assert r.bell_value == pytest.approx(2 * R2, abs=1e-10) and r.violation
    prod = state_with_kappa(1.0)
    r = bell_value(prod, schmidt_decompose(prod), canonical_settings())
    assert r.bell_value == pytest.approx(R2, abs=1e-10) and not r.violation


def test_bell_value_at_threshold_is_not_a_violation():
    k = VIOLATION_THRESHOLD
    assert k == pytest.approx((R2 - 1) / 2, abs=1e-15)
    z = math.sqrt(1 - (2 * k) ** 2)
    st = state_with_overlap(math.pi / 4, z)
    s = schmidt_decompose(st)
    assert s.kappa_product == pytest.approx(k, abs=1e-12)
    r = bell_value(st, s, canonical_settings())
    assert r.bell_value == pytest.approx(2, abs=1e-10)
    assert canonical_bell_value(k) == pytest.approx(2, abs=1e-15)
    below = state_with_overlap(math.pi / 4, math.sqrt(1 - (2 * 0.99 * k) ** 2))
    assert not bell_value(below, schmidt_decompose(below), canonical_settings()).violation


def test_canonical_value_at_quoted_product():
    # sqrt(2) - 1 sits well inside the violating region: B = 4 - sqrt(2)
    assert canonical_bell_value(R2 - 1) == pytest.approx(4 - R2, abs=1e-12)


def test_bell_value_direct_matches_closed_form_random():
    rng = np.random.default_rng(21)
    grid = make_grid("uniform-trapezoid", 256, (-10, 10))
    worst = 0.0
    for _ in range(100):
        st = random_state(rng, grid)
        s = schmidt_decompose(st)
        settings = AngleSettings(*rng.uniform(0, math.pi, 4))
        direct = bell_value(st, s, settings).bell_value
        worst = max(worst, abs(direct - bell_value_closed(s.kappa1, s.kappa2, settings)))
        canon = bell_value(st, s, canonical_settings())
        assert canon.bell_value == pytest.approx(canonical_bell_value(s.kappa_product), abs=1e-10)
    assert worst <= 1e-9


def test_tsirelson_bound_over_random_settings():
    rng = np.random.default_rng(4)
    for _ in range(2000):
        k1 = math.sqrt(rng.uniform(0.5, 1))
        k2 = math.sqrt(1 - k1 * k1)
        assert bell_value_closed(k1, k2, AngleSettings(*rng.uniform(0, math.pi, 4))) <= TSIRELSON + 1e-9


def test_bell_report_json(maximal):
    st, s = maximal
    d = json.loads(json.dumps(bell_value(st, s, canonical_settings()).to_dict()))
    assert set(d) >= {"correlations", "bell_value", "violation", "kappa_product", "settings"}
    assert len(d["correlations"]) == 4
    assert d["bell_value"] == pytest.approx(sum(c * g for c, g in zip(d["correlations"], (1, -1, 1, 1))), abs=1e-12)


def test_optimize_maximal_reaches_tsirelson():
    _, val = optimize_settings(1 / R2, 1 / R2)
    assert val == pytest.approx(2 * R2, abs=1e-6)


def test_optimize_product_state():
    _, val = optimize_settings(1.0, 0.0)
    assert val == pytest.approx(2.0, abs=1e-6)


def test_optimize_beats_canonical():
    k1 = math.sqrt(0.75)
    settings, val = optimize_settings(k1, 0.5)
    assert val >= R2 * (2 * k1 * 0.5 + 1) - 1e-9
    assert val >= 2.63896
    assert bell_value_closed(k1, 0.5, settings) == pytest.approx(val, abs=1e-12)
    # the known pure-state optimum serves as an independent upper reference
    assert val == pytest.approx(horodecki_max(k1, 0.5), abs=1e-6)


@pytest.mark.parametrize("k1sq", [0.55, 0.7, 0.9, 0.99])
def test_optimize_never_below_canonical(k1sq):
    k1, k2 = math.sqrt(k1sq), math.sqrt(1 - k1sq)
    _, val = optimize_settings(k1, k2)
    assert val >= canonical_bell_value(k1 * k2) - 1e-9


def test_optimize_parallel_grid_is_identical():
    k1 = math.sqrt(0.8)
    k2 = math.sqrt(0.2)
    assert optimize_settings(k1, k2, workers=1) == optimize_settings(k1, k2, workers=3)


@pytest.mark.parametrize("k1,k2", [(0.5, 0.5), (0.6, 0.8), (1.1, 0.0), (float("nan"), 0.0)])
def test_optimize_rejects_invalid_kappas(k1, k2):
    with pytest.raises(InvalidArgumentError):
        optimize_settings(k1, k2)
