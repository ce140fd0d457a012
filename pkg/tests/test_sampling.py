import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_bundle
from subloo.draws import full_data_lpd_all
from subloo.exceptions import ConfigurationError
from subloo.sampling import (
    PI_FLOOR,
    ClampWarning,
    SamplingPlan,
    Subsample,
    build_alias,
    compute_pi,
    draw_subsample,
)


def plan(p):
    p = np.asarray(p, dtype=np.float64)
    return SamplingPlan(pi_tilde=p / p.sum(), strategy="test")


def test_equal_lpd_gives_uniform():
    pl = compute_pi(None, "lpd_point", point_lpd=np.full(7, math.log(0.5)))
    np.testing.assert_allclose(pl.pi_tilde, 1 / 7, rtol=0, atol=1e-15)
    assert pl.clamped_count == 0


def test_two_point_hand_computation():
    pl = compute_pi(None, "lpd_point", point_lpd=np.log([0.9, 0.1]))
    a, b = -math.log(0.9), -math.log(0.1)
    assert a == pytest.approx(0.1054, abs=1e-4) and b == pytest.approx(2.3026, abs=1e-4)
    np.testing.assert_allclose(pl.pi_tilde, [0.0438, 0.9562], atol=1e-3)


def test_positive_lpd_clamped():
    with pytest.warns(ClampWarning):
        pl = compute_pi(None, "lpd_point", point_lpd=[0.3, -1.0, -2.0])
    assert pl.clamped_count == 1
    assert pl.pi_tilde[0] == pytest.approx(PI_FLOOR / (PI_FLOOR + 3.0))
    assert np.all(pl.pi_tilde > 0)


def test_strategies(rng):
    b = random_bundle(rng, S=40, n=6)
    np.testing.assert_allclose(compute_pi(b, "lpd_full").pi_tilde, -full_data_lpd_all(b) / -full_data_lpd_all(b).sum())
    col = b.log_lik.mean(axis=0)
    np.testing.assert_allclose(compute_pi(b, "expected_lpd_q").pi_tilde, col / col.sum())
    np.testing.assert_allclose(compute_pi(b, "uniform").pi_tilde, 1 / 6)
    for s in ("lpd_point", "lpd_at_q_mean", "lpd_at_q_mode"):
        assert compute_pi(b, s, point_lpd=col).strategy == s
        with pytest.raises(ConfigurationError):
            compute_pi(b, s)
    with pytest.raises(ConfigurationError):
        compute_pi(b, "expected_lpd_data")
    with pytest.raises(ConfigurationError):
        compute_pi(b, "nope")
    with pytest.raises(ConfigurationError):
        compute_pi(b, "lpd_point", point_lpd=col[:3])


def test_alias_n1():
    t = build_alias(plan([1.0]))
    assert t.prob.tolist() == [1.0] and t.alias.tolist() == [0]
    assert draw_subsample(t, 5, seed=1).indices.tolist() == [0] * 5


def test_alias_uniform_n4():
    t = build_alias(plan([1, 1, 1, 1]))
    np.testing.assert_array_equal(t.prob, 1.0)


def test_alias_dyadic_reconstruction():
    t = build_alias(plan([0.5, 0.25, 0.125, 0.125]))
    np.testing.assert_allclose(t.probabilities(), [0.5, 0.25, 0.125, 0.125], rtol=0, atol=1e-12)


@settings(max_examples=1000, deadline=None)
@given(st.integers(1, 300), st.integers(0, 2**32 - 1), st.floats(0.01, 5.0))
def test_alias_reconstruction_property(n, seed, spread):
    p = np.random.default_rng(seed).lognormal(sigma=spread, size=n)
    pl = plan(p)
    t = build_alias(pl)
    assert np.all((t.prob >= 0) & (t.prob <= 1.0 + 1e-12))
    np.testing.assert_allclose(t.probabilities(), pl.pi_tilde, rtol=0, atol=1e-12)


def tv(indices, p):
    freq = np.bincount(indices, minlength=p.size) / indices.size
    return 0.5 * np.abs(freq - p).sum()


@pytest.mark.parametrize("p", [[0.25] * 4, [0.5, 0.25, 0.125, 0.125]])
def test_empirical_tv(p):
    p = np.array(p)
    sub = draw_subsample(build_alias(plan(p)), 1_000_000, seed=12)
    assert tv(sub.indices, p) < 0.005


def test_determinism_and_range():
    t = build_alias(plan(np.arange(1, 50)))
    a, b = draw_subsample(t, 1000, seed=3), draw_subsample(t, 1000, seed=3)
    np.testing.assert_array_equal(a.indices, b.indices)
    assert a.indices.min() >= 0 and a.indices.max() < 49
    assert not np.array_equal(a.indices, draw_subsample(t, 1000, seed=4).indices)
    with pytest.raises(ValueError):
        draw_subsample(t, 0, seed=1)


def test_subsample_json_round_trip():
    s = draw_subsample(build_alias(plan([1, 2, 3])), 9, seed=2**63 + 5)
    back = Subsample.from_json(s.to_json())
    assert back.seed == s.seed
    np.testing.assert_array_equal(back.indices, s.indices)
    with pytest.raises(ValueError):
        Subsample.from_dict({"seed": 1, "m": 3, "indices": [0]})
