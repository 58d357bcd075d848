"""Moment exactness and sampling consistency for the rate laws."""

import math

import numpy as np
import pytest
from hypothesis import given, settings

from adpricing.distributions import (
    Beta,
    Discrete,
    Point,
    Uniform,
    distribution_from_dict,
    moments,
    two_point_surrogate,
    uniform_die,
)

from conftest import rate_laws


def test_uniform_moments():
    d = Uniform(0.2, 0.4)
    assert d.mean() == pytest.approx(0.3, rel=1e-15)
    assert d.variance() == pytest.approx(1.0 / 300.0, rel=1e-12)
    assert d.support() == (0.2, 0.4)
    assert not d.is_finite_discrete()


def test_beta_moments_exact():
    d = Beta(2.0, 3.0)
    assert d.mean() == 0.4
    assert d.variance() == 0.04
    assert d.support() == (0.0, 1.0)


def test_point_moments():
    d = Point(0.3)
    assert d.mean() == 0.3
    assert d.variance() == 0.0
    assert d.support() == (0.3, 0.3)
    assert d.atoms() == [(0.3, 1.0)]


def test_discrete_moments():
    d = Discrete((0.1, 0.3), (0.5, 0.5))
    assert d.mean() == 0.2
    assert d.variance() == pytest.approx(0.01, rel=1e-12)
    assert d.support() == (0.1, 0.3)
    assert d.is_finite_discrete()
    assert d.atoms() == [(0.1, 0.5), (0.3, 0.5)]


def test_discrete_validation():
    with pytest.raises(ValueError):
        Discrete((0.1, 0.3), (0.5, 0.6))  # probs sum past 1
    with pytest.raises(ValueError):
        Discrete((0.1, 0.3), (1.5, -0.5))
    with pytest.raises(ValueError):
        Discrete((0.1,), (0.5, 0.5))


def test_uniform_die():
    die = uniform_die(6)
    assert die.mean() == 3.5
    assert die.variance() == pytest.approx(35.0 / 12.0, rel=1e-12)
    assert len(die.atoms()) == 6
    assert all(p == pytest.approx(1.0 / 6.0) for _, p in die.atoms())


def test_moments_helper():
    d = Uniform(0.0, 1.0)
    assert moments(d) == (d.mean(), d.variance())


@pytest.mark.parametrize(
    "dist",
    [
        Uniform(0.2, 0.4),
        Beta(2.0, 5.0),
        Point(0.125),
        Discrete((0.1, 0.4, 0.7), (0.2, 0.3, 0.5)),
        uniform_die(6),
    ],
)
def test_sample_mean_matches_declared_moments(dist):
    rng = np.random.default_rng(7)
    n = 200_000
    x = dist.sample(rng, n)
    lo, hi = dist.support()
    assert x.min() >= lo and x.max() <= hi
    se = math.sqrt(dist.variance() / n)
    assert abs(x.mean() - dist.mean()) <= max(5.0 * se, 1e-12)


@settings(max_examples=100, deadline=None)
@given(dist=rate_laws())
def test_random_law_samples_stay_in_support(dist):
    rng = np.random.default_rng(3)
    x = dist.sample(rng, 512)
    lo, hi = dist.support()
    assert x.min() >= lo and x.max() <= hi
    se = math.sqrt(dist.variance() / 512)
    assert abs(x.mean() - dist.mean()) <= max(6.0 * se, 1e-9)


def test_two_point_surrogate_preserves_mean():
    for dist in (Uniform(0.2, 0.4), Beta(2.0, 3.0)):
        s = two_point_surrogate(dist)
        assert s.is_finite_discrete()
        assert len(s.atoms()) == 2
        assert s.mean() == pytest.approx(dist.mean(), rel=1e-12)
    # finite laws pass through untouched
    d = Discrete((0.1, 0.3), (0.5, 0.5))
    assert two_point_surrogate(d) is d
    p = Point(0.3)
    assert two_point_surrogate(p) is p


def test_distribution_from_dict_all_kinds():
    assert distribution_from_dict({"kind": "uniform", "lo": 0.2, "hi": 0.4}) == Uniform(0.2, 0.4)
    assert distribution_from_dict({"kind": "beta", "a": 2, "b": 3}) == Beta(2.0, 3.0)
    assert distribution_from_dict({"kind": "point", "v": 0.3}) == Point(0.3)
    d = distribution_from_dict({"kind": "discrete", "atoms": [[0.1, 0.5], [0.3, 0.5]]})
    assert d.atoms() == [(0.1, 0.5), (0.3, 0.5)]


def test_distribution_from_dict_errors():
    with pytest.raises(ValueError):
        distribution_from_dict({"kind": "gamma", "a": 1})
    with pytest.raises(ValueError):
        distribution_from_dict({"kind": "uniform", "lo": 0.2})
    with pytest.raises(ValueError):
        distribution_from_dict({"lo": 0.2, "hi": 0.4})
