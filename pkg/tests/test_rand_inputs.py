import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from liouville import rng
from liouville.errors import ParameterDomainError, UnsupportedError
from liouville.langevin import ks_statistic
from liouville.rand_inputs import (
    XiDistribution,
    cdf,
    density,
    inverse_cdf,
    sample,
    standardized_moment,
)

SQ2, SQ3 = math.sqrt(2.0), math.sqrt(3.0)
FAMILIES = [XiDistribution.normal(), XiDistribution.uniform(), XiDistribution.triangular()]


def quad_moment(dist, fn):
    total = 0.0
    for lo, hi in dist.quadrature_pieces():
        total += integrate.quad(lambda x: fn(x) * dist.pdf(x), lo, hi, epsabs=1e-14,
                                epsrel=1e-13, limit=200)[0]
    return total


def test_density_examples():
    assert density(XiDistribution.normal(), 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-7)
    assert density(XiDistribution.uniform(), 0.0) == pytest.approx(1 / (2 * SQ3), abs=1e-7)
    assert density(XiDistribution.triangular(), SQ2) == pytest.approx(2 / (3 * SQ2), abs=1e-7)
    assert density(XiDistribution.uniform(), 2.0) == 0.0


def test_density_matches_scipy():
    x = np.linspace(-4, 4, 81)
    tri = stats.triang(c=1.0, loc=-2 * SQ2, scale=3 * SQ2)
    np.testing.assert_allclose(XiDistribution.triangular().pdf(x), tri.pdf(x), atol=1e-14)
    np.testing.assert_allclose(XiDistribution.triangular().cdf(x), tri.cdf(x), atol=1e-14)
    np.testing.assert_allclose(XiDistribution.normal(0.5, 2.0).cdf(x),
                               stats.norm(0.5, 2.0).cdf(x), atol=1e-15)


@pytest.mark.parametrize("dist", FAMILIES, ids=lambda d: d.family)
def test_standardized_by_quadrature(dist):
    assert dist.standardized
    assert quad_moment(dist, lambda x: 1.0) == pytest.approx(1.0, abs=1e-9)
    assert abs(quad_moment(dist, lambda x: x)) < 1e-9
    assert quad_moment(dist, lambda x: x * x) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("dist", FAMILIES, ids=lambda d: d.family)
def test_quadrature_rule_integrates_moments(dist):
    nodes, w = dist.quadrature()
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    assert abs(np.dot(w, nodes)) < 1e-12
    assert np.dot(w, nodes ** 2) == pytest.approx(1.0, abs=1e-11)


def test_odd_moments_and_known_values():
    assert standardized_moment(XiDistribution.normal(), 3) == 0.0
    assert abs(quad_moment(XiDistribution.uniform(), lambda x: x ** 3)) < 1e-9
    assert abs(quad_moment(XiDistribution.normal(), lambda x: x ** 5)) < 1e-9
    assert standardized_moment(XiDistribution.uniform(), 4) == pytest.approx(1.8, rel=1e-12)
    m3 = standardized_moment(XiDistribution.triangular(), 3)
    assert m3 == pytest.approx(-(SQ2 ** 5) / 10, rel=1e-12)
    assert round(m3, 4) == -0.5657
    assert standardized_moment(XiDistribution.normal(), 4) == pytest.approx(3.0)


@pytest.mark.parametrize("dist", FAMILIES + [XiDistribution.custom([-1, 0, 2], [0, 1, 0])],
                         ids=lambda d: d.family)
@pytest.mark.parametrize("order", [2, 3, 4, 5])
def test_central_moment_against_quadrature(dist, order):
    m = dist.mean
    expected = quad_moment(dist, lambda x: (x - m) ** order)
    assert dist.central_moment(order) == pytest.approx(expected, rel=1e-8, abs=1e-12)


def test_invalid_parameters():
    with pytest.raises(ParameterDomainError):
        XiDistribution("uniform", (1.0, 0.0))
    with pytest.raises(ParameterDomainError):
        XiDistribution("triangular", (0.0, 2.0, 1.0))
    with pytest.raises(ParameterDomainError):
        XiDistribution.normal(0.0, -1.0)
    with pytest.raises(ParameterDomainError):
        XiDistribution("normal", (0.0, 2.0), standardized=True)
    with pytest.raises(UnsupportedError):
        XiDistribution.normal().central_moment(0)


@pytest.mark.parametrize("dist", FAMILIES, ids=lambda d: d.family)
@given(u=st.floats(1e-9, 1 - 1e-9))
def test_ppf_inverts_cdf(dist, u):
    x = inverse_cdf(dist, u)
    assert cdf(dist, x) == pytest.approx(u, abs=1e-10)


@pytest.mark.parametrize("dist", FAMILIES, ids=lambda d: d.family)
def test_cdf_of_ppf_on_support(dist):
    lo, hi = dist.support
    lo, hi = max(lo, -6), min(hi, 6)
    x = np.linspace(lo, hi, 401)[1:-1]
    np.testing.assert_allclose(dist.ppf(dist.cdf(x)), x, atol=1e-9)


def test_custom_family_round_trip():
    grid = np.linspace(-2, 2, 41)
    dens = np.exp(-grid ** 2)
    d = XiDistribution.custom(grid, dens)
    x = np.linspace(-1.9, 1.9, 50)
    np.testing.assert_allclose(d.ppf(d.cdf(x)), x, atol=1e-10)
    assert quad_moment(d, lambda v: 1.0) == pytest.approx(1.0, abs=1e-12)
    assert XiDistribution.from_config(d.to_config()).cdf(0.3) == pytest.approx(d.cdf(0.3))


def test_sample_bounds_and_clt():
    u = sample(XiDistribution.uniform(), 5, 10_000)
    assert np.all(np.abs(u) <= SQ3)
    z = sample(XiDistribution.normal(), 7, 1_000_000)
    assert abs(z.mean()) < 0.005
    assert abs(z.var() - 1.0) < 0.01


def test_triangular_sample_skewness():
    x = sample(XiDistribution.triangular(), 3, 1_000_000)
    assert stats.skew(x) == pytest.approx(-0.5657, abs=0.02)


@pytest.mark.parametrize("dist", FAMILIES, ids=lambda d: d.family)
def test_sample_ks(dist):
    x = sample(dist, 21, 100_000)
    assert ks_statistic(x, dist.cdf) < 0.01


@given(seed=st.integers(0, 2 ** 64), start=st.integers(0, 50), count=st.integers(1, 40))
def test_draw_depends_only_on_seed_and_index(seed, start, count):
    d = XiDistribution.triangular()
    full = d.sample(seed, start + count)
    part = d.sample(seed, count, start=start)
    np.testing.assert_array_equal(full[start:], part)


def test_uniform_stream_split_is_consistent():
    whole = rng.uniforms(9, 0, 3, 0, 103)
    pieces = np.concatenate([rng.uniforms(9, 0, 3, s, min(17, 103 - s)) for s in range(0, 103, 17)])
    np.testing.assert_array_equal(whole, pieces)
    assert np.all((whole > 0) & (whole < 1))


def test_config_round_trip():
    d = XiDistribution.from_config({"family": "triangular", "params": [-2 * SQ2, SQ2, SQ2]})
    assert d.standardized
    assert XiDistribution.from_config({"family": "uniform"}).params == (-SQ3, SQ3)
    assert XiDistribution.from_config(d.to_config()).params == d.params
