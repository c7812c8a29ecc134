import math

import numpy as np
import pytest
from scipy import stats

from liouville.characteristics import (
    CharState,
    affine_response,
    flow_map_jacobian,
    freedman_diaconis_edges,
    histogram_curve,
    initial_state,
    integrate_characteristic,
    integrate_ensemble_threaded,
    mc_marginal_pdf,
    mc_terminal_states,
    transform_pdf,
)
from liouville.curves import PdfCurve
from liouville.errors import DomainError, MassLossWarning, ParameterDomainError, UnsupportedError
from liouville.langevin import ks_distance
from liouville.models import (
    Basis,
    Drift,
    FhhsModel,
    ForcingTerm,
    PositionModel,
    RandomForcingModel,
    VelocityModel,
    as_forcing_model,
)
from liouville.rand_inputs import XiDistribution

NORMAL = XiDistribution.normal()
SQ3 = math.sqrt(3.0)


def gaussian_curve(mean, sd, lo, hi, n=4001):
    x = np.linspace(lo, hi, n)
    return PdfCurve(x, stats.norm(mean, sd).pdf(x))


@pytest.mark.parametrize("model,xi", [(VelocityModel(10.0, 0.02), 1.3),
                                      (FhhsModel(0.14, 0.9488, 823.37), 0.0),
                                      (FhhsModel(0.14, 0.9488, 823.37), -0.7),
                                      (PositionModel(5.0, 2.5), 2.0)])
def test_rk4_characteristic_matches_closed_form(model, xi):
    t_end = 0.05 if isinstance(model, FhhsModel) else 2.0
    end = integrate_characteristic(model, initial_state(model, xi), t_end, dt=1e-3 * t_end)
    np.testing.assert_allclose(end.state, model.characteristic(t_end, xi), rtol=1e-8, atol=1e-8)


def test_position_characteristic_example():
    m = PositionModel(u_p=5.0, D=2.5)
    end = integrate_characteristic(m, initial_state(m, 0.0), 1.2)
    assert end.state[0] == pytest.approx(6.0, abs=1e-12)


def test_log_density_tracks_divergence():
    m = VelocityModel(10.0, 0.02)
    end = integrate_characteristic(m, CharState(0.5, [0.0, 1.0], 0.0), 2.5)
    assert end.logdens == pytest.approx(2.0, rel=1e-12)


def test_characteristic_argument_checks():
    m = PositionModel(1.0, 1.0)
    with pytest.raises(ParameterDomainError):
        integrate_characteristic(m, CharState(1.0, [0.0], 0.0), 0.5)
    with pytest.raises(ParameterDomainError):
        integrate_characteristic(m, CharState(1.0, [0.0], 0.0), 2.0, dt=0.0)


@pytest.mark.parametrize("method", ["variational", "finite_difference"])
def test_velocity_jacobian(method):
    m = VelocityModel(10.0, 0.02)
    for t in (0.5, 1.0, 3.0):
        assert flow_map_jacobian(m, 1e-10, t, method) == pytest.approx(math.exp(-t), abs=1e-6)


@pytest.mark.parametrize("method", ["variational", "finite_difference"])
def test_fhhs_and_position_jacobians(method):
    f = FhhsModel(0.14, 0.9488, 823.37)
    assert flow_map_jacobian(f, 0.0, 0.14, method, dt=1e-4, xi=0.5) == pytest.approx(math.exp(-1), rel=1e-6)
    p = PositionModel(5.0, 2.5)
    assert flow_map_jacobian(p, 0.1, 2.0, method, xi=1.0) == pytest.approx(1.0, abs=1e-8)


def test_jacobian_requires_forward_time():
    with pytest.raises(ParameterDomainError):
        flow_map_jacobian(PositionModel(1.0, 1.0), 1.0, 1.0)
    with pytest.raises(ParameterDomainError):
        flow_map_jacobian(VelocityModel(1.0, 1.0), 0.1, 1.0, method="adjoint")


def test_dirac_transform_matches_scipy():
    m = PositionModel(5.0, 2.5)
    for t in (0.05, 0.8):
        curve = transform_pdf(m, None, NORMAL, t)
        ref = stats.norm(5 * t, math.sqrt(5 * t)).pdf(curve.coords)
        np.testing.assert_allclose(curve.density, ref, rtol=1e-12, atol=1e-300)
        assert curve.mass() == pytest.approx(1.0, abs=1e-9)


def test_uniform_marginal_has_exact_mass():
    curve = transform_pdf(PositionModel(5.0, 2.5), None, XiDistribution.uniform(), 0.8)
    assert curve.mass() == pytest.approx(1.0, abs=1e-12)
    assert curve.density.max() == pytest.approx(1 / (2 * SQ3 * 2.0), rel=1e-12)


def test_point_mass_marginal_raises():
    with pytest.raises(DomainError):
        transform_pdf(PositionModel(5.0, 0.0), None, NORMAL, 1.0)


def test_mass_loss_warning_on_narrow_grid():
    m = PositionModel(5.0, 2.5)
    with pytest.warns(MassLossWarning):
        curve = transform_pdf(m, None, NORMAL, 1.0, grid=np.linspace(4.0, 6.0, 101))
    assert curve.meta["warning"] == "mass_loss"


def test_smooth_initial_density_position():
    # X(t) = X(t0) + u_p (t - t0) + Xi (sqrt(2Dt) - sqrt(2Dt0))
    m = PositionModel(5.0, 2.5)
    t0, t, s0 = 0.2, 1.0, 0.4
    init = gaussian_curve(0.0, s0, -4, 4)
    grid = np.linspace(-2, 10, 241)
    curve = transform_pdf(m, init, NORMAL, t, grid=grid, t0=t0)
    width = math.sqrt(2 * m.D * t) - math.sqrt(2 * m.D * t0)
    ref = stats.norm(m.u_p * (t - t0), math.hypot(s0, width)).pdf(grid)
    np.testing.assert_allclose(curve.density, ref, atol=1e-6)


def test_smooth_initial_density_fhhs_uses_jacobian():
    m = FhhsModel(0.14, 0.9488, 823.37)
    t0, t, s0 = 0.01, 0.15, 0.3
    init = gaussian_curve(0.2, s0, -3, 3)
    grid = np.linspace(-3, 3, 61)
    curve = transform_pdf(m, init, XiDistribution.normal(0.0, m.sigma_xi), t, grid=grid, t0=t0,
                          dt=5e-4, quad_nodes=8)
    decay = math.exp(-(t - t0) / m.tau_p)
    width = m.sigma_xi * (m.eta(t) - m.eta(t0) * decay)
    ref = stats.norm(0.2 * decay, math.hypot(s0 * decay, width)).pdf(grid)
    np.testing.assert_allclose(curve.density, ref, atol=2e-5 * ref.max())


def test_smooth_initial_density_velocity_marginal():
    m = VelocityModel(10.0, 0.02)
    t0, t, s0 = 0.5, 1.5, 0.1
    init_x = gaussian_curve(0.0, 0.2, -1.5, 1.5, 601)
    init_u = gaussian_curve(1.0, s0, 0.2, 1.8, 601)
    grid = np.linspace(-0.3, 0.9, 25)
    curve = transform_pdf(m, (init_x, init_u), NORMAL, t, grid=grid, component=1, t0=t0,
                          dt=2e-2, other_grid=np.linspace(-3, 12, 121), quad_nodes=4)
    decay = math.exp(-(t - t0))
    width = m.sigma_u(t) - m.sigma_u(t0) * decay
    ref = stats.norm(decay, math.hypot(s0 * decay, width)).pdf(grid)
    np.testing.assert_allclose(curve.density, ref, atol=2e-4 * ref.max())


def test_affine_response_and_rejection():
    a, b = affine_response(VelocityModel(10.0, 0.02), 1.0)
    np.testing.assert_allclose(b, [VelocityModel(10.0, 0.02).sigma_x(1.0), VelocityModel(10.0, 0.02).sigma_u(1.0)])

    class Quadratic:
        dim, clock_power, kind = 1, 1, "quadratic"
        initial_point = np.zeros(1)

        def rhs(self, t, y, xi):
            return (xi ** 2)[None] * np.ones_like(y)

        def jacobian(self, t, y, xi):
            return np.zeros((1, 1) + np.shape(y)[1:])

        def divergence(self, t, y, xi):
            return np.zeros(np.shape(y)[1:])

    with pytest.raises(UnsupportedError):
        affine_response(Quadratic(), 1.0, t0=0.0)


def test_multi_coefficient_transform_is_unsupported():
    model = RandomForcingModel(
        Drift("linear", {"a": 0.0, "b": -1.0}),
        (ForcingTerm(Basis("constant", {"c": 1.0}), 0), ForcingTerm(Basis("constant", {"c": 1.0}), 1)),
        (NORMAL, NORMAL),
    )
    with pytest.raises(UnsupportedError):
        transform_pdf(model, None, None, 1.0)
    # sum of two independent N(0,1) terms: U(t) = (Xi1 + Xi2)(1 - e^{-t})
    u = mc_terminal_states(model, None, 20_000, 1.0, seed=4, dt=0.01)[0]
    assert np.var(u) == pytest.approx(2 * (1 - math.exp(-1)) ** 2, rel=0.04)


@pytest.mark.parametrize("model", [PositionModel(5.0, 2.5), VelocityModel(10.0, 0.02),
                                   FhhsModel(0.14, 0.9488, 823.37)])
def test_exact_and_rk4_monte_carlo_agree(model):
    t = 0.1 if isinstance(model, FhhsModel) else 1.0
    exact = mc_terminal_states(model, NORMAL, 500, t, seed=2, exact=True)
    rk4 = mc_terminal_states(model, NORMAL, 500, t, seed=2, exact=False, dt=1e-4 if t < 1 else 1e-3)
    np.testing.assert_allclose(rk4, exact, rtol=1e-7, atol=1e-7)


def test_forcing_form_monte_carlo_matches_canonical():
    m = VelocityModel(10.0, 0.02)
    general = as_forcing_model(m, NORMAL)
    a = mc_terminal_states(general, None, 300, 1.0, seed=8)
    b = mc_terminal_states(m, NORMAL, 300, 1.0, seed=8)
    np.testing.assert_allclose(a, b, rtol=1e-5, atol=1e-5)


def test_threading_does_not_change_results():
    m = FhhsModel(0.14, 0.9488, 823.37)
    xi = NORMAL.sample(1, 70_000)
    one = integrate_ensemble_threaded(m, xi, 0.0, [0.01], dt=1e-3, threads=1)
    four = integrate_ensemble_threaded(m, xi, 0.0, [0.01], dt=1e-3, threads=4)
    np.testing.assert_array_equal(one, four)


@pytest.mark.parametrize("dist", [NORMAL, XiDistribution.uniform(), XiDistribution.triangular()],
                         ids=lambda d: d.family)
def test_mc_marginal_ks(dist):
    m = PositionModel(5.0, 2.5)
    t = 0.8
    curve = mc_marginal_pdf(m, dist, 100_000, t, seed=5)
    s = math.sqrt(2 * m.D * t)
    assert ks_distance(curve, lambda x: dist.cdf((x - m.u_p * t) / s)) < 0.01
    assert curve.mass() == pytest.approx(1.0, abs=1e-12)


def test_mc_needs_enough_samples():
    with pytest.raises(ParameterDomainError):
        mc_marginal_pdf(PositionModel(5.0, 2.5), NORMAL, 50, 1.0)


def test_zero_diffusion_histogram_is_one_bin():
    curve = mc_marginal_pdf(PositionModel(5.0, 0.0), NORMAL, 1000, 0.8, seed=1)
    assert curve.edges.size == 2
    assert curve.mean() == pytest.approx(4.0, abs=1e-12)


def test_freedman_diaconis_width():
    x = NORMAL.sample(3, 10_000)
    edges = freedman_diaconis_edges(x)
    q75, q25 = np.percentile(x, [75, 25])
    assert np.diff(edges)[0] <= 2 * (q75 - q25) / 10_000 ** (1 / 3) + 1e-12
    h = histogram_curve(x, 40)
    assert h.mass() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(DomainError):
        histogram_curve([])
