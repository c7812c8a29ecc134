import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from liouville.errors import DomainError, ParameterDomainError, SingularForcingWarning
from liouville.models import (
    Basis,
    Drift,
    FhhsModel,
    ForcingTerm,
    PositionModel,
    RandomForcingModel,
    VelocityModel,
    as_forcing_model,
    dispersion_shape,
    model_from_config,
    phi_position,
    phi_varphi_velocity,
)
from liouville.rand_inputs import XiDistribution


def central_diff(fn, t, h=1e-5):
    return (fn(t + h) - fn(t - h)) / (2 * h)


def test_position_forcing_values():
    m = PositionModel(u_p=5.0, D=2.5)
    assert phi_position(m, 1.0) == pytest.approx(math.sqrt(1.25), rel=1e-12)
    assert m.phi(0.05) == pytest.approx(5.0, rel=1e-12)
    with pytest.raises(DomainError):
        m.phi(0.0)
    with pytest.raises(ParameterDomainError):
        PositionModel(1.0, -0.1)


@given(t=st.floats(0.01, 20.0), D=st.floats(0.01, 5.0))
def test_position_scale_derivative_is_forcing(t, D):
    m = PositionModel(0.0, D)
    assert central_diff(m.scale, t, 1e-6 * t) == pytest.approx(m.phi(t), rel=1e-6)


def test_dispersion_shape_series_branch_is_continuous():
    t = np.array([0.4999999, 0.5, 0.5000001])
    direct = 2 * t - 3 + 4 * np.exp(-t) - np.exp(-2 * t)
    np.testing.assert_allclose(dispersion_shape(t), direct, rtol=1e-9)
    small = 1e-4
    assert dispersion_shape(small) == pytest.approx(2 * small ** 3 / 3, rel=1e-3)


def test_velocity_known_values():
    m = VelocityModel(tau_p=10.0, D=0.02)
    varphi, phi = phi_varphi_velocity(m, 1.0)
    assert phi == pytest.approx(0.152087, abs=1e-6)
    assert phi == pytest.approx(math.sqrt(0.02 / (1 - math.exp(-2))), rel=1e-12)
    assert m.sigma_x(1.0) ** 2 == pytest.approx(0.672365, rel=1e-5)
    assert m.sigma_u(1.0) ** 2 == pytest.approx(0.0172933, rel=1e-5)
    assert abs(varphi) < 1.0


@given(t=st.floats(0.02, 15.0))
def test_velocity_forcings_from_standard_deviations(t):
    m = VelocityModel(tau_p=10.0, D=0.02)
    h = 1e-5 * max(t, 1.0)
    lhs_u = central_diff(m.sigma_u, t, h) + m.sigma_u(t)
    assert lhs_u == pytest.approx(m.phi(t), rel=1e-6)
    lhs_x = central_diff(m.sigma_x, t, h) - m.tau_p * m.sigma_u(t)
    assert lhs_x == pytest.approx(m.varphi(t), rel=1e-5, abs=1e-8)


@given(t=st.floats(0.01, 30.0))
def test_velocity_varphi_closed_form(t):
    m = VelocityModel(tau_p=10.0, D=0.02)
    g = 2 * t - 3 + 4 * math.exp(-t) - math.exp(-2 * t)
    expected = m.tau_p * math.sqrt(m.D) * (1 - math.exp(-t)) ** 2 / math.sqrt(g)
    assert m.varphi(t) + m.tau_p * m.sigma_u(t) == pytest.approx(expected, rel=1e-9)


def test_velocity_varphi_limit():
    m = VelocityModel(tau_p=10.0, D=0.02)
    # approaches -tau_p sqrt(D) like 1 / sqrt(2t)
    for t in (1e2, 1e4, 1e6):
        gap = m.varphi(t) + m.tau_p * math.sqrt(m.D)
        assert gap == pytest.approx(m.tau_p * math.sqrt(m.D) / math.sqrt(2 * t), rel=2 / t)


@pytest.mark.parametrize("model,t", [
    (PositionModel(5.0, 2.5), 0.7),
    (VelocityModel(10.0, 0.02), 1.3),
    (FhhsModel(0.14, 0.9488, 823.37), 0.003),
])
@pytest.mark.parametrize("xi", [-1.5, 0.0, 2.0])
def test_characteristic_solves_rhs(model, t, xi):
    h = 1e-4 * t
    deriv = (model.characteristic(t + h, xi) - model.characteristic(t - h, xi)) / (2 * h)
    y = model.characteristic(t, xi)[:, None]
    rhs = model.rhs(t, y, np.array([xi]))[:, 0]
    np.testing.assert_allclose(deriv, rhs, rtol=1e-6, atol=1e-7 * (1 + abs(xi) * abs(np.max(model.phi(t)))))


def test_fhhs_forcing_identity():
    m = FhhsModel(tau_p=0.14, sigma_xi=0.9488, C1=823.37, C2=1.2)
    for t in np.geomspace(1e-5, 0.1, 12):
        deriv = central_diff(m.eta, t, 1e-4 * t)
        assert deriv + m.eta(t) / m.tau_p == pytest.approx(m.phi(t), rel=1e-6)
    assert m.eta(0.0) == 0.0
    assert m.eta(50.0) == pytest.approx(1.0)
    assert m.phi(50.0) == pytest.approx(1 / m.tau_p)


def test_fhhs_singular_warning_and_validation():
    m = FhhsModel(0.14, 1.0, 100.0, C2=1.0)
    with pytest.warns(SingularForcingWarning):
        m.phi(0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        FhhsModel(0.14, 1.0, 100.0, C2=1.2).phi(0.0)
    with pytest.raises(ParameterDomainError):
        FhhsModel(0.0, 1.0, 1.0)
    with pytest.raises(ParameterDomainError):
        FhhsModel(0.14, 1.0, 1.0, C2=0.5)
    with pytest.raises(DomainError):
        m.eta(-1.0)


def test_fhhs_power_clock():
    assert FhhsModel(0.14, 1.0, 10.0, C2=1.2).clock_power == pytest.approx(5.0)
    assert FhhsModel(0.14, 1.0, 10.0, C2=2.5).clock_power == 1


@pytest.mark.parametrize("model", [PositionModel(5.0, 2.5), VelocityModel(10.0, 0.02),
                                   FhhsModel(0.14, 0.9488, 823.37)])
def test_forcing_form_matches_canonical_rhs(model):
    dist = XiDistribution.normal()
    general = as_forcing_model(model, dist)
    y = np.array([[0.3, -1.0, 2.0]] * model.dim)
    xi = np.array([0.5, -2.0, 1.0])
    for t in (0.01, 0.4, 2.0):
        np.testing.assert_allclose(general.rhs(t, y, xi), model.rhs(t, y, xi), rtol=1e-13)
        np.testing.assert_allclose(general.divergence(t, y, xi), model.divergence(t, y, xi))
    again = model_from_config(general.to_config())
    np.testing.assert_allclose(again.rhs(0.4, y, xi), general.rhs(0.4, y, xi))


def test_forcing_model_validation():
    normal = XiDistribution.normal()
    singular = ForcingTerm(Basis("power", {"c": 1.0, "p": -0.5}))
    with pytest.raises(ParameterDomainError):
        RandomForcingModel(Drift("constant", {"value": 0.0}), (singular,), (normal,))
    RandomForcingModel(Drift("constant", {"value": 0.0}), (singular,), (normal,), t_start=1e-3)
    with pytest.raises(ParameterDomainError):
        Basis("power", {"c": 1.0})
    with pytest.raises(ParameterDomainError):
        Drift("quadratic", {})
    with pytest.raises(ParameterDomainError):
        RandomForcingModel(Drift("constant", {"value": 0.0}),
                           (ForcingTerm(Basis("constant", {"c": 1.0}), coefficient=1),), (normal,))


def test_two_coefficient_forcing():
    model = RandomForcingModel(
        Drift("linear", {"a": 0.0, "b": -1.0}),
        (ForcingTerm(Basis("constant", {"c": 1.0}), 0), ForcingTerm(Basis("exp", {"c": 1.0, "rate": -1.0}), 1)),
        (XiDistribution.normal(), XiDistribution.uniform()),
    )
    xi = np.array([[1.0, 2.0], [3.0, 0.0]])
    out = model.rhs(0.0, np.zeros((1, 2)), xi)
    np.testing.assert_allclose(out, [[4.0, 2.0]])
    with pytest.raises(ParameterDomainError):
        model.rhs(0.0, np.zeros((1, 2)), np.ones((3, 2)))


def test_table_basis_interpolates():
    b = Basis("table", {"t_values": [0.0, 1.0, 2.0], "values": [0.0, 2.0, 0.0]})
    assert b(0.5) == pytest.approx(1.0)
    assert b(1.5) == pytest.approx(1.0)


def test_model_config_round_trip_and_rejection():
    for m in (PositionModel(5.0, 2.5), VelocityModel(10.0, 0.02, 0.5),
              FhhsModel(0.14, 0.9, 800.0, Re_m=20.0)):
        assert model_from_config(m.to_config()) == m
    with pytest.raises(ParameterDomainError):
        model_from_config({"type": "position", "u_p": 1.0, "D": 1.0, "extra": 1})
    with pytest.raises(ParameterDomainError):
        model_from_config({"type": "position", "u_p": 1.0})
    with pytest.raises(ParameterDomainError):
        model_from_config({"type": "nope"})
