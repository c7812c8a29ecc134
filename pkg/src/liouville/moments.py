"""First and second moment equations of linear random-forcing systems.

With the augmented vector ``q = (state, Xi)`` every solved model is linear,
``dq/dt = A(t) q + c(t)`` with ``dXi/dt = 0``, so the moments close exactly::

    dm/dt = A m + c
    dC/dt = A C + C A^T

The coefficient block of ``C`` stays constant and the state-coefficient
block gives the cross covariances.
"""

from __future__ import annotations

import numpy as np

from .analytic import STANDARD_NORMAL, position_moments, velocity_model_moments
from .curves import MomentSeries
from .errors import ParameterDomainError, UnsupportedClosureError
from .models import DEFAULT_T0, FhhsModel, PositionModel, RandomForcingModel, VelocityModel
from .ode import rk4_record

AFFINE_DRIFTS = frozenset({"constant", "linear", "relaxation", "velocity"})


def linear_system(model, dist=STANDARD_NORMAL):
    """``(A(t), c(t), k_state, laws)`` for the augmented linear system of ``model``."""
    if isinstance(model, PositionModel):
        def a(t):
            return np.array([[0.0, model.phi(t)], [0.0, 0.0]])
        return a, lambda t: np.array([model.u_p, 0.0]), 1, (dist,)
    if isinstance(model, VelocityModel):
        def a(t):
            return np.array([[0.0, model.tau_p, model.varphi(t)],
                             [0.0, -1.0, model.phi(t)],
                             [0.0, 0.0, 0.0]])
        return a, lambda t: np.zeros(3), 2, (dist,)
    if isinstance(model, FhhsModel):
        def a(t):
            return np.array([[-1.0 / model.tau_p, model.phi(t)], [0.0, 0.0]])
        return a, lambda t: np.zeros(2), 1, (dist,)
    if isinstance(model, RandomForcingModel):
        if model.drift.name not in AFFINE_DRIFTS:
            raise UnsupportedClosureError(f"drift {model.drift.name!r} has no closed moment system")
        k, mcoef = model.dim, model.n_coefficients
        size = k + mcoef
        zero = np.zeros((k, 1))

        def a(t):
            out = np.zeros((size, size))
            out[:k, :k] = np.asarray(model.drift.jacobian(t, zero))[..., 0]
            for term in model.terms:
                out[term.component, k + term.coefficient] += float(term.basis(t))
            return out

        def c(t):
            out = np.zeros(size)
            out[:k] = np.asarray(model.drift(t, zero))[:, 0]
            return out

        return a, c, k, model.coefficients
    raise ParameterDomainError(f"no moment system for {type(model).__name__}")


def integrate_linear_moments(a, c, mean0, cov0, t0, times, dt=1e-3, power=1):
    """Integrate the mean/covariance system; returns (means (T, n), covs (T, n, n))."""
    mean0 = np.asarray(mean0, dtype=float)
    n = mean0.size
    z0 = np.concatenate([mean0, np.asarray(cov0, dtype=float).ravel()])

    def rhs(t, z):
        am = a(t)
        cov = z[n:].reshape(n, n)
        dcov = am @ cov
        return np.concatenate([am @ z[:n] + c(t), (dcov + dcov.T).ravel()])

    rec = rk4_record(rhs, t0, z0, times, dt, power)
    return rec[:, :n], rec[:, n:].reshape(-1, n, n)


def _series(kind, times, means, covs, k, var_xi, meta):
    if kind == "velocity" or k == 2:
        cols = dict(mean_x=means[:, 0], mean_u=means[:, 1], var_x=covs[:, 0, 0],
                    cov_xu=covs[:, 0, 1], var_u=covs[:, 1, 1], cov_xi_x=covs[:, 0, 2],
                    cov_xi_u=covs[:, 1, 2])
    elif kind == "fhhs":
        cols = dict(mean_u=means[:, 0], var_u=covs[:, 0, 0], cov_xi_u=covs[:, 0, 1])
    else:
        cols = dict(mean_x=means[:, 0], var_x=covs[:, 0, 0], cov_xi_x=covs[:, 0, 1])
    return MomentSeries.build(times, var_xi=var_xi, meta=meta, **cols)


def _seed_from(series, k):
    """Augmented (mean, cov) at the first time of a closed-form series."""
    if k == 1:
        m = [series.mean_x[0], 0.0]
        cov = [[series.var_x[0], series.cov_xi_x[0]], [series.cov_xi_x[0], series.var_xi]]
        return np.array(m), np.array(cov)
    m = [series.mean_x[0], series.mean_u[0], 0.0]
    cov = [[series.var_x[0], series.cov_xu[0], series.cov_xi_x[0]],
           [series.cov_xu[0], series.var_u[0], series.cov_xi_u[0]],
           [series.cov_xi_x[0], series.cov_xi_u[0], series.var_xi]]
    return np.array(m), np.array(cov)


def _times(t_end, times):
    if times is None:
        return np.array([float(t_end)])
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0):
        raise ParameterDomainError("output times must be increasing")
    return times


def integrate_position_moments(model: PositionModel, dist=STANDARD_NORMAL, t_end=1.0,
                               times=None, t0=DEFAULT_T0, dt=1e-3):
    """RK4 solution of the position moment system, seeded exactly at ``t0``."""
    times = _times(t_end, times)
    if times[0] < t0:
        raise ParameterDomainError("output times must be >= t0")
    a, c, k, _ = linear_system(model, dist)
    seed = position_moments(model, t0, dist)
    mean0, cov0 = _seed_from(seed, 1)
    mean0[1] = dist.mean
    means, covs = integrate_linear_moments(a, c, mean0, cov0, t0, times, dt, model.clock_power)
    meta = {"model": "position", "source": "ode"}
    return _series("position", times, means, covs, k, dist.var, meta)


def integrate_velocity_moments(model: VelocityModel, init="deterministic", t_end=1.0,
                               times=None, dist=STANDARD_NORMAL, t0=DEFAULT_T0, dt=1e-3):
    """RK4 solution of the seven-moment velocity system, seeded exactly at ``t0``."""
    times = _times(t_end, times)
    if times[0] < t0:
        raise ParameterDomainError("output times must be >= t0")
    a, c, k, _ = linear_system(model, dist)
    seed = velocity_model_moments(model, t0, init, dist)
    mean0, cov0 = _seed_from(seed, 2)
    mean0[2] = dist.mean
    means, covs = integrate_linear_moments(a, c, mean0, cov0, t0, times, dt, model.clock_power)
    meta = {"model": "velocity", "init": init, "source": "ode"}
    return _series("velocity", times, means, covs, k, dist.var, meta)


def integrate_fhhs_moments(model: FhhsModel, t_end=1.0, times=None, dist=None, dt=None,
                           u0=0.0):
    """RK4 solution of the FHHS mean/variance/cross-covariance system from t = 0.

    ``dist`` defaults to a zero-mean law with standard deviation ``sigma_xi``.
    """
    times = _times(t_end, times)
    if dist is None:
        dist = STANDARD_NORMAL.scaled(model.sigma_xi)
    if dt is None:
        dt = min(1e-3, model.tau_p / model.C1)
    a, c, k, _ = linear_system(model, dist)
    mean0 = np.array([u0, dist.mean])
    cov0 = np.array([[0.0, 0.0], [0.0, dist.var]])
    means, covs = integrate_linear_moments(a, c, mean0, cov0, 0.0, times, dt, model.clock_power)
    meta = {"model": "fhhs", "source": "ode"}
    return _series("fhhs", times, means, covs, k, dist.var, meta)


def integrate_forcing_moments(model: RandomForcingModel, t_end=1.0, times=None, y0=None,
                              init_mean=None, init_cov=None, dt=1e-3):
    """Moments of a generic affine random-forcing model started at ``model.t_start``.

    The default start is a deterministic state with independent coefficients;
    ``init_mean``/``init_cov`` (augmented vector) override it.  Cross columns
    ``cov_xi_*`` refer to the first coefficient.
    """
    times = _times(t_end, times)
    a, c, k, laws = linear_system(model)
    size = k + len(laws)
    if init_mean is None:
        state = model.initial_point if y0 is None else np.asarray(y0, dtype=float)
        init_mean = np.concatenate([state, [law.mean for law in laws]])
    if init_cov is None:
        init_cov = np.zeros((size, size))
        init_cov[k:, k:] = np.diag([law.var for law in laws])
    means, covs = integrate_linear_moments(a, c, init_mean, init_cov, model.t_start, times, dt,
                                           model.clock_power)
    keep = list(range(k)) + [k]
    covs = covs[:, keep][:, :, keep]
    meta = {"model": "forcing", "source": "ode"}
    return _series("forcing", times, means, covs, k, laws[0].var, meta)


def integrate_product_moments(model, closure=None, **_):
    """Moment system for products of nonlinear drag corrections.

    Needs concrete closure functions for the higher-order correlations; none
    are available, so only the closed linear systems are integrated.
    """
    raise UnsupportedClosureError(
        "nonlinear drift moments need a closure for higher-order correlations; "
        "only affine drifts are supported"
    )
