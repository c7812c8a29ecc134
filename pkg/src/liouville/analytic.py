"""Closed-form densities and moments of the position and velocity models."""

from __future__ import annotations

import math

import numpy as np

from .curves import MomentSeries, PdfCurve
from .errors import DomainError, ParameterDomainError
from .models import PositionModel, VelocityModel
from .rand_inputs import XiDistribution

STANDARD_NORMAL = XiDistribution.normal()


def _positive(t):
    if np.any(np.asarray(t) <= 0):
        raise DomainError("closed-form density needs t > 0")


def heat_kernel(x, t, u_p, D):
    """Gaussian solution of the drift-diffusion equation started from a point at 0."""
    _positive(t)
    x = np.asarray(x, dtype=float)
    return np.exp(-((x - u_p * t) ** 2) / (4 * D * t)) / np.sqrt(4 * math.pi * D * t)


def ou_pdf(u, t, model: VelocityModel):
    """Gaussian velocity marginal for a standard normal coefficient."""
    _positive(t)
    mean = model.v0 * math.exp(-t)
    var = -model.D * math.expm1(-2 * t)
    u = np.asarray(u, dtype=float)
    return np.exp(-((u - mean) ** 2) / (2 * var)) / np.sqrt(2 * math.pi * var)


def affine_pdf(dist, y, offset, scale):
    """Density of ``offset + scale * Xi`` at ``y``."""
    if scale <= 0:
        raise DomainError("affine image of the coefficient is a point mass")
    return dist.pdf((np.asarray(y, dtype=float) - offset) / scale) / scale


def affine_curve(dist, offset, scale, grid=None, points=1001, width=8.0, meta=None):
    """PdfCurve of ``offset + scale * Xi``.

    The default grid is ``mean +- width * std`` in coefficient space, clipped to
    a bounded support so its ends fall on grid nodes.
    """
    if scale <= 0 or dist.is_degenerate:
        raise DomainError("affine image of the coefficient is a point mass")
    if grid is None:
        lo, hi = dist.support
        xi = np.linspace(max(lo, dist.mean - width * dist.std),
                         min(hi, dist.mean + width * dist.std), points)
        return PdfCurve(offset + scale * xi, dist.pdf(xi) / scale, dict(meta or {}))
    grid = np.asarray(grid, dtype=float)
    return PdfCurve(grid, affine_pdf(dist, grid, offset, scale), dict(meta or {}))


def position_pdf(model: PositionModel, dist: XiDistribution, x, t):
    """``f_X(x; t) = f_Xi((x - u_p t) / sqrt(2Dt)) / sqrt(2Dt)``."""
    _positive(t)
    out = affine_pdf(dist, x, model.u_p * t, math.sqrt(2 * model.D * t))
    return float(out) if np.ndim(out) == 0 else out


def position_pdf_curve(model, dist, t, grid=None, points=1001):
    _positive(t)
    return affine_curve(dist, model.u_p * t, math.sqrt(2 * model.D * t), grid, points,
                        meta={"model": "position", "t": float(t), "method": "analytic"})


def velocity_model_pdfs(model: VelocityModel, dist: XiDistribution, t, grid_x=None,
                        grid_u=None, points=1001):
    """Marginals ``(f_X, f_U)`` at time ``t`` for a deterministic start."""
    _positive(t)
    meta = {"model": "velocity", "t": float(t), "method": "analytic"}
    fx = affine_curve(dist, model.mean_x(t), model.sigma_x(t), grid_x, points, meta=meta)
    fu = affine_curve(dist, model.mean_u(t), model.sigma_u(t), grid_u, points, meta=meta)
    return fx, fu


def position_central_moment(model: PositionModel, dist, order, t):
    """``E[X'^n] = E[Xi'^n] (2Dt)^(n/2)``."""
    if order < 2:
        raise ParameterDomainError("central moment order must be >= 2")
    if t < 0:
        raise DomainError("t must be >= 0")
    return dist.central_moment(order) * (2 * model.D * t) ** (order / 2)


def velocity_central_moment(model: VelocityModel, dist, order, t, component="u"):
    """Central moment of X or U: ``E[Xi'^n] sigma^n`` (the state is affine in Xi)."""
    if component not in ("x", "u"):
        raise ParameterDomainError("component must be 'x' or 'u'")
    sigma = model.sigma_x(t) if component == "x" else model.sigma_u(t)
    return dist.central_moment(order) * sigma ** order


def position_moments(model: PositionModel, t, dist=STANDARD_NORMAL):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    s = np.sqrt(2 * model.D * t)
    return MomentSeries.build(
        t, var_xi=dist.var, meta={"model": "position", "source": "closed_form"},
        mean_x=model.u_p * t + dist.mean * s, var_x=dist.var * s * s, cov_xi_x=dist.var * s,
    )


def velocity_model_moments(model: VelocityModel, t, init="deterministic", dist=STANDARD_NORMAL):
    """Closed-form first and second moments of (X, U, Xi).

    ``init="maxwellian"`` starts U from a Gaussian with mean ``v0`` and variance
    ``D`` independent of Xi; the position variance then becomes
    ``2 tau_p^2 D (t - 1 + e^{-t})``.
    """
    if init not in ("deterministic", "maxwellian"):
        raise ParameterDomainError("init must be 'deterministic' or 'maxwellian'")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < 0):
        raise DomainError("t must be >= 0")
    sx, su = np.asarray(model.sigma_x(t)), np.asarray(model.sigma_u(t))
    m, s2 = dist.mean, dist.var
    var_x, cov_xu, var_u = s2 * sx * sx, s2 * sx * su, s2 * su * su
    if init == "maxwellian":
        tau, D, e = model.tau_p, model.D, np.exp(-t)
        var_x = var_x + tau * tau * D * np.expm1(-t) ** 2
        cov_xu = cov_xu + tau * D * (e - e * e)
        var_u = var_u + D * e * e
    return MomentSeries.build(
        t, var_xi=s2, meta={"model": "velocity", "init": init, "source": "closed_form"},
        mean_x=np.asarray(model.mean_x(t)) + m * sx, mean_u=np.asarray(model.mean_u(t)) + m * su,
        var_x=var_x, cov_xu=cov_xu, var_u=var_u, cov_xi_x=s2 * sx, cov_xi_u=s2 * su,
    )


def taylor_position_variance(model: VelocityModel, t):
    """Ballistic-to-diffusive dispersion ``2 tau_p^2 D (t - 1 + e^{-t})``."""
    t = np.asarray(t, dtype=float)
    out = 2 * model.tau_p ** 2 * model.D * (t + np.expm1(-t))
    return float(out) if out.ndim == 0 else out
