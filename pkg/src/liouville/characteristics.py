"""Characteristics of the Liouville equation, flow-map Jacobians, and PDFs built from them.

Along a characteristic with fixed coefficient ``xi`` the state obeys
``dy/dt = rhs(t, y, xi)`` and the log density obeys ``dlogf/dt = -div``.
Marginals follow either by the method of transformations (quadrature over
``xi``) or by Monte Carlo over ``xi``.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .curves import PdfCurve
from .errors import (
    DomainError,
    MassLossWarning,
    ParameterDomainError,
    UnsupportedError,
)
from .models import DEFAULT_T0, FhhsModel, PositionModel, RandomForcingModel, VelocityModel
from .ode import rk4, rk4_record
from .rand_inputs import XiDistribution

DEFAULT_DT = 1e-3
FD_STEP = 1e-6
MASS_TOLERANCE = 1e-3
CHUNK = 65536

CANONICAL = (PositionModel, VelocityModel, FhhsModel)


@dataclass(frozen=True)
class CharState:
    """Point on one characteristic: time, phase coordinates, coefficient, log density factor."""

    t: float
    state: np.ndarray
    xi: object
    logdens: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "state", np.atleast_1d(np.asarray(self.state, dtype=float)))


def start_time(model):
    """Default start of integration: t0 > 0 where the forcing is singular at 0."""
    if isinstance(model, (PositionModel, VelocityModel)):
        return DEFAULT_T0
    if isinstance(model, RandomForcingModel):
        return model.t_start
    return 0.0


def initial_state(model, xi, t0=None, y0=None):
    """Characteristic state at ``t0`` seeded from the deterministic initial point.

    Canonical models use their closed-form characteristic so that starting at
    ``t0 > 0`` introduces no error.  ``logdens`` is zero at t = 0.
    """
    t0 = start_time(model) if t0 is None else float(t0)
    if isinstance(model, CANONICAL):
        state = model.characteristic(t0, xi, y0)
        div = float(np.asarray(model.divergence(t0, state[:, None], xi)).ravel()[0])
        return CharState(t0, state, xi, -div * t0)
    state = model.initial_point if y0 is None else np.asarray(y0, dtype=float)
    return CharState(t0, state, xi, 0.0)


def _augmented_rhs(model, xi):
    dim = model.dim

    def rhs(t, y):
        out = np.empty_like(y)
        out[:dim] = model.rhs(t, y[:dim], xi)
        out[dim] = -model.divergence(t, y[:dim], xi)
        return out

    return rhs


def _xi_columns(model, xi, n):
    """Coefficient array shaped for ``model.rhs`` with ``n`` characteristics."""
    xi = np.asarray(xi, dtype=float)
    if isinstance(model, RandomForcingModel) and model.n_coefficients > 1:
        xi = xi.reshape(model.n_coefficients, -1)
        return np.broadcast_to(xi, (model.n_coefficients, n))
    return np.broadcast_to(xi.reshape(-1), (n,)) if xi.size in (1, n) else xi


def integrate_ensemble(model, xi, t0, y0, times, dt=DEFAULT_DT, logdens0=0.0):
    """Integrate many characteristics at once.

    ``y0`` has shape (dim, n) (or (dim,) broadcast over ``xi``); returns arrays
    of shape (len(times), dim, n) and (len(times), n).
    """
    y0 = np.asarray(y0, dtype=float)
    xi_arr = np.asarray(xi, dtype=float)
    n = y0.shape[1] if y0.ndim == 2 else xi_arr.shape[-1] if xi_arr.ndim else 1
    if y0.ndim == 1:
        y0 = np.repeat(y0[:, None], n, axis=1)
    cols = _xi_columns(model, xi_arr, n)
    aug = np.vstack([y0, np.broadcast_to(np.asarray(logdens0, dtype=float), (n,))[None]])
    rec = rk4_record(_augmented_rhs(model, cols), t0, aug, np.atleast_1d(times), dt,
                     model.clock_power)
    return rec[:, : model.dim], rec[:, model.dim]


def integrate_characteristic(model, init: CharState, t_end, dt=DEFAULT_DT):
    """RK4 along one characteristic from ``init`` to ``t_end`` (fixed step, last step shortened)."""
    if not t_end > init.t:
        raise ParameterDomainError("t_end must exceed the initial time")
    if dt <= 0:
        raise ParameterDomainError("dt must be positive")
    xi = np.asarray(init.xi, dtype=float).reshape(-1, 1)
    if not (isinstance(model, RandomForcingModel) and model.n_coefficients > 1):
        xi = xi.reshape(1)
    states, logd = integrate_ensemble(model, xi, init.t, init.state, [t_end], dt, init.logdens)
    return CharState(float(t_end), states[0, :, 0], init.xi, float(logd[0, 0]))


def integrate_ensemble_threaded(model, xi, t0, times, dt=DEFAULT_DT, threads=1, y0=None):
    """Terminal states for a vector of coefficients, chunked over worker threads.

    Chunks are fixed-size and results are placed by index, so the output does
    not depend on ``threads``.
    """
    xi = np.asarray(xi, dtype=float)
    n = xi.shape[-1]
    starts = list(range(0, n, CHUNK))

    def run(s):
        part = xi[..., s: s + CHUNK]
        if isinstance(model, CANONICAL):
            y = model.characteristic(t0, part, y0)
        else:
            base = model.initial_point if y0 is None else np.asarray(y0, dtype=float)
            y = np.repeat(base[:, None], part.shape[-1], axis=1)
        if times[-1] == t0 and len(times) == 1:
            return y[None]
        states, _ = integrate_ensemble(model, part, t0, y, times, dt)
        return states

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    return np.concatenate(parts, axis=-1)


# ---------------------------------------------------------------------------
# Jacobians
# ---------------------------------------------------------------------------


def flow_map_jacobian(model, t0, t, method="variational", dt=DEFAULT_DT, xi=0.0, y0=None):
    """Determinant of d y(t) / d y(t0) along the characteristic through ``y0`` at ``t0``."""
    if not t > t0:
        raise ParameterDomainError("need t > t0")
    dim = model.dim
    if y0 is None:
        y0 = initial_state(model, xi, t0).state
    y0 = np.asarray(y0, dtype=float)
    xi_col = np.asarray(xi, dtype=float).reshape(-1)
    if method == "variational":
        def rhs(s, z):
            y = z[:dim]
            m = z[dim:].reshape(dim, dim, -1)
            a = np.asarray(model.jacobian(s, y, xi_col))
            a = np.broadcast_to(a, (dim, dim, y.shape[1]))
            dm = np.einsum("ijn,jkn->ikn", a, m)
            return np.concatenate([model.rhs(s, y, xi_col), dm.reshape(dim * dim, -1)])

        z0 = np.concatenate([y0, np.eye(dim).ravel()])[:, None]
        z = rk4(rhs, t0, z0, t, dt, model.clock_power)
        return float(np.linalg.det(z[dim:, 0].reshape(dim, dim)))
    if method == "finite_difference":
        pert = np.concatenate([y0[:, None] + FD_STEP * np.eye(dim),
                               y0[:, None] - FD_STEP * np.eye(dim)], axis=1)
        xi_b = np.broadcast_to(xi_col, (2 * dim,))
        states, _ = integrate_ensemble(model, xi_b, t0, pert, [t], dt)
        yt = states[0]
        jac = (yt[:, :dim] - yt[:, dim:]) / (2 * FD_STEP)
        return float(np.linalg.det(jac))
    raise ParameterDomainError(f"unknown Jacobian method {method!r}")


# ---------------------------------------------------------------------------
# Method of transformations
# ---------------------------------------------------------------------------


def _mass_check(curve):
    mass = curve.mass()
    if mass < 1.0 - MASS_TOLERANCE:
        curve.meta["warning"] = "mass_loss"
        warnings.warn(f"grid captures only {mass:.6f} of the probability mass", MassLossWarning)
    return curve


def _single_coefficient(model, dist):
    if isinstance(model, RandomForcingModel):
        if model.n_coefficients != 1:
            raise UnsupportedError(
                "quadrature transform supports one random coefficient; use mc_marginal_pdf"
            )
        return model.coefficients[0] if dist is None else dist
    if dist is None:
        raise ParameterDomainError("a coefficient distribution is required")
    return dist


def affine_response(model, t, t0=None, dt=DEFAULT_DT, y0=None):
    """``(a, b)`` with state(t) = a + xi * b for a deterministic start, if affine.

    Raises :class:`UnsupportedError` when three characteristics are not collinear.
    """
    t0 = start_time(model) if t0 is None else t0
    xi = np.array([0.0, 1.0, -1.0])
    if isinstance(model, CANONICAL):
        ys = np.stack([model.characteristic(t, v, y0) for v in xi], axis=1)
    else:
        ys = integrate_ensemble_threaded(model, xi, t0, [t], dt, y0=y0)[0]
    a, b = ys[:, 0], ys[:, 1] - ys[:, 0]
    if not np.allclose(ys[:, 2], a - b, rtol=1e-9, atol=1e-9 * (1 + np.abs(b).max())):
        raise UnsupportedError("terminal state is not affine in xi")
    return a, b


def default_grid(center, scale, dist=None, points=1001, width=8.0):
    """``center +- width*scale`` (clipped to the image of a bounded support)."""
    lo, hi = center - width * abs(scale), center + width * abs(scale)
    if dist is not None:
        s_lo, s_hi = dist.support
        if math.isfinite(s_lo) and math.isfinite(s_hi):
            img = sorted([center + scale * (s_lo - dist.mean), center + scale * (s_hi - dist.mean)])
            pad = 0.02 * (img[1] - img[0])
            lo, hi = max(lo, img[0] - pad), min(hi, img[1] + pad)
    if hi <= lo:
        hi, lo = center + 1.0, center - 1.0
    return np.linspace(lo, hi, points)


def _dirac_marginal(model, dist, t, grid, component, t0, dt, y0, points=1001):
    a, b = affine_response(model, t, t0, dt, y0)
    a_k, b_k = a[component], b[component]
    if b_k == 0.0 or dist.is_degenerate:
        raise DomainError("marginal is a point mass at this time; no density to evaluate")
    if grid is None:
        # build the grid in coefficient space so bounded supports end exactly on nodes
        lo, hi = dist.support
        lo = max(lo, dist.mean - 8.0 * dist.std)
        hi = min(hi, dist.mean + 8.0 * dist.std)
        xi = np.linspace(lo, hi, points)
        if b_k < 0:
            xi = xi[::-1]
        return PdfCurve(a_k + b_k * xi, dist.pdf(xi) / abs(b_k))
    grid = np.asarray(grid, dtype=float)
    return PdfCurve(grid, dist.pdf((grid - a_k) / b_k) / abs(b_k))


def _pullback(model, t, t0, points, xi_nodes, dt):
    """Backward characteristics from (points, t) for every xi node.

    Returns (y0 of shape (dim, G, Q), log density gain of shape (G, Q)).
    """
    g = points.shape[1]
    q = xi_nodes.size
    y = np.repeat(points[:, :, None], q, axis=2).reshape(model.dim, g * q)
    xi = np.tile(xi_nodes, g)
    states, logd = integrate_ensemble(model, xi, t, y, [t0], dt)
    return states[0].reshape(model.dim, g, q), logd[0].reshape(g, q)


def transform_pdf(model, init, dist=None, t=1.0, grid=None, component=0, t0=None,
                  dt=DEFAULT_DT, other_grid=None, quad_nodes=16, y0=None):
    """Marginal density of one state component at time ``t``.

    ``init`` selects the initial law of the state:

    * ``None``: point mass at the deterministic initial point (or ``y0``); the
      marginal is obtained from the monotone affine map xi -> state.
    * a :class:`PdfCurve` (1-D models): smooth density at ``t0``.
    * a pair of curves (2-D models): independent product density at ``t0``;
      the other component is integrated over ``other_grid``.

    Grid points are pulled back along characteristics, the density is divided
    by the flow Jacobian and the coefficient is integrated out with
    Gauss-Legendre quadrature.
    """
    dist = _single_coefficient(model, dist)
    t0 = start_time(model) if t0 is None else float(t0)
    if not t > t0 - 1e-300 and init is not None:
        raise ParameterDomainError("t must be after the initial time")
    meta = {"model": getattr(model, "kind", "forcing"), "t": float(t), "method": "transform"}
    if init is None:
        curve = _dirac_marginal(model, dist, t, grid, component, t0, dt, y0)
        curve.meta.update(meta)
        return _mass_check(curve)

    nodes, weights = dist.quadrature(quad_nodes)
    curves = (init,) if isinstance(init, PdfCurve) else tuple(init)
    if len(curves) != model.dim:
        raise ParameterDomainError(f"initial density needs {model.dim} factor curve(s)")
    if grid is None:
        c = curves[component]
        grid = default_grid(c.mean(), math.sqrt(max(c.var(), 1e-12)) + 2.0)
    grid = np.asarray(grid, dtype=float)
    if model.dim == 1:
        pts = grid[None]
        y_back, gain = _pullback(model, t, t0, pts, nodes, dt)
        f0 = curves[0].evaluate(y_back[0])
        dens = (f0 * np.exp(-gain)) @ weights
    else:
        other = 1 - component
        if other_grid is None:
            c = curves[other]
            other_grid = default_grid(c.mean(), math.sqrt(max(c.var(), 1e-12)) + 2.0, points=201)
        other_grid = np.asarray(other_grid, dtype=float)
        gg, oo = np.meshgrid(grid, other_grid, indexing="ij")
        pts = np.empty((2, gg.size))
        pts[component], pts[other] = gg.ravel(), oo.ravel()
        y_back, gain = _pullback(model, t, t0, pts, nodes, dt)
        f0 = curves[0].evaluate(y_back[0]) * curves[1].evaluate(y_back[1])
        joint = ((f0 * np.exp(-gain)) @ weights).reshape(gg.shape)
        dens = np.trapezoid(joint, other_grid, axis=1)
    curve = PdfCurve(grid, dens, meta)
    return _mass_check(curve)


# ---------------------------------------------------------------------------
# Monte Carlo over the coefficient
# ---------------------------------------------------------------------------


def freedman_diaconis_edges(samples, lo=None, hi=None):
    """Histogram edges with Freedman-Diaconis width; one bin when the IQR vanishes."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise DomainError("cannot bin an empty sample")
    lo = samples.min() if lo is None else lo
    hi = samples.max() if hi is None else hi
    q75, q25 = np.percentile(samples, [75, 25])
    iqr = q75 - q25
    if iqr <= 0 or hi <= lo:
        half = max(abs(lo), 1.0) * 1e-9 if hi <= lo else 0.0
        return np.array([lo - half, hi + half])
    width = 2.0 * iqr / samples.size ** (1.0 / 3.0)
    nbins = max(1, int(math.ceil((hi - lo) / width)))
    return np.linspace(lo, hi, min(nbins, 100000) + 1)


def histogram_curve(samples, edges=None, meta=None):
    """Unit-mass histogram of ``samples`` (``edges``: array, int bin count, or None for FD)."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise DomainError("cannot bin an empty sample")
    if edges is None:
        edges = freedman_diaconis_edges(samples)
    elif np.ndim(edges) == 0:
        edges = np.linspace(samples.min(), samples.max(), int(edges) + 1)
        if edges[0] == edges[-1]:
            edges = freedman_diaconis_edges(samples)
    edges = np.asarray(edges, dtype=float)
    counts, _ = np.histogram(samples, bins=edges)
    dens = counts / (samples.size * np.diff(edges))
    centres = 0.5 * (edges[:-1] + edges[1:])
    return PdfCurve(centres, dens, dict(meta or {}), edges)


def sample_coefficients(model, dist, seed, n):
    """Coefficient draws, shape (n,) for one coefficient or (M, n) for several."""
    if isinstance(model, RandomForcingModel):
        laws = model.coefficients if dist is None else (dist,) * model.n_coefficients
        if len(laws) == 1:
            return laws[0].sample(seed, n)
        # coefficient m uses draws [m*n, (m+1)*n) of the stream
        return np.stack([law.sample(seed, n, start=m * n) for m, law in enumerate(laws)])
    if dist is None:
        raise ParameterDomainError("a coefficient distribution is required")
    return dist.sample(seed, n)


def mc_terminal_states(model, dist, n, t, seed, dt=DEFAULT_DT, threads=1, exact=None):
    """States at ``t`` (shape (dim, n)) for ``n`` sampled coefficients.

    ``exact`` (default: True for canonical models) evaluates the closed-form
    characteristic instead of integrating with RK4.
    """
    xi = sample_coefficients(model, dist, seed, n)
    t0 = start_time(model)
    if exact is None:
        exact = isinstance(model, CANONICAL)
    if exact and isinstance(model, CANONICAL):
        return model.characteristic(t, xi)
    if t <= t0:
        return integrate_ensemble_threaded(model, xi, t, [t], dt, threads)[0]
    return integrate_ensemble_threaded(model, xi, t0, [t], dt, threads)[0]


def mc_marginal_pdf(model, dist, n, t, grid=None, seed=0, component=0, dt=DEFAULT_DT,
                    threads=1, exact=None):
    """Histogram estimate of the marginal of ``component`` at time ``t``.

    ``grid`` may be bin edges, a bin count, or None (Freedman-Diaconis).
    """
    if n < 100:
        raise ParameterDomainError("mc_marginal_pdf needs n >= 100")
    states = mc_terminal_states(model, dist, n, t, seed, dt, threads, exact)
    meta = {"model": getattr(model, "kind", "forcing"), "t": float(t), "n": int(n),
            "seed": int(seed), "method": "liouville_mc"}
    return histogram_curve(states[component], grid, meta)
