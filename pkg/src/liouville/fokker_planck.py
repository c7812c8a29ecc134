"""Crank-Nicolson finite-volume solver for 1-D Fokker-Planck equations.

Solves ``df/dt + d/dy [a(y,t) f - D(y,t) df/dy] = 0`` on ``[lo, hi]`` with
zero-flux ends.  Unknowns sit on grid vertices; interior control volumes
have width ``h`` and the two end volumes ``h/2``, so the conserved discrete
mass is exactly the trapezoid integral of the density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from .analytic import heat_kernel, ou_pdf
from .characteristics import affine_response
from .curves import PdfCurve
from .errors import (
    ConservationError,
    DomainError,
    ParameterDomainError,
    SchemeFailureError,
)
from .models import FhhsModel, PositionModel, VelocityModel

NEGATIVE_TOL = 1e-10
MASS_DRIFT_TOL = 1e-4


def _as_field(value):
    if callable(value):
        return value
    c = float(value)
    return lambda y, t: np.full_like(y, c)


@dataclass(eq=False)
class FpProblem:
    """Drift ``a(y, t)`` and diffusion ``D(y, t)`` (callables or constants) on ``[lo, hi]``."""

    drift: Callable | float
    diffusion: Callable | float
    domain: tuple
    n: int
    initial: PdfCurve
    t0: float = 0.0
    scheme: str = "crank_nicolson"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        lo, hi = map(float, self.domain)
        if not hi > lo:
            raise ParameterDomainError("domain must satisfy lo < hi")
        if self.n < 3:
            raise ParameterDomainError("need at least 3 grid points")
        if self.scheme != "crank_nicolson":
            raise ParameterDomainError(f"unknown scheme {self.scheme!r}")
        self.domain = (lo, hi)
        self.drift_fn = _as_field(self.drift)
        self.diffusion_fn = _as_field(self.diffusion)
        grid = self.grid
        f0 = self.initial.evaluate(grid) if isinstance(self.initial, PdfCurve) else \
            np.asarray(self.initial(grid), dtype=float)
        mass = _trapezoid_mass(f0, grid[1] - grid[0])
        if abs(mass - 1.0) > 1e-9:
            raise ParameterDomainError(f"initial density has mass {mass:.12f}, expected 1")
        if np.any(self.diffusion_fn(grid, self.t0) < 0):
            raise ParameterDomainError("diffusion must be non-negative")
        self.f0 = f0

    @property
    def grid(self):
        return np.linspace(self.domain[0], self.domain[1], self.n)


def _trapezoid_mass(f, h):
    return h * (f.sum() - 0.5 * (f[0] + f[-1]))


def _operator(problem, t, grid, h):
    """Banded (3, n) matrix of L with df/dt = L f."""
    mid = 0.5 * (grid[:-1] + grid[1:])
    a = problem.drift_fn(mid, t)
    d = problem.diffusion_fn(mid, t)
    if np.any(d < 0):
        raise SchemeFailureError("negative diffusion encountered")
    # flux F_{i+1/2} = cl * f_i + cr * f_{i+1}
    cl = 0.5 * a + d / h
    cr = 0.5 * a - d / h
    w = np.full(grid.size, h)
    w[0] = w[-1] = 0.5 * h
    n = grid.size
    ab = np.zeros((3, n))
    # df_i/dt = -(F_{i+1/2} - F_{i-1/2}) / w_i
    ab[1, :-1] -= cl / w[:-1]
    ab[0, 1:] -= cr / w[:-1]
    ab[1, 1:] += cr / w[1:]
    ab[2, :-1] += cl / w[1:]
    return ab


def _apply(ab, f):
    out = ab[1] * f
    out[:-1] += ab[0, 1:] * f[1:]
    out[1:] += ab[2, :-1] * f[:-1]
    return out


def solve_fp(problem: FpProblem, t_end, dt, snapshot_times=None):
    """Density at ``t_end`` (and optional snapshots) by Crank-Nicolson time stepping.

    Returns a PdfCurve, or a list of curves when ``snapshot_times`` is given.
    """
    if dt <= 0:
        raise ParameterDomainError("dt must be positive")
    if t_end < problem.t0:
        raise ParameterDomainError("t_end precedes the initial time")
    grid = problem.grid
    h = grid[1] - grid[0]
    targets = sorted(set([float(t_end)] + [float(s) for s in (snapshot_times or [])]))
    f = problem.f0.copy()
    mass0 = _trapezoid_mass(f, h)
    t = problem.t0
    out = {}
    for target in targets:
        n_steps = max(0, int(math.ceil((target - t) / dt * (1 - 1e-12))))
        if n_steps:
            step = (target - t) / n_steps
            a_old = _operator(problem, t, grid, h)
            for k in range(n_steps):
                t_new = t + step
                a_new = _operator(problem, t_new, grid, h)
                rhs = f + 0.5 * step * _apply(a_old, f)
                lhs = -0.5 * step * a_new
                lhs[1] += 1.0
                f = solve_banded((1, 1), lhs, rhs, check_finite=False)
                if not np.all(np.isfinite(f)):
                    raise SchemeFailureError("non-finite density")
                if f.min() < -NEGATIVE_TOL:
                    raise SchemeFailureError(
                        f"negative density {f.min():.3e} at t={t_new:.6g}; refine the grid"
                    )
                t, a_old = t_new, a_new
        t = target
        drift = abs(_trapezoid_mass(f, h) - mass0)
        if drift > MASS_DRIFT_TOL:
            raise ConservationError(f"mass drifted by {drift:.3e}")
        meta = dict(problem.meta)
        meta.update({"t": target, "method": "fokker_planck_fd", "n": problem.n, "dt": dt})
        out[target] = PdfCurve(grid, f.copy(), meta)
    if snapshot_times is None:
        return out[float(t_end)]
    return [out[s] for s in targets]


# ---------------------------------------------------------------------------
# Problem builders
# ---------------------------------------------------------------------------


def heat_problem(model: PositionModel, t0=0.05, domain=(-12.0, 20.0), n=2001):
    """Drift ``u_p`` and constant ``D``, started from the exact kernel at ``t0``."""
    grid = np.linspace(domain[0], domain[1], n)
    init = PdfCurve(grid, heat_kernel(grid, t0, model.u_p, model.D))
    init = _renormalized(init)
    return FpProblem(model.u_p, model.D, domain, n, init, t0, meta={"model": "position"})


def ou_problem(model: VelocityModel, t0=0.05, domain=None, n=2001, t_end=5.0):
    """Velocity marginal: drift ``-u``, constant ``D``, started from the Gaussian at ``t0``."""
    if domain is None:
        sig = math.sqrt(model.D)
        means = [model.v0 * math.exp(-t0), model.v0 * math.exp(-t_end)]
        domain = (min(means + [0.0]) - 10 * sig, max(means + [0.0]) + 10 * sig)
    grid = np.linspace(domain[0], domain[1], n)
    init = _renormalized(PdfCurve(grid, ou_pdf(grid, t0, model)))
    return FpProblem(lambda u, t: -u, model.D, domain, n, init, t0, meta={"model": "velocity"})


def fhhs_problem(model: FhhsModel, t0=None, domain=None, n=2001, dist=None):
    """Drift ``-u/tau_p`` and diffusion ``eta phi sigma_xi^2``, started from the exact marginal."""
    from .fhhs import diffusion_of_time, fhhs_pdf

    t0 = 0.05 * model.tau_p if t0 is None else t0
    if domain is None:
        half = 10 * model.sigma_xi
        domain = (-half, half)
    grid = np.linspace(domain[0], domain[1], n)
    init = _renormalized(PdfCurve(grid, fhhs_pdf(model, dist, grid, t0)))

    def diffusion(u, t):
        return np.full_like(u, diffusion_of_time(model, t))

    return FpProblem(lambda u, t: -u / model.tau_p, diffusion, domain, n, init, t0,
                     meta={"model": "fhhs"})


def _renormalized(curve):
    """Remove the (tiny) trapezoid quadrature error of a sampled analytic density."""
    mass = curve.mass()
    return PdfCurve(curve.coords, curve.density / mass, curve.meta)


DRIFTS = {
    "constant": (("value",), lambda value: (lambda y, t: np.full_like(y, value))),
    "linear": (("a", "b"), lambda a, b: (lambda y, t: a + b * y)),
}


def named_field(kind, spec, model=None):
    """Drift/diffusion callable from a config entry ``{"name": ..., "params": {...}}``."""
    name, params = spec.get("name"), dict(spec.get("params", {}))
    if kind == "diffusion" and name == "fhhs":
        from .fhhs import diffusion_of_time
        if not isinstance(model, FhhsModel):
            raise ParameterDomainError("the 'fhhs' diffusion needs an FHHS model")
        return lambda y, t: np.full_like(y, diffusion_of_time(model, t))
    if name not in DRIFTS:
        raise ParameterDomainError(f"unknown {kind} {name!r}")
    required, build = DRIFTS[name]
    if set(params) != set(required):
        raise ParameterDomainError(f"{kind} {name!r} needs params {list(required)}")
    return build(**{k: float(v) for k, v in params.items()})


# ---------------------------------------------------------------------------
# Compatibility of the Liouville marginal with the Fokker-Planck flux
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class LiouvilleMarginal:
    """Marginal of one state component for a deterministic start.

    With ``state = a + b * xi`` the joint density is concentrated on a line, so
    ``E[xi | y] f(y) = ((y - a) / b) f(y)``.
    """

    model: object
    dist: object
    t: float
    component: int = 0

    def __post_init__(self):
        a, b = affine_response(self.model, self.t)
        self.offset, self.slope = float(a[self.component]), float(b[self.component])
        if self.slope == 0.0:
            raise DomainError("marginal is a point mass")

    def density(self, y):
        return self.dist.pdf((np.asarray(y) - self.offset) / self.slope) / abs(self.slope)

    def xi_flux(self, y):
        """``int xi f(y, xi) dxi``."""
        return (np.asarray(y) - self.offset) / self.slope * self.density(y)

    def forcing(self):
        m = self.model
        if isinstance(m, VelocityModel):
            return m.varphi(self.t) if self.component == 0 else m.phi(self.t)
        return m.phi(self.t)

    def scale(self):
        return abs(self.slope) * max(self.dist.std, 1e-300)

    def center(self):
        return self.offset + self.slope * self.dist.mean


def compatibility_residual(provider: LiouvilleMarginal, d_field, model=None, grid=None,
                           points=201, width=4.0, step=None):
    """Sup-norm of ``d/dy [D f' + forcing(t) int xi f dxi]`` over a test grid.

    Derivatives use nested central differences with a small step, independent
    of the test-grid spacing.  ``d_field`` is a constant or ``D(y, t)``.
    """
    d_fn = _as_field(d_field)
    t = provider.t
    scale = provider.scale()
    if grid is None:
        grid = provider.center() + width * scale * np.linspace(-1, 1, points)
    grid = np.asarray(grid, dtype=float)
    h = 1e-3 * scale if step is None else step
    phi = provider.forcing()

    def flux(y):
        fp = (provider.density(y + h) - provider.density(y - h)) / (2 * h)
        return d_fn(y, t) * fp + phi * provider.xi_flux(y)

    resid = (flux(grid + h) - flux(grid - h)) / (2 * h)
    return float(np.max(np.abs(resid)))
