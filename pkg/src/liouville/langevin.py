"""Euler-Maruyama ensembles of the Langevin counterparts of the solved models.

Gaussian increments come from :func:`liouville.rng.normal_block`: paths are
split into fixed blocks of ``rng.BLOCK`` and every (block, step) pair has its
own Philox counter, so an ensemble is identical for any number of worker
threads and path ``k`` does not depend on the total path count.
"""

from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .characteristics import histogram_curve
from .curves import MomentSeries, PdfCurve
from .errors import DomainError, ParameterDomainError
from .models import FhhsModel, PositionModel, VelocityModel
from .ode import _clock_nodes

STREAM_INIT = 2


@dataclass(eq=False)
class PathEnsemble:
    """States of ``n_paths`` paths at the recorded ``times``; ``states`` is (n_paths, n_times, dim)."""

    times: np.ndarray
    states: np.ndarray
    seed: int
    dt: float
    state_names: tuple = ("x",)
    meta: dict = field(default_factory=dict)

    @property
    def n_paths(self):
        return self.states.shape[0]

    @property
    def dim(self):
        return self.states.shape[2]

    def time_index(self, t):
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise DomainError(f"t={t} is not a recorded time")
        return k

    def component_index(self, component):
        if isinstance(component, str):
            if component not in self.state_names:
                raise ParameterDomainError(f"unknown component {component!r}")
            return self.state_names.index(component)
        return int(component)

    def at(self, t, component=0):
        return self.states[:, self.time_index(t), self.component_index(component)]

    def moments(self):
        """Ensemble means and (population) variances per recorded time."""
        cols = {}
        for k, name in enumerate(self.state_names):
            vals = self.states[:, :, k]
            cols[f"mean_{name}"] = vals.mean(axis=0)
            cols[f"var_{name}"] = vals.var(axis=0)
        if self.dim == 2:
            x, u = self.states[:, :, 0], self.states[:, :, 1]
            cols["cov_xu"] = ((x - x.mean(0)) * (u - u.mean(0))).mean(axis=0)
        return MomentSeries.build(self.times, meta={"source": "langevin", "n": self.n_paths,
                                                    "seed": self.seed}, **cols)

    # little-endian: u64 n_paths, u64 n_times, f64 times[n_times],
    # f64 states[n_paths][n_times][dim] row-major
    def dump(self, path):
        with open(path, "wb") as fh:
            fh.write(struct.pack("<QQ", self.n_paths, self.times.size))
            fh.write(self.times.astype("<f8").tobytes())
            fh.write(np.ascontiguousarray(self.states, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path, dim, seed=0, dt=float("nan"), state_names=None):
        with open(path, "rb") as fh:
            n_paths, n_times = struct.unpack("<QQ", fh.read(16))
            times = np.frombuffer(fh.read(8 * n_times), dtype="<f8").astype(float)
            states = np.frombuffer(fh.read(), dtype="<f8").astype(float)
        states = states.reshape(n_paths, n_times, dim)
        names = state_names or (("x",) if dim == 1 else ("x", "u"))
        return cls(times, states, seed, dt, tuple(names))


def _step_plan(t0, record_times, dt):
    """Per-step (start, size) pairs hitting every record time; shortened steps close segments."""
    starts, sizes, marks = [], [], []
    t = t0
    for tr in record_times:
        if tr > t:
            nodes = _clock_nodes(t, tr, dt, 1)
            starts.extend(nodes[:-1])
            sizes.extend(np.diff(nodes))
        marks.append(len(starts))
        t = tr
    return np.array(starts), np.array(sizes), marks


def _run(n, dim, init, update, t0, dt, t_end, seed, record_times, threads, stream_init_needed):
    if n < 1:
        raise ParameterDomainError("need at least one path")
    if dt <= 0:
        raise ParameterDomainError("dt must be positive")
    if record_times is None:
        record_times = [t_end]
    record_times = np.asarray(sorted(set(float(v) for v in record_times)))
    if record_times[0] < t0 or record_times[-1] > t_end + 1e-12:
        raise ParameterDomainError("record times must lie in [t0, t_end]")
    starts, sizes, marks = _step_plan(t0, record_times, dt)
    n_blocks = -(-n // rng.BLOCK)

    def block(b):
        m = min(rng.BLOCK, n - b * rng.BLOCK)
        y = init(b, m)
        out = np.empty((len(record_times), dim, m))
        step, r = 0, 0
        while r < len(marks) and marks[r] == 0:
            out[r] = y
            r += 1
        for step, (ta, h) in enumerate(zip(starts, sizes)):
            z = rng.normal_block(seed, rng.STREAM_LANGEVIN, step, b, m)
            y = update(ta, h, y, z)
            while r < len(marks) and marks[r] == step + 1:
                out[r] = y
                r += 1
        return out

    if threads > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(block, range(n_blocks)))
    else:
        parts = [block(b) for b in range(n_blocks)]
    states = np.concatenate(parts, axis=2).transpose(2, 0, 1)
    return record_times, np.ascontiguousarray(states)


def simulate_position_langevin(model: PositionModel, n, dt, t_end, seed, record_times=None,
                               threads=1, x0=0.0):
    """``X_{k+1} = X_k + u_p h + sqrt(2 D h) N_k``."""
    u_p, D = model.u_p, model.D

    def init(b, m):
        return np.full((1, m), float(x0))

    def update(t, h, y, z):
        return y + (u_p * h + math.sqrt(2 * D * h) * z)

    times, states = _run(n, 1, init, update, 0.0, dt, t_end, seed, record_times, threads, False)
    return PathEnsemble(times, states, seed, dt, ("x",),
                        {"model": "position", "n": n, "seed": seed, "dt": dt})


def simulate_velocity_langevin(model: VelocityModel, n, dt, t_end, seed, record_times=None,
                               threads=1, init="deterministic"):
    """``X += tau_p U h``; ``U += -U h + sqrt(2 D h) N`` from ``(0, v0)``.

    ``init="maxwellian"`` draws ``U_0 ~ N(v0, D)`` from a separate stream.
    """
    if init not in ("deterministic", "maxwellian"):
        raise ParameterDomainError("init must be 'deterministic' or 'maxwellian'")
    tau, D, v0 = model.tau_p, model.D, model.v0

    def start(b, m):
        y = np.zeros((2, m))
        y[1] = v0
        if init == "maxwellian":
            y[1] += math.sqrt(D) * rng.normal_block(seed, STREAM_INIT, 0, b, m)
        return y

    def update(t, h, y, z):
        x = y[0] + tau * h * y[1]
        u = y[1] * (1.0 - h) + math.sqrt(2 * D * h) * z
        return np.stack([x, u])

    times, states = _run(n, 2, start, update, 0.0, dt, t_end, seed, record_times, threads,
                         init == "maxwellian")
    return PathEnsemble(times, states, seed, dt, ("x", "u"),
                        {"model": "velocity", "n": n, "seed": seed, "dt": dt, "init": init})


def fhhs_diffusion(model: FhhsModel, t):
    """``D(t) = eta(t) phi(t) sigma_xi^2`` (the state-independent choice)."""
    return model.eta(t) * model.phi(t) * model.sigma_xi ** 2


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def fhhs_mean_diffusion(model: FhhsModel, t, h):
    """Average of ``D`` over ``[t, t + h]``.

    ``D = sigma^2 (d(eta^2)/dt / 2 + eta^2 / tau_p)``, so the first part
    integrates exactly and the second by 8-point Gauss-Legendre.
    """
    s2 = model.sigma_xi ** 2
    eta_a, eta_b = model.eta(t), model.eta(t + h)
    nodes = t + 0.5 * h * (_GL_NODES + 1.0)
    sq = 0.5 * h * float(np.dot(_GL_WEIGHTS, np.asarray(model.eta(nodes)) ** 2))
    return s2 * (0.5 * (eta_b ** 2 - eta_a ** 2) + sq / model.tau_p) / h


def simulate_fhhs_langevin(model: FhhsModel, n, dt, t_end, seed, diffusion="from_liouville",
                           record_times=None, threads=1, u0=0.0, rule="midpoint"):
    """``U += -U h / tau_p + sqrt(2 D h) N`` with the matched diffusion.

    ``rule="midpoint"`` uses ``D(t + h/2)``.  When ``dt`` exceeds the rise time
    ``tau_p / C1`` of ``eta`` the midpoint value misjudges the variance injected
    during the start-up transient (the excess decays like ``exp(-2t/tau_p)``);
    ``rule="step_average"`` uses the exact mean of ``D`` over each step instead.
    """
    if diffusion != "from_liouville":
        raise ParameterDomainError("only the 'from_liouville' diffusion is available")
    if rule not in ("midpoint", "step_average"):
        raise ParameterDomainError("rule must be 'midpoint' or 'step_average'")
    if dt > model.tau_p / 50 * (1 + 1e-12):
        raise ParameterDomainError("FHHS Langevin simulation needs dt <= tau_p / 50")
    tau = model.tau_p

    def init(b, m):
        return np.full((1, m), float(u0))

    def update(t, h, y, z):
        if rule == "midpoint":
            d = fhhs_diffusion(model, t + 0.5 * h)
        else:
            d = fhhs_mean_diffusion(model, t, h)
        return y * (1.0 - h / tau) + math.sqrt(2 * d * h) * z

    times, states = _run(n, 1, init, update, 0.0, dt, t_end, seed, record_times, threads, False)
    return PathEnsemble(times, states, seed, dt, ("u",),
                        {"model": "fhhs", "n": n, "seed": seed, "dt": dt, "rule": rule})


def empirical_pdf(ens: PathEnsemble, t, grid=None, component=0) -> PdfCurve:
    """Unit-mass histogram of one component at a recorded time."""
    if ens.n_paths == 0:
        raise DomainError("empty ensemble")
    meta = dict(ens.meta)
    meta.update({"t": float(t), "method": "langevin_mc"})
    return histogram_curve(ens.at(t, component), grid, meta)


def ks_distance(emp: PdfCurve, analytic_cdf):
    """Largest gap between the curve's CDF and ``analytic_cdf`` at the curve's CDF nodes."""
    pts, cum = emp.cdf_nodes()
    total = cum[-1]
    if total <= 0:
        raise DomainError("empirical curve has no mass")
    return float(np.max(np.abs(cum / total - analytic_cdf(pts))))


def ks_statistic(samples, analytic_cdf):
    """Exact two-sided Kolmogorov-Smirnov statistic of a sample against a CDF."""
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size == 0:
        raise DomainError("empty sample")
    f = analytic_cdf(x)
    k = np.arange(1, x.size + 1) / x.size
    return float(max(np.max(k - f), np.max(f - (k - 1.0 / x.size))))
