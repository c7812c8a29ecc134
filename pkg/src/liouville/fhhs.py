"""Fluidized homogeneous heating system: temperature, source/sink, diffusion, calibration.

Granular temperature ``T(t) = sigma_xi^2 eta(t)^2 / 3`` with
``eta = (1 - exp(-C1 t / tau_p))^C2``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import rng
from .curves import PdfCurve
from .errors import (
    DomainError,
    FitDegenerateError,
    OutOfRangeError,
    ParameterDomainError,
)
from .models import FhhsModel
from .rand_inputs import XiDistribution

STREAM_NOISE = 3

# log-log laws of the calibrated parameters against the mean Reynolds number
SIGMA_LAW = (0.06258, math.log(0.7866))
C1_LAW = (2.446, math.log(0.5411))
DEFAULT_C2 = 1.2
DEFAULT_TAU = 0.14


def phi_fhhs(model: FhhsModel, t):
    return model.phi(t)


def eta(model: FhhsModel, t):
    return model.eta(t)


def granular_temperature(model: FhhsModel, t):
    """``T = sigma_xi^2 eta^2 / 3``."""
    out = model.sigma_xi ** 2 * np.asarray(model.eta(t)) ** 2 / 3.0
    return float(out) if np.ndim(out) == 0 else out


def steady_temperature(model: FhhsModel):
    return model.sigma_xi ** 2 / 3.0


def time_from_temperature(model: FhhsModel, T):
    """Time at which the temperature equals ``T`` (inverse of the monotone T(t)).

    ``T = 0`` maps to 0 and the steady value to ``inf``.
    """
    T = np.asarray(T, dtype=float)
    tss = steady_temperature(model)
    if np.any(T < 0):
        raise DomainError("temperature must be non-negative")
    if np.any(T > tss * (1 + 1e-12)):
        raise OutOfRangeError(f"temperature exceeds the steady value {tss:.6g}")
    r = np.minimum(T / tss, 1.0) if tss > 0 else np.zeros_like(T)
    a = r ** (1.0 / (2.0 * model.C2))  # 1 - exp(-C1 t / tau)
    with np.errstate(divide="ignore"):
        out = -(model.tau_p / model.C1) * np.log1p(-a)
    return float(out) if out.ndim == 0 else out


def source_sink(model: FhhsModel, T):
    """``(S, Gamma)`` with ``S = (2/sqrt 3) sigma_xi phi(t(T)) sqrt(T)`` and ``Gamma = 2T/tau_p``."""
    T = np.asarray(T, dtype=float)
    t = np.asarray(time_from_temperature(model, T))
    phi = np.where(np.isinf(t), 1.0 / model.tau_p, model.phi(np.where(np.isinf(t), 0.0, t)))
    s = 2.0 / math.sqrt(3.0) * model.sigma_xi * phi * np.sqrt(T)
    g = 2.0 * T / model.tau_p
    if s.ndim == 0:
        return float(s), float(g)
    return s, g


def temperature_rate(model: FhhsModel, t):
    """Closed-form ``dT/dt = (2/3) sigma_xi^2 eta eta'``."""
    t = np.asarray(t, dtype=float)
    c = model.C1 / model.tau_p
    e = np.exp(-c * t)
    a = -np.expm1(-c * t)
    deta = model.C2 * a ** (model.C2 - 1.0) * c * e
    out = 2.0 / 3.0 * model.sigma_xi ** 2 * np.asarray(model.eta(t)) * deta
    return float(out) if out.ndim == 0 else out


def _shape(dist):
    return XiDistribution.normal() if dist is None else dist


def fhhs_pdf(model: FhhsModel, dist, u, t):
    """Velocity marginal ``f_U(u; t) = f_Xi(u / eta) / eta`` with ``Xi = sigma_xi Z``.

    ``dist`` is the law of the standardized shape ``Z`` (default normal).
    """
    if np.any(np.asarray(t) <= 0):
        raise DomainError("at t = 0 the velocity law is a point mass at zero")
    scale = model.sigma_xi * float(model.eta(t))
    if scale <= 0:
        raise DomainError("velocity law is a point mass (sigma_xi * eta = 0)")
    z = _shape(dist)
    out = z.pdf(np.asarray(u, dtype=float) / scale) / scale
    return float(out) if np.ndim(out) == 0 else out


def fhhs_pdf_curve(model, dist, t, points=1001, width=8.0):
    from .analytic import affine_curve

    z = _shape(dist)
    scale = model.sigma_xi * float(model.eta(t))
    return affine_curve(z, 0.0, scale, points=points, width=width,
                        meta={"model": "fhhs", "t": float(t), "method": "analytic"})


def diffusion_of_time(model: FhhsModel, t):
    """``D(t) = eta phi sigma_xi^2``."""
    out = np.asarray(model.eta(t)) * np.asarray(model.phi(t)) * model.sigma_xi ** 2
    return float(out) if out.ndim == 0 else out


def diffusion_of_temperature(model: FhhsModel, T):
    """``D(T) = (3/tau_p)[(1 - C1 C2) T + C1 C2 sigma^(1/C2) 3^(-1/(2 C2)) T^(1 - 1/(2 C2))]``."""
    T = np.asarray(T, dtype=float)
    if np.any(T < 0):
        raise DomainError("temperature must be non-negative")
    if np.any(T > steady_temperature(model) * (1 + 1e-12)):
        raise OutOfRangeError("temperature exceeds the steady value")
    cc = model.C1 * model.C2
    k = 1.0 / (2.0 * model.C2)
    out = 3.0 / model.tau_p * (
        (1.0 - cc) * T + cc * model.sigma_xi ** (1.0 / model.C2) * 3.0 ** (-k) * T ** (1.0 - k)
    )
    return float(out) if out.ndim == 0 else out


def diffusion_coefficient(model: FhhsModel, mode, arg):
    if mode == "of_time":
        if np.any(np.asarray(arg) < 0):
            raise DomainError("t must be non-negative")
        return diffusion_of_time(model, arg)
    if mode == "of_T":
        return diffusion_of_temperature(model, arg)
    raise ParameterDomainError("mode must be 'of_time' or 'of_T'")


def diffusion_with_k(model: FhhsModel, u, t, K):
    """General solution ``eta phi sigma^2 + (K/u) exp(u^2 / (2 eta^2 sigma^2))``.

    Singular at ``u = 0`` unless ``K = 0``; evaluated for inspection only.
    """
    u = np.asarray(u, dtype=float)
    s2 = (model.sigma_xi * float(model.eta(t))) ** 2
    base = diffusion_of_time(model, t)
    if K == 0:
        return np.full_like(u, base) if u.ndim else base
    with np.errstate(divide="ignore", over="ignore"):
        out = base + K / u * np.exp(u * u / (2.0 * s2))
    return out


def re_t(T, scale):
    """Thermal Reynolds number ``scale * sqrt(T)``."""
    if scale <= 0:
        raise ParameterDomainError("scale must be positive")
    T = np.asarray(T, dtype=float)
    if np.any(T < 0):
        raise DomainError("temperature must be non-negative")
    out = scale * np.sqrt(T)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Parameter laws and synthetic data
# ---------------------------------------------------------------------------


def law_parameters(re_m, sigma_law=SIGMA_LAW, c1_law=C1_LAW):
    """``(sigma_xi, C1)`` from the log-log laws ``log p = slope log Re_m + intercept``."""
    lr = math.log(re_m)
    return math.exp(sigma_law[0] * lr + sigma_law[1]), math.exp(c1_law[0] * lr + c1_law[1])


def model_for_re(re_m, tau_p=DEFAULT_TAU, C2=DEFAULT_C2):
    sigma, c1 = law_parameters(re_m)
    return FhhsModel(tau_p, sigma, c1, C2, Re_m=float(re_m))


def synthetic_times(model, n=200, lo=1e-2, hi=1e2):
    """Log-spaced times ``(tau_p / C1) * geomspace(lo, hi, n)`` covering growth and plateau."""
    return model.tau_p / model.C1 * np.geomspace(lo, hi, n)


def synthetic_temperature(model, times=None, noise=0.0, seed=0):
    """``(t, T)`` with optional multiplicative Gaussian noise of relative size ``noise``."""
    t = synthetic_times(model) if times is None else np.asarray(times, dtype=float)
    T = np.asarray(granular_temperature(model, t))
    if noise:
        T = T * (1.0 + noise * rng.normals(seed, STREAM_NOISE, 0, 0, t.size))
    return t, T


def read_temperature_csv(path):
    """Columns ``(t, T)``; a non-numeric first row is treated as a header."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise ParameterDomainError(f"{path}: no data")
    try:
        float(rows[0][0])
    except ValueError:
        rows = rows[1:]
    data = np.array([[float(r[0]), float(r[1])] for r in rows])
    order = np.argsort(data[:, 0], kind="stable")
    return data[order, 0], data[order, 1]


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------


@dataclass
class LogLogFit:
    slope: float
    intercept: float
    r2: float


@dataclass
class FitReport:
    """Calibrated parameters; ``table`` holds per-Re_m rows when several series were fitted."""

    sigma_xi: float
    C1: float
    C2: float
    rms: float
    tau_p: float = DEFAULT_TAU
    iterations: int = 0
    table: list = field(default_factory=list)
    loglog: dict = field(default_factory=dict)

    def to_dict(self):
        out = {"sigma_xi": self.sigma_xi, "C1": self.C1, "C2": self.C2, "rms": self.rms}
        if self.table:
            out["table"] = self.table
        if self.loglog:
            out["loglog"] = {k: asdict(v) for k, v in self.loglog.items()}
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def loglog_regression(x, y):
    """Least-squares line of ``log y`` against ``log x`` (natural logs)."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.size < 2 or np.any(x <= 0) or np.any(y <= 0):
        raise FitDegenerateError("log-log regression needs >= 2 positive points")
    res = stats.linregress(np.log(x), np.log(y))
    r2 = float(res.rvalue ** 2) if np.isfinite(res.rvalue) else 1.0
    return LogLogFit(float(res.slope), float(res.intercept), r2)


def _model_T(t, sigma, c1, c2, tau):
    c = c1 / tau
    a = -np.expm1(-c * t)
    eta_ = a ** c2
    T = sigma ** 2 * eta_ ** 2 / 3.0
    # columns: d/d sigma, d/d log C1, d/d C2
    with np.errstate(divide="ignore", invalid="ignore"):
        d_sigma = 2.0 * sigma * eta_ ** 2 / 3.0
        d_logc1 = sigma ** 2 / 3.0 * 2.0 * eta_ * c2 * a ** (c2 - 1.0) * np.exp(-c * t) * c * t
        d_c2 = np.where(a > 0, sigma ** 2 / 3.0 * 2.0 * eta_ ** 2 * np.log(a), 0.0)
    return T, np.stack([d_sigma, d_logc1, d_c2], axis=1)


def _initial_estimates(t, T, C2, tau_p, tail_fraction):
    n = t.size
    k = max(4, int(round(tail_fraction * n)))
    tail = T[-k:]
    half = k // 2
    m1, m2 = tail[:half].mean(), tail[half:].mean()
    tss = tail.mean()
    if not tss > 0:
        raise FitDegenerateError("plateau temperature is not positive")
    # noise level from residuals about a straight line, so a trend is not mistaken for noise
    tt = t[-k:]
    resid = tail - np.polyval(np.polyfit(tt, tail, 1), tt)
    spread = resid.std() / math.sqrt(half)
    if abs(m2 - m1) > 0.02 * tss + 6 * spread:
        raise FitDegenerateError("temperature does not plateau at late times")
    sigma = math.sqrt(3.0 * tss)
    r = T / tss
    rising = (r > 0.02) & (r < 0.9) & (t > 0)
    if rising.sum() < 3:
        raise FitDegenerateError("too few points on the rising branch")
    x = t[rising] / tau_p
    y = np.log1p(-(r[rising] ** (1.0 / (2.0 * C2))))
    c1 = -float(np.dot(x, y) / np.dot(x, x))
    if not c1 > 0:
        raise FitDegenerateError("rising branch gives a non-positive growth constant")
    return sigma, c1


def fit_fhhs(t, T, C2=DEFAULT_C2, tau_p=DEFAULT_TAU, refine_c2=False, tail_fraction=0.2,
             max_iter=200):
    """Calibrate ``(sigma_xi, C1[, C2])`` to a temperature series.

    Plateau average and a log-linear fit of the rising branch give the start;
    a damped Gauss-Newton (Levenberg-Marquardt) iteration on
    ``(sigma_xi, log C1[, C2])`` then minimizes the RMS temperature residual.
    """
    t, T = np.asarray(t, dtype=float), np.asarray(T, dtype=float)
    if t.size != T.size or t.size < 10:
        raise FitDegenerateError("need at least 10 (t, T) points")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(T))):
        raise FitDegenerateError("data contain non-finite values")
    order = np.argsort(t, kind="stable")
    t, T = t[order], T[order]
    sigma, c1 = _initial_estimates(t, T, C2, tau_p, tail_fraction)
    p = np.array([sigma, math.log(c1), C2])
    free = [0, 1, 2] if refine_c2 else [0, 1]

    def cost(q):
        model_t, _ = _model_T(t, q[0], math.exp(q[1]), q[2], tau_p)
        r = model_t - T
        return float(np.dot(r, r)), r

    c, r = cost(p)
    lam = 1e-3
    it = 0
    for it in range(1, max_iter + 1):
        _, jac = _model_T(t, p[0], math.exp(p[1]), p[2], tau_p)
        jac = jac[:, free]
        jtj = jac.T @ jac
        g = jac.T @ r
        improved = False
        for _ in range(30):
            a = jtj + lam * np.diag(np.diag(jtj) + 1e-300)
            try:
                step = -np.linalg.solve(a, g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = p.copy()
            trial[free] += step
            if trial[0] <= 0 or (refine_c2 and trial[2] < 1.0):
                lam *= 4.0
                continue
            c_new, r_new = cost(trial)
            if c_new <= c:
                improved = True
                rel = np.max(np.abs(step) / np.maximum(np.abs(p[free]), 1e-12))
                p, c, r = trial, c_new, r_new
                lam = max(lam / 3.0, 1e-12)
                break
            lam *= 4.0
        if not improved or rel < 1e-12:
            break
    rms = math.sqrt(c / t.size)
    if not math.isfinite(rms):
        raise FitDegenerateError("fit diverged")
    return FitReport(float(p[0]), float(math.exp(p[1])), float(p[2]), rms, tau_p, it)


def fit_fhhs_series(series, C2=DEFAULT_C2, tau_p=DEFAULT_TAU, refine_c2=False):
    """Fit each ``{Re_m: (t, T)}`` entry and regress the parameters on ``Re_m`` in log-log."""
    if not series:
        raise FitDegenerateError("no data series")
    rows = []
    for re_m in sorted(series):
        t, T = series[re_m]
        rep = fit_fhhs(t, T, C2, tau_p, refine_c2)
        rows.append({"Re_m": float(re_m), "sigma_xi": rep.sigma_xi, "C1": rep.C1,
                     "C2": rep.C2, "rms": rep.rms})
    loglog = {}
    if len(rows) >= 2:
        re = [r["Re_m"] for r in rows]
        loglog = {"sigma": loglog_regression(re, [r["sigma_xi"] for r in rows]),
                  "c1": loglog_regression(re, [r["C1"] for r in rows])}
    first = rows[0]
    rms = math.sqrt(sum(r["rms"] ** 2 for r in rows) / len(rows))
    return FitReport(first["sigma_xi"], first["C1"], first["C2"], rms, tau_p, 0, rows, loglog)
