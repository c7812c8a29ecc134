"""Model records: the three solved systems and a generic random-forcing model.

Every model exposes the same small interface used by the characteristic
integrator::

    dim, state_names, clock_power, t_start
    rhs(t, y, xi)          drift + xi * forcing, y of shape (dim, n)
    jacobian(t, y, xi)     d rhs / d y, shape (dim, dim, n) (broadcastable)
    divergence(t, y, xi)   trace of the jacobian

The canonical models additionally provide the closed-form characteristic
``characteristic(t, xi, y0)`` mapping the deterministic state at t = 0 to
time t, used to seed integrations at ``t0 > 0``.

All quantities are nondimensional.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParameterDomainError, SingularForcingWarning
from .rand_inputs import XiDistribution

DEFAULT_T0 = 1e-6
# forcing-model form starts from the deterministic point, so its error is O(sqrt(t_start))
FORCING_T0 = 1e-12

_G_SERIES_K = np.arange(3, 34)
_G_SERIES_C = np.array(
    [(4.0 * (-1.0) ** k - (-2.0) ** k) / math.factorial(int(k)) for k in _G_SERIES_K]
)


def _positive_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("forcing is singular at t = 0; need t > 0")
    return t


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def dispersion_shape(t):
    """``2t - 3 + 4 e^{-t} - e^{-2t}`` without cancellation at small t."""
    t = np.asarray(t, dtype=float)
    small = t < 0.5
    ts = np.where(small, t, 0.0)
    series = np.polyval(np.concatenate([_G_SERIES_C[::-1], [0, 0, 0]]), ts)
    direct = 2 * t - 3 + 4 * np.exp(-t) - np.exp(-2 * t)
    return np.where(small, series, direct)


# ---------------------------------------------------------------------------
# Canonical models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PositionModel:
    """Drift ``u_p`` plus diffusion ``D``; Liouville forcing ``Xi sqrt(D / 2t)``."""

    u_p: float
    D: float

    dim = 1
    state_names = ("x",)
    clock_power = 2
    kind = "position"

    def __post_init__(self):
        if not (math.isfinite(self.u_p) and math.isfinite(self.D)) or self.D < 0:
            raise ParameterDomainError("PositionModel needs finite u_p and D >= 0")

    @property
    def initial_point(self):
        return np.array([0.0])

    def phi(self, t):
        t = _positive_time(t)
        return _scalar(np.sqrt(self.D / (2.0 * t)))

    def scale(self, t):
        """Response of the state to a unit coefficient, ``sqrt(2 D t)``."""
        return _scalar(np.sqrt(2.0 * self.D * np.asarray(t, dtype=float)))

    def mean_path(self, t):
        return _scalar(self.u_p * np.asarray(t, dtype=float))

    def rhs(self, t, y, xi):
        return np.asarray(self.u_p + xi * math.sqrt(self.D / (2.0 * t)))[None] * np.ones_like(y)

    def jacobian(self, t, y, xi):
        return np.zeros((1, 1) + np.shape(y)[1:])

    def divergence(self, t, y, xi):
        return np.zeros(np.shape(y)[1:])

    def characteristic(self, t, xi, y0=None):
        y0 = self.initial_point if y0 is None else np.asarray(y0, dtype=float)
        return np.array([y0[0] + self.u_p * t + xi * math.sqrt(2.0 * self.D * t)])

    def to_config(self):
        return {"type": "position", "u_p": self.u_p, "D": self.D}


@dataclass(frozen=True)
class VelocityModel:
    """Relaxing velocity in the mean-velocity frame: ``dX = tau_p U dt``, ``dU = -U dt + ...``.

    Drag correction is fixed to 1 (Stokes drag).
    """

    tau_p: float
    D: float
    v0: float = 1.0

    dim = 2
    state_names = ("x", "u")
    clock_power = 2
    kind = "velocity"

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.tau_p, self.D, self.v0)):
            raise ParameterDomainError("VelocityModel parameters must be finite")
        if self.tau_p <= 0 or self.D < 0:
            raise ParameterDomainError("VelocityModel needs tau_p > 0 and D >= 0")

    @property
    def initial_point(self):
        return np.array([0.0, self.v0])

    def sigma_x(self, t):
        t = np.asarray(t, dtype=float)
        return _scalar(self.tau_p * np.sqrt(self.D * dispersion_shape(t)))

    def sigma_u(self, t):
        t = np.asarray(t, dtype=float)
        return _scalar(np.sqrt(-self.D * np.expm1(-2.0 * t)))

    def mean_x(self, t):
        return _scalar(-self.tau_p * self.v0 * np.expm1(-np.asarray(t, dtype=float)))

    def mean_u(self, t):
        return _scalar(self.v0 * np.exp(-np.asarray(t, dtype=float)))

    def varphi(self, t):
        """Position forcing ``d sigma_X/dt - tau_p sigma_U``."""
        t = _positive_time(t)
        em = np.expm1(-t)
        out = self.tau_p * math.sqrt(self.D) * (
            em * em / np.sqrt(dispersion_shape(t)) - np.sqrt(-np.expm1(-2.0 * t))
        )
        return _scalar(out)

    def phi(self, t):
        """Velocity forcing ``d sigma_U/dt + sigma_U = sqrt(D / (1 - e^{-2t}))``."""
        t = _positive_time(t)
        return _scalar(np.sqrt(self.D / -np.expm1(-2.0 * t)))

    def rhs(self, t, y, xi):
        return np.stack(
            [self.tau_p * y[1] + xi * self.varphi(t), -y[1] + xi * self.phi(t)]
        )

    def jacobian(self, t, y, xi):
        shape = np.shape(y)[1:]
        jac = np.zeros((2, 2) + shape)
        jac[0, 1] = self.tau_p
        jac[1, 1] = -1.0
        return jac

    def divergence(self, t, y, xi):
        return np.full(np.shape(y)[1:], -1.0)

    def characteristic(self, t, xi, y0=None):
        y0 = self.initial_point if y0 is None else np.asarray(y0, dtype=float)
        x = y0[0] - self.tau_p * y0[1] * math.expm1(-t) + xi * self.sigma_x(t)
        u = y0[1] * math.exp(-t) + xi * self.sigma_u(t)
        return np.array([x, u])

    def to_config(self):
        return {"type": "velocity", "tau_p": self.tau_p, "D": self.D, "v0": self.v0}


@dataclass(frozen=True)
class FhhsModel:
    """Fluidized homogeneous heating system: ``dU/dt = -U/tau_p + Xi phi(t)``.

    ``Re_m``, ``omega`` and ``rho_ratio`` are carried as metadata only.
    """

    tau_p: float
    sigma_xi: float
    C1: float
    C2: float = 1.2
    Re_m: float | None = None
    omega: float = 0.1
    rho_ratio: float = 100.0

    dim = 1
    state_names = ("u",)
    kind = "fhhs"

    def __post_init__(self):
        vals = (self.tau_p, self.sigma_xi, self.C1, self.C2)
        if not all(math.isfinite(v) for v in vals):
            raise ParameterDomainError("FhhsModel parameters must be finite")
        if self.tau_p <= 0 or self.sigma_xi < 0 or self.C1 <= 0 or self.C2 < 1:
            raise ParameterDomainError(
                "FhhsModel needs tau_p > 0, sigma_xi >= 0, C1 > 0, C2 >= 1"
            )

    @property
    def clock_power(self):
        # (1 - e^{-ct})^(C2-1) ~ t^(C2-1) near 0; s = t^(C2-1) removes the kink.
        if 1.0 < self.C2 < 2.0:
            return min(1.0 / (self.C2 - 1.0), 8.0)
        return 1

    @property
    def initial_point(self):
        return np.array([0.0])

    def _decay(self, t):
        return -np.expm1(-self.C1 * np.asarray(t, dtype=float) / self.tau_p)

    def eta(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("eta needs t >= 0")
        return _scalar(self._decay(t) ** self.C2)

    def phi(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("phi needs t >= 0")
        if self.C2 <= 1.0 and np.any(t == 0):
            warnings.warn("FHHS forcing is singular at t = 0 for C2 <= 1", SingularForcingWarning)
        a = self._decay(t)
        e = 1.0 - a
        with np.errstate(divide="ignore"):
            out = a ** (self.C2 - 1.0) * (1.0 + (self.C1 * self.C2 - 1.0) * e) / self.tau_p
        return _scalar(out)

    def sigma_u2(self, t):
        return _scalar(self.sigma_xi ** 2 * np.asarray(self.eta(t)) ** 2)

    def steady_temperature(self):
        return self.sigma_xi ** 2 / 3.0

    def rhs(self, t, y, xi):
        return (-y[0] / self.tau_p + xi * self.phi(t))[None]

    def jacobian(self, t, y, xi):
        return np.full((1, 1) + np.shape(y)[1:], -1.0 / self.tau_p)

    def divergence(self, t, y, xi):
        return np.full(np.shape(y)[1:], -1.0 / self.tau_p)

    def characteristic(self, t, xi, y0=None):
        y0 = self.initial_point if y0 is None else np.asarray(y0, dtype=float)
        return np.array([y0[0] * math.exp(-t / self.tau_p) + xi * self.eta(t)])

    def to_config(self):
        out = {"type": "fhhs", "tau_p": self.tau_p, "sigma_xi": self.sigma_xi,
               "C1": self.C1, "C2": self.C2, "omega": self.omega, "rho_ratio": self.rho_ratio}
        if self.Re_m is not None:
            out["Re_m"] = self.Re_m
        return out


def phi_position(model, t):
    """Liouville forcing of the position model, ``sqrt(D / 2t)``."""
    return model.phi(t)


def phi_varphi_velocity(model, t):
    """``(varphi, phi)``: position- and velocity-equation forcings of the velocity model."""
    return model.varphi(t), model.phi(t)


# ---------------------------------------------------------------------------
# Generic N-term random forcing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Drift:
    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in DRIFTS:
            raise ParameterDomainError(f"unknown drift {self.name!r}; known: {sorted(DRIFTS)}")
        _check_params(self.params, DRIFTS[self.name][0], f"drift {self.name}")

    @property
    def dim(self):
        return DRIFTS[self.name][1]

    def __call__(self, t, y):
        return DRIFTS[self.name][2](t, y, **self.params)

    def jacobian(self, t, y):
        return DRIFTS[self.name][3](t, y, **self.params)


def _drift_constant(t, y, value):
    return np.full_like(y, value)


def _drift_linear(t, y, a, b):
    return a + b * y


def _drift_relaxation(t, y, tau):
    return -y / tau


def _drift_velocity(t, y, tau_p):
    return np.stack([tau_p * y[1], -y[1]])


def _jac_const(value):
    def jac(t, y, **params):
        v = value(**params)
        return np.broadcast_to(np.asarray(v, dtype=float).reshape(v.shape + (1,) * (np.ndim(y) - 1)),
                               v.shape + np.shape(y)[1:])
    return jac


DRIFTS = {
    # name: (required params, dim, fn, jacobian)
    "constant": (("value",), 1, _drift_constant, _jac_const(lambda value: np.zeros((1, 1)))),
    "linear": (("a", "b"), 1, _drift_linear, _jac_const(lambda a, b: np.array([[b]], float))),
    "relaxation": (("tau",), 1, _drift_relaxation,
                   _jac_const(lambda tau: np.array([[-1.0 / tau]]))),
    "velocity": (("tau_p",), 2, _drift_velocity,
                 _jac_const(lambda tau_p: np.array([[0.0, tau_p], [0.0, -1.0]]))),
}


def _check_params(params, required, what):
    missing = [k for k in required if k not in params]
    extra = [k for k in params if k not in required]
    if missing or extra:
        raise ParameterDomainError(f"{what}: missing {missing}, unexpected {extra}")


@dataclass(frozen=True)
class Basis:
    """Named deterministic basis function of time (serializable)."""

    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in BASES:
            raise ParameterDomainError(f"unknown basis {self.name!r}; known: {sorted(BASES)}")
        _check_params(self.params, BASES[self.name][0], f"basis {self.name}")

    def __call__(self, t):
        return BASES[self.name][1](t, **self.params)

    @property
    def clock_power(self):
        return BASES[self.name][2](**self.params)

    @property
    def singular_at_zero(self):
        return BASES[self.name][3](**self.params)


def _basis_power(t, c, p):
    return c * np.asarray(t, dtype=float) ** p


def _power_clock(c, p):
    if -1.0 < p < 0.0:
        return min(1.0 / (1.0 + p), 8.0)
    return 1


def _basis_table(t, t_values, values):
    return np.interp(t, t_values, values)


BASES = {
    # name: (params, fn(t, **p), clock power, singular at t = 0)
    "constant": (("c",), lambda t, c: c + 0.0 * np.asarray(t, dtype=float),
                 lambda c: 1, lambda c: False),
    "power": (("c", "p"), _basis_power, _power_clock, lambda c, p: p < 0),
    "exp": (("c", "rate"), lambda t, c, rate: c * np.exp(rate * np.asarray(t, dtype=float)),
            lambda c, rate: 1, lambda c, rate: False),
    "position_sqrt": (("D",), lambda t, D: PositionModel(0.0, D).phi(t),
                      lambda D: 2, lambda D: True),
    "velocity_varphi": (("tau_p", "D"), lambda t, tau_p, D: VelocityModel(tau_p, D).varphi(t),
                        lambda tau_p, D: 2, lambda tau_p, D: True),
    "velocity_phi": (("D",), lambda t, D: VelocityModel(1.0, D).phi(t),
                     lambda D: 2, lambda D: True),
    "fhhs_phi": (("tau_p", "C1", "C2"),
                 lambda t, tau_p, C1, C2: FhhsModel(tau_p, 1.0, C1, C2).phi(t),
                 lambda tau_p, C1, C2: FhhsModel(tau_p, 1.0, C1, C2).clock_power,
                 lambda tau_p, C1, C2: C2 < 1),
    "table": (("t_values", "values"), _basis_table, lambda t_values, values: 1,
              lambda t_values, values: False),
}


@dataclass(frozen=True)
class ForcingTerm:
    basis: Basis
    coefficient: int = 0
    component: int = 0


@dataclass(frozen=True, eq=False)
class RandomForcingModel:
    """``dy/dt = drift(t, y) + sum_i Xi_{c(i)} basis_i(t) e_{k(i)}``.

    ``coefficients`` holds the laws of the (independent) random coefficients;
    each term references one by index, so the single shared coefficient of the
    solved models is ``coefficients=(dist,)`` with every term using index 0.
    """

    drift: Drift
    terms: tuple
    coefficients: tuple
    t_start: float = 0.0
    y0: tuple = ()

    kind = "forcing"

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "coefficients", tuple(self.coefficients))
        object.__setattr__(self, "y0", tuple(float(v) for v in self.y0))
        if self.y0 and len(self.y0) != self.dim:
            raise ParameterDomainError("y0 must have one entry per state component")
        if len(self.terms) < 1:
            raise ParameterDomainError("RandomForcingModel needs at least one term")
        if not all(isinstance(c, XiDistribution) for c in self.coefficients):
            raise ParameterDomainError("coefficients must be XiDistribution instances")
        for term in self.terms:
            if not 0 <= term.coefficient < len(self.coefficients):
                raise ParameterDomainError("term references a missing coefficient")
            if not 0 <= term.component < self.dim:
                raise ParameterDomainError("term component outside the state dimension")
            if term.basis.singular_at_zero and self.t_start <= 0:
                raise ParameterDomainError(
                    f"basis {term.basis.name!r} is singular at t = 0; declare t_start > 0"
                )

    @property
    def dim(self):
        return self.drift.dim

    @property
    def state_names(self):
        return ("x",) if self.dim == 1 else ("x", "u")

    @property
    def clock_power(self):
        return max(term.basis.clock_power for term in self.terms)

    @property
    def initial_point(self):
        """Deterministic state at ``t_start`` (zeros unless ``y0`` is given)."""
        return np.array(self.y0) if self.y0 else np.zeros(self.dim)

    @property
    def n_coefficients(self):
        return len(self.coefficients)

    def _xi_rows(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.n_coefficients == 1:
            return xi if (xi.ndim == 2 and xi.shape[0] == 1) else xi[None]
        if xi.shape[0] != self.n_coefficients:
            raise ParameterDomainError(
                f"xi needs a leading axis of length {self.n_coefficients}"
            )
        return xi

    def rhs(self, t, y, xi):
        rows = self._xi_rows(xi)
        out = np.array(self.drift(t, y), dtype=float)
        for term in self.terms:
            out[term.component] = out[term.component] + rows[term.coefficient] * term.basis(t)
        return out

    def jacobian(self, t, y, xi):
        return self.drift.jacobian(t, y)

    def divergence(self, t, y, xi):
        jac = self.jacobian(t, y, xi)
        return sum(jac[k, k] for k in range(self.dim))

    def to_config(self):
        return {
            "type": "forcing",
            "drift": {"name": self.drift.name, "params": dict(self.drift.params)},
            "terms": [
                {"basis": {"name": t.basis.name, "params": dict(t.basis.params)},
                 "coefficient": t.coefficient, "component": t.component}
                for t in self.terms
            ],
            "coefficients": [c.to_config() for c in self.coefficients],
            "t_start": self.t_start,
            "y0": list(self.y0),
        }


def as_forcing_model(model, dist):
    """Express a canonical model as a :class:`RandomForcingModel` with coefficient ``dist``."""
    if isinstance(model, PositionModel):
        return RandomForcingModel(
            Drift("constant", {"value": model.u_p}),
            (ForcingTerm(Basis("position_sqrt", {"D": model.D})),),
            (dist,), t_start=FORCING_T0, y0=(0.0,),
        )
    if isinstance(model, VelocityModel):
        return RandomForcingModel(
            Drift("velocity", {"tau_p": model.tau_p}),
            (ForcingTerm(Basis("velocity_varphi", {"tau_p": model.tau_p, "D": model.D}), 0, 0),
             ForcingTerm(Basis("velocity_phi", {"D": model.D}), 0, 1)),
            (dist,), t_start=FORCING_T0, y0=(0.0, model.v0),
        )
    if isinstance(model, FhhsModel):
        return RandomForcingModel(
            Drift("relaxation", {"tau": model.tau_p}),
            (ForcingTerm(Basis("fhhs_phi", {"tau_p": model.tau_p, "C1": model.C1,
                                            "C2": model.C2})),),
            (dist,),
        )
    raise ParameterDomainError(f"no forcing-model form for {type(model).__name__}")


_MODEL_KEYS = {
    "position": ({"u_p", "D"}, set()),
    "velocity": ({"tau_p", "D"}, {"v0"}),
    "fhhs": ({"tau_p", "sigma_xi", "C1"}, {"C2", "Re_m", "omega", "rho_ratio"}),
}


def model_from_config(spec):
    """Build a model record from its config mapping (``type`` selects the model)."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise ParameterDomainError("model spec needs a 'type' key")
    kind = spec["type"]
    body = {k: v for k, v in spec.items() if k != "type"}
    if kind == "forcing":
        allowed = {"drift", "terms", "coefficients", "t_start", "y0"}
        extra = set(body) - allowed
        if extra:
            raise ParameterDomainError(f"unknown keys for forcing model: {sorted(extra)}")
        drift = Drift(body["drift"]["name"], dict(body["drift"].get("params", {})))
        terms = tuple(
            ForcingTerm(Basis(t["basis"]["name"], dict(t["basis"].get("params", {}))),
                        int(t.get("coefficient", 0)), int(t.get("component", 0)))
            for t in body["terms"]
        )
        coefs = tuple(XiDistribution.from_config(c) for c in body["coefficients"])
        return RandomForcingModel(drift, terms, coefs, float(body.get("t_start", 0.0)),
                                  tuple(body.get("y0", ())))
    if kind not in _MODEL_KEYS:
        raise ParameterDomainError(f"unknown model type {kind!r}")
    required, optional = _MODEL_KEYS[kind]
    missing, extra = required - set(body), set(body) - required - optional
    if missing or extra:
        raise ParameterDomainError(
            f"{kind} model: missing {sorted(missing)}, unknown {sorted(extra)}"
        )
    try:
        body = {k: (None if v is None else float(v)) for k, v in body.items()}
    except (TypeError, ValueError) as exc:
        raise ParameterDomainError(f"{kind} model parameters must be numbers") from exc
    cls = {"position": PositionModel, "velocity": VelocityModel, "fhhs": FhhsModel}[kind]
    return cls(**body)
