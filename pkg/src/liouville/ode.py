"""Fixed-step classical Runge-Kutta integration with an optional power-law clock.

Forcings such as ``sqrt(D / 2t)`` are singular at t = 0.  Integrating in the
clock variable ``s = t**(1/p)`` turns ``dy/dt = f(t, y)`` into
``dy/ds = p s**(p-1) f(s**p, y)``, which is smooth for the forcings used here
(p = 2 for inverse-square-root singularities).  With ``p == 1`` the step is
``dt`` and the last step is shortened; otherwise the span is split into equal
steps in ``s`` no longer than ``dt`` in either ``s`` or (on average) ``t``.
"""

import math

import numpy as np

from .errors import NumericalBlowupError, ParameterDomainError


def _clock_nodes(t0, t1, dt, power):
    if power == 1:
        span = t1 - t0
        n_full = int(math.floor(abs(span) / dt * (1 + 1e-12)))
        nodes = t0 + math.copysign(dt, span) * np.arange(n_full + 1)
        if abs(nodes[-1] - t1) > 1e-12 * max(1.0, abs(t1)):
            nodes = np.append(nodes, t1)
        nodes[-1] = t1
        return nodes
    if t0 < 0 or t1 < 0:
        raise ParameterDomainError("power-law clock needs non-negative times")
    s0, s1 = t0 ** (1.0 / power), t1 ** (1.0 / power)
    span = max(abs(t1 - t0), abs(s1 - s0))
    n = max(1, int(math.ceil(span / dt * (1 - 1e-12))))
    return np.linspace(s0, s1, n + 1)


def rk4(rhs, t0, y0, t1, dt, power=1, check=True):
    """Integrate ``dy/dt = rhs(t, y)`` from ``t0`` to ``t1`` (either direction).

    ``y0`` may be any numpy array; ``rhs`` must return an array of the same shape.
    Returns the state at ``t1``.
    """
    if dt <= 0:
        raise ParameterDomainError("dt must be positive")
    y = np.array(y0, dtype=float, copy=True)
    if t1 == t0:
        return y
    nodes = _clock_nodes(t0, t1, dt, power)
    if power == 1:
        f = rhs
    else:
        def f(s, y):
            return power * s ** (power - 1) * rhs(s ** power, y)
    for a, b in zip(nodes[:-1], nodes[1:]):
        h = b - a
        k1 = f(a, y)
        k2 = f(a + 0.5 * h, y + 0.5 * h * k1)
        k3 = f(a + 0.5 * h, y + 0.5 * h * k2)
        k4 = f(b, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if check and not np.all(np.isfinite(y)):
            tb = b if power == 1 else b ** power
            raise NumericalBlowupError("non-finite state in characteristic integration", tb)
    return y


def rk4_record(rhs, t0, y0, times, dt, power=1):
    """Integrate through ``times`` (monotone, all on one side of ``t0``) and stack the states."""
    out = []
    t, y = t0, np.array(y0, dtype=float)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    sign = 1.0 if times[-1] >= t0 else -1.0
    for tk in times:
        if sign * (tk - t) < -1e-15:
            raise ParameterDomainError("output times must move monotonically away from t0")
        y = rk4(rhs, t, y, float(tk), dt, power)
        t = float(tk)
        out.append(y)
    return np.array(out)
