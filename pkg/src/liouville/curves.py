"""Sampled densities and moment time series, with CSV round-tripping."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParameterDomainError

FLOAT_FMT = "%.17g"


def fmt(x):
    return FLOAT_FMT % x


def _meta_line(meta):
    parts = []
    for key in sorted(meta):
        val = meta[key]
        if isinstance(val, float):
            val = fmt(val)
        parts.append(f"{key}={val}")
    return "# " + "; ".join(parts)


def _parse_meta(line):
    out = {}
    body = line[1:].strip()
    for part in filter(None, (p.strip() for p in body.split(";"))):
        key, _, val = part.partition("=")
        try:
            out[key] = float(val) if any(c in val for c in ".eEn") else int(val)
        except ValueError:
            out[key] = val
    return out


@dataclass(eq=False)
class PdfCurve:
    """A 1-D density sampled at ``coords``.

    When ``edges`` is given the curve is a histogram: ``density[k]`` is the
    bin height on ``[edges[k], edges[k+1]]`` and ``coords`` the bin centres.
    """

    coords: np.ndarray
    density: np.ndarray
    meta: dict = field(default_factory=dict)
    edges: np.ndarray | None = None

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        self.density = np.asarray(self.density, dtype=float)
        if self.coords.shape != self.density.shape or self.coords.ndim != 1:
            raise ParameterDomainError("coords and density must be 1-D arrays of equal length")
        if self.edges is not None:
            self.edges = np.asarray(self.edges, dtype=float)
            if self.edges.shape != (self.coords.size + 1,):
                raise ParameterDomainError("histogram edges must have len(coords) + 1 entries")
        if np.any(np.diff(self.coords) <= 0):
            raise ParameterDomainError("coords must be strictly increasing")

    @property
    def is_histogram(self):
        return self.edges is not None

    def _weights(self):
        """Per-point quadrature weights (trapezoid, or bin widths for histograms)."""
        if self.is_histogram:
            return np.diff(self.edges)
        x = self.coords
        if x.size == 1:
            return np.zeros(1)
        w = np.zeros_like(x)
        d = np.diff(x)
        w[:-1] += 0.5 * d
        w[1:] += 0.5 * d
        return w

    def mass(self):
        return float(np.dot(self._weights(), self.density))

    def moment(self, order, central=True):
        w = self._weights() * self.density
        total = w.sum()
        if total <= 0:
            raise DomainError("curve has no mass")
        x = self.coords
        if central:
            x = x - np.dot(w, x) / total
        if self.is_histogram and order >= 2:
            # integrate x^n exactly over each bin rather than at the centre
            lo, hi = self.edges[:-1] - self.coords + x, self.edges[1:] - self.coords + x
            vals = (hi ** (order + 1) - lo ** (order + 1)) / ((order + 1) * (hi - lo))
            return float(np.dot(w, vals) / total)
        return float(np.dot(w, x ** order) / total)

    def mean(self):
        return self.moment(1, central=False)

    def var(self):
        return self.moment(2)

    def skewness(self):
        return self.moment(3) / self.var() ** 1.5

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_histogram:
            k = np.searchsorted(self.edges, x, side="right") - 1
            inside = (k >= 0) & (k < self.density.size)
            return np.where(inside, self.density[np.clip(k, 0, self.density.size - 1)], 0.0)
        return np.interp(x, self.coords, self.density, left=0.0, right=0.0)

    def cdf_nodes(self):
        """(points, cumulative mass) at the nodes/edges where the CDF is exact."""
        if self.is_histogram:
            return self.edges, np.concatenate([[0.0], np.cumsum(self.density * np.diff(self.edges))])
        c = np.concatenate(
            [[0.0], np.cumsum(0.5 * (self.density[1:] + self.density[:-1]) * np.diff(self.coords))]
        )
        return self.coords, c

    def cdf(self, x):
        pts, c = self.cdf_nodes()
        return np.interp(x, pts, c, left=0.0, right=c[-1])

    def l1_distance(self, other):
        """L1 distance to ``other`` (curve or callable) on this curve's nodes."""
        vals = other.evaluate(self.coords) if isinstance(other, PdfCurve) else other(self.coords)
        return float(np.dot(self._weights(), np.abs(self.density - vals)))

    # -- CSV -------------------------------------------------------------------
    def to_csv(self, path=None):
        buf = io.StringIO()
        meta = dict(self.meta)
        if self.is_histogram:
            meta["bins"] = "histogram"
        buf.write(_meta_line(meta) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        if self.is_histogram:
            w.writerow(["coordinate", "density", "lo", "hi"])
            for c, d, lo, hi in zip(self.coords, self.density, self.edges[:-1], self.edges[1:]):
                w.writerow([fmt(c), fmt(d), fmt(lo), fmt(hi)])
        else:
            w.writerow(["coordinate", "density"])
            for c, d in zip(self.coords, self.density):
                w.writerow([fmt(c), fmt(d)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            lines = fh.read().splitlines()
        meta = _parse_meta(lines[0]) if lines and lines[0].startswith("#") else {}
        rows = list(csv.reader(lines[1:] if meta or lines[0].startswith("#") else lines))
        header, body = rows[0], np.array(rows[1:], dtype=float)
        edges = None
        if "lo" in header:
            edges = np.concatenate([body[:, 2], body[-1:, 3]])
        meta.pop("bins", None)
        return cls(body[:, 0], body[:, 1], meta, edges)


MOMENT_COLUMNS = ("t", "mean_x", "mean_u", "var_x", "cov_xu", "var_u", "cov_xi_x", "cov_xi_u")


@dataclass(eq=False)
class MomentSeries:
    """Means, variances and cross-covariances over time.

    Columns a model does not have are NaN.  ``var_xi`` is the coefficient
    variance used for the Cauchy-Schwarz check on ``cov_xi_*``.
    """

    t: np.ndarray
    mean_x: np.ndarray
    mean_u: np.ndarray
    var_x: np.ndarray
    cov_xu: np.ndarray
    var_u: np.ndarray
    cov_xi_x: np.ndarray
    cov_xi_u: np.ndarray
    var_xi: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = np.size(self.t)
        for name in MOMENT_COLUMNS:
            val = getattr(self, name)
            arr = np.full(n, np.nan) if val is None else np.asarray(val, dtype=float)
            setattr(self, name, np.broadcast_to(arr, (n,)).copy() if arr.ndim == 0 else arr)

    @classmethod
    def build(cls, t, var_xi=1.0, meta=None, **cols):
        unknown = set(cols) - set(MOMENT_COLUMNS)
        if unknown:
            raise ParameterDomainError(f"unknown moment columns {sorted(unknown)}")
        t = np.atleast_1d(np.asarray(t, dtype=float))
        full = {name: cols.get(name) for name in MOMENT_COLUMNS[1:]}
        return cls(t, var_xi=var_xi, meta=dict(meta or {}), **full)

    def column(self, name):
        return getattr(self, name)

    @property
    def temperature(self):
        return self.var_u / 3.0

    def cauchy_schwarz_ok(self, tol=1e-9):
        checks = [
            (self.cov_xu, self.var_x, self.var_u),
            (self.cov_xi_x, self.var_x, np.full_like(self.var_x, self.var_xi)),
            (self.cov_xi_u, self.var_u, np.full_like(self.var_u, self.var_xi)),
        ]
        for cov, va, vb in checks:
            ok = ~np.isfinite(cov) | (np.abs(cov) <= np.sqrt(np.abs(va * vb)) + tol)
            if not np.all(ok):
                return False
        for var in (self.var_x, self.var_u):
            if np.any(var[np.isfinite(var)] < -tol):
                return False
        return True

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(MOMENT_COLUMNS)
        cols = [getattr(self, name) for name in MOMENT_COLUMNS]
        for row in zip(*cols):
            w.writerow([fmt(v) if math.isfinite(v) else "nan" for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path, var_xi=1.0):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if tuple(rows[0]) != MOMENT_COLUMNS:
            raise ParameterDomainError("unexpected moment CSV header")
        data = np.array(rows[1:], dtype=float).reshape(-1, len(MOMENT_COLUMNS))
        return cls(*data.T, var_xi=var_xi)
