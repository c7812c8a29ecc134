"""Time-invariant random coefficients.

A :class:`XiDistribution` is the law of the scalar coefficient that replaces
the Wiener increment.  Four families are supported; parameter order follows
the config-file convention::

    normal      [mean, std]          (std == 0 is a point mass)
    uniform     [lo, hi]
    triangular  [lo, mode, hi]
    custom      tabulated density on a strictly increasing grid
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from . import rng
from .errors import ParameterDomainError, UnsupportedError

FAMILIES = ("normal", "uniform", "triangular", "custom")

SQRT3 = math.sqrt(3.0)
SQRT2 = math.sqrt(2.0)


def _gauss_legendre_integral(fn, lo, hi, degree):
    """Integral of ``fn`` over [lo, hi], exact for polynomials up to ``degree``."""
    m = degree // 2 + 1
    nodes, weights = np.polynomial.legendre.leggauss(m)
    half = 0.5 * (hi - lo)
    x = lo + half * (nodes + 1.0)
    return half * float(np.dot(weights, fn(x)))


@dataclass(frozen=True, eq=False)
class XiDistribution:
    family: str
    params: tuple
    standardized: bool = False
    # Custom family only: normalized table and cumulative mass at the nodes.
    _grid: np.ndarray | None = field(default=None, repr=False)
    _dens: np.ndarray | None = field(default=None, repr=False)
    _cum: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        fam = self.family.lower()
        if fam not in FAMILIES:
            raise ParameterDomainError(f"unknown family {self.family!r}")
        object.__setattr__(self, "family", fam)
        p = tuple(float(v) for v in self.params)
        object.__setattr__(self, "params", p)
        if not all(math.isfinite(v) for v in p):
            raise ParameterDomainError("distribution parameters must be finite")
        if fam == "normal":
            if len(p) != 2 or p[1] < 0:
                raise ParameterDomainError("normal needs [mean, std] with std >= 0")
        elif fam == "uniform":
            if len(p) != 2 or not p[0] < p[1]:
                raise ParameterDomainError("uniform needs [lo, hi] with lo < hi")
        elif fam == "triangular":
            if len(p) != 3 or not (p[0] < p[2] and p[0] <= p[1] <= p[2]):
                raise ParameterDomainError(
                    "triangular needs [lo, mode, hi] with lo < hi and lo <= mode <= hi"
                )
        elif self._grid is None:
            raise ParameterDomainError("use XiDistribution.custom(grid, density)")
        if self.standardized:
            if abs(self.mean) > 1e-12 or abs(self.var - 1.0) > 1e-12:
                raise ParameterDomainError(
                    f"standardized flag set but mean={self.mean}, var={self.var}"
                )

    # -- constructors -----------------------------------------------------
    @classmethod
    def normal(cls, mean=0.0, std=1.0):
        return cls("normal", (mean, std), standardized=(mean == 0.0 and std == 1.0))

    @classmethod
    def uniform(cls, lo=-SQRT3, hi=SQRT3):
        return cls("uniform", (lo, hi), standardized=(lo == -SQRT3 and hi == SQRT3))

    @classmethod
    def triangular(cls, lo=-2 * SQRT2, mode=SQRT2, hi=SQRT2):
        std = lo == -2 * SQRT2 and mode == SQRT2 and hi == SQRT2
        return cls("triangular", (lo, mode, hi), standardized=std)

    @classmethod
    def custom(cls, grid, density, standardized=False):
        grid = np.asarray(grid, dtype=float)
        dens = np.asarray(density, dtype=float)
        if grid.ndim != 1 or grid.shape != dens.shape or grid.size < 2:
            raise ParameterDomainError("custom table needs matching 1-D grid and density")
        if np.any(np.diff(grid) <= 0):
            raise ParameterDomainError("custom grid must be strictly increasing")
        if np.any(dens < 0) or not np.all(np.isfinite(dens)):
            raise ParameterDomainError("custom density must be finite and non-negative")
        cells = 0.5 * (dens[1:] + dens[:-1]) * np.diff(grid)
        total = cells.sum()
        if total <= 0:
            raise ParameterDomainError("custom density has zero mass")
        dens = dens / total
        cum = np.concatenate([[0.0], np.cumsum(cells / total)])
        cum[-1] = 1.0
        return cls(
            "custom", (grid[0], grid[-1]), standardized, _grid=grid, _dens=dens, _cum=cum
        )

    @classmethod
    def from_config(cls, spec):
        """Build from ``{"family": ..., "params": [...]}`` (custom: ``grid``/``density``)."""
        if not isinstance(spec, dict) or "family" not in spec:
            raise ParameterDomainError("distribution spec needs a 'family' key")
        fam = str(spec["family"]).lower()
        if fam == "custom":
            return cls.custom(spec["grid"], spec["density"])
        params = spec.get("params")
        if params is None:
            return {"normal": cls.normal, "uniform": cls.uniform, "triangular": cls.triangular}[
                fam
            ]()
        dist = cls(fam, tuple(params))
        if abs(dist.mean) < 1e-12 and abs(dist.var - 1) < 1e-12:
            object.__setattr__(dist, "standardized", True)
        return dist

    def to_config(self):
        if self.family == "custom":
            return {"family": "custom", "grid": self._grid.tolist(), "density": self._dens.tolist()}
        return {"family": self.family, "params": list(self.params)}

    def scaled(self, factor):
        """Law of ``factor * Xi`` (factor > 0)."""
        if factor <= 0:
            raise ParameterDomainError("scale factor must be positive")
        if self.family == "custom":
            return XiDistribution.custom(self._grid * factor, self._dens / factor)
        if self.family == "normal":
            return XiDistribution.normal(self.params[0] * factor, self.params[1] * factor)
        return XiDistribution(self.family, tuple(v * factor for v in self.params))

    # -- basic properties ---------------------------------------------------
    @property
    def is_degenerate(self):
        return self.family == "normal" and self.params[1] == 0.0

    @property
    def support(self):
        if self.family == "normal":
            return (-math.inf, math.inf) if not self.is_degenerate else (self.params[0],) * 2
        if self.family == "triangular":
            return (self.params[0], self.params[2])
        return (self.params[0], self.params[1])

    @property
    def mean(self):
        f, p = self.family, self.params
        if f == "normal":
            return p[0]
        if f == "uniform":
            return 0.5 * (p[0] + p[1])
        if f == "triangular":
            return (p[0] + p[1] + p[2]) / 3.0
        return self._table_expectation(lambda x: x, 1)

    @property
    def var(self):
        f, p = self.family, self.params
        if f == "normal":
            return p[1] ** 2
        if f == "uniform":
            return (p[1] - p[0]) ** 2 / 12.0
        if f == "triangular":
            a, c, b = p
            return (a * a + b * b + c * c - a * b - a * c - b * c) / 18.0
        m = self.mean
        return self._table_expectation(lambda x: (x - m) ** 2, 2)

    @property
    def std(self):
        return math.sqrt(self.var)

    def quadrature_pieces(self, tail=12.0):
        """Intervals on which the density is smooth; normals are cut at mean +- tail*std."""
        if self.family == "normal":
            m, s = self.params
            return [(m - tail * s, m + tail * s)]
        if self.family == "uniform":
            return [tuple(self.params)]
        if self.family == "triangular":
            a, c, b = self.params
            return [(lo, hi) for lo, hi in ((a, c), (c, b)) if hi > lo]
        return list(zip(self._grid[:-1], self._grid[1:]))

    def quadrature(self, per_piece=16, tail=12.0):
        """Nodes and probability weights ``w_k ~ f(xi_k) dxi`` over the support.

        Normal laws are split into unit-std panels so Gauss-Legendre stays accurate.
        """
        if self.is_degenerate:
            return np.array([self.params[0]]), np.array([1.0])
        pieces = self.quadrature_pieces(tail)
        if self.family == "normal":
            lo, hi = pieces[0]
            edges = np.linspace(lo, hi, int(2 * tail) + 1)
            pieces = list(zip(edges[:-1], edges[1:]))
        g, w = np.polynomial.legendre.leggauss(per_piece)
        lo = np.array([p[0] for p in pieces])[:, None]
        half = 0.5 * (np.array([p[1] for p in pieces])[:, None] - lo)
        nodes = (lo + half * (g + 1.0)).ravel()
        weights = (half * w).ravel() * self.pdf(nodes)
        return nodes, weights

    # -- density, CDF, inverse CDF ----------------------------------------------
    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        f, p = self.family, self.params
        if f == "normal":
            m, s = p
            if s == 0.0:
                return np.where(x == m, np.inf, 0.0)
            z = (x - m) / s
            return np.exp(-0.5 * z * z) / (s * math.sqrt(2 * math.pi))
        if f == "uniform":
            lo, hi = p
            return np.where((x >= lo) & (x <= hi), 1.0 / (hi - lo), 0.0)
        if f == "triangular":
            a, c, b = p
            peak = 2.0 / (b - a)
            with np.errstate(divide="ignore", invalid="ignore"):
                up = peak * (x - a) / (c - a) if c > a else np.full_like(x, peak)
                down = peak * (b - x) / (b - c) if b > c else np.full_like(x, peak)
            out = np.where(x < c, up, down)
            return np.where((x >= a) & (x <= b), out, 0.0)
        return np.interp(x, self._grid, self._dens, left=0.0, right=0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        f, p = self.family, self.params
        if f == "normal":
            m, s = p
            if s == 0.0:
                return np.where(x >= m, 1.0, 0.0)
            return ndtr((x - m) / s)
        if f == "uniform":
            lo, hi = p
            return np.clip((x - lo) / (hi - lo), 0.0, 1.0)
        if f == "triangular":
            a, c, b = p
            xc = np.clip(x, a, b)
            with np.errstate(divide="ignore", invalid="ignore"):
                left = (xc - a) ** 2 / ((b - a) * (c - a)) if c > a else np.zeros_like(xc)
                right = 1.0 - (b - xc) ** 2 / ((b - a) * (b - c)) if b > c else np.ones_like(xc)
            return np.where(xc <= c, left, right)
        g, d, cum = self._grid, self._dens, self._cum
        xc = np.clip(x, g[0], g[-1])
        i = np.clip(np.searchsorted(g, xc, side="right") - 1, 0, g.size - 2)
        h = xc - g[i]
        slope = (d[i + 1] - d[i]) / (g[i + 1] - g[i])
        return cum[i] + d[i] * h + 0.5 * slope * h * h

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        f, p = self.family, self.params
        if f == "normal":
            return p[0] + p[1] * ndtri(u)
        if f == "uniform":
            return p[0] + (p[1] - p[0]) * u
        if f == "triangular":
            a, c, b = p
            split = (c - a) / (b - a)
            left = a + np.sqrt(u * (b - a) * (c - a))
            right = b - np.sqrt((1.0 - u) * (b - a) * (b - c))
            return np.where(u <= split, left, right)
        g, d, cum = self._grid, self._dens, self._cum
        i = np.clip(np.searchsorted(cum, u, side="right") - 1, 0, g.size - 2)
        r = u - cum[i]
        slope = (d[i + 1] - d[i]) / (g[i + 1] - g[i])
        # Solve d_i h + slope h^2 / 2 = r for the root in [0, cell width].
        disc = np.sqrt(np.maximum(d[i] ** 2 + 2.0 * slope * r, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            h = np.where(
                np.abs(slope) * (g[i + 1] - g[i]) > 1e-12 * np.maximum(d[i], 1e-300),
                2.0 * r / (d[i] + disc),
                r / d[i],
            )
        h = np.where(np.isfinite(h), h, 0.0)
        return np.clip(g[i] + h, g[i], g[i + 1])

    # -- moments -----------------------------------------------------------------
    def _table_expectation(self, fn, degree):
        total = 0.0
        for lo, hi in self.quadrature_pieces():
            total += _gauss_legendre_integral(lambda x: fn(x) * self.pdf(x), lo, hi, degree + 1)
        return total

    def central_moment(self, order):
        """E[(Xi - mean)^order]."""
        if int(order) != order or order < 1:
            raise UnsupportedError(f"moment order must be a positive integer, got {order}")
        n = int(order)
        f, p = self.family, self.params
        if f == "normal":
            if n % 2:
                return 0.0
            return p[1] ** n * float(np.prod(np.arange(n - 1, 0, -2))) if n > 0 else 1.0
        if f == "uniform":
            if n % 2:
                return 0.0
            half = 0.5 * (p[1] - p[0])
            return half ** n / (n + 1)
        m = self.mean
        # Piecewise-linear densities: Gauss-Legendre of sufficient degree is exact.
        return self._table_expectation(lambda x: (x - m) ** n, n)

    def skewness(self):
        return self.central_moment(3) / self.var ** 1.5

    # -- sampling ---------------------------------------------------------------
    def sample(self, seed, n, start=0):
        """Draws ``start .. start+n-1`` of the stream selected by ``seed``."""
        if n < 1:
            raise ParameterDomainError("n must be >= 1")
        if self.is_degenerate:
            return np.full(int(n), self.params[0])
        return self.ppf(rng.uniforms(seed, rng.STREAM_XI, 0, start, n))


def density(dist, xi):
    """Probability density of ``dist`` at ``xi`` (vectorized)."""
    out = dist.pdf(xi)
    return float(out) if np.ndim(out) == 0 else out


def cdf(dist, xi):
    out = dist.cdf(xi)
    return float(out) if np.ndim(out) == 0 else out


def inverse_cdf(dist, u):
    out = dist.ppf(u)
    return float(out) if np.ndim(out) == 0 else out


def sample(dist, seed, n):
    """``n`` i.i.d. draws by inverse-transform sampling; draw k depends only on (seed, k)."""
    return dist.sample(seed, n)


def standardized_moment(dist, order):
    """Central moment E[Xi'^order]; named after its use with standardized laws."""
    return dist.central_moment(order)


STANDARD_LAWS = {
    "normal": XiDistribution.normal(),
    "uniform": XiDistribution.uniform(),
    "triangular": XiDistribution.triangular(),
}
