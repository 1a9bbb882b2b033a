"""Source probability models: sampling, quadrature, and conditional means.

A :class:`SourceModel` describes the distribution of the n-dimensional
observation.  Analytic families (gaussian, uniform, exponential, laplace,
and a correlated 2-D gaussian) carry closed-form marginals; arbitrary
densities can be supplied as a piecewise-constant table on a uniform grid,
loaded from CSV.

Estimation helpers return :class:`EstimateWithError`; quadrature results
carry ``stderr = 0`` and Monte Carlo results carry the usual standard error
of the mean.  Sampling is deterministic given ``(model, count, seed)``:
draws are produced in fixed-size chunks, each from a substream keyed by
``(seed, chunk_index)``, so results do not depend on how work is split
across workers.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

from .errors import BinDeathError, DimensionMismatchError
from .geometry import Hyperplane, as_point

__all__ = [
    "GAUSSIAN",
    "CORRELATED_GAUSSIAN_2D",
    "UNIFORM",
    "EXPONENTIAL",
    "LAPLACE",
    "TABULATED",
    "EstimateWithError",
    "Region",
    "SourceModel",
    "iid_gaussian",
    "correlated_gaussian_2d",
    "iid_uniform",
    "iid_exponential",
    "iid_laplace",
    "tabulated_density",
    "tabulated_from_csv",
    "region_mean",
    "conditional_mean_curve",
    "symmetry_deviation",
    "conditional_support",
    "truncated_moments_1d",
    "truncated_mean_1d",
]

GAUSSIAN = "iid-gaussian"
CORRELATED_GAUSSIAN_2D = "correlated-gaussian-2d"
UNIFORM = "iid-uniform"
EXPONENTIAL = "iid-exponential"
LAPLACE = "iid-laplace"
TABULATED = "tabulated-density"

_FAMILIES = (GAUSSIAN, CORRELATED_GAUSSIAN_2D, UNIFORM, EXPONENTIAL, LAPLACE, TABULATED)

_SAMPLE_CHUNK = 1 << 16


@dataclass(frozen=True, eq=False)
class EstimateWithError:
    """A numeric estimate with its standard error and the sample count used.

    ``stderr`` is zero only for closed-form or quadrature results.  For
    vector-valued estimates ``stderr`` is the root-sum-square of the
    per-component standard errors.
    """

    value: float | np.ndarray
    stderr: float
    sample_count: int


@dataclass(eq=False)
class Region:
    """A subset of source space: half-space intersection, indicator, or mask.

    Half-space lists describe convex regions (membership: every hyperplane
    value nonnegative).  ``from_samples`` wraps an explicit mask over a
    fixed sample batch.
    """

    halfspaces: tuple[Hyperplane, ...] | None = None
    indicator: Callable[[np.ndarray], np.ndarray] | None = None
    points: np.ndarray | None = None
    mask: np.ndarray | None = None

    @classmethod
    def from_halfspaces(cls, planes) -> "Region":
        return cls(halfspaces=tuple(planes))

    @classmethod
    def from_indicator(cls, fn) -> "Region":
        return cls(indicator=fn)

    @classmethod
    def from_samples(cls, points, mask) -> "Region":
        points = np.asarray(points, dtype=float)
        mask = np.asarray(mask, dtype=bool)
        if points.shape[0] != mask.shape[0]:
            raise DimensionMismatchError("mask length must match the number of points")
        return cls(points=points, mask=mask)

    def member(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if self.halfspaces is not None:
            inside = np.ones(pts.shape[0], dtype=bool)
            for plane in self.halfspaces:
                inside &= plane.value(pts) >= 0.0
            return inside
        if self.indicator is not None:
            return np.asarray(self.indicator(pts), dtype=bool)
        raise ValueError("region has no membership predicate (sample-mask regions are fixed)")


@dataclass(eq=False)
class SourceModel:
    """Distribution of the n-dimensional source observation.

    Use the family factories (``iid_gaussian`` etc.) rather than the raw
    constructor.  ``symmetric`` is the analytic marginal-symmetry flag:
    True/False when the family decides it, None when only a numeric test
    applies (tabulated densities).
    """

    family: str
    dim: int
    mean: np.ndarray
    sigma_sq: float | None = None
    cov: np.ndarray | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    rate: float | None = None
    laplace_scale: float | None = None
    tab_lo: np.ndarray | None = None
    tab_step: np.ndarray | None = None
    tab_density: np.ndarray | None = None
    truncation_eps: float = 1e-6
    symmetric: bool | None = None

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unsupported source family {self.family!r}")
        if self.dim < 1:
            raise ValueError("dimension must be at least 1")
        self.mean = np.asarray(self.mean, dtype=float)

    # -- marginal structure ------------------------------------------------

    @property
    def mean_vector(self) -> np.ndarray:
        return self.mean.copy()

    def marginal_variance(self, i: int) -> float:
        if self.family == GAUSSIAN:
            return float(self.sigma_sq)
        if self.family == CORRELATED_GAUSSIAN_2D:
            return float(self.cov[i, i])
        if self.family == UNIFORM:
            return float((self.hi[i] - self.lo[i]) ** 2 / 12.0)
        if self.family == EXPONENTIAL:
            return 1.0 / self.rate**2
        if self.family == LAPLACE:
            return 2.0 * self.laplace_scale**2
        # tabulated: exact second moment of the piecewise-constant density
        mass, mean, second = self._tabulated_marginal_moments(i)
        return second - mean**2

    @property
    def total_variance(self) -> float:
        return float(sum(self.marginal_variance(i) for i in range(self.dim)))

    def marginal_pdf(self, i: int, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.family == GAUSSIAN:
            return stats.norm.pdf(x, loc=self.mean[i], scale=math.sqrt(self.sigma_sq))
        if self.family == CORRELATED_GAUSSIAN_2D:
            return stats.norm.pdf(x, loc=self.mean[i], scale=math.sqrt(self.cov[i, i]))
        if self.family == UNIFORM:
            width = self.hi[i] - self.lo[i]
            return np.where((x >= self.lo[i]) & (x <= self.hi[i]), 1.0 / width, 0.0)
        if self.family == EXPONENTIAL:
            return np.where(x >= 0.0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)), 0.0)
        if self.family == LAPLACE:
            s = self.laplace_scale
            return np.exp(-np.abs(x - self.mean[i]) / s) / (2.0 * s)
        return self._tabulated_marginal_pdf(i, x)

    def marginal_cdf(self, i: int, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.family == GAUSSIAN:
            return stats.norm.cdf(x, loc=self.mean[i], scale=math.sqrt(self.sigma_sq))
        if self.family == CORRELATED_GAUSSIAN_2D:
            return stats.norm.cdf(x, loc=self.mean[i], scale=math.sqrt(self.cov[i, i]))
        if self.family == UNIFORM:
            return np.clip((x - self.lo[i]) / (self.hi[i] - self.lo[i]), 0.0, 1.0)
        if self.family == EXPONENTIAL:
            return np.where(x >= 0.0, -np.expm1(-self.rate * np.maximum(x, 0.0)), 0.0)
        if self.family == LAPLACE:
            s = self.laplace_scale
            z = (x - self.mean[i]) / s
            return np.where(z <= 0.0, 0.5 * np.exp(np.minimum(z, 0.0)), 1.0 - 0.5 * np.exp(-np.maximum(z, 0.0)))
        return self._tabulated_marginal_cdf(i, x)

    def marginal_ppf(self, i: int, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if self.family == GAUSSIAN:
            return stats.norm.ppf(q, loc=self.mean[i], scale=math.sqrt(self.sigma_sq))
        if self.family == CORRELATED_GAUSSIAN_2D:
            return stats.norm.ppf(q, loc=self.mean[i], scale=math.sqrt(self.cov[i, i]))
        if self.family == UNIFORM:
            return self.lo[i] + q * (self.hi[i] - self.lo[i])
        if self.family == EXPONENTIAL:
            return -np.log1p(-q) / self.rate
        if self.family == LAPLACE:
            s, mu = self.laplace_scale, self.mean[i]
            return np.where(q < 0.5, mu + s * np.log(2.0 * q), mu - s * np.log(2.0 * np.maximum(1.0 - q, 1e-300)))
        return self._tabulated_marginal_ppf(i, q)

    def support_interval(self, i: int, eps: float | None = None) -> tuple[float, float]:
        """Marginal support of coordinate ``i``, epsilon-truncated if unbounded."""
        eps = self.truncation_eps if eps is None else eps
        if self.family == UNIFORM:
            return float(self.lo[i]), float(self.hi[i])
        if self.family == TABULATED:
            return (
                float(self.tab_lo[i]),
                float(self.tab_lo[i] + self.tab_step[i] * self._tab_shape[i]),
            )
        if self.family == EXPONENTIAL:
            return 0.0, float(self.marginal_ppf(i, 1.0 - eps))
        return float(self.marginal_ppf(i, eps)), float(self.marginal_ppf(i, 1.0 - eps))

    @property
    def is_analytic(self) -> bool:
        return self.family != TABULATED

    # -- sampling ------------------------------------------------------------

    def sample(self, count: int, seed: int) -> np.ndarray:
        """Draw ``count`` observations, shape (count, dim), deterministically.

        The stream is chunked so that ``sample(n1, s)`` is a prefix of
        ``sample(n2, s)`` whenever ``n1 <= n2``.
        """
        if count <= 0:
            raise ValueError("sample count must be positive")
        seed = int(seed)
        if seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        out = np.empty((count, self.dim))
        for chunk_index in range(0, (count + _SAMPLE_CHUNK - 1) // _SAMPLE_CHUNK):
            start = chunk_index * _SAMPLE_CHUNK
            m = min(_SAMPLE_CHUNK, count - start)
            rng = np.random.default_rng(np.random.SeedSequence([seed, chunk_index]))
            # full chunks are always drawn so that shorter requests are exact
            # prefixes of longer ones, whatever the family consumes internally
            out[start : start + m] = self._draw(rng, _SAMPLE_CHUNK)[:m]
        return out

    def _draw(self, rng: np.random.Generator, m: int) -> np.ndarray:
        n = self.dim
        if self.family == GAUSSIAN:
            return rng.normal(self.mean, math.sqrt(self.sigma_sq), size=(m, n))
        if self.family == CORRELATED_GAUSSIAN_2D:
            chol = np.linalg.cholesky(self.cov)
            return self.mean + rng.standard_normal((m, 2)) @ chol.T
        if self.family == UNIFORM:
            return rng.uniform(self.lo, self.hi, size=(m, n))
        if self.family == EXPONENTIAL:
            return rng.exponential(1.0 / self.rate, size=(m, n))
        if self.family == LAPLACE:
            return rng.laplace(self.mean, self.laplace_scale, size=(m, n))
        return self._tabulated_draw(rng, m)

    # -- joint density and quadrature ---------------------------------------

    def joint_pdf(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, self.dim)
        if self.family == CORRELATED_GAUSSIAN_2D:
            return stats.multivariate_normal.pdf(pts, mean=self.mean, cov=self.cov)
        if self.family == TABULATED:
            return self._tabulated_joint_pdf(pts)
        dens = np.ones(pts.shape[0])
        for i in range(self.dim):
            dens *= self.marginal_pdf(i, pts[:, i])
        return dens

    def quadrature_cells(self, budget: int) -> tuple[np.ndarray, np.ndarray]:
        """Tensor-grid cells (centers, masses) covering the truncated support.

        For iid families the per-cell mass is an exact product of marginal
        CDF increments; the correlated gaussian uses midpoint density times
        area, and tabulated densities use their native cells exactly.
        """
        if self.family == TABULATED:
            return self._tabulated_cells()
        if self.dim > 3:
            raise ValueError("tensor-grid quadrature is limited to dimension <= 3")
        per_dim = {1: 1 << 18, 2: 1024, 3: 101}[self.dim]
        per_dim = min(per_dim, max(8, int(round(budget ** (1.0 / self.dim)))))
        edges = []
        for i in range(self.dim):
            lo, hi = self.support_interval(i)
            edges.append(np.linspace(lo, hi, per_dim + 1))
        centers_1d = [0.5 * (e[1:] + e[:-1]) for e in edges]
        mesh = np.meshgrid(*centers_1d, indexing="ij")
        centers = np.stack([m.ravel() for m in mesh], axis=-1)
        if self.family == CORRELATED_GAUSSIAN_2D:
            area = np.prod([e[1] - e[0] for e in edges])
            masses = self.joint_pdf(centers) * area
        else:
            masses_1d = [np.diff(self.marginal_cdf(i, edges[i])) for i in range(self.dim)]
            mmesh = np.meshgrid(*masses_1d, indexing="ij")
            masses = np.ones(centers.shape[0])
            for m in mmesh:
                masses *= m.ravel()
        return centers, masses

    # -- tabulated-density internals ----------------------------------------

    @property
    def _tab_shape(self) -> tuple[int, ...]:
        return self.tab_density.shape

    def _tabulated_cells(self) -> tuple[np.ndarray, np.ndarray]:
        shape = self._tab_shape
        vol = float(np.prod(self.tab_step))
        axes = [
            self.tab_lo[i] + self.tab_step[i] * (np.arange(shape[i]) + 0.5)
            for i in range(self.dim)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        centers = np.stack([m.ravel() for m in mesh], axis=-1)
        masses = self.tab_density.ravel() * vol
        return centers, masses

    def _tabulated_draw(self, rng: np.random.Generator, m: int) -> np.ndarray:
        centers, masses = self._tabulated_cells()
        probs = masses / masses.sum()
        idx = rng.choice(masses.shape[0], size=m, p=probs)
        jitter = rng.random((m, self.dim)) - 0.5
        return centers[idx] + jitter * self.tab_step

    def _tabulated_joint_pdf(self, pts: np.ndarray) -> np.ndarray:
        shape = self._tab_shape
        dens = np.zeros(pts.shape[0])
        idx = []
        inside = np.ones(pts.shape[0], dtype=bool)
        for i in range(self.dim):
            k = np.floor((pts[:, i] - self.tab_lo[i]) / self.tab_step[i]).astype(int)
            inside &= (k >= 0) & (k < shape[i])
            idx.append(np.clip(k, 0, shape[i] - 1))
        dens[inside] = self.tab_density[tuple(a[inside] for a in idx)]
        return dens

    def _tabulated_marginal_density_1d(self, i: int) -> tuple[np.ndarray, float, float]:
        """(cell densities, lo, step) of the marginal along axis i."""
        if self.dim == 1:
            dens = self.tab_density
        else:
            other = 1 - i
            dens = self.tab_density.sum(axis=other) * self.tab_step[other]
        return dens, float(self.tab_lo[i]), float(self.tab_step[i])

    def _tabulated_marginal_pdf(self, i: int, x: np.ndarray) -> np.ndarray:
        dens, lo, step = self._tabulated_marginal_density_1d(i)
        k = np.floor((x - lo) / step).astype(int)
        out = np.zeros_like(np.asarray(x, dtype=float))
        ok = (k >= 0) & (k < dens.shape[0])
        out[ok] = dens[k[ok]]
        return out

    def _tabulated_marginal_cdf(self, i: int, x: np.ndarray) -> np.ndarray:
        dens, lo, step = self._tabulated_marginal_density_1d(i)
        cum = np.concatenate([[0.0], np.cumsum(dens * step)])
        pos = np.clip((x - lo) / step, 0.0, dens.shape[0])
        k = np.floor(pos).astype(int)
        k = np.clip(k, 0, dens.shape[0] - 1)
        return np.minimum(cum[k] + dens[k] * (pos - k) * step, 1.0)

    def _tabulated_marginal_ppf(self, i: int, q: np.ndarray) -> np.ndarray:
        dens, lo, step = self._tabulated_marginal_density_1d(i)
        cum = np.concatenate([[0.0], np.cumsum(dens * step)])
        cum /= cum[-1]
        k = np.clip(np.searchsorted(cum, q, side="right") - 1, 0, dens.shape[0] - 1)
        base = cum[k]
        cell_mass = np.maximum(cum[k + 1] - cum[k], 1e-300)
        return lo + (k + (q - base) / cell_mass) * step

    def _tabulated_marginal_moments(self, i: int) -> tuple[float, float, float]:
        dens, lo, step = self._tabulated_marginal_density_1d(i)
        edges = lo + step * np.arange(dens.shape[0] + 1)
        mass = float(np.sum(dens * step))
        mean = float(np.sum(dens * (edges[1:] ** 2 - edges[:-1] ** 2) / 2.0)) / mass
        second = float(np.sum(dens * (edges[1:] ** 3 - edges[:-1] ** 3) / 3.0)) / mass
        return mass, mean, second


# -- factories ----------------------------------------------------------------


def iid_gaussian(n: int, mean: float = 0.0, sigma_sq: float = 1.0) -> SourceModel:
    """n i.i.d. gaussian coordinates with common mean and variance."""
    if sigma_sq <= 0.0:
        raise ValueError("variance must be positive")
    return SourceModel(
        family=GAUSSIAN, dim=n, mean=np.full(n, float(mean)), sigma_sq=float(sigma_sq),
        symmetric=True,
    )


def correlated_gaussian_2d(
    sigma1_sq: float, sigma2_sq: float, rho: float, mean=(0.0, 0.0)
) -> SourceModel:
    """2-D gaussian with per-coordinate variances and covariance ``rho``."""
    cov = np.array([[sigma1_sq, rho], [rho, sigma2_sq]], dtype=float)
    if sigma1_sq <= 0.0 or sigma2_sq <= 0.0 or rho**2 > sigma1_sq * sigma2_sq:
        raise ValueError("covariance matrix must be positive semidefinite with positive variances")
    return SourceModel(
        family=CORRELATED_GAUSSIAN_2D, dim=2, mean=np.asarray(mean, dtype=float), cov=cov,
        symmetric=True,
    )


def iid_uniform(n: int, lo: float = 0.0, hi: float = 1.0) -> SourceModel:
    if hi <= lo:
        raise ValueError("upper support bound must exceed the lower bound")
    return SourceModel(
        family=UNIFORM, dim=n,
        mean=np.full(n, 0.5 * (lo + hi)),
        lo=np.full(n, float(lo)), hi=np.full(n, float(hi)),
        symmetric=True,
    )


def iid_exponential(n: int, rate: float = 1.0) -> SourceModel:
    if rate <= 0.0:
        raise ValueError("rate must be positive")
    return SourceModel(
        family=EXPONENTIAL, dim=n, mean=np.full(n, 1.0 / rate), rate=float(rate),
        symmetric=False,
    )


def iid_laplace(n: int, mean: float = 0.0, scale: float = 1.0) -> SourceModel:
    if scale <= 0.0:
        raise ValueError("scale must be positive")
    return SourceModel(
        family=LAPLACE, dim=n, mean=np.full(n, float(mean)), laplace_scale=float(scale),
        symmetric=True,
    )


def tabulated_density(lo, step, density, normalize_tol: float = 1e-6) -> SourceModel:
    """Piecewise-constant density on a uniform grid (1-D or 2-D cells).

    ``density[i]`` (or ``density[i, j]``) is the density on the cell with
    lower corner ``lo + i * step``.  The table must be nonnegative and
    integrate to 1 within ``normalize_tol``; it is renormalized exactly on
    construction.
    """
    density = np.asarray(density, dtype=float)
    if density.ndim not in (1, 2):
        raise ValueError("tabulated densities must be 1-D or 2-D")
    n = density.ndim
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    step = np.atleast_1d(np.asarray(step, dtype=float))
    if lo.shape[0] != n or step.shape[0] != n or np.any(step <= 0.0):
        raise ValueError("grid origin/step must match the table dimension with positive steps")
    if np.any(density < 0.0):
        raise ValueError("density values must be nonnegative")
    total = float(density.sum() * np.prod(step))
    if abs(total - 1.0) > normalize_tol:
        raise ValueError(f"density integrates to {total:.8f}, expected 1 within {normalize_tol}")
    density = density / total
    model = SourceModel(
        family=TABULATED, dim=n, mean=np.zeros(n),
        tab_lo=lo, tab_step=step, tab_density=density, symmetric=None,
    )
    centers, masses = model._tabulated_cells()
    model.mean = (centers * masses[:, None]).sum(axis=0) / masses.sum()
    return model


def tabulated_from_csv(path) -> SourceModel:
    """Load a tabulated density from CSV.

    Expected headers: ``x,density`` (1-D) or ``x1,x2,density`` (2-D), one row
    per cell center on a uniform grid.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip().lower() for h in next(reader)]
        rows = [[float(v) for v in row] for row in reader if row]
    if header == ["x", "density"]:
        ndim = 1
    elif header == ["x1", "x2", "density"]:
        ndim = 2
    else:
        raise ValueError(f"unrecognized tabulated-density header {header!r}")
    data = np.asarray(rows, dtype=float)
    axes = []
    for i in range(ndim):
        vals = np.unique(data[:, i])
        if vals.shape[0] < 2:
            raise ValueError("tabulated grids need at least two cells per axis")
        steps = np.diff(vals)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            raise ValueError(f"grid along column {header[i]} is not uniform")
        axes.append(vals)
    shape = tuple(a.shape[0] for a in axes)
    if data.shape[0] != int(np.prod(shape)):
        raise ValueError("CSV does not cover the full tensor grid")
    density = np.zeros(shape)
    idx = tuple(
        np.searchsorted(axes[i], data[:, i]) for i in range(ndim)
    )
    density[idx] = data[:, ndim]
    lo = np.array([a[0] - 0.5 * (a[1] - a[0]) for a in axes])
    step = np.array([a[1] - a[0] for a in axes])
    return tabulated_density(lo, step, density)


# -- truncated moments ---------------------------------------------------------


def _gaussian_truncated_moments(mu: float, sd: float, a: float, b: float):
    alpha = (a - mu) / sd if np.isfinite(a) else -np.inf
    beta = (b - mu) / sd if np.isfinite(b) else np.inf
    if alpha > 0.0:
        mass = stats.norm.sf(alpha) - stats.norm.sf(beta)
    else:
        mass = stats.norm.cdf(beta) - stats.norm.cdf(alpha)
    if mass <= 0.0:
        return 0.0, math.nan, math.nan
    pa = stats.norm.pdf(alpha) if np.isfinite(alpha) else 0.0
    pb = stats.norm.pdf(beta) if np.isfinite(beta) else 0.0
    z_mean = (pa - pb) / mass
    apa = alpha * pa if np.isfinite(alpha) else 0.0
    bpb = beta * pb if np.isfinite(beta) else 0.0
    z_second = 1.0 + (apa - bpb) / mass
    mean = mu + sd * z_mean
    second = mu**2 + 2.0 * mu * sd * z_mean + sd**2 * z_second
    return float(mass), float(mean), float(second)


def _exponential_truncated_moments(rate: float, a: float, b: float):
    a = max(a, 0.0)
    if b <= a:
        return 0.0, math.nan, math.nan
    mass = float(np.exp(-rate * a) - (np.exp(-rate * b) if np.isfinite(b) else 0.0))
    if mass <= 0.0:
        return 0.0, math.nan, math.nan
    if np.isfinite(b):
        width = b - a
        arg = rate * width
        mean = a + 1.0 / rate - (width / np.expm1(arg) if arg < 700 else 0.0)
    else:
        mean = a + 1.0 / rate

    def g2(x):
        return (x**2 + 2.0 * x / rate + 2.0 / rate**2) * np.exp(-rate * x)

    upper = g2(b) if np.isfinite(b) else 0.0
    second = (g2(a) - upper) / mass
    return mass, float(mean), float(second)


def _laplace_truncated_moments(mu: float, s: float, a: float, b: float):
    def cdf(x):
        if not np.isfinite(x):
            return 0.0 if x < 0 else 1.0
        z = (x - mu) / s
        return 0.5 * math.exp(z) if z <= 0 else 1.0 - 0.5 * math.exp(-z)

    def m1(x):
        if not np.isfinite(x):
            return 0.0 if x < 0 else mu
        if x <= mu:
            return 0.5 * (x - s) * math.exp((x - mu) / s)
        return mu - 0.5 * (x + s) * math.exp(-(x - mu) / s)

    def m2(x):
        if not np.isfinite(x):
            return 0.0 if x < 0 else mu**2 + 2.0 * s**2
        if x <= mu:
            return 0.5 * (x**2 - 2.0 * s * x + 2.0 * s**2) * math.exp((x - mu) / s)
        return mu**2 + 2.0 * s**2 - 0.5 * (x**2 + 2.0 * s * x + 2.0 * s**2) * math.exp(-(x - mu) / s)

    mass = cdf(b) - cdf(a)
    if mass <= 0.0:
        return 0.0, math.nan, math.nan
    return float(mass), float((m1(b) - m1(a)) / mass), float((m2(b) - m2(a)) / mass)


def _tabulated_truncated_moments(model: SourceModel, a: float, b: float):
    dens, lo, step = model._tabulated_marginal_density_1d(0)
    edges = lo + step * np.arange(dens.shape[0] + 1)
    left = np.clip(edges[:-1], a, b)
    right = np.clip(edges[1:], a, b)
    w = np.maximum(right - left, 0.0)
    mass = float(np.sum(dens * w))
    if mass <= 0.0:
        return 0.0, math.nan, math.nan
    mean = float(np.sum(dens * (right**2 - left**2) / 2.0)) / mass
    second = float(np.sum(dens * (right**3 - left**3) / 3.0)) / mass
    return mass, mean, second


def truncated_moments_1d(model: SourceModel, a: float, b: float):
    """(mass, mean, second moment) of a 1-D model restricted to ``[a, b]``.

    Closed forms for every analytic family; exact cell sums for tabulated
    densities.  ``mass`` is the unconditional probability of the interval.
    """
    if model.dim != 1:
        raise DimensionMismatchError("truncated moments require a 1-D source model")
    if b < a:
        raise ValueError("interval is empty")
    if model.family == GAUSSIAN:
        return _gaussian_truncated_moments(model.mean[0], math.sqrt(model.sigma_sq), a, b)
    if model.family == UNIFORM:
        lo, hi = float(model.lo[0]), float(model.hi[0])
        left, right = max(a, lo), min(b, hi)
        if right <= left:
            return 0.0, math.nan, math.nan
        mass = (right - left) / (hi - lo)
        return mass, 0.5 * (left + right), (right**3 - left**3) / (3.0 * (right - left))
    if model.family == EXPONENTIAL:
        return _exponential_truncated_moments(model.rate, a, b)
    if model.family == LAPLACE:
        return _laplace_truncated_moments(model.mean[0], model.laplace_scale, a, b)
    if model.family == TABULATED:
        return _tabulated_truncated_moments(model, a, b)
    raise ValueError(f"truncated moments unsupported for family {model.family!r}")


def truncated_mean_1d(model: SourceModel, a: float, b: float) -> float:
    """Conditional mean of a 1-D model on ``[a, b]``; raises on zero mass."""
    mass, mean, _ = truncated_moments_1d(model, a, b)
    if mass <= 0.0:
        raise BinDeathError(0, f"interval [{a}, {b}] carries no probability mass")
    return mean


# -- region means --------------------------------------------------------------


def region_mean(
    model: SourceModel,
    region: Region,
    *,
    samples: int = 1_000_000,
    seed: int = 0,
    method: str = "auto",
    min_mass: float = 1e-4,
) -> EstimateWithError:
    """Estimate of ``E[M | M in region]`` with a standard error.

    Uses tensor-grid quadrature for smooth families in dimension <= 3 and
    Monte Carlo otherwise.  Raises :class:`BinDeathError` when the region's
    estimated probability falls below ``min_mass``.
    """
    if region.points is not None:
        pts, mask = region.points, region.mask
        count = int(mask.sum())
        if count < max(2, min_mass * pts.shape[0]):
            raise BinDeathError(0, "region mask selects (almost) no samples")
        sel = pts[mask]
        value = sel.mean(axis=0)
        stderr = float(np.sqrt(np.sum(sel.var(axis=0, ddof=1)) / count))
        return EstimateWithError(value=value, stderr=stderr, sample_count=count)

    if method == "auto":
        method = "quadrature" if model.dim <= 3 else "mc"

    if method == "quadrature":
        centers, masses = model.quadrature_cells(samples)
        inside = region.member(centers)
        mass = float(masses[inside].sum())
        if mass < min_mass:
            raise BinDeathError(0, f"region mass {mass:.2e} below {min_mass:.0e}")
        value = (centers[inside] * masses[inside, None]).sum(axis=0) / mass
        return EstimateWithError(value=value, stderr=0.0, sample_count=int(inside.sum()))

    pts = model.sample(samples, seed)
    mask = region.member(pts)
    count = int(mask.sum())
    if count < min_mass * samples:
        raise BinDeathError(0, f"region captured {count} of {samples} samples")
    sel = pts[mask]
    value = sel.mean(axis=0)
    stderr = float(np.sqrt(np.sum(sel.var(axis=0, ddof=1)) / count))
    return EstimateWithError(value=value, stderr=stderr, sample_count=count)


# -- conditional structure for the 2-D transformed problem ---------------------


def _pair_coordinates(model: SourceModel, b: np.ndarray, pts: np.ndarray):
    x1 = b[0] * pts[:, 1] - b[1] * pts[:, 0]
    x2 = b[0] * pts[:, 0] + b[1] * pts[:, 1]
    return x1, x2


def _interval_product(coef: float, lo: float, hi: float) -> tuple[float, float]:
    vals = sorted((coef * lo, coef * hi))
    return vals[0], vals[1]


def pair_coordinate_interval(model: SourceModel, b, which: int) -> tuple[float, float]:
    """Interval-arithmetic range of ``X1`` (which=0) or ``X2`` (which=1).

    ``X1 = b1 M2 - b2 M1`` and ``X2 = b1 M1 + b2 M2`` over the (truncated)
    marginal support box.
    """
    b = as_point(b, dim=2)
    lo0, hi0 = model.support_interval(0)
    lo1, hi1 = model.support_interval(1)
    if which == 0:
        a = _interval_product(b[0], lo1, hi1)
        c = _interval_product(-b[1], lo0, hi0)
    else:
        a = _interval_product(b[0], lo0, hi0)
        c = _interval_product(b[1], lo1, hi1)
    return a[0] + c[0], a[1] + c[1]


def conditional_mean_curve(
    model: SourceModel,
    b,
    grid,
    *,
    samples: int = 1_000_000,
    seed: int = 0,
    min_count: int = 100,
    target_count: int | None = None,
) -> list[EstimateWithError]:
    """Centered conditional-mean curve ``E[X2 | X1 = t] - E[X2]`` on a grid.

    ``X1 = b1 M2 - b2 M1`` and ``X2 = b1 M1 + b2 M2``.  Each grid point is
    estimated by an adaptive-width window around ``t`` aiming for
    ``max(min_count, samples / 200)`` samples (``target_count`` overrides
    the aim).  The window width is capped at a quarter of the observed
    range; capturing fewer than ``min_count`` samples there is an error.
    """
    if model.dim != 2:
        raise DimensionMismatchError("conditional mean curves require a 2-D source")
    b = as_point(b, dim=2)
    if not np.any(b):
        raise ValueError("bias vector must be nonzero")
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    lo, hi = pair_coordinate_interval(model, b, 0)
    if np.any(grid < lo - 1e-12) or np.any(grid > hi + 1e-12):
        raise ValueError("grid points must lie within the truncated support of X1")

    pts = model.sample(samples, seed)
    x1, x2 = _pair_coordinates(model, b, pts)
    order = np.argsort(x1, kind="stable")
    x1s, x2s = x1[order], x2[order]
    csum = np.concatenate([[0.0], np.cumsum(x2s)])
    csq = np.concatenate([[0.0], np.cumsum(x2s**2)])

    n = x1s.shape[0]
    k = target_count if target_count is not None else max(min_count, samples // 200)
    k = min(max(k, min_count), n)
    window_sums = x1s[k - 1 :] + x1s[: n - k + 1]
    cap = 0.25 * (x1s[-1] - x1s[0])
    x2_mean_exact = float(b[0] * model.mean[0] + b[1] * model.mean[1])

    out = []
    for t in grid:
        left = int(np.clip(np.searchsorted(window_sums, 2.0 * t), 0, n - k))
        right = left + k
        if x1s[right - 1] - x1s[left] > 2.0 * cap:
            left = int(np.searchsorted(x1s, t - cap, side="left"))
            right = int(np.searchsorted(x1s, t + cap, side="right"))
        count = right - left
        if count < min_count:
            raise ValueError(
                f"window at t={t:g} captured {count} samples (< {min_count})"
            )
        total = csum[right] - csum[left]
        total_sq = csq[right] - csq[left]
        mean = total / count
        var = max(total_sq / count - mean**2, 0.0)
        out.append(
            EstimateWithError(
                value=float(mean - x2_mean_exact),
                stderr=float(math.sqrt(var / count)),
                sample_count=count,
            )
        )
    return out


def symmetry_deviation(model: SourceModel, dim: int = 0, grid_points: int = 801) -> float:
    """Peak-normalized asymmetry of a marginal density about its mean.

    Returns ``sup |f(mu + x) - f(mu - x)| / max f`` over a quantile grid of
    offsets ``x``.  Exactly zero for densities whose evaluation is an even
    function of ``x - mu``.
    """
    mu = float(model.mean[dim])
    eps = max(model.truncation_eps, 1e-9)
    qs = np.linspace(eps, 1.0 - eps, grid_points)
    xs = model.marginal_ppf(dim, qs)
    offsets = np.abs(np.asarray(xs, dtype=float) - mu)
    # re-derive the offsets after rounding so mu +/- offset are exact mirrors
    offsets = (mu + offsets) - mu
    up = model.marginal_pdf(dim, mu + offsets)
    down = model.marginal_pdf(dim, mu - offsets)
    peak = float(max(np.max(up), np.max(down), model.marginal_pdf(dim, np.array([mu]))[0]))
    if peak <= 0.0:
        return 0.0
    return float(np.max(np.abs(up - down)) / peak)


def conditional_support(model: SourceModel, b, x2: float) -> tuple[float, float]:
    """Support interval of ``X1`` given ``X2 = x2`` in pair coordinates.

    Gaussian families use the exact conditional law truncated at the
    epsilon quantiles; all other families clip the line
    ``b1 m1 + b2 m2 = x2`` against the (truncated) marginal support box and
    map its endpoints through ``X1``.
    """
    if model.dim != 2:
        raise DimensionMismatchError("conditional support requires a 2-D source")
    b = as_point(b, dim=2)
    if not np.any(b):
        raise ValueError("bias vector must be nonzero")
    x2 = float(x2)
    lo2, hi2 = pair_coordinate_interval(model, b, 1)
    if x2 < lo2 - 1e-12 or x2 > hi2 + 1e-12:
        raise ValueError(f"x2={x2:g} lies outside the support of X2 [{lo2:g}, {hi2:g}]")

    if model.family in (GAUSSIAN, CORRELATED_GAUSSIAN_2D):
        cov_m = model.cov if model.family == CORRELATED_GAUSSIAN_2D else np.eye(2) * model.sigma_sq
        A = np.array([[-b[1], b[0]], [b[0], b[1]]])
        cov_x = A @ cov_m @ A.T
        mu_x = A @ model.mean
        cond_mean = mu_x[0] + cov_x[0, 1] / cov_x[1, 1] * (x2 - mu_x[1])
        cond_var = max(cov_x[0, 0] - cov_x[0, 1] ** 2 / cov_x[1, 1], 0.0)
        if cond_var == 0.0:
            return float(cond_mean), float(cond_mean)
        sd = math.sqrt(cond_var)
        eps = model.truncation_eps
        return (
            float(stats.norm.ppf(eps, loc=cond_mean, scale=sd)),
            float(stats.norm.ppf(1.0 - eps, loc=cond_mean, scale=sd)),
        )

    lo0, hi0 = model.support_interval(0)
    lo1, hi1 = model.support_interval(1)
    tol = 1e-12 * max(1.0, abs(x2))
    if b[0] != 0.0 and b[1] != 0.0:
        # clip the line b1 m1 + b2 m2 = x2 to the support box, in m1
        cand = sorted(((x2 - b[1] * lo1) / b[0], (x2 - b[1] * hi1) / b[0]))
        m1_lo, m1_hi = max(lo0, cand[0]), min(hi0, cand[1])
        if m1_hi < m1_lo - tol:
            raise ValueError("x2 lies outside the support of X2")
        m1_hi = max(m1_hi, m1_lo)

        def x1_of(m1):
            m2 = (x2 - b[0] * m1) / b[1]
            return b[0] * m2 - b[1] * m1

        ends = sorted((x1_of(m1_lo), x1_of(m1_hi)))
    elif b[0] == 0.0:
        m2 = x2 / b[1]
        if m2 < lo1 - tol or m2 > hi1 + tol:
            raise ValueError("x2 lies outside the support of X2")
        ends = sorted((-b[1] * lo0, -b[1] * hi0))
    else:
        m1 = x2 / b[0]
        if m1 < lo0 - tol or m1 > hi0 + tol:
            raise ValueError("x2 lies outside the support of X2")
        ends = sorted((b[0] * lo1, b[0] * hi1))
    return float(ends[0]), float(ends[1])
