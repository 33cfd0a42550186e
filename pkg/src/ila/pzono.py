"""Probabilistic zonotope set arithmetic.

A probabilistic zonotope couples a zonotope of possible center means
(``center`` + ``generators``) with an over-bounding Gaussian covariance
of the tails (``covariance``). Zero generators reduce it to a Gaussian
overbound; zero covariance reduces it to an ordinary zonotope. All types
are immutable values and every operation is a pure function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from . import kern
from .errors import InvalidInputError

PSD_RTOL = 1e-10


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Zonotope:
    """Centrally symmetric set ``{center + sum_i b_i g_i, b_i in [-1, 1]}``."""

    center: np.ndarray
    generators: np.ndarray

    def __post_init__(self):
        c = _readonly(np.atleast_1d(self.center))
        g = np.asarray(self.generators, dtype=float)
        if g.ndim == 1:
            g = g.reshape(len(c), -1) if g.size else g.reshape(len(c), 0)
        g = _readonly(g)
        if c.ndim != 1 or g.ndim != 2 or g.shape[0] != c.shape[0]:
            raise InvalidInputError("generator matrix must have one row per axis")
        if not (np.isfinite(c).all() and np.isfinite(g).all()):
            raise InvalidInputError("zonotope entries must be finite")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "generators", g)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def axis_radii(self) -> np.ndarray:
        """Per-axis half-widths of the axis-aligned bounding box."""
        return np.abs(self.generators).sum(axis=1)


@dataclass(frozen=True)
class PZonotope:
    """Probabilistic zonotope (center mean, generators, covariance overbound)."""

    center: np.ndarray
    generators: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        c = _readonly(np.atleast_1d(self.center))
        g = np.asarray(self.generators, dtype=float)
        if g.ndim == 1:
            g = g.reshape(len(c), -1) if g.size else g.reshape(len(c), 0)
        s = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        n = c.shape[0]
        if c.ndim != 1 or g.ndim != 2 or g.shape[0] != n or s.shape != (n, n):
            raise InvalidInputError("inconsistent p-zonotope dimensions")
        if not (np.isfinite(c).all() and np.isfinite(g).all() and np.isfinite(s).all()):
            raise InvalidInputError("p-zonotope entries must be finite")
        if not np.allclose(s, s.T, rtol=0, atol=1e-8 * max(1.0, np.abs(s).max())):
            raise InvalidInputError("covariance must be symmetric")
        s = 0.5 * (s + s.T)
        if n:
            evals = np.linalg.eigvalsh(s)
            tol = PSD_RTOL * max(1.0, float(np.abs(evals).max()))
            if evals.min() < -tol:
                raise InvalidInputError("covariance must be positive semidefinite")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "generators", _readonly(g))
        object.__setattr__(self, "covariance", _readonly(s))

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def zonotope_part(self) -> Zonotope:
        return Zonotope(self.center, self.generators)

    def axis_radii(self) -> np.ndarray:
        return np.abs(self.generators).sum(axis=1)

    def gershgorin_radii(self) -> np.ndarray:
        """Per-axis absolute row sums of the covariance."""
        return np.abs(self.covariance).sum(axis=1)

    def covariance_cut_radii(self) -> np.ndarray:
        """Per-axis variance bound used for union enclosure.

        Max of the Gershgorin row sum (keeps ``diag(d) - covariance``
        diagonally dominant, hence PSD) and the squared row-L1 norm of the
        symmetric square root (keeps the confidence cut of this set inside
        an axis-aligned cut built from ``diag(d)`` at every coverage
        level). The two coincide in one dimension.
        """
        return covariance_axis_bounds(self.covariance)

    def to_dict(self) -> dict:
        return {
            "c": self.center.tolist(),
            "G": self.generators.tolist(),
            "Sigma": self.covariance.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PZonotope":
        return cls(np.asarray(d["c"]), np.asarray(d["G"]), np.asarray(d["Sigma"]))

    @classmethod
    def point(cls, center) -> "PZonotope":
        c = np.atleast_1d(np.asarray(center, dtype=float))
        n = c.shape[0]
        return cls(c, np.zeros((n, 0)), np.zeros((n, n)))


@dataclass(frozen=True)
class WeightVector:
    """Nonnegative axis weights summing to one."""

    weights: np.ndarray

    def __post_init__(self):
        w = _readonly(np.atleast_1d(self.weights))
        if w.ndim != 1 or not np.isfinite(w).all():
            raise InvalidInputError("weights must be a finite vector")
        if (w < 0).any():
            raise InvalidInputError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise InvalidInputError("weights must sum to one")
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def uniform(cls, n: int) -> "WeightVector":
        return cls(np.full(n, 1.0 / n))


def from_bounds(mean_intervals, cov_upper, factor: float) -> PZonotope:
    """Build a p-zonotope from per-axis mean intervals and variance bounds.

    ``mean_intervals`` is an (n, 2) array of [lo, hi]; ``cov_upper`` holds
    per-axis variance upper bounds, either as scalars or [lo, hi] pairs
    (the upper end is used). The covariance is ``factor`` times the bound,
    following the empirical three-sigma over-bounding rule.
    """
    mi = np.atleast_2d(np.asarray(mean_intervals, dtype=float))
    if mi.shape[1] != 2:
        raise InvalidInputError("mean_intervals must be per-axis [lo, hi] pairs")
    if (mi[:, 0] > mi[:, 1]).any():
        raise InvalidInputError("inverted mean interval (lo > hi)")
    cu = np.asarray(cov_upper, dtype=float)
    if cu.ndim == 2:
        cu = cu[:, -1]
    cu = np.atleast_1d(cu)
    if cu.shape[0] != mi.shape[0]:
        raise InvalidInputError("cov_upper length must match mean_intervals")
    if (cu < 0).any():
        raise InvalidInputError("variance bounds must be nonnegative")
    if not factor > 0:
        raise InvalidInputError("factor must be positive")
    c = mi.mean(axis=1)
    half = 0.5 * (mi[:, 1] - mi[:, 0])
    nz = np.nonzero(half)[0]
    gens = np.zeros((len(c), len(nz)))
    gens[nz, np.arange(len(nz))] = half[nz]
    return PZonotope(c, gens, np.diag(factor * cu))


def minkowski_sum(a: PZonotope, b: PZonotope) -> PZonotope:
    if a.dim != b.dim:
        raise InvalidInputError("minkowski_sum dimension mismatch")
    return PZonotope(
        a.center + b.center,
        np.hstack([a.generators, b.generators]),
        a.covariance + b.covariance,
    )


def linear_map(a_matrix, p: PZonotope) -> PZonotope:
    a = np.atleast_2d(np.asarray(a_matrix, dtype=float))
    if a.shape[1] != p.dim:
        raise InvalidInputError("linear_map dimension mismatch")
    return PZonotope(a @ p.center, a @ p.generators, a @ p.covariance @ a.T)


def translate(mu, p: PZonotope) -> PZonotope:
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    if mu.shape[0] != p.dim:
        raise InvalidInputError("translate dimension mismatch")
    return PZonotope(mu + p.center, p.generators, p.covariance)


def covariance_axis_bounds(sigma: np.ndarray) -> np.ndarray:
    """Per-axis diagonal overbound for a covariance (see covariance_cut_radii)."""
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    gersh = np.abs(sigma).sum(axis=1)
    if not sigma.any():
        return gersh
    evals, vecs = np.linalg.eigh(sigma)
    # zero out numerical-noise eigenvalues: their sqrt (~1e-8 relative)
    # would otherwise pollute the L1 row sums and break exact scaling
    evals = np.where(evals > 1e-12 * evals.max(), evals, 0.0)
    root = (vecs * np.sqrt(evals)) @ vecs.T
    l1 = np.abs(root).sum(axis=1)
    return np.maximum(gersh, l1 * l1)


def enclose_union(members) -> PZonotope:
    """Axis-aligned over-approximation of a union of p-zonotopes.

    Zonotope parts are enclosed by the per-axis interval hull; the
    covariance is diagonal with the worst per-axis bound across members,
    so the output dominates every member in the Loewner order and every
    member's confidence cut stays inside the enclosure's cut.
    """
    members = list(members)
    if not members:
        raise InvalidInputError("enclose_union requires at least one member")
    n = members[0].dim
    if any(m.dim != n for m in members):
        raise InvalidInputError("enclose_union members must share a dimension")
    lo = np.full(n, np.inf)
    hi = np.full(n, -np.inf)
    d = np.zeros(n)
    for m in members:
        r = m.axis_radii()
        lo = np.minimum(lo, m.center - r)
        hi = np.maximum(hi, m.center + r)
        d = np.maximum(d, m.covariance_cut_radii())
    c = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    nz = np.nonzero(half)[0]
    gens = np.zeros((n, len(nz)))
    gens[nz, np.arange(len(nz))] = half[nz]
    return PZonotope(c, gens, np.diag(d))


def coverage_multiplier(gamma: float) -> float:
    """Standard-normal multiplier whose two-sided coverage equals ``gamma``."""
    if not 0.0 < gamma < 1.0:
        raise InvalidInputError("gamma must lie in (0, 1)")
    return float(np.sqrt(2.0) * special.erfinv(gamma))


def confidence_cut(p: PZonotope, gamma: float) -> Zonotope:
    """Threshold the Gaussian tails at coverage ``gamma``.

    Returns ``<c, [G, m*S]>`` where ``m`` is the coverage multiplier and
    ``S`` the symmetric PSD square root of the covariance.
    """
    m = coverage_multiplier(gamma)
    if not p.covariance.any():
        return Zonotope(p.center, p.generators)
    evals, vecs = np.linalg.eigh(p.covariance)
    root = (vecs * np.sqrt(np.clip(evals, 0.0, None))) @ vecs.T
    return Zonotope(p.center, np.hstack([p.generators, m * root]))


def zonotope_size(z: Zonotope, w: WeightVector) -> float:
    """Axis-weighted squared size: ``trace(diag(w) G G^T)``."""
    if w.dim != z.dim:
        raise InvalidInputError("weight dimension mismatch")
    if z.generators.size == 0:
        return 0.0
    return float(w.weights @ (z.generators**2).sum(axis=1))


def _regularized_covariance(p: PZonotope) -> np.ndarray:
    sigma = np.array(p.covariance)
    n = p.dim
    evals = np.linalg.eigvalsh(sigma)
    if evals.min() <= 0:
        tr = float(np.trace(sigma))
        eps = 1e-9 * (tr / n if tr > 0 else 1.0)
        sigma += (eps - min(evals.min(), 0.0)) * np.eye(n)
    return sigma


def _min_mahalanobis_sq(p: PZonotope, x) -> float:
    """Squared Mahalanobis distance from ``x`` to the zonotope of centers."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape[0] != p.dim:
        raise InvalidInputError("point dimension mismatch")
    sigma = _regularized_covariance(p)
    prec = np.linalg.inv(sigma)
    r = x - p.center
    const = float(r @ prec @ r)
    g = p.generators
    if g.shape[1] == 0:
        return max(const, 0.0)
    a_mat = g.T @ prec @ g
    v = g.T @ prec @ r
    _, maha = kern.box_qp(np.ascontiguousarray(a_mat), np.ascontiguousarray(v), const)
    return maha


def density_sup(p: PZonotope, x) -> float:
    """Largest Gaussian density of any admissible center at point ``x``."""
    sigma = _regularized_covariance(p)
    maha = _min_mahalanobis_sq(p, x)
    sign, logdet = np.linalg.slogdet(sigma)
    if sign <= 0:
        raise InvalidInputError("covariance not positive definite")
    log_norm = -0.5 * (p.dim * np.log(2.0 * np.pi) + logdet)
    return float(np.exp(log_norm - 0.5 * maha))


def fault_status_point(p: PZonotope, x) -> float:
    """Deviation score in [0, 1]: one minus the peak-normalized density.

    Equals ``1 - density_sup(p, x) / density_sup(p, center)``; exactly 0
    whenever ``x`` lies in the zonotope of centers.
    """
    maha = _min_mahalanobis_sq(p, x)
    if maha < 1e-9:
        return 0.0
    return float(-np.expm1(-0.5 * maha))


def pzonotope_to_json_dict(p: PZonotope) -> dict:
    return p.to_dict()


def pzonotope_from_json_dict(d: dict) -> PZonotope:
    return PZonotope.from_dict(d)
