"""Eigenfunction autocorrelation and relaxed correlation functions.

In a 2D cavity with Weyl density the thermal one-particle correlation at
separation ``r`` reduces to the radial transform

    M(r) = (1 / 2 pi) int_0^inf k J0(k r) f(k) dk,
    f(k) = 1 / (exp(hbar^2 k^2 / (2 m T) - mu / T) + 1),

which :func:`thermal_kernel` evaluates in dimensionless form.  The same
kernel, with lengths measured in lattice units, gives the lattice
correlation coefficients used by :mod:`fermicavity.entanglement`.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special as _sps

from . import mathcore
from .errors import BoundaryProximityWarning, DomainError, UnsupportedError
from .thermo import SpectrumModel, ThermalState

__all__ = [
    "OccupationPattern",
    "PointSet",
    "autocorrelation",
    "thermal_kernel",
    "relaxed_one_particle",
    "one_particle_matrix",
    "relaxed_multi_particle",
    "leibniz_sum",
]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)
_TAIL = 45.0  # occupation below exp(-45) is dropped
MAX_ORDER = 8


def autocorrelation(eps, separation, d, cavity):
    """Averaged eigenfunction autocorrelation ``f(r / lambda_eps) / V``.

    ``f`` is ``J0`` in two dimensions and ``sin x / x`` in three.
    """
    if d not in (2, 3):
        raise UnsupportedError(f"dimension must be 2 or 3, got {d}")
    eps = np.asarray(eps, dtype=float)
    if np.any(eps <= 0):
        raise DomainError("autocorrelation needs eps > 0")
    x = np.abs(np.asarray(separation, dtype=float)) / cavity.wavelength(eps)
    f = mathcore.bessel_j0(x) if d == 2 else np.sinc(x / math.pi)
    out = np.asarray(f) / cavity.volume
    return float(out) if out.ndim == 0 else out


def thermal_kernel(r, scale2, eta, *, block=256):
    """``(1/2pi) int_0^inf q J0(q r) / (exp(q^2/scale2 - eta) + 1) dq``.

    Vectorised over ``r``.  Composite 20-point Gauss-Legendre on panels
    that resolve both the Fermi step (breakpoints one temperature apart)
    and the Bessel oscillation (panels no wider than half a period).
    """
    r = np.abs(np.atleast_1d(np.asarray(r, dtype=float)))
    if scale2 <= 0 or not math.isfinite(scale2) or not math.isfinite(eta):
        raise DomainError("thermal_kernel needs scale2 > 0 and finite eta")
    q_max = math.sqrt(scale2 * (max(eta, 0.0) + _TAIL))
    x_feat = eta + np.arange(-_TAIL, _TAIL + 1.0)
    q_feat = np.sqrt(scale2 * x_feat[(x_feat > 0) & (x_feat < max(eta, 0.0) + _TAIL)])
    out = np.empty(r.shape)
    order = np.argsort(r, kind="stable")
    for idx in np.array_split(order, max(1, math.ceil(r.size / block))):
        r_top = float(r[idx].max())
        n_uniform = max(4, math.ceil(q_max * r_top / math.pi))
        edges = np.unique(np.concatenate([np.linspace(0.0, q_max, n_uniform + 1), q_feat]))
        lo, hi = edges[:-1], edges[1:]
        half = 0.5 * (hi - lo)[:, None]
        nodes = (half * _GL_NODES + 0.5 * (hi + lo)[:, None]).ravel()
        weights = (half * _GL_WEIGHTS).ravel()
        g = weights * nodes * _sps.expit(eta - nodes * nodes / scale2)
        out[idx] = _sps.j0(np.outer(r[idx], nodes)) @ g
    return out / (2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class OccupationPattern:
    """Either a thermal state over a spectrum or explicit 0/1 occupations."""

    mode: str
    state: ThermalState | None = None
    spectrum: SpectrumModel | None = None
    levels: np.ndarray | None = None
    occupations: np.ndarray | None = None

    def __post_init__(self):
        if self.mode == "thermal":
            if self.state is None:
                raise DomainError("thermal pattern needs a ThermalState")
        elif self.mode == "explicit":
            lv = np.asarray(self.levels, dtype=float)
            occ = np.asarray(self.occupations, dtype=float)
            if lv.shape != occ.shape or lv.ndim != 1:
                raise DomainError("levels and occupations must be matching 1-d arrays")
            if not np.all((occ == 0) | (occ == 1)):
                raise DomainError("explicit occupations must be 0 or 1")
            if np.any(lv <= 0):
                raise DomainError("level energies must be positive")
            object.__setattr__(self, "levels", lv)
            object.__setattr__(self, "occupations", occ)
        else:
            raise DomainError(f"unknown pattern mode {self.mode!r}")

    @classmethod
    def thermal(cls, state, spectrum=None):
        return cls("thermal", state=state, spectrum=spectrum)

    @classmethod
    def explicit(cls, levels, occupations=None):
        levels = np.asarray(levels, dtype=float)
        occ = np.ones_like(levels) if occupations is None else occupations
        return cls("explicit", levels=levels, occupations=occ)

    @classmethod
    def from_partition(cls, partition, cavity):
        """Occupied levels of a partition mapped to energies ``nu / rho``."""
        levels = np.asarray(partition.levels, dtype=float) / cavity.spectral_density
        return cls.explicit(levels)

    def reference_wavelength(self, cavity):
        if self.mode == "thermal":
            return cavity.thermal_wavelength(self.state.T)
        occupied = self.levels[self.occupations > 0]
        return cavity.wavelength(occupied.mean()) if occupied.size else 0.0


@dataclass(frozen=True, eq=False)
class PointSet:
    """Annihilation and creation points of a j-particle correlation."""

    annihilate: np.ndarray
    create: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.annihilate, dtype=float))
        c = np.atleast_2d(np.asarray(self.create, dtype=float))
        if a.shape != c.shape or a.shape[1] != 2:
            raise DomainError("need matching (j, 2) arrays of points")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(c))):
            raise DomainError("points must be finite")
        object.__setattr__(self, "annihilate", a)
        object.__setattr__(self, "create", c)

    @property
    def order(self):
        return self.annihilate.shape[0]

    def far_from_boundary(self, cavity, margin):
        pts = np.vstack([self.annihilate, self.create])
        return bool(np.all(cavity.distance_to_wall(pts) >= margin))


def _check_margin(points, cavity, pattern, margin_wavelengths):
    if margin_wavelengths is None:
        return
    margin = margin_wavelengths * pattern.reference_wavelength(cavity)
    dist = cavity.distance_to_wall(points)
    if np.any(dist < 0):
        raise DomainError("points must lie inside the cavity")
    if np.any(dist < margin):
        warnings.warn(
            f"points closer than {margin_wavelengths} wavelengths to the cavity wall",
            BoundaryProximityWarning,
            stacklevel=3,
        )


def _pair_values(sep, pattern, cavity):
    """One-particle correlation as a function of separation (vectorised)."""
    sep = np.asarray(sep, dtype=float)
    if pattern.mode == "explicit":
        occ = pattern.occupations > 0
        lam = cavity.wavelength(pattern.levels[occ])
        vals = _sps.j0(sep[..., None] / lam).sum(axis=-1)
        return vals / cavity.volume
    ts, spec = pattern.state, pattern.spectrum
    if spec is None or spec.is_continuous:
        if spec is not None and not math.isclose(spec.rho, cavity.spectral_density):
            raise DomainError("continuous spectrum does not match the cavity")
        scale2 = 2.0 * cavity.mass * ts.T / cavity.hbar**2
        flat = thermal_kernel(sep.ravel(), scale2, ts.mu / ts.T)
        return flat.reshape(sep.shape)
    lv = spec.levels_upto(max(ts.mu, 0.0) + 48.0 * ts.T)
    occ = _sps.expit(-(lv - ts.mu) / ts.T)
    keep = occ > 1e-300
    lam = cavity.wavelength(lv[keep])
    return (_sps.j0(sep[..., None] / lam) @ occ[keep]) / cavity.volume


def relaxed_one_particle(r, r2, pattern, cavity, *, margin_wavelengths=5.0):
    """Relaxed value of the one-particle correlation between two points."""
    pts = np.vstack([np.asarray(r, dtype=float), np.asarray(r2, dtype=float)])
    _check_margin(pts, cavity, pattern, margin_wavelengths)
    sep = float(np.linalg.norm(pts[0] - pts[1]))
    return float(_pair_values(np.array([sep]), pattern, cavity)[0])


def one_particle_matrix(points, pattern, cavity, *, margin_wavelengths=5.0):
    """Matrix of one-particle values ``M(r_k, r'_l)`` for a PointSet."""
    _check_margin(
        np.vstack([points.annihilate, points.create]), cavity, pattern, margin_wavelengths
    )
    diff = points.annihilate[:, None, :] - points.create[None, :, :]
    return _pair_values(np.linalg.norm(diff, axis=-1), pattern, cavity)


def leibniz_sum(matrix):
    """Signed sum over permutations, ``sum_P sgn(P) prod_k A[k, P(k)]``."""
    a = np.asarray(matrix, dtype=float)
    n = a.shape[0]
    total = 0.0
    rows = np.arange(n)
    for perm in itertools.permutations(range(n)):
        inversions = sum(1 for i in range(n) for k in range(i + 1, n) if perm[i] > perm[k])
        sign = -1.0 if inversions % 2 else 1.0
        total += sign * np.prod(a[rows, perm])
    return float(total)


def relaxed_multi_particle(points, pattern, cavity, *, method="det", margin_wavelengths=5.0):
    """Relaxed j-particle correlation as a determinant of one-particle values.

    ``method="leibniz"`` evaluates the explicit permutation sum instead,
    which is useful as a cross-check for small ``j``.
    """
    j = points.order
    if not 1 <= j <= MAX_ORDER:
        raise UnsupportedError(f"order j must be between 1 and {MAX_ORDER}, got {j}")
    mat = one_particle_matrix(points, pattern, cavity, margin_wavelengths=margin_wavelengths)
    if method == "det":
        return float(np.linalg.det(mat))
    if method == "leibniz":
        return leibniz_sum(mat)
    raise DomainError(f"unknown method {method!r}")

