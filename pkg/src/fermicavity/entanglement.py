"""Entanglement entropy of lattice subsystems from correlation-matrix spectra.

Lattice sites sit at ``a * n`` for integer vectors ``n``.  With the Weyl
spectral density the correlation between two sites depends only on the
offset, through the dimensionless coefficients

    c_n = thermal_kernel(|n|, tau, eta),   tau = 2 m a^2 T / hbar^2,
                                           eta = mu / T,

so every matrix built here is (block) Toeplitz and independent of the
cavity volume.  The symbol ``C(theta) = sum_n c_n exp(i n.theta)`` has two
representations: the truncated Fourier sum, and a closed form obtained by
Poisson summation.  Both are exposed and cross-checked in the tests.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special as _sps
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import mathcore
from .correlations import thermal_kernel
from .errors import (
    DomainError,
    NumericError,
    SpectralIntegrityError,
    UnsupportedError,
)
from .thermo import CavityModel, ThermalState, binary_entropy, entropy_density_continuum

__all__ = [
    "SubsystemMask",
    "CorrelationMatrix",
    "GeneratingFunction",
    "lattice_parameters",
    "build_corr_matrix",
    "entanglement_entropy",
    "generating_function_1d",
    "generating_function_2d",
    "szego_check_1d",
    "szego_deviation",
    "doktorsky_check_2d",
    "ee_density",
    "effective_hamiltonian",
    "gaussian_entropy",
    "spectral_distribution_check",
    "momentum_occupation",
    "regularized_bessel_overlap",
    "regularized_bessel_overlap_closed",
    "LatticeEntanglement",
]

CLAMP_WINDOW = 1e-12
INTEGRITY_LIMIT = 1e-6
ZONE_EDGE_OCCUPATION = 1e-4


# ---------------------------------------------------------------------------
# masks


@dataclass(frozen=True, eq=False)
class SubsystemMask:
    """A finite set of lattice sites (integer coordinates) forming subsystem A."""

    shape: str
    sites: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.sites)
        if s.ndim != 2 or s.shape[1] != 2 or s.shape[0] < 1:
            raise DomainError("mask needs at least one site")
        if not np.issubdtype(s.dtype, np.integer):
            if not np.all(s == np.round(s)):
                raise DomainError("mask sites must have integer coordinates")
            s = np.round(s).astype(np.int64)
        if np.unique(s, axis=0).shape[0] != s.shape[0]:
            raise DomainError("mask sites must be distinct")
        s = s.astype(np.int64)
        s.setflags(write=False)
        object.__setattr__(self, "sites", s)

    @property
    def n_sites(self):
        return self.sites.shape[0]

    @classmethod
    def chain(cls, length, origin=(0, 0)):
        n = np.arange(int(length)) - int(length) // 2
        return cls("chain", np.column_stack([n, np.zeros_like(n)]) + np.asarray(origin))

    @classmethod
    def square(cls, side, origin=(0, 0)):
        side = int(side)
        if side < 1:
            raise DomainError("side must be >= 1")
        g = np.arange(side) - side // 2
        xx, yy = np.meshgrid(g, g, indexing="ij")
        return cls("square", np.column_stack([xx.ravel(), yy.ravel()]) + np.asarray(origin))

    @classmethod
    def disk(cls, radius, origin=(0, 0)):
        r = float(radius)
        if r < 0:
            raise DomainError("radius must be >= 0")
        g = np.arange(-math.floor(r), math.floor(r) + 1)
        xx, yy = np.meshgrid(g, g, indexing="ij")
        keep = xx**2 + yy**2 <= r * r
        return cls("disk", np.column_stack([xx[keep], yy[keep]]) + np.asarray(origin))

    @classmethod
    def polygon(cls, vertices, origin=(0, 0)):
        """Sites inside a simple polygon given in lattice units (even-odd rule)."""
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 3 or v.shape[1] != 2:
            raise DomainError("polygon needs at least three 2-d vertices")
        x, y = v[:, 0], v[:, 1]
        if abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))) < 1e-12:
            raise DomainError("polygon has zero area")
        xs = np.arange(math.floor(x.min()), math.ceil(x.max()) + 1)
        ys = np.arange(math.floor(y.min()), math.ceil(y.max()) + 1)
        px, py = (a.ravel().astype(float) for a in np.meshgrid(xs, ys, indexing="ij"))
        inside = np.zeros(px.shape, dtype=bool)
        x2, y2 = np.roll(x, -1), np.roll(y, -1)
        for xa, ya, xb, yb in zip(x, y, x2, y2):
            crosses = (ya > py) != (yb > py)
            with np.errstate(divide="ignore", invalid="ignore"):
                xcross = xa + (py - ya) * (xb - xa) / (yb - ya)
            inside ^= crosses & (px < xcross)
        if not inside.any():
            raise DomainError("polygon contains no lattice sites")
        pts = np.column_stack([px[inside], py[inside]]).astype(np.int64)
        return cls("polygon", pts + np.asarray(origin))

    def shifted(self, offset):
        return SubsystemMask(self.shape, self.sites + np.asarray(offset, dtype=np.int64))


# ---------------------------------------------------------------------------
# lattice parameters and correlation matrices


def lattice_parameters(ts, cavity, *, occupation_tol=ZONE_EDGE_OCCUPATION):
    """Dimensionless ``(tau, eta)`` of a lattice, checking the lattice condition.

    The lattice must resolve every occupied wavelength: the occupation at
    the Brillouin-zone edge energy ``hbar^2 pi^2 / (2 m a^2)`` may not exceed
    ``occupation_tol``.
    """
    a = cavity.lattice_a
    if a <= 0:
        raise DomainError("cavity has no lattice (lattice_a = 0)")
    if not ts.T > 0:
        raise UnsupportedError("zero temperature is not supported")
    tau = 2.0 * cavity.mass * a * a * ts.T / cavity.hbar**2
    eta = ts.mu / ts.T
    edge = float(_sps.expit(eta - math.pi**2 / tau))
    if edge > occupation_tol:
        raise DomainError(
            f"lattice constant {a} too large: occupation {edge:.2e} at the zone edge "
            f"exceeds {occupation_tol:.0e}"
        )
    return tau, eta


class CorrelationMatrix:
    """Symmetric one-particle correlation matrix with a cached spectrum."""

    def __init__(self, entries, *, mask=None, volume_ratio=None):
        self.matrix = (
            entries if isinstance(entries, mathcore.SymmetricMatrix)
            else mathcore.SymmetricMatrix(entries)
        )
        self.mask = mask
        self.volume_ratio = volume_ratio
        self._eig = None

    @property
    def dense(self):
        return self.matrix.dense

    @property
    def n_sites(self):
        return self.matrix.dim

    def eigh(self):
        if self._eig is None:
            self._eig = mathcore.sym_eigen(self.matrix)
        return self._eig

    @property
    def raw_eigenvalues(self):
        return self.eigh()[0]

    def spectrum(self):
        """Eigenvalues clamped to [0, 1]."""
        return _clamp(self.raw_eigenvalues)


def _clamp(w):
    lo, hi = float(w.min()), float(w.max())
    excess = max(-lo, hi - 1.0, 0.0)
    if excess > INTEGRITY_LIMIT:
        raise SpectralIntegrityError(
            f"correlation eigenvalue outside [0, 1] by {excess:.3e}", error_bound=excess
        )
    if excess > CLAMP_WINDOW:
        warnings.warn(
            f"clamping eigenvalues that leave [0, 1] by {excess:.2e}", RuntimeWarning, stacklevel=3
        )
    return np.clip(w, 0.0, 1.0)


def build_corr_matrix(mask, ts, cavity, *, occupation_tol=ZONE_EDGE_OCCUPATION):
    """Lattice correlation matrix of a subsystem in the thermal state ``ts``."""
    tau, eta = lattice_parameters(ts, cavity, occupation_tol=occupation_tol)
    d2 = ((mask.sites[:, None, :] - mask.sites[None, :, :]) ** 2).sum(axis=-1)
    uniq, inv = np.unique(d2, return_inverse=True)
    vals = thermal_kernel(np.sqrt(uniq.astype(float)), tau, eta)
    mat = vals[inv.reshape(d2.shape)]
    ratio = mask.n_sites * cavity.lattice_a**2 / cavity.volume
    return CorrelationMatrix(mat, mask=mask, volume_ratio=ratio)


def entanglement_entropy(M):
    """Von Neumann entropy ``sum_i e(lambda_i)`` of a Gaussian reduced state."""
    cm = M if isinstance(M, CorrelationMatrix) else CorrelationMatrix(M)
    return float(binary_entropy(cm.spectrum()).sum())


def gaussian_entropy(M):
    """``-Tr[M ln M + (1-M) ln(1-M)]`` for any one-particle correlation matrix."""
    a = np.asarray(M.dense if isinstance(M, CorrelationMatrix) else M, dtype=float)
    w = np.linalg.eigvalsh(0.5 * (a + a.T))
    return float(binary_entropy(_clamp(w)).sum())


def effective_hamiltonian(M, *, clip=CLAMP_WINDOW):
    """Entanglement Hamiltonian ``ln(M^{-1} - 1)`` as a symmetric matrix."""
    cm = M if isinstance(M, CorrelationMatrix) else CorrelationMatrix(M)
    w, v = cm.eigh()
    w = _clamp(w)
    if np.any((w < clip) | (w > 1.0 - clip)):
        warnings.warn("eigenvalue at 0 or 1; effective Hamiltonian clipped", RuntimeWarning,
                      stacklevel=2)
        w = np.clip(w, clip, 1.0 - clip)
    h = np.log1p(-w) - np.log(w)
    return mathcore.SymmetricMatrix((v * h) @ v.T)


# ---------------------------------------------------------------------------
# generating functions


def _tail_radius(tau, eta, tol, dim):
    """Smallest integer radius beyond which ``sum |c_n| < tol``.

    The probe extent combines the Gaussian decay expected from the
    Maxwell-Boltzmann part of the occupation with the exponential decay
    set by the first Matsubara pole, which dominates when degenerate.
    """
    log_inv = math.log(1.0 / tol)
    r_gauss = math.sqrt(4.0 * (log_inv + max(eta, 0.0)) / tau)
    rate = abs(np.sqrt(complex(tau * eta, tau * math.pi)).imag)
    r_pole = (log_inv + 10.0) / rate
    probe = 1.5 * max(r_gauss, r_pole) + 8.0
    for _ in range(6):
        r = np.arange(0.0, probe, 0.25)
        c = np.abs(thermal_kernel(r, tau, eta))
        weight = 2.0 * math.pi * np.maximum(r, 0.25) if dim == 2 else np.full(r.shape, 2.0)
        tail = np.cumsum((c * weight * 0.25)[::-1])[::-1]
        if tail[-1] < 1e-3 * tol:
            below = np.nonzero(tail < tol)[0]
            return int(math.ceil(r[below[0]]))
        probe *= 2.0
    raise NumericError("generating-function truncation bound not met")


@dataclass(frozen=True, eq=False)
class GeneratingFunction:
    """Symbol of a Toeplitz (dim 1) or block Toeplitz (dim 2) matrix.

    ``coefficients`` holds ``c_n`` for ``n = 0..n_max`` (dim 1) or the
    ``(2 n_max + 1)^2`` table centred on ``n = 0`` (dim 2).  Calling the
    object evaluates the truncated Fourier sum; :meth:`closed` evaluates
    the closed-form representation when one is attached.
    """

    dim: int
    coefficients: np.ndarray
    n_max: int
    closed_form: object = None

    @classmethod
    def constant(cls, value, dim=1):
        c = np.array([float(value)]) if dim == 1 else np.array([[float(value)]])
        return cls(dim, c, 0, lambda theta: np.full(np.shape(theta)[: 1 if dim == 1 else -1],
                                                    float(value)))

    def __call__(self, theta):
        th = np.asarray(theta, dtype=float)
        if self.dim == 1:
            n = np.arange(1, self.n_max + 1)
            return self.coefficients[0] + 2.0 * np.cos(th[..., None] * n) @ self.coefficients[1:]
        n = np.arange(-self.n_max, self.n_max + 1)
        n1, n2 = np.meshgrid(n, n, indexing="ij")
        phase = th[..., 0, None] * n1.ravel() + th[..., 1, None] * n2.ravel()
        return np.cos(phase) @ self.coefficients.ravel()

    def closed(self, theta):
        if self.closed_form is None:
            raise UnsupportedError("no closed form attached")
        return self.closed_form(np.asarray(theta, dtype=float))

    def grid(self, M=None):
        """Values on the uniform grid ``theta_j = 2 pi j / M`` (via FFT)."""
        M = self.default_grid() if M is None else int(M)
        if M < 2 * self.n_max + 1:
            raise DomainError("grid too coarse for the coefficient table")
        if self.dim == 1:
            buf = np.zeros(M)
            buf[: self.n_max + 1] = self.coefficients
            buf[M - self.n_max:] = self.coefficients[1:][::-1] if self.n_max else []
            return np.fft.fft(buf).real
        buf = np.zeros((M, M))
        idx = np.arange(-self.n_max, self.n_max + 1) % M
        buf[np.ix_(idx, idx)] = self.coefficients
        return np.fft.fft2(buf).real

    def default_grid(self):
        m = max(256 if self.dim == 2 else 1024, 2 * self.n_max + 1)
        return 1 << (m - 1).bit_length()

    def average(self, func=None, M=None):
        """``int func(C) dtheta / (2 pi)^dim`` by the periodic trapezoid rule."""
        vals = self.grid(M)
        return float(np.mean(vals if func is None else func(vals)))


def _closed_1d(tau, eta, spec=mathcore.QuadratureSpec(abs_tol=1e-14, rel_tol=1e-12)):
    q_max = math.sqrt(tau * (max(eta, 0.0) + 45.0))

    def one(theta):
        total = 0.0
        kmax = int(math.ceil((q_max + abs(theta)) / (2 * math.pi)))
        for k in range(-kmax, kmax + 1):
            w = abs(theta - 2.0 * math.pi * k)
            if w >= q_max:
                continue

            def g(q, w=w):
                if q + w <= 0.0:
                    return 0.0
                return q * float(_sps.expit(eta - q * q / tau)) / math.sqrt(q + w)

            # square-root endpoint singularity handled by an algebraic weight
            total += mathcore.integrate(g, w, q_max, spec, weight="alg", wvar=(-0.5, 0.0))
        return total / math.pi

    return np.vectorize(one, otypes=[float])


def _closed_2d(tau, eta):
    def f(theta):
        th = np.asarray(theta, dtype=float)
        t1 = np.mod(th[..., 0] + math.pi, 2 * math.pi) - math.pi
        t2 = np.mod(th[..., 1] + math.pi, 2 * math.pi) - math.pi
        reach = int(math.ceil(math.sqrt(tau * (max(eta, 0.0) + 45.0)) / (2 * math.pi))) + 1
        total = np.zeros(np.shape(t1))
        for k1 in range(-reach, reach + 1):
            for k2 in range(-reach, reach + 1):
                w2 = (t1 - 2 * math.pi * k1) ** 2 + (t2 - 2 * math.pi * k2) ** 2
                total += _sps.expit(eta - w2 / tau)
        return total

    return f


def generating_function_1d(ts, cavity, *, tol=1e-12):
    """Symbol of the chain correlation matrix.

    The closed form is the energy integral over the square-root kernel;
    with ``q = a sqrt(2 m eps) / hbar`` it reads
    ``(1/pi) sum_k int_{|w_k|}^inf q f(q) / sqrt(q^2 - w_k^2) dq`` with
    ``w_k = theta - 2 pi k``.
    """
    tau, eta = lattice_parameters(ts, cavity)
    n_max = _tail_radius(tau, eta, tol, dim=1)
    c = thermal_kernel(np.arange(n_max + 1, dtype=float), tau, eta)
    return GeneratingFunction(1, c, n_max, _closed_1d(tau, eta))


def generating_function_2d(ts, cavity, *, tol=1e-12):
    """Symbol of the square-lattice correlation matrix, truncated at ``|n| <= n_max``."""
    tau, eta = lattice_parameters(ts, cavity)
    n_max = _tail_radius(tau, eta, tol, dim=2)
    n = np.arange(-n_max, n_max + 1)
    n1, n2 = np.meshgrid(n, n, indexing="ij")
    d2 = n1**2 + n2**2
    inside = d2 <= n_max * n_max
    uniq, inv = np.unique(d2[inside], return_inverse=True)
    table = np.zeros(d2.shape)
    table[inside] = thermal_kernel(np.sqrt(uniq.astype(float)), tau, eta)[inv]
    return GeneratingFunction(2, table, n_max, _closed_2d(tau, eta))


# ---------------------------------------------------------------------------
# asymptotic checks


def _toeplitz(coeffs, size):
    c = np.zeros(size)
    m = min(size, coeffs.size)
    c[:m] = coeffs[:m]
    idx = np.abs(np.arange(size)[:, None] - np.arange(size)[None, :])
    return c[idx]


def szego_deviation(gf, lam, sizes):
    """``|ln D_N(lam) / N - int ln(lam + 1 - 2 C) dtheta / 2pi|`` per size.

    ``D_N`` is ``prod_i (lam + 1 - 2 lambda_i)`` over the eigenvalues of the
    ``N x N`` Toeplitz matrix of ``gf``.
    """
    if gf.dim != 1:
        raise DomainError("Szego check needs a 1-d generating function")
    values = gf.grid()
    shifted = lam + 1.0 - 2.0 * values
    if np.any(shifted <= 0):
        raise DomainError("lam + 1 - 2C vanishes: singular symbol, outside the regular regime")
    formula = float(np.mean(np.log(shifted)))
    rows = []
    for n in sizes:
        w = np.linalg.eigvalsh(_toeplitz(gf.coefficients, int(n)))
        arg = lam + 1.0 - 2.0 * w
        if np.any(arg <= 0):
            raise DomainError("shifted matrix is not positive definite")
        per_site = float(np.sum(np.log(arg))) / n
        rows.append({"N_A": int(n), "log_det_per_site": per_site,
                     "formula_value": formula, "gap": abs(per_site - formula)})
    return rows


def szego_check_1d(ts, cavity, lam, sizes):
    """Szego asymptotics of the chain correlation matrix at parameter ``lam``."""
    if abs(lam) <= 1.0:
        raise DomainError("lam must satisfy |lam| > 1 (regular symbol)")
    return szego_deviation(generating_function_1d(ts, cavity), lam, sizes)


def _symbol_entropy(gf):
    return gf.average(lambda c: binary_entropy(np.clip(c, 0.0, 1.0)))


def doktorsky_check_2d(ts, cavity, side, *, mask=None, gf=None):
    """Eigenvalue entropy per site of a square (or given) mask versus the symbol integral."""
    mask = SubsystemMask.square(side) if mask is None else mask
    cm = build_corr_matrix(mask, ts, cavity)
    per_site = entanglement_entropy(cm) / cm.n_sites
    gf = generating_function_2d(ts, cavity) if gf is None else gf
    formula = _symbol_entropy(gf)
    return {
        "N_A": cm.n_sites,
        "S": per_site * cm.n_sites,
        "S_per_site": per_site,
        "formula_value": formula,
        "gap": abs(per_site - formula) / formula,
        "volume_ratio": cm.volume_ratio,
    }


def ee_density(ts, cavity):
    """Entropy per lattice site from the symbol, and the continuum density."""
    s_a = _symbol_entropy(generating_function_2d(ts, cavity))
    return s_a, entropy_density_continuum(ts, cavity)


def spectral_distribution_check(M, gf, moments=(1, 2, 3)):
    """Compare spectral moments of ``M`` with the moments of its symbol."""
    w = M.spectrum() if isinstance(M, CorrelationMatrix) else np.linalg.eigvalsh(M)
    grid = gf.grid()
    out = {}
    for s in moments:
        lhs = float(np.mean(w**s))
        rhs = float(np.mean(grid**s))
        out[int(s)] = {"spectral": lhs, "symbol": rhs, "gap": abs(lhs - rhs),
                       "rel_gap": abs(lhs - rhs) / abs(rhs)}
    return out


# ---------------------------------------------------------------------------
# continuum identities


def momentum_occupation(p, ts, cavity):
    """Two-dimensional Fourier transform of the thermal kernel at momentum ``p``.

    ``2 pi int_0^inf r J0(p r / hbar) M(r) dr``; for a correct kernel this
    reproduces the Fermi-Dirac occupation of ``p^2 / 2m``.
    """
    scale2 = 2.0 * cavity.mass * ts.T / cavity.hbar**2
    eta = ts.mu / ts.T
    k = float(p) / cavity.hbar
    rate = abs(np.sqrt(complex(scale2 * eta, scale2 * math.pi)).imag)
    gauss = math.sqrt(4.0 * (40.0 + max(eta, 0.0)) / scale2)
    r_max = max(45.0 / rate, gauss)
    k_top = max(k, math.sqrt(scale2 * (max(eta, 0.0) + 45.0)))
    panels = max(64, math.ceil(r_max * k_top / math.pi) * 2)
    edges = np.linspace(0.0, r_max, panels + 1)
    x, w = np.polynomial.legendre.leggauss(20)
    half = 0.5 * np.diff(edges)[:, None]
    nodes = (half * x + 0.5 * (edges[1:] + edges[:-1])[:, None]).ravel()
    weights = (half * w).ravel()
    kern = thermal_kernel(nodes, scale2, eta)
    return float(2.0 * math.pi * np.sum(weights * nodes * _sps.j0(k * nodes) * kern))


def regularized_bessel_overlap(a, b, gamma, *, spec=None):
    """``int_0^inf x J0(a x) J0(b x) exp(-gamma^2 x^2) dx`` by quadrature."""
    spec = spec or mathcore.QuadratureSpec(abs_tol=1e-13, rel_tol=1e-11)
    x_max = math.sqrt(40.0) / gamma
    width = math.pi / max(a, b, 1e-12)
    edges = np.linspace(0.0, x_max, max(2, math.ceil(x_max / width)) + 1)

    def f(x):
        return x * _sps.j0(a * x) * _sps.j0(b * x) * math.exp(-(gamma * x) ** 2)

    return math.fsum(mathcore.integrate(f, lo, hi, spec) for lo, hi in zip(edges[:-1], edges[1:]))


def regularized_bessel_overlap_closed(a, b, gamma):
    """Closed form ``exp(-(a^2+b^2)/4g^2) I0(ab/2g^2) / (2 g^2)``, overflow-safe."""
    g2 = gamma * gamma
    z = a * b / (2.0 * g2)
    return float(_sps.i0e(z) * math.exp(-((a - b) ** 2) / (4.0 * g2)) / (2.0 * g2))


# ---------------------------------------------------------------------------
# estimator front end


class LatticeEntanglement(TransformerMixin, BaseEstimator):
    """Entanglement entropy of lattice subsystems in a thermal state.

    ``fit`` builds the two-dimensional symbol and records the entropy
    density it predicts; ``transform`` maps a list of masks to rows
    ``(N_A, S, S / N_A)``.
    """

    def __init__(self, temperature=1.0, chemical_potential=0.0, lattice_a=0.5,
                 volume=1.0e6, hbar=1.0, mass=1.0):
        self.temperature = temperature
        self.chemical_potential = chemical_potential
        self.lattice_a = lattice_a
        self.volume = volume
        self.hbar = hbar
        self.mass = mass

    def _state(self):
        cavity = CavityModel(volume=self.volume, hbar=self.hbar, mass=self.mass,
                             lattice_a=self.lattice_a)
        return ThermalState(T=self.temperature, mu=self.chemical_potential), cavity

    def fit(self, X=None, y=None):
        ts, cavity = self._state()
        self.generating_function_ = generating_function_2d(ts, cavity)
        self.entropy_density_ = _symbol_entropy(self.generating_function_)
        return self

    def transform(self, X):
        check_is_fitted(self, "generating_function_")
        ts, cavity = self._state()
        rows = []
        for mask in X:
            s = entanglement_entropy(build_corr_matrix(mask, ts, cavity))
            rows.append((mask.n_sites, s, s / mask.n_sites))
        return np.array(rows, dtype=float)
