"""Cavity model, Fermi-Dirac occupation and thermal-parameter solvers.

Units default to hbar = m = 1 but every formula carries them explicitly.
The reduced de Broglie wavelength of a particle of energy eps is
``hbar / sqrt(2 m eps)``; the 2D cavity has the Weyl spectral density
``rho = V m / (2 pi hbar^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize as _spo
from scipy import special as _sps

from . import mathcore
from ._validation import check_positive
from .errors import DomainError, InfeasibleError, NumericError

__all__ = [
    "CavityModel",
    "ThermalState",
    "SpectrumModel",
    "fermi_dirac",
    "fd_entropy",
    "binary_entropy",
    "fermi_dirac_integral_1",
    "solve_thermal",
    "ehrenfest_time",
    "ehrenfest_time_from_action",
    "entropy_density_continuum",
]


@dataclass(frozen=True)
class CavityModel:
    """Physical constants and geometry of a 2D chaotic cavity.

    ``linear_size`` is ``shape_factor * sqrt(volume)``.  Geometric margin
    checks treat the cavity as the square of that side centred at the
    origin.  ``lattice_a = 0`` means no lattice.
    """

    volume: float = 1.0e4
    hbar: float = 1.0
    mass: float = 1.0
    shape_factor: float = 1.0
    lattice_a: float = 0.0
    lyapunov_prefactor: float = 1.0

    def __post_init__(self):
        for name in ("volume", "hbar", "mass", "shape_factor", "lyapunov_prefactor"):
            check_positive(getattr(self, name), name)
        check_positive(self.lattice_a, "lattice_a", allow_zero=True)

    @property
    def linear_size(self):
        return self.shape_factor * math.sqrt(self.volume)

    @property
    def spectral_density(self):
        return self.volume * self.mass / (2.0 * math.pi * self.hbar**2)

    def wavelength(self, eps):
        """Reduced de Broglie wavelength at energy ``eps``."""
        eps = np.asarray(eps, dtype=float)
        if np.any(eps <= 0):
            raise DomainError("wavelength needs eps > 0")
        out = self.hbar / np.sqrt(2.0 * self.mass * eps)
        return float(out) if out.ndim == 0 else out

    def thermal_wavelength(self, T):
        return self.wavelength(check_positive(T, "T"))

    def with_lattice(self, a):
        return replace(self, lattice_a=check_positive(a, "lattice_a"))

    def distance_to_wall(self, points):
        """Distance from each point to the boundary of the model square."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        half = 0.5 * self.linear_size
        return half - np.max(np.abs(pts), axis=1)


@dataclass(frozen=True)
class ThermalState:
    """Temperature and chemical potential, with the totals they reproduce."""

    T: float
    mu: float
    E: float | None = None
    N: float | None = None

    def __post_init__(self):
        if not (isinstance(self.T, (int, float)) and math.isfinite(self.T) and self.T > 0):
            raise DomainError(f"temperature must be finite and > 0, got {self.T!r}")
        if not math.isfinite(self.mu):
            raise DomainError("chemical potential must be finite")

    @property
    def beta(self):
        return 1.0 / self.T

    @property
    def alpha(self):
        return -self.mu / self.T


# ---------------------------------------------------------------------------
# Fermi-Dirac helpers


def _fd(eps, T, mu):
    return _sps.expit(-(np.asarray(eps, dtype=float) - mu) / T)


def fermi_dirac(eps, ts):
    """Occupation ``1 / (exp((eps - mu)/T) + 1)``, overflow-safe."""
    out = _fd(eps, ts.T, ts.mu)
    return float(out) if out.ndim == 0 else out


def fd_entropy(x):
    """Binary entropy of the occupation at reduced energy ``x = (eps-mu)/T``.

    Written in the particle-hole symmetric form
    ``log1p(exp(-|x|)) + |x| expit(-|x|)``, which stays accurate in both
    tails.
    """
    ax = np.abs(np.asarray(x, dtype=float))
    return np.log1p(np.exp(-ax)) + ax * _sps.expit(-ax)


def binary_entropy(p):
    """``-p ln p - (1-p) ln(1-p)`` with the 0 ln 0 = 0 convention."""
    p = np.asarray(p, dtype=float)
    return _sps.entr(p) + _sps.entr(1.0 - p)


def _softplus(x):
    return np.logaddexp(0.0, x)


def fermi_dirac_integral_1(eta):
    """Complete Fermi-Dirac integral ``int_0^inf x / (exp(x - eta) + 1) dx``."""
    eta = float(eta)
    if eta > 0:
        return 0.5 * eta * eta + math.pi**2 / 6.0 - fermi_dirac_integral_1(-eta)
    z = math.exp(eta)
    if z < 0.25:
        return z * _fd1_series(z)
    return -float(_sps.spence(1.0 + z))


def _fd1_series(z):
    # sum_k (-1)^(k+1) z^(k-1) / k^2, valid for small z
    total, term, k = 0.0, 1.0, 1
    while True:
        contrib = term / (k * k)
        total += contrib if k % 2 else -contrib
        if contrib < 1e-18:
            return total
        k += 1
        term *= z


def _log_fd1(eta):
    if eta < -30.0:
        return eta + math.log(_fd1_series(math.exp(eta)))
    return math.log(fermi_dirac_integral_1(eta))


def _log_softplus(eta):
    if eta < -30.0:
        return eta + math.log1p(-0.5 * math.exp(eta))
    return math.log(float(_softplus(eta)))


# ---------------------------------------------------------------------------
# spectra


@dataclass(frozen=True, eq=False)
class SpectrumModel:
    """Single-particle spectrum: continuous 2D cavity or discrete levels.

    For ``discrete-levels`` either an explicit ascending ``levels`` array is
    given or ``spacing`` > 0 selects the unbounded harmonic ladder
    ``spacing * (1, 2, 3, ...)``.
    """

    kind: str
    levels: np.ndarray | None = None
    rho: float | None = None
    spacing: float | None = None

    def __post_init__(self):
        if self.kind == "continuous-2d-cavity":
            check_positive(self.rho, "rho")
        elif self.kind == "discrete-levels":
            if self.levels is None:
                check_positive(self.spacing, "spacing")
            else:
                lv = np.asarray(self.levels, dtype=float)
                if lv.ndim != 1 or lv.size == 0 or not np.all(np.isfinite(lv)):
                    raise DomainError("levels must be a finite non-empty 1-d array")
                if np.any(np.diff(lv) <= 0):
                    raise DomainError("levels must be strictly ascending")
                object.__setattr__(self, "levels", lv)
        else:
            raise DomainError(f"unknown spectrum kind {self.kind!r}")

    @classmethod
    def continuous(cls, cavity):
        return cls("continuous-2d-cavity", rho=cavity.spectral_density)

    @classmethod
    def discrete(cls, levels):
        return cls("discrete-levels", levels=np.asarray(levels, dtype=float))

    @classmethod
    def harmonic(cls, spacing=1.0):
        return cls("discrete-levels", spacing=float(spacing))

    @property
    def is_continuous(self):
        return self.kind == "continuous-2d-cavity"

    def levels_upto(self, e_max):
        if self.levels is not None:
            return self.levels
        n = max(1, int(math.ceil(e_max / self.spacing)))
        return self.spacing * np.arange(1, n + 1, dtype=float)

    def _lowest(self, count):
        if self.levels is not None:
            return self.levels[:count]
        return self.spacing * np.arange(1, count + 1, dtype=float)

    def ground_energy(self, N):
        """Energy of N fermions packed into the lowest states."""
        N = check_positive(N, "N")
        if self.is_continuous:
            return N * N / (2.0 * self.rho)
        whole = int(math.floor(N))
        if self.levels is not None and N > self.levels.size:
            raise InfeasibleError("more particles than levels")
        low = self._lowest(whole + 1)
        frac = N - whole
        return float(low[:whole].sum() + (frac * low[whole] if frac else 0.0))

    def totals(self, T, mu):
        """Grand-canonical ``(N, E)`` at temperature ``T`` and potential ``mu``."""
        if self.is_continuous:
            eta = mu / T
            return (
                self.rho * T * float(_softplus(eta)),
                self.rho * T * T * fermi_dirac_integral_1(eta),
            )
        lv = self.levels_upto(max(mu, 0.0) + 48.0 * T)
        occ = _fd(lv, T, mu)
        return float(occ.sum()), float(np.dot(lv, occ))


# ---------------------------------------------------------------------------
# thermal solver


def _solve_continuous_bracketed(spec, E, N):
    target = math.log(spec.rho * E / (N * N))

    def f(eta):
        return _log_fd1(eta) - 2.0 * _log_softplus(eta) - target

    lo, hi = -40.0, 40.0
    while f(lo) < 0:
        lo *= 2.0
    while f(hi) > 0:
        hi *= 2.0
        if hi > 1e8:
            raise NumericError("could not bracket the degeneracy parameter")
    eta = _spo.brentq(f, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500)
    T = N / (spec.rho * math.exp(_log_softplus(eta)))
    return T, eta * T


def _mu_for_count(spec, T, N):
    def f(mu):
        return spec.totals(T, mu)[0] - N

    step = max(T, 1.0)
    lo = hi = spec.ground_energy(N) / N
    while f(lo) > 0:
        lo -= step
        step *= 2.0
    step = max(T, 1.0)
    while f(hi) < 0:
        hi += step
        step *= 2.0
    return _spo.brentq(f, lo, hi, xtol=1e-13 * max(1.0, abs(hi)), rtol=1e-15, maxiter=500)


def _solve_discrete_bracketed(spec, E, N, T_guess):
    def h(T):
        return spec.totals(T, _mu_for_count(spec, T, N))[1] - E

    lo = hi = T_guess
    while h(lo) > 0:
        lo *= 0.5
        if lo < 1e-300:
            raise NumericError("temperature bracket collapsed")
    while h(hi) < 0:
        hi *= 2.0
        if hi > 1e300:
            raise NumericError("temperature bracket diverged")
    T = _spo.brentq(h, lo, hi, xtol=1e-14 * hi, rtol=1e-14, maxiter=500)
    return T, _mu_for_count(spec, T, N)


def _initial_guess(spec, E, N):
    if spec.is_continuous:
        return _solve_continuous_bracketed(spec, E, N)
    if spec.levels is None:
        rho, offset = 1.0 / spec.spacing, 0.5 * spec.spacing
    else:
        lv = spec.levels
        rho = (lv.size - 1) / (lv[-1] - lv[0]) if lv.size > 1 else 1.0
        offset = lv[0] - 0.5 / rho
    cont = SpectrumModel("continuous-2d-cavity", rho=rho)
    e_c = max(E - N * offset, cont.ground_energy(N) * (1.0 + 1e-6))
    T, mu = _solve_continuous_bracketed(cont, e_c, N)
    return T, mu + offset


def solve_thermal(spec, E, N, *, tol=1e-10):
    """Temperature and chemical potential reproducing the totals ``(E, N)``.

    Newton iteration in ``(ln T, mu/T)`` with a finite-difference
    Jacobian; if it fails, a nested bracketing search (``mu`` at fixed
    ``T``, then ``T``) takes over.

    Raises
    ------
    InfeasibleError
        ``E`` at or below the Pauli minimum, or above the infinite
        temperature energy of a finite level set.
    """
    E = check_positive(E, "E")
    N = check_positive(N, "N")
    e0 = spec.ground_energy(N)
    if E <= e0:
        raise InfeasibleError(
            f"E = {E} does not exceed the Pauli minimum {e0} for N = {N}; "
            "no positive temperature exists"
        )
    if spec.levels is not None:
        if N >= spec.levels.size:
            raise InfeasibleError("N must be smaller than the number of levels")
        if E >= N * spec.levels.mean():
            raise InfeasibleError("E requires a negative temperature on this level set")

    T0, mu0 = _initial_guess(spec, E, N)

    def residual(x):
        T = math.exp(x[0])
        n, e = spec.totals(T, x[1] * T)
        return np.array([n / N - 1.0, e / E - 1.0])

    try:
        x = mathcore.newton2d(residual, [math.log(T0), mu0 / T0], tol=tol)
        T, mu = math.exp(x[0]), x[1] * math.exp(x[0])
    except NumericError:
        if spec.is_continuous:
            T, mu = T0, mu0
        else:
            T, mu = _solve_discrete_bracketed(spec, E, N, T0)

    n, e = spec.totals(T, mu)
    if abs(n / N - 1.0) > 1e-8 or abs(e / E - 1.0) > 1e-8:
        raise NumericError(
            "thermal solve missed its tolerance",
            estimate=(T, mu),
            error_bound=max(abs(n / N - 1.0), abs(e / E - 1.0)),
        )
    return ThermalState(T=float(T), mu=float(mu), E=float(e), N=float(n))


# ---------------------------------------------------------------------------
# Ehrenfest time


def ehrenfest_time_from_action(action, lyapunov, hbar=1.0):
    """``ln(action / hbar) / lyapunov``; requires ``action > hbar``."""
    check_positive(lyapunov, "lyapunov")
    check_positive(hbar, "hbar")
    if not action > hbar:
        raise DomainError("semiclassical regime needs action > hbar")
    return math.log(action / hbar) / lyapunov


def ehrenfest_time(cavity, eps_avg):
    """Ehrenfest time of the cavity at single-particle energy ``eps_avg``.

    The Lyapunov exponent is ``lyapunov_prefactor * sqrt(eps/m) / L`` and
    the classical action is ``L sqrt(2 m eps)``.
    """
    eps = check_positive(eps_avg, "eps_avg")
    L = cavity.linear_size
    lyap = cavity.lyapunov_prefactor * math.sqrt(eps / cavity.mass) / L
    action = L * math.sqrt(2.0 * cavity.mass * eps)
    return ehrenfest_time_from_action(action, lyap, cavity.hbar)


# ---------------------------------------------------------------------------
# entropy density of the unconfined gas


def _breakpoints(mu, T, lo, hi):
    pts = mu + T * np.array([-20.0, -8.0, -3.0, -1.0, 0.0, 1.0, 3.0, 8.0, 20.0])
    return sorted(p for p in pts if lo < p < hi)


def entropy_density_continuum(ts, cavity, *, form="energy", spec=None):
    """Thermal entropy per unit area of the ideal 2D Fermi gas.

    ``form="energy"`` integrates ``(m / 2 pi hbar^2) int d eps s(eps)``;
    ``form="momentum"`` integrates over ``|p|`` with the polar measure.
    Both are provided so they can be checked against each other.
    """
    spec = spec or mathcore.QuadratureSpec(abs_tol=1e-14, rel_tol=1e-12)
    T, mu = ts.T, ts.mu
    e_hi = max(mu, 0.0) + 60.0 * T
    m, hb = cavity.mass, cavity.hbar
    if form == "energy":
        val = mathcore.integrate(
            lambda e: float(fd_entropy((e - mu) / T)), 0.0, e_hi, spec,
            points=_breakpoints(mu, T, 0.0, e_hi),
        )
        return m / (2.0 * math.pi * hb * hb) * val
    if form == "momentum":
        p_hi = math.sqrt(2.0 * m * e_hi)
        pts = [math.sqrt(2.0 * m * e) for e in _breakpoints(mu, T, 0.0, e_hi)]

        def g(p):
            return 2.0 * math.pi * p * float(fd_entropy((p * p / (2.0 * m) - mu) / T))

        val = mathcore.integrate(g, 0.0, p_hi, spec, points=pts)
        return val / (2.0 * math.pi * hb) ** 2
    raise DomainError(f"unknown form {form!r}")
