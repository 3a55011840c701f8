"""Numerical primitives used throughout the package.

Special functions, quadrature, Newton and simplex minimisation are thin,
checked wrappers around SciPy.  The symmetric eigensolver offers both
LAPACK (default) and an in-house cyclic Jacobi iteration with threshold
sweeps in round-robin order; the latter is exact enough for validation
and small problems but slower for the N_A ~ 10^3 matrices of lattice runs.

The random stream is NumPy's ``Philox4x64`` counter generator, which is
specified bit-for-bit independently of platform.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate as _spi
from scipy import optimize as _spo
from scipy import special as _sps

from .errors import DomainError, NumericError

__all__ = [
    "QuadratureSpec",
    "SymmetricMatrix",
    "bessel_j0",
    "bessel_j1",
    "bessel_i0",
    "gamma_fn",
    "sym_eigen",
    "jacobi_eigen",
    "integrate",
    "newton2d",
    "neldermead",
    "rng",
]


# ---------------------------------------------------------------------------
# special functions


def _as_finite(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def _ret(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def bessel_j0(x):
    """Bessel function of the first kind, order zero (vectorised)."""
    arr = _as_finite(x)
    return _ret(_sps.j0(arr), x)


def bessel_j1(x):
    """Bessel function of the first kind, order one (vectorised)."""
    arr = _as_finite(x)
    return _ret(_sps.j1(arr), x)


def bessel_i0(x):
    """Modified Bessel function of the first kind, order zero."""
    arr = _as_finite(x)
    return _ret(_sps.i0(arr), x)


def gamma_fn(x):
    """Euler gamma function; raises at the poles 0, -1, -2, ..."""
    arr = _as_finite(x)
    if np.any((arr <= 0) & (arr == np.round(arr))):
        raise DomainError("gamma_fn has poles at non-positive integers")
    return _ret(_sps.gamma(arr), x)


# ---------------------------------------------------------------------------
# symmetric matrices


class SymmetricMatrix:
    """Real symmetric matrix whose symmetry is guaranteed by storage.

    Only the lower triangle of the input is kept; the upper triangle is
    mirrored from it, so ``m.dense`` is exactly symmetric.
    """

    __slots__ = ("_a",)

    def __init__(self, entries):
        a = _as_finite(entries, "entries")
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise DomainError("SymmetricMatrix needs a non-empty square array")
        low = np.tril(a)
        self._a = low + np.tril(low, -1).T
        self._a.setflags(write=False)

    @property
    def dim(self):
        return self._a.shape[0]

    @property
    def dense(self):
        return self._a

    def __array__(self, dtype=None, copy=None):
        return self._a.astype(dtype) if dtype is not None else self._a.copy()

    def __repr__(self):
        return f"SymmetricMatrix(dim={self.dim})"


def _dense_symmetric(m):
    if isinstance(m, SymmetricMatrix):
        return m.dense
    return SymmetricMatrix(m).dense


def _round_robin(n):
    """Pairings for one cyclic sweep (circle method); ``n`` even."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        half = n // 2
        p = np.array(players[:half])
        q = np.array(players[half:][::-1])
        rounds.append((np.minimum(p, q), np.maximum(p, q)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def jacobi_eigen(m, *, tol=1e-15, max_sweeps=60):
    """Cyclic Jacobi eigensolver with threshold sweeps.

    Each sweep visits every off-diagonal pair once, grouped into rounds of
    disjoint pairs so that a whole round is applied with array operations.
    Rotations whose pivot is below the current threshold are skipped.

    Returns ascending eigenvalues and orthonormal eigenvectors (columns).
    """
    a = np.array(_dense_symmetric(m), dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return a.diagonal().copy(), v
    size = n + (n % 2)
    if size != n:
        a = np.pad(a, ((0, 1), (0, 1)))
        v = np.eye(size)
    rounds = _round_robin(size)
    norm = np.linalg.norm(a)
    if norm == 0.0:
        return np.zeros(n), np.eye(n)

    def off(x):
        y = x.copy()
        np.fill_diagonal(y, 0.0)
        return float(np.linalg.norm(y))

    residual = off(a)
    for sweep in range(max_sweeps):
        if residual <= tol * norm:
            break
        # threshold decreases with the residual, as in the classical scheme
        thresh = 0.2 * residual / (size * size) if sweep < 3 else 0.0
        for p, q in rounds:
            apq = a[p, q]
            active = np.abs(apq) > thresh
            if not np.any(active):
                continue
            p, q, apq = p[active], q[active], apq[active]
            app, aqq = a[p, p], a[q, q]
            theta = (aqq - app) / (2.0 * apq)
            t = np.sign(theta) / (np.abs(theta) + np.hypot(1.0, theta))
            t[theta == 0.0] = 1.0
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            ap, aq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = c * ap - s * aq
            a[:, q] = s * ap + c * aq
            rp, rq = a[p, :].copy(), a[q, :].copy()
            cc, ss = c[:, None], s[:, None]
            a[p, :] = cc * rp - ss * rq
            a[q, :] = ss * rp + cc * rq
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq
        residual = off(a)
    else:
        if residual > tol * norm:
            raise NumericError(
                f"Jacobi did not converge in {max_sweeps} sweeps "
                f"(off-diagonal norm {residual:.3e})",
                error_bound=residual,
            )
    w = np.diag(a)[:n].copy()
    v = v[:n, :n]
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def sym_eigen(m, *, method="lapack"):
    """Eigen-decomposition of a real symmetric matrix.

    Parameters
    ----------
    m : SymmetricMatrix or array_like
        Operand; only its lower triangle is read.
    method : {"lapack", "jacobi"}
        ``"lapack"`` calls ``numpy.linalg.eigh``; ``"jacobi"`` uses
        :func:`jacobi_eigen`.

    Returns
    -------
    eigenvalues : ndarray, ascending
    eigenvectors : ndarray, orthonormal columns
    """
    a = _dense_symmetric(m)
    if method == "jacobi":
        return jacobi_eigen(a)
    if method != "lapack":
        raise DomainError(f"unknown eigensolver {method!r}")
    try:
        w, v = np.linalg.eigh(a, UPLO="L")
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericError(f"eigh failed: {exc}") from exc
    return w, v


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_subdivisions: int = 200

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be >= 1")


DEFAULT_QUADRATURE = QuadratureSpec()


def integrate(f, a, b, spec=DEFAULT_QUADRATURE, **quad_kwargs):
    """Adaptive Gauss-Kronrod integral of ``f`` over ``[a, b]``.

    ``b`` may be ``math.inf`` for integrands decaying at infinity.  Extra
    keyword arguments (``points``, ``weight``, ``wvar``) go to QUADPACK.

    Raises
    ------
    NumericError
        When the requested tolerance is not reached; the exception carries
        the best estimate and its error bound.
    """
    if not (math.isfinite(a) and (b == math.inf or (math.isfinite(b) and a < b))):
        raise DomainError("integrate needs finite a < b, or b = inf")
    with warnings.catch_warnings():
        warnings.simplefilter("error", _spi.IntegrationWarning)
        try:
            val, err = _spi.quad(
                f,
                a,
                b,
                epsabs=spec.abs_tol,
                epsrel=spec.rel_tol,
                limit=spec.max_subdivisions,
                **quad_kwargs,
            )
        except _spi.IntegrationWarning as exc:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                val, err = _spi.quad(
                    f, a, b, epsabs=spec.abs_tol, epsrel=spec.rel_tol,
                    limit=spec.max_subdivisions, **quad_kwargs,
                )
            raise NumericError(
                f"quadrature tolerance not reached: {exc}", estimate=val, error_bound=err
            ) from None
    if not math.isfinite(val):
        raise NumericError("quadrature produced a non-finite value", estimate=val)
    return val


# ---------------------------------------------------------------------------
# root finding and minimisation


def _fd_jacobian(g, x, gx):
    jac = np.empty((gx.size, x.size))
    for k in range(x.size):
        h = 1e-7 * max(1.0, abs(x[k]))
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        jac[:, k] = (np.asarray(g(xp), float) - np.asarray(g(xm), float)) / (2 * h)
    return jac


def newton2d(g, x0, tol=1e-12, *, max_iter=100):
    """Damped Newton iteration for ``g(x) = 0`` in two unknowns.

    The Jacobian is obtained by central differences; a backtracking step
    keeps ``|g|`` decreasing.  Returns the root as a length-2 array.
    """
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (2,):
        raise DomainError("newton2d expects a 2-vector start point")
    gx = np.asarray(g(x), dtype=float)
    norm = float(np.linalg.norm(gx))
    for _ in range(max_iter):
        if not math.isfinite(norm):
            break
        if norm < tol:
            return x
        jac = _fd_jacobian(g, x, gx)
        try:
            step = np.linalg.solve(jac, -gx)
        except np.linalg.LinAlgError:
            break
        lam = 1.0
        while lam > 1e-6:
            trial = x + lam * step
            gt = np.asarray(g(trial), dtype=float)
            nt = float(np.linalg.norm(gt))
            if math.isfinite(nt) and nt < norm:
                break
            lam *= 0.5
        else:
            break
        x, gx, norm = trial, gt, nt
    if norm < tol:
        return x
    raise NumericError(f"newton2d failed (|g| = {norm:.3e})", estimate=x, error_bound=norm)


def neldermead(f, x0, tol=1e-8, *, max_iter=20000):
    """Derivative-free minimisation by the Nelder-Mead simplex method."""
    x0 = np.asarray(x0, dtype=float)
    res = _spo.minimize(
        f,
        x0,
        method="Nelder-Mead",
        options={
            "xatol": tol,
            "fatol": 1e-300,
            "maxiter": max_iter,
            "maxfev": 4 * max_iter,
            "adaptive": x0.size > 2,
        },
    )
    simplex = res.final_simplex[0]
    diameter = float(np.max(np.abs(simplex - simplex[0])))
    if diameter >= tol and not res.success:
        raise NumericError(
            f"Nelder-Mead stopped with simplex diameter {diameter:.3e}",
            estimate=res.x,
            error_bound=diameter,
        )
    return res.x


# ---------------------------------------------------------------------------
# random numbers


def rng(seed):
    """Deterministic uniform stream seeded by a 64-bit integer."""
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise DomainError("seed must be an integer")
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))
