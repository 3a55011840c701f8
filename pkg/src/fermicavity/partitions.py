"""Random partitions of an integer into distinct parts.

A Fock state of ``N`` fermions on the equally spaced levels ``1, 2, 3, ...``
with total energy ``E`` is a partition of ``E`` into ``N`` distinct parts.
States are sampled from the uniform measure with a Markov chain whose
moves are energy-conserving pair transfers: two occupied levels exchange
``delta`` quanta, the move being rejected when the result is not a valid
partition.  Proposals are symmetric, so the uniform measure is stationary.

With ``N`` left free (Vershik mode) the chain also splits one part into two
and merges two into one, with Metropolis-Hastings weights that keep the
measure uniform over all distinct-part partitions of ``E``.

The chain kernels are compiled with numba.  Uniform variates come from the
package Philox stream and are passed in blocks, so a run is reproducible
bit-for-bit from its seed.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np
from scipy import special as _sps
from sklearn.base import BaseEstimator

from . import mathcore
from ._validation import check_count
from .errors import DomainError, FitError, InfeasibleError

__all__ = [
    "Partition",
    "CoarsePattern",
    "McmcConfig",
    "sample_partition",
    "sample_partitions",
    "coarse_grain",
    "group_centers",
    "counting_function",
    "fit_fermi_dirac",
    "vershik_curve",
    "vershik_check",
    "sample_free_partitions",
    "PartitionEnsemble",
    "FermiDiracFit",
]


@dataclass(frozen=True, eq=False)
class Partition:
    levels: np.ndarray
    energy: int

    def __post_init__(self):
        lv = np.asarray(self.levels)
        if lv.ndim != 1 or lv.size < 1:
            raise DomainError("a partition needs at least one part")
        if not np.issubdtype(lv.dtype, np.integer):
            raise DomainError("parts must be integers")
        lv = np.sort(lv.astype(np.int64))
        if lv[0] < 1:
            raise DomainError("parts must be positive")
        if np.any(np.diff(lv) == 0):
            raise DomainError("parts must be distinct")
        if int(lv.sum()) != int(self.energy):
            raise DomainError(f"parts sum to {int(lv.sum())}, not {self.energy}")
        lv.setflags(write=False)
        object.__setattr__(self, "levels", lv)
        object.__setattr__(self, "energy", int(self.energy))

    @property
    def n_parts(self):
        return self.levels.size


@dataclass(frozen=True, eq=False)
class CoarsePattern:
    group_size: int
    occupancies: np.ndarray

    @property
    def ratios(self):
        return self.occupancies / self.group_size

    @property
    def n_particles(self):
        return int(self.occupancies.sum())


@dataclass(frozen=True)
class McmcConfig:
    """Chain settings.  ``max_shift`` bounds the quanta moved per pair transfer."""

    seed: int = 0
    burn_in: int = 1_000_000
    thinning: int = 1_000
    max_shift: int = 50

    def __post_init__(self):
        check_count(self.burn_in, "burn_in")
        check_count(self.thinning, "thinning")
        check_count(self.max_shift, "max_shift")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)):
            raise DomainError("seed must be an integer")


# ---------------------------------------------------------------------------
# compiled chain kernels


@numba.njit(cache=True, nogil=True)
def _pair_move(parts, n, occ, u0, u1, u2, max_shift):
    if n < 2:
        return
    i = int(u0 * n)
    j = int(u1 * (n - 1))
    if j >= i:
        j += 1
    d = 1 + int(u2 * max_shift)
    a = parts[i] + d
    b = parts[j] - d
    if b < 1 or a >= occ.size or a == b:
        return
    # a == parts[j] together with b == parts[i] is a relabelling; skip it
    if (occ[a] and a != parts[j]) or (occ[b] and b != parts[i]):
        return
    if a == parts[j] or b == parts[i]:
        return
    occ[parts[i]] = False
    occ[parts[j]] = False
    occ[a] = True
    occ[b] = True
    parts[i] = a
    parts[j] = b


@numba.njit(cache=True, nogil=True)
def _advance_fixed(parts, occ, u, max_shift):
    n = parts.size
    for k in range(u.shape[0]):
        _pair_move(parts, n, occ, u[k, 1], u[k, 2], u[k, 3], max_shift)


@numba.njit(cache=True, nogil=True)
def _advance_free(parts, count, occ, u, max_shift):
    """Pair transfers (1/2), splits (1/4) and merges (1/4); returns the new count."""
    n = count
    for k in range(u.shape[0]):
        r = u[k, 0]
        if r < 0.5:
            _pair_move(parts, n, occ, u[k, 1], u[k, 2], u[k, 3], max_shift)
        elif r < 0.75:
            i = int(u[k, 1] * n)
            v = parts[i]
            if v < 3:
                continue
            a = 1 + int(u[k, 2] * (v - 1))
            b = v - a
            if a == b or occ[a] or occ[b]:
                continue
            if u[k, 3] * (n + 1) >= v - 1:
                continue
            occ[v] = False
            occ[a] = True
            occ[b] = True
            parts[i] = a
            parts[n] = b
            n += 1
        else:
            if n < 2:
                continue
            i = int(u[k, 1] * n)
            j = int(u[k, 2] * (n - 1))
            if j >= i:
                j += 1
            v = parts[i] + parts[j]
            if occ[v]:
                continue
            if u[k, 3] * (v - 1) >= n:
                continue
            occ[parts[i]] = False
            occ[parts[j]] = False
            occ[v] = True
            parts[i] = v
            last = n - 1
            if j != last:
                parts[j] = parts[last]
            n -= 1
    return n


def _phi_on_grid(occ, points):
    """Counting function ``#{parts >= u}`` at integer points ``u``."""
    tail = np.cumsum(occ[::-1])[::-1]
    return tail[points]


# ---------------------------------------------------------------------------
# chain drivers

_BLOCK = 1 << 16


def _uniform_blocks(gen, total):
    while total > 0:
        m = min(total, _BLOCK)
        yield gen.random((m, 4))
        total -= m


def _check_feasible(E, N):
    E = check_count(E, "E")
    N = check_count(N, "N")
    if E < N * (N + 1) // 2:
        raise InfeasibleError(f"E = {E} is below the minimum N(N+1)/2 = {N * (N + 1) // 2}")
    return E, N


def _initial_fixed(E, N):
    parts = np.arange(1, N + 1, dtype=np.int64)
    parts[-1] += E - N * (N + 1) // 2
    occ = np.zeros(E + 2, dtype=np.bool_)
    occ[parts] = True
    return parts, occ


def _run_fixed(E, N, samples, cfg):
    parts, occ = _initial_fixed(E, N)
    out = np.empty((samples, N), dtype=np.int64)
    if E == N * (N + 1) // 2:
        out[:] = parts
        return out
    gen = mathcore.rng(cfg.seed)
    for u in _uniform_blocks(gen, cfg.burn_in):
        _advance_fixed(parts, occ, u, cfg.max_shift)
    for s in range(samples):
        for u in _uniform_blocks(gen, cfg.thinning):
            _advance_fixed(parts, occ, u, cfg.max_shift)
        out[s] = np.sort(parts)
    return out


def sample_partitions(E, N, samples, cfg=McmcConfig()):
    """Retained chain states as a ``(samples, N)`` array of ascending levels."""
    E, N = _check_feasible(E, N)
    samples = check_count(samples, "samples")
    return _run_fixed(E, N, samples, cfg)


def sample_partition(E, N, cfg=McmcConfig()):
    """One state of the chain after burn-in, drawn (approximately) uniformly."""
    return Partition(sample_partitions(E, N, 1, cfg)[0], E)


def coarse_grain(p, G):
    """Occupancies of the contiguous level groups ``[1..G], [G+1..2G], ...``."""
    G = check_count(G, "G")
    levels = p.levels if isinstance(p, Partition) else np.asarray(p)
    counts = np.bincount((levels - 1) // G)
    return CoarsePattern(G, counts)


def _coarse_matrix(snapshots, G, n_groups):
    rows = snapshots.shape[0]
    idx = (snapshots - 1) // G
    idx = np.minimum(idx, n_groups)  # overflow bin, discarded
    flat = idx + (n_groups + 1) * np.arange(rows)[:, None]
    counts = np.bincount(flat.ravel(), minlength=rows * (n_groups + 1))
    return counts.reshape(rows, n_groups + 1)[:, :n_groups]


def group_centers(n_groups, G):
    """Mean level of each group, ``(m - 1) G + (G + 1) / 2``."""
    return (np.arange(n_groups) * G + 0.5 * (G + 1)).astype(float)


def counting_function(p, u):
    """``#{parts >= u}``, vectorised over ``u``."""
    levels = p.levels if isinstance(p, Partition) else np.sort(np.asarray(p))
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise DomainError("u must be >= 0")
    out = levels.size - np.searchsorted(levels, u, side="left")
    return int(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Fermi-Dirac fit


def _fd_curve(eps, T, mu):
    return _sps.expit(-(eps - mu) / T)


def fit_fermi_dirac(centers, ratios):
    """Least-squares ``(T, mu)`` for ``ratios ~ 1 / (exp((eps - mu) / T) + 1)``.

    Returns ``(T, mu, rms)``.
    """
    x = np.asarray(centers, dtype=float)
    y = np.asarray(ratios, dtype=float)
    if x.shape != y.shape or x.size < 3:
        raise FitError("need at least three (center, ratio) points")
    if np.any(y < -1e-12) or np.any(y > 1 + 1e-12):
        raise DomainError("ratios must lie in [0, 1]")
    if np.all((y < 1e-12) | (y > 1 - 1e-12)):
        raise FitError("all ratios are 0 or 1: nothing to fit")
    # start: half filling crossing and the 25-75 % width
    order = np.argsort(x)
    xs, ys = x[order], y[order]
    mu0 = float(np.interp(0.5, ys[::-1], xs[::-1]))
    width = abs(float(np.interp(0.25, ys[::-1], xs[::-1]) - np.interp(0.75, ys[::-1], xs[::-1])))
    T0 = max(width / (2.0 * math.log(3.0)), 1e-3 * (xs[-1] - xs[0]) + 1e-12)
    scale = max(abs(mu0), T0)

    def loss(z):
        T = T0 * math.exp(z[0])
        mu = mu0 + scale * z[1]
        return float(np.sum((y - _fd_curve(x, T, mu)) ** 2))

    z = mathcore.neldermead(loss, np.zeros(2), tol=1e-10)
    T, mu = T0 * math.exp(z[0]), mu0 + scale * z[1]
    rms = math.sqrt(loss(z) / x.size)
    return float(T), float(mu), rms


# ---------------------------------------------------------------------------
# Vershik limit shape


def vershik_curve(u):
    """``-v(u) = (sqrt 12 / pi) ln(1 + exp(-pi u / sqrt 12))``."""
    c = math.sqrt(12.0) / math.pi
    return c * np.logaddexp(0.0, -np.asarray(u, dtype=float) / c)


def _run_free(E, samples, cfg, points):
    # staircase start, remainder added to the top part
    k = int((math.isqrt(8 * E + 1) - 1) // 2)
    parts = np.zeros(E + 1, dtype=np.int64)
    parts[:k] = np.arange(1, k + 1)
    parts[k - 1] += E - k * (k + 1) // 2
    occ = np.zeros(E + 2, dtype=np.bool_)
    occ[parts[:k]] = True
    count = k
    gen = mathcore.rng(cfg.seed)
    for u in _uniform_blocks(gen, cfg.burn_in):
        count = _advance_free(parts, count, occ, u, cfg.max_shift)
    out = np.empty((samples, points.size), dtype=np.int64)
    for s in range(samples):
        for u in _uniform_blocks(gen, cfg.thinning):
            count = _advance_free(parts, count, occ, u, cfg.max_shift)
        out[s] = _phi_on_grid(occ, points)
    return out


def sample_free_partitions(E, samples, cfg=McmcConfig(), *, return_parts=False):
    """Distinct-part partitions of ``E`` with free part count (uniform measure).

    Returns the list of retained partitions when ``return_parts`` is set,
    otherwise the counting functions on all levels ``0..E``.
    """
    E = check_count(E, "E")
    if not return_parts:
        return _run_free(E, samples, cfg, np.arange(E + 1))
    phis = _run_free(E, samples, cfg, np.arange(E + 2))
    result = []
    for phi in phis:
        levels = np.nonzero(phi[:-1] - phi[1:])[0]
        result.append(Partition(levels, E))
    return result


def vershik_check(E, samples, cfg=McmcConfig(), *, u_max=6.0, n_points=61, return_curve=False):
    """Mean over samples of ``sup_u |phi(sqrt(E) u) / sqrt(E) + v(u)|``.

    With ``return_curve`` the grid, mean scaled counting function and the
    limit curve are returned as well.
    """
    E = check_count(E, "E")
    samples = check_count(samples, "samples")
    root = math.sqrt(E)
    u = np.linspace(0.0, u_max, n_points)
    pts = np.round(root * u).astype(np.int64)
    phi = _run_free(E, samples, cfg, pts) / root
    target = vershik_curve(pts / root)
    stat = float(np.mean(np.max(np.abs(phi - target), axis=1)))
    if return_curve:
        return stat, pts / root, phi.mean(axis=0), target
    return stat


# ---------------------------------------------------------------------------
# estimators


def _batch_se(x, n_batches=20):
    usable = (x.shape[0] // n_batches) * n_batches
    means = x[:usable].reshape(n_batches, -1, x.shape[1]).mean(axis=1)
    return means.std(axis=0, ddof=1) / math.sqrt(n_batches)


def _split_chain_z(ratios):
    half = ratios.shape[0] // 2
    a, b = ratios[:half], ratios[half:2 * half]
    if half < 40:
        raise DomainError("split-chain diagnostic needs at least 80 samples")
    se = np.hypot(_batch_se(a), _batch_se(b))
    diff = np.abs(a.mean(axis=0) - b.mean(axis=0))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(se > 0, diff / se, np.where(diff > 0, np.inf, 0.0))


def _thread_cap():
    raw = os.environ.get("FERMI_CAVITY_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return os.cpu_count() or 1


class PartitionEnsemble(BaseEstimator):
    """Coarse-grained occupation statistics of uniformly random partitions.

    ``fit()`` runs ``n_chains`` independent chains (seeds derived from
    ``seed``) that together retain ``samples`` partitions, and stores:

    * ``group_centers_``, ``mean_ratios_``, ``std_ratios_`` per level group,
    * ``split_chain_z_``: per group, |difference| between the two half-run
      means in units of their combined batch-means standard error,
    * ``split_chain_agreement_``: fraction of groups with ``z <= 2``,
    * ``snapshots_`` when ``keep_snapshots`` is set.
    """

    def __init__(self, energy=21900, n_particles=200, group_size=20, samples=10_000,
                 seed=0, burn_in=1_000_000, thinning=1_000, max_shift=50, n_chains=1,
                 keep_snapshots=False):
        self.energy = energy
        self.n_particles = n_particles
        self.group_size = group_size
        self.samples = samples
        self.seed = seed
        self.burn_in = burn_in
        self.thinning = thinning
        self.max_shift = max_shift
        self.n_chains = n_chains
        self.keep_snapshots = keep_snapshots

    def _configs(self):
        chains = check_count(self.n_chains, "n_chains")
        seeds = np.random.SeedSequence(int(self.seed)).generate_state(chains, dtype=np.uint64)
        seeds = [int(self.seed)] if chains == 1 else [int(s) for s in seeds]
        per = [self.samples // chains + (1 if k < self.samples % chains else 0)
               for k in range(chains)]
        return [(McmcConfig(seed=s, burn_in=self.burn_in, thinning=self.thinning,
                            max_shift=self.max_shift), n) for s, n in zip(seeds, per)]

    def fit(self, X=None, y=None):
        E, N = _check_feasible(self.energy, self.n_particles)
        G = check_count(self.group_size, "group_size")
        check_count(self.samples, "samples", minimum=80)
        jobs = self._configs()
        with ThreadPoolExecutor(max_workers=min(len(jobs), _thread_cap())) as pool:
            parts = list(pool.map(lambda job: _run_fixed(E, N, job[1], job[0]), jobs))
        snaps = np.concatenate(parts, axis=0)
        top = int(snaps.max())
        n_groups = max(1, math.ceil(top / G))
        counts = _coarse_matrix(snaps, G, n_groups)
        ratios = counts / G
        self.group_centers_ = group_centers(n_groups, G)
        self.mean_ratios_ = ratios.mean(axis=0)
        self.std_ratios_ = ratios.std(axis=0, ddof=1)
        z = _split_chain_z(ratios)
        self.split_chain_z_ = z
        self.split_chain_agreement_ = float(np.mean(z <= 2.0))
        self.n_samples_ = snaps.shape[0]
        if self.keep_snapshots:
            self.snapshots_ = snaps
        return self

    def fit_fermi_dirac(self):
        return fit_fermi_dirac(self.group_centers_, self.mean_ratios_)


class FermiDiracFit(BaseEstimator):
    """Least-squares Fermi-Dirac curve: ``fit(centers, ratios)``, ``predict(eps)``."""

    def fit(self, X, y):
        x = np.asarray(X, dtype=float).reshape(-1)
        self.temperature_, self.chemical_potential_, self.rms_ = fit_fermi_dirac(x, y)
        return self

    def predict(self, X):
        x = np.asarray(X, dtype=float).reshape(-1)
        return _fd_curve(x, self.temperature_, self.chemical_potential_)
