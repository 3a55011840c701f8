"""Collision equation for level occupations on a uniform energy grid.

Two particles on levels ``nu`` and ``nu'`` scatter into ``nu + delta`` and
``nu' - delta`` at rate ``W(delta)``, with Pauli blocking of the final
levels.  The right-hand side is assembled by visiting every reaction tuple
``(nu, nu', delta)`` and adding the signed rate to the two levels that gain
and subtracting it from the two that lose, so particle number and energy
are conserved by construction rather than by cancellation.

Each physical reaction is visited four times (the two particles may be
listed in either order, and the reverse reaction is a tuple of its own),
so the accumulated increments are divided by four.  Tuples in which the
two incoming particles share a level, or the two outgoing ones would, are
excluded: they are forbidden for fermions.  Tuples with a participant off
the grid are skipped, which is what keeps the boundary from leaking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _sps

from ._validation import check_count, check_finite, check_positive
from .errors import DomainError, NumericError, UnsupportedError
from .thermo import SpectrumModel, solve_thermal

__all__ = [
    "KineticState",
    "CollisionKernel",
    "Trajectory",
    "collision_rhs",
    "evolve",
    "double_step",
    "equilibrium_target",
]

_BOUND_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class KineticState:
    energies: np.ndarray
    occupations: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        e = check_finite(self.energies, "energies").astype(float)
        n = check_finite(self.occupations, "occupations").astype(float)
        if e.ndim != 1 or e.shape != n.shape or e.size < 2:
            raise DomainError("energies and occupations must be matching 1-d arrays")
        if np.any(np.diff(e) <= 0):
            raise DomainError("energies must be strictly ascending")
        if n.min() < -_BOUND_SLACK or n.max() > 1 + _BOUND_SLACK:
            raise DomainError("occupations must lie in [0, 1]")
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "occupations", n)

    @property
    def spacing(self):
        d = np.diff(self.energies)
        if not np.allclose(d, d[0], rtol=1e-12, atol=0.0):
            raise UnsupportedError("collision equation needs a uniform energy grid")
        return float(d[0])

    @property
    def particle_number(self):
        return float(np.sum(self.occupations))

    @property
    def energy(self):
        return float(np.dot(self.energies, self.occupations))


@dataclass(frozen=True, eq=False)
class CollisionKernel:
    """Transfer rates ``W(k * spacing)`` for ``k = 1..K``; ``W(-x) = W(x)``."""

    rates: np.ndarray

    def __post_init__(self):
        r = check_finite(self.rates, "rates").astype(float).reshape(-1)
        if r.size < 1 or np.any(r < 0):
            raise DomainError("rates must be a non-empty array of non-negative numbers")
        object.__setattr__(self, "rates", r)

    @classmethod
    def constant(cls, window=4, rate=1.0):
        check_count(window, "window")
        check_positive(rate, "rate")
        return cls(np.full(int(window), float(rate)))

    @property
    def window(self):
        return self.rates.size

    def scaled(self, factor):
        return CollisionKernel(self.rates * check_positive(factor, "factor"))


_TUPLE_CACHE: dict = {}


def _tuples(n_levels, kernel):
    key = (n_levels, kernel.rates.tobytes())
    hit = _TUPLE_CACHE.get(key)
    if hit is not None:
        return hit
    lv = np.arange(n_levels)
    rows = []
    for k, w in enumerate(kernel.rates, start=1):
        if w == 0:
            continue
        for d in (k, -k):
            nu, nup = np.meshgrid(lv, lv, indexing="ij")
            nu, nup = nu.ravel(), nup.ravel()
            up, down = nu + d, nup - d
            keep = (nu != nup) & (up != down)
            keep &= (up >= 0) & (up < n_levels) & (down >= 0) & (down < n_levels)
            rows.append((nu[keep], nup[keep], up[keep], down[keep], np.full(keep.sum(), w)))
    parts = [np.concatenate(col) for col in zip(*rows)] if rows else [np.zeros(0, int)] * 5
    if len(_TUPLE_CACHE) > 32:
        _TUPLE_CACHE.clear()
    _TUPLE_CACHE[key] = tuple(parts)
    return _TUPLE_CACHE[key]


def _rhs(occ, tuples):
    i, j, k, l, w = tuples
    n = occ
    h = 1.0 - occ
    flux = w * (n[k] * n[l] * h[i] * h[j] - n[i] * n[j] * h[k] * h[l])
    size = occ.size
    out = np.bincount(i, flux, size) + np.bincount(j, flux, size)
    out -= np.bincount(k, flux, size) + np.bincount(l, flux, size)
    return 0.25 * out


def collision_rhs(state, kernel):
    """Time derivative of the occupations under the collision integral."""
    state.spacing  # uniform-grid check
    return _rhs(state.occupations, _tuples(state.occupations.size, kernel))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Recorded states: ``times`` and ``occupations[k]`` at ``times[k]``."""

    energies: np.ndarray
    times: np.ndarray
    occupations: np.ndarray

    @property
    def particle_number(self):
        return self.occupations.sum(axis=1)

    @property
    def energy(self):
        return self.occupations @ self.energies

    @property
    def final(self):
        return KineticState(self.energies, np.clip(self.occupations[-1], 0.0, 1.0),
                            float(self.times[-1]))

    def distance_to(self, target):
        return np.max(np.abs(self.occupations - np.asarray(target)[None, :]), axis=1)


def _rk4(y, dt, tuples):
    k1 = _rhs(y, tuples)
    k2 = _rhs(y + 0.5 * dt * k1, tuples)
    k3 = _rhs(y + 0.5 * dt * k2, tuples)
    k4 = _rhs(y + dt * k3, tuples)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def evolve(s0, kernel, dt, steps, *, record_every=1, max_halvings=20):
    """Classical fourth-order Runge-Kutta integration for ``steps`` steps of ``dt``.

    A step that pushes an occupation outside ``[-1e-9, 1 + 1e-9]`` is
    redone as two half steps (recursively, up to ``max_halvings`` times).
    """
    check_positive(dt, "dt")
    steps = check_count(steps, "steps", minimum=0)
    record_every = check_count(record_every, "record_every")
    s0.spacing
    tuples = _tuples(s0.occupations.size, kernel)
    rate = float(np.max(np.abs(_rhs(s0.occupations, tuples))))
    if dt * rate >= 0.1:
        raise DomainError(f"dt = {dt} too large: dt * max|rhs| = {dt * rate:.3g} >= 0.1")

    def advance(y, h, depth):
        trial = _rk4(y, h, tuples)
        if trial.min() >= -_BOUND_SLACK and trial.max() <= 1 + _BOUND_SLACK:
            return trial
        if depth >= max_halvings:
            raise NumericError("occupations left [0, 1] even at the smallest step",
                               estimate=trial)
        return advance(advance(y, 0.5 * h, depth + 1), 0.5 * h, depth + 1)

    y = s0.occupations.copy()
    times, records = [s0.t], [y.copy()]
    for n in range(1, steps + 1):
        y = advance(y, dt, 0)
        if n % record_every == 0 or n == steps:
            times.append(s0.t + n * dt)
            records.append(y.copy())
    return Trajectory(s0.energies, np.asarray(times), np.asarray(records))


def double_step(n_levels=64, spacing=1.0, *, full=16, half=16):
    """Initial data: occupation 1 on the lowest ``full`` levels, 1/2 on the next ``half``."""
    n_levels = check_count(n_levels, "n_levels", minimum=2)
    if full + half > n_levels:
        raise DomainError("steps do not fit on the grid")
    occ = np.zeros(n_levels)
    occ[:full] = 1.0
    occ[full:full + half] = 0.5
    return KineticState(spacing * np.arange(1, n_levels + 1), occ)


def equilibrium_target(state):
    """Fermi-Dirac occupations on the grid with the state's particle number and energy."""
    spec = SpectrumModel.discrete(state.energies)
    ts = solve_thermal(spec, state.energy, state.particle_number)
    return ts, _sps.expit(-(state.energies - ts.mu) / ts.T)
