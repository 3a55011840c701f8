"""Bounds on the quantum recurrence time of a correlation matrix.

The deviation ``||M(t) - M(0)||`` equals ``4 I(t)`` with

    I(t) = sum_{nu != nu'} |C_{nu nu'}|^2 sin^2((e_nu - e_nu') t / 2 hbar).

Replacing every weight by the smallest (largest) one gives a lower (upper)
estimate of the first return time, obtained by sweeping a ``d_F``-sphere
through the integer lattice.  Both estimates grow like ``Gamma(d_F / 2)``
and overflow doubles beyond a few hundred pairs, so logarithms are always
computed and the linear values are reported only when representable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _sps

from ._validation import check_count, check_finite, check_positive
from .errors import DomainError

__all__ = [
    "RecurrenceInput",
    "RecurrenceBounds",
    "recurrence_bounds",
    "derive_input",
    "overlap_function",
    "first_return_on_grid",
    "LINEAR_LIMIT",
]

# above this many pairs the Gamma factor alone is close to overflowing
LINEAR_LIMIT = 300
_TINY, _HUGE = 1e-290, 1e290


@dataclass(frozen=True)
class RecurrenceInput:
    d_F: int
    c_min: float
    c_max: float
    delta_eps: float
    eps_rec: float
    hbar: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "d_F", check_count(self.d_F, "d_F"))
        check_positive(self.c_min, "c_min")
        check_positive(self.c_max, "c_max")
        if self.c_min > self.c_max:
            raise DomainError("c_min must not exceed c_max")
        check_positive(self.delta_eps, "delta_eps")
        check_positive(self.eps_rec, "eps_rec")
        check_positive(self.hbar, "hbar")


@dataclass(frozen=True)
class RecurrenceBounds:
    ln_t_minus: float
    ln_t_plus: float
    t_minus: float | None
    t_plus: float | None

    @property
    def log10_t_minus(self):
        return self.ln_t_minus / math.log(10.0)

    @property
    def log10_t_plus(self):
        return self.ln_t_plus / math.log(10.0)

    def as_dict(self):
        return {
            "t_minus": self.t_minus,
            "t_plus": self.t_plus,
            "log10_t_minus": self.log10_t_minus,
            "log10_t_plus": self.log10_t_plus,
        }


def _ln_bound(inp, amplitude):
    d = inp.d_F
    return (
        math.log(2.0 * math.pi * inp.hbar / inp.delta_eps)
        - 0.5 * math.log(d)
        + 0.5 * (d - 1) * math.log(4.0 * math.pi * amplitude**2 / inp.eps_rec)
        + float(_sps.gammaln(0.5 * (d + 1)))
    )


def _linear_bound(inp, amplitude, ln_val):
    d = inp.d_F
    power = (4.0 * math.pi * amplitude**2 / inp.eps_rec) ** (0.5 * (d - 1))
    gamma = float(_sps.gamma(0.5 * (d + 1)))
    # the factors can leave the double range even when their product does not
    if not (_TINY < power < _HUGE and gamma < _HUGE):
        return math.exp(ln_val)
    return 2.0 * math.pi * inp.hbar / inp.delta_eps / math.sqrt(d) * power * gamma


def recurrence_bounds(inp):
    """Lower and upper recurrence-time estimates ``(t_minus, t_plus)``.

    Linear values are ``None`` when ``d_F`` exceeds :data:`LINEAR_LIMIT` or
    the value does not fit in a double; the logarithms are always set.
    """
    ln_lo, ln_hi = _ln_bound(inp, inp.c_min), _ln_bound(inp, inp.c_max)
    lin = inp.d_F <= LINEAR_LIMIT

    def linear(amplitude, ln_val):
        if not lin or not -700.0 < ln_val < 700.0:
            return None
        return _linear_bound(inp, amplitude, ln_val)

    return RecurrenceBounds(ln_lo, ln_hi, linear(inp.c_min, ln_lo), linear(inp.c_max, ln_hi))


def _pairs(table, energies):
    c = np.abs(np.asarray(table))
    check_finite(c, "table")
    e = check_finite(energies, "energies").astype(float)
    if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] != e.size:
        raise DomainError("table must be square and match the energies")
    mask = c != 0
    np.fill_diagonal(mask, False)
    nu, nup = np.nonzero(mask)
    return c[nu, nup], e[nu] - e[nup]


def derive_input(table, energies, eps_rec, hbar=1.0):
    """Recurrence input from a coefficient table over level pairs.

    ``d_F`` counts ordered pairs ``nu != nu'`` with nonzero coefficient;
    ``delta_eps`` is the root-mean-square level difference over them.
    """
    amp, gaps = _pairs(table, energies)
    if amp.size == 0:
        raise DomainError("no off-diagonal coefficients: nothing can recur")
    return RecurrenceInput(
        d_F=int(amp.size),
        c_min=float(amp.min()),
        c_max=float(amp.max()),
        delta_eps=float(np.sqrt(np.mean(gaps**2))),
        eps_rec=eps_rec,
        hbar=hbar,
    )


def overlap_function(table, energies, t, hbar=1.0):
    """``I(t)`` evaluated on an array of times."""
    amp, gaps = _pairs(table, energies)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    phase = np.outer(t, gaps) / (2.0 * hbar)
    return np.sin(phase) ** 2 @ amp**2


def first_return_on_grid(table, energies, eps_rec, t_max, n_points=200_001, hbar=1.0):
    """First grid time with ``4 I(t) <= eps_rec`` and a nontrivial phase winding.

    A return counts only when at least one phase
    ``(e_nu - e_nu') t / (2 pi hbar)`` is closest to a nonzero integer;
    times where all of them are still nearest to zero belong to the
    initial basin.  Returns ``None`` when no return is found.
    """
    check_positive(t_max, "t_max")
    n_points = check_count(n_points, "n_points", minimum=2)
    amp, gaps = _pairs(table, energies)
    for t in np.array_split(np.linspace(0.0, t_max, n_points), max(1, n_points // 50_000)):
        winding = np.outer(t, gaps) / (2.0 * math.pi * hbar)
        dev = 4.0 * (np.sin(math.pi * winding) ** 2 @ amp**2)
        nontrivial = np.any(np.rint(winding) != 0, axis=1)
        hit = np.nonzero((dev <= eps_rec) & nontrivial)[0]
        if hit.size:
            return float(t[hit[0]])
    return None
