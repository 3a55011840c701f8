"""Small argument checks shared across modules."""

from __future__ import annotations

import math
from numbers import Integral, Real

import numpy as np

from .errors import DomainError


def check_finite(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def check_positive(x, name, *, allow_zero=False):
    if not isinstance(x, Real) or not math.isfinite(float(x)):
        raise DomainError(f"{name} must be a finite real number, got {x!r}")
    if x < 0 or (x == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise DomainError(f"{name} must be {bound}, got {x!r}")
    return float(x)


def check_count(n, name, *, minimum=1):
    if isinstance(n, bool) or not isinstance(n, Integral):
        if isinstance(n, float) and n.is_integer():
            n = int(n)
        else:
            raise DomainError(f"{name} must be an integer, got {n!r}")
    if n < minimum:
        raise DomainError(f"{name} must be >= {minimum}, got {n}")
    return int(n)


def check_unit_interval(values, name="values", *, slack=0.0):
    arr = check_finite(values, name)
    if arr.size and (arr.min() < -slack or arr.max() > 1.0 + slack):
        raise DomainError(f"{name} must lie in [0, 1]")
    return arr


def check_square_symmetric(a, name="matrix", *, rtol=1e-12):
    arr = check_finite(a, name)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DomainError(f"{name} must be a square 2-d array")
    scale = max(1.0, float(np.abs(arr).max(initial=0.0)))
    if not np.allclose(arr, arr.T, rtol=0.0, atol=rtol * scale):
        raise DomainError(f"{name} must be symmetric")
    return arr
