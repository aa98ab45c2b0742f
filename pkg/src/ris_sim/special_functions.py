"""Modified Bessel functions of the first kind and the ratios I1/I0, I2/I0.

The ratios are the circular means of a von Mises error:
``E[cos g] = I1(k)/I0(k)`` and ``E[cos 2g] = I2(k)/I0(k)``.
"""
from __future__ import annotations

import math
from enum import Enum

import numpy as np

__all__ = [
    "BesselRatioMode",
    "KAPPA_MAX",
    "MODE_THRESHOLD",
    "bessel_i",
    "rho",
    "rho_bar",
]

KAPPA_MAX = 700.0
MODE_THRESHOLD = 1.6


class BesselRatioMode(str, Enum):
    EXACT = "exact"
    SMALL = "small"
    LARGE = "large"
    AUTO = "auto"


def _series_terms(n: int, kappa: float):
    """Yield the terms of the I_n power series."""
    half = 0.5 * kappa
    term = half**n / math.factorial(n)
    r = 0
    while True:
        yield term
        term *= half * half / ((r + 1) * (n + r + 1))
        r += 1


def _bessel_scalar(n: int, kappa: float) -> float:
    if kappa == 0.0:
        return 1.0 if n == 0 else 0.0
    total = 0.0
    for term in _series_terms(n, kappa):
        total += term
        if term <= 1e-16 * total:
            break
    return total


def bessel_i(n: int, kappa):
    """I_n(kappa) for integer ``n >= 0`` from its power series.

    Accepts a scalar or an array for ``kappa``. Raises ``OverflowError`` for
    ``kappa > 700``.
    """
    if int(n) != n or n < 0:
        raise ValueError(f"order n={n} must be a non-negative integer")
    n = int(n)
    k = np.asarray(kappa, dtype=float)
    if np.any(k < 0) or np.any(np.isnan(k)):
        raise ValueError("kappa must be >= 0")
    if np.any(k > KAPPA_MAX):
        raise OverflowError(f"kappa above overflow guard {KAPPA_MAX}")
    if k.ndim == 0:
        return _bessel_scalar(n, float(k))
    return np.vectorize(lambda x: _bessel_scalar(n, x), otypes=[float])(k)


def _check_kappa(kappa):
    k = np.asarray(kappa, dtype=float)
    if np.any(k < 0) or np.any(np.isnan(k)):
        raise ValueError("kappa must be >= 0")
    return k


def _ratio_exact(n: int, k: np.ndarray):
    if k.ndim == 0:
        kf = float(k)
        if kf == 0.0:
            return 0.0
        return _bessel_scalar(n, kf) / _bessel_scalar(0, kf)
    return np.vectorize(lambda x: _ratio_exact(n, np.asarray(x)), otypes=[float])(k)


def _rho_small(k):
    return k / 2 * (1 - k**2 / 8 + k**4 / 48 - 11 * k**6 / 3072)


def _rho_large(k):
    return 1 - 1 / (2 * k) - 1 / (8 * k**2) - 1 / (8 * k**3)


def _rho_bar_small(k):
    return k**2 / 8 * (1 - k**2 / 6 + 11 * k**4 / 384)


def _rho_bar_large(k):
    # third-order term kept as published (see README notes)
    return 1 - 2 / k + 1 / k**2 - 1 / (4 * k**3)


def _dispatch(kappa, mode, n, small, large):
    k = _check_kappa(kappa)
    mode = BesselRatioMode(mode)
    if mode is BesselRatioMode.EXACT:
        return _ratio_exact(n, k)
    if mode is BesselRatioMode.SMALL:
        out = small(k)
    elif mode is BesselRatioMode.LARGE:
        with np.errstate(divide="ignore"):
            out = large(k)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(k <= MODE_THRESHOLD, small(k), large(k))
    return float(out) if np.ndim(out) == 0 else out


def rho(kappa, mode: BesselRatioMode = BesselRatioMode.EXACT):
    """``I1(kappa)/I0(kappa)``, exactly or by its small/large-kappa expansion."""
    return _dispatch(kappa, mode, 1, _rho_small, _rho_large)


def rho_bar(kappa, mode: BesselRatioMode = BesselRatioMode.EXACT):
    """``I2(kappa)/I0(kappa)``, exactly or by its small/large-kappa expansion."""
    return _dispatch(kappa, mode, 2, _rho_bar_small, _rho_bar_large)
