"""Pixel reflection model: equivalent circuit, phase-dependent amplitude, feasible sets."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .circular_noise import NoiseSpec, draw_errors

__all__ = [
    "CircuitParams",
    "PdaParams",
    "BoundsReport",
    "FeasibleSet",
    "circuit_reflection",
    "circuit_curve",
    "fit_pda",
    "wrap_phase",
    "beta",
    "beta_bounds_check",
    "feasible_set",
]


@dataclass(frozen=True)
class CircuitParams:
    """Equivalent circuit of one pixel (all values SI)."""

    L1: float = 2.5e-9
    L2: float = 0.7e-9
    C: float = 0.47e-12
    R: float = 2.5
    f_c: float = 2.4e9
    Z0: float = 377.0

    def __post_init__(self):
        bad = [k for k in ("L1", "L2", "C", "R", "f_c", "Z0") if not getattr(self, k) > 0]
        if bad:
            raise ValueError("CircuitParams fields must be > 0: " + ", ".join(bad))


@dataclass(frozen=True)
class PdaParams:
    """Amplitude model ``beta(phi) = (1-b)*((sin(phi-c)+1)/2)**a + b``."""

    a: float = 1.0
    b: float = 0.2
    c: float = 0.43 * math.pi

    def __post_init__(self):
        problems = []
        if not self.a >= 1.0:
            problems.append(f"a={self.a} must be >= 1")
        if not 0.0 <= self.b <= 1.0:
            problems.append(f"b={self.b} outside [0, 1]")
        if not 0.0 < self.c <= math.pi / 2:
            problems.append(f"c={self.c} outside (0, pi/2]")
        if problems:
            raise ValueError("invalid PdaParams: " + "; ".join(problems))

    @property
    def phi_L(self) -> float:
        return -math.pi / 2 + self.c

    @property
    def phi_U(self) -> float:
        return math.pi / 2 + self.c

    @property
    def domain(self) -> tuple[float, float]:
        return (-math.pi / 2 - self.c, math.pi / 2 + self.c)

    def linear(self) -> "PdaParams":
        """The ``a = 1`` model, an upper envelope for any ``a >= 1``."""
        return PdaParams(1.0, self.b, self.c)


def circuit_reflection(params: CircuitParams, C=None):
    """Complex reflection coefficient of the pixel circuit.

    ``C`` overrides ``params.C`` and may be an array (capacitance sweep).
    Raises ``ZeroDivisionError`` if ``Z + Z0`` vanishes.
    """
    cap = np.asarray(params.C if C is None else C, dtype=float)
    w = 2 * math.pi * params.f_c
    zb = 1j * w * params.L2 + 1.0 / (1j * w * cap) + params.R
    z = 1j * w * params.L1 * zb / (1j * w * params.L1 + zb)
    den = z + params.Z0
    if np.any(np.abs(den) < 1e-300):
        raise ZeroDivisionError("singular circuit: Z + Z0 = 0")
    out = (z - params.Z0) / den
    return complex(out) if out.ndim == 0 else out


def circuit_curve(params: CircuitParams, C_grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sweep capacitance; return ``(phase, amplitude, reflection)``."""
    refl = np.atleast_1d(circuit_reflection(params, C_grid))
    return np.arctan2(refl.imag, refl.real), np.abs(refl), refl


def wrap_phase(phi, pda: PdaParams | None = None):
    """Reduce ``phi`` modulo 2*pi.

    Without ``pda`` the result lies in [-pi, pi). With ``pda`` it lies in the
    model's principal domain ``[-pi/2 - c, 3*pi/2 - c)``.
    """
    phi = np.asarray(phi, dtype=float)
    lo = -math.pi if pda is None else pda.domain[0]
    out = np.mod(phi - lo, 2 * math.pi) + lo
    return float(out) if out.ndim == 0 else out


def beta(phi, pda: PdaParams):
    """Phase-dependent amplitude in ``[b, 1]``; 2*pi-periodic in ``phi``."""
    phi = np.asarray(phi, dtype=float)
    s = np.clip((np.sin(phi - pda.c) + 1.0) / 2.0, 0.0, 1.0)
    out = (1.0 - pda.b) * s**pda.a + pda.b
    return float(out) if out.ndim == 0 else out


def fit_pda(phase, amplitude, x0: PdaParams | None = None) -> tuple[PdaParams, float]:
    """Least-squares fit of ``(a, b, c)`` to a sampled amplitude curve.

    Returns the fitted parameters and the max absolute amplitude deviation.
    """
    phase = np.asarray(phase, dtype=float)
    amplitude = np.asarray(amplitude, dtype=float)
    x0 = x0 or PdaParams()

    def resid(p):
        return beta(phase, PdaParams(*p)) - amplitude

    sol = least_squares(
        resid,
        x0=[x0.a, x0.b, x0.c],
        bounds=([1.0, 0.0, 1e-6], [50.0, 1.0, math.pi / 2]),
        method="trf",
    )
    fitted = PdaParams(*map(float, sol.x))
    return fitted, float(np.max(np.abs(resid(sol.x))))


@dataclass
class BoundsReport:
    max_violation: float
    n_points: int
    lower: float = field(default=0.0)
    upper: float = field(default=0.0)

    @property
    def ok(self) -> bool:
        return self.max_violation <= 1e-12


def beta_bounds_check(pda: PdaParams, grid=None) -> BoundsReport:
    """Check ``b <= beta(a) <= beta(a=1) <= 1`` pointwise on ``grid``."""
    if grid is None:
        grid = np.linspace(pda.phi_L, pda.phi_U, 10_000)
    grid = np.asarray(grid, dtype=float)
    bt = beta(grid, pda)
    bl = beta(grid, pda.linear())
    viol = np.concatenate([pda.b - bt, bt - bl, bl - 1.0])
    return BoundsReport(
        max_violation=float(max(0.0, viol.max())),
        n_points=grid.size,
        lower=float(bt.min()),
        upper=float(bl.max()),
    )


@dataclass
class FeasibleSet:
    phi: np.ndarray
    locus: np.ndarray
    signed_area: float

    @property
    def area(self) -> float:
        return abs(self.signed_area)


def _shoelace(z: np.ndarray) -> float:
    x, y = z.real, z.imag
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def feasible_set(pda: PdaParams, noise: NoiseSpec | None = None, resolution: int = 4096,
                 draws: int = 100_000, seed=0) -> FeasibleSet:
    """Locus of ``E[beta(phi + pda_err) exp(-j(phi + pse_err))]`` over a full turn.

    The expectation is a Monte Carlo average over ``draws`` shared error
    samples. PDA errors are snapped to the phase grid so the whole locus is one
    circular convolution.
    """
    if resolution < 64:
        raise ValueError("resolution must be >= 64")
    n = int(resolution)
    phi = pda.domain[0] + 2 * math.pi * np.arange(n) / n
    b = beta(phi, pda)
    if noise is None:
        g = b.astype(complex)
    else:
        pse, pda_err = draw_errors(noise, draws, seed)
        k = np.rint(pda_err * n / (2 * math.pi)).astype(np.int64) % n
        w = np.bincount(k, weights=np.cos(pse), minlength=n) \
            - 1j * np.bincount(k, weights=np.sin(pse), minlength=n)
        w /= draws
        w_rev = np.roll(w[::-1], 1)
        g = np.fft.ifft(np.fft.fft(b) * np.fft.fft(w_rev))
    z = g * np.exp(-1j * phi)
    return FeasibleSet(phi=phi, locus=z, signed_area=_shoelace(z))
