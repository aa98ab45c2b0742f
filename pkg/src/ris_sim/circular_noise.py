"""Circular phase-error generators.

Uniform errors model quantization and hardware aging, von Mises errors model
imperfect phase estimation. Errors inside the amplitude term are coupled to the
errors inside the phase term through a correlation coefficient ``iota``::

    pda_error = iota * pse_error + sqrt(1 - iota**2) * fresh_draw

All samplers are pure functions of a :class:`SeedSpec`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

__all__ = [
    "Family",
    "NoiseSpec",
    "SeedSpec",
    "as_seed",
    "sample_uniform",
    "sample_von_mises",
    "correlated_pair",
    "draw_errors",
]


class Family(str, Enum):
    UNIFORM = "uniform"
    VON_MISES = "vonmises"
    COMPOSITE = "composite"


@dataclass(frozen=True)
class NoiseSpec:
    """Phase-error model for one pixel.

    ``tau`` is the half-width of the uniform error, ``kappa`` the von Mises
    concentration. A composite family adds a uniform and a von Mises error in
    both the phase term and (when ``pda_has_error``) the amplitude term.
    """

    family: Family = Family.UNIFORM
    tau: float = 0.0
    kappa: float = 0.0
    iota: float = 0.0
    pda_has_error: bool = True

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        problems = []
        if not 0.0 <= self.tau <= math.pi / 2:
            problems.append(f"tau={self.tau} outside [0, pi/2]")
        if not self.kappa >= 0.0:
            problems.append(f"kappa={self.kappa} must be >= 0")
        if not 0.0 <= self.iota <= 1.0:
            problems.append(f"iota={self.iota} outside [0, 1]")
        if problems:
            raise ValueError("invalid NoiseSpec: " + "; ".join(problems))

    @property
    def uses_uniform(self) -> bool:
        return self.family in (Family.UNIFORM, Family.COMPOSITE)

    @property
    def uses_von_mises(self) -> bool:
        return self.family in (Family.VON_MISES, Family.COMPOSITE)

    def with_(self, **changes) -> "NoiseSpec":
        return replace(self, **changes)


@dataclass(frozen=True)
class SeedSpec:
    """Reproducible random stream: ``(master_seed, stream_id)`` -> generator.

    Substreams are derived through :class:`numpy.random.SeedSequence` with the
    stream id as spawn key, so distinct ids give independent streams and no
    generator is ever shared between workers.
    """

    master_seed: int = 0
    stream_id: int = 0

    def generator(self, *subkeys: int) -> np.random.Generator:
        """Generator for this stream, or for a nested child when ``subkeys`` given."""
        key = (int(self.stream_id),) + tuple(int(k) for k in subkeys)
        seq = np.random.SeedSequence(entropy=int(self.master_seed) & (2**64 - 1),
                                     spawn_key=key)
        return np.random.Generator(np.random.PCG64(seq))

    def substream(self, stream_id: int) -> "SeedSpec":
        return SeedSpec(self.master_seed, stream_id)


def as_seed(seed) -> SeedSpec:
    """Coerce an int or SeedSpec into a SeedSpec."""
    return seed if isinstance(seed, SeedSpec) else SeedSpec(int(seed))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, SeedSpec):
        return seed.generator()
    return SeedSpec(int(seed)).generator()


def sample_uniform(tau: float, n: int, seed=0) -> np.ndarray:
    """``n`` i.i.d. draws from UF[-tau, tau]."""
    if not 0.0 <= tau <= math.pi / 2:
        raise ValueError(f"tau={tau} outside [0, pi/2]")
    rng = _rng(seed)
    if tau == 0.0:
        return np.zeros(n)
    return rng.uniform(-tau, tau, size=n)


def _best_fisher(kappa: float, n: int, rng: np.random.Generator) -> np.ndarray:
    # Best & Fisher (1979): wrapped-Cauchy envelope with acceptance test.
    if kappa < 1e-6:
        r = 1.0 / kappa + kappa
    else:
        t = 1.0 + math.sqrt(1.0 + 4.0 * kappa * kappa)
        rho = (t - math.sqrt(2.0 * t)) / (2.0 * kappa)
        r = (1.0 + rho * rho) / (2.0 * rho)

    out = np.empty(n)
    filled = 0
    while filled < n:
        need = n - filled
        # acceptance rate is >= 0.65 for every kappa
        batch = max(64, int(need * 1.6))
        u1, u2, u3 = rng.random((3, batch))
        z = np.cos(np.pi * u1)
        f = (1.0 + r * z) / (r + z)
        c = kappa * (r - f)
        accept = (c * (2.0 - c) - u2 > 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            accept |= np.log(c / u2) + 1.0 - c >= 0.0
        theta = np.sign(u3 - 0.5) * np.arccos(np.clip(f, -1.0, 1.0))
        theta = theta[accept][:need]
        out[filled:filled + theta.size] = theta
        filled += theta.size
    return out


def sample_von_mises(kappa: float, n: int, seed=0) -> np.ndarray:
    """``n`` i.i.d. draws from VM(0, kappa) on [-pi, pi]."""
    if not kappa >= 0.0:
        raise ValueError(f"kappa={kappa} must be >= 0")
    rng = _rng(seed)
    if kappa == 0.0:
        return rng.uniform(-math.pi, math.pi, size=n)
    return _best_fisher(float(kappa), n, rng)


def correlated_pair(base, iota: float, independent) -> np.ndarray:
    """Return ``iota * base + sqrt(1 - iota**2) * independent`` elementwise.

    For von Mises inputs with 0 < iota < 1 the result is not von Mises
    distributed; the linear construction is applied literally.
    """
    base = np.asarray(base, dtype=float)
    independent = np.asarray(independent, dtype=float)
    if base.shape != independent.shape:
        raise ValueError(f"length mismatch: {base.shape} vs {independent.shape}")
    if not 0.0 <= iota <= 1.0:
        raise ValueError(f"iota={iota} outside [0, 1]")
    if iota == 1.0:
        return base.copy()
    if iota == 0.0:
        return independent.copy()
    return iota * base + math.sqrt(1.0 - iota * iota) * independent


def _draw_family(family: Family, noise: NoiseSpec, shape, rng):
    n = int(np.prod(shape))
    if family is Family.UNIFORM:
        return sample_uniform(noise.tau, n, rng).reshape(shape)
    return sample_von_mises(noise.kappa, n, rng).reshape(shape)


def draw_errors(noise: NoiseSpec, shape, seed=0) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``(pse_error, pda_error)`` arrays of the given shape.

    The PSE error multiplies the phase term, the PDA error shifts the amplitude
    argument. Without ``pda_has_error`` the second array is all zeros.
    """
    rng = _rng(seed)
    shape = (shape,) if np.isscalar(shape) else tuple(shape)
    families = []
    if noise.uses_uniform:
        families.append(Family.UNIFORM)
    if noise.uses_von_mises:
        families.append(Family.VON_MISES)

    pse = np.zeros(shape)
    pda = np.zeros(shape)
    for fam in families:
        base = _draw_family(fam, noise, shape, rng)
        pse += base
        if noise.pda_has_error:
            # always consume the fresh draw so runs at different iota share streams
            fresh = _draw_family(fam, noise, shape, rng)
            pda += correlated_pair(base, noise.iota, fresh)
    return pse, pda
