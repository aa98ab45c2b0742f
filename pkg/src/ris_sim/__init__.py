"""Near-field RIS pixels with phase-dependent amplitudes under phase errors."""
from .circular_noise import Family, NoiseSpec, SeedSpec
from .pda import CircuitParams, PdaParams, beta
from .remaining_power import Case, RpResult

__version__ = "0.1.0"

__all__ = [
    "Case",
    "CircuitParams",
    "Family",
    "NoiseSpec",
    "PdaParams",
    "RpResult",
    "SeedSpec",
    "beta",
]
