"""Near-field line-of-sight channel through a planar pixel array.

The RIS lies in the plane ``z = ris_center[2]``; both terminals sit on the
positive side. Each pixel has a cosine (projected-aperture) gain pattern
``4 cos(theta)`` or, as an override, a hemispherical isotropic pattern ``2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .circular_noise import NoiseSpec, as_seed, draw_errors
from .pda import PdaParams, beta, wrap_phase

__all__ = [
    "SPEED_OF_LIGHT",
    "Scenario",
    "PixelGeometry",
    "PixelGrid",
    "ChannelResult",
    "grid_offsets",
    "build_grid",
    "link_amplitude",
    "cascaded_channel",
    "heatmap",
]

SPEED_OF_LIGHT = 299_792_458.0
PATTERNS = ("cosine", "isotropic")


@dataclass(frozen=True)
class Scenario:
    """Geometry and link budget. Pitch ``None`` means half a wavelength."""

    ap_pos: tuple = (-20.0, 15.0, 8.0)
    user_pos: tuple = (20.0, 1.5, 8.0)
    ris_center: tuple = (0.0, 10.0, 0.0)
    d_x: float | None = None
    d_y: float | None = None
    M: int = 40_000
    f_c: float = 2.4e9
    P_AP: float = 0.1
    sigma2: float = 1e-11
    nu: float = SPEED_OF_LIGHT
    pattern: str = "cosine"

    def __post_init__(self):
        for name in ("ap_pos", "user_pos", "ris_center"):
            v = tuple(float(t) for t in getattr(self, name))
            if len(v) != 3:
                raise ValueError(f"{name} must be a 3-vector")
            object.__setattr__(self, name, v)
        lam = self.nu / self.f_c
        if self.d_x is None:
            object.__setattr__(self, "d_x", lam / 2)
        if self.d_y is None:
            object.__setattr__(self, "d_y", lam / 2)
        problems = []
        n = math.isqrt(int(self.M)) if self.M >= 1 else 0
        if self.M < 1 or n * n != self.M:
            problems.append(f"M={self.M} is not a perfect square")
        if not (self.d_x > 0 and self.d_y > 0):
            problems.append("pixel pitch must be > 0")
        if not (self.f_c > 0 and self.nu > 0):
            problems.append("f_c and nu must be > 0")
        if not (self.P_AP > 0 and self.sigma2 > 0):
            problems.append("P_AP and sigma2 must be > 0")
        if self.z_ap <= 0 or self.z_user <= 0:
            problems.append("AP and user must lie above the RIS plane")
        if self.pattern not in PATTERNS:
            problems.append(f"pattern must be one of {PATTERNS}")
        if problems:
            raise ValueError("invalid Scenario: " + "; ".join(problems))

    @property
    def wavelength(self) -> float:
        return self.nu / self.f_c

    @property
    def side(self) -> int:
        return math.isqrt(int(self.M))

    @property
    def z_ap(self) -> float:
        return self.ap_pos[2] - self.ris_center[2]

    @property
    def z_user(self) -> float:
        return self.user_pos[2] - self.ris_center[2]

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)


def grid_offsets(side: int, pitch: float) -> np.ndarray:
    """Centered 1-D pixel offsets for ``side`` pixels along one axis."""
    parity = (side + 1) % 2
    m = np.arange(parity - side // 2, side // 2 + 1)
    return pitch * (m - 0.5 * parity)


@dataclass(frozen=True)
class PixelGeometry:
    m: int
    position: np.ndarray
    d_ap: float
    d_user: float
    theta_ap: float
    theta_user: float
    delay_ap: float
    delay_user: float
    phi: float


@dataclass
class PixelGrid:
    """Vectorized per-pixel geometry, row-major in (x index, y index)."""

    scenario: Scenario
    x: np.ndarray
    y: np.ndarray
    d_ap: np.ndarray
    d_user: np.ndarray
    theta_ap: np.ndarray
    theta_user: np.ndarray
    phi: np.ndarray
    amp_ap: np.ndarray = field(repr=False)
    amp_user: np.ndarray = field(repr=False)

    def __len__(self):
        return self.x.size

    @property
    def delay_ap(self):
        return self.d_ap / self.scenario.nu

    @property
    def delay_user(self):
        return self.d_user / self.scenario.nu

    @property
    def visible(self):
        return (self.amp_ap > 0) & (self.amp_user > 0)

    def pixel(self, m: int) -> PixelGeometry:
        pos = np.array([self.x[m], self.y[m], self.scenario.ris_center[2]])
        return PixelGeometry(m, pos, float(self.d_ap[m]), float(self.d_user[m]),
                             float(self.theta_ap[m]), float(self.theta_user[m]),
                             float(self.delay_ap[m]), float(self.delay_user[m]),
                             float(self.phi[m]))


def _pattern_gain(theta, pattern: str):
    theta = np.asarray(theta, dtype=float)
    front = theta < math.pi / 2
    if pattern == "cosine":
        return np.where(front, 4.0 * np.cos(theta), 0.0)
    return np.where(front, 2.0, 0.0)


def _amplitude(d, theta, scenario: Scenario):
    lam = scenario.wavelength
    gain = 4 * math.pi / lam**2 * scenario.d_x * scenario.d_y * _pattern_gain(theta, scenario.pattern)
    return lam / (4 * math.pi * np.asarray(d)) * np.sqrt(np.maximum(gain, 0.0))


def link_amplitude(pixel, scenario: Scenario, side: str = "AP"):
    """Friis amplitude of one hop for a pixel (or a whole grid).

    Pixels behind the aperture plane get amplitude 0.
    """
    if side not in ("AP", "User"):
        raise ValueError("side must be 'AP' or 'User'")
    if side == "AP":
        return _amplitude(pixel.d_ap, pixel.theta_ap, scenario)
    return _amplitude(pixel.d_user, pixel.theta_user, scenario)


def build_grid(scenario: Scenario) -> PixelGrid:
    """Pixel positions, distances, angles, designed phases and hop amplitudes."""
    n = scenario.side
    ox = grid_offsets(n, scenario.d_x)
    oy = grid_offsets(n, scenario.d_y)
    cx, cy, cz = scenario.ris_center
    x = (cx + ox[:, None] + np.zeros((1, n))).ravel()
    y = (cy + oy[None, :] + np.zeros((n, 1))).ravel()
    ax, ay, az = scenario.ap_pos
    ux, uy, uz = scenario.user_pos
    d_ap = np.sqrt((x - ax) ** 2 + (y - ay) ** 2 + (az - cz) ** 2)
    d_user = np.sqrt((x - ux) ** 2 + (y - uy) ** 2 + (uz - cz) ** 2)
    th_ap = np.arccos(np.clip((az - cz) / d_ap, -1.0, 1.0))
    th_user = np.arccos(np.clip((uz - cz) / d_user, -1.0, 1.0))
    phi = wrap_phase(-2 * math.pi * scenario.f_c * (d_ap + d_user) / scenario.nu)
    grid = PixelGrid(scenario, x, y, d_ap, d_user, th_ap, th_user, np.atleast_1d(phi),
                     np.empty(0), np.empty(0))
    grid.amp_ap = link_amplitude(grid, scenario, "AP")
    grid.amp_user = link_amplitude(grid, scenario, "User")
    return grid


@dataclass
class ChannelResult:
    h: np.ndarray
    gain: np.ndarray
    phi: np.ndarray
    beta_sq: np.ndarray

    @property
    def power(self) -> np.ndarray:
        return np.abs(self.h) ** 2


def _weights(grid: PixelGrid, phi):
    # g_m h_m exp(-j phi_m); real and positive when phi is the designed phase
    prop = 2 * math.pi * grid.scenario.f_c * (grid.d_ap + grid.d_user) / grid.scenario.nu
    return grid.amp_ap * grid.amp_user * np.exp(-1j * (prop + phi))


def cascaded_channel(scenario: Scenario, pda: PdaParams | None = None,
                     noise: NoiseSpec | None = None, phases=None, seed=0,
                     realizations: int = 1, grid: PixelGrid | None = None) -> ChannelResult:
    """End-to-end channel ``h`` for each noise realization.

    ``pda=None`` means a unit amplitude. ``phases=None`` uses the designed
    phases, otherwise the given per-pixel phases override them.
    """
    grid = grid or build_grid(scenario)
    phi = grid.phi if phases is None else np.broadcast_to(np.asarray(phases, float), grid.phi.shape)
    w = _weights(grid, phi)
    amp0 = np.ones_like(phi) if pda is None else beta(phi, pda)

    if noise is None:
        h = np.array([np.sum(w * amp0)] * realizations)
    else:
        seed = as_seed(seed)
        M = len(grid)
        chunk = max(1, (1 << 20) // M)
        parts = []
        for i, start in enumerate(range(0, realizations, chunk)):
            r = min(chunk, realizations - start)
            pse, pda_err = draw_errors(noise, (r, M), seed.generator(i))
            amp = np.ones((r, M)) if pda is None else beta(phi + pda_err, pda)
            parts.append((amp * np.exp(-1j * pse)) @ w)
        h = np.concatenate(parts)
    return ChannelResult(h=h, gain=grid.amp_ap * grid.amp_user, phi=phi, beta_sq=amp0**2)


def heatmap(grid: PixelGrid, values) -> np.ndarray:
    """Reshape per-pixel values into the ``sqrt(M) x sqrt(M)`` layout."""
    n = grid.scenario.side
    return np.asarray(values).reshape(n, n)
