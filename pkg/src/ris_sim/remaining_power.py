"""Remaining power ``Gamma = |E{beta(phi + pda_err) exp(-j pse_err)}|**2``.

Three independent routes are provided:

* :func:`gamma_mc`, a Monte Carlo estimator over pixels and realizations;
* :func:`gamma_oracle`, deterministic numerical integration against the
  error densities;
* :func:`gamma_closed_form`, the polynomial / Bessel-ratio approximations
  indexed by proposition id ``"3.1"`` ... ``"3.10"``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, special
from scipy.stats import qmc

from .circular_noise import Family, NoiseSpec, as_seed, draw_errors
from .pda import PdaParams, beta
from .special_functions import BesselRatioMode, rho, rho_bar

__all__ = [
    "Case",
    "RpResult",
    "PropositionMismatch",
    "OracleError",
    "PROPOSITIONS",
    "gamma_mc",
    "gamma_oracle",
    "gamma_closed_form",
    "closed_form_value",
    "closed_form_upper",
    "noise_for_prop",
    "case_for_noise",
    "gamma_convergence_study",
]


class Case(str, Enum):
    """Reflection model.

    I: constant amplitude. II: ideal amplitude ``beta(phi)``. III: amplitude
    with a single error family. IV: amplitude and phase with uniform plus
    von Mises errors.
    """

    I = "I"
    II = "II"
    III = "III"
    IV = "IV"


class PropositionMismatch(ValueError):
    """Noise model outside a proposition's assumptions."""


class OracleError(ArithmeticError):
    """Numerical integration failed to reach its tolerance."""


@dataclass
class RpResult:
    gamma: float
    method: str
    error_estimate: float = 0.0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in ("monte-carlo", "closed-form", "numeric-oracle"):
            raise ValueError(f"unknown method {self.method!r}")


def _check_case(case: Case, noise: NoiseSpec):
    case = Case(case)
    if case is Case.IV and noise.family is not Family.COMPOSITE:
        raise ValueError("Case IV requires composite noise")
    if case is Case.III and noise.family is Family.COMPOSITE:
        raise ValueError("Case III takes a single error family; use Case IV")
    return case


def case_for_noise(noise: NoiseSpec) -> Case:
    """Case implied by a noise model with a non-constant amplitude."""
    if not noise.pda_has_error:
        return Case.II
    return Case.IV if noise.family is Family.COMPOSITE else Case.III


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def _amplitude(case, pda, phi, pda_err, beta_const):
    if case is Case.I:
        return np.full(pda_err.shape, float(beta_const))
    if case is Case.II:
        return np.broadcast_to(beta(phi, pda), pda_err.shape)
    return beta(phi + pda_err, pda)


def gamma_mc(case: Case, pda: PdaParams, noise: NoiseSpec, phi=0.0, M: int = 1,
             realizations: int = 1000, seed=0, estimator: str = "power",
             beta_const: float = 1.0) -> RpResult:
    """Monte Carlo remaining power.

    ``phi`` is a shared phase or an array of ``M`` per-pixel phases.

    ``estimator="power"`` averages ``|1/M sum_m beta(.) e^{-j err}|**2`` over
    realizations, which is the array-level quantity and carries a ``Var/M``
    bias. ``estimator="coherent"`` pools every sample into one complex mean and
    squares it, which targets the per-pixel expectation directly.
    """
    case = _check_case(case, noise)
    if M < 1 or realizations < 1:
        raise ValueError("M and realizations must be >= 1")
    phi_arr = np.asarray(phi, dtype=float)
    if phi_arr.ndim == 0:
        phi_arr = np.full(M, float(phi_arr))
    elif phi_arr.shape != (M,):
        raise ValueError(f"phi has shape {phi_arr.shape}, expected ({M},)")
    if estimator not in ("power", "coherent"):
        raise ValueError(f"unknown estimator {estimator!r}")

    seed = as_seed(seed)
    chunk = max(1, (1 << 18) // M)
    per_real = []
    s_re = s_im = s_re2 = s_im2 = s_reim = 0.0
    for i, start in enumerate(range(0, realizations, chunk)):
        r = min(chunk, realizations - start)
        pse, pda_err = draw_errors(noise, (r, M), seed.generator(i))
        amp = _amplitude(case, pda, phi_arr, pda_err, beta_const)
        x = amp * np.cos(pse)
        y = -amp * np.sin(pse)
        if estimator == "power":
            per_real.append(x.mean(axis=1) ** 2 + y.mean(axis=1) ** 2)
        else:
            s_re += x.sum()
            s_im += y.sum()
            s_re2 += (x * x).sum()
            s_im2 += (y * y).sum()
            s_reim += (x * y).sum()

    if estimator == "power":
        vals = np.concatenate(per_real)
        g = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
    else:
        n = realizations * M
        mx, my = s_re / n, s_im / n
        vx = s_re2 / n - mx * mx
        vy = s_im2 / n - my * my
        cxy = s_reim / n - mx * my
        g = mx * mx + my * my
        # delta method for |mean|^2
        var = 4.0 * (mx * mx * vx + my * my * vy + 2.0 * mx * my * cxy) / n
        se = math.sqrt(max(var, 0.0))
    return RpResult(g, "monte-carlo", se,
                    {"M": M, "realizations": realizations, "estimator": estimator})


# ---------------------------------------------------------------------------
# Numerical oracle
# ---------------------------------------------------------------------------

def _vm_pdf(x, kappa):
    # scaled Bessel keeps large kappa finite
    return np.exp(kappa * (np.cos(x) - 1.0)) / (2 * math.pi * special.i0e(kappa))


def _dists(noise: NoiseSpec) -> list[tuple[str, float]]:
    out = []
    if noise.uses_uniform:
        out.append(("u", noise.tau))
    if noise.uses_von_mises:
        out.append(("vm", noise.kappa))
    return out


def _is_point_mass(d):
    return d[0] == "u" and d[1] == 0.0


def _quad_expect(fn: Callable[[float], complex], dist) -> tuple[complex, float]:
    """``E[fn(X)]`` for one scalar error by adaptive Gauss-Kronrod."""
    kind, p = dist
    if _is_point_mass(dist):
        return complex(fn(0.0)), 0.0
    if kind == "u":
        lo, hi = -p, p

        def dens(x):
            return 1.0 / (2 * p)
    else:
        lo, hi = -math.pi, math.pi

        def dens(x):
            return _vm_pdf(x, p)

    opts = dict(epsabs=1e-13, epsrel=1e-12, limit=400, points=[0.0], full_output=1)
    re = integrate.quad(lambda x: (fn(x) * dens(x)).real, lo, hi, **opts)
    im = integrate.quad(lambda x: (fn(x) * dens(x)).imag, lo, hi, **opts)
    err = re[1] + im[1]
    if err > 1e-8:
        raise OracleError(f"quadrature did not converge: dist={dist}, abserr={err:.3g}")
    return complex(re[0], im[0]), err


def _gl_nodes(dist, n):
    kind, p = dist
    if _is_point_mass(dist):
        return np.zeros(1), np.ones(1)
    x, w = leggauss(n)
    if kind == "u":
        return p * x, w / 2
    x = math.pi * x
    return x, w * math.pi * _vm_pdf(x, p)


def _tensor_expect(fn, dists, n0=32, n_max=2048, tol=1e-12) -> tuple[complex, float]:
    """``E[fn(X1, X2)]`` for two independent errors by tensor Gauss-Legendre.

    The node count doubles until successive estimates agree to ``tol``.
    """
    prev = None
    n = n0
    while n <= n_max:
        (x1, w1), (x2, w2) = (_gl_nodes(d, n) for d in dists)
        val = complex(np.einsum("i,ij,j->", w1, fn(x1[:, None], x2[None, :]), w2))
        if prev is not None and abs(val - prev) < tol:
            return val, abs(val - prev)
        prev = val
        n *= 2
    raise OracleError(f"tensor quadrature stalled at n={n_max}: last change {abs(val - prev):.3g}")


def _unit_to_dist(u, dist):
    """Map unit-cube coordinates to (value, density weight)."""
    kind, p = dist
    if kind == "u":
        return p * (2 * u - 1), np.ones_like(u)
    x = math.pi * (2 * u - 1)
    return x, 2 * math.pi * _vm_pdf(x, p)


def _qmc_expect(fn, dists, log2n=16, reps=8, seed=12345) -> tuple[complex, float]:
    """Randomized Sobol estimate of ``E[fn(*X)]`` over independent errors."""
    ests = []
    for r in range(reps):
        u = qmc.Sobol(len(dists), scramble=True, seed=seed + r).random_base2(log2n)
        xs, w = [], 1.0
        for j, d in enumerate(dists):
            v, wj = _unit_to_dist(u[:, j], d)
            xs.append(v)
            w = w * wj
        ests.append(np.mean(fn(*xs) * w))
    ests = np.asarray(ests)
    return complex(ests.mean()), float(np.abs(ests - ests.mean()).std(ddof=1) / math.sqrt(reps))


def _oracle_mean(case: Case, amp: Callable, noise: NoiseSpec) -> tuple[complex, float, str]:
    """``E[amp(pda_err) exp(-j pse_err)]`` with ``amp`` vectorized."""
    iota = noise.iota
    s = math.sqrt(max(0.0, 1.0 - iota * iota))

    def phasor(x):
        return np.exp(-1j * x)

    dists = _dists(noise)
    # E[exp(-j pse_err)] factor, product over families
    def phase_factor():
        val, err = 1.0 + 0j, 0.0
        for d in dists:
            v, e = _quad_expect(phasor, d)
            val *= v
            err += e
        return val, err

    if case is Case.II or not noise.pda_has_error:
        pf, err = phase_factor()
        return complex(amp(np.zeros(1))[0]) * pf, err, "quad-1d"

    if case is Case.III:
        d = dists[0]
        if iota == 1.0 or _is_point_mass(d):
            v, e = _quad_expect(lambda x: amp(np.asarray(x)) * np.exp(-1j * x), d)
            return v, e, "quad-1d"
        if iota == 0.0:
            a, e1 = _quad_expect(lambda x: complex(amp(np.asarray(x))), d)
            pf, e2 = _quad_expect(phasor, d)
            return a * pf, e1 + e2, "quad-1d"
        v, e = _tensor_expect(lambda x, y: amp(iota * x + s * y) * np.exp(-1j * x), [d, d])
        return v, e, "gauss-legendre-2d"

    # Case IV: composite, dists = [uniform, von Mises]
    du, dv = dists
    if iota == 1.0:
        v, e = _tensor_expect(lambda x, y: amp(x + y) * np.exp(-1j * (x + y)), [du, dv])
        return v, e, "gauss-legendre-2d"
    if iota == 0.0:
        a, e1 = _tensor_expect(lambda x, y: amp(x + y) + 0j, [du, dv])
        pf, e2 = phase_factor()
        return a * pf, e1 + e2, "gauss-legendre-2d"

    def f4(d1, g1, d2, g2):
        return amp(iota * (d1 + g1) + s * (d2 + g2)) * np.exp(-1j * (d1 + g1))

    v, e = _qmc_expect(f4, [du, dv, du, dv])
    return v, e, "sobol-4d"


def gamma_oracle(case: Case, pda: PdaParams, noise: NoiseSpec, phi=0.0,
                 beta_const: float = 1.0) -> RpResult:
    """Remaining power by numerical integration over the error densities."""
    case = _check_case(case, noise)
    if case is Case.I:
        def amp(x):
            return np.full(np.shape(x), float(beta_const))
        eff = noise.with_(pda_has_error=False)
    elif case is Case.II:
        def amp(x):
            return beta(phi + np.asarray(x, dtype=float), pda) * np.ones(np.shape(x))
        eff = noise.with_(pda_has_error=False)
    else:
        def amp(x):
            return beta(phi + np.asarray(x, dtype=float), pda)
        eff = noise
    mean, err, how = _oracle_mean(case, amp, eff)
    g = abs(mean) ** 2
    return RpResult(g, "numeric-oracle", 2 * abs(mean) * err + err * err, {"rule": how})


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------

# prop id -> (case, family, iota or None, minimum kappa)
PROPOSITIONS: dict[str, tuple[Case, Family, float | None, float]] = {
    "3.1": (Case.I, Family.UNIFORM, None, 0.0),
    "3.2": (Case.I, Family.VON_MISES, None, 1.0),
    "3.3": (Case.II, Family.UNIFORM, None, 0.0),
    "3.4": (Case.II, Family.VON_MISES, None, 1.0),
    "3.5": (Case.III, Family.UNIFORM, 1.0, 0.0),
    "3.6": (Case.III, Family.VON_MISES, 1.0, 1.0),
    "3.7": (Case.III, Family.UNIFORM, 0.0, 0.0),
    "3.8": (Case.III, Family.VON_MISES, 0.0, 1.0),
    "3.9": (Case.IV, Family.COMPOSITE, 1.0, 1.6),
    "3.10": (Case.IV, Family.COMPOSITE, 0.0, 1.0),
}


def _prop(prop_id) -> str:
    key = str(prop_id)
    if key not in PROPOSITIONS:
        raise PropositionMismatch(f"unknown proposition {prop_id!r}")
    return key


def noise_for_prop(prop_id, noise: NoiseSpec) -> NoiseSpec:
    """Adjust ``noise`` flags (iota, amplitude error) to match a proposition.

    The family and its parameters are kept; a family mismatch still raises.
    """
    case, fam, iota, _ = PROPOSITIONS[_prop(prop_id)]
    if noise.family is not fam:
        raise PropositionMismatch(
            f"proposition {prop_id} needs {fam.value} noise, got {noise.family.value}")
    if case in (Case.I, Case.II):
        return noise.with_(pda_has_error=False)
    return noise.with_(pda_has_error=True, iota=iota)


def _validate(prop_id: str, noise: NoiseSpec):
    case, fam, iota, kmin = PROPOSITIONS[prop_id]
    if noise.family is not fam:
        raise PropositionMismatch(
            f"proposition {prop_id} needs {fam.value} noise, got {noise.family.value}")
    if case is Case.II and noise.pda_has_error:
        raise PropositionMismatch(f"proposition {prop_id} assumes an error-free amplitude")
    if case in (Case.III, Case.IV):
        if not noise.pda_has_error:
            raise PropositionMismatch(f"proposition {prop_id} needs an amplitude error")
        if noise.iota != iota:
            raise PropositionMismatch(
                f"proposition {prop_id} holds at iota={iota:g}, got {noise.iota:g}")
    if fam is not Family.UNIFORM and noise.kappa < kmin:
        raise PropositionMismatch(
            f"proposition {prop_id} requires kappa >= {kmin:g}, got {noise.kappa:g}")
    return case


def _poly_uniform_sq(t):
    return 1 - t**2 / 3 + 2 * t**4 / 45 - t**6 / 360 + t**8 / 14400


def _sinc6(t):
    return 1 - t**2 / 6 + t**4 / 120


def closed_form_value(prop_id, pda: PdaParams, noise: NoiseSpec, phi=0.0,
                      beta_const: float = 1.0,
                      mode: BesselRatioMode = BesselRatioMode.AUTO):
    """Evaluate a proposition's closed form; vectorized over ``phi``."""
    pid = _prop(prop_id)
    _validate(pid, noise)
    phi = np.asarray(phi, dtype=float)
    b = pda.b
    x = phi - pda.c
    sx, cx = np.sin(x), np.cos(x)
    t, k = noise.tau, noise.kappa
    r = rho(k, mode) if noise.uses_von_mises else None
    rb = rho_bar(k, mode) if noise.uses_von_mises else None

    if pid == "3.1":
        out = beta_const**2 * _poly_uniform_sq(t) * np.ones_like(phi)
    elif pid == "3.2":
        out = beta_const**2 * r**2 * np.ones_like(phi)
    elif pid in ("3.3", "3.4"):
        zeta = (1 - b) ** 2 / 4 * sx**2 + (1 - b**2) / 2 * sx + (1 + b) ** 2 / 4
        out = zeta * (_poly_uniform_sq(t) if pid == "3.3" else r**2)
    elif pid == "3.5":
        e1 = (1 - b) / 2 * sx * (1 - t**2 / 3 + t**4 / 15 - 2 * t**6 / 315)
        e2 = (1 + b) / 2 * (1 - t**2 / 6 + t**4 / 120 - t**6 / 5040)
        e3 = (1 - b) ** 2 / 4 * (t**2 / 3 - t**4 / 15 + 2 * t**6 / 315) ** 2 * cx**2
        out = (e1 + e2) ** 2 + e3
    elif pid == "3.6":
        e1 = (1 + b) / 2 * r
        e2 = (1 - b) / 4 * sx * (1 + rb)
        e3 = (1 - b) ** 2 / 16 * cx**2 * (1 - rb) ** 2
        out = (e1 + e2) ** 2 + e3
    elif pid == "3.7":
        e2 = _sinc6(t)
        e1 = (1 - b) / 2 * sx * e2 + (1 + b) / 2
        out = e1**2 * e2**2
    elif pid == "3.8":
        eta = (1 - b) / 2 * sx * r + (1 + b) / 2
        out = eta**2 * r**2
    elif pid == "3.9":
        A = 1 - t**2 / 3 + t**4 / 15 - 2 * t**6 / 315
        B = t**2 / 3 - t**4 / 15 + 2 * t**6 / 315
        K2 = 1 / (8 * k) + 1 / (64 * k**2) + 1 / (128 * k**3)
        K1 = 1 - K2
        e1, e2, e3, e4 = A * K1, B * K1, A * K2, B * K2
        e5 = _sinc6(t) * (1 - 1 / (2 * k) - 1 / (8 * k**2) - 1 / (8 * k**3))
        out = ((1 - b) * sx / 2 * (e1 - e4) + (1 + b) / 2 * e5) ** 2 \
            + (1 - b) ** 2 * cx**2 / 4 * (e2 + e3) ** 2
    else:  # 3.10
        eta = _sinc6(t) * r
        out = ((1 - b) / 2 * sx * eta + (1 + b) / 2) ** 2 * eta**2
    return float(out) if np.ndim(out) == 0 else out


def closed_form_upper(prop_id, pda: PdaParams, noise: NoiseSpec,
                      beta_const: float = 1.0,
                      mode: BesselRatioMode = BesselRatioMode.AUTO) -> float:
    """Closed form evaluated at the amplitude peak ``phi_U``."""
    return float(closed_form_value(prop_id, pda, noise, pda.phi_U, beta_const, mode))


def gamma_closed_form(prop_id, pda: PdaParams, noise: NoiseSpec, phi=0.0,
                      beta_const: float = 1.0,
                      mode: BesselRatioMode = BesselRatioMode.AUTO) -> RpResult:
    """Closed-form remaining power, with the ``phi_U`` variant in ``info``."""
    g = closed_form_value(prop_id, pda, noise, phi, beta_const, mode)
    upper = closed_form_upper(prop_id, pda, noise, beta_const, mode)
    return RpResult(g, "closed-form", 0.0, {"prop": str(prop_id), "upper_phi_U": upper})


# ---------------------------------------------------------------------------
# Convergence in the number of pixels
# ---------------------------------------------------------------------------

def _phase_grid(pda: PdaParams, M: int) -> np.ndarray:
    lo, hi = pda.domain
    return lo + (np.arange(M) + 0.5) * (hi - lo) / M


def gamma_convergence_study(pda: PdaParams, noise: NoiseSpec, M_grid,
                            realizations: int = 100, seed=0) -> list[dict]:
    """Tabulate ``Gamma_M`` against its large-array limit ``Gamma_inf``.

    Pixel phases form a midpoint grid over ``[-pi/2 - c, pi/2 + c]``; the
    limit averages the amplitude over the same interval by Gauss-Legendre.
    """
    case = case_for_noise(noise)
    lo, hi = pda.domain
    xg, wg = leggauss(256)
    phis = 0.5 * (hi - lo) * xg + 0.5 * (hi + lo)
    wg = wg / 2

    def amp(x):
        x = np.asarray(x, dtype=float)
        return np.tensordot(wg, beta(phis.reshape((-1,) + (1,) * x.ndim) + x, pda), axes=1)

    mean, _, _ = _oracle_mean(case, amp, noise)
    g_inf = abs(mean) ** 2

    seed = as_seed(seed)
    rows = []
    for i, M in enumerate(M_grid):
        res = gamma_mc(case, pda, noise, _phase_grid(pda, int(M)), int(M),
                       realizations, seed.substream(seed.stream_id * 1000 + i))
        rows.append({"M": int(M), "gamma_M": res.gamma, "gamma_inf": g_inf,
                     "gap": abs(res.gamma - g_inf), "stderr": res.error_estimate})
    return rows
