"""Experiment runners that turn a config into CSV tables plus a JSON manifest.

CSV files start with ``# schema=1``; numbers are written with a fixed format
and no timestamps, so identical configs give byte-identical tables.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import subprocess
import time
from pathlib import Path

import numpy as np

from .circular_noise import NoiseSpec
from .config import ExperimentConfig
from .nf_channel import build_grid, cascaded_channel, heatmap
from .pda import PdaParams, beta, circuit_curve, feasible_set, fit_pda
from .remaining_power import (
    PROPOSITIONS,
    Case,
    closed_form_value,
    gamma_convergence_study,
    gamma_mc,
    gamma_oracle,
    noise_for_prop,
)
from .se_bounds import ORACLE_AXES, se_chain, se_sweep

__all__ = ["SCHEMA", "Table", "run", "write_csv"]

SCHEMA = 1


class Table:
    """Rows of dicts (record table) or a 2-D array (matrix table)."""

    def __init__(self, rows=None, matrix=None):
        self.rows = rows
        self.matrix = matrix


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return format(v, ".12g")
    return str(v)


def write_csv(path: Path, table: Table) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema={SCHEMA}\n")
        w = csv.writer(fh, lineterminator="\n")
        if table.matrix is not None:
            for row in np.asarray(table.matrix):
                w.writerow([_fmt(v) for v in row])
            return
        rows = table.rows or []
        cols = []
        for r in rows:
            cols.extend(k for k in r if k not in cols)
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in cols])


def _linspace(spec):
    lo, hi, n = spec
    return np.linspace(float(lo), float(hi), int(n))


def _default_prop_noise(cfg: ExperimentConfig):
    """Noise matching the configured proposition, keeping configured magnitudes."""
    pid = str(cfg.run["prop"])
    fam = PROPOSITIONS[pid][1]
    nz = cfg.noise.with_(family=fam)
    return pid, noise_for_prop(pid, nz)


# ---------------------------------------------------------------------------

def exp_pda_curve(cfg: ExperimentConfig) -> dict[str, Table]:
    pda = cfg.pda
    phi = np.linspace(*pda.domain, 721)
    base = [{"phi": p, "beta": b, "beta_a1": bl}
            for p, b, bl in zip(phi, beta(phi, pda), beta(phi, pda.linear()))]
    fam = []
    for a in (1.0, 2.0, 3.0, 4.0):
        q = PdaParams(a, pda.b, pda.c)
        fam += [{"family": "a", "value": a, "phi": p, "beta": v} for p, v in zip(phi, beta(phi, q))]
    for b in (0.0, 0.2, 0.5, 0.8):
        q = PdaParams(pda.a, b, pda.c)
        fam += [{"family": "b", "value": b, "phi": p, "beta": v} for p, v in zip(phi, beta(phi, q))]
    for c in (0.2 * math.pi, 0.3 * math.pi, 0.43 * math.pi, 0.5 * math.pi):
        q = PdaParams(pda.a, pda.b, c)
        fam += [{"family": "c", "value": c, "phi": p, "beta": v} for p, v in zip(phi, beta(phi, q))]

    C = np.linspace(0.47e-12, 2.35e-12, 200)
    ph, amp, refl = circuit_curve(cfg.circuit, C)
    fitted, dev = fit_pda(ph, amp)
    circ = [{"C": c, "phi": p, "amplitude": a, "re": r.real, "im": r.imag,
             "beta_fit": bf}
            for c, p, a, r, bf in zip(C, ph, amp, refl, beta(ph, fitted))]
    fit = [{"a": fitted.a, "b": fitted.b, "c": fitted.c, "max_deviation": dev}]
    return {"pda_curve": Table(base), "pda_families": Table(fam),
            "circuit_curve": Table(circ), "circuit_fit": Table(fit)}


def _feasible_variants(cfg):
    t, k = cfg.noise.tau, max(cfg.noise.kappa, 1.0)
    return [
        ("ideal", None),
        ("prop3.3", NoiseSpec("uniform", tau=t, pda_has_error=False)),
        ("prop3.4", NoiseSpec("vonmises", kappa=k, pda_has_error=False)),
        ("prop3.5", NoiseSpec("uniform", tau=t, iota=1.0)),
        ("prop3.6", NoiseSpec("vonmises", kappa=k, iota=1.0)),
        ("prop3.7", NoiseSpec("uniform", tau=t, iota=0.0)),
        ("prop3.8", NoiseSpec("vonmises", kappa=k, iota=0.0)),
        ("prop3.9", NoiseSpec("composite", tau=t, kappa=k, iota=1.0)),
        ("prop3.10", NoiseSpec("composite", tau=t, kappa=k, iota=0.0)),
    ]


def exp_feasible_set(cfg: ExperimentConfig) -> dict[str, Table]:
    res = int(cfg.run["resolution"])
    draws = int(cfg.run["feasible_draws"])
    seed = cfg.seed
    locus, areas = [], []
    stride = max(1, res // 512)
    for i, (label, nz) in enumerate(_feasible_variants(cfg)):
        fs = feasible_set(cfg.pda, nz, res, draws, seed.substream(seed.stream_id * 100 + i))
        areas.append({"label": label, "iota": "" if nz is None else nz.iota, "area": fs.area})
        locus += [{"label": label, "phi": p, "re": z.real, "im": z.imag}
                  for p, z in zip(fs.phi[::stride], fs.locus[::stride])]
    iota_rows = []
    for fam in ("uniform", "vonmises"):
        for it in (0.0, 0.25, 0.5, 0.75, 1.0):
            nz = NoiseSpec(fam, tau=math.pi / 4, kappa=5.0, iota=it)
            fs = feasible_set(cfg.pda, nz, res, draws, seed.substream(seed.stream_id * 100 + 50))
            iota_rows.append({"family": fam, "iota": it, "area": fs.area})
    return {"feasible_locus": Table(locus), "feasible_area": Table(areas),
            "feasible_area_vs_iota": Table(iota_rows)}


def exp_rp(cfg: ExperimentConfig) -> dict[str, Table]:
    pid, nz = _default_prop_noise(cfg)
    case = PROPOSITIONS[pid][0] if cfg.run["case"] is None else Case(cfg.run["case"])
    bc = float(cfg.run["beta_const"])
    phis = cfg.run["phi"]
    if phis is None:
        phis = np.linspace(*cfg.pda.domain, 32)
    phis = np.atleast_1d(np.asarray(phis, dtype=float))
    M = int(cfg.run["pixels"])
    R = int(cfg.run["rp_realizations"])
    est = "coherent" if M == 1 else "power"
    rows = []
    for i, phi in enumerate(phis):
        cf = closed_form_value(pid, cfg.pda, nz, phi, bc)
        orc = gamma_oracle(case, cfg.pda, nz, phi, bc)
        mc = gamma_mc(case, cfg.pda, nz, phi, M, R,
                      cfg.seed.substream(cfg.seed.stream_id * 10_000 + i), est, bc)
        rows.append({"prop": pid, "case": case.value, "phi": phi, "gamma_closed": cf,
                     "gamma_closed_phi_U": closed_form_value(pid, cfg.pda, nz, cfg.pda.phi_U, bc),
                     "gamma_oracle": orc.gamma, "gamma_mc": mc.gamma, "mc_stderr": mc.error_estimate,
                     "abs_err_closed": abs(cf - orc.gamma)})
    return {"rp": Table(rows)}


def exp_converge(cfg: ExperimentConfig) -> dict[str, Table]:
    rows = []
    R = min(int(cfg.run["realizations"]), 100)
    variants = [("uniform", NoiseSpec("uniform", tau=math.pi / 2)),
                ("vonmises", NoiseSpec("vonmises", kappa=max(cfg.noise.kappa, 1.0)))]
    for j, (fam, base) in enumerate(variants):
        for it in (0.0, 1.0):
            nz = base.with_(iota=it)
            seed = cfg.seed.substream(cfg.seed.stream_id * 100 + 10 * j + int(it))
            for r in gamma_convergence_study(cfg.pda, nz, cfg.run["M_grid"], R, seed):
                rows.append({"family": fam, "iota": it, **r})
    return {"convergence": Table(rows)}


def _hist(values, bins, lo, hi, label):
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    dens = counts / max(1, counts.sum()) / (edges[1] - edges[0])
    return [{"label": label, "bin_lo": a, "bin_hi": b, "count": int(c), "density": d}
            for a, b, c, d in zip(edges[:-1], edges[1:], counts, dens)]


def exp_channel(cfg: ExperimentConfig) -> dict[str, Table]:
    sc, pda = cfg.scenario, cfg.pda
    grid = build_grid(sc)
    ch = cascaded_channel(sc, pda, None, grid=grid)
    pixels = [{"m": m, "x": x, "y": y, "d1": d1, "d2": d2, "phi": p, "A1": a1, "A2": a2}
              for m, (x, y, d1, d2, p, a1, a2) in enumerate(
                  zip(grid.x, grid.y, grid.d_ap, grid.d_user, grid.phi, grid.amp_ap, grid.amp_user))]
    out = {
        "channel_pixels": Table(pixels),
        "heatmap_phi": Table(matrix=heatmap(grid, grid.phi)),
        "heatmap_gamma": Table(matrix=heatmap(grid, ch.beta_sq)),
        "hist_phi": Table(_hist(grid.phi, 32, -math.pi, math.pi, "phi")),
        "hist_gamma": Table(_hist(ch.beta_sq, 20, 0.0, 1.0, "beta_sq")),
    }
    # remaining-power distribution across pixels for several error widths
    pid, nz = _default_prop_noise(cfg)
    rows = []
    for t in (0.0, math.pi / 8, math.pi / 4, math.pi / 2):
        g = closed_form_value(pid, pda, nz.with_(tau=t), grid.phi)
        rows += _hist(g, 20, 0.0, 1.0, f"tau={t:.6f}")
    out["hist_gamma_vs_tau"] = Table(rows)
    # SE against pixel pitch with M fixed
    lam = sc.wavelength
    pitch_rows = []
    for frac in (0.5, 0.25, 0.125):
        rep = se_chain(sc.with_(d_x=frac * lam, d_y=frac * lam), pda, nz, pid,
                       realizations=int(cfg.run["realizations"]), seed=cfg.seed)
        pitch_rows.append({"pitch_over_lambda": frac, **rep.as_row()})
    out["se_vs_pitch"] = Table(pitch_rows)
    return out


def exp_se(cfg: ExperimentConfig) -> dict[str, Table]:
    pid, nz = _default_prop_noise(cfg)
    rep = se_chain(cfg.scenario, cfg.pda, nz, pid,
                   realizations=int(cfg.run["realizations"]), seed=cfg.seed)
    return {"se": Table([{"prop": pid, "pattern": cfg.scenario.pattern, **rep.as_row()}])}


def _sweep(cfg, axis, grid, scenario=None):
    pid, nz = _default_prop_noise(cfg)
    if axis in ORACLE_AXES:
        nz = cfg.noise
    rows = se_sweep(scenario or cfg.scenario, axis, grid, cfg.pda, nz, pid,
                    realizations=int(cfg.run["realizations"]), seed=cfg.seed)
    return rows


def exp_sweep(cfg: ExperimentConfig) -> dict[str, Table]:
    axis = cfg.run["axis"]
    grid = cfg.run["grid"]
    if grid is None:
        grid = {"b": [0.0, 0.2, 0.4, 0.6, 0.8], "a": [1, 2, 3, 4],
                "c": [0.2 * math.pi, 0.3 * math.pi, 0.43 * math.pi, 0.5 * math.pi],
                "iota": [0, 0.25, 0.5, 0.75, 1.0], "tau": [0, math.pi / 8, math.pi / 4, math.pi / 2],
                "kappa": [1, 2, 5, 8],
                "pixel_pitch": [cfg.scenario.wavelength * f for f in (0.5, 0.25, 0.125)],
                "x_RIS": list(_linspace(cfg.run["x_range"])),
                "z_RIS": list(_linspace(cfg.run["z_range"]))}[axis]
    return {f"sweep_{axis}": Table(_sweep(cfg, axis, grid))}


def exp_move_x(cfg: ExperimentConfig) -> dict[str, Table]:
    return {"move_x": Table(_sweep(cfg, "x_RIS", _linspace(cfg.run["x_range"])))}


def exp_move_z(cfg: ExperimentConfig) -> dict[str, Table]:
    out = {}
    for pattern in ("cosine", "isotropic"):
        sc = cfg.scenario.with_(pattern=pattern)
        out[f"move_z_{pattern}"] = Table(_sweep(cfg, "z_RIS", _linspace(cfg.run["z_range"]), sc))
    return out


def exp_paper_figs(cfg: ExperimentConfig) -> dict[str, Table]:
    out = {}
    for fn in (exp_pda_curve, exp_feasible_set, exp_rp, exp_converge, exp_channel,
               exp_move_x, exp_move_z):
        out.update(fn(cfg))
    for axis in ("iota", "a", "b", "c"):
        sub = ExperimentConfig(**{**cfg.__dict__, "run": {**cfg.run, "axis": axis, "grid": None}})
        out.update(exp_sweep(sub))
    return out


RUNNERS = {
    "pda-curve": exp_pda_curve,
    "feasible-set": exp_feasible_set,
    "rp": exp_rp,
    "converge": exp_converge,
    "channel": exp_channel,
    "se": exp_se,
    "sweep": exp_sweep,
    "move-x": exp_move_x,
    "move-z": exp_move_z,
    "paper-figs": exp_paper_figs,
}


def _git_describe() -> str:
    try:
        res = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True,
                             text=True, timeout=5, cwd=Path(__file__).resolve().parent)
        return res.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def run(cfg: ExperimentConfig, plots: bool = False) -> dict:
    """Run the configured experiment; return the manifest (also written to disk)."""
    out_dir = Path(cfg.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc
    t0 = time.perf_counter()
    tables = RUNNERS[cfg.experiment](cfg)
    files = {}
    for name, table in tables.items():
        path = out_dir / f"{name}.csv"
        write_csv(path, table)
        files[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()
    figures = []
    if plots:
        from .plotting import render_all

        figures = [p.name for p in render_all(tables, out_dir)]
    manifest = {
        "experiment": cfg.experiment,
        "config_hash": cfg.config_hash(),
        "seed": {"master_seed": cfg.seed.master_seed, "stream_id": cfg.seed.stream_id},
        "git_describe": _git_describe(),
        "wall_time_s": round(time.perf_counter() - t0, 3),
        "csv_schema": SCHEMA,
        "files": files,
        "figures": figures,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
