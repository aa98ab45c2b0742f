"""Optional PNG rendering of experiment tables (CSV stays the contract)."""
from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["render_all"]

SE_COLS = ("se_L", "se_L_upper", "se", "se_upper", "se_U", "se_U_upper", "se_mc")


def _grouped(rows, key):
    groups = defaultdict(list)
    for r in rows:
        groups[r[key]].append(r)
    return groups


def _lines(ax, rows, x, y, group=None):
    if group is None:
        ax.plot([r[x] for r in rows], [r[y] for r in rows], label=y)
        return
    for g, rs in _grouped(rows, group).items():
        ax.plot([r[x] for r in rs], [r[y] for r in rs], label=f"{group}={g}")


def _plot_table(name, table, ax):
    if table.matrix is not None:
        im = ax.imshow(np.asarray(table.matrix, dtype=float), origin="lower", cmap="viridis")
        plt.colorbar(im, ax=ax)
        return True
    rows = table.rows or []
    if not rows:
        return False
    cols = rows[0].keys()
    if name.startswith(("sweep_", "move_")) or name == "se_vs_pitch":
        rows = [r for r in rows if not r.get("skipped")]
        x = "pitch_over_lambda" if name == "se_vs_pitch" else "value"
        for c in SE_COLS:
            if rows and c in rows[0]:
                _lines(ax, rows, x, c)
        ax.set_ylabel("SE [bit/s/Hz]")
    elif name.startswith("hist_"):
        for g, rs in _grouped(rows, "label").items():
            ax.step([r["bin_lo"] for r in rs], [r["density"] for r in rs], where="post", label=g)
    elif name == "pda_families":
        for fam in ("a", "b", "c"):
            for v, rs in _grouped([r for r in rows if r["family"] == fam], "value").items():
                ax.plot([r["phi"] for r in rs], [r["beta"] for r in rs], label=f"{fam}={v:.3g}")
    elif name == "feasible_locus":
        for g, rs in _grouped(rows, "label").items():
            ax.plot([r["re"] for r in rs], [r["im"] for r in rs], label=g)
        ax.set_aspect("equal")
    elif name == "convergence":
        for (fam, it), rs in _grouped([{**r, "k": (r["family"], r["iota"])} for r in rows], "k").items():
            ax.semilogx([r["M"] for r in rs], [r["gamma_M"] for r in rs], "o-", label=f"{fam} iota={it}")
            ax.axhline(rs[0]["gamma_inf"], ls="--", lw=0.8)
    elif name == "rp":
        for c in ("gamma_closed", "gamma_oracle", "gamma_mc"):
            _lines(ax, rows, "phi", c)
    elif name == "circuit_curve":
        _lines(ax, rows, "phi", "amplitude")
        _lines(ax, rows, "phi", "beta_fit")
    elif name == "pda_curve":
        _lines(ax, rows, "phi", "beta")
        _lines(ax, rows, "phi", "beta_a1")
    elif name == "feasible_area_vs_iota":
        _lines(ax, rows, "iota", "area", group="family")
    else:
        return False
    if len(cols) and ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize="small")
    return True


def render_all(tables: dict, out_dir) -> list[Path]:
    """Render one PNG per plottable table into ``out_dir``."""
    out_dir = Path(out_dir)
    written = []
    for name, table in tables.items():
        fig, ax = plt.subplots(figsize=(6, 4))
        try:
            if _plot_table(name, table, ax):
                ax.set_title(name)
                path = out_dir / f"{name}.png"
                fig.tight_layout()
                fig.savefig(path, dpi=100)
                written.append(path)
        finally:
            plt.close(fig)
    return written
