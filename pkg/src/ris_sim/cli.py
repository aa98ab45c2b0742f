"""Command-line entry point: ``ris-sim <subcommand> [--config FILE] [--seed N] [--out DIR]``."""
from __future__ import annotations

import argparse
import json
import math
import sys

from .config import ConfigError, config_from_dict, default_paper_config, load_config
from .experiments import run

SUBCOMMANDS = {
    "pda-curve": "amplitude model families and circuit fit",
    "feasible-set": "complex-plane reflection loci and their areas",
    "rp": "remaining power: closed form vs oracle vs Monte Carlo",
    "converge": "Gamma_M against its large-array limit",
    "channel": "fixed RIS: per-pixel table, heatmaps, histograms, SE vs pitch",
    "se": "spectral efficiency and its bound chain",
    "sweep": "SE along one parameter axis",
    "move-x": "SE as the RIS moves along x",
    "move-z": "SE as the RIS moves along z (cosine and isotropic pixels)",
    "paper-figs": "every table of the fixed/moving-RIS study",
}


def _angle(text: str) -> float:
    """Parse a float, allowing ``pi`` expressions such as ``pi/8`` or ``0.43*pi``."""
    try:
        return float(text)
    except ValueError:
        pass
    allowed = set("0123456789.+-*/() epi")
    if not set(text) <= allowed:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    try:
        return float(eval(text, {"__builtins__": {}}, {"pi": math.pi}))  # noqa: S307
    except Exception as exc:  # noqa: BLE001
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc


def _grid(text: str) -> list[float]:
    """``a,b,c`` list or ``start:stop:num`` linspace."""
    if ":" in text:
        lo, hi, n = text.split(":")
        lo, hi, n = _angle(lo), _angle(hi), int(n)
        return [lo + (hi - lo) * i / (n - 1) for i in range(n)] if n > 1 else [lo]
    return [_angle(t) for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ris-sim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in SUBCOMMANDS.items():
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", help="TOML or JSON config file")
        s.add_argument("--seed", type=int, help="master seed")
        s.add_argument("--out", help="output directory")
        s.add_argument("--plots", action="store_true", help="also render PNG figures")
        s.add_argument("--realizations", type=int, help="Monte Carlo realizations")
        s.add_argument("--prop", help="proposition id, e.g. 3.10")
        s.add_argument("--tau", type=_angle, help="uniform error half-width [rad]")
        s.add_argument("--kappa", type=float, help="von Mises concentration")
        s.add_argument("--iota", type=float, help="error correlation in [0, 1]")
        s.add_argument("--family", choices=["uniform", "vonmises", "composite"])
        s.add_argument("--M", type=int, dest="M", help="RIS pixel count (perfect square)")
        s.add_argument("--pitch", type=float, help="pixel pitch d_x = d_y [m]")
        s.add_argument("--pattern", choices=["cosine", "isotropic"], help="pixel gain pattern")
        if name == "rp":
            s.add_argument("--case", choices=["I", "II", "III", "IV"])
            s.add_argument("--phi", type=_grid, help="phase or list/range of phases [rad]")
            s.add_argument("--pixels", type=int, help="pixels per realization")
            s.add_argument("--beta-const", type=float, dest="beta_const")
        if name == "sweep":
            s.add_argument("--axis", required=True,
                           choices=["x_RIS", "z_RIS", "pixel_pitch", "iota", "a", "b", "c",
                                    "tau", "kappa"])
            s.add_argument("--grid", type=_grid, help="a,b,c or start:stop:num")
    return p


def _overrides(args) -> dict:
    d: dict = {"experiment": args.command}
    if args.seed is not None:
        d["seed"] = args.seed
    if args.out is not None:
        d["output_dir"] = args.out
    for key, target in (("tau", "noise.tau"), ("kappa", "noise.kappa"), ("iota", "noise.iota"),
                        ("family", "noise.family"), ("M", "scenario.M"),
                        ("pattern", "scenario.pattern")):
        v = getattr(args, key, None)
        if v is not None:
            d[target] = v
    if args.pitch is not None:
        d["scenario.d_x"] = d["scenario.d_y"] = args.pitch
    for key in ("realizations", "prop", "case", "phi", "pixels", "beta_const", "axis", "grid"):
        v = getattr(args, key, None)
        if v is not None:
            d[f"run.{key}"] = v
    if args.command == "rp" and args.realizations is not None:
        d["run.rp_realizations"] = args.realizations
    return d


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        base = load_config(args.config) if args.config else default_paper_config()
        cfg = config_from_dict(_overrides(args), base)
        manifest = run(cfg, plots=args.plots)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps({"output_dir": str(cfg.output_dir), **manifest}, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
