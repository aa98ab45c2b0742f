"""Experiment configuration: defaults, file loading and validation.

Config files are TOML or JSON. Keys may be nested tables::

    [scenario]
    M = 2500
    P_AP_dBm = 20

or flat, either dotted (``"scenario.M"``) or bare (``M``) when the name is
unambiguous. Power levels may be given in watts or with a ``_dBm`` suffix.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .circular_noise import NoiseSpec, SeedSpec
from .nf_channel import Scenario
from .pda import CircuitParams, PdaParams

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "EXPERIMENTS",
    "ConfigError",
    "ExperimentConfig",
    "dbm_to_watt",
    "default_paper_config",
    "load_config",
    "config_from_dict",
]

EXPERIMENTS = (
    "pda-curve",
    "feasible-set",
    "rp",
    "converge",
    "channel",
    "se",
    "sweep",
    "move-x",
    "move-z",
    "paper-figs",
)

# run-level knobs with defaults; these live in the [run] table
RUN_DEFAULTS = {
    "prop": "3.10",
    "case": None,
    "phi": None,
    "beta_const": 1.0,
    "pixels": 1,
    "realizations": 5000,
    "rp_realizations": 100_000,
    "axis": "b",
    "grid": None,
    "M_grid": [1, 2, 5, 10, 20, 50, 100, 200, 500, 1000],
    "x_range": [-8.0, 8.0, 17],
    "z_range": [-20.0, 10.0, 31],
    "resolution": 4096,
    "feasible_draws": 100_000,
}

SECTIONS = {
    "scenario": Scenario,
    "pda": PdaParams,
    "noise": NoiseSpec,
    "circuit": CircuitParams,
}


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists every offending field."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


@dataclass
class ExperimentConfig:
    scenario: Scenario = field(default_factory=Scenario)
    pda: PdaParams = field(default_factory=PdaParams)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    circuit: CircuitParams = field(default_factory=CircuitParams)
    experiment: str = "paper-figs"
    seed: SeedSpec = field(default_factory=SeedSpec)
    output_dir: Path = Path("out")
    run: dict = field(default_factory=lambda: dict(RUN_DEFAULTS))

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError([f"experiment: {self.experiment!r} not in {EXPERIMENTS}"])
        self.output_dir = Path(self.output_dir)
        self.run = {**RUN_DEFAULTS, **self.run}

    def semantic_dict(self) -> dict:
        """Everything that affects results (the output directory does not)."""
        def enc(obj):
            d = dataclasses.asdict(obj)
            return {k: (v.value if hasattr(v, "value") else v) for k, v in d.items()}

        return {
            "scenario": enc(self.scenario),
            "pda": enc(self.pda),
            "noise": enc(self.noise),
            "circuit": enc(self.circuit),
            "experiment": self.experiment,
            "seed": enc(self.seed),
            "run": self.run,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.semantic_dict(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()


def default_paper_config() -> ExperimentConfig:
    """Fixed-RIS scenario defaults: 200 x 200 pixels, 2.4 GHz, 5000 realizations."""
    return ExperimentConfig(
        scenario=Scenario(
            ap_pos=(-20.0, 15.0, 8.0),
            user_pos=(20.0, 1.5, 8.0),
            ris_center=(0.0, 10.0, 0.0),
            M=200**2,
            f_c=2.4e9,
            P_AP=dbm_to_watt(20.0),
            sigma2=dbm_to_watt(-80.0),
        ),
        pda=PdaParams(a=1.0, b=0.2, c=0.43 * math.pi),
        noise=NoiseSpec("composite", tau=math.pi / 8, kappa=5.0, iota=0.0),
        circuit=CircuitParams(),
        experiment="paper-figs",
        seed=SeedSpec(0, 0),
    )


def _field_names(cls):
    return {f.name for f in dataclasses.fields(cls)}


def _bare_index():
    index = {}
    for sec, cls in SECTIONS.items():
        for name in _field_names(cls):
            index.setdefault(name, []).append(sec)
    for name in ("P_AP_dBm", "sigma2_dBm"):
        index.setdefault(name, []).append("scenario")
    for name in RUN_DEFAULTS:
        index.setdefault(name, []).append("run")
    return index


def _flatten(data: dict, prefix="") -> dict:
    out = {}
    for k, v in data.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def config_from_dict(data: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Build a config from nested or flat keys, overlaying ``base``."""
    base = base or default_paper_config()
    sections = {sec: dataclasses.asdict(getattr(base, sec)) for sec in SECTIONS}
    run = dict(base.run)
    top = {"experiment": base.experiment, "output_dir": str(base.output_dir),
           "seed": base.seed.master_seed, "stream_id": base.seed.stream_id}
    problems = []
    bare = _bare_index()

    for key, value in _flatten(data).items():
        parts = key.split(".")
        if len(parts) == 1 and parts[0] in top:
            top[parts[0]] = value
            continue
        if len(parts) == 1:
            owners = bare.get(parts[0], [])
            if len(owners) != 1:
                why = "unknown key" if not owners else f"ambiguous key (in {owners})"
                problems.append(f"{key}: {why}")
                continue
            parts = [owners[0], parts[0]]
        if len(parts) != 2:
            problems.append(f"{key}: unknown key")
            continue
        sec, name = parts
        if sec == "run":
            if name not in RUN_DEFAULTS:
                problems.append(f"{key}: unknown key")
            else:
                run[name] = value
            continue
        if sec not in SECTIONS:
            problems.append(f"{key}: unknown section")
            continue
        if sec == "scenario" and name in ("P_AP_dBm", "sigma2_dBm"):
            sections[sec][name[:-4]] = dbm_to_watt(float(value))
            continue
        if name not in _field_names(SECTIONS[sec]):
            problems.append(f"{key}: unknown key")
            continue
        sections[sec][name] = value

    built = {}
    for sec, cls in SECTIONS.items():
        try:
            built[sec] = cls(**sections[sec])
        except (ValueError, TypeError) as exc:
            problems.append(f"{sec}: {exc}")
    if top["experiment"] not in EXPERIMENTS:
        problems.append(f"experiment: {top['experiment']!r} not in {EXPERIMENTS}")
    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(
        experiment=top["experiment"],
        seed=SeedSpec(int(top["seed"]), int(top["stream_id"])),
        output_dir=Path(top["output_dir"]),
        run=run,
        **built,
    )


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Read a TOML or JSON config file."""
    path = Path(path)
    text = path.read_bytes()
    if path.suffix.lower() == ".json":
        data = json.loads(text)
    else:
        data = tomllib.loads(text.decode())
    return config_from_dict(data, base)
