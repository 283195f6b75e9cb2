"""Experiment configuration: flat ``section.key = value`` text files.

Grammar (one entry per line)::

    # comment
    sim.alpha = 1.0, 1.41421356, 2.0
    sim.tau_i_us = 1.0

Blank lines and ``#`` comments are ignored, whitespace around keys and values
is stripped, and lists are comma-separated.  Every key is listed in
``DEFAULTS``; anything else is rejected by name.  All times are in
microseconds and all rates in inverse microseconds.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

from .cadence import CadenceParams
from .errors import ConfigError, ParityTrackError
from .jumps import SchmittConfig
from .quantum_filter import FilterSettings
from .readout import ReadoutModel, default_model
from .trajectory import SimConfig

__all__ = ["DEFAULTS", "ExperimentConfig", "parse_config_text", "load_config", "config_from_mapping"]

AUTO = "auto"

# key -> (default, kind); defaults mirror the device values.
DEFAULTS: dict[str, tuple[object, str]] = {
    "sim.alpha": ("1.0", "floatlist"),
    "sim.alpha_phase_rad": ("0.0", "float"),
    "sim.n_th": ("0.02", "float"),
    "sim.tau_tot_us": ("49.0", "float"),
    "sim.tau_i_us": ("1.0", "float"),
    "sim.duration_us": ("500.0", "float"),
    "sim.dim": (AUTO, "int_or_auto"),
    "readout.p_correct": ("0.9", "float"),
    "readout.p_fail": ("0.03", "float"),
    "readout.p_plus_even": (AUTO, "float_or_auto"),
    "readout.p_minus_even": (AUTO, "float_or_auto"),
    "readout.p_zero_even": (AUTO, "float_or_auto"),
    "readout.p_plus_odd": (AUTO, "float_or_auto"),
    "readout.p_minus_odd": (AUTO, "float_or_auto"),
    "readout.p_zero_odd": (AUTO, "float_or_auto"),
    "filter.tau_tot_us": (AUTO, "float_or_auto"),
    "filter.renormalize": ("true", "bool"),
    "filter.kraus_order": ("1", "kraus_order"),
    "schmitt.hi": ("0.9", "float"),
    "schmitt.lo": ("-0.9", "float"),
    "detect.tau_f_us": ("2.0", "float"),
    "ensemble.n_traj": ("100", "int"),
    "ensemble.base_seed": ("0", "int"),
    "ensemble.workers": ("1", "int"),
    "analysis.tau_0_us": ("55.0", "float"),
    "analysis.P_D": ("0.002", "float"),
    "cadence.n_bar": ("4.0", "float"),
    "cadence.tau_M_us": ("0.4", "float"),
    "cadence.tau_W_us": ("0.0", "float"),
    "cadence.T1_us": ("8.0", "float"),
    "cadence.chi_qs_MHz": ("1.789", "float"),
    "cadence.P_C": (AUTO, "float_or_auto"),
    "output.dir": ("out", "str"),
}

_SIX = ("p_plus_even", "p_minus_even", "p_zero_even", "p_plus_odd", "p_minus_odd", "p_zero_odd")


def _convert(key: str, raw: str, kind: str):
    raw = raw.strip()
    try:
        if kind == "float":
            return float(raw)
        if kind == "int":
            return int(raw)
        if kind == "str":
            return raw
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if kind == "floatlist":
            vals = [float(v) for v in raw.split(",") if v.strip()]
            if not vals:
                raise ValueError(raw)
            return tuple(vals)
        if kind == "int_or_auto":
            return None if raw.lower() == AUTO else int(raw)
        if kind == "float_or_auto":
            return None if raw.lower() == AUTO else float(raw)
        if kind == "kraus_order":
            if raw.lower() == "exact":
                return "exact"
            if raw == "1":
                return 1
            raise ValueError(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind}") from None
    raise AssertionError(kind)


def parse_config_text(text: str) -> dict[str, str]:
    """Parse the flat key-value grammar into raw strings; rejects unknown or repeated keys."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, value = (s.strip() for s in stripped.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully validated experiment; ``values`` holds every resolved key."""

    values: dict
    sims: tuple
    readout: ReadoutModel
    filter: FilterSettings
    schmitt: SchmittConfig
    cadence: CadenceParams

    def __getitem__(self, key):
        return self.values[key]

    @property
    def alphas(self) -> tuple:
        return self.values["sim.alpha"]

    @property
    def n_traj(self) -> int:
        return self.values["ensemble.n_traj"]

    @property
    def base_seed(self) -> int:
        return self.values["ensemble.base_seed"]

    @property
    def tau_f(self) -> float:
        return self.values["detect.tau_f_us"]

    @property
    def out_dir(self) -> Path:
        return Path(self.values["output.dir"])

    def canonical_text(self) -> str:
        """Resolved configuration in the file grammar, sorted; ``output.dir`` excluded."""
        lines = []
        for key in sorted(self.values):
            if key == "output.dir":
                continue
            v = self.values[key]
            if isinstance(v, tuple):
                v = ", ".join(repr(x) for x in v)
            elif v is None:
                v = AUTO
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{key} = {v}")
        return "\n".join(lines) + "\n"

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:16]


def config_from_mapping(raw: dict[str, str], overrides: dict | None = None) -> ExperimentConfig:
    """Validate raw string values (plus typed overrides) into an :class:`ExperimentConfig`."""
    for key in raw:
        if key not in DEFAULTS:
            raise ConfigError(f"unknown key {key!r}")
    values = {}
    for key, (default, kind) in DEFAULTS.items():
        values[key] = _convert(key, raw.get(key, default), kind)
    for key, v in (overrides or {}).items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown key {key!r}")
        values[key] = v

    if values["ensemble.n_traj"] < 1:
        raise ConfigError("ensemble.n_traj must be >= 1")
    if values["ensemble.workers"] < 1:
        raise ConfigError("ensemble.workers must be >= 1")
    if values["sim.tau_tot_us"] <= 0:
        raise ConfigError("sim.tau_tot_us must be positive")

    try:
        sims = []
        phase = values["sim.alpha_phase_rad"]
        for a in values["sim.alpha"]:
            if a < 0:
                raise ConfigError("sim.alpha values are amplitudes and must be >= 0")
            dim = values["sim.dim"]
            if dim is not None and dim < 5 * max(1.0, a * a) - 1e-9:
                raise ConfigError(f"sim.dim={dim} violates the truncation rule dim >= 5*nbar for alpha={a}")
            sims.append(
                SimConfig(
                    alpha=a * complex(math.cos(phase), math.sin(phase)),
                    n_th=values["sim.n_th"],
                    kappa=1.0 / values["sim.tau_tot_us"],
                    tau_i=values["sim.tau_i_us"],
                    duration=values["sim.duration_us"],
                    dim=dim,
                )
            )

        six = [values[f"readout.{k}"] for k in _SIX]
        if any(v is not None for v in six):
            if any(v is None for v in six):
                missing = [f"readout.{k}" for k, v in zip(_SIX, six) if v is None]
                raise ConfigError(f"readout overrides must set all six probabilities; missing {missing}")
            readout = ReadoutModel(*six)
        else:
            readout = default_model(values["readout.p_correct"], values["readout.p_fail"])

        ftau = values["filter.tau_tot_us"]
        if ftau is not None and ftau <= 0:
            raise ConfigError("filter.tau_tot_us must be positive")
        filt = FilterSettings(
            kappa=None if ftau is None else 1.0 / ftau,
            renormalize=values["filter.renormalize"],
            kraus_order=values["filter.kraus_order"],
        )
        kappa_f = filt.kappa if filt.kappa is not None else 1.0 / values["sim.tau_tot_us"]
        if kappa_f * values["sim.tau_i_us"] > 0.1:
            raise ConfigError("filter step kappa*tau_i exceeds 0.1")

        schmitt = SchmittConfig(values["schmitt.hi"], values["schmitt.lo"])
        if values["detect.tau_f_us"] < 0:
            raise ConfigError("detect.tau_f_us must be >= 0")
        if values["analysis.tau_0_us"] <= 0 or not 0.0 <= values["analysis.P_D"] < 1.0:
            raise ConfigError("analysis.tau_0_us must be positive and analysis.P_D in [0, 1)")

        cadence = CadenceParams(
            n_bar=values["cadence.n_bar"],
            kappa=1.0 / values["sim.tau_tot_us"],
            tau_M=values["cadence.tau_M_us"],
            tau_W=values["cadence.tau_W_us"],
            T1=values["cadence.T1_us"],
            chi_qs=2 * math.pi * values["cadence.chi_qs_MHz"],
            P_C=values["cadence.P_C"],
        )
    except ConfigError:
        raise
    except (ParityTrackError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    return ExperimentConfig(
        values=values,
        sims=tuple(sims),
        readout=readout,
        filter=filt,
        schmitt=schmitt,
        cadence=cadence,
    )


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return config_from_mapping(parse_config_text(path.read_text()), overrides)
