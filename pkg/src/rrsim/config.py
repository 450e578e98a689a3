"""Strict JSON experiment configuration.

Top-level keys::

    experiment   one of EXPERIMENTS
    system       preset name, or {"preset": name, "params": {field: value}}
    schedule     {"type": "constant", "tau": s} or
                 {"type": "piecewise", "segment_length": s, "taus": [s, ...]}
    integrator   {"step": s, "horizon": s, "record_stride": n, "steps_per_dwell": n}
    analysis     thresholds and sweep settings, see ANALYSIS_KEYS
    seed         integer RNG seed
    output_dir   directory for CSV / JSON / gnuplot outputs

Only ``experiment`` and ``output_dir`` are required; everything else falls
back to the experiment's defaults.  Unknown keys are rejected at every level.
Units are SI: times s, masses kg, lengths m, rates rad/s, inertia kg m^2.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from rrsim.errors import ConfigurationError
from rrsim.systems import PRESETS

EXPERIMENTS = ("coupled-stability", "no-amplification", "spacecraft-decreasing",
               "slow-switch-probe", "tau-sweep")

TOP_KEYS = {"experiment", "system", "schedule", "integrator", "analysis", "seed", "output_dir"}
INTEGRATOR_KEYS = {"step", "horizon", "record_stride", "steps_per_dwell"}
ANALYSIS_KEYS = {
    "epsilon",          # ball radius
    "eta",              # convergence threshold
    "settle_fraction",  # fraction of the horizon after which samples must stay within eta
    "fit_window",       # [a, b] s for the exponential decay fit
    "gap_window",       # [a, b] s for sup-norm gaps
    "taus",             # switching times for tau-sweep
    "radii",            # initial omega-ball radii for slow-switch-probe
    "growth_window",    # [a, b] s for the amplification check
    "growth_factor",    # required |x5(b)| / |x5(a)| for the amplification check
    "qv_tol",           # final ||qv|| threshold (spacecraft-decreasing)
    "omega_tol",        # final ||omega|| threshold (spacecraft-decreasing)
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    output_dir: Path
    preset: str
    params: dict = field(default_factory=dict)
    schedule: Optional[dict] = None
    integrator: dict = field(default_factory=dict)
    analysis: dict = field(default_factory=dict)
    seed: int = 2024

    def system_params(self):
        """Preset parameters with the config's overrides applied."""
        base = PRESETS[self.preset]
        names = {f.name for f in dataclasses.fields(base)}
        unknown = set(self.params) - names
        if unknown:
            raise ConfigurationError(f"unknown {self.preset} parameters: {sorted(unknown)}")
        values = {k: _freeze(v) for k, v in self.params.items()}
        return dataclasses.replace(base, **values)


def _freeze(v):
    if isinstance(v, list):
        return tuple(_freeze(e) for e in v)
    return v


def _strict(obj, allowed: set, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigurationError(f"{where} must be a JSON object")
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigurationError(f"unknown {where} keys: {sorted(unknown)}")
    return obj


def parse_config(data: dict, base_dir: Optional[Path] = None) -> ExperimentConfig:
    """Validate a decoded JSON config.  Relative ``output_dir`` resolves against ``base_dir``."""
    _strict(data, TOP_KEYS, "config")
    for key in ("experiment", "output_dir"):
        if key not in data:
            raise ConfigurationError(f"config is missing {key!r}")
    exp = data["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigurationError(f"unknown experiment {exp!r}; choose from {list(EXPERIMENTS)}")

    system = data.get("system", _default_preset(exp))
    if isinstance(system, str):
        preset, params = system, {}
    else:
        _strict(system, {"preset", "params"}, "system")
        preset = system.get("preset", _default_preset(exp))
        params = system.get("params", {})
        if not isinstance(params, dict):
            raise ConfigurationError("system.params must be a JSON object")
    if preset not in PRESETS:
        raise ConfigurationError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")

    integrator = _strict(data.get("integrator", {}), INTEGRATOR_KEYS, "integrator")
    analysis = _strict(data.get("analysis", {}), ANALYSIS_KEYS, "analysis")
    schedule = data.get("schedule")
    if schedule is not None and not isinstance(schedule, dict):
        raise ConfigurationError("schedule must be a JSON object")
    seed = data.get("seed", 2024)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigurationError(f"seed must be an integer, got {seed!r}")

    out = Path(data["output_dir"])
    if not out.is_absolute() and base_dir is not None:
        out = base_dir / out
    cfg = ExperimentConfig(exp, out, preset, dict(params), schedule, dict(integrator),
                           dict(analysis), seed)
    cfg.system_params()
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(data, base_dir=path.parent)


def _default_preset(experiment: str) -> str:
    return {
        "coupled-stability": "coupled-linear",
        "no-amplification": "coupled-linear",
        "tau-sweep": "coupled-linear",
        "spacecraft-decreasing": "spacecraft",
        "slow-switch-probe": "spacecraft-spin",
    }[experiment]
