"""Experiment configuration: flat key = value documents with paper defaults.

Grammar: one `key = value` per line, blank lines and `#` comments ignored.
The `experiment` key selects the defaults table; unknown keys are rejected
and out-of-range values raise naming the offending key.  Integer lists
(grid axes) are comma-separated, e.g. `ns = 8, 64, 512`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class ConfigError(ValueError):
    pass


_COMMON = {
    "seed": 0,
    "out": "out",
    "jobs": 1,
    "timing": False,
}

# Defaults follow the experiments' published hyperparameters where stated.
_DEFAULTS = {
    "merton_grid": {
        **_COMMON,
        "d": 10,
        "lam": 1.0,
        "m": 0.18,
        "s": 0.44,
        "r_rate": 0.0,
        "y0": 1.0,
        "beta": 100.0,
        "sigma": 100.0,
        "regularised": True,
        "epochs": 100_000,
        "lr_max": 0.1,
        "lr_min": 1e-5,
        "ns": [8, 64, 512],
        "rs": [50],
        "trials": 30,
        "n_test": 1000,
    },
    "zermelo_train": {
        **_COMMON,
        "v_s": 0.8,
        "M": 10.0,
        "A": 2.0,
        "steps": 50,
        "ou_theta": 1.0,
        "ou_alpha": 0.0,
        "ou_vartheta": 1.0,
        "tau": 0.04,
        "beta": 100.0,
        "sigma": math.sqrt(0.1) * 100.0,
        "regularised": True,
        "epochs": 20_000,
        # a unit learning rate blows past the soft obstacle wall and
        # diverges at this noise level; 3e-3 is the largest stable rate
        "lr_max": 3e-3,
        "lr_min": 1e-5,
        "width": 100,
        "n": 100,
        "n_test": 1000,
    },
    "gibbs_sanity": {
        **_COMMON,
        "beta": 1.0,
        "sigma": 1.0,
        "epochs": 20_000,
        "lr_max": 0.01,
        "lr_min": 0.01,
        "width": 512,
        "state_dim": 1,
        "control_dim": 1,
    },
}

# Desk profiles shrink epochs/widths/trials to CI scale; "paper" keeps defaults.
_PROFILES = {
    "paper": {},
    "desk": {
        "merton_grid": {"epochs": 5000, "trials": 8, "rs": [50]},
        "zermelo_train": {"epochs": 2000, "width": 32},
        "gibbs_sanity": {},
    },
}

_POSITIVE = {"epochs", "trials", "width", "n", "n_test", "d", "steps", "jobs",
             "lam", "s", "beta", "sigma", "v_s", "tau", "lr_max", "lr_min",
             "y0", "state_dim", "control_dim"}


@dataclass
class ExperimentConfig:
    experiment: str
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def to_text(self) -> str:
        """Serialise the effective config; re-parsing yields an equal config."""
        lines = [f"experiment = {self.experiment}"]
        for key in sorted(self.values):
            v = self.values[key]
            if isinstance(v, list):
                lines.append(f"{key} = {', '.join(str(x) for x in v)}")
            elif isinstance(v, bool):
                lines.append(f"{key} = {str(v).lower()}")
            elif isinstance(v, float):
                lines.append(f"{key} = {v!r}")
            else:
                lines.append(f"{key} = {v}")
        return "\n".join(lines) + "\n"


def _coerce(key, raw, default):
    try:
        if isinstance(default, bool):
            low = raw.strip().lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, list):
            return [int(v.strip()) for v in raw.split(",") if v.strip()]
        return raw.strip()
    except ValueError:
        raise ConfigError(f"key {key!r}: cannot parse value {raw!r}") from None


def _validate(key, value):
    if key in _POSITIVE:
        vals = value if isinstance(value, list) else [value]
        if any(v <= 0 for v in vals):
            raise ConfigError(f"key {key!r}: value must be positive, got {value}")
    if key in ("ns", "rs") and (not value or any(v <= 0 for v in value)):
        raise ConfigError(f"key {key!r}: needs a nonempty list of positive ints")


def parse_config(text, profile="paper") -> ExperimentConfig:
    """Parse a config document; missing keys take the defaults."""
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = raw

    experiment = pairs.pop("experiment", "merton_grid").strip()
    if experiment not in _DEFAULTS:
        raise ConfigError(f"key 'experiment': unknown experiment {experiment!r}")
    if profile not in _PROFILES:
        raise ConfigError(f"unknown profile {profile!r}")

    values = dict(_DEFAULTS[experiment])
    values.update(_PROFILES[profile].get(experiment, {}))
    for key, raw in pairs.items():
        if key not in values:
            raise ConfigError(f"unknown key {key!r} for experiment {experiment!r}")
        value = _coerce(key, raw, _DEFAULTS[experiment][key])
        _validate(key, value)
        values[key] = value
    return ExperimentConfig(experiment, values)
