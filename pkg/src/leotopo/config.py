"""Run configuration: one YAML file per experiment, validated against a fixed schema."""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass

import yaml

from .constellation import ShellConfig
from .demand import PATTERNS
from .simulator import NetParams
from .topology import MODES, StarfieldParams

GENERATORS = ("plus_grid", "starfield", "static_starfield", "random")

# Defaults mirror the Phase-1 constellation and network tables.
DEFAULTS: dict = {
    "seed": 0,
    "out": "out",
    "duration": 10.0,
    "shell": {
        "altitude_km": 550.0,
        "inclination_deg": 53.0,
        "num_orbits": 72,
        "sats_per_orbit": 22,
        "phase_offset": 0.5,
        "mean_motion_rad_per_h": 3.98,
        "min_altitude_clearance_km": 80.0,
        "isl_max_range_km": None,
        "time_step": 1.0,
    },
    "network": {
        "isl_bandwidth": 1e12,
        "gsl_bandwidth": 1e11,
        "isl_noise": 0.1,
        "gsl_noise": 0.001,
        "buffer_size": 1000,
        "packet_size": 12_000,
        "isl_ref_distance": None,
        "gsl_ref_distance": 550_000.0,
        "min_elevation_deg": 25.0,
        "rate_scale": 4e-3,
        "route_refresh": 1.0,
        "trace": False,
    },
    "demand": {
        "pattern": "distance",
        "base_intensity": 1000.0,
        "seed": 0,
        "constant": True,
        "noise_mu": 0.0,
        "noise_sigma": 0.0,
        "noise_seed": 1,
    },
    "topology": {
        "generator": "starfield",
        "kappa": 4,
        "K": 1e7,
        "eps": 1e-12,
        "eta": 1.0,
        "omega": 10.0,
        "crown": True,
        "mode": "prioritized",
        "length_unit": 1000.0,
        "epoch_length": None,
        "snapshots": 3,
    },
    "analysis": {
        "l_theta": 20.0,
        "l_phi": 30.0,
        "orientation": "folded",
    },
    "flat": {
        "instances": 100,
        "rho": 1.0,
        "n_regions": 3,
        "tau": 8.0,
        "num_demands": 40,
    },
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        where = f"{path}{k}"
        if k not in base:
            raise ConfigError(f"unknown key: {where}")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"{where} must be a mapping")
            out[k] = _merge(base[k], v, where + ".")
        else:
            out[k] = v
    return out


@dataclass
class RunConfig:
    raw: dict

    @classmethod
    def from_dict(cls, d: dict | None) -> "RunConfig":
        if d is None:
            d = {}
        if not isinstance(d, dict):
            raise ConfigError("config root must be a mapping")
        cfg = cls(_merge(DEFAULTS, d))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            try:
                data = yaml.safe_load(fh)
            except yaml.YAMLError as exc:
                raise ConfigError(f"invalid YAML: {exc}") from exc
        return cls.from_dict(data)

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            yaml.safe_dump(self.raw, fh, sort_keys=True)

    def digest(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def with_seed(self, seed: int) -> "RunConfig":
        d = copy.deepcopy(self.raw)
        d["seed"] = seed
        return RunConfig.from_dict(d)

    def __getitem__(self, key):
        return self.raw[key]

    def validate(self) -> None:
        r = self.raw
        if r["duration"] < 0:
            raise ConfigError("duration must be nonnegative")
        if r["demand"]["pattern"] not in PATTERNS:
            raise ConfigError(f"demand.pattern must be one of {PATTERNS}")
        if r["demand"]["noise_sigma"] < 0:
            raise ConfigError("demand.noise_sigma must be nonnegative")
        t = r["topology"]
        if t["generator"] not in GENERATORS:
            raise ConfigError(f"topology.generator must be one of {GENERATORS}")
        if t["mode"] not in MODES:
            raise ConfigError(f"topology.mode must be one of {tuple(MODES)}")
        if t["epoch_length"] is not None and t["epoch_length"] <= 0:
            raise ConfigError("topology.epoch_length must be positive")
        if t["snapshots"] < 1:
            raise ConfigError("topology.snapshots must be >= 1")
        if r["shell"]["time_step"] <= 0:
            raise ConfigError("shell.time_step must be positive")
        try:
            self.shell()
            self.net_params()
            self.starfield_params()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def shell(self) -> ShellConfig:
        s = self.raw["shell"]
        rng = s["isl_max_range_km"]
        return ShellConfig(
            altitude=s["altitude_km"] * 1000.0,
            inclination=math.radians(s["inclination_deg"]),
            num_orbits=int(s["num_orbits"]),
            sats_per_orbit=int(s["sats_per_orbit"]),
            phase_offset=s["phase_offset"],
            mean_motion=s["mean_motion_rad_per_h"] / 3600.0,
            isl_max_range=None if rng is None else rng * 1000.0,
            min_altitude_clearance=s["min_altitude_clearance_km"] * 1000.0,
        )

    def net_params(self) -> NetParams:
        n = dict(self.raw["network"])
        n.pop("trace")
        n["min_elevation"] = math.radians(n.pop("min_elevation_deg"))
        return NetParams(**n)

    def starfield_params(self) -> StarfieldParams:
        t = self.raw["topology"]
        return StarfieldParams(kappa=int(t["kappa"]), K=float(t["K"]), eta=t["eta"], omega=t["omega"],
                               crown=bool(t["crown"]), eps=float(t["eps"]), mode=t["mode"],
                               length_unit=float(t["length_unit"]))
