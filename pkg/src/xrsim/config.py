"""Experiment configuration: flat key = value sections, diffable on disk.

Every default is printable via the `print-config` subcommand; loading the
printed file reproduces the effective configuration exactly (round-trip
contract used for experiment provenance).
"""

from __future__ import annotations

import configparser
import io
import os
from dataclasses import dataclass, fields

from .workload import APP_OBJECT_COUNTS, CostErrorModel


class ConfigError(Exception):
    """Invalid or inconsistent experiment configuration (exit code 1)."""


PLATFORM_SCALES = {"pc": 1.0, "xavier": 2.1, "nano": 2.8}

# section -> key -> (type tag, default)
SCHEMA = {
    "run": {
        "policy": ("str", "illixr"),
        "platform": ("str", "pc"),
        "app": ("str", "sponza"),
        "duration_us": ("int", 60_000_000),
        "warmup_us": ("int", 500_000),
        "seed": ("int", 0),
        "target_fps": ("int", 90),
        "emit_events": ("bool", False),
    },
    "periods": {
        "cam_period_us": ("int", 50_000),
        "imu_period_us": ("int", 5_000),
        "sr_period_us": ("int", 0),      # 0 -> derived from target_fps
        "atw_period_us": ("int", 0),     # 0 -> derived from target_fps
        "auto_tune": ("bool", False),
        "tune_min_ms": ("int", 8),
        "tune_max_ms": ("int", 16),
        "tune_step_ms": ("int", 2),
        "tune_duration_us": ("int", 10_000_000),
    },
    "burst": {
        "scene_swaps_per_min": ("int", 0),
        "motion_spikes_per_min": ("int", 0),
        "spike_accel": ("float", 15.0),
        "spike_us": ("int", 200_000),
        "swap_objects": ("int", 2048),
        "swap_frames": ("int", 10),
    },
    "motion": {
        "class_mix": ("floatlist", [0.1062, 0.6675, 0.2030, 0.0233]),
        "rot_ratio": ("float", 0.6),
        "trace_file": ("str", ""),
    },
    "scene": {
        "custom_objects": ("int", -1),
        "scene_dt_us": ("int", 50_000),
        "scene_file": ("str", ""),
    },
    "mvio": {
        "e_req_m": ("float", 0.05),
        "l_min": ("int", 1),
        "l_max": ("int", 4),
        "budget_us": ("int", 0),         # 0 -> profiled localization time
    },
    "sfr": {
        "offset": ("float", 0.1),
        "gamma_floor": ("float", 0.05),
        "zone_formula": ("str", "consistent"),
        "r_max": ("float", 0.0),         # 0 -> no cap
    },
    "platform_custom": {
        "scale": ("float", 1.0),
        "vio_base_us": ("float", 40_000.0),
        "imui_us": ("float", 200.0),
        "sr_us": ("float", 500.0),
        "srr_base_us": ("float", 5_000.0),
        "atw_us": ("float", 1_500.0),
        "atwr_us": ("float", 2_000.0),
        "k_obj": ("float", 0.2),
        "n_ref": ("int", 32),
        "v_ref": ("float", 0.5),
        "w_ref": ("float", 0.3),
        "motion_slope": ("float", 0.25),
        "crop_exponent": ("float", 3.0),
    },
}

_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _parse_value(tag, raw, where):
    try:
        if tag == "int":
            return int(raw)
        if tag == "float":
            return float(raw)
        if tag == "bool":
            low = str(raw).strip().lower()
            if low in _BOOL_TRUE:
                return True
            if low in _BOOL_FALSE:
                return False
            raise ValueError(raw)
        if tag == "floatlist":
            return [float(x) for x in str(raw).split(",") if x.strip() != ""]
        return str(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {where}: {raw!r}") from exc


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ",".join(repr(v) for v in value)
    return str(value)


@dataclass
class ExperimentConfig:
    values: dict

    # -- construction ----------------------------------------------------
    @classmethod
    def defaults(cls) -> "ExperimentConfig":
        return cls({s: {k: v for k, (_, v) in keys.items()}
                    for s, keys in SCHEMA.items()})

    @classmethod
    def from_ini(cls, path) -> "ExperimentConfig":
        cfg = cls.defaults()
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in parser[section].items():
                if key not in SCHEMA[section]:
                    raise ConfigError(f"unknown key {section}.{key}")
                tag = SCHEMA[section][key][0]
                cfg.values[section][key] = _parse_value(tag, raw,
                                                        f"{section}.{key}")
        cfg.validate()
        return cfg

    def copy(self) -> "ExperimentConfig":
        return ExperimentConfig({s: dict(kv) for s, kv in self.values.items()})

    def get(self, section, key):
        return self.values[section][key]

    def set(self, section, key, value):
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {section}.{key}")
        self.values[section][key] = value

    def to_ini_text(self) -> str:
        out = io.StringIO()
        for section, keys in SCHEMA.items():
            out.write(f"[{section}]\n")
            for key in keys:
                out.write(f"{key} = {_format_value(self.values[section][key])}\n")
            out.write("\n")
        return out.getvalue()

    # -- validation ------------------------------------------------------
    def validate(self):
        run = self.values["run"]
        if run["policy"] not in ("illixr", "illixr-op", "boxr-s", "boxr"):
            raise ConfigError(f"unknown policy {run['policy']!r}")
        if run["platform"] not in (*PLATFORM_SCALES, "custom"):
            raise ConfigError(f"unknown platform preset {run['platform']!r}")
        if run["app"] not in (*APP_OBJECT_COUNTS, "custom"):
            raise ConfigError(f"unknown app preset {run['app']!r}")
        if run["duration_us"] < 0:
            raise ConfigError("duration_us must be non-negative")
        if run["warmup_us"] < 0:
            raise ConfigError("warmup_us must be non-negative")
        if run["target_fps"] <= 0:
            raise ConfigError("target_fps must be positive")
        per = self.values["periods"]
        for key in ("cam_period_us", "imu_period_us"):
            if per[key] <= 0:
                raise ConfigError(f"{key} must be positive")
        mix = self.values["motion"]["class_mix"]
        if len(mix) != 4:
            raise ConfigError("class_mix needs exactly four occupancies")
        if abs(sum(mix) - 1.0) > 1e-9:
            raise ConfigError(f"class_mix must sum to 1, got {sum(mix)}")
        for key in ("trace_file",):
            path = self.values["motion"][key]
            if path and not os.path.exists(path):
                raise ConfigError(f"motion.{key} does not exist: {path}")
        scene_file = self.values["scene"]["scene_file"]
        if scene_file and not os.path.exists(scene_file):
            raise ConfigError(f"scene.scene_file does not exist: {scene_file}")
        if self.values["run"]["app"] == "custom" \
                and not scene_file and self.values["scene"]["custom_objects"] < 0:
            raise ConfigError("custom app needs scene.custom_objects >= 0")
        if self.values["sfr"]["zone_formula"] not in ("literal", "consistent"):
            raise ConfigError("sfr.zone_formula must be literal or consistent")

    # -- derived quantities ----------------------------------------------
    @property
    def policy(self) -> str:
        return self.values["run"]["policy"]

    @property
    def seed(self) -> int:
        return self.values["run"]["seed"]

    @property
    def duration_us(self) -> int:
        return self.values["run"]["duration_us"]

    @property
    def warmup_us(self) -> int:
        return self.values["run"]["warmup_us"]

    def frame_period_us(self) -> int:
        return round(1e6 / self.values["run"]["target_fps"])

    def atw_period_us(self) -> int:
        override = self.values["periods"]["atw_period_us"]
        return override if override > 0 else self.frame_period_us()

    def sr_period_us(self) -> int:
        override = self.values["periods"]["sr_period_us"]
        return override if override > 0 else self.frame_period_us()

    def platform_scale(self) -> float:
        plat = self.values["run"]["platform"]
        if plat == "custom":
            return self.values["platform_custom"]["scale"]
        return PLATFORM_SCALES[plat]

    def cost_model(self) -> CostErrorModel:
        mv = self.values["mvio"]
        if self.values["run"]["platform"] == "custom":
            pc = self.values["platform_custom"]
            base = CostErrorModel(
                vio_base_us=pc["vio_base_us"], imui_us=pc["imui_us"],
                sr_us=pc["sr_us"], srr_base_us=pc["srr_base_us"],
                atw_us=pc["atw_us"], atwr_us=pc["atwr_us"], k_obj=pc["k_obj"],
                n_ref=pc["n_ref"], v_ref=pc["v_ref"], w_ref=pc["w_ref"],
                motion_slope=pc["motion_slope"],
                crop_exponent=pc["crop_exponent"],
                l_min=mv["l_min"], l_max=mv["l_max"])
        else:
            base = CostErrorModel(l_min=mv["l_min"], l_max=mv["l_max"])
        return base.scaled(self.platform_scale())


@dataclass
class PlatformProfile:
    """Profiled task costs and controller constants for one platform."""

    t_vio_us: int
    t_imui_us: int
    t_sr_us: int
    t_srr_us: int
    t_atw_us: int
    t_atwr_us: int
    v_ref: float
    w_ref: float
    s_max: float
    p_min: float
    k_obj: float
    m_quality: float
    c_time_us: float
    n_ref: int

    def __post_init__(self):
        for f in fields(self):
            if f.name in ("p_min",):
                continue
            if getattr(self, f.name) <= 0:
                raise ConfigError(f"profile field {f.name} must be positive")
        if not (0.0 < self.p_min <= 1.0):
            raise ConfigError("profile p_min must lie in (0, 1]")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "PlatformProfile":
        return cls(**{f.name: d[f.name] for f in fields(cls)})
