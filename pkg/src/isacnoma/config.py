"""System configuration, scenario definitions and the INI config reader.

Defaults are the published system parameters.  Config files are INI files
(``configparser``) with the sections listed in :data:`SECTIONS`; every key
belongs to exactly one section, so command-line overrides use the bare key.
"""

from __future__ import annotations

import configparser
import dataclasses
import enum
import math
import re
from dataclasses import dataclass, field, fields
from typing import Iterable, Sequence

from .channel import DEFAULT_ECHO_HOPS
from .errors import ConfigError


class ScenarioKind(str, enum.Enum):
    NO_BLOCKAGE = "no_blockage"
    KEEP_LOS = "keep_los"
    SWITCH_NLOS = "switch_nlos"


@dataclass(frozen=True)
class ScenarioSpec:
    kind: ScenarioKind
    blockage_db: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ScenarioKind(self.kind))
        if self.blockage_db < 0:
            raise ConfigError("blockage_db must be non-negative")
        if self.kind is ScenarioKind.NO_BLOCKAGE and self.blockage_db != 0:
            raise ConfigError("the no-blockage scenario cannot carry a blockage loss")
        if self.kind is not ScenarioKind.NO_BLOCKAGE and self.blockage_db == 0:
            raise ConfigError(f"scenario {self.kind.value} needs a positive blockage loss")

    @property
    def name(self) -> str:
        if self.kind is ScenarioKind.NO_BLOCKAGE:
            return self.kind.value
        return f"{self.kind.value}_{self.blockage_db:g}db"

    @classmethod
    def parse(cls, text: str) -> "ScenarioSpec":
        text = text.strip().lower()
        if text == ScenarioKind.NO_BLOCKAGE.value:
            return cls(ScenarioKind.NO_BLOCKAGE)
        m = re.fullmatch(r"(keep_los|switch_nlos)_([0-9]+(?:\.[0-9]*)?)db", text)
        if not m:
            raise ConfigError(f"unknown scenario {text!r}; expected no_blockage, "
                              "keep_los_<x>db or switch_nlos_<x>db")
        return cls(ScenarioKind(m.group(1)), float(m.group(2)))


DEFAULT_SCENARIOS = ("no_blockage", "keep_los_20db", "keep_los_30db", "switch_nlos_20db")


@dataclass(frozen=True)
class SystemConfig:
    # array and stream dimensions
    n_t: int = 64
    n_r: int = 4
    n_r_rf: int = 4
    n_radar: int = 4
    n_s: int = 4
    n_clusters: int = 2
    k_subcarriers: int = 2
    spacing_wavelengths: float = 0.5
    # RF front end
    p_max: float = 1.0
    carrier_freq: float = 28e9
    bandwidth: float = 800e6
    noise_density_dbm_hz: float = -173.0
    # relative singular-value cuts of the pseudo-inverses in the analog
    # combiner design and in the zero-forcing digital precoder
    combiner_rcond: float = 10 ** -0.5
    zf_rcond: float = 1e-12
    # geometry: users share cluster 1, the target sits in cluster 2
    cluster1_az_deg: float = 100.0
    cluster1_el_deg: float = 30.0
    cluster2_az_deg: float = 140.0
    cluster2_el_deg: float = 30.0
    distances_m: tuple = (40.0, 120.0, 60.0)
    # aggregate LOS power gain |gamma|^2 per link (user1, user2, target), dB
    path_gain_db: tuple = (-93.4, -103.0, -96.9)
    nlos_deficit_db: float = 3.0
    nlos_min_paths: int = 2
    nlos_max_paths: int = 4
    nlos_max_delay_s: float = 100e-9
    nlos_angle_spread_deg: float = 20.0
    # sensing and blockage detection
    rho: tuple = (0.8, 0.5, 0.5)
    echo_hops: int = DEFAULT_ECHO_HOPS
    detector_blockage_db: float = 20.0
    detection_noise: bool = False
    # power allocation
    alpha_t: float = 0.3
    r_min: float = 2.0
    delta: float = 0.01
    max_iters: int = 200
    alpha2_init: float = 0.45
    p_com: float = 1.0
    p_sens: float = 1.0
    rate_floor_per_subcarrier: bool = False
    # sweep
    snr_grid_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    n_realizations: int = 100
    rng_seed: int = 20250701
    scenarios: tuple = DEFAULT_SCENARIOS

    def __post_init__(self):
        for name in ("distances_m", "path_gain_db", "rho", "snr_grid_db", "scenarios"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        problems = self.problems()
        if problems:
            raise ConfigError("; ".join(problems))

    @property
    def alpha_c(self) -> float:
        return 1.0 - self.alpha_t

    @property
    def scenario_specs(self) -> list:
        return [ScenarioSpec.parse(s) for s in self.scenarios]

    def problems(self) -> list:
        out = []
        for name in ("n_t", "n_r", "n_radar"):
            v = getattr(self, name)
            if v < 1 or math.isqrt(v) ** 2 != v:
                out.append(f"{name}={v} is not a perfect square")
        for name in ("n_r_rf", "n_s", "n_clusters", "k_subcarriers", "max_iters", "n_realizations",
                     "nlos_min_paths"):
            if getattr(self, name) < 1:
                out.append(f"{name} must be positive")
        if self.n_radar != self.n_s:
            out.append(f"n_radar={self.n_radar} must equal n_s={self.n_s}")
        if self.n_clusters != 2:
            out.append("only n_clusters=2 (one NOMA pair plus the target beam) is supported")
        if self.n_r_rf != self.n_s or self.n_r < self.n_s:
            out.append(f"n_r_rf must equal n_s and n_r must be >= n_s (got n_r={self.n_r}, "
                       f"n_r_rf={self.n_r_rf}, n_s={self.n_s})")
        if self.n_clusters * self.n_s > self.n_t:
            out.append("more RF chains than transmit antennas")
        for name in ("p_max", "carrier_freq", "bandwidth", "spacing_wavelengths", "p_com", "p_sens"):
            if not getattr(self, name) > 0:
                out.append(f"{name} must be positive")
        if len(self.distances_m) != 3 or len(self.path_gain_db) != 3 or len(self.rho) != 3:
            out.append("distances_m, path_gain_db and rho need one value per user1, user2, target")
        elif any(not 0.0 <= r <= 1.0 for r in self.rho):
            out.append("rho values must lie in [0, 1]")
        if not 0 < self.alpha_t <= 0.3:
            out.append("alpha_t must lie in (0, 0.3]")
        if self.r_min < 0:
            out.append("r_min must be non-negative")
        if not 0 < self.delta < self.alpha_c:
            out.append("delta must lie in (0, alpha_c)")
        if not 0.15 <= self.alpha2_init <= self.alpha_c - 0.05:
            out.append("alpha2_init must lie in [0.15, alpha_c - 0.05]")
        if self.nlos_max_paths < max(self.nlos_min_paths, 2):
            out.append("nlos_max_paths must be >= max(nlos_min_paths, 2)")
        if self.nlos_min_paths < 2:
            out.append("NLOS links need nlos_min_paths >= 2")
        for name in ("combiner_rcond", "zf_rcond"):
            if not 0 < getattr(self, name) < 1:
                out.append(f"{name} must lie in (0, 1)")
        if self.echo_hops not in (1, 2):
            out.append("echo_hops must be 1 or 2")
        if self.detector_blockage_db <= 0:
            out.append("detector_blockage_db must be positive")
        if not self.snr_grid_db:
            out.append("snr_grid_db is empty")
        if not 0 <= self.rng_seed < 2 ** 64:
            out.append("rng_seed must be an unsigned 64-bit integer")
        try:
            self.scenario_specs
        except ConfigError as exc:
            out.append(str(exc))
        return out

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)


SECTIONS = {
    "system": ("n_t", "n_r", "n_r_rf", "n_radar", "n_s", "n_clusters", "k_subcarriers",
               "spacing_wavelengths", "p_max", "carrier_freq", "bandwidth", "noise_density_dbm_hz", "combiner_rcond",
               "zf_rcond"),
    "geometry": ("cluster1_az_deg", "cluster1_el_deg", "cluster2_az_deg", "cluster2_el_deg",
                 "distances_m"),
    "channel": ("path_gain_db", "nlos_deficit_db", "nlos_min_paths", "nlos_max_paths",
                "nlos_max_delay_s", "nlos_angle_spread_deg"),
    "sensing": ("rho", "echo_hops", "detector_blockage_db", "detection_noise"),
    "power": ("alpha_t", "r_min", "delta", "max_iters", "alpha2_init", "p_com", "p_sens",
              "rate_floor_per_subcarrier"),
    "sweep": ("snr_grid_db", "n_realizations", "rng_seed", "scenarios"),
}
KEY_SECTION = {k: s for s, keys in SECTIONS.items() for k in keys}
_FIELD_TYPES = {f.name: f.default for f in fields(SystemConfig)}
assert set(KEY_SECTION) == set(_FIELD_TYPES)


def convert_value(key: str, text: str):
    """Convert the string ``text`` to the type of config field ``key``."""
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    default = _FIELD_TYPES[key]
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text, 0)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            items = [t.strip() for t in text.split(",") if t.strip()]
            if key == "scenarios":
                return tuple(items)
            return tuple(float(t) for t in items)
    except ValueError:
        raise ConfigError(f"invalid value {text!r} for config key {key!r}") from None
    raise ConfigError(f"config key {key!r} has unsupported type")


def parse_overrides(pairs: Iterable[str]) -> dict:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not KEY=VALUE")
        key, value = pair.split("=", 1)
        key = key.strip()
        if "." in key:
            section, key = key.split(".", 1)
            if KEY_SECTION.get(key) != section:
                raise ConfigError(f"unknown config key {section}.{key}")
        out[key] = convert_value(key, value)
    return out


def read_config_file(path) -> dict:
    """Parse an INI config file into a dict of typed field values."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    values = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        for key, text in parser.items(section):
            if KEY_SECTION.get(key) != section:
                raise ConfigError(f"unknown config key {key!r} in section [{section}]")
            values[key] = convert_value(key, text)
    return values


def parse_config(path=None, overrides: Sequence[str] = (), fallbacks=None, **extra):
    """Build a validated :class:`SystemConfig` and its scenario list.

    Precedence, lowest to highest: built-in defaults, ``fallbacks`` (a dict),
    the config file, ``overrides`` (``KEY=VALUE`` strings), then ``extra``
    keyword values.
    """
    values = dict(fallbacks or {})
    if path is not None:
        values.update(read_config_file(path))
    values.update(parse_overrides(overrides))
    values.update(extra)
    try:
        cfg = SystemConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg, cfg.scenario_specs


def dump_config(cfg: SystemConfig) -> str:
    """Render ``cfg`` as an INI file that :func:`parse_config` reads back."""
    lines = []
    for section, keys in SECTIONS.items():
        lines.append(f"[{section}]")
        for key in keys:
            v = getattr(cfg, key)
            if isinstance(v, tuple):
                text = ", ".join(str(x) if isinstance(x, str) else repr(float(x)) for x in v)
            elif isinstance(v, bool):
                text = "true" if v else "false"
            else:
                text = repr(v)
            lines.append(f"{key} = {text}")
        lines.append("")
    return "\n".join(lines)
