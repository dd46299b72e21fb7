"""Run configuration: sectioned key-value files with full defaults.

Every key has a shipped default reproducing the baseline system, so every
command runs with no config file at all. Unknown sections or keys are
rejected. Units follow the baseline table: repetition rate in MHz, dead
time in ns, fibre loss in dB/km.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .finitekey import SecurityParams
from .models import ChannelModel, DetectorModel, ProtocolParams, SourceModel
from .optimize import OptimizationConfig

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_values"]


class ConfigError(ValueError):
    """Malformed configuration; maps to CLI exit code 1."""


def parse_values(text: str) -> list[float]:
    """Parse '1,10,60' lists or inclusive 'start:stop:step' ranges."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"range must be start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ConfigError(f"range step must be positive, got {step}")
        out = []
        v = start
        while v <= stop + 1e-9:
            out.append(round(v, 12))
            v += step
        return out
    if not text:
        return []
    return [float(p) for p in text.split(",")]


def _parse_float(text: str) -> float:
    return float(text)


def _parse_int(text: str) -> int:
    return int(text)


# section -> key -> (parser, default). None defaults mean "unset".
_SCHEMA: dict[str, dict[str, tuple]] = {
    "source": {
        "mean_photon_number": (_parse_float, 0.0142),
        "g2": (_parse_float, 0.036),
        "rep_rate_mhz": (_parse_float, 160.7),
    },
    "detector": {
        "efficiency": (_parse_float, 0.6525),
        "dark_count_prob": (_parse_float, 1.47e-7),
        "dead_time_ns": (_parse_float, 27.5),
        "misalignment": (_parse_float, 0.003),
    },
    "channel": {
        "loss_per_km_db": (_parse_float, 0.1904),
        "distance_km": (_parse_float, 100.0),
        "loss_db": (_parse_float, None),
    },
    "protocol": {
        "p_x": (_parse_float, 0.5),
        "att": (_parse_float, 1.0),
    },
    "security": {
        "eps_prime": (_parse_float, 1e-10 / 6.0),
        "n_pe": (_parse_int, 2),
        "eps_cor": (_parse_float, 1e-15),
    },
    "optimizer": {
        "p_x_min": (_parse_float, 0.505),
        "p_x_max": (_parse_float, 0.995),
        "att_min": (_parse_float, 0.01),
        "att_max": (_parse_float, 1.0),
        "grid_resolution": (_parse_int, 32),
        "refinement_rounds": (_parse_int, 4),
        "shrink_factor": (_parse_float, 4.0),
        "loss_bisection_tol_db": (_parse_float, 0.01),
        "loss_cap_db": (_parse_float, 60.0),
    },
    "asymptotic": {
        "distances_km": (parse_values, [float(d) for d in range(0, 180, 5)]),
    },
    "finite": {
        "acquisition_times_s": (parse_values, [60.0]),
        "block_sizes_received": (parse_values, None),
    },
    "maxloss": {
        "acquisition_times_s": (parse_values, [1.0, 10.0, 60.0, 600.0, 3600.0]),
    },
    "oracle": {
        "seed": (_parse_int, 20240801),
        "n_pulses": (_parse_int, 10_000_000),
        "eps_test": (_parse_float, 0.01),
        "chernoff_trials": (_parse_int, 100_000),
        "sampling_trials": (_parse_int, 10_000),
        "losses_db": (parse_values, [0.0, 10.0, 20.0, 30.0, 35.0]),
        "selftest_bound_scale": (_parse_float, 1.0),
    },
}


@dataclass
class RunConfig:
    """Fully resolved configuration with constructed model objects."""

    source: SourceModel
    detector: DetectorModel
    protocol: ProtocolParams
    security: SecurityParams
    optimizer: OptimizationConfig
    loss_per_km_db: float
    distance_km: float | None
    loss_db: float | None
    asymptotic_distances_km: list[float]
    finite_acquisition_times_s: list[float] | None
    finite_block_sizes: list[float] | None
    maxloss_times_s: list[float]
    oracle: dict
    resolved: dict = field(repr=False)

    def fixed_channel(self) -> ChannelModel:
        """Channel for the commands that run at one operating point.

        An explicit loss_db takes precedence over the distance.
        """
        if self.loss_db is not None:
            return ChannelModel(loss_db=self.loss_db)
        return ChannelModel.from_fiber(self.distance_km, self.loss_per_km_db)


def _read_raw(path: str | None) -> dict[str, dict[str, object]]:
    values: dict[str, dict[str, object]] = {s: dict() for s in _SCHEMA}
    if path is None:
        return values
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, text in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            parse, _default = _SCHEMA[section][key]
            try:
                values[section][key] = parse(text)
            except (ValueError, ConfigError) as exc:
                raise ConfigError(f"bad value for [{section}] {key} = {text!r}: {exc}") from exc
    return values


def load_config(path: str | None = None) -> RunConfig:
    """Load and validate a config file; defaults fill every gap.

    Raises:
        ConfigError: unknown sections/keys, unparsable or inconsistent
            values (including model-level range violations).
    """
    raw = _read_raw(path)

    def get(section: str, key: str):
        if key in raw[section]:
            return raw[section][key]
        return _SCHEMA[section][key][1]

    resolved = {
        section: {key: get(section, key) for key in keys}
        for section, keys in _SCHEMA.items()
    }

    if raw["channel"].get("distance_km") is not None and raw["channel"].get("loss_db") is not None:
        raise ConfigError("[channel] distance_km and loss_db are mutually exclusive")
    if (raw["finite"].get("acquisition_times_s") is not None
            and raw["finite"].get("block_sizes_received") is not None):
        raise ConfigError("[finite] acquisition_times_s and block_sizes_received "
                          "are mutually exclusive")

    try:
        source = SourceModel(
            mean_photon_number=get("source", "mean_photon_number"),
            g2=get("source", "g2"),
            rep_rate=get("source", "rep_rate_mhz") * 1e6,
        )
        detector = DetectorModel(
            det_efficiency=get("detector", "efficiency"),
            dark_count_prob=get("detector", "dark_count_prob"),
            dead_time=get("detector", "dead_time_ns") * 1e-9,
            misalignment=get("detector", "misalignment"),
        )
        protocol = ProtocolParams(p_x=get("protocol", "p_x"), att=get("protocol", "att"))
        security = SecurityParams(
            eps_prime=get("security", "eps_prime"),
            n_pe=get("security", "n_pe"),
            eps_cor=get("security", "eps_cor"),
        )
        optimizer = OptimizationConfig(
            p_x_range=(get("optimizer", "p_x_min"), get("optimizer", "p_x_max")),
            att_range=(get("optimizer", "att_min"), get("optimizer", "att_max")),
            grid_resolution=get("optimizer", "grid_resolution"),
            refinement_rounds=get("optimizer", "refinement_rounds"),
            shrink_factor=get("optimizer", "shrink_factor"),
            loss_bisection_tol_db=get("optimizer", "loss_bisection_tol_db"),
            loss_cap_db=get("optimizer", "loss_cap_db"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    finite_times = get("finite", "acquisition_times_s")
    finite_blocks = get("finite", "block_sizes_received")
    if raw["finite"].get("block_sizes_received") is not None:
        finite_times = None

    oracle = {key: get("oracle", key) for key in _SCHEMA["oracle"]}

    return RunConfig(
        source=source,
        detector=detector,
        protocol=protocol,
        security=security,
        optimizer=optimizer,
        loss_per_km_db=get("channel", "loss_per_km_db"),
        distance_km=get("channel", "distance_km"),
        loss_db=get("channel", "loss_db"),
        asymptotic_distances_km=get("asymptotic", "distances_km"),
        finite_acquisition_times_s=finite_times,
        finite_block_sizes=finite_blocks,
        maxloss_times_s=get("maxloss", "acquisition_times_s"),
        oracle=oracle,
        resolved=resolved,
    )
