"""Configuration files: strict INI parsing, env overrides, canonical round-trip.

Every key must be known (typos are hard errors naming the offending key).
Powers may be given in dBm through the `_dbm` key variant; everything is stored
internally in linear mW.  The canonical serialization embedded in CSV metadata
re-parses to an identical ExperimentConfig.
"""

from __future__ import annotations

import configparser
import hashlib
import os

from .experiments import ExperimentConfig
from .power import PowerModelParams, dbm_to_mw

ENV_PREFIX = "SURFMIMO_"


class ConfigError(ValueError):
    """Malformed configuration: unknown key/section or unparseable value."""


def _parse_float(s: str) -> float:
    try:
        return float(s)
    except ValueError as exc:
        raise ConfigError(f"expected a number, got {s!r}") from exc


def _parse_int(s: str) -> int:
    f = _parse_float(s)
    if f != int(f):
        raise ConfigError(f"expected an integer, got {s!r}")
    return int(f)


def _parse_pair(s: str) -> tuple[float, float]:
    parts = [p.strip() for p in s.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"expected 'low, high', got {s!r}")
    return _parse_float(parts[0]), _parse_float(parts[1])


def _parse_list(s: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in s.split(",") if p.strip())


def _parse_optional_float(s: str) -> float | None:
    return None if s.strip() == "" else _parse_float(s)


# section -> key -> (ExperimentConfig attribute or power-param handler, parser)
_SCHEMA = {
    "run": {
        "architectures": ("architectures", _parse_list),
        "strategy": ("strategy", str.strip),
        "trials": ("trials", _parse_int),
        "base_seed": ("base_seed", _parse_int),
        "workers": ("workers", _parse_int),
        "power_mode": ("power_mode", str.strip),
        "spillover_source": ("spillover_source", str.strip),
    },
    "system": {
        "m": ("m", _parse_int),
        "n": ("n", _parse_int),
        "q": ("q", _parse_int),
        "j": ("j", _parse_int),
        "k": ("k", _parse_int),
        "l": ("l", _parse_int),
    },
    "channel": {
        "pathloss_distance_m": ("pathloss_distance_m", _parse_float),
        "pathloss_exponent": ("pathloss_exponent", _parse_float),
        "wavelength_m": ("wavelength_m", _parse_float),
        "spacing_m": ("spacing_m", _parse_float),
        "aod_theta_rad": ("aod_theta_rad", _parse_pair),
        "aod_phi_rad": ("aod_phi_rad", _parse_pair),
        "aoa_theta_rad": ("aoa_theta_rad", _parse_pair),
        "aoa_phi_rad": ("aoa_phi_rad", _parse_pair),
    },
    "geometry": {
        "feed_exponent": ("feed_exponent", _parse_float),
        "ring_radius_m": ("ring_radius_m", _parse_optional_float),
        "feed_distance_m": ("feed_distance_m", _parse_optional_float),
    },
    "noise": {
        "bandwidth_hz": ("bandwidth_hz", _parse_float),
        "psd_dbm_hz": ("psd_dbm_hz", _parse_float),
        "noise_figure_db": ("noise_figure_db", _parse_float),
    },
    "power": {
        "p_bb_mw": ("p_bb_mw", _parse_float),
        "p_rfc_mw": ("p_rfc_mw", _parse_float),
        "p_sw_mw": ("p_sw_mw", _parse_float),
        "p_amp_mw": ("p_amp_mw", _parse_float),
        "p_tx_mw": ("p_tx_mw", _parse_float),
        "p_tx_dbm": ("p_tx_mw", lambda s: dbm_to_mw(_parse_float(s))),
        "g_amp_db": ("g_amp_db", _parse_float),
        "l_d_db": ("l_d_db", _parse_float),
        "l_c_db": ("l_c_db", _parse_float),
        "l_p_db": ("l_p_db", _parse_float),
        "rho_a_irs_loss_db": ("rho_a_irs", lambda s: 10 ** (-_parse_float(s) / 10)),
        "rho_a_its_loss_db": ("rho_a_its", lambda s: 10 ** (-_parse_float(s) / 10)),
        "rho_a_irs": ("rho_a_irs", _parse_float),
        "rho_a_its": ("rho_a_its", _parse_float),
        "rho_pa": ("rho_pa", _parse_float),
    },
    "sweep": {
        "sweep_param": ("sweep_param", str.strip),
        "sweep_values": (
            "sweep_values",
            lambda s: tuple(_parse_float(v) for v in _parse_list(s)),
        ),
    },
}

_POWER_FIELDS = {
    "p_bb_mw",
    "p_rfc_mw",
    "p_sw_mw",
    "p_amp_mw",
    "p_tx_mw",
    "g_amp_db",
    "l_d_db",
    "l_c_db",
    "l_p_db",
    "rho_a_irs",
    "rho_a_its",
    "rho_pa",
}


def apply_env_overrides(values: dict, environ=None) -> dict:
    """Fold SURFMIMO_<SECTION>_<KEY>=value environment overrides into `values`."""
    environ = os.environ if environ is None else environ
    out = dict(values)
    for section, keys in _SCHEMA.items():
        for key in keys:
            env_key = f"{ENV_PREFIX}{section.upper()}_{key.upper()}"
            if env_key in environ:
                out[(section, key)] = environ[env_key]
    return out


def _raw_values(text: str, source: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {source}: {exc}") from exc
    values: dict = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}] in {source}")
        for key, val in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(
                    f"unknown key '{key}' in section [{section}] of {source}"
                )
            values[(section, key)] = val
    return values


def config_from_values(values: dict) -> ExperimentConfig:
    cfg_kwargs: dict = {}
    power_kwargs: dict = {}
    for (section, key), raw in values.items():
        target, parse = _SCHEMA[section][key]
        try:
            parsed = parse(raw)
        except ConfigError as exc:
            raise ConfigError(f"bad value for '{key}' in [{section}]: {exc}") from exc
        if section == "power" and target in _POWER_FIELDS:
            power_kwargs[target] = parsed
        else:
            cfg_kwargs[target] = parsed
    try:
        power = PowerModelParams(**power_kwargs)
        return ExperimentConfig(power=power, **cfg_kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | None, environ=None) -> ExperimentConfig:
    """Parse an INI file (or use defaults when path is None) plus env overrides."""
    if path is None:
        values = {}
        source = "<defaults>"
    else:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        source = path
        values = _raw_values(text, source)
    values = apply_env_overrides(values, environ)
    return config_from_values(values)


def canonical_items(cfg: ExperimentConfig) -> list[tuple[str, str, str]]:
    """(section, key, value) triples that reconstruct `cfg` exactly."""

    def fmt(value) -> str:
        if isinstance(value, tuple):
            return ", ".join(fmt(v) for v in value)
        if isinstance(value, float):
            return repr(value)
        if value is None:
            return ""
        return str(value)

    items = [
        ("run", "architectures", fmt(cfg.architectures)),
        ("run", "strategy", cfg.strategy),
        ("run", "trials", fmt(cfg.trials)),
        ("run", "base_seed", fmt(cfg.base_seed)),
        ("run", "workers", fmt(cfg.workers)),
        ("run", "power_mode", cfg.power_mode),
        ("run", "spillover_source", cfg.spillover_source),
        ("system", "m", fmt(cfg.m)),
        ("system", "n", fmt(cfg.n)),
        ("system", "q", fmt(cfg.q)),
        ("system", "j", fmt(cfg.j)),
        ("system", "k", fmt(cfg.k)),
        ("system", "l", fmt(cfg.l)),
        ("channel", "pathloss_distance_m", fmt(cfg.pathloss_distance_m)),
        ("channel", "pathloss_exponent", fmt(cfg.pathloss_exponent)),
        ("channel", "wavelength_m", fmt(cfg.wavelength_m)),
        ("channel", "spacing_m", fmt(cfg.spacing_m)),
        ("channel", "aod_theta_rad", fmt(cfg.aod_theta_rad)),
        ("channel", "aod_phi_rad", fmt(cfg.aod_phi_rad)),
        ("channel", "aoa_theta_rad", fmt(cfg.aoa_theta_rad)),
        ("channel", "aoa_phi_rad", fmt(cfg.aoa_phi_rad)),
        ("geometry", "feed_exponent", fmt(cfg.feed_exponent)),
        ("geometry", "ring_radius_m", fmt(cfg.ring_radius_m)),
        ("geometry", "feed_distance_m", fmt(cfg.feed_distance_m)),
        ("noise", "bandwidth_hz", fmt(cfg.bandwidth_hz)),
        ("noise", "psd_dbm_hz", fmt(cfg.psd_dbm_hz)),
        ("noise", "noise_figure_db", fmt(cfg.noise_figure_db)),
        ("power", "p_bb_mw", fmt(cfg.power.p_bb_mw)),
        ("power", "p_rfc_mw", fmt(cfg.power.p_rfc_mw)),
        ("power", "p_sw_mw", fmt(cfg.power.p_sw_mw)),
        ("power", "p_amp_mw", fmt(cfg.power.p_amp_mw)),
        ("power", "p_tx_mw", fmt(cfg.power.p_tx_mw)),
        ("power", "g_amp_db", fmt(cfg.power.g_amp_db)),
        ("power", "l_d_db", fmt(cfg.power.l_d_db)),
        ("power", "l_c_db", fmt(cfg.power.l_c_db)),
        ("power", "l_p_db", fmt(cfg.power.l_p_db)),
        ("power", "rho_a_irs", fmt(cfg.power.rho_a_irs)),
        ("power", "rho_a_its", fmt(cfg.power.rho_a_its)),
        ("power", "rho_pa", fmt(cfg.power.rho_pa)),
        ("sweep", "sweep_param", cfg.sweep_param),
        ("sweep", "sweep_values", fmt(cfg.sweep_values)),
    ]
    return items


def config_from_metadata(items: list[tuple[str, str, str]]) -> ExperimentConfig:
    """Rebuild an ExperimentConfig from canonical (section, key, value) triples."""
    values = {}
    for section, key, value in items:
        if section not in _SCHEMA or key not in _SCHEMA[section]:
            raise ConfigError(f"unknown metadata key {section}.{key}")
        values[(section, key)] = value
    return config_from_values(values)


def config_hash(cfg: ExperimentConfig) -> str:
    blob = "\n".join(f"{s}.{k} = {v}" for s, k, v in canonical_items(cfg))
    return hashlib.sha256(blob.encode()).hexdigest()
