"""Run configuration: strict YAML with typed blocks.

Every key is validated against a schema; unknown keys are hard errors
that report file, line and key so config drift cannot pass silently.
Omitted sections fall back to the reference device and stock experiment
grids, so an empty file is a valid configuration.
"""

import math
from dataclasses import dataclass, field, fields

import numpy as np
import yaml

from .cavity_bloch import ReadoutSettings
from .device_model import reference_device


class ConfigError(Exception):
    """Configuration problem with a file location attached."""

    def __init__(self, path, line, message):
        self.path = path
        self.line = line
        loc = "%s:%s" % (path, line if line is not None else "?")
        super().__init__("%s: %s" % (loc, message))


@dataclass(frozen=True)
class SpectrumBlock:
    omega_01_min_MHz: float = 4500.0
    omega_01_max_MHz: float = 6300.0
    points: int = 91

    def __post_init__(self):
        if self.points < 2:
            raise ValueError("spectrum.points must be >= 2")
        if self.omega_01_max_MHz <= self.omega_01_min_MHz:
            raise ValueError("spectrum sweep must have positive extent")


@dataclass(frozen=True)
class DecayMapBlock:
    detuning_min_MHz: float = 0.0
    detuning_max_MHz: float = 13.0
    points: int = 53

    def __post_init__(self):
        if self.points < 2:
            raise ValueError("decay_map.points must be >= 2")
        if self.detuning_max_MHz <= self.detuning_min_MHz:
            raise ValueError("decay_map grid must have positive extent")


@dataclass(frozen=True)
class RabiBlock:
    transition: str = "01"
    amplitude_max_MHz: float = 200.0
    points: int = 41

    def __post_init__(self):
        if self.transition not in ("01", "12"):
            raise ValueError("rabi.transition must be '01' or '12'")
        if self.points < 8:
            raise ValueError("rabi.points must be >= 8")
        if self.amplitude_max_MHz <= 0:
            raise ValueError("rabi.amplitude_max_MHz must be > 0")


@dataclass(frozen=True)
class RamseyBlock:
    detuning_MHz: float = 5.0
    delay_max_ns: float = 800.0
    delay_step_ns: float = 5.0

    def __post_init__(self):
        if self.detuning_MHz == 0.0:
            raise ValueError("ramsey12.detuning_MHz must be nonzero")
        if self.delay_step_ns <= 0 or self.delay_max_ns <= 0:
            raise ValueError("ramsey12 delays must be positive")
        if self.delay_max_ns / self.delay_step_ns < 15:
            raise ValueError("ramsey12 grid needs at least 16 points")


@dataclass(frozen=True)
class TomoBlock:
    target: object = "psi_a"
    window_ns: float = 500.0
    bootstrap_resamples: int = 200
    noise_sigma: float = None
    noise_fraction: float = 0.015

    def __post_init__(self):
        if self.window_ns <= 0:
            raise ValueError("tomo.window_ns must be > 0")
        if self.bootstrap_resamples < 0:
            raise ValueError("tomo.bootstrap_resamples must be >= 0")


@dataclass(frozen=True)
class BatchBlock:
    targets: tuple = ()
    window_ns: float = 500.0
    noise_sigma: float = None
    noise_fraction: float = 0.015

    def __post_init__(self):
        if self.window_ns <= 0:
            raise ValueError("batch.window_ns must be > 0")


@dataclass(frozen=True)
class RunConfig:
    device: object = None
    readout: ReadoutSettings = field(default_factory=ReadoutSettings)
    seed: int = 0
    output_dir: str = "runs"
    spectrum: SpectrumBlock = field(default_factory=SpectrumBlock)
    decay_map: DecayMapBlock = field(default_factory=DecayMapBlock)
    rabi: RabiBlock = field(default_factory=RabiBlock)
    ramsey12: RamseyBlock = field(default_factory=RamseyBlock)
    tomo: TomoBlock = field(default_factory=TomoBlock)
    batch: BatchBlock = field(default_factory=BatchBlock)

    def __post_init__(self):
        if self.device is None:
            object.__setattr__(self, "device", reference_device())
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")


def default_config():
    return RunConfig()


# map from config keys (with units) to constructor arguments
_DEVICE_KEYS = {
    "charging_energy_MHz": "charging_energy",
    "omega_r_MHz": "omega_r",
    "omega_01_MHz": "omega_01",
    "g0_MHz": "g0",
    "eta": "eta",
    "anharmonicity_MHz": "anharmonicity",
    "kappa_MHz": "kappa",
    "t1_ns": "t1",
    "t2_ns": "t2",
    "ej_max_MHz": "ej_max",
}
_READOUT_KEYS = {
    "delta_rm_MHz": "delta_rm",
    "drive_amp_MHz": "drive_amp",
    "t_start_ns": "t_start",
    "t_end_ns": "t_end",
    "dt_ns": "dt",
}
_BLOCKS = {
    "spectrum": SpectrumBlock,
    "decay_map": DecayMapBlock,
    "rabi": RabiBlock,
    "ramsey12": RamseyBlock,
    "tomo": TomoBlock,
    "batch": BatchBlock,
}


def _key_lines(path):
    """(section, key) -> 1-based line numbers from the YAML node graph."""
    with open(path, "r") as fh:
        root = yaml.compose(fh)
    lines = {}
    if root is None:
        return lines
    if not isinstance(root, yaml.MappingNode):
        raise ConfigError(path, 1, "top level must be a mapping")
    for key_node, val_node in root.value:
        lines[(key_node.value,)] = key_node.start_mark.line + 1
        if isinstance(val_node, yaml.MappingNode):
            for sub_key, _ in val_node.value:
                lines[(key_node.value, sub_key.value)] = \
                    sub_key.start_mark.line + 1
    return lines


def _check_keys(path, lines, section, mapping, allowed):
    for key in mapping:
        if key not in allowed:
            raise ConfigError(
                path, lines.get((section, key), lines.get((section,))),
                "unknown key %r in section %r" % (key, section))


def _coerce_scalars(section, mapping, numeric_keys):
    out = {}
    for key, value in mapping.items():
        if key in numeric_keys and isinstance(value, (int, float)) \
                and not isinstance(value, bool):
            out[key] = float(value)
        else:
            out[key] = value
    return out


def parse_target(spec):
    """Resolve a target state: a known label or six numbers
    (re0, im0, re1, im1, re2, im2). Returns (label, unit vector)."""
    from .experiments import default_targets
    if isinstance(spec, str):
        named = {label: vec for label, vec in default_targets()}
        aliases = {"0": "|0>", "1": "|1>", "2": "|2>"}
        label = aliases.get(spec, spec)
        if label not in named:
            raise ValueError(
                "unknown target %r; known names: %s"
                % (spec, ", ".join(sorted(named))))
        return label, named[label]
    seq = list(spec)
    if len(seq) != 6 or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool)
            for v in seq):
        raise ValueError(
            "custom target must be six numbers re0, im0, re1, im1, re2, im2")
    vec = np.array([seq[0] + 1j * seq[1], seq[2] + 1j * seq[3],
                    seq[4] + 1j * seq[5]])
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        raise ValueError("custom target must be a nonzero vector")
    return "custom", vec / norm


def load_config(path):
    """Parse and validate a YAML run configuration."""
    try:
        with open(path, "r") as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(path, None, "file not found")
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(path, mark.line + 1 if mark else None,
                          "invalid YAML: %s" % exc)
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(path, 1, "top level must be a mapping")
    lines = _key_lines(path)

    top_allowed = {"device", "readout", "seed", "output_dir"} | set(_BLOCKS)
    for key in raw:
        if key not in top_allowed:
            raise ConfigError(path, lines.get((key,)),
                              "unknown key %r at top level" % key)

    def section(name):
        value = raw.get(name, {})
        if value is None:
            value = {}
        if not isinstance(value, dict):
            raise ConfigError(path, lines.get((name,)),
                              "section %r must be a mapping" % name)
        return value

    kwargs = {}
    dev = section("device")
    _check_keys(path, lines, "device", dev, _DEVICE_KEYS)
    try:
        overrides = {}
        for key, value in dev.items():
            name = _DEVICE_KEYS[key]
            if name in ("t1", "t2", "eta"):
                if not isinstance(value, (list, tuple)):
                    raise ValueError("%s must be a list" % key)
                overrides[name] = tuple(value)
            else:
                overrides[name] = value
        kwargs["device"] = reference_device(**overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, lines.get(("device",)), str(exc))

    ro = section("readout")
    _check_keys(path, lines, "readout", ro, _READOUT_KEYS)
    try:
        kwargs["readout"] = ReadoutSettings(
            **{_READOUT_KEYS[k]: float(v) for k, v in ro.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, lines.get(("readout",)), str(exc))

    for name, cls in _BLOCKS.items():
        blk = section(name)
        allowed = {f.name for f in fields(cls)}
        _check_keys(path, lines, name, blk, allowed)
        numeric = {f.name for f in fields(cls)
                   if f.type in (float, "float")}
        try:
            if name == "batch" and "targets" in blk:
                blk = dict(blk)
                if not isinstance(blk["targets"], (list, tuple)):
                    raise ValueError("batch.targets must be a list")
                blk["targets"] = tuple(
                    tuple(t) if isinstance(t, (list, tuple)) else t
                    for t in blk["targets"])
            kwargs[name] = cls(**_coerce_scalars(name, blk, numeric))
        except (TypeError, ValueError) as exc:
            raise ConfigError(path, lines.get((name,)), str(exc))

    if "seed" in raw:
        seed = raw["seed"]
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ConfigError(path, lines.get(("seed",)),
                              "seed must be a nonnegative integer")
        kwargs["seed"] = seed
    if "output_dir" in raw:
        out = raw["output_dir"]
        if not isinstance(out, str) or not out:
            raise ConfigError(path, lines.get(("output_dir",)),
                              "output_dir must be a nonempty string")
        kwargs["output_dir"] = out

    try:
        return RunConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(path, None, str(exc))


def config_as_dict(cfg):
    """Plain nested dict of every resolved parameter, for manifests."""
    def scrub(value):
        if isinstance(value, (list, tuple)):
            return [scrub(v) for v in value]
        if isinstance(value, float) and math.isnan(value):
            return None
        return value

    from dataclasses import asdict
    out = {
        "device": {k: scrub(v) for k, v in asdict(cfg.device).items()},
        "readout": asdict(cfg.readout),
        "seed": cfg.seed,
        "output_dir": cfg.output_dir,
    }
    for name in _BLOCKS:
        block = asdict(getattr(cfg, name))
        if name == "batch":
            block["targets"] = scrub(list(block["targets"]))
        out[name] = block
    return out
