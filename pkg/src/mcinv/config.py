"""Flat `key = value` config files with fail-closed schemas, and run manifests.

Config format: one `key = value` pair per line; blank lines and lines starting
with `#` are ignored.  Unknown keys, duplicate keys, and malformed values are
errors naming the line.  Lists are comma-separated; float lists also accept
`logspace(lo, hi, count)`.  Serialization materializes every default, so a
resolved config re-fed as input reproduces the run exactly.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .benchmark import DEFAULT_ALPHA_GRID, DEFAULT_NDNN_ALPHA_GRID, ExperimentConfig
from .errors import ConfigError

__all__ = [
    "SchemaField", "BENCH_SCHEMA", "SOLVE_SCHEMA", "TRAIN_SCHEMA",
    "parse_config_text", "parse_config_file", "serialize_config",
    "experiment_config_from_values", "values_from_experiment_config",
    "RunManifest", "write_manifest", "load_manifest",
]

_REQUIRED = object()


def _parse_int(text):
    return int(text)


def _parse_float(text):
    value = float(text)
    if math.isnan(value):
        raise ValueError("nan is not a valid value")
    return value


def _parse_bool(text):
    lowered = text.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def _parse_str(text):
    return text


def _parse_choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {options}, got {text!r}")
        return text
    return parse


def _parse_int_list(text):
    return tuple(int(part.strip()) for part in text.split(",") if part.strip())


def _parse_float_list(text):
    stripped = text.strip()
    if stripped.startswith("logspace(") and stripped.endswith(")"):
        args = [part.strip() for part in stripped[len("logspace("):-1].split(",")]
        if len(args) != 3:
            raise ValueError("logspace takes (low, high, count)")
        low, high, count = float(args[0]), float(args[1]), int(args[2])
        if low <= 0 or high <= 0:
            raise ValueError("logspace bounds must be positive")
        return tuple(np.logspace(math.log10(low), math.log10(high), count))
    return tuple(float(part.strip()) for part in stripped.split(",") if part.strip())


def _parse_optional_path(text):
    return None if text.lower() == "none" else text


def _show_float(value):
    return repr(float(value))


def _show_list(values):
    return ",".join(repr(float(v)) if isinstance(v, float) else str(v) for v in values)


def _show_bool(value):
    return "true" if value else "false"


def _show_optional(value):
    return "none" if value is None else str(value)


@dataclass(frozen=True)
class SchemaField:
    parse: callable
    default: object = _REQUIRED
    show: callable = str
    help: str = ""

    @property
    def required(self):
        return self.default is _REQUIRED


BENCH_SCHEMA = {
    "mode": SchemaField(_parse_choice("standard", "convergence"), "standard",
                        help="standard sweep or convergence study"),
    "grid_size": SchemaField(_parse_int, 200, help="grid points on [0, 1]"),
    "observation_count": SchemaField(_parse_int, 10, help="blur rows sampled per repetition"),
    "kernel_width": SchemaField(_parse_float, 0.03, _show_float,
                                help="Gaussian kernel deviation, unit-interval lengths"),
    "noise_fraction": SchemaField(_parse_float, 0.05, _show_float,
                                  help="sigma = fraction * max|clean data|"),
    "prior_kind": SchemaField(_parse_choice("dirichlet", "relaxed"), "dirichlet"),
    "prior_scale": SchemaField(_parse_float, 1200.0, _show_float,
                               help="multiplier on the precision stencil"),
    "boundary_relaxation": SchemaField(_parse_float, 1.0, _show_float,
                                       help="added to boundary diagonal of the relaxed prior"),
    "training_sizes": SchemaField(_parse_int_list, (30, 60, 90, 120, 150), _show_list),
    "test_size": SchemaField(_parse_int, 50),
    "repetitions": SchemaField(_parse_int, 100),
    "alpha_grid": SchemaField(_parse_float_list, tuple(DEFAULT_ALPHA_GRID), _show_list,
                              help="model-weight grid for mcdnn/tikhonov"),
    "ndnn_alpha_grid": SchemaField(_parse_float_list, tuple(DEFAULT_NDNN_ALPHA_GRID), _show_list,
                                   help="tied penalty grid (alpha1 = alpha2)"),
    "master_seed": SchemaField(_parse_int, 0),
    "fixed_observation_indices": SchemaField(_parse_bool, False, _show_bool,
                                             help="reuse one index draw across repetitions"),
}

# problem-data keys shared by solve and train; paths resolve against the config file
_PROBLEM_KEYS = {
    "training_parameters": SchemaField(_parse_optional_path, None, _show_optional,
                                       help="CSV path, parameter columns"),
    "training_data": SchemaField(_parse_optional_path, None, _show_optional,
                                 help="CSV path, observation columns"),
    "forward_matrix": SchemaField(_parse_optional_path, None, _show_optional,
                                  help="CSV path, operator matrix"),
    "observation": SchemaField(_parse_optional_path, None, _show_optional,
                               help="CSV path, observation vector to invert"),
    "prior_mean": SchemaField(_parse_optional_path, None, _show_optional,
                              help="CSV path or none for zeros"),
    "prior_covariance": SchemaField(_parse_optional_path, None, _show_optional,
                                    help="CSV path or none for the identity"),
    "noise_sigma": SchemaField(_parse_float, 1.0, _show_float,
                               help="observation noise deviation; covariance sigma^2 I"),
}

SOLVE_SCHEMA = {
    "method": SchemaField(_parse_choice("ndnn", "mcdnn", "mcdnn_unweighted", "tikhonov")),
    "alpha": SchemaField(_parse_float, 1.0, _show_float),
    "alpha1": SchemaField(_parse_float, 0.0, _show_float),
    "alpha2": SchemaField(_parse_float, 0.0, _show_float),
    "pinv_tolerance": SchemaField(_parse_float, 1e-12, _show_float),
    "reference_parameter": SchemaField(_parse_optional_path, None, _show_optional,
                                       help="CSV path or none for the prior mean"),
    **_PROBLEM_KEYS,
}

TRAIN_SCHEMA = dict(_PROBLEM_KEYS)


def parse_config_text(text, schema, source="<config>"):
    """Parse and validate flat config text against a schema, filling defaults."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected `key = value`, got {line!r}")
        key, _, raw_value = line.partition("=")
        key = key.strip()
        raw_value = raw_value.strip()
        if key not in schema:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = schema[key].parse(raw_value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from exc
    for key, spec in schema.items():
        if key not in values:
            if spec.required:
                raise ConfigError(f"{source}: missing required key {key!r}")
            values[key] = spec.default
    return values


def parse_config_file(path, schema):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, schema, source=str(path))


def serialize_config(values, schema):
    """Render values back to config text, in schema order, defaults materialized."""
    lines = []
    for key, spec in schema.items():
        value = values.get(key, spec.default)
        if value is _REQUIRED:
            raise ConfigError(f"cannot serialize config: {key!r} has no value")
        lines.append(f"{key} = {spec.show(value)}")
    return "\n".join(lines) + "\n"


def experiment_config_from_values(values):
    return ExperimentConfig(
        grid_size=values["grid_size"],
        observation_count=values["observation_count"],
        kernel_width=values["kernel_width"],
        noise_fraction=values["noise_fraction"],
        prior_kind=values["prior_kind"],
        prior_scale=values["prior_scale"],
        boundary_relaxation=values["boundary_relaxation"],
        training_sizes=values["training_sizes"],
        test_size=values["test_size"],
        repetitions=values["repetitions"],
        alpha_grid=values["alpha_grid"],
        ndnn_alpha_grid=values["ndnn_alpha_grid"],
        master_seed=values["master_seed"],
        fixed_observation_indices=values["fixed_observation_indices"],
        mode=values["mode"],
    )


def values_from_experiment_config(config):
    return {key: getattr(config, key) for key in BENCH_SCHEMA}


@dataclass
class RunManifest:
    """What a run resolved to: config, seeds, outputs, and version."""

    subcommand: str
    tool_version: str
    config: dict
    seeds: dict
    outputs: list
    duration_seconds: float
    notes: dict = field(default_factory=dict)


def write_manifest(path, manifest, out_dir=None):
    """Serialize the manifest as JSON, checking the listed outputs exist."""
    import os

    base = out_dir if out_dir is not None else os.path.dirname(path)
    for name in manifest.outputs:
        if not os.path.exists(os.path.join(base, name)):
            raise ConfigError(f"manifest lists missing output {name!r}")
    payload = {
        "subcommand": manifest.subcommand,
        "tool_version": manifest.tool_version,
        "config": manifest.config,
        "seeds": manifest.seeds,
        "outputs": list(manifest.outputs),
        "duration_seconds": manifest.duration_seconds,
        "notes": manifest.notes,
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_manifest(path):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"manifest {path} is not valid JSON: {exc}") from exc
    try:
        return RunManifest(
            subcommand=payload["subcommand"],
            tool_version=payload["tool_version"],
            config=payload["config"],
            seeds=payload["seeds"],
            outputs=payload["outputs"],
            duration_seconds=payload["duration_seconds"],
            notes=payload.get("notes", {}),
        )
    except KeyError as exc:
        raise ConfigError(f"manifest {path} is missing key {exc}") from exc
