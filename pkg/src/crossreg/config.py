"""Flat key-value config files with dotted section names.

Format example::

    # registration settings
    keypoints = 512
    patch.radius = 0.3
    filter.sigma_d = 0.1
    estimator.method = weighted_svd

Precedence when building a PipelineConfig: CLI overrides > file > defaults.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

from .descriptor import PatchParams
from .errors import ConfigError
from .estimation import EstimatorConfig
from .filtering import FilterConfig
from .metrics import MetricThresholds
from .pipeline import PipelineConfig

# flat key -> (section attribute or None, field name, type)
_SCHEMA: dict[str, tuple[str | None, str, type]] = {
    "seed": (None, "seed", int),
    "keypoints": (None, "keypoints", int),
    "min_patch_points": (None, "min_patch_points", int),
    "normalization": (None, "normalization", str),
    "canonicalize": (None, "canonicalize", bool),
    "refiner": (None, "refiner", str),
    "spherical_voxels": (None, "spherical_voxels", bool),
    "matcher": (None, "matcher", str),
    "matcher_k": (None, "matcher_k", int),
    "softmax_temperature": (None, "softmax_temperature", float),
    "hcf_enabled": (None, "hcf_enabled", bool),
    "patch.radius": ("patch", "radius", float),
    "patch.bins_azimuth": ("patch", "bins_azimuth", int),
    "patch.bins_polar": ("patch", "bins_polar", int),
    "patch.bins_radial": ("patch", "bins_radial", int),
    "filter.sigma_d": ("filtering", "sigma_d", float),
    "filter.keep_ratio": ("filtering", "keep_ratio", float),
    "filter.layers": ("filtering", "layers", int),
    "filter.min_survivors": ("filtering", "min_survivors", int),
    "filter.max_correspondences": ("filtering", "max_correspondences", int),
    "estimator.method": ("estimator", "method", str),
    "estimator.ransac_iterations": ("estimator", "ransac_iterations", int),
    "estimator.ransac_inlier_threshold": ("estimator", "ransac_inlier_threshold", float),
    "estimator.ransac_sample_size": ("estimator", "ransac_sample_size", int),
    "estimator.confidence": ("estimator", "confidence", float),
    "thresholds.tau1": ("thresholds", "tau1", float),
    "thresholds.tau2": ("thresholds", "tau2", float),
    "thresholds.re_max_deg": ("thresholds", "re_max_deg", float),
    "thresholds.te_max": ("thresholds", "te_max", float),
    "thresholds.rmse_max": ("thresholds", "rmse_max", float),
}

_SECTION_TYPES = {
    "patch": PatchParams,
    "filtering": FilterConfig,
    "estimator": EstimatorConfig,
    "thresholds": MetricThresholds,
}


def flat_keys() -> list[str]:
    return list(_SCHEMA)


def _parse_bool(raw: str, key: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"cannot parse {raw!r} as a boolean for {key!r}")


def coerce_value(key: str, raw) -> object:
    """Coerce a raw string (or already-typed value) per the schema."""
    if key not in _SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    _, _, kind = _SCHEMA[key]
    if isinstance(raw, str):
        raw = raw.strip()
        try:
            if kind is bool:
                return _parse_bool(raw, key)
            return kind(raw)
        except ValueError as exc:
            raise ConfigError(f"cannot parse {raw!r} for {key!r}: {exc}") from None
    if kind is bool and not isinstance(raw, bool):
        raise ConfigError(f"expected boolean for {key!r}, got {raw!r}")
    try:
        return kind(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"cannot coerce {raw!r} for {key!r}: {exc}") from None


def parse_config_text(text: str) -> dict[str, object]:
    """Parse `key = value` lines; '#' starts a comment, blank lines ignored."""
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        values[key] = coerce_value(key, raw)
    return values


def load_config_file(path) -> dict[str, object]:
    return parse_config_text(Path(path).read_text())


def pipeline_config_from_flat(values: dict[str, object]) -> PipelineConfig:
    """Build a PipelineConfig from flat dotted keys, defaulting the rest."""
    for key in values:
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
    sections = {name: {} for name in _SECTION_TYPES}
    top: dict[str, object] = {}
    for key, value in values.items():
        section, field_name, _ = _SCHEMA[key]
        value = coerce_value(key, value)
        if section is None:
            top[field_name] = value
        else:
            sections[section][field_name] = value
    try:
        kwargs = dict(top)
        for section, cls in _SECTION_TYPES.items():
            if sections[section]:
                kwargs[section] = cls(**sections[section])
        return PipelineConfig(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def pipeline_config_to_flat(config: PipelineConfig) -> dict[str, object]:
    """Flatten a PipelineConfig into the dotted-key mapping."""
    flat: dict[str, object] = {}
    for key, (section, field_name, _) in _SCHEMA.items():
        holder = config if section is None else getattr(config, section)
        flat[key] = getattr(holder, field_name)
    return flat


def format_config(config: PipelineConfig) -> str:
    lines = [f"{key} = {value}" for key, value in pipeline_config_to_flat(config).items()]
    return "\n".join(lines) + "\n"


def build_pipeline_config(
    file_path=None, overrides: dict[str, object] | None = None
) -> PipelineConfig:
    """Defaults, then config file values, then explicit overrides."""
    values: dict[str, object] = {}
    if file_path is not None:
        values.update(load_config_file(file_path))
    if overrides:
        for key, value in overrides.items():
            values[key] = coerce_value(key, value)
    return pipeline_config_from_flat(values)


def with_seed(config: PipelineConfig, seed: int) -> PipelineConfig:
    return replace(config, seed=seed)
