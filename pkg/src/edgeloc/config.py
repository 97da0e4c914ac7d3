"""Flat runtime configuration: one key space for every pipeline stage.

Config files are plain text, one ``key = value`` per line, ``#`` comments.
CLI flags override file values which override the defaults below.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class PipelineConfig:
    # landmark selection
    sample_spacing_px: float = 4.0
    depth_tolerance_m: float = 0.1
    default_pole_radius_m: float = 0.15
    max_selection_range_m: float = 150.0
    occlusion_margin_px: int = 8
    # edge features
    dt_truncation_px: float = 20.0
    boundary_margin_px: int = 2
    label_weights: tuple[tuple[str, float], ...] = ()
    # alignment
    max_iterations: int = 50
    min_samples: int = 30
    step_tol: float = 1e-6
    energy_tol: float = 1e-9
    lambda_init: float = 1e-4
    max_translation_jump_m: float = 1.0
    max_rotation_jump_deg: float = 3.0
    max_mean_reproj_px: float = 3.0
    min_information: float = 1e-4
    # pose predictor
    odometry_window: int = 1000

    def weight_for(self, label: str) -> float:
        for name, weight in self.label_weights:
            if name == label:
                return weight
        return 1.0


def _parse_label_weights(text: str) -> tuple[tuple[str, float], ...]:
    text = text.strip()
    if not text:
        return ()
    pairs = []
    for item in text.split(","):
        name, _, weight = item.partition(":")
        if not name.strip() or not weight.strip():
            raise ValueError(f"bad label weight entry {item!r}, expected name:weight")
        pairs.append((name.strip(), float(weight)))
    return tuple(pairs)


def _coerce(name: str, text: str):
    kind = {f.name: f.type for f in fields(PipelineConfig)}[name]
    if name == "label_weights":
        return _parse_label_weights(text)
    if kind == "int":
        return int(text)
    return float(text)


def apply_overrides(config: PipelineConfig, overrides: dict[str, str]) -> PipelineConfig:
    """Apply raw string overrides; unknown keys raise ValueError."""
    known = {f.name for f in fields(PipelineConfig)}
    changes = {}
    for key, value in overrides.items():
        if key not in known:
            raise ValueError(f"unknown config key {key!r}")
        changes[key] = _coerce(key, value)
    return replace(config, **changes)


def parse_config_text(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    """Parse ``key = value`` lines on top of ``base`` (or the defaults)."""
    overrides: dict[str, str] = {}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"config line {line_number}: expected 'key = value', got {raw!r}")
        overrides[key.strip()] = value.strip()
    return apply_overrides(base or PipelineConfig(), overrides)
