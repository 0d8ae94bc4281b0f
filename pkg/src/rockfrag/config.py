"""Run configuration: one flat `key = value` file capturing every knob, so a
run is reproducible from (inputs, config, seed) alone."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .mission import StoppingConfig
from .segmentation import PileSegmenter
from .synthpile import CameraModel
from .validation import check_fraction, check_positive


@dataclass
class Config:
    scale_object_mm: float = 60.0
    fines_factor: float = 0.0
    alpha: float = 0.05
    power: float = 0.80
    effect_fraction: float = 0.20
    overlap: float = 0.5
    fov_deg: float = 60.0
    altitudes: tuple[float, float] = (1.0, 2.0)
    quality_threshold: float = 0.01
    outlier_k: float = 3.0
    smoothing_sigma: float = 1.0
    marker_depth: float = 1.0
    min_area_px: int = 20
    exclude_border: bool = True
    target: str = "p80"
    min_frames: int = 2
    seed: int = 0
    image_width: int = 960
    image_height: int = 720
    packing_fraction: float = 0.35
    min_diameter_mm: float = 2.0
    out_dir: str = "."

    def validate(self) -> "Config":
        check_positive("scale_object_mm", self.scale_object_mm)
        check_fraction("fines_factor", self.fines_factor)
        check_fraction("alpha", self.alpha, open_low=True, open_high=True)
        check_fraction("power", self.power, open_low=True, open_high=True)
        if not self.alpha < self.power:
            raise ValueError(
                f"alpha ({self.alpha}) must be below power ({self.power})"
            )
        check_positive("effect_fraction", self.effect_fraction)
        if not 0.0 <= self.overlap <= 0.9:
            raise ValueError(f"overlap must lie in [0, 0.9], got {self.overlap!r}")
        if not 0.0 < self.fov_deg < 180.0:
            raise ValueError(f"fov_deg must lie in (0, 180), got {self.fov_deg!r}")
        if len(self.altitudes) != 2:
            raise ValueError("altitudes must list exactly two levels")
        for h in self.altitudes:
            check_positive("altitude", h)
        if self.quality_threshold < 0:
            raise ValueError("quality_threshold must be non-negative")
        check_positive("outlier_k", self.outlier_k)
        check_positive("smoothing_sigma", self.smoothing_sigma)
        check_positive("marker_depth", self.marker_depth)
        if self.min_area_px < 0:
            raise ValueError("min_area_px must be non-negative")
        if self.target not in ("p80", "p50", "p20"):
            raise ValueError(f"target must be p80, p50 or p20, got {self.target!r}")
        if self.min_frames < 2:
            raise ValueError("min_frames must be at least 2")
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError("image dimensions must be positive")
        if not 0.0 < self.packing_fraction <= 0.7:
            raise ValueError("packing_fraction must lie in (0, 0.7]")
        check_positive("min_diameter_mm", self.min_diameter_mm)
        return self

    # Builders for the objects the pipeline actually consumes.
    def stopping_config(self) -> StoppingConfig:
        return StoppingConfig(
            target=self.target,
            effect_fraction=self.effect_fraction,
            alpha=self.alpha,
            power=self.power,
            min_frames=self.min_frames,
            quality_threshold=self.quality_threshold,
            outlier_k=self.outlier_k,
        )

    def segmenter(self) -> PileSegmenter:
        return PileSegmenter(
            smoothing_sigma=self.smoothing_sigma,
            marker_depth=self.marker_depth,
            min_area_px=self.min_area_px,
            exclude_border=self.exclude_border,
            fines_factor=self.fines_factor,
        )

    def camera(self) -> CameraModel:
        return CameraModel(
            fov_deg=self.fov_deg,
            image_width=self.image_width,
            image_height=self.image_height,
        )


_FIELDS = {f.name: f for f in dataclasses.fields(Config)}


def _parse_value(key: str, raw: str):
    ftype = _FIELDS[key].type
    if not isinstance(ftype, str):
        ftype = getattr(ftype, "__name__", str(ftype))
    raw = raw.strip()
    if ftype == "bool":
        if raw.lower() in ("true", "1", "yes", "on"):
            return True
        if raw.lower() in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"expected a boolean for {key}, got {raw!r}")
    if ftype == "int":
        return int(raw)
    if ftype == "float":
        return float(raw)
    if ftype.startswith("tuple"):
        parts = [p for p in raw.replace(",", " ").split() if p]
        return tuple(float(p) for p in parts)
    return raw


def load_config(path, base: Config | None = None) -> Config:
    """Parse a `key = value` config file over the defaults (or ``base``).

    Lines starting with '#' are comments; unknown keys are errors and carry
    the line number.
    """
    config = dataclasses.replace(base) if base is not None else Config()
    path = Path(path)
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            setattr(config, key, _parse_value(key, raw))
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
    return config.validate()
