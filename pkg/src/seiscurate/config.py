"""Pipeline configuration (JSON file <-> dataclasses)."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass
class SeismicConfig:
    path: str = "survey.sgy"
    header_offsets: dict = field(default_factory=dict)
    crs_tag: str = ""


@dataclass
class WellsConfig:
    manifest: str = "wells.json"
    # 2x3 affine [A | b] taking well coordinates into the seismic CRS; None = identity
    crs_transform: list | None = None


@dataclass
class GeometryConfig:
    hull_k: int = 10
    spacing_tolerance: float = 0.01


@dataclass
class VelocityConfig:
    kernel: str = "thin_plate"
    epsilon: float | None = None  # None = per-kernel default
    smoothing: float = 0.0
    v_floor: float = 1400.0
    v_ceil: float = 7000.0
    extension_radius: float | None = None
    normalize: bool = True


@dataclass
class DepthConfig:
    dz: float | None = None  # default: tile_spacing / oversample
    z_max: float | None = None  # default: full tile depth


@dataclass
class SectionConfig:
    lines: list | None = None  # explicit well-id sequences; None = one line through all wells
    tile_shape: list = field(default_factory=lambda: [256, 512])
    tile_spacing: float = 12.5
    oversample: int = 2


@dataclass
class TaperConfig:
    pass_fraction: float = 0.8
    taper_fraction: float = 0.2


@dataclass
class LogConfig:
    mnemonics: list | None = None  # None = every curve in the LAS
    gap_threshold_m: float = 50.0


_SECTIONS = {
    "seismic": SeismicConfig,
    "wells": WellsConfig,
    "geometry": GeometryConfig,
    "velocity": VelocityConfig,
    "depth": DepthConfig,
    "sections": SectionConfig,
    "taper": TaperConfig,
    "logs": LogConfig,
}


@dataclass
class PipelineConfig:
    survey_id: str = "survey"
    seismic: SeismicConfig = field(default_factory=SeismicConfig)
    wells: WellsConfig = field(default_factory=WellsConfig)
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    velocity: VelocityConfig = field(default_factory=VelocityConfig)
    depth: DepthConfig = field(default_factory=DepthConfig)
    sections: SectionConfig = field(default_factory=SectionConfig)
    taper: TaperConfig = field(default_factory=TaperConfig)
    logs: LogConfig = field(default_factory=LogConfig)
    out_dir: str = "out"
    base_dir: Path = field(default=Path("."), compare=False, repr=False)

    @classmethod
    def from_dict(cls, d: dict, base_dir=".") -> "PipelineConfig":
        kwargs = {}
        for key, value in d.items():
            if key in _SECTIONS:
                sub = _SECTIONS[key]
                names = {f.name for f in dataclasses.fields(sub)}
                unknown = set(value) - names
                if unknown:
                    raise ConfigError(f"unknown keys in '{key}': {sorted(unknown)}")
                kwargs[key] = sub(**value)
            elif key in ("survey_id", "out_dir"):
                kwargs[key] = value
            else:
                raise ConfigError(f"unknown config key '{key}'")
        return cls(**kwargs, base_dir=Path(base_dir))

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(doc, base_dir=path.parent)

    def to_dict(self) -> dict:
        d = {"survey_id": self.survey_id, "out_dir": self.out_dir}
        for key in _SECTIONS:
            d[key] = dataclasses.asdict(getattr(self, key))
        return d

    def resolve(self, p: str) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def hash(self) -> str:
        """Hash of the processing parameters (the output location is excluded)."""
        d = self.to_dict()
        d.pop("out_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    @property
    def fine_spacing(self) -> float:
        return self.sections.tile_spacing / self.sections.oversample

    @property
    def depth_dz(self) -> float:
        return self.depth.dz if self.depth.dz is not None else self.fine_spacing
