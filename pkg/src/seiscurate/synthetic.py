"""Synthetic layered surveys standing in for field data.

A survey is a stack of constant-velocity layers whose interfaces may dip
linearly.  Every output (checkshots, reflector times, log constants) is
computed exactly from that layer model.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .geometry import GridGeometry, points_in_polygon
from .segy_io import Axis, SampleFormat, SeismicVolume, write_segy
from .well_io import (CheckshotSeries, CheckshotUnits, LogCurve, WellDataset, WellManifestEntry,
                      write_checkshot, write_las, write_manifest)


class SyntheticSpecError(ValueError):
    pass


@dataclass
class Layer:
    bottom_m: float  # interface depth at the survey centre
    velocity: float
    gr: float = 60.0
    nphi: float = 0.25
    res: float = 2.0

    @property
    def density(self) -> float:
        return 310.0 * self.velocity ** 0.25  # Gardner, kg/m3


@dataclass
class SyntheticSurveySpec:
    layers: list[Layer]
    wells: list[tuple[str, float, float]]
    origin: tuple[float, float] = (500000.0, 6200000.0)
    azimuth_deg: float = 30.0
    n_inline: int = 48
    n_crossline: int = 48
    inline_spacing: float = 62.5
    crossline_spacing: float = 62.5
    inline_start: int = 1000
    crossline_start: int = 2000
    dt: float = 0.004
    t_max: float = 2.6
    ricker_hz: float = 25.0
    halfspace_velocity: float | None = None
    dip_m_per_km: tuple[float, float] = (0.0, 0.0)  # interface dip along x and y
    checkshot_step_m: float = 50.0
    log_step_m: float = 0.5
    log_top_m: float = 50.0
    null_gap: tuple[str, str, float, float] | None = None  # (well_id, mnemonic, top, bottom)
    dropped_traces: list[tuple[int, int]] = field(default_factory=list)  # (inline, crossline)
    crs_tag: str = "SYNTHETIC-UTM"

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSurveySpec":
        d = dict(d)
        d["layers"] = [Layer(**l) for l in d["layers"]]
        d["wells"] = [tuple(w) for w in d["wells"]]
        for key in ("origin", "dip_m_per_km"):
            if key in d:
                d[key] = tuple(d[key])
        if d.get("null_gap") is not None:
            d["null_gap"] = tuple(d["null_gap"])
        d["dropped_traces"] = [tuple(t) for t in d.get("dropped_traces", [])]
        return cls(**d)

    def geometry(self) -> GridGeometry:
        a = math.radians(self.azimuth_deg)
        il = (self.inline_spacing * math.sin(a), self.inline_spacing * math.cos(a))
        xl = (self.crossline_spacing * math.cos(a), -self.crossline_spacing * math.sin(a))
        return GridGeometry(self.origin, il, xl, self.n_inline, self.n_crossline,
                            self.inline_start, self.crossline_start, crs_tag=self.crs_tag)

    def center(self) -> np.ndarray:
        g = self.geometry()
        return g.index_to_xy([(g.n_inline - 1) / 2, (g.n_crossline - 1) / 2])

    def interface_depths(self, x, y) -> np.ndarray:
        c = self.center()
        shift = (self.dip_m_per_km[0] * (x - c[0]) + self.dip_m_per_km[1] * (y - c[1])) / 1000.0
        return np.array([l.bottom_m for l in self.layers]) + shift

    def velocities(self) -> np.ndarray:
        below = self.halfspace_velocity or self.layers[-1].velocity * 1.2
        return np.array([l.velocity for l in self.layers] + [below])

    def twt(self, z, x, y) -> np.ndarray:
        """Exact two-way time to depth(s) z at (x, y)."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        tops = np.concatenate([[0.0], self.interface_depths(x, y)])
        bottoms = np.concatenate([tops[1:], [np.inf]])
        v = self.velocities()
        thick = np.clip(np.minimum(z[:, None], bottoms) - tops, 0.0, None)
        return 2.0 * (thick / v).sum(axis=1)

    def validate(self) -> None:
        if not self.layers:
            raise SyntheticSpecError("spec needs at least one layer")
        if any(l.velocity <= 0 for l in self.layers):
            raise SyntheticSpecError("layer velocities must be positive")
        if len(self.wells) < 2:
            raise SyntheticSpecError("spec needs at least two wells")
        poly = self.geometry().corners()
        for wid, x, y in self.wells:
            if not points_in_polygon(poly, [(x, y)])[0]:
                raise SyntheticSpecError(f"well {wid} lies outside the survey footprint")
            d = self.interface_depths(x, y)
            if d[0] <= 0 or np.any(np.diff(d) <= 0):
                raise SyntheticSpecError(f"layer interfaces cross or surface at well {wid}")


def ricker(t, f: float) -> np.ndarray:
    a = (math.pi * f * np.asarray(t)) ** 2
    return (1.0 - 2.0 * a) * np.exp(-a)


def reflection_coefficients(spec: SyntheticSurveySpec) -> np.ndarray:
    v = spec.velocities()
    imp = v * 310.0 * v ** 0.25
    return (imp[1:] - imp[:-1]) / (imp[1:] + imp[:-1])


def checkshots_for(spec: SyntheticSurveySpec, x: float, y: float) -> CheckshotSeries:
    """Checkshots on a regular depth step plus every interface, down to the deepest interface."""
    ifaces = spec.interface_depths(x, y)
    regular = np.arange(spec.checkshot_step_m, ifaces[-1] + 1e-9, spec.checkshot_step_m)
    z = np.unique(np.round(np.concatenate([regular, ifaces]), 9))
    return CheckshotSeries(z, spec.twt(z, x, y))


def time_volume(spec: SyntheticSurveySpec) -> SeismicVolume:
    g = spec.geometry()
    nt = int(round(spec.t_max / spec.dt)) + 1
    t = np.arange(nt) * spec.dt
    rc = reflection_coefficients(spec)
    amps = np.zeros((g.n_inline, g.n_crossline, nt))
    for i in range(g.n_inline):
        xy = g.index_to_xy(np.column_stack([np.full(g.n_crossline, i), np.arange(g.n_crossline)]))
        for j, (x, y) in enumerate(xy):
            t_if = spec.twt(spec.interface_depths(x, y), x, y)
            amps[i, j] = (rc[None, :] * ricker(t[:, None] - t_if[None, :], spec.ricker_hz)).sum(axis=1)
    return SeismicVolume(amps.astype(np.float32).astype(np.float64), g, spec.dt, Axis.TIME)


def well_logs(spec: SyntheticSurveySpec, well_id: str, x: float, y: float) -> WellDataset:
    ifaces = spec.interface_depths(x, y)
    z = np.arange(spec.log_top_m, ifaces[-1] + 1e-9, spec.log_step_m)
    layer = np.searchsorted(ifaces, z, side="left")
    layers = spec.layers + [Layer(np.inf, spec.velocities()[-1])]
    props = {
        "GR": ("GAPI", np.array([layers[k].gr for k in layer])),
        "NPHI": ("V/V", np.array([layers[k].nphi for k in layer])),
        "RHOB": ("G/C3", np.array([layers[k].density / 1000.0 for k in layer])),
        "DT": ("US/F", np.array([304800.0 / layers[k].velocity for k in layer])),
        "RES": ("OHMM", np.array([layers[k].res for k in layer])),
    }
    curves = []
    for mnem, (unit, vals) in props.items():
        mask = np.zeros(len(z), dtype=bool)
        if spec.null_gap and spec.null_gap[0] == well_id and spec.null_gap[1] == mnem:
            mask = (z >= spec.null_gap[2]) & (z <= spec.null_gap[3])
        curves.append(LogCurve(mnem, unit, z, np.where(mask, np.nan, vals), mask))
    return WellDataset(well_id, (x, y), 0.0, curves)


@dataclass
class SyntheticSurvey:
    root: Path
    segy: Path
    manifest: Path
    config: Path
    truth: Path


def make_synthetic_survey(spec: SyntheticSurveySpec, out_dir, config_overrides: dict | None = None) -> SyntheticSurvey:
    """Write SEG-Y, LAS, checkshot CSVs, well manifest, pipeline config and ground truth."""
    spec.validate()
    root = Path(out_dir)
    (root / "wells").mkdir(parents=True, exist_ok=True)
    vol = time_volume(spec)
    if spec.dropped_traces:
        vol = _drop_traces(vol, spec.dropped_traces)
    segy = root / "survey.sgy"
    if isinstance(vol, SeismicVolume):
        write_segy(vol, SampleFormat.IEEE_FLOAT32, segy)
    else:
        _write_sparse(vol, segy)

    units = CheckshotUnits(time_unit="ms", time_type="twt")
    entries = {}
    truth = {"wells": {}, "interfaces_at_center": [l.bottom_m for l in spec.layers]}
    for wid, x, y in spec.wells:
        las = root / "wells" / f"{wid}.las"
        cs_path = root / "wells" / f"{wid}_checkshot.csv"
        write_las(well_logs(spec, wid, x, y), las)
        write_checkshot(checkshots_for(spec, x, y), cs_path, units)
        entries[wid] = WellManifestEntry(wid, x, y, las, cs_path, 0.0, units)
        d = spec.interface_depths(x, y)
        truth["wells"][wid] = {"x": x, "y": y, "interface_depths_m": d.tolist(),
                               "interface_twt_s": spec.twt(d, x, y).tolist()}
    manifest = root / "wells.json"
    write_manifest(entries, manifest)

    config = {
        "survey_id": "synthetic",
        "seismic": {"path": "survey.sgy", "crs_tag": spec.crs_tag},
        "wells": {"manifest": "wells.json"},
        "out_dir": "out",
    }
    for key, value in (config_overrides or {}).items():
        if isinstance(value, dict):
            config.setdefault(key, {}).update(value)
        else:
            config[key] = value
    cfg_path = root / "config.json"
    cfg_path.write_text(json.dumps(config, indent=2, sort_keys=True))
    truth_path = root / "truth.json"
    truth["spec"] = _spec_dict(spec)
    truth_path.write_text(json.dumps(truth, indent=2, sort_keys=True))
    return SyntheticSurvey(root, segy, manifest, cfg_path, truth_path)


def _spec_dict(spec: SyntheticSurveySpec) -> dict:
    d = asdict(spec)
    d["layers"] = [asdict(l) for l in spec.layers]
    return d


@dataclass
class _SparseVolume:
    volume: SeismicVolume
    keep: np.ndarray


def _drop_traces(vol: SeismicVolume, dropped) -> _SparseVolume:
    keep = np.ones(vol.amplitudes.shape[:2], dtype=bool)
    il, xl = vol.geometry.inline_numbers, vol.geometry.crossline_numbers
    for a, b in dropped:
        ii = np.flatnonzero(il == a)
        jj = np.flatnonzero(xl == b)
        if ii.size and jj.size:
            keep[ii[0], jj[0]] = False
    return _SparseVolume(vol, keep)


def _write_sparse(sv: _SparseVolume, path: Path) -> None:
    """Write a full-grid file, then rewrite it without the dropped traces."""
    write_segy(sv.volume, SampleFormat.IEEE_FLOAT32, path)
    ns = sv.volume.n_samples
    trace_bytes = 240 + 4 * ns
    data = path.read_bytes()
    head, body = data[:3600], data[3600:]
    flat = sv.keep.ravel()
    parts = [head] + [body[k * trace_bytes:(k + 1) * trace_bytes] for k in range(len(flat)) if flat[k]]
    path.write_bytes(b"".join(parts))


def three_layer_spec(**overrides) -> SyntheticSurveySpec:
    """The standard desk-scale fixture: three dipping layers over a faster half-space, four wells."""
    base = SyntheticSurveySpec(
        layers=[
            Layer(600.0, 1800.0, gr=45.0, nphi=0.35, res=1.2),
            Layer(1400.0, 2400.0, gr=95.0, nphi=0.28, res=3.5),
            Layer(2600.0, 3200.0, gr=30.0, nphi=0.12, res=25.0),
        ],
        wells=[],
        dip_m_per_km=(15.0, -10.0),
        halfspace_velocity=3800.0,
    )
    g = base.geometry()
    picks = {"W1": (8.0, 10.0), "W2": (20.0, 21.0), "W3": (30.0, 28.0), "W4": (40.0, 37.0)}
    base.wells = [(wid, *map(float, g.index_to_xy(ij))) for wid, ij in picks.items()]
    base.null_gap = ("W2", "GR", 900.0, 1000.0)
    base.dropped_traces = [(1000 + i, 2000 + j) for i in range(4) for j in range(4 - i)] + [(1047, 2047)]
    for k, v in overrides.items():
        setattr(base, k, v)
    return base
