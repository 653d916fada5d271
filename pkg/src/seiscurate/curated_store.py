"""HDF5 packing of curated training sections and the QC report files.

File layout::

    /                       attrs: format, manifest (JSON string)
    /sections/<id>/seismic  float32 [256, 512]   attrs: dz, dx, crs_tag, line_id, provenance
    /sections/<id>/wells/<well_id>/<mnemonic>   float32 [512]   attrs: mask, unit
                                                 group attrs: lateral_index
"""
from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import h5py
import numpy as np

from .resample import TILE_SHAPE

FORMAT_VERSION = "openseisml-curated/1"
TIMESTAMP_KEY = "created"


class StoreError(ValueError):
    pass


@dataclass
class TieCurve:
    values: np.ndarray  # [512]
    mask: np.ndarray  # [512] bool, True = null
    unit: str = ""


@dataclass
class WellTie:
    well_id: str
    lateral_index: int
    curves: dict[str, TieCurve] = field(default_factory=dict)


@dataclass
class CuratedSection:
    section_id: str
    seismic: np.ndarray
    well_ties: list[WellTie] = field(default_factory=list)
    dz: float = 12.5
    dx: float = 12.5
    crs_tag: str = ""
    provenance: dict = field(default_factory=dict)

    def validate(self) -> None:
        if tuple(self.seismic.shape) != TILE_SHAPE:
            raise StoreError(f"section {self.section_id}: shape {self.seismic.shape} != {TILE_SHAPE}")
        for tie in self.well_ties:
            if not 0 <= tie.lateral_index < TILE_SHAPE[0]:
                raise StoreError(f"section {self.section_id}: tie {tie.well_id} index {tie.lateral_index} "
                                 f"outside [0, {TILE_SHAPE[0]})")
            for mnem, c in tie.curves.items():
                if len(c.values) != TILE_SHAPE[1] or len(c.mask) != TILE_SHAPE[1]:
                    raise StoreError(f"curve {tie.well_id}/{mnem} must have {TILE_SHAPE[1]} samples")


def build_manifest(sections: list[CuratedSection], config_hash: str = "", pipeline_version: str = "",
                   created: str | None = None) -> dict:
    return {
        "schema": FORMAT_VERSION,
        "section_ids": [s.section_id for s in sections],
        "counts": {
            "sections": len(sections),
            "well_ties": sum(len(s.well_ties) for s in sections),
        },
        "config_hash": config_hash,
        "pipeline_version": pipeline_version,
        TIMESTAMP_KEY: created if created is not None else time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }


def write_hdf5(sections: list[CuratedSection], path, config_hash: str = "", pipeline_version: str = "",
               created: str | None = None) -> dict:
    """Write sections (float32) and the manifest; returns the manifest."""
    ids = [s.section_id for s in sections]
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        raise StoreError(f"duplicate section ids {dup}")
    for s in sections:
        s.validate()
    manifest = build_manifest(sections, config_hash, pipeline_version, created)
    try:
        f = h5py.File(path, "w", track_order=True)
    except OSError as exc:
        raise StoreError(f"cannot create {path}: {exc}") from exc
    with f:
        f.attrs["format"] = FORMAT_VERSION
        f.attrs["manifest"] = json.dumps(manifest, sort_keys=True)
        root = f.create_group("sections", track_order=True)
        for s in sections:
            g = root.create_group(s.section_id, track_order=True)
            d = g.create_dataset("seismic", data=np.asarray(s.seismic, dtype=np.float32))
            d.attrs["dz"] = s.dz
            d.attrs["dx"] = s.dx
            d.attrs["crs_tag"] = s.crs_tag
            d.attrs["line_id"] = s.section_id
            d.attrs["provenance"] = json.dumps(s.provenance, sort_keys=True)
            wells = g.create_group("wells", track_order=True)
            for tie in s.well_ties:
                wg = wells.create_group(tie.well_id, track_order=True)
                wg.attrs["lateral_index"] = int(tie.lateral_index)
                for mnem, c in tie.curves.items():
                    cd = wg.create_dataset(mnem, data=np.asarray(c.values, dtype=np.float32))
                    cd.attrs["mask"] = np.asarray(c.mask, dtype=np.uint8)
                    cd.attrs["unit"] = c.unit
    return manifest


def read_hdf5(path) -> tuple[list[CuratedSection], dict]:
    """Read back sections and the manifest, validating both."""
    with h5py.File(path, "r") as f:
        fmt = f.attrs.get("format")
        if fmt != FORMAT_VERSION:
            raise StoreError(f"unsupported format {fmt!r}, expected {FORMAT_VERSION!r}")
        if "manifest" not in f.attrs:
            raise StoreError("file has no manifest attribute")
        manifest = json.loads(f.attrs["manifest"])
        sections = []
        groups = f["sections"] if "sections" in f else {}
        for sid in groups:
            g = groups[sid]
            d = g["seismic"]
            if tuple(d.shape) != TILE_SHAPE:
                raise StoreError(f"section {sid}: stored shape {d.shape} != {TILE_SHAPE}")
            ties = []
            for wid in g["wells"]:
                wg = g["wells"][wid]
                curves = {m: TieCurve(wg[m][()], wg[m].attrs["mask"].astype(bool), str(wg[m].attrs["unit"]))
                          for m in wg}
                ties.append(WellTie(wid, int(wg.attrs["lateral_index"]), curves))
            sections.append(CuratedSection(
                sid, d[()], ties, float(d.attrs["dz"]), float(d.attrs["dx"]),
                str(d.attrs["crs_tag"]), json.loads(d.attrs["provenance"])))
    ids = [s.section_id for s in sections]
    if manifest.get("section_ids") != ids or manifest.get("counts", {}).get("sections") != len(ids):
        raise StoreError("manifest does not match stored sections")
    return sections, manifest


def content_hash(path) -> str:
    """SHA-256 over every dataset and attribute, ignoring the manifest timestamp."""
    h = hashlib.sha256()

    def attrs(obj):
        for k in sorted(obj.attrs):
            v = obj.attrs[k]
            if k == "manifest":
                m = json.loads(v)
                m.pop(TIMESTAMP_KEY, None)
                v = json.dumps(m, sort_keys=True)
            h.update(k.encode())
            h.update(np.asarray(v).tobytes() if not isinstance(v, str) else v.encode())

    with h5py.File(path, "r") as f:
        attrs(f)

        def visit(name, obj):
            h.update(name.encode())
            attrs(obj)
            if isinstance(obj, h5py.Dataset):
                h.update(str(obj.dtype).encode())
                h.update(np.ascontiguousarray(obj[()]).tobytes())

        f.visititems(visit)
    return h.hexdigest()


# --------------------------------------------------------------------------
# QC report

QC_HEADER = ["depth_m", "twt_s", "v_checkshot", "v_interp", "rel_err"]


@dataclass
class QcArtifacts:
    qc_rows: list[tuple] = field(default_factory=list)  # (well_id, depth_m, twt_s, v_checkshot, v_interp, rel_err)
    well_summary: dict = field(default_factory=dict)
    excluded_wells: dict = field(default_factory=dict)
    clamp_counts: dict = field(default_factory=dict)
    duplicate_traces: int = 0
    spacing_flags: int = 0
    hull: dict | None = None
    extra: dict = field(default_factory=dict)


def write_qc_report(artifacts: QcArtifacts, out_dir) -> list[Path]:
    """CSV per well plus a combined CSV keyed by well_id, and ``qc_summary.json``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise StoreError(f"cannot create QC directory {out}: {exc}") from exc
    written = []
    by_well: dict[str, list[tuple]] = {}
    for row in artifacts.qc_rows:
        by_well.setdefault(row[0], []).append(row)
    combined = out / "qc_velocity.csv"
    with open(combined, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["well_id"] + QC_HEADER)
        for wid in by_well:
            for row in by_well[wid]:
                w.writerow([wid] + [repr(float(v)) for v in row[1:]])
    written.append(combined)
    for wid, rows in by_well.items():
        p = out / f"qc_velocity_{_safe(wid)}.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(QC_HEADER)
            for row in rows:
                w.writerow([repr(float(v)) for v in row[1:]])
        written.append(p)
    errs = np.array([r[5] for r in artifacts.qc_rows]) if artifacts.qc_rows else np.zeros(0)
    summary = {
        "n_wells": len(by_well),
        "n_samples": len(artifacts.qc_rows),
        "max_rel_err": float(errs.max()) if errs.size else 0.0,
        "mean_rel_err": float(errs.mean()) if errs.size else 0.0,
        "wells": artifacts.well_summary,
        "excluded_wells": artifacts.excluded_wells,
        "clamp_counts": artifacts.clamp_counts,
        "duplicate_traces": artifacts.duplicate_traces,
        "spacing_flags": artifacts.spacing_flags,
        "hull": artifacts.hull,
    }
    summary.update(artifacts.extra)
    p = out / "qc_summary.json"
    p.write_text(json.dumps(summary, indent=2, sort_keys=True))
    written.append(p)
    return written


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)
