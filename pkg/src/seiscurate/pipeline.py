"""End-to-end curation: scan -> rect -> fit -> convert -> extract -> resample -> pack.

Every stage reads the previous stage's files from ``<out>/cache`` and
writes its own, so each stage can also be run on its own from the CLI.
"""
from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from filelock import FileLock, Timeout

from . import __version__
from .config import PipelineConfig
from .curated_store import CuratedSection, QcArtifacts, TieCurve, WellTie, write_hdf5, write_qc_report
from .depth_convert import convert_volume
from .geometry import (GridGeometry, OccupancyGrid, RectRegion, apply_crs, boundary_cells, concave_hull,
                       fit_grid_geometry, largest_full_rectangle, locate_well, spacing_deviations)
from .resample import TaperSpec, fft_resample_2d, resample_log
from .section_extract import build_line, extract_section, order_wells
from .segy_io import (Axis, HeaderOffsets, SampleFormat, SeismicVolume, TraceTable, assemble_volume,
                      read_segy, read_volume, scan_geometry, write_segy)
from .velocity_model import (CoordinateScaler, FieldOptions, RbfInterpolant, build_velocity_volume,
                             checkshot_samples, fit_rbf, qc_compare_at_wells, survey_scaler)
from .well_io import LogCurve, WellDataset, average_velocity, load_well, read_manifest

log = logging.getLogger(__name__)

STAGES = ("scan", "rect", "fit", "convert", "extract", "resample", "pack")


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException | str, file=None, well: str | None = None):
        self.stage = stage
        self.file = str(file) if file is not None else getattr(cause, "path", None)
        self.well = well
        self.cause = cause
        msg = f"stage '{stage}' failed"
        if well:
            msg += f" for well {well}"
        if self.file:
            msg += f" ({self.file})"
        super().__init__(f"{msg}: {cause}")

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "file": self.file,
            "well": self.well,
            "error": type(self.cause).__name__ if isinstance(self.cause, BaseException) else "PipelineError",
            "message": str(self.cause),
        }


def _dump(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True))


def _load(path: Path, stage: str):
    if not path.exists():
        raise PipelineError(stage, f"missing upstream artifact {path.name}; run the earlier stage first", path)
    return json.loads(path.read_text())


@dataclass
class Pipeline:
    config: PipelineConfig
    out_dir: Path
    threads: int = 1

    @classmethod
    def from_file(cls, config_path, out_dir=None, threads: int = 1) -> "Pipeline":
        cfg = PipelineConfig.load(config_path)
        out = Path(out_dir) if out_dir is not None else cfg.resolve(cfg.out_dir)
        return cls(cfg, out, max(1, int(threads)))

    @property
    def cache(self) -> Path:
        return self.out_dir / "cache"

    @property
    def offsets(self) -> HeaderOffsets:
        return HeaderOffsets.from_dict(self.config.seismic.header_offsets)

    @property
    def segy_path(self) -> Path:
        return self.config.resolve(self.config.seismic.path)

    # ------------------------------------------------------------------
    def run(self, stages=STAGES) -> dict:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        lock = FileLock(str(self.out_dir / ".seiscurate.lock"))
        try:
            lock.acquire(timeout=0)
        except Timeout:
            raise PipelineError(stages[0], "another pipeline process is using this output directory",
                                self.out_dir) from None
        try:
            result = {}
            for stage in stages:
                t0 = time.perf_counter()
                result[stage] = self.run_stage(stage)
                log.info("stage %s done in %.2fs", stage, time.perf_counter() - t0)
            return result
        finally:
            lock.release()

    def run_stage(self, stage: str):
        if stage not in STAGES:
            raise ValueError(f"unknown stage {stage}")
        try:
            return getattr(self, f"stage_{stage}")()
        except PipelineError:
            raise
        except Exception as exc:
            raise PipelineError(stage, exc, getattr(exc, "path", None) or getattr(exc, "filename", None)) from exc

    # ------------------------------------------------------------------
    def stage_scan(self) -> dict:
        path = self.segy_path
        try:
            header, traces = read_segy(path, self.offsets)
            table = scan_geometry(traces)
        except OSError as exc:
            raise PipelineError("scan", exc, path) from exc
        doc = {
            "segy": str(path),
            "sample_interval_us": header.sample_interval_us,
            "samples_per_trace": header.samples_per_trace,
            "sample_format_code": int(header.sample_format_code),
            "trace_count": header.trace_count,
            "axis": header.axis.value,
            "table": table.to_dict(),
        }
        _dump(self.cache / "scan.json", doc)
        return {"traces": len(table), "duplicates": len(table.duplicates)}

    def stage_rect(self) -> dict:
        scan = _load(self.cache / "scan.json", "rect")
        table = TraceTable.from_dict(scan["table"])
        if table.duplicates:
            log.warning("%d duplicate (inline, crossline) traces", len(table.duplicates))
        occ = table.occupancy()
        rect = largest_full_rectangle(occ)
        (self.cache / "occupancy.pgm").write_text(occ.to_pgm())

        di = (table.inline - rect.inline_min)
        dj = (table.crossline - rect.crossline_min)
        inside = ((di >= 0) & (table.inline <= rect.inline_max) & (dj >= 0) & (table.crossline <= rect.crossline_max)
                  & (di % occ.inline_step == 0) & (dj % occ.crossline_step == 0))
        ii, jj = di[inside] // occ.inline_step, dj[inside] // occ.crossline_step
        ni = (rect.inline_max - rect.inline_min) // occ.inline_step + 1
        nj = (rect.crossline_max - rect.crossline_min) // occ.crossline_step + 1
        geom = fit_grid_geometry(ii, jj, table.x[inside], table.y[inside], n_inline=ni, n_crossline=nj,
                                 inline_start=rect.inline_min, crossline_start=rect.crossline_min,
                                 inline_step=occ.inline_step, crossline_step=occ.crossline_step,
                                 crs_tag=self.config.seismic.crs_tag)
        flags = spacing_deviations(geom, ii, jj, table.x[inside], table.y[inside],
                                   self.config.geometry.spacing_tolerance)

        edge = boundary_cells(occ.occupied)
        ri = (table.inline - occ.inline_start) // occ.inline_step
        rj = (table.crossline - occ.crossline_start) // occ.crossline_step
        on_edge = edge[ri, rj]
        hull = concave_hull(np.column_stack([table.x[on_edge], table.y[on_edge]]), self.config.geometry.hull_k)
        doc = {
            "rect": rect.to_dict(),
            "geometry": geom.to_dict(),
            "footprint": hull.to_geojson(),
            "footprint_area_m2": hull.area,
            "spacing_flags": int(len(flags)),
            "duplicate_traces": len(table.duplicates),
            "occupied_fraction": float(occ.occupied.mean()),
        }
        _dump(self.cache / "rect.json", doc)
        return {"rect": rect.to_dict(), "spacing_flags": int(len(flags))}

    # ------------------------------------------------------------------
    def _geometry(self, stage: str) -> GridGeometry:
        return GridGeometry.from_dict(_load(self.cache / "rect.json", stage)["geometry"])

    def _load_wells(self, stage: str) -> list[WellDataset]:
        mpath = self.config.resolve(self.config.wells.manifest)
        try:
            entries = read_manifest(mpath)
        except OSError as exc:
            raise PipelineError(stage, exc, mpath) from exc
        wells = []
        for wid, entry in entries.items():
            if self.config.wells.crs_transform is not None:
                x, y = apply_crs([(entry.surface_x, entry.surface_y)], self.config.wells.crs_transform)[0]
                entry.surface_x, entry.surface_y = float(x), float(y)
            for p in (entry.las, entry.checkshot):
                if p is not None and not Path(p).exists():
                    raise PipelineError(stage, f"file not found: {p}", p, well=wid)
            try:
                wells.append(load_well(entry))
            except Exception as exc:
                raise PipelineError(stage, exc, getattr(exc, "path", None), well=wid) from exc
        return wells

    def stage_fit(self) -> dict:
        geom = self._geometry("fit")
        scan = _load(self.cache / "scan.json", "fit")
        wells = self._load_wells("fit")
        located = {}
        for w in wells:
            loc = locate_well(w.surface_xy, geom)
            located[w.well_id] = {"x": w.surface_xy[0], "y": w.surface_xy[1], "inline_index": loc.inline_index,
                                  "crossline_index": loc.crossline_index, "inside": loc.inside,
                                  "signed_distance_m": loc.signed_distance_m,
                                  "has_checkshots": w.checkshots is not None}
        usable = [w for w in wells if w.checkshots is not None and located[w.well_id]["inside"]]
        if not usable:
            raise PipelineError("fit", "no well with checkshots inside the survey rectangle")
        pos, vals, _ = checkshot_samples(usable)
        vc = self.config.velocity
        t_max = (scan["samples_per_trace"] - 1) * scan["sample_interval_us"] * 1e-6
        scaler = survey_scaler(geom, max(t_max, float(pos[:, 2].max()))) if vc.normalize else None
        model = fit_rbf(pos, vals, kernel=vc.kernel, smoothing=vc.smoothing, epsilon=vc.epsilon, scaler=scaler)
        opts = self._field_options()
        qc = qc_compare_at_wells(model, wells, geom, opts)
        _dump(self.cache / "velocity_model.json", model.to_dict())
        _dump(self.cache / "wells.json", located)
        _dump(self.cache / "qc_fit.json", {"rows": qc.rows, "summary": qc.summary, "excluded": qc.excluded})
        max_err = max((s["max_rel_err"] for s in qc.summary.values()), default=0.0)
        return {"centers": len(model.centers), "residual": model.residual, "qc_max_rel_err": max_err}

    def _field_options(self) -> FieldOptions:
        vc = self.config.velocity
        return FieldOptions(vc.v_floor, vc.v_ceil, vc.extension_radius)

    # ------------------------------------------------------------------
    def stage_convert(self) -> dict:
        rect_doc = _load(self.cache / "rect.json", "convert")
        model = RbfInterpolant.from_dict(_load(self.cache / "velocity_model.json", "convert"))
        geom_fit = GridGeometry.from_dict(rect_doc["geometry"])
        rect = RectRegion.from_dict(rect_doc["rect"])
        header, traces = read_segy(self.segy_path, self.offsets)
        if header.axis is not Axis.TIME:
            raise PipelineError("convert", "input volume is not in the time domain", self.segy_path)
        seismic = assemble_volume(traces, rect, header, geom_fit.inline_step, geom_fit.crossline_step,
                                  self.config.seismic.crs_tag)
        vel = build_velocity_volume(model, seismic.geometry, seismic.n_samples, seismic.dt_or_dz,
                                    self._field_options(), threads=self.threads)
        sc = self.config.sections
        z_max = self.config.depth.z_max
        if z_max is None:
            z_max = (sc.tile_shape[1] * sc.oversample - 1) * self.config.fine_spacing
        vc = self.config.velocity
        res = convert_volume(seismic, vel, self.config.depth_dz, z_max, vc.v_floor, vc.v_ceil, threads=self.threads)
        write_segy(SeismicVolume(vel.v_avg, seismic.geometry, seismic.dt_or_dz, Axis.TIME),
                   SampleFormat.IEEE_FLOAT32, self.cache / "velocity_avg.sgy")
        write_segy(res.volume, SampleFormat.IEEE_FLOAT32, self.cache / "depth.sgy")
        doc = {
            "dz": self.config.depth_dz,
            "z_max": z_max,
            "n_depth": res.volume.n_samples,
            "velocity_clamps": vel.clamp_count,
            "interval_clamps": res.clamp_count,
            "z_bottom_min": float(res.z_bottom.min()),
            "z_bottom_max": float(res.z_bottom.max()),
        }
        _dump(self.cache / "convert.json", doc)
        return doc

    # ------------------------------------------------------------------
    def _lines(self, wells_doc: dict) -> list[list[tuple[str, float, float]]]:
        inside = {wid: (d["x"], d["y"]) for wid, d in wells_doc.items() if d["inside"]}
        if self.config.sections.lines:
            lines = []
            for seq in self.config.sections.lines:
                missing = [w for w in seq if w not in inside]
                if missing:
                    raise PipelineError("extract", f"line wells not inside the survey: {missing}")
                lines.append([(w, *inside[w]) for w in seq])
            return lines
        return [order_wells([(w, x, y) for w, (x, y) in sorted(inside.items())])]

    def stage_extract(self) -> dict:
        wells_doc = _load(self.cache / "wells.json", "extract")
        depth_path = self.cache / "depth.sgy"
        if not depth_path.exists():
            raise PipelineError("extract", "missing upstream artifact depth.sgy; run convert first", depth_path)
        vol = read_volume(depth_path, crs_tag=self.config.seismic.crs_tag)
        sc = self.config.sections
        step = self.config.fine_spacing
        window = sc.tile_shape[0] * sc.oversample * step
        index = []
        for k, wells in enumerate(self._lines(wells_doc)):
            line_id = f"L{k:02d}_" + "-".join(w[0] for w in wells)
            line = build_line(wells, vol.geometry, min_length=window)
            sec = extract_section(vol, line, step)
            (self.cache / "sections").mkdir(exist_ok=True)
            np.savez(self.cache / "sections" / f"{line_id}.npz", amplitudes=sec.amplitudes,
                     positions=sec.positions, arclength=sec.arclength)
            _dump(self.cache / "sections" / f"{line_id}.json",
                  {"line_id": line_id, "wells": [w[0] for w in wells], "well_ticks": sec.well_ticks,
                   "lateral_step": sec.lateral_step, "dz": sec.dz, "n_lateral": int(sec.amplitudes.shape[0])})
            index.append(line_id)
        _dump(self.cache / "sections" / "index.json", index)
        return {"sections": index}

    # ------------------------------------------------------------------
    def stage_resample(self) -> dict:
        index = _load(self.cache / "sections" / "index.json", "resample")
        sc = self.config.sections
        taper = TaperSpec(self.config.taper.pass_fraction, self.config.taper.taper_fraction)
        wells = {w.well_id: w for w in self._load_wells("resample")}
        n_lat, n_z = sc.tile_shape
        fine_lat = n_lat * sc.oversample
        fine_z = n_z * sc.oversample
        tile_depth = np.arange(n_z) * sc.tile_spacing
        out_dir = self.cache / "tiles"
        out_dir.mkdir(parents=True, exist_ok=True)
        for line_id in index:
            meta = _load(self.cache / "sections" / f"{line_id}.json", "resample")
            amps = np.load(self.cache / "sections" / f"{line_id}.npz")["amplitudes"]
            window, start = _fit_window(amps, meta["well_ticks"], fine_lat, fine_z)
            tile = fft_resample_2d(window, (n_lat, n_z), taper)
            ties = {}
            for wid, k in meta["well_ticks"]:
                lat = int(round((k - start) / sc.oversample))
                if not 0 <= lat < n_lat:
                    log.warning("well %s falls outside tile %s", wid, line_id)
                    continue
                ties[wid] = {"lateral_index": lat,
                             "curves": self._tie_curves(wells[wid], tile_depth, taper)}
            np.save(out_dir / f"{line_id}.npy", tile)
            _dump(out_dir / f"{line_id}.json", {"line_id": line_id, "window_start": int(start),
                                                "coverage": float(np.mean(np.any(window != 0, axis=1))),
                                                "ties": ties})
        _dump(out_dir / "index.json", index)
        return {"tiles": index}

    def _tie_curves(self, well: WellDataset, depth: np.ndarray, taper: TaperSpec) -> dict:
        lc = self.config.logs
        dz = self.config.sections.tile_spacing
        out = {}
        for c in well.curves:
            if lc.mnemonics is not None and c.mnemonic not in lc.mnemonics:
                continue
            if np.count_nonzero(~c.mask) < 2:
                continue
            r = resample_log(c, dz, taper, lc.gap_threshold_m, grid=depth)
            out[c.mnemonic] = {"unit": c.unit, "values": np.where(r.mask, 0.0, r.values).tolist(),
                               "mask": r.mask.tolist()}
        if well.checkshots is not None:
            av = average_velocity(well.checkshots)
            if len(av.v_avg) >= 2:
                vcurve = LogCurve("VAVG", "M/S", av.depth_m, av.v_avg, np.zeros(len(av.v_avg), dtype=bool))
                r = resample_log(vcurve, dz, taper, np.inf, grid=depth)
                out["VAVG"] = {"unit": "M/S", "values": np.where(r.mask, 0.0, r.values).tolist(),
                               "mask": r.mask.tolist()}
        return out

    # ------------------------------------------------------------------
    def stage_pack(self) -> dict:
        index = _load(self.cache / "tiles" / "index.json", "pack")
        sc = self.config.sections
        sections = []
        for line_id in index:
            meta = _load(self.cache / "tiles" / f"{line_id}.json", "pack")
            tile = np.load(self.cache / "tiles" / f"{line_id}.npy")
            ties = [WellTie(wid, t["lateral_index"],
                            {m: TieCurve(np.asarray(c["values"]), np.asarray(c["mask"], dtype=bool), c["unit"])
                             for m, c in t["curves"].items()})
                    for wid, t in meta["ties"].items()]
            sections.append(CuratedSection(
                line_id, tile, ties, sc.tile_spacing, sc.tile_spacing, self.config.seismic.crs_tag,
                {"survey_id": self.config.survey_id, "config_hash": self.config.hash(),
                 "window_start": meta["window_start"], "coverage": meta["coverage"]}))
        h5 = self.out_dir / "curated.h5"
        created = os.environ.get("SOURCE_DATE_EPOCH")
        if created is not None:
            created = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(int(created)))
        manifest = write_hdf5(sections, h5, self.config.hash(), __version__, created)
        self._write_qc()
        return {"hdf5": str(h5), "sections": manifest["counts"]["sections"]}

    def _write_qc(self) -> None:
        fit = _load(self.cache / "qc_fit.json", "pack")
        rect = _load(self.cache / "rect.json", "pack")
        conv = _load(self.cache / "convert.json", "pack")
        art = QcArtifacts(
            qc_rows=[tuple(r) for r in fit["rows"]],
            well_summary=fit["summary"],
            excluded_wells=fit["excluded"],
            clamp_counts={"velocity": conv["velocity_clamps"], "interval": conv["interval_clamps"]},
            duplicate_traces=rect["duplicate_traces"],
            spacing_flags=rect["spacing_flags"],
            hull=rect["footprint"],
            extra={"rect": rect["rect"], "config_hash": self.config.hash()},
        )
        write_qc_report(art, self.out_dir / "qc")


def _fit_window(amps: np.ndarray, ticks, n_lat: int, n_z: int) -> tuple[np.ndarray, int]:
    """Crop or zero-pad a section to ``(n_lat, n_z)``, centred between the outermost wells.

    Returns the window and the section index of its first column (negative
    when padded on the left).
    """
    n = amps.shape[0]
    ks = [k for _, k in ticks]
    centre = (min(ks) + max(ks)) / 2.0
    start = int(round(centre - n_lat / 2.0))
    if n >= n_lat:
        start = min(max(start, 0), n - n_lat)
    else:
        start = -((n_lat - n) // 2)
    out = np.zeros((n_lat, n_z))
    lo, hi = max(start, 0), min(start + n_lat, n)
    depth = min(n_z, amps.shape[1])
    out[lo - start:hi - start, :depth] = amps[lo:hi, :depth]
    return out, start


def run_pipeline(config_path, out_dir=None, threads: int = 1) -> dict:
    return Pipeline.from_file(config_path, out_dir, threads).run()
