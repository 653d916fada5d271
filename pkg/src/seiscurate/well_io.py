"""LAS 2.0 well logs, checkshot tables and the well manifest."""
from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

FEET = 0.3048


class WellFormatError(ValueError):
    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = str(path) if path is not None else None
        self.line = line
        loc = ""
        if path is not None:
            loc = f"{path}"
            if line is not None:
                loc += f":{line}"
            loc = f" [{loc}]"
        super().__init__(message + loc)


@dataclass
class LogCurve:
    mnemonic: str
    unit: str
    depth_m: np.ndarray
    values: np.ndarray
    mask: np.ndarray  # True where the sample is null
    description: str = ""

    def __post_init__(self):
        self.depth_m = np.asarray(self.depth_m, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        if not (len(self.depth_m) == len(self.values) == len(self.mask)):
            raise ValueError(f"curve {self.mnemonic}: depth, values and mask lengths differ")

    def valid(self) -> tuple[np.ndarray, np.ndarray]:
        keep = ~self.mask
        return self.depth_m[keep], self.values[keep]


@dataclass(frozen=True)
class CheckshotSeries:
    depth_m: np.ndarray
    twt_s: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.depth_m, dtype=float)
        t = np.asarray(self.twt_s, dtype=float)
        object.__setattr__(self, "depth_m", d)
        object.__setattr__(self, "twt_s", t)
        if d.shape != t.shape:
            raise ValueError("checkshot depth and time lengths differ")
        if len(t) and t[0] < 0:
            raise ValueError("checkshot times must be non-negative")
        if np.any(np.diff(d) <= 0) or np.any(np.diff(t) <= 0):
            raise ValueError("checkshot depth and time must both be strictly increasing")


@dataclass
class WellDataset:
    well_id: str
    surface_xy: tuple[float, float] | None = None
    kb_elevation: float | None = None
    curves: list[LogCurve] = field(default_factory=list)
    checkshots: CheckshotSeries | None = None
    header: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.well_id:
            raise ValueError("well_id must be non-empty")

    def curve(self, mnemonic: str) -> LogCurve:
        for c in self.curves:
            if c.mnemonic.upper() == mnemonic.upper():
                return c
        raise KeyError(mnemonic)


# --------------------------------------------------------------------------
# LAS

_SECTIONS_REQUIRED = ("V", "W", "C", "A")
_HEADER_LINE = re.compile(r"^\s*([^.]*?)\s*\.(\S*)\s*(.*)$")


def _split_header_line(line: str):
    m = _HEADER_LINE.match(line)
    if not m:
        return None
    mnem, unit, rest = m.groups()
    value, sep, desc = rest.rpartition(":")
    if not sep:
        value, desc = rest, ""
    return mnem.strip(), unit.strip(), value.strip(), desc.strip()


def _float_or_none(text: str):
    try:
        return float(text)
    except ValueError:
        return None


def parse_las(path, surface_xy: tuple[float, float] | None = None) -> WellDataset:
    """Parse a LAS 2.0 file.

    Samples equal to the ~W NULL value become masked.  Depth in feet is
    converted to meters.  ``surface_xy`` overrides any location in ~W.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8", errors="replace")
    except OSError as exc:
        raise WellFormatError(f"cannot read LAS file: {exc}", path) from exc
    sections: dict[str, list[tuple[int, str]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if line.lstrip().startswith("~"):
            current = line.lstrip()[1:2].upper()
            if current in sections and current != "O":
                raise WellFormatError(f"duplicate section ~{current}", path, lineno)
            sections.setdefault(current, [])
            continue
        if current is None:
            raise WellFormatError("content before first section", path, lineno)
        sections[current].append((lineno, line))
    for s in _SECTIONS_REQUIRED:
        if s not in sections:
            raise WellFormatError(f"missing mandatory section ~{s}", path)

    version = {}
    for lineno, line in sections["V"]:
        parts = _split_header_line(line)
        if parts:
            version[parts[0].upper()] = parts[2]
    vers = _float_or_none(version.get("VERS", ""))
    if vers is None or not (2.0 <= vers < 3.0):
        raise WellFormatError(f"unsupported LAS version {version.get('VERS')!r}", path)
    wrapped = version.get("WRAP", "NO").upper().startswith("Y")

    well_info: dict[str, tuple[str, str]] = {}
    for lineno, line in sections["W"]:
        parts = _split_header_line(line)
        if parts is None:
            raise WellFormatError("malformed ~W line", path, lineno)
        well_info[parts[0].upper()] = (parts[1], parts[2])
    params: dict[str, tuple[str, str]] = {}
    for lineno, line in sections.get("P", []):
        parts = _split_header_line(line)
        if parts:
            params[parts[0].upper()] = (parts[1], parts[2])

    curve_defs = []
    for lineno, line in sections["C"]:
        parts = _split_header_line(line)
        if parts is None:
            raise WellFormatError("malformed ~C line", path, lineno)
        curve_defs.append((parts[0], parts[1], parts[3]))
    if len(curve_defs) < 1:
        raise WellFormatError("~C declares no curves", path)
    ncurves = len(curve_defs)

    rows = _read_data_rows(sections["A"], ncurves, wrapped, path)
    data = np.array(rows, dtype=float).reshape(-1, ncurves) if rows else np.zeros((0, ncurves))

    null_text = well_info.get("NULL", ("", ""))[1]
    null = _float_or_none(null_text) if null_text else None
    depth_unit = curve_defs[0][1].upper()
    depth = data[:, 0].copy()
    if depth_unit in ("F", "FT", "FEET", "FOOT"):
        depth *= FEET
    if len(depth) > 1 and np.all(np.diff(depth) < 0):
        data = data[::-1]
        depth = depth[::-1]
    if np.any(np.diff(depth) <= 0):
        bad = int(np.flatnonzero(np.diff(depth) <= 0)[0]) + 1
        raise WellFormatError(f"depth is not strictly monotone at data row {bad + 1}", path)

    curves = []
    for k, (mnem, unit, desc) in enumerate(curve_defs[1:], start=1):
        vals = data[:, k]
        mask = ~np.isfinite(vals)
        if null is not None:
            mask |= np.isclose(vals, null, rtol=0, atol=1e-9 * max(1.0, abs(null)))
        curves.append(LogCurve(mnem, unit, depth, np.where(mask, np.nan, vals), mask, desc))

    well_id = well_info.get("WELL", ("", ""))[1] or well_info.get("UWI", ("", ""))[1] or path.stem
    xy = surface_xy
    if xy is None:
        for kx, ky in (("XCOORD", "YCOORD"), ("X", "Y"), ("XWELL", "YWELL")):
            if kx in well_info and ky in well_info:
                x, y = _float_or_none(well_info[kx][1]), _float_or_none(well_info[ky][1])
                if x is not None and y is not None:
                    xy = (x, y)
                    break
    kb = None
    for key in ("EKB", "KB", "ELEV", "EREF"):
        src = well_info.get(key) or params.get(key)
        if src and _float_or_none(src[1]) is not None:
            kb = _float_or_none(src[1])
            if src[0].upper() in ("F", "FT"):
                kb *= FEET
            break
    header = {k: v[1] for k, v in well_info.items()}
    header["_depth_mnemonic"] = curve_defs[0][0]
    header["_depth_unit"] = curve_defs[0][1]
    return WellDataset(well_id, xy, kb, curves, None, header)


def _read_data_rows(lines, ncurves: int, wrapped: bool, path) -> list[float]:
    values: list[float] = []
    last_line = None
    for lineno, line in lines:
        tokens = line.split()
        last_line = lineno
        if not wrapped and len(tokens) != ncurves:
            raise WellFormatError(
                f"~A row has {len(tokens)} values but ~C declares {ncurves} curves", path, lineno)
        for tok in tokens:
            v = _float_or_none(tok)
            if v is None:
                raise WellFormatError(f"non-numeric value {tok!r} in ~A", path, lineno)
            values.append(v)
    if wrapped and len(values) % ncurves:
        raise WellFormatError(
            f"wrapped ~A holds {len(values)} values, not a multiple of {ncurves} curves", path, last_line)
    return values


def _fmt(v: float) -> str:
    return repr(float(v))


def write_las(well: WellDataset, path, null: float = -999.25, wrap: bool = False) -> None:
    """Serialize curves (on their shared depth axis, meters) as LAS 2.0."""
    if not well.curves:
        raise ValueError("well has no curves to write")
    depth = well.curves[0].depth_m
    for c in well.curves:
        if not np.array_equal(c.depth_m, depth):
            raise ValueError("all curves must share one depth axis to be written as LAS")
    step = float(np.diff(depth)[0]) if len(depth) > 1 else 0.0
    if len(depth) > 2 and not np.allclose(np.diff(depth), step, rtol=1e-9, atol=1e-9):
        step = 0.0
    out = [
        "~VERSION INFORMATION",
        " VERS.                2.0 : CWLS LOG ASCII STANDARD - VERSION 2.0",
        f" WRAP.                {'YES' if wrap else 'NO'} : {'MULTIPLE' if wrap else 'ONE'} LINE PER DEPTH STEP",
        "~WELL INFORMATION",
        f" STRT.M  {_fmt(depth[0]) if len(depth) else '0.0'} : START DEPTH",
        f" STOP.M  {_fmt(depth[-1]) if len(depth) else '0.0'} : STOP DEPTH",
        f" STEP.M  {_fmt(step)} : STEP",
        f" NULL.   {_fmt(null)} : NULL VALUE",
        f" WELL.   {well.well_id} : WELL",
    ]
    if well.surface_xy is not None:
        out.append(f" XCOORD.M  {_fmt(well.surface_xy[0])} : SURFACE X")
        out.append(f" YCOORD.M  {_fmt(well.surface_xy[1])} : SURFACE Y")
    if well.kb_elevation is not None:
        out.append(f" EKB.M  {_fmt(well.kb_elevation)} : KELLY BUSHING")
    out.append("~CURVE INFORMATION")
    out.append(" DEPT.M   : DEPTH")
    for c in well.curves:
        out.append(f" {c.mnemonic}.{c.unit}   : {c.description}")
    out.append("~A")
    cols = [depth] + [np.where(c.mask, null, c.values) for c in well.curves]
    table = np.column_stack(cols) if len(depth) else np.zeros((0, len(cols)))
    for row in table:
        if wrap:
            out.append(_fmt(row[0]))
            rest = [_fmt(v) for v in row[1:]]
            for k in range(0, len(rest), 4):
                out.append(" ".join(rest[k:k + 4]))
        else:
            out.append(" ".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------
# checkshots


@dataclass(frozen=True)
class CheckshotUnits:
    time_unit: str = "ms"  # "ms" or "s"
    time_type: str = "twt"  # "twt" or "owt"
    depth_unit: str = "m"  # "m" or "ft"
    depth_column: str = "depth"
    time_column: str = "time"

    @classmethod
    def from_dict(cls, d: dict | None) -> "CheckshotUnits":
        return cls(**(d or {}))


def parse_checkshot(path, units: CheckshotUnits | None = None, datum_shift_m: float = 0.0) -> CheckshotSeries:
    """Read a checkshot CSV (header row with depth and time columns).

    Output is meters below datum and two-way seconds, sorted by depth.
    ``datum_shift_m`` is subtracted from every depth.
    """
    units = units or CheckshotUnits()
    if units.time_unit not in ("ms", "s") or units.time_type not in ("twt", "owt") \
            or units.depth_unit not in ("m", "ft"):
        raise WellFormatError(f"unsupported checkshot units {units}", path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            fields = [f.strip().lower() for f in (reader.fieldnames or [])]
            if units.depth_column.lower() not in fields or units.time_column.lower() not in fields:
                raise WellFormatError(
                    f"checkshot header must contain '{units.depth_column}' and '{units.time_column}'", path, 1)
            rows = []
            for lineno, rec in enumerate(reader, start=2):
                rec = {k.strip().lower(): v for k, v in rec.items() if k is not None}
                try:
                    z = float(rec[units.depth_column.lower()])
                    t = float(rec[units.time_column.lower()])
                except (TypeError, ValueError):
                    raise WellFormatError("non-numeric checkshot row", path, lineno) from None
                if not (math.isfinite(z) and math.isfinite(t)):
                    raise WellFormatError("non-finite checkshot row", path, lineno)
                if t < 0:
                    raise WellFormatError(f"negative time {t}", path, lineno)
                rows.append((z, t, lineno))
    except OSError as exc:
        raise WellFormatError(f"cannot read checkshot file: {exc}", path) from exc
    if not rows:
        raise WellFormatError("checkshot file has no rows", path)
    rows.sort(key=lambda r: r[0])
    z = np.array([r[0] for r in rows])
    t = np.array([r[1] for r in rows])
    if units.depth_unit == "ft":
        z = z * FEET
    if units.time_unit == "ms":
        t = t / 1000.0
    if units.time_type == "owt":
        t = t * 2.0
    z = z - datum_shift_m
    for k in range(1, len(rows)):
        if z[k] <= z[k - 1]:
            raise WellFormatError(f"repeated checkshot depth {rows[k][0]}", path, rows[k][2])
        if t[k] <= t[k - 1]:
            raise WellFormatError("checkshot time does not increase with depth", path, rows[k][2])
    return CheckshotSeries(z, t)


def write_checkshot(cs: CheckshotSeries, path, units: CheckshotUnits | None = None) -> None:
    units = units or CheckshotUnits()
    t = cs.twt_s / (2.0 if units.time_type == "owt" else 1.0)
    t = t * (1000.0 if units.time_unit == "ms" else 1.0)
    z = cs.depth_m / (FEET if units.depth_unit == "ft" else 1.0)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([units.depth_column, units.time_column])
        for zi, ti in zip(z, t):
            w.writerow([repr(float(zi)), repr(float(ti))])


class AverageVelocity(NamedTuple):
    depth_m: np.ndarray
    twt_s: np.ndarray
    v_avg: np.ndarray


def average_velocity(cs: CheckshotSeries) -> AverageVelocity:
    """Straight-ray average velocity 2 z / t at each checkshot below the surface."""
    z, t = cs.depth_m, cs.twt_s
    bad = (t <= 0) & (z != 0)
    if np.any(bad):
        raise ValueError(f"zero travel time at nonzero depth {z[bad][0]} m")
    keep = t > 0
    z, t = z[keep], t[keep]
    return AverageVelocity(z, t, 2.0 * z / t)


# --------------------------------------------------------------------------
# manifest


@dataclass
class WellManifestEntry:
    well_id: str
    surface_x: float
    surface_y: float
    las: Path | None = None
    checkshot: Path | None = None
    datum_shift_m: float = 0.0
    checkshot_units: CheckshotUnits = field(default_factory=CheckshotUnits)


def read_manifest(path) -> dict[str, WellManifestEntry]:
    """``{"wells": {id: {surface_x, surface_y, datum_shift_m, las, checkshot, checkshot_units}}}``.

    Relative file paths resolve against the manifest's directory.
    """
    path = Path(path)
    doc = json.loads(path.read_text())
    base = path.parent
    out = {}
    for wid, d in doc.get("wells", {}).items():
        def resolve(key):
            v = d.get(key)
            return None if v is None else (base / v)
        out[wid] = WellManifestEntry(
            wid, float(d["surface_x"]), float(d["surface_y"]),
            resolve("las"), resolve("checkshot"), float(d.get("datum_shift_m", 0.0)),
            CheckshotUnits.from_dict(d.get("checkshot_units")),
        )
    return out


def write_manifest(entries: dict[str, WellManifestEntry], path) -> None:
    base = Path(path).parent
    wells = {}
    for wid, e in entries.items():
        d = {"surface_x": e.surface_x, "surface_y": e.surface_y, "datum_shift_m": e.datum_shift_m}
        for key in ("las", "checkshot"):
            p = getattr(e, key)
            if p is not None:
                p = Path(p).resolve()
                try:
                    d[key] = str(p.relative_to(base.resolve()))
                except ValueError:
                    d[key] = str(p)
        u = e.checkshot_units
        d["checkshot_units"] = {"time_unit": u.time_unit, "time_type": u.time_type, "depth_unit": u.depth_unit,
                                "depth_column": u.depth_column, "time_column": u.time_column}
        wells[wid] = d
    Path(path).write_text(json.dumps({"wells": wells}, indent=2, sort_keys=True))


def load_well(entry: WellManifestEntry) -> WellDataset:
    """Well positioned from the manifest, with LAS curves and checkshots if present."""
    if entry.las is not None:
        well = parse_las(entry.las, surface_xy=(entry.surface_x, entry.surface_y))
        well.well_id = entry.well_id
        if entry.datum_shift_m:
            for c in well.curves:
                c.depth_m = c.depth_m - entry.datum_shift_m
    else:
        well = WellDataset(entry.well_id, (entry.surface_x, entry.surface_y))
    if entry.checkshot is not None:
        well.checkshots = parse_checkshot(entry.checkshot, entry.checkshot_units, entry.datum_shift_m)
    return well
