"""Quasi-2D sections along polylines through well locations."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import GridGeometry, points_in_polygon
from .segy_io import SeismicVolume

DEFAULT_LATERAL_STEP = 12.5


class SectionError(ValueError):
    pass


def order_wells(wells):
    """Greedy nearest-neighbour chain over ``(well_id, x, y)`` tuples.

    Starts from the smallest x (ties: smallest y).  Coincident wells are
    dropped with a warning, keeping the first occurrence.
    """
    seen = {}
    unique = []
    for wid, x, y in wells:
        key = (float(x), float(y))
        if key in seen:
            warnings.warn(f"well {wid} coincides with {seen[key]}; dropped", stacklevel=2)
            continue
        seen[key] = wid
        unique.append((wid, float(x), float(y)))
    if len(unique) < 2:
        raise SectionError("a quasi-2D line needs at least two distinct wells")
    start = min(range(len(unique)), key=lambda k: (unique[k][1], unique[k][2], k))
    chain = [unique[start]]
    rest = unique[:start] + unique[start + 1:]
    while rest:
        cx, cy = chain[-1][1], chain[-1][2]
        k = min(range(len(rest)), key=lambda m: (math.hypot(rest[m][1] - cx, rest[m][2] - cy), m))
        chain.append(rest.pop(k))
    return chain


@dataclass
class QuasiLine:
    well_ids: list[str]
    vertices: np.ndarray  # (n, 2) meters
    well_vertex: list[int] = field(default_factory=list)  # vertex index of each well

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        if len(self.vertices) < 2:
            raise SectionError("a line needs at least two vertices")
        if np.any(np.hypot(*np.diff(self.vertices, axis=0).T) == 0):
            raise SectionError("consecutive line vertices coincide")
        if not self.well_vertex:
            self.well_vertex = list(range(len(self.well_ids)))

    @property
    def arclength(self) -> np.ndarray:
        seg = np.hypot(*np.diff(self.vertices, axis=0).T)
        return np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def length(self) -> float:
        return float(self.arclength[-1])

    def point_at(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        arc = self.arclength
        k = np.clip(np.searchsorted(arc, s, side="right") - 1, 0, len(arc) - 2)
        frac = (s - arc[k]) / (arc[k + 1] - arc[k])
        return self.vertices[k] + frac[:, None] * (self.vertices[k + 1] - self.vertices[k])


def _ray_exit(poly: np.ndarray, origin, direction) -> float:
    """Distance along a ray from an interior point to a convex polygon's boundary."""
    best = math.inf
    n = len(poly)
    for k in range(n):
        a, b = poly[k], poly[(k + 1) % n]
        e = b - a
        denom = direction[0] * e[1] - direction[1] * e[0]
        if abs(denom) < 1e-15:
            continue
        w = a - origin
        s = (w[0] * e[1] - w[1] * e[0]) / denom
        u = (w[0] * direction[1] - w[1] * direction[0]) / denom
        if s >= -1e-9 and -1e-9 <= u <= 1 + 1e-9:
            best = min(best, max(s, 0.0))
    return 0.0 if best is math.inf else best


def build_line(wells, geometry: GridGeometry, min_length: float = 0.0) -> QuasiLine:
    """Straight segments through ordered ``(well_id, x, y)`` wells.

    If the polyline is shorter than ``min_length`` its end segments are
    extended outward (equally where possible), stopping at the grid boundary.
    """
    poly = geometry.corners()
    xy = np.array([[x, y] for _, x, y in wells], dtype=float)
    if not points_in_polygon(poly, xy, tol=1e-9).all():
        bad = [w[0] for w, ok in zip(wells, points_in_polygon(poly, xy, tol=1e-9)) if not ok]
        raise SectionError(f"wells outside the survey rectangle: {bad}")
    ids = [w[0] for w in wells]
    line = QuasiLine(ids, xy)
    deficit = min_length - line.length
    if deficit <= 1e-9:
        return line
    d0 = xy[0] - xy[1]
    d0 /= np.hypot(*d0)
    d1 = xy[-1] - xy[-2]
    d1 /= np.hypot(*d1)
    room0 = _ray_exit(poly, xy[0], d0)
    room1 = _ray_exit(poly, xy[-1], d1)
    e0 = min(room0, deficit / 2)
    e1 = min(room1, deficit - e0)
    e0 = min(room0, deficit - e1)
    if e0 + e1 < deficit - 1e-6:
        warnings.warn(f"line through {ids} reaches only {line.length + e0 + e1:.1f} m of the "
                      f"requested {min_length:.1f} m inside the survey", stacklevel=2)
    verts = [xy]
    offset = 0
    if e0 > 1e-9:
        verts.insert(0, (xy[0] + e0 * d0)[None])
        offset = 1
    if e1 > 1e-9:
        verts.append((xy[-1] + e1 * d1)[None])
    return QuasiLine(ids, np.vstack(verts), [k + offset for k in range(len(ids))])


@dataclass
class Section:
    amplitudes: np.ndarray  # [n_lateral, n_depth]
    lateral_step: float
    dz: float
    well_ticks: list[tuple[str, int]]
    positions: np.ndarray  # (n_lateral, 2) meters
    arclength: np.ndarray  # (n_lateral,)
    mask: np.ndarray | None = None

    def __post_init__(self):
        if self.lateral_step <= 0:
            raise SectionError("lateral spacing must be positive")
        n = self.amplitudes.shape[0]
        for wid, k in self.well_ticks:
            if not 0 <= k < n:
                raise SectionError(f"well tick for {wid} out of bounds")


def sample_positions(line: QuasiLine, lateral_step: float) -> np.ndarray:
    """Arclengths 0, step, 2 step, ... plus the line end if it is not on the step grid."""
    if lateral_step <= 0:
        raise SectionError("lateral_step must be positive")
    total = line.length
    n = int(math.floor(total / lateral_step + 1e-9))
    s = np.arange(n + 1) * lateral_step
    if total - s[-1] > 1e-9 * max(total, 1.0):
        s = np.append(s, total)
    return s


def bilinear(volume: np.ndarray, fi: np.ndarray, fj: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of ``volume[i, j, ...]`` at fractional indices."""
    ni, nj = volume.shape[:2]
    i0 = np.clip(np.floor(fi).astype(int), 0, max(ni - 2, 0))
    j0 = np.clip(np.floor(fj).astype(int), 0, max(nj - 2, 0))
    i1 = np.minimum(i0 + 1, ni - 1)
    j1 = np.minimum(j0 + 1, nj - 1)
    a = (fi - i0)
    b = (fj - j0)
    extra = (slice(None),) + (None,) * (volume.ndim - 2)
    a, b = a[extra], b[extra]
    return ((1 - a) * (1 - b) * volume[i0, j0] + a * (1 - b) * volume[i1, j0]
            + (1 - a) * b * volume[i0, j1] + a * b * volume[i1, j1])


def extract_section(volume: SeismicVolume, line: QuasiLine, lateral_step: float = DEFAULT_LATERAL_STEP,
                    mask: np.ndarray | None = None) -> Section:
    """Sample the volume at uniform arclength along the line.

    Samples falling outside the grid are clipped off the ends of the
    section with a warning.
    """
    geom = volume.geometry
    s = sample_positions(line, lateral_step)
    pts = line.point_at(s)
    idx = geom.xy_to_index(pts)
    tol = 1e-6
    ok = ((idx[:, 0] >= -tol) & (idx[:, 0] <= geom.n_inline - 1 + tol)
          & (idx[:, 1] >= -tol) & (idx[:, 1] <= geom.n_crossline - 1 + tol))
    if not ok.all():
        warnings.warn(f"line through {line.well_ids} leaves the survey; section clipped", stacklevel=2)
        keep = np.flatnonzero(ok)
        if keep.size == 0:
            raise SectionError("line lies entirely outside the survey")
        sl = slice(keep[0], keep[-1] + 1)
        s, pts, idx = s[sl], pts[sl], idx[sl]
    fi = np.clip(idx[:, 0], 0, geom.n_inline - 1)
    fj = np.clip(idx[:, 1], 0, geom.n_crossline - 1)
    amps = bilinear(volume.amplitudes, fi, fj)
    sec_mask = None
    if mask is not None:
        sec_mask = bilinear(mask.astype(float), fi, fj) > 0
    arc = line.arclength
    ticks = []
    for wid, v in zip(line.well_ids, line.well_vertex):
        k = int(np.argmin(np.abs(s - arc[v])))
        ticks.append((wid, k))
    return Section(amps, lateral_step, volume.dt_or_dz, ticks, pts, s, sec_mask)
