"""Survey geometry: grid affine, occupancy, footprint hull, rectangle extraction.

Grid convention: index (i, j) = (inline index, crossline index), both 0-based
inside the extracted rectangle.  World position of a node is

    xy = origin + i * inline_vec + j * crossline_vec
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class RectRegion:
    inline_min: int
    inline_max: int
    crossline_min: int
    crossline_max: int

    def __post_init__(self):
        if self.inline_min > self.inline_max or self.crossline_min > self.crossline_max:
            raise GeometryError(f"degenerate rectangle {self}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.inline_max - self.inline_min + 1,
                self.crossline_max - self.crossline_min + 1)

    @property
    def area(self) -> int:
        a, b = self.shape
        return a * b

    def to_dict(self) -> dict:
        return {"inline_min": self.inline_min, "inline_max": self.inline_max,
                "crossline_min": self.crossline_min, "crossline_max": self.crossline_max}

    @classmethod
    def from_dict(cls, d: dict) -> "RectRegion":
        return cls(int(d["inline_min"]), int(d["inline_max"]),
                   int(d["crossline_min"]), int(d["crossline_max"]))


@dataclass(frozen=True)
class GridGeometry:
    """Affine placement of a regular (inline, crossline) grid in a projected CRS."""

    origin: tuple[float, float]
    inline_vec: tuple[float, float]
    crossline_vec: tuple[float, float]
    n_inline: int
    n_crossline: int
    inline_start: int = 0
    crossline_start: int = 0
    inline_step: int = 1
    crossline_step: int = 1
    crs_tag: str = ""

    def __post_init__(self):
        if self.n_inline < 0 or self.n_crossline < 0:
            raise GeometryError("grid dimensions must be non-negative")

    @property
    def basis(self) -> np.ndarray:
        # columns are the inline and crossline step vectors
        return np.array([self.inline_vec, self.crossline_vec], dtype=float).T

    def is_singular(self) -> bool:
        b = self.basis
        scale = max(np.abs(b).max(), 1e-300)
        return abs(np.linalg.det(b)) <= 1e-12 * scale * scale

    def index_to_xy(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=float)
        return np.asarray(self.origin) + idx @ self.basis.T

    def xy_to_index(self, xy) -> np.ndarray:
        if self.is_singular():
            raise GeometryError("singular geometry basis: inline and crossline vectors are parallel")
        xy = np.asarray(xy, dtype=float)
        return np.linalg.solve(self.basis, (xy - np.asarray(self.origin)).T).T

    def corners(self) -> np.ndarray:
        """Counter-clockwise-ordered corner coordinates of the grid parallelogram."""
        ni, nj = self.n_inline - 1, self.n_crossline - 1
        pts = self.index_to_xy([[0, 0], [ni, 0], [ni, nj], [0, nj]])
        if polygon_area(pts) < 0:
            pts = pts[::-1]
        return pts

    @property
    def inline_numbers(self) -> np.ndarray:
        return self.inline_start + self.inline_step * np.arange(self.n_inline)

    @property
    def crossline_numbers(self) -> np.ndarray:
        return self.crossline_start + self.crossline_step * np.arange(self.n_crossline)

    def to_dict(self) -> dict:
        return {
            "origin": list(self.origin),
            "inline_vec": list(self.inline_vec),
            "crossline_vec": list(self.crossline_vec),
            "n_inline": self.n_inline,
            "n_crossline": self.n_crossline,
            "inline_start": self.inline_start,
            "crossline_start": self.crossline_start,
            "inline_step": self.inline_step,
            "crossline_step": self.crossline_step,
            "crs_tag": self.crs_tag,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridGeometry":
        return cls(
            origin=tuple(map(float, d["origin"])),
            inline_vec=tuple(map(float, d["inline_vec"])),
            crossline_vec=tuple(map(float, d["crossline_vec"])),
            n_inline=int(d["n_inline"]),
            n_crossline=int(d["n_crossline"]),
            inline_start=int(d.get("inline_start", 0)),
            crossline_start=int(d.get("crossline_start", 0)),
            inline_step=int(d.get("inline_step", 1)),
            crossline_step=int(d.get("crossline_step", 1)),
            crs_tag=str(d.get("crs_tag", "")),
        )


def fit_grid_geometry(i, j, x, y, **kwargs) -> GridGeometry:
    """Least-squares affine fit of trace coordinates against grid indices."""
    i = np.asarray(i, dtype=float)
    j = np.asarray(j, dtype=float)
    design = np.column_stack([np.ones_like(i), i, j])
    if len(i) < 3 or np.linalg.matrix_rank(design) < 3:
        raise GeometryError("need traces on at least two inlines and two crosslines to fit geometry")
    coef, *_ = np.linalg.lstsq(design, np.column_stack([x, y]), rcond=None)
    return GridGeometry(
        origin=(float(coef[0, 0]), float(coef[0, 1])),
        inline_vec=(float(coef[1, 0]), float(coef[1, 1])),
        crossline_vec=(float(coef[2, 0]), float(coef[2, 1])),
        **kwargs,
    )


def spacing_deviations(geom: GridGeometry, i, j, x, y, tolerance: float = 0.01) -> np.ndarray:
    """Indices of traces whose position misfit exceeds ``tolerance`` times the median increment."""
    pred = geom.index_to_xy(np.column_stack([i, j]))
    misfit = np.hypot(pred[:, 0] - np.asarray(x), pred[:, 1] - np.asarray(y))
    step = float(np.median([np.hypot(*geom.inline_vec), np.hypot(*geom.crossline_vec)]))
    return np.flatnonzero(misfit > tolerance * step)


# --------------------------------------------------------------------------
# CRS


def apply_crs(points, transform) -> np.ndarray:
    """Map points through a 2D affine transform.

    ``transform`` is a 2x3 ``[A | b]`` or 3x3 homogeneous matrix; points are
    mapped as ``A @ p + b``.
    """
    t = np.asarray(transform, dtype=float)
    if t.shape == (3, 3):
        if not np.allclose(t[2], [0.0, 0.0, 1.0]):
            raise GeometryError("homogeneous transform must have last row [0, 0, 1]")
        t = t[:2]
    if t.shape != (2, 3):
        raise GeometryError(f"affine transform must be 2x3 or 3x3, got {t.shape}")
    a, b = t[:, :2], t[:, 2]
    scale = max(np.abs(a).max(), 1e-300)
    if abs(np.linalg.det(a)) <= 1e-12 * scale * scale:
        raise GeometryError("CRS transform is not invertible")
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    return p @ a.T + b


# --------------------------------------------------------------------------
# occupancy and rectangles


@dataclass
class OccupancyGrid:
    occupied: np.ndarray
    inline_start: int = 0
    crossline_start: int = 0
    inline_step: int = 1
    crossline_step: int = 1

    def __post_init__(self):
        self.occupied = np.asarray(self.occupied, dtype=bool)
        if self.occupied.ndim != 2:
            raise GeometryError("occupancy grid must be 2D")

    @property
    def inline_numbers(self) -> np.ndarray:
        return self.inline_start + self.inline_step * np.arange(self.occupied.shape[0])

    @property
    def crossline_numbers(self) -> np.ndarray:
        return self.crossline_start + self.crossline_step * np.arange(self.occupied.shape[1])

    @classmethod
    def from_lines(cls, inlines, crosslines) -> "OccupancyGrid":
        inlines = np.asarray(inlines, dtype=np.int64)
        crosslines = np.asarray(crosslines, dtype=np.int64)
        if inlines.size == 0:
            raise GeometryError("no traces to build an occupancy grid from")
        il_step = _line_step(inlines)
        xl_step = _line_step(crosslines)
        il0, xl0 = int(inlines.min()), int(crosslines.min())
        if np.any((inlines - il0) % il_step) or np.any((crosslines - xl0) % xl_step):
            raise GeometryError("line numbers are not on a regular increment")
        ii = (inlines - il0) // il_step
        jj = (crosslines - xl0) // xl_step
        occ = np.zeros((ii.max() + 1, jj.max() + 1), dtype=bool)
        occ[ii, jj] = True
        return cls(occ, il0, xl0, il_step, xl_step)

    def region_to_numbers(self, r0: int, r1: int, c0: int, c1: int) -> RectRegion:
        return RectRegion(
            self.inline_start + r0 * self.inline_step,
            self.inline_start + r1 * self.inline_step,
            self.crossline_start + c0 * self.crossline_step,
            self.crossline_start + c1 * self.crossline_step,
        )

    def to_pgm(self) -> str:
        """Plain (P2) PGM text, one row per inline, 1 = occupied."""
        rows, cols = self.occupied.shape
        lines = ["P2",
                 f"# inline_start={self.inline_start} inline_step={self.inline_step}",
                 f"# crossline_start={self.crossline_start} crossline_step={self.crossline_step}",
                 f"{cols} {rows}", "1"]
        lines += [" ".join("1" if v else "0" for v in row) for row in self.occupied]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_pgm(cls, text: str) -> "OccupancyGrid":
        meta = {}
        tokens = []
        for line in text.splitlines():
            if line.startswith("#"):
                for kv in line[1:].split():
                    k, _, v = kv.partition("=")
                    meta[k] = int(v)
                continue
            tokens += line.split()
        if not tokens or tokens[0] != "P2":
            raise GeometryError("not a plain PGM occupancy grid")
        cols, rows = int(tokens[1]), int(tokens[2])
        data = np.array(tokens[4:4 + rows * cols], dtype=int).reshape(rows, cols)
        return cls(data > 0, meta.get("inline_start", 0), meta.get("crossline_start", 0),
                   meta.get("inline_step", 1), meta.get("crossline_step", 1))


def _line_step(numbers: np.ndarray) -> int:
    u = np.unique(numbers)
    if u.size < 2:
        return 1
    return int(np.gcd.reduce(np.diff(u)))


def _rect_key(area, r0, r1, c0):
    # smaller key wins: larger area, larger inline extent, smaller inline_min, smaller crossline_min
    return (-area, -(r1 - r0 + 1), r0, c0)


def largest_rectangle_in_histogram(heights):
    """Yield ``(height, left, right)`` for every maximal bar span of a histogram.

    ``right`` is exclusive.  Stack-based sweep, O(len(heights)).
    """
    stack: list[int] = []
    n = len(heights)
    for i in range(n + 1):
        h = heights[i] if i < n else 0
        while stack and heights[stack[-1]] >= h:
            top = stack.pop()
            left = stack[-1] + 1 if stack else 0
            if heights[top] > 0:
                yield heights[top], left, i
        stack.append(i)


def largest_full_rectangle(grid: OccupancyGrid) -> RectRegion:
    """Maximal-area all-occupied axis-aligned rectangle (histogram sweep).

    Ties go to the larger inline extent, then smaller inline_min, then
    smaller crossline_min.
    """
    occ = grid.occupied
    if occ.size == 0 or not occ.any():
        raise GeometryError("occupancy grid has no occupied cell")
    heights = [0] * occ.shape[1]
    best = None
    for r, row in enumerate(occ.tolist()):
        heights = [h + 1 if v else 0 for h, v in zip(heights, row)]
        for h, left, right in largest_rectangle_in_histogram(heights):
            key = _rect_key(h * (right - left), r - h + 1, r, left)
            if best is None or key < best[0]:
                best = (key, (r - h + 1, r, left, right - 1))
    r0, r1, c0, c1 = best[1]
    return grid.region_to_numbers(r0, r1, c0, c1)


# --------------------------------------------------------------------------
# polygons


def polygon_area(poly) -> float:
    """Signed shoelace area (positive for counter-clockwise)."""
    p = np.asarray(poly, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _segment_distance(pts, a, b) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    t = np.zeros(len(pts)) if denom == 0 else np.clip(((pts - a) @ ab) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.hypot(*(pts - proj).T)


def boundary_distance(poly, points) -> np.ndarray:
    poly = np.asarray(poly, dtype=float)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    d = np.full(len(pts), np.inf)
    for k in range(len(poly)):
        d = np.minimum(d, _segment_distance(pts, poly[k], poly[(k + 1) % len(poly)]))
    return d


def points_in_polygon(poly, points, tol: float = 1e-9) -> np.ndarray:
    """Even-odd containment; points within ``tol`` (relative) of the boundary count as inside."""
    poly = np.asarray(poly, dtype=float)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    n = len(poly)
    for k in range(n):
        x1, y1 = poly[k]
        x2, y2 = poly[(k + 1) % n]
        crosses = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xin = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (x < xin)
    scale = max(float(np.ptp(poly, axis=0).max()), 1.0)
    return inside | (boundary_distance(poly, pts) <= tol * scale)


def signed_distance(poly, points) -> np.ndarray:
    """Distance to the polygon boundary: negative inside, positive outside."""
    d = boundary_distance(poly, points)
    inside = points_in_polygon(poly, points, tol=0.0)
    return np.where(inside, -d, d)


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a, b, c) -> bool:
    return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))


def segments_intersect(p1, p2, p3, p4) -> bool:
    """True if closed segments p1-p2 and p3-p4 share any point."""
    d1 = _orient(p3, p4, p1)
    d2 = _orient(p3, p4, p2)
    d3 = _orient(p1, p2, p3)
    d4 = _orient(p1, p2, p4)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and ((d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)):
        return True
    if d1 == 0 and _on_segment(p3, p4, p1):
        return True
    if d2 == 0 and _on_segment(p3, p4, p2):
        return True
    if d3 == 0 and _on_segment(p1, p2, p3):
        return True
    if d4 == 0 and _on_segment(p1, p2, p4):
        return True
    return False


def is_simple_polygon(poly) -> bool:
    poly = [tuple(p) for p in np.asarray(poly, dtype=float)]
    n = len(poly)
    if n < 3 or len(set(poly)) != n:
        return False
    for a in range(n):
        for b in range(a + 1, n):
            if b == a + 1 or (a == 0 and b == n - 1):
                continue
            if segments_intersect(poly[a], poly[(a + 1) % n], poly[b], poly[(b + 1) % n]):
                return False
    return True


def convex_hull(points) -> np.ndarray:
    """Andrew's monotone chain; counter-clockwise, collinear points dropped."""
    pts = sorted(set(map(tuple, np.asarray(points, dtype=float))))
    if len(pts) < 3:
        return np.array(pts)

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and _orient(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(reversed(pts))
    return np.array(lower[:-1] + upper[:-1])


@dataclass
class Footprint:
    hull_polygon: np.ndarray
    concavity_parameter: int
    convex_fallback: bool = False
    notes: list = field(default_factory=list)

    @property
    def area(self) -> float:
        return abs(polygon_area(self.hull_polygon))

    def contains(self, points, tol: float = 1e-9) -> np.ndarray:
        return points_in_polygon(self.hull_polygon, points, tol=tol)

    def to_geojson(self) -> dict:
        ring = [list(map(float, p)) for p in self.hull_polygon]
        ring.append(ring[0])
        return {
            "type": "Polygon",
            "coordinates": [ring],
            "properties": {"k": self.concavity_parameter, "convex_fallback": self.convex_fallback},
        }


def _knn_hull(pts: np.ndarray, k: int) -> list[int] | None:
    n = len(pts)
    first = int(np.lexsort((pts[:, 0], pts[:, 1]))[0])
    hull = [first]
    available = np.ones(n, dtype=bool)
    available[first] = False
    current = first
    heading = np.array([1.0, 0.0])
    step = 2
    while (current != first or step == 2) and available.any():
        if step == 5:
            available[first] = True
        cand = np.flatnonzero(available)
        d2 = np.sum((pts[cand] - pts[current]) ** 2, axis=1)
        order = np.lexsort((cand, d2))
        cand = cand[order[:k]]
        vec = pts[cand] - pts[current]
        back = -heading
        # counter-clockwise sweep angle from the backward direction; smallest = sharpest right turn
        ang = np.arctan2(back[0] * vec[:, 1] - back[1] * vec[:, 0], back @ vec.T)
        ang = np.mod(ang, 2 * math.pi)
        ang[ang == 0.0] = 2 * math.pi
        chosen = None
        for c in cand[np.lexsort((cand, ang))]:
            last = 1 if c == first else 0
            p1, p2 = pts[current], pts[c]
            ok = True
            for e in range(last, len(hull) - 2):
                if segments_intersect(p1, p2, pts[hull[e]], pts[hull[e + 1]]):
                    ok = False
                    break
            if ok:
                chosen = int(c)
                break
        if chosen is None:
            return None
        heading = pts[chosen] - pts[current]
        current = chosen
        if current != first:
            hull.append(current)
        available[current] = False
        step += 1
    if current != first:
        # ran out of points before returning home; closing edge must be clean
        for e in range(1, len(hull) - 2):
            if segments_intersect(pts[current], pts[first], pts[hull[e]], pts[hull[e + 1]]):
                return None
    return hull


def concave_hull(points, k: int = 3) -> Footprint:
    """k-nearest-neighbour concave hull with automatic k escalation.

    Returns a counter-clockwise simple polygon containing every input
    point; falls back to the convex hull when no k up to ``n - 1`` works.
    """
    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if len(pts) < 3:
        raise GeometryError("concave hull needs at least 3 distinct points")
    centered = pts - pts.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[1] <= 1e-12 * max(sv[0], 1e-300):
        raise GeometryError("points are collinear; hull would be degenerate")
    k = max(int(k), 3)
    n = len(pts)
    kk = min(k, n - 1)
    while kk <= n - 1:
        idx = _knn_hull(pts, kk)
        if idx is not None and len(idx) >= 3:
            poly = pts[idx]
            if polygon_area(poly) < 0:
                poly = poly[::-1]
            if points_in_polygon(poly, pts).all() and is_simple_polygon(poly):
                return Footprint(poly, kk)
        kk += 1
    return Footprint(convex_hull(pts), n - 1, convex_fallback=True)


def boundary_cells(occupied: np.ndarray) -> np.ndarray:
    """Mask of occupied cells that touch an unoccupied or out-of-grid 4-neighbour."""
    occ = np.asarray(occupied, dtype=bool)
    padded = np.pad(occ, 1, constant_values=False)
    interior = (padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:])
    return occ & ~interior


# --------------------------------------------------------------------------
# wells


@dataclass(frozen=True)
class WellLocation:
    inline_index: float
    crossline_index: float
    inside: bool
    signed_distance_m: float


def locate_well(well_xy, geom: GridGeometry) -> WellLocation:
    """Fractional grid index of a well and whether it falls inside the grid rectangle."""
    fi, fj = geom.xy_to_index(np.asarray(well_xy, dtype=float))
    eps = 1e-9
    inside = (-eps <= fi <= geom.n_inline - 1 + eps) and (-eps <= fj <= geom.n_crossline - 1 + eps)
    dist = float(signed_distance(geom.corners(), np.asarray(well_xy, dtype=float))[0])
    return WellLocation(float(fi), float(fj), bool(inside), dist)
