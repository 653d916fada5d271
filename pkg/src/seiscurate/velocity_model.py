"""Radial-basis-function average-velocity model built from checkshots.

The interpolant is ``f(x) = sum_i w_i * phi(|x - c_i|)`` with no polynomial
tail, fitted by solving ``(Phi + mu I) w = v``.  Distances are measured in
scaled coordinates (see :class:`CoordinateScaler`).
"""
from __future__ import annotations

import enum
import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.special import xlogy

from .geometry import GridGeometry, locate_well
from .well_io import WellDataset, average_velocity

V_FLOOR = 1400.0
V_CEIL = 7000.0
MAX_CENTERS = 5000
_EVAL_CHUNK = 4096


class RbfError(ValueError):
    pass


class Kernel(str, enum.Enum):
    THIN_PLATE = "thin_plate"
    MULTIQUADRIC = "multiquadric"
    GAUSSIAN = "gaussian"


# Thin-plate without a polynomial tail is not scale invariant.  A small
# epsilon keeps epsilon * r below 1 across the unit cube, so phi never
# changes sign between centers.
DEFAULT_EPSILON = {Kernel.THIN_PLATE: 0.1, Kernel.MULTIQUADRIC: 1.0, Kernel.GAUSSIAN: 1.0}


def kernel_values(kernel: Kernel, r: np.ndarray, epsilon: float | None = None) -> np.ndarray:
    """phi(epsilon * r) for the chosen kernel."""
    kernel = Kernel(kernel)
    if epsilon is None:
        epsilon = DEFAULT_EPSILON[kernel]
    if kernel is Kernel.THIN_PLATE:
        s2 = (epsilon * r) ** 2
        return 0.5 * xlogy(s2, s2)  # s^2 log s, zero at s = 0
    if kernel is Kernel.GAUSSIAN:
        return np.exp(-((epsilon * r) ** 2))
    return np.sqrt(1.0 + (epsilon * r) ** 2)


@dataclass(frozen=True)
class CoordinateScaler:
    """Per-axis affine map of ``[lo, hi]`` onto ``[0, 1]``."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("scaler bounds have different lengths")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"degenerate scaler range lo={self.lo} hi={self.hi}")

    @classmethod
    def identity(cls, ndim: int) -> "CoordinateScaler":
        return cls((0.0,) * ndim, (1.0,) * ndim)

    @classmethod
    def from_points(cls, points) -> "CoordinateScaler":
        p = np.asarray(points, dtype=float)
        lo, hi = p.min(axis=0), p.max(axis=0)
        hi = np.where(hi > lo, hi, lo + 1.0)
        return cls(tuple(map(float, lo)), tuple(map(float, hi)))

    @property
    def ndim(self) -> int:
        return len(self.lo)

    def __call__(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        lo = np.asarray(self.lo)
        return (p - lo) / (np.asarray(self.hi) - lo)


@dataclass
class RbfInterpolant:
    centers: np.ndarray  # scaled coordinates, shape (N, d)
    weights: np.ndarray
    values: np.ndarray  # data the model was fitted to, per center
    kernel: Kernel = Kernel.THIN_PLATE
    epsilon: float | None = None
    smoothing: float = 0.0
    scaler: CoordinateScaler = None
    residual: float = 0.0
    condition: float = float("nan")

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.kernel = Kernel(self.kernel)
        if self.epsilon is None:
            self.epsilon = DEFAULT_EPSILON[self.kernel]
        if self.scaler is None:
            self.scaler = CoordinateScaler.identity(self.centers.shape[1])
        if not (len(self.centers) == len(self.weights) == len(self.values)):
            raise ValueError("centers, weights and values must have equal length")

    def __call__(self, positions) -> np.ndarray:
        return evaluate_rbf(self, positions)

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel.value,
            "epsilon": self.epsilon,
            "smoothing": self.smoothing,
            "scaler": {"lo": list(self.scaler.lo), "hi": list(self.scaler.hi)},
            "centers": self.centers.tolist(),
            "weights": self.weights.tolist(),
            "values": self.values.tolist(),
            "residual": self.residual,
            "condition": self.condition,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RbfInterpolant":
        return cls(
            centers=np.asarray(d["centers"], dtype=float),
            weights=np.asarray(d["weights"], dtype=float),
            values=np.asarray(d["values"], dtype=float),
            kernel=Kernel(d["kernel"]),
            epsilon=float(d["epsilon"]),
            smoothing=float(d["smoothing"]),
            scaler=CoordinateScaler(tuple(d["scaler"]["lo"]), tuple(d["scaler"]["hi"])),
            residual=float(d.get("residual", 0.0)),
            condition=float(d.get("condition", float("nan"))),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def _pairwise_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d2 = np.zeros((len(a), len(b)))
    for k in range(a.shape[1]):
        d2 += (a[:, k, None] - b[None, :, k]) ** 2
    return np.sqrt(d2)


def _merge_duplicates(points: np.ndarray, values: np.ndarray):
    uniq, inverse = np.unique(points, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    sums = np.bincount(inverse, weights=values, minlength=len(uniq))
    counts = np.bincount(inverse, minlength=len(uniq))
    return uniq, sums / counts


def fit_rbf(positions, values, kernel: Kernel | str = Kernel.THIN_PLATE, smoothing: float = 0.0,
            epsilon: float | None = None, scaler: CoordinateScaler | None = None,
            residual_tol: float = 1e-10) -> RbfInterpolant:
    """Fit RBF weights to scattered samples.

    Duplicate positions are merged to one center holding their mean value.
    ``scaler`` maps raw positions to the coordinates distances are measured
    in; ``None`` means identity.  ``epsilon=None`` picks the kernel's
    entry in ``DEFAULT_EPSILON``.
    """
    pts = np.atleast_2d(np.asarray(positions, dtype=float))
    v = np.asarray(values, dtype=float).reshape(-1)
    if len(pts) != len(v):
        raise RbfError("positions and values differ in length")
    if len(v) == 0:
        raise RbfError("at least one sample is required")
    if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(v))):
        raise RbfError("samples must be finite")
    if smoothing < 0:
        raise RbfError("smoothing must be non-negative")
    scaler = scaler or CoordinateScaler.identity(pts.shape[1])
    centers, v = _merge_duplicates(scaler(pts), v)
    n = len(centers)
    if n > MAX_CENTERS:
        raise RbfError(f"{n} centers exceeds the dense-solve limit of {MAX_CENTERS}; "
                       "decimate the checkshots or raise the limit deliberately")
    kernel = Kernel(kernel)
    epsilon = DEFAULT_EPSILON[kernel] if epsilon is None else float(epsilon)
    if epsilon <= 0:
        raise RbfError("epsilon must be positive")
    a = kernel_values(kernel, _pairwise_distance(centers, centers), epsilon)
    a[np.diag_indices(n)] += smoothing
    cond = float(np.linalg.cond(a))
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            lu = scipy.linalg.lu_factor(a, check_finite=True)
        if np.any(np.diag(lu[0]) == 0):
            raise np.linalg.LinAlgError("exactly singular")
        w = scipy.linalg.lu_solve(lu, v)
        for _ in range(3):  # iterative refinement
            r = v - a @ w
            if np.linalg.norm(r) <= residual_tol * 1e-3 * np.linalg.norm(v):
                break
            w = w + scipy.linalg.lu_solve(lu, r)
    except (np.linalg.LinAlgError, ValueError, scipy.linalg.LinAlgWarning) as exc:
        raise RbfError(f"RBF system is singular (condition estimate {cond:.3g}); "
                       f"use smoothing > 0: {exc}") from exc
    vnorm = np.linalg.norm(v)
    residual = float(np.linalg.norm(a @ w - v) / (vnorm if vnorm > 0 else 1.0))
    if not np.isfinite(residual) or residual > residual_tol:
        raise RbfError(f"RBF solve residual {residual:.3g} exceeds {residual_tol:g} "
                       f"(condition estimate {cond:.3g}); use smoothing > 0")
    return RbfInterpolant(centers, w, v, kernel, epsilon, smoothing, scaler, residual, cond)


def evaluate_scaled(model: RbfInterpolant, q: np.ndarray) -> np.ndarray:
    """Evaluate at already-scaled coordinates, in fixed-size chunks."""
    out = np.empty(len(q))
    for s in range(0, len(q), _EVAL_CHUNK):
        block = q[s:s + _EVAL_CHUNK]
        phi = kernel_values(model.kernel, _pairwise_distance(block, model.centers), model.epsilon)
        out[s:s + _EVAL_CHUNK] = phi @ model.weights
    return out


def evaluate_rbf(model: RbfInterpolant, positions) -> np.ndarray:
    p = np.asarray(positions, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    if not np.all(np.isfinite(p)):
        raise RbfError("evaluation positions must be finite")
    out = evaluate_scaled(model, model.scaler(p))
    return out[0] if single else out


@dataclass(frozen=True)
class FieldOptions:
    """Post-processing applied to the raw interpolant when sampling a velocity field."""

    v_floor: float = V_FLOOR
    v_ceil: float = V_CEIL
    extension_radius: float | None = None  # scaled-distance beyond which the nearest center is held


def velocity_at(model: RbfInterpolant, positions, options: FieldOptions = FieldOptions()):
    """Clamped (and optionally constant-extended) model values; returns (values, n_clamped)."""
    q = model.scaler(np.atleast_2d(np.asarray(positions, dtype=float)))
    return _field_scaled(model, q, options)


def _field_scaled(model: RbfInterpolant, q: np.ndarray, options: FieldOptions):
    v = evaluate_scaled(model, q)
    if options.extension_radius is not None and len(q):
        for s in range(0, len(q), _EVAL_CHUNK):
            d = _pairwise_distance(q[s:s + _EVAL_CHUNK], model.centers)
            nearest = np.argmin(d, axis=1)
            far = d[np.arange(len(d)), nearest] > options.extension_radius
            v[s:s + _EVAL_CHUNK][far] = model.values[nearest[far]]
    clipped = np.clip(v, options.v_floor, options.v_ceil)
    return clipped, int(np.count_nonzero(clipped != v))


@dataclass
class VelocityVolume:
    v_avg: np.ndarray  # [n_inline, n_crossline, n_samples], m/s
    geometry: GridGeometry
    dt: float
    clamp_count: int = 0

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.v_avg.shape[2]) * self.dt


def build_velocity_volume(model: RbfInterpolant, geometry: GridGeometry, n_samples: int, dt: float,
                          options: FieldOptions = FieldOptions(), threads: int = 1) -> VelocityVolume:
    """Sample the model at every (inline, crossline, t_k) node of a grid.

    Positions are (x, y, twt); work is split per inline so the result does
    not depend on ``threads``.
    """
    ni, nj = geometry.n_inline, geometry.n_crossline
    out = np.zeros((ni, nj, n_samples))
    if ni * nj * n_samples == 0:
        return VelocityVolume(out, geometry, dt, 0)
    t = np.arange(n_samples) * dt
    jj = np.arange(nj)

    def one_inline(i):
        xy = geometry.index_to_xy(np.column_stack([np.full(nj, i), jj]))
        pos = np.column_stack([np.repeat(xy, n_samples, axis=0), np.tile(t, nj)])
        vals, clamped = _field_scaled(model, model.scaler(pos), options)
        out[i] = vals.reshape(nj, n_samples)
        return clamped

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            counts = list(pool.map(one_inline, range(ni)))
    else:
        counts = [one_inline(i) for i in range(ni)]
    return VelocityVolume(out, geometry, dt, int(sum(counts)))


def checkshot_samples(wells: list[WellDataset]):
    """Stack (x, y, twt) positions and average velocities from every well with checkshots."""
    pos, vals, ids = [], [], []
    for w in wells:
        if w.checkshots is None or w.surface_xy is None:
            continue
        av = average_velocity(w.checkshots)
        n = len(av.v_avg)
        pos.append(np.column_stack([np.full(n, w.surface_xy[0]), np.full(n, w.surface_xy[1]), av.twt_s]))
        vals.append(av.v_avg)
        ids += [w.well_id] * n
    if not pos:
        return np.zeros((0, 3)), np.zeros(0), []
    return np.vstack(pos), np.concatenate(vals), ids


def survey_scaler(geometry: GridGeometry, t_max: float) -> CoordinateScaler:
    """Scale x, y over the grid's bounding box and twt over [0, t_max]."""
    c = geometry.corners()
    lo = c.min(axis=0)
    hi = c.max(axis=0)
    return CoordinateScaler((float(lo[0]), float(lo[1]), 0.0), (float(hi[0]), float(hi[1]), float(t_max)))


QC_COLUMNS = ("well_id", "depth_m", "twt_s", "v_checkshot", "v_interp", "rel_err")


@dataclass
class QcResult:
    rows: list[tuple] = field(default_factory=list)
    summary: dict = field(default_factory=dict)  # well_id -> {"max_rel_err", "mean_rel_err", "n"}
    excluded: dict = field(default_factory=dict)  # well_id -> reason

    def rows_for(self, well_id: str) -> list[tuple]:
        return [r for r in self.rows if r[0] == well_id]


def qc_compare_at_wells(model: RbfInterpolant, wells: list[WellDataset], geometry: GridGeometry | None = None,
                        options: FieldOptions = FieldOptions()) -> QcResult:
    """Compare checkshot average velocities with the model at the same (x, y, twt)."""
    qc = QcResult()
    for w in wells:
        if w.checkshots is None:
            qc.excluded[w.well_id] = "no checkshots"
            continue
        if w.surface_xy is None:
            qc.excluded[w.well_id] = "no surface location"
            continue
        if geometry is not None and not locate_well(w.surface_xy, geometry).inside:
            qc.excluded[w.well_id] = "outside survey rectangle"
            continue
        av = average_velocity(w.checkshots)
        pos = np.column_stack([np.full(len(av.twt_s), w.surface_xy[0]),
                               np.full(len(av.twt_s), w.surface_xy[1]), av.twt_s])
        vi, _ = velocity_at(model, pos, options)
        rel = np.abs(vi - av.v_avg) / av.v_avg
        for z, t, vc, v, e in zip(av.depth_m, av.twt_s, av.v_avg, vi, rel):
            qc.rows.append((w.well_id, float(z), float(t), float(vc), float(v), float(e)))
        qc.summary[w.well_id] = {
            "max_rel_err": float(rel.max()) if len(rel) else 0.0,
            "mean_rel_err": float(rel.mean()) if len(rel) else 0.0,
            "n": int(len(rel)),
        }
    return qc
