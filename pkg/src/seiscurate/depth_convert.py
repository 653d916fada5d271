"""Time-to-depth conversion of post-stack volumes through an average-velocity field.

Sample 0 of every time trace sits at t = 0.  Interval velocity ``v_int[k]``
belongs to the interval ``(t[k-1], t[k]]`` and depth accumulates as

    z[k] = sum_{j=1..k} v_int[j] / 2 * dt
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .segy_io import Axis, SeismicVolume
from .velocity_model import V_CEIL, V_FLOOR, VelocityVolume

DEFAULT_DZ = 12.5


class DepthConversionError(ValueError):
    pass


def interval_from_average(v_avg, t, v_floor: float = V_FLOOR, v_ceil: float = V_CEIL):
    """Interval velocities implied by average velocities on a time axis.

    Uses ``v_avg * t = sum v_int * dt``; the interval before ``t[0]`` starts
    at zero time.  Works along the last axis.  Returns ``(v_int, n_clamped)``.
    """
    v_avg = np.asarray(v_avg, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(v_avg <= 0):
        raise DepthConversionError("average velocity must be positive")
    if t.ndim != 1 or t.shape[0] != v_avg.shape[-1]:
        raise DepthConversionError("time axis length does not match velocity samples")
    if np.any(np.diff(t) <= 0) or (len(t) and t[0] < 0):
        raise DepthConversionError("time axis must be non-negative and strictly increasing")
    v_int = np.empty_like(v_avg)
    v_int[..., 0] = v_avg[..., 0]
    if len(t) > 1:
        # (v_k t_k - v_{k-1} t_{k-1}) / dt rearranged to avoid cancellation
        v_int[..., 1:] = v_avg[..., 1:] + t[:-1] * np.diff(v_avg, axis=-1) / np.diff(t)
    clipped = np.clip(v_int, v_floor, v_ceil)
    return clipped, int(np.count_nonzero(clipped != v_int))


def depth_axis(v_int, dt: float) -> np.ndarray:
    """Depth of each time sample (z[0] = 0) by summing half interval velocity times dt."""
    v_int = np.asarray(v_int, dtype=float)
    if np.any(v_int <= 0):
        raise DepthConversionError("interval velocity must be positive")
    z = np.zeros_like(v_int)
    if v_int.shape[-1] > 1:
        z[..., 1:] = np.cumsum(v_int[..., 1:] * (dt / 2.0), axis=-1)
    return z


@dataclass(frozen=True)
class TimeDepthCurve:
    t: np.ndarray
    v_int: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        if not (len(self.t) == len(self.v_int) == len(self.z)):
            raise DepthConversionError("t, v_int and z must have equal length")
        if len(self.z) and (self.z[0] != 0 or self.t[0] != 0):
            raise DepthConversionError("curve must start at t = 0, z = 0")
        if np.any(np.diff(self.z) <= 0):
            raise DepthConversionError("depth is not strictly increasing with time")

    @classmethod
    def from_average(cls, v_avg, dt: float, v_floor: float = V_FLOOR, v_ceil: float = V_CEIL):
        t = np.arange(len(v_avg)) * dt
        v_int, _ = interval_from_average(v_avg, t, v_floor, v_ceil)
        return cls(t, v_int, depth_axis(v_int, dt))

    def depth_at(self, t) -> np.ndarray:
        return np.interp(t, self.t, self.z)

    def time_at(self, z) -> np.ndarray:
        return np.interp(z, self.z, self.t)


def depth_samples(dz: float, z_max: float) -> int:
    if dz <= 0:
        raise DepthConversionError("dz must be positive")
    return int(math.floor(z_max / dz + 1e-9)) + 1


def _convert_from_z(amplitudes, t, z, dz: float, n_depth: int):
    zn = np.arange(n_depth) * dz
    covered = zn <= z[-1] * (1 + 1e-12)
    out = np.zeros(n_depth)
    tn = np.interp(zn[covered], z, t)
    out[covered] = np.interp(tn, t, amplitudes)
    return out, ~covered


def convert_trace(amplitudes, curve: TimeDepthCurve, dz: float = DEFAULT_DZ, z_max: float | None = None):
    """Resample one time trace onto depth nodes ``0, dz, 2 dz, ...``.

    Each depth node is mapped to time by inverting the monotone z(t) curve,
    then amplitude is linearly interpolated in time.  Nodes deeper than the
    curve are zero and flagged in the returned mask.
    """
    amplitudes = np.asarray(amplitudes, dtype=float)
    if len(amplitudes) != len(curve.t):
        raise DepthConversionError("trace and time-depth curve lengths differ")
    if np.any(np.diff(curve.z) <= 0):
        raise AssertionError("time-depth curve is not monotone")
    if z_max is None:
        z_max = math.ceil(curve.z[-1] / dz - 1e-9) * dz
    return _convert_from_z(amplitudes, curve.t, curve.z, dz, depth_samples(dz, z_max))


@dataclass
class DepthConversionResult:
    volume: SeismicVolume  # axis = DEPTH
    mask: np.ndarray  # [n_inline, n_crossline, n_depth], True beyond the converted range
    clamp_count: int
    z_bottom: np.ndarray  # depth reached at t_max per trace


def convert_volume(seismic: SeismicVolume, vel: VelocityVolume, dz: float = DEFAULT_DZ,
                   z_max: float | None = None, v_floor: float = V_FLOOR, v_ceil: float = V_CEIL,
                   threads: int = 1) -> DepthConversionResult:
    """Depth-convert every trace of a time volume.

    The per-trace chain is average -> interval velocity -> depth axis ->
    trace resampling.  Each inline is written to its own output slice, so
    the result is independent of ``threads``.
    """
    if seismic.axis is not Axis.TIME:
        raise DepthConversionError("input volume is not in the time domain")
    if seismic.geometry != vel.geometry or seismic.amplitudes.shape != vel.v_avg.shape:
        raise DepthConversionError("seismic and velocity grids are not aligned")
    if not math.isclose(seismic.dt_or_dz, vel.dt, rel_tol=1e-9):
        raise DepthConversionError("seismic and velocity sample intervals differ")
    ni, nj, nt = seismic.amplitudes.shape
    dt = seismic.dt_or_dz
    t = np.arange(nt) * dt
    if ni * nj == 0 or nt == 0:
        n_depth = 0 if z_max is None else depth_samples(dz, z_max)
        empty = np.zeros((ni, nj, n_depth))
        return DepthConversionResult(SeismicVolume(empty, seismic.geometry, dz, Axis.DEPTH),
                                     np.ones_like(empty, dtype=bool), 0, np.zeros((ni, nj)))
    v_int, clamps = interval_from_average(vel.v_avg, t, v_floor, v_ceil)
    z = depth_axis(v_int, dt)
    if nt > 1 and np.any(np.diff(z, axis=-1) <= 0):
        raise AssertionError("depth not strictly increasing after clamping")
    if z_max is None:
        z_max = math.ceil(float(z[..., -1].max()) / dz - 1e-9) * dz
    n_depth = depth_samples(dz, z_max)
    out = np.zeros((ni, nj, n_depth))
    mask = np.zeros((ni, nj, n_depth), dtype=bool)

    def one_inline(i):
        for j in range(nj):
            out[i, j], mask[i, j] = _convert_from_z(seismic.amplitudes[i, j], t, z[i, j], dz, n_depth)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(one_inline, range(ni)))
    else:
        for i in range(ni):
            one_inline(i)
    depth_vol = SeismicVolume(out, seismic.geometry, dz, Axis.DEPTH)
    return DepthConversionResult(depth_vol, mask, clamps, z[..., -1].copy())
