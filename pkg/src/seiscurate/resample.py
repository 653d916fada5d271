"""FFT resampling with a raised-cosine low-pass, for sections and well logs."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .well_io import LogCurve

TILE_SHAPE = (256, 512)


@dataclass(frozen=True)
class TaperSpec:
    """Pass band and cosine roll-off widths, as fractions of the target Nyquist."""

    pass_fraction: float = 0.8
    taper_fraction: float = 0.2

    def __post_init__(self):
        if self.pass_fraction < 0 or self.taper_fraction < 0:
            raise ValueError("taper fractions must be non-negative")
        if self.pass_fraction + self.taper_fraction > 1 + 1e-12:
            raise ValueError("pass_fraction + taper_fraction must not exceed 1")

    def weights(self, ratio) -> np.ndarray:
        """Mask value at ``ratio = |f| / f_nyquist_target``."""
        r = np.abs(np.asarray(ratio, dtype=float))
        p, w = self.pass_fraction, self.taper_fraction
        out = np.where(r <= p, 1.0, 0.0)
        if w > 0:
            band = (r > p) & (r < p + w)
            out = np.where(band, 0.5 * (1.0 + np.cos(math.pi * (r - p) / w)), out)
        return out


def _resize_spectrum(spec: np.ndarray, m: int, axis: int) -> np.ndarray:
    """Truncate or zero-pad a full complex spectrum along one axis from n to m bins."""
    n = spec.shape[axis]
    if m == n:
        return spec
    x = np.moveaxis(spec, axis, 0)
    y = np.zeros((m,) + x.shape[1:], dtype=complex)
    if m < n:
        if m % 2 == 0:
            h = m // 2
            y[:h] = x[:h]
            y[h + 1:] = x[n - h + 1:]
            y[h] = 0.5 * (x[h] + x[n - h])
        else:
            h = (m - 1) // 2
            y[:h + 1] = x[:h + 1]
            y[m - h:] = x[n - h:]
    else:
        if n % 2 == 0:
            h = n // 2
            y[:h] = x[:h]
            y[m - h + 1:] = x[n - h + 1:]
            y[h] = 0.5 * x[h]
            y[m - h] = 0.5 * x[h]
        else:
            h = (n - 1) // 2
            y[:h + 1] = x[:h + 1]
            y[m - h:] = x[n - h:]
    return np.moveaxis(y, 0, axis)


def _axis_mask(n: int, m: int, taper: TaperSpec) -> np.ndarray:
    if m > n:
        return np.ones(n)
    f_target = 0.5 * m / n
    return taper.weights(np.fft.fftfreq(n) / f_target)


def fft_resample_2d(section, target: tuple[int, int] = TILE_SHAPE, taper: TaperSpec = TaperSpec()) -> np.ndarray:
    """Resample a 2D array to ``target`` through its 2D spectrum.

    Frequencies are weighted by a separable raised-cosine mask relative to
    the target Nyquist on each axis (bypassed on axes being upsampled), the
    spectrum is cropped or zero-padded, and the real part of the inverse
    transform is returned.  The mean is preserved.
    """
    a = np.asarray(section, dtype=float)
    if a.ndim != 2:
        raise ValueError("section must be 2D")
    if not np.all(np.isfinite(a)):
        raise ValueError("section contains non-finite values")
    (n0, n1), (m0, m1) = a.shape, target
    if min(n0, n1, m0, m1) < 1:
        raise ValueError("empty section or target")
    spec = np.fft.fft2(a)
    spec *= _axis_mask(n0, m0, taper)[:, None] * _axis_mask(n1, m1, taper)[None, :]
    spec = _resize_spectrum(spec, m0, 0)
    spec = _resize_spectrum(spec, m1, 1)
    return np.real(np.fft.ifft2(spec)) * (m0 * m1) / (n0 * n1)


def lowpass_1d(values: np.ndarray, spacing: float, cutoff_period: float, taper: TaperSpec) -> np.ndarray:
    """Raised-cosine low-pass of a uniformly sampled series.

    The endpoint line is removed first and the residual is mirrored so the
    periodic extension is continuous; ramps pass through unchanged.
    """
    v = np.asarray(values, dtype=float)
    n = len(v)
    if n < 3:
        return v.copy()
    trend = np.linspace(v[0], v[-1], n)
    r = v - trend
    ext = np.concatenate([r, r[-2:0:-1]])
    spec = np.fft.rfft(ext)
    f = np.fft.rfftfreq(len(ext), spacing)
    spec *= taper.weights(f / (0.5 / cutoff_period))
    return np.fft.irfft(spec, len(ext))[:n] + trend


def _gap_mask(depth_valid: np.ndarray, grid: np.ndarray, threshold: float) -> np.ndarray:
    masked = (grid < depth_valid[0] - 1e-9) | (grid > depth_valid[-1] + 1e-9)
    gaps = np.flatnonzero(np.diff(depth_valid) > threshold)
    for g in gaps:
        masked |= (grid > depth_valid[g]) & (grid < depth_valid[g + 1])
    return masked


def resample_log(curve: LogCurve, dz: float = 12.5, taper: TaperSpec = TaperSpec(),
                 gap_threshold_m: float = 50.0, grid=None) -> LogCurve:
    """Harmonize a log with seismic sampling ``dz``.

    Gaps are bridged linearly on a fine uniform grid (an integer fraction of
    ``dz``), the series is low-passed at the ``dz`` Nyquist and decimated.
    Output nodes beyond the log, or inside null gaps wider than
    ``gap_threshold_m``, are masked.  ``grid`` optionally gives the output
    depths (default: multiples of ``dz`` spanning the log).
    """
    d, v = curve.valid()
    if len(d) < 2:
        raise ValueError(f"curve {curve.mnemonic} has fewer than two non-null samples")
    if dz <= 0:
        raise ValueError("dz must be positive")
    spacing = np.diff(curve.depth_m)
    h = min(float(np.median(spacing)) if len(spacing) else dz, dz)
    k = max(1, int(math.ceil(dz / h - 1e-9)))
    h = dz / k
    z0 = math.floor(d[0] / dz) * dz
    z1 = math.ceil(d[-1] / dz) * dz
    fine = z0 + h * np.arange(int(round((z1 - z0) / h)) + 1)
    filled = np.interp(fine, d, v)
    smooth = lowpass_1d(filled, h, dz, taper)
    coarse_z = fine[::k]
    coarse_v = smooth[::k]
    if grid is None:
        out_z = coarse_z
        out_v = coarse_v
    else:
        out_z = np.asarray(grid, dtype=float)
        out_v = np.interp(out_z, coarse_z, coarse_v)
    mask = _gap_mask(d, out_z, gap_threshold_m)
    out_v = np.where(mask, np.nan, out_v)
    return LogCurve(curve.mnemonic, curve.unit, out_z, out_v, mask, curve.description)
