import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seiscurate.resample import TILE_SHAPE, TaperSpec, fft_resample_2d, lowpass_1d, resample_log
from seiscurate.well_io import LogCurve


def plane_wave(shape, k0, k1, phase=0.0):
    """Integer-cycle cosine so the periodic FFT sees a single frequency pair."""
    p, q = np.meshgrid(np.arange(shape[0]), np.arange(shape[1]), indexing="ij")
    return np.cos(2 * np.pi * (k0 * p / shape[0] + k1 * q / shape[1]) + phase)


def power(a):
    return float(np.mean(a ** 2))


def test_constant():
    out = fft_resample_2d(np.full((512, 1024), 3.0))
    assert out.shape == TILE_SHAPE
    assert np.allclose(out, 3.0, rtol=1e-12)


def test_in_band_sinusoid_preserved():
    # 13 cycles over 512 samples ~ 10% of the 256-sample target Nyquist
    a = plane_wave((512, 1024), 13, 26, 0.3)
    out = fft_resample_2d(a)
    assert np.max(np.abs(out - plane_wave(TILE_SHAPE, 13, 26, 0.3))) < 1e-6


def test_above_band_sinusoid_removed():
    a = plane_wave((512, 1024), 200, 400)  # above the target Nyquist (128, 256 cycles)
    out = fft_resample_2d(a)
    assert power(out - out.mean()) < 1e-6 * power(a)


def test_taper_band_partial():
    t = TaperSpec()
    w = t.weights([0.0, 0.8, 0.9, 1.0, 1.2])
    assert np.allclose(w, [1, 1, 0.5, 0, 0])
    with pytest.raises(ValueError):
        TaperSpec(0.9, 0.2)


def test_errors():
    with pytest.raises(ValueError):
        fft_resample_2d(np.full((10, 10), np.nan), (5, 5))
    with pytest.raises(ValueError):
        fft_resample_2d(np.zeros(10), (5, 5))


def test_idempotent_on_band_limited_tile():
    rng = np.random.default_rng(0)
    a = sum(rng.normal() * plane_wave(TILE_SHAPE, rng.integers(0, 90), rng.integers(-180, 180), rng.uniform(0, 6))
            for _ in range(10))
    out = fft_resample_2d(a)
    assert np.sqrt(np.mean((out - a) ** 2)) < 1e-9


def test_upsampling_bypasses_mask():
    a = plane_wave((100, 200), 45, 90)  # near the source Nyquist
    out = fft_resample_2d(a)
    assert out.shape == TILE_SHAPE
    assert np.max(np.abs(out - plane_wave(TILE_SHAPE, 45, 90))) < 1e-9


def test_odd_and_even_sizes_stay_real_and_exact():
    for shape in [(301, 517), (300, 516), (257, 513)]:
        a = 2.0 + plane_wave(shape, 7, 11, 1.0)
        out = fft_resample_2d(a)
        assert np.max(np.abs(out - (2.0 + plane_wave(TILE_SHAPE, 7, 11, 1.0)))) < 1e-9


@settings(max_examples=20, deadline=None)
@given(st.integers(256, 700), st.integers(512, 1200), st.integers(0, 2**31 - 1))
def test_spectral_contract_property(n0, n1, seed):
    rng = np.random.default_rng(seed)
    shape = (n0, n1)
    noise = rng.normal(size=shape)
    out = fft_resample_2d(noise)
    assert out.mean() == pytest.approx(noise.mean(), rel=1e-9, abs=1e-12)
    assert power(out) <= power(noise) * (1 + 1e-12)
    k0, k1 = rng.integers(0, 20), rng.integers(0, 40)
    low = plane_wave(shape, k0, k1)
    assert np.max(np.abs(fft_resample_2d(low) - plane_wave(TILE_SHAPE, k0, k1))) < 1e-6
    h0 = rng.integers(128, n0 // 2 + 1)  # at or beyond the target Nyquist
    high = plane_wave(shape, h0, 0)
    assert power(fft_resample_2d(high)) < 1e-6 * power(high)


# -------------------------------------------------------------------- logs

def log(values, depth, mask=None):
    mask = np.zeros(len(depth), bool) if mask is None else mask
    return LogCurve("GR", "API", depth, np.where(mask, np.nan, values), mask)


def test_log_constant():
    d = np.arange(100.0, 1500.0, 0.1524)
    out = resample_log(log(np.full(len(d), 50.0), d))
    assert np.allclose(out.values[~out.mask], 50.0, rtol=1e-12)
    assert np.allclose(np.diff(out.depth_m), 12.5)


def test_log_ramp():
    d = np.arange(100.0, 2000.0, 0.5)
    out = resample_log(log(0.1 * d + 20, d))
    inner = (out.depth_m > 200) & (out.depth_m < 1900) & ~out.mask
    truth = 0.1 * out.depth_m[inner] + 20
    assert np.all(np.abs(out.values[inner] - truth) <= 0.005 * truth)


def test_log_gap_masked():
    d = np.arange(500.0, 1500.0, 0.5)
    gap = (d > 900) & (d < 1000)
    out = resample_log(log(np.full(len(d), 80.0), d, gap), gap_threshold_m=50)
    inside = (out.depth_m > 900) & (out.depth_m < 1000)
    assert out.mask[inside].all() and inside.sum() >= 7
    assert not out.mask[(out.depth_m >= 500) & (out.depth_m <= 875)].any()
    narrow = (d > 900) & (d < 930)
    out = resample_log(log(np.full(len(d), 80.0), d, narrow), gap_threshold_m=50)
    assert not out.mask[(out.depth_m > 900) & (out.depth_m < 930)].any()


def test_log_on_grid_and_all_masked():
    d = np.arange(0.0, 1000.0, 1.0)
    out = resample_log(log(np.full(len(d), 3.0), d), grid=np.arange(512) * 12.5)
    assert len(out.values) == 512
    assert out.mask[np.arange(512) * 12.5 > 999].all()
    with pytest.raises(ValueError):
        resample_log(log(np.zeros(5), np.arange(5.0), np.ones(5, bool)))


def test_lowpass_removes_short_period():
    x = np.arange(2000) * 0.5
    v = np.sin(2 * np.pi * x / 200) + np.sin(2 * np.pi * x / 5)
    out = lowpass_1d(v, 0.5, 12.5, TaperSpec())
    assert np.max(np.abs(out - np.sin(2 * np.pi * x / 200))[200:-200]) < 0.02
