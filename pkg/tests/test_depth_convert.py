import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from seiscurate.depth_convert import (DepthConversionError, TimeDepthCurve, convert_trace, convert_volume,
                                      depth_axis, interval_from_average)
from seiscurate.geometry import GridGeometry
from seiscurate.segy_io import Axis, SeismicVolume
from seiscurate.velocity_model import VelocityVolume


def layer_cake_depth(t_query, tops, velocities):
    """Closed form: z(t) = sum over layers of v_l / 2 times the time spent in layer l."""
    out = []
    bounds = list(tops) + [math.inf]
    for tq in t_query:
        parts = [v / 2 * max(0.0, min(tq, bounds[l + 1]) - bounds[l]) for l, v in enumerate(velocities)]
        out.append(math.fsum(parts))
    return np.array(out)


def test_interval_constant():
    t = np.arange(10) * 0.004
    v_int, n = interval_from_average(np.full(10, 2000.0), t)
    assert np.all(v_int == 2000.0) and n == 0


def test_interval_two_samples():
    v_int, _ = interval_from_average([2000.0, 2500.0], [1.0, 2.0])
    assert v_int[1] == pytest.approx(3000.0, rel=1e-15)
    assert v_int[0] == 2000.0


def test_interval_clamped():
    v_int, n = interval_from_average([3000.0, 1500.0], [1.0, 2.0])
    assert v_int[1] == 1400.0 and n == 1


def test_depth_axis_examples():
    z = depth_axis(np.full(501, 2000.0), 0.004)
    assert z[500] == pytest.approx(2000.0, rel=1e-12)
    assert z[0] == 0.0
    v = np.where(np.arange(501) <= 250, 1500.0, 3000.0)
    assert depth_axis(v, 0.004)[500] == pytest.approx(2250.0, rel=1e-12)


@given(st.lists(st.floats(1400, 7000), min_size=1, max_size=8), st.integers(0, 2**31 - 1))
def test_layer_cake_property(vels, seed):
    rng = np.random.default_rng(seed)
    dt = 0.004
    nt = 601
    # layer tops on the sample grid so each interval lies inside one layer
    tops = np.sort(rng.choice(np.arange(1, nt - 1), size=len(vels) - 1, replace=False)) * dt
    tops = np.concatenate([[0.0], tops])
    t = np.arange(nt) * dt
    layer = np.searchsorted(tops, t, side="left") - 1
    layer[0] = 0
    v_int = np.asarray(vels)[np.clip(layer, 0, None)]
    z = depth_axis(v_int, dt)
    want = layer_cake_depth(t, tops, vels)
    assert np.allclose(z, want, rtol=1e-9, atol=0)


@given(st.lists(st.floats(1400, 7000), min_size=2, max_size=50))
def test_average_interval_identity(v):
    # v_avg * t = cumulative v_int * dt; depth from v_avg directly equals the interval sum
    dt = 0.004
    t = np.arange(len(v)) * dt
    v_int = np.asarray(v)
    z = depth_axis(v_int, dt)
    v_avg = np.empty_like(z)
    v_avg[0] = v_int[0]
    v_avg[1:] = 2 * z[1:] / t[1:]
    back, n = interval_from_average(v_avg, t)
    assert np.allclose(back, v_int, rtol=1e-9)
    assert np.allclose(v_avg[1:] * t[1:] / 2, z[1:], rtol=1e-12)


def test_spike_constant_velocity():
    dt, dz = 0.004, 12.5
    amps = np.zeros(751)
    amps[200] = 1.0
    curve = TimeDepthCurve.from_average(np.full(751, 2500.0), dt)
    out, mask = convert_trace(amps, curve, dz)
    z_peak = np.argmax(out) * dz
    assert abs(z_peak - 1000.0) <= dz / 2
    assert not mask[: int(1000 / dz)].any()


def test_constant_trace_and_tail_mask():
    curve = TimeDepthCurve.from_average(np.full(101, 2000.0), 0.004)
    out, mask = convert_trace(np.ones(101), curve, 12.5, z_max=600.0)
    covered = np.arange(len(out)) * 12.5 <= curve.z[-1]
    assert np.all(out[covered] == 1.0)
    assert np.all(out[~covered] == 0.0) and np.array_equal(mask, ~covered)
    assert mask.sum() == len(out) - 33  # coverage ends at 400 m


def test_curve_invariants():
    with pytest.raises(DepthConversionError):
        TimeDepthCurve(np.array([0.0, 1.0]), np.array([1.0, 1.0]), np.array([0.0, 0.0]))
    c = TimeDepthCurve.from_average(np.full(11, 3000.0), 0.1)
    assert c.time_at(c.depth_at(0.55)) == pytest.approx(0.55)


@given(st.floats(1400, 7000), st.floats(1.0, 50.0))
def test_constant_velocity_roundtrip(v, dz):
    dt = 0.004
    curve = TimeDepthCurve.from_average(np.full(301, v), dt)
    out, mask = convert_trace(np.arange(301) * dt, curve, dz)  # amplitude = time
    zn = np.arange(len(out)) * dz
    t_back = 2 * zn[~mask] / v
    assert np.allclose(out[~mask], t_back, atol=dt)


def _flat_volume(ni=3, nj=4, nt=301, dt=0.004, v=2500.0):
    geom = GridGeometry((0.0, 0.0), (25.0, 0.0), (0.0, 25.0), ni, nj)
    amps = np.zeros((ni, nj, nt))
    amps[..., 150] = 1.0
    return SeismicVolume(amps, geom, dt, Axis.TIME), VelocityVolume(np.full((ni, nj, nt), v), geom, dt)


def test_flat_horizon_stays_flat():
    seis, vel = _flat_volume()
    res = convert_volume(seis, vel, dz=5.0)
    assert res.volume.axis is Axis.DEPTH and res.volume.dt_or_dz == 5.0
    first = res.volume.amplitudes[0, 0]
    assert np.all(res.volume.amplitudes == first)
    assert np.argmax(first) * 5.0 == pytest.approx(2500.0 * 0.6 / 2)


def test_empty_volume():
    geom = GridGeometry((0.0, 0.0), (25.0, 0.0), (0.0, 25.0), 0, 0)
    res = convert_volume(SeismicVolume(np.zeros((0, 0, 10)), geom, 0.004),
                         VelocityVolume(np.zeros((0, 0, 10)), geom, 0.004))
    assert res.volume.amplitudes.shape[:2] == (0, 0)


def test_grid_mismatch():
    seis, vel = _flat_volume()
    other = VelocityVolume(vel.v_avg[:2], GridGeometry((0.0, 0.0), (25.0, 0.0), (0.0, 25.0), 2, 4), 0.004)
    with pytest.raises(DepthConversionError):
        convert_volume(seis, other)


def test_threads_bit_identical():
    rng = np.random.default_rng(0)
    seis, vel = _flat_volume(5, 6)
    seis.amplitudes[:] = rng.normal(size=seis.amplitudes.shape)
    vel.v_avg[:] = 2000 + 300 * rng.random(vel.v_avg.shape[:2])[..., None] + np.arange(301) * 2.0
    a = convert_volume(seis, vel, threads=1)
    b = convert_volume(seis, vel, threads=4)
    assert np.array_equal(a.volume.amplitudes, b.volume.amplitudes)
    assert np.array_equal(a.mask, b.mask)


@given(st.lists(st.floats(1400, 7000), min_size=2, max_size=40))
def test_depth_strictly_increasing(v):
    z = depth_axis(np.asarray(v), 0.004)
    assert np.all(np.diff(z) > 0)
