import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from seiscurate.geometry import GridGeometry, RectRegion
from seiscurate.segy_io import (Axis, BinaryHeader, HeaderOffsets, SampleFormat, SegyFormatError, SeismicVolume,
                                TraceHeader, apply_coordinate_scalar, assemble_volume, decode_samples,
                                encode_samples, float_to_ibm, ibm_to_float, read_segy, read_volume,
                                scan_geometry, write_segy)


def make_volume(ni=3, nj=2, ns=10, seed=0, spacing=(25.0, 12.5)):
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=(ni, nj, ns)).astype(np.float32).astype(np.float64)
    geom = GridGeometry((450000.0, 6700000.0), (spacing[0], 0.0), (0.0, spacing[1]), ni, nj, 100, 200)
    return SeismicVolume(amps, geom, 0.004, Axis.TIME)


@pytest.mark.parametrize("word,value", [
    (0x42640000, 100.0),
    (0x00000000, 0.0),
    (0xC2640000, -100.0),
])
def test_decode_ibm_examples(word, value):
    assert decode_samples(struct.pack(">I", word), 1, 1)[0] == value


def test_ibm_formula_by_hand():
    # s=0, e=66, f=0x640000 / 2**24 -> 0.390625 * 16**2
    assert 0x640000 / 2**24 * 16 ** (66 - 64) == 100.0
    assert float_to_ibm([100.0])[0] == 0x42640000
    assert float_to_ibm([-100.0])[0] == 0xC2640000


def test_decode_errors():
    with pytest.raises(SegyFormatError):
        decode_samples(b"\x00" * 7, 5, 2)
    with pytest.raises(SegyFormatError):
        decode_samples(b"\x00" * 8, 4, 2)


@given(st.floats(1e-3, 1e6) | st.floats(-1e6, -1e-3))
def test_ibm_roundtrip_relative_error(x):
    back = ibm_to_float(float_to_ibm([x]))[0]
    assert abs(back - x) <= 2.0 ** -20 * abs(x)


@given(st.integers(0, 2**32 - 1))
def test_ibm_normalized_words_roundtrip_exactly(word):
    frac = word & 0xFFFFFF
    exponent = (word >> 24) & 0x7F
    if frac == 0 or frac < 0x100000 or exponent == 0:
        word = 0x41100000 | (word & 0x80000000)  # force a normalized word
    assert int(float_to_ibm(ibm_to_float([word]))[0]) == word


def test_int16_overflow():
    with pytest.raises(ValueError, match="INT16"):
        encode_samples([40000.0], SampleFormat.INT16)


def test_coordinate_scalar():
    assert apply_coordinate_scalar(5_210_012, -100) == pytest.approx(52100.12, abs=1e-9)
    assert apply_coordinate_scalar(5, 10) == 50
    assert apply_coordinate_scalar(5, 0) == 5


def test_ieee_roundtrip_bit_exact(tmp_path):
    vol = make_volume()
    p = tmp_path / "v.sgy"
    write_segy(vol, SampleFormat.IEEE_FLOAT32, p)
    header, traces = read_segy(p)
    assert header.trace_count == 6
    assert header.samples_per_trace == 10
    got = list(traces)
    assert [(h.inline_no, h.crossline_no) for h, _ in got] == [(i, j) for i in (100, 101, 102) for j in (200, 201)]
    back = read_volume(p)
    assert np.array_equal(back.amplitudes, vol.amplitudes)
    assert np.allclose(back.geometry.origin, vol.geometry.origin, atol=0.01)


def test_two_trace_file(tmp_path):
    vol = make_volume(1, 2, 5)
    p = tmp_path / "two.sgy"
    write_segy(vol, 5, p)
    _, traces = read_segy(p)
    got = list(traces)
    assert len(got) == 2
    assert np.array_equal(got[1][1], vol.amplitudes[0, 1])


def test_ibm_vs_ieee_same_values(tmp_path):
    vol = make_volume(seed=3)
    write_segy(vol, 1, tmp_path / "ibm.sgy")
    write_segy(vol, 5, tmp_path / "ieee.sgy")
    a = read_volume(tmp_path / "ibm.sgy").amplitudes
    b = read_volume(tmp_path / "ieee.sgy").amplitudes
    assert np.allclose(a, b, rtol=1e-6, atol=0)


def test_int_formats_roundtrip(tmp_path):
    vol = make_volume()
    vol.amplitudes[:] = np.rint(vol.amplitudes * 1000)
    for fmt in (SampleFormat.INT16, SampleFormat.INT32):
        write_segy(vol, fmt, tmp_path / "i.sgy")
        assert np.array_equal(read_volume(tmp_path / "i.sgy").amplitudes, vol.amplitudes)


def test_zero_samples_rejected(tmp_path):
    p = tmp_path / "bad.sgy"
    write_segy(make_volume(), 5, p)
    data = bytearray(p.read_bytes())
    struct.pack_into(">h", data, 3220, 0)
    p.write_bytes(bytes(data))
    with pytest.raises(SegyFormatError) as exc:
        read_segy(p)
    assert exc.value.field == "samples_per_trace"
    assert exc.value.offset == 3220


def test_short_file_and_bad_format(tmp_path):
    p = tmp_path / "short.sgy"
    p.write_bytes(b"\x00" * 100)
    with pytest.raises(SegyFormatError):
        read_segy(p)
    write_segy(make_volume(), 5, p)
    data = bytearray(p.read_bytes())
    struct.pack_into(">h", data, 3224, 7)
    p.write_bytes(bytes(data))
    with pytest.raises(SegyFormatError, match="format"):
        read_segy(p)


def test_truncated_trace_detected(tmp_path):
    p = tmp_path / "trunc.sgy"
    write_segy(make_volume(), 5, p)
    p.write_bytes(p.read_bytes()[:-3])
    with pytest.raises(SegyFormatError, match="whole number"):
        read_segy(p)


def test_depth_axis_flag_roundtrip(tmp_path):
    vol = make_volume()
    vol = SeismicVolume(vol.amplitudes, vol.geometry, 12.5, Axis.DEPTH)
    write_segy(vol, 5, tmp_path / "d.sgy")
    back = read_volume(tmp_path / "d.sgy")
    assert back.axis is Axis.DEPTH
    assert back.dt_or_dz == 12.5


def test_custom_header_offsets(tmp_path):
    offs = HeaderOffsets(inline=9, crossline=21)
    vol = make_volume()
    write_segy(vol, 5, tmp_path / "o.sgy", offsets=offs)
    back = read_volume(tmp_path / "o.sgy", offsets=offs)
    assert list(back.geometry.inline_numbers) == [100, 101, 102]


def _stream(rows, ns=4):
    for k, (il, xl, x, y) in enumerate(rows):
        yield TraceHeader(il, xl, x, y, k), np.full(ns, float(k))


def test_scan_geometry_rows_and_duplicates():
    rows = [(il, xl, il * 10.0, xl * 10.0) for il in (100, 101, 102) for xl in (200, 201)]
    table = scan_geometry(_stream(rows))
    assert len(table) == 6 and table.duplicates == []
    table = scan_geometry(_stream(rows + [(100, 200, 0.0, 0.0)]))
    assert len(table) == 7
    assert table.duplicates == [(100, 200)]


def test_scan_applies_scalar_from_file(tmp_path):
    vol = make_volume()
    p = tmp_path / "s.sgy"
    write_segy(vol, 5, p, coordinate_scalar=-100)
    data = bytearray(p.read_bytes())
    struct.pack_into(">i", data, 3600 + 180, 5_210_012)
    p.write_bytes(bytes(data))
    _, traces = read_segy(p)
    table = scan_geometry(traces)
    assert table.x[0] == pytest.approx(52100.12)


HEADER = BinaryHeader(4000, 4, SampleFormat.IEEE_FLOAT32, 0)


def test_assemble_full_grid_dims():
    rows = [(il, xl, il * 25.0, xl * 12.5) for il in (100, 101, 102) for xl in (200, 201)]
    vol = assemble_volume(_stream(rows), RectRegion(100, 102, 200, 201), HEADER)
    assert vol.amplitudes.shape == (3, 2, 4)
    assert vol.amplitudes[2, 1, 0] == 5.0


def test_assemble_missing_trace():
    rows = [(il, xl, il * 25.0, xl * 12.5) for il in (100, 101, 102) for xl in (200, 201, 202)]
    rows.remove((101, 201, 101 * 25.0, 201 * 12.5))
    with pytest.raises(SegyFormatError, match="inline 101, crossline 201"):
        assemble_volume(_stream(rows), RectRegion(100, 102, 200, 202), HEADER)


def test_assemble_inconsistent_samples():
    def stream():
        yield TraceHeader(1, 1, 0.0, 0.0, 0), np.zeros(4)
        yield TraceHeader(1, 2, 0.0, 1.0, 1), np.zeros(3)
    with pytest.raises(SegyFormatError, match="samples"):
        assemble_volume(stream(), RectRegion(1, 1, 1, 2), HEADER)


def test_assemble_fits_crossline_spacing():
    # rotated grid: the least-squares basis must recover 12.5 m crossline spacing exactly
    a = np.deg2rad(37.0)
    il_vec = 25.0 * np.array([np.cos(a), np.sin(a)])
    xl_vec = 12.5 * np.array([-np.sin(a), np.cos(a)])
    rows = []
    for i in range(4):
        for j in range(5):
            x, y = np.array([1000.0, 2000.0]) + i * il_vec + j * xl_vec
            rows.append((10 + i, 20 + j, x, y))
    vol = assemble_volume(_stream(rows), RectRegion(10, 13, 20, 24), HEADER)
    assert np.hypot(*vol.geometry.crossline_vec) == pytest.approx(12.5, abs=1e-6)
    assert np.hypot(*vol.geometry.inline_vec) == pytest.approx(25.0, abs=1e-6)


@given(
    st.integers(2, 4), st.integers(2, 4), st.integers(1, 12),
    st.integers(0, 2**31 - 1),
)
def test_roundtrip_property_ieee(tmp_path_factory, ni, nj, ns, seed):
    rng = np.random.default_rng(seed)
    amps = (rng.normal(size=(ni, nj, ns)) * 10 ** rng.uniform(-3, 3)).astype(np.float32).astype(np.float64)
    geom = GridGeometry((rng.uniform(0, 1e5), rng.uniform(0, 1e6)), (25.0, 3.0), (-2.0, 12.5), ni, nj,
                        int(rng.integers(1, 1000)), int(rng.integers(1, 1000)))
    vol = SeismicVolume(amps, geom, 0.002, Axis.TIME)
    p = tmp_path_factory.mktemp("rt") / "v.sgy"
    write_segy(vol, 5, p)
    back = read_volume(p)
    assert np.array_equal(back.amplitudes, vol.amplitudes)
    assert back.dt_or_dz == vol.dt_or_dz
    assert list(back.geometry.inline_numbers) == list(geom.inline_numbers)
    assert list(back.geometry.crossline_numbers) == list(geom.crossline_numbers)
    # coordinates are stored to the centimetre
    assert np.allclose(back.geometry.origin, geom.origin, atol=0.01)
    assert np.allclose(back.geometry.inline_vec, geom.inline_vec, atol=0.01)
    assert np.allclose(back.geometry.crossline_vec, geom.crossline_vec, atol=0.01)


@given(hnp.arrays(np.float64, (2, 3, 5), elements=st.floats(1e-3, 1e6)))
def test_ibm_file_roundtrip_property(tmp_path_factory, amps):
    geom = GridGeometry((0.0, 0.0), (25.0, 0.0), (0.0, 25.0), 2, 3)
    vol = SeismicVolume(amps, geom, 0.004)
    p = tmp_path_factory.mktemp("ibm") / "v.sgy"
    write_segy(vol, 1, p)
    back = read_volume(p).amplitudes
    assert np.all(np.abs(back - amps) <= 1e-6 * np.abs(amps))
