"""SEG-Y rev-1 reading and writing for post-stack 3D volumes.

Only the pieces the curation pipeline needs: 3200-byte textual header kept
as opaque bytes, the 400-byte binary header, 240-byte trace headers with
configurable byte positions, and IBM / IEEE / integer sample codecs.
"""
from __future__ import annotations

import enum
import os
import struct
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator

import numpy as np

from .geometry import GridGeometry, OccupancyGrid, RectRegion, fit_grid_geometry

TEXT_HEADER_SIZE = 3200
BINARY_HEADER_SIZE = 400
TRACE_HEADER_SIZE = 240
FILE_HEADER_SIZE = TEXT_HEADER_SIZE + BINARY_HEADER_SIZE

# binary header fields (byte offset within the file, 0-based) and their struct codes
_BIN_SAMPLE_INTERVAL = (3216, ">h")
_BIN_SAMPLES = (3220, ">h")
_BIN_FORMAT = (3224, ">h")
_BIN_MEASUREMENT = (3254, ">h")
# unassigned rev-1 bytes 3261-3262 carry the vertical domain of the volume
_BIN_DOMAIN = (3260, ">h")
_DOMAIN_TIME, _DOMAIN_DEPTH = 1, 2


class SegyFormatError(ValueError):
    """Malformed or unsupported SEG-Y content."""

    def __init__(self, message: str, offset: int | None = None, field: str | None = None):
        self.offset = offset
        self.field = field
        where = []
        if field:
            where.append(f"field {field}")
        if offset is not None:
            where.append(f"byte offset {offset}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class SampleFormat(enum.IntEnum):
    IBM_FLOAT32 = 1
    INT32 = 2
    INT16 = 3
    IEEE_FLOAT32 = 5

    @property
    def width(self) -> int:
        return 2 if self is SampleFormat.INT16 else 4


class Axis(str, enum.Enum):
    TIME = "time"
    DEPTH = "depth"


@dataclass(frozen=True)
class HeaderOffsets:
    """1-based trace-header byte positions (SEG-Y rev-1 defaults)."""

    inline: int = 189
    crossline: int = 193
    cdp_x: int = 181
    cdp_y: int = 185
    scalar: int = 71

    @classmethod
    def from_dict(cls, d: dict | None) -> "HeaderOffsets":
        return cls(**(d or {}))


@dataclass(frozen=True)
class BinaryHeader:
    sample_interval_us: int
    samples_per_trace: int
    sample_format_code: SampleFormat
    trace_count: int
    axis: Axis = Axis.TIME
    textual_header: bytes = field(default=b" " * TEXT_HEADER_SIZE, repr=False)

    @property
    def sample_interval(self) -> float:
        """Seconds for time-domain files, meters for depth-domain files."""
        scale = 1e-6 if self.axis is Axis.TIME else 1e-3
        return self.sample_interval_us * scale

    @property
    def text(self) -> str:
        return self.textual_header.decode("cp500", errors="replace")


@dataclass(frozen=True)
class TraceHeader:
    inline_no: int
    crossline_no: int
    cdp_x: float
    cdp_y: float
    trace_index: int


@dataclass
class SeismicVolume:
    amplitudes: np.ndarray  # [n_inline, n_crossline, n_samples]
    geometry: GridGeometry
    dt_or_dz: float
    axis: Axis = Axis.TIME

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes)
        if self.amplitudes.ndim != 3:
            raise ValueError("amplitudes must be 3D [inline, crossline, sample]")
        if self.dt_or_dz <= 0:
            raise ValueError("sample interval must be positive")
        if self.amplitudes.shape[:2] != (self.geometry.n_inline, self.geometry.n_crossline):
            raise ValueError("amplitude shape does not match geometry")
        if self.amplitudes.size and self.geometry.is_singular():
            raise ValueError("geometry basis vectors are linearly dependent")

    @property
    def n_samples(self) -> int:
        return self.amplitudes.shape[2]

    @property
    def sample_axis(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt_or_dz


# --------------------------------------------------------------------------
# sample codecs


def ibm_to_float(words) -> np.ndarray:
    """Decode big-endian-agnostic uint32 IBM System/360 words to float64."""
    w = np.asarray(words, dtype=np.uint32)
    sign = np.where(w >> 31, -1.0, 1.0)
    exponent = ((w >> 24) & 0x7F).astype(np.int64) - 64
    fraction = (w & 0x00FFFFFF).astype(np.float64) / float(1 << 24)
    return sign * np.ldexp(fraction, 4 * exponent)


def float_to_ibm(values) -> np.ndarray:
    """Encode floats as normalized IBM words, rounding the mantissa to nearest."""
    x = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("IBM encoding requires finite values")
    sign = (x < 0).astype(np.uint32) << 31
    a = np.abs(x)
    nz = a > 0
    _, e2 = np.frexp(np.where(nz, a, 1.0))
    e16 = -((-e2) // 4)  # ceil(e2 / 4) so that a / 16**e16 is in [1/16, 1)
    mant = np.rint(np.ldexp(np.where(nz, a, 0.0), 24 - 4 * e16)).astype(np.int64)
    carry = mant >= (1 << 24)
    mant = np.where(carry, mant >> 4, mant)
    e16 = e16 + carry
    biased = e16 + 64
    if np.any(nz & (biased > 127)):
        raise ValueError("value exceeds IBM float range")
    underflow = biased < 0
    mant = np.where(nz & ~underflow, mant, 0)
    biased = np.where(nz & ~underflow, biased, 0)
    return (sign | (biased.astype(np.uint32) << 24) | mant.astype(np.uint32)).astype(np.uint32)


_DTYPES = {
    SampleFormat.IBM_FLOAT32: ">u4",
    SampleFormat.INT32: ">i4",
    SampleFormat.INT16: ">i2",
    SampleFormat.IEEE_FLOAT32: ">f4",
}


def _as_format(code) -> SampleFormat:
    try:
        return SampleFormat(int(code))
    except ValueError:
        raise SegyFormatError(f"unsupported sample format code {code}", field="sample_format_code") from None


def decode_samples(buf: bytes, fmt, n: int) -> np.ndarray:
    fmt = _as_format(fmt)
    need = n * fmt.width
    if len(buf) != need:
        raise SegyFormatError(f"sample buffer holds {len(buf)} bytes, expected {need}")
    raw = np.frombuffer(buf, dtype=_DTYPES[fmt], count=n)
    if fmt is SampleFormat.IBM_FLOAT32:
        return ibm_to_float(raw)
    return raw.astype(np.float64)


def encode_samples(values, fmt) -> bytes:
    fmt = _as_format(fmt)
    v = np.asarray(values, dtype=np.float64)
    if fmt is SampleFormat.IBM_FLOAT32:
        return float_to_ibm(v).astype(">u4").tobytes()
    if fmt is SampleFormat.IEEE_FLOAT32:
        return v.astype(">f4").tobytes()
    info = np.iinfo(np.int16 if fmt is SampleFormat.INT16 else np.int32)
    r = np.rint(v)
    if np.any(r > info.max) or np.any(r < info.min):
        raise ValueError(f"amplitudes outside {fmt.name} range [{info.min}, {info.max}]")
    return r.astype(_DTYPES[fmt]).tobytes()


# --------------------------------------------------------------------------
# headers


def apply_coordinate_scalar(raw, scalar: int):
    """SEG-Y coordinate scalar: positive multiplies, negative divides, zero means 1."""
    if scalar > 0:
        return raw * float(scalar)
    if scalar < 0:
        return raw / float(-scalar)
    return raw * 1.0


def _unpack(buf: bytes, pos: int, code: str) -> int:
    return struct.unpack_from(code, buf, pos)[0]


def _read_binary_header(head: bytes, file_size: int) -> BinaryHeader:
    dt = _unpack(head, *_BIN_SAMPLE_INTERVAL)
    ns = _unpack(head, *_BIN_SAMPLES)
    code = _unpack(head, *_BIN_FORMAT)
    if dt <= 0:
        raise SegyFormatError(f"sample interval {dt} must be positive",
                              offset=_BIN_SAMPLE_INTERVAL[0], field="sample_interval_us")
    if ns <= 0:
        raise SegyFormatError(f"samples per trace {ns} must be positive",
                              offset=_BIN_SAMPLES[0], field="samples_per_trace")
    try:
        fmt = SampleFormat(code)
    except ValueError:
        raise SegyFormatError(f"unsupported sample format code {code}",
                              offset=_BIN_FORMAT[0], field="sample_format_code") from None
    trace_bytes = TRACE_HEADER_SIZE + ns * fmt.width
    body = file_size - FILE_HEADER_SIZE
    if body % trace_bytes:
        raise SegyFormatError(
            f"file body of {body} bytes is not a whole number of {trace_bytes}-byte traces",
            offset=FILE_HEADER_SIZE, field="samples_per_trace")
    domain = _unpack(head, *_BIN_DOMAIN)
    axis = Axis.DEPTH if domain == _DOMAIN_DEPTH else Axis.TIME
    return BinaryHeader(dt, ns, fmt, body // trace_bytes, axis, bytes(head[:TEXT_HEADER_SIZE]))


def _trace_field(buf: bytes, pos1: int, code: str = ">i") -> int:
    return struct.unpack_from(code, buf, pos1 - 1)[0]


def read_segy(path, offsets: HeaderOffsets | None = None) -> tuple[BinaryHeader, Iterator[tuple[TraceHeader, np.ndarray]]]:
    """Validate the file headers and return a lazy trace iterator.

    The iterator opens the file on first use and yields
    ``(TraceHeader, samples)`` in file order.
    """
    offsets = offsets or HeaderOffsets()
    size = os.path.getsize(path)
    if size < FILE_HEADER_SIZE:
        raise SegyFormatError(f"file is {size} bytes, shorter than the 3600-byte file header", offset=0)
    with open(path, "rb") as fh:
        head = fh.read(FILE_HEADER_SIZE)
    header = _read_binary_header(head, size)
    return header, _iter_traces(path, header, offsets)


def _iter_traces(path, header: BinaryHeader, offsets: HeaderOffsets):
    width = header.sample_format_code.width
    ns = header.samples_per_trace
    with open(path, "rb") as fh:
        fh.seek(FILE_HEADER_SIZE)
        for k in range(header.trace_count):
            pos = fh.tell()
            th = fh.read(TRACE_HEADER_SIZE)
            n_here = _trace_field(th, 115, ">h")
            if n_here not in (0, ns):
                raise SegyFormatError(
                    f"trace {k} declares {n_here} samples, binary header says {ns}",
                    offset=pos + 114, field="samples_per_trace")
            scalar = _trace_field(th, offsets.scalar, ">h")
            hdr = TraceHeader(
                inline_no=_trace_field(th, offsets.inline),
                crossline_no=_trace_field(th, offsets.crossline),
                cdp_x=apply_coordinate_scalar(_trace_field(th, offsets.cdp_x), scalar),
                cdp_y=apply_coordinate_scalar(_trace_field(th, offsets.cdp_y), scalar),
                trace_index=k,
            )
            yield hdr, decode_samples(fh.read(ns * width), header.sample_format_code, ns)


def _choose_scalar(xy: np.ndarray, requested: int | None) -> int:
    if requested is not None:
        return requested
    # centimetre precision unless that would overflow int32
    if xy.size == 0 or np.abs(xy).max() * 100 < 2**31 - 1:
        return -100
    return 1


def write_segy(volume: SeismicVolume, fmt, path, offsets: HeaderOffsets | None = None,
               coordinate_scalar: int | None = None, textual_header: bytes | None = None) -> None:
    """Write a volume as SEG-Y, one trace per (inline, crossline) node in inline-major order."""
    fmt = _as_format(fmt)
    offsets = offsets or HeaderOffsets()
    geom = volume.geometry
    ni, nj, ns = volume.amplitudes.shape
    if ns > 32767:
        raise ValueError("SEG-Y rev-1 cannot hold more than 32767 samples per trace")
    scale = 1e6 if volume.axis is Axis.TIME else 1e3
    interval = int(round(volume.dt_or_dz * scale))
    if interval <= 0 or interval > 32767:
        raise ValueError(f"sample interval {volume.dt_or_dz} not representable in the binary header")

    ii, jj = np.meshgrid(np.arange(ni), np.arange(nj), indexing="ij")
    xy = geom.index_to_xy(np.column_stack([ii.ravel(), jj.ravel()])) if ni * nj else np.zeros((0, 2))
    scalar = _choose_scalar(xy, coordinate_scalar)
    to_raw = (lambda v: np.rint(v * -scalar)) if scalar < 0 else (lambda v: np.rint(v / max(scalar, 1)))

    text = textual_header if textual_header is not None else _default_text_header(volume)
    text = text.ljust(TEXT_HEADER_SIZE, b"\x40")[:TEXT_HEADER_SIZE]
    binary = bytearray(BINARY_HEADER_SIZE)
    struct.pack_into(">h", binary, _BIN_SAMPLE_INTERVAL[0] - TEXT_HEADER_SIZE, interval)
    struct.pack_into(">h", binary, _BIN_SAMPLES[0] - TEXT_HEADER_SIZE, ns)
    struct.pack_into(">h", binary, _BIN_FORMAT[0] - TEXT_HEADER_SIZE, int(fmt))
    struct.pack_into(">h", binary, _BIN_MEASUREMENT[0] - TEXT_HEADER_SIZE, 1)
    struct.pack_into(">h", binary, _BIN_DOMAIN[0] - TEXT_HEADER_SIZE,
                     _DOMAIN_DEPTH if volume.axis is Axis.DEPTH else _DOMAIN_TIME)
    struct.pack_into(">H", binary, 300, 0x0100)  # revision 1.0

    inl = geom.inline_numbers
    xln = geom.crossline_numbers
    try:
        fh = open(path, "wb")
    except OSError as exc:
        raise OSError(f"cannot write SEG-Y to {path}: {exc}") from exc
    with fh:
        fh.write(text)
        fh.write(bytes(binary))
        k = 0
        for i in range(ni):
            payload = [encode_samples(volume.amplitudes[i, j], fmt) for j in range(nj)]
            for j in range(nj):
                th = bytearray(TRACE_HEADER_SIZE)
                struct.pack_into(">i", th, 0, k + 1)
                struct.pack_into(">i", th, 4, k + 1)
                struct.pack_into(">h", th, 114, ns)
                struct.pack_into(">h", th, 116, interval)
                struct.pack_into(">h", th, offsets.scalar - 1, scalar)
                struct.pack_into(">i", th, offsets.cdp_x - 1, int(to_raw(xy[k, 0])))
                struct.pack_into(">i", th, offsets.cdp_y - 1, int(to_raw(xy[k, 1])))
                struct.pack_into(">i", th, offsets.inline - 1, int(inl[i]))
                struct.pack_into(">i", th, offsets.crossline - 1, int(xln[j]))
                fh.write(bytes(th))
                fh.write(payload[j])
                k += 1


def _default_text_header(volume: SeismicVolume) -> bytes:
    lines = [
        "C 1 SEISCURATE SYNTHETIC OR DERIVED VOLUME",
        f"C 2 DOMAIN {volume.axis.value.upper()} INTERVAL {volume.dt_or_dz:g}",
        f"C 3 CRS {volume.geometry.crs_tag}",
        "C40 END TEXTUAL HEADER",
    ]
    text = "".join(line.ljust(80)[:80] for line in lines)
    return text.encode("cp500")


# --------------------------------------------------------------------------
# geometry scanning and assembly


@dataclass
class TraceTable:
    """One row per trace: line numbers and scaled coordinates."""

    inline: np.ndarray
    crossline: np.ndarray
    x: np.ndarray
    y: np.ndarray
    duplicates: list[tuple[int, int]]

    def __len__(self) -> int:
        return len(self.inline)

    def occupancy(self) -> OccupancyGrid:
        return OccupancyGrid.from_lines(self.inline, self.crossline)

    def to_dict(self) -> dict:
        return {
            "inline": self.inline.tolist(),
            "crossline": self.crossline.tolist(),
            "x": self.x.tolist(),
            "y": self.y.tolist(),
            "duplicates": [list(d) for d in self.duplicates],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TraceTable":
        return cls(np.asarray(d["inline"], dtype=np.int64), np.asarray(d["crossline"], dtype=np.int64),
                   np.asarray(d["x"], dtype=float), np.asarray(d["y"], dtype=float),
                   [tuple(v) for v in d["duplicates"]])


def scan_geometry(traces: Iterable[tuple[TraceHeader, np.ndarray]]) -> TraceTable:
    """Collect trace positions; repeated (inline, crossline) pairs are listed, not dropped."""
    il, xl, xs, ys = [], [], [], []
    seen: set[tuple[int, int]] = set()
    dups: list[tuple[int, int]] = []
    for hdr, _ in traces:
        key = (hdr.inline_no, hdr.crossline_no)
        if key in seen:
            dups.append(key)
        seen.add(key)
        il.append(hdr.inline_no)
        xl.append(hdr.crossline_no)
        xs.append(hdr.cdp_x)
        ys.append(hdr.cdp_y)
    return TraceTable(np.asarray(il, dtype=np.int64), np.asarray(xl, dtype=np.int64),
                      np.asarray(xs, dtype=float), np.asarray(ys, dtype=float), dups)


def assemble_volume(traces: Iterable[tuple[TraceHeader, np.ndarray]], rect: RectRegion,
                    header: BinaryHeader, inline_step: int = 1, crossline_step: int = 1,
                    crs_tag: str = "") -> SeismicVolume:
    """Materialize the traces inside ``rect`` as a regular volume.

    Traces outside the rectangle are skipped without being kept in memory.
    """
    ni = (rect.inline_max - rect.inline_min) // inline_step + 1
    nj = (rect.crossline_max - rect.crossline_min) // crossline_step + 1
    ns = header.samples_per_trace
    amps = np.zeros((ni, nj, ns), dtype=np.float64)
    filled = np.zeros((ni, nj), dtype=bool)
    xy = np.zeros((ni, nj, 2))
    for hdr, samples in traces:
        di = hdr.inline_no - rect.inline_min
        dj = hdr.crossline_no - rect.crossline_min
        if di % inline_step or dj % crossline_step:
            continue
        i, j = di // inline_step, dj // crossline_step
        if not (0 <= i < ni and 0 <= j < nj):
            continue
        if len(samples) != ns:
            raise SegyFormatError(
                f"trace ({hdr.inline_no}, {hdr.crossline_no}) has {len(samples)} samples, expected {ns}")
        if filled[i, j]:
            raise SegyFormatError(f"duplicate trace at inline {hdr.inline_no}, crossline {hdr.crossline_no}")
        amps[i, j] = samples
        xy[i, j] = (hdr.cdp_x, hdr.cdp_y)
        filled[i, j] = True
    if not filled.all():
        i, j = np.argwhere(~filled)[0]
        raise SegyFormatError(
            f"missing trace at inline {rect.inline_min + i * inline_step}, "
            f"crossline {rect.crossline_min + j * crossline_step} inside rectangle")
    ii, jj = np.meshgrid(np.arange(ni), np.arange(nj), indexing="ij")
    geom = fit_grid_geometry(ii.ravel(), jj.ravel(), xy[..., 0].ravel(), xy[..., 1].ravel(),
                             n_inline=ni, n_crossline=nj,
                             inline_start=rect.inline_min, crossline_start=rect.crossline_min,
                             inline_step=inline_step, crossline_step=crossline_step, crs_tag=crs_tag)
    return SeismicVolume(amps, geom, header.sample_interval, header.axis)


def read_volume(path, offsets: HeaderOffsets | None = None, crs_tag: str = "") -> SeismicVolume:
    """Read a file that holds a complete regular grid (as written by :func:`write_segy`)."""
    from .geometry import largest_full_rectangle

    header, traces = read_segy(path, offsets)
    table = scan_geometry(traces)
    occ = table.occupancy()
    if not occ.occupied.all():
        raise SegyFormatError(f"{path} is not a fully populated grid; use the rect stage")
    rect = largest_full_rectangle(occ)
    _, traces = read_segy(path, offsets)
    return assemble_volume(traces, rect, header, occ.inline_step, occ.crossline_step, crs_tag)


def with_amplitudes(volume: SeismicVolume, amplitudes, dt_or_dz=None, axis=None) -> SeismicVolume:
    return replace(volume, amplitudes=np.asarray(amplitudes),
                   dt_or_dz=volume.dt_or_dz if dt_or_dz is None else dt_or_dz,
                   axis=volume.axis if axis is None else axis)
