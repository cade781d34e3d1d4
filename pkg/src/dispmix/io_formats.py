"""Bit-exact serialization of volumes, disparity maps, images and mode sets.

Byte layouts (normative):

MPV probability volume container
    magic   4 bytes ASCII "MPV1"
    dims    M, H, W, D as 32-bit unsigned little-endian
    payload M*H*W*D 32-bit little-endian floats, order [m][h][w][d]

PFM disparity map (grayscale portable float map)
    line 1  "Pf"                      (color "PF" files are rejected)
    line 2  "<width> <height>"
    line 3  "-1.0" for little-endian payload, "1.0" for big-endian;
            other scale tokens are rejected so corrupted headers never pass
    payload H*W 32-bit floats, rows stored bottom-up.  Negative or
            non-finite values mark invalid pixels; the writer encodes
            invalid pixels as -1.0

PGM grayscale image (binary)
    "P5\n<width> <height>\n<maxval>\n" followed by 1 byte per sample
    (maxval < 256) or 2 bytes big-endian (maxval < 65536); samples are
    scaled to [0, 1] on read

Mode diagnostics JSON
    {"H":..,"W":..,"D":..,"pixels":[{"y","x","noise_count","label_cluster",
    "modes":[{"w","mu","b"}]}]} with numbers at 17 significant digits
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError, FormatError
from .types import DisparityMap, EnsembleVolumes, LaplaceMode, ProbabilityVolume

__all__ = [
    "write_volume",
    "read_volume",
    "write_pfm",
    "read_pfm",
    "read_pgm",
    "write_pgm",
    "PixelModes",
    "write_modes_json",
]

_MPV_MAGIC = b"MPV1"
_MPV_HEADER_SIZE = 20


def write_volume(path, ensemble: EnsembleVolumes | ProbabilityVolume) -> None:
    """Serialize an ensemble (or a single volume as M=1) to an MPV file."""
    if isinstance(ensemble, ProbabilityVolume):
        ensemble = EnsembleVolumes(members=(ensemble,))
    m, h, w, d = ensemble.m_count, ensemble.height, ensemble.width, ensemble.d_range
    header = _MPV_MAGIC + np.array([m, h, w, d], dtype="<u4").tobytes()
    with open(path, "wb") as f:
        f.write(header)
        for member in ensemble.members:
            f.write(np.ascontiguousarray(member.data, dtype="<f4").tobytes())


def read_volume(path) -> EnsembleVolumes:
    """Read an MPV file back into an ensemble.

    Pixel sums are renormalized when they drift from one by more than 1e-6
    (single-precision serialization noise passes through untouched, keeping
    write/read round trips bit-identical).  Drift beyond 1e-3 is a data
    error.  All-zero slices are preserved: they encode unsupervised pixels.
    """
    size = os.path.getsize(path)
    with open(path, "rb") as f:
        header = f.read(_MPV_HEADER_SIZE)
        if len(header) < _MPV_HEADER_SIZE:
            raise FormatError("truncated volume header", offset=len(header))
        if header[:4] != _MPV_MAGIC:
            raise FormatError(
                f"bad volume magic {header[:4]!r}, expected {_MPV_MAGIC!r}", offset=0
            )
        m, h, w, d = (int(v) for v in np.frombuffer(header[4:], dtype="<u4"))
        for name, dim, off in (("M", m, 4), ("H", h, 8), ("W", w, 12), ("D", d, 16)):
            if dim < 1:
                raise FormatError(f"volume dimension {name} must be >= 1, got {dim}", offset=off)
        expected = m * h * w * d * 4
        if size - _MPV_HEADER_SIZE != expected:
            raise FormatError(
                f"payload holds {size - _MPV_HEADER_SIZE} bytes, header implies {expected}",
                offset=_MPV_HEADER_SIZE,
            )
        data = np.fromfile(f, dtype="<f4", count=m * h * w * d)
    data = data.reshape(m, h, w, d)
    if not np.all(np.isfinite(data)):
        raise DataError(f"volume {path} contains non-finite probabilities")
    if np.any(data < 0.0):
        raise DataError(f"volume {path} contains negative probabilities")
    sums = data.sum(axis=3, dtype=np.float64)
    zero = sums == 0.0
    drift = np.abs(sums - 1.0)
    bad = (drift > 1e-3) & ~zero
    if bad.any():
        i = np.argwhere(bad)[0]
        raise DataError(
            f"pixel (m={i[0]}, y={i[1]}, x={i[2]}) sums to {sums[tuple(i)]:.6f}; "
            "expected 1 within 1e-3"
        )
    renorm = (drift > 1e-6) & ~zero
    if renorm.any():
        data[renorm] = (
            data[renorm].astype(np.float64) / sums[renorm][:, None]
        ).astype(np.float32)
    return EnsembleVolumes(members=tuple(ProbabilityVolume(data[i]) for i in range(m)))


_PFM_DIMS_RE = re.compile(rb"^(\d+) (\d+)$")


def _read_header_line(f, offset: int, limit: int = 64) -> tuple[bytes, int]:
    buf = b""
    while len(buf) < limit:
        c = f.read(1)
        if not c:
            raise FormatError("unexpected end of header", offset=offset + len(buf))
        if c == b"\n":
            return buf, offset + len(buf) + 1
        buf += c
    raise FormatError("header line too long", offset=offset)


def write_pfm(path, dmap: DisparityMap) -> None:
    """Write a grayscale little-endian PFM; invalid pixels become -1.0."""
    encoded = np.where(dmap.validity, dmap.values, np.float32(-1.0)).astype("<f4")
    with open(path, "wb") as f:
        f.write(b"Pf\n%d %d\n-1.0\n" % (dmap.width, dmap.height))
        f.write(np.ascontiguousarray(encoded[::-1]).tobytes())


def read_pfm(path) -> DisparityMap:
    """Read a grayscale PFM; negative or non-finite values become invalid."""
    size = os.path.getsize(path)
    with open(path, "rb") as f:
        kind, offset = _read_header_line(f, 0)
        if kind == b"PF":
            raise FormatError("color PFM is not supported, expected grayscale 'Pf'", offset=0)
        if kind != b"Pf":
            raise FormatError(f"bad PFM magic {kind!r}", offset=0)
        dims, dims_end = _read_header_line(f, offset)
        match = _PFM_DIMS_RE.match(dims)
        if not match:
            raise FormatError(f"bad PFM dimensions line {dims!r}", offset=offset)
        w, h = int(match.group(1)), int(match.group(2))
        if w < 1 or h < 1:
            raise FormatError(f"PFM dimensions must be positive, got {w}x{h}", offset=offset)
        scale, payload_start = _read_header_line(f, dims_end)
        if scale == b"-1.0":
            dtype = "<f4"
        elif scale == b"1.0":
            dtype = ">f4"
        else:
            raise FormatError(
                f"unsupported PFM scale token {scale!r}, expected '-1.0' or '1.0'",
                offset=dims_end,
            )
        expected = h * w * 4
        if size - payload_start != expected:
            raise FormatError(
                f"payload holds {size - payload_start} bytes, header implies {expected}",
                offset=payload_start,
            )
        data = np.fromfile(f, dtype=dtype, count=h * w)
    values = data.astype("<f4").reshape(h, w)[::-1]
    return DisparityMap.from_encoded(values)


def write_pgm(path, image, maxval: int = 255) -> None:
    """Write a [0, 1] grayscale image as binary PGM (test/tooling helper)."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or min(img.shape) < 1:
        raise DataError(f"image must be 2-D, got shape {img.shape}")
    if not 1 <= maxval <= 65535:
        raise DataError(f"maxval must be in [1, 65535], got {maxval}")
    q = np.clip(np.rint(img * maxval), 0, maxval)
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n%d\n" % (w, h, maxval))
        if maxval < 256:
            f.write(q.astype(np.uint8).tobytes())
        else:
            f.write(q.astype(">u2").tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM into a float64 image scaled to [0, 1]."""
    size = os.path.getsize(path)
    with open(path, "rb") as f:
        kind, offset = _read_header_line(f, 0)
        if kind == b"P2":
            raise FormatError("ASCII PGM (P2) is not supported, expected binary P5", offset=0)
        if kind != b"P5":
            raise FormatError(f"bad PGM magic {kind!r}", offset=0)
        dims, dims_end = _read_header_line(f, offset)
        match = _PFM_DIMS_RE.match(dims)
        if not match:
            raise FormatError(f"bad PGM dimensions line {dims!r}", offset=offset)
        w, h = int(match.group(1)), int(match.group(2))
        if w < 1 or h < 1:
            raise FormatError(f"PGM dimensions must be positive, got {w}x{h}", offset=offset)
        maxval_line, payload_start = _read_header_line(f, dims_end)
        if not maxval_line.isdigit():
            raise FormatError(f"bad PGM maxval line {maxval_line!r}", offset=dims_end)
        maxval = int(maxval_line)
        if not 1 <= maxval <= 65535:
            raise FormatError(f"PGM maxval must be in [1, 65535], got {maxval}", offset=dims_end)
        bytes_per = 1 if maxval < 256 else 2
        expected = h * w * bytes_per
        if size - payload_start != expected:
            raise FormatError(
                f"payload holds {size - payload_start} bytes, header implies {expected}",
                offset=payload_start,
            )
        dtype = np.uint8 if bytes_per == 1 else ">u2"
        data = np.fromfile(f, dtype=dtype, count=h * w)
    return data.reshape(h, w).astype(np.float64) / float(maxval)


@dataclass(frozen=True)
class PixelModes:
    """One pixel's mode set for diagnostics JSON; modes may be empty."""

    y: int
    x: int
    noise_count: int
    label_cluster: int | None
    modes: tuple[LaplaceMode, ...]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_modes_json(path, height: int, width: int, d_range: int, pixels: Sequence[PixelModes]) -> None:
    """Write per-pixel mode diagnostics as UTF-8 JSON with fixed key order."""
    chunks = []
    for px in pixels:
        modes = ",".join(
            '{"w":%s,"mu":%s,"b":%s}' % (_fmt(m.w), _fmt(m.mu), _fmt(m.b))
            for m in px.modes
        )
        label = "null" if px.label_cluster is None else str(int(px.label_cluster))
        chunks.append(
            '{"y":%d,"x":%d,"noise_count":%d,"label_cluster":%s,"modes":[%s]}'
            % (px.y, px.x, px.noise_count, label, modes)
        )
    doc = '{"H":%d,"W":%d,"D":%d,"pixels":[%s]}' % (height, width, d_range, ",".join(chunks))
    with open(path, "w", encoding="utf-8") as f:
        f.write(doc)
