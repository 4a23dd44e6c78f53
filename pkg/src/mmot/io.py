"""Reading and writing grids: binary PGM, PNG and raw float64 dumps.

Raw dump layout: 8-byte magic ``b"MMOTF64\\0"``, ``nx`` and ``ny`` as little-endian
uint32, then ``nx * ny`` little-endian float64 values in C order of the
``(nx, ny)`` array.
"""
from __future__ import annotations

import os
import re
import struct

import numpy as np

RAW_MAGIC = b"MMOTF64\0"
_HEADER = struct.Struct("<8sII")

_PGM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*([^\s#]+)")


def _pgm_header(data: bytes):
    pos = 0
    tokens = []
    while len(tokens) < 4:
        m = _PGM_TOKEN.match(data, pos)
        if m is None:
            raise ValueError("truncated PGM header")
        tokens.append(m.group(1))
        pos = m.end()
    if tokens[0] != b"P5":
        raise ValueError(f"only binary PGM (P5) is supported, got {tokens[0]!r}")
    width, height, maxval = (int(t) for t in tokens[1:])
    # exactly one whitespace byte separates the header from the raster
    return width, height, maxval, pos + 1


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    width, height, maxval, offset = _pgm_header(data)
    if not 0 < maxval < 65536:
        raise ValueError(f"bad PGM maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height
    raster = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
    return raster.reshape(height, width).astype(float)


def write_pgm(path, values, bits: int = 8) -> None:
    """Write an array as binary PGM, scaled so that its maximum maps to full white."""
    values = np.asarray(values, dtype=float)
    maxval = 255 if bits == 8 else 65535
    peak = values.max()
    scaled = np.zeros_like(values) if peak <= 0 else np.clip(values / peak, 0.0, 1.0) * maxval
    raster = np.rint(scaled).astype(">u2" if bits == 16 else "u1")
    height, width = values.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n%d\n" % (width, height, maxval))
        fh.write(raster.tobytes())


def read_image(path) -> np.ndarray:
    """Load a grayscale intensity array from a PGM or PNG file."""
    path = os.fspath(path)
    if path.lower().endswith((".pgm", ".pnm")):
        return read_pgm(path)
    from PIL import Image

    with Image.open(path) as img:
        if img.mode in ("I;16", "I;16B", "I;16L", "I"):
            arr = np.asarray(img, dtype=float)
        else:
            arr = np.asarray(img.convert("L"), dtype=float)
    return arr


def write_image(path, values) -> None:
    path = os.fspath(path)
    if path.lower().endswith(".png"):
        from PIL import Image

        values = np.asarray(values, dtype=float)
        peak = values.max()
        scaled = np.zeros_like(values) if peak <= 0 else np.clip(values / peak, 0, 1) * 255
        Image.fromarray(np.rint(scaled).astype(np.uint8), mode="L").save(path)
    else:
        write_pgm(path, values)


def write_raw(path, values) -> None:
    values = np.ascontiguousarray(values, dtype="<f8")
    if values.ndim != 2:
        raise ValueError("raw dumps hold 2D arrays only")
    nx, ny = values.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(RAW_MAGIC, nx, ny))
        fh.write(values.tobytes(order="C"))


def read_raw(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise ValueError("truncated raw dump header")
        magic, nx, ny = _HEADER.unpack(header)
        if magic != RAW_MAGIC:
            raise ValueError(f"not a raw float dump (magic {magic!r})")
        body = fh.read()
    if len(body) != 8 * nx * ny:
        raise ValueError(f"raw dump body has {len(body)} bytes, expected {8 * nx * ny}")
    return np.frombuffer(body, dtype="<f8").reshape(nx, ny).astype(float)
