"""Self-contained codecs for the backend protocol's byte formats.

The adapter deliberately reimplements these instead of importing the
tracking package: its only contract with the rest of the system is the wire
protocol, and these are the protocol's documented payload formats (ESRI
ASCII grid for NDVI frames, binary PGM P5 for masks, 0/255 pixels).
"""

from __future__ import annotations

import numpy as np


class CodecError(ValueError):
    """Payload bytes do not parse as the declared format."""


def decode_ascii_grid(data: bytes) -> tuple[np.ndarray, np.ndarray, float]:
    """Parse an ESRI ASCII grid; returns (values, nodata, cell_size)."""
    try:
        lines = data.decode("ascii").splitlines()
    except UnicodeDecodeError as exc:
        raise CodecError(f"grid payload is not ASCII text: {exc}") from None

    header = {}
    for i, key in enumerate(("ncols", "nrows", "xllcorner", "yllcorner",
                             "cellsize", "NODATA_value")):
        if i >= len(lines):
            raise CodecError(f"truncated grid header: missing {key}")
        parts = lines[i].split()
        if len(parts) != 2 or parts[0].lower() != key.lower():
            raise CodecError(f"malformed grid header line {i + 1}: {lines[i]!r}")
        header[key] = float(parts[1])

    ncols, nrows = int(header["ncols"]), int(header["nrows"])
    if ncols < 1 or nrows < 1:
        raise CodecError(f"bad grid dimensions {ncols}x{nrows}")
    values = np.zeros((nrows, ncols), dtype=np.float64)
    for r in range(nrows):
        if 6 + r >= len(lines):
            raise CodecError(f"truncated grid payload at row {r}")
        parts = lines[6 + r].split()
        if len(parts) != ncols:
            raise CodecError(f"grid row {r} has {len(parts)} values, expected {ncols}")
        values[r, :] = [float(p) for p in parts]
    nodata = values == header["NODATA_value"]
    values[nodata] = 0.0
    return values, nodata, header["cellsize"]


def decode_pgm_mask(data: bytes) -> tuple[np.ndarray, float]:
    """Parse a binary PGM mask; returns (bits, cell_size)."""
    if not data.startswith(b"P5"):
        raise CodecError("mask payload is not a binary PGM")
    pos = 2
    cell_size = 1.0
    tokens: list[int] = []
    while len(tokens) < 3:
        if pos >= len(data):
            raise CodecError("truncated PGM header")
        ch = data[pos:pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            eol = data.find(b"\n", pos)
            if eol < 0:
                raise CodecError("unterminated PGM comment")
            comment = data[pos + 1:eol].split()
            if len(comment) == 2 and comment[0] == b"cell_size":
                cell_size = float(comment[1])
            pos = eol + 1
        else:
            start = pos
            while pos < len(data) and not data[pos:pos + 1].isspace():
                pos += 1
            try:
                tokens.append(int(data[start:pos]))
            except ValueError:
                raise CodecError(f"bad PGM header token {data[start:pos]!r}") from None
    pos += 1  # single whitespace after maxval
    width, height, maxval = tokens
    if maxval != 255:
        raise CodecError(f"unsupported PGM maxval {maxval}")
    payload = data[pos:]
    if len(payload) != width * height:
        raise CodecError(f"PGM payload is {len(payload)} bytes, expected {width * height}")
    raw = np.frombuffer(payload, dtype=np.uint8)
    if np.any((raw != 0) & (raw != 255)):
        raise CodecError("PGM mask pixels must be 0 or 255")
    return (raw == 255).reshape(height, width).copy(), cell_size


def encode_pgm_mask(bits: np.ndarray, cell_size: float) -> bytes:
    h, w = bits.shape
    header = f"P5\n# cell_size {cell_size!r}\n{w} {h}\n255\n".encode("ascii")
    return header + np.where(bits, 255, 0).astype(np.uint8).tobytes()
