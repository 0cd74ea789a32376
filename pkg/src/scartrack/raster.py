"""Georeferenced rasters, NDVI math, resampling, and bit-exact file I/O.

Grids live in a projected metric frame: ``origin_x, origin_y`` are the map
coordinates of the top-left corner, rows count downward, and the cell at
``(row, col)`` has its center at ``origin_x + (col + 0.5) * cell_size``,
``origin_y - (row + 0.5) * cell_size``. Values are float64 row-major arrays
with a parallel boolean nodata plane. Files use ESRI ASCII Grid for rasters
and binary PGM (P5) for masks so round trips are lossless and parseable
without GIS dependencies.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ArgumentError,
    CoverageError,
    DimensionError,
    FormatError,
    RegistrationError,
)

__all__ = [
    "GridTemplate",
    "GeoGrid",
    "SpectralFrame",
    "NdviFrame",
    "BinaryMask",
    "compute_ndvi",
    "resample_bilinear",
    "threshold_mask",
    "crop_register",
    "read_grid",
    "write_grid",
    "grid_to_bytes",
    "grid_from_bytes",
    "read_mask",
    "write_mask",
    "mask_to_bytes",
    "mask_from_bytes",
]

# Fractional cell offsets closer than this to an integer are snapped so that
# center-aligned resampling reproduces the source bit-for-bit.
_ALIGN_EPS = 1e-9


@dataclass(frozen=True)
class GridTemplate:
    """Geometry shared by co-registered grids: shape, cell size, and origin."""

    width: int
    height: int
    cell_size: float
    origin_x: float
    origin_y: float

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ArgumentError(f"grid dimensions must be >= 1, got {self.width}x{self.height}")
        if not (self.cell_size > 0):
            raise ArgumentError(f"cell_size must be > 0, got {self.cell_size}")

    def matches(self, other: "GridTemplate") -> bool:
        return (
            self.width == other.width
            and self.height == other.height
            and math.isclose(self.cell_size, other.cell_size, rel_tol=1e-9, abs_tol=1e-9)
            and math.isclose(self.origin_x, other.origin_x, rel_tol=1e-9, abs_tol=1e-6)
            and math.isclose(self.origin_y, other.origin_y, rel_tol=1e-9, abs_tol=1e-6)
        )


@dataclass
class GeoGrid:
    """Single-band raster of real values with per-cell nodata."""

    width: int
    height: int
    cell_size: float
    origin_x: float
    origin_y: float
    values: np.ndarray  # float64, shape (height, width)
    nodata: np.ndarray  # bool, shape (height, width)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ArgumentError(f"grid dimensions must be >= 1, got {self.width}x{self.height}")
        if not (self.cell_size > 0):
            raise ArgumentError(f"cell_size must be > 0, got {self.cell_size}")
        self.values = np.asarray(self.values, dtype=np.float64)
        self.nodata = np.asarray(self.nodata, dtype=bool)
        shape = (self.height, self.width)
        if self.values.shape != shape:
            raise DimensionError(f"values shape {self.values.shape} != declared {shape}")
        if self.nodata.shape != shape:
            raise DimensionError(f"nodata shape {self.nodata.shape} != declared {shape}")
        if not np.all(np.isfinite(self.values[~self.nodata])):
            raise ArgumentError("non-nodata values must be finite")
        if self.nodata.any():
            # canonical form: nodata cells hold 0.0, so equality and file
            # round trips are exact over the whole array
            self.values = np.where(self.nodata, 0.0, self.values)

    @classmethod
    def create(cls, values, cell_size: float, origin_x: float = 0.0, origin_y: float = 0.0,
               nodata=None) -> "GeoGrid":
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 2:
            raise ArgumentError(f"values must be 2-D, got ndim={arr.ndim}")
        nod = np.zeros(arr.shape, dtype=bool) if nodata is None else np.asarray(nodata, dtype=bool)
        return cls(arr.shape[1], arr.shape[0], float(cell_size), float(origin_x), float(origin_y),
                   arr, nod)

    @property
    def template(self) -> GridTemplate:
        return GridTemplate(self.width, self.height, self.cell_size, self.origin_x, self.origin_y)

    def filled(self, fill: float = 0.0) -> np.ndarray:
        """Values with nodata cells replaced by ``fill``."""
        out = self.values.copy()
        out[self.nodata] = fill
        return out


@dataclass
class SpectralFrame:
    """Co-registered red and near-infrared reflectance bands for one date.

    Band arrays hold stored integers (or already-scaled reals); dividing by
    ``reflectance_scale`` yields surface reflectance, which must land in
    [0, 1.5] for every non-nodata cell.
    """

    red: GeoGrid
    nir: GeoGrid
    date: dt.date
    reflectance_scale: float = 10000.0

    def __post_init__(self):
        if not (self.reflectance_scale > 0):
            raise ArgumentError(f"reflectance_scale must be > 0, got {self.reflectance_scale}")
        if not self.red.template.matches(self.nir.template):
            raise DimensionError(
                f"red band {self.red.width}x{self.red.height} does not match "
                f"nir band {self.nir.width}x{self.nir.height} (or geometry differs)"
            )
        for name, band in (("red", self.red), ("nir", self.nir)):
            valid = band.values[~band.nodata]
            if valid.size and (valid.min() < 0 or valid.max() / self.reflectance_scale > 1.5):
                raise ArgumentError(f"{name} reflectance outside [0, 1.5] after scaling")


@dataclass
class NdviFrame:
    """Dated NDVI raster; ``frame_index`` stays None until sequencing."""

    grid: GeoGrid
    date: dt.date
    frame_index: int | None = None

    def __post_init__(self):
        valid = self.grid.values[~self.grid.nodata]
        if valid.size and (valid.min() < -1.0 or valid.max() > 1.0):
            raise ArgumentError("NDVI values must lie in [-1, 1]")


@dataclass
class BinaryMask:
    """Per-frame scar mask over the same lattice as the frame it annotates."""

    width: int
    height: int
    cell_size: float
    bits: np.ndarray = field(repr=False)  # bool, shape (height, width)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ArgumentError(f"mask dimensions must be >= 1, got {self.width}x{self.height}")
        if not (self.cell_size > 0):
            raise ArgumentError(f"cell_size must be > 0, got {self.cell_size}")
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.shape != (self.height, self.width):
            raise DimensionError(
                f"bits shape {self.bits.shape} != declared {(self.height, self.width)}"
            )

    @classmethod
    def from_bits(cls, bits, cell_size: float = 1.0) -> "BinaryMask":
        arr = np.asarray(bits, dtype=bool)
        return cls(arr.shape[1], arr.shape[0], float(cell_size), arr)

    @property
    def count(self) -> int:
        return int(self.bits.sum())

    def same_shape(self, other: "BinaryMask") -> bool:
        return self.width == other.width and self.height == other.height


def compute_ndvi(frame: SpectralFrame) -> NdviFrame:
    """Per-cell (nir - red) / (nir + red) after reflectance scaling.

    Cells where either band is nodata, or where the band sum is zero, come
    out as nodata. Results are clamped to [-1, 1].
    """
    scale = frame.reflectance_scale
    red = frame.red.values / scale
    nir = frame.nir.values / scale
    den = nir + red
    nodata = frame.red.nodata | frame.nir.nodata | (den == 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ndvi = (nir - red) / den
    ndvi = np.clip(ndvi, -1.0, 1.0)
    ndvi[nodata] = 0.0
    grid = GeoGrid(frame.red.width, frame.red.height, frame.red.cell_size,
                   frame.red.origin_x, frame.red.origin_y, ndvi, nodata)
    return NdviFrame(grid=grid, date=frame.date)


def _axis_samples(n_in: int, src_cell: float, n_out: int, dst_cell: float):
    """Source indices and weights for one axis of center-to-center bilinear."""
    # offset of each output center from the first input center, in input cells
    v = (np.arange(n_out) + 0.5) * (dst_cell / src_cell) - 0.5
    v = np.clip(v, 0.0, n_in - 1.0)
    i0 = np.floor(v).astype(np.int64)
    i0 = np.minimum(i0, n_in - 1)
    f = v - i0
    f[f < _ALIGN_EPS] = 0.0
    high = f > 1.0 - _ALIGN_EPS
    i0[high] += 1
    f[high] = 0.0
    i0 = np.minimum(i0, n_in - 1)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, f


def resample_bilinear(grid: GeoGrid, target_cell_size: float) -> GeoGrid:
    """Resample to a new cell size over the same map extent.

    Each output cell center is interpolated bilinearly from the four
    surrounding input cell centers; coordinates outside the border centers
    clamp to the border. Any contributing (positive-weight) nodata neighbor
    makes the output cell nodata, so values are never invented under gaps.
    """
    if not (target_cell_size > 0):
        raise ArgumentError(f"target_cell_size must be > 0, got {target_cell_size}")
    s, t = grid.cell_size, float(target_cell_size)
    out_w = max(1, math.ceil(grid.width * s / t - _ALIGN_EPS))
    out_h = max(1, math.ceil(grid.height * s / t - _ALIGN_EPS))

    j0, j1, fx = _axis_samples(grid.width, s, out_w, t)
    i0, i1, fy = _axis_samples(grid.height, s, out_h, t)

    vals = grid.filled(0.0)
    nod = grid.nodata

    v00 = vals[np.ix_(i0, j0)]
    v01 = vals[np.ix_(i0, j1)]
    v10 = vals[np.ix_(i1, j0)]
    v11 = vals[np.ix_(i1, j1)]
    wy = fy[:, None]
    wx = fx[None, :]
    # v0 + f * (v1 - v0) keeps constants (and zero-weight samples) bit-exact
    top = v00 + wx * (v01 - v00)
    bottom = v10 + wx * (v11 - v10)
    out = top + wy * (bottom - top)

    w00 = (1 - wy) * (1 - wx)
    w01 = (1 - wy) * wx
    w10 = wy * (1 - wx)
    w11 = wy * wx
    out_nodata = (
        ((w00 > 0) & nod[np.ix_(i0, j0)])
        | ((w01 > 0) & nod[np.ix_(i0, j1)])
        | ((w10 > 0) & nod[np.ix_(i1, j0)])
        | ((w11 > 0) & nod[np.ix_(i1, j1)])
    )
    out[out_nodata] = 0.0
    return GeoGrid(out_w, out_h, t, grid.origin_x, grid.origin_y, out, out_nodata)


def threshold_mask(frame: NdviFrame, threshold: float) -> BinaryMask:
    """Cells with NDVI <= threshold (inclusive); nodata cells are background."""
    if not (-1.0 <= threshold <= 1.0):
        raise ArgumentError(f"threshold must lie in [-1, 1], got {threshold}")
    g = frame.grid
    bits = (g.values <= threshold) & ~g.nodata
    return BinaryMask(g.width, g.height, g.cell_size, bits)


def crop_register(grid: GeoGrid, target: GridTemplate) -> GeoGrid:
    """Extract the target window from the grid; uncovered cells become nodata.

    This is window extraction on a shared lattice, not reprojection: the
    target must use the same cell size and sit on the source cell grid.
    """
    if not math.isclose(grid.cell_size, target.cell_size, rel_tol=1e-9, abs_tol=1e-9):
        raise RegistrationError(
            f"cell_size mismatch: source {grid.cell_size}, target {target.cell_size}"
        )
    c = grid.cell_size
    col_off_f = (target.origin_x - grid.origin_x) / c
    row_off_f = (grid.origin_y - target.origin_y) / c
    col_off = round(col_off_f)
    row_off = round(row_off_f)
    if abs(col_off_f - col_off) > 1e-6 or abs(row_off_f - row_off) > 1e-6:
        raise RegistrationError(
            f"target origin is not aligned to the source cell lattice "
            f"(offsets {col_off_f}, {row_off_f} cells)"
        )
    if (col_off >= grid.width or col_off + target.width <= 0
            or row_off >= grid.height or row_off + target.height <= 0):
        raise CoverageError("target window does not intersect the source extent")

    values = np.zeros((target.height, target.width), dtype=np.float64)
    nodata = np.ones((target.height, target.width), dtype=bool)
    src_r0 = max(0, row_off)
    src_c0 = max(0, col_off)
    src_r1 = min(grid.height, row_off + target.height)
    src_c1 = min(grid.width, col_off + target.width)
    dst_r0 = src_r0 - row_off
    dst_c0 = src_c0 - col_off
    dst_r1 = dst_r0 + (src_r1 - src_r0)
    dst_c1 = dst_c0 + (src_c1 - src_c0)
    values[dst_r0:dst_r1, dst_c0:dst_c1] = grid.values[src_r0:src_r1, src_c0:src_c1]
    nodata[dst_r0:dst_r1, dst_c0:dst_c1] = grid.nodata[src_r0:src_r1, src_c0:src_c1]
    values[nodata] = 0.0
    return GeoGrid(target.width, target.height, target.cell_size,
                   target.origin_x, target.origin_y, values, nodata)


# ---------------------------------------------------------------------------
# ESRI ASCII Grid I/O
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    # repr of a Python float is the shortest string that parses back exactly
    return repr(float(x))


def _pick_sentinel(grid: GeoGrid) -> float:
    sentinel = -9999.0
    valid = grid.values[~grid.nodata]
    while valid.size and np.any(valid == sentinel):
        sentinel *= 10.0
    return sentinel


def grid_to_bytes(grid: GeoGrid) -> bytes:
    sentinel = _pick_sentinel(grid)
    yll = grid.origin_y - grid.height * grid.cell_size
    lines = [
        f"ncols {grid.width}",
        f"nrows {grid.height}",
        f"xllcorner {_fmt(grid.origin_x)}",
        f"yllcorner {_fmt(yll)}",
        f"cellsize {_fmt(grid.cell_size)}",
        f"NODATA_value {_fmt(sentinel)}",
    ]
    for r in range(grid.height):
        row = [
            _fmt(sentinel) if grid.nodata[r, c] else _fmt(grid.values[r, c])
            for c in range(grid.width)
        ]
        lines.append(" ".join(row))
    return ("\n".join(lines) + "\n").encode("ascii")


def grid_from_bytes(data: bytes) -> GeoGrid:
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise FormatError(f"grid payload is not ASCII text (byte {exc.start})") from None
    lines = text.splitlines()

    def header(idx: int, key: str) -> float:
        if idx >= len(lines):
            raise FormatError(f"truncated header: missing '{key}' at line {idx + 1}")
        parts = lines[idx].split()
        if len(parts) != 2 or parts[0].lower() != key.lower():
            raise FormatError(f"malformed header at line {idx + 1}: expected '{key} <value>'")
        try:
            return float(parts[1])
        except ValueError:
            raise FormatError(f"malformed header value at line {idx + 1}: {parts[1]!r}") from None

    ncols = int(header(0, "ncols"))
    nrows = int(header(1, "nrows"))
    xll = header(2, "xllcorner")
    yll = header(3, "yllcorner")
    cell = header(4, "cellsize")
    sentinel = header(5, "NODATA_value")
    if ncols < 1 or nrows < 1:
        raise FormatError(f"malformed header: non-positive dimensions {ncols}x{nrows}")
    if not (cell > 0):
        raise FormatError(f"malformed header: cellsize {cell} at line 5")

    values = np.zeros((nrows, ncols), dtype=np.float64)
    for r in range(nrows):
        lineno = 7 + r
        if 6 + r >= len(lines) or not lines[6 + r].strip():
            raise FormatError(f"truncated payload: expected data row at line {lineno}")
        parts = lines[6 + r].split()
        if len(parts) != ncols:
            raise FormatError(
                f"dimension mismatch at line {lineno}: header declares {ncols} columns, "
                f"row has {len(parts)} values"
            )
        try:
            values[r, :] = [float(p) for p in parts]
        except ValueError:
            raise FormatError(f"malformed value at line {lineno}") from None

    nodata = values == sentinel
    values[nodata] = 0.0
    origin_y = yll + nrows * cell
    return GeoGrid(ncols, nrows, cell, xll, origin_y, values, nodata)


def write_grid(grid: GeoGrid, path) -> None:
    with open(path, "wb") as fh:
        fh.write(grid_to_bytes(grid))


def read_grid(path) -> GeoGrid:
    with open(path, "rb") as fh:
        return grid_from_bytes(fh.read())


# ---------------------------------------------------------------------------
# Binary PGM (P5) mask I/O: 0 = background, 255 = scar
# ---------------------------------------------------------------------------

def mask_to_bytes(mask: BinaryMask) -> bytes:
    header = (
        f"P5\n# cell_size {_fmt(mask.cell_size)}\n{mask.width} {mask.height}\n255\n"
    ).encode("ascii")
    payload = np.where(mask.bits, 255, 0).astype(np.uint8).tobytes()
    return header + payload


def mask_from_bytes(data: bytes) -> BinaryMask:
    if not data.startswith(b"P5"):
        raise FormatError("not a binary PGM (expected magic 'P5' at byte 0)")
    pos = 2
    cell_size = 1.0
    tokens: list[int] = []
    while len(tokens) < 3:
        if pos >= len(data):
            raise FormatError(f"truncated PGM header at byte {pos}")
        ch = data[pos:pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            eol = data.find(b"\n", pos)
            if eol < 0:
                raise FormatError(f"unterminated PGM comment at byte {pos}")
            comment = data[pos + 1:eol].decode("ascii", "replace").split()
            if len(comment) == 2 and comment[0] == "cell_size":
                try:
                    cell_size = float(comment[1])
                except ValueError:
                    raise FormatError(f"malformed cell_size comment at byte {pos}") from None
            pos = eol + 1
        else:
            start = pos
            while pos < len(data) and not data[pos:pos + 1].isspace():
                pos += 1
            tok = data[start:pos]
            try:
                tokens.append(int(tok))
            except ValueError:
                raise FormatError(f"malformed PGM header token at byte {start}") from None
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise FormatError(f"malformed PGM header at byte {pos}: expected whitespace")
    pos += 1

    width, height, maxval = tokens
    if width < 1 or height < 1:
        raise FormatError(f"malformed PGM header: non-positive dimensions {width}x{height}")
    if maxval != 255:
        raise FormatError(f"unsupported PGM maxval {maxval} (expected 255)")
    expected = width * height
    payload = data[pos:]
    if len(payload) != expected:
        raise FormatError(
            f"truncated payload at byte {pos + len(payload)}: "
            f"expected {expected} pixel bytes, got {len(payload)}"
        )
    raw = np.frombuffer(payload, dtype=np.uint8)
    bad = np.nonzero((raw != 0) & (raw != 255))[0]
    if bad.size:
        raise FormatError(f"invalid pixel value {raw[bad[0]]} at byte {pos + int(bad[0])}")
    bits = (raw == 255).reshape(height, width)
    return BinaryMask(width, height, cell_size, bits.copy())


def write_mask(mask: BinaryMask, path) -> None:
    with open(path, "wb") as fh:
        fh.write(mask_to_bytes(mask))


def read_mask(path) -> BinaryMask:
    with open(path, "rb") as fh:
        return mask_from_bytes(fh.read())
