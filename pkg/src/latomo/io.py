"""File formats: phantom text files and LATG1/LATS1 binary rasters.

A raster is one ASCII header line followed by rows*cols little-endian
float64 values in row-major order:

    LATG1 <rows> <cols> <x0> <y0> <dx> <dy>          images
    LATS1 <n_angles> <n_offsets> <phi0> <dphi> <s0> <ds>   sinograms
"""
from __future__ import annotations

import os

import numpy as np

from .phantom import Ellipse, ImageGrid, Phantom
from .sinogram import OFFSET_HALF_SPAN, AngularRange, Sinogram, full_angles, offset_grid

IMAGE_MAGIC = "LATG1"
SINO_MAGIC = "LATS1"
_MAX_HEADER = 4096


class RasterFormatError(ValueError):
    """Malformed or inconsistent raster file."""


def parse_phantom(text: str, name: str = "phantom") -> Phantom:
    """Parse `cx cy a b tilt_rad density` lines; '#' starts a comment."""
    ellipses = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 6:
            raise ValueError(f"line {lineno}: expected 6 numbers, got {len(parts)}")
        try:
            cx, cy, a, b, tilt, rho = (float(p) for p in parts)
        except ValueError:
            raise ValueError(f"line {lineno}: could not parse numbers from {raw!r}") from None
        try:
            ellipses.append(Ellipse((cx, cy), (a, b), tilt, rho))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if not ellipses:
        raise ValueError("phantom file contains no ellipses")
    return Phantom(tuple(ellipses), name)


def load_phantom(path) -> Phantom:
    with open(path) as fh:
        return parse_phantom(fh.read(), os.path.splitext(os.path.basename(str(path)))[0])


def format_phantom(phantom: Phantom) -> str:
    lines = [f"# {phantom.name}: cx cy a b tilt_rad density"]
    for e in phantom.ellipses:
        lines.append(" ".join(repr(v) for v in (*e.center, *e.semi_axes, e.tilt, e.density)))
    return "\n".join(lines) + "\n"


def save_phantom(path, phantom: Phantom) -> None:
    with open(path, "w") as fh:
        fh.write(format_phantom(phantom))


def _header(magic: str, shape, origin, step) -> bytes:
    fields = [magic, str(shape[0]), str(shape[1])] + [repr(float(v)) for v in (*origin, *step)]
    return (" ".join(fields) + "\n").encode("ascii")


def write_raster(path, data: ImageGrid | Sinogram) -> None:
    """Write an ImageGrid (LATG1) or a Sinogram (LATS1); non-finite values are refused."""
    if isinstance(data, ImageGrid):
        vals = data.values
        head = _header(IMAGE_MAGIC, vals.shape, (-data.extent, -data.extent), (data.spacing, data.spacing))
    elif isinstance(data, Sinogram):
        vals = data.values
        head = _header(SINO_MAGIC, vals.shape, (data.angles[0], data.dphi), (data.offsets[0], data.ds))
    else:
        raise TypeError("write_raster expects an ImageGrid or a Sinogram")
    if not np.all(np.isfinite(vals)):
        raise ValueError("refusing to write non-finite values")
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(vals, dtype="<f8").tobytes())


def _parse_header(line: bytes):
    try:
        text = line.decode("ascii")
    except UnicodeDecodeError:
        raise RasterFormatError("header is not ASCII") from None
    parts = text.rstrip("\n").split(" ")
    if len(parts) != 7:
        raise RasterFormatError(f"header must have 7 fields, found {len(parts)}")
    magic = parts[0]
    if magic not in (IMAGE_MAGIC, SINO_MAGIC):
        raise RasterFormatError(f"unknown magic {magic!r} (expected {IMAGE_MAGIC} or {SINO_MAGIC})")
    try:
        rows, cols = int(parts[1]), int(parts[2])
        nums = [float(p) for p in parts[3:]]
    except ValueError:
        raise RasterFormatError(f"malformed header fields: {text.strip()!r}") from None
    if rows < 1 or cols < 1:
        raise RasterFormatError("rows and cols must be positive")
    if not all(np.isfinite(nums)):
        raise RasterFormatError("header values must be finite")
    return magic, rows, cols, nums


def _wedge_grid(n: int, phi0: float, dphi: float):
    """Midpoint wedge grid matching the header, or None.

    The half-angle estimate -phi0 + dphi/2 can be off by a few ulps; the
    neighbour that reproduces phi0 and dphi exactly is preferred so that a
    written sinogram reads back bit-identical.
    """
    est = -phi0 + 0.5 * dphi
    if not 0 < est < np.pi / 2:
        return None
    cands = [est]
    up = down = est
    for _ in range(4):
        up, down = np.nextafter(up, np.inf), np.nextafter(down, 0.0)
        cands += [up, down]
    for c in cands:
        if not 0 < c < np.pi / 2:
            continue
        grid = AngularRange(c).angles(n)
        if grid[0] == phi0 and (grid[-1] - grid[0]) / (n - 1) == dphi:
            return grid
    return AngularRange(est).angles(n)


def read_raster(path) -> ImageGrid | Sinogram:
    """Read a LATG1 image or LATS1 sinogram, checking the payload size exactly."""
    with open(path, "rb") as fh:
        line = fh.readline(_MAX_HEADER)
        if not line.endswith(b"\n"):
            raise RasterFormatError("missing or over-long header line")
        magic, rows, cols, nums = _parse_header(line)
        payload = fh.read()
    expected = 8 * rows * cols
    if len(payload) != expected:
        raise RasterFormatError(
            f"payload has {len(payload)} bytes, expected {expected} for {rows}x{cols} float64")
    vals = np.frombuffer(payload, dtype="<f8").reshape(rows, cols).astype(np.float64)
    if magic == IMAGE_MAGIC:
        x0, y0, dx, dy = nums
        if rows != cols or x0 != y0 or dx != dy or not dx > 0:
            raise RasterFormatError("LATG1 images must be square with equal origin and spacing")
        extent = -x0
        if not extent > 0 or abs((rows - 1) * dx - 2 * extent) > 1e-9 * extent:
            raise RasterFormatError("LATG1 grid must span [-extent, extent] symmetrically")
        return ImageGrid(vals, extent)
    phi0, dphi, s0, ds = nums
    if not (dphi > 0 and ds > 0):
        raise RasterFormatError("LATS1 spacings must be positive")
    angles = phi0 + dphi * np.arange(rows)
    # recover the canonical grids when they match, so symmetry is exact
    full = full_angles(rows)
    if np.allclose(angles, full, rtol=0, atol=1e-12):
        angles = full
    else:
        canon = _wedge_grid(rows, phi0, dphi)
        if canon is not None and np.allclose(angles, canon, rtol=0, atol=1e-12):
            angles = canon
    offsets = s0 + ds * np.arange(cols)
    canon_s = offset_grid(cols)
    if abs(s0 + OFFSET_HALF_SPAN) < 1e-12 and np.allclose(offsets, canon_s, rtol=0, atol=1e-12):
        offsets = canon_s
    return Sinogram(angles, offsets, vals)
