"""Analytic ellipse phantoms and raster grids.

A phantom is a finite sum of constant-density ellipses living inside the
scene square [-1, 1]^2.  Everything downstream (Radon data, Fourier
transforms, boundary normals) is available in closed form for this class.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SCENE_HALF_WIDTH = 1.0

# Upper bound on the number of point samples rasterize may allocate at once
# (rows of sub-samples are streamed, but the total work is capped here).
MAX_RASTER_SAMPLES = 1 << 30


@dataclass(frozen=True)
class Ellipse:
    """Constant-density ellipse.

    Args:
        center: (cx, cy) in scene units.
        semi_axes: (a, b) with a >= b > 0; a lies along the tilt direction.
        tilt: rotation of the a-axis in radians, in [0, pi).
        density: value of f inside the ellipse.
    """

    center: tuple[float, float]
    semi_axes: tuple[float, float]
    tilt: float = 0.0
    density: float = 1.0

    def __post_init__(self):
        cx, cy = (float(v) for v in self.center)
        a, b = (float(v) for v in self.semi_axes)
        tilt = float(self.tilt)
        vals = (cx, cy, a, b, tilt, float(self.density))
        if not all(np.isfinite(vals)):
            raise ValueError("ellipse parameters must be finite")
        if not (a > 0 and b > 0):
            raise ValueError(f"semi-axes must be positive, got {(a, b)}")
        if a < b:
            # keep the a >= b convention by swapping onto the orthogonal axis
            a, b = b, a
            tilt = tilt + np.pi / 2
        tilt = float(np.mod(tilt, np.pi))
        object.__setattr__(self, "center", (cx, cy))
        object.__setattr__(self, "semi_axes", (a, b))
        object.__setattr__(self, "tilt", tilt)
        object.__setattr__(self, "density", float(self.density))
        hx, hy = self.half_extents()
        tol = 1e-12
        if abs(cx) + hx > SCENE_HALF_WIDTH + tol or abs(cy) + hy > SCENE_HALF_WIDTH + tol:
            raise ValueError(f"ellipse {self} does not fit in the scene square [-1, 1]^2")

    @property
    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        """Unit vectors (u, v) along the a- and b-axes."""
        c, s = np.cos(self.tilt), np.sin(self.tilt)
        return np.array([c, s]), np.array([-s, c])

    @property
    def shape_matrix(self) -> np.ndarray:
        """A = [a u, b v]; the ellipse is {c + A z : |z| <= 1}."""
        u, v = self.axes
        a, b = self.semi_axes
        return np.column_stack([a * u, b * v])

    def half_extents(self) -> tuple[float, float]:
        a, b = self.semi_axes
        c, s = np.cos(self.tilt), np.sin(self.tilt)
        return float(np.hypot(a * c, b * s)), float(np.hypot(a * s, b * c))

    def support_radius(self, theta) -> np.ndarray:
        """Half-width R(theta) of the ellipse's projection onto direction theta."""
        theta = np.asarray(theta, dtype=float)
        u, v = self.axes
        a, b = self.semi_axes
        pu = theta[..., 0] * u[0] + theta[..., 1] * u[1]
        pv = theta[..., 0] * v[0] + theta[..., 1] * v[1]
        return np.sqrt((a * pu) ** 2 + (b * pv) ** 2)

    def inside(self, x, y) -> np.ndarray:
        """Boolean mask of points in the closed ellipse."""
        u, v = self.axes
        a, b = self.semi_axes
        dx = np.asarray(x, dtype=float) - self.center[0]
        dy = np.asarray(y, dtype=float) - self.center[1]
        p = (dx * u[0] + dy * u[1]) / a
        q = (dx * v[0] + dy * v[1]) / b
        return p * p + q * q <= 1.0


@dataclass(frozen=True)
class Phantom:
    ellipses: tuple[Ellipse, ...]
    name: str = "phantom"

    def __post_init__(self):
        object.__setattr__(self, "ellipses", tuple(self.ellipses))
        if len(self.ellipses) == 0:
            raise ValueError("a phantom needs at least one ellipse")

    def __add__(self, other: "Phantom") -> "Phantom":
        return Phantom(self.ellipses + other.ellipses, f"{self.name}+{other.name}")


@dataclass(frozen=True)
class ImageGrid:
    """Square raster over [-extent, extent]^2.

    values[i, j] is the sample at x = -extent + j*dx, y = -extent + i*dx, so the
    row index increases with y and the corner pixels sit on the boundary.
    """

    values: np.ndarray
    extent: float = 1.0
    n: int = field(init=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
            raise ValueError(f"ImageGrid needs a square 2-D array, got shape {vals.shape}")
        if vals.shape[0] < 2:
            raise ValueError("ImageGrid needs n >= 2")
        if not (np.isfinite(self.extent) and self.extent > 0):
            raise ValueError("extent must be positive")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "extent", float(self.extent))
        object.__setattr__(self, "n", vals.shape[0])

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent / (self.n - 1)

    @property
    def coords(self) -> np.ndarray:
        """Pixel-center coordinates along either axis (exactly antisymmetric)."""
        return grid_coords(self.n, self.extent)


def grid_coords(n: int, extent: float) -> np.ndarray:
    """n uniformly spaced coordinates from -extent to extent, endpoints included."""
    return extent * ((2.0 * np.arange(n) - (n - 1)) / (n - 1))


def default_disk() -> Phantom:
    """Disk of radius 0.5 centred at (0.2, 0) with unit density."""
    return Phantom((Ellipse((0.2, 0.0), (0.5, 0.5), 0.0, 1.0),), name="default_disk")


def unit_disk(density: float = 1.0) -> Phantom:
    return Phantom((Ellipse((0.0, 0.0), (1.0, 1.0), 0.0, density),), name="unit_disk")


def point_value(phantom: Phantom, x) -> float | np.ndarray:
    """Evaluate f at a point or at an array of points of shape (..., 2).

    Boundary points count as inside.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 2:
        raise ValueError("points must have a trailing dimension of size 2")
    if not np.all(np.isfinite(x)):
        raise ValueError("points must be finite")
    out = np.zeros(x.shape[:-1])
    for e in phantom.ellipses:
        out = out + e.density * e.inside(x[..., 0], x[..., 1])
    return float(out) if out.ndim == 0 else out


def rasterize(phantom: Phantom, n: int, extent: float = 1.0, supersample: int = 1,
              max_samples: int = MAX_RASTER_SAMPLES) -> ImageGrid:
    """Sample the phantom on an n x n grid.

    Each pixel is the mean of point_value over a supersample x supersample
    sub-grid of its cell (cell width dx, centred on the pixel).  With
    supersample=1 this is point sampling at the pixel centers.
    """
    n, supersample = int(n), int(supersample)
    if n < 2:
        raise ValueError("n must be at least 2")
    if supersample < 1:
        raise ValueError("supersample must be at least 1")
    total = (n * supersample) ** 2
    if total > max_samples:
        raise ValueError(f"rasterize would need {total} samples, above the budget of {max_samples}")
    dx = 2.0 * extent / (n - 1)
    centers = grid_coords(n, extent)
    # integer numerators keep the sub-grid exactly symmetric about each center
    sub = (2.0 * np.arange(supersample) + 1.0 - supersample) / (2.0 * supersample)
    xs = (centers[:, None] + dx * sub[None, :]).ravel()
    out = np.empty((n, n))
    # stream one pixel row (supersample sub-rows) at a time
    for i in range(n):
        ys = centers[i] + dx * sub
        acc = np.zeros(xs.size)
        for y in ys:
            yy = np.full(xs.size, y)
            for e in phantom.ellipses:
                acc += e.density * e.inside(xs, yy)
        out[i] = acc.reshape(n, supersample).sum(axis=1) / supersample ** 2
    return ImageGrid(out, extent)
