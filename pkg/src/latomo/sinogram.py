"""Radon transforms of ellipse phantoms, analytic and by line quadrature."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .phantom import Ellipse, ImageGrid, Phantom

OFFSET_HALF_SPAN = float(np.sqrt(2.0))


@dataclass(frozen=True)
class AngularRange:
    """Limited data set: directions +-(cos phi, sin phi) with |phi| < Phi."""

    phi: float

    def __post_init__(self):
        phi = float(self.phi)
        if not (np.isfinite(phi) and 0.0 < phi < np.pi / 2):
            raise ValueError(f"Phi must satisfy 0 < Phi < pi/2, got {self.phi!r}")
        object.__setattr__(self, "phi", phi)

    def angles(self, n_angles: int) -> np.ndarray:
        """Midpoint grid on the open interval (-Phi, Phi), exactly odd about 0."""
        n = int(n_angles)
        return self.phi * ((2.0 * np.arange(n) + 1.0 - n) / n)

    def contains(self, theta) -> np.ndarray:
        """True where the unit vector(s) theta lie in the open wedge."""
        theta = np.asarray(theta, dtype=float)
        return np.abs(theta[..., 0]) > np.cos(self.phi)


@dataclass(frozen=True)
class Sinogram:
    """Samples of Rf(theta(phi_i), s_j).

    angles are either a midpoint grid inside (-Phi, Phi) (limited data) or
    i*pi/N over [0, pi) (full data); offsets always span [-sqrt2, sqrt2].
    """

    angles: np.ndarray
    offsets: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=np.float64)
        offsets = np.asarray(self.offsets, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if angles.ndim != 1 or offsets.ndim != 1 or values.shape != (angles.size, offsets.size):
            raise ValueError("sinogram values must have shape (n_angles, n_offsets)")
        if angles.size < 2 or offsets.size < 2:
            raise ValueError("sinogram needs at least two angles and two offsets")
        if not np.all(np.isfinite(values)):
            raise ValueError("sinogram values must be finite")
        if not np.all(np.diff(angles) > 0) or not np.all(np.diff(offsets) > 0):
            raise ValueError("angles and offsets must be strictly ascending")
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "values", values)

    @property
    def dphi(self) -> float:
        return float((self.angles[-1] - self.angles[0]) / (self.angles.size - 1))

    @property
    def ds(self) -> float:
        return float((self.offsets[-1] - self.offsets[0]) / (self.offsets.size - 1))

    @property
    def is_full(self) -> bool:
        """Full data: angles i*pi/N starting at 0."""
        n = self.angles.size
        return abs(self.angles[0]) < 1e-12 and abs(n * self.dphi - np.pi) < 1e-9

    @property
    def wedge(self) -> AngularRange | None:
        """The AngularRange whose midpoint grid this is, or None for full data."""
        if self.is_full:
            return None
        phi = -self.angles[0] + 0.5 * self.dphi
        return AngularRange(phi)


def full_angles(n_angles: int) -> np.ndarray:
    return np.arange(n_angles) * (np.pi / n_angles)


def offset_grid(n_offsets: int) -> np.ndarray:
    return np.linspace(-OFFSET_HALF_SPAN, OFFSET_HALF_SPAN, n_offsets)


def _ellipse_chord(e: Ellipse, theta: np.ndarray, s: np.ndarray) -> np.ndarray:
    # affine reduction: the line x.theta = s meets {c + A z} in a chord whose
    # length is 2 a b sqrt(R^2 - d^2) / R^2, R = |A^T theta|, d = s - c.theta
    a, b = e.semi_axes
    R = e.support_radius(theta)
    d = s - (theta[..., 0] * e.center[0] + theta[..., 1] * e.center[1])
    h = np.clip(R * R - d * d, 0.0, None)
    return e.density * 2.0 * a * b * np.sqrt(h) / (R * R)


def radon_ellipse(e: Ellipse, theta, s) -> float | np.ndarray:
    """Density times the chord length of the line {x.theta = s} in the ellipse.

    theta may have shape (..., 2) broadcastable against s.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(np.abs(np.hypot(theta[..., 0], theta[..., 1]) - 1.0) > 1e-12):
        raise ValueError("theta must be a unit vector")
    out = _ellipse_chord(e, theta, np.asarray(s, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def radon_phantom(phantom: Phantom, angular_range: AngularRange | None,
                  n_angles: int, n_offsets: int) -> Sinogram:
    """Analytic sinogram; angular_range=None means full data over [0, pi)."""
    if n_angles < 2:
        raise ValueError("n_angles must be at least 2")
    if n_offsets < 16:
        raise ValueError("n_offsets must be at least 16")
    if angular_range is None:
        angles = full_angles(n_angles)
    else:
        angles = angular_range.angles(n_angles)
    offsets = offset_grid(n_offsets)
    theta = np.stack([np.cos(angles), np.sin(angles)], axis=-1)[:, None, :]
    values = np.zeros((n_angles, n_offsets))
    for e in phantom.ellipses:
        values += _ellipse_chord(e, theta, offsets[None, :])
    return Sinogram(angles, offsets, values)


def bilinear(img: ImageGrid, x, y) -> np.ndarray:
    """Bilinear interpolation of the grid at (x, y); zero outside the grid."""
    h = img.spacing
    fx = (np.asarray(x, dtype=float) + img.extent) / h
    fy = (np.asarray(y, dtype=float) + img.extent) / h
    n = img.n
    inside = (fx >= 0) & (fx <= n - 1) & (fy >= 0) & (fy <= n - 1)
    fx = np.where(inside, fx, 0.0)
    fy = np.where(inside, fy, 0.0)
    j0 = np.minimum(np.floor(fx).astype(np.int64), n - 2)
    i0 = np.minimum(np.floor(fy).astype(np.int64), n - 2)
    wx = fx - j0
    wy = fy - i0
    v = img.values
    out = ((1 - wy) * ((1 - wx) * v[i0, j0] + wx * v[i0, j0 + 1])
           + wy * ((1 - wx) * v[i0 + 1, j0] + wx * v[i0 + 1, j0 + 1]))
    return np.where(inside, out, 0.0)


def radon_numeric(img: ImageGrid, theta, s: float, step: float | None = None) -> float:
    """Midpoint-rule line integral of the bilinear image along {s theta + t theta_perp}.

    t runs over the grid diagonal [-sqrt2 extent, sqrt2 extent]; step defaults
    to half the pixel spacing and may not exceed it.
    """
    theta = np.asarray(theta, dtype=float)
    if abs(np.hypot(*theta) - 1.0) > 1e-12:
        raise ValueError("theta must be a unit vector")
    if step is None:
        step = 0.5 * img.spacing
    if not (0 < step <= img.spacing * (1 + 1e-12)):
        raise ValueError("step must be positive and no larger than the pixel spacing")
    half = np.sqrt(2.0) * img.extent
    n = int(np.ceil(2 * half / step))
    t = -half + (np.arange(n) + 0.5) * (2 * half / n)
    x = s * theta[0] - t * theta[1]
    y = s * theta[1] + t * theta[0]
    return float(np.sum(bilinear(img, x, y)) * (2 * half / n))
