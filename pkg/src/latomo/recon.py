"""Filters, angular apodization and limited-angle backprojection.

T_m = (B or L)_Phi K R: each sinogram row is weighted by kappa, filtered by
|tau| (m=0) or tau^2 (m=1), optionally low-passed, and backprojected over the
wedge with weight 2*dphi/(4 pi) per row.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numba
import numpy as np

from .phantom import ImageGrid, grid_coords
from .sinogram import AngularRange, Sinogram


@dataclass(frozen=True)
class Apodization:
    """cospow family kappa(u) = ((cos^2 u - cos^2 Phi) / sin^2 Phi)^k.

    u is the unsigned angle between a direction and the wedge axis; kappa is
    defined as 0 beyond the wedge.
    """

    phi: float
    k: int = 0
    family: str = "cospow"

    def __post_init__(self):
        AngularRange(self.phi)  # validates 0 < Phi < pi/2
        if int(self.k) != self.k or self.k < 0:
            raise ValueError(f"k must be a non-negative integer, got {self.k!r}")
        if self.family != "cospow":
            raise ValueError("only the 'cospow' apodization family is implemented")
        object.__setattr__(self, "phi", float(self.phi))
        object.__setattr__(self, "k", int(self.k))

    @property
    def range(self) -> AngularRange:
        return AngularRange(self.phi)


@dataclass(frozen=True)
class ReconSpec:
    """Everything that fixes the operator T_m.

    Args:
        m: 0 for the |tau| filter (B), 1 for the tau^2 filter (L).
        apod: wedge half-angle and apodization order.
        cutoff: low-pass frequency Omega in cycles per unit; 0 disables it.
        rolloff: fraction of Omega covered by the raised-cosine taper.
    """

    m: int
    apod: Apodization
    cutoff: float = 0.0
    rolloff: float = 0.25

    def __post_init__(self):
        if self.m not in (0, 1):
            raise ValueError(f"m must be 0 or 1, got {self.m!r}")
        if not (np.isfinite(self.cutoff) and self.cutoff >= 0):
            raise ValueError("cutoff must be finite and non-negative")
        if not (0.0 <= self.rolloff <= 0.5):
            raise ValueError("rolloff must lie in [0, 0.5]")

    @classmethod
    def make(cls, m: int, phi: float, k: int = 0, cutoff: float = 0.0, rolloff: float = 0.25):
        return cls(m, Apodization(phi, k), cutoff, rolloff)


def kappa_eval(apod: Apodization, angle_to_axis) -> float | np.ndarray:
    """kappa at unsigned angular distance u from the wedge axis; 0 for u > Phi."""
    u = np.abs(np.asarray(angle_to_axis, dtype=float))
    c2 = np.cos(apod.phi) ** 2
    base = (np.cos(u) ** 2 - c2) / np.sin(apod.phi) ** 2
    out = np.where(u <= apod.phi, np.maximum(base, 0.0) ** apod.k, 0.0)
    if apod.k > 0:
        out = np.where(u == apod.phi, 0.0, out)
    return float(out) if out.ndim == 0 else out


def kappa_of_direction(apod: Apodization, xi) -> np.ndarray:
    """kappa(xi/|xi|) for vectors xi of shape (..., 2), 0 outside the closed wedge.

    Evaluated algebraically from xi_1^2/|xi|^2 so that xi_2 -> -xi_2 and
    xi -> -xi leave the result bit-identical.
    """
    xi = np.asarray(xi, dtype=float)
    x1, x2 = xi[..., 0], xi[..., 1]
    r2 = x1 * x1 + x2 * x2
    c2 = np.cos(apod.phi) ** 2
    base = (x1 * x1 / r2 - c2) / np.sin(apod.phi) ** 2
    return np.where(base >= 0, np.maximum(base, 0.0) ** apod.k, 0.0)


def kappa_edge_derivative(apod: Apodization) -> float:
    """k-th one-sided derivative of kappa(phi) at phi = Phi.

    Near the edge kappa ~ (2 cot Phi)^k (Phi - phi)^k, so the derivative is
    (-1)^k k! (2 cot Phi)^k.  At phi = -Phi the sign factor disappears.
    """
    k = apod.k
    return float((-1) ** k * factorial(k) * (2.0 / np.tan(apod.phi)) ** k)


def _check_row(row, ds):
    row = np.asarray(row, dtype=float)
    if row.shape[-1] < 16:
        raise ValueError("rows need at least 16 samples")
    if not np.all(np.isfinite(row)):
        raise ValueError("rows must be finite")
    if not (np.isfinite(ds) and ds > 0):
        raise ValueError("ds must be positive")
    return row


# Padding factor over the next power of two.  The |tau| multiplier with a
# zero DC bin forces each periodized row to have zero mean, which leaks a
# constant bias of order (row length / padded length)^2 into the image; a
# factor 8 keeps it below 1e-3 of the density.
PAD_FACTOR = 8


def padded_length(n: int) -> int:
    """PAD_FACTOR times the next power of two at or above n."""
    return PAD_FACTOR * (1 << int(np.ceil(np.log2(n))))


def rolloff_window(f, cutoff: float, rolloff: float) -> np.ndarray:
    """Raised-cosine low-pass in |f| (cycles per unit); all ones when cutoff = 0."""
    f = np.abs(np.asarray(f, dtype=float))
    if cutoff <= 0:
        return np.ones_like(f)
    r0 = cutoff * (1.0 - rolloff)
    out = np.where(f <= r0, 1.0, 0.0)
    if rolloff > 0:
        band = (f > r0) & (f < cutoff)
        out = np.where(band, 0.5 * (1.0 + np.cos(np.pi * (f - r0) / (cutoff - r0))), out)
    return out


def filter_rows(rows, ds: float, power: int, cutoff: float = 0.0, rolloff: float = 0.25,
                upsample: int = 1) -> np.ndarray:
    """Apply the multiplier |tau|^power (tau in rad/unit) and the low-pass to each row.

    Rows are padded with their end values to PAD_FACTOR times the next power
    of two; sinogram rows vanish at both ends, so there this is zero padding.
    With upsample > 1 the band-limited result is also returned on a grid
    upsample times finer (spacing ds/upsample, same first sample), which keeps
    later linear interpolation from eating the high frequencies.
    """
    rows = _check_row(rows, ds)
    upsample = int(upsample)
    if upsample < 1:
        raise ValueError("upsample must be at least 1")
    n = rows.shape[-1]
    P = padded_length(n)
    f = np.fft.rfftfreq(P, ds)
    mult = np.abs(2 * np.pi * f) ** power * rolloff_window(f, cutoff, rolloff)
    if power > 0:
        mult[0] = 0.0
    if upsample > 1:
        # split the old Nyquist bin evenly so the finer grid sees a real cosine
        mult[-1] *= 0.5
    n_out = n if upsample == 1 else (n - 1) * upsample + 1
    flat = rows.reshape(-1, n)
    out = np.empty((flat.shape[0], n_out))
    chunk = max(1, (1 << 22) // (P * upsample))
    mid = n + (P - n) // 2
    for i in range(0, flat.shape[0], chunk):
        block = flat[i:i + chunk]
        # extend each row by its end values, meeting halfway round the
        # periodic wrap, so a constant row stays constant and maps to 0
        buf = np.empty((block.shape[0], P))
        buf[:, :n] = block
        buf[:, n:mid] = block[:, -1:]
        buf[:, mid:] = block[:, :1]
        spec = np.fft.rfft(buf, axis=-1) * mult
        out[i:i + chunk] = np.fft.irfft(spec, P * upsample, axis=-1)[:, :n_out] * upsample
    return out.reshape(rows.shape[:-1] + (n_out,))


def filter_lambda(row, ds: float) -> np.ndarray:
    """Lambda_s: multiply the spectrum by |tau|."""
    return filter_rows(row, ds, 1)


def filter_d2(row, ds: float) -> np.ndarray:
    """-d^2/ds^2 realized as multiplication of the spectrum by tau^2."""
    return filter_rows(row, ds, 2)


def lowpass(row, ds: float, cutoff: float, rolloff: float = 0.25) -> np.ndarray:
    return filter_rows(row, ds, 0, cutoff, rolloff)


def row_weights(sino: Sinogram, spec: ReconSpec) -> np.ndarray:
    """Per-row factor kappa(phi_i) * 2 dphi / (4 pi), after checking the angle grid."""
    n = sino.angles.size
    if sino.is_full:
        if spec.apod.k != 0:
            raise ValueError("full-circle data is reconstructed with kappa = 1 only (k = 0)")
        kap = np.ones(n)
    else:
        phi = spec.apod.phi
        expect = AngularRange(phi).angles(n)
        if not np.allclose(sino.angles, expect, rtol=0, atol=1e-9):
            raise ValueError(
                f"sinogram angles do not form the midpoint grid of the wedge Phi={phi}")
        kap = kappa_eval(spec.apod, np.abs(sino.angles))
    return kap * (2.0 * sino.dphi / (4.0 * np.pi))


@numba.njit(cache=True, inline="always")
def _row_term(rows, s0, ds, c, s, w, i, x, y):
    n_s = rows.shape[1]
    f = (x * c + y * s - s0) / ds
    if f < 0.0 or f > n_s - 1:
        return 0.0
    j = min(int(f), n_s - 2)
    t = f - j
    return w * ((1.0 - t) * rows[i, j] + t * rows[i, j + 1])


@numba.njit(parallel=True, cache=True)
def _backproject(rows, s0, ds, cosv, sinv, weights, xs, ys):
    n_ang = rows.shape[0]
    half = n_ang // 2
    out = np.empty(xs.size)
    for p in numba.prange(xs.size):
        x = xs[p]
        y = ys[p]
        acc = 0.0
        # rows i and n-1-i enter as one pair, so pixels mirrored across the
        # wedge axis repeat the same operations and come out bit-identical
        for i in range(half):
            r = n_ang - 1 - i
            acc += (_row_term(rows, s0, ds, cosv[i], sinv[i], weights[i], i, x, y)
                    + _row_term(rows, s0, ds, cosv[r], sinv[r], weights[r], r, x, y))
        if n_ang % 2:
            acc += _row_term(rows, s0, ds, cosv[half], sinv[half], weights[half], half, x, y)
        out[p] = acc
    return out


@dataclass(frozen=True)
class FilteredSinogram:
    """Filtered, low-passed rows on an (optionally) refined offset grid.

    kappa is a per-row scalar and the filter is linear, so the same filtered
    rows serve every apodization order k; the weights are applied during
    backprojection.
    """

    sino: Sinogram
    m: int
    cutoff: float
    rolloff: float
    upsample: int
    rows: np.ndarray

    @property
    def ds(self) -> float:
        return self.sino.ds / self.upsample


def filter_sinogram(sino: Sinogram, spec: ReconSpec, upsample: int = 4) -> FilteredSinogram:
    power = 1 if spec.m == 0 else 2
    rows = filter_rows(sino.values, sino.ds, power, spec.cutoff, spec.rolloff, upsample)
    return FilteredSinogram(sino, spec.m, float(spec.cutoff), float(spec.rolloff), int(upsample),
                            np.ascontiguousarray(rows))


def reconstruct_points(sino: Sinogram | FilteredSinogram, spec: ReconSpec, points,
                       upsample: int = 4) -> np.ndarray:
    """Evaluate the pipeline reconstruction at arbitrary points of shape (..., 2).

    sino may be a FilteredSinogram built for the same m, cutoff and rolloff,
    in which case upsample is taken from it.  Lines outside the stored offset
    range carry no data and contribute 0.
    """
    if isinstance(sino, FilteredSinogram):
        filt = sino
        if (filt.m, filt.cutoff, filt.rolloff) != (spec.m, float(spec.cutoff), float(spec.rolloff)):
            raise ValueError("filtered sinogram was built for a different m, cutoff or rolloff")
    else:
        filt = filter_sinogram(sino, spec, upsample)
    raw = filt.sino
    w = row_weights(raw, spec)
    pts = np.asarray(points, dtype=float)
    flat = pts.reshape(-1, 2)
    out = _backproject(filt.rows, raw.offsets[0], filt.ds, np.cos(raw.angles), np.sin(raw.angles), w,
                       np.ascontiguousarray(flat[:, 0]), np.ascontiguousarray(flat[:, 1]))
    return out.reshape(pts.shape[:-1])


def reconstruct(sino: Sinogram | FilteredSinogram, spec: ReconSpec, n: int, extent: float = 1.0,
                upsample: int = 4) -> ImageGrid:
    """Reconstruct T_m f on an n x n grid over [-extent, extent]^2."""
    if n < 2:
        raise ValueError("n must be at least 2")
    c = grid_coords(n, extent)
    X, Y = np.meshgrid(c, c)
    vals = reconstruct_points(sino, spec, np.stack([X, Y], axis=-1), upsample)
    return ImageGrid(vals, extent)
