"""Streak geometry, profile extraction and Fourier-decay strength estimates."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .phantom import SCENE_HALF_WIDTH, Ellipse, ImageGrid, Phantom
from .recon import ReconSpec
from .sinogram import AngularRange, bilinear
from .spectral import line_points, spectral_points

EDGE_TOL = 1e-9


def edge_directions(phi: float) -> tuple[np.ndarray, np.ndarray]:
    return (np.array([np.cos(phi), np.sin(phi)]), np.array([np.cos(phi), -np.sin(phi)]))


def perp(v) -> np.ndarray:
    """v rotated by +pi/2."""
    return np.array([-v[1], v[0]])


def boundary_point_with_normal(e: Ellipse, normal) -> np.ndarray:
    """The boundary point of e whose outward unit normal is `normal`.

    With the ellipse written as {c + A z : |z| <= 1}, the normal at c + A z
    is parallel to A^{-T} z, so z = A^T n / |A^T n|.
    """
    A = e.shape_matrix
    z = A.T @ np.asarray(normal, dtype=float)
    return np.asarray(e.center) + A @ (z / np.hypot(*z))


def outward_normal(e: Ellipse, angle) -> tuple[np.ndarray, np.ndarray]:
    """Boundary points c + A (cos t, sin t) and their outward unit normals."""
    angle = np.asarray(angle, dtype=float)
    z = np.stack([np.cos(angle), np.sin(angle)], axis=-1)
    A = e.shape_matrix
    pts = np.asarray(e.center) + z @ A.T
    nrm = z @ np.linalg.inv(A)  # rows of A^{-T} z
    nrm /= np.hypot(nrm[..., 0], nrm[..., 1])[..., None]
    return pts, nrm


@dataclass(frozen=True)
class StreakPrediction:
    """Predicted streak: the line y* + t e_j_perp through a generator y*.

    direction holds the outward normal at y*, which is +e_j or -e_j.
    """

    j: int
    generator: tuple[float, float]
    direction: tuple[float, float]
    line_direction: tuple[float, float]
    source_ellipse: int

    def distance_to_line(self, x) -> float:
        """Unsigned distance of x from the streak line."""
        d = np.asarray(x, dtype=float) - np.asarray(self.generator)
        e = np.asarray(self.direction)
        return float(abs(d @ e))


def predict_streaks(phantom: Phantom, angular_range: AngularRange) -> list[StreakPrediction]:
    """Two generators per ellipse and edge direction, where the normal is +-e_j."""
    out = []
    for idx, ell in enumerate(phantom.ellipses):
        for j, e in enumerate(edge_directions(angular_range.phi), start=1):
            for sign in (1.0, -1.0):
                n = sign * e
                y = boundary_point_with_normal(ell, n)
                out.append(StreakPrediction(j, tuple(y), tuple(n), tuple(perp(e)), idx))
    return out


@dataclass(frozen=True)
class SingularityClass:
    point: tuple[float, float]
    normal: tuple[float, float]
    label: str  # "visible" | "invisible" | "edge-of-wedge"


def classify_normal(normal, angular_range: AngularRange, tol: float = EDGE_TOL) -> str:
    """Label a conormal direction by its unsigned angle u from the wedge axis."""
    n = np.asarray(normal, dtype=float)
    u = np.arctan2(abs(n[1]), abs(n[0]))
    if abs(u - angular_range.phi) <= tol:
        return "edge-of-wedge"
    return "visible" if u < angular_range.phi else "invisible"


def classify_singularities(phantom: Phantom, angular_range: AngularRange,
                           n_boundary_samples: int) -> list[SingularityClass]:
    """Sample each boundary at uniform parameter angles and label every point.

    The samples sit at cell midpoints, 2 pi (i + 1/2) / n, so a disk sampled
    with n divisible by 8 never lands exactly on the edge normals at 45 deg.
    """
    if n_boundary_samples < 16:
        raise ValueError("n_boundary_samples must be at least 16")
    angle = 2 * np.pi * (np.arange(n_boundary_samples) + 0.5) / n_boundary_samples
    out = []
    for ell in phantom.ellipses:
        pts, nrm = outward_normal(ell, angle)
        for p, n in zip(pts, nrm):
            out.append(SingularityClass(tuple(p), tuple(n), classify_normal(n, angular_range)))
    return out


def extract_profile(values, anchor, direction, halflen: float, n_samples: int,
                    extent: float = 1.0) -> np.ndarray:
    """Bilinear samples of an image along anchor + u*direction, |u| <= halflen.

    values may be an ImageGrid or a square array over [-extent, extent]^2.
    """
    n_samples = int(n_samples)
    if n_samples < 256 or n_samples & (n_samples - 1):
        raise ValueError("n_samples must be a power of two, at least 256")
    img = values if isinstance(values, ImageGrid) else ImageGrid(np.asarray(values), extent)
    d = np.asarray(direction, dtype=float)
    if abs(np.hypot(*d) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    pts, _ = line_points(anchor, d, halflen, n_samples)
    lim = img.extent * (1 + 1e-12)
    if np.any(np.abs(pts) > lim):
        raise ValueError("profile leaves the image grid")
    return bilinear(img, pts[:, 0], pts[:, 1])


@dataclass(frozen=True)
class DecayFit:
    """Power-law fit |g_hat(tau)| ~ exp(intercept) tau^slope over window (cycles/unit)."""

    slope: float
    intercept: float
    window: tuple[float, float]
    rms_residual: float
    n_points: int
    power_law: bool
    centers: np.ndarray = field(repr=False, compare=False, default=None)
    magnitudes: np.ndarray = field(repr=False, compare=False, default=None)


# rms residual (natural log units) above which a fit is not called a power law
POWER_LAW_RESIDUAL = 0.1


def windowed_spectrum(profile, ds: float, pad: int = 8):
    """|DFT| of the profile under a centred Gaussian taper (sigma = length/10), scaled by ds."""
    g = np.asarray(profile, dtype=float)
    n = g.size
    x = (np.arange(n) - (n - 1) / 2) * ds
    sigma = n * ds / 10
    taper = np.exp(-0.5 * (x / sigma) ** 2)
    G = np.abs(np.fft.rfft(g * taper, pad * n)) * ds
    return np.fft.rfftfreq(pad * n, ds), G


def decay_slope(profile, ds: float, window, band_limit: float | None = None,
                bands_per_octave: int = 4, residual_threshold: float = POWER_LAW_RESIDUAL) -> DecayFit:
    """Log-log slope of the tapered profile spectrum over a frequency window.

    The magnitude is averaged over fractional-octave bands first, so the
    oscillation exp(i tau d) of an off-centre singularity does not bias the
    fit.  window is (lo, hi) in cycles per unit; lo must sit at least four
    DFT bins above DC and hi at most half the band limit (default Nyquist).
    """
    g = np.asarray(profile, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("profile must be finite")
    lo, hi = (float(v) for v in window)
    n = g.size
    nyquist = 0.5 / ds
    band = nyquist if band_limit is None else float(band_limit)
    if lo < 4.0 / (n * ds):
        raise ValueError(f"window start {lo} is within four DFT bins of DC")
    if hi > 0.5 * band + 1e-12 or hi > nyquist:
        raise ValueError(f"window end {hi} exceeds half the band limit {band}")
    f, G = windowed_spectrum(g, ds)
    n_bands = int(np.floor(np.log2(hi / lo) * bands_per_octave + 1e-9))
    edges = lo * 2.0 ** (np.arange(n_bands + 1) / bands_per_octave)
    centers, mags = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        sel = (f >= a) & (f < b)
        if sel.any():
            centers.append(np.sqrt(a * b))
            mags.append(G[sel].mean())
    if len(centers) < 8:
        raise ValueError(f"only {len(centers)} band-averaged points in window, need 8")
    lc = np.log(centers)
    lm = np.log(np.maximum(mags, 1e-300))
    slope, intercept = np.polyfit(lc, lm, 1)
    rms = float(np.sqrt(np.mean((lm - (slope * lc + intercept)) ** 2)))
    return DecayFit(float(slope), float(intercept), (lo, hi), rms, len(centers),
                    rms <= residual_threshold, np.array(centers), np.array(mags))


def detect_peak(profile, du: float):
    """Index of the sharpest feature: argmax of |g' - median(g')|.

    Differentiating first removes the smooth background ramp that a
    limited-angle reconstruction carries outside the object; a streak is a
    cusp or spike of the profile, so its derivative peaks on the line.
    Returns (index, strength); index is None if the profile is featureless.
    """
    g = np.asarray(profile, dtype=float)
    d = np.gradient(g, du)
    dev = np.abs(d - np.median(d))
    i = int(np.argmax(dev))
    noise = np.median(np.abs(d - np.median(d))) + 1e-300
    if dev[i] < 5.0 * noise or dev[i] == 0:
        return None, float(dev[i])
    return i, float(dev[i])


def jump_across(values, point, normal, inner: float, outer: float, n_samples: int = 256,
                extent: float = 1.0) -> float:
    """Jump of an image across a curve at `point` along unit `normal`.

    Straight lines are fitted to the profile on each side over
    inner <= |u| <= outer and extrapolated to u = 0; the jump is the
    difference of the two limits, so smooth gradients do not count.
    """
    halflen = outer
    g = extract_profile(values, point, normal, halflen, n_samples, extent)
    u = np.linspace(-halflen, halflen, n_samples)
    left = (u <= -inner)
    right = (u >= inner)
    pl = np.polyfit(u[left], g[left], 1)
    pr = np.polyfit(u[right], g[right], 1)
    return float(abs(np.polyval(pr, 0.0) - np.polyval(pl, 0.0)))


@dataclass(frozen=True)
class ProbeGeometry:
    """Where and how finely the report samples profiles.

    Args:
        t_factor: artifact probe offset along the streak, in units of the
            generating ellipse's major semi-axis.
        artifact_halflen: half-length of the transverse artifact profile.
        edge_halflen_factor: half-length of the visible-edge profile, in
            units of the minor semi-axis.
        n_samples: samples per slope profile (power of two).
        peak_halflen: half-length of the segment searched for the peak.
        peak_samples: samples of that segment.
        pixel: length used to express offsets in pixels.
        fit_window: (lo, hi) in units of the cutoff; default (1/16, 1/2).
    """

    t_factor: float = 1.5
    artifact_halflen: float = 0.5
    edge_halflen_factor: float = 0.7
    n_samples: int = 4096
    peak_halflen: float = 0.15
    peak_samples: int = 2048
    pixel: float = 2.0 / 1023
    fit_window: tuple[float, float] = (1.0 / 16, 0.5)


def fit_window(phantom: Phantom, geometry: ProbeGeometry, cutoff: float) -> tuple[float, float]:
    """Decay-fit window in cycles per unit: geometry.fit_window times the cutoff.

    The lower end is raised, when needed, to four DFT bins above DC of the
    shortest profile the report takes, so small cutoffs still give a valid fit.
    """
    shortest = min([geometry.artifact_halflen]
                   + [geometry.edge_halflen_factor * e.semi_axes[1] for e in phantom.ellipses])
    lo = max(geometry.fit_window[0] * cutoff, 4.0 / (2.0 * shortest) * (1 + 1e-9))
    hi = geometry.fit_window[1] * cutoff
    if lo >= hi:
        raise ValueError(f"cutoff {cutoff} is too low for a decay fit on these profiles")
    return lo, hi


def visible_boundary(phantom: Phantom, phi: float, n_samples: int = 720) -> np.ndarray:
    """Sampled boundary points whose normal lies in the open wedge."""
    cls = classify_singularities(phantom, AngularRange(phi), n_samples)
    pts = [c.point for c in cls if c.label == "visible"]
    return np.array(pts).reshape(-1, 2)


def probe_point(pred: StreakPrediction, phantom: Phantom, geometry: ProbeGeometry,
                phi: float) -> tuple[np.ndarray, float]:
    """Point x* on the streak line, |t| = t_factor * major semi-axis from y*.

    Of the two signs, the one whose x* lies farther from every visible
    boundary point is used: visible edges are the strongest singularities of
    the reconstruction, and the band-limit ringing they radiate would mask a
    weak (large k) artifact.  Ties go to the point deeper inside the scene.
    """
    ell = phantom.ellipses[pred.source_ellipse]
    dist = geometry.t_factor * ell.semi_axes[0]
    y = np.asarray(pred.generator)
    ep = np.asarray(pred.line_direction)
    vis = visible_boundary(phantom, phi)
    best = None
    for t in (dist, -dist):
        x = y + t * ep
        clear = float(np.min(np.hypot(*(vis - x).T))) if len(vis) else np.inf
        margin = SCENE_HALF_WIDTH - float(np.max(np.abs(x)))
        key = (round(clear, 9), margin)
        if best is None or key > best[2]:
            best = (x, t, key)
    return best[0], best[1]


@dataclass
class ReportRecord:
    j: int
    y_star: list
    x_star: list
    t: float
    source_ellipse: int
    line_offset_error_px: float | None
    artifact_slope: float
    edge_slope: float
    gap: float
    predicted_gap: float
    residuals: dict


@dataclass
class Report:
    m: int
    k: int
    phi: float
    cutoff: float
    records: list[ReportRecord]
    profiles: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"m": self.m, "k": self.k, "phi": self.phi, "cutoff": self.cutoff,
                "predictions": [asdict(r) for r in self.records]}

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    def write_csv(self, path) -> None:
        """Long-format CSV: prediction,kind,x,value with kind in
        {artifact_profile, edge_profile, artifact_spectrum, edge_spectrum}."""
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["prediction", "kind", "x", "value"])
            for idx, entry in enumerate(self.profiles):
                for kind, (xs, vs) in entry.items():
                    for x, v in zip(xs, vs):
                        wr.writerow([idx, kind, repr(float(x)), repr(float(v))])


def artifact_report(phantom: Phantom, spec: ReconSpec, predictions, geometry: ProbeGeometry | None = None,
                    image: ImageGrid | None = None) -> Report:
    """Measure every predicted streak.

    For each prediction: (a) the peak along a transverse segment through x*
    and its offset from the predicted line (on `image` when given, else on
    the spectral evaluation); (b) the decay slope of the transverse artifact
    profile at x*; (c) the decay slope across the ellipse's most visible
    edge (outward normal on the wedge axis); (d) the gap (b) - (c) against
    -k - 1/2.
    """
    if not spec.cutoff > 0:
        raise ValueError("artifact_report needs spec.cutoff > 0")
    predictions = list(predictions)
    if not predictions:
        raise ValueError("no predictions to measure")
    geo = geometry or ProbeGeometry()
    lo, hi = fit_window(phantom, geo, spec.cutoff)
    k = spec.apod.k
    records, profiles = [], []
    edge_cache = {}
    for pred in predictions:
        ell = phantom.ellipses[pred.source_ellipse]
        e_dir = np.asarray(edge_directions(spec.apod.phi)[pred.j - 1])
        x_star, t = probe_point(pred, phantom, geo, spec.apod.phi)

        # (a) peak location across the streak line
        if image is not None:
            seg = extract_profile(image, x_star, e_dir, geo.peak_halflen, geo.peak_samples)
        else:
            pts, _ = line_points(x_star, e_dir, geo.peak_halflen, geo.peak_samples)
            seg = spectral_points(phantom, spec, pts)
        du = 2 * geo.peak_halflen / (geo.peak_samples - 1)
        idx, _ = detect_peak(seg, du)
        if idx is None:
            offset_px = None
        else:
            peak = x_star + (-geo.peak_halflen + idx * du) * e_dir
            offset_px = pred.distance_to_line(peak) / geo.pixel

        # (b) artifact decay slope
        pts, ds = line_points(x_star, e_dir, geo.artifact_halflen, geo.n_samples)
        art = spectral_points(phantom, spec, pts)
        fit_a = decay_slope(art, ds, (lo, hi), band_limit=spec.cutoff)

        # (c) visible edge of the generating ellipse
        if pred.source_ellipse not in edge_cache:
            axis = np.array([1.0, 0.0])
            y_edge = boundary_point_with_normal(ell, axis)
            hl = geo.edge_halflen_factor * ell.semi_axes[1]
            pts_e, ds_e = line_points(y_edge, axis, hl, geo.n_samples)
            edge = spectral_points(phantom, spec, pts_e)
            edge_cache[pred.source_ellipse] = (edge, ds_e, hl,
                                               decay_slope(edge, ds_e, (lo, hi), band_limit=spec.cutoff))
        edge, ds_e, hl, fit_e = edge_cache[pred.source_ellipse]

        gap = fit_a.slope - fit_e.slope
        records.append(ReportRecord(
            j=pred.j, y_star=[float(v) for v in pred.generator], x_star=[float(v) for v in x_star],
            t=float(t), source_ellipse=pred.source_ellipse,
            line_offset_error_px=None if offset_px is None else float(offset_px),
            artifact_slope=fit_a.slope, edge_slope=fit_e.slope, gap=float(gap),
            predicted_gap=-k - 0.5,
            residuals={"artifact": fit_a.rms_residual, "edge": fit_e.rms_residual,
                       "artifact_power_law": fit_a.power_law, "edge_power_law": fit_e.power_law}))
        u_a = np.linspace(-geo.artifact_halflen, geo.artifact_halflen, geo.n_samples)
        u_e = np.linspace(-hl, hl, geo.n_samples)
        profiles.append({
            "artifact_profile": (u_a, art), "edge_profile": (u_e, edge),
            "artifact_spectrum": (fit_a.centers, fit_a.magnitudes),
            "edge_spectrum": (fit_e.centers, fit_e.magnitudes)})
    return Report(spec.m, k, spec.apod.phi, float(spec.cutoff), records, profiles)
