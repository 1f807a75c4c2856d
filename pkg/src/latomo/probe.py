"""Partial symbol of T_m near the wedge edges, by direct quadrature.

Near the edge direction e_j the multiplier |xi|^m kappa chi_Phi, restricted
by a smooth angular cutoff around the edge ray, is integrated across the
edge:

    A(t, tau) = int_0^inf m_loc(omega e_j + eta n_j) e^{-i t eta} d eta,

with omega = 2 pi tau (tau in cycles per unit) and n_j the unit normal to
e_j pointing into the wedge (n_1 = -e_1_perp, n_2 = +e_2_perp).  Because
kappa vanishes to order k on the edge, integrating by parts gives the
leading term

    P(t, tau) = psi^(k)(0) / (i t)^(k+1) * omega^(m-k),
    psi^(k)(0) = k! (2 cot Phi)^k,

where psi(eta/omega) is kappa as a function of the slope eta/omega.  With
this orientation the k = 0, kappa = 1 integral is exactly
(1 - exp(-i t L)) / (i t), L = omega tan(2 Phi).
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate

from .recon import ReconSpec, kappa_edge_derivative, kappa_of_direction


class QuadratureError(RuntimeError):
    """An oscillatory integral did not reach the requested tolerance."""


QUAD_RTOL = 1e-9

# concentration c of the bump density exp(-c / (4x(1-x))) whose integral forms
# the localizer's transition; larger c gives a gentler, more Gaussian ramp
LOCALIZER_CONCENTRATION = 4.0


@dataclass(frozen=True)
class EdgeFrame:
    """Edge direction e_j of the wedge and its rotation e_perp by +pi/2."""

    j: int
    phi: float

    def __post_init__(self):
        if self.j not in (1, 2):
            raise ValueError("j must be 1 or 2")
        if not (0 < self.phi < np.pi / 2):
            raise ValueError("Phi must satisfy 0 < Phi < pi/2")

    @property
    def e(self) -> np.ndarray:
        sign = 1.0 if self.j == 1 else -1.0
        return np.array([np.cos(self.phi), sign * np.sin(self.phi)])

    @property
    def e_perp(self) -> np.ndarray:
        e = self.e
        return np.array([-e[1], e[0]])

    @property
    def inward(self) -> np.ndarray:
        """Unit normal to e pointing into the wedge."""
        return -self.e_perp if self.j == 1 else self.e_perp


_GL_X, _GL_W = leggauss(64)


def _bump_density(x):
    z = 4.0 * x * (1.0 - x)
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(z > 0, np.exp(-LOCALIZER_CONCENTRATION / np.where(z > 0, z, 1.0)), 0.0)


_BUMP_TOTAL = 0.5 * float(_bump_density(0.5 * (_GL_X + 1.0)) @ _GL_W)


def smooth_step(x) -> np.ndarray:
    """C-infinity step rising from 0 at x <= 0 to 1 at x >= 1.

    The normalized integral of the bump exp(-c / (4x(1-x))), every derivative
    of which vanishes at both ends.  A step of finite smoothness would leave
    boundary terms in the symbol of the same order as the k >= 2 leading term.
    """
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    nodes = 0.5 * x[..., None] * (_GL_X + 1.0)
    return 0.5 * x * (_bump_density(nodes) @ _GL_W) / _BUMP_TOTAL


def localizer(alpha, width: float) -> np.ndarray:
    """Angular cutoff: 1 within width/2 of the edge ray, 0 beyond width."""
    half = 0.5 * width
    return 1.0 - smooth_step((np.asarray(alpha, dtype=float) - half) / half)


def multiplier(xi, spec: ReconSpec) -> float | np.ndarray:
    """|xi|^m kappa(xi/|xi|) chi_Phi(xi), chi the indicator of the closed wedge."""
    xi = np.asarray(xi, dtype=float)
    r = np.hypot(xi[..., 0], xi[..., 1])
    if np.any(r == 0):
        raise ValueError("the multiplier is undefined at xi = 0")
    out = r ** spec.m * kappa_of_direction(spec.apod, xi)
    return float(out) if out.ndim == 0 else out


def _check_probe_args(t, tau):
    if not np.isfinite(t) or t == 0:
        raise ValueError("t must be finite and nonzero")
    if not (np.isfinite(tau) and tau > 0):
        raise ValueError("tau must be positive")


def partial_symbol(frame: EdgeFrame, t: float, tau: float, spec: ReconSpec,
                   localizer_width: float | None = None, localize: bool = True) -> complex:
    """A(t, tau) by adaptive oscillatory quadrature (QUADPACK QAWO).

    Args:
        frame: which wedge edge to probe; its Phi must match spec.
        t: signed offset across the streak line, nonzero.
        tau: frequency along e_j in cycles per unit.
        localizer_width: angular width of the cutoff around the edge ray,
            default Phi; must be below both 2 Phi and pi/2.
        localize: False integrates the whole wedge without a cutoff (needs
            2 Phi < pi/2); the far edge then adds its own oscillating term.
    """
    _check_probe_args(t, tau)
    phi = spec.apod.phi
    if abs(frame.phi - phi) > 1e-12:
        raise ValueError("frame and spec use different wedge angles")
    omega = 2 * np.pi * tau
    e, n_in = frame.e, frame.inward
    if localize:
        w = phi if localizer_width is None else float(localizer_width)
        if not (0 < w < 2 * phi and w < np.pi / 2):
            raise ValueError("localizer_width must lie in (0, min(2 Phi, pi/2))")
        pieces = [0.0, omega * np.tan(0.5 * w), omega * np.tan(w)]
    else:
        w = None
        if not 2 * phi < np.pi / 2:
            raise ValueError("an unlocalized probe needs 2 Phi < pi/2")
        pieces = [0.0, omega * np.tan(2 * phi)]

    def g(eta):
        xi = omega * e + eta * n_in
        val = np.hypot(xi[0], xi[1]) ** spec.m * kappa_of_direction(spec.apod, xi)
        if w is not None:
            val = val * localizer(np.arctan2(eta, omega), w)
        return float(val)

    scale = abs(predicted_symbol(frame, 1.0, tau, spec)) * max(1.0, abs(t)) ** -(spec.apod.k + 1)
    re = im = 0.0
    for a, b in zip(pieces[:-1], pieces[1:]):
        for kind in ("cos", "sin"):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                val, err, info = integrate.quad(g, a, b, weight=kind, wvar=t, limit=2000,
                                                epsabs=QUAD_RTOL * 1e-3 * scale,
                                                epsrel=QUAD_RTOL, full_output=1)[:3]
            ier = info.get("ier", 0) if isinstance(info, dict) else 0
            if ier not in (0,) or not np.isfinite(val):
                raise QuadratureError(
                    f"quadrature for A(t={t}, tau={tau}) failed (ier={ier}, err={err:.2e})")
            if kind == "cos":
                re += val
            else:
                im -= val
    return complex(re, im)


def edge_psi(spec: ReconSpec) -> float:
    """psi^(k)(0) = |k-th edge derivative of kappa| = k! (2 cot Phi)^k."""
    return abs(kappa_edge_derivative(spec.apod))


def predicted_symbol(frame: EdgeFrame, t: float, tau: float, spec: ReconSpec) -> complex:
    """Leading term P = psi^(k)(0) / (i t)^(k+1) * omega^(m-k), omega = 2 pi tau."""
    _check_probe_args(t, tau)
    k, m = spec.apod.k, spec.m
    omega = 2 * np.pi * tau
    return complex(edge_psi(spec) / (1j * t) ** (k + 1) * omega ** (m - k))


def principal_symbol_sigma0(frame: EdgeFrame, t: float, tau: float, spec: ReconSpec) -> complex:
    """The principal symbol in its FIO normalization,

        sigma0 = ((-1)^j / sqrt(2 pi)) kappa^(k)((-1)^(j+1) Phi) / (i sgn(tau) t)^(k+1) |tau|^(m-k),

    with the frequency measured as omega = 2 pi tau.  It relates to the
    integral form by P = sigma0_bridge(frame, k) * sigma0.
    """
    _check_probe_args(t, tau)
    k, m, j = spec.apod.k, spec.m, frame.j
    # kappa^(k)(Phi) carries (-1)^k, kappa^(k)(-Phi) does not
    deriv = kappa_edge_derivative(spec.apod) if j == 1 else edge_psi(spec)
    omega = 2 * np.pi * tau
    return complex((-1) ** j / np.sqrt(2 * np.pi) * deriv / (1j * t) ** (k + 1) * omega ** (m - k))


def sigma0_bridge(frame: EdgeFrame, k: int) -> float:
    """Constant c with P = c * sigma0: sqrt(2 pi) times the orientation sign."""
    sign = (-1) ** (k + 1) if frame.j == 1 else 1
    return sign * np.sqrt(2 * np.pi)


@dataclass
class SymbolProbe:
    frame: EdgeFrame
    t: float
    tau_grid: np.ndarray
    computed: np.ndarray
    predicted: np.ndarray
    slope: float = field(default=np.nan)

    @property
    def ratio_error(self) -> np.ndarray:
        return np.abs(self.computed / self.predicted - 1.0)

    @property
    def ratio_stats(self) -> dict:
        err = self.ratio_error
        return {"mean": float(err.mean()), "max": float(err.max())}


def symbol_ratio_scan(frame: EdgeFrame, t_list, tau_window, spec: ReconSpec, n_tau: int = 9,
                      localizer_width: float | None = None) -> list[SymbolProbe]:
    """Compute A and P on a log-spaced tau grid for each t and fit the tau-slope of |A|.

    The window must span at least a factor 4 in tau (two octaves) so the
    log-log slope is meaningful.
    """
    lo, hi = (float(v) for v in tau_window)
    if not (0 < lo and hi >= 4 * lo):
        raise ValueError("tau_window must be positive and span at least a factor 4")
    if n_tau < 3:
        raise ValueError("n_tau must be at least 3")
    taus = np.geomspace(lo, hi, n_tau)
    out = []
    for t in t_list:
        A = np.array([partial_symbol(frame, t, tau, spec, localizer_width) for tau in taus])
        P = np.array([predicted_symbol(frame, t, tau, spec) for tau in taus])
        slope = np.polyfit(np.log(taus), np.log(np.abs(A)), 1)[0]
        out.append(SymbolProbe(frame, float(t), taus, A, P, float(slope)))
    return out


def off_diagonal_spread(frame: EdgeFrame, spec: ReconSpec, tau: float, t_list=(0.25, 0.5, 1.0),
                        localizer_width: float | None = None):
    """|A(t, tau)| |t|^(k+1) over t_list and its relative spread (max - min) / min."""
    k = spec.apod.k
    vals = np.array([abs(partial_symbol(frame, t, tau, spec, localizer_width)) * abs(t) ** (k + 1)
                     for t in t_list])
    return vals, float((vals.max() - vals.min()) / vals.min())


def write_probe_csv(probes, path) -> None:
    """One row per (probe, tau): j,t,tau,re_A,im_A,re_P,im_P,abs_ratio (abs_ratio = |A/P|)."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["j", "t", "tau", "re_A", "im_A", "re_P", "im_P", "abs_ratio"])
        for p in probes:
            for tau, a, pr in zip(p.tau_grid, p.computed, p.predicted):
                vals = (p.t, tau, a.real, a.imag, pr.real, pr.imag, abs(a / pr))
                wr.writerow([p.frame.j] + [repr(float(v)) for v in vals])
