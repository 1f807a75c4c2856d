from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latomo.phantom import Ellipse, Phantom, grid_coords
from latomo.recon import (Apodization, ReconSpec, filter_d2, filter_lambda, filter_rows, filter_sinogram,
                          kappa_edge_derivative, kappa_eval, kappa_of_direction, lowpass, reconstruct,
                          reconstruct_points, row_weights)
from latomo.sinogram import AngularRange, Sinogram, radon_phantom

PHI = np.pi / 4


@pytest.mark.parametrize("k", [0, 1, 2, 5])
def test_kappa_normalized_on_axis(k):
    assert kappa_eval(Apodization(PHI, k), 0.0) == 1.0


@pytest.mark.parametrize("k", [1, 2, 3])
def test_kappa_vanishes_on_edge(k):
    assert kappa_eval(Apodization(PHI, k), PHI) == 0.0
    assert kappa_eval(Apodization(PHI, k), PHI + 0.1) == 0.0


def test_kappa_k0_is_one_inside():
    u = np.linspace(0, PHI * 0.999, 50)
    assert np.all(kappa_eval(Apodization(PHI, 0), u) == 1.0)


@settings(max_examples=50, deadline=None)
@given(phi=st.floats(0.1, 1.5), k=st.integers(0, 4), x=st.floats(-5, 5), y=st.floats(-5, 5))
def test_kappa_even_and_antipodal(phi, k, x, y):
    if np.hypot(x, y) < 1e-6:
        return
    ap = Apodization(phi, k)
    v = kappa_of_direction(ap, np.array([x, y]))
    assert v == kappa_of_direction(ap, np.array([x, -y]))
    assert v == kappa_of_direction(ap, np.array([-x, -y]))
    assert 0.0 <= v <= 1.0 + 1e-12


def test_kappa_direction_matches_angle_form():
    ap = Apodization(0.6, 2)
    u = np.linspace(-0.59, 0.59, 41)
    xi = np.stack([np.cos(u), np.sin(u)], axis=-1) * 3.0
    assert np.allclose(kappa_of_direction(ap, xi), kappa_eval(ap, u), atol=1e-14)


@pytest.mark.parametrize("k,expected", [(0, 1.0), (1, -2.0), (2, 8.0)])
def test_kappa_edge_derivative_values(k, expected):
    assert kappa_edge_derivative(Apodization(PHI, k)) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("phi", [0.3, PHI, 1.2])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_kappa_edge_derivative_finite_difference(phi, k):
    # one-sided oracle: a degree-8 polynomial fitted to kappa on [Phi - h, Phi]
    # and differentiated k times at Phi
    ap = Apodization(phi, k)
    h = 0.02
    u = np.linspace(phi - h, phi, 41)
    poly = np.polynomial.Polynomial.fit(u, kappa_eval(ap, u), 8)
    fd = poly.deriv(k)(phi)
    exact = kappa_edge_derivative(ap)
    assert fd == pytest.approx(exact, rel=1e-6)
    assert abs(exact) == pytest.approx(factorial(k) * (2 / np.tan(phi)) ** k)


def test_apodization_validation():
    with pytest.raises(ValueError):
        Apodization(PHI, -1)
    with pytest.raises(ValueError):
        Apodization(PHI, 1.5)
    with pytest.raises(ValueError):
        Apodization(2.0, 0)
    with pytest.raises(ValueError):
        Apodization(PHI, 0, "hann")
    with pytest.raises(ValueError):
        ReconSpec.make(2, PHI)
    with pytest.raises(ValueError):
        ReconSpec.make(0, PHI, 0, 10.0, 0.6)


S = np.linspace(-10, 10, 2001)
DS = S[1] - S[0]
MID = slice(500, 1501)


def test_lambda_kills_constants():
    assert np.max(np.abs(filter_lambda(np.full(700, 2.5), 0.01))) <= 1e-9


def test_lambda_on_cosine():
    w = 20.0
    x = np.cos(w * S)
    assert np.max(np.abs(filter_lambda(x, DS)[MID] - w * x[MID])) < 0.01 * w


def test_lambda_on_gaussian_at_zero():
    assert filter_lambda(np.exp(-S ** 2 / 2), DS)[1000] == pytest.approx(np.sqrt(2 / np.pi), abs=1e-3)


def test_d2_on_cosine():
    w = 2.0
    x = np.cos(w * S)
    assert np.max(np.abs(filter_d2(x, DS)[MID] - w * w * x[MID])) < 0.01 * w * w


def test_d2_annihilates_affine_rows():
    assert np.max(np.abs(filter_d2(1.0 + 0.5 * S, DS)[MID])) < 0.01


def test_d2_of_half_square():
    assert np.max(np.abs(filter_d2(S ** 2 / 2, DS)[MID] + 1.0)) < 0.01


def test_filters_reject_non_finite():
    row = np.ones(64)
    row[3] = np.inf
    with pytest.raises(ValueError):
        filter_lambda(row, 0.1)
    with pytest.raises(ValueError):
        filter_d2(np.ones(64), 0.0)


def test_lowpass_passes_low_and_stops_high():
    lo = np.cos(2 * np.pi * 2 * S)
    hi = np.cos(2 * np.pi * 30 * S)
    out = lowpass(lo + hi, DS, 10.0)
    assert np.max(np.abs(out[MID] - lo[MID])) < 0.01


def test_upsampled_rows_interpolate_original():
    x = np.exp(-S ** 2)
    base = filter_rows(x, DS, 1)
    up = filter_rows(x, DS, 1, upsample=4)
    assert up.shape[-1] == (S.size - 1) * 4 + 1
    assert np.allclose(up[::4], base, atol=1e-10)


def test_zero_sinogram_gives_zero_image():
    ang = AngularRange(PHI).angles(16)
    sino = Sinogram(ang, np.linspace(-np.sqrt(2), np.sqrt(2), 64), np.zeros((16, 64)))
    img = reconstruct(sino, ReconSpec.make(0, PHI), 16)
    assert np.all(img.values == 0.0)


def test_full_data_fbp_recovers_density(disk):
    sino = radon_phantom(disk, None, 720, 2048)
    img = reconstruct(sino, ReconSpec.make(0, PHI), 512)
    c = grid_coords(512, 1.0)
    X, Y = np.meshgrid(c, c)
    inner = np.hypot(X - 0.2, Y) < 0.5 - 4 * img.spacing
    assert np.max(np.abs(img.values[inner] - 1.0)) < 0.05


def test_limited_reconstruction_mirror_symmetric(disk):
    sino = radon_phantom(disk, AngularRange(PHI), 101, 512)
    for k in (0, 1):
        img = reconstruct(sino, ReconSpec.make(1, PHI, k, 40.0), 65)
        assert np.array_equal(img.values, img.values[::-1])


def test_axis_aligned_ellipses_mirror_symmetric():
    ph = Phantom((Ellipse((0.1, 0.0), (0.6, 0.3)), Ellipse((-0.3, 0.0), (0.4, 0.2), 0.0, -0.5)))
    sino = radon_phantom(ph, AngularRange(0.7), 64, 256)
    img = reconstruct(sino, ReconSpec.make(0, 0.7, 2, 30.0), 33)
    assert np.array_equal(img.values, img.values[::-1])


def test_tilted_pair_mirror_symmetric_to_rounding():
    # cos(pi - t) and -cos(t) differ in the last bit, so only near-equality holds
    ph = Phantom((Ellipse((0.1, 0.3), (0.4, 0.15), 0.5), Ellipse((0.1, -0.3), (0.4, 0.15), np.pi - 0.5)))
    sino = radon_phantom(ph, AngularRange(0.7), 64, 256)
    img = reconstruct(sino, ReconSpec.make(0, 0.7, 2, 30.0), 33)
    assert np.allclose(img.values, img.values[::-1], rtol=0, atol=1e-12)


def test_angle_grid_mismatch_rejected(disk):
    sino = radon_phantom(disk, AngularRange(0.5), 32, 128)
    with pytest.raises(ValueError, match="midpoint grid"):
        row_weights(sino, ReconSpec.make(0, PHI))
    full = radon_phantom(disk, None, 32, 128)
    with pytest.raises(ValueError):
        row_weights(full, ReconSpec.make(0, PHI, 1))
    with pytest.raises(ValueError):
        reconstruct(sino, ReconSpec.make(0, 0.5), 1)


def test_filtered_sinogram_reuse_matches_direct(disk):
    sino = radon_phantom(disk, AngularRange(PHI), 64, 512)
    spec1 = ReconSpec.make(0, PHI, 1, 50.0)
    filt = filter_sinogram(sino, spec1)
    pts = np.array([[0.3, 0.1], [-0.5, 0.4]])
    assert np.array_equal(reconstruct_points(filt, spec1, pts), reconstruct_points(sino, spec1, pts))
    # kappa enters only as a row weight, so one filtering serves every k
    spec2 = ReconSpec.make(0, PHI, 2, 50.0)
    assert np.array_equal(reconstruct_points(filt, spec2, pts), reconstruct_points(sino, spec2, pts))
    with pytest.raises(ValueError):
        reconstruct_points(filt, ReconSpec.make(1, PHI, 1, 50.0), pts)


def test_reconstruction_is_linear(disk):
    sino = radon_phantom(disk, AngularRange(PHI), 40, 256)
    spec = ReconSpec.make(0, PHI, 1, 30.0)
    pts = np.array([[0.1, 0.2], [0.7, -0.3]])
    double = Sinogram(sino.angles, sino.offsets, 2 * sino.values)
    assert np.allclose(reconstruct_points(double, spec, pts), 2 * reconstruct_points(sino, spec, pts))
