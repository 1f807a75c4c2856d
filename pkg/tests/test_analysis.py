import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latomo.analysis import (POWER_LAW_RESIDUAL, ProbeGeometry, artifact_report, boundary_point_with_normal,
                             classify_normal, classify_singularities, decay_slope, detect_peak,
                             edge_directions, extract_profile, jump_across, outward_normal, predict_streaks)
from latomo.phantom import Ellipse, ImageGrid, Phantom, default_disk, rasterize, unit_disk
from latomo.recon import ReconSpec
from latomo.sinogram import AngularRange

PHI = np.pi / 4
Q = AngularRange(PHI)


def test_unit_disk_streaks():
    preds = predict_streaks(unit_disk(), Q)
    assert len(preds) == 4
    e1, e2 = edge_directions(PHI)
    expect = {(1, 1.0), (1, -1.0), (2, 1.0), (2, -1.0)}
    got = set()
    for p in preds:
        e = e1 if p.j == 1 else e2
        y = np.asarray(p.generator)
        side = float(np.round(y @ e, 12))
        got.add((p.j, side))
        assert np.allclose(np.abs(y), np.abs(e))
        # the streak line is x.e_j = +-1
        for t in (-0.7, 0.4):
            assert (y + t * np.asarray(p.line_direction)) @ e == pytest.approx(side)
    assert got == expect


def test_streaks_translate_with_disk():
    a = predict_streaks(Phantom((Ellipse((0, 0), (0.5, 0.5)),)), Q)
    b = predict_streaks(Phantom((Ellipse((0.2, -0.1), (0.5, 0.5)),)), Q)
    for p, q in zip(a, b):
        assert np.allclose(np.asarray(q.generator) - p.generator, [0.2, -0.1], atol=1e-15)


def test_two_disks_give_eight_predictions():
    ph = Phantom((Ellipse((-0.5, 0), (0.3, 0.3)), Ellipse((0.5, 0), (0.3, 0.3))))
    preds = predict_streaks(ph, Q)
    assert len(preds) == 8
    assert sorted({p.source_ellipse for p in preds}) == [0, 1]


@settings(max_examples=60, deadline=None)
@given(a=st.floats(0.05, 0.6), b=st.floats(0.05, 0.6), tilt=st.floats(0, 3.14),
       phi=st.floats(0.05, 1.5))
def test_generator_normals_are_edge_directions(a, b, tilt, phi):
    e = Ellipse((0.1, 0.1), (a, b), tilt)
    for p in predict_streaks(Phantom((e,)), AngularRange(phi)):
        y = np.asarray(p.generator)
        # implicit form (y-c)^T M (y-c) = 1 with gradient 2 M (y-c)
        A = e.shape_matrix
        M = np.linalg.inv(A @ A.T)
        d = y - np.asarray(e.center)
        assert d @ M @ d == pytest.approx(1.0, abs=1e-9)
        g = M @ d
        g /= np.hypot(*g)
        assert np.allclose(g, p.direction, atol=1e-9)
        ej = edge_directions(phi)[p.j - 1]
        assert abs(abs(g @ ej) - 1.0) < 1e-9


def test_boundary_point_with_normal_roundtrip():
    e = Ellipse((0.1, -0.2), (0.5, 0.2), 0.3)
    pts, nrm = outward_normal(e, np.linspace(0, 2 * np.pi, 17))
    for p, n in zip(pts, nrm):
        assert np.allclose(boundary_point_with_normal(e, n), p, atol=1e-12)


def test_visible_fraction_of_disk():
    n = 720
    labels = [c.label for c in classify_singularities(unit_disk(), Q, n)]
    frac = labels.count("visible") / n
    assert abs(frac - 0.5) <= 1.0 / n


@pytest.mark.parametrize("phi", [0.05, 0.02])
def test_visible_fraction_small_wedge(phi):
    n = 4000
    labels = [c.label for c in classify_singularities(unit_disk(), AngularRange(phi), n)]
    assert labels.count("visible") / n == pytest.approx(2 * phi / np.pi, abs=2.0 / n)


def test_edge_normal_classified_as_edge():
    e1, e2 = edge_directions(PHI)
    assert classify_normal(e1, Q) == "edge-of-wedge"
    assert classify_normal(-e2, Q) == "edge-of-wedge"
    assert classify_normal((1.0, 0.0), Q) == "visible"
    assert classify_normal((0.0, 1.0), Q) == "invisible"
    with pytest.raises(ValueError):
        classify_singularities(unit_disk(), Q, 8)


def test_profile_of_constant_image():
    prof = extract_profile(np.full((33, 33), 2.5), (0.1, 0.2), (0.6, 0.8), 0.5, 256)
    assert np.allclose(prof, 2.5)


def test_profile_through_rasterized_disk_is_top_hat():
    img = rasterize(default_disk(), 513)
    prof = extract_profile(img, (0.2, 0.0), (1.0, 0.0), 0.75, 1024)
    u = np.linspace(-0.75, 0.75, 1024)
    inside = prof > 0.5
    width = u[inside][-1] - u[inside][0]
    assert width == pytest.approx(1.0, abs=2 * img.spacing)
    assert np.all(prof[np.abs(u) < 0.5 - img.spacing] == 1.0)


def test_profile_reverses_with_direction():
    img = rasterize(default_disk(), 129)
    a = extract_profile(img, (0.1, 0.05), (0.6, 0.8), 0.4, 256)
    b = extract_profile(img, (0.1, 0.05), (-0.6, -0.8), 0.4, 256)
    assert np.allclose(a, b[::-1], atol=1e-12)


def test_profile_errors():
    img = np.zeros((17, 17))
    with pytest.raises(ValueError, match="leaves"):
        extract_profile(img, (0.8, 0.0), (1.0, 0.0), 0.5, 256)
    with pytest.raises(ValueError):
        extract_profile(img, (0, 0), (1.0, 0.0), 0.5, 300)
    with pytest.raises(ValueError):
        extract_profile(img, (0, 0), (1.0, 0.0), 0.5, 128)
    with pytest.raises(ValueError):
        extract_profile(img, (0, 0), (1.0, 1.0), 0.5, 256)


N = 4096
U = np.linspace(-0.5, 0.5, N)
DU = U[1] - U[0]
WINDOW = (8.0, 64.0)


def test_step_slope():
    fit = decay_slope((U > 0.03).astype(float), DU, WINDOW)
    assert fit.slope == pytest.approx(-1.0, abs=0.1)
    assert fit.power_law and fit.n_points >= 8


def test_gaussian_not_power_law():
    fit = decay_slope(np.exp(-(U / 0.02) ** 2), DU, WINDOW)
    assert not fit.power_law
    assert fit.rms_residual > POWER_LAW_RESIDUAL


def test_delta_slope():
    g = np.zeros(N)
    g[N // 2 + 37] = 1.0
    assert decay_slope(g, DU, WINDOW).slope == pytest.approx(0.0, abs=0.05)


def test_cusp_slope():
    # |u|^(1/2) has transform decaying like tau^(-3/2)
    fit = decay_slope(np.sqrt(np.abs(U - 0.01)), DU, WINDOW)
    assert fit.slope == pytest.approx(-1.5, abs=0.1)


def test_decay_slope_window_checks():
    g = (U > 0).astype(float)
    with pytest.raises(ValueError, match="DC"):
        decay_slope(g, DU, (2.0, 64.0))
    with pytest.raises(ValueError, match="band limit"):
        decay_slope(g, DU, (8.0, 64.0), band_limit=100.0)
    with pytest.raises(ValueError, match="need 8"):
        decay_slope(g, DU, (8.0, 20.0))
    bad = g.copy()
    bad[5] = np.nan
    with pytest.raises(ValueError):
        decay_slope(bad, DU, WINDOW)


def test_detect_peak():
    g = 0.3 * U + np.sqrt(np.abs(U - 0.1))
    idx, _ = detect_peak(g, DU)
    assert abs(U[idx] - 0.1) <= 2 * DU
    idx, _ = detect_peak(0.3 * U + 1.0, DU)
    assert idx is None


def test_jump_across_step_image():
    n = 257
    c = np.linspace(-1, 1, n)
    X, _ = np.meshgrid(c, c)
    img = ImageGrid(np.where(X > 0.1, 1.0 + 0.2 * X, 0.2 * X), 1.0)
    h = img.spacing
    assert jump_across(img, (0.1, 0.0), (1.0, 0.0), 4 * h, 24 * h) == pytest.approx(1.0, abs=1e-9)
    assert jump_across(img, (0.1, 0.0), (0.0, 1.0), 4 * h, 24 * h) == pytest.approx(0.0, abs=1e-9)


def test_artifact_report_k0(tmp_path):
    ph = default_disk()
    spec = ReconSpec.make(0, PHI, 0, 64.0)
    geo = ProbeGeometry(n_samples=2048, pixel=2.0 / 511)
    rep = artifact_report(ph, spec, predict_streaks(ph, Q), geo)
    assert len(rep.records) == 4
    for r in rep.records:
        assert r.predicted_gap == -0.5
        assert r.gap == pytest.approx(-0.5, abs=0.25)
        assert r.line_offset_error_px is not None and r.line_offset_error_px <= 2.0
        # probes sit outside the phantom
        assert np.hypot(r.x_star[0] - 0.2, r.x_star[1]) > 0.5
    rep.write_json(tmp_path / "r.json")
    rep.write_csv(tmp_path / "r.csv")
    doc = json.load(open(tmp_path / "r.json"))
    keys = {"j", "y_star", "line_offset_error_px", "artifact_slope", "edge_slope", "gap", "predicted_gap",
            "residuals"}
    assert keys <= set(doc["predictions"][0])
    rows = list(csv.reader(open(tmp_path / "r.csv")))
    assert rows[0] == ["prediction", "kind", "x", "value"]
    assert {r[1] for r in rows[1:]} == {"artifact_profile", "edge_profile", "artifact_spectrum",
                                        "edge_spectrum"}


def test_artifact_report_preconditions():
    with pytest.raises(ValueError):
        artifact_report(default_disk(), ReconSpec.make(0, PHI), predict_streaks(default_disk(), Q))
    with pytest.raises(ValueError):
        artifact_report(default_disk(), ReconSpec.make(0, PHI, 0, 64.0), [])
