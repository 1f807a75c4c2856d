import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latomo.phantom import Ellipse, ImageGrid, Phantom, grid_coords, point_value, rasterize, unit_disk


def test_point_value_center_and_outside():
    ph = unit_disk()
    assert point_value(ph, (0.0, 0.0)) == 1.0
    assert point_value(ph, (2.0, 0.0)) == 0.0


def test_point_value_additive_on_overlap():
    ph = Phantom((Ellipse((0, 0), (0.5, 0.5), 0, 1.0), Ellipse((0.2, 0), (0.5, 0.5), 0, 0.5)))
    assert point_value(ph, (0.1, 0.0)) == 1.5


def test_point_value_vectorized_shape():
    pts = np.zeros((3, 4, 2))
    assert point_value(unit_disk(), pts).shape == (3, 4)


def test_ellipse_rejects_bad_axes_and_scene_overflow():
    with pytest.raises(ValueError):
        Ellipse((0, 0), (0.0, 0.3))
    with pytest.raises(ValueError):
        Ellipse((0.8, 0), (0.5, 0.5))
    with pytest.raises(ValueError):
        Phantom(())


def test_ellipse_swaps_axes_to_keep_a_major():
    e = Ellipse((0, 0), (0.2, 0.6), 0.0)
    assert e.semi_axes == (0.6, 0.2)
    assert np.isclose(e.tilt, np.pi / 2)
    # same set of points as the unswapped description
    assert e.inside(0.0, 0.55) and not e.inside(0.55, 0.0)


def test_rasterize_three_pixels():
    img = rasterize(unit_disk(), 3, 1.0, 1)
    assert img.values[1, 1] == 1.0
    for i, j in ((0, 0), (0, 2), (2, 0), (2, 2)):
        assert img.values[i, j] == 0.0


def test_rasterize_zero_outside_all_ellipses(disk):
    img = rasterize(disk, 64)
    X, Y = np.meshgrid(img.coords, img.coords)
    outside = np.hypot(X - 0.2, Y) > 0.5
    assert np.all(img.values[outside] == 0.0)


def test_rasterize_rows_increase_with_y():
    ph = Phantom((Ellipse((0, 0.6), (0.2, 0.2)),))
    img = rasterize(ph, 11)
    assert img.values[-3, 5] == 1.0 and img.values[2, 5] == 0.0


def test_rasterize_supersampled_area():
    img = rasterize(unit_disk(), 256, supersample=4)
    # pixel cells cover [-1 - dx/2, 1 + dx/2]^2
    cell = img.spacing ** 2
    assert abs(img.values.sum() * cell - np.pi) < 2e-3


def test_rasterize_memory_budget():
    with pytest.raises(ValueError, match="budget"):
        rasterize(unit_disk(), 1024, supersample=8, max_samples=1 << 20)


def test_grid_coords_antisymmetric():
    c = grid_coords(513, 1.0)
    assert np.array_equal(c, -c[::-1])
    assert c[0] == -1.0 and c[-1] == 1.0


def test_imagegrid_validation():
    with pytest.raises(ValueError):
        ImageGrid(np.zeros((3, 4)))
    with pytest.raises(ValueError):
        ImageGrid(np.zeros((1, 1)))


@settings(max_examples=40, deadline=None)
@given(cx=st.floats(-0.3, 0.3), cy=st.floats(-0.3, 0.3), a=st.floats(0.05, 0.6),
       b=st.floats(0.05, 0.6), tilt=st.floats(0, 3.1), u=st.floats(0, 6.3), r=st.floats(0, 0.999))
def test_parametric_interior_points_are_inside(cx, cy, a, b, tilt, u, r):
    e = Ellipse((cx, cy), (a, b), tilt)
    p = np.asarray(e.center) + e.shape_matrix @ (r * np.array([np.cos(u), np.sin(u)]))
    assert e.inside(*p)
    q = np.asarray(e.center) + e.shape_matrix @ (1.001 * np.array([np.cos(u), np.sin(u)]))
    assert not e.inside(*q)
