"""Pixel primitives against independent oracles and hand-built fixtures."""
import math

import numpy as np
import pytest

from csmpose.errors import DegeneratePoints, EmptyMask, LabelAbsent
from csmpose.imgcore import (
    gradient_magnitude,
    median_filter_labels,
    morph_skeleton,
    part_border,
    pca_orientation,
    rot2,
    signed_edt,
    to_lab,
    wrap_angle,
)

# ---------------------------------------------------------------------------
# color conversion


def lab_reference(r, g, b):
    """Scalar sRGB -> Lab reference, written independently of the package.

    Pure-python math with the published constants, one channel triple at a
    time. Used to pin spot values; must stay free of numpy so it cannot
    accidentally share code with the implementation under test.
    """

    def lin(u):
        u = u / 255.0
        return u / 12.92 if u <= 0.04045 else ((u + 0.055) / 1.055) ** 2.4

    rl, gl, bl = lin(r), lin(g), lin(b)
    x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl
    y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl
    z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl
    d = 6.0 / 29.0

    def f(t):
        return t ** (1.0 / 3.0) if t > d**3 else t / (3 * d * d) + 4.0 / 29.0

    fx, fy, fz = f(x / 0.95047), f(y / 1.0), f(z / 1.08883)
    return 116 * fy - 16, 500 * (fx - fy), 200 * (fy - fz)


def _solid(rgb, h=4, w=5):
    return np.tile(np.array(rgb, dtype=np.uint8), (h, w, 1))


def test_lab_black_is_zero():
    lab = to_lab(_solid((0, 0, 0)))
    np.testing.assert_allclose(lab, 0.0, atol=1e-12)


def test_lab_white_point():
    lab = to_lab(_solid((255, 255, 255)))
    assert abs(lab[0, 0, 0] - 100.0) < 1e-3
    assert abs(lab[0, 0, 1]) < 0.01
    assert abs(lab[0, 0, 2]) < 0.01


def test_lab_mid_gray_reference_value():
    lab = to_lab(_solid((119, 119, 119)))
    want = lab_reference(119, 119, 119)
    # frozen from the scalar reference: L of 119-gray
    assert abs(want[0] - 50.0344409936861) < 1e-10
    np.testing.assert_allclose(lab[0, 0], want, atol=1e-9)


def test_lab_matches_reference_on_random_colors():
    rng = np.random.default_rng(11)
    cols = rng.integers(0, 256, size=(40, 3))
    img = cols.reshape(1, -1, 3).astype(np.uint8)
    lab = to_lab(img)
    for i, (r, g, b) in enumerate(cols):
        np.testing.assert_allclose(lab[0, i], lab_reference(r, g, b), atol=1e-9)


def test_lab_rejects_bad_shape():
    with pytest.raises(ValueError):
        to_lab(np.zeros((4, 4), dtype=np.uint8))


# ---------------------------------------------------------------------------
# gradient magnitude


def test_gradient_constant_is_zero():
    lab = to_lab(_solid((57, 80, 141), h=6, w=7))
    np.testing.assert_array_equal(gradient_magnitude(lab), 0.0)


def test_gradient_vertical_step_locality():
    img = np.zeros((6, 8, 3), dtype=np.uint8)
    img[:, :4] = (200, 30, 160)
    img[:, 4:] = (20, 140, 60)
    g = gradient_magnitude(to_lab(img))
    assert (g[:, [3, 4]] > 0).all()
    cols = np.ones(8, dtype=bool)
    cols[[3, 4]] = False
    np.testing.assert_array_equal(g[:, cols], 0.0)


def test_gradient_center_pixel_fixture():
    img = np.tile(np.array((20, 140, 60), dtype=np.uint8), (3, 3, 1))
    img[1, 1] = (200, 30, 160)
    g = gradient_magnitude(to_lab(img))
    want = math.dist(lab_reference(200, 30, 160), lab_reference(20, 140, 60))
    # frozen from the scalar reference: Lab distance of the two fixture colors
    assert abs(want - 136.6963729207095) < 1e-9
    np.testing.assert_allclose(g, want, atol=1e-9)


def test_gradient_translation_equivariant_interior():
    rng = np.random.default_rng(5)
    img = rng.integers(0, 256, size=(10, 12, 3)).astype(np.uint8)
    big = np.zeros((14, 16, 3), dtype=np.uint8)
    big[2:12, 2:14] = img
    g0 = gradient_magnitude(to_lab(img))
    g1 = gradient_magnitude(to_lab(big))
    np.testing.assert_allclose(g1[3:11, 3:13], g0[1:-1, 1:-1], atol=1e-12)


# ---------------------------------------------------------------------------
# signed EDT


def edt_bruteforce(labels, label):
    """All-pairs squared distance to the border pixel set, O(n^2)."""
    mask = labels == label
    border = part_border(mask)
    bys, bxs = np.nonzero(border)
    h, w = mask.shape
    sq = np.empty((h, w), dtype=np.int64)
    for y in range(h):
        for x in range(w):
            sq[y, x] = ((bys - y) ** 2 + (bxs - x) ** 2).min()
    signed = np.sqrt(sq.astype(np.float64))
    signed[mask & ~border] *= -1.0
    return sq, signed


def test_edt_single_pixel_geometry():
    labels = np.zeros((7, 7), dtype=np.int32)
    labels[3, 3] = 1
    dm = signed_edt(labels, 1)
    assert dm.signed[3, 3] == 0.0
    assert dm.signed[3, 4] == 1.0
    assert dm.signed[2, 3] == 1.0
    assert abs(dm.signed[2, 2] - math.sqrt(2)) < 1e-12
    assert dm.squared[0, 0] == 18


def test_edt_all_foreground_interior_negative():
    labels = np.ones((9, 9), dtype=np.int32)
    dm = signed_edt(labels, 1)
    assert (dm.signed <= 0).all()
    # Chebyshev depth 2 pixels sit at least one pixel inside the border ring
    assert dm.signed[2, 2] <= -1.0
    assert dm.signed[4, 4] <= -1.0
    assert (dm.signed[0, :] == 0).all()


def test_edt_mask_property_recovers_part():
    rng = np.random.default_rng(3)
    labels = (rng.random((15, 15)) < 0.4).astype(np.int32)
    if not labels.any():
        labels[7, 7] = 1
    dm = signed_edt(labels, 1)
    np.testing.assert_array_equal(dm.mask, labels == 1)


def test_edt_matches_bruteforce_on_random_masks():
    rng = np.random.default_rng(23)
    for _ in range(25):
        labels = (rng.random((20, 20)) < rng.uniform(0.2, 0.8)).astype(np.int32)
        if not labels.any():
            labels[10, 10] = 1
        dm = signed_edt(labels, 1)
        sq, signed = edt_bruteforce(labels, 1)
        np.testing.assert_array_equal(dm.squared, sq)
        np.testing.assert_array_equal(dm.signed, signed)


def test_edt_label_absent():
    with pytest.raises(LabelAbsent):
        signed_edt(np.zeros((4, 4), dtype=np.int32), 3)


# ---------------------------------------------------------------------------
# PCA orientation


def _rect_points(w, h):
    ys, xs = np.mgrid[0:h, 0:w]
    return np.stack([xs.ravel(), ys.ravel()], axis=1).astype(np.float64)


def test_pca_axis_aligned_rectangle():
    fr = pca_orientation(_rect_points(20, 4))
    assert abs(fr.primary_axis @ np.array([1.0, 0.0])) > 0.999
    assert fr.primary_sd > fr.secondary_sd
    # uniform discrete run of n has variance (n^2-1)/12
    assert abs(fr.primary_sd - math.sqrt((20**2 - 1) / 12)) < 1e-9
    assert abs(fr.secondary_sd - math.sqrt((4**2 - 1) / 12)) < 1e-9


def test_pca_rotated_rectangle_angle():
    ang = math.radians(30)
    pts = _rect_points(20, 4) @ rot2(ang).T
    fr = pca_orientation(pts)
    want = np.array([math.cos(ang), math.sin(ang)])
    assert abs(fr.primary_axis @ want) > math.cos(math.radians(1.0))


def test_pca_sign_convention_and_orthogonality():
    rng = np.random.default_rng(17)
    for _ in range(20):
        pts = rng.normal(size=(60, 2)) * np.array([5.0, 1.0])
        pts = pts @ rot2(rng.uniform(-np.pi, np.pi)).T
        fr = pca_orientation(pts)
        assert fr.primary_axis[1] <= 0 or (
            fr.primary_axis[1] == 0 and fr.primary_axis[0] >= 0
        )
        assert abs(fr.primary_axis @ fr.secondary_axis) < 1e-12
        np.testing.assert_allclose(
            fr.secondary_axis, [-fr.primary_axis[1], fr.primary_axis[0]], atol=1e-12
        )


def test_pca_translation_invariant():
    rng = np.random.default_rng(29)
    pts = rng.normal(size=(50, 2)) * np.array([3.0, 1.0])
    a = pca_orientation(pts)
    b = pca_orientation(pts + np.array([120.0, -40.0]))
    np.testing.assert_allclose(b.centroid - a.centroid, [120.0, -40.0], atol=1e-9)
    np.testing.assert_allclose(a.primary_axis, b.primary_axis, atol=1e-12)
    assert abs(a.primary_sd - b.primary_sd) < 1e-9


def test_pca_two_points_and_degenerate():
    fr = pca_orientation(np.array([[0.0, 0.0], [3.0, -4.0]]))
    np.testing.assert_allclose(fr.primary_axis, [0.6, -0.8], atol=1e-12)
    with pytest.raises(DegeneratePoints):
        pca_orientation(np.array([[2.0, 2.0], [2.0, 2.0]]))


# ---------------------------------------------------------------------------
# morphological skeleton


def test_skeleton_horizontal_bar():
    mask = np.zeros((7, 25), dtype=bool)
    mask[2:5, 2:23] = True
    pts = morph_skeleton(mask)
    assert (mask[pts[:, 1], pts[:, 0]]).all()
    # medial row of a 3-wide bar, within one pixel
    assert np.abs(pts[:, 1] - 3).max() <= 1
    xs = np.unique(pts[:, 0])
    assert xs.min() <= 5 and xs.max() >= 19


def test_skeleton_disk_collapses_to_center():
    yy, xx = np.mgrid[0:21, 0:21]
    mask = (yy - 10) ** 2 + (xx - 10) ** 2 <= 64
    pts = morph_skeleton(mask)
    d = np.hypot(pts[:, 0] - 10, pts[:, 1] - 10)
    assert d.max() <= 2.0


def test_skeleton_l_shape_touches_both_axes():
    mask = np.zeros((30, 30), dtype=bool)
    mask[5:25, 5:10] = True  # vertical bar, axis x ~ 7
    mask[20:25, 5:25] = True  # horizontal bar, axis y ~ 22
    pts = morph_skeleton(mask)
    assert (mask[pts[:, 1], pts[:, 0]]).all()
    on_vert = np.abs(pts[:, 0] - 7) <= 1
    on_horz = np.abs(pts[:, 1] - 22) <= 1
    assert on_vert.sum() >= 8
    assert on_horz.sum() >= 8


def test_skeleton_idempotent_thin():
    rng = np.random.default_rng(41)
    mask = np.zeros((20, 20), dtype=bool)
    mask[4:16, 6:14] = True
    mask[rng.integers(4, 16, 10), rng.integers(6, 14, 10)] = True
    pts = morph_skeleton(mask)
    thin = np.zeros_like(mask)
    thin[pts[:, 1], pts[:, 0]] = True
    pts2 = morph_skeleton(thin)
    np.testing.assert_array_equal(np.sort(pts.view("i8,i8"), 0), np.sort(pts2.view("i8,i8"), 0))


def test_skeleton_empty_mask():
    with pytest.raises(EmptyMask):
        morph_skeleton(np.zeros((5, 5), dtype=bool))


# ---------------------------------------------------------------------------
# median label filter


def test_median_filter_constant_fixed_point():
    labels = np.full((8, 8), 3, dtype=np.int32)
    np.testing.assert_array_equal(median_filter_labels(labels, 2), labels)


def test_median_filter_salt_pixel():
    labels = np.ones((7, 7), dtype=np.int32)
    labels[3, 3] = 2
    out = median_filter_labels(labels, 1)
    np.testing.assert_array_equal(out, np.ones((7, 7), dtype=np.int32))


def test_median_filter_quarter_plane_corner():
    # label 2 occupies the x>=2, y>=2 quadrant of a 5x5 grid; with r=1 the
    # only pixel whose clipped window has a label-1 majority is the inner
    # corner (2,2): 5 ones vs 4 twos. Every other pixel keeps its label.
    labels = np.ones((5, 5), dtype=np.int32)
    labels[2:, 2:] = 2
    want = labels.copy()
    want[2, 2] = 1
    np.testing.assert_array_equal(median_filter_labels(labels, 1), want)


def test_median_filter_tie_prefers_smaller_label():
    labels = np.zeros((1, 4), dtype=np.int32)
    labels[0, 2:] = 5
    # pixel (0,1) window: two 0s, one 5 -> 0; pixel (0,2) window: one 0, two 5 -> 5
    out = median_filter_labels(labels, 1)
    np.testing.assert_array_equal(out[0], [0, 0, 5, 5])
    # 2x2 checkerboard window has a 2-2 tie at every pixel, smaller id wins
    board = np.array([[1, 2], [2, 1]], dtype=np.int32)
    np.testing.assert_array_equal(median_filter_labels(board, 1), np.ones((2, 2), np.int32))


def test_median_filter_idempotent_on_fixture():
    labels = np.ones((5, 5), dtype=np.int32)
    labels[2:, 2:] = 2
    once = median_filter_labels(labels, 1)
    twice = median_filter_labels(once, 1)
    np.testing.assert_array_equal(once, twice)


def test_median_filter_rejects_radius_zero():
    with pytest.raises(ValueError):
        median_filter_labels(np.zeros((3, 3), dtype=np.int32), 0)


# ---------------------------------------------------------------------------
# small angle helpers


def test_rot2_matches_complex_rotation():
    rng = np.random.default_rng(7)
    for _ in range(10):
        a = rng.uniform(-np.pi, np.pi)
        v = rng.normal(size=2)
        w = rot2(a) @ v
        z = (v[0] + 1j * v[1]) * np.exp(1j * a)
        np.testing.assert_allclose(w, [z.real, z.imag], atol=1e-12)


def test_wrap_angle_range_and_fixed_points():
    assert wrap_angle(np.pi) == pytest.approx(np.pi)
    assert wrap_angle(-np.pi) == pytest.approx(np.pi)
    assert wrap_angle(3 * np.pi) == pytest.approx(np.pi)
    for a in np.linspace(-9, 9, 37):
        w = wrap_angle(a)
        assert -np.pi < w <= np.pi
        assert abs(math.remainder(w - a, 2 * np.pi)) < 1e-12
