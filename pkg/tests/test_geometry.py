import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import optimize
from scipy import stats as sps

from gpboundary.geometry import (
    CORNER_RADIUS,
    GeometryError,
    PolarImage,
    ShapeCase,
    angle_grid,
    case_shape,
    ellipse_implicit,
    generate_design,
    interpolate_periodic,
    lebesgue_error,
    max_radius,
    membership,
    read_image,
    shape_radius,
    to_polar,
    write_image,
)


class TestDesign:
    def test_jittered_two(self):
        xy = generate_design("jittered", 2, seed=0)
        assert xy.shape == (4, 2)
        cells = {(int(x >= 0), int(y >= 0)) for x, y in xy}
        assert cells == {(0, 0), (1, 0), (0, 1), (1, 1)}

    def test_jittered_one_per_cell(self):
        m = 100
        xy = generate_design("jittered", m, seed=1)
        cells = np.floor((xy + 0.5) * m).astype(int)
        counts = np.zeros((m, m), dtype=int)
        np.add.at(counts, (cells[:, 0], cells[:, 1]), 1)
        assert np.all(counts == 1)

    def test_random_uniform(self):
        xy = generate_design("random", 10_000, seed=2)
        assert np.all(np.abs(xy) <= 0.5)
        hist, _, _ = np.histogram2d(xy[:, 0], xy[:, 1], bins=10, range=[[-0.5, 0.5], [-0.5, 0.5]])
        assert sps.chisquare(hist.ravel()).pvalue > 0.001

    def test_deterministic(self):
        np.testing.assert_array_equal(generate_design("jittered", 10, 5), generate_design("jittered", 10, 5))

    def test_errors(self):
        with pytest.raises(GeometryError):
            generate_design("jittered", 1, 0)
        with pytest.raises(GeometryError):
            generate_design("hexagonal", 10, 0)


class TestPolar:
    def test_examples(self):
        assert to_polar(0.25, 0) == (0.0, 0.25)
        w, r = to_polar(0, -0.25)
        assert w == pytest.approx(3 * math.pi / 2) and r == 0.25
        w, r = to_polar(-0.3, 0.3)
        assert w == pytest.approx(3 * math.pi / 4) and r == pytest.approx(0.424264, abs=1e-6)
        assert to_polar(0, 0) == (0.0, 0.0)

    @given(x=st.floats(-0.5, 0.5), y=st.floats(-0.5, 0.5))
    def test_range_and_roundtrip(self, x, y):
        w, r = to_polar(x, y)
        assert 0 <= w < 2 * math.pi
        assert r * math.cos(w) == pytest.approx(x, abs=1e-12)
        assert r * math.sin(w) == pytest.approx(y, abs=1e-12)

    def test_image_roundtrip(self, tmp_path):
        xy = generate_design("jittered", 5, 0)
        image = PolarImage.from_cartesian(xy, np.arange(25.0), {"case": "B1", "m": 5})
        np.testing.assert_allclose(image.cartesian(), xy, atol=1e-15)
        path = tmp_path / "img.csv"
        write_image(image, path)
        back = read_image(path)
        np.testing.assert_array_equal(back.omega, image.omega)
        np.testing.assert_array_equal(back.y, image.y)
        assert back.meta == image.meta
        assert path.read_text().splitlines()[0] == "omega,r,y"

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(GeometryError):
            read_image(path)


class TestShapes:
    def test_b1_axes(self):
        b1 = case_shape("B1")
        assert b1(0.0) == pytest.approx(0.35)
        assert b1(math.pi / 2) == pytest.approx(0.25)

    def test_b2_against_bisection(self):
        b2 = case_shape("B2")
        for w in np.linspace(0, 2 * math.pi, 13):
            f = lambda t: ellipse_implicit(b2, t * math.cos(w), t * math.sin(w))
            root = optimize.bisect(f, 1e-9, 0.7, xtol=1e-12)
            assert b2(w) == pytest.approx(root, abs=1e-10)

    def test_b2_on_implicit_curve(self):
        b2 = case_shape("B2")
        w = np.linspace(0, 2 * math.pi, 1000, endpoint=False)
        r = b2(w)
        assert np.max(np.abs(ellipse_implicit(b2, r * np.cos(w), r * np.sin(w)))) <= 1e-10

    def test_triangle(self):
        b3 = case_shape("B3")
        apothem = 0.5 / 3
        # a vertex on the positive x-axis and edge midpoints at the normals
        assert b3(0.0) == pytest.approx(2 * apothem)
        for normal in (math.pi / 3, math.pi, 5 * math.pi / 3):
            assert b3(normal) == pytest.approx(apothem)
        grid = angle_grid(100_000)
        area = 0.5 * np.mean(b3(grid) ** 2) * 2 * math.pi
        assert area == pytest.approx(b3.area(), rel=1e-6)

    @pytest.mark.parametrize("case", ["B1", "B2", "B3", "G1"])
    def test_inside_frame(self, case):
        w = angle_grid(4096)
        r = case_shape(case)(w)
        assert np.all(r > 0) and np.all(r < max_radius(w)) and np.all(r < CORNER_RADIUS)

    def test_invalid_shapes(self):
        with pytest.raises(GeometryError):
            ShapeCase("ellipse", b1=0.1, b2=0.1, center=(0.3, 0.0))
        with pytest.raises(GeometryError):
            ShapeCase("ellipse", b1=0.6, b2=0.2)
        with pytest.raises(GeometryError):
            ShapeCase("hexagon")
        with pytest.raises(GeometryError):
            case_shape("Z1")

    def test_g_cases_share_b2(self):
        assert case_shape("G3") == case_shape("B2")


class TestMembershipAndError:
    def test_membership_ties(self):
        image = PolarImage(np.zeros(2), np.array([0.2, 0.3]), np.zeros(2))
        np.testing.assert_array_equal(membership([0.3, 0.3], image), [True, False])

    def test_inside_fraction_matches_area(self):
        xy = generate_design("jittered", 100, 0)
        image = PolarImage.from_cartesian(xy, np.zeros(len(xy)))
        inside = membership(case_shape("B1")(image.omega), image)
        assert abs(inside.mean() - math.pi * 0.35 * 0.25) <= 0.01

    def test_annulus(self):
        assert lebesgue_error(0.35, 0.25) == pytest.approx(math.pi * (0.35**2 - 0.25**2), rel=1e-12)
        assert lebesgue_error(0.35, 0.25) == pytest.approx(0.1884956, abs=1e-7)
        assert lebesgue_error(case_shape("B1"), case_shape("B1")) == 0

    def test_quadrature_self_refinement(self):
        coarse = lebesgue_error(case_shape("B1"), 0.3)
        fine = lebesgue_error(case_shape("B1"), 0.3, grid_size=1_000_000)
        assert coarse == pytest.approx(fine, rel=1e-6)

    @given(
        st.lists(st.floats(-0.05, 0.05), min_size=7, max_size=7),
        st.lists(st.floats(-0.05, 0.05), min_size=7, max_size=7),
        st.lists(st.floats(-0.05, 0.05), min_size=7, max_size=7),
    )
    def test_pseudometric(self, ca, cb, cc):
        def curve(c):
            return lambda w: 0.2 + c[0] + sum(c[j] * np.cos(j * w) + c[j + 3] * np.sin(j * w) for j in (1, 2, 3))

        a, b, c = curve(ca), curve(cb), curve(cc)
        ab = lebesgue_error(a, b)
        assert ab >= 0
        assert ab == pytest.approx(lebesgue_error(b, a), abs=1e-12)
        assert ab <= lebesgue_error(a, c) + lebesgue_error(c, b) + 1e-8

    def test_membership_disagreement_approximates_area(self):
        m = 500
        xy = generate_design("jittered", m, 3)
        image = PolarImage.from_cartesian(xy, np.zeros(len(xy)))
        a, b = case_shape("B1"), case_shape("B2")
        differ = membership(a(image.omega), image) != membership(b(image.omega), image)
        assert abs(differ.mean() - lebesgue_error(a, b)) <= 5.0 / m

    def test_array_curves_and_interpolation(self):
        grid = angle_grid(10_000)
        values = case_shape("B2")(grid)
        assert lebesgue_error(values, case_shape("B2")) == 0
        interp = interpolate_periodic(values)
        assert interp(2 * math.pi) == pytest.approx(values[0])
        with pytest.raises(GeometryError):
            lebesgue_error(values[:10], 0.2)

    def test_max_radius(self):
        assert max_radius(0.0) == pytest.approx(0.5)
        assert max_radius(math.pi / 4) == pytest.approx(CORNER_RADIUS)
