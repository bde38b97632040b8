import numpy as np
import pytest

from yinyang.geometry import (
    ChartId,
    GeometryError,
    GridSpec,
    OutOfDomainError,
    PoleAmbiguityError,
    ShellExtents,
    build_domain,
    cartesian_to_chart,
    cell_point,
    chart_to_cartesian,
    check_coverage,
    locate_cell,
    make_grid,
    max_cell_diameter,
    sibling_coords,
)


def test_chart_box_extents():
    dom = build_domain(ShellExtents(1, 2, 0.1), GridSpec(4, 4, 4))
    g = dom.yin
    assert np.isclose(g.theta.faces[0], np.pi / 4 - 0.1)
    assert np.isclose(g.theta.faces[-1], 3 * np.pi / 4 + 0.1)
    assert np.isclose(g.phi.faces[0], np.pi / 4 - 0.1)
    assert np.isclose(g.phi.faces[-1], 7 * np.pi / 4 + 0.1)
    np.testing.assert_allclose(g.r.faces, [1, 1.25, 1.5, 1.75, 2])


def test_charts_are_congruent_and_cover_the_shell():
    rep = check_coverage(build_domain(ShellExtents(1, 2, 0.1), GridSpec(4, 8, 16)))
    assert rep["congruent"] and rep["covered"] and rep["boundary_contained"]


def test_zero_overlap_fails_containment():
    rep = check_coverage(build_domain(ShellExtents(1, 2, 0.0), GridSpec(4, 8, 16)), n_points=2000)
    assert not rep["boundary_contained"]


def test_axis_points():
    assert np.allclose(chart_to_cartesian(ChartId.YIN, 1, np.pi / 2, 0), (1, 0, 0))
    assert np.allclose(chart_to_cartesian(ChartId.YANG, 1, np.pi / 2, np.pi / 2), (0, 0, 1))


@pytest.mark.parametrize("chart", list(ChartId))
def test_chart_map_is_isometric(chart, rng):
    r, t, p = rng.uniform(1, 2, 200), rng.uniform(0.1, 3.0, 200), rng.uniform(0, 2 * np.pi, 200)
    x, y, z = chart_to_cartesian(chart, r, t, p)
    np.testing.assert_allclose(np.sqrt(x * x + y * y + z * z), r, rtol=1e-14)
    r2, t2, p2 = cartesian_to_chart(chart, x, y, z)
    np.testing.assert_allclose((r2, t2, p2), (r, t, p), atol=1e-12)


def test_sibling_of_a_known_point():
    # oracle: push through Cartesian by hand; Yin (2, pi/2, pi/4) is (sqrt2, sqrt2, 0),
    # whose Yang preimage under (x,y,z) -> (-x, z, y) is (-sqrt2, 0, sqrt2)
    r, t, p = sibling_coords(ChartId.YIN, 2.0, np.pi / 2, np.pi / 4)
    assert np.allclose((r, t, p), (2.0, np.pi / 4, np.pi))
    assert np.allclose(chart_to_cartesian(ChartId.YANG, r, t, p), chart_to_cartesian(ChartId.YIN, 2.0, np.pi / 2, np.pi / 4))


def test_sibling_is_an_involution(rng):
    t, p = rng.uniform(np.pi / 4, 3 * np.pi / 4, 500), rng.uniform(np.pi / 4, 7 * np.pi / 4, 500)
    r = rng.uniform(1, 2, 500)
    back = sibling_coords(ChartId.YANG, *sibling_coords(ChartId.YIN, r, t, p))
    np.testing.assert_allclose(back, (r, t, p), atol=1e-12)


def test_sibling_on_yang_axis_is_ambiguous():
    # Cartesian (0, r, 0) lies on the Yang polar axis
    with pytest.raises(PoleAmbiguityError):
        sibling_coords(ChartId.YIN, 1.5, np.pi / 2, np.pi / 2)


def test_locate_cell():
    g = make_grid(ShellExtents(1, 2, 0.1), GridSpec(4, 6, 8))
    c = tuple(a.centers[i] for a, i in zip(g.axes, (1, 2, 3)))
    idx, off = locate_cell(g, c)
    assert idx == (1, 2, 3) and np.allclose(off, 0.5)
    face = (g.r.faces[1], g.theta.faces[1], g.phi.faces[1])
    idx, off = locate_cell(g, face)
    assert idx == (0, 0, 0) and np.allclose(off, 1.0)
    with pytest.raises(OutOfDomainError):
        locate_cell(g, (2.5, 1.0, 1.0))


def test_locate_cell_round_trip(rng):
    g = make_grid(ShellExtents(1, 2, 0.1), GridSpec(5, 7, 9))
    for _ in range(200):
        p = tuple(rng.uniform(a.faces[0], a.faces[-1]) for a in g.axes)
        q = cell_point(g, *locate_cell(g, p))
        np.testing.assert_allclose(q, p, rtol=0, atol=1e-13)


def test_invalid_extents_rejected():
    with pytest.raises(GeometryError):
        ShellExtents(2, 1, 0.1)
    with pytest.raises(GeometryError):
        ShellExtents(1, 2, -0.1)


def test_cell_diameter_shrinks_with_refinement():
    ext = ShellExtents(1, 2, 0.1)
    d1 = max_cell_diameter(make_grid(ext, GridSpec(4, 12, 24)))
    d2 = max_cell_diameter(make_grid(ext, GridSpec(8, 24, 48)))
    assert 1.9 < d1 / d2 < 2.1
