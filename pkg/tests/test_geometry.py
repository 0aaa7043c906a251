import math

import numpy as np
import pytest

from robintalenti.geometry import (Mesh, Source, isoperimetric_constant, make_domain,
                                   mesh_generate, read_mesh, schwarz_ball, unit_ball_volume,
                                   write_mesh)

# perimeter of the ellipse with semi-axes sqrt(2), 1/sqrt(2); scipy.integrate.quad of the arc length
ELLIPSE_PERIMETER = 6.850767435924002


def test_unit_ball_volume():
    assert unit_ball_volume(2) == pytest.approx(math.pi, rel=1e-15)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3, rel=1e-15)
    assert unit_ball_volume(4) == pytest.approx(math.pi**2 / 2, rel=1e-15)


def test_isoperimetric_constant_plane():
    # Per^2 >= 4 pi |E| in the plane
    assert isoperimetric_constant(2) == pytest.approx(4 * math.pi, rel=1e-15)


@pytest.mark.parametrize("kind,params,dim,measure,perimeter", [
    ("disk", (1.0,), None, math.pi, 2 * math.pi),
    ("ball", (1.0,), 3, 4 * math.pi / 3, 4 * math.pi),
    ("rectangle", (2.0, 0.5), None, 1.0, 5.0),
    ("ellipse", (math.sqrt(2), 1 / math.sqrt(2)), None, math.pi, ELLIPSE_PERIMETER),
])
def test_closed_forms(kind, params, dim, measure, perimeter):
    d = make_domain(kind, *params, dimension=dim)
    assert d.measure == pytest.approx(measure, rel=1e-12)
    assert d.perimeter == pytest.approx(perimeter, rel=1e-12)


def test_union_additivity():
    d = make_domain("union", components=[make_domain("disk", 1.0), make_domain("disk", 0.1)])
    assert d.measure == pytest.approx(math.pi * 1.01, rel=1e-12)
    assert d.perimeter == pytest.approx(2 * math.pi * 1.1, rel=1e-12)
    a, b = d.parts()
    assert math.dist(a.center, b.center) > a.radius + b.radius


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        make_domain("disk", -1.0)
    with pytest.raises(ValueError):
        make_domain("rectangle", 1.0, 0.0)
    with pytest.raises(ValueError):
        make_domain("polygon", 1.0)
    with pytest.raises(ValueError):
        make_domain("union", components=[make_domain("disk", 1.0, center=(0, 0)),
                                         make_domain("disk", 0.5, center=(1.2, 0))])


@pytest.mark.parametrize("d", [
    make_domain("disk", 2.0), make_domain("rectangle", 1.0, 3.0), make_domain("ellipse", 2.0, 0.5),
    make_domain("ball", 1.5, dimension=3),
    make_domain("union", components=[make_domain("disk", 1.0), make_domain("disk", 0.3)]),
])
def test_isoperimetric_inequality(d):
    n = d.dimension
    bound = n * unit_ball_volume(n) ** (1 / n) * d.measure ** ((n - 1) / n)
    if d.is_ball:
        assert d.perimeter == pytest.approx(bound, rel=1e-12)
    else:
        assert d.perimeter > bound * (1 + 1e-6)


def test_schwarz_ball():
    assert schwarz_ball(make_domain("disk", 1.0)).radius == pytest.approx(1.0, rel=1e-15)
    u = make_domain("union", components=[make_domain("disk", 1.0), make_domain("disk", 0.2)])
    assert schwarz_ball(u).radius == pytest.approx(math.sqrt(1.04), rel=1e-14)
    sq = make_domain("rectangle", 1.0, 1.0)
    b = schwarz_ball(sq)
    assert b.radius == pytest.approx(0.5641895835477563, rel=1e-14)
    assert b.measure == sq.measure
    assert schwarz_ball(b) == b
    assert schwarz_ball(make_domain("ball", 2.0, dimension=3)).radius == pytest.approx(2.0)


def test_disk_mesh_coarse():
    m = mesh_generate(make_domain("disk", 1.0), 0.5)
    m.check()
    assert len(m.vertices) == 1 + 6 * (1 + 2 + 3 + 4)  # four rings
    assert np.all(m.signed_areas() > 0)


def test_square_mesh_counts():
    m = mesh_generate(make_domain("rectangle", 1.0, 1.0), 0.25)
    m.check()
    assert len(m.triangles) == 32
    assert m.euler_characteristics() == [1]
    assert m.area == pytest.approx(1.0, abs=1e-14)


def test_union_mesh_components():
    d = make_domain("union", components=[make_domain("disk", 1.0), make_domain("disk", 0.1)])
    m = mesh_generate(d, 0.05)
    m.check()
    assert m.n_components() == 2
    assert m.n_boundary_loops() == 2
    assert sorted(set(m.tri_component.tolist())) == [0, 1]


@pytest.mark.parametrize("d", [make_domain("disk", 1.0), make_domain("ellipse", 1.5, 0.6)])
def test_boundary_vertices_on_curve(d):
    m = mesh_generate(d, 0.1)
    x, y = m.vertices[m.boundary_vertices].T
    a, b = (d.params[0], d.params[0]) if d.kind == "disk" else d.params
    np.testing.assert_allclose((x / a) ** 2 + (y / b) ** 2, 1.0, atol=1e-14)


@pytest.mark.parametrize("d", [make_domain("disk", 1.0), make_domain("ellipse", 1.5, 0.6)])
def test_area_refinement(d):
    errs = [abs(mesh_generate(d, h).area - d.measure) for h in (0.1, 0.05, 0.025)]
    assert errs[0] / errs[1] >= 3 and errs[1] / errs[2] >= 3


def test_realized_h_never_exceeds_target():
    for h in (0.3, 0.07, 0.02):
        assert mesh_generate(make_domain("disk", 1.0), h).h <= h
        assert mesh_generate(make_domain("rectangle", 1.0, 0.7), h).h <= h


def test_mesh_errors():
    with pytest.raises(ValueError):
        mesh_generate(make_domain("ball", 1.0, dimension=3), 0.1)
    d = make_domain("union", components=[make_domain("disk", 1.0), make_domain("disk", 0.1)])
    with pytest.raises(ValueError):
        mesh_generate(d, 0.2)


def test_mesh_file_roundtrip(tmp_path):
    m = mesh_generate(make_domain("ellipse", 1.0, 0.5), 0.1)
    path = tmp_path / "mesh.txt"
    write_mesh(m, path)
    first = path.read_text().splitlines()[0]
    assert first == f"VERTICES {m.n_vertices}"
    back = read_mesh(path, m.h)
    np.testing.assert_array_equal(back.vertices, m.vertices)
    np.testing.assert_array_equal(back.triangles, m.triangles)
    np.testing.assert_array_equal(back.boundary_edges, m.boundary_edges)


def test_mesh_check_catches_flipped_triangle():
    m = mesh_generate(make_domain("rectangle", 1.0, 1.0), 0.5)
    t = m.triangles.copy()
    t[0] = t[0][[0, 2, 1]]
    with pytest.raises(ValueError):
        Mesh(m.vertices.copy(), t, m.boundary_edges.copy(), m.h).check()


def test_source_pieces():
    d = make_domain("union", components=[make_domain("disk", 1.0), make_domain("disk", 0.5)])
    s = Source.indicator(d, 1, 2.0)
    assert s.values == (0.0, 2.0)
    assert s.total(d) == pytest.approx(2.0 * math.pi * 0.25)
    with pytest.raises(ValueError):
        Source.indicator(d, 2)
    with pytest.raises(ValueError):
        Source((-1.0,))


@pytest.mark.parametrize("h", [0.2, 0.05])
def test_sliver_areas_close_the_measure(h, disk, ellipse, two_disks, square):
    for d in (disk, ellipse, two_disks):
        m = mesh_generate(d, h)
        assert np.all(m.boundary_slivers > 0)
        assert m.area + m.boundary_slivers.sum() == pytest.approx(d.measure, rel=1e-14)
    assert np.all(mesh_generate(square, h).boundary_slivers == 0.0)


def test_outer_rings_keep_boundary_count(disk):
    m = mesh_generate(disk, 0.05)  # 20 rings: the outer 5 carry 120 vertices each
    r = np.round(np.hypot(*m.vertices.T) * 20).astype(int)
    counts = np.bincount(r)
    assert list(counts[16:]) == [120] * 5
    assert list(counts[1:16]) == [6 * k for k in range(1, 16)]
