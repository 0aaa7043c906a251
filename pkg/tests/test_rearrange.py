import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from robintalenti.geometry import make_domain, mesh_generate
from robintalenti.radial import radial_solve
from robintalenti.rearrange import (FEM_LEVELS, LorentzIndex, MonotoneProfile, WeightedSamples,
                                    decreasing_rearrangement, distribution_function,
                                    lorentz_norm, p1_distribution, product_integral,
                                    read_profile_csv, schwarz_profile, source_rearrangement,
                                    write_profile_csv)

values = st.lists(st.floats(0.0, 10.0, allow_nan=False), min_size=1, max_size=30)


@st.composite
def step_fields(draw, min_size=1, max_size=30):
    n = draw(st.integers(min_size, max_size))
    v = draw(st.lists(st.floats(0.0, 10.0), min_size=n, max_size=n))
    w = draw(st.lists(st.floats(0.01, 5.0), min_size=n, max_size=n))
    return WeightedSamples(np.array(v), np.array(w))


def brute_mu(field, t):
    return float(field.weights[field.values > t].sum())


# ---------------------------------------------------------------- spec examples


def test_indicator_distribution():
    mu = distribution_function(WeightedSamples([1.0], [2.0]))
    assert mu(0.0) == 2.0 and mu(0.999) == 2.0 and mu(1.0) == 0.0 and mu(3.0) == 0.0
    assert mu(-1.0) == 2.0
    ustar = decreasing_rearrangement(mu)
    assert ustar(0.0) == 1.0 and ustar(1.999) == 1.0 and ustar(2.0) == 0.0


def test_constant_distribution():
    mu = distribution_function(WeightedSamples([3.0, 3.0], [1.0, 0.5]))
    assert mu(2.999) == 1.5 and mu(3.0) == 0.0


def test_disk_solution_distribution():
    fstar = source_rearrangement([1.0], [math.pi])
    v = radial_solve(2, 1.0, fstar, 0.5, 512)
    mu = distribution_function(v)
    assert mu(1.1) == pytest.approx(0.6 * math.pi, rel=1e-10)
    assert mu(0.5) == pytest.approx(math.pi, rel=1e-14)


def test_affine_distribution_inverse():
    mu = MonotoneProfile([0.0, 1.0, 1.25], [math.pi, math.pi, 0.0], "linear", math.pi)
    ustar = decreasing_rearrangement(mu)
    s = np.linspace(0, math.pi, 101)[:-1]
    np.testing.assert_allclose(ustar(s), 1.25 - s / (4 * math.pi), rtol=1e-14)
    sharp = schwarz_profile(ustar, 2)
    rho = np.linspace(0, 0.99, 50)
    np.testing.assert_allclose(sharp(rho), 1.25 - rho**2 / 4, rtol=1e-13)
    assert sharp.radius == pytest.approx(1.0)


def test_schwarz_of_indicator_and_constant():
    ustar = decreasing_rearrangement(distribution_function(WeightedSamples([1.0], [math.pi])))
    sharp = schwarz_profile(ustar, 2)
    assert np.all(sharp(np.linspace(0, 0.999, 20)) == 1.0)
    const = schwarz_profile(MonotoneProfile([0.0, 2.0], [0.7, 0.0], "step"), 3)
    assert np.all(const(np.linspace(0, 0.7, 20)) == 0.7)


@pytest.mark.parametrize("idx,expected", [(LorentzIndex(2, 1), 4.0), (LorentzIndex(2, 2), 2.0),
                                          (LorentzIndex(2, math.inf), 4.0)])
def test_lorentz_indicator(idx, expected):
    mu = distribution_function(WeightedSamples([1.0], [4.0]))
    assert lorentz_norm(mu, idx) == pytest.approx(expected, rel=1e-14)


def test_lorentz_zero_function():
    mu = distribution_function(WeightedSamples([0.0, 0.0], [1.0, 2.0]))
    for idx in (LorentzIndex(1, 1), LorentzIndex(0.5, 2), LorentzIndex(3, math.inf)):
        assert lorentz_norm(mu, idx) == 0.0


def test_lorentz_sup_is_verbatim():
    # sup_t t^p mu(t) for mu(t) = 1 - t on [0,1], p = 2: maximum at t = 2/3
    mu = MonotoneProfile([0.0, 1.0], [1.0, 0.0], "linear")
    assert lorentz_norm(mu, LorentzIndex(2, math.inf)) == pytest.approx(4 / 27, rel=1e-14)


def test_lorentz_linear_profile_closed_form():
    # mu(t) = 1 - t: L^{p,1} norm is p * B(1, 1/p + 1) = p / (1/p + 1)
    mu = MonotoneProfile([0.0, 1.0], [1.0, 0.0], "linear")
    for p in (0.25, 0.5, 1.0, 3.0):
        assert lorentz_norm(mu, LorentzIndex(p, 1)) == pytest.approx(p / (1 / p + 1), rel=1e-13)


def test_lorentz_index_validation():
    with pytest.raises(ValueError):
        LorentzIndex(0.0, 1.0)
    with pytest.raises(ValueError):
        LorentzIndex(1.0, -2.0)


def test_source_rearrangement_examples():
    one = source_rearrangement([1.0], [2.5])
    assert one(0.0) == 1.0 and one(2.49) == 1.0 and one.x[-1] == 2.5
    r = 0.2
    ex = source_rearrangement([1.0, 0.0], [math.pi, math.pi * r * r])
    assert ex(math.pi * 0.999) == 1.0 and ex(math.pi) == 0.0
    assert ex.x[-1] == pytest.approx(math.pi * (1 + r * r))
    two = source_rearrangement([1.0, 2.0], [3.0, 1.0])
    np.testing.assert_array_equal(two.x, [0.0, 1.0, 4.0])
    np.testing.assert_array_equal(two.y, [2.0, 1.0, 0.0])
    assert two.integral() == 5.0
    with pytest.raises(ValueError):
        source_rearrangement([-1.0], [1.0])


def test_negative_field_rejected():
    with pytest.raises(ValueError):
        distribution_function(WeightedSamples([-0.5, 1.0], [1.0, 1.0]))


def test_profile_validation():
    with pytest.raises(ValueError):
        MonotoneProfile([0.0, 1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        MonotoneProfile([1.0, 0.0], [1.0, 0.0])
    with pytest.raises(ValueError):
        MonotoneProfile([0.0, 1.0], [1.0, -1.0])


def test_profile_csv_roundtrip(tmp_path):
    prof = MonotoneProfile([0.0, 0.3, 1.7], [2.0, 1.0 / 3.0, 0.0], "linear")
    path = tmp_path / "p.csv"
    write_profile_csv(prof, path)
    assert path.read_text().splitlines()[0] == "x,value"
    back = read_profile_csv(path)
    np.testing.assert_array_equal(back.x, prof.x)
    np.testing.assert_array_equal(back.y, prof.y)


# ---------------------------------------------------------------- P1 areas


def _clip_area(tri, vals, t):
    """Area of {linear interpolant > t} in a triangle by polygon clipping (shoelace)."""
    pts = []
    for i in range(3):
        p, q = tri[i], tri[(i + 1) % 3]
        a, b = vals[i] - t, vals[(i + 1) % 3] - t
        if a > 0:
            pts.append(p)
        if (a > 0) != (b > 0):
            pts.append(p + (q - p) * a / (a - b))
    if len(pts) < 3:
        return 0.0
    x, y = np.array(pts).T
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def test_p1_distribution_matches_clipping():
    mesh = mesh_generate(make_domain("ellipse", 1.0, 0.6), 0.25)
    rng = np.random.default_rng(0)
    u = rng.uniform(0.0, 2.0, mesh.n_vertices)
    mu = p1_distribution(mesh.vertices, mesh.triangles, u)
    # exact at the sampled levels (nodal values and points between them)
    for t in mu.x[1:-1:max(1, len(mu.x) // 25)]:
        ref = sum(_clip_area(mesh.vertices[tri], u[tri], t) for tri in mesh.triangles)
        assert mu(t) == pytest.approx(ref, rel=1e-9, abs=1e-13)


def test_p1_distribution_capped_levels_close_to_exact():
    mesh = mesh_generate(make_domain("ellipse", 1.4, 0.7), 0.02)
    x, y = mesh.vertices.T
    u = 1.25 - (x**2 + 4 * y**2) / 4 + 0.05 * x
    u = u + 1e-4 * np.random.default_rng(1).random(len(u))  # break the ring symmetry ties
    exact = p1_distribution(mesh.vertices, mesh.triangles, u)
    capped = p1_distribution(mesh.vertices, mesh.triangles, u, max_levels=FEM_LEVELS)
    assert len(capped.x) < len(exact.x)
    t = np.linspace(0.0, u.max(), 20001)
    assert np.max(np.abs(exact(t) - capped(t))) < 1e-4 * mesh.area
    assert capped(0.0) == exact(0.0) and capped(u.max()) == 0.0


def test_p1_linear_field_exact():
    mesh = mesh_generate(make_domain("rectangle", 1.0, 1.0), 0.1)
    u = mesh.vertices[:, 0] + 0.5  # 0..1 across the square
    mu = p1_distribution(mesh.vertices, mesh.triangles, u)
    t = np.linspace(0, 1, 37)
    np.testing.assert_allclose(mu(t), 1.0 - t, atol=1e-14)


# ---------------------------------------------------------------- properties


@given(step_fields())
def test_equidistribution(field):
    mu = distribution_function(field)
    ustar = decreasing_rearrangement(mu)
    back = distribution_function(ustar)
    for t in np.unique(np.concatenate([[0.0], field.values])):
        assert mu(t) == pytest.approx(brute_mu(field, t), rel=1e-12, abs=1e-12)
        assert back(t) == pytest.approx(mu(t), rel=1e-12, abs=1e-12)


@given(step_fields(), st.sampled_from([1.0, 2.0, 4.0]))
def test_lp_preservation(field, p):
    direct = float(np.sum(field.weights * field.values**p)) ** (1 / p)
    ustar = decreasing_rearrangement(distribution_function(field))
    assert ustar.lp_norm(p) == pytest.approx(direct, rel=1e-10, abs=1e-300)


@given(step_fields(min_size=2), st.data())
def test_hardy_littlewood(field, data):
    n = len(field.values)
    g = np.array(data.draw(st.lists(st.floats(0.0, 10.0), min_size=n, max_size=n)))
    lhs = float(np.sum(field.weights * field.values * g))
    fstar = decreasing_rearrangement(distribution_function(field))
    gstar = decreasing_rearrangement(distribution_function(WeightedSamples(g, field.weights)))
    assert lhs <= product_integral(fstar, gstar) * (1 + 1e-12) + 1e-12


@given(step_fields())
def test_level_truncation_identity(field):
    mu = distribution_function(field)
    ustar = decreasing_rearrangement(mu)
    for t in np.unique(field.values):
        above = field.values > t
        lhs = float(np.sum(field.weights[above] * field.values[above]))
        assert ustar.cumulative(mu(t)) == pytest.approx(lhs, rel=1e-12, abs=1e-12)


@given(step_fields(), st.floats(0.3, 5.0))
def test_lorentz_pp_equals_lp(field, p):
    direct = float(np.sum(field.weights * field.values**p)) ** (1 / p)
    got = lorentz_norm(distribution_function(field), LorentzIndex(p, p))
    assert got == pytest.approx(direct, rel=1e-10, abs=1e-300)


@given(step_fields())
def test_rearrangement_idempotent(field):
    ustar = decreasing_rearrangement(distribution_function(field))
    again = decreasing_rearrangement(distribution_function(ustar))
    s = np.linspace(0, field.measure, 97)
    np.testing.assert_array_equal(again(s), ustar(s))


@given(st.lists(st.floats(0.0, 5.0), min_size=1, max_size=8),
       st.lists(st.floats(0.05, 3.0), min_size=8, max_size=8))
def test_source_rearrangement_mass(vals, meas):
    meas = meas[:len(vals)]
    f = source_rearrangement(vals, meas)
    assert f.integral() == pytest.approx(float(np.dot(vals, meas)), rel=1e-12, abs=1e-14)
    assert f.x[-1] == pytest.approx(sum(meas), rel=1e-14)


def test_fem_distribution_counts_boundary_slivers():
    from robintalenti import fem
    from robintalenti.geometry import Source

    d = make_domain("disk", 1.0)
    sol = fem.solve(fem.assemble(mesh_generate(d, 0.1), 1.0, Source.const(d, 1.0)))
    mu = distribution_function(sol)
    assert mu.total_mass == pytest.approx(math.pi, rel=1e-14)
    assert mu(0.0) == pytest.approx(math.pi, rel=1e-14)
    assert mu(0.0) - mu(fem.boundary_min(sol) - 1e-9) == pytest.approx(0.0, abs=1e-12)
    assert mu(sol.max) == 0.0
