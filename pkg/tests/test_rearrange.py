import numpy as np
import pytest

from pspec.manifold import (
    beta,
    build_icosphere,
    cap_radius,
    hemisphere_domain,
    total_measure,
)
from pspec.isoperim import domain_bump_battery
from pspec.pspectral import ScalarField, coordinate_field, dirichlet_eigen
from pspec.rearrange import (
    coarea_check,
    distribution,
    lp_equimeasurability,
    polya_szego_check,
    symmetrize,
)


def quadratic_field(mesh):
    # fixed coefficients so the same function lives on every refinement level
    x = mesh.vertices
    q = np.array([[0.3, -0.2, 0.1], [-0.2, 0.5, 0.15], [0.1, 0.15, -0.8]])
    lin = x @ np.array([0.4, -1.1, 0.7])
    return ScalarField(mesh, lin + np.einsum("vi,ij,vj->v", x, q, x))


def positive_part(field):
    return ScalarField(field.mesh, np.maximum(field.values, 0.0))


# ---------------------------------------------------------------------------
# distribution


def test_distribution_constant_field(ico3):
    c, total = 0.7, total_measure(ico3)
    prof = distribution(ScalarField(ico3, np.full(len(ico3.vertices), c)))
    assert prof.measure_above(c - 1e-9) == pytest.approx(total, rel=1e-13)
    # right-continuous: at c the strict superlevel set is empty
    assert abs(prof.measure_above(c)) <= 1e-12 * total
    assert abs(prof.measure_above(c + 1.0)) <= 1e-12 * total


def test_distribution_monotone_shape(ico3, rng):
    prof = distribution(ScalarField(ico3, rng.normal(size=len(ico3.vertices))))
    assert (np.diff(prof.thresholds) > 0).all()
    assert (np.diff(prof.measures) <= 0).all()
    assert prof.measure_above(prof.thresholds[0] - 1.0) == pytest.approx(
        prof.total, rel=1e-13
    )


def test_distribution_support_mass_exact(ico3):
    z = coordinate_field(ico3)
    zp = positive_part(z)
    support = float(ico3.vertex_measure[z.values > 0].sum())
    assert distribution(zp).measure_above(0.0) == pytest.approx(support, rel=1e-13)


def test_distribution_of_z_matches_cap_areas(ico4):
    # lumped superlevel mass of z approximates the area 2*pi*(1-t) away
    # from vertex rings
    prof = distribution(coordinate_field(ico4))
    for t in (-0.6, -0.2, 0.3, 0.7):
        assert prof.measure_above(t) == pytest.approx(2 * np.pi * (1 - t), rel=0.015)


def test_distribution_staircase_brackets_equator_area():
    # a vertex ring sits exactly at z = 0, so the right-continuous staircase
    # jumps across the true hemisphere area by the ring collar
    m = build_icosphere(5)
    prof = distribution(coordinate_field(m))
    lo, hi = prof.measure_above(0.0), prof.measure_above(-1e-12)
    assert lo <= 2 * np.pi <= hi
    assert lo == pytest.approx(2 * np.pi, rel=0.02)
    assert hi == pytest.approx(2 * np.pi, rel=0.02)


# ---------------------------------------------------------------------------
# symmetrize


def test_symmetrize_distinct_values_against_reference(ico2, rng):
    u = rng.uniform(0.5, 3.0, size=len(ico2.vertices))  # positive, no ties
    assert len(np.unique(u)) == len(u)
    b = beta(ico2)
    prof = symmetrize(ScalarField(ico2, u), b)

    order = np.argsort(-u)
    radii = cap_radius(np.cumsum(ico2.vertex_measure[order]) / b, 2)
    np.testing.assert_allclose(prof.knots[1:], radii, atol=1e-12)
    np.testing.assert_allclose(prof.values[1:], u[order], atol=0)
    assert prof.values[0] == u.max()


def test_symmetrize_constant_covers_model_sphere(ico3):
    c = 1.3
    prof = symmetrize(ScalarField(ico3, np.full(len(ico3.vertices), c)), beta(ico3))
    # the inverse cap map is flat at the far pole, so rounding in the
    # accumulated mass costs sqrt(eps) in the radius
    assert prof.support_radius == pytest.approx(np.pi, abs=1e-6)
    r = np.linspace(0.0, np.pi, 50)
    np.testing.assert_allclose(prof.value_at(r), c, atol=1e-12)


def test_symmetrize_idempotent_on_radial_data(ico4):
    # z+ is already a decreasing cap function; its profile must reproduce
    # cos(r) on the upper cap within one mesh edge
    zp = positive_part(coordinate_field(ico4))
    prof = symmetrize(zp, beta(ico4))
    r = np.linspace(0.01, np.pi - 0.01, 300)
    dev = np.abs(prof.value_at(r) - np.maximum(np.cos(r), 0.0)).max()
    assert dev <= ico4.edge_lengths.max()


def test_symmetrize_profile_monotone_and_max(ico3, rng):
    f = ScalarField(ico3, rng.normal(size=len(ico3.vertices)))
    prof = symmetrize(f, beta(ico3))
    assert (np.diff(prof.knots) >= 0).all()
    assert (np.diff(prof.values) <= 0).all()
    assert prof.values[0] == f.values.max()


def test_symmetrize_rejects_nonpositive(ico3):
    with pytest.raises(ValueError):
        symmetrize(ScalarField(ico3, -np.ones(len(ico3.vertices))), 1.0)


def test_symmetrize_beta_above_one_warns(ico3):
    zp = positive_part(coordinate_field(ico3))
    with pytest.warns(UserWarning):
        symmetrize(zp, 1.2)


def test_symmetrize_overflow_error(ico3):
    c = ScalarField(ico3, np.ones(len(ico3.vertices)))
    with pytest.raises(ValueError, match="exceeds the model sphere"):
        symmetrize(c, 0.5)


# ---------------------------------------------------------------------------
# equimeasurability


def test_equimeasurability_constant_exact(ico3):
    c = ScalarField(ico3, np.full(len(ico3.vertices), 0.7))
    b = beta(ico3)
    chk = lp_equimeasurability(c, symmetrize(c, b), b, 2.0)
    assert abs(chk.rel_gap) <= 1e-10


def test_equimeasurability_zplus_analytic(ico4):
    zp = positive_part(coordinate_field(ico4))
    b = beta(ico4)
    chk = lp_equimeasurability(zp, symmetrize(zp, b), b, 2.0)
    assert abs(chk.rel_gap) <= 0.01
    assert chk.lhs == pytest.approx(2 * np.pi / 3, rel=0.01)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_equimeasurability_random_small_gap(ico3, p):
    f = quadratic_field(ico3)
    b = beta(ico3)
    chk = lp_equimeasurability(f, symmetrize(f, b), b, p)
    assert abs(chk.rel_gap) <= 0.01


def test_equimeasurability_gap_shrinks_under_refinement(ico3, ico4):
    gaps = []
    for m in (ico3, ico4):
        f = quadratic_field(m)
        b = beta(m)
        gaps.append(abs(lp_equimeasurability(f, symmetrize(f, b), b, 3.0).rel_gap))
    assert gaps[1] < gaps[0]


def test_eigenfunction_equimeasurability(ico3):
    res = dirichlet_eigen(hemisphere_domain(ico3), 2.0)
    b = beta(ico3)
    chk = lp_equimeasurability(res.field, symmetrize(res.field, b), b, 2.0)
    assert abs(chk.rel_gap) <= 0.01


# ---------------------------------------------------------------------------
# energy comparison


def test_polya_szego_equality_on_radial_field(ico4):
    zp = positive_part(coordinate_field(ico4))
    chk = polya_szego_check(zp, beta(ico4), 2.0)
    assert abs(chk.rel_margin) <= 0.01
    assert chk.lhs > 0 and chk.rhs > 0


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_polya_szego_bump_battery(ico3, p):
    rng = np.random.default_rng(7)
    hemi = hemisphere_domain(ico3)
    b = beta(ico3)
    margins = [
        polya_szego_check(f, b, p).rel_margin
        for f in domain_bump_battery(hemi, rng, 10)
    ]
    assert min(margins) >= -0.01


def test_polya_szego_eigenfunction_near_equality(ico4):
    res = dirichlet_eigen(hemisphere_domain(ico4), 2.0)
    b = beta(ico4)
    chk = polya_szego_check(res.field, b, 2.0)
    assert chk.rel_margin >= -0.01
    assert 0.97 <= b * chk.rhs / chk.lhs <= 1.0


# ---------------------------------------------------------------------------
# coarea


def test_coarea_z_analytic(ico4):
    chk = coarea_check(coordinate_field(ico4))
    assert chk.rel_err <= 0.01
    assert chk.lhs == pytest.approx(np.pi**2, rel=0.01)
    assert chk.rhs == pytest.approx(np.pi**2, rel=0.01)


def test_coarea_rejects_constant(ico3):
    with pytest.raises(ValueError, match="constant"):
        coarea_check(ScalarField(ico3, np.ones(len(ico3.vertices))))


def test_coarea_random_error_shrinks(ico3, ico4):
    errs = [coarea_check(quadratic_field(m)).rel_err for m in (ico3, ico4)]
    assert errs[0] <= 0.02
    assert errs[1] < errs[0]
