import numpy as np
import pytest
import scipy.linalg as sla

from pspec.manifold import (
    build_circle,
    build_icosphere,
    build_interval,
    hemisphere_domain,
    interior_domain,
    superlevel_domain,
    total_measure,
)
from pspec.pspectral import (
    ScalarField,
    SolverOptions,
    check_p,
    closed_eigen,
    constraint_residual,
    coordinate_field,
    dirichlet_eigen,
    nodal_domains,
    project_constraint,
    rayleigh_quotient,
    solve_radial_1d,
    _fem,
)


def pi_p(p):
    return 2.0 * np.pi / (p * np.sin(np.pi / p))


def interval_eigenvalue(p, length=1.0):
    # first Dirichlet eigenvalue of the 1-D p-Laplacian on an interval
    return (p - 1.0) * (pi_p(p) / length) ** p


def dense_p2_eigenvalue(mesh, free=None):
    """Smallest relevant eigenvalue of the linear pair (stiffness, mass)."""
    fem = _fem(mesh)
    K = fem.stiffness.toarray()
    M = np.diag(fem.mass)
    if free is not None:
        K, M = K[np.ix_(free, free)], M[np.ix_(free, free)]
        return float(sla.eigh(K, M, eigvals_only=True)[0])
    return float(sla.eigh(K, M, eigvals_only=True)[1])  # skip the constant mode


# ---------------------------------------------------------------------------
# basics


def test_check_p_bounds():
    assert check_p(2) == 2.0
    with pytest.raises(ValueError, match="1.1"):
        check_p(0.9)
    with pytest.raises(ValueError):
        check_p(11.0)


def test_scalar_field_validation(ico3):
    with pytest.raises(ValueError):
        ScalarField(ico3, np.zeros(3))
    bad = np.zeros(len(ico3.vertices))
    bad[0] = np.nan
    with pytest.raises(ValueError):
        ScalarField(ico3, bad)


def test_rayleigh_constant_is_zero(ico3):
    f = ScalarField(ico3, np.full(len(ico3.vertices), 2.5))
    # per-cell gradients of a constant cancel to rounding noise
    assert rayleigh_quotient(f, ico3, 2.0) <= 1e-25


def test_rayleigh_homogeneity(ico3, rng):
    f = ScalarField(ico3, rng.normal(size=len(ico3.vertices)))
    base = rayleigh_quotient(f, ico3, 3.0)
    for c in (-1.0, 0.5, 10.0):
        g = ScalarField(ico3, c * f.values)
        assert rayleigh_quotient(g, ico3, 3.0) == pytest.approx(base, rel=1e-12)


def test_rayleigh_of_z_near_two(ico4):
    z = coordinate_field(ico4)
    assert rayleigh_quotient(z, ico4, 2.0) == pytest.approx(2.0, rel=0.02)


def test_rayleigh_rejects_zero_field_and_bad_region(ico3, ico2):
    hemi = hemisphere_domain(ico3)
    f = ScalarField(ico3, np.where(ico3.vertices[:, 2] > 0, 0.0, 1.0))
    with pytest.raises(ValueError):
        rayleigh_quotient(f, hemi, 2.0)  # vanishes on the interior
    z = coordinate_field(ico3)
    with pytest.raises(ValueError):
        rayleigh_quotient(z, ico2, 2.0)
    with pytest.raises(ValueError):
        rayleigh_quotient(coordinate_field(build_interval(5), 0), build_interval(5), 2.0)


# ---------------------------------------------------------------------------
# constraint projection and nodal domains


def test_project_constraint_odd_field_unchanged(ico3):
    z = coordinate_field(ico3)
    proj = project_constraint(z, 2.0)
    assert np.abs(proj.values - z.values).max() <= 1e-10


def test_project_constraint_p2_is_weighted_mean(ico3, rng):
    f = ScalarField(ico3, rng.normal(size=len(ico3.vertices)))
    proj = project_constraint(f, 2.0)
    m = ico3.vertex_measure
    mean = float(m @ f.values / m.sum())
    shift = float((f.values - proj.values)[0])
    assert shift == pytest.approx(mean, abs=1e-12)


def test_project_constraint_residual_random_p3(ico3, rng):
    f = ScalarField(ico3, rng.normal(size=len(ico3.vertices)))
    proj = project_constraint(f, 3.0)
    assert constraint_residual(proj, 3.0) <= 1e-10


def test_project_constraint_rejects_constant(ico3):
    with pytest.raises(ValueError):
        project_constraint(ScalarField(ico3, np.ones(len(ico3.vertices))), 2.0)


def test_nodal_domains_coordinate_and_constant(ico3):
    z = coordinate_field(ico3)
    count, labels = nodal_domains(z)
    assert count == 2
    assert (labels[ico3.vertices[:, 2] == 0.0] == -1).all()
    count, labels = nodal_domains(ScalarField(ico3, np.ones(len(ico3.vertices))))
    assert count == 1
    assert (labels >= 0).all()


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_closed_eigenfunction_has_two_nodal_domains(ico3, p):
    res = closed_eigen(ico3, p)
    assert res.converged
    count, _ = nodal_domains(res.field)
    assert count == 2


# ---------------------------------------------------------------------------
# radial shooting oracle


@pytest.mark.parametrize("n", [2, 3, 4])
def test_radial_hemisphere_p2_equals_dimension(n):
    assert solve_radial_1d(2.0, n, "hemisphere") == pytest.approx(n, abs=1e-6)


def test_radial_interval_p2_is_pi_squared():
    assert solve_radial_1d(2.0, 2, "interval") == pytest.approx(np.pi**2, abs=1e-8)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_radial_interval_matches_analytic_family(p):
    assert solve_radial_1d(p, 2, "interval") == pytest.approx(
        interval_eigenvalue(p), rel=1e-10
    )


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_radial_hemisphere_n1_matches_analytic_family(p):
    # the n=1 problem folds out to a Dirichlet interval of length pi
    assert solve_radial_1d(p, 1, "hemisphere") == pytest.approx(
        interval_eigenvalue(p, length=np.pi), rel=1e-9
    )


def test_radial_input_validation():
    with pytest.raises(ValueError):
        solve_radial_1d(2.0, 0, "hemisphere")
    with pytest.raises(ValueError):
        solve_radial_1d(2.0, 2, "disk")


def test_radial_regression_pins():
    # shooting values used as sweep references; guards against drift
    assert solve_radial_1d(1.5, 2, "hemisphere") == pytest.approx(1.723580, rel=2e-5)
    assert solve_radial_1d(3.0, 2, "hemisphere") == pytest.approx(2.172600, rel=2e-5)


# ---------------------------------------------------------------------------
# Dirichlet solver


def test_interval_dirichlet_p2():
    domain = interior_domain(build_interval(120))
    res = dirichlet_eigen(domain, 2.0)
    assert res.converged
    assert res.lam == pytest.approx(np.pi**2, rel=2e-3)


def test_interval_dirichlet_p15_matches_shooting():
    domain = interior_domain(build_interval(120))
    res = dirichlet_eigen(domain, 1.5)
    assert res.lam == pytest.approx(solve_radial_1d(1.5, 2, "interval"), rel=2e-3)


def test_dirichlet_result_contract(ico3):
    hemi = hemisphere_domain(ico3)
    res = dirichlet_eigen(hemi, 2.0)
    assert res.converged and res.lam > 0
    u = res.field.values
    assert (u >= 0).all()
    assert not u[hemi.interior].min() == u[hemi.interior].max()
    assert (u[~hemi.interior] == 0).all()
    # unit p-norm and eigenvalue self-consistency
    mass = float(ico3.vertex_measure @ np.abs(u) ** 2)
    assert mass == pytest.approx(1.0, abs=1e-12)
    assert res.lam == pytest.approx(rayleigh_quotient(res.field, hemi, 2.0), rel=1e-10)


def test_dirichlet_p2_matches_dense_oracle(ico2):
    hemi = hemisphere_domain(ico2)
    res = dirichlet_eigen(hemi, 2.0)
    dense = dense_p2_eigenvalue(ico2, free=hemi.interior_indices)
    assert res.lam == pytest.approx(dense, rel=1e-9)


def test_domain_monotonicity(ico3):
    z = ico3.vertices[:, 2]
    lam_big = dirichlet_eigen(hemisphere_domain(ico3), 2.0).lam
    lam_small = dirichlet_eigen(superlevel_domain(ico3, z, 0.25), 2.0).lam
    assert lam_small >= lam_big - 1e-9


def test_non_convergence_is_flagged(ico2):
    res = dirichlet_eigen(hemisphere_domain(ico2), 3.0, SolverOptions(max_iters=1))
    assert not res.converged
    assert res.lam > 0  # best iterate still reported


# ---------------------------------------------------------------------------
# closed solver


def test_closed_eigen_sphere_p2_matches_dense_oracle(ico2):
    res = closed_eigen(ico2, 2.0)
    assert res.converged
    assert res.lam == pytest.approx(dense_p2_eigenvalue(ico2), rel=1e-9)
    assert res.lam == pytest.approx(2.0, rel=0.02)


def test_closed_eigen_circle_p2():
    m = build_circle(200)
    res = closed_eigen(m, 2.0)
    assert res.lam == pytest.approx(dense_p2_eigenvalue(m), rel=1e-9)
    assert res.lam == pytest.approx(1.0, rel=5e-3)


def test_closed_eigen_circle_p3_analytic():
    # two nodal arcs of length pi, so the interval family applies
    res = closed_eigen(build_circle(600), 3.0)
    assert res.lam == pytest.approx(interval_eigenvalue(3.0, length=np.pi), rel=1e-4)


def test_closed_eigen_contract(ico3):
    res = closed_eigen(ico3, 1.5)
    assert res.converged
    assert res.constraint_residual <= 1e-8 * total_measure(ico3)
    u = res.field.values
    assert u[np.argmax(np.abs(u))] > 0
    mass = float(ico3.vertex_measure @ np.abs(u) ** 1.5)
    assert mass == pytest.approx(1.0, abs=1e-12)
    assert res.lam == pytest.approx(rayleigh_quotient(res.field, ico3, 1.5), rel=1e-10)


def test_closed_eigen_rejects_open_mesh():
    with pytest.raises(ValueError):
        closed_eigen(build_interval(10), 2.0)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_refinement_consistency(p):
    lams = [closed_eigen(build_icosphere(L), p).lam for L in (1, 2, 3)]
    assert abs(lams[2] - lams[1]) < abs(lams[1] - lams[0])


def test_continuation_diagnostics_present(ico2):
    res = closed_eigen(ico2, 3.0)
    assert res.p == 3.0
    assert res.iterations > 0
    assert isinstance(res.diagnostics, dict) and res.diagnostics
