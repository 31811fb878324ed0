import numpy as np
import pytest

import pspec.harness as harness
from pspec.harness import chain_audit, pinching_sweep, sphere_comparison
from pspec.manifold import (
    build_ellipsoid,
    build_icosphere,
    build_interval,
    hemisphere_domain,
    interior_domain,
)
from pspec.pspectral import SolverOptions, solve_radial_1d

IDENTITY_STEPS = ("distribution_derivative", "mass_transport", "radial_equality")
INEQUALITY_STEPS = ("energy_slope_bound", "energy_comparison")


# ---------------------------------------------------------------------------
# eigenvalue comparison records


def test_comparison_round_sphere(ico3):
    rec = sphere_comparison(ico3, 2.0)
    assert rec.converged
    assert rec.equality_case
    assert rec.lam_model == pytest.approx(2.0, abs=1e-6)
    assert rec.ratio == pytest.approx(1.0, rel=0.02)
    assert rec.diameter == pytest.approx(np.pi, rel=0.02)


def test_comparison_stretched_family_above_one():
    m = build_ellipsoid(1.2, 3)
    for p in (2.0, 3.0):
        rec = sphere_comparison(m, p)
        assert rec.ratio > 1.0
        assert not rec.equality_case
        assert rec.min_curvature >= 0.99


def test_comparison_custom_reference(ico2):
    rec = sphere_comparison(ico2, 2.0, lam_model=1.0)
    assert rec.ratio == rec.lam_mesh


def test_comparison_requires_curvature_certificate():
    flat = build_ellipsoid(1.5, 2, normalize=False)
    with pytest.raises(ValueError, match="curvature"):
        sphere_comparison(flat, 2.0)
    from pspec.manifold import Mesh

    bare = Mesh(2, *_icosahedron_arrays())
    with pytest.raises(ValueError, match="certificate"):
        sphere_comparison(bare, 2.0)


def _icosahedron_arrays():
    m = build_icosphere(1)
    return m.vertices, m.cells


# ---------------------------------------------------------------------------
# proof-chain audit


@pytest.fixture(scope="module")
def audit_l4():
    return chain_audit(hemisphere_domain(build_icosphere(4)), 2.0)


def test_audit_report_shape(audit_l4):
    assert audit_l4.p == 2.0
    assert audit_l4.lam == pytest.approx(2.0, rel=0.02)
    assert len(audit_l4.levels) == 64
    assert [s.name for s in audit_l4.steps] == list(IDENTITY_STEPS[:2]) + [
        "energy_slope_bound",
        "radial_equality",
        "energy_comparison",
    ]
    with pytest.raises(KeyError):
        audit_l4.step("nonexistent")


def test_audit_steps_within_tolerance(audit_l4):
    worst = audit_l4.worst_by_step()
    for name in IDENTITY_STEPS:
        assert abs(worst[name]) <= 0.03, name
    for name in INEQUALITY_STEPS:
        assert worst[name] <= 0.03, name


def test_audit_radial_equality_is_identity(audit_l4):
    assert abs(audit_l4.step("radial_equality").worst) <= 1e-10
    assert np.abs(audit_l4.step("radial_equality").violations).max() <= 1e-10


def test_audit_other_exponent(ico3):
    # coarser mesh, looser bound; the chain itself must still hold
    report = chain_audit(hemisphere_domain(ico3), 1.5)
    assert abs(report.step("mass_transport").worst) <= 0.03
    assert report.step("energy_comparison").worst <= 0.03
    assert abs(report.step("radial_equality").worst) <= 1e-10


def test_audit_rejects_bad_inputs(ico2):
    with pytest.raises(ValueError, match="converged"):
        chain_audit(hemisphere_domain(ico2), 3.0, SolverOptions(max_iters=1))
    with pytest.raises(ValueError, match="closed"):
        chain_audit(interior_domain(build_interval(20)), 2.0)


# ---------------------------------------------------------------------------
# family sweep


def test_pinching_sweep_small():
    recs = pinching_sweep([1.0, 1.2], [2.0], level=3)
    assert len(recs) == 2
    assert recs[0].diameter <= recs[1].diameter  # sorted by diameter
    assert recs[0].aspect == 1.2 and recs[1].aspect == 1.0
    assert recs[0].ratio > recs[1].ratio
    assert recs[1].equality_case and not recs[0].equality_case
    for r in recs:
        assert not r.failed
        assert r.converged
        assert r.lam_model == pytest.approx(solve_radial_1d(2.0, 2, "hemisphere"))
        assert r.ratio >= 0.98
        d = r.as_dict()
        assert d["aspect"] == r.aspect and d["error"] == ""


def test_pinching_sweep_records_failures(monkeypatch):
    calls = {"n": 0}
    real = harness.closed_eigen

    def flaky(mesh, p, opts=None):
        calls["n"] += 1
        if calls["n"] == 1:
            raise RuntimeError("synthetic solver blowup")
        return real(mesh, p, opts)

    monkeypatch.setattr(harness, "closed_eigen", flaky)
    recs = pinching_sweep([1.0, 1.1], [2.0], level=2)
    assert len(recs) == 2
    failed = [r for r in recs if r.failed]
    assert len(failed) == 1
    assert "blowup" in failed[0].error
    assert np.isnan(failed[0].lam_mesh)
    ok = [r for r in recs if not r.failed]
    assert len(ok) == 1 and ok[0].converged
