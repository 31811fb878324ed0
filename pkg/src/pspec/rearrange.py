"""Distribution functions, cap symmetrization, and rearrangement checks.

A vertex field is symmetrized by transporting its distribution function
onto concentric geodesic caps of the model unit sphere, after dividing the
measure by the volume ratio beta. The checks in this module confirm the
two defining properties numerically: scaled p-mass is preserved, and the
p-Dirichlet energy does not increase beyond the beta factor.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from .manifold import SPHERE_MEASURE, cap_boundary, cap_radius, cap_volume
from .isoperim import level_boundary_measure, superlevel_measures

_TIE_SCALE = 1e-13
_CHECK_GRID = 256
_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _tie_broken_keys(values):
    # Strictly ordered stand-in values: nudge by index so equal entries
    # become distinct. The nudged values are canonical for thresholds and
    # profile values, since near-equal pairs may swap order under the nudge
    # and only the nudged sequence stays monotone. Scale guards constant
    # and large-offset fields.
    span = float(values.max() - values.min())
    scale = max(span, float(np.abs(values).max()), 1.0)
    return values + np.arange(len(values)) * (_TIE_SCALE * scale)


@dataclass
class DistributionProfile:
    """Superlevel measure t -> mu{u > t} of a vertex field.

    ``thresholds`` are the tie-broken vertex values, strictly increasing;
    ``measures`` are the strict superlevel masses there, decreasing to zero
    at the top vertex. measure_above queries the original (unperturbed)
    values exactly.
    """

    thresholds: np.ndarray
    measures: np.ndarray
    total: float
    dimension: int
    source: object
    _sorted_values: np.ndarray = dc_field(repr=False, default=None)
    _cum_mass: np.ndarray = dc_field(repr=False, default=None)

    def measure_above(self, t):
        """Exact mu{u > t} of the vertex measure, scalar or array t."""
        idx = np.searchsorted(self._sorted_values, t, side="right")
        below = np.where(idx > 0, self._cum_mass[np.maximum(idx - 1, 0)], 0.0)
        out = self.total - below
        return float(out) if np.isscalar(t) else out


def distribution(field):
    """Distribution profile of a field under the lumped vertex measure."""
    u = field.values
    m = field.mesh.vertex_measure
    keys = _tie_broken_keys(u)
    order = np.argsort(-keys, kind="stable")
    cum = np.cumsum(m[order])
    strict = np.concatenate([[0.0], cum[:-1]])
    thresholds = keys[order][::-1].copy()
    measures = strict[::-1].copy()
    assert (np.diff(thresholds) > 0).all(), "tie-broken thresholds not strict"
    assert (np.diff(measures) < 0).all(), "superlevel measure not decreasing"
    asc = np.argsort(u, kind="stable")
    return DistributionProfile(
        thresholds=thresholds,
        measures=measures,
        total=float(m.sum()),
        dimension=field.mesh.dimension,
        source=field,
        _sorted_values=u[asc],
        _cum_mass=np.cumsum(m[asc]),
    )


@dataclass
class RadialProfile:
    """Non-increasing radial function on model-sphere caps.

    Piecewise linear in the cap radius: ``knots`` ascend from 0, ``values``
    never increase. value_at and radius_at_value are the two monotone
    interpolants; the integral helpers weight by the cap boundary measure,
    i.e. they integrate over the model sphere in polar coordinates.
    """

    dimension: int
    knots: np.ndarray
    values: np.ndarray

    @property
    def support_radius(self):
        return float(self.knots[-1])

    def value_at(self, r):
        r = np.minimum(r, self.knots[-1])
        return np.interp(r, self.knots, self.values)

    def radius_at_value(self, t):
        return np.interp(t, self.values[::-1], self.knots[::-1])

    def _interval_quadrature(self, integrand):
        a, b = self.knots[:-1], self.knots[1:]
        half = 0.5 * (b - a)
        r = 0.5 * (a + b)[:, None] + half[:, None] * _GAUSS_NODES[None, :]
        vals = integrand(r.ravel()).reshape(r.shape)
        return float((half * (vals @ _GAUSS_WEIGHTS)).sum())

    def lp_mass(self, p):
        """Integral of value^p over the model sphere (polar coordinates)."""
        n = self.dimension
        return self._interval_quadrature(
            lambda r: self.value_at(r) ** p * cap_boundary(r, n)
        )

    def lp_mass_within(self, p, r_upper):
        """Same integral restricted to the cap of radius r_upper."""
        n = self.dimension
        a = np.minimum(self.knots[:-1], r_upper)
        b = np.minimum(self.knots[1:], r_upper)
        half = 0.5 * (b - a)
        r = 0.5 * (a + b)[:, None] + half[:, None] * _GAUSS_NODES[None, :]
        vals = self.value_at(r.ravel()).reshape(r.shape) ** p * cap_boundary(
            r.ravel(), n
        ).reshape(r.shape)
        return float((half * (vals @ _GAUSS_WEIGHTS)).sum())

    def rows(self):
        """(radius, value) pairs for tabular output."""
        return np.column_stack([self.knots, self.values])


def symmetrize(field, beta):
    """Decreasing cap rearrangement of the positive part of a field.

    Vertex masses are divided by beta before matching cap volumes on the
    model sphere; the field must have a positive part and the scaled
    measure must fit inside the model sphere.
    """
    u = field.values
    m = field.mesh.vertex_measure
    n = field.mesh.dimension
    if not (u > 0).any():
        raise ValueError("field has no positive part to rearrange")
    if beta > 1.0 + 1e-12:
        warnings.warn(
            f"measure ratio {beta} exceeds 1; scaled volumes may overflow "
            "the model sphere",
            stacklevel=2,
        )
    keys = _tie_broken_keys(u)
    order = np.argsort(-keys, kind="stable")
    keep = u[order] > 0
    # profile values stay exact: the nudge only fixes the order, and any
    # near-tie inversions it introduces are clamped monotone here
    vals = np.minimum.accumulate(u[order][keep])
    cum = np.cumsum(m[order][keep]) / beta
    full = SPHERE_MEASURE[n]
    if cum[-1] > full * (1.0 + 1e-9):
        raise ValueError(
            "scaled positive-part measure exceeds the model sphere; "
            "check the measure ratio"
        )
    radii = cap_radius(np.minimum(cum, full), n)
    prof = RadialProfile(
        dimension=n,
        knots=np.concatenate([[0.0], radii]),
        values=np.concatenate([[vals[0]], vals]),
    )
    assert (np.diff(prof.knots) >= 0).all()
    return prof


@dataclass
class EquimeasurabilityCheck:
    lhs: float
    rhs: float
    rel_gap: float


def lp_equimeasurability(field, profile, beta, p):
    """Compare p-masses: positive part of the field vs beta times the cap
    rearrangement on the model sphere. rel_gap is signed, relative to lhs."""
    u = field.values
    m = field.mesh.vertex_measure
    lhs = float(m @ np.where(u > 0, u, 0.0) ** p)
    rhs = beta * profile.lp_mass(p)
    return EquimeasurabilityCheck(lhs, rhs, (lhs - rhs) / lhs)


@dataclass
class EnergyComparisonCheck:
    lhs: float
    rhs: float
    margin: float
    rel_margin: float


def _interp_cap_radii(field, levels, beta):
    """Cap radii matching interpolated superlevel measures at each level.

    The piecewise-linear superlevel measure is used instead of the lumped
    one: its t-derivative is the coarea integrand of the interpolant, so
    the radial slopes below stay free of vertex-mass granularity noise.
    """
    n = field.mesh.dimension
    full = SPHERE_MEASURE[n]
    v = np.minimum(superlevel_measures(field, levels) / beta, full)
    return cap_radius(v, n)


def polya_szego_check(field, beta, p, grid=_CHECK_GRID):
    """Energy comparison: p-Dirichlet energy of the positive part vs beta
    times the energy of its cap rearrangement.

    The rearranged energy integrates |slope|^p over cap shells, with the
    radial profile rebuilt from interpolated superlevel measures on a
    uniform level grid. margin = lhs - beta*rhs must be nonnegative up to
    mesh error; rel_margin divides by lhs.
    """
    from .pspectral import _fem  # local import: avoids cycle at load time

    u = field.values
    if not (u > 0).any():
        raise ValueError("field has no positive part to compare")
    fem = _fem(field.mesh)
    pos = np.where(u > 0, u, 0.0)
    g2 = (fem.gradients(pos) ** 2).sum(axis=1)
    lhs = float(fem.cellw @ g2 ** (p / 2.0))

    umax = float(u.max())
    levels = np.linspace(0.0, umax, grid + 1)
    radii = np.empty(grid + 1)
    radii[:-1] = _interp_cap_radii(field, levels[:-1], beta)
    radii[-1] = 0.0
    n = field.mesh.dimension
    vol = cap_volume(radii, n)
    dv = vol[:-1] - vol[1:]
    dr = radii[:-1] - radii[1:]
    dt = levels[1:] - levels[:-1]
    ok = dr > 0
    slope = np.zeros(grid)
    slope[ok] = dt[ok] / dr[ok]
    rhs = float((slope**p) @ dv)
    margin = lhs - beta * rhs
    return EnergyComparisonCheck(lhs, beta * rhs, margin, margin / lhs)


@dataclass
class CoareaCheck:
    lhs: float
    rhs: float
    rel_err: float


def coarea_check(field, grid=_CHECK_GRID):
    """Total variation two ways: cell gradients vs integrated level measure.

    lhs integrates |grad u| over cells; rhs integrates the level boundary
    measure of the interpolant over a uniform level grid (trapezoid rule,
    with half-panel closures at both ends).
    """
    from .pspectral import _fem

    fem = _fem(field.mesh)
    g = np.linalg.norm(fem.gradients(field.values), axis=1)
    lhs = float(fem.cellw @ g)

    lo, hi = float(field.values.min()), float(field.values.max())
    if hi <= lo:
        raise ValueError("constant field has no level structure")
    inner = np.linspace(lo, hi, grid + 2)[1:-1]
    lens = np.array([level_boundary_measure(field, t) for t in inner])
    step = inner[1] - inner[0]
    rhs = float(np.trapezoid(lens, inner) + 0.5 * step * (lens[0] + lens[-1]))
    return CoareaCheck(lhs, rhs, abs(lhs - rhs) / lhs)
