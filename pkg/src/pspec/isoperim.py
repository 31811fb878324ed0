"""Level sets of vertex fields and isoperimetric ratio checks.

Level curves are extracted by linear interpolation along cell edges and
superlevel measures integrate the same piecewise-linear interpolant exactly,
so boundary and bulk stay mutually consistent: the two sides of the
isoperimetric comparison see the same discrete geometry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .manifold import SPHERE_MEASURE, cap_boundary, cap_radius, total_measure
from .pspectral import ScalarField, coordinate_field


@dataclass
class LevelSetCurve:
    """Level set {u = t}: polyline segments for n=2, crossing points for n=1.

    ``measure`` is the H^{n-1} content (total segment length, or the
    crossing count under the counting measure). ``closed`` reports whether
    every crossed cell edge is shared by exactly two crossed cells, which
    holds for level sets on closed surfaces (even crossing count in 1-D).
    """

    t: float
    segments: np.ndarray
    measure: float
    closed: bool


def _field_range(field):
    u = field.values
    return float(u.min()), float(u.max())


def _require_interior_level(field, t):
    lo, hi = _field_range(field)
    if not lo < t < hi:
        raise ValueError(
            f"level {t} is not strictly inside the field range [{lo}, {hi}]"
        )


def _crossing_data(field, t):
    mesh = field.mesh
    uc = field.values[mesh.cells]
    above = uc > t
    s = above.sum(axis=1)
    cross = np.flatnonzero((s == 1) | (s == 2))
    cc = mesh.cells[cross]
    ua = uc[cross]
    lone = np.where(s[cross] == 1, np.argmax(above[cross], 1), np.argmax(~above[cross], 1))
    idx = np.arange(len(cross))
    o1, o2 = (lone + 1) % 3, (lone + 2) % 3
    V = mesh.vertices
    pts = []
    for oth in (o1, o2):
        va, vb = ua[idx, lone], ua[idx, oth]
        w = (t - va) / (vb - va)
        pts.append(V[cc[idx, lone]] + w[:, None] * (V[cc[idx, oth]] - V[cc[idx, lone]]))
    segs = np.stack(pts, axis=1)
    edge1 = np.sort(np.stack([cc[idx, lone], cc[idx, o1]], 1), axis=1)
    edge2 = np.sort(np.stack([cc[idx, lone], cc[idx, o2]], 1), axis=1)
    return cross, segs, np.concatenate([edge1, edge2])


def level_curve(field, t):
    """Extract the level set {u = t} by linear edge interpolation."""
    _require_interior_level(field, t)
    mesh = field.mesh
    if mesh.dimension == 2:
        _, segs, edges = _crossing_data(field, t)
        lengths = np.linalg.norm(segs[:, 1] - segs[:, 0], axis=1)
        _, counts = np.unique(edges, axis=0, return_counts=True)
        closed = bool(len(segs)) and bool((counts == 2).all())
        return LevelSetCurve(float(t), segs, float(lengths.sum()), closed)
    uc = field.values[mesh.cells]
    above = uc > t
    cross = np.flatnonzero(above[:, 0] != above[:, 1])
    cc = mesh.cells[cross]
    va, vb = field.values[cc[:, 0]], field.values[cc[:, 1]]
    w = ((t - va) / (vb - va))[:, None]
    pts = mesh.vertices[cc[:, 0]] + w * (mesh.vertices[cc[:, 1]] - mesh.vertices[cc[:, 0]])
    return LevelSetCurve(float(t), pts, float(len(pts)), len(pts) % 2 == 0)


def level_boundary_measure(field, t):
    """H^{n-1} measure of the interpolated level set {u = t}."""
    return level_curve(field, t).measure


def level_integral(field, t, cell_values):
    """Integral over the level set of a per-cell quantity.

    ``cell_values`` holds one value per mesh cell (constant on each cell,
    e.g. a function of the cell gradient); the integral weights it by the
    local level-segment measure.
    """
    _require_interior_level(field, t)
    mesh = field.mesh
    cell_values = np.asarray(cell_values, dtype=float)
    if mesh.dimension == 2:
        cross, segs, _ = _crossing_data(field, t)
        lengths = np.linalg.norm(segs[:, 1] - segs[:, 0], axis=1)
        return float(lengths @ cell_values[cross])
    uc = field.values[mesh.cells]
    above = uc > t
    cross = np.flatnonzero(above[:, 0] != above[:, 1])
    return float(cell_values[cross].sum())


def _sorted_cell_values(field):
    return np.sort(field.values[field.mesh.cells], axis=1)


def _fractions_from_sorted(srt, t, dimension):
    if dimension == 2:
        c_, b_, a_ = srt[:, 0], srt[:, 1], srt[:, 2]
        frac = np.ones(len(srt))
        frac[t >= a_] = 0.0
        m = (t >= b_) & (t < a_)
        frac[m] = (a_[m] - t) ** 2 / ((a_[m] - b_[m]) * (a_[m] - c_[m]))
        m = (t >= c_) & (t < b_)
        frac[m] = 1.0 - (t - c_[m]) ** 2 / ((a_[m] - c_[m]) * (b_[m] - c_[m]))
    else:
        b_, a_ = srt[:, 0], srt[:, 1]
        frac = np.ones(len(srt))
        frac[t >= a_] = 0.0
        m = (t >= b_) & (t < a_)
        frac[m] = (a_[m] - t) / (a_[m] - b_[m])
    return frac


def superlevel_fractions(field, t):
    """Per-cell area fraction of {u > t} for the linear interpolant."""
    return _fractions_from_sorted(_sorted_cell_values(field), t, field.mesh.dimension)


def superlevel_measure(field, t):
    """H^n measure of {u > t} integrated from the linear interpolant.

    Consistent with level_boundary_measure: the derivative of this measure
    in t matches the coarea integrand of the same interpolant, which keeps
    volume and boundary comparisons noise free.
    """
    return float(field.mesh.cell_measure @ superlevel_fractions(field, t))


def superlevel_measures(field, ts):
    """superlevel_measure over many thresholds with one shared cell sort."""
    srt = _sorted_cell_values(field)
    cw = field.mesh.cell_measure
    dim = field.mesh.dimension
    return np.array([cw @ _fractions_from_sorted(srt, t, dim) for t in ts])


def gromov_ratio(field, t, beta):
    """Boundary measure of {u > t} over the matched-cap bound.

    The denominator is beta times the boundary of the model-sphere cap
    whose beta-scaled volume matches the superlevel measure. Ratios below 1
    violate the comparison at mesh resolution.
    """
    _require_interior_level(field, t)
    mesh = field.mesh
    n = mesh.dimension
    mu = superlevel_measure(field, t)
    total = total_measure(mesh)
    if not 0.0 < mu < total:
        raise ValueError("superlevel set must be proper and nonempty")
    v = mu / beta
    if v > SPHERE_MEASURE[n] * (1.0 + 1e-9):
        raise ValueError("scaled superlevel volume exceeds the model sphere")
    denom = beta * cap_boundary(cap_radius(v, n), n)
    return level_boundary_measure(field, t) / denom


# ---------------------------------------------------------------------------
# check batteries


def random_smooth_field(mesh, rng):
    """Random linear plus traceless quadratic combination of coordinates."""
    x = mesh.vertices
    lin = x @ rng.normal(size=3)
    q = rng.normal(size=(3, 3))
    q = 0.5 * (q + q.T)
    q -= np.eye(3) * np.trace(q) / 3.0
    return ScalarField(mesh, lin + np.einsum("vi,ij,vj->v", x, q, x))


def random_bump_field(mesh, rng):
    """Gaussian bump translated to a random vertex."""
    scale = np.sqrt(total_measure(mesh) / SPHERE_MEASURE[2])
    center = mesh.vertices[rng.integers(len(mesh.vertices))]
    sigma = rng.uniform(0.35, 0.9) * scale
    d2 = ((mesh.vertices - center) ** 2).sum(axis=1)
    return ScalarField(mesh, np.exp(-d2 / (2.0 * sigma**2)))


def domain_bump_battery(domain, rng, count):
    """Nonnegative bump fields cut off outside the domain interior."""
    mesh = domain.mesh
    fields = []
    for _ in range(count):
        bump = random_bump_field(mesh, rng)
        fields.append(ScalarField(mesh, np.where(domain.interior, bump.values, 0.0)))
    return fields


def check_battery(mesh, rng, count):
    """Deterministic field battery: coordinate, harmonics-like, bumps."""
    fields = [coordinate_field(mesh)]
    while len(fields) < count:
        fields.append(random_smooth_field(mesh, rng))
        if len(fields) < count:
            fields.append(random_bump_field(mesh, rng))
    return fields[:count]


@dataclass
class CrokeProfile:
    """Empirical sharpening profile of the isoperimetric ratio.

    ``min_ratio`` over the battery estimates the best constant available on
    this mesh; diameters below pi should push it strictly above the
    round-sphere value. ``histogram`` is (counts, bin_edges) over ratios
    clipped to the bin range.
    """

    diameter: float
    min_ratio: float
    ratios: np.ndarray
    histogram: tuple
    count: int


_HIST_BINS = np.linspace(0.9, 2.1, 25)


def croke_profile(mesh, beta, diameter, count=50, thresholds=3, seed=0):
    """Minimum Gromov ratio and its histogram over a random field battery."""
    rng = np.random.default_rng(seed)
    ratios = []
    for fld in check_battery(mesh, rng, count):
        lo, hi = _field_range(fld)
        for _ in range(thresholds):
            t = lo + (hi - lo) * rng.uniform(0.15, 0.85)
            ratios.append(gromov_ratio(fld, t, beta))
    ratios = np.array(ratios)
    hist = np.histogram(np.clip(ratios, _HIST_BINS[0], _HIST_BINS[-1] - 1e-9), _HIST_BINS)
    return CrokeProfile(diameter, float(ratios.min()), ratios, hist, len(ratios))
