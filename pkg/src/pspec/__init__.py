"""Spectral geometry toolkit for discrete manifolds.

Builds icospheres, curvature-normalized ellipsoids, intervals and circles;
computes first Dirichlet and closed p-Laplacian eigenvalues; performs cap
symmetrization on the model sphere; and verifies the coarea, rearrangement
and isoperimetric inequalities that connect eigenvalues to diameters.
"""

__version__ = "0.1.0"

from .manifold import (
    CapGeometry,
    Domain,
    Mesh,
    beta,
    build_circle,
    build_ellipsoid,
    build_icosphere,
    build_interval,
    cap_boundary,
    cap_radius,
    cap_volume,
    diameter,
    hemisphere_domain,
    interior_domain,
    read_off,
    superlevel_domain,
    total_measure,
    write_off,
)
from .pspectral import (
    EigenResult,
    ScalarField,
    SolverOptions,
    closed_eigen,
    coordinate_field,
    dirichlet_eigen,
    nodal_domains,
    project_constraint,
    rayleigh_quotient,
    solve_radial_1d,
)
from .rearrange import (
    DistributionProfile,
    RadialProfile,
    coarea_check,
    distribution,
    lp_equimeasurability,
    polya_szego_check,
    symmetrize,
)
from .isoperim import (
    CrokeProfile,
    LevelSetCurve,
    check_battery,
    croke_profile,
    domain_bump_battery,
    gromov_ratio,
    level_boundary_measure,
    level_curve,
    level_integral,
    superlevel_measure,
)
from .harness import AuditReport, SweepRecord, chain_audit, pinching_sweep, sphere_comparison
