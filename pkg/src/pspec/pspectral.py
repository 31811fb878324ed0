"""First eigenvalues of the p-Laplacian on meshes and radial model problems.

Fields are piecewise linear over mesh cells; the p-Dirichlet energy uses the
constant per-cell gradient and masses are vertex lumped, so the Rayleigh
quotient is a ratio of plain weighted sums. First eigenvalues are minimized
directly: inverse power iteration solves the p = 2 case, and other exponents
are reached by geometric continuation in p running a preconditioned descent
on log(energy) - log(mass) with Armijo backtracking. The closed-manifold
problem projects onto the zero mean constraint of the p-Laplacian
(integral of |u|^{p-2} u vanishes) after every step.

solve_radial_1d provides the independent 1-D reference values by shooting.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.sparse import coo_matrix, diags
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu

from .manifold import Domain, Mesh

P_MIN = 1.1
P_MAX = 10.0


def check_p(p):
    """Validate the p exponent; supported range is [1.1, 10]."""
    p = float(p)
    if not P_MIN <= p <= P_MAX:
        raise ValueError(f"p exponent must lie in [{P_MIN}, {P_MAX}], got {p}")
    return p


class ScalarField:
    """Vertex values over a mesh."""

    def __init__(self, mesh, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (len(mesh.vertices),):
            raise ValueError("field length does not match vertex count")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        self.mesh = mesh
        self.values = values

    def copy(self):
        return ScalarField(self.mesh, self.values.copy())


def coordinate_field(mesh, axis=2):
    """The ambient coordinate restricted to the mesh (z by default)."""
    return ScalarField(mesh, mesh.vertices[:, axis].copy())


@dataclass
class SolverOptions:
    """Tunables for the descent eigensolvers (defaults match the contracts)."""

    tol: float = 1e-9           # relative Rayleigh change per iteration
    stall: int = 10             # consecutive quiet iterations to declare done
    max_iters: int = 50000      # total accepted descent steps per solve
    step: float = 0.25          # geometric continuation step in p
    eps_factor: float = 1e-9    # gradient smoothing, times mean edge length
    max_backtracks: int = 40
    lipschitz_budget: float = 4.0  # allowed |d log lambda / d log p| in continuation


@dataclass
class EigenResult:
    """First eigenvalue solve outcome.

    ``lam`` equals the Rayleigh quotient of ``field`` exactly as evaluated by
    :func:`rayleigh_quotient`; ``residual`` is the relative Rayleigh change at
    termination and ``constraint_residual`` the closed-manifold constraint
    defect (None for Dirichlet problems).
    """

    lam: float
    field: ScalarField
    residual: float
    constraint_residual: float | None
    iterations: int
    converged: bool
    p: float
    diagnostics: dict = dc_field(default_factory=dict)


# ---------------------------------------------------------------------------
# piecewise-linear element operators


class _FemOps:
    def __init__(self, mesh):
        V, C = mesh.vertices, mesh.cells
        x = V[C]
        if mesh.dimension == 2:
            e0 = x[:, 2] - x[:, 1]
            e1 = x[:, 0] - x[:, 2]
            e2 = x[:, 1] - x[:, 0]
            nrm = np.cross(e2, -e1)
            a2 = np.linalg.norm(nrm, axis=1)
            nhat = nrm / a2[:, None]
            gp = np.stack(
                [np.cross(nhat, e0), np.cross(nhat, e1), np.cross(nhat, e2)], axis=1
            )
            gp /= a2[:, None, None]
        else:
            t = x[:, 1] - x[:, 0]
            L2 = (t * t).sum(axis=1)
            gp = np.stack([-t / L2[:, None], t / L2[:, None]], axis=1)
        self.mesh = mesh
        self.cells = C
        self.nv = len(V)
        self.grad_phi = gp                      # (nc, k, 3)
        self.cellw = mesh.cell_measure
        self.mass = mesh.vertex_measure
        local = np.einsum("cki,cli->ckl", gp, gp) * self.cellw[:, None, None]
        k = C.shape[1]
        rows = np.repeat(C, k, axis=1).ravel()
        cols = np.tile(C, (1, k)).ravel()
        self.stiffness = coo_matrix(
            (local.ravel(), (rows, cols)), shape=(self.nv, self.nv)
        ).tocsr()

    def gradients(self, u):
        return np.einsum("cki,ck->ci", self.grad_phi, u[self.cells])

    def energy_mass(self, u, p, eps):
        g = self.gradients(u)
        g2 = np.einsum("ci,ci->c", g, g)
        base = g2 + eps * eps if eps else g2
        energy = float(self.cellw @ base ** (p / 2.0))
        mass = float(self.mass @ np.abs(u) ** p)
        return energy, mass, g, g2

    def grad_log_quotient(self, u, p, eps, energy, mass, g, g2):
        base = g2 + eps * eps if eps else g2
        with np.errstate(divide="ignore"):
            gamma = np.where(base > 0.0, base ** ((p - 2.0) / 2.0), 0.0)
        dots = np.einsum("cki,ci->ck", self.grad_phi, g)
        s = (self.cellw * gamma)[:, None] * dots
        dE = p * np.bincount(self.cells.ravel(), weights=s.ravel(), minlength=self.nv)
        dM = p * self.mass * np.sign(u) * np.abs(u) ** (p - 1.0)
        return dE / energy - dM / mass


def _fem(mesh):
    if not hasattr(mesh, "_fem_ops"):
        mesh._fem_ops = _FemOps(mesh)
    return mesh._fem_ops


def _mean_edge_length(mesh):
    return float(mesh.edge_lengths.mean())


def rayleigh_quotient(field, region, p):
    """p-Rayleigh quotient: cellwise gradient p-energy over lumped p-mass.

    ``region`` is a closed Mesh or a Domain of the field's mesh; for a
    Domain the field is masked to zero outside the interior, which realizes
    the homogeneous Dirichlet condition. Zero fields are rejected.
    """
    p = check_p(p)
    u, fem = _region_values(field, region)
    energy, mass, _, _ = fem.energy_mass(u, p, 0.0)
    if mass == 0.0:
        raise ValueError("Rayleigh quotient of the zero field")
    return energy / mass


def _region_values(field, region):
    if isinstance(region, Domain):
        if region.mesh is not field.mesh:
            raise ValueError("domain does not belong to the field's mesh")
        u = np.where(region.interior, field.values, 0.0)
        return u, _fem(region.mesh)
    if isinstance(region, Mesh):
        if region is not field.mesh:
            raise ValueError("region mesh does not match the field's mesh")
        if not region.closed:
            raise ValueError("whole-mesh quotient requires a closed mesh")
        return field.values, _fem(region)
    raise TypeError("region must be a Mesh or a Domain")


# ---------------------------------------------------------------------------
# constraint projection and nodal counting


def project_constraint(field, p):
    """Subtract the scalar c with integral of |u-c|^{p-2}(u-c) equal zero.

    The defect is strictly decreasing in c, so bisection over the value
    range converges unconditionally. Constant fields have no root and are
    rejected.
    """
    p = check_p(p)
    u = field.values
    m = field.mesh.vertex_measure
    lo, hi = float(u.min()), float(u.max())
    if hi <= lo:
        raise ValueError("constraint projection of a constant field")

    def defect(c):
        d = u - c
        return float(m @ (np.sign(d) * np.abs(d) ** (p - 1.0)))

    for _ in range(90):
        mid = 0.5 * (lo + hi)
        if defect(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return ScalarField(field.mesh, u - 0.5 * (lo + hi))


def constraint_residual(field, p):
    """Absolute value of the closed-manifold constraint integral."""
    u = field.values
    return float(abs(field.mesh.vertex_measure @ (np.sign(u) * np.abs(u) ** (p - 1.0))))


def nodal_domains(field):
    """Connected components of {u > 0} and {u < 0} in vertex adjacency.

    Returns (count, labels); vertices with u == 0 get label -1.
    """
    mesh = field.mesh
    u = field.values
    adj = mesh.adjacency_matrix()
    labels = np.full(len(u), -1, dtype=np.int64)
    count = 0
    for mask in (u > 0.0, u < 0.0):
        idx = np.flatnonzero(mask)
        if len(idx) == 0:
            continue
        k, lab = connected_components(adj[idx][:, idx], directed=False)
        labels[idx] = lab + count
        count += k
    return count, labels


# ---------------------------------------------------------------------------
# eigensolvers


def _p2_init(fem, free_idx, deflate_constants):
    """Inverse power iteration on (stiffness + mass, mass), smallest mode.

    The unit shift keeps the closed-manifold operator nonsingular; constants
    are deflated in the mass inner product when requested. Returns the
    factorization for reuse as the descent preconditioner.
    """
    K = fem.stiffness
    A = (K + diags(fem.mass)).tocsc()
    if free_idx is not None:
        A = A[free_idx][:, free_idx]
        m = fem.mass[free_idx]
        Ksub = K[free_idx][:, free_idx]
    else:
        m = fem.mass
        Ksub = K
    lu = splu(A)
    v = np.cos(np.arange(len(m)))

    def deflate(w):
        if deflate_constants:
            w = w - (m @ w) / m.sum()
        return w

    v = deflate(v)
    v /= np.sqrt(m @ v**2)
    lam_old = np.inf
    iters = 0
    for iters in range(1, 501):
        w = lu.solve(m * v)
        w = deflate(w)
        w /= np.sqrt(m @ w**2)
        lam = float(w @ (Ksub @ w)) / float(m @ w**2)
        v = w
        if abs(lam - lam_old) <= 1e-13 * max(lam, 1.0):
            lam_old = lam
            break
        lam_old = lam
    full = np.zeros(fem.nv)
    if free_idx is not None:
        full[free_idx] = v
    else:
        full = v
    return full, lam_old, iters, lu


def _continuation_path(p_target, step):
    """Geometric p schedule from 2 to the target, ratio at most 1 + step."""
    path = []
    p = 2.0
    ratio = 1.0 + step
    while abs(np.log(p_target / p)) > 1e-12:
        p = min(p * ratio, p_target) if p_target > p else max(p / ratio, p_target)
        path.append(p)
    return path


def _lp_normalize(u, mass, p):
    norm = (mass @ np.abs(u) ** p) ** (1.0 / p)
    return u / norm


def _descent_stage(fem, u, p, eps, opts, lu, free_idx, project, budget):
    """Armijo descent on log energy - log mass at fixed (p, eps).

    Accepted iterates have non-increasing Rayleigh quotient by construction;
    the stage stops after `opts.stall` consecutive accepted steps with
    relative change below `opts.tol`, on line-search stall, or on budget.
    """

    def feasible(w):
        if project:
            w = _project_values(fem, w, p)
        return _lp_normalize(w, fem.mass, p)

    u = feasible(u)
    energy, mass, g, g2 = fem.energy_mass(u, p, eps)
    rq = energy / mass
    trace = [rq]
    grad = fem.grad_log_quotient(u, p, eps, energy, mass, g, g2)
    t = 1.0
    streak = 0
    iters = 0
    rel = np.inf
    converged = False
    while iters < budget:
        d = np.zeros_like(u)
        if free_idx is not None:
            d[free_idx] = -lu.solve(grad[free_idx])
            slope = float(grad[free_idx] @ d[free_idx])
        else:
            d = -lu.solve(grad)
            slope = float(grad @ d)
        if slope >= 0.0:
            d = -np.where(_free_mask(fem, free_idx), grad, 0.0)
            slope = float(grad @ d)
            if slope >= 0.0:
                break
        t = min(2.0 * t, 4.0)
        accepted = False
        for _ in range(opts.max_backtracks):
            unew = feasible(u + t * d)
            e_new, m_new, g_new, g2_new = fem.energy_mass(unew, p, eps)
            f_new = np.log(e_new) - np.log(m_new)
            if f_new <= np.log(rq) + 1e-4 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            converged = rel <= opts.tol * 10.0
            break
        u, energy, mass, g, g2 = unew, e_new, m_new, g_new, g2_new
        rq_new = energy / mass
        if rq_new > rq * (1.0 + 1e-12):
            raise AssertionError("descent accepted an increasing Rayleigh step")
        rel = abs(rq - rq_new) / rq_new
        rq = rq_new
        trace.append(rq)
        iters += 1
        streak = streak + 1 if rel < opts.tol else 0
        if streak >= opts.stall:
            converged = True
            break
        grad = fem.grad_log_quotient(u, p, eps, energy, mass, g, g2)
    return u, {"iters": iters, "converged": converged, "residual": rel, "trace": trace}


def _free_mask(fem, free_idx):
    if free_idx is None:
        return np.ones(fem.nv, dtype=bool)
    mask = np.zeros(fem.nv, dtype=bool)
    mask[free_idx] = True
    return mask


def _project_values(fem, u, p):
    return project_constraint(ScalarField(fem.mesh, u), p).values


def _eigen_solve(mesh, p, opts, free_idx, project):
    p = check_p(p)
    opts = opts or SolverOptions()
    fem = _fem(mesh)
    u, lam2, p2_iters, lu = _p2_init(fem, free_idx, deflate_constants=project)
    diagnostics = {"p2_lambda": lam2, "p2_iterations": p2_iters, "stages": []}
    total_iters = p2_iters
    converged = True
    residual = 0.0
    if abs(p - 2.0) > 1e-12:
        eps0 = opts.eps_factor * _mean_edge_length(mesh)
        path = _continuation_path(p, opts.step)
        stages = [(pk, eps0) for pk in path] + [(p, 0.0)]
        budget = opts.max_iters
        lam_prev, p_prev = lam2, 2.0
        for pk, eps in stages:
            u, info = _descent_stage(
                fem, u, pk, eps, opts, lu, free_idx, project, budget
            )
            budget -= info["iters"]
            total_iters += info["iters"]
            converged = info["converged"] and budget > 0
            residual = info["residual"]
            lam_k = info["trace"][-1]
            drift = abs(np.log(lam_k / lam_prev)) / max(abs(np.log(pk / p_prev)), 1e-12)
            diagnostics["stages"].append(
                {
                    "p": pk,
                    "eps": eps,
                    "iters": info["iters"],
                    "rayleigh": lam_k,
                    "log_lipschitz": drift,
                }
            )
            if eps == 0.0 or abs(np.log(pk / p_prev)) > 1e-12:
                if drift > opts.lipschitz_budget and abs(np.log(pk / p_prev)) > 1e-12:
                    diagnostics["lipschitz_warning"] = True
                lam_prev, p_prev = lam_k, pk
            if not converged:
                break
    return fem, u, residual, total_iters, converged, diagnostics


def dirichlet_eigen(domain, p, opts=None):
    """First Dirichlet eigenvalue and eigenfunction of the p-Laplacian.

    The minimizer of the p-Rayleigh quotient over fields vanishing outside
    the domain interior. The returned field is sign fixed to be nonnegative
    and has unit L^p norm; ``result.lam`` equals its Rayleigh quotient.
    """
    free_idx = domain.interior_indices
    fem, u, residual, iters, converged, diag = _eigen_solve(
        domain.mesh, p, opts, free_idx, project=False
    )
    if u[np.argmax(np.abs(u))] < 0.0:
        u = -u
    neg = u < 0.0
    if neg.any() and abs(u[neg].min()) <= 1e-8 * u.max():
        u = np.where(neg, 0.0, u)  # trim sign noise from the constrained ring
    u = _lp_normalize(u, fem.mass, float(p))
    fld = ScalarField(domain.mesh, u)
    lam = rayleigh_quotient(fld, domain, p)
    return EigenResult(lam, fld, residual, None, iters, converged, float(p), diag)


def closed_eigen(mesh, p, opts=None):
    """First nonzero eigenvalue of the p-Laplacian on a closed mesh.

    Minimizes the Rayleigh quotient subject to the vanishing of the
    integral of |u|^{p-2} u, re-projected after every descent step. The
    field is sign fixed to be positive at its vertex of maximum modulus.
    """
    if not mesh.closed:
        raise ValueError("closed_eigen requires a closed mesh")
    fem, u, residual, iters, converged, diag = _eigen_solve(
        mesh, p, opts, free_idx=None, project=True
    )
    u = _project_values(fem, u, float(p))
    if u[np.argmax(np.abs(u))] < 0.0:
        u = -u
    u = _lp_normalize(u, fem.mass, float(p))
    fld = ScalarField(mesh, u)
    lam = rayleigh_quotient(fld, mesh, p)
    cres = constraint_residual(fld, float(p))
    return EigenResult(lam, fld, residual, cres, iters, converged, float(p), diag)


# ---------------------------------------------------------------------------
# radial 1-D reference problems


def solve_radial_1d(p, n, problem="hemisphere"):
    """First eigenvalue of the radial p-Laplacian model problem by shooting.

    problem = "hemisphere": weight sin^{n-1}(r) on (0, pi/2), Neumann at 0,
    Dirichlet at pi/2. This equals the first nonzero closed eigenvalue of
    the round unit n-sphere (n for p = 2).

    problem = "interval": unit weight on (0, 1) with Dirichlet ends
    (pi^2 for p = 2).

    The eigenvalue is bracketed by a geometric scan of the endpoint value
    of the shooting solution and polished by Brent's method.
    """
    p = check_p(p)
    if problem == "hemisphere":
        if not (isinstance(n, (int, np.integer)) and 1 <= n <= 8):
            raise ValueError("model dimension n must be an integer in [1, 8]")
    elif problem != "interval":
        raise ValueError(f"unknown radial problem {problem!r}")

    pim1 = 1.0 / (p - 1.0)

    if problem == "hemisphere":
        r0, rend = 1e-6, 0.5 * np.pi

        def weight(r):
            return np.sin(r) ** (n - 1)

        def y0(lam):
            return [1.0, -lam * r0**n / n]

    else:
        r0, rend = 0.0, 1.0

        def weight(r):
            return 1.0

        def y0(lam):
            return [0.0, 1.0]

    def endpoint(lam):
        def rhs(r, y):
            u, q = y
            qw = q / weight(r)
            du = np.sign(qw) * np.abs(qw) ** pim1
            dq = -lam * weight(r) * np.sign(u) * np.abs(u) ** (p - 1.0)
            return (du, dq)

        sol = solve_ivp(
            rhs,
            (r0, rend),
            y0(lam),
            method="RK45",
            rtol=1e-11,
            atol=1e-13,
            dense_output=False,
            t_eval=[rend],
        )
        if not sol.success:
            raise RuntimeError(f"radial integration failed at lambda={lam}")
        return float(sol.y[0, -1])

    lam = 0.05
    g_lo = endpoint(lam)
    if g_lo <= 0.0:
        raise RuntimeError("shooting bracket scan started above the eigenvalue")
    while True:
        lam_hi = lam * 1.3
        g_hi = endpoint(lam_hi)
        if g_hi < 0.0:
            break
        lam, g_lo = lam_hi, g_hi
        if lam > 1e7:
            raise RuntimeError("shooting bracket scan failed below 1e7")
    return float(brentq(endpoint, lam, lam_hi, xtol=1e-12, rtol=1e-13))
