"""Time-stepping schemes for convection-diffusion on triangle meshes.

All schemes advance the implicit-diffusion problem

    (u^n - transported u^{n-1}) / dt = nu Laplacian(u^n)

and differ in how the transport is discretized:

* dual characteristic scheme: test functions are pushed forward along the
  flow; the right-hand side scatters each quadrature node's mass onto the
  vertices of the triangle its forward image lands in.  Because the clamped
  barycentric weights of each image sum to one, total mass is conserved to
  solver tolerance.
* primal characteristic scheme: the previous solution is evaluated at the
  backward image of each quadrature node (accurate, not conservative).
* streamline-upwind and centered Galerkin: Eulerian one-matrix schemes,
  assembled here with velocity terms integrated by the mid-edge rule.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .characteristics import TracedPoints, VelocityField, build_traced_points
from .fem import (
    FieldP1,
    assemble_local,
    assemble_mass,
    assemble_stiffness,
    basis_gradients,
    integral,
)
from .linalg import SolveReport, SparseMatrix, bicgstab_solve, cg_solve
from .mesh import TriMesh
from .quadrature import midedge_rule, rule_by_name

__all__ = [
    "SchemeConfig",
    "StepDiagnostics",
    "StepError",
    "CflWarning",
    "DcgmOperator",
    "dcgm_prepare",
    "dcgm_step",
    "dcgm_dirichlet_step",
    "pcgm_step",
    "AdvectionSystem",
    "supg_prepare",
    "supg_step",
    "centered_prepare",
    "centered_step",
    "cfl_dt_guideline",
]


@dataclass(frozen=True)
class SchemeConfig:
    """Scalar parameters shared by the schemes.

    ``sigma`` switches the characteristic tracer between first order (0) and
    second order (1).  ``nu`` must be strictly positive: the pure-advection
    limit is outside what these schemes are built for.
    """

    nu: float
    dt: float
    sigma: float = 1.0
    quadrature: str = "ninepoint"
    supg_alpha: float = 0.3
    solver_tol: float = 1e-13
    solver_max_iter: int | None = None

    def __post_init__(self):
        if not self.nu > 0.0:
            raise ValueError("nu must be > 0")
        if not self.dt > 0.0:
            raise ValueError("dt must be > 0")
        if self.sigma not in (0, 1):
            raise ValueError("sigma must be 0 or 1")
        rule_by_name(self.quadrature)  # fail at construction, not mid-run


class StepError(RuntimeError):
    """A linear solve inside a step did not converge."""

    def __init__(self, message: str, report: SolveReport):
        super().__init__(f"{message} (iterations={report.iterations}, "
                         f"residual={report.residual:.3e})")
        self.report = report


class CflWarning(UserWarning):
    """Time step exceeds the accuracy guideline of the centered scheme."""


@dataclass(eq=False)
class StepDiagnostics:
    """Per-step bookkeeping: mass, extrema, solver outcome, projection rate."""

    mass: float
    min_value: float
    max_value: float
    solver: SolveReport
    projected_fraction: float

    def csv_row(self, step: int) -> str:
        return (
            f"{step},{self.mass:.17g},{self.min_value:.17g},"
            f"{self.max_value:.17g},{self.solver.iterations},"
            f"{self.projected_fraction:.17g}"
        )

    @staticmethod
    def csv_header() -> str:
        return "step,mass,min,max,solver_iters,projected_fraction"


@dataclass(eq=False)
class DcgmOperator:
    """Cached state for characteristic steps with a time-independent field.

    Holds the SPD system matrix (mass + nu dt stiffness), the plain mass
    matrix, and the traced quadrature nodes.  ``dual=True`` runs the
    conservative forward-image scatter; ``dual=False`` the primal
    backward-image gather.
    """

    mesh: TriMesh
    mass: SparseMatrix
    system: SparseMatrix
    traced: TracedPoints
    dt: float
    dual: bool = True
    solver_tol: float = 1e-13
    solver_max_iter: int | None = None


def dcgm_prepare(mesh: TriMesh, field: VelocityField, config: SchemeConfig,
                 dual: bool = True) -> DcgmOperator:
    """Assemble the step operator once for reuse across time steps."""
    rule = rule_by_name(config.quadrature)
    traced = build_traced_points(mesh, field, rule, config.dt, config.sigma)
    mass = assemble_mass(mesh)
    stiffness = assemble_stiffness(mesh)
    system = mass + (config.nu * config.dt) * stiffness
    return DcgmOperator(
        mesh=mesh,
        mass=mass,
        system=system,
        traced=traced,
        dt=config.dt,
        dual=dual,
        solver_tol=config.solver_tol,
        solver_max_iter=config.solver_max_iter,
    )


def _values_at(coeffs: np.ndarray, mesh: TriMesh, tri: np.ndarray,
               bary: np.ndarray) -> np.ndarray:
    c = coeffs[mesh.triangles[tri]]
    return np.einsum("pi,pi->p", c, bary)


def _dual_rhs(op: DcgmOperator, coeffs: np.ndarray) -> np.ndarray:
    """Scatter: each node carries weight * u_prev(source) onto the vertices
    of its forward image's triangle, split by barycentric weights."""
    tp = op.traced
    u_src = _values_at(coeffs, op.mesh, tp.src_tri, tp.src_bary)
    carried = tp.weights * u_src
    verts = op.mesh.triangles[tp.fwd_tri]  # (n, 3)
    vals = carried[:, None] * tp.fwd_bary
    return np.bincount(verts.ravel(), weights=vals.ravel(), minlength=op.mesh.nv)


def _primal_rhs(op: DcgmOperator, coeffs: np.ndarray) -> np.ndarray:
    """Gather: evaluate u_prev at each node's backward image and scatter with
    the node's own (source) basis values."""
    tp = op.traced
    u_back = _values_at(coeffs, op.mesh, tp.bwd_tri, tp.bwd_bary)
    carried = tp.weights * u_back
    verts = op.mesh.triangles[tp.src_tri]
    vals = carried[:, None] * tp.src_bary
    return np.bincount(verts.ravel(), weights=vals.ravel(), minlength=op.mesh.nv)


def dcgm_step(op: DcgmOperator, u_prev: FieldP1):
    """One characteristic step; returns the new field and its diagnostics."""
    if u_prev.mesh is not op.mesh:
        raise ValueError("field lives on a different mesh than the operator")
    rhs = _dual_rhs(op, u_prev.coeffs) if op.dual else _primal_rhs(op, u_prev.coeffs)
    x, report = cg_solve(
        op.system,
        rhs,
        tol=op.solver_tol,
        max_iter=op.solver_max_iter,
        jacobi=True,
        x0=u_prev.coeffs,
    )
    if not report.converged:
        raise StepError("characteristic step solve failed", report)
    u_new = FieldP1(op.mesh, x)
    tp = op.traced
    frac = tp.fwd_projected_fraction if op.dual else tp.bwd_projected_fraction
    diag = StepDiagnostics(
        mass=integral(u_new),
        min_value=float(x.min()),
        max_value=float(x.max()),
        solver=report,
        projected_fraction=frac,
    )
    return u_new, diag


def pcgm_step(mesh: TriMesh, field: VelocityField, config: SchemeConfig,
              u_prev: FieldP1, op: DcgmOperator | None = None) -> FieldP1:
    """Primal characteristic step (backward gather; not conservative).

    Pass a prepared operator to amortize tracing and assembly across steps.
    """
    if op is None:
        op = dcgm_prepare(mesh, field, config, dual=False)
    rhs = _primal_rhs(op, u_prev.coeffs)
    x, report = cg_solve(
        op.system, rhs, tol=op.solver_tol, max_iter=op.solver_max_iter,
        jacobi=True, x0=u_prev.coeffs,
    )
    if not report.converged:
        raise StepError("primal characteristic step solve failed", report)
    return FieldP1(mesh, x)


# ----------------------------------------------------------------------
# Eulerian comparison schemes


def _velocity_at_midedges(mesh: TriMesh, field: VelocityField):
    rule = midedge_rule()
    pts = np.einsum("qi,tid->tqd", rule.points, mesh._tri_xy)  # (nt, 3, 2)
    ax, ay = field.value(pts[:, :, 0], pts[:, :, 1])
    shape = (mesh.nt, 3)
    ax = np.broadcast_to(np.asarray(ax, dtype=float), shape)
    ay = np.broadcast_to(np.asarray(ay, dtype=float), shape)
    return rule, ax, ay


def _advection_matrices(mesh: TriMesh, field: VelocityField):
    """Convection matrix C_ij = int (a.grad phi_j) phi_i and streamline
    matrix S_ij = int (a.grad phi_i)(a.grad phi_j), mid-edge quadrature."""
    rule, ax, ay = _velocity_at_midedges(mesh, field)
    g = basis_gradients(mesh)  # (nt, 3, 2)
    # a.grad(phi_j) at each quadrature node: (nt, q, j)
    adg = ax[:, :, None] * g[:, None, :, 0] + ay[:, :, None] * g[:, None, :, 1]
    w = rule.weights
    phi = rule.points  # phi_i at node q is points[q, i]
    local_c = np.einsum("q,qi,tqj->tij", w, phi, adg) * mesh.areas[:, None, None]
    local_s = np.einsum("q,tqi,tqj->tij", w, adg, adg) * mesh.areas[:, None, None]
    return assemble_local(mesh, local_c), assemble_local(mesh, local_s)


@dataclass(eq=False)
class AdvectionSystem:
    """Cached matrices for the Eulerian schemes: lhs u^n = rhs_mat u^{n-1}."""

    lhs: SparseMatrix
    rhs_mat: SparseMatrix
    solver_tol: float
    solver_max_iter: int | None


def supg_prepare(mesh: TriMesh, field: VelocityField,
                 config: SchemeConfig) -> AdvectionSystem:
    """Streamline-upwind system: test functions w + alpha a.grad w.

    In time-step-scaled form the matrices are
        lhs = M + alpha C^T + dt (C + alpha S + nu K)
        rhs = M + alpha C^T
    """
    mass = assemble_mass(mesh)
    stiffness = assemble_stiffness(mesh)
    conv, stream = _advection_matrices(mesh, field)
    alpha = config.supg_alpha
    base = mass + alpha * conv.transpose()
    lhs = base + config.dt * (conv + alpha * stream + config.nu * stiffness)
    return AdvectionSystem(lhs, base, config.solver_tol, config.solver_max_iter)


def centered_prepare(mesh: TriMesh, field: VelocityField,
                     config: SchemeConfig) -> AdvectionSystem:
    """Plain centered-convection system: lhs = M + dt (C + nu K), rhs = M.

    Warns when dt exceeds the accuracy guideline h^2 / (2 nu): the implicit
    step stays solvable but the convective error dominates, which is why the
    comparison runs take ten times more steps with this scheme.
    """
    guideline = cfl_dt_guideline(mesh, config.nu)
    if config.dt > guideline:
        warnings.warn(
            f"time step {config.dt:.3g} exceeds the centered-scheme guideline "
            f"h^2/(2 nu) = {guideline:.3g}; expect heavy phase error",
            CflWarning,
            stacklevel=2,
        )
    mass = assemble_mass(mesh)
    stiffness = assemble_stiffness(mesh)
    conv, _ = _advection_matrices(mesh, field)
    lhs = mass + config.dt * (conv + config.nu * stiffness)
    return AdvectionSystem(lhs, mass, config.solver_tol, config.solver_max_iter)


def cfl_dt_guideline(mesh: TriMesh, nu: float) -> float:
    """Largest time step the centered scheme tolerates without upwinding."""
    return mesh.h_max**2 / (2.0 * nu)


def _eulerian_step(system: AdvectionSystem, mesh: TriMesh,
                   u_prev: FieldP1, label: str) -> FieldP1:
    rhs = system.rhs_mat @ u_prev.coeffs
    x, report = bicgstab_solve(
        system.lhs, rhs, tol=system.solver_tol,
        max_iter=system.solver_max_iter, jacobi=True, x0=u_prev.coeffs,
    )
    if not report.converged:
        raise StepError(f"{label} step solve failed", report)
    return FieldP1(mesh, x)


def supg_step(mesh: TriMesh, field: VelocityField, config: SchemeConfig,
              u_prev: FieldP1, system: AdvectionSystem | None = None) -> FieldP1:
    """One implicit streamline-upwind step."""
    if system is None:
        system = supg_prepare(mesh, field, config)
    return _eulerian_step(system, mesh, u_prev, "streamline-upwind")


def centered_step(mesh: TriMesh, field: VelocityField, config: SchemeConfig,
                  u_prev: FieldP1, system: AdvectionSystem | None = None) -> FieldP1:
    """One implicit centered-convection step (no stabilization)."""
    if system is None:
        system = centered_prepare(mesh, field, config)
    return _eulerian_step(system, mesh, u_prev, "centered")


# ----------------------------------------------------------------------
# Dirichlet variant (experimental)


def _boundary_flux_matrix(mesh: TriMesh, field: VelocityField) -> SparseMatrix:
    """B_ij = int over the boundary of (a.n) phi_i phi_j, 2-point Gauss per
    edge.  Only boundary-vertex pairs receive entries."""
    a = mesh.vertices[mesh.boundary_edges[:, 0]]
    b = mesh.vertices[mesh.boundary_edges[:, 1]]
    tang = b - a
    length = np.sqrt(tang[:, 0] ** 2 + tang[:, 1] ** 2)
    # domain lies left of the oriented edge, so the outward normal is the
    # clockwise rotation of the tangent
    normal = np.column_stack([tang[:, 1], -tang[:, 0]]) / length[:, None]
    s_nodes = (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0))
    rows, cols, vals = [], [], []
    for s in s_nodes:
        pts = a + s * tang
        ax, ay = field.value(pts[:, 0], pts[:, 1])
        an = (np.broadcast_to(np.asarray(ax, dtype=float), length.shape) * normal[:, 0]
              + np.broadcast_to(np.asarray(ay, dtype=float), length.shape) * normal[:, 1])
        phi = (1.0 - s, s)
        factor = 0.5 * length * an
        for li, pi in enumerate(phi):
            for lj, pj in enumerate(phi):
                rows.append(mesh.boundary_edges[:, li])
                cols.append(mesh.boundary_edges[:, lj])
                vals.append(factor * pi * pj)
    csr = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(mesh.nv, mesh.nv),
    )
    return SparseMatrix(csr)


def dcgm_dirichlet_step(op: DcgmOperator, u_prev: FieldP1, u_boundary,
                        field: VelocityField) -> FieldP1:
    """Characteristic step with strongly imposed boundary values.

    The system matrix receives the boundary correction -dt B with
    B_ij = int (a.n) phi_i phi_j over the boundary, then boundary rows are
    constrained to the supplied values and the interior block (still SPD) is
    solved.  Experimental: the plain scheme without this correction performs
    better in practice, and the discrepancy is left visible.

    ``u_boundary`` may be a scalar, a full vertex vector, or one value per
    entry of ``mesh.boundary_vertices``.
    """
    mesh = op.mesh
    bnd = mesh.boundary_vertices
    g = np.zeros(mesh.nv)
    ub = np.asarray(u_boundary, dtype=float)
    if ub.ndim == 0:
        g[bnd] = float(ub)
    elif ub.shape == (mesh.nv,):
        g[bnd] = ub[bnd]
    elif ub.shape == bnd.shape:
        g[bnd] = ub
    else:
        raise ValueError("boundary data must be scalar, per-vertex, or "
                         "per-boundary-vertex")

    matrix = (op.system - op.dt * _boundary_flux_matrix(mesh, field)).csr
    rhs = _dual_rhs(op, u_prev.coeffs) if op.dual else _primal_rhs(op, u_prev.coeffs)

    interior = mesh.interior_vertices
    a_ii = SparseMatrix(matrix[interior][:, interior])
    a_ib = matrix[interior][:, bnd]
    rhs_i = rhs[interior] - a_ib @ g[bnd]
    x0 = u_prev.coeffs[interior]
    xi, report = cg_solve(
        a_ii, rhs_i, tol=op.solver_tol, max_iter=op.solver_max_iter,
        jacobi=True, x0=x0,
    )
    if not report.converged:
        raise StepError("constrained characteristic step solve failed", report)
    out = g.copy()
    out[interior] = xi
    return FieldP1(mesh, out)
