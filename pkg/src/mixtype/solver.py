"""Least-squares discretization and solution of the first-order systems.

The residual ``L u - f`` of a nodal bilinear field is evaluated at the 2x2
Gauss points of every cell and minimized in a weighted L2 sense, with the
boundary conditions added as penalty rows. The normal equations are solved
by Jacobi-preconditioned conjugate gradients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigvalsh_tridiagonal

from .friedrichs import BoundaryCondition
from .geometry import DomainSpec, SegmentRole
from .mesh import Grid, build_grid
from .operators import SystemSpec

CONDITION_ROLES = {
    "tangential": SegmentRole.C,
    "normal-parallel": SegmentRole.F,
    "mixed": SegmentRole.OUTER,
}


class SolverError(RuntimeError):
    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics


@dataclass(eq=False)
class DiscreteField:
    """Nodal 2-vector field, ``values`` has shape ``(n_nodes, 2)``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, float)
        if self.values.shape != (self.grid.n_nodes, 2):
            raise ValueError(f"field shape {self.values.shape} does not match {self.grid.n_nodes} nodes")

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable) -> "DiscreteField":
        """Sample ``fn(x1, x2) -> (..., 2)`` at the nodes (chart coordinates)."""
        return cls(grid, np.asarray(fn(grid.nodes[:, 0], grid.nodes[:, 1]), float))

    @classmethod
    def zeros(cls, grid: Grid) -> "DiscreteField":
        return cls(grid, np.zeros((grid.n_nodes, 2)))

    def flat(self) -> np.ndarray:
        return self.values.T.ravel()

    @classmethod
    def from_flat(cls, grid: Grid, v: np.ndarray) -> "DiscreteField":
        return cls(grid, np.asarray(v, float).reshape(2, -1).T)

    def at_quadrature(self, rule: str = "gauss2") -> np.ndarray:
        q = self.grid.quadrature(rule)
        return np.column_stack([q.I @ self.values[:, 0], q.I @ self.values[:, 1]])


@dataclass(eq=False)
class DiscreteOperator:
    """Sparse map from nodal fields to residual values at quadrature points.

    Rows are ordered ``[component 1 at all points, component 2 at all
    points]``; columns ``[u1 at all nodes, u2 at all nodes]``.
    """

    grid: Grid
    system: SystemSpec
    rule: str
    matrix: sp.csr_matrix
    points: np.ndarray
    weights: np.ndarray

    @property
    def n_points(self) -> int:
        return len(self.weights)

    def apply(self, u: DiscreteField | np.ndarray) -> np.ndarray:
        v = u.flat() if isinstance(u, DiscreteField) else np.asarray(u, float)
        return (self.matrix @ v).reshape(2, -1).T

    def forcing(self, f) -> np.ndarray:
        """Right-hand side at the quadrature points.

        ``f`` may be a nodal :class:`DiscreteField` (interpolated), an array
        of point values, a callable of chart coordinates, or ``None`` (the
        system's own forcing).
        """
        if f is None:
            return self.system.forcing(self.points[:, 0], self.points[:, 1])
        if isinstance(f, DiscreteField):
            return f.at_quadrature(self.rule)
        if callable(f):
            return np.asarray(f(self.points[:, 0], self.points[:, 1]), float)
        f = np.asarray(f, float)
        if f.shape != (self.n_points, 2):
            raise ValueError("forcing array must have one row per quadrature point")
        return f


def _check_charts(sys: SystemSpec, grid: Grid):
    if sys.chart != grid.chart:
        raise ValueError(f"{sys.chart} system on a {grid.chart} grid")


def discretize(sys: SystemSpec, domain: DomainSpec | Grid, resolution=None, rule: str = "gauss2"):
    """Return ``(grid, operator)`` for ``sys`` on ``domain``."""
    if isinstance(domain, Grid):
        grid = domain
    else:
        if resolution is None:
            raise ValueError("resolution is required with a domain")
        res = resolution if isinstance(resolution, (tuple, list)) else (resolution,)
        if min(int(r) for r in res) < 8:
            raise ValueError("resolution must be at least 8 cells per direction")
        grid = build_grid(domain, resolution)
    _check_charts(sys, grid)
    q = grid.quadrature(rule)
    co = sys.coefficients(q.points[:, 0], q.points[:, 1])
    blocks = [[None, None], [None, None]]
    for i in range(2):
        for j in range(2):
            blocks[i][j] = (sp.diags(co.A1[:, i, j]) @ q.D1 + sp.diags(co.A2[:, i, j]) @ q.D2
                            + sp.diags(co.B[:, i, j]) @ q.I)
    mat = sp.bmat(blocks, format="csr")
    return grid, DiscreteOperator(grid, sys, rule, mat, q.points, q.weights)


@dataclass(frozen=True, eq=False)
class BoundaryRows:
    """Scalar constraints ``coeffs[k] . u[nodes[k]] = rhs[k]`` with weights ``ds``."""

    role: SegmentRole
    nodes: np.ndarray
    coeffs: np.ndarray
    rhs: np.ndarray
    ds: np.ndarray

    def matrix(self, n_nodes: int) -> sp.csr_matrix:
        k = len(self.nodes)
        rows = np.concatenate([np.arange(k), np.arange(k)])
        cols = np.concatenate([self.nodes, self.nodes + n_nodes])
        vals = np.concatenate([self.coeffs[:, 0], self.coeffs[:, 1]])
        return sp.csr_matrix((vals, (rows, cols)), shape=(k, 2 * n_nodes))

    def residual(self, u: DiscreteField) -> np.ndarray:
        return np.sum(self.coeffs * u.values[self.nodes], axis=1) - self.rhs


def boundary_rows(grid: Grid, condition: BoundaryCondition, role=None, g: Callable | None = None) -> BoundaryRows:
    """One row per node on the segments carrying ``condition``.

    ``g(chart_points, cartesian_points, tangents, normals)`` supplies a
    nonzero right-hand side; by default the condition is homogeneous.
    """
    if condition.kind not in CONDITION_ROLES:
        raise ValueError(f"condition {condition.kind!r} imposes no rows")
    expected = CONDITION_ROLES[condition.kind]
    if role is not None and SegmentRole(role) != expected:
        raise ValueError(f"condition {condition.kind!r} belongs on {expected.value}, not {SegmentRole(role).value}")
    entries = grid.boundary_nodes(expected)
    if not entries:
        raise ValueError(f"grid has no {expected.value} nodes for condition {condition.kind!r}")
    nodes = np.array([k for k, _ in entries], int)
    tang = np.array([b.tangent for _, b in entries])
    nrm = np.array([b.normal for _, b in entries])
    chart = grid.nodes[nodes]
    coeffs = condition.rows(chart, nrm, tang)
    rhs = np.zeros(len(nodes)) if g is None else np.asarray(g(chart, grid.cartesian(chart), tang, nrm), float)
    ds = np.array([b.ds for _, b in entries])
    return BoundaryRows(expected, nodes, np.asarray(coeffs, float), rhs, ds)


# ---------------------------------------------------------------------------
# conjugate gradients


@dataclass(frozen=True)
class Diagnostics:
    iterations: int
    converged: bool
    relative_residual: float
    objective: float
    condition_estimate: float
    penalty: float
    n_unknowns: int

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def pcg(A, b, x0=None, rtol=1e-10, maxiter=None, M_diag=None):
    """Preconditioned CG; returns ``(x, iterations, converged, rel_res, cond_est)``.

    The condition estimate comes from the Lanczos tridiagonal built from
    the CG coefficients (extreme Ritz values of the preconditioned matrix).
    """
    n = len(b)
    maxiter = 20 * n if maxiter is None else maxiter
    Minv = np.ones(n) if M_diag is None else 1.0 / M_diag
    x = np.zeros(n) if x0 is None else np.array(x0, float)
    r = b - A @ x
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), 0, True, 0.0, 1.0
    rel = float(np.linalg.norm(r)) / bnorm
    if rel <= rtol:
        return x, 0, True, rel, 1.0
    z = Minv * r
    p = z.copy()
    rz = float(r @ z)
    alphas, betas = [], []
    it = 0
    while it < maxiter:
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            break
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        it += 1
        alphas.append(alpha)
        rel = float(np.linalg.norm(r)) / bnorm
        if rel <= rtol:
            break
        z = Minv * r
        rz_new = float(r @ z)
        beta = rz_new / rz
        betas.append(beta)
        rz = rz_new
        p = z + beta * p
    cond = _lanczos_condition(alphas, betas)
    return x, it, rel <= rtol, rel, cond


def _lanczos_condition(alphas, betas) -> float:
    k = len(alphas)
    if k == 0:
        return 1.0
    a = np.asarray(alphas)
    b = np.asarray(betas[: k - 1])
    d = 1.0 / a
    d[1:] += b / a[:-1]
    e = np.sqrt(np.maximum(b, 0.0)) / a[:-1]
    ev = eigvalsh_tridiagonal(d, e) if k > 1 else d
    lo, hi = float(ev.min()), float(ev.max())
    return hi / lo if lo > 0 else math.inf


# ---------------------------------------------------------------------------
# least squares


def residual_weights(op: DiscreteOperator, weights=None, exclusion: float = 1e-8) -> np.ndarray:
    """Per-point, per-component weights of the residual norm."""
    w = np.column_stack([op.weights, op.weights])
    if weights is None or weights == "uniform":
        return w
    dual = weights.dual(op.grid.cartesian(op.points), exclusion)
    return w * dual


def solve_least_squares(op: DiscreteOperator, f=None, rows: Sequence[BoundaryRows] = (), weights=None,
                        penalty: float | None = None, rtol: float = 1e-10, maxiter: int | None = None,
                        x0: DiscreteField | None = None, raise_on_failure: bool = True):
    """Minimize ``|W^(1/2) (L u - f)|^2 + lam_b sum ds |rows u - g|^2``.

    Returns ``(u, diagnostics)``. ``penalty`` defaults to ``1e3 / h``.
    """
    grid = op.grid
    N = grid.n_nodes
    fq = op.forcing(f)
    W = residual_weights(op, weights)
    wv = W.T.ravel()
    L = op.matrix
    lam = 1e3 / grid.h if penalty is None else float(penalty)
    NA = L.T @ sp.diags(wv) @ L
    rhs = L.T @ (wv * fq.T.ravel())
    for br in rows:
        R = br.matrix(N)
        D = sp.diags(lam * br.ds)
        NA = NA + R.T @ D @ R
        rhs = rhs + R.T @ (lam * br.ds * br.rhs)
    NA = sp.csr_matrix(NA)
    diag = NA.diagonal().copy()
    diag[diag <= 0] = 1.0
    x0v = None if x0 is None else x0.flat()
    x, it, ok, rel, cond = pcg(NA, rhs, x0v, rtol, maxiter, diag)
    u = DiscreteField.from_flat(grid, x)
    res = op.apply(u) - fq
    obj = float(np.sum(W * res * res))
    for br in rows:
        obj += lam * float(np.sum(br.ds * br.residual(u) ** 2))
    diag_out = Diagnostics(int(it), bool(ok), float(rel), obj, float(cond), lam, 2 * N)
    if not ok and raise_on_failure:
        raise SolverError(f"CG did not reach rtol {rtol} in {it} iterations (relative residual {rel:.3e})", diag_out)
    return u, diag_out


def normal_equation_gradient(op: DiscreteOperator, u: DiscreteField, f=None, rows=(), weights=None,
                             penalty=None) -> np.ndarray:
    """Gradient of the least-squares objective at ``u`` (half of it, as in ``N u - b``)."""
    N = op.grid.n_nodes
    W = residual_weights(op, weights)
    res = op.apply(u) - op.forcing(f)
    g = op.matrix.T @ (W * res).T.ravel()
    lam = 1e3 / op.grid.h if penalty is None else penalty
    for br in rows:
        g = g + br.matrix(N).T @ (lam * br.ds * br.residual(u))
    return g


# ---------------------------------------------------------------------------
# manufactured solutions


@dataclass(frozen=True, eq=False)
class ManufacturedCase:
    """Exact field, forcing and boundary conditions for a convergence study.

    ``exact`` and ``forcing`` take chart coordinates and return ``(..., 2)``.
    """

    name: str
    system: SystemSpec
    domain: DomainSpec
    exact: Callable
    forcing: Callable
    conditions: tuple[BoundaryCondition, ...] = ()
    norm: object | None = None


def manufactured_optics_polar(eps0: float = 0.1) -> ManufacturedCase:
    """``V = r^2``: ``u = (2r, 0)``, ``f = (4r^2 - 2, 0)``, data ``u2 = 0`` on ``r = sqrt2``."""
    from .geometry import omega5
    from .operators import assemble_system
    from .friedrichs import mixed_condition

    def exact(r, th):
        r = np.asarray(r, float)
        return np.stack([2.0 * r, np.zeros_like(r)], axis=-1)

    def forcing(r, th):
        r = np.asarray(r, float)
        return np.stack([4.0 * r * r - 2.0, np.zeros_like(r)], axis=-1)

    return ManufacturedCase("optics-polar", assemble_system("optics-polar"), omega5(eps0), exact, forcing,
                            (mixed_condition(1.0, 0.0),))


def manufactured_hodge_case3() -> ManufacturedCase:
    """``u = (1, 0)``, ``f = (-2x, 0)`` on the default third-family domain, data on C."""
    from .geometry import omega3
    from .operators import assemble_system
    from .energy import NormSpec

    def exact(x, y):
        x = np.asarray(x, float)
        return np.stack([np.ones_like(x), np.zeros_like(x)], axis=-1)

    def forcing(x, y):
        x = np.asarray(x, float)
        return np.stack([-2.0 * x, np.zeros_like(x)], axis=-1)

    return ManufacturedCase("hodge-case3", assemble_system("hodge-case3"), omega3(), exact, forcing,
                            (BoundaryCondition("tangential"),), NormSpec(3))


def _rows_for(case: ManufacturedCase, grid: Grid):
    out = []
    for cond in case.conditions:
        def g(chart, xy, tang, nrm, cond=cond):
            u = case.exact(chart[:, 0], chart[:, 1])
            rr = cond.rows(chart, nrm, tang)
            return np.sum(rr * u, axis=1)

        out.append(boundary_rows(grid, cond, g=g))
    return out


def field_errors(case: ManufacturedCase, u: DiscreteField, rule: str = "gauss2") -> tuple[float, float]:
    """Max nodal error and weighted L2 error of ``u`` against the exact field."""
    grid = u.grid
    nodal = case.exact(grid.nodes[:, 0], grid.nodes[:, 1])
    e_max = float(np.max(np.abs(u.values - nodal)))
    q = grid.quadrature(rule)
    eq = u.at_quadrature(rule) - case.exact(q.points[:, 0], q.points[:, 1])
    if case.norm is None:
        wt = np.ones_like(eq)
    else:
        wt = np.column_stack(case.norm.weights(grid.cartesian(q.points)))
    e_l2 = float(math.sqrt(np.sum(q.weights[:, None] * wt * eq * eq)))
    return e_max, e_l2


def solve_manufactured(case: ManufacturedCase, resolution, rtol=1e-10, x0_exact: bool = False,
                       discrete_forcing: bool = False):
    """Solve one resolution of ``case``; returns ``(u, diagnostics, op)``."""
    grid, op = discretize(case.system, case.domain, resolution)
    x0 = DiscreteField.from_function(grid, case.exact) if x0_exact else None
    if discrete_forcing:
        f = op.apply(DiscreteField.from_function(grid, case.exact))
    else:
        f = DiscreteField.from_function(grid, case.forcing)
    rows = _rows_for(case, grid)
    u, diag = solve_least_squares(op, f, rows, case.norm, rtol=rtol, x0=x0)
    return u, diag, op


def convergence_study(case: ManufacturedCase, resolutions: Sequence, rtol: float = 1e-10) -> list[dict]:
    """Errors and observed orders ``log2(e_h / e_{h/2})`` over ``resolutions``."""
    if len(resolutions) < 2:
        raise ValueError("a convergence study needs at least two resolutions")
    table = []
    for res in resolutions:
        u, diag, op = solve_manufactured(case, res, rtol)
        e_max, e_l2 = field_errors(case, u)
        table.append({"resolution": res, "h": op.grid.h, "max_error": e_max, "l2_error": e_l2,
                      "iterations": diag.iterations, "condition_estimate": diag.condition_estimate})
    for prev, row in zip(table, table[1:]):
        ratio = _ratio(prev["resolution"], row["resolution"])
        for key, okey in (("max_error", "order_max"), ("l2_error", "order_l2")):
            a, b = prev[key], row[key]
            row[okey] = math.log(a / b) / math.log(ratio) if a > 0 and b > 0 else float("nan")
    return table


def _ratio(a, b) -> float:
    a = a[0] if isinstance(a, (tuple, list)) else a
    b = b[0] if isinstance(b, (tuple, list)) else b
    return b / a
