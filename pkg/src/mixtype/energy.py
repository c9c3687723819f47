"""Energy-estimate machinery for the three Hodge cases.

With a scalar multiplier ``a`` the pairing ``(L* w, a w)`` splits into a
boundary integral ``I`` and an interior quadratic form
``alpha w1^2 + 2 beta w1 w2 + gamma w2^2``. This module evaluates both,
scans the form for nonnegativity and estimates the constant of the basic
inequality ``K |w|_* <= |L* w|^*`` on a discrete constrained space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .geometry import BoundarySegment, DomainSpec, SegmentRole, characteristic_form
from .mesh import Grid, build_grid
from .operators import SystemSpec, adjoint, assemble_system
from .report import VerificationReport, combine

CASES = (1, 2, 3)


def _case(case) -> int:
    c = int(case)
    if c not in CASES:
        raise ValueError(f"case must be 1, 2 or 3, got {case!r}")
    return c


def case_multiplier(case) -> Callable:
    """``a = x^2``, ``1`` or ``xy`` for cases 1, 2, 3."""
    c = _case(case)
    if c == 1:
        return lambda x, y: np.asarray(x, float) ** 2
    if c == 2:
        return lambda x, y: np.ones_like(np.asarray(x, float) + np.asarray(y, float))
    return lambda x, y: np.asarray(x, float) * np.asarray(y, float)


def _multiplier_gradient(case):
    c = _case(case)
    if c == 1:
        return lambda x, y: (2 * x, np.zeros_like(y))
    if c == 2:
        return lambda x, y: (np.zeros_like(x), np.zeros_like(y))
    return lambda x, y: (y, x)


@dataclass(frozen=True)
class NormSpec:
    """Weights of the solution norm and of its dual for one case.

    Case 1: ``(|2x^2-1|, |2y^2-1|)``; case 2: ``(x, |y|)``; case 3:
    ``(1, 1)``. Dual weights are reciprocals; points whose weight falls
    below the exclusion threshold get dual weight zero.
    """

    case: int

    def __post_init__(self):
        _case(self.case)

    def weights(self, xy) -> tuple[np.ndarray, np.ndarray]:
        xy = np.asarray(xy, float)
        x, y = xy[..., 0], xy[..., 1]
        if self.case == 1:
            return np.abs(2 * x * x - 1), np.abs(2 * y * y - 1)
        if self.case == 2:
            return np.abs(x), np.abs(y)
        return np.ones_like(x), np.ones_like(y)

    def dual(self, xy, exclusion: float = 1e-8) -> np.ndarray:
        w1, w2 = self.weights(xy)
        w = np.column_stack([w1, w2])
        out = np.zeros_like(w)
        keep = w >= exclusion
        out[keep] = 1.0 / w[keep]
        return out


class FormCoefficients(NamedTuple):
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    @property
    def discriminant(self):
        return self.alpha * self.gamma - self.beta * self.beta


def form_coefficients(case, p) -> FormCoefficients:
    """Interior coefficients of ``w1^2``, ``w1 w2`` (as ``2 beta``) and ``w2^2``."""
    c = _case(case)
    p = np.asarray(p, float)
    x, y = p[..., 0], p[..., 1]
    if c == 1:
        return FormCoefficients(x * (3 * x * x - 1), y * x * x, x * (1 - y * y))
    if c == 2:
        return FormCoefficients(2 * x, np.zeros_like(x), -2 * y)
    return FormCoefficients(0.5 * y * (3 * x * x - 1), -0.5 * (1 - y * y) * x, 0.5 * y * (1 - y * y))


def integration_by_parts_form(sys: SystemSpec, a: Callable, grad_a: Callable, p) -> FormCoefficients:
    """Interior form of ``(L w, a w)`` for a general system and multiplier.

    ``a w.Lw = 1/2 div(a w.A1 w, a w.A2 w) + w.S w`` with
    ``S = a sym(B) - 1/2 (d(a A1)/dx + d(a A2)/dy)``.
    """
    p = np.asarray(p, float)
    x, y = p[..., 0], p[..., 1]
    co = sys.coefficients(x, y)
    av = np.asarray(a(x, y), float)
    ax, ay = grad_a(x, y)
    symB = 0.5 * (co.B + np.swapaxes(co.B, -1, -2))
    S = av[..., None, None] * symB - 0.5 * (
        np.asarray(ax)[..., None, None] * co.A1 + av[..., None, None] * co.dA1
        + np.asarray(ay)[..., None, None] * co.A2 + av[..., None, None] * co.dA2)
    return FormCoefficients(S[..., 0, 0], 0.5 * (S[..., 0, 1] + S[..., 1, 0]), S[..., 1, 1])


def scan_quadratic_form(case, domain: DomainSpec | Grid, resolution=256, tol: float = 1e-12,
                        n_random: int = 1000, seed: int = 0) -> VerificationReport:
    """Minimum of ``alpha gamma - beta^2`` over grid nodes.

    In case 1 the chain ``2 beta w1 w2 >= -2x|x w1||y w2| >= -(x^3 w1^2 + x y^2 w2^2)``
    is also checked on random ``w`` at random nodes.
    """
    c = _case(case)
    grid = domain if isinstance(domain, Grid) else build_grid(domain, resolution)
    pts = grid.cartesian()
    fc = form_coefficients(c, pts)
    disc = fc.discriminant
    k = int(np.argmin(disc))
    main = VerificationReport(f"alpha*gamma - beta^2 >= 0 (case {c})", bool(disc[k] >= -tol), float(disc[k]),
                              tuple(map(float, pts[k])), grid.shape, tol, {"nodes": int(len(pts))})
    if c != 1:
        return main
    rng = np.random.Generator(np.random.Philox(seed))
    idx = rng.integers(0, len(pts), n_random)
    w = rng.standard_normal((n_random, 2))
    x, y = pts[idx, 0], pts[idx, 1]
    beta = fc.beta[idx]
    lhs = 2 * beta * w[:, 0] * w[:, 1]
    mid = -2 * x * np.abs(x * w[:, 0]) * np.abs(y * w[:, 1])
    rhs = -(x**3 * w[:, 0] ** 2 + x * y * y * w[:, 1] ** 2)
    scale = 1 + np.abs(lhs) + np.abs(rhs)
    slack = np.minimum(lhs - mid, mid - rhs) / scale
    j = int(np.argmin(slack))
    bound = VerificationReport("case-1 cross-term bound", bool(slack[j] >= -tol), float(slack[j]),
                               (float(x[j]), float(y[j])), n_random, tol, {"seed": seed})
    return combine(f"quadratic form (case {c})", (main, bound), resolution=grid.shape)


def boundary_integrand(case, p, w, d) -> np.ndarray:
    """Integrand of ``I`` against the oriented line element ``d = (dx, dy)``.

    ``(a/2)[(1-x^2) w1^2 dy + 2xy w1^2 dx] - a[(1-y^2) w1 w2 dx + (1/2)(1-y^2) w2^2 dy]``.
    """
    p = np.asarray(p, float)
    w = np.asarray(w, float)
    d = np.asarray(d, float)
    x, y = p[..., 0], p[..., 1]
    w1, w2 = w[..., 0], w[..., 1]
    dx, dy = d[..., 0], d[..., 1]
    a = case_multiplier(case)(x, y)
    return 0.5 * a * ((1 - x * x) * w1 * w1 * dy + 2 * x * y * w1 * w1 * dx) - a * (
        (1 - y * y) * w1 * w2 * dx + 0.5 * (1 - y * y) * w2 * w2 * dy)


def gamma_integrand(case, p, w, tangent, rel_tol: float = 1e-10) -> float:
    """Boundary integrand on a characteristic, for ``w`` with ``w2 dy = -w1 dx``.

    Vanishes identically when both relations hold; raises ``ValueError``
    when ``w`` or the direction violates its precondition.
    """
    p = np.asarray(p, float)
    w = np.asarray(w, float)
    d = np.asarray(tangent, float)
    dn = math.hypot(d[0], d[1])
    wn = math.hypot(w[0], w[1])
    if dn == 0.0:
        raise ValueError("tangent must be nonzero")
    char = float(characteristic_form(p, d / dn))
    if abs(char) > rel_tol * (1.0 + float(np.dot(p, p))):
        raise ValueError(f"direction is not characteristic at {tuple(p)} (residual {char:.3e})")
    rel = w[1] * d[1] + w[0] * d[0]
    if abs(rel) > rel_tol * wn * dn:
        raise ValueError("w violates w2 dy = -w1 dx")
    return float(boundary_integrand(case, p, w, d))


class BoundaryIntegral(NamedTuple):
    value: float
    hypothesis_holds: bool
    max_dy: float


def c_boundary_integral(case, segment: BoundarySegment, w_field: Callable, tol: float = 1e-12) -> BoundaryIntegral:
    """Composite trapezoid value of ``I`` along a data curve with ``w1 = 0``.

    ``hypothesis_holds`` is false when ``dy > 0`` somewhere along the
    counterclockwise traversal, in which case the sign is not guaranteed.
    """
    if segment.role != SegmentRole.C:
        raise ValueError("expected a C segment")
    pts = segment.points
    w = np.asarray(w_field(pts[:, 0], pts[:, 1]), float)
    if np.max(np.abs(w[:, 0])) > tol * (1 + np.max(np.abs(w))):
        raise ValueError("w1 must vanish on C")
    dpts = np.diff(pts, axis=0)
    # trapezoid: average the integrand coefficients at both ends of each piece
    vals = []
    for end in (0, 1):
        sl = slice(0, -1) if end == 0 else slice(1, None)
        vals.append(boundary_integrand(case, pts[sl], w[sl], dpts))
    value = float(np.sum(0.5 * (vals[0] + vals[1])))
    max_dy = float(np.max(dpts[:, 1]))
    return BoundaryIntegral(value, max_dy <= 0.0, max_dy)


# ---------------------------------------------------------------------------
# discrete basic-inequality constant


@dataclass(frozen=True, eq=False)
class BasicConstantEstimate:
    K: float
    w: object  # DiscreteField
    resolution: object
    excluded_fraction: float
    n_constrained_dofs: int
    converged: bool
    ratio_check: float

    def to_dict(self) -> dict:
        return {"K": self.K, "resolution": self.resolution, "excluded_fraction": self.excluded_fraction,
                "n_dofs": self.n_constrained_dofs, "converged": self.converged,
                "ratio_check": self.ratio_check}


def constrained_basis(grid: Grid) -> sp.csr_matrix:
    """Columns spanning nodal fields with ``w . T = 0`` on Γ and ``w1 = 0`` on C."""
    N = grid.n_nodes
    rows, cols, vals = [], [], []
    m = 0
    for k in range(N):
        conds = []
        for b in grid.boundary.get(k, ()):
            if b.role == SegmentRole.GAMMA:
                conds.append(b.tangent)
            elif b.role == SegmentRole.C:
                conds.append(np.array([1.0, 0.0]))
        if not conds:
            dirs = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
        else:
            C = np.array(conds)
            _, s, vt = np.linalg.svd(C)
            rank = int(np.sum(s > 1e-9 * s[0]))
            dirs = list(vt[rank:])
        for d in dirs:
            for comp in (0, 1):
                if d[comp] != 0.0:
                    rows.append(comp * N + k)
                    cols.append(m)
                    vals.append(d[comp])
            m += 1
    if m == 0:
        raise ValueError("constrained space is empty")
    return sp.csr_matrix((vals, (rows, cols)), shape=(2 * N, m))


def estimate_basic_constant(case, domain: DomainSpec, resolution=32, exclusion: float = 1e-8,
                            tol: float = 1e-8, maxiter: int = 500) -> BasicConstantEstimate:
    """Smallest value of ``|L* w|^* / |w|_*`` over constrained bilinear fields.

    Solves the pencil ``A v = lam M v`` with ``A = Z^T L*^T D^* L* Z`` and
    ``M = Z^T I^T D_* I Z`` by shift-invert Lanczos; ``K = sqrt(lam_min)``.
    """
    from .solver import discretize

    c = _case(case)
    sysA = adjoint(assemble_system(f"hodge-case{c}"))
    grid = build_grid(domain, resolution)
    _, op = discretize(sysA, grid)
    q = grid.quadrature(op.rule)
    norm = NormSpec(c)
    xy = grid.cartesian(q.points)
    w1, w2 = norm.weights(xy)
    dual = norm.dual(xy, exclusion)
    excluded = (np.column_stack([w1, w2]) < exclusion)
    excl_frac = float(np.sum(q.weights[:, None] * excluded) / (2 * np.sum(q.weights)))
    Z = constrained_basis(grid)
    Ibig = sp.block_diag([q.I, q.I], format="csr")
    Dp = sp.diags(np.concatenate([q.weights * w1, q.weights * w2]))
    Dd = sp.diags(np.concatenate([q.weights * dual[:, 0], q.weights * dual[:, 1]]))
    LZ = op.matrix @ Z
    IZ = Ibig @ Z
    A = sp.csc_matrix(LZ.T @ Dd @ LZ)
    M = sp.csc_matrix(IZ.T @ Dp @ IZ)
    m = A.shape[0]
    shift = -1e-10 * float(A.diagonal().mean() / max(M.diagonal().mean(), 1e-300))
    v0 = np.ones(m)
    vals, vecs = eigsh(A, k=1, M=M, sigma=shift, which="LM", v0=v0, tol=tol, maxiter=maxiter * m)
    lam = max(float(vals[0]), 0.0)
    v = vecs[:, 0]
    from .solver import DiscreteField

    wfield = DiscreteField.from_flat(grid, Z @ v)
    num = float(v @ (A @ v))
    den = float(v @ (M @ v))
    ratio = math.sqrt(max(num, 0.0) / den)
    return BasicConstantEstimate(math.sqrt(lam), wfield, grid.shape, excl_frac, m, True, ratio)


def _adjoint_operator(case, grid: Grid):
    from .solver import discretize

    _, op = discretize(adjoint(assemble_system(f"hodge-case{_case(case)}")), grid)
    return op


def discrete_norms(case, grid: Grid, w, exclusion: float = 1e-8) -> tuple[float, float]:
    """``(|L* w|^*, |w|_*)`` for a nodal field on ``grid``."""
    op = _adjoint_operator(case, grid)
    q = grid.quadrature(op.rule)
    norm = NormSpec(_case(case))
    xy = grid.cartesian(q.points)
    w1, w2 = norm.weights(xy)
    Lw = op.apply(w)
    wq = w.at_quadrature(op.rule)
    dual = norm.dual(xy, exclusion)
    a = math.sqrt(float(np.sum(q.weights[:, None] * dual * Lw * Lw)))
    b = math.sqrt(float(np.sum(q.weights[:, None] * np.column_stack([w1, w2]) * wq * wq)))
    return a, b


def dual_pairing_check(case, grid: Grid, w, u, exclusion: float = 1e-8):
    """``(|(L* w, u)|, |L* w|^* |u|_*)`` for nodal ``w`` and ``u`` on ``grid``.

    The pairing skips the excluded set, matching the dual norm.
    """
    op = _adjoint_operator(case, grid)
    q = grid.quadrature(op.rule)
    keep = NormSpec(_case(case)).dual(grid.cartesian(q.points), exclusion) > 0
    Lw = op.apply(w)
    pair = float(np.sum(q.weights[:, None] * Lw * u.at_quadrature(op.rule) * keep))
    nLw, _ = discrete_norms(case, grid, w, exclusion)
    _, nu = discrete_norms(case, grid, u, exclusion)
    return abs(pair), nLw * nu
