"""Symmetric-positive checks: Q fields, boundary matrices and admissibility.

For ``L u = A1 u_1 + A2 u_2 + B u`` the key matrix is
``Q = (B + B^T) - dA1/dx1 - dA2/dx2``. A boundary split
``beta = beta_plus + beta_minus`` of ``beta = n1 A1 + n2 A2`` is admissible
when the null spaces of the two parts span the state space, their ranges
meet only in zero, ``sym(beta_plus - beta_minus)`` is positive semidefinite
and the boundary condition kills ``beta_minus``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import BoundarySegment, DomainKind, DomainSpec, SegmentRole
from .mesh import Grid, build_grid
from .operators import (
    MultiplierSpec,
    PerturbationParams,
    SystemSpec,
    apply_multiplier,
    assemble_system,
)
from .report import VerificationReport, combine

RANK_TOL = 1e-9


def compute_Q(sys: SystemSpec, p) -> np.ndarray:
    """``Q = 2 sym(B) - dA1/dx1 - dA2/dx2`` at one chart point."""
    return compute_Q_field(sys, p[0], p[1])


def compute_Q_field(sys: SystemSpec, x1, x2) -> np.ndarray:
    co = sys.coefficients(x1, x2)
    return (co.B + np.swapaxes(co.B, -1, -2)) - co.dA1 - co.dA2


def sym_eig_min(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Smallest eigenvalue and trace of stacked symmetric 2x2 matrices."""
    a = M[..., 0, 0]
    d = M[..., 1, 1]
    b = 0.5 * (M[..., 0, 1] + M[..., 1, 0])
    tr = a + d
    lam = 0.5 * tr - np.hypot(0.5 * (a - d), b)
    return lam, tr


def _grid_for(domain, resolution) -> Grid:
    if isinstance(domain, Grid):
        return domain
    if domain is None:
        raise ValueError("a domain or grid is required")
    return build_grid(domain, resolution)


def _psd_report(name, lam, tr, pts, tol, resolution, details=None) -> VerificationReport:
    if lam.size == 0:
        raise ValueError("empty grid")
    margin = lam + tol * (1.0 + np.abs(tr))
    k = int(np.argmin(margin))
    return VerificationReport(
        condition=name,
        passed=bool(margin[k] >= 0.0),
        worst=float(lam[k]),
        location=tuple(float(v) for v in pts[k]),
        resolution=resolution,
        tol=float(tol * (1.0 + abs(tr[k]))),
        details=details or {},
    )


def check_symmetric_positive(sys: SystemSpec, domain=None, resolution=32, tol: float = 1e-10) -> VerificationReport:
    """Scan grid nodes for symmetric ``A1, A2`` and ``Q >= 0``.

    ``domain`` may be a :class:`DomainSpec` (a fitted grid is built) or a
    ready :class:`Grid`. Eigenvalue tolerance is ``tol (1 + |trace Q|)``.
    """
    grid = _grid_for(domain, resolution)
    pts = grid.nodes
    if len(pts) == 0:
        raise ValueError("empty grid")
    co = sys.coefficients(pts[:, 0], pts[:, 1])
    asym = np.maximum(np.abs(co.A1[:, 0, 1] - co.A1[:, 1, 0]), np.abs(co.A2[:, 0, 1] - co.A2[:, 1, 0]))
    scale = 1.0 + np.maximum(np.abs(co.A1).max(axis=(1, 2)), np.abs(co.A2).max(axis=(1, 2)))
    ka = int(np.argmax(asym / scale))
    sym_rep = VerificationReport(
        "A1, A2 symmetric", bool(asym[ka] <= tol * scale[ka]), -float(asym[ka]),
        tuple(float(v) for v in pts[ka]), grid.shape, float(tol * scale[ka]))
    Q = (co.B + np.swapaxes(co.B, -1, -2)) - co.dA1 - co.dA2
    lam, tr = sym_eig_min(Q)
    q_rep = _psd_report("Q >= 0", lam, tr, pts, tol, grid.shape,
                        {"system": sys.name, "nodes": int(len(pts)), "max_abs_Q": float(np.abs(Q).max())})
    return combine(f"symmetric-positive[{sys.name}]", (sym_rep, q_rep), resolution=grid.shape)


def boundary_matrix(sys: SystemSpec, p, n) -> np.ndarray:
    """``beta = n1 A1 + n2 A2`` at a boundary point (stacked inputs allowed)."""
    p = np.asarray(p, float)
    n = np.asarray(n, float)
    co = sys.coefficients(p[..., 0], p[..., 1])
    return n[..., 0, None, None] * co.A1 + n[..., 1, None, None] * co.A2


# ---------------------------------------------------------------------------
# boundary conditions and decompositions


@dataclass(frozen=True)
class BoundaryCondition:
    """Homogeneous linear condition ``row(p, n) . u = 0`` at boundary points.

    ``kind`` is ``"tangential"`` (``u . T = 0``), ``"normal-parallel"``
    (``u1 n2 - u2 n1 = 0``), ``"mixed"`` (``tau u1 + sigma u2 = 0``) or
    ``"none"``.
    """

    kind: str
    sigma: Callable | None = None
    tau: Callable | None = None

    def rows(self, chart_points, normals, tangents=None) -> np.ndarray | None:
        normals = np.asarray(normals, float)
        if self.kind == "none":
            return None
        if self.kind == "tangential":
            if tangents is None:
                tangents = np.column_stack([-normals[:, 1], normals[:, 0]])
            return np.asarray(tangents, float)
        if self.kind == "normal-parallel":
            return np.column_stack([normals[:, 1], -normals[:, 0]])
        if self.kind == "mixed":
            th = np.asarray(chart_points, float)[:, 1]
            return np.column_stack([_call(self.tau, th), _call(self.sigma, th)])
        raise ValueError(f"unknown condition kind {self.kind!r}")


def _call(f, th):
    v = f(th) if callable(f) else f
    return np.broadcast_to(np.asarray(v, float), np.shape(th)).copy()


def mixed_condition(sigma, tau) -> BoundaryCondition:
    """``tau(theta) u1 + sigma(theta) u2 = 0`` with ``sigma^2 > tau^2`` expected."""
    return BoundaryCondition("mixed", sigma=sigma, tau=tau)


@dataclass(frozen=True, eq=False)
class BoundaryDecomposition:
    """Pointwise split ``beta = beta_plus + beta_minus`` on one segment role."""

    name: str
    role: SegmentRole
    beta_plus: Callable
    beta_minus: Callable
    condition: BoundaryCondition

    def evaluate(self, seg: BoundarySegment):
        pts, nrm = seg.chart_points, seg.chart_normals
        return self.beta_plus(pts, nrm), self.beta_minus(pts, nrm)


def theorem2_alpha(p, n, tol: float = 1e-14):
    """``alpha = -(1-y^2) n2^2/n1 + 2xy n2 - (1-x^2) n1``.

    The ``n2 = 0`` limit is the plain formula. With ``n1 = 0`` the value is
    unbounded and a ``ValueError`` points callers to the matrix form.
    """
    p = np.asarray(p, float)
    n = np.asarray(n, float)
    x, y = p[..., 0], p[..., 1]
    n1, n2 = n[..., 0], n[..., 1]
    if np.any(np.abs(n1) <= tol * np.maximum(1.0, np.abs(n2))):
        raise ValueError("alpha is singular at n1 = 0; use the boundary matrix instead")
    return -(1 - y * y) * n2 * n2 / n1 + 2 * x * y * n2 - (1 - x * x) * n1


def _disc_split_parts(pts, nrm, tol: float = 1e-14):
    # the split itself is singular where n1 = 0; those samples come back as NaN
    x, y = pts[:, 0], pts[:, 1]
    n1, n2 = nrm[:, 0], nrm[:, 1]
    n1 = np.where(np.abs(n1) <= tol * np.maximum(1.0, np.abs(n2)), np.nan, n1)
    w = 1 - y * y
    alpha = -w * n2 * n2 / n1 + 2 * x * y * n2 - (1 - x * x) * n1
    P = np.zeros((len(x), 2, 2))
    P[:, 0, 0] = -alpha
    Mn = np.zeros((len(x), 2, 2))
    Mn[:, 0, 0] = -w * n2 * n2 / n1
    Mn[:, 0, 1] = Mn[:, 1, 0] = w * n2
    Mn[:, 1, 1] = -w * n1
    return P, Mn


def split_F() -> BoundaryDecomposition:
    """Split on F: ``beta_plus = diag(-alpha, 0)``, condition ``u1 n2 - u2 n1 = 0``."""
    return BoundaryDecomposition(
        "F", SegmentRole.F,
        lambda p, n: _disc_split_parts(p, n)[0],
        lambda p, n: _disc_split_parts(p, n)[1],
        BoundaryCondition("normal-parallel"),
    )


def split_E() -> BoundaryDecomposition:
    """Split on E (no data): the roles of the two parts are exchanged."""
    return BoundaryDecomposition(
        "E", SegmentRole.E,
        lambda p, n: _disc_split_parts(p, n)[1],
        lambda p, n: _disc_split_parts(p, n)[0],
        BoundaryCondition("none"),
    )


def annulus_outer_split(E: MultiplierSpec, sigma, tau) -> BoundaryDecomposition:
    """Split on ``r = sqrt2`` for the multiplied polar system."""

    def parts(pts, nrm):
        th = pts[:, 1]
        a = E.a(pts[:, 0], th)
        c = E.c
        s = _call(sigma, th)
        t = _call(tau, th)
        den = s * s + t * t
        st = s * t
        bm = np.empty((len(th), 2, 2))
        bm[:, 0, 0] = st * c + t * t * a
        bm[:, 0, 1] = s * s * c + st * a
        bm[:, 1, 0] = -st * a + t * t * c
        bm[:, 1, 1] = -s * s * a + st * c
        bp = np.empty_like(bm)
        bp[:, 0, 0] = -st * c + s * s * a
        bp[:, 0, 1] = t * t * c - st * a
        bp[:, 1, 0] = st * a + s * s * c
        bp[:, 1, 1] = -t * t * a - st * c
        bm /= den[:, None, None]
        bp /= den[:, None, None]
        # the scaled normal dr enters linearly
        scale = nrm[:, 0][:, None, None]
        return bp * scale, bm * scale

    return BoundaryDecomposition(
        "outer", SegmentRole.OUTER,
        lambda p, n: parts(p, n)[0],
        lambda p, n: parts(p, n)[1],
        mixed_condition(sigma, tau),
    )


def annulus_inner_split(E: MultiplierSpec, sys: SystemSpec) -> BoundaryDecomposition:
    """Split on ``r = eps0``: everything goes to ``beta_plus``."""

    def bp(p, n):
        return boundary_matrix(sys, p, n)

    return BoundaryDecomposition(
        "inner", SegmentRole.INNER, bp,
        lambda p, n: np.zeros((len(p), 2, 2)),
        BoundaryCondition("none"),
    )


# ---------------------------------------------------------------------------
# admissibility


def _svd_rank(M, ref=None):
    """Numerical rank; ``ref`` is the reference size (defaults to the largest singular value)."""
    s = np.linalg.svd(M, compute_uv=False)
    thr = RANK_TOL * np.maximum(s[..., 0] if ref is None else ref, 1e-30)
    return np.sum(s > np.asarray(thr)[..., None], axis=-1), s


def _null_basis(M, ref=None):
    u, s, vt = np.linalg.svd(M)
    thr = RANK_TOL * max(s[0] if ref is None else ref, 1e-30)
    return vt[s <= thr].T if np.any(s <= thr) else np.zeros((2, 0))


def check_admissibility(sys: SystemSpec, segment: BoundarySegment, decomp: BoundaryDecomposition,
                        tol: float = 1e-10, margin: float = 0.0) -> VerificationReport:
    """Run the five pointwise admissibility checks over the segment samples."""
    if segment.role != decomp.role:
        raise ValueError(f"decomposition for {decomp.role.value} applied to {segment.role.value}")
    pts, nrm = segment.chart_points, segment.chart_normals
    bp, bm = decomp.evaluate(segment)
    finite = np.isfinite(bp).all(axis=(1, 2)) & np.isfinite(bm).all(axis=(1, 2))
    skipped = int(np.sum(~finite))
    if skipped == len(pts):
        return VerificationReport(f"admissibility[{decomp.name}]", False, -math.inf, None, segment.n_samples, tol,
                                  {"singular_samples": skipped})
    pts, nrm, bp, bm = pts[finite], nrm[finite], bp[finite], bm[finite]
    tangents = segment.tangents[finite]
    beta = boundary_matrix(sys, pts, nrm)
    m = len(pts)
    res = segment.n_samples
    loc = lambda k: tuple(float(v) for v in pts[k])  # noqa: E731

    # ranks and tolerances are relative to the size of beta at each sample
    size = np.maximum(np.linalg.norm(beta, 2, axis=(1, 2)), np.maximum(np.linalg.norm(bp, 2, axis=(1, 2)),
                                                                       np.linalg.norm(bm, 2, axis=(1, 2))))
    err = np.abs(bp + bm - beta).max(axis=(1, 2))
    k = int(np.argmax(err / (1 + size)))
    r1 = VerificationReport("reconstruction beta+ + beta- = beta", bool(err[k] <= tol * (1 + size[k])),
                            -float(err[k]), loc(k), res, float(tol * (1 + size[k])))

    span = np.empty(m)
    inter = np.empty(m)
    for i in range(m):
        ref = size[i]
        stack = np.hstack([_null_basis(bp[i], ref), _null_basis(bm[i], ref)])
        if stack.shape[1] == 0:
            span[i] = -1.0
        else:
            rk, s = _svd_rank(stack)
            span[i] = (s[1] if len(s) > 1 else 0.0) if rk >= 2 else -1.0
        rp, _ = _svd_rank(bp[i], ref)
        rm, _ = _svd_rank(bm[i], ref)
        rj, _ = _svd_rank(np.hstack([bp[i], bm[i]]), ref)
        inter[i] = float(rj - rp - rm)
    k = int(np.argmin(span))
    r2 = VerificationReport("null spaces span R^2", bool(span[k] > 0), float(span[k]), loc(k), res, 0.0,
                            {"measure": "second singular value of stacked null bases (-1 if rank < 2)"})
    k = int(np.argmin(inter))
    r3 = VerificationReport("ranges intersect trivially", bool(inter[k] >= 0), float(inter[k]), loc(k), res, 0.0,
                            {"measure": "rank[b+|b-] - rank b+ - rank b-"})

    mu = bp - bm
    lam, tr = sym_eig_min(0.5 * (mu + np.swapaxes(mu, -1, -2)))
    k = int(np.argmin(lam))
    r4 = VerificationReport("mu* >= margin", bool(lam[k] >= margin - tol * (1 + abs(tr[k]))), float(lam[k]),
                            loc(k), res, float(tol * (1 + abs(tr[k]))), {"margin": margin})

    rows = decomp.condition.rows(pts, nrm, tangents)
    if rows is None:
        viol = np.abs(bm).max(axis=(1, 2))
    else:
        u = np.column_stack([-rows[:, 1], rows[:, 0]])
        u = u / np.hypot(u[:, 0], u[:, 1])[:, None]
        viol = np.abs(np.einsum("kij,kj->ki", bm, u)).max(axis=1)
    scale = 1.0 + np.abs(beta).max(axis=(1, 2))
    k = int(np.argmax(viol / scale))
    r5 = VerificationReport("condition annihilates beta-", bool(viol[k] <= tol * scale[k]), -float(viol[k]),
                            loc(k), res, float(tol * scale[k]))
    out = combine(f"admissibility[{decomp.name}]", (r1, r2, r3, r4, r5), resolution=res)
    if skipped:
        out = VerificationReport(out.condition, out.passed, out.worst, out.location, out.resolution, out.tol,
                                 {"singular_samples": skipped}, out.children)
    return out


def validate_perturbation(params: PerturbationParams, domain=None, resolution=64) -> VerificationReport:
    """Sign and square constraints on the shifts, checked at every node."""
    if params.form == "polar":
        worst = min(params.eps1, params.eps2)
        return VerificationReport("eps1 > 0, eps2 > 0", bool(worst > 0), float(worst), None, None, 0.0)
    e1, e2, e3, e4 = params.eps1, params.eps2, params.eps3, params.eps4
    signs = VerificationReport("eps1 > 0, eps4 > 0", bool(e1 > 0 and e4 > 0), float(min(e1, e4)),
                               None, None, 0.0)
    grid = _grid_for(domain, resolution)
    pts = grid.cartesian()
    w = 1 - pts[:, 1] ** 2
    lin = e2 + w * e3
    k = int(np.argmin(lin))
    r_lin = VerificationReport("eps2 + (1-y^2) eps3 >= 0", bool(lin[k] >= 0), float(lin[k]),
                               tuple(map(float, pts[k])), grid.shape, 0.0)
    sq = 4 * w * e1 * e4 - lin**2
    k = int(np.argmin(sq))
    r_sq = VerificationReport("[eps2 + (1-y^2) eps3]^2 <= 4 (1-y^2) eps1 eps4", bool(sq[k] >= 0), float(sq[k]),
                              tuple(map(float, pts[k])), grid.shape, 0.0)
    return combine("perturbation", (signs, r_lin, r_sq), resolution=grid.shape)


# ---------------------------------------------------------------------------
# multiplier selection


@dataclass(frozen=True)
class MSelection:
    """Result of the multiplier search; ``M`` is ``None`` when infeasible."""

    M: float | None
    feasible: bool
    reports: tuple[VerificationReport, ...]
    trials: tuple[tuple[float, bool], ...]

    def to_dict(self) -> dict:
        return {"M": self.M, "feasible": self.feasible,
                "trials": [list(t) for t in self.trials],
                "reports": [r.to_dict() for r in self.reports]}


def multiplied_polar_system(c, M, eps1, eps2) -> SystemSpec:
    E = MultiplierSpec(c=c, M=M, eps1=eps1, eps2=eps2)
    base = assemble_system("optics-polar-perturbed", PerturbationParams(eps1, eps2))
    return apply_multiplier(E, base)


def annulus_checks(c, M, eps1, eps2, domain: DomainSpec, sigma=1.0, tau=0.0, margin=0.0,
                   resolution=32, tol: float = 1e-10) -> tuple[VerificationReport, ...]:
    """Q scan plus both boundary admissibility checks for one value of ``M``."""
    sysE = multiplied_polar_system(c, M, eps1, eps2)
    E = sysE.multiplier
    q = check_symmetric_positive(sysE, domain, resolution, tol)
    q_margin = q.child("Q >= 0")
    q_ok = q.passed and q_margin.worst >= margin
    q = VerificationReport(q.condition, bool(q_ok), q_margin.worst, q_margin.location, q.resolution,
                           q_margin.tol, {"margin": margin}, q.children)
    outer = domain.segments_with_role(SegmentRole.OUTER)[0]
    inner = domain.segments_with_role(SegmentRole.INNER)[0]
    a_out = check_admissibility(sysE, outer, annulus_outer_split(E, sigma, tau), tol, margin)
    a_in = check_admissibility(sysE, inner, annulus_inner_split(E, sysE), tol, 0.0)
    return q, a_out, a_in


def select_M(c, eps1, eps2, domain: DomainSpec, margin: float = 1e-6, sigma=1.0, tau=0.0,
             resolution=32, cap: float = 1e12, sig_figs: int = 3) -> MSelection:
    """Smallest ``M`` (doubling from ``10 c``, then bisection) passing all checks."""
    if not (c > 0 and eps1 > 0 and eps2 > 0 and margin >= 0):
        raise ValueError("need c, eps1, eps2 > 0 and margin >= 0")
    if domain.kind != DomainKind.OMEGA5:
        raise ValueError("multiplier search runs on the annulus")
    trials: list[tuple[float, bool]] = []

    def ok(M):
        reps = annulus_checks(c, M, eps1, eps2, domain, sigma, tau, margin, resolution)
        good = all(r.passed for r in reps)
        trials.append((float(M), bool(good)))
        return good, reps

    lo = None
    M = 10.0 * c
    good, reps = ok(M)
    while not good:
        lo = M
        M *= 2.0
        if M > cap:
            return MSelection(None, False, reps, tuple(trials))
        good, reps = ok(M)
    hi, hi_reps = M, reps
    if lo is not None:
        while (hi - lo) > 10.0 ** (-sig_figs) * hi:
            mid = 0.5 * (lo + hi)
            g, r = ok(mid)
            if g:
                hi, hi_reps = mid, r
            else:
                lo = mid
    return MSelection(float(hi), True, hi_reps, tuple(trials))
