"""Projective-disc geometry and the model domains.

Points are plain ``(x, y)`` pairs (or ``(r, theta)`` on the annulus chart).
Boundary curves are sampled polylines; every domain is validated when it is
built and the validator can be re-run at any time.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from matplotlib.path import Path

SQRT2 = math.sqrt(2.0)
INV_SQRT2 = 1.0 / SQRT2
SONIC_TOL = 1e-8


class GeometryError(ValueError):
    """Raised for degenerate geometric input."""


class PoleAtInfinity(GeometryError):
    """The chord is a diameter: its tangents are parallel."""

    def __init__(self, direction):
        self.direction = tuple(float(d) for d in direction)
        super().__init__(f"pole at infinity in direction {self.direction}")


class SingularMetricError(GeometryError):
    pass


class DomainError(ValueError):
    """A domain constraint failed; ``constraint`` and ``location`` say where."""

    def __init__(self, constraint: str, location=None, detail: str = ""):
        self.constraint = constraint
        self.location = None if location is None else tuple(float(v) for v in location)
        msg = f"domain constraint violated: {constraint}"
        if self.location is not None:
            msg += f" at {self.location}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


# ---------------------------------------------------------------------------
# lines, poles, metric


@dataclass(frozen=True)
class Line2:
    """The line ``c1*x + c2*y = c0`` with ``c1**2 + c2**2 == 1``."""

    c1: float
    c2: float
    c0: float

    @classmethod
    def through(cls, p, q) -> "Line2":
        p = np.asarray(p, float)
        q = np.asarray(q, float)
        d = q - p
        nrm = math.hypot(d[0], d[1])
        if nrm == 0.0:
            raise GeometryError("coincident points do not define a line")
        c1, c2 = d[1] / nrm, -d[0] / nrm
        return cls(float(c1), float(c2), float(c1 * p[0] + c2 * p[1]))

    @property
    def direction(self) -> np.ndarray:
        return np.array([-self.c2, self.c1])

    @property
    def foot(self) -> np.ndarray:
        """Closest point of the line to the origin."""
        return np.array([self.c1 * self.c0, self.c2 * self.c0])

    def residual(self, p) -> np.ndarray | float:
        p = np.asarray(p, float)
        return self.c1 * p[..., 0] + self.c2 * p[..., 1] - self.c0

    def point(self, t) -> np.ndarray:
        t = np.asarray(t, float)
        return self.foot + t[..., None] * self.direction

    def param(self, p) -> np.ndarray | float:
        p = np.asarray(p, float)
        return (p[..., 0] - self.foot[0]) * self.direction[0] + (p[..., 1] - self.foot[1]) * self.direction[1]

    def intersect(self, other: "Line2") -> np.ndarray:
        det = self.c1 * other.c2 - self.c2 * other.c1
        if abs(det) < 1e-14:
            raise PoleAtInfinity(self.direction)
        x = (self.c0 * other.c2 - self.c2 * other.c0) / det
        y = (self.c1 * other.c0 - self.c0 * other.c1) / det
        return np.array([x, y])


def characteristic_line(theta: float) -> Line2:
    """Tangent line ``x cos(theta) + y sin(theta) = 1`` to the unit circle."""
    theta = float(theta) % (2.0 * math.pi)
    return Line2(math.cos(theta), math.sin(theta), 1.0)


def characteristic_form(p, d):
    """``(1-y^2) dx^2 + 2xy dx dy + (1-x^2) dy^2`` for direction ``d`` at ``p``.

    Vanishes exactly when ``d`` is a characteristic direction at ``p``.
    Works elementwise on stacked points and directions.
    """
    p = np.asarray(p, float)
    d = np.asarray(d, float)
    x, y = p[..., 0], p[..., 1]
    dx, dy = d[..., 0], d[..., 1]
    return (1 - y * y) * dx * dx + 2 * x * y * dx * dy + (1 - x * x) * dy * dy


def tangent_line_at(p) -> Line2:
    """Tangent to the unit circle at the circle point ``p``."""
    p = np.asarray(p, float)
    r = math.hypot(p[0], p[1])
    return Line2(p[0] / r, p[1] / r, 1.0)


def pole_of_chord(p1, p2) -> np.ndarray:
    """Intersection of the circle tangents at the chord endpoints."""
    p1 = np.asarray(p1, float)
    p2 = np.asarray(p2, float)
    for p in (p1, p2):
        if abs(math.hypot(p[0], p[1]) - 1.0) > 1e-10:
            raise GeometryError(f"point {tuple(p)} is not on the unit circle")
    if np.allclose(p1, p2, rtol=0.0, atol=1e-14):
        raise GeometryError("chord endpoints coincide")
    det = p1[0] * p2[1] - p1[1] * p2[0]
    if abs(det) < 1e-12:
        raise PoleAtInfinity(np.array([-p1[1], p1[0]]))
    x = (p2[1] - p1[1]) / det
    y = (p1[0] - p2[0]) / det
    return np.array([x, y])


def chord_endpoints(p, d) -> tuple[np.ndarray, np.ndarray]:
    """Where the line through ``p`` with direction ``d`` meets the unit circle."""
    p = np.asarray(p, float)
    d = np.asarray(d, float)
    a = d @ d
    b = 2.0 * (p @ d)
    c = p @ p - 1.0
    disc = b * b - 4 * a * c
    if disc <= 0.0:
        raise GeometryError("line misses the unit circle")
    sq = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(sq, b))
    t1, t2 = q / a, c / q
    return p + min(t1, t2) * d, p + max(t1, t2) * d


@dataclass(frozen=True)
class MetricTensor:
    g11: float
    g12: float
    g22: float
    det: float

    def matrix(self) -> np.ndarray:
        return np.array([[self.g11, self.g12], [self.g12, self.g22]])

    def inner(self, u, v) -> float:
        u = np.asarray(u, float)
        v = np.asarray(v, float)
        return float(self.g11 * u[0] * v[0] + self.g12 * (u[0] * v[1] + u[1] * v[0]) + self.g22 * u[1] * v[1])


def beltrami_metric(p) -> MetricTensor:
    """Beltrami metric of the projective disc at ``p`` (also defined outside)."""
    x, y = float(p[0]), float(p[1])
    if abs(math.hypot(x, y) - 1.0) <= SONIC_TOL:
        raise SingularMetricError(f"metric is singular on the unit circle at {(x, y)}")
    D = 1.0 - x * x - y * y
    D2 = D * D
    g11, g12, g22 = (1 - y * y) / D2, x * y / D2, (1 - x * x) / D2
    return MetricTensor(g11, g12, g22, g11 * g22 - g12 * g12)


# ---------------------------------------------------------------------------
# boundary segments and domains


class SegmentRole(str, enum.Enum):
    GAMMA = "gamma"
    C = "C"
    E = "E"
    F = "F"
    OUTER = "annulus-outer"
    INNER = "annulus-inner"


class DomainKind(str, enum.Enum):
    OMEGA1 = "omega1"
    OMEGA2 = "omega2"
    OMEGA3 = "omega3"
    OMEGA4 = "omega4"
    OMEGA5 = "omega5"


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.hypot(v[:, 0], v[:, 1])
    if np.any(n == 0.0):
        raise GeometryError("zero-length tangent")
    return v / n[:, None]


def polyline_tangents(points: np.ndarray) -> np.ndarray:
    """Unit tangents by centered differences, one-sided at the ends."""
    pts = np.asarray(points, float)
    d = np.empty_like(pts)
    d[1:-1] = pts[2:] - pts[:-2]
    d[0] = pts[1] - pts[0]
    d[-1] = pts[-1] - pts[-2]
    return _unit(d)


@dataclass(frozen=True, eq=False)
class BoundarySegment:
    """Sampled boundary piece, traversed with the domain on its left.

    ``chart_points``/``chart_normals`` hold the coordinates and normal
    covectors in the system chart; on the annulus these are ``(r, theta)``
    and multiples of ``dr``, elsewhere they equal the Cartesian data.
    """

    role: SegmentRole
    name: str
    points: np.ndarray
    s: np.ndarray
    tangents: np.ndarray
    normals: np.ndarray
    chart_points: np.ndarray
    chart_normals: np.ndarray
    closed: bool = False

    @property
    def n_samples(self) -> int:
        return len(self.points)

    @property
    def length(self) -> float:
        return float(self.s[-1])

    def reversed(self) -> "BoundarySegment":
        """Same samples walked backwards; normals stay outward."""
        pts = self.points[::-1].copy()
        s = self.s[-1] - self.s[::-1]
        return BoundarySegment(
            self.role, self.name, pts, s, -self.tangents[::-1], self.normals[::-1].copy(),
            self.chart_points[::-1].copy(), self.chart_normals[::-1].copy(), self.closed,
        )

    def locate(self, s: float) -> tuple[int, float]:
        if not (-1e-12 * max(1.0, self.length) <= s <= self.length * (1 + 1e-12)):
            raise ValueError(f"arc length {s} outside [0, {self.length}]")
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self.s, s, side="right")) - 1
        i = min(max(i, 0), len(self.s) - 2)
        ds = self.s[i + 1] - self.s[i]
        lam = 0.0 if ds == 0 else (s - self.s[i]) / ds
        return i, lam

    def point_at(self, s: float) -> np.ndarray:
        i, lam = self.locate(s)
        return (1 - lam) * self.points[i] + lam * self.points[i + 1]

    def tangent_at(self, s: float) -> np.ndarray:
        i, lam = self.locate(s)
        t = (1 - lam) * self.tangents[i] + lam * self.tangents[i + 1]
        return t / math.hypot(t[0], t[1])


def make_segment(role, name, points, tangents=None, chart_points=None, chart_normals=None,
                 closed=False) -> BoundarySegment:
    pts = np.asarray(points, float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise GeometryError("a segment needs at least two (x, y) samples")
    steps = np.hypot(*np.diff(pts, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(steps)])
    t = polyline_tangents(pts) if tangents is None else _unit(np.asarray(tangents, float))
    n = np.column_stack([t[:, 1], -t[:, 0]])
    cp = pts.copy() if chart_points is None else np.asarray(chart_points, float)
    cn = n.copy() if chart_normals is None else np.asarray(chart_normals, float)
    return BoundarySegment(SegmentRole(role), name, pts, s, t, n, cp, cn, closed)


def boundary_normal(seg: BoundarySegment, s: float) -> np.ndarray:
    """Outward unit normal at arc length ``s``, interpolated between samples."""
    i, lam = seg.locate(s)
    n = (1 - lam) * seg.normals[i] + lam * seg.normals[i + 1]
    return n / math.hypot(n[0], n[1])


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """A validated model domain.

    ``chains`` (for the non-annular domains) splits the boundary into two
    paths with common endpoints, each given as ``(segment index, reversed)``
    pairs; both paths run from the first shared vertex to the second.
    """

    kind: DomainKind
    params: dict
    segments: tuple[BoundarySegment, ...]
    chart: str = "cartesian"
    lines: dict = field(default_factory=dict)
    chains: tuple | None = None
    interior_point: tuple[float, float] = (0.0, 0.0)

    def segments_with_role(self, role) -> list[BoundarySegment]:
        role = SegmentRole(role)
        return [s for s in self.segments if s.role == role]

    def boundary_polygon(self) -> np.ndarray:
        pts = [seg.points[:-1] for seg in self.segments if not seg.closed]
        return np.concatenate(pts) if pts else np.zeros((0, 2))

    def contains(self, x, y, radius: float = 0.0) -> np.ndarray:
        """Membership of Cartesian points (closed domain up to ``radius``)."""
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        if self.kind == DomainKind.OMEGA5:
            r = np.hypot(x, y)
            e0 = self.params["eps0"]
            return (r >= e0 - radius) & (r <= SQRT2 + radius)
        path = Path(self.boundary_polygon(), closed=False)
        pts = np.column_stack([x.ravel(), y.ravel()])
        inside = path.contains_points(pts, radius=radius) | path.contains_points(pts, radius=-radius)
        return inside.reshape(x.shape)

    def all_boundary_points(self) -> np.ndarray:
        return np.concatenate([s.points for s in self.segments])


# ---------------------------------------------------------------------------
# builders


def _line_segment(role, name, line: Line2, p_from, p_to, n: int) -> BoundarySegment:
    p_from = np.asarray(p_from, float)
    p_to = np.asarray(p_to, float)
    t = np.linspace(0.0, 1.0, n)
    pts = (1 - t)[:, None] * p_from + t[:, None] * p_to
    d = p_to - p_from
    d = d / math.hypot(d[0], d[1])
    # snap samples onto the line so the characteristic residual is exact
    pts = pts - line.residual(pts)[:, None] * np.array([line.c1, line.c2])
    return make_segment(role, name, pts, tangents=np.tile(d, (n, 1)))


def _signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _check_curve(curve) -> np.ndarray:
    c = np.asarray(curve, float)
    if c.ndim != 2 or c.shape[1] != 2 or len(c) < 3:
        raise DomainError("curve needs at least three (x, y) samples")
    return c


def _cone_domain(kind, params, first: Line2, second: Line2, curve, n_line: int,
                 names=("gamma1", "gamma2")) -> DomainSpec:
    """Region bounded by two characteristic lines and a data curve C.

    ``curve`` runs counterclockwise from its point on ``first`` to its point
    on ``second``; the lines meet at the pole P.
    """
    curve = _check_curve(curve)
    c_a, c_b = curve[0], curve[-1]
    for line, c, nm in ((first, c_a, "start of C on " + names[0]), (second, c_b, "end of C on " + names[1])):
        if abs(line.residual(c)) > 1e-9:
            raise DomainError(nm, c, f"residual {line.residual(c):.3e}")
    if np.allclose(c_a, c_b, atol=1e-12):
        raise DomainError("C endpoints must be distinct", c_a)
    P = first.intersect(second)
    segs = (
        _line_segment(SegmentRole.GAMMA, names[0], first, P, c_a, n_line),
        make_segment(SegmentRole.C, "C", curve),
        _line_segment(SegmentRole.GAMMA, names[1], second, c_b, P, n_line),
    )
    lines = {names[0]: first, names[1]: second}
    p = dict(params)
    p["pole"] = (float(P[0]), float(P[1]))
    chains = (((1, False),), ((0, True), (2, True)))
    centroid = np.mean(np.concatenate([P[None], curve]), axis=0)
    return DomainSpec(DomainKind(kind), p, segs, "cartesian", lines, chains, tuple(map(float, centroid)))


def default_curve_omega1(theta: float, n: int = 65) -> np.ndarray:
    """Half-ellipse data curve for the first domain family.

    Starts at the tangency point of the upper line (or at ``(1, 1/2)`` when
    ``theta = 0``), bulges left but never past ``x = 1/sqrt 2``, and ends at
    the mirror point. At ``theta = pi/4`` it is the segment ``x = 1/sqrt 2``.
    """
    if theta > 0:
        x1, y1 = math.cos(theta), math.sin(theta)
    else:
        x1, y1 = 1.0, 0.5
    w = x1 - max(INV_SQRT2, x1 - 0.2)
    t = np.linspace(math.pi / 2, -math.pi / 2, n)
    pts = np.column_stack([x1 - w * np.cos(t), y1 * np.sin(t)])
    pts[0] = (x1, y1)
    pts[-1] = (x1, -y1)
    return pts


def omega1(theta: float = 0.0, curve=None, n_line: int = 33) -> DomainSpec:
    """Domain between the lines at angles ``theta`` and ``-theta`` and C."""
    theta = float(theta)
    if not (0.0 <= theta <= math.pi / 4 + 1e-15):
        raise DomainError("theta in [0, pi/4]", detail=f"theta = {theta}")
    if curve is None:
        curve = default_curve_omega1(theta)
    curve = _check_curve(curve)
    g1 = characteristic_line(theta)
    g2 = characteristic_line(-theta)
    params = {"theta": theta}
    if theta == 0.0:
        c1, c2 = curve[0], curve[-1]
        for c, nm in ((c1, "start of C on gamma1"), (c2, "end of C on gamma2")):
            if abs(g1.residual(c)) > 1e-9:
                raise DomainError(nm, c)
        segs = (
            _line_segment(SegmentRole.GAMMA, "gamma", g1, c2, c1, n_line),
            make_segment(SegmentRole.C, "C", curve),
        )
        chains = (((1, False),), ((0, True),))
        centroid = tuple(map(float, np.mean(curve, axis=0)))
        dom = DomainSpec(DomainKind.OMEGA1, params, segs, "cartesian",
                         {"gamma1": g1, "gamma2": g2}, chains, centroid)
    else:
        dom = _cone_domain(DomainKind.OMEGA1, params, g1, g2, curve, n_line)
    validate_domain(dom)
    return dom


def omega2(angles=(-0.1418970546041639, -1.4288992721907328), curve=None, n_line: int = 33) -> DomainSpec:
    """Fourth-quadrant domain cut off by two tangent lines and a curve C.

    ``angles`` are the tangency angles (radians, in (-pi/2, 0)); the first
    line carries the start of C. The default C is the chord joining the two
    tangency points.
    """
    a, b = (float(v) for v in angles)
    for v in (a, b):
        if not (-math.pi / 2 < v < 0.0):
            raise DomainError("tangency points in the open fourth quadrant", detail=f"angle {v}")
    if a == b:
        raise DomainError("distinct tangency points")
    first, second = characteristic_line(a), characteristic_line(b)
    if curve is None:
        t = np.linspace(0.0, 1.0, 65)[:, None]
        curve = (1 - t) * first.foot + t * second.foot
    dom = _cone_domain(DomainKind.OMEGA2, {"angles": (a, b)}, first, second, curve, n_line)
    validate_domain(dom)
    return dom


def omega3_lines(delta: float = 0.1, eps: float = 0.1):
    """Default pair of first-quadrant characteristic angles for the third family."""
    d = math.acos(0.8)
    return (math.pi / 4 + d, math.pi / 4 - d)


def default_curve_omega3(angles, y_low: float = 0.75, n: int = 65) -> np.ndarray:
    """Slightly bowed curve from the first line down to the second one.

    The endpoints sit at height ``y_low`` measured along the mirror axis:
    the start is on the first line at ``x = y_low``, the end on the second
    line at ``y = y_low``.
    """
    first, second = characteristic_line(angles[0]), characteristic_line(angles[1])
    start = np.array([y_low, (first.c0 - first.c1 * y_low) / first.c2])
    end = np.array([(second.c0 - second.c2 * y_low) / second.c1, y_low])
    mid = 0.5 * (start + end) - 0.03 * np.array([INV_SQRT2, INV_SQRT2])
    t = np.linspace(0.0, 1.0, n)[:, None]
    pts = (1 - t) ** 2 * start + 2 * t * (1 - t) * mid + t**2 * end
    pts[0], pts[-1] = start, end
    return pts


def omega3(delta: float = 0.1, eps: float = 0.1, angles=None, curve=None, n_line: int = 33) -> DomainSpec:
    """First-quadrant domain inside ``1/sqrt2 < x``, ``1/sqrt(2-delta) < y <= sqrt(1-eps)``."""
    delta, eps = float(delta), float(eps)
    if not (0 < delta < 0.5 and 0 < eps < 0.5):
        raise DomainError("0 < delta, eps < 1/2", detail=f"delta={delta}, eps={eps}")
    if angles is None:
        angles = omega3_lines(delta, eps)
    a, b = (float(v) for v in angles)
    for v in (a, b):
        if not (0.0 < v < math.pi / 2):
            raise DomainError("tangency points in the open first quadrant", detail=f"angle {v}")
    if curve is None:
        curve = default_curve_omega3((a, b))
    dom = _cone_domain(DomainKind.OMEGA3, {"delta": delta, "eps": eps, "angles": (a, b)},
                       characteristic_line(a), characteristic_line(b), curve, n_line)
    validate_domain(dom)
    return dom


def default_boundary_omega4(a: float = 1.5, b: float = 0.9, n: int = 129):
    """Ellipse split into F (lower-right quarter) and E (the rest).

    Returns ``(E, F)`` sample arrays, both counterclockwise; F ends where E
    starts and vice versa.
    """
    tf = np.linspace(-math.pi / 2, 0.0, (n - 1) // 4 + 1)
    te = np.linspace(0.0, 1.5 * math.pi, 3 * (n - 1) // 4 + 1)
    F = np.column_stack([a * np.cos(tf), b * np.sin(tf)])
    E = np.column_stack([a * np.cos(te), b * np.sin(te)])
    F[0] = E[-1] = (0.0, -b)
    F[-1] = E[0] = (a, 0.0)
    return E, F


def omega4(E=None, F=None, tangents_E=None, tangents_F=None) -> DomainSpec:
    """Domain with boundary split into E (no data) and F, checked for ``y^2 < 1``."""
    if E is None and F is None:
        E, F = default_boundary_omega4()
        a, b = 1.5, 0.9
        te = np.arctan2(E[:, 1] / b, E[:, 0] / a)
        tf = np.arctan2(F[:, 1] / b, F[:, 0] / a)
        tangents_E = np.column_stack([-a * np.sin(te), b * np.cos(te)])
        tangents_F = np.column_stack([-a * np.sin(tf), b * np.cos(tf)])
    if E is None or F is None:
        raise DomainError("both E and F must be supplied")
    E = _check_curve(E)
    F = _check_curve(F)
    segs = (
        make_segment(SegmentRole.F, "F", F, tangents=tangents_F),
        make_segment(SegmentRole.E, "E", E, tangents=tangents_E),
    )
    chains = (((0, False),), ((1, True),))
    interior = tuple(map(float, np.mean(np.concatenate([E, F]), axis=0)))
    dom = DomainSpec(DomainKind.OMEGA4, {}, segs, "cartesian", {}, chains, interior)
    validate_domain(dom)
    return dom


def omega5(eps0: float = 0.1, R: float | None = None, n_samples: int = 720) -> DomainSpec:
    """Annulus ``eps0 <= r <= sqrt 2`` in polar chart coordinates."""
    eps0 = float(eps0)
    if not (0.0 < eps0 < SQRT2):
        raise DomainError("0 < eps0 < sqrt 2", detail=f"eps0 = {eps0}")
    if eps0 == 1.0:
        raise DomainError("eps0 != 1 (inner normal scaling is singular)")
    th = 2.0 * math.pi * np.arange(1, n_samples + 1) / n_samples
    c, s = np.cos(th), np.sin(th)
    out_pts = np.column_stack([SQRT2 * c, SQRT2 * s])
    in_pts = np.column_stack([eps0 * c, eps0 * s])[::-1]
    out_chart = np.column_stack([np.full_like(th, SQRT2), th])
    in_chart = np.column_stack([np.full_like(th, eps0), th])[::-1]
    zeros = np.zeros_like(th)
    outer = make_segment(SegmentRole.OUTER, "outer", out_pts, tangents=np.column_stack([-s, c]),
                         chart_points=out_chart, chart_normals=np.column_stack([np.ones_like(th), zeros]),
                         closed=True)
    inner = make_segment(SegmentRole.INNER, "inner", in_pts, tangents=np.column_stack([s, -c])[::-1],
                         chart_points=in_chart,
                         chart_normals=np.column_stack([np.full_like(th, 1.0 / (eps0**2 - 1.0)), zeros]),
                         closed=True)
    params = {"eps0": eps0, "R": R}
    mid = 0.5 * (eps0 + SQRT2)
    dom = DomainSpec(DomainKind.OMEGA5, params, (outer, inner), "polar", {}, None, (mid, 0.0))
    validate_domain(dom)
    return dom


def build_domain(kind, **params) -> DomainSpec:
    """Dispatch on ``kind`` (``"omega1"`` ... ``"omega5"``)."""
    kind = DomainKind(kind)
    builder: Callable[..., DomainSpec] = {
        DomainKind.OMEGA1: omega1,
        DomainKind.OMEGA2: omega2,
        DomainKind.OMEGA3: omega3,
        DomainKind.OMEGA4: omega4,
        DomainKind.OMEGA5: omega5,
    }[kind]
    return builder(**params)


# ---------------------------------------------------------------------------
# validation


def _first_violation(mask: np.ndarray, pts: np.ndarray):
    idx = np.flatnonzero(mask)
    return None if idx.size == 0 else pts[idx[0]]


def _check_box(pts, xlo, xhi, ylo, yhi, name, tol=1e-12):
    bad = (pts[:, 0] < xlo - tol) | (pts[:, 0] > xhi + tol) | (pts[:, 1] < ylo - tol) | (pts[:, 1] > yhi + tol)
    loc = _first_violation(bad, pts)
    if loc is not None:
        raise DomainError(name, loc)


def validate_domain(dom: DomainSpec) -> DomainSpec:
    """Re-check every constraint of ``dom``; raises ``DomainError``."""
    pts = dom.all_boundary_points()
    kind = dom.kind
    if kind == DomainKind.OMEGA1:
        _check_box(pts, INV_SQRT2, SQRT2, -INV_SQRT2, INV_SQRT2, "1/sqrt2 <= x < sqrt2, -1/sqrt2 <= y < 1/sqrt2")
    elif kind == DomainKind.OMEGA2:
        _check_box(pts, 0.0, np.inf, -np.inf, 0.0, "fourth quadrant")
    elif kind == DomainKind.OMEGA3:
        d, e = dom.params["delta"], dom.params["eps"]
        lo_y = 1.0 / math.sqrt(2.0 - d)
        bad = (pts[:, 0] <= INV_SQRT2) | (pts[:, 1] <= lo_y) | (pts[:, 1] > math.sqrt(1.0 - e))
        loc = _first_violation(bad, pts)
        if loc is not None:
            raise DomainError("1/sqrt2 < x, 1/sqrt(2-delta) < y <= sqrt(1-eps)", loc)
    elif kind == DomainKind.OMEGA4:
        loc = _first_violation(pts[:, 1] ** 2 >= 1.0, pts)
        if loc is not None:
            raise DomainError("y^2 < 1", loc)
    elif kind == DomainKind.OMEGA5:
        r = np.hypot(pts[:, 0], pts[:, 1])
        e0 = dom.params["eps0"]
        if np.any(r < e0 * (1 - 1e-12)) or np.any(r > SQRT2 * (1 + 1e-12)):
            raise DomainError("eps0 <= r <= sqrt2")

    for seg in dom.segments:
        n = seg.normals
        if not np.allclose(np.hypot(n[:, 0], n[:, 1]), 1.0, atol=1e-12):
            raise DomainError(f"unit normals on {seg.name}")
        if np.max(np.abs(np.sum(n * seg.tangents, axis=1))) > 1e-12:
            raise DomainError(f"normal orthogonal to tangent on {seg.name}")
        if seg.role == SegmentRole.GAMMA:
            res = np.abs(characteristic_form(seg.points, seg.tangents))
            loc = _first_violation(res > 1e-10, seg.points)
            if loc is not None:
                raise DomainError(f"characteristic relation on {seg.name}", loc)
        if seg.role == SegmentRole.C:
            dy = np.diff(seg.points[:, 1])
            loc = _first_violation(dy > 1e-14, seg.points[1:])
            if loc is not None:
                raise DomainError("dy <= 0 along C (counterclockwise)", loc)

    if kind != DomainKind.OMEGA5:
        poly = dom.boundary_polygon()
        if _signed_area(poly) <= 0.0:
            raise DomainError("boundary must be counterclockwise")
    _check_outward(dom)
    return dom


def _check_outward(dom: DomainSpec) -> None:
    pts = dom.all_boundary_points()
    span = float(np.max(np.ptp(pts, axis=0)))
    step = 1e-4 * span
    for seg in dom.segments:
        m = seg.n_samples
        idx = np.unique(np.linspace(1, m - 2, min(m - 2, 9)).astype(int)) if m > 2 else np.arange(m)
        p_out = seg.points[idx] + step * seg.normals[idx]
        p_in = seg.points[idx] - step * seg.normals[idx]
        out_ok = ~dom.contains(p_out[:, 0], p_out[:, 1])
        in_ok = dom.contains(p_in[:, 0], p_in[:, 1])
        bad = ~(out_ok & in_ok)
        loc = _first_violation(bad, seg.points[idx])
        if loc is not None:
            raise DomainError(f"outward normals on {seg.name}", loc)
