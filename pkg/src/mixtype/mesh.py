"""Structured grids and bilinear (Q1) quadrature matrices.

Three grid families cover every domain:

* ``box_grid``: tensor grid on a rectangle (scans, tests);
* ``polar_grid``: ``(r, theta)`` grid on an annulus, periodic in theta;
* ``ruled_grid``: a mapped grid between two boundary paths with common
  endpoints, ``X(s, t) = (1 - t) A(s) + t B(s)``; the two end columns
  collapse to single nodes.

Fields live at nodes. Operators are evaluated at quadrature points of each
cell through the isoparametric bilinear map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .geometry import SQRT2, DomainKind, DomainSpec, SegmentRole, boundary_normal

TWO_PI = 2.0 * math.pi
_G = 0.5 / math.sqrt(3.0)
RULES = {
    "gauss2": (np.array([[0.5 - _G, 0.5 - _G], [0.5 + _G, 0.5 - _G], [0.5 + _G, 0.5 + _G], [0.5 - _G, 0.5 + _G]]),
               np.full(4, 0.25)),
    "center": (np.array([[0.5, 0.5]]), np.ones(1)),
}


@dataclass(frozen=True, eq=False)
class BoundaryNode:
    """Boundary data attached to a node for one segment it lies on."""

    role: SegmentRole
    segment: str
    tangent: np.ndarray
    normal: np.ndarray
    chart_normal: np.ndarray
    ds: float


@dataclass(eq=False)
class Grid:
    """Nodes, cells (four node indices, counterclockwise) and boundary tags.

    ``nodes`` and ``cell_nodes`` are chart coordinates; on periodic grids
    ``cell_nodes`` is unwrapped so every cell is a proper quadrilateral.
    ``spacing`` is the logical step in each direction. ``affine`` marks
    tensor grids whose cells are all the same rectangle.
    """

    kind: str
    chart: str
    nodes: np.ndarray
    cells: np.ndarray
    cell_nodes: np.ndarray
    spacing: tuple[float, float]
    shape: tuple[int, int]
    index: np.ndarray
    periodic: bool = False
    affine: bool = False
    boundary: dict = field(default_factory=dict)
    domain: DomainSpec | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def h(self) -> float:
        e = np.diff(self.cell_nodes[:, [0, 1, 2, 3, 0]], axis=1)
        return float(np.max(np.hypot(e[..., 0], e[..., 1])))

    @property
    def mask(self) -> np.ndarray:
        return np.ones(self.n_nodes, bool)

    def cartesian(self, pts: np.ndarray | None = None) -> np.ndarray:
        pts = self.nodes if pts is None else pts
        if self.chart == "polar":
            return np.column_stack([pts[:, 0] * np.cos(pts[:, 1]), pts[:, 0] * np.sin(pts[:, 1])])
        return pts

    def boundary_nodes(self, role=None) -> list[tuple[int, BoundaryNode]]:
        out = []
        for k in sorted(self.boundary):
            for b in self.boundary[k]:
                if role is None or b.role == SegmentRole(role):
                    out.append((k, b))
        return out

    def quadrature(self, rule: str = "gauss2") -> "Quadrature":
        if rule not in self._cache:
            self._cache[rule] = _assemble_quadrature(self, rule)
        return self._cache[rule]


@dataclass(frozen=True, eq=False)
class Quadrature:
    """Interpolation and derivative matrices from nodes to quadrature points."""

    points: np.ndarray      # chart coordinates, (nq, 2)
    weights: np.ndarray     # chart measure, (nq,)
    I: sp.csr_matrix
    D1: sp.csr_matrix
    D2: sp.csr_matrix
    cell: np.ndarray

    @property
    def n(self) -> int:
        return len(self.weights)


def _shape(xi, eta):
    N = np.array([(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta])
    dxi = np.array([-(1 - eta), 1 - eta, eta, -eta])
    deta = np.array([-(1 - xi), -xi, xi, 1 - xi])
    return N, dxi, deta


def _assemble_quadrature(grid: Grid, rule: str) -> Quadrature:
    pts_ref, w_ref = RULES[rule]
    nc = len(grid.cells)
    nqp = len(w_ref)
    X = grid.cell_nodes  # (nc, 4, 2)
    rows, cols, vi, v1, v2 = [], [], [], [], []
    qpts = np.empty((nc, nqp, 2))
    qw = np.empty((nc, nqp))
    for k, ((xi, eta), wk) in enumerate(zip(pts_ref, w_ref)):
        N, dxi, deta = _shape(xi, eta)
        qpts[:, k] = np.einsum("a,cad->cd", N, X)
        if grid.affine:
            h1, h2 = grid.spacing
            g1 = np.broadcast_to(dxi / h1, (nc, 4))
            g2 = np.broadcast_to(deta / h2, (nc, 4))
            det = np.full(nc, h1 * h2)
        else:
            J11 = dxi @ X[:, :, 0].T  # dx1/dxi
            J12 = deta @ X[:, :, 0].T  # dx1/deta
            J21 = dxi @ X[:, :, 1].T
            J22 = deta @ X[:, :, 1].T
            det = J11 * J22 - J12 * J21
            if np.any(np.abs(det) <= 1e-300):
                raise ValueError("degenerate cell in grid")
            # inverse transpose applied to reference gradients
            g1 = (J22[:, None] * dxi[None, :] - J21[:, None] * deta[None, :]) / det[:, None]
            g2 = (-J12[:, None] * dxi[None, :] + J11[:, None] * deta[None, :]) / det[:, None]
        qw[:, k] = wk * np.abs(det)
        r = (np.arange(nc) * nqp + k)[:, None].repeat(4, axis=1)
        rows.append(r.ravel())
        cols.append(grid.cells.ravel())
        vi.append(np.broadcast_to(N, (nc, 4)).ravel())
        v1.append(np.asarray(g1).ravel())
        v2.append(np.asarray(g2).ravel())
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    nq = nc * nqp
    shp = (nq, grid.n_nodes)
    mk = lambda v: sp.csr_matrix((np.concatenate(v), (rows, cols)), shape=shp)  # noqa: E731
    return Quadrature(qpts.reshape(nq, 2), qw.reshape(nq), mk(vi), mk(v1), mk(v2),
                      np.repeat(np.arange(nc), nqp))


# ---------------------------------------------------------------------------
# builders


def _tensor_cells(n1: int, n2: int, index: np.ndarray, periodic2: bool):
    m2 = n2 if periodic2 else n2 - 1
    i, j = np.meshgrid(np.arange(n1 - 1), np.arange(m2), indexing="ij")
    i, j = i.ravel(), j.ravel()
    jn = (j + 1) % n2 if periodic2 else j + 1
    cells = np.column_stack([index[i, j], index[i + 1, j], index[i + 1, jn], index[i, jn]])
    return cells, i, j


def box_grid(xlim, ylim, n1: int, n2: int | None = None) -> Grid:
    """Tensor grid with ``n1 x n2`` cells on a rectangle."""
    n2 = n1 if n2 is None else n2
    x = np.linspace(xlim[0], xlim[1], n1 + 1)
    y = np.linspace(ylim[0], ylim[1], n2 + 1)
    X, Y = np.meshgrid(x, y, indexing="ij")
    index = np.arange((n1 + 1) * (n2 + 1)).reshape(n1 + 1, n2 + 1)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    cells, _, _ = _tensor_cells(n1 + 1, n2 + 1, index, False)
    h = ((xlim[1] - xlim[0]) / n1, (ylim[1] - ylim[0]) / n2)
    return Grid("cartesian", "cartesian", nodes, cells, nodes[cells], h, (n1 + 1, n2 + 1), index, affine=True)


def polar_grid(r_in: float, r_out: float, n_r: int, n_theta: int, domain: DomainSpec | None = None) -> Grid:
    """Annulus grid; ``theta_j = 2 pi (j + 1) / n_theta`` so angles lie in (0, 2 pi]."""
    if n_r < 2 or n_theta < 3:
        raise ValueError("polar grid needs n_r >= 2 and n_theta >= 3")
    hr = (r_out - r_in) / n_r
    ht = TWO_PI / n_theta
    r = r_in + hr * np.arange(n_r + 1)
    r[-1] = r_out
    th = ht * np.arange(1, n_theta + 1)
    R, T = np.meshgrid(r, th, indexing="ij")
    index = np.arange((n_r + 1) * n_theta).reshape(n_r + 1, n_theta)
    nodes = np.column_stack([R.ravel(), T.ravel()])
    cells, ci, cj = _tensor_cells(n_r + 1, n_theta, index, True)
    cn = nodes[cells].copy()
    # unwrap the last column of cells
    cn[:, 2, 1] = cn[:, 1, 1] + ht
    cn[:, 3, 1] = cn[:, 0, 1] + ht
    boundary = {}
    eps0 = r_in
    for i, role, sign in ((0, SegmentRole.INNER, -1.0), (n_r, SegmentRole.OUTER, 1.0)):
        rr = r[i]
        cnorm = np.array([1.0, 0.0]) if role == SegmentRole.OUTER else np.array([1.0 / (eps0**2 - 1.0), 0.0])
        for j in range(n_theta):
            c, s = math.cos(th[j]), math.sin(th[j])
            boundary[int(index[i, j])] = (BoundaryNode(
                role, role.value, sign * np.array([-s, c]), sign * np.array([c, s]), cnorm, rr * ht),)
    return Grid("polar", "polar", nodes, cells, cn, (hr, ht), (n_r + 1, n_theta), index,
                periodic=True, affine=True, boundary=boundary, domain=domain)


@dataclass(frozen=True)
class _ChainPoint:
    xy: np.ndarray
    entries: tuple  # (segment index, arc length in that segment's own parameter)


def _allocate(lengths, n):
    lengths = np.asarray(lengths, float)
    if n < len(lengths):
        raise ValueError("resolution too small for the boundary pieces")
    raw = n * lengths / lengths.sum()
    k = np.maximum(1, np.floor(raw).astype(int))
    while k.sum() < n:
        k[np.argmax(raw - k)] += 1
    while k.sum() > n:
        k[np.argmax(k - raw)] -= 1
    return k


def _sample_chain(domain: DomainSpec, chain, n: int) -> list[_ChainPoint]:
    segs = [domain.segments[i] for i, _ in chain]
    counts = _allocate([s.length for s in segs], n)
    out: list[_ChainPoint] = []
    for (idx, rev), seg, m in zip(chain, segs, counts):
        L = seg.length
        for q in range(m + 1):
            frac = q / m
            s_own = L * (1 - frac) if rev else L * frac
            pt = seg.point_at(s_own)
            if q == 0 and out:
                prev = out[-1]
                out[-1] = _ChainPoint(prev.xy, prev.entries + ((idx, s_own),))
                continue
            out.append(_ChainPoint(pt, ((idx, s_own),)))
    return out


def ruled_grid(domain: DomainSpec, n_s: int, n_t: int | None = None) -> Grid:
    """Mapped grid between the two boundary chains of ``domain``."""
    if domain.chains is None:
        raise ValueError("domain has no chain decomposition")
    n_t = n_s if n_t is None else n_t
    if n_s < 2 or n_t < 1:
        raise ValueError("ruled grid needs n_s >= 2, n_t >= 1")
    A = _sample_chain(domain, domain.chains[0], n_s)
    B = _sample_chain(domain, domain.chains[1], n_s)
    if not (np.allclose(A[0].xy, B[0].xy, atol=1e-9) and np.allclose(A[-1].xy, B[-1].xy, atol=1e-9)):
        raise ValueError("boundary chains do not share endpoints")
    PA = np.array([p.xy for p in A])
    PB = np.array([p.xy for p in B])
    PB[0], PB[-1] = PA[0], PA[-1]
    t = np.arange(n_t + 1) / n_t
    X = (1 - t)[None, :, None] * PA[:, None, :] + t[None, :, None] * PB[:, None, :]
    index = np.empty((n_s + 1, n_t + 1), int)
    index[0, :] = 0
    interior = np.arange(1, 1 + (n_s - 1) * (n_t + 1)).reshape(n_s - 1, n_t + 1)
    index[1:n_s, :] = interior
    index[n_s, :] = interior[-1, -1] + 1
    N = int(index[n_s, 0]) + 1
    nodes = np.empty((N, 2))
    nodes[index.ravel()] = X.reshape(-1, 2)
    nodes[0] = PA[0]
    nodes[-1] = PA[-1]
    cells, ci, cj = _tensor_cells(n_s + 1, n_t + 1, index, False)
    cell_nodes = np.stack([X[ci, cj], X[ci + 1, cj], X[ci + 1, cj + 1], X[ci, cj + 1]], axis=1)
    # orient cells counterclockwise
    area = _quad_area(cell_nodes)
    if np.all(area < 0):
        cells = cells[:, ::-1]
        cell_nodes = cell_nodes[:, ::-1]
    elif np.any(area <= 0):
        raise ValueError("ruled map folds over; choose another chain split")

    boundary: dict[int, list[BoundaryNode]] = {}

    def add(node: int, chain_pts, i, side_edges):
        for seg_idx, s_own in chain_pts[i].entries:
            seg = domain.segments[seg_idx]
            ds = 0.0
            for (a, b) in side_edges:
                if 0 <= a < len(chain_pts) and 0 <= b < len(chain_pts):
                    if _edge_on_segment(chain_pts, a, b, seg_idx):
                        ds += 0.5 * float(np.hypot(*(chain_pts[b].xy - chain_pts[a].xy)))
            tang = seg.tangent_at(s_own)
            nrm = boundary_normal(seg, s_own)
            boundary.setdefault(node, []).append(
                BoundaryNode(seg.role, seg.name, tang, nrm, nrm.copy(), ds))

    for chain_pts, j in ((A, 0), (B, n_t)):
        for i in range(n_s + 1):
            add(int(index[i, j]), chain_pts, i, ((i - 1, i), (i, i + 1)))
    bnd = {k: tuple(v) for k, v in boundary.items()}
    hs = 1.0 / n_s
    return Grid("mapped", "cartesian", nodes, cells, cell_nodes, (hs, 1.0 / n_t), (n_s + 1, n_t + 1),
                index, boundary=bnd, domain=domain)


def _edge_on_segment(chain_pts, a, b, seg_idx) -> bool:
    ia = {e[0] for e in chain_pts[a].entries}
    ib = {e[0] for e in chain_pts[b].entries}
    return seg_idx in ia and seg_idx in ib


def _quad_area(q: np.ndarray) -> np.ndarray:
    x, y = q[..., 0], q[..., 1]
    return 0.5 * np.sum(x * np.roll(y, -1, axis=-1) - np.roll(x, -1, axis=-1) * y, axis=-1)


def build_grid(domain: DomainSpec, resolution) -> Grid:
    """Grid fitted to ``domain``.

    ``resolution`` is a cell count per direction or a pair. On the annulus a
    single count ``n`` means ``n`` radial by ``4 n`` angular cells.
    """
    if isinstance(resolution, (tuple, list)):
        n1, n2 = (int(v) for v in resolution)
    else:
        n1 = int(resolution)
        n2 = 4 * n1 if domain.kind == DomainKind.OMEGA5 else n1
    if min(n1, n2) < 2:
        raise ValueError("resolution too small")
    if domain.kind == DomainKind.OMEGA5:
        return polar_grid(domain.params["eps0"], SQRT2, n1, n2, domain=domain)
    return ruled_grid(domain, n1, n2)
