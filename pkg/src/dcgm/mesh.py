"""Unstructured triangle meshes: construction, text IO, point location.

Meshes are plain vertex/connectivity arrays plus a few precomputed tables
(areas, barycentric transforms, edge adjacency) used by assembly and by the
point-location walk.  Triangles are stored counterclockwise; boundary edges
are stored oriented so that the domain lies on their left, which makes the
outward normal of edge (a, b) proportional to (b_y - a_y, a_x - b_x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TriMesh",
    "TriangleWalker",
    "build_disk_mesh",
    "build_rect_mesh",
    "save_mesh",
    "load_mesh",
    "locate_point",
    "project_to_domain",
]

# barycentric slack accepted by the location predicates; a point is treated
# as inside a triangle when all coordinates are >= -_BARY_TOL
_BARY_TOL = 1e-12


@dataclass(eq=False)
class TriMesh:
    """Triangulated planar domain.

    Attributes
    ----------
    vertices : ndarray, shape (nv, 2)
    triangles : ndarray, shape (nt, 3)
        Vertex indices, counterclockwise.
    boundary_edges : ndarray, shape (nbe, 2)
        Oriented boundary segments (domain on the left).
    boundary_labels : ndarray, shape (nbe,)
    regions : ndarray, shape (nt,)

    Arrays are owned by the mesh and must not be mutated after construction;
    derived tables are computed once in ``__post_init__``.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_labels: np.ndarray
    regions: np.ndarray = None

    # derived, filled in __post_init__
    areas: np.ndarray = field(init=False, repr=False)
    neighbors: np.ndarray = field(init=False, repr=False)
    is_boundary_vertex: np.ndarray = field(init=False, repr=False)
    convex: bool = field(init=False, repr=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        self.boundary_edges = np.ascontiguousarray(
            self.boundary_edges, dtype=np.int64
        ).reshape(-1, 2)
        self.boundary_labels = np.ascontiguousarray(
            self.boundary_labels, dtype=np.int64
        )
        if self.regions is None:
            self.regions = np.zeros(self.triangles.shape[0], dtype=np.int64)
        self.regions = np.ascontiguousarray(self.regions, dtype=np.int64)

        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise ValueError("vertices must have shape (nv, 2)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise ValueError("triangles must have shape (nt, 3)")
        if self.triangles.size and (
            self.triangles.min() < 0 or self.triangles.max() >= self.nv
        ):
            raise ValueError("triangle vertex index out of range")
        if self.boundary_labels.shape != (self.boundary_edges.shape[0],):
            raise ValueError("one label per boundary edge required")
        if self.regions.shape != (self.triangles.shape[0],):
            raise ValueError("one region tag per triangle required")

        tri_xy = self.vertices[self.triangles]  # (nt, 3, 2)
        e1 = tri_xy[:, 1] - tri_xy[:, 0]
        e2 = tri_xy[:, 2] - tri_xy[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        if np.any(det <= 0.0):
            bad = int(np.sum(det <= 0.0))
            raise ValueError(
                f"{bad} triangles are degenerate or clockwise; need ccw orientation"
            )
        self.areas = 0.5 * det
        self._tri_xy = tri_xy
        self._v0 = tri_xy[:, 0]
        # rows of the barycentric transform: for p in triangle k with
        # d = p - v0, the coordinates are l1 = R[k,0].d, l2 = R[k,1].d,
        # l0 = 1 - l1 - l2
        rows = np.empty((self.nt, 2, 2))
        rows[:, 0, 0] = e2[:, 1] / det
        rows[:, 0, 1] = -e2[:, 0] / det
        rows[:, 1, 0] = -e1[:, 1] / det
        rows[:, 1, 1] = e1[:, 0] / det
        self._bary_rows = rows

        self.neighbors = self._build_neighbors()
        self.is_boundary_vertex = np.zeros(self.nv, dtype=bool)
        if self.boundary_edges.size:
            self.is_boundary_vertex[self.boundary_edges.ravel()] = True
        self.convex = self._boundary_is_convex()
        self._h_max = None

    # ------------------------------------------------------------------
    # basic queries

    @property
    def nv(self) -> int:
        return self.vertices.shape[0]

    @property
    def nt(self) -> int:
        return self.triangles.shape[0]

    @property
    def nbe(self) -> int:
        return self.boundary_edges.shape[0]

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    @property
    def h_max(self) -> float:
        """Longest edge length over all triangles."""
        if self._h_max is None:
            xy = self._tri_xy
            h2 = 0.0
            for a, b in ((0, 1), (1, 2), (2, 0)):
                d = xy[:, a] - xy[:, b]
                h2 = max(h2, float(np.max(d[:, 0] ** 2 + d[:, 1] ** 2)))
            self._h_max = math.sqrt(h2)
        return self._h_max

    @property
    def interior_vertices(self) -> np.ndarray:
        return np.flatnonzero(~self.is_boundary_vertex)

    @property
    def boundary_vertices(self) -> np.ndarray:
        return np.flatnonzero(self.is_boundary_vertex)

    def triangle_coords(self, k: int) -> np.ndarray:
        """Corner coordinates of triangle ``k``, shape (3, 2)."""
        return self._tri_xy[k]

    def barycentric(self, tris, points) -> np.ndarray:
        """Barycentric coordinates of ``points`` (m, 2) in triangles ``tris`` (m,).

        Works on scalars as well; no containment check is performed.
        """
        tris = np.asarray(tris, dtype=np.int64)
        points = np.asarray(points, dtype=float)
        scalar = points.ndim == 1
        pts = points.reshape(-1, 2)
        t = tris.reshape(-1)
        d = pts - self._v0[t]
        rows = self._bary_rows[t]
        l1 = rows[:, 0, 0] * d[:, 0] + rows[:, 0, 1] * d[:, 1]
        l2 = rows[:, 1, 0] * d[:, 0] + rows[:, 1, 1] * d[:, 1]
        lam = np.stack([1.0 - l1 - l2, l1, l2], axis=1)
        return lam[0] if scalar else lam

    # ------------------------------------------------------------------
    # derived-table construction

    def _build_neighbors(self) -> np.ndarray:
        """neighbors[k, j] = triangle across the edge opposite local vertex j."""
        nt = self.nt
        neigh = np.full((nt, 3), -1, dtype=np.int64)
        edge_owner: dict[tuple[int, int], tuple[int, int]] = {}
        tris = self.triangles
        for k in range(nt):
            for j in range(3):
                a = int(tris[k, (j + 1) % 3])
                b = int(tris[k, (j + 2) % 3])
                key = (a, b) if a < b else (b, a)
                other = edge_owner.pop(key, None)
                if other is None:
                    edge_owner[key] = (k, j)
                else:
                    k2, j2 = other
                    neigh[k, j] = k2
                    neigh[k2, j2] = k
        return neigh

    def _boundary_loop(self) -> np.ndarray | None:
        """Vertex sequence of the boundary if it is a single simple loop."""
        if not self.boundary_edges.size:
            return None
        succ: dict[int, int] = {}
        for a, b in self.boundary_edges:
            a, b = int(a), int(b)
            if a in succ:
                return None
            succ[a] = b
        start = int(self.boundary_edges[0, 0])
        loop = [start]
        v = succ.get(start)
        while v is not None and v != start and len(loop) <= len(succ):
            loop.append(v)
            v = succ.get(v)
        if v != start or len(loop) != len(succ):
            return None
        return np.array(loop, dtype=np.int64)

    def _boundary_is_convex(self) -> bool:
        loop = self._boundary_loop()
        if loop is None:
            return False
        p = self.vertices[loop]
        a = np.roll(p, -1, axis=0) - p
        b = np.roll(a, -1, axis=0)
        cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        scale = float(np.max(a[:, 0] ** 2 + a[:, 1] ** 2))
        return bool(np.all(cross >= -1e-12 * scale))


# ----------------------------------------------------------------------
# point location


def _scan_for_point(mesh: TriMesh, point: np.ndarray):
    """Lowest-index triangle containing ``point``, or None.

    Brute force over all triangles; used as the deterministic tie-break and
    as the fallback when the edge walk gives up.
    """
    d = point[None, :] - mesh._v0
    rows = mesh._bary_rows
    l1 = rows[:, 0, 0] * d[:, 0] + rows[:, 0, 1] * d[:, 1]
    l2 = rows[:, 1, 0] * d[:, 0] + rows[:, 1, 1] * d[:, 1]
    l0 = 1.0 - l1 - l2
    ok = (l0 >= -_BARY_TOL) & (l1 >= -_BARY_TOL) & (l2 >= -_BARY_TOL)
    hits = np.flatnonzero(ok)
    if hits.size == 0:
        return None
    k = int(hits[0])
    return k, np.array([l0[k], l1[k], l2[k]])


def _clamp_bary(lam: np.ndarray) -> np.ndarray:
    """Clip to [0, 1] and renormalize so the coordinates sum to one."""
    lam = np.clip(lam, 0.0, 1.0)
    return lam / lam.sum()


def locate_point(mesh: TriMesh, point, hint: int | None = None):
    """Find the triangle containing ``point``.

    Returns ``(triangle_index, barycentric)`` with the coordinates clamped to
    the closed triangle and summing to one, or ``None`` when the point lies
    outside the mesh.  The result does not depend on ``hint``: a point within
    tolerance of an edge is resolved by a full scan that always reports the
    lowest containing triangle index.
    """
    point = np.asarray(point, dtype=float).reshape(2)
    k = 0 if hint is None else int(hint)
    if not 0 <= k < mesh.nt:
        k = 0
    max_steps = 4 * mesh.nt
    for _ in range(max_steps):
        lam = mesh.barycentric(k, point)
        j = int(np.argmin(lam))
        if lam[j] >= -_BARY_TOL:
            if lam[j] <= _BARY_TOL:
                # on or next to an edge: several triangles may accept the
                # point, so make the answer hint-independent
                hit = _scan_for_point(mesh, point)
                if hit is None:
                    return None
                return hit[0], _clamp_bary(hit[1])
            return k, _clamp_bary(lam)
        nxt = int(mesh.neighbors[k, j])
        if nxt < 0:
            if mesh.convex:
                # beyond a boundary edge line of a convex domain
                return None
            break
        k = nxt
    hit = _scan_for_point(mesh, point)
    if hit is None:
        return None
    return hit[0], _clamp_bary(hit[1])


def _locate_batch(mesh: TriMesh, points: np.ndarray, hints: np.ndarray):
    """Vectorized edge walk for many points.

    Parameters
    ----------
    points : ndarray (m, 2)
    hints : ndarray (m,)
        Starting triangle per point (the walk is short when hints are near).

    Returns
    -------
    tris : ndarray (m,) int
        Containing triangle, or -1 for points outside the mesh.
    bary : ndarray (m, 3)
        Clamped barycentric coordinates (unspecified for outside points).

    Unlike :func:`locate_point` no tie-break scan is applied on edge hits;
    with fixed hints the walk itself is deterministic.
    """
    m = points.shape[0]
    tri = np.array(hints, dtype=np.int64).copy()
    tri[(tri < 0) | (tri >= mesh.nt)] = 0
    bary = np.zeros((m, 3))
    state = np.zeros(m, dtype=np.int8)  # 0 walking, 1 found, 2 outside, 3 stuck
    active = np.arange(m)
    max_rounds = 4 * mesh.nt
    for _ in range(max_rounds):
        if active.size == 0:
            break
        lam = mesh.barycentric(tri[active], points[active])
        j = np.argmin(lam, axis=1)
        lmin = lam[np.arange(active.size), j]
        done = lmin >= -_BARY_TOL
        idx_done = active[done]
        bary[idx_done] = lam[done]
        state[idx_done] = 1
        moving = ~done
        idx_mov = active[moving]
        nxt = mesh.neighbors[tri[idx_mov], j[moving]]
        off = nxt < 0
        if np.any(off):
            idx_off = idx_mov[off]
            if mesh.convex:
                state[idx_off] = 2
            else:
                state[idx_off] = 3
        ok = ~off
        tri[idx_mov[ok]] = nxt[ok]
        active = idx_mov[ok]
    state[active] = 3  # ran out of rounds
    for i in np.flatnonzero(state == 3):
        hit = _scan_for_point(mesh, points[i])
        if hit is None:
            state[i] = 2
        else:
            tri[i], bary[i] = hit
            state[i] = 1
    found = state == 1
    bary[found] = np.clip(bary[found], 0.0, 1.0)
    bary[found] /= bary[found].sum(axis=1, keepdims=True)
    tri[~found] = -1
    return tri, bary


class TriangleWalker:
    """Point locator that remembers the last containing triangle.

    Successive queries along a path (cross sections, sampled curves) then
    start the walk next door, which keeps location close to O(1) per query.
    """

    def __init__(self, mesh: TriMesh):
        self.mesh = mesh
        self._last = 0

    def locate(self, point):
        hit = locate_point(self.mesh, point, hint=self._last)
        if hit is not None:
            self._last = hit[0]
        return hit


def project_to_domain(mesh: TriMesh, point) -> np.ndarray:
    """Closest point of the closed meshed domain.

    Points already in the mesh are returned unchanged; outside points are
    pulled to the nearest location on the boundary polyline.
    """
    point = np.asarray(point, dtype=float).reshape(2)
    if locate_point(mesh, point) is not None:
        return point.copy()
    a = mesh.vertices[mesh.boundary_edges[:, 0]]
    b = mesh.vertices[mesh.boundary_edges[:, 1]]
    ab = b - a
    denom = ab[:, 0] ** 2 + ab[:, 1] ** 2
    denom[denom == 0.0] = 1.0
    t = ((point[0] - a[:, 0]) * ab[:, 0] + (point[1] - a[:, 1]) * ab[:, 1]) / denom
    t = np.clip(t, 0.0, 1.0)
    q = a + t[:, None] * ab
    d2 = (q[:, 0] - point[0]) ** 2 + (q[:, 1] - point[1]) ** 2
    return q[int(np.argmin(d2))].copy()


# ----------------------------------------------------------------------
# mesh builders


def build_rect_mesh(nx: int, ny: int, x_max: float, y_max: float) -> TriMesh:
    """Structured triangulation of the rectangle [0, x_max] x [0, y_max].

    ``nx`` by ``ny`` grid vertices; each grid cell is split along its
    up-right diagonal, giving 2 (nx-1) (ny-1) triangles.  Boundary labels:
    1 bottom, 2 right, 3 top, 4 left, traversed counterclockwise.
    """
    if nx < 2 or ny < 2:
        raise ValueError("need at least a 2 x 2 vertex grid")
    if not (x_max > 0.0 and y_max > 0.0):
        raise ValueError("rectangle extents must be positive")
    xs = np.linspace(0.0, x_max, nx)
    ys = np.linspace(0.0, y_max, ny)
    xx, yy = np.meshgrid(xs, ys)  # row j -> y = ys[j]
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    tris = []
    for j in range(ny - 1):
        for i in range(nx - 1):
            v00 = j * nx + i
            v10 = v00 + 1
            v01 = v00 + nx
            v11 = v01 + 1
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    triangles = np.array(tris, dtype=np.int64)

    edges = []
    labels = []
    for i in range(nx - 1):  # bottom, left to right
        edges.append((i, i + 1))
        labels.append(1)
    for j in range(ny - 1):  # right, upward
        edges.append((j * nx + nx - 1, (j + 1) * nx + nx - 1))
        labels.append(2)
    for i in range(nx - 1, 0, -1):  # top, right to left
        edges.append(((ny - 1) * nx + i, (ny - 1) * nx + i - 1))
        labels.append(3)
    for j in range(ny - 1, 0, -1):  # left, downward
        edges.append((j * nx, (j - 1) * nx))
        labels.append(4)

    return TriMesh(
        vertices=vertices,
        triangles=triangles,
        boundary_edges=np.array(edges, dtype=np.int64),
        boundary_labels=np.array(labels, dtype=np.int64),
        regions=np.zeros(triangles.shape[0], dtype=np.int64),
    )


def _band_triangles(inner: np.ndarray, outer: np.ndarray) -> list[tuple[int, int, int]]:
    """Counterclockwise triangles tiling the annulus band between two rings.

    ``inner`` and ``outer`` list vertex ids in increasing-angle order with the
    first vertex of each ring at angle 0.  The merge advances whichever ring
    has the smaller next angle (compared exactly with integer cross products),
    emitting one triangle per advance: nI + nO in total.
    """
    nI, nO = len(inner), len(outer)
    tris: list[tuple[int, int, int]] = []
    if nI == 1:
        c = int(inner[0])
        for o in range(nO):
            tris.append((c, int(outer[o]), int(outer[(o + 1) % nO])))
        return tris
    i = o = 0
    while i < nI or o < nO:
        # next angles are (i+1)/nI and (o+1)/nO turns; compare exactly
        take_inner = o >= nO or (i < nI and (i + 1) * nO <= (o + 1) * nI)
        if take_inner:
            tris.append(
                (int(inner[i % nI]), int(outer[o % nO]), int(inner[(i + 1) % nI]))
            )
            i += 1
        else:
            tris.append(
                (int(inner[i % nI]), int(outer[o % nO]), int(outer[(o + 1) % nO]))
            )
            o += 1
    return tris


def build_disk_mesh(n_boundary: int) -> TriMesh:
    """Ring-structured triangulation of the unit disk.

    ``n_boundary`` vertices on the unit circle (at angles 2 pi k / n), with
    concentric interior rings whose vertex counts shrink proportionally to
    the radius, so triangles stay close to isotropic.  Boundary edges carry
    label 1.
    """
    if n_boundary < 8:
        raise ValueError("need at least 8 boundary vertices")
    n = int(n_boundary)
    m = max(1, round(n / (2.0 * math.pi)))  # number of rings
    ring_counts = [max(1, round(n * j / m)) for j in range(1, m + 1)]
    ring_counts[-1] = n

    verts = [(0.0, 0.0)]
    rings: list[np.ndarray] = [np.array([0], dtype=np.int64)]
    for j, nj in enumerate(ring_counts, start=1):
        r = j / m
        start = len(verts)
        ang = 2.0 * math.pi * np.arange(nj) / nj
        for t in ang:
            verts.append((r * math.cos(t), r * math.sin(t)))
        rings.append(np.arange(start, start + nj, dtype=np.int64))

    tris: list[tuple[int, int, int]] = []
    for inner, outer in zip(rings[:-1], rings[1:]):
        tris.extend(_band_triangles(inner, outer))

    boundary_ring = rings[-1]
    nbe = len(boundary_ring)
    edges = np.column_stack([boundary_ring, np.roll(boundary_ring, -1)])

    return TriMesh(
        vertices=np.array(verts),
        triangles=np.array(tris, dtype=np.int64),
        boundary_edges=edges,
        boundary_labels=np.ones(nbe, dtype=np.int64),
        regions=np.zeros(len(tris), dtype=np.int64),
    )


# ----------------------------------------------------------------------
# text IO (1-based connectivity on disk)


def save_mesh(mesh: TriMesh, path) -> None:
    """Write a mesh as text: header ``nv nt nbe``, then vertex, triangle and
    boundary-edge records.  Connectivity is 1-based in the file."""
    lines = [f"{mesh.nv} {mesh.nt} {mesh.nbe}"]
    for x, y in mesh.vertices:
        lines.append(f"{x:.17g} {y:.17g}")
    for (a, b, c), reg in zip(mesh.triangles, mesh.regions):
        lines.append(f"{a + 1} {b + 1} {c + 1} {reg}")
    for (a, b), lab in zip(mesh.boundary_edges, mesh.boundary_labels):
        lines.append(f"{a + 1} {b + 1} {lab}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mesh(path) -> TriMesh:
    """Read a mesh written by :func:`save_mesh`.

    Clockwise triangles in the file are reoriented; malformed counts raise
    ValueError.
    """
    with open(path) as fh:
        tokens = fh.read().split()
    if len(tokens) < 3:
        raise ValueError("mesh file too short")
    pos = 0

    def take(k):
        nonlocal pos
        if pos + k > len(tokens):
            raise ValueError("mesh file truncated")
        out = tokens[pos : pos + k]
        pos += k
        return out

    nv, nt, nbe = (int(t) for t in take(3))
    if nv <= 0 or nt <= 0 or nbe < 0:
        raise ValueError("bad mesh header")
    vertices = np.array([float(t) for t in take(2 * nv)]).reshape(nv, 2)
    tri_rec = np.array([int(t) for t in take(4 * nt)]).reshape(nt, 4)
    be_rec = np.array([int(t) for t in take(3 * nbe)]).reshape(nbe, 3) if nbe else (
        np.zeros((0, 3), dtype=int)
    )
    if pos != len(tokens):
        raise ValueError("trailing data in mesh file")

    triangles = tri_rec[:, :3] - 1
    regions = tri_rec[:, 3]
    if triangles.min() < 0 or triangles.max() >= nv:
        raise ValueError("triangle vertex index out of range")
    # reorient any clockwise triangle
    xy = vertices[triangles]
    e1 = xy[:, 1] - xy[:, 0]
    e2 = xy[:, 2] - xy[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    flip = det < 0.0
    if np.any(flip):
        triangles[flip] = triangles[flip][:, [0, 2, 1]]

    if nbe:
        edges = be_rec[:, :2] - 1
        labels = be_rec[:, 2]
        if edges.min() < 0 or edges.max() >= nv:
            raise ValueError("boundary edge vertex index out of range")
    else:
        edges = np.zeros((0, 2), dtype=np.int64)
        labels = np.zeros(0, dtype=np.int64)

    return TriMesh(
        vertices=vertices,
        triangles=triangles,
        boundary_edges=edges,
        boundary_labels=labels,
        regions=regions,
    )
