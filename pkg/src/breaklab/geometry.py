"""Convex polytope primitives in dimensions 1, 2 and 3.

Every polytope carries both a vertex list (ordered counterclockwise for d=2)
and a half-space list (outward unit normals with offsets, n.x <= c), kept in
sync by the constructors.  d=1 and d=2 operations are exact clipping
arithmetic; d=3 uses vertex enumeration over half-space triples with
scipy's convex hull for volumes.  Seeded Monte Carlo estimators are provided
as independent cross-checks.

All coordinates are assumed to live at desk scale (domains of roughly unit
diameter); the global tolerance TOL is absolute in those units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TOL = 1e-9
# below this d-volume a set is treated as measure zero
DEGENERATE_VOLUME = 1e-12


class GeometryError(Exception):
    pass


class DimensionMismatchError(GeometryError):
    pass


class DegenerateRegionError(GeometryError):
    pass


class PartitionError(GeometryError):
    pass


@dataclass(frozen=True)
class ConvexPolytope:
    """Bounded convex cell with synchronized vertex / half-space data.

    vertices: (n, d) array; sorted for d=1, counterclockwise for d=2.
    normals/offsets: facet half-spaces {x : normals[k] . x <= offsets[k]}
    with outward unit normals.
    """

    vertices: np.ndarray
    normals: np.ndarray
    offsets: np.ndarray
    volume: float
    degenerate: bool = False

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def __repr__(self) -> str:  # arrays are noisy; keep it short
        return (f"ConvexPolytope(d={self.dim}, nverts={len(self.vertices)}, "
                f"volume={self.volume:.6g}{', degenerate' if self.degenerate else ''})")


def _hull_2d(points: np.ndarray) -> np.ndarray:
    """Counterclockwise convex hull (monotone chain); tolerates collinear input."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) <= 2:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[np.ndarray] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 1e-15:
            lower.pop()
        lower.append(p)
    upper: list[np.ndarray] = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 1e-15:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    return np.array(hull)


def _polygon_area(verts: np.ndarray) -> float:
    x, y = verts[:, 0], verts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _edges_to_halfspaces(verts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Outward unit normals and offsets for a CCW polygon."""
    nxt = np.roll(verts, -1, axis=0)
    edge = nxt - verts
    normals = np.stack([edge[:, 1], -edge[:, 0]], axis=1)
    lengths = np.linalg.norm(normals, axis=1)
    keep = lengths > 1e-14
    normals = normals[keep] / lengths[keep, None]
    offsets = np.einsum("ij,ij->i", normals, verts[keep])
    return normals, offsets


def _merge_coplanar_facets(points: np.ndarray, hull) -> tuple[np.ndarray, np.ndarray]:
    """Collapse qhull's triangulated facets into one half-space per plane."""
    eqs = hull.equations  # rows (n, b): n.x + b <= 0
    rounded = np.round(eqs / 1e-9) * 1e-9
    _, idx = np.unique(rounded, axis=0, return_index=True)
    eqs = eqs[np.sort(idx)]
    normals = eqs[:, :-1]
    offsets = -eqs[:, -1]
    norms = np.linalg.norm(normals, axis=1)
    return normals / norms[:, None], offsets / norms


def from_vertices(points) -> ConvexPolytope:
    """Build the convex hull of a point cloud as a polytope.

    Degenerate inputs (hull of lower dimension) are flagged with volume 0.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = pts.shape[1]
    if d == 1:
        a, b = float(pts.min()), float(pts.max())
        verts = np.array([[a], [b]])
        normals = np.array([[-1.0], [1.0]])
        offsets = np.array([-a, b])
        vol = b - a
        return ConvexPolytope(verts, normals, offsets, vol, degenerate=vol <= DEGENERATE_VOLUME)
    if d == 2:
        hull = _hull_2d(pts)
        if len(hull) < 3:
            return ConvexPolytope(hull, np.zeros((0, 2)), np.zeros(0), 0.0, degenerate=True)
        area = _polygon_area(hull)
        normals, offsets = _edges_to_halfspaces(hull)
        return ConvexPolytope(hull, normals, offsets, area, degenerate=area <= DEGENERATE_VOLUME)
    if d == 3:
        from scipy.spatial import ConvexHull, QhullError
        try:
            hull = ConvexHull(pts)
        except QhullError:
            return ConvexPolytope(pts, np.zeros((0, 3)), np.zeros(0), 0.0, degenerate=True)
        verts = pts[hull.vertices]
        normals, offsets = _merge_coplanar_facets(pts, hull)
        vol = float(hull.volume)
        return ConvexPolytope(verts, normals, offsets, vol, degenerate=vol <= DEGENERATE_VOLUME)
    raise DimensionMismatchError(f"dimension {d} not supported (d must be 1, 2 or 3)")


def interval(a: float, b: float) -> ConvexPolytope:
    if b < a:
        a, b = b, a
    return from_vertices([[a], [b]])


def box(lo, hi) -> ConvexPolytope:
    """Axis-aligned box in any supported dimension."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = len(lo)
    if d == 1:
        return interval(lo[0], hi[0])
    corners = np.stack(np.meshgrid(*[(lo[k], hi[k]) for k in range(d)], indexing="ij"),
                       axis=-1).reshape(-1, d)
    return from_vertices(corners)


def regular_polygon(center, radius: float, segments: int = 64) -> ConvexPolytope:
    """Regular polygon approximating a disk (d=2 only)."""
    center = np.asarray(center, dtype=float)
    angles = 2.0 * np.pi * np.arange(segments) / segments
    verts = center + radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return from_vertices(verts)


def translate(p: ConvexPolytope, w) -> ConvexPolytope:
    """Rigid translation; volume is carried over unchanged."""
    w = np.asarray(w, dtype=float)
    return ConvexPolytope(p.vertices + w, p.normals,
                          p.offsets + p.normals @ w if len(p.normals) else p.offsets,
                          p.volume, p.degenerate)


def bounding_box(p: ConvexPolytope) -> tuple[np.ndarray, np.ndarray]:
    return p.vertices.min(axis=0), p.vertices.max(axis=0)


def centroid(p: ConvexPolytope) -> np.ndarray:
    if p.dim == 1:
        return p.vertices.mean(axis=0)
    if p.dim == 2:
        v = p.vertices
        nxt = np.roll(v, -1, axis=0)
        cr = v[:, 0] * nxt[:, 1] - nxt[:, 0] * v[:, 1]
        area = 0.5 * cr.sum()
        if abs(area) < DEGENERATE_VOLUME:
            return v.mean(axis=0)
        return ((v + nxt) * cr[:, None]).sum(axis=0) / (6.0 * area)
    # d=3: tetrahedron fan from the vertex mean
    ref = p.vertices.mean(axis=0)
    from scipy.spatial import ConvexHull
    hull = ConvexHull(p.vertices)
    total, acc = 0.0, np.zeros(3)
    for simplex in hull.simplices:
        a, b, c = p.vertices[simplex]
        vol = abs(np.dot(a - ref, np.cross(b - ref, c - ref))) / 6.0
        acc += vol * (a + b + c + ref) / 4.0
        total += vol
    return acc / total if total > 0 else ref


def diameter(p: ConvexPolytope) -> float:
    v = p.vertices
    if len(v) < 2:
        return 0.0
    diff = v[:, None, :] - v[None, :, :]
    return float(np.sqrt((diff ** 2).sum(axis=2).max()))


def chebyshev_ball(p: ConvexPolytope) -> tuple[np.ndarray, float]:
    """Center and radius of the largest ball inside the polytope."""
    if p.dim == 1:
        return p.vertices.mean(axis=0), p.volume / 2.0
    from scipy.optimize import linprog
    d = p.dim
    # maximize r  s.t.  n_k . x + r <= c_k
    c = np.zeros(d + 1)
    c[-1] = -1.0
    a_ub = np.hstack([p.normals, np.ones((len(p.normals), 1))])
    res = linprog(c, A_ub=a_ub, b_ub=p.offsets, bounds=[(None, None)] * d + [(0, None)],
                  method="highs")
    if not res.success:
        raise GeometryError(f"inradius LP failed: {res.message}")
    return res.x[:-1].copy(), float(res.x[-1])


def inradius(p: ConvexPolytope) -> float:
    return chebyshev_ball(p)[1]


def contains(p: ConvexPolytope, x, tol: float = TOL) -> bool:
    x = np.asarray(x, dtype=float)
    if len(p.normals) == 0:
        return False
    return bool(np.all(p.normals @ x <= p.offsets + tol))


def contains_many(p: ConvexPolytope, points: np.ndarray, tol: float = TOL) -> np.ndarray:
    """Vectorized membership test for an (n, d) array of points."""
    if len(p.normals) == 0:
        return np.zeros(len(points), dtype=bool)
    return np.all(points @ p.normals.T <= p.offsets[None, :] + tol, axis=1)


def clip_halfspace(verts: np.ndarray, normal, offset: float, tol: float = TOL) -> np.ndarray:
    """Sutherland-Hodgman clip of a CCW polygon against {n.x <= c}."""
    normal = np.asarray(normal, dtype=float)
    if len(verts) == 0:
        return verts
    dist = verts @ normal - offset
    if np.all(dist <= tol):
        return verts
    if np.all(dist >= -tol):
        return verts[:0]
    out: list[np.ndarray] = []
    n = len(verts)
    for i in range(n):
        cur, nxt = verts[i], verts[(i + 1) % n]
        dc, dn = dist[i], dist[(i + 1) % n]
        if dc <= tol:
            out.append(cur)
        if (dc < -tol and dn > tol) or (dc > tol and dn < -tol):
            t = dc / (dc - dn)
            out.append(cur + t * (nxt - cur))
    if not out:
        return verts[:0]
    arr = np.array(out)
    # drop consecutive duplicates introduced by touching vertices
    keep = np.ones(len(arr), dtype=bool)
    for i in range(len(arr)):
        if np.linalg.norm(arr[i] - arr[i - 1]) < 1e-12:
            keep[i] = False
    arr = arr[keep]
    return arr


def _enumerate_vertices_3d(normals: np.ndarray, offsets: np.ndarray,
                           feas_tol: float = 1e-7) -> np.ndarray:
    """All feasible intersection points of half-space triples."""
    m = len(normals)
    pts = []
    for i in range(m):
        for j in range(i + 1, m):
            for k in range(j + 1, m):
                a = normals[[i, j, k]]
                if abs(np.linalg.det(a)) < 1e-10:
                    continue
                x = np.linalg.solve(a, offsets[[i, j, k]])
                if np.all(normals @ x <= offsets + feas_tol):
                    pts.append(x)
    if not pts:
        return np.zeros((0, 3))
    arr = np.array(pts)
    rounded = np.round(arr / 1e-9) * 1e-9
    _, idx = np.unique(rounded, axis=0, return_index=True)
    return arr[np.sort(idx)]


def intersect(p: ConvexPolytope, q: ConvexPolytope,
              tol: float = TOL) -> ConvexPolytope | None:
    """Convex intersection; None when empty or of measure zero."""
    if p.dim != q.dim:
        raise DimensionMismatchError(f"cannot intersect d={p.dim} with d={q.dim}")
    if p.degenerate or q.degenerate:
        return None
    d = p.dim
    if d == 1:
        a = max(p.vertices[0, 0], q.vertices[0, 0])
        b = min(p.vertices[-1, 0], q.vertices[-1, 0])
        if b - a <= DEGENERATE_VOLUME:
            return None
        return interval(a, b)
    if d == 2:
        verts = p.vertices
        for n, c in zip(q.normals, q.offsets):
            verts = clip_halfspace(verts, n, c, tol)
            if len(verts) < 3:
                return None
        result = from_vertices(verts)
        return None if result.degenerate else result
    normals = np.vstack([p.normals, q.normals])
    offsets = np.concatenate([p.offsets, q.offsets])
    verts = _enumerate_vertices_3d(normals, offsets)
    if len(verts) < 4:
        return None
    result = from_vertices(verts)
    return None if result.degenerate else result


def clip_by_halfspaces(p: ConvexPolytope, normals: np.ndarray, offsets: np.ndarray,
                       tol: float = TOL) -> ConvexPolytope | None:
    """Intersect a polytope with extra half-spaces (used for Laguerre cells)."""
    normals = np.atleast_2d(np.asarray(normals, dtype=float))
    offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
    d = p.dim
    if len(normals) == 0:
        return p
    if d == 1:
        a, b = p.vertices[0, 0], p.vertices[-1, 0]
        for n, c in zip(normals[:, 0], offsets):
            if n > 0:
                b = min(b, c / n)
            elif n < 0:
                a = max(a, c / n)
            elif c < -tol:
                return None
        if b - a <= DEGENERATE_VOLUME:
            return None
        return interval(a, b)
    if d == 2:
        verts = p.vertices
        for n, c in zip(normals, offsets):
            verts = clip_halfspace(verts, n, c, tol)
            if len(verts) < 3:
                return None
        result = from_vertices(verts)
        return None if result.degenerate else result
    all_n = np.vstack([p.normals, normals])
    all_c = np.concatenate([p.offsets, offsets])
    verts = _enumerate_vertices_3d(all_n, all_c)
    if len(verts) < 4:
        return None
    result = from_vertices(verts)
    return None if result.degenerate else result


# ---------------------------------------------------------------------------
# facet polygons (needed for interface extraction)
# ---------------------------------------------------------------------------

def _plane_basis(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Two orthonormal vectors spanning the plane orthogonal to `normal`."""
    k = int(np.argmin(np.abs(normal)))
    e = np.zeros(3)
    e[k] = 1.0
    u = np.cross(normal, e)
    u /= np.linalg.norm(u)
    v = np.cross(normal, u)
    return u, v


def facet_polygons(p: ConvexPolytope):
    """Per-facet geometry: list of (normal, offset, vertex array on the facet).

    d=1: facet "polygons" are the two endpoints.  d=2: edges.  d=3: planar
    polygons with vertices ordered around the facet.
    """
    d = p.dim
    out = []
    if d == 1:
        a, b = p.vertices[0, 0], p.vertices[-1, 0]
        out.append((np.array([-1.0]), -a, np.array([[a]])))
        out.append((np.array([1.0]), b, np.array([[b]])))
        return out
    if d == 2:
        v = p.vertices
        nxt = np.roll(v, -1, axis=0)
        for i in range(len(v)):
            edge = nxt[i] - v[i]
            ln = np.linalg.norm(edge)
            if ln < 1e-14:
                continue
            n = np.array([edge[1], -edge[0]]) / ln
            out.append((n, float(n @ v[i]), np.array([v[i], nxt[i]])))
        return out
    for n, c in zip(p.normals, p.offsets):
        on_face = p.vertices[np.abs(p.vertices @ n - c) <= 1e-8]
        if len(on_face) < 3:
            continue
        u, w = _plane_basis(n)
        center = on_face.mean(axis=0)
        ang = np.arctan2((on_face - center) @ w, (on_face - center) @ u)
        out.append((n, float(c), on_face[np.argsort(ang)]))
    return out


# ---------------------------------------------------------------------------
# partitions and interior faces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InteriorFace:
    """A shared (d-1)-facet between two cells, oriented cell_a -> cell_b."""

    cell_a: int
    cell_b: int
    vertices: np.ndarray   # (k, d) points spanning the face
    normal: np.ndarray     # unit, pointing from cell_a into cell_b
    measure: float         # H^{d-1} of the face (1.0 for a point in d=1)
    centroid: np.ndarray


@dataclass(frozen=True)
class CellPartition:
    """Finite partition of a domain into convex cells with interior faces."""

    domain: tuple[ConvexPolytope, ...]
    cells: tuple[ConvexPolytope, ...]
    faces: tuple[InteriorFace, ...]

    @property
    def dim(self) -> int:
        return self.cells[0].dim

    @property
    def domain_volume(self) -> float:
        return sum(p.volume for p in self.domain)


def _face_between(a: ConvexPolytope, b: ConvexPolytope, ia: int, ib: int,
                  match_tol: float = 1e-7) -> InteriorFace | None:
    d = a.dim
    if d == 1:
        aa, ab = a.vertices[0, 0], a.vertices[-1, 0]
        ba, bb = b.vertices[0, 0], b.vertices[-1, 0]
        if abs(ab - ba) <= match_tol:
            x = np.array([[0.5 * (ab + ba)]])
            return InteriorFace(ia, ib, x, np.array([1.0]), 1.0, x[0])
        if abs(bb - aa) <= match_tol:
            x = np.array([[0.5 * (bb + aa)]])
            return InteriorFace(ia, ib, x, np.array([-1.0]), 1.0, x[0])
        return None
    if d == 2:
        best = None
        for na, ca, va in facet_polygons(a):
            for nb, cb, vb in facet_polygons(b):
                if np.linalg.norm(na + nb) > match_tol or abs(ca + cb) > match_tol:
                    continue
                u = np.array([-na[1], na[0]])  # direction along the shared line
                sa = np.sort(va @ u)
                sb = np.sort(vb @ u)
                lo, hi = max(sa[0], sb[0]), min(sa[1], sb[1])
                if hi - lo <= match_tol:
                    continue
                base = na * ca
                verts = np.array([base + lo * u, base + hi * u])
                seg = InteriorFace(ia, ib, verts, na, hi - lo, verts.mean(axis=0))
                if best is None or seg.measure > best.measure:
                    best = seg
        return best
    best = None
    for na, ca, va in facet_polygons(a):
        for nb, cb, vb in facet_polygons(b):
            if np.linalg.norm(na + nb) > match_tol or abs(ca + cb) > match_tol:
                continue
            u, w = _plane_basis(na)
            va2 = np.stack([va @ u, va @ w], axis=1)
            vb2 = np.stack([vb @ u, vb @ w], axis=1)
            # orient both CCW in plane coordinates before clipping
            if _polygon_area(va2) < 0:
                va2 = va2[::-1]
            if _polygon_area(vb2) < 0:
                vb2 = vb2[::-1]
            clipped = va2
            for n2, c2 in zip(*_edges_to_halfspaces(vb2)):
                clipped = clip_halfspace(clipped, n2, c2)
                if len(clipped) < 3:
                    break
            if len(clipped) < 3:
                continue
            area = _polygon_area(clipped)
            if area <= match_tol ** 0.5 * 1e-3 or area <= 1e-10:
                continue
            base = na * ca
            verts3 = base + np.outer(clipped[:, 0], u) + np.outer(clipped[:, 1], w)
            face = InteriorFace(ia, ib, verts3, na, area, verts3.mean(axis=0))
            if best is None or face.measure > best.measure:
                best = face
    return best


def extract_faces(cells, match_tol: float = 1e-7) -> tuple[InteriorFace, ...]:
    """All interior faces, each listed once, oriented low index -> high index."""
    faces = []
    boxes = [bounding_box(c) for c in cells]
    for i in range(len(cells)):
        for j in range(i + 1, len(cells)):
            lo_i, hi_i = boxes[i]
            lo_j, hi_j = boxes[j]
            if np.any(lo_i > hi_j + match_tol) or np.any(lo_j > hi_i + match_tol):
                continue
            f = _face_between(cells[i], cells[j], i, j, match_tol)
            if f is not None:
                faces.append(f)
    return tuple(faces)


def surface_measure(p: ConvexPolytope) -> float:
    """H^{d-1} of the boundary (2.0 for an interval: two endpoints)."""
    if p.dim == 1:
        return 2.0
    if p.dim == 2:
        nxt = np.roll(p.vertices, -1, axis=0)
        return float(np.linalg.norm(nxt - p.vertices, axis=1).sum())
    total = 0.0
    for _, _, verts in facet_polygons(p):
        u, w = _plane_basis(verts[0] * 0 + _facet_normal(verts))
        flat = np.stack([verts @ u, verts @ w], axis=1)
        total += abs(_polygon_area(flat))
    return total


def _facet_normal(verts: np.ndarray) -> np.ndarray:
    n = np.cross(verts[1] - verts[0], verts[2] - verts[0])
    return n / np.linalg.norm(n)


def make_partition(domain, cells) -> CellPartition:
    """Assemble a partition and extract its interior faces."""
    doms = tuple(domain) if isinstance(domain, (list, tuple)) else (domain,)
    cells = tuple(cells)
    if not cells:
        raise PartitionError("partition needs at least one cell")
    d = cells[0].dim
    if any(c.dim != d for c in cells) or any(p.dim != d for p in doms):
        raise DimensionMismatchError("mixed dimensions in partition")
    return CellPartition(doms, cells, extract_faces(cells))


def validate_partition(partition: CellPartition, tol: float = TOL) -> list[str]:
    """Check volume bookkeeping and facet matching; returns human-readable issues."""
    issues = []
    vol_domain = partition.domain_volume
    vol_cells = sum(c.volume for c in partition.cells)
    if abs(vol_cells - vol_domain) > 1e-9 * max(vol_domain, 1.0):
        issues.append(f"cell volumes sum to {vol_cells:.12g}, domain has {vol_domain:.12g}")
    cells = partition.cells
    boxes = [bounding_box(c) for c in cells]
    for i in range(len(cells)):
        for j in range(i + 1, len(cells)):
            lo_i, hi_i = boxes[i]
            lo_j, hi_j = boxes[j]
            if np.any(lo_i >= hi_j) or np.any(lo_j >= hi_i):
                continue
            ov = intersect(cells[i], cells[j])
            if ov is not None and ov.volume > 1e-9 * max(vol_domain, 1.0):
                issues.append(f"cells {i} and {j} overlap with volume {ov.volume:.3g}")
    if len(partition.domain) == 1 and not issues:
        # every interior facet must be matched exactly twice across cells
        interior = 2.0 * sum(f.measure for f in partition.faces)
        boundary = surface_measure(partition.domain[0])
        total = sum(surface_measure(c) for c in cells)
        if abs(total - boundary - interior) > 1e-6 * max(total, 1.0):
            issues.append(
                f"unmatched interior facets: cell boundaries {total:.9g} != "
                f"domain {boundary:.9g} + 2*faces {interior:.9g}")
    return issues


# ---------------------------------------------------------------------------
# seeded sampling and Monte Carlo volume
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PointSample:
    points: np.ndarray
    seed: int
    weight: float  # vol(region) / count


def sample_points(region: ConvexPolytope, count: int, seed: int) -> PointSample:
    """Uniform points by rejection in the bounding box; deterministic in seed."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if region.degenerate or region.volume <= DEGENERATE_VOLUME:
        raise DegenerateRegionError("cannot sample a region of zero volume")
    rng = np.random.default_rng(seed)
    lo, hi = bounding_box(region)
    out = np.empty((0, region.dim))
    while len(out) < count:
        batch = rng.uniform(lo, hi, size=(max(2 * count, 64), region.dim))
        out = np.vstack([out, batch[contains_many(region, batch)]])
    return PointSample(out[:count], seed, region.volume / count)


def sample_box(lo, hi, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(np.asarray(lo, float), np.asarray(hi, float),
                       size=(count, len(lo)))


@dataclass(frozen=True)
class MonteCarloVolume:
    estimate: float
    sigma: float
    samples: int
    seed: int


def volume_mc(p: ConvexPolytope, samples: int, seed: int) -> MonteCarloVolume:
    """Hit-count volume estimate with its one-sigma binomial error."""
    lo, hi = bounding_box(p)
    vol_box = float(np.prod(hi - lo))
    pts = sample_box(lo, hi, samples, seed)
    frac = float(contains_many(p, pts).mean())
    sigma = vol_box * np.sqrt(max(frac * (1.0 - frac), 1.0 / samples) / samples)
    return MonteCarloVolume(frac * vol_box, sigma, samples, seed)
