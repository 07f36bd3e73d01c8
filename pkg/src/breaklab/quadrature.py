"""Integration of compactly supported quartic bumps over convex regions.

The reference mollifier is psi(x) = (1 - |x - c|^2 / r^2)^2 inside the ball
of radius r around c and zero outside.  Inside its support psi is a quartic
polynomial, which makes three independent integration routes available:

* exact closed forms: in 1d an antiderivative, in 2d Green's theorem with a
  radial flux potential whose boundary integrand is polynomial on straight
  edges and constant on circular arcs;
* a degree-5 triangle rule with adaptive refinement of the triangles that
  cross the support circle (genuine volume quadrature, used where the exact
  route would algebraically collapse a dual-route check);
* seeded Monte Carlo (any dimension, the only volume route in d=3).

All routines return plain floats and are deterministic.
"""

from __future__ import annotations

import numpy as np

from . import geometry

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(5)

# degree-5 rule on the reference triangle: centroid plus two orbits
_SQ15 = np.sqrt(15.0)
_A1 = (6.0 - _SQ15) / 21.0
_A2 = (6.0 + _SQ15) / 21.0
_TRI_BARY = np.array(
    [[1 / 3, 1 / 3, 1 / 3],
     [1 - 2 * _A1, _A1, _A1], [_A1, 1 - 2 * _A1, _A1], [_A1, _A1, 1 - 2 * _A1],
     [1 - 2 * _A2, _A2, _A2], [_A2, 1 - 2 * _A2, _A2], [_A2, _A2, 1 - 2 * _A2]])
_TRI_WEIGHTS = np.array(
    [9 / 40,
     (155.0 - _SQ15) / 1200, (155.0 - _SQ15) / 1200, (155.0 - _SQ15) / 1200,
     (155.0 + _SQ15) / 1200, (155.0 + _SQ15) / 1200, (155.0 + _SQ15) / 1200])


# ---------------------------------------------------------------------------
# bump evaluation
# ---------------------------------------------------------------------------

def bump_value(points: np.ndarray, center, radius: float) -> np.ndarray:
    """psi at an (n, d) array of points; zero outside the support ball."""
    diff = np.atleast_2d(points) - np.asarray(center, dtype=float)
    s = (diff ** 2).sum(axis=1) / radius ** 2
    return np.where(s < 1.0, (1.0 - s) ** 2, 0.0)


def bump_gradient(points: np.ndarray, center, radius: float) -> np.ndarray:
    """grad psi, shape (n, d); zero outside the support ball."""
    pts = np.atleast_2d(points)
    diff = pts - np.asarray(center, dtype=float)
    s = (diff ** 2).sum(axis=1) / radius ** 2
    coef = np.where(s < 1.0, -4.0 / radius ** 2 * (1.0 - s), 0.0)
    return coef[:, None] * diff


def bump_gradient_sup(radius: float) -> float:
    """sup |grad psi| = 8 / (3 sqrt(3) r), attained at |x - c| = r / sqrt(3)."""
    return 8.0 / (3.0 * np.sqrt(3.0) * radius)


# ---------------------------------------------------------------------------
# exact one-dimensional integrals
# ---------------------------------------------------------------------------

def _bump_antiderivative_1d(u: np.ndarray, radius: float) -> np.ndarray:
    """Antiderivative of (1 - u^2/r^2)^2 in u, valid for |u| <= r."""
    r2 = radius ** 2
    return u - 2.0 * u ** 3 / (3.0 * r2) + u ** 5 / (5.0 * r2 ** 2)


def bump_mass_interval(a: float, b: float, center: float, radius: float) -> float:
    """Exact integral of the bump over [a, b] (d=1)."""
    lo = max(min(a, b), center - radius)
    hi = min(max(a, b), center + radius)
    if hi <= lo:
        return 0.0
    vals = _bump_antiderivative_1d(np.array([hi - center, lo - center]), radius)
    return float(vals[0] - vals[1])


def _segment_ball_clip(p0: np.ndarray, p1: np.ndarray, center: np.ndarray,
                       radius: float) -> tuple[float, float] | None:
    """Parameter range [t0, t1] of the segment inside the closed ball."""
    d = p1 - p0
    m = p0 - center
    a = float(d @ d)
    if a < 1e-30:
        return None
    b = 2.0 * float(m @ d)
    c = float(m @ m) - radius ** 2
    disc = b * b - 4.0 * a * c
    if disc <= 0.0:
        return None
    sq = np.sqrt(disc)
    t0 = max((-b - sq) / (2.0 * a), 0.0)
    t1 = min((-b + sq) / (2.0 * a), 1.0)
    if t1 - t0 <= 1e-15:
        return None
    return t0, t1


def bump_line_integral(p0, p1, center, radius: float) -> float:
    """Exact line integral of psi along a straight segment (any dimension).

    The restriction of psi to a line is a quartic polynomial of arclength,
    so a five-point Gauss rule on the clipped parameter range is exact.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    center = np.asarray(center, dtype=float)
    rng = _segment_ball_clip(p0, p1, center, radius)
    if rng is None:
        return 0.0
    t0, t1 = rng
    ts = 0.5 * (t1 - t0) * _GL_NODES + 0.5 * (t1 + t0)
    pts = p0[None, :] + ts[:, None] * (p1 - p0)[None, :]
    length = np.linalg.norm(p1 - p0)
    vals = bump_value(pts, center, radius)
    return float(0.5 * (t1 - t0) * length * (_GL_WEIGHTS @ vals))


# ---------------------------------------------------------------------------
# exact planar integral: Green's theorem with a radial flux potential
# ---------------------------------------------------------------------------
# F(x) = (1/2 - rho^2/(2 r^2) + rho^4/(6 r^4)) (x - c), rho = |x - c|, has
# div F = psi inside the support.  F is a degree-5 polynomial, so its normal
# flux along a straight edge clipped to the disk is integrated exactly by a
# five-point Gauss rule; on the support circle the flux is the constant r/6.

def _flux_dot_normal(pts: np.ndarray, normal: np.ndarray, center: np.ndarray,
                     radius: float) -> np.ndarray:
    diff = pts - center
    rho2 = (diff ** 2).sum(axis=1)
    coef = 0.5 - rho2 / (2.0 * radius ** 2) + rho2 ** 2 / (6.0 * radius ** 4)
    return coef * (diff @ normal)


def _circle_polygon_arc_length(verts: np.ndarray, center: np.ndarray,
                               radius: float) -> float:
    """Total length of the support circle lying inside a convex CCW polygon."""
    # crossing angles of the circle with every edge line segment
    angles: list[float] = []
    n = len(verts)
    for i in range(n):
        p0, p1 = verts[i], verts[(i + 1) % n]
        d = p1 - p0
        m = p0 - center
        a = float(d @ d)
        if a < 1e-30:
            continue
        b = 2.0 * float(m @ d)
        c = float(m @ m) - radius ** 2
        disc = b * b - 4.0 * a * c
        if disc <= 0.0:
            continue
        sq = np.sqrt(disc)
        for t in ((-b - sq) / (2 * a), (-b + sq) / (2 * a)):
            if -1e-12 <= t <= 1.0 + 1e-12:
                x = p0 + t * d - center
                angles.append(float(np.arctan2(x[1], x[0])))
    if not angles:
        # circle either entirely inside or entirely outside the polygon
        probe = center + np.array([radius, 0.0])
        if _point_in_polygon(probe, verts):
            return 2.0 * np.pi * radius
        return 0.0
    angles = sorted(set(angles))
    angles.append(angles[0] + 2.0 * np.pi)
    total = 0.0
    for a0, a1 in zip(angles[:-1], angles[1:]):
        if a1 - a0 < 1e-13:
            continue
        mid = 0.5 * (a0 + a1)
        probe = center + radius * np.array([np.cos(mid), np.sin(mid)])
        if _point_in_polygon(probe, verts):
            total += (a1 - a0) * radius
    return total


def _point_in_polygon(x: np.ndarray, verts: np.ndarray, tol: float = 1e-12) -> bool:
    nxt = np.roll(verts, -1, axis=0)
    edge = nxt - verts
    cross = edge[:, 0] * (x[1] - verts[:, 1]) - edge[:, 1] * (x[0] - verts[:, 0])
    return bool(np.all(cross >= -tol))


def bump_mass_polygon(verts: np.ndarray, center, radius: float) -> float:
    """Exact integral of psi over a convex CCW polygon (d=2)."""
    verts = np.asarray(verts, dtype=float)
    center = np.asarray(center, dtype=float)
    if len(verts) < 3:
        return 0.0
    total = (radius / 6.0) * _circle_polygon_arc_length(verts, center, radius)
    n = len(verts)
    for i in range(n):
        p0, p1 = verts[i], verts[(i + 1) % n]
        rng = _segment_ball_clip(p0, p1, center, radius)
        if rng is None:
            continue
        t0, t1 = rng
        edge = p1 - p0
        length = np.linalg.norm(edge)
        if length < 1e-15:
            continue
        normal = np.array([edge[1], -edge[0]]) / length  # outward for CCW
        ts = 0.5 * (t1 - t0) * _GL_NODES + 0.5 * (t1 + t0)
        pts = p0[None, :] + ts[:, None] * edge[None, :]
        flux = _flux_dot_normal(pts, normal, center, radius)
        total += 0.5 * (t1 - t0) * length * float(_GL_WEIGHTS @ flux)
    return total


def bump_mass_polytope(p: geometry.ConvexPolytope, center, radius: float) -> float:
    """Exact bump mass over a polytope for d <= 2 (use the MC route in d=3)."""
    if p.dim == 1:
        return bump_mass_interval(p.vertices[0, 0], p.vertices[-1, 0],
                                  float(np.asarray(center).reshape(-1)[0]), radius)
    if p.dim == 2:
        return bump_mass_polygon(p.vertices, center, radius)
    raise geometry.DimensionMismatchError(
        "no exact bump mass in d=3; use bump_mass_mc")


# ---------------------------------------------------------------------------
# volume quadrature: degree-5 triangle rule, adaptive near the circle
# ---------------------------------------------------------------------------

def _fan_triangles(verts: np.ndarray) -> np.ndarray:
    """(m, 3, 2) fan triangulation of a convex polygon."""
    m = len(verts) - 2
    tris = np.empty((m, 3, 2))
    tris[:, 0] = verts[0]
    tris[:, 1] = verts[1:-1]
    tris[:, 2] = verts[2:]
    return tris


def _rule_eval(f, tris: np.ndarray) -> float:
    """Apply the degree-5 rule to a batch of triangles at once."""
    pts = np.einsum("qk,mkd->mqd", _TRI_BARY, tris)
    vals = f(pts.reshape(-1, 2)).reshape(len(tris), -1)
    e1 = tris[:, 1] - tris[:, 0]
    e2 = tris[:, 2] - tris[:, 0]
    areas = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    return float(np.sum(areas * (vals @ _TRI_WEIGHTS)))


def _min_dist_to_triangles(tris: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Distance from a point to each triangle in a batch (0 if inside)."""
    m = len(tris)
    dmin = np.full(m, np.inf)
    inside = np.ones(m, dtype=bool)
    for k in range(3):
        a = tris[:, k]
        b = tris[:, (k + 1) % 3]
        e = b - a
        w = x[None, :] - a
        t = np.clip(np.einsum("md,md->m", w, e)
                    / np.maximum(np.einsum("md,md->m", e, e), 1e-30), 0.0, 1.0)
        proj = a + t[:, None] * e
        dmin = np.minimum(dmin, np.linalg.norm(x[None, :] - proj, axis=1))
        cross = e[:, 0] * w[:, 1] - e[:, 1] * w[:, 0]
        inside &= cross >= 0.0
    # fan triangles of a CCW polygon are CCW, so the inside test is one-sided
    return np.where(inside, 0.0, dmin)


def integrate_disk_supported(f, verts: np.ndarray, center, radius: float,
                             max_depth: int = 11) -> float:
    """Volume quadrature of f over a convex CCW polygon, f supported in a disk.

    f maps an (n, 2) array to (n,) values and must already vanish outside the
    ball around `center`; it is assumed polynomial of degree <= 5 inside.
    Triangles fully inside the support are integrated exactly by the degree-5
    rule; triangles crossing the circle are split four ways until max_depth.
    """
    verts = np.asarray(verts, dtype=float)
    center = np.asarray(center, dtype=float)
    if len(verts) < 3:
        return 0.0
    tris = _fan_triangles(verts)
    total = 0.0
    for depth in range(max_depth + 1):
        if len(tris) == 0:
            break
        dv = np.linalg.norm(tris - center[None, None, :], axis=2)
        full_inside = np.all(dv <= radius, axis=1)
        outside = _min_dist_to_triangles(tris, center) >= radius
        crossing = ~(full_inside | outside)
        if np.any(full_inside):
            total += _rule_eval(f, tris[full_inside])
        tris = tris[crossing]
        if depth == max_depth or len(tris) == 0:
            if len(tris):
                total += _rule_eval(f, tris)
            break
        a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
        ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
        tris = np.concatenate([
            np.stack([a, ab, ca], axis=1),
            np.stack([ab, b, bc], axis=1),
            np.stack([ca, bc, c], axis=1),
            np.stack([ab, bc, ca], axis=1)])
    return total


def integrate_polygon(f, verts: np.ndarray) -> float:
    """Degree-5 rule over a convex polygon without refinement.

    Exact when f is a polynomial of total degree <= 5 on the whole polygon.
    """
    verts = np.asarray(verts, dtype=float)
    if len(verts) < 3:
        return 0.0
    return _rule_eval(f, _fan_triangles(verts))


def integrate_interval(f, a: float, b: float, splits=()) -> float:
    """Five-point Gauss rule on [a, b], split at interior breakpoints.

    Exact for piecewise polynomials of degree <= 9 between the breakpoints.
    """
    if b < a:
        a, b = b, a
    knots = np.array(sorted({a, b, *[s for s in splits if a < s < b]}))
    total = 0.0
    for lo, hi in zip(knots[:-1], knots[1:]):
        xs = 0.5 * (hi - lo) * _GL_NODES + 0.5 * (hi + lo)
        total += 0.5 * (hi - lo) * float(_GL_WEIGHTS @ np.asarray(f(xs)))
    return total


# ---------------------------------------------------------------------------
# Monte Carlo fallback (any dimension; the only volume route in d=3)
# ---------------------------------------------------------------------------

def bump_mass_mc(p: geometry.ConvexPolytope, center, radius: float,
                 samples: int, seed: int) -> tuple[float, float]:
    """Seeded MC estimate of the bump mass over a polytope, with one sigma."""
    pts = geometry.sample_points(p, samples, seed).points
    vals = bump_value(pts, center, radius)
    mean = float(vals.mean())
    sigma = float(vals.std(ddof=1) / np.sqrt(samples)) if samples > 1 else np.inf
    return mean * p.volume, sigma * p.volume


def integrate_mc(f, p: geometry.ConvexPolytope, samples: int,
                 seed: int) -> tuple[float, float]:
    """Seeded MC estimate of any integrand over a polytope, with one sigma."""
    pts = geometry.sample_points(p, samples, seed).points
    vals = np.asarray(f(pts), dtype=float)
    mean = float(vals.mean())
    sigma = float(vals.std(ddof=1) / np.sqrt(samples)) if samples > 1 else np.inf
    return mean * p.volume, sigma * p.volume
