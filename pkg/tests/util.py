"""Shared generators and helpers for the test suite."""

from __future__ import annotations

import numpy as np

from breaklab import geometry


def random_convex_polygon(rng: np.random.Generator, n_points: int = 8,
                          scale: float = 1.0, center=None) -> geometry.ConvexPolytope:
    pts = rng.uniform(-scale, scale, size=(n_points, 2))
    if center is not None:
        pts = pts + np.asarray(center, dtype=float)
    return geometry.from_vertices(pts)


def random_polytope(rng: np.random.Generator, dim: int,
                    scale: float = 1.0) -> geometry.ConvexPolytope:
    n = {1: 2, 2: 8, 3: 12}[dim]
    pts = rng.uniform(-scale, scale, size=(n, dim))
    return geometry.from_vertices(pts)


def power_diagram_potential(rng: np.random.Generator,
                            domain: geometry.ConvexPolytope,
                            n_sites: int = 6, sign: float = 1.0):
    """Potential sign*max_i(x.v_i + w_i) as cells + gradients + offsets.

    sign=+1 is convex by construction (all jumps >= 0); sign=-1 negates
    every jump.  Built directly from half-space clipping so the potential
    test suite does not depend on the transport solver.
    """
    from breaklab import potential as pot

    lo, hi = geometry.bounding_box(domain)
    scale = float(np.min(hi - lo))
    mid = geometry.centroid(domain)
    # pieces v_i.(x - centroid) + w_i: anchoring at the centroid spreads the
    # winning regions over all directions, so most pieces stay active
    sites = rng.uniform(-1.0, 1.0, size=(n_sites, domain.dim))
    weights = rng.uniform(-0.05, 0.05, size=n_sites) * scale
    cells, grads, offs = [], [], []
    for i in range(n_sites):
        normals = sites - sites[i]
        offsets = (weights[i] - weights) + normals @ mid
        keep = np.linalg.norm(normals, axis=1) > 1e-12
        cell = geometry.clip_by_halfspaces(domain, normals[keep], offsets[keep])
        if cell is not None and cell.volume > 1e-9:
            cells.append(cell)
            grads.append(sign * sites[i])
            offs.append(sign * (weights[i] - sites[i] @ mid))
    partition = geometry.make_partition(domain, cells)
    return pot.PiecewiseAffinePotential(partition, np.array(grads),
                                        np.array(offs))


def strip_potential(rng: np.random.Generator, domain: geometry.ConvexPolytope,
                    n_strips: int = 4):
    """1D slope profile along a random direction: mixed-sign jumps.

    Cells are slabs orthogonal to a unit direction u with per-slab slopes
    s_k, so gradients s_k*u jump purely normally across slab faces.
    """
    from breaklab import potential as pot

    d = domain.dim
    u = rng.normal(size=d)
    u /= np.linalg.norm(u)
    proj = domain.vertices @ u
    breaks = np.linspace(proj.min(), proj.max(), n_strips + 1)
    slopes = rng.uniform(-1.0, 1.0, size=n_strips)
    cells, grads = [], []
    for k in range(n_strips):
        cell = geometry.clip_by_halfspaces(
            domain, np.array([-u, u]), np.array([-breaks[k], breaks[k + 1]]))
        if cell is not None and cell.volume > 1e-9:
            cells.append(cell)
            grads.append(slopes[k] * u)
    partition = geometry.make_partition(domain, cells)
    return pot.make_potential(partition, np.array(grads))


def abs_potential_1d(sign: float = 1.0):
    """phi = sign*|x| on (-1, 1): cells (-1,0), (0,1), slopes -+sign."""
    from breaklab import potential as pot

    dom = geometry.interval(-1.0, 1.0)
    cells = [geometry.interval(-1.0, 0.0), geometry.interval(0.0, 1.0)]
    partition = geometry.make_partition(dom, cells)
    return pot.PiecewiseAffinePotential(
        partition, np.array([[-sign], [sign]]), np.array([0.0, 0.0]))


def grid_partition(lo, hi, shape) -> geometry.CellPartition:
    """Axis-aligned grid of boxes over [lo, hi]; a convenient exact partition."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = len(lo)
    edges = [np.linspace(lo[k], hi[k], shape[k] + 1) for k in range(d)]
    cells = []
    for idx in np.ndindex(*shape):
        c_lo = np.array([edges[k][idx[k]] for k in range(d)])
        c_hi = np.array([edges[k][idx[k] + 1] for k in range(d)])
        cells.append(geometry.box(c_lo, c_hi))
    return geometry.make_partition(geometry.box(lo, hi), cells)
