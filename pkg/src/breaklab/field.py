"""Grid-sampled vector fields and the L2 projection onto gradients.

Fields live at the centers of the cells of a regular grid over the bounding
box of a domain; only cells whose center lies inside the domain carry values
(the mask).  The projector is exact least squares: the discrete gradient G
uses centered differences inside the mask and second-order one-sided stencils
where the mask ends, and the potential solves the normal equations G^T G g =
G^T b by conjugate gradients.  Divergence is the adjoint -G^T by definition,
so orthogonality of the two parts holds up to the solver residual with no
separate discretization choice to reconcile.  All stencils are exact on
quadratics, so fields that are gradients of quadratic potentials on a fully
masked box split with a solenoidal part at the solver floor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from . import geometry

MIN_RESOLUTION = 16
DEFAULT_TOL = 1e-10
# CG runs two decades below the requested tolerance: the normal-equations
# residual is amplified by the gradient operator's conditioning before it
# shows up in the orthogonality and idempotence invariants.
CG_SLACK = 1e-2
CG_FLOOR = 5e-13


class FieldError(Exception):
    pass


class GridMismatchError(FieldError):
    pass


class SolverError(FieldError):
    pass


@dataclass(frozen=True)
class Grid:
    """Regular grid of cell centers with an inside-the-domain mask."""
    origin: tuple
    spacing: float
    shape: tuple
    mask: np.ndarray  # boolean, full lattice shape

    def __post_init__(self):
        self.mask.setflags(write=False)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def node_count(self) -> int:
        return int(self.mask.sum())

    def lattice_points(self) -> np.ndarray:
        axes = [self.origin[a] + (np.arange(self.shape[a]) + 0.5) * self.spacing
                for a in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def masked_points(self) -> np.ndarray:
        return self.lattice_points()[self.mask.ravel()]

    def index_map(self) -> np.ndarray:
        """Lattice-shaped array: node number inside the mask, -1 outside."""
        idx = np.full(self.mask.size, -1, dtype=int)
        idx[self.mask.ravel()] = np.arange(self.node_count)
        return idx.reshape(self.shape)


def grids_equal(a: Grid, b: Grid) -> bool:
    return (a.shape == b.shape and abs(a.spacing - b.spacing) < 1e-12
            and np.allclose(a.origin, b.origin, atol=1e-12)
            and np.array_equal(a.mask, b.mask))


def _require_same_grid(a, b):
    if not grids_equal(a.grid, b.grid):
        raise GridMismatchError("fields live on different grids")


@dataclass(frozen=True)
class GridVectorField:
    grid: Grid
    values: np.ndarray  # (node_count, dim)

    def __post_init__(self):
        if self.values.shape != (self.grid.node_count, self.grid.dim):
            raise FieldError(
                f"values shape {self.values.shape} does not match "
                f"{self.grid.node_count} masked nodes in d={self.grid.dim}")
        if not np.all(np.isfinite(self.values)):
            raise FieldError("field values must be finite")
        self.values.setflags(write=False)


@dataclass(frozen=True)
class GridScalarField:
    grid: Grid
    values: np.ndarray  # (node_count,)

    def __post_init__(self):
        if self.values.shape != (self.grid.node_count,):
            raise FieldError("scalar values must be one per masked node")
        self.values.setflags(write=False)


def make_grid(domain, resolution: int) -> Grid:
    """Grid over the bounding box of a polytope, masked at cell centers.

    resolution counts cells along the longest box side; other sides must be
    commensurate with the resulting spacing.
    """
    if resolution < MIN_RESOLUTION:
        raise FieldError(f"resolution {resolution} < {MIN_RESOLUTION}")
    verts = np.asarray(domain.vertices, dtype=float)
    lo = verts.min(axis=0)
    hi = verts.max(axis=0)
    sides = hi - lo
    h = float(sides.max()) / resolution
    shape = []
    for a, side in enumerate(sides):
        n = int(round(side / h))
        if n < MIN_RESOLUTION:
            raise FieldError(f"axis {a} resolves to {n} < {MIN_RESOLUTION} cells")
        if abs(n * h - side) > 1e-9 * max(side, 1.0):
            raise FieldError(
                f"box side {side} along axis {a} is not a multiple of the "
                f"spacing {h}")
        shape.append(n)
    shape = tuple(shape)
    axes = [lo[a] + (np.arange(shape[a]) + 0.5) * h for a in range(len(shape))]
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([m.ravel() for m in mesh], axis=-1)
    mask = geometry.contains_many(domain, centers).reshape(shape)
    if not mask.any():
        raise FieldError("no cell centers fall inside the domain")
    return Grid(tuple(lo), h, shape, mask)


def from_function(grid: Grid, fn) -> GridVectorField:
    pts = grid.masked_points()
    vals = np.asarray(fn(pts), dtype=float)
    if vals.shape != (grid.node_count, grid.dim):
        raise FieldError("field function must return one d-vector per point")
    return GridVectorField(grid, vals)


def scalar_from_function(grid: Grid, fn) -> GridScalarField:
    pts = grid.masked_points()
    return GridScalarField(grid, np.asarray(fn(pts), dtype=float))


# ---------------------------------------------------------------------------
# discrete gradient


_OPERATOR_CACHE: dict = {}


def _grid_key(grid: Grid):
    return (grid.origin, grid.spacing, grid.shape, grid.mask.tobytes())


def gradient_matrix(grid: Grid) -> scipy.sparse.csr_matrix:
    """Sparse G: scalar node values -> flattened (node, axis) gradients.

    Centered differences where both line neighbors are masked; one-sided
    3-point stencils (exact on quadratics) at mask ends; 2-point stencils on
    interior runs of length two; a zero row when a node is isolated along an
    axis (that component is then unrepresentable and stays in the
    complement).
    """
    key = _grid_key(grid)
    cached = _OPERATOR_CACHE.get(key)
    if cached is not None:
        return cached
    idx = grid.index_map()
    n = grid.node_count
    d = grid.dim
    h = grid.spacing
    rows, cols, data = [], [], []

    def neighbor(multi, axis, step):
        m = list(multi)
        m[axis] += step
        if not (0 <= m[axis] < grid.shape[axis]):
            return -1
        return idx[tuple(m)]

    for multi in zip(*np.nonzero(grid.mask)):
        i = idx[multi]
        for a in range(d):
            row = i * d + a
            plus = neighbor(multi, a, +1)
            minus = neighbor(multi, a, -1)
            if plus >= 0 and minus >= 0:
                entries = ((plus, 0.5 / h), (minus, -0.5 / h))
            elif plus >= 0:
                plus2 = neighbor(multi, a, +2)
                if plus2 >= 0:
                    entries = ((i, -1.5 / h), (plus, 2.0 / h), (plus2, -0.5 / h))
                else:
                    entries = ((i, -1.0 / h), (plus, 1.0 / h))
            elif minus >= 0:
                minus2 = neighbor(multi, a, -2)
                if minus2 >= 0:
                    entries = ((i, 1.5 / h), (minus, -2.0 / h), (minus2, 0.5 / h))
                else:
                    entries = ((i, 1.0 / h), (minus, -1.0 / h))
            else:
                entries = ()
            for col, w in entries:
                rows.append(row)
                cols.append(col)
                data.append(w)
    g = scipy.sparse.csr_matrix((data, (rows, cols)), shape=(n * d, n))
    if len(_OPERATOR_CACHE) >= 32:
        _OPERATOR_CACHE.pop(next(iter(_OPERATOR_CACHE)))
    _OPERATOR_CACHE[key] = g
    return g


def divergence(field: GridVectorField) -> GridScalarField:
    """Adjoint divergence -G^T (so <G g, v> = -<g, div v> with h^d weights)."""
    g = gradient_matrix(field.grid)
    return GridScalarField(field.grid, -(g.T @ field.values.ravel()))


# ---------------------------------------------------------------------------
# norms


def _masked_values(f):
    return f.values


def l2_inner(f, g) -> float:
    _require_same_grid(f, g)
    h = f.grid.spacing
    return float(np.sum(_masked_values(f) * _masked_values(g))
                 * h ** f.grid.dim)


def l2_norm(f) -> float:
    h = f.grid.spacing
    return float(np.sqrt(np.sum(_masked_values(f) ** 2) * h ** f.grid.dim))


def l2_error(f, g) -> float:
    _require_same_grid(f, g)
    h = f.grid.spacing
    diff = _masked_values(f) - _masked_values(g)
    return float(np.sqrt(np.sum(diff ** 2) * h ** f.grid.dim))


# ---------------------------------------------------------------------------
# Helmholtz projection


@dataclass(frozen=True)
class HelmholtzSplit:
    gradient_part: GridVectorField
    solenoidal_part: GridVectorField
    potential: GridScalarField  # mean zero
    tol: float
    ortho_residual: float       # <gradient_part, solenoidal_part>
    div_residual: float         # L2 norm of adjoint divergence of b1


def _run_cg(op, rhs, rtol, maxiter):
    try:
        return scipy.sparse.linalg.cg(op, rhs, rtol=rtol, atol=0.0,
                                      maxiter=maxiter)
    except TypeError:  # older scipy spells the relative tolerance "tol"
        return scipy.sparse.linalg.cg(op, rhs, tol=rtol, atol=0.0,
                                      maxiter=maxiter)


def helmholtz_project(b: GridVectorField, tol: float = DEFAULT_TOL) -> HelmholtzSplit:
    """Split b = gradient_part + solenoidal_part, the L2-orthogonal way.

    The potential solves the normal equations of min ||G g - b|| by CG run
    well below tol; constants are fixed by the mean-zero convention.  The
    right-hand side G^T b is orthogonal to constants by construction, so the
    singular direction never enters the Krylov space.
    """
    grid = b.grid
    if min(grid.shape) < MIN_RESOLUTION:
        raise FieldError(f"grid resolution {min(grid.shape)} < {MIN_RESOLUTION}")
    g_mat = gradient_matrix(grid)
    normal = (g_mat.T @ g_mat).tocsr()
    rhs = g_mat.T @ b.values.ravel()
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        g = np.zeros(grid.node_count)
    else:
        rtol = max(tol * CG_SLACK, CG_FLOOR)
        maxiter = 200 * max(grid.shape)
        g, info = _run_cg(normal, rhs, rtol, maxiter)
        if info != 0:
            raise SolverError(f"conjugate gradients stopped with info={info}")
        resid = np.linalg.norm(rhs - normal @ g)
        if resid > 10 * rtol * rhs_norm:
            raise SolverError(
                f"normal-equation residual {resid:.3e} above requested "
                f"{rtol * rhs_norm:.3e}")
    g = g - g.mean()
    grad = GridVectorField(grid, (g_mat @ g).reshape(-1, grid.dim))
    sol = GridVectorField(grid, b.values - grad.values)
    ortho = l2_inner(grad, sol)
    div_res = l2_norm(divergence(sol))
    return HelmholtzSplit(grad, sol, GridScalarField(grid, g), tol,
                          ortho, div_res)


def projector_idempotence_check(b: GridVectorField,
                                tol: float = DEFAULT_TOL) -> bool:
    """Projecting the gradient part again reproduces it within 10*tol."""
    first = helmholtz_project(b, tol)
    second = helmholtz_project(first.gradient_part, tol)
    err = l2_error(second.gradient_part, first.gradient_part)
    return err <= 10.0 * tol * max(l2_norm(b), 1e-30)


# ---------------------------------------------------------------------------
# named closed-form fields


def zero_field(grid: Grid) -> GridVectorField:
    return GridVectorField(grid, np.zeros((grid.node_count, grid.dim)))


def rotational_disk(grid: Grid, center=(0.0, 0.0), radius=1.0,
                    amplitude=1.0) -> GridVectorField:
    """Divergence-free vortex supported on a disk.

    b = amplitude * (1 - rho^2/r^2)^2 * (-(x2-c2), x1-c1) inside the disk and
    0 outside; the radial profile keeps it C^1 across the rim and exactly
    divergence-free everywhere (the gradient of the profile is radial, the
    rotation tangential).
    """
    if grid.dim != 2:
        raise FieldError("rotational_disk is two-dimensional")
    pts = grid.masked_points()
    rel = pts - np.asarray(center, dtype=float)
    rho2 = np.sum(rel ** 2, axis=1)
    profile = np.where(rho2 < radius ** 2,
                       (1.0 - rho2 / radius ** 2) ** 2, 0.0)
    rot = np.stack([-rel[:, 1], rel[:, 0]], axis=1)
    return GridVectorField(grid, amplitude * profile[:, None] * rot)


def radial_gradient(grid: Grid, center=None, amplitude=1.0) -> GridVectorField:
    """b = amplitude * (x - center), the gradient of amplitude*|x-center|^2/2."""
    pts = grid.masked_points()
    if center is None:
        center = np.zeros(grid.dim)
    return GridVectorField(grid, amplitude * (pts - np.asarray(center, float)))


def sum_field(grid: Grid, terms=()) -> GridVectorField:
    if not terms:
        raise FieldError("sum field needs at least one term")
    total = np.zeros((grid.node_count, grid.dim))
    for spec in terms:
        total = total + build_field(grid, spec).values
    return GridVectorField(grid, total)


FIELD_REGISTRY = {
    "zero": zero_field,
    "rotational_disk": rotational_disk,
    "radial_gradient": radial_gradient,
    "sum": sum_field,
}


def build_field(grid: Grid, spec: dict) -> GridVectorField:
    """Instantiate a registry field from {"id": name, "parameters": {...}}."""
    if "id" not in spec:
        raise FieldError("field spec needs an 'id'")
    name = spec["id"]
    if name not in FIELD_REGISTRY:
        raise FieldError(f"unknown field id {name!r}; known: "
                         f"{sorted(FIELD_REGISTRY)}")
    params = dict(spec.get("parameters", {}))
    if "center" in params:
        params["center"] = tuple(params["center"])
    return FIELD_REGISTRY[name](grid, **params)


# ---------------------------------------------------------------------------
# binning sample vectors onto a grid (used by the transport experiments)


def bin_vectors(grid: Grid, points: np.ndarray, vectors: np.ndarray):
    """Average sample vectors over the grid cells containing them.

    Returns (field, counts): nodes with no samples get the zero vector and a
    zero count; norms comparing binned data should restrict to counts > 0.
    """
    points = np.asarray(points, dtype=float)
    vectors = np.asarray(vectors, dtype=float)
    if points.shape != vectors.shape or points.shape[1] != grid.dim:
        raise FieldError("points and vectors must be (n, d) on this grid")
    coords = np.floor((points - np.asarray(grid.origin)) / grid.spacing)
    coords = coords.astype(int)
    inside = np.all((coords >= 0) & (coords < np.asarray(grid.shape)), axis=1)
    flat = np.ravel_multi_index(tuple(coords[inside].T), grid.shape)
    node_of_flat = grid.index_map().ravel()
    node = node_of_flat[flat]
    keep = node >= 0
    node = node[keep]
    vec = vectors[inside][keep]
    sums = np.zeros((grid.node_count, grid.dim))
    counts = np.zeros(grid.node_count, dtype=int)
    np.add.at(sums, node, vec)
    np.add.at(counts, node, 1)
    nonzero = counts > 0
    sums[nonzero] /= counts[nonzero, None]
    return GridVectorField(grid, sums), counts
