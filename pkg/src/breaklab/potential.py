"""Piecewise-affine potentials and their gradient-jump structure.

A potential is affine on each cell of a convex partition: phi(x) = v_i.x + c_i
on cell A_i.  Continuity across interior faces forces the gradient difference
between neighbouring cells to be purely normal; the signed normal jump lambda
per face is the density of the distributional Hessian, a rank-one measure
lambda nu (x) nu concentrated on the face.  Local convexity is equivalent to
every lambda being nonnegative.

The weak Laplacian pairing -int grad(phi).grad(psi) against a nonnegative
bump psi is computed by two deliberately independent routes: per-cell volume
quadrature of the bump gradient, and the exact face sum  sum_f lambda_f
int_f psi dH^{d-1}.  Agreement of the two routes within the stated tolerance
is itself a checked invariant; convex potentials must give nonnegative
pairings (subharmonicity).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry, quadrature

CONTINUITY_TOL = 1e-9
CONVEXITY_TOL = 1e-9
PAIRING_REL_TOL = 1e-6
# MC settings for the d=3 volume-quadrature fallback
MC_PAIRING_SAMPLES = 200_000


class PotentialError(Exception):
    pass


class NotContinuousError(PotentialError):
    pass


class SupportError(PotentialError):
    """The bump's support is not compactly contained in the domain."""


@dataclass(frozen=True)
class PiecewiseAffinePotential:
    """phi(x) = gradients[i] . x + offsets[i] on partition.cells[i]."""

    partition: geometry.CellPartition
    gradients: np.ndarray  # (n_cells, d)
    offsets: np.ndarray    # (n_cells,)

    @property
    def dim(self) -> int:
        return self.partition.dim

    @property
    def n_cells(self) -> int:
        return len(self.partition.cells)


def make_potential(partition: geometry.CellPartition, gradients,
                   offsets=None) -> PiecewiseAffinePotential:
    """Assemble a potential; missing offsets are solved for continuity."""
    gradients = np.atleast_2d(np.asarray(gradients, dtype=float))
    if len(gradients) != len(partition.cells):
        raise PotentialError(
            f"{len(gradients)} gradients for {len(partition.cells)} cells")
    if gradients.shape[1] != partition.dim:
        raise geometry.DimensionMismatchError(
            f"gradient dimension {gradients.shape[1]} != partition dimension "
            f"{partition.dim}")
    if offsets is None:
        offsets = solve_offsets(partition, gradients)
    return PiecewiseAffinePotential(partition, gradients,
                                    np.asarray(offsets, dtype=float))


@dataclass(frozen=True)
class Violation:
    face_id: int
    kind: str        # "tangential-jump" or "value-mismatch"
    residual: float


def validate(potential: PiecewiseAffinePotential,
             tol: float = CONTINUITY_TOL) -> list[Violation]:
    """Continuity audit; an empty list means the potential is admissible.

    Checks, per interior face: the gradient jump has no tangential component,
    and the two affine pieces agree at every face vertex.
    """
    out = []
    grads, offs = potential.gradients, potential.offsets
    for fid, f in enumerate(potential.partition.faces):
        dv = grads[f.cell_b] - grads[f.cell_a]
        tangential = dv - (dv @ f.normal) * f.normal
        t_res = float(np.linalg.norm(tangential))
        if t_res > tol:
            out.append(Violation(fid, "tangential-jump", t_res))
        vals_a = f.vertices @ grads[f.cell_a] + offs[f.cell_a]
        vals_b = f.vertices @ grads[f.cell_b] + offs[f.cell_b]
        v_res = float(np.max(np.abs(vals_a - vals_b)))
        if v_res > tol:
            out.append(Violation(fid, "value-mismatch", v_res))
    return out


def solve_offsets(partition: geometry.CellPartition, gradients,
                  anchor: float = 0.0, tol: float = CONTINUITY_TOL) -> np.ndarray:
    """Offsets making phi continuous, by BFS over the face-adjacency graph.

    The offset of cell 0 is pinned to `anchor`.  Raises when the adjacency
    graph is disconnected, when a gradient jump has a tangential component
    (continuity is then impossible for any offsets), or when an off-tree
    face disagrees with the propagated values.
    """
    gradients = np.atleast_2d(np.asarray(gradients, dtype=float))
    for fid, f in enumerate(partition.faces):
        dv = gradients[f.cell_b] - gradients[f.cell_a]
        tangential = dv - (dv @ f.normal) * f.normal
        if np.linalg.norm(tangential) > tol:
            raise NotContinuousError(
                f"face {fid} has a tangential gradient jump; no offsets can "
                f"make this potential continuous")
    n = len(partition.cells)
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for fid, f in enumerate(partition.faces):
        adj[f.cell_a].append((f.cell_b, fid))
        adj[f.cell_b].append((f.cell_a, fid))
    offsets = np.full(n, np.nan)
    offsets[0] = anchor
    queue = [0]
    while queue:
        i = queue.pop(0)
        for j, fid in adj[i]:
            f = partition.faces[fid]
            x = f.vertices[0]
            # continuity at x: v_i.x + c_i = v_j.x + c_j
            cj = offsets[i] + (gradients[i] - gradients[j]) @ x
            if np.isnan(offsets[j]):
                offsets[j] = cj
                queue.append(j)
            elif abs(offsets[j] - cj) > max(tol, 1e-7 * max(abs(cj), 1.0)):
                raise PotentialError(
                    f"gradients are not integrable: face {fid} forces offset "
                    f"{cj:.12g} on cell {j}, already assigned {offsets[j]:.12g}")
    if np.any(np.isnan(offsets)):
        raise PotentialError("face-adjacency graph is disconnected; "
                             "cannot propagate offsets")
    return offsets


@dataclass(frozen=True)
class InterfaceJump:
    face_id: int
    cell_a: int
    cell_b: int
    normal: np.ndarray
    jump: float       # (v_B - v_A) . nu, with nu oriented A -> B
    face_mass: float  # H^{d-1}(face)


def interface_jumps(potential: PiecewiseAffinePotential,
                    tol: float = CONTINUITY_TOL) -> list[InterfaceJump]:
    """One signed normal jump per interior face; requires continuity."""
    bad = [v for v in validate(potential, tol) if v.kind == "tangential-jump"]
    if bad:
        raise NotContinuousError(
            f"tangential gradient jumps on faces {[v.face_id for v in bad]}")
    out = []
    for fid, f in enumerate(potential.partition.faces):
        dv = potential.gradients[f.cell_b] - potential.gradients[f.cell_a]
        out.append(InterfaceJump(fid, f.cell_a, f.cell_b, f.normal,
                                 float(dv @ f.normal), f.measure))
    return out


@dataclass(frozen=True)
class ConvexityVerdict:
    convex: bool
    witness_faces: tuple[int, ...]  # faces with negative jump
    min_jump: float


def is_locally_convex(potential: PiecewiseAffinePotential,
                      tol: float = CONVEXITY_TOL) -> ConvexityVerdict:
    """Convex iff every interface jump is >= -tol."""
    jumps = interface_jumps(potential)
    if not jumps:
        return ConvexityVerdict(True, (), 0.0)
    witnesses = tuple(j.face_id for j in jumps if j.jump < -tol)
    return ConvexityVerdict(len(witnesses) == 0, witnesses,
                            min(j.jump for j in jumps))


@dataclass(frozen=True)
class HessianReport:
    jumps: list[InterfaceJump]
    positive: bool
    total_variation: float  # sum |lambda| . faceMass


def distributional_hessian_report(
        potential: PiecewiseAffinePotential) -> HessianReport:
    jumps = interface_jumps(potential)
    verdict = is_locally_convex(potential)
    tv = sum(abs(j.jump) * j.face_mass for j in jumps)
    return HessianReport(jumps, verdict.convex, tv)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def locate_cells(potential: PiecewiseAffinePotential, points: np.ndarray,
                 tol: float = geometry.TOL) -> np.ndarray:
    """Index of a cell containing each point (-1 if outside all cells)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    idx = np.full(len(points), -1, dtype=int)
    for i, cell in enumerate(potential.partition.cells):
        todo = idx < 0
        if not np.any(todo):
            break
        inside = geometry.contains_many(cell, points[todo], tol)
        sub = np.flatnonzero(todo)[inside]
        idx[sub] = i
    return idx


def evaluate(potential: PiecewiseAffinePotential, points) -> np.ndarray:
    """phi at points inside the domain; NaN outside every cell."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    idx = locate_cells(potential, points)
    vals = np.full(len(points), np.nan)
    ok = idx >= 0
    if np.any(ok):
        g = potential.gradients[idx[ok]]
        c = potential.offsets[idx[ok]]
        vals[ok] = np.einsum("nd,nd->n", g, points[ok]) + c
    return vals


def gradient_at(potential: PiecewiseAffinePotential, points) -> np.ndarray:
    """Per-cell constant gradient at points; NaN rows outside the domain.

    On faces the potential is not differentiable; the first containing cell
    wins, which only affects a measure-zero set.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    idx = locate_cells(potential, points)
    out = np.full((len(points), potential.dim), np.nan)
    ok = idx >= 0
    out[ok] = potential.gradients[idx[ok]]
    return out


# ---------------------------------------------------------------------------
# bump test functions and the subharmonicity pairing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BumpFunction:
    """psi(x) = (1 - |x - center|^2 / radius^2)^2, supported in a ball."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center",
                           np.atleast_1d(np.asarray(self.center, dtype=float)))
        if self.radius <= 0:
            raise ValueError("bump radius must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)

    def value(self, points) -> np.ndarray:
        return quadrature.bump_value(np.atleast_2d(np.asarray(points, float)),
                                     self.center, self.radius)

    def value_at(self, point) -> float:
        return float(self.value(np.atleast_2d(point))[0])

    def gradient(self, points) -> np.ndarray:
        return quadrature.bump_gradient(
            np.atleast_2d(np.asarray(points, float)), self.center, self.radius)

    @property
    def gradient_sup(self) -> float:
        return quadrature.bump_gradient_sup(self.radius)


def support_inside(bump: BumpFunction, domain: geometry.ConvexPolytope,
                   margin: float = 0.0) -> bool:
    """True when the support ball lies inside the domain with the margin."""
    slack = domain.offsets - domain.normals @ bump.center
    return bool(np.all(slack >= bump.radius + margin))


def require_support_inside(bump: BumpFunction,
                           partition: geometry.CellPartition) -> None:
    if len(partition.domain) == 1:
        if not support_inside(bump, partition.domain[0]):
            raise SupportError(
                f"bump at {bump.center.tolist()} radius {bump.radius} is not "
                f"compactly supported in the domain")
        return
    # union domains: the support must be covered by cells; check by mass
    covered = sum(geometry.contains(d, bump.center) for d in partition.domain)
    if covered == 0:
        raise SupportError("bump center lies outside the domain union")


def _volume_route(potential: PiecewiseAffinePotential, bump: BumpFunction,
                  mc_samples: int, seed: int) -> tuple[float, float]:
    """(-int grad(phi).grad(psi), MC sigma); sigma is 0 for the exact d <= 2 paths."""
    require_support_inside(bump, potential.partition)
    d = potential.dim
    total = 0.0
    var = 0.0
    for i, cell in enumerate(potential.partition.cells):
        v = potential.gradients[i]
        if np.linalg.norm(v) == 0.0:
            continue
        lo, hi = geometry.bounding_box(cell)
        if np.any(bump.center - bump.radius > hi) or \
           np.any(bump.center + bump.radius < lo):
            continue
        if d == 1:
            a, b = cell.vertices[0, 0], cell.vertices[-1, 0]
            c0 = float(bump.center[0])
            total += quadrature.integrate_interval(
                lambda xs: quadrature.bump_gradient(
                    xs[:, None], bump.center, bump.radius)[:, 0] * v[0],
                a, b, splits=(c0 - bump.radius, c0, c0 + bump.radius))
        elif d == 2:
            total += quadrature.integrate_disk_supported(
                lambda pts: quadrature.bump_gradient(
                    pts, bump.center, bump.radius) @ v,
                cell.vertices, bump.center, bump.radius)
        else:
            est, sigma = quadrature.integrate_mc(
                lambda pts: quadrature.bump_gradient(
                    pts, bump.center, bump.radius) @ v,
                cell, mc_samples, seed + i)
            total += est
            var += sigma ** 2
    return -total, np.sqrt(var)


def weak_laplacian_pairing(potential: PiecewiseAffinePotential,
                           bump: BumpFunction,
                           mc_samples: int = MC_PAIRING_SAMPLES,
                           seed: int = 0) -> float:
    """-int grad(phi).grad(psi) dx by per-cell volume quadrature.

    Per cell the integrand is grad(psi).v_i, a cubic polynomial inside the
    support ball: d=1 uses Gauss segments split at the support endpoints,
    d=2 the degree-5 triangle rule with circle-adaptive refinement, d=3 a
    seeded Monte Carlo fallback.
    """
    return _volume_route(potential, bump, mc_samples, seed)[0]


def face_bump_integral(face: geometry.InteriorFace, bump: BumpFunction) -> float:
    """Exact int_face psi dH^{d-1} for a single interior face."""
    d = face.vertices.shape[1]
    if d == 1:
        return float(bump.value(face.vertices)[0])
    if d == 2:
        return quadrature.bump_line_integral(face.vertices[0], face.vertices[1],
                                             bump.center, bump.radius)
    # d=3: restrict the bump to the face plane.  With h the center-plane
    # distance and rho^2 = r^2 - h^2, the restriction is (rho/r)^4 times a
    # planar bump of radius rho around the projected center.
    normal = face.normal
    base = face.vertices[0]
    h = float((bump.center - base) @ normal)
    if abs(h) >= bump.radius:
        return 0.0
    rho = np.sqrt(bump.radius ** 2 - h ** 2)
    u, w = geometry._plane_basis(normal)
    verts2 = np.stack([(face.vertices - base) @ u,
                       (face.vertices - base) @ w], axis=1)
    if geometry._polygon_area(verts2) < 0:
        verts2 = verts2[::-1]
    c2 = np.array([(bump.center - base) @ u, (bump.center - base) @ w])
    scale = (rho / bump.radius) ** 4
    return scale * quadrature.bump_mass_polygon(verts2, c2, rho)


def face_pairing_sum(potential: PiecewiseAffinePotential,
                     bump: BumpFunction) -> float:
    """sum_f lambda_f int_face psi dH^{d-1}: the exact surface route."""
    require_support_inside(bump, potential.partition)
    total = 0.0
    for j in interface_jumps(potential):
        if j.jump == 0.0:
            continue
        face = potential.partition.faces[j.face_id]
        total += j.jump * face_bump_integral(face, bump)
    return total


@dataclass(frozen=True)
class PairingResult:
    bump: BumpFunction
    volume_route: float
    face_route: float
    tolerance: float
    agree: bool


def pairing_check(potential: PiecewiseAffinePotential, bump: BumpFunction,
                  seed: int = 0) -> PairingResult:
    """Both pairing routes with the agreement tolerance 1e-6.|grad psi|_sup.vol.

    In d=3 the volume route is Monte Carlo, so its 5-sigma band widens the
    tolerance; the exact d <= 2 paths keep the stated bound unchanged.
    """
    vol = potential.partition.domain_volume
    a, sigma = _volume_route(potential, bump, MC_PAIRING_SAMPLES, seed)
    b = face_pairing_sum(potential, bump)
    tol = max(PAIRING_REL_TOL * bump.gradient_sup * vol, 5.0 * sigma)
    return PairingResult(bump, a, b, tol, abs(a - b) <= tol)


def bump_battery(domain: geometry.ConvexPolytope,
                 grid: int = 3) -> list[BumpFunction]:
    """Deterministic bump battery: grid^d centers, radii {R/4, R/8}, R inradius.

    Only bumps whose support ball lies strictly inside the domain survive;
    the Chebyshev center with radius R/2 is always included as a fallback.
    """
    center, big_r = geometry.chebyshev_ball(domain)
    bumps = [BumpFunction(center, big_r / 2.0)]
    lo, hi = geometry.bounding_box(domain)
    d = domain.dim
    for radius in (big_r / 4.0, big_r / 8.0):
        axes = [np.linspace(lo[k] + radius, hi[k] - radius, grid)
                for k in range(d)]
        centers = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        for c in centers:
            b = BumpFunction(c, radius)
            if support_inside(b, domain, margin=1e-9):
                bumps.append(b)
    return bumps
