"""The flow T_t(x) = x + t grad(phi)(x) on a piecewise-affine potential.

Because the gradient is constant per cell, the image of each cell is the
translate A_i + t v_i, so every dynamical question reduces to polytope
arithmetic on translates: pairwise overlap volume (injectivity), coverage of
the union (rarefaction gaps), point multiplicity N(y) = #{i : y in T_t(A_i)},
and the observable g^psi(t) = int psi d(T_t)_# L^d = sum_i int_{A_i + t v_i}
psi.  Overlaps and g^psi are exact in d <= 2 and seeded Monte Carlo in d=3.

Verdicts over "a.e. t" are operationalized on a finite deterministic grid
(32 log-spaced times in (1e-3, 10]) plus 8 seeded uniform times.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry, quadrature
from .potential import (BumpFunction, PiecewiseAffinePotential,
                        interface_jumps, require_support_inside)

OVERLAP_REL_TOL = 1e-9          # overlap <= 1e-9 * vol(domain) counts as zero
EXPANDING_PROBE_FRACTION = 1e-3  # tolerated fraction of multiplicity>1 probes
MC_VOLUME_SAMPLES = 200_000

T_MAX_DEFAULT = 10.0


def default_time_grid(seed: int = 0, t_max: float = T_MAX_DEFAULT,
                      n_log: int = 32, n_random: int = 8) -> np.ndarray:
    """32 log-spaced times in (1e-3, t_max] plus 8 seeded uniform times."""
    grid = np.geomspace(1e-3, t_max, n_log)
    rng = np.random.default_rng(seed)
    extra = rng.uniform(0.0, t_max, size=n_random)
    extra = extra[extra > 0.0]
    return np.unique(np.concatenate([grid, extra]))


def cell_images(potential: PiecewiseAffinePotential,
                t: float) -> list[geometry.ConvexPolytope]:
    return [geometry.translate(cell, t * potential.gradients[i])
            for i, cell in enumerate(potential.partition.cells)]


def _overlap_pairs(images: list[geometry.ConvexPolytope]) -> list[tuple[int, int]]:
    """Candidate overlapping pairs by bounding-box rejection."""
    lo = np.array([geometry.bounding_box(p)[0] for p in images])
    hi = np.array([geometry.bounding_box(p)[1] for p in images])
    n = len(images)
    sep = np.any((lo[:, None, :] >= hi[None, :, :]) |
                 (lo[None, :, :] >= hi[:, None, :]), axis=2)
    iu, ju = np.triu_indices(n, k=1)
    keep = ~sep[iu, ju]
    return list(zip(iu[keep].tolist(), ju[keep].tolist()))


def pairwise_overlap_volume(images: list[geometry.ConvexPolytope]) -> float:
    """sum over i<j of vol(image_i intersect image_j); exact clipping."""
    total = 0.0
    for i, j in _overlap_pairs(images):
        ov = geometry.intersect(images[i], images[j])
        if ov is not None:
            total += ov.volume
    return total


def coverage_volume(images: list[geometry.ConvexPolytope],
                    mc_samples: int = MC_VOLUME_SAMPLES, seed: int = 0) -> float:
    """vol of the union of images: sweep in d=1, polygon union in d=2, MC in d=3."""
    d = images[0].dim
    if d == 1:
        spans = sorted((p.vertices[0, 0], p.vertices[-1, 0]) for p in images)
        total, cur_lo, cur_hi = 0.0, spans[0][0], spans[0][1]
        for a, b in spans[1:]:
            if a > cur_hi:
                total += cur_hi - cur_lo
                cur_lo, cur_hi = a, b
            else:
                cur_hi = max(cur_hi, b)
        return total + (cur_hi - cur_lo)
    if d == 2:
        from shapely.geometry import Polygon
        from shapely.ops import unary_union
        union = unary_union([Polygon(p.vertices) for p in images])
        return float(union.area)
    lo = np.min([geometry.bounding_box(p)[0] for p in images], axis=0)
    hi = np.max([geometry.bounding_box(p)[1] for p in images], axis=0)
    pts = geometry.sample_box(lo, hi, mc_samples, seed)
    hit = np.zeros(mc_samples, dtype=bool)
    for p in images:
        hit |= geometry.contains_many(p, pts)
    total = float(np.prod(hi - lo)) * float(hit.mean())
    # the union can never exceed the summed translate volumes
    return min(total, sum(p.volume for p in images))


@dataclass(frozen=True)
class FlowSnapshot:
    t: float
    images: tuple[geometry.ConvexPolytope, ...]
    overlap_volume: float
    coverage_volume: float


def snapshot(potential: PiecewiseAffinePotential, t: float,
             mc_samples: int = MC_VOLUME_SAMPLES, seed: int = 0) -> FlowSnapshot:
    """Images, total pairwise overlap, and covered volume at a fixed time."""
    if t < 0:
        raise ValueError("flow time must be nonnegative")
    images = cell_images(potential, t)
    return FlowSnapshot(t, tuple(images), pairwise_overlap_volume(images),
                        coverage_volume(images, mc_samples, seed))


@dataclass(frozen=True)
class MpcVerdict:
    preserving: bool
    tolerance: float
    witness_t: float | None = None
    witness_overlap: float | None = None


def mpc_verdict(potential: PiecewiseAffinePotential,
                t_samples) -> MpcVerdict:
    """Measure preservation on sampled times: zero pairwise overlap.

    Each translated cell carries Lebesgue density one, so the pushforward is
    Lebesgue on the union iff no two images share positive volume.
    """
    t_samples = np.asarray(list(t_samples), dtype=float)
    positive = t_samples[t_samples > 0]
    if len(positive) < 8:
        raise ValueError("need at least 8 positive time samples")
    tol = OVERLAP_REL_TOL * potential.partition.domain_volume
    for t in np.sort(positive):
        images = cell_images(potential, float(t))
        ov = pairwise_overlap_volume(images)
        if ov > tol:
            return MpcVerdict(False, tol, float(t), ov)
    return MpcVerdict(True, tol)


@dataclass(frozen=True)
class ExpandingVerdict:
    expanding: bool
    violated_fraction: float   # probe fraction with multiplicity >= 2
    overlap_volume: float      # exact pairwise overlap cross-check
    probe_count: int


def multiplicity_count(potential: PiecewiseAffinePotential, t: float,
                       queries) -> tuple[np.ndarray, np.ndarray]:
    """N(y) = #{i : y in closed T_t(A_i)} and a boundary flag per query."""
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    images = cell_images(potential, t)
    counts = np.zeros(len(queries), dtype=int)
    on_boundary = np.zeros(len(queries), dtype=bool)
    for p in images:
        slack = p.offsets[None, :] - queries @ p.normals.T
        inside = np.all(slack >= -geometry.TOL, axis=1)
        counts += inside
        on_boundary |= inside & np.any(np.abs(slack) <= geometry.TOL, axis=1)
    return counts, on_boundary


def expanding_verdict(potential: PiecewiseAffinePotential, t: float,
                      probe_count: int = 4096, seed: int = 0) -> ExpandingVerdict:
    """Pushforward density <= 1, probed over the bounding box of the images.

    Probe multiplicities are cross-checked against the exact pairwise
    overlap volume; both must vanish (up to tolerance) for the verdict.
    """
    images = cell_images(potential, t)
    lo = np.min([geometry.bounding_box(p)[0] for p in images], axis=0)
    hi = np.max([geometry.bounding_box(p)[1] for p in images], axis=0)
    pts = geometry.sample_box(lo, hi, probe_count, seed)
    counts, _ = multiplicity_count(potential, t, pts)
    frac = float((counts >= 2).mean())
    overlap = pairwise_overlap_volume(images)
    tol = OVERLAP_REL_TOL * potential.partition.domain_volume
    return ExpandingVerdict(frac <= EXPANDING_PROBE_FRACTION and overlap <= tol,
                            frac, overlap, probe_count)


# ---------------------------------------------------------------------------
# the observable g^psi and its derivative identity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GpsiCurve:
    bump: BumpFunction
    times: np.ndarray
    values: np.ndarray
    quad_errors: np.ndarray  # per-sample bound (MC sigma in d=3, ~eps else)


def gpsi_value(potential: PiecewiseAffinePotential, bump: BumpFunction,
               t: float, mc_samples: int = MC_VOLUME_SAMPLES,
               seed: int = 0) -> tuple[float, float]:
    """(g^psi(t), error bound): mass of the bump over the translated cells."""
    d = potential.dim
    total, var = 0.0, 0.0
    for i, cell in enumerate(potential.partition.cells):
        img = geometry.translate(cell, t * potential.gradients[i])
        lo, hi = geometry.bounding_box(img)
        if np.any(bump.center - bump.radius > hi) or \
           np.any(bump.center + bump.radius < lo):
            continue
        if d <= 2:
            total += quadrature.bump_mass_polytope(img, bump.center, bump.radius)
        else:
            est, sig = quadrature.bump_mass_mc(img, bump.center, bump.radius,
                                               mc_samples, seed + i)
            total += est
            var += sig ** 2
    err = np.sqrt(var) if d == 3 else 1e-13 * max(1.0, total)
    return total, err


def gpsi_curve(potential: PiecewiseAffinePotential, bump: BumpFunction,
               t_grid, mc_samples: int = MC_VOLUME_SAMPLES,
               seed: int = 0) -> GpsiCurve:
    """g^psi sampled on a time grid (the grid may include t=0)."""
    require_support_inside(bump, potential.partition)
    times = np.asarray(list(t_grid), dtype=float)
    vals = np.empty(len(times))
    errs = np.empty(len(times))
    for k, t in enumerate(times):
        vals[k], errs[k] = gpsi_value(potential, bump, float(t), mc_samples, seed)
    return GpsiCurve(bump, times, vals, errs)


def initial_increase_steps(curve: GpsiCurve, strict: float = 0.0) -> int:
    """Length of the strictly increasing prefix of the curve (in steps)."""
    k = 0
    while k + 1 < len(curve.values) and \
            curve.values[k + 1] > curve.values[k] + strict:
        k += 1
    return k


@dataclass(frozen=True)
class DerivativeCheck:
    t: float
    dt: float
    lhs: float  # central difference of g^psi
    rhs: float  # int grad(psi)(x + t grad(phi)) . grad(phi) dx
    mismatch: float


def derivative_check(potential: PiecewiseAffinePotential, bump: BumpFunction,
                     t: float, dt: float = 1e-3,
                     mc_samples: int = 200_000, seed: int = 0) -> DerivativeCheck:
    """Chain-rule identity (g^psi)'(t) = sum_i int_{A_i} grad(psi)(x+t v_i).v_i.

    The right side is transported to the image cells, where it is the same
    volume quadrature as the subharmonicity pairing.
    """
    require_support_inside(bump, potential.partition)
    if t - dt < 0:
        raise ValueError("t - dt must stay nonnegative")
    g_plus, _ = gpsi_value(potential, bump, t + dt, mc_samples, seed)
    g_minus, _ = gpsi_value(potential, bump, t - dt, mc_samples, seed)
    lhs = (g_plus - g_minus) / (2.0 * dt)

    d = potential.dim
    rhs = 0.0
    for i, cell in enumerate(potential.partition.cells):
        v = potential.gradients[i]
        if np.linalg.norm(v) == 0.0:
            continue
        img = geometry.translate(cell, t * v)
        lo, hi = geometry.bounding_box(img)
        if np.any(bump.center - bump.radius > hi) or \
           np.any(bump.center + bump.radius < lo):
            continue
        if d == 1:
            a, b = img.vertices[0, 0], img.vertices[-1, 0]
            c0 = float(bump.center[0])
            rhs += quadrature.integrate_interval(
                lambda xs: quadrature.bump_gradient(
                    xs[:, None], bump.center, bump.radius)[:, 0] * v[0],
                a, b, splits=(c0 - bump.radius, c0 + bump.radius))
        elif d == 2:
            rhs += quadrature.integrate_disk_supported(
                lambda pts: quadrature.bump_gradient(
                    pts, bump.center, bump.radius) @ v,
                img.vertices, bump.center, bump.radius)
        else:
            est, _ = quadrature.integrate_mc(
                lambda pts: quadrature.bump_gradient(
                    pts, bump.center, bump.radius) @ v,
                img, mc_samples, seed + i)
            rhs += est
    return DerivativeCheck(t, dt, lhs, rhs, abs(lhs - rhs))


# ---------------------------------------------------------------------------
# collision scale for nonconvex witnesses
# ---------------------------------------------------------------------------

def collision_probe(potential: PiecewiseAffinePotential
                    ) -> tuple[int, float, float]:
    """(face id, probe time, overlap of the two adjacent translated cells).

    For a face with negative jump the two adjacent cells approach along the
    face normal, so their translates overlap for all small positive t.  The
    probe time is min(1e-2, r / (4 |lambda| D)) with r the smaller adjacent
    inradius and D the larger adjacent diameter.
    """
    jumps = interface_jumps(potential)
    neg = [j for j in jumps if j.jump < 0]
    if not neg:
        raise ValueError("potential has no negative-jump face")
    j = min(neg, key=lambda q: q.jump)
    cells = potential.partition.cells
    a, b = cells[j.cell_a], cells[j.cell_b]
    r = min(geometry.inradius(a), geometry.inradius(b))
    big_d = max(geometry.diameter(a), geometry.diameter(b))
    t_star = min(1e-2, r / (4.0 * abs(j.jump) * big_d))
    img_a = geometry.translate(a, t_star * potential.gradients[j.cell_a])
    img_b = geometry.translate(b, t_star * potential.gradients[j.cell_b])
    ov = geometry.intersect(img_a, img_b)
    return j.face_id, t_star, 0.0 if ov is None else ov.volume
