"""Semidiscrete optimal transport and small-time rearrangement experiments.

A discrete target prescribes masses at finitely many velocity sites; the
matching Laguerre diagram realizes the unique convex potential whose gradient
pushes the domain's uniform measure onto the target.  Weights are found by a
damped Newton iteration on the concave dual (gradient = prescribed minus
actual cell volumes, Hessian assembled from the shared faces).  Discrete
couplings between equal-size point clouds use exact assignment; the polar
experiment drives the assignment route toward the Helmholtz gradient part as
the time step shrinks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize
import scipy.sparse
import scipy.spatial
import scipy.stats.qmc

from . import field, geometry, potential

MASS_SUM_RTOL = 1e-9
MIN_SITE_GAP = 1e-9
SDOT_DEFAULT_TOL = 1e-6
SDOT_MAX_ITERATIONS = 50
MAX_EXACT_OT = 4096
MIN_DAMPING = 1e-12


class TransportError(Exception):
    pass


class SolverDivergedError(TransportError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SizeOverflowError(TransportError):
    pass


def _check_sites(sites: np.ndarray):
    n = len(sites)
    if n > 1:
        diff = sites[:, None, :] - sites[None, :, :]
        gaps = np.linalg.norm(diff, axis=-1)
        gaps[np.arange(n), np.arange(n)] = np.inf
        if gaps.min() <= MIN_SITE_GAP:
            i, j = np.unravel_index(np.argmin(gaps), gaps.shape)
            raise TransportError(
                f"sites {i} and {j} coincide (gap {gaps.min():.3g})")


@dataclass(frozen=True)
class DiscreteTarget:
    domain: geometry.ConvexPolytope
    sites: np.ndarray   # (n, d)
    masses: np.ndarray  # (n,)

    def __post_init__(self):
        sites = np.atleast_2d(np.asarray(self.sites, dtype=float))
        masses = np.asarray(self.masses, dtype=float)
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "masses", masses)
        if sites.shape[1] != self.domain.dim:
            raise TransportError("site dimension does not match the domain")
        if len(masses) != len(sites):
            raise TransportError("need one mass per site")
        if np.any(masses <= 0):
            raise TransportError("masses must be positive")
        _check_sites(sites)
        vol = self.domain.volume
        if abs(masses.sum() - vol) > MASS_SUM_RTOL * max(vol, 1.0):
            raise TransportError(
                f"masses sum to {masses.sum():.12g}, domain volume is {vol:.12g}")
        sites.setflags(write=False)
        masses.setflags(write=False)


@dataclass(frozen=True)
class LaguerreDiagram:
    domain: geometry.ConvexPolytope
    sites: np.ndarray
    weights: np.ndarray  # normalized so weights[0] = 0
    cells: tuple         # ConvexPolytope or None per site
    volumes: np.ndarray


def laguerre_cells(domain, sites, weights) -> LaguerreDiagram:
    """Cells {x : x.v_i + w_i >= x.v_j + w_j for all j}, clipped to the domain."""
    sites = np.atleast_2d(np.asarray(sites, dtype=float))
    weights = np.asarray(weights, dtype=float).copy()
    if len(weights) != len(sites):
        raise TransportError("need one weight per site")
    _check_sites(sites)
    weights -= weights[0]
    n = len(sites)
    cells = []
    volumes = np.zeros(n)
    for i in range(n):
        others = np.arange(n) != i
        if not others.any():
            cells.append(domain)
            volumes[i] = domain.volume
            continue
        normals = sites[others] - sites[i]
        offsets = weights[i] - weights[others]
        cell = geometry.clip_by_halfspaces(domain, normals, offsets)
        cells.append(cell)
        volumes[i] = cell.volume if cell is not None else 0.0
    return LaguerreDiagram(domain, sites, weights, tuple(cells), volumes)


def _face_measures(diagram: LaguerreDiagram) -> dict:
    """Shared-face (d-1)-measures between nonempty cells, keyed (i, j), i<j."""
    present = [i for i, c in enumerate(diagram.cells) if c is not None]
    cells = [diagram.cells[i] for i in present]
    measures = {}
    for face in geometry.extract_faces(cells):
        i, j = present[face.cell_a], present[face.cell_b]
        key = (min(i, j), max(i, j))
        measures[key] = measures.get(key, 0.0) + face.measure
    return measures


def dual_objective(target: DiscreteTarget, weights) -> float:
    """Concave dual F(w) = sum m_i w_i - integral of max_i (x.v_i + w_i)."""
    diagram = laguerre_cells(target.domain, target.sites, weights)
    total = float(np.dot(target.masses, diagram.weights))
    for site, w, cell in zip(diagram.sites, diagram.weights, diagram.cells):
        if cell is None:
            continue
        total -= cell.volume * (float(site @ geometry.centroid(cell)) + w)
    return total


def solve_sdot(target: DiscreteTarget, tol: float = SDOT_DEFAULT_TOL,
               max_iterations: int = SDOT_MAX_ITERATIONS,
               trace: list | None = None) -> LaguerreDiagram:
    """Weights matching the prescribed masses by damped Newton ascent.

    The step solves the reduced Hessian system (site 0 pinned at weight 0);
    the damping halves the step until every positive-mass cell stays nonempty
    and the sup-norm mass residual contracts by at least a factor 1 - a/2.
    A singular Hessian (disconnected diagram) falls back to a plain gradient
    step under the same damping rule.
    """
    domain = target.domain
    vol = domain.volume
    n = len(target.sites)
    # Voronoi-equivalent start: with w_i = -|v_i|^2/2 the cells are the
    # Voronoi regions of the sites, nonempty whenever a site lies in the
    # domain, which the damping criterion then preserves.
    w = -0.5 * np.sum(target.sites ** 2, axis=1)
    diagram = laguerre_cells(domain, target.sites, w)
    w = diagram.weights
    for _ in range(max_iterations):
        residual = target.masses - diagram.volumes
        res_norm = float(np.max(np.abs(residual)))
        if trace is not None:
            trace.append((w.copy(), diagram.volumes.copy()))
        if res_norm <= tol * vol:
            return diagram
        step = _newton_step(diagram, residual)
        alpha = 1.0
        while alpha >= MIN_DAMPING:
            w_try = w + alpha * step
            diag_try = laguerre_cells(domain, target.sites, w_try)
            new_res = float(np.max(np.abs(target.masses - diag_try.volumes)))
            alive = all(diag_try.volumes[i] > 0 for i in range(n))
            if alive and new_res <= (1.0 - alpha / 2.0) * res_norm:
                w = diag_try.weights
                diagram = diag_try
                break
            alpha /= 2.0
        else:
            raise SolverDivergedError(
                f"damping underflow at residual {res_norm:.3e}",
                residual=res_norm)
    residual = float(np.max(np.abs(target.masses - diagram.volumes)))
    if residual <= tol * vol:
        if trace is not None:
            trace.append((w.copy(), diagram.volumes.copy()))
        return diagram
    raise SolverDivergedError(
        f"no convergence in {max_iterations} iterations "
        f"(residual {residual:.3e})", residual=residual)


def _newton_step(diagram: LaguerreDiagram, residual: np.ndarray) -> np.ndarray:
    """Solve L d = residual with site 0 pinned; gradient step if singular.

    L is the weighted face Laplacian: L[i][j] = -face_ij / |v_i - v_j| off
    the diagonal and row sums zero, the Jacobian of cell volumes in the
    weights.
    """
    n = len(diagram.sites)
    if n == 1:
        return np.zeros(1)
    lap = np.zeros((n, n))
    for (i, j), measure in _face_measures(diagram).items():
        coeff = measure / np.linalg.norm(diagram.sites[i] - diagram.sites[j])
        lap[i, i] += coeff
        lap[j, j] += coeff
        lap[i, j] -= coeff
        lap[j, i] -= coeff
    step = np.zeros(n)
    reduced = lap[1:, 1:]
    try:
        sol = np.linalg.solve(reduced, residual[1:])
        if not np.all(np.isfinite(sol)):
            raise np.linalg.LinAlgError
        step[1:] = sol
    except np.linalg.LinAlgError:
        step[1:] = residual[1:]
    return step


def brenier_potential(diagram: LaguerreDiagram):
    """max_i (x.v_i + w_i) as a piecewise-affine potential on the diagram.

    Empty cells are pruned: their sites received no mass and do not appear
    as pieces.
    """
    kept = [i for i, c in enumerate(diagram.cells) if c is not None]
    if not kept:
        raise TransportError("diagram has no nonempty cells")
    cells = [diagram.cells[i] for i in kept]
    partition = geometry.make_partition(diagram.domain, cells)
    grads = diagram.sites[kept]
    offs = diagram.weights[kept]
    return potential.make_potential(partition, grads, offs)


# ---------------------------------------------------------------------------
# discrete couplings


@dataclass(frozen=True)
class OptimalCoupling:
    assignment: np.ndarray | None  # target index per source point, if 1-1
    plan: np.ndarray | None        # dense plan for the weighted case
    cost: float                    # sum of weighted squared distances


def _sqdist_matrix(source, target):
    return scipy.spatial.distance.cdist(source, target, "sqeuclidean")


def discrete_ot(source, target, source_masses=None,
                target_masses=None) -> OptimalCoupling:
    """Exact optimal coupling for quadratic cost.

    Equal-size uniform clouds use the assignment solver (1D by sorting);
    weighted clouds go through the transport linear program.  Total masses
    default to 1 on each side and must agree.
    """
    source = np.atleast_2d(np.asarray(source, dtype=float))
    target = np.atleast_2d(np.asarray(target, dtype=float))
    if source.shape[1] != target.shape[1]:
        raise TransportError("point clouds must share a dimension")
    if max(len(source), len(target)) > MAX_EXACT_OT:
        raise SizeOverflowError(
            f"exact solve capped at {MAX_EXACT_OT} points per cloud; "
            f"subsample the clouds (entropic solvers are out of scope)")
    uniform = source_masses is None and target_masses is None
    if uniform and len(source) == len(target):
        n = len(source)
        if source.shape[1] == 1:
            order_s = np.argsort(source[:, 0], kind="stable")
            order_t = np.argsort(target[:, 0], kind="stable")
            assignment = np.empty(n, dtype=int)
            assignment[order_s] = order_t
        else:
            rows, cols = scipy.optimize.linear_sum_assignment(
                _sqdist_matrix(source, target))
            assignment = np.empty(n, dtype=int)
            assignment[rows] = cols
        sq = np.sum((target[assignment] - source) ** 2, axis=1)
        return OptimalCoupling(assignment, None, float(sq.sum() / n))
    a = (np.full(len(source), 1.0 / len(source))
         if source_masses is None else np.asarray(source_masses, float))
    b = (np.full(len(target), 1.0 / len(target))
         if target_masses is None else np.asarray(target_masses, float))
    if abs(a.sum() - b.sum()) > 1e-9 * max(a.sum(), 1.0):
        raise TransportError(
            f"total masses differ: {a.sum():.12g} vs {b.sum():.12g}")
    if len(source) * len(target) > 65536:
        raise SizeOverflowError("weighted transport LP capped at 65536 pairs")
    costs = _sqdist_matrix(source, target)
    n, m = costs.shape
    a_eq_rows = scipy.sparse.kron(scipy.sparse.eye(n), np.ones((1, m)))
    a_eq_cols = scipy.sparse.kron(np.ones((1, n)), scipy.sparse.eye(m))
    res = scipy.optimize.linprog(
        costs.ravel(),
        A_eq=scipy.sparse.vstack([a_eq_rows, a_eq_cols]).tocsr(),
        b_eq=np.concatenate([a, b]),
        bounds=(0, None), method="highs")
    if not res.success:
        raise TransportError(f"transport LP failed: {res.message}")
    plan = res.x.reshape(n, m)
    return OptimalCoupling(None, plan, float(np.sum(plan * costs)))


def w2_estimate(source, target, total_mass: float = 1.0) -> float:
    """Squared Wasserstein-2 estimate between equal-size uniform clouds."""
    source = np.atleast_2d(np.asarray(source, dtype=float))
    target = np.atleast_2d(np.asarray(target, dtype=float))
    if len(source) != len(target):
        raise TransportError("w2_estimate needs equal-size clouds")
    coupling = discrete_ot(source, target)
    return total_mass * coupling.cost


# ---------------------------------------------------------------------------
# the small-time polar experiment


@dataclass(frozen=True)
class PolarExperimentResult:
    t_grid: tuple
    err_grad: tuple     # L2 distance of (grad f_t - id)/t from the gradient part
    err_phi: tuple | None  # rearrangement channel; estimated only in 1D
    w2: tuple           # squared W2 cost between the moved and original cloud
    noise_floor: tuple  # replicate-difference estimate of estimator noise
    sample_count: int
    seed: int
    split: field.HelmholtzSplit
    bin_grid: field.Grid


def _nearest_node_values(f: field.GridVectorField, points: np.ndarray):
    """Piecewise-constant sampling: value of the grid cell containing a point.

    Points whose cell center is outside the mask borrow the nearest masked
    node (these occur in a thin rim near curved boundaries).
    """
    grid = f.grid
    coords = np.floor((points - np.asarray(grid.origin)) / grid.spacing)
    coords = np.clip(coords.astype(int), 0, np.asarray(grid.shape) - 1)
    node = grid.index_map()[tuple(coords.T)]
    values = np.zeros((len(points), grid.dim))
    hit = node >= 0
    values[hit] = f.values[node[hit]]
    if not hit.all():
        masked = grid.masked_points()
        for k in np.nonzero(~hit)[0]:
            j = int(np.argmin(np.sum((masked - points[k]) ** 2, axis=1)))
            values[k] = f.values[j]
    return values


def _binned_error(estimate, counts, reference_values, grid) -> float:
    covered = counts > 0
    diff = estimate.values[covered] - reference_values[covered]
    return float(np.sqrt(np.sum(diff ** 2) * grid.spacing ** grid.dim))


def low_discrepancy_samples(domain, count: int, seed: int) -> np.ndarray:
    """Scrambled-Sobol points in a polytope (rejection from the box).

    A low-discrepancy cloud keeps the empirical measure much closer to
    uniform than independent draws, which drops the assignment noise floor
    of the map estimates by roughly an order of magnitude at desk scale.
    Deterministic for a fixed seed.
    """
    lo, hi = geometry.bounding_box(domain)
    engine = scipy.stats.qmc.Sobol(d=domain.dim, scramble=True, seed=seed)
    chunks = []
    have = 0
    while have < count:
        want = max(256, 2 * (count - have))
        raw = engine.random(1 << int(np.ceil(np.log2(want))))
        pts = lo + raw * (hi - lo)
        keep = pts[geometry.contains_many(domain, pts)]
        chunks.append(keep)
        have += len(keep)
    return np.vstack(chunks)[:count]


def _grad_estimate(domain, b, bin_grid, t, count, seed):
    """One pipeline pass: sample, push, assign, divide by t, bin."""
    samples = low_discrepancy_samples(domain, count, seed)
    b_s = _nearest_node_values(b, samples)
    moved = samples + t * b_s
    coupling = discrete_ot(samples, moved)
    sigma = coupling.assignment
    gh = (moved[sigma] - samples) / t
    binned, counts = field.bin_vectors(bin_grid, samples, gh)
    return samples, sigma, coupling.cost, binned, counts


def polar_experiment(domain, b: field.GridVectorField, t_grid,
                     sample_count: int = 2048, seed: int = 0,
                     tol: float = 1e-10,
                     bins: int | None = None) -> PolarExperimentResult:
    """Estimate (grad f_t - id)/t by assignment and track its distance from
    the gradient part of b along a decreasing time grid.

    The noise floor per t is the replicate-difference estimate: the pipeline
    runs again on an independent sample set (seed offset by 1) and the floor
    is ||est1 - est2|| / sqrt(2) over commonly covered bins, a direct
    measurement of estimator scatter including assignment granularity.
    """
    t_grid = [float(t) for t in t_grid]
    if any(t <= 0 for t in t_grid):
        raise TransportError("time grid must be positive")
    if any(t1 <= t2 for t1, t2 in zip(t_grid, t_grid[1:])):
        raise TransportError("time grid must be strictly decreasing")
    d = domain.dim
    vol = domain.volume
    if bins is None:
        # ~8 samples per occupied cell at default resolution
        bins = max(16, int(round(np.sqrt(sample_count / 8.0))))
    bin_grid = field.make_grid(domain, bins)
    split = field.helmholtz_project(b, tol)
    sol_part = field.GridVectorField(
        b.grid, b.values - split.gradient_part.values)
    err_grad, err_phi, w2, floor = [], [], [], []
    for k, t in enumerate(t_grid):
        samples, sigma, cost, est, counts = _grad_estimate(
            domain, b, bin_grid, t, sample_count, seed)
        _, _, _, est2, counts2 = _grad_estimate(
            domain, b, bin_grid, t, sample_count, seed + 1)
        # reference binned from the same sample positions, so estimate and
        # reference see identical cell averaging
        ref_vals = _nearest_node_values(split.gradient_part, samples)
        ref_binned, _ = field.bin_vectors(bin_grid, samples, ref_vals)
        err_grad.append(_binned_error(est, counts, ref_binned.values, bin_grid))
        both = (counts > 0) & (counts2 > 0)
        diff = est.values[both] - est2.values[both]
        floor.append(float(np.sqrt(
            np.sum(diff ** 2) * bin_grid.spacing ** d / 2.0)))
        w2.append(vol * cost)
        if d == 1:
            inverse = np.empty_like(sigma)
            inverse[sigma] = np.arange(len(sigma))
            phi_disp = (samples[inverse] - samples) / t
            target_vals = _nearest_node_values(sol_part, samples)
            sq = np.sum((phi_disp - target_vals) ** 2, axis=1)
            err_phi.append(float(np.sqrt(vol * sq.mean())))
    return PolarExperimentResult(
        tuple(t_grid), tuple(err_grad),
        tuple(err_phi) if d == 1 else None,
        tuple(w2), tuple(floor), sample_count, seed, split, bin_grid)
