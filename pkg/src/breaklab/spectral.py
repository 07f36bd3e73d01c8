"""Small symmetric eigenproblems and determinant-rigidity certificates.

Matrices up to 4x4 are diagonalized by cyclic Jacobi rotations.  The
rigidity question: if |det(I + tM)| = 1 for all t >= 0 then M = 0.  A finite
t-grid cannot test "all t", so passing the sweep yields a quantitative
certificate instead: an eigenvalue bound epsilon derived from the Vandermonde
system of the log-determinant linearized at 0 (formula documented at
unit_det_sweep).  The companion arithmetic-geometric mean bound shows that a
unit determinant with positive factors forces a nonnegative trace.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SYMMETRY_TOL = 1e-12
JACOBI_OFFDIAG_TOL = 1e-13
MAX_DIM = 4

DEFAULT_T_SAMPLES = (0.25, 0.5, 1.0)


class SpectralError(Exception):
    pass


class AsymmetryError(SpectralError):
    pass


class NonpositiveFactorError(SpectralError):
    pass


def as_symmetric(m) -> np.ndarray:
    """Validated symmetric matrix (averaged copy); rejects d > 4 or asymmetry."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise SpectralError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] > MAX_DIM:
        raise SpectralError(f"dimension {m.shape[0]} > {MAX_DIM} not supported")
    if np.max(np.abs(m - m.T)) > SYMMETRY_TOL:
        raise AsymmetryError(
            f"matrix is not symmetric: |M - M^T|_inf = {np.max(np.abs(m - m.T)):.3g}")
    return 0.5 * (m + m.T)


def eigen_system(m) -> tuple[np.ndarray, np.ndarray]:
    """(sorted eigenvalues, matching orthonormal columns) by cyclic Jacobi."""
    a = as_symmetric(m).copy()
    d = a.shape[0]
    vecs = np.eye(d)
    for _ in range(50):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2) * 2.0)
        if off <= JACOBI_OFFDIAG_TOL:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) \
                    if theta != 0.0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(d)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                vecs = vecs @ rot
    order = np.argsort(np.diag(a))
    vals = np.diag(a)[order]
    vecs = vecs[:, order]
    sym = as_symmetric(m)
    resid = np.max(np.linalg.norm(sym @ vecs - vecs * vals[None, :], axis=0))
    if resid > 1e-10:
        raise SpectralError(f"eigen residual {resid:.3g} exceeds 1e-10")
    return vals, vecs


def eigenvalues(m) -> np.ndarray:
    """Sorted eigenvalues of a symmetric matrix (d <= 4)."""
    return eigen_system(m)[0]


@dataclass(frozen=True)
class SweepVerdict:
    rigid_zero: bool
    epsilon: float | None = None      # certified bound on max |eigenvalue|
    violating_t: float | None = None
    det_value: float | None = None


def _rigidity_epsilon(t_samples: np.ndarray, d: int, tol: float) -> float:
    """Eigenvalue bound from the linearized log-determinant system.

    Writing q_m = (-1)^(m+1) p_m / m with power sums p_m of the eigenvalues,
    log Pi_i (1 + t lambda_i) = sum_{m>=1} q_m t^m.  Truncating at m = d and
    using the first d sample times gives the Vandermonde system V q = r,
    V[k, m] = t_k^m, with |r_k| <= delta := -log1p(-tol) when every sampled
    |product - 1| <= tol.  Hence |q_m| <= |V^{-1}|_inf delta; in particular
    p_2 = 2 |q_2| bounds every eigenvalue:
        epsilon = sqrt(2 |V^{-1}|_inf delta) + 2 |V^{-1}|_inf delta
    (the additive term absorbs the first-order channel; for d=1 only the
    linear term exists and epsilon = |V^{-1}|_inf delta).  Terms beyond m = d
    are dropped, consistent with linearization at 0.
    """
    ts = np.unique(t_samples)
    k = min(d, len(ts))
    ts = ts[:k]
    vand = np.vander(ts, N=k + 1, increasing=True)[:, 1:]
    inv_norm = float(np.max(np.abs(np.linalg.inv(vand)).sum(axis=1)))
    delta = -np.log1p(-tol)
    if k == 1:
        return inv_norm * delta * (1.0 + delta)
    return float(np.sqrt(2.0 * inv_norm * delta) + 2.0 * inv_norm * delta)


def unit_det_sweep(m, t_samples=DEFAULT_T_SAMPLES,
                   tol: float = 1e-9) -> SweepVerdict:
    """Check |det(I + tM)| = 1 over positive sample times.

    Any sampled deviation beyond tol reports the first violating time.  If
    every sample passes, the eigenvalues are certified small: rigid_zero
    carries the bound epsilon (see _rigidity_epsilon), and the eigenvalues
    are asserted to satisfy it.
    """
    ts = np.unique(np.asarray(list(t_samples), dtype=float))
    ts = ts[ts > 0]
    if len(ts) < 3:
        raise ValueError("need at least 3 distinct positive time samples")
    lam = eigenvalues(m)
    for t in ts:
        det = float(np.abs(np.prod(1.0 + t * lam)))
        if abs(det - 1.0) > tol:
            return SweepVerdict(False, violating_t=float(t), det_value=det)
    eps = _rigidity_epsilon(ts, len(lam), tol)
    if np.max(np.abs(lam)) > eps:
        raise SpectralError(
            f"certificate violated: all determinants within {tol} but "
            f"max |eigenvalue| = {np.max(np.abs(lam)):.3g} > epsilon = {eps:.3g}")
    return SweepVerdict(True, epsilon=eps)


@dataclass(frozen=True)
class AmGmReport:
    holds: bool
    geometric_mean: float   # det(I + tM)^(1/d)
    arithmetic_bound: float  # 1 + (t/d) trace(M)
    slack: float            # arithmetic_bound - geometric_mean
    trace: float
    det: float


def amgm_trace_bound(m, t: float) -> AmGmReport:
    """AM-GM chain: det(I + tM)^(1/d) <= 1 + (t/d) tr M for positive factors.

    When the determinant is 1 (within 1e-9) this forces tr M >= -1e-6; both
    sides of the chain are reported.  Nonpositive factors 1 + t lambda_i are
    a precondition error.
    """
    lam = eigenvalues(m)
    factors = 1.0 + t * lam
    if np.any(factors <= 0.0):
        raise NonpositiveFactorError(
            f"factor 1 + t*lambda = {factors.min():.3g} is not positive")
    d = len(lam)
    det = float(np.prod(factors))
    gm = det ** (1.0 / d)
    trace = float(lam.sum())
    am = 1.0 + (t / d) * trace
    slack = am - gm
    holds = slack >= -1e-12 and (abs(det - 1.0) > 1e-9 or trace >= -1e-6)
    return AmGmReport(holds, gm, am, slack, trace, det)


def unit_det_shift(m, t: float):
    """Shift c making det(I + t(M + cI)) = 1 with positive factors.

    The product is strictly increasing in c on the domain where all factors
    are positive, vanishing at the left edge, so a unique admissible root
    exists for every symmetric M and t > 0.  Returns (shifted matrix, c).
    """
    from scipy.optimize import brentq
    sym = as_symmetric(m)
    lam = eigenvalues(sym)
    c_min = (-1.0 / t) - lam.min()

    def f(c):
        return np.prod(1.0 + t * (lam + c)) - 1.0

    lo = c_min + 1e-9
    hi = max(abs(lam).max(), 1.0) / t + abs(c_min) + 1.0
    while f(hi) < 0:
        hi *= 2.0
    c = brentq(f, lo, hi, xtol=1e-14)
    return sym + c * np.eye(len(lam)), float(c)
