"""Relative pose estimation between two light-field cameras from LF-point
correspondences.

The estimation pipeline:

1. Normalize both LF-point sets to zero centroid and unit per-axis RMS.
2. Solve a homogeneous linear system for the 4x4 projective map W' between
   the normalized homogeneous LF-points.  The intrinsic structure of the map
   forces its third row to be a combination of the other rows, which a
   16x13 constraint matrix Q builds in; the reduced system is solved by SVD.
3. Undo the normalization and conjugate by the intrinsic blocks to obtain a
   candidate [R T; 0 1]; project the rotation block onto SO(3).
4. Re-solve the translation linearly given the projected rotation.
5. Refine (R, T) by Levenberg-Marquardt on the reprojection residual, with
   the rotation updated on the SO(3) manifold (right-multiplied exponential).

Coplanar scenes make step 2 ambiguous; ``detect_degeneracy`` diagnoses them
before any solving happens.

Vectors of matrix entries ("vec") are row-major throughout this module,
except in ``solve_translation`` where the rotation enters column-stacked;
each function documents which order it uses.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import (
    CoplanarDegeneracy,
    DegenerateDisparity,
    DegenerateSpread,
    IllConditioned,
    NonPositiveDepth,
    NumericalFailure,
    RankDeficient,
    SingularInput,
)
from .geometry import LFIntrinsics, RelativePose, skew, so3_exp

__all__ = [
    "CorrespondenceSet",
    "NormalizationTransform",
    "ProjectiveSolution",
    "DegeneracyReport",
    "EstimationResult",
    "normalize_points",
    "build_dlt_system",
    "constraint_matrix",
    "solve_linear",
    "project_to_SO3",
    "solve_translation",
    "detect_degeneracy",
    "refine_pose",
    "estimate_pose",
]

# Two smallest singular values closer than this (relatively) mean the null
# space is not unique.
_RANK_GAP = 1e-6

# A second-smallest singular value below this fraction of the largest is
# numerically zero, i.e. the null space has dimension >= 2 regardless of
# how the two zeros compare with each other.
_NULL_FLOOR = 1e-8

# Plane-fit RMS below this fraction of the scene diameter is called coplanar.
_COPLANAR_RATIO = 1e-3

_COND_LIMIT = 1e12

# Total squared reprojection error below this is machine noise (residuals
# around 1e-10 px): refinement stops rather than chase rounding.
_COST_FLOOR = 1e-16


@dataclass(frozen=True)
class CorrespondenceSet:
    """Matched LF-points of one scene seen by two cameras.

    first / second: (n, 3) arrays of (u_c, v_c, lambda) rows for camera 1
    and camera 2; row i of both arrays is the same scene point.
    """

    first: np.ndarray
    second: np.ndarray
    k1: LFIntrinsics
    k2: LFIntrinsics

    def __post_init__(self):
        a = np.ascontiguousarray(np.asarray(self.first, float))
        b = np.ascontiguousarray(np.asarray(self.second, float))
        if a.ndim != 2 or a.shape[1] != 3 or b.shape != a.shape:
            raise ValueError("correspondences must be matching (n, 3) arrays")
        if a.shape[0] < 4:
            raise ValueError("at least 4 correspondences are required")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("correspondences must be finite")
        pairs = {(*pa, *pb) for pa, pb in zip(map(tuple, a), map(tuple, b))}
        if len(pairs) != a.shape[0]:
            raise ValueError("duplicate correspondence pairs")
        object.__setattr__(self, "first", a)
        object.__setattr__(self, "second", b)
        a.flags.writeable = False
        b.flags.writeable = False

    def __len__(self):
        return self.first.shape[0]


@dataclass(frozen=True)
class NormalizationTransform:
    """Affine per-axis scaling v and offset x taking LF-points to zero
    centroid and unit RMS: p_norm = diag(v) p + x."""

    v1: float
    v2: float
    v3: float
    x1: float
    x2: float
    x3: float

    def __post_init__(self):
        if not (self.v1 > 0 and self.v2 > 0 and self.v3 > 0):
            raise ValueError("normalization scales must be positive")

    def as_matrix(self) -> np.ndarray:
        N = np.diag([self.v1, self.v2, self.v3, 1.0])
        N[:3, 3] = (self.x1, self.x2, self.x3)
        return N

    def inverse_matrix(self) -> np.ndarray:
        Ni = np.diag([1.0 / self.v1, 1.0 / self.v2, 1.0 / self.v3, 1.0])
        Ni[:3, 3] = (-self.x1 / self.v1, -self.x2 / self.v2, -self.x3 / self.v3)
        return Ni

    def apply(self, points: np.ndarray) -> np.ndarray:
        v = np.array([self.v1, self.v2, self.v3])
        x = np.array([self.x1, self.x2, self.x3])
        return np.asarray(points, float) * v + x


@dataclass(frozen=True)
class ProjectiveSolution:
    """Raw output of the linear solve.

    W_prime: the 4x4 map between normalized homogeneous LF-points, with
    row-major vec of unit norm.  W: the same map with normalization undone
    (defined up to scale).  c is the (4,4) entry of the de-normalized,
    intrinsics-conjugated candidate transform and mu = 1/c the overall
    projective scale.  singular_values: spectrum of the reduced design
    matrix (13 values, descending).
    """

    W_prime: np.ndarray
    W: np.ndarray
    mu: float
    c: float
    singular_values: np.ndarray


@dataclass(frozen=True)
class DegeneracyReport:
    """Total-least-squares plane fit of the backprojected scene.

    The scene is flagged coplanar when the fit RMS is below a small
    fraction of the scene diameter (bounding-box diagonal).
    """

    coplanar: bool
    normal: np.ndarray
    offset: float
    residual_rms: float
    scene_diameter: float


@dataclass(frozen=True)
class EstimationResult:
    """Pose estimate with diagnostics of both solver stages."""

    pose: RelativePose
    linear: ProjectiveSolution
    degeneracy: DegeneracyReport
    initial_cost: float = float("nan")
    final_cost: float = float("nan")
    iterations: int = 0
    converged: bool = True
    refined: bool = True


def normalize_points(points) -> tuple[np.ndarray, NormalizationTransform]:
    """Scale and shift (n, 3) LF-point coordinates to zero mean and unit
    per-axis RMS.  Raises DegenerateSpread if some axis has no spread."""
    P = np.asarray(points, float)
    centroid = P.mean(axis=0)
    rms = np.sqrt(((P - centroid) ** 2).mean(axis=0))
    if np.any(rms <= 1e-12):
        raise DegenerateSpread(f"zero spread along axis {int(np.argmin(rms))}")
    v = 1.0 / rms
    x = -v * centroid
    nt = NormalizationTransform(v[0], v[1], v[2], x[0], x[1], x[2])
    return nt.apply(P), nt


def build_dlt_system(
    corr: CorrespondenceSet,
    n1: NormalizationTransform,
    n2: NormalizationTransform,
) -> np.ndarray:
    """The (6n, 16) homogeneous design matrix A with A vec(W') = 0.

    Each correspondence contributes the six cross-product constraints
    p'_i (W' p)_j - p'_j (W' p)_i = 0 between the normalized homogeneous
    LF-points p (camera 1) and p' (camera 2); only three are independent.
    vec(W') is row-major.
    """
    P = np.column_stack([n1.apply(corr.first), np.ones(len(corr))])
    Pp = np.column_stack([n2.apply(corr.second), np.ones(len(corr))])
    n = len(corr)
    A = np.zeros((6 * n, 16))
    for r, (i, j) in enumerate(combinations(range(4), 2)):
        block = A[r::6]
        block[:, 4 * j : 4 * j + 4] += Pp[:, i : i + 1] * P
        block[:, 4 * i : 4 * i + 4] -= Pp[:, j : j + 1] * P
    return A


def constraint_matrix(
    k1: LFIntrinsics,
    k2: LFIntrinsics,
    n1: NormalizationTransform,
    n2: NormalizationTransform,
) -> np.ndarray:
    """The 16x13 matrix Q lifting the reduced unknown vector to vec(W').

    The rigid transform conjugated by the intrinsic blocks and the
    normalizations leaves W' with only 13 degrees of freedom: its third row
    is alpha' times its fourth row plus a fixed multiple of a vector built
    from the camera-1 side.  With row-major vec(W') = (w1..w16) and the
    extra unknown w0 appended as the 13th entry:

        w9  = alpha' w13
        w10 = alpha' w14
        w11 = alpha' w15 - w0
        w12 = alpha' w16 + alpha w0

    where alpha = x3 - K1 v3 (camera-1 normalization) and
    alpha' = x3' - K1' v3' (camera-2 normalization).  The reduced vector is
    (w1..w8, w13..w16, w0).
    """
    alpha = n1.x3 - k1.K1 * n1.v3
    alpha_p = n2.x3 - k2.K1 * n2.v3
    Q = np.zeros((16, 13))
    Q[:8, :8] = np.eye(8)
    Q[8, 8] = alpha_p
    Q[9, 9] = alpha_p
    Q[10, 10] = alpha_p
    Q[10, 12] = -1.0
    Q[11, 11] = alpha_p
    Q[11, 12] = alpha
    Q[12:, 8:12] = np.eye(4)
    return Q


def solve_linear(corr: CorrespondenceSet) -> ProjectiveSolution:
    """Solve the constrained homogeneous system for the projective map.

    The right singular vector of A Q for the smallest singular value gives
    the reduced unknowns; Q lifts them to vec(W').  Raises RankDeficient
    when the null vector is not unique: either the two smallest singular
    values agree to within a relative gap of 1e-6, or the second-smallest
    is below 1e-8 of the largest (a null space of dimension two or more,
    as a coplanar scene produces, makes both of the smallest values
    numerically zero without making them equal).
    """
    Pn1, n1 = normalize_points(corr.first)
    Pn2, n2 = normalize_points(corr.second)
    A = build_dlt_system(corr, n1, n2)
    Q = constraint_matrix(corr.k1, corr.k2, n1, n2)
    _, s, Vt = np.linalg.svd(A @ Q, full_matrices=False)
    if s[-1] >= (1.0 - _RANK_GAP) * s[-2] or s[-2] <= _NULL_FLOOR * s[0]:
        raise RankDeficient(
            f"no unique null vector: smallest singular values {s[-1]:.3e} vs {s[-2]:.3e}"
            f" (largest {s[0]:.3e})"
        )
    w16 = Q @ Vt[-1]
    w16 /= np.linalg.norm(w16)
    # SVD sign is arbitrary; pin it for reproducibility.
    if w16[np.argmax(np.abs(w16))] < 0:
        w16 = -w16
    W_prime = w16.reshape(4, 4)
    W = n2.inverse_matrix() @ W_prime @ n1.as_matrix()
    G = corr.k2.matrix_H_inverse() @ W @ corr.k1.matrix_H()
    c = float(G[3, 3])
    if abs(c) <= 1e-15:
        raise RankDeficient("projective scale vanished; geometry is degenerate")
    return ProjectiveSolution(
        W_prime=W_prime, W=W, mu=1.0 / c, c=c, singular_values=s.copy()
    )


def project_to_SO3(M) -> np.ndarray:
    """The rotation closest to M in Frobenius norm, via SVD with the
    determinant forced to +1.  Invariant under positive scaling of M.
    Raises SingularInput when M has a (numerically) zero singular value."""
    M = np.asarray(M, float)
    U, s, Vt = np.linalg.svd(M)
    if s[-1] <= 1e-12 * max(s[0], 1.0):
        raise SingularInput("matrix has a zero singular value")
    D = np.diag([1.0, 1.0, float(np.sign(np.linalg.det(U @ Vt)))])
    return U @ D @ Vt


def _reduced_coordinates(corr: CorrespondenceSet):
    """Per-point quantities of the intrinsics-undone camera-1 LF-points:
    the direction p = (a, b, 1) with a = (u_c - c_x)/f_x,
    b = (v_c - c_y)/f_y, and the inverse depth e = -(lambda + K1)/K2."""
    k1 = corr.k1
    a = (corr.first[:, 0] - k1.cx) / k1.fx
    b = (corr.first[:, 1] - k1.cy) / k1.fy
    e = -(corr.first[:, 2] + k1.K1) / k1.K2
    p = np.column_stack([a, b, np.ones_like(a)])
    return p, e


def _translation_system(corr: CorrespondenceSet):
    """Design matrices (A_R, A_T) of the linear translation constraints.

    For each correspondence, the camera-2 homogeneous LF-point must be
    proportional to the transformed camera-1 point; the three cross-product
    rows that avoid the disparity component are linear and homogeneous in
    (R, T).  A_R multiplies the column-stacked vec(R), A_T multiplies T:
    A_R vec(R) + A_T T = 0 at the true pose.
    """
    p, e = _reduced_coordinates(corr)
    k2 = corr.k2
    up = corr.second[:, 0]
    vp = corr.second[:, 1]
    n = len(corr)
    # Row r of R gets per-row coefficient c_r; with column-stacked vec(R),
    # entry r_{ij} sits at index 3*j + i and multiplies c_i * p_j.
    coeff = np.zeros((n, 3, 3))
    coeff[:, 0, 0] = -k2.fx
    coeff[:, 0, 2] = up - k2.cx
    coeff[:, 1, 1] = -k2.fy
    coeff[:, 1, 2] = vp - k2.cy
    coeff[:, 2, 0] = -vp * k2.fx
    coeff[:, 2, 1] = up * k2.fy
    coeff[:, 2, 2] = up * k2.cy - vp * k2.cx
    # A_R[row, 3*j + i] = coeff[row-group, i] * p[j]
    A_R = np.einsum("nri,nj->nrji", coeff, p).reshape(3 * n, 9)
    A_T = (coeff * e[:, None, None]).reshape(3 * n, 3)
    return A_R, A_T


def solve_translation(corr: CorrespondenceSet, R) -> np.ndarray:
    """Linear least-squares translation given a fixed rotation.

    Raises IllConditioned when the translation design matrix has condition
    number above 1e12.
    """
    R = np.asarray(R, float)
    A_R, A_T = _translation_system(corr)
    sv = np.linalg.svd(A_T, compute_uv=False)
    if sv[-1] <= 0 or sv[0] / sv[-1] > _COND_LIMIT:
        raise IllConditioned("translation system condition number exceeds 1e12")
    vec_R = R.reshape(-1, order="F")  # column-stacked
    T, *_ = np.linalg.lstsq(A_T, -A_R @ vec_R, rcond=None)
    return T


def detect_degeneracy(corr: CorrespondenceSet) -> DegeneracyReport:
    """Fit a total-least-squares plane to the backprojected camera-1 scene.

    The plane is the centroid plus the smallest principal direction of the
    point cloud; the scene counts as coplanar when the orthogonal RMS
    residual is under 1e-3 of the bounding-box diagonal (in that regime a
    plane-induced homography explains the data and the full projective map
    is not unique).

    Points whose measured disparity gives a non-positive, unbounded, or
    wildly outlying depth (over 50x the median either way) cannot be
    placed meaningfully in 3D; they are left out of the plane fit (heavy
    disparity noise on far points causes all three).  Raises
    DegenerateDisparity / NonPositiveDepth only when fewer than four
    points can be placed.
    """
    k1 = corr.k1
    lam = corr.first[:, 2]
    denom = lam + k1.K1
    usable = np.abs(denom) > 1e-12
    Z = np.where(usable, -k1.K2 / np.where(usable, denom, 1.0), -1.0)
    usable &= Z > 0
    if usable.any():
        z_med = float(np.median(Z[usable]))
        usable &= (Z < 50.0 * z_med) & (Z > z_med / 50.0)
    if usable.sum() < 4:
        if np.any(np.abs(denom) <= 1e-12):
            raise DegenerateDisparity("disparities map to infinite depth")
        raise NonPositiveDepth("backprojected points have non-positive depth")
    Z = Z[usable]
    X = Z * (corr.first[usable, 0] - k1.cx) / k1.fx
    Y = Z * (corr.first[usable, 1] - k1.cy) / k1.fy
    pts = np.column_stack([X, Y, Z])
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    _, s, Vt = np.linalg.svd(centered, full_matrices=False)
    normal = Vt[-1]
    residual_rms = float(s[-1] / np.sqrt(pts.shape[0]))
    diameter = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    coplanar = diameter > 0 and residual_rms / diameter < _COPLANAR_RATIO
    return DegeneracyReport(
        coplanar=coplanar,
        normal=normal,
        offset=float(normal @ centroid),
        residual_rms=residual_rms,
        scene_diameter=diameter,
    )


def _residuals(corr: CorrespondenceSet, p, e, R, T):
    """Reprojection residuals (n, 3): predicted minus observed camera-2
    LF-point.  Inf cost signalled by returning None when a transformed
    point reaches zero depth scale."""
    k2 = corr.k2
    g = p @ R.T + e[:, None] * T
    g3 = g[:, 2]
    if np.any(g3 <= 1e-12):
        return None
    r_u = k2.fx * g[:, 0] / g3 + k2.cx - corr.second[:, 0]
    r_v = k2.fy * g[:, 1] / g3 + k2.cy - corr.second[:, 1]
    r_l = -k2.K1 - k2.K2 * e / g3 - corr.second[:, 2]
    return np.column_stack([r_u, r_v, r_l])


def _jacobian(corr: CorrespondenceSet, p, e, R, T):
    """Jacobian (3n, 6) of the residuals in (omega, T), where the rotation
    moves as R exp(skew(omega)) (right perturbation, relinearized at R)."""
    k2 = corr.k2
    n = len(corr)
    g = p @ R.T + e[:, None] * T
    g3 = g[:, 2]
    drdg = np.zeros((n, 3, 3))
    drdg[:, 0, 0] = k2.fx / g3
    drdg[:, 0, 2] = -k2.fx * g[:, 0] / g3**2
    drdg[:, 1, 1] = k2.fy / g3
    drdg[:, 1, 2] = -k2.fy * g[:, 1] / g3**2
    drdg[:, 2, 2] = k2.K2 * e / g3**2
    # d g / d omega = -R skew(p);  d g / d T = e I
    S = np.zeros((n, 3, 3))
    S[:, 0, 1] = -p[:, 2]
    S[:, 0, 2] = p[:, 1]
    S[:, 1, 0] = p[:, 2]
    S[:, 1, 2] = -p[:, 0]
    S[:, 2, 0] = -p[:, 1]
    S[:, 2, 1] = p[:, 0]
    dgdw = -np.einsum("ab,nbc->nac", R, S)
    J = np.empty((n, 3, 6))
    J[:, :, :3] = np.einsum("nab,nbc->nac", drdg, dgdw)
    J[:, :, 3:] = drdg * e[:, None, None]
    return J.reshape(3 * n, 6)


def refine_pose(
    corr: CorrespondenceSet,
    initial: RelativePose,
    max_iterations: int = 100,
    cost_trace: list | None = None,
) -> tuple[RelativePose, float, int]:
    """Levenberg-Marquardt refinement of (R, T) on SO(3) x R^3.

    Minimizes the summed squared reprojection residual of all
    correspondences.  Damping starts at 1e-3 and moves by factors of 10;
    iteration stops when the relative cost decrease falls under 1e-12, the
    gradient infinity-norm under 1e-10, or the cost itself under 1e-16
    (residuals at the rounding floor; without this guard a start at the
    exact optimum would burn its budget rejecting noise-level steps).  The
    cost sequence is monotone because only improving steps are accepted.

    Returns (pose, final_cost, iterations); ``iterations`` counts attempted
    LM steps, so ``iterations < max_iterations`` means the refinement
    terminated on its own.  When ``cost_trace`` is a list, the initial cost
    and the cost after every accepted step are appended to it (a strictly
    decreasing sequence).  Raises NumericalFailure if the cost is
    non-finite at the current state.
    """
    p, e = _reduced_coordinates(corr)
    R = initial.R.copy()
    T = initial.T.copy()
    r = _residuals(corr, p, e, R, T)
    if r is None or not np.all(np.isfinite(r)):
        raise NumericalFailure("non-finite residual at the initial pose")
    cost = float(r.reshape(-1) @ r.reshape(-1))
    if cost_trace is not None:
        cost_trace.append(cost)
    damping = 1e-3
    iterations = 0
    converged = False
    while iterations < max_iterations:
        if cost <= _COST_FLOOR:
            converged = True
            break
        J = _jacobian(corr, p, e, R, T)
        rv = r.reshape(-1)
        g = J.T @ rv
        if np.abs(g).max() < 1e-10:
            converged = True
            break
        JtJ = J.T @ J
        accepted = False
        while iterations < max_iterations:
            iterations += 1
            D = np.diag(np.maximum(np.diag(JtJ), 1e-12))
            try:
                delta = np.linalg.solve(JtJ + damping * D, -g)
            except np.linalg.LinAlgError:
                raise NumericalFailure("normal equations are singular")
            R_new = R @ so3_exp(delta[:3])
            T_new = T + delta[3:]
            r_new = _residuals(corr, p, e, R_new, T_new)
            new_cost = (
                float(r_new.reshape(-1) @ r_new.reshape(-1))
                if r_new is not None and np.all(np.isfinite(r_new))
                else np.inf
            )
            if new_cost < cost:
                decrease = (cost - new_cost) / max(cost, 1e-300)
                R, T, r = R_new, T_new, r_new
                cost = new_cost
                if cost_trace is not None:
                    cost_trace.append(cost)
                damping = max(damping * 0.1, 1e-15)
                accepted = True
                if decrease < 1e-12:
                    converged = True
                break
            damping *= 10.0
            if damping > 1e12:
                converged = True  # stalled at a (local) minimum
                break
        if converged or not accepted:
            break
    if not np.isfinite(cost):
        raise NumericalFailure("cost is non-finite")
    del converged
    # Re-orthonormalize drift accumulated over many manifold steps.
    R = project_to_SO3(R)
    return RelativePose(R, T), cost, iterations


def estimate_pose(corr: CorrespondenceSet, refine: bool = True) -> EstimationResult:
    """Full pose estimation from LF-point correspondences.

    Runs the degeneracy check, the constrained linear solve, rotation
    projection, linear translation recovery and (by default) LM refinement.
    Raises CoplanarDegeneracy for coplanar scenes (the report rides on the
    exception) and propagates the component errors otherwise.
    """
    report = detect_degeneracy(corr)
    if report.coplanar:
        raise CoplanarDegeneracy(
            "scene is coplanar (plane RMS "
            f"{report.residual_rms:.3g} mm over diameter "
            f"{report.scene_diameter:.3g} mm); pose is not unique",
            report=report,
        )
    sol = solve_linear(corr)
    G = sol.W @ corr.k1.matrix_H()
    G = corr.k2.matrix_H_inverse() @ G
    G = G / sol.c
    R0 = project_to_SO3(G[:3, :3])
    T0 = solve_translation(corr, R0)
    pose0 = RelativePose(R0, T0)
    p, e = _reduced_coordinates(corr)
    r0 = _residuals(corr, p, e, R0, T0)
    initial_cost = (
        float(r0.reshape(-1) @ r0.reshape(-1)) if r0 is not None else float("inf")
    )
    if not refine:
        return EstimationResult(
            pose=pose0,
            linear=sol,
            degeneracy=report,
            initial_cost=initial_cost,
            final_cost=initial_cost,
            iterations=0,
            converged=True,
            refined=False,
        )
    max_iterations = 100
    pose, cost, iterations = refine_pose(corr, pose0, max_iterations)
    # A refinement that ran out of its iteration budget is conservatively
    # reported as not converged.
    return EstimationResult(
        pose=pose,
        linear=sol,
        degeneracy=report,
        initial_cost=initial_cost,
        final_cost=cost,
        iterations=iterations,
        converged=iterations < max_iterations,
        refined=True,
    )
