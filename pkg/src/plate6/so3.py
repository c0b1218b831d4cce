"""Small-matrix algebra on SO(3) and its Lie algebra of skew matrices.

Conventions:
- rotations are proper-orthogonal 3x3 matrices acting on column vectors,
- the axial map pairs a skew matrix A with the vector a such that
  ``A @ v == cross(a, v)`` for every v,
- all functions broadcast over leading batch dimensions.
"""

from __future__ import annotations

import numpy as np

# Validity tolerance for rotation matrices (orthogonality, determinant,
# squared norm). Fixed at construction time; see project_so3 for repair.
ROTATION_TOL = 1e-12

# Below this angle the closed-form sin/cos factors are replaced by series
# to avoid cancellation.
_SMALL_ANGLE = 1e-4


def mat_t(A: np.ndarray) -> np.ndarray:
    """Batched matrix transpose (swap the two trailing axes)."""
    return np.swapaxes(A, -1, -2)


def solve3(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve batched 3x3 systems by the closed-form adjugate inverse.

    Intended for well-conditioned matrices (the projection chain's Sylvester
    operator has eigenvalues near 2); no pivoting.
    """
    adjT, det = _adjugate_transpose(A)
    return (mat_t(adjT) @ b[..., None])[..., 0] / det[..., None]


def hat(v: np.ndarray) -> np.ndarray:
    """Skew matrix of an axial vector: hat(v) @ w == cross(v, w)."""
    v = np.asarray(v, dtype=float)
    A = np.zeros(v.shape[:-1] + (3, 3))
    A[..., 0, 1] = -v[..., 2]
    A[..., 0, 2] = v[..., 1]
    A[..., 1, 0] = v[..., 2]
    A[..., 1, 2] = -v[..., 0]
    A[..., 2, 0] = -v[..., 1]
    A[..., 2, 1] = v[..., 0]
    return A


def axl(A: np.ndarray, check: bool = True) -> np.ndarray:
    """Axial vector (A32, A13, A21) of a skew-symmetric matrix.

    Only the three canonical entries are read.  With ``check`` enabled the
    input is rejected unless ``|A + A^T| <= 1e-10 * max(1, |A|)`` in the
    Frobenius norm.
    """
    A = np.asarray(A, dtype=float)
    if check:
        defect = np.linalg.norm(A + np.swapaxes(A, -1, -2), axis=(-2, -1))
        bound = 1e-10 * np.maximum(1.0, np.linalg.norm(A, axis=(-2, -1)))
        if np.any(defect > bound):
            raise ValueError(
                "axl: input is not skew-symmetric "
                f"(max defect {float(np.max(defect)):.3e})"
            )
    return np.stack([A[..., 2, 1], A[..., 0, 2], A[..., 1, 0]], axis=-1)


def skew_part_axial(M: np.ndarray) -> np.ndarray:
    """Axial vector of the skew part of an arbitrary matrix, axl((M - M^T)/2)."""
    M = np.asarray(M, dtype=float)
    return 0.5 * np.stack(
        [
            M[..., 2, 1] - M[..., 1, 2],
            M[..., 0, 2] - M[..., 2, 0],
            M[..., 1, 0] - M[..., 0, 1],
        ],
        axis=-1,
    )


def exp_so3(v: np.ndarray) -> np.ndarray:
    """Rotation by angle |v| about axis v/|v| (closed form with series fallback).

    The sinc-type factors switch to their Taylor series below angle 1e-4 so
    the map is accurate through v = 0.
    """
    v = np.asarray(v, dtype=float)
    theta2 = np.sum(v * v, axis=-1)
    theta = np.sqrt(theta2)
    small = theta < _SMALL_ANGLE
    # guard against 0/0; the guarded lanes take the series branch
    theta2_safe = np.where(small, 1.0, theta2)
    a = np.where(small, 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0,
                 np.sin(theta) / np.sqrt(theta2_safe))
    b = np.where(small, 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
                 (1.0 - np.cos(theta)) / theta2_safe)
    A = hat(v)
    A2 = A @ A
    eye = np.broadcast_to(np.eye(3), A.shape)
    return eye + a[..., None, None] * A + b[..., None, None] * A2


def log_so3(R: np.ndarray) -> np.ndarray:
    """Principal axial logarithm of a rotation, valid for angles below pi.

    Rejects inputs with trace(R) <= -1 + 1e-9 (angle at or beyond pi); for the
    plate discretization such a jump between adjacent nodes means the mesh is
    too coarse for the rotation field, not a recoverable condition.
    """
    R = np.asarray(R, dtype=float)
    trace = R[..., 0, 0] + R[..., 1, 1] + R[..., 2, 2]
    if np.any(trace <= -1.0 + 1e-9):
        raise ValueError(
            "log_so3: rotation angle at or beyond pi "
            f"(min trace {float(np.min(trace)):.12f})"
        )
    c = np.clip((trace - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(c)
    small = theta < _SMALL_ANGLE
    sin_theta = np.where(small, 1.0, np.sin(theta))
    theta2 = theta * theta
    # theta/sin(theta), series 1 + t^2/6 + 7 t^4/360 near zero
    scale = np.where(small, 1.0 + theta2 / 6.0 + 7.0 * theta2 * theta2 / 360.0,
                     theta / sin_theta)
    return scale[..., None] * skew_part_axial(R)


def _adjugate_transpose(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(adj(M)^T, det M) from column cross products; inv(M)^T = adj^T / det."""
    a = M[..., :, 0]
    b = M[..., :, 1]
    c = M[..., :, 2]
    bxc = np.cross(b, c)
    cxa = np.cross(c, a)
    axb = np.cross(a, b)
    det = np.einsum("...i,...i->...", a, bxc)
    return np.stack([bxc, cxa, axb], axis=-1), det


def _project_svd(M: np.ndarray) -> np.ndarray:
    U, _, Vt = np.linalg.svd(M)
    R = U @ Vt
    # det(M) > 0 forces det(U Vt) = +1; keep a cheap guard for roundoff freaks
    flip = np.linalg.det(R) < 0.0
    if np.any(flip):
        sign = np.where(flip, -1.0, 1.0)
        U = U.copy()
        U[..., :, 2] = U[..., :, 2] * sign[..., None]
        R = U @ Vt
    return R


def project_so3(M: np.ndarray) -> np.ndarray:
    """Closest rotation in the Frobenius norm (orthogonal polar factor).

    Requires det M > 0; reflections and rank-deficient inputs are rejected.
    Idempotent on valid rotations and invariant under positive scaling.

    Uses the Newton polar iteration X <- (X + X^-T)/2, which converges
    quadratically for the near-orthogonal matrices the discretization
    produces; stubborn inputs fall back to an SVD.
    """
    M = np.asarray(M, dtype=float)
    adjT, det = _adjugate_transpose(M)
    if np.any(~np.isfinite(det)) or np.any(det <= 0.0):
        raise ValueError(
            f"project_so3: input is degenerate or reflecting (min det {float(np.min(det)):.3e})"
        )
    # scale to unit-ish norm so strongly stretched inputs start close
    scale = np.sqrt(np.einsum("...ij,...ij->...", M, M) / 3.0)
    X = M / scale[..., None, None]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(24):
            adjT, det = _adjugate_transpose(X)
            X_next = 0.5 * (X + adjT / det[..., None, None])
            if not np.all(np.isfinite(X_next)):
                return _project_svd(M)
            step = np.max(np.abs(X_next - X))
            X = X_next
            if step <= 1e-15:
                break
    defect = np.linalg.norm(np.swapaxes(X, -1, -2) @ X - np.eye(3), axis=(-2, -1))
    if np.any(defect > 1e-13):
        return _project_svd(M)
    return X


def rotation_defect(R: np.ndarray) -> np.ndarray:
    """Worst violation of the three rotation invariants, per matrix."""
    R = np.asarray(R, dtype=float)
    eye = np.eye(3)
    ortho = np.linalg.norm(np.swapaxes(R, -1, -2) @ R - eye, axis=(-2, -1))
    det = np.abs(np.linalg.det(R) - 1.0)
    sq = np.abs(np.sum(R * R, axis=(-2, -1)) - 3.0)
    return np.maximum(np.maximum(ortho, det), sq)


def is_rotation(R: np.ndarray, tol: float = ROTATION_TOL) -> bool:
    R = np.asarray(R)
    if R.shape[-2:] != (3, 3) or not np.all(np.isfinite(R)):
        return False
    return bool(np.all(rotation_defect(R) <= tol))


def require_rotation(R: np.ndarray, tol: float = ROTATION_TOL, what: str = "matrix") -> np.ndarray:
    """Validate rotation invariants (Q^T Q = 1, det Q = 1, |Q|^2 = 3) at tol."""
    R = np.asarray(R, dtype=float)
    if R.shape[-2:] != (3, 3):
        raise ValueError(f"{what}: expected trailing shape (3, 3), got {R.shape}")
    if not np.all(np.isfinite(R)):
        raise ValueError(f"{what}: non-finite entries")
    defect = rotation_defect(R)
    if np.any(defect > tol):
        raise ValueError(
            f"{what}: not a rotation within {tol:.1e} (max defect {float(np.max(defect)):.3e})"
        )
    return R


def random_rotation(rng: np.random.Generator, size: tuple[int, ...] | int | None = None) -> np.ndarray:
    """Haar-uniform random rotations via sign-fixed QR of Gaussian matrices."""
    shape = () if size is None else (size,) if isinstance(size, int) else tuple(size)
    G = rng.standard_normal(shape + (3, 3))
    Q, R = np.linalg.qr(G)
    # make the factorization unique (positive diagonal), then enforce det +1
    d = np.sign(np.diagonal(R, axis1=-2, axis2=-1))
    d = np.where(d == 0.0, 1.0, d)
    Q = Q * d[..., None, :]
    sign = np.where(np.linalg.det(Q) < 0.0, -1.0, 1.0)
    Q[..., :, 0] = Q[..., :, 0] * sign[..., None]
    return Q
