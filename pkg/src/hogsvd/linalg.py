"""Dense linear-algebra kernel.

Householder thin QR, cyclic Jacobi for symmetric eigenproblems, one-sided
Jacobi SVD, SPD inversion and row-space projectors.  Everything above this
module goes through these functions, so each one has a fixed numerical
contract and is deterministic for identical input bits.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, DimensionError, NonFiniteError, NotSPDError

EPS = np.finfo(float).eps

MAX_SWEEPS = 30
OFF_TOL = 1e-14


def as_matrix(a, name="matrix"):
    """Return `a` as a finite 2-D float64 array (copy-free when possible)."""
    m = np.asarray(a, dtype=float)
    if m.ndim == 1:
        m = m[np.newaxis, :]
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteError(f"{name} contains non-finite entries")
    return m


@dataclass(frozen=True)
class SymEigResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True)
class SvdResult:
    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray

    def reconstruct(self):
        return (self.left * self.singular_values) @ self.right.T


def thin_qr(a):
    """Householder thin QR with a nonnegative diagonal on R.

    Returns ``(Q, R)`` with ``Q`` of shape (m, n) and ``R`` upper triangular
    (n, n).  For full-rank input the factors are unique under this sign
    convention.
    """
    a = as_matrix(a, "A")
    m, n = a.shape
    if m < n:
        raise DimensionError(f"thin_qr needs rows >= cols, got {m}x{n}")
    r = a.copy()
    reflectors = []
    for k in range(n):
        x = r[k:, k]
        norm_x = np.linalg.norm(x)
        if norm_x == 0.0:
            reflectors.append(None)
            continue
        alpha = -norm_x if x[0] >= 0 else norm_x
        v = x.copy()
        v[0] -= alpha
        v /= np.linalg.norm(v)
        r[k:, k:] -= 2.0 * np.outer(v, v @ r[k:, k:])
        r[k + 1:, k] = 0.0
        reflectors.append(v)

    q = np.zeros((m, n))
    q[:n, :n] = np.eye(n)
    for k in range(n - 1, -1, -1):
        v = reflectors[k]
        if v is not None:
            q[k:, :] -= 2.0 * np.outer(v, v @ q[k:, :])

    r = np.triu(r[:n, :])
    signs = np.where(np.diag(r) < 0, -1.0, 1.0)
    return q * signs, r * signs[:, np.newaxis]


def _canonical_signs(vecs):
    # largest-magnitude entry positive; near-ties go to the lowest index
    out = vecs.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        mags = np.abs(col)
        top = mags.max()
        if top == 0.0:
            continue
        idx = int(np.flatnonzero(mags >= top * (1.0 - 1e-12))[0])
        if col[idx] < 0:
            out[:, k] = -col
    return out


def _jacobi_rotation(app, aqq, apq):
    theta = (aqq - app) / (2.0 * apq)
    if abs(theta) > 1e150:
        t = 1.0 / (2.0 * theta)
    else:
        t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
    c = 1.0 / np.sqrt(t * t + 1.0)
    return c, t * c


def sym_eig(m, max_sweeps=MAX_SWEEPS, off_tol=OFF_TOL):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    The input is symmetrized as ``(M + M^T) / 2``.  Eigenvalues come back
    ascending; ties keep the order the rotations left them in.  Each
    eigenvector is signed so its largest-magnitude entry is positive.
    """
    m = as_matrix(m, "M")
    n = m.shape[0]
    if m.shape[1] != n:
        raise DimensionError(f"sym_eig needs a square matrix, got {m.shape}")
    a = 0.5 * (m + m.T)
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return SymEigResult(np.zeros(n), v)

    offdiag = ~np.eye(n, dtype=bool)

    def off(x):
        return np.linalg.norm(x[offdiag])

    for _ in range(max_sweeps):
        if off(a) <= off_tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app, aqq = a[p, p], a[q, q]
                if abs(apq) <= EPS * np.sqrt(abs(app * aqq)) or abs(apq) <= EPS * EPS * scale:
                    a[p, q] = a[q, p] = 0.0
                    continue
                c, s = _jacobi_rotation(app, aqq, apq)
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        if off(a) > off_tol * scale:
            raise ConvergenceError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")

    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return SymEigResult(w[order], _canonical_signs(v[:, order]))


def orthonormal_basis(vectors, m, tol=1e-10):
    """Orthonormal basis (m x r) for the span of the given columns.

    Modified Gram-Schmidt with one reorthogonalization pass; a column is
    dropped when its residual falls below ``tol`` times its norm.
    """
    basis = np.zeros((m, 0))
    for v in np.asarray(vectors, dtype=float).reshape(m, -1).T:
        norm_v = np.linalg.norm(v)
        if norm_v == 0.0:
            continue
        w = v.copy()
        for _ in range(2):
            w -= basis @ (basis.T @ w)
        nw = np.linalg.norm(w)
        if nw > tol * norm_v:
            basis = np.column_stack([basis, w / nw])
    return basis


def unit_vector_orthogonal_to(basis, m):
    """First standard basis vector surviving projection away from `basis`.

    `basis` must have orthonormal columns.  "Surviving" means a residual of
    at least half the best achievable average, sqrt((m - r) / m) / 2, which
    always exists when r < m.  Returns ``None`` when the basis already
    spans R^m.
    """
    r = basis.shape[1]
    if r >= m:
        return None
    floor = 0.5 * np.sqrt((m - r) / m)
    for j in range(m):
        w = np.zeros(m)
        w[j] = 1.0
        for _ in range(2):
            w -= basis @ (basis.T @ w)
        nw = np.linalg.norm(w)
        if nw >= floor:
            return w / nw
    return None  # pragma: no cover - unreachable for orthonormal input


def complete_columns(u, missing):
    """Fill the columns flagged in `missing` so that `u` gains orthonormal columns."""
    u = u.copy()
    m = u.shape[0]
    basis = orthonormal_basis(u[:, ~missing], m)
    for k in np.flatnonzero(missing):
        w = unit_vector_orthogonal_to(basis, m)
        if w is None:
            w = np.zeros(m)
            w[0] = 1.0
        else:
            basis = np.column_stack([basis, w])
        u[:, k] = w
    return u


def svd(a, max_sweeps=MAX_SWEEPS):
    """Thin SVD by one-sided (Hestenes) Jacobi on the taller orientation.

    Returns ``SvdResult`` with ``k = min(m, n)`` singular values sorted
    descending; both factor matrices have orthonormal columns, including
    columns paired with zero singular values.
    """
    a = as_matrix(a, "A")
    transpose = a.shape[0] < a.shape[1]
    x = a.T.copy() if transpose else a.copy()
    rows, cols = x.shape
    v = np.eye(cols)
    tol = np.sqrt(rows) * EPS

    for _ in range(max_sweeps):
        rotated = False
        for p in range(cols - 1):
            for q in range(p + 1, cols):
                xp, xq = x[:, p], x[:, q]
                alpha, beta, gamma = xp @ xp, xq @ xq, xp @ xq
                if gamma == 0.0 or abs(gamma) <= tol * np.sqrt(alpha * beta):
                    continue
                rotated = True
                c, s = _jacobi_rotation(alpha, beta, gamma)
                xp, xq = xp.copy(), xq.copy()
                x[:, p] = c * xp - s * xq
                x[:, q] = s * xp + c * xq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
        if not rotated:
            break
    else:
        raise ConvergenceError(f"one-sided Jacobi SVD did not converge in {max_sweeps} sweeps")

    sig = np.linalg.norm(x, axis=0)
    order = np.argsort(-sig, kind="stable")
    sig, x, v = sig[order], x[:, order], v[:, order]
    negligible = sig <= (sig[0] if sig.size else 0.0) * rows * EPS
    u = np.where(negligible, 0.0, x / np.where(negligible, 1.0, sig))
    u = complete_columns(u, negligible)
    if transpose:
        return SvdResult(v, sig, u)
    return SvdResult(u, sig, v)


def spd_inverse(m):
    """Inverse of a symmetric positive definite matrix via Cholesky."""
    m = as_matrix(m, "M")
    n = m.shape[0]
    return spd_solve(m, np.eye(n), symmetric_result=True)


def spd_solve(m, b, symmetric_result=False):
    """Solve ``M X = B`` for SPD ``M``; raises NotSPDError on a bad pivot."""
    try:
        factor = scipy.linalg.cho_factor(m, lower=False, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotSPDError(f"matrix is not positive definite: {exc}") from None
    x = scipy.linalg.cho_solve(factor, b, check_finite=False)
    if symmetric_result:
        x = 0.5 * (x + x.T)
    return x


def row_space_projector(q, rank_tol=None, abs_tol=0.0):
    """Orthogonal projector ``Q^+ Q`` onto the row space of `q`.

    Right singular vectors with ``sigma > max(rank_tol * sigma_max, abs_tol)``
    span the row space; the default relative tolerance is ``n * eps``.
    """
    q = as_matrix(q, "Q")
    n = q.shape[1]
    if rank_tol is None:
        rank_tol = n * EPS
    res = svd(q)
    smax = res.singular_values[0] if res.singular_values.size else 0.0
    if smax == 0.0:
        return np.zeros((n, n))
    vr = res.right[:, res.singular_values > max(rank_tol * smax, abs_tol)]
    p = vr @ vr.T
    return 0.5 * (p + p.T)


def principal_angles(x, y):
    """Principal angles (radians, ascending) between the column spans of x and y.

    Angles are recovered from both cosines and sines so that small angles
    keep full accuracy.
    """
    x = as_matrix(x, "X")
    y = as_matrix(y, "Y")
    qx = orthonormal_basis(x, x.shape[0])
    qy = orthonormal_basis(y, y.shape[0])
    if qx.shape[1] < qy.shape[1]:
        qx, qy = qy, qx
    k = qy.shape[1]
    if k == 0:
        return np.zeros(0)
    cos = np.clip(svd(qx.T @ qy).singular_values[:k], 0.0, 1.0)
    resid = qy - qx @ (qx.T @ qy)
    sin = np.clip(np.sort(svd(resid).singular_values[:k]), 0.0, 1.0)
    return np.sort(np.arctan2(sin, cos))
