"""Higher-order GSVD of N matrices with a shared column dimension.

The pipeline stacks the A_i, takes a thin QR A = QR, runs the HO-CSD on the
row blocks Q_i and maps the orthonormal basis Z to V = R^T Z.  Blocks may
have any rank (including m_i < n); only the stacked matrix must have full
column rank.
"""

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from . import csd
from .errors import (
    DimensionError,
    DomainError,
    PreconditionError,
    RankDeficiencyError,
    ShapeMismatchError,
)
from .linalg import EPS, as_matrix, spd_solve, svd, thin_qr


@dataclass(frozen=True)
class MatrixSet:
    blocks: tuple
    labels: tuple = None

    def __post_init__(self):
        blocks = tuple(as_matrix(b, f"A_{i + 1}") for i, b in enumerate(self.blocks))
        object.__setattr__(self, "blocks", blocks)
        if len(blocks) < 2:
            raise DimensionError(f"need at least 2 matrices, got {len(blocks)}")
        n = blocks[0].shape[1]
        if n < 1:
            raise DimensionError("matrices need at least one column")
        bad = [i + 1 for i, b in enumerate(blocks) if b.shape[1] != n]
        if bad:
            raise DimensionError(
                f"column counts differ: A_1 has {n}, mismatched blocks {bad}")
        if sum(b.shape[0] for b in blocks) < n:
            raise DimensionError("total row count is smaller than the column count")
        labels = self.labels
        if labels is None:
            labels = tuple(f"A{i + 1}" for i in range(len(blocks)))
        labels = tuple(str(s) for s in labels)
        if len(labels) != len(blocks):
            raise DimensionError("one label per matrix required")
        object.__setattr__(self, "labels", labels)

    @property
    def n(self):
        return self.blocks[0].shape[1]

    @property
    def n_blocks(self):
        return len(self.blocks)

    def stacked(self):
        return np.vstack(self.blocks)


@dataclass(frozen=True)
class QRStack:
    q_blocks: tuple
    R: np.ndarray
    sigma_min: float
    sigma_max: float
    rank_tol: float

    @property
    def full_rank(self):
        return self.sigma_min > self.rank_tol * self.sigma_max

    @property
    def ratio(self):
        return self.sigma_min / self.sigma_max if self.sigma_max > 0 else 0.0


def default_rank_tol(n):
    return n * EPS


def stack_and_qr(mset, rank_tol=None, check=True):
    """Thin QR of the stacked matrix, split back into row blocks.

    Raises RankDeficiencyError (unless ``check=False``) when
    ``sigma_min(R) <= rank_tol * sigma_max(R)``.
    """
    if rank_tol is None:
        rank_tol = default_rank_tol(mset.n)
    q, r = thin_qr(mset.stacked())
    sv = svd(r).singular_values
    out = QRStack(tuple(np.split(q, np.cumsum([b.shape[0] for b in mset.blocks])[:-1])),
                  r, float(sv[-1]), float(sv[0]), float(rank_tol))
    if check and not out.full_rank:
        raise RankDeficiencyError(out.sigma_min, out.sigma_max, rank_tol)
    return out


def default_pi(n_blocks):
    return 1.0 / n_blocks


def _check_pi(pi):
    if not pi > 0:
        raise DomainError(f"pi must be positive, got {pi}")


def build_s_pi_direct(mset, pi, rank_tol=None):
    """Mean of pairwise quotients D_i D_j^{-1} + D_j D_i^{-1} over i < j.

    ``D_i = A_i^T A_i + pi A^T A``.  Generally non-symmetric.
    """
    _check_pi(pi)
    stack_and_qr(mset, rank_tol)
    a = mset.stacked()
    g = a.T @ a
    d = [b.T @ b + pi * g for b in mset.blocks]
    n, nb = mset.n, mset.n_blocks
    s = np.zeros((n, n))
    for i in range(nb):
        for j in range(i + 1, nb):
            # D_i D_j^{-1} = (D_j^{-1} D_i)^T for symmetric D
            s += spd_solve(d[j], d[i]).T + spd_solve(d[i], d[j]).T
    return csd.MeanOperator(s / (nb * (nb - 1)), pi, nb, "S_pi")


def s_from_t(t, r, pi, n_blocks):
    """R^T [((1 + pi N) T - I) / (N - 1)] R^{-T}."""
    n = r.shape[0]
    mid = ((1.0 + pi * n_blocks) * t - np.eye(n)) / (n_blocks - 1)
    # mid R^{-T} = (R^{-1} mid^T)^T
    right = scipy.linalg.solve_triangular(r, mid.T, lower=False).T
    return r.T @ right


def build_s_pi_via_t(qr, pi):
    _check_pi(pi)
    if not qr.full_rank:
        raise RankDeficiencyError(qr.sigma_min, qr.sigma_max, qr.rank_tol)
    oset = csd.OrthoSet(qr.q_blocks, pi)
    t = csd.build_t_pi(oset).matrix
    return csd.MeanOperator(s_from_t(t, qr.R, pi, oset.n_blocks), pi, oset.n_blocks, "S_pi")


def varsigma_from_tau(taus, pi, n_blocks):
    return ((1.0 + pi * n_blocks) * np.asarray(taus) - 1.0) / (n_blocks - 1)


def varsigma_bounds(pi, n_blocks):
    return 1.0, 1.0 + 1.0 / (pi * n_blocks * (1.0 + pi))


@dataclass(frozen=True)
class HogsvdResult:
    V: np.ndarray
    sigmas: np.ndarray  # (N, n)
    U: tuple
    varsigmas: np.ndarray
    taus: np.ndarray
    labels: csd.SubspaceReport
    normalize_v: bool
    pi: float
    qr: QRStack
    csd: csd.HocsdResult
    free: np.ndarray
    redundant: np.ndarray
    canonical: bool = field(default=False)

    @property
    def n_blocks(self):
        return self.sigmas.shape[0]

    @property
    def Z(self):
        return self.csd.Z

    def reconstruct(self, i):
        return (self.U[i] * self.sigmas[i]) @ self.V.T


def hogsvd_factor(mset, pi=None, normalize_v=False, class_tol=csd.DEFAULT_CLASS_TOL,
                  rank_tol=None):
    """HO-GSVD ``A_i = U_i diag(sigma_i) V^T`` with a shared invertible V.

    ``V = R^T Z`` where Z diagonalizes T; the eigenvalues of S are
    ``varsigma = ((1 + pi N) tau - 1) / (N - 1)``.  With ``normalize_v`` the
    columns of V are scaled to unit norm and sigma absorbs the scale.
    """
    if pi is None:
        pi = default_pi(mset.n_blocks)
    _check_pi(pi)
    qr = stack_and_qr(mset, rank_tol)
    hc = csd.hocsd_factor(csd.OrthoSet(qr.q_blocks, pi), class_tol)
    z, r = hc.Z, qr.R
    v = r.T @ z
    scale = np.linalg.norm(v, axis=0) if normalize_v else np.ones(mset.n)
    v = v / scale
    sigmas, us, redundant = [], [], []
    for i, a in enumerate(mset.blocks):
        # B_i = A_i V^{-T} = A_i R^{-1} Z, via a triangular solve with R^T
        b = scipy.linalg.solve_triangular(r, a.T, trans="T", lower=False).T @ z
        b = b * scale
        sig = np.linalg.norm(b, axis=0)
        u, red = csd.left_vectors(b, sig, hc.free[i])
        sigmas.append(sig)
        us.append(u)
        redundant.append(red)
    return HogsvdResult(v, np.array(sigmas), tuple(us),
                        varsigma_from_tau(hc.taus, pi, mset.n_blocks), hc.taus,
                        hc.labels, bool(normalize_v), float(pi), qr, hc,
                        hc.free, np.array(redundant))


def canonicalize_hogsvd(result):
    """Canonical block form ``[common | other | isolated]``; needs normalize_v=False."""
    if result.normalize_v:
        raise PreconditionError("canonical HO-GSVD form requires normalize_v=False")
    order = csd.canonical_order(result.labels)
    u, sigmas, free, red, labels = csd.canonicalize_columns(
        result.U, result.sigmas, result.free, result.labels, order)
    return replace(result, V=result.V[:, order], sigmas=sigmas, U=u,
                   varsigmas=result.varsigmas[order], taus=result.taus[order],
                   labels=labels, free=free, redundant=red,
                   csd=csd.canonicalize_hocsd(result.csd), canonical=True)


def dual_vectors(result):
    """Columns of V^{-T} = R^{-1} Z (scaled to match a normalized V).

    Column k maps to b_{i,k} under every A_i, so these are the A-domain
    vectors that carry the sigma pattern: A_i x_k = sigma_{i,k} u_{i,k}.
    """
    x = scipy.linalg.solve_triangular(result.qr.R, result.Z, lower=False)
    if result.normalize_v:
        x = x * np.linalg.norm(result.qr.R.T @ result.Z, axis=0)
    return x


def subspace_certificates(mset, result):
    """Residuals of the common and isolated certificates on the A side.

    Common: ``A_i^T A_i x = (1/N) A^T A x`` for every block.  Isolated:
    ``||A_i x|| <= 1e-7 ||A_i||_F ||x||`` on exactly N - 1 blocks.  Returns
    ``(common_residual, isolated_failures)``.
    """
    x = dual_vectors(result)
    a = mset.stacked()
    nb = mset.n_blocks
    common = 0.0
    for k in result.labels.common:
        rhs = a.T @ (a @ x[:, k]) / nb
        for b in mset.blocks:
            lhs = b.T @ (b @ x[:, k])
            common = max(common, float(np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs)))
    failures = 0
    for k in result.labels.isolated:
        xk = x[:, k]
        small = sum(np.linalg.norm(b @ xk) <= 1e-7 * np.linalg.norm(b) * np.linalg.norm(xk)
                    for b in mset.blocks)
        failures += small != nb - 1
    return common, failures


def orthonormality_residual(u, redundant):
    """||U_e^T U_e - I||_F over the essential (non-redundant) columns."""
    ue = u[:, ~redundant]
    return float(np.linalg.norm(ue.T @ ue - np.eye(ue.shape[1])))


def _identity_blocks(mset):
    eye = np.eye(mset.n)
    return [i for i, b in enumerate(mset.blocks) if b.shape == eye.shape and np.array_equal(b, eye)]


def _subspace_gap(x, y):
    # sine of the largest principal angle between two orthonormal bases
    if x.shape[1] != y.shape[1]:
        return 1.0
    if x.shape[1] == 0:
        return 0.0
    return float(svd(y - x @ (x.T @ y)).singular_values[0])


def svd_reduction_residuals(mset, j, pi):
    """Compare the normalized-V HO-GSVD with the standard SVD of block j."""
    res = hogsvd_factor(mset, pi, normalize_v=True)
    a = mset.blocks[j]
    n = mset.n
    padded = np.vstack([a, np.zeros((max(n - a.shape[0], 0), n))])
    ref = svd(padded)
    ref_sv = ref.singular_values
    got = np.sort(res.sigmas[j])[::-1]
    sv_resid = float(np.max(np.abs(got - ref_sv)))
    # right vectors per cluster of equal singular values (sign/permutation free)
    scale = max(ref_sv[0], 1.0)
    tol = 1e-6 * scale
    used = np.zeros(n, dtype=bool)
    vec_resid = 0.0
    k = 0
    while k < n:
        grp = [k]
        while grp[-1] + 1 < n and ref_sv[grp[-1]] - ref_sv[grp[-1] + 1] <= tol:
            grp.append(grp[-1] + 1)
        target = ref_sv[grp[0]]
        cand = np.flatnonzero(~used & (np.abs(res.sigmas[j] - target) <= tol))
        cand = cand[np.argsort(np.abs(res.sigmas[j][cand] - target), kind="stable")][:len(grp)]
        used[cand] = True
        vec_resid = max(vec_resid, _subspace_gap(ref.right[:, grp], res.V[:, cand]))
        k = grp[-1] + 1
    return sv_resid, vec_resid


def csd_reduction_residuals(mset, pi):
    """Q-side CSD identity and orthonormality of U_1, U_2 (N = 2)."""
    qr = stack_and_qr(mset)
    hc = csd.hocsd_factor(csd.OrthoSet(qr.q_blocks, pi))
    s1, s2 = hc.sigmas
    ident = float(np.linalg.norm(np.diag(s1 ** 2 + s2 ** 2) - np.eye(mset.n)))
    ortho = [orthonormality_residual(hc.U[i], hc.redundant[i]) for i in range(2)]
    return ident, ortho


def verify_reductions(mset, pi=None):
    """Residuals of the SVD / CSD reductions for the special shapes that apply.

    SVD reduction: N - 1 blocks equal the identity.  CSD reduction: N = 2 and
    A_1 has full column rank.  Raises ShapeMismatchError when neither fits.
    """
    if pi is None:
        pi = default_pi(mset.n_blocks)
    out = {"pi": float(pi), "checks": []}
    ident = _identity_blocks(mset)
    if len(ident) >= mset.n_blocks - 1:
        others = [i for i in range(mset.n_blocks) if i not in ident]
        j = others[0] if others else 0
        sv_resid, vec_resid = svd_reduction_residuals(mset, j, pi)
        out["checks"].append("svd")
        out["svd_block"] = j
        out["svd_singular_value_residual"] = sv_resid
        out["svd_right_vector_residual"] = vec_resid
    a1 = mset.blocks[0]
    if mset.n_blocks == 2 and a1.shape[0] >= mset.n:
        sv = svd(a1).singular_values
        if sv[-1] > default_rank_tol(mset.n) * sv[0]:
            ident_resid, ortho = csd_reduction_residuals(mset, pi)
            out["checks"].append("csd")
            out["csd_identity_residual"] = ident_resid
            out["u_orthonormality_residual"] = ortho
    if not out["checks"]:
        raise ShapeMismatchError(
            "matrix set fits no reduction shape (N-1 identity blocks, or N=2 with full-rank A_1)")
    return out
