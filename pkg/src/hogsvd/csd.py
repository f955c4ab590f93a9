"""Higher-order cosine-sine decomposition of blocks with sum Q_i^T Q_i = I.

The shared right basis Z is the eigenbasis of the mean of regularized
inverses

    T = (1/N) sum_i (Q_i^T Q_i + pi I)^{-1},

and each block factors as Q_i = U_i diag(sigma_i) Z^T with sigma_{i,k} the
column norms of B_i = Q_i Z.  Eigenvectors are labelled common, isolated or
intermediate by comparing their eigenvalue with the closed-form targets and
corroborating with the zero pattern of sigma.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionError, DomainError, OrthogonalityError
from .linalg import (
    as_matrix,
    orthonormal_basis,
    spd_inverse,
    spd_solve,
    svd,
    sym_eig,
    unit_vector_orthogonal_to,
)

COMMON = "common"
ISOLATED = "isolated"
INTERMEDIATE = "intermediate"
UNCLASSIFIED = "unclassified"

DEFAULT_CLASS_TOL = 1e-6
ORTHO_TOL = 1e-8


def free_col_tol(n):
    """Threshold below which a generalized singular value counts as zero."""
    return 1e-8 * np.sqrt(n)


def tau_min(n_blocks, pi):
    return n_blocks / (1.0 + pi * n_blocks)


def tau_max(n_blocks, pi):
    return (pi * n_blocks + n_blocks - 1.0) / (pi * n_blocks * (1.0 + pi))


def tau_of_p(n_blocks, pi, p):
    """Eigenvalue of T carried by a direction in the kernel of exactly `p` blocks.

    Assumes equal Rayleigh quotients on the remaining ``N - p`` blocks.
    ``p = 0`` gives the lower spectral bound and ``p = N - 1`` the upper one.
    """
    if pi <= 0:
        raise DomainError(f"pi must be positive, got {pi}")
    if not 0 <= p <= n_blocks - 1:
        raise DomainError(f"P must lie in [0, {n_blocks - 1}], got {p}")
    n = n_blocks
    return (p * (1.0 - pi * n) + pi * n * n) / (pi * n * (1.0 + pi * (n - p)))


@dataclass(frozen=True)
class OrthoSet:
    """N blocks Q_i (m_i x n) with sum_i Q_i^T Q_i = I, plus the weight pi."""

    blocks: tuple
    pi: float

    def __post_init__(self):
        blocks = tuple(as_matrix(b, f"Q_{i + 1}") for i, b in enumerate(self.blocks))
        object.__setattr__(self, "blocks", blocks)
        if len(blocks) < 2:
            raise DimensionError(f"need at least 2 blocks, got {len(blocks)}")
        n = blocks[0].shape[1]
        if any(b.shape[1] != n for b in blocks):
            raise DimensionError("all blocks must share the column count")
        if not self.pi > 0:
            raise DomainError(f"pi must be positive, got {self.pi}")
        dev = np.linalg.norm(sum(b.T @ b for b in blocks) - np.eye(n))
        if dev > ORTHO_TOL * n:
            raise OrthogonalityError(
                f"||sum Q_i^T Q_i - I||_F = {dev:.3e} exceeds {ORTHO_TOL * n:.1e}"
            )

    @property
    def n(self):
        return self.blocks[0].shape[1]

    @property
    def n_blocks(self):
        return len(self.blocks)

    def grams(self):
        return [b.T @ b for b in self.blocks]

    def with_pi(self, pi):
        return OrthoSet(self.blocks, pi)


@dataclass(frozen=True)
class MeanOperator:
    matrix: np.ndarray
    pi: float
    n_blocks: int
    kind: str  # "T_pi" or "S_pi"


def build_t_pi(oset):
    """Mean of the regularized inverses (Q_i^T Q_i + pi I)^{-1}, symmetrized."""
    n = oset.n
    acc = np.zeros((n, n))
    for g in oset.grams():
        acc += spd_inverse(g + oset.pi * np.eye(n))
    t = acc / oset.n_blocks
    return MeanOperator(0.5 * (t + t.T), oset.pi, oset.n_blocks, "T_pi")


@dataclass(frozen=True)
class SubspaceReport:
    """Per-eigenvector classification.

    ``null_counts[k]`` is the number of blocks whose sigma_{i,k} is below the
    free-column threshold (the P estimate).  ``target_distance`` is the gap
    to the eigenvalue target of the assigned label (to the nearer spectral
    bound for unclassified vectors).
    """

    labels: tuple
    null_counts: tuple
    dist_min: np.ndarray
    dist_max: np.ndarray
    target_distance: np.ndarray
    class_tol: float

    def __len__(self):
        return len(self.labels)

    def indices(self, label):
        return [k for k, lab in enumerate(self.labels) if lab == label]

    @property
    def common(self):
        return self.indices(COMMON)

    @property
    def isolated(self):
        return self.indices(ISOLATED)

    def take(self, order):
        order = list(order)
        return SubspaceReport(
            tuple(self.labels[k] for k in order),
            tuple(self.null_counts[k] for k in order),
            self.dist_min[order],
            self.dist_max[order],
            self.target_distance[order],
            self.class_tol,
        )


def classify_subspaces(taus, pi, n_blocks, sigmas, class_tol=DEFAULT_CLASS_TOL, zero_tol=None):
    """Label eigenvectors from their eigenvalues and sigma patterns.

    `sigmas` is an (N, n) array of generalized singular values on the
    Q-side.  Eigenvalue proximity alone never decides a label; the sigma
    pattern has to agree (all near 1/sqrt(N) for common, N - 1 zeros for
    isolated, exactly P zeros for intermediate).
    """
    taus = np.asarray(taus, dtype=float)
    sigmas = np.asarray(sigmas, dtype=float)
    n = taus.size
    if zero_tol is None:
        zero_tol = free_col_tol(n)
    pattern_tol = max(np.sqrt(class_tol), 1e-8)
    lo, hi = tau_min(n_blocks, pi), tau_max(n_blocks, pi)
    mid_targets = {p: tau_of_p(n_blocks, pi, p) for p in range(1, n_blocks - 1)}

    labels, nulls = [], []
    dist_min = np.abs(taus - lo)
    dist_max = np.abs(taus - hi)
    target = np.minimum(dist_min, dist_max)
    for k in range(n):
        col = sigmas[:, k]
        n_zero = int(np.sum(col <= zero_tol))
        nulls.append(n_zero)
        label = UNCLASSIFIED
        if dist_min[k] <= class_tol and np.all(np.abs(col - 1.0 / np.sqrt(n_blocks)) <= pattern_tol):
            label = COMMON
        elif dist_max[k] <= class_tol and n_zero == n_blocks - 1:
            label = ISOLATED
        elif n_zero in mid_targets and abs(taus[k] - mid_targets[n_zero]) <= class_tol:
            label = INTERMEDIATE
            target[k] = abs(taus[k] - mid_targets[n_zero])
        labels.append(label)
    return SubspaceReport(tuple(labels), tuple(nulls), dist_min, dist_max, target, class_tol)


def _group_weights(n_blocks):
    # log of distinct primes: subset sums never coincide
    primes, c = [], 2
    while len(primes) < n_blocks:
        if all(c % p for p in primes):
            primes.append(c)
        c += 1
    return np.log(np.array(primes, dtype=float))


def eigen_groups(taus, group_tol):
    """Split ascending eigenvalues into runs whose neighbours differ by <= group_tol."""
    groups, start = [], 0
    for k in range(1, len(taus) + 1):
        if k == len(taus) or taus[k] - taus[k - 1] > group_tol:
            groups.append(list(range(start, k)))
            start = k
    return groups


def _t_eigenpairs(oset):
    """Eigenpairs of T, computed from a better-conditioned matrix for pi > 1.

    With sum_i G_i = I, (G + pi I)^{-1} = I/pi - G/pi^2 + G^2 (G + pi I)^{-1}/pi^2
    gives T = (1/pi - 1/(N pi^2)) I + W/pi^2 with W = mean_i G_i (G_i + pi I)^{-1} G_i.
    For large pi T is a multiple of I up to O(pi^-3), so its eigenvectors are
    only resolved to ~eps pi^2; W carries the same structure at O(1/pi).
    """
    pi, nb = oset.pi, oset.n_blocks
    if pi <= 1.0:
        eig = sym_eig(build_t_pi(oset).matrix)
        return eig.eigenvalues, eig.eigenvectors.copy()
    eye = np.eye(oset.n)
    w = sum(g @ spd_solve(g + pi * eye, g) for g in oset.grams()) / nb
    eig = sym_eig(0.5 * (w + w.T))
    taus = (1.0 / pi - 1.0 / (nb * pi ** 2)) + eig.eigenvalues / pi ** 2
    return taus, eig.eigenvectors.copy()


def eigenbasis(oset, group_tol=None):
    """Eigenvalues (ascending) and orthonormal eigenvectors of T.

    Inside each cluster of repeated eigenvalues the basis is rotated to
    diagonalize a generic weighted sum of the restricted Gramians, so shared
    right singular vectors are recovered regardless of how the eigensolver
    oriented the cluster.
    """
    taus, z = _t_eigenpairs(oset)
    if group_tol is None:
        # relative to the width of the admissible interval, which shrinks like 1/pi^2
        nb, pi = oset.n_blocks, oset.pi
        group_tol = 1e-9 * (tau_max(nb, pi) - tau_min(nb, pi))
    weights = _group_weights(oset.n_blocks)
    grams = oset.grams()
    for grp in eigen_groups(taus, group_tol):
        if len(grp) < 2:
            continue
        zg = z[:, grp]
        mix = sum(w * (zg.T @ g @ zg) for w, g in zip(weights, grams))
        rot = sym_eig(mix).eigenvectors
        z[:, grp] = zg @ rot
    return taus, z


def left_vectors(b, sigma, free, priority=None):
    """Left generalized singular vectors from B = U diag(sigma).

    Columns flagged in `free` get deterministic unit vectors: the first
    standard basis vector surviving Gram-Schmidt against the span of the
    non-free columns and of previously filled free columns.  Free columns
    are filled in `priority` order (default: index order).  Returns
    ``(U, redundant)`` where `redundant` flags free columns filled after the
    columns already spanned R^m.
    """
    m, n = b.shape
    u = np.zeros((m, n))
    keep = ~free
    u[:, keep] = b[:, keep] / sigma[keep]
    basis = orthonormal_basis(u[:, keep], m)
    redundant = np.zeros(n, dtype=bool)
    order = np.flatnonzero(free) if priority is None else [k for k in priority if free[k]]
    for k in order:
        w = unit_vector_orthogonal_to(basis, m)
        if w is None:
            w = np.zeros(m)
            w[0] = 1.0
            redundant[k] = True
        else:
            basis = np.column_stack([basis, w])
        u[:, k] = w
    return u, redundant


@dataclass(frozen=True)
class HocsdResult:
    Z: np.ndarray
    sigmas: np.ndarray  # (N, n)
    U: tuple
    taus: np.ndarray
    labels: SubspaceReport
    pi: float
    free: np.ndarray  # (N, n) bool, sigma below the free-column threshold
    redundant: np.ndarray  # (N, n) bool
    canonical: bool = field(default=False)

    @property
    def n_blocks(self):
        return self.sigmas.shape[0]

    def reconstruct(self, i):
        return (self.U[i] * self.sigmas[i]) @ self.Z.T


def hocsd_factor(oset, class_tol=DEFAULT_CLASS_TOL, group_tol=None):
    """HO-CSD ``Q_i = U_i diag(sigma_i) Z^T`` with eigenvalues ascending."""
    taus, z = eigenbasis(oset, group_tol)
    tol = free_col_tol(oset.n)
    sigmas, us, free, redundant = [], [], [], []
    for q in oset.blocks:
        b = q @ z
        sig = np.linalg.norm(b, axis=0)
        fr = sig <= tol
        u, red = left_vectors(b, sig, fr)
        sigmas.append(sig)
        us.append(u)
        free.append(fr)
        redundant.append(red)
    sigmas = np.array(sigmas)
    labels = classify_subspaces(taus, oset.pi, oset.n_blocks, sigmas, class_tol)
    return HocsdResult(z, sigmas, tuple(us), taus, labels, oset.pi,
                       np.array(free), np.array(redundant))


def canonical_order(labels):
    """Stable permutation putting common columns first and isolated ones last."""
    rank = {COMMON: 0, ISOLATED: 2}
    keys = [rank.get(lab, 1) for lab in labels.labels]
    return np.argsort(keys, kind="stable")


def polar_orthonormalize(u):
    """Nearest matrix with orthonormal columns (polar factor)."""
    res = svd(u)
    return res.left @ res.right.T


def canonicalize_columns(u_blocks, sigmas, free, labels, order):
    """Shared reordering/cleanup for canonical HO-CSD and HO-GSVD forms.

    Returns permuted ``(U, sigmas, free, redundant, labels)`` where the common
    block of each U_i is polar-orthonormalized and free columns are refilled,
    isolated ones first, orthogonal to every other column where the row
    dimension allows.
    """
    labels = labels.take(order)
    sigmas = sigmas[:, order]
    free = free[:, order]
    common = np.array(labels.common, dtype=int)
    isolated = labels.isolated
    new_u, new_red = [], []
    for i, u in enumerate(u_blocks):
        u = u[:, order]
        b = u * sigmas[i]
        if common.size:
            b[:, common] = polar_orthonormalize(u[:, common]) * sigmas[i, common]
        n = u.shape[1]
        priority = list(isolated) + [k for k in range(n) if k not in isolated]
        u_new, red = left_vectors(b, sigmas[i], free[i], priority)
        new_u.append(u_new)
        new_red.append(red)
    return tuple(new_u), sigmas, free, np.array(new_red), labels


def canonicalize_hocsd(result):
    """Canonical block form: ``[common | other | isolated]`` columns."""
    order = canonical_order(result.labels)
    u, sigmas, free, red, labels = canonicalize_columns(
        result.U, result.sigmas, result.free, result.labels, order)
    return replace(result, Z=result.Z[:, order], sigmas=sigmas, U=u,
                   taus=result.taus[order], labels=labels, free=free,
                   redundant=red, canonical=True)
