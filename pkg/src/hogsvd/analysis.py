"""Limits in pi, pi sweeps, the amplification-quotient function and planted instances."""

from dataclasses import dataclass

import numpy as np

from . import csd, gsvd
from .errors import DomainError, InfeasibleError
from .linalg import row_space_projector, sym_eig

CROSSING_OVERLAP = 0.7


def t_tilde_infinity(oset):
    """(1/N) sum_i (Q_i^T Q_i)^2: the large-pi eigenvector limit of T."""
    grams = oset.grams()
    t = sum(g @ g for g in grams) / oset.n_blocks
    return 0.5 * (t + t.T)


def t_tilde_infinity_jordan(oset):
    """Same matrix written with symmetrized (Jordan) products of the Gramians."""
    grams = oset.grams()
    nb, n = oset.n_blocks, oset.n
    acc = np.zeros((n, n))
    for i in range(nb):
        for j in range(i + 1, nb):
            acc += grams[i] @ grams[j] + grams[j] @ grams[i]
    return (np.eye(n) - acc) / nb


def t_tilde_zero(oset, rank_tol=None):
    """Mean of the row-space projectors Q_i^+ Q_i: the small-pi limit of T.

    Singular values of Q_i at or below the free-column threshold count as
    zero, as they do for sigma_{i,k}; `rank_tol` adds a relative cut.
    """
    cut = csd.free_col_tol(oset.n)
    t = sum(row_space_projector(q, rank_tol, abs_tol=cut) for q in oset.blocks) / oset.n_blocks
    return 0.5 * (t + t.T)


def parse_grid(spec):
    """Parse ``"log:LO:HI:K"`` into K log-spaced values."""
    parts = str(spec).split(":")
    if len(parts) != 4 or parts[0] != "log":
        raise DomainError(f"grid spec must look like log:LO:HI:K, got {spec!r}")
    try:
        lo, hi, count = float(parts[1]), float(parts[2]), int(parts[3])
    except ValueError:
        raise DomainError(f"grid spec has non-numeric fields: {spec!r}") from None
    if not (lo > 0 and hi > 0 and np.isfinite(lo) and np.isfinite(hi)):
        raise DomainError("grid bounds must be positive and finite")
    if hi < lo:
        raise DomainError("grid upper bound is below the lower bound")
    if count < 1:
        raise DomainError("grid needs at least one point")
    return np.logspace(np.log10(lo), np.log10(hi), count)


def match_columns(prev, cur):
    """Greedy max-|overlap| assignment of the columns of `cur` to those of `prev`.

    Returns ``(perm, signs, overlaps)`` with ``cur[:, perm] * signs`` aligned
    to `prev` column by column.  Ties go to the lowest flat index.
    """
    c = np.abs(prev.T @ cur)
    n = c.shape[0]
    perm = np.full(n, -1)
    work = c.copy()
    for _ in range(n):
        i, j = np.unravel_index(np.argmax(work), work.shape)
        perm[i] = j
        work[i, :] = -1.0
        work[:, j] = -1.0
    dots = np.einsum("ij,ij->j", prev, cur[:, perm])
    signs = np.where(dots < 0, -1.0, 1.0)
    return perm, signs, np.abs(dots)


@dataclass(frozen=True)
class SweepResult:
    grid: np.ndarray
    taus: np.ndarray  # (K, n), tracked order
    varsigmas: np.ndarray  # (K, n)
    Z: np.ndarray  # (K, n, n), tracked columns
    V: np.ndarray  # (K, n, n), unit columns, signs follow Z
    overlaps: np.ndarray  # (K, n), overlap with the previous grid point
    perms: np.ndarray  # (K, n), eigen-index (ascending tau) of each tracked curve
    t0: np.ndarray
    t0_eigenvalues: np.ndarray
    t0_vectors: np.ndarray
    tinf: np.ndarray
    tinf_eigenvalues: np.ndarray
    tinf_vectors: np.ndarray
    R: np.ndarray

    @property
    def crossings(self):
        return self.overlaps < CROSSING_OVERLAP


def pi_sweep(mset, grid, rank_tol=None):
    """Eigen-systems of T and S over a grid of pi with continuity tracking.

    Grid values are sorted ascending.  Columns are matched between
    neighbouring points by maximal |inner product| and signed for positive
    overlap; overlaps below 0.7 are reported as crossings, not resolved.
    """
    grid = np.sort(np.asarray(grid, dtype=float).ravel())
    if grid.size == 0:
        raise DomainError("empty pi grid")
    if np.any(grid <= 0):
        raise DomainError("pi values must be positive")
    qr = gsvd.stack_and_qr(mset, rank_tol)
    base = csd.OrthoSet(qr.q_blocks, float(grid[0]))
    nb, n = base.n_blocks, base.n
    taus, vs, zs, overlaps, perms = [], [], [], [], []
    prev = None
    for pi in grid:
        t, z = csd.eigenbasis(base.with_pi(float(pi)))
        if prev is None:
            perm, signs, ov = np.arange(n), np.ones(n), np.ones(n)
        else:
            perm, signs, ov = match_columns(prev, z)
        z = z[:, perm] * signs
        v = qr.R.T @ z
        v = v / np.linalg.norm(v, axis=0)
        taus.append(t[perm])
        zs.append(z)
        vs.append(v)
        overlaps.append(ov)
        perms.append(perm)
        prev = z
    taus = np.array(taus)
    t0 = t_tilde_zero(base, rank_tol)
    tinf = t_tilde_infinity(base)
    e0, einf = sym_eig(t0), sym_eig(tinf)
    return SweepResult(grid, taus, gsvd.varsigma_from_tau(taus, grid[:, None], nb),
                       np.array(zs), np.array(vs), np.array(overlaps), np.array(perms),
                       t0, e0.eigenvalues, e0.eigenvectors,
                       tinf, einf.eigenvalues, einf.eigenvectors, qr.R)


def simple_eigen_indices(eigenvalues, rel_gap=1e-8):
    """Indices of eigenvalues separated from their neighbours."""
    w = np.asarray(eigenvalues)
    gap = rel_gap * max(np.abs(w).max(), 1.0)
    idx = []
    for k in range(w.size):
        left = k == 0 or w[k] - w[k - 1] > gap
        right = k == w.size - 1 or w[k + 1] - w[k] > gap
        if left and right:
            idx.append(k)
    return idx


def _angle(x, y):
    x = x / np.linalg.norm(x)
    y = y / np.linalg.norm(y)
    c = abs(x @ y)
    s = np.linalg.norm(y - (x @ y) * x)
    return float(np.arctan2(s, c))


def endpoint_angles(sweep):
    """Angles between tracked endpoint eigenvectors and the limit eigenvectors.

    Only simple eigenvalues of each limit matrix are compared.  Returns a
    dict with arrays ``zero`` (first grid point vs T~0) and ``infinity``
    (last grid point vs T~inf), each paired by maximal overlap.
    """
    out = {}
    for key, z_end, vecs, vals in (
        ("zero", sweep.Z[0], sweep.t0_vectors, sweep.t0_eigenvalues),
        ("infinity", sweep.Z[-1], sweep.tinf_vectors, sweep.tinf_eigenvalues),
    ):
        angles = []
        for k in simple_eigen_indices(vals):
            w = vecs[:, k]
            j = int(np.argmax(np.abs(z_end.T @ w)))
            angles.append(_angle(w, z_end[:, j]))
        out[key] = np.array(angles)
    return out


def _quotient_sum(a):
    nb = a.size
    total = 0.0
    for i in range(nb):
        for j in range(i + 1, nb):
            total += a[i] / a[j] + a[j] / a[i]
    return total / (nb * (nb - 1))


def _check_direction(z, n):
    z = np.asarray(z, dtype=float).ravel()
    if z.size != n:
        raise DomainError(f"direction must have length {n}, got {z.size}")
    if not np.any(z):
        raise DomainError("direction must be nonzero")
    return z


def g_pi_value(oset, z):
    """Mean pairwise amplification quotient of z over Q_i^T Q_i + pi I (>= 1)."""
    z = _check_direction(z, oset.n)
    zz = z @ z
    a = np.array([np.sum((q @ z) ** 2) + oset.pi * zz for q in oset.blocks])
    return float(_quotient_sum(a))


def g_pi_gradient(oset, z):
    """Euclidean gradient of g_pi at z.

    g_pi is homogeneous of degree zero, so the gradient is tangent to the
    sphere through z and vanishes on common and isolated directions.
    """
    z = _check_direction(z, oset.n)
    kz = [q.T @ (q @ z) + oset.pi * z for q in oset.blocks]
    a = np.array([z @ k for k in kz])
    nb = oset.n_blocks
    grad = np.zeros_like(z)
    for i in range(nb):
        for j in range(i + 1, nb):
            grad += (2.0 / a[j]) * (kz[i] - (a[i] / a[j]) * kz[j])
            grad += (2.0 / a[i]) * (kz[j] - (a[j] / a[i]) * kz[i])
    return grad / (nb * (nb - 1))


def f_pi_value(mset, v, pi):
    """A-side counterpart of g_pi using D_i = A_i^T A_i + pi A^T A.

    Equals ``g_pi(R v)`` for the stacked QR factor R.
    """
    v = _check_direction(v, mset.n)
    av2 = np.sum((mset.stacked() @ v) ** 2)
    a = np.array([np.sum((b @ v) ** 2) + pi * av2 for b in mset.blocks])
    return float(_quotient_sum(a))


def sphere_fd_gradient(fun, z, step=1e-6):
    """Central differences of `fun` at z, projected onto the tangent space at z."""
    z = np.asarray(z, dtype=float)
    grad = np.empty_like(z)
    for k in range(z.size):
        e = np.zeros_like(z)
        e[k] = step
        grad[k] = (fun(z + e) - fun(z - e)) / (2.0 * step)
    u = z / np.linalg.norm(z)
    return grad - (u @ grad) * u


@dataclass(frozen=True)
class PlantedInstance:
    matrices: gsvd.MatrixSet
    q_blocks: tuple
    R: np.ndarray
    Z: np.ndarray
    sigmas: np.ndarray  # (N, n)
    labels: tuple
    p_common: int
    owners: dict  # column -> owning block of an isolated direction
    null_sets: dict  # column -> null blocks of an intermediate direction

    def columns(self, label):
        return [k for k, lab in enumerate(self.labels) if lab == label]


def _random_orthonormal(rng, m, k):
    if k == 0:
        return np.zeros((m, 0))
    q, r = np.linalg.qr(rng.standard_normal((m, k)))
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)


def _random_pattern(rng, support, n_blocks, min_gap=None, tries=1000):
    # positive squares summing to one, pairwise separated by min_gap
    if min_gap is None:
        min_gap = 0.05 / len(support)
    for _ in range(tries):
        w = rng.uniform(0.2, 1.0, len(support))
        sq = w / w.sum()
        s = np.sort(sq)
        if len(s) < 2 or np.min(np.diff(s)) >= min_gap:
            col = np.zeros(n_blocks)
            col[list(support)] = np.sqrt(sq)
            return col
    raise InfeasibleError("could not draw a separated sigma pattern")


def synthesize_instance(n, n_blocks, p_common=0, isolated=(), intermediate=(), rows=None,
                        seed=None, cond=10.0):
    """Matrix set with planted common, isolated and intermediate directions.

    Columns of the planted basis are ordered ``[common | intermediate |
    random | isolated]``.  `isolated` lists the owning block of each
    isolated direction; `intermediate` lists, per direction, the blocks
    that annihilate it (the rest share equal sigma).  Random columns get
    positive, mutually separated sigma on at least two blocks.  `rows`
    gives m_i (default n); a block with m_i below its planted support
    raises InfeasibleError.  A_i = Q_i R with R upper triangular and
    cond(R) <= `cond`.
    """
    rng = np.random.default_rng(seed)
    nb = n_blocks
    isolated = list(isolated)
    intermediate = [tuple(sorted(set(s))) for s in intermediate]
    n_fixed = p_common + len(isolated) + len(intermediate)
    if n_fixed > n:
        raise InfeasibleError(f"{n_fixed} planted directions exceed n = {n}")
    if any(not 0 <= o < nb for o in isolated):
        raise InfeasibleError("isolated owner out of range")
    for s in intermediate:
        if not 1 <= len(s) <= nb - 2 or any(not 0 <= b < nb for b in s):
            raise InfeasibleError(f"intermediate null set {s} must have 1..N-2 valid blocks")
    rows = [n] * nb if rows is None else list(rows)
    if len(rows) != nb:
        raise InfeasibleError("one row count per block required")

    sig = np.zeros((nb, n))
    labels = []
    owners, null_sets = {}, {}
    k = 0
    for _ in range(p_common):
        sig[:, k] = 1.0 / np.sqrt(nb)
        labels.append(csd.COMMON)
        k += 1
    for s in intermediate:
        live = [b for b in range(nb) if b not in s]
        sig[live, k] = 1.0 / np.sqrt(len(live))
        labels.append(csd.INTERMEDIATE)
        null_sets[k] = s
        k += 1
    n_random = n - n_fixed
    iso_start = k + n_random
    for idx, owner in enumerate(isolated):
        sig[owner, iso_start + idx] = 1.0
        owners[iso_start + idx] = owner
    load = np.count_nonzero(sig, axis=1)
    if np.any(load > np.array(rows)):
        raise InfeasibleError(f"planted support {load.tolist()} exceeds rows {rows}")
    for idx in range(n_random):
        spare = np.array(rows) - load
        if np.all(spare >= n_random - idx):
            support = list(range(nb))
        else:
            # short blocks: spend rows on the two roomiest blocks only
            support = sorted(np.argsort(-spare, kind="stable")[:2].tolist())
            if np.any(spare[support] <= 0):
                raise InfeasibleError("not enough spare rows for a random direction")
        sig[:, k] = _random_pattern(rng, support, nb)
        load[support] += 1
        labels.append(csd.UNCLASSIFIED)
        k += 1
    labels.extend([csd.ISOLATED] * len(isolated))

    z = _random_orthonormal(rng, n, n)
    q_blocks = []
    for i in range(nb):
        support = np.flatnonzero(sig[i] > 0)
        ubar = np.zeros((rows[i], n))
        ubar[:, support] = _random_orthonormal(rng, rows[i], support.size)
        q_blocks.append((ubar * sig[i]) @ z.T)

    w = _random_orthonormal(rng, n, n)
    s = rng.uniform(1.0, cond, n)
    s[0], s[-1] = 1.0, cond
    r = np.linalg.cholesky((w * s ** 2) @ w.T).T
    mats = gsvd.MatrixSet([q @ r for q in q_blocks])
    return PlantedInstance(mats, tuple(q_blocks), r, z, sig, tuple(labels), p_common,
                           owners, null_sets)
