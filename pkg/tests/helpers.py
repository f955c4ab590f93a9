"""Shared fixtures: worked examples and random matrix sets."""

import numpy as np

from hogsvd.gsvd import MatrixSet

# three 1x2 blocks, shared kernel structure
SPLIT_ROWS = [np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]), np.array([[1.0, 0.0]])]
MIXED_ROWS = [np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]), np.array([[1.0, 1.0]])]
SKEW_ROWS = [np.array([[2.0, 1.0]]), np.array([[1.0, 0.1]]), np.array([[0.1, 2.0]])]

# rounded reference values for the skewed stack
SKEW_Q_REF = np.array([[-0.9, 0.04], [-0.4, -0.2], [-0.04, 0.98]])
SKEW_T0_VECTORS_REF = np.array([[-0.95, -0.3], [-0.3, 0.95]])
SKEW_T0_VALUES_REF = np.array([0.3, 0.6])
SKEW_TINF_VECTORS_REF = np.array([[-0.98, -0.2], [-0.2, 0.98]])
SKEW_TINF_VALUES_REF = np.array([0.2, 0.3])


def split_rows():
    return MatrixSet(SPLIT_ROWS)


def mixed_rows():
    return MatrixSet(MIXED_ROWS)


def skew_rows():
    return MatrixSet(SKEW_ROWS)


def low_rank(rng, m, n, r):
    """m x n matrix of rank exactly r (with probability one)."""
    if r == 0:
        return np.zeros((m, n))
    return rng.uniform(-1, 1, (m, r)) @ rng.uniform(-1, 1, (r, n))


def random_matrix_set(rng, n_blocks=None, n=None, max_rows=30):
    """Random set with N in 2..5, n in 2..20, m_i in 1..30 and planted block ranks.

    Block ranks are drawn from 0..min(m_i, n); draws are repeated until the
    ranks add up to at least n so the stack has full column rank.
    """
    nb = int(rng.integers(2, 6)) if n_blocks is None else n_blocks
    n = int(rng.integers(2, 21)) if n is None else n
    while True:
        rows = rng.integers(1, max_rows + 1, nb)
        ranks = [int(rng.integers(0, min(m, n) + 1)) for m in rows]
        if sum(ranks) >= n:
            break
    return MatrixSet([low_rank(rng, int(m), n, r) for m, r in zip(rows, ranks)]), ranks


def full_rank_blocks(rng, n_blocks, n, extra_rows=3):
    return MatrixSet([rng.standard_normal((n + int(rng.integers(0, extra_rows + 1)), n))
                      for _ in range(n_blocks)])


def sign_align(x, ref):
    """Flip columns of x to have positive inner product with ref."""
    s = np.sign(np.sum(x * ref, axis=0))
    s[s == 0] = 1.0
    return x * s


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)
