# %% [markdown]
# # Special cases: the SVD and the CS decomposition
#
# Padding a matrix with identity blocks makes the normalized decomposition
# reproduce its ordinary SVD. With two blocks and a full-rank first block
# the orthonormal-side factorization is a CS decomposition.

# %%
import numpy as np

from hogsvd import csd, gsvd

rng = np.random.default_rng(0)
a = rng.standard_normal((5, 4)) @ np.diag([3.0, 1.0, 0.5, 0.0])
mats = gsvd.MatrixSet([a, np.eye(4), np.eye(4)])
res = gsvd.hogsvd_factor(mats, normalize_v=True)
print("from the decomposition:", np.round(np.sort(res.sigmas[0])[::-1], 10))
print("numpy svd:             ", np.round(np.linalg.svd(a, compute_uv=False), 10))
print(gsvd.verify_reductions(mats))

# %%
pair = gsvd.MatrixSet([rng.standard_normal((6, 4)), rng.standard_normal((5, 4))])
hc = csd.hocsd_factor(csd.OrthoSet(gsvd.stack_and_qr(pair).q_blocks, 0.5))
s1, s2 = hc.sigmas
print("cos^2 + sin^2:", np.round(s1 ** 2 + s2 ** 2, 12))
print("U_1, U_2 orthonormality:", [float(np.linalg.norm(u.T @ u - np.eye(4))) for u in hc.U])
