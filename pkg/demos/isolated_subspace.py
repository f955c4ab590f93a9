# %% [markdown]
# # Spotting a direction owned by one matrix
#
# Three 1x2 matrices: the first and third see only x, the second sees
# only y. The y direction is isolated: only A_2 responds to it.

# %%
import numpy as np

from hogsvd import gsvd

mats = gsvd.MatrixSet([np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]), np.array([[1.0, 0.0]])])
res = gsvd.hogsvd_factor(mats, pi=1.0)

# %%
print("S at pi = 1:")
print(gsvd.build_s_pi_direct(mats, 1.0).matrix)  # diag(19/18, 7/6)
for k in range(mats.n):
    print(f"v{k + 1} = {res.V[:, k]}, varsigma = {res.varsigmas[k]:.4f}, "
          f"sigma = {np.round(res.sigmas[:, k], 6)}, label = {res.labels.labels[k]}")

# %% [markdown]
# Swapping the third row to [1, 1] removes the structure: no direction is
# common or isolated and S becomes a multiple of the identity.

# %%
mixed = gsvd.MatrixSet([np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]), np.array([[1.0, 1.0]])])
print(gsvd.build_s_pi_direct(mixed, 1.0).matrix)
print(gsvd.hogsvd_factor(mixed, pi=1.0).labels.labels)
