# %% [markdown]
# # Following the eigenvectors of T as pi varies
#
# For small pi the basis approaches the eigenvectors of the mean row-space
# projector; for large pi it approaches those of the mean squared Gramian.

# %%
import numpy as np

from hogsvd import analysis, gsvd

mats = gsvd.MatrixSet([np.array([[2.0, 1.0]]), np.array([[1.0, 0.1]]), np.array([[0.1, 2.0]])])
sweep = analysis.pi_sweep(mats, analysis.parse_grid("log:1e-4:1e4:55"))

# %%
for j in range(0, 55, 9):
    z = sweep.Z[j]
    print(f"pi = {sweep.grid[j]:9.2e}  tau = {np.round(sweep.taus[j], 6)}  "
          f"z1 = {np.round(z[:, 0], 4)}  z2 = {np.round(z[:, 1], 4)}")

# %%
print("limit eigenvalues, small pi:", np.round(sweep.t0_eigenvalues, 4))
print("limit eigenvalues, large pi:", np.round(sweep.tinf_eigenvalues, 4))
angles = analysis.endpoint_angles(sweep)
print("endpoint angles (rad):", {k: np.round(v, 8) for k, v in angles.items()})
print("flagged crossings:", int(sweep.crossings.sum()))
