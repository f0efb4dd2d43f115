"""
Patterned matrices with correlated diagonals
============================================

Every entry of a patterned matrix is addressed by a diagonal vector ``k`` and
a position ``m`` inside it.  Correlation lives inside each vector.
"""

# %%
import numpy as np

from rmt_lab import CovarianceFamily, SampleSpec
from rmt_lab.patterns import cell_map
from rmt_lab.sampler import NoiseStream, sample_matrix, sample_matrices, entry_covariance_exact

# %% index maps: symmetric circulant n = 5, printed as k_m
k, m = cell_map("symmetric_circulant", 5)
for row_k, row_m in zip(k, m):
    print(" ".join(f"{a}_{b}" for a, b in zip(row_k, row_m)))

# %% a fully correlated circulant reduces to the classical one:
# every row is the previous row shifted right
x = sample_matrix(SampleSpec("circulant", 4, CovarianceFamily.full()), NoiseStream(0, 0))
print(np.round(x.entries * 2, 3))

# %% correlation between two diagonal entries of a Toeplitz matrix
spec = SampleSpec("toeplitz", 6, CovarianceFamily.geometric_decay(0.5))
xs = sample_matrices(spec, 1, np.arange(50_000))
emp = np.mean(xs[:, 0, 0] * xs[:, 2, 2])
print("E X11 X33  exact", entry_covariance_exact(spec, (1, 1), (3, 3)), " sampled", round(emp, 4))
