"""
Why the minimal information matrix is safe
==========================================

For any covariance Sigma below the bound, the information matrix of the
mixed model dominates the minimal one. A quick Monte Carlo look.
"""

# %%
import numpy as np

from trendblock import (
    DesignArray,
    full_info_matrix,
    lambdas_from_components,
    minimal_info_matrix,
    sigma_upper_bound,
)
from trendblock.model import sample_admissible_sigma

rng = np.random.default_rng(1)
d = DesignArray(4, rng.integers(1, 5, size=(5, 6)))
bound = sigma_upper_bound(1.0, 0.5, 2.0, 5)
CL = minimal_info_matrix(d, *lambdas_from_components(1.0, 0.5, 2.0, 5))

# %%
gaps = []
for _ in range(200):
    S = sample_admissible_sigma(bound, rng)
    gaps.append(np.linalg.eigvalsh(full_info_matrix(d, S) - CL).min())
print("smallest eigenvalue of C_d - C_d^L over 200 draws: %.2e" % min(gaps))

# %%
# At the bound itself the two coincide.
print("max |C_d - C_d^L| at the bound: %.1e" % np.abs(full_info_matrix(d, bound) - CL).max())
