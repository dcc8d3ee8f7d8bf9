"""Optimal OAMP state evolution: fixed point and its R-transform identity."""

import numpy as np

from oamp import EnsembleSpec, Prior, sample_matrix
from oamp.sevo import SpectralModel, fixed_point, r_transform_residual

rng = np.random.default_rng(0)
specs = {
    "IID Gaussian (N/M=2)": SpectralModel.iid_gaussian(2.0),
    "partial orthogonal (N/M=2)": SpectralModel.partial_orthogonal(2.0),
    "geometric kappa=10": SpectralModel.from_matrix(
        sample_matrix(EnsembleSpec.geometric(10.0), 500, 1000, rng)),
}
prior, sigma2 = Prior.bernoulli_gaussian(0.2), 1e-3
for name, spec in specs.items():
    st = fixed_point(spec, prior, sigma2)
    v2, tau2 = st.fixed_point
    res = r_transform_residual(spec, st.fixed_point, prior, sigma2)
    print(f"{name:28s} iters {len(st.v2) - 1:4d}  v2 {v2:.4e}  tau2 {tau2:.4e}  "
          f"residual {res:.1e}")
