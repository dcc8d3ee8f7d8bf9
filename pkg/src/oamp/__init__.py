"""AMP and orthogonal AMP (OAMP) for y = A x + n with state-evolution predictors."""

from .model import Prior, LinearSystem, sample_signal, make_observation, noise_variance_from_snr
from .ensembles import EnsembleSpec, MatrixModel, sample_matrix, haar_orthogonal, spectrum
from .denoisers import (MMSE, SoftThreshold, BetaFamily, DFDenoiser, posterior_mean,
                        posterior_var, mmse_b, soft_threshold, beta_family, df_apply,
                        optimal_c)
from .linest import MF, PINV, LMMSE, base_matrix, decorrelate, le_traces
from .solvers import Trajectory, run_amp, run_oamp, estimate_v2, estimate_tau2, error_diagnostics
from .sevo import (SpectralModel, SEState, se_amp, phi_empirical, phi_closed_form, mmse_a,
                   phi_star, psi_star, psi_out_star, run_se_oamp, se_accuracy, fixed_point,
                   r_transform, r_transform_residual)

__version__ = "0.1.0"
