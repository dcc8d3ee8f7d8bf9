"""Final MSE of AMP and OAMP as the condition number of A grows."""

import numpy as np

from oamp import EnsembleSpec, Prior
from oamp.harness import ExperimentConfig, run_experiment

algs = ("AMP", "OAMP-PINV", "OAMP-LMMSE")
print(f"{'kappa':>8} " + " ".join(f"{a:>12}" for a in algs))
for kappa in (1.0, 10.0, 1e2, 1e3, 1e4):
    cfg = ExperimentConfig(name="kappa", ensemble=EnsembleSpec.geometric(kappa), N=500, M=250,
                           prior=Prior.bernoulli_gaussian(0.2), snr_db=60.0, algorithms=algs,
                           T=50, trials=5, seed=0)
    res = run_experiment(cfg)
    finals = [res.curve(a)[-1] for a in algs]
    print(f"{kappa:8.0e} " + " ".join(f"{10 * np.log10(v):10.1f}dB" for v in finals))
