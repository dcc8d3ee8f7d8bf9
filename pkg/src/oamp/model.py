"""Linear observation model y = A x + n, signal priors and SNR conventions."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "Prior",
    "LinearSystem",
    "sample_signal",
    "make_observation",
    "noise_variance_from_snr",
]

BPSK = "BPSK"
BERNOULLI_GAUSSIAN = "BernoulliGaussian"


@dataclass(frozen=True)
class Prior:
    """IID signal law with zero mean and unit power.

    ``kind`` is ``"BPSK"`` (equiprobable +-1) or ``"BernoulliGaussian"``
    (``rho * N(0, 1/rho) + (1 - rho) * delta_0``).
    """

    kind: str = BPSK
    rho: float = 1.0

    def __post_init__(self):
        if self.kind not in (BPSK, BERNOULLI_GAUSSIAN):
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if not (0.0 < self.rho <= 1.0):
            raise ValueError(f"rho must lie in (0, 1], got {self.rho}")

    @classmethod
    def bpsk(cls):
        return cls(BPSK)

    @classmethod
    def bernoulli_gaussian(cls, rho):
        return cls(BERNOULLI_GAUSSIAN, float(rho))

    @property
    def second_moment(self):
        return 1.0

    def components(self):
        """Gaussian-mixture form ``(weights, means, variances)``.

        Point masses are components with zero variance.
        """
        if self.kind == BPSK:
            return np.array([0.5, 0.5]), np.array([1.0, -1.0]), np.zeros(2)
        if self.rho == 1.0:
            return np.ones(1), np.zeros(1), np.ones(1)
        return (np.array([1.0 - self.rho, self.rho]), np.zeros(2),
                np.array([0.0, 1.0 / self.rho]))

    def __str__(self):
        if self.kind == BPSK:
            return "BPSK"
        return f"BG(rho={self.rho:g})"


@dataclass
class LinearSystem:
    """A realized instance of y = A x + n.

    ``A`` may be a dense array or any object with ``apply``/``apply_transpose``
    (see :class:`oamp.ensembles.MatrixModel`).
    """

    A: object
    y: np.ndarray
    sigma2: float
    x_true: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        M, N = _shape(self.A)
        self.y = np.asarray(self.y, dtype=float)
        if self.y.shape != (M,):
            raise ValueError(f"len(y)={self.y.shape} does not match rows(A)={M}")
        if self.x_true is not None:
            self.x_true = np.asarray(self.x_true, dtype=float)
            if self.x_true.shape != (N,):
                raise ValueError(f"len(x)={self.x_true.shape} does not match cols(A)={N}")
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be non-negative")

    @property
    def shape(self):
        return _shape(self.A)


def _shape(A):
    if hasattr(A, "M") and hasattr(A, "N"):
        return A.M, A.N
    return np.shape(A)


def _matvec(A, x):
    if hasattr(A, "apply"):
        return A.apply(x)
    return np.asarray(A) @ x


def sample_signal(prior, n, rng):
    """Draw ``n`` IID samples from ``prior``.

    Bernoulli-Gaussian draws the support mask first so the number of zeros is
    exactly Binomial(n, 1 - rho).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if prior.kind == BPSK:
        return np.where(rng.random(n) < 0.5, 1.0, -1.0)
    mask = rng.random(n) < prior.rho
    values = rng.standard_normal(n) / np.sqrt(prior.rho)
    return np.where(mask, values, 0.0)


def make_observation(A, x, sigma2, rng):
    """Return ``A @ x + n`` with ``n ~ N(0, sigma2 I)``."""
    if sigma2 < 0:
        raise ValueError("sigma2 must be non-negative")
    x = np.asarray(x, dtype=float)
    M, N = _shape(A)
    if x.shape != (N,):
        raise ValueError(f"x has shape {x.shape}, expected ({N},)")
    y = _matvec(A, x)
    if sigma2 > 0:
        y = y + np.sqrt(sigma2) * rng.standard_normal(M)
    return y


def noise_variance_from_snr(A, prior, snr_db):
    """Noise variance giving ``E||Ax||^2 / E||n||^2 = 10^(snr_db/10)``.

    Uses the realized ``tr(A^T A)`` so the ratio holds for the sampled matrix.
    """
    if hasattr(A, "trace_ata"):
        tr, M = A.trace_ata, A.M
    else:
        A = np.asarray(A)
        tr, M = float(np.sum(A * A)), A.shape[0]
    return tr * prior.second_moment / (M * 10.0 ** (snr_db / 10.0))
