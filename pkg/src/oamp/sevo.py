"""State evolution for AMP and OAMP.

The linear-step map Phi takes v2 (MSE entering the linear estimator) to
tau2 (MSE leaving it); the denoiser map Psi takes tau2 back to v2. Phi is
evaluated on a spectrum of A^T A that includes its zero eigenvalues, either
the realized one or an asymptotic closed form.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .denoisers import MMSE, DFDenoiser, mmse_b, se_mse
from .linest import KINDS, LMMSE, MF, PINV, spectral_gains

__all__ = [
    "SpectralModel",
    "SEState",
    "se_amp",
    "phi_empirical",
    "phi_closed_form",
    "phi_for_kind",
    "mmse_a",
    "phi_star",
    "psi_star",
    "psi_out_star",
    "run_se_oamp",
    "se_accuracy",
    "fixed_point",
    "eta_transform",
    "r_transform",
    "r_transform_residual",
]

IID_ASYM = "IIDGaussianAsym"
PARTIAL_ASYM = "PartialOrthogonalAsym"
OPTIMAL = "optimal"


@dataclass(frozen=True)
class SpectralModel:
    """Eigenvalue law of A^T A: a realized spectrum or an asymptotic tag.

    ``delta`` is N/M for the tagged forms.
    """

    lambda2: Optional[np.ndarray] = None
    asym: Optional[str] = None
    delta: Optional[float] = None

    def __post_init__(self):
        if self.lambda2 is not None:
            lam2 = np.asarray(self.lambda2, dtype=float)
            if np.any(lam2 < 0):
                raise ValueError("eigenvalues of A^T A must be non-negative")
            object.__setattr__(self, "lambda2", lam2)
        elif self.asym not in (IID_ASYM, PARTIAL_ASYM) or not self.delta:
            raise ValueError("need either lambda2 or an asymptotic tag with delta")

    @classmethod
    def empirical(cls, lambda2):
        return cls(lambda2=lambda2)

    @classmethod
    def from_matrix(cls, model):
        return cls(lambda2=model.spectrum)

    @classmethod
    def iid_gaussian(cls, delta):
        return cls(asym=IID_ASYM, delta=float(delta))

    @classmethod
    def partial_orthogonal(cls, delta):
        return cls(asym=PARTIAL_ASYM, delta=float(delta))

    @property
    def is_empirical(self):
        return self.lambda2 is not None

    @property
    def ratio(self):
        """N/M."""
        if self.is_empirical:
            return len(self.lambda2) / np.count_nonzero(self.lambda2)
        return self.delta

    @property
    def mean_lambda2(self):
        """tr(A^T A)/N; the tagged ensembles are normalized to 1."""
        return float(np.mean(self.lambda2)) if self.is_empirical else 1.0


@dataclass
class SEState:
    v2: list = field(default_factory=list)
    tau2: list = field(default_factory=list)
    mse_out: list = field(default_factory=list)
    converged: bool = False
    status: str = "ok"

    @property
    def fixed_point(self):
        return self.v2[-1], (self.tau2[-1] if self.tau2 else np.nan)

    def padded(self, name, T):
        a = np.asarray(getattr(self, name), dtype=float)
        if len(a) >= T:
            return a[:T]
        return np.concatenate([a, np.full(T - len(a), a[-1] if len(a) else np.nan)])


# ---------------------------------------------------------------------------
# linear-step maps

def phi_empirical(spec, ghat, v2, sigma2):
    """tau2 for a linear estimator with singular values ``ghat`` (zero-padded)."""
    lam = np.sqrt(spec.lambda2)
    g = np.zeros_like(lam)
    ghat = np.asarray(ghat, dtype=float)
    g[:len(ghat)] = ghat
    m11 = np.mean(g * lam)
    if m11 == 0:
        raise ValueError("mean(ghat * lambda) is zero")
    m22 = np.mean(g * g * lam * lam)
    m20 = np.mean(g * g)
    return (m22 / m11 ** 2 - 1.0) * v2 + (m20 / m11 ** 2) * sigma2


def phi_closed_form(kind, delta, v2, sigma2):
    """Large-system tau2 for IID Gaussian A (entries of variance 1/M), delta = N/M.

    ``kind="PartialOrtho"`` gives the row-orthogonal value, identical for all
    three estimators.
    """
    c = delta - 1.0
    if kind == MF:
        return delta * v2 + sigma2
    if kind == PINV:
        if delta == 1.0:
            raise ZeroDivisionError("PINV closed form is undefined for M = N")
        if delta > 1.0:
            return c * v2 + delta / c * sigma2
        return sigma2 / (1.0 - delta)
    if kind == LMMSE:
        a = sigma2 + c * v2
        return 0.5 * (a + np.hypot(a, 2.0 * np.sqrt(sigma2 * v2)))
    if kind == "PartialOrtho":
        return c * v2 + sigma2
    raise ValueError(f"unknown estimator {kind!r}")


def phi_for_kind(spec, kind, v2, sigma2):
    """Phi for a named estimator on ``spec``; ``kind="optimal"`` is Phi*."""
    if kind == OPTIMAL:
        return phi_star(spec, v2, sigma2)
    if not spec.is_empirical:
        if spec.asym == PARTIAL_ASYM:
            return phi_closed_form("PartialOrtho", spec.delta, v2, sigma2)
        return phi_closed_form(kind, spec.delta, v2, sigma2)
    lam2 = spec.lambda2
    nz = lam2 > 0
    g = np.zeros_like(lam2)
    g[nz] = spectral_gains(kind, np.sqrt(lam2[nz]), v2, sigma2)
    return phi_empirical(spec, g, v2, sigma2)


def mmse_a(spec, v2, sigma2):
    """(1/N) sum_i sigma2 v2 / (v2 lambda_i^2 + sigma2), zero eigenvalues included."""
    if not v2 > 0:
        raise ValueError("v2 must be positive")
    if spec.is_empirical:
        lam2 = spec.lambda2
        terms = np.empty_like(lam2)
        zero = lam2 == 0
        terms[zero] = v2
        terms[~zero] = sigma2 * v2 / (v2 * lam2[~zero] + sigma2)
        return float(np.mean(terms))
    d = spec.delta
    if spec.asym == PARTIAL_ASYM:
        return sigma2 * v2 / (d * v2 + sigma2) / d + (1.0 - 1.0 / d) * v2
    # LMMSE is the optimal de-correlated estimator, so Phi* = Phi_LMMSE
    phi = phi_closed_form(LMMSE, d, v2, sigma2)
    if phi == 0:
        return 0.0
    return 1.0 / (1.0 / phi + 1.0 / v2)


def _harmonic_gap(mmse, var):
    if mmse <= 0:
        return 0.0
    if mmse >= var:
        raise ValueError(f"mmse {mmse} >= input variance {var}; map undefined")
    return 1.0 / (1.0 / mmse - 1.0 / var)


def phi_star(spec, v2, sigma2):
    """(1/mmse_A - 1/v2)^-1, the smallest tau2 over de-correlated estimators.

    Evaluated as v2 * a / (1 - a) with a = mmse_A / v2 and both a and 1 - a
    summed directly, so it stays accurate when v2 is far below sigma2.
    """
    if not v2 > 0:
        raise ValueError("v2 must be positive")
    if not spec.is_empirical:
        if spec.asym == PARTIAL_ASYM:
            return phi_closed_form("PartialOrtho", spec.delta, v2, sigma2)
        return phi_closed_form(LMMSE, spec.delta, v2, sigma2)
    lam2 = spec.lambda2
    if sigma2 == 0:
        a = np.mean(lam2 == 0)
        return v2 * a / (1.0 - a) if a < 1 else np.inf
    snr = v2 * lam2 / sigma2
    a = np.mean(1.0 / (1.0 + snr))
    b = np.mean(snr / (1.0 + snr))
    return float(v2 * a / b) if b > 0 else np.inf


def psi_star(prior, tau2, **quad):
    """(1/mmse_B - 1/tau2)^-1, the smallest v2 over divergence-free denoisers."""
    return _harmonic_gap(mmse_b(prior, tau2, **quad), tau2)


def psi_out_star(prior, tau2, **quad):
    return mmse_b(prior, tau2, **quad)


# ---------------------------------------------------------------------------
# recursions

def se_amp(prior, denoiser, delta, sigma2, T=50, variant="standard", v2_init=None):
    """AMP state evolution.

    ``variant="standard"`` uses tau2 = delta v2 + sigma2. ``"partial"``
    models a row-orthogonal A without the Onsager correction: the error
    variance is ((N - M)/M) v2 + sigma2 while the denoiser stays tuned to
    delta v2 + sigma2, which is what the residual-based estimate of AMP
    reports in that case. ``mse_out[t]`` predicts ||s^{t+1} - x||^2/N.
    """
    if delta < 1:
        raise ValueError("delta = N/M must be >= 1")
    v2 = prior.second_moment if v2_init is None else v2_init
    st = SEState(v2=[v2])
    for t in range(T):
        if variant == "standard":
            tau2 = param = delta * v2 + sigma2
        elif variant == "partial":
            tau2 = (delta - 1.0) * v2 + sigma2
            param = delta * v2 + sigma2
        else:
            raise ValueError(f"unknown variant {variant!r}")
        v2 = se_mse(denoiser, prior, tau2, param_tau2=param)
        st.tau2.append(tau2)
        st.v2.append(v2)
        st.mse_out.append(v2)
    st.converged = abs(st.v2[-1] - st.v2[-2]) <= 1e-12 * st.v2[-2] if T else False
    return st


def run_se_oamp(spec, prior, le=OPTIMAL, df=None, out=None, sigma2=0.0, T=50,
                tol=0.0, v2_init=None):
    """OAMP state evolution.

    ``le`` is "optimal" or one of MF/PINV/LMMSE. ``df`` defaults to the
    optimal divergence-free MMSE denoiser and ``out`` to the posterior mean.
    ``mse_out[t]`` predicts ||out(r^t) - x||^2/N.
    """
    if le != OPTIMAL and le not in KINDS:
        raise ValueError(f"unknown linear estimator {le!r}")
    df = DFDenoiser(MMSE(prior)) if df is None else df
    out = MMSE(prior) if out is None else out
    optimal_nle = isinstance(df, DFDenoiser) and df.is_optimal

    v2 = prior.second_moment if v2_init is None else v2_init
    st = SEState(v2=[v2])
    for t in range(T):
        tau2 = phi_for_kind(spec, le, v2, sigma2)
        st.tau2.append(tau2)
        if tau2 <= 0:
            st.mse_out.append(0.0)
            st.v2.append(0.0)
            st.converged = True
            break
        try:
            v2 = psi_star(prior, tau2) if optimal_nle else se_mse(df, prior, tau2)
        except ValueError:
            st.status = "mmse_b>=tau2"
            st.mse_out.append(se_mse(out, prior, tau2))
            break
        st.mse_out.append(se_mse(out, prior, tau2))
        st.v2.append(v2)
        if abs(st.v2[-1] - st.v2[-2]) <= tol * st.v2[-2]:
            st.converged = True
            break
    return st


def se_accuracy(mse_sim, mse_se):
    """|MSE_sim - MSE_SE| / MSE_sim."""
    mse_sim = np.asarray(mse_sim, dtype=float)
    out = np.abs(mse_sim - np.asarray(mse_se, dtype=float)) / mse_sim
    return float(out) if out.ndim == 0 else out


def fixed_point(spec, prior, sigma2, tol=1e-12, maxiter=10_000):
    """Iterate v2 <- Psi*(Phi*(v2)) from v2 = E{X^2}.

    Stops once the relative change of v2 drops below ``tol``. Returns the full
    :class:`SEState`; ``state.fixed_point`` is (v2_inf, tau2_inf) with
    tau2_inf = Phi*(v2_inf).
    """
    v2 = prior.second_moment
    st = SEState(v2=[v2])
    for _ in range(maxiter):
        tau2 = phi_star(spec, v2, sigma2)
        st.tau2.append(tau2)
        if tau2 <= 0:
            st.v2.append(0.0)
            st.mse_out.append(0.0)
            st.converged = True
            return st
        v2_new = psi_star(prior, tau2)
        st.mse_out.append(mmse_b(prior, tau2))
        st.v2.append(v2_new)
        if abs(v2_new - v2) <= tol * v2:
            st.converged = True
            st.tau2.append(phi_star(spec, v2_new, sigma2))
            return st
        v2 = v2_new
    raise RuntimeError(f"fixed point not reached in {maxiter} iterations")


# ---------------------------------------------------------------------------
# free-probability transforms

def eta_transform(spec, gamma):
    """E{1 / (1 + gamma lambda^2)} over the eigenvalue law of A^T A."""
    if spec.is_empirical:
        return float(np.mean(1.0 / (1.0 + gamma * spec.lambda2)))
    return mmse_a(spec, gamma, 1.0) / gamma


def _solve_gamma(spec, target, lo=1e-300, hi=1e300):
    """gamma with gamma * eta(gamma) = target; gamma * eta(gamma) increases in gamma."""
    def f(logg):
        g = np.exp(logg)
        return g * eta_transform(spec, g) - target

    a, b = np.log(lo), np.log(hi)
    if f(a) > 0 or f(b) < 0:
        raise ValueError(f"target {target} outside the range of gamma * eta(gamma)")
    return float(np.exp(brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                               maxiter=500)))


def r_transform(spec, z):
    """R-transform of the A^T A eigenvalue law at z < 0.

    Uses R(-gamma eta(gamma)) = (1 - eta(gamma)) / (gamma eta(gamma)), which
    equals 1 / Phi*(gamma, 1) and avoids the cancellation of the two-term form
    at small |z|.
    """
    if not z < 0:
        raise ValueError("z must be negative")
    gamma = _solve_gamma(spec, -z)
    return 1.0 / phi_star(spec, gamma, 1.0)


def r_transform_residual(spec, fixed, prior, sigma2):
    """Relative violation of 1/tau2 = R(-mmse_B(tau2)/sigma2) / sigma2 at ``fixed``.

    ``fixed`` is (v2_inf, tau2_inf); returns |1/tau2 - R/sigma2| * tau2.
    """
    _, tau2 = fixed
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    z = -mmse_b(prior, tau2) / sigma2
    R = r_transform(spec, z)
    return abs(1.0 / tau2 - R / sigma2) * tau2
