"""Scalar denoisers, divergence-free wrappers and scalar MMSE functionals.

Every prior is handled as a Gaussian mixture (point masses are zero-variance
components). For a component with mean ``mu`` and variance ``s2`` the
observation ``R = X + tau Z`` is Gaussian with variance ``s2 + tau2`` and
``X | R`` is Gaussian, so

    E[(f(R) - X)^2] = sum_k w_k E_{R_k}[(f(R) - m_k(R))^2 + b_k]

which turns every state-evolution expectation into one-dimensional
integrals over Gaussian laws. Those are evaluated either with Gauss-Hermite
nodes or with a composite Gauss-Legendre rule whose panel edges follow the
kinks of the denoiser and the decision boundaries of the posterior.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "MMSE",
    "SoftThreshold",
    "BetaFamily",
    "DFDenoiser",
    "posterior_mean",
    "posterior_var",
    "posterior_moments",
    "mmse_b",
    "soft_threshold",
    "beta_family",
    "df_apply",
    "apply_denoiser",
    "optimal_c",
    "expected_derivative",
    "se_mse",
    "gaussian_expect",
]

HERMITE = "hermite"
COMPOSITE = "composite"
DEFAULT_SCHEME = COMPOSITE
DEFAULT_ORDER = 61

_SPAN = 12.0          # integrate over mean +- _SPAN standard deviations
_PANEL_NODES = 16
_REFINE = np.array([0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0])


# ---------------------------------------------------------------------------
# posterior of X given R = X + tau Z

def _check_tau2(tau2):
    if not tau2 > 0:
        raise ValueError(f"tau2 must be positive, got {tau2}")


def posterior_moments(prior, r, tau2):
    """Posterior mean and variance of X given R = r under R = X + tau Z."""
    _check_tau2(tau2)
    r = np.asarray(r, dtype=float)
    w, mu, s2 = prior.components()
    rr = r[..., None]
    tot = s2 + tau2
    loglik = np.log(w) - 0.5 * np.log(2 * np.pi * tot) - 0.5 * (rr - mu) ** 2 / tot
    resp = np.exp(loglik - logsumexp(loglik, axis=-1, keepdims=True))
    gain = s2 / tot
    m = mu + gain * (rr - mu)
    b = s2 * tau2 / tot
    mean = np.sum(resp * m, axis=-1)
    var = np.sum(resp * (b + (m - mean[..., None]) ** 2), axis=-1)
    return mean, var


def posterior_mean(prior, r, tau2):
    """E{X | X + tau Z = r}."""
    return posterior_moments(prior, r, tau2)[0]


def posterior_var(prior, r, tau2):
    """var{X | X + tau Z = r}; also tau2 times the derivative of the posterior mean."""
    return posterior_moments(prior, r, tau2)[1]


# ---------------------------------------------------------------------------
# Gaussian expectations

@lru_cache(maxsize=16)
def _hermite(order):
    x, w = np.polynomial.hermite.hermgauss(order)
    return np.sqrt(2.0) * x, w / np.sqrt(np.pi)


@lru_cache(maxsize=4)
def _legendre(n):
    return np.polynomial.legendre.leggauss(n)


def _composite_nodes(mean, sd, breakpoints):
    lo, hi = mean - _SPAN * sd, mean + _SPAN * sd
    edges = mean + sd * np.arange(-_SPAN, _SPAN + 0.5)
    if len(breakpoints):
        bp = np.asarray(breakpoints, dtype=float)
        edges = np.concatenate([edges, bp[(bp > lo) & (bp < hi)]])
    edges = np.unique(edges)
    x, w = _legendre(_PANEL_NODES)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (a + b) / 2 + half * x
    weights = half * w
    z = (nodes - mean) / sd
    dens = np.exp(-0.5 * z * z) / (np.sqrt(2 * np.pi) * sd)
    return nodes.ravel(), (weights * dens).ravel()


def gaussian_expect(fn, mean, var, breakpoints=(), scheme=DEFAULT_SCHEME,
                    order=DEFAULT_ORDER):
    """E[fn(R)] for R ~ N(mean, var)."""
    sd = np.sqrt(var)
    if scheme == HERMITE:
        if order < 3:
            raise ValueError("quadrature order must be >= 3")
        x, w = _hermite(order)
        return float(np.dot(w, fn(mean + sd * x)))
    if scheme != COMPOSITE:
        raise ValueError(f"unknown quadrature scheme {scheme!r}")
    nodes, weights = _composite_nodes(mean, sd, breakpoints)
    return float(np.dot(weights, fn(nodes)))


def _transition_points(prior, tau2):
    """Points in r where the posterior changes on a scale much finer than tau."""
    w, mu, s2 = prior.components()
    centers, widths = [], []
    if prior.kind == "BPSK":
        centers.append(0.0)
        widths.append(tau2)
    elif len(w) == 2:
        p0, p1 = w
        v1 = s2[1] + tau2
        tau = np.sqrt(tau2)
        centers.append(0.0)
        widths.append(tau)
        # p0 N(r; 0, tau2) = p1 N(r; 0, v1)
        arg = np.log(p0 / p1) + 0.5 * np.log(v1 / tau2)
        if arg > 0:
            rstar = np.sqrt(2 * arg / (1 / tau2 - 1 / v1))
            width = tau2 / max(rstar, tau)
            centers += [rstar, -rstar]
            widths += [width, width]
    pts = []
    for c, h in zip(centers, widths):
        pts.append(c + h * _REFINE)
        pts.append(c - h * _REFINE)
    return np.concatenate(pts) if pts else np.empty(0)


def _mixture_expect(prior, tau2, integrand, kinks=(), scheme=DEFAULT_SCHEME,
                    order=DEFAULT_ORDER):
    """sum_k w_k E_{R ~ N(mu_k, s2_k + tau2)}[integrand(R, m_k(R), b_k)]."""
    w, mu, s2 = prior.components()
    bp = np.concatenate([np.asarray(kinks, float).ravel(), _transition_points(prior, tau2)])
    total = 0.0
    for wk, mk, sk in zip(w, mu, s2):
        tot = sk + tau2
        gain, b = sk / tot, sk * tau2 / tot

        def fn(r, mk=mk, gain=gain, b=b):
            return integrand(r, mk + gain * (r - mk), b)

        total += wk * gaussian_expect(fn, mk, tot, bp, scheme, order)
    return total


def mmse_b(prior, tau2, scheme=DEFAULT_SCHEME, order=DEFAULT_ORDER):
    """E{(E{X|R} - X)^2} for R = X + tau Z."""
    _check_tau2(tau2)
    return _mixture_expect(prior, tau2, lambda r, m, b: posterior_var(prior, r, tau2),
                           scheme=scheme, order=order)


# ---------------------------------------------------------------------------
# denoiser families

def soft_threshold(r, gamma):
    """max(|r| - gamma, 0) * sign(r)."""
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    r = np.asarray(r, dtype=float)
    return np.sign(r) * np.maximum(np.abs(r) - gamma, 0.0)


@dataclass(frozen=True)
class MMSE:
    """Posterior-mean denoiser for a known prior."""

    prior: object

    def __call__(self, r, tau2):
        return posterior_mean(self.prior, r, tau2)

    def deriv(self, r, tau2):
        return posterior_var(self.prior, r, tau2) / tau2

    def kinks(self, tau2):
        return ()


@dataclass(frozen=True)
class SoftThreshold:
    """Soft thresholding at ``gamma = scale * tau``, or at a fixed ``gamma``."""

    scale: float = 1.0
    gamma: Optional[float] = None

    def threshold(self, tau2):
        return self.gamma if self.gamma is not None else self.scale * np.sqrt(tau2)

    def __call__(self, r, tau2):
        return soft_threshold(r, self.threshold(tau2))

    def deriv(self, r, tau2):
        # derivative at |r| == gamma taken as 0
        return (np.abs(np.asarray(r)) > self.threshold(tau2)).astype(float)

    def kinks(self, tau2):
        g = self.threshold(tau2)
        return (-g, g)


@dataclass(frozen=True)
class BetaFamily:
    """eta(r) = base(r) - (1 - beta) * mean(base'(r)) * r.

    beta = 1 is the plain base denoiser; beta = 0 removes the divergence.
    """

    beta: float
    base: object = SoftThreshold()

    def __post_init__(self):
        if not (0.0 <= self.beta <= 1.0):
            raise ValueError("beta must lie in [0, 1]")


@dataclass(frozen=True)
class DFDenoiser:
    """C * (base(r) - dbar * r); ``C=None`` selects the optimal scale.

    The optimal scale tau2 / (tau2 - mmse_B) is only defined for an MMSE base.
    """

    base: object
    C: Optional[float] = None

    @property
    def is_optimal(self):
        return self.C is None

    def __post_init__(self):
        if self.C is None and not isinstance(self.base, MMSE):
            raise ValueError("the optimal C rule needs an MMSE base denoiser")


def optimal_c(tau2, mmse_b_value):
    """tau2 / (tau2 - mmse_B); undefined once mmse_B reaches tau2."""
    if not (0 <= mmse_b_value < tau2):
        raise ValueError(f"optimal C needs 0 <= mmse_B < tau2 (got {mmse_b_value}, {tau2})")
    return tau2 / (tau2 - mmse_b_value)


def beta_family(r, beta, tau2=1.0, base=None):
    base = SoftThreshold() if base is None else base
    out, _ = apply_denoiser(BetaFamily(beta, base), r, tau2)
    return out


def df_apply(df, r, tau2):
    """Apply a divergence-free denoiser; returns ``(s, dbar)``.

    ``dbar`` is the empirical divergence of the base denoiser over ``r``,
    which makes the empirical divergence of ``s`` exactly zero.
    """
    _check_tau2(tau2)
    r = np.asarray(r, dtype=float)
    dbar = float(np.mean(df.base.deriv(r, tau2)))
    if df.C is None:
        # mmse_B estimated by the mean posterior variance, i.e. tau2 * dbar
        C = optimal_c(tau2, tau2 * dbar)
    else:
        C = df.C
    return C * (df.base(r, tau2) - dbar * r), dbar


def apply_denoiser(den, r, tau2):
    """Apply any denoiser to a vector; returns ``(s, div)``.

    ``div`` is the empirical divergence of the map actually applied, the
    quantity AMP needs for its Onsager term.
    """
    if isinstance(den, DFDenoiser):
        s, _ = df_apply(den, r, tau2)
        return s, 0.0
    r = np.asarray(r, dtype=float)
    if isinstance(den, BetaFamily):
        dbar = float(np.mean(den.base.deriv(r, tau2)))
        s = den.base(r, tau2) - (1.0 - den.beta) * dbar * r
        return s, den.beta * dbar
    return den(r, tau2), float(np.mean(den.deriv(r, tau2)))


# ---------------------------------------------------------------------------
# population (state-evolution) forms

def expected_derivative(base, prior, tau2, scheme=DEFAULT_SCHEME, order=DEFAULT_ORDER,
                        param_tau2=None):
    """E{base'(X + tau Z)}, with the denoiser tuned to ``param_tau2`` (default tau2)."""
    _check_tau2(tau2)
    p = tau2 if param_tau2 is None else param_tau2
    _check_tau2(p)
    if isinstance(base, MMSE) and p == tau2:
        return mmse_b(prior, tau2, scheme, order) / tau2
    return _mixture_expect(prior, tau2, lambda r, m, b: base.deriv(r, p),
                           kinks=_kinks(base, prior, p, tau2), scheme=scheme, order=order)


def _kinks(den, prior, p, tau2):
    k = np.asarray(den.kinks(p), dtype=float)
    if p != tau2:
        # a mistuned posterior mean switches near its own transition points
        k = np.concatenate([k, _transition_points(prior, p)])
    return k


def _population_map(den, prior, tau2, scheme, order, p):
    """Scalar function r -> eta(r) with model expectations in place of empirical ones."""
    if isinstance(den, BetaFamily):
        d = expected_derivative(den.base, prior, tau2, scheme, order, p)
        k = 1.0 - den.beta
        return lambda r: den.base(r, p) - k * d * r, _kinks(den.base, prior, p, tau2)
    if isinstance(den, DFDenoiser):
        d = expected_derivative(den.base, prior, tau2, scheme, order, p)
        C = optimal_c(p, d * p) if den.C is None else den.C
        return lambda r: C * (den.base(r, p) - d * r), _kinks(den.base, prior, p, tau2)
    return (lambda r: den(r, p)), _kinks(den, prior, p, tau2)


def se_mse(den, prior, tau2, scheme=DEFAULT_SCHEME, order=DEFAULT_ORDER, param_tau2=None):
    """E{[eta(X + tau Z) - X]^2} for any denoiser in this module.

    ``param_tau2`` is the noise level the denoiser is tuned to; it defaults
    to the true ``tau2``.
    """
    _check_tau2(tau2)
    p = tau2 if param_tau2 is None else param_tau2
    _check_tau2(p)
    if isinstance(den, MMSE) and p == tau2:
        return mmse_b(prior, tau2, scheme, order)
    f, kinks = _population_map(den, prior, tau2, scheme, order, p)
    return _mixture_expect(prior, tau2, lambda r, m, b: (f(r) - m) ** 2 + b,
                           kinks=kinks, scheme=scheme, order=order)
