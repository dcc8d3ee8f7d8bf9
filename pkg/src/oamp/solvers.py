"""AMP and OAMP iterations with per-iteration diagnostics.

Iteration ``t`` records quantities of the linear step output ``r^t`` and of
the estimate produced from it, so index ``t`` of a :class:`Trajectory` lines
up with ``tau_t`` of the matching state evolution.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .denoisers import MMSE, DFDenoiser, apply_denoiser, df_apply
from .linest import LMMSE, as_model, base_matrix, decorrelate

__all__ = [
    "Trajectory",
    "run_amp",
    "run_oamp",
    "estimate_v2",
    "estimate_tau2",
    "error_diagnostics",
]

EPS = 1e-9


@dataclass
class Trajectory:
    """Per-iteration record of one solver run.

    Fields computed from the true signal are NaN when it is unknown.
    """

    mse_out: list = field(default_factory=list)
    v2_true: list = field(default_factory=list)
    tau2_true: list = field(default_factory=list)
    v2_hat: list = field(default_factory=list)
    tau2_hat: list = field(default_factory=list)
    dbar: list = field(default_factory=list)
    orth_hq: list = field(default_factory=list)
    orth_hx: list = field(default_factory=list)
    status: str = "ok"
    x_hat: Optional[np.ndarray] = None

    @property
    def iterations(self):
        return len(self.tau2_hat)

    def as_arrays(self):
        names = ("mse_out", "v2_true", "tau2_true", "v2_hat", "tau2_hat", "dbar",
                 "orth_hq", "orth_hx")
        return {k: np.asarray(getattr(self, k), dtype=float) for k in names}

    def padded(self, name, T):
        """Field ``name`` extended to length T by repeating its last value."""
        a = np.asarray(getattr(self, name), dtype=float)
        if len(a) == 0:
            return np.full(T, np.nan)
        if len(a) >= T:
            return a[:T]
        return np.concatenate([a, np.full(T - len(a), a[-1])])


def estimate_v2(y, A, s, sigma2, trAA, eps=EPS):
    """(||y - A s||^2 - M sigma2) / tr(A^T A), floored at ``eps``."""
    if not trAA > 0:
        raise ValueError("tr(A^T A) must be positive")
    res = y - A.apply(s) if hasattr(A, "apply") else y - A @ s
    return max((float(res @ res) - len(y) * sigma2) / trAA, eps)


def estimate_tau2(le, v2_hat, sigma2):
    """tr(B B^T)/N * v2 + tr(W W^T)/N * sigma2."""
    if v2_hat < 0:
        raise ValueError("v2_hat must be non-negative")
    return (le.trBB * v2_hat + le.trWW * sigma2) / le.N


def error_diagnostics(r, s, x):
    """Errors h = r - x (linear output) and q = s - x (its input)."""
    N = len(x)
    h = r - x
    q = s - x
    return {
        "tau2_true": float(h @ h) / N,
        "v2_true": float(q @ q) / N,
        "orth_hq": float(h @ q) / N,
        "orth_hx": float(h @ x) / N,
    }


def _record(traj, x, r, s, est):
    if x is None:
        for k in ("mse_out", "v2_true", "tau2_true", "orth_hq", "orth_hx"):
            getattr(traj, k).append(np.nan)
        return
    d = error_diagnostics(r, s, x)
    for k, v in d.items():
        getattr(traj, k).append(v)
    e = est - x
    traj.mse_out.append(float(e @ e) / len(x))


def _finite(*arrays):
    return all(np.all(np.isfinite(a)) for a in arrays)


def run_amp(system, denoiser, T=50, onsager=True, tau_rule="residual", eps=EPS):
    """AMP with the Onsager term (N/M) * mean(eta'(r^{t-1})) * (r^{t-1} - s^{t-1}).

    The denoiser's noise level is estimated online: ``tau_rule="residual"``
    uses ||z||^2 / M for the Onsager-corrected residual z, ``"se"`` uses
    (N/M) * v2_hat + sigma2 with v2_hat from :func:`estimate_v2`.
    ``onsager=False`` drops the correction term entirely.
    """
    A, y, sigma2, x = system.A, system.y, system.sigma2, system.x_true
    M, N = system.shape
    trAA = A.trace_ata if hasattr(A, "trace_ata") else float(np.sum(np.asarray(A) ** 2))
    if not hasattr(A, "apply"):
        A = as_model(A)

    traj = Trajectory()
    s = np.zeros(N)
    r_prev = s_prev = z_prev = None
    div_prev = 0.0
    for t in range(T):
        resid = y - A.apply(s)
        r = s + A.apply_transpose(resid)
        z = resid
        if onsager and t > 0:
            k = (N / M) * div_prev
            r = r + k * (r_prev - s_prev)
            z = resid + k * z_prev
        v2_hat = max((float(resid @ resid) - M * sigma2) / trAA, eps)
        if tau_rule == "residual":
            tau2_hat = max(float(z @ z) / M, eps)
        elif tau_rule == "se":
            tau2_hat = max((N / M) * v2_hat + sigma2, eps)
        else:
            raise ValueError(f"unknown tau_rule {tau_rule!r}")
        if not _finite(r):
            traj.status = "diverged"
            break
        s_next, div = apply_denoiser(denoiser, r, tau2_hat)
        if not _finite(s_next):
            traj.status = "diverged"
            break
        traj.v2_hat.append(v2_hat)
        traj.tau2_hat.append(tau2_hat)
        traj.dbar.append(div)
        _record(traj, x, r, s, s_next)
        traj.x_hat = s_next
        r_prev, s_prev, z_prev, div_prev = r, s, z, div
        s = s_next
    return traj


def run_oamp(system, df, out=None, le_kind=LMMSE, T=50, model=None, v2_init=1.0,
             tol=1e-12, eps=EPS, le_method="auto"):
    """OAMP: de-correlated linear step followed by a divergence-free denoiser.

    ``out`` produces the reported estimate from ``r^t`` (defaults to the
    posterior mean when ``df`` wraps an MMSE denoiser). The run stops early
    once ``|v2_hat_t - v2_hat_{t-1}| < tol``.
    """
    A = model if model is not None else system.A
    if not hasattr(A, "apply"):
        A = as_model(A)
    y, sigma2, x = system.y, system.sigma2, system.x_true
    M, N = A.M, A.N
    if out is None:
        if not isinstance(df.base, MMSE):
            raise ValueError("pass an output denoiser for a non-MMSE base")
        out = df.base
    trAA = A.trace_ata

    traj = Trajectory()
    s = np.zeros(N)
    v2_hat = v2_init
    le = None
    for t in range(T):
        if le is None or le_kind == LMMSE:
            le = decorrelate(base_matrix(le_kind, A, v2_hat, sigma2, method=le_method))
        r = s + le.apply(y - A.apply(s))
        tau2_hat = max(estimate_tau2(le, v2_hat, sigma2), eps)
        if not _finite(r):
            traj.status = "diverged"
            break
        try:
            s_next, dbar = df_apply(df, r, tau2_hat)
        except ValueError:
            traj.status = "mmse_b>=tau2"
            break
        if not _finite(s_next):
            traj.status = "diverged"
            break
        est = out(r, tau2_hat)
        traj.v2_hat.append(v2_hat)
        traj.tau2_hat.append(tau2_hat)
        traj.dbar.append(dbar)
        _record(traj, x, r, s, est)
        traj.x_hat = est
        s = s_next
        v2_new = estimate_v2(y, A, s, sigma2, trAA, eps)
        if abs(v2_new - v2_hat) < tol:
            break
        v2_hat = v2_new
    return traj
