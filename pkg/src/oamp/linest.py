"""Linear estimators (MF, PINV, LMMSE) and the de-correlating normalization.

A linear estimator is held in one of three forms:

* spectral: ``W = right_t.T @ diag(g) @ left.T`` on the thin SVD of A;
* scaled transpose: ``W = a * A.T``, exact for row-orthogonal A;
* dense: an explicit N x M array.

The first two never form an N x M matrix, which keeps partial DCT/Hadamard
operators matrix-free.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .ensembles import MatrixModel

__all__ = [
    "MF",
    "PINV",
    "LMMSE",
    "LinearEstimator",
    "DecorrelatedLE",
    "spectral_gains",
    "base_matrix",
    "decorrelate",
    "le_traces",
]

MF = "MF"
PINV = "PINV"
LMMSE = "LMMSE"
KINDS = (MF, PINV, LMMSE)


def as_model(A):
    if isinstance(A, MatrixModel):
        return A
    A = np.asarray(A, dtype=float)
    return MatrixModel(A.shape[0], A.shape[1], "Dense", dense=A)


def spectral_gains(kind, lam, v2, sigma2):
    """Singular values g_i of the un-normalized estimator for singular values lam."""
    lam = np.asarray(lam, dtype=float)
    if kind == MF:
        return lam.copy()
    if kind == PINV:
        if np.any(lam <= 0):
            raise np.linalg.LinAlgError("PINV needs a full-rank A")
        return 1.0 / lam
    if kind == LMMSE:
        if not v2 > 0:
            raise ValueError("LMMSE needs v2 > 0")
        return v2 * lam / (v2 * lam ** 2 + sigma2)
    raise ValueError(f"unknown linear estimator {kind!r}")


@dataclass
class LinearEstimator:
    model: MatrixModel
    gains: Optional[np.ndarray] = None
    scale: Optional[float] = None
    matrix: Optional[np.ndarray] = None

    def apply(self, r):
        m = self.model
        if self.gains is not None:
            return m.right_t.T @ (self.gains * (m.left.T @ r))
        if self.scale is not None:
            return self.scale * m.apply_transpose(r)
        return self.matrix @ r

    __call__ = apply

    def scaled(self, c):
        if self.gains is not None:
            return LinearEstimator(self.model, gains=c * self.gains)
        if self.scale is not None:
            return LinearEstimator(self.model, scale=c * self.scale)
        return LinearEstimator(self.model, matrix=c * self.matrix)

    def trace_wa(self):
        m = self.model
        if self.gains is not None:
            return float(np.dot(self.gains, m.singulars))
        if self.scale is not None:
            return self.scale * m.trace_ata
        return float(np.sum(self.matrix * m.dense.T))

    def traces(self):
        """(tr(B B^T), tr(W W^T)) with B = I - W A."""
        m = self.model
        if self.gains is not None:
            gl = self.gains * m.singulars
            return float(np.sum((1.0 - gl) ** 2) + (m.N - len(gl))), float(np.sum(self.gains ** 2))
        if self.scale is not None:
            a, c = self.scale, m.aat_scale
            return m.M * (1.0 - a * c) ** 2 + (m.N - m.M), a * a * m.M * c
        W = self.matrix
        B = np.eye(m.N) - W @ m.dense
        return float(np.sum(B * B)), float(np.sum(W * W))

    def to_dense(self):
        m = self.model
        if self.gains is not None:
            return (m.right_t.T * self.gains) @ m.left.T
        if self.scale is not None:
            return self.scale * m.dense.T
        return self.matrix


def base_matrix(kind, model, v2=1.0, sigma2=0.0, method="auto"):
    """Un-normalized estimator W-hat for ``kind`` in {MF, PINV, LMMSE}.

    ``method`` is "auto" (closed form for row-orthogonal A, else spectral),
    "spectral" or "dense".
    """
    model = as_model(model)
    if kind not in KINDS:
        raise ValueError(f"unknown linear estimator {kind!r}")
    if kind == LMMSE and not v2 > 0:
        raise ValueError("LMMSE needs v2 > 0")
    M, N = model.M, model.N

    if method == "auto" and model.is_row_orthogonal and M <= N:
        c = model.aat_scale
        scale = {MF: 1.0, PINV: 1.0 / c, LMMSE: v2 / (c * v2 + sigma2)}[kind]
        return LinearEstimator(model, scale=scale)

    if method in ("auto", "spectral") and M <= N:
        return LinearEstimator(model, gains=spectral_gains(kind, model.singulars, v2, sigma2))

    A = model.dense
    if kind == MF:
        return LinearEstimator(model, matrix=A.T.copy())
    if kind == PINV:
        if M <= N:
            gram = cho_factor(A @ A.T)
            return LinearEstimator(model, matrix=cho_solve(gram, A).T)
        gram = cho_factor(A.T @ A)
        return LinearEstimator(model, matrix=cho_solve(gram, A.T))
    gram = cho_factor(v2 * (A @ A.T) + sigma2 * np.eye(M))
    return LinearEstimator(model, matrix=v2 * cho_solve(gram, A).T)


@dataclass
class DecorrelatedLE:
    """W = N / tr(W-hat A) * W-hat together with tr(B B^T) and tr(W W^T)."""

    W: LinearEstimator
    trBB: float
    trWW: float
    N: int

    def apply(self, r):
        return self.W.apply(r)

    __call__ = apply

    def trace_residual(self):
        """tr(I - W A); zero up to rounding."""
        return self.N - self.W.trace_wa()


def decorrelate(What, model=None):
    """Rescale ``What`` so that tr(I - W A) = 0."""
    if not isinstance(What, LinearEstimator):
        What = LinearEstimator(as_model(model), matrix=np.asarray(What, dtype=float))
    tr = What.trace_wa()
    if tr == 0 or not np.isfinite(tr):
        raise ValueError("tr(W-hat A) is zero; estimator is degenerate")
    N = What.model.N
    W = What.scaled(N / tr)
    trBB, trWW = W.traces()
    return DecorrelatedLE(W, trBB, trWW, N)


def le_traces(le):
    """(tr(B B^T)/N, tr(W W^T)/N): the coefficients of v2 and sigma2 in tau2."""
    return le.trBB / le.N, le.trWW / le.N
