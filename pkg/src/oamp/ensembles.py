"""Sensing-matrix ensembles and their singular structure.

Three families are provided: IID Gaussian (entries N(0, 1/M)), unitarily
invariant matrices with geometric singular values, and row-subsampled
orthogonal transforms (Haar, DCT, Hadamard) scaled so that A A^T = (N/M) I.

Matrices are wrapped in :class:`MatrixModel`, which carries matvecs, an
optional dense array, optional thin SVD factors and the eigenvalues of
A^T A (zero-padded to length N).
"""

import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.fft import dct, idct

__all__ = [
    "EnsembleSpec",
    "MatrixModel",
    "sample_matrix",
    "haar_orthogonal",
    "spectrum",
    "geometric_singular_values",
    "fwht",
    "save_matrix",
    "load_matrix",
]

IID_GAUSSIAN = "IIDGaussian"
GEOMETRIC = "GeometricConditioned"
PARTIAL_ORTHOGONAL = "PartialOrthogonal"

DENSE_LIMIT = 4096


@dataclass(frozen=True)
class EnsembleSpec:
    kind: str = IID_GAUSSIAN
    kappa: float = 1.0
    ortho_kind: str = "Haar"
    # "sum" normalizes sum(lambda) = N, "sum_squares" normalizes sum(lambda^2) = N
    normalization: str = "sum"
    # with exact_kappa the ratio is kappa^(1/(M-1)) so max/min equals kappa
    exact_kappa: bool = False

    def __post_init__(self):
        if self.kind not in (IID_GAUSSIAN, GEOMETRIC, PARTIAL_ORTHOGONAL):
            raise ValueError(f"unknown ensemble {self.kind!r}")
        if self.kappa < 1:
            raise ValueError(f"kappa must be >= 1, got {self.kappa}")
        if self.ortho_kind not in ("Haar", "DCT", "Hadamard"):
            raise ValueError(f"unknown orthogonal transform {self.ortho_kind!r}")
        if self.normalization not in ("sum", "sum_squares"):
            raise ValueError(f"unknown normalization {self.normalization!r}")

    @classmethod
    def iid_gaussian(cls):
        return cls(IID_GAUSSIAN)

    @classmethod
    def geometric(cls, kappa, **kw):
        return cls(GEOMETRIC, kappa=float(kappa), **kw)

    @classmethod
    def partial_orthogonal(cls, ortho_kind="Haar"):
        return cls(PARTIAL_ORTHOGONAL, ortho_kind=ortho_kind)

    @property
    def label(self):
        if self.kind == GEOMETRIC:
            return f"geometric(kappa={self.kappa:g})"
        if self.kind == PARTIAL_ORTHOGONAL:
            return f"partial-{self.ortho_kind}"
        return "iid-gaussian"


class MatrixModel:
    """A realized M x N sensing matrix.

    ``left`` (M x M), ``singulars`` (length M) and ``right_t`` (M x N, rows are
    right singular vectors) give the thin SVD ``A = left @ diag(s) @ right_t``.
    ``left=None`` means the identity. Any of these may be computed lazily.
    """

    def __init__(self, M, N, kind, *, dense=None, apply=None, apply_transpose=None,
                 left=None, singulars=None, right_t=None, spectrum=None,
                 aat_scale=None, label=None, materialize=None):
        self.M = int(M)
        self.N = int(N)
        self.kind = kind
        self.label = label or kind
        self._dense = dense
        self._apply = apply
        self._apply_t = apply_transpose
        self._left = left
        self._singulars = None if singulars is None else np.asarray(singulars, float)
        self._right_t = right_t
        self._spectrum = None if spectrum is None else np.asarray(spectrum, float)
        self._materialize = materialize
        # A A^T = aat_scale * I for row-orthogonal matrices
        self.aat_scale = aat_scale
        self._has_factors = self._singulars is not None

    # -- linear maps -------------------------------------------------------
    def apply(self, x):
        if self._apply is not None:
            return self._apply(x)
        return self.dense @ x

    def apply_transpose(self, y):
        if self._apply_t is not None:
            return self._apply_t(y)
        return self.dense.T @ y

    def __matmul__(self, x):
        return self.apply(x)

    @property
    def shape(self):
        return (self.M, self.N)

    @property
    def is_row_orthogonal(self):
        return self.aat_scale is not None

    @property
    def has_dense(self):
        return self._dense is not None

    @property
    def dense(self):
        if self._dense is None:
            if self._materialize is not None:
                if self.N > DENSE_LIMIT:
                    raise MemoryError(f"refusing to materialize N={self.N} > {DENSE_LIMIT}")
                self._dense = self._materialize()
            elif self._has_factors:
                self._dense = (self.left * self._singulars) @ self.right_t
            else:
                raise ValueError("matrix has no dense form")
        return self._dense

    # -- singular structure ------------------------------------------------
    def _factorize(self):
        A = self.dense
        if self.M <= self.N:
            w, vec = np.linalg.eigh(A @ A.T)
            order = np.argsort(w)[::-1]
            w, vec = np.clip(w[order], 0.0, None), vec[:, order]
            s = np.sqrt(w)
            self._left = vec
            self._singulars = s
            self._right_t = (vec.T @ A) / s[:, None]
        else:
            u, s, vt = np.linalg.svd(A, full_matrices=False)
            self._left, self._singulars, self._right_t = u, s, vt
        self._has_factors = True

    @property
    def singulars(self):
        if self._singulars is None:
            self._factorize()
        return self._singulars

    @property
    def left(self):
        if self._singulars is None:
            self._factorize()
        if self._left is None:
            return np.eye(len(self._singulars))
        return self._left

    @property
    def right_t(self):
        if self._singulars is None:
            self._factorize()
        if self._right_t is None:
            self._right_t = self.dense / self._singulars[:, None]
        return self._right_t

    @property
    def has_factors(self):
        return self._has_factors

    @property
    def spectrum(self):
        if self._spectrum is None:
            if self._singulars is not None:
                lam2 = self._singulars ** 2
            else:
                A = self.dense
                small = A @ A.T if self.M <= self.N else A.T @ A
                lam2 = np.clip(np.linalg.eigvalsh(small)[::-1], 0.0, None)
            out = np.zeros(self.N)
            k = min(len(lam2), self.N)
            out[:k] = lam2[:k]
            self._spectrum = out
        return self._spectrum

    @property
    def trace_ata(self):
        return float(np.sum(self.spectrum))

    def __repr__(self):
        return f"MatrixModel({self.label}, M={self.M}, N={self.N})"


def haar_orthogonal(n, rng):
    """Haar-distributed n x n orthogonal matrix.

    QR of a Gaussian matrix with the signs of diag(R) folded into Q; without
    the sign fix the distribution is not Haar.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def geometric_singular_values(M, N, kappa, normalization="sum", exact_kappa=False):
    """Singular values with lambda_i / lambda_{i+1} constant.

    The ratio is kappa^(1/M), or kappa^(1/(M-1)) with ``exact_kappa``.
    """
    steps = max(M - 1, 1) if exact_kappa else M
    lam = kappa ** (-np.arange(M) / steps)
    if normalization == "sum":
        return lam * (N / lam.sum())
    return lam * np.sqrt(N / np.sum(lam ** 2))


def fwht(x):
    """Orthonormal fast Walsh-Hadamard transform along the last axis."""
    x = np.array(x, dtype=float)
    n = x.shape[-1]
    if n & (n - 1):
        raise ValueError("length must be a power of two")
    lead = x.shape[:-1]
    h = 1
    while h < n:
        x = x.reshape(lead + (n // (2 * h), 2, h))
        a = x[..., 0, :] + x[..., 1, :]
        b = x[..., 0, :] - x[..., 1, :]
        x = np.stack((a, b), axis=-2)
        h *= 2
    return x.reshape(lead + (n,)) / np.sqrt(n)


def _partial_orthogonal(M, N, ortho_kind, rng):
    rows = np.sort(rng.choice(N, size=M, replace=False))
    scale = np.sqrt(N / M)
    spec = np.zeros(N)
    spec[:M] = N / M
    common = dict(singulars=np.full(M, scale), spectrum=spec, aat_scale=N / M,
                  label=f"partial-{ortho_kind}")

    if ortho_kind == "Haar":
        Ut = haar_orthogonal(N, rng).T
        right_t = Ut[rows]
        return MatrixModel(M, N, PARTIAL_ORTHOGONAL, dense=scale * right_t,
                           right_t=right_t, **common)

    if ortho_kind == "DCT":
        def fwd(x):
            return dct(x, norm="ortho")

        def inv(z):
            return idct(z, norm="ortho")
    else:
        if N & (N - 1):
            raise ValueError(f"Hadamard requires N a power of two, got {N}")
        fwd = inv = fwht

    def apply(x):
        return scale * fwd(x)[rows]

    def apply_transpose(y):
        z = np.zeros(N)
        z[rows] = y
        return scale * inv(z)

    def materialize():
        return scale * fwd(np.eye(N))[:, rows].T

    model = MatrixModel(M, N, PARTIAL_ORTHOGONAL, apply=apply,
                        apply_transpose=apply_transpose, materialize=materialize,
                        **common)
    model.rows = rows
    return model


def sample_matrix(spec, M, N, rng):
    """Sample an M x N matrix from ``spec``."""
    if not (1 <= M <= N):
        raise ValueError(f"need 1 <= M <= N, got M={M}, N={N}")
    if spec.kind == IID_GAUSSIAN:
        A = rng.standard_normal((M, N)) / np.sqrt(M)
        return MatrixModel(M, N, IID_GAUSSIAN, dense=A, label=spec.label)
    if spec.kind == PARTIAL_ORTHOGONAL:
        return _partial_orthogonal(M, N, spec.ortho_kind, rng)

    lam = geometric_singular_values(M, N, spec.kappa, spec.normalization, spec.exact_kappa)
    U = haar_orthogonal(N, rng)
    V = haar_orthogonal(M, rng)
    right_t = U.T[:M]
    spec_vals = np.zeros(N)
    spec_vals[:M] = lam ** 2
    return MatrixModel(M, N, GEOMETRIC, dense=(V * lam) @ right_t, left=V,
                       singulars=lam, right_t=right_t, spectrum=spec_vals,
                       label=spec.label)


def spectrum(model):
    """Eigenvalues of A^T A, length N, zeros included."""
    return model.spectrum


_MAGIC = b"OAMPMAT1"
_HEADER = struct.Struct("<8sqq24s")


def save_matrix(path, model):
    """Write ``model`` as a header (magic, M, N, kind) plus row-major float64."""
    A = np.ascontiguousarray(model.dense if isinstance(model, MatrixModel) else model,
                             dtype="<f8")
    kind = getattr(model, "label", "dense")
    M, N = A.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, M, N, kind.encode("ascii")[:24]))
        fh.write(A.tobytes(order="C"))


def load_matrix(path):
    with open(path, "rb") as fh:
        magic, M, N, kind = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a matrix file")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != M * N:
        raise ValueError(f"{path}: expected {M * N} values, found {data.size}")
    label = kind.rstrip(b"\0").decode("ascii")
    return MatrixModel(M, N, "Loaded", dense=data.reshape(M, N).copy(), label=label)
