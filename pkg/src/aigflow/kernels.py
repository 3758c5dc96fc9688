"""Gaussian kernels, pairwise kernel matrices and the MMD estimator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Cap on the number of float64 temporaries held by one pairwise block.
_BLOCK_ELEMENTS = 4_000_000


def as_points(a) -> np.ndarray:
    """Coerce to an (n, d) float array; 1-D input is read as n scalar points."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a[:, None]
    elif a.ndim != 2:
        raise ValueError(f"expected a point set of shape (n, d), got {a.shape}")
    return a


def _check_pair(A, B):
    A = as_points(A)
    B = as_points(B)
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    return A, B


def sq_dists(A, B) -> np.ndarray:
    """Pairwise squared Euclidean distances, computed from explicit differences."""
    A, B = _check_pair(A, B)
    n, d = A.shape
    rows = max(1, _BLOCK_ELEMENTS // max(1, B.shape[0] * d))
    if rows >= n:
        diff = A[:, None, :] - B[None, :, :]
        return np.einsum("ijk,ijk->ij", diff, diff)
    out = np.empty((n, B.shape[0]))
    for s in range(0, n, rows):
        diff = A[s:s + rows, None, :] - B[None, :, :]
        out[s:s + rows] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


@dataclass(frozen=True)
class GaussianKernel:
    """k(x, y) = c * exp(-|x - y|^2 / (2h)), with c = (2 pi h)^(-d/2) if normalized."""

    h: float = 1.0
    normalized: bool = False

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError(f"kernel bandwidth must be positive, got {self.h}")

    def constant(self, d: int) -> float:
        return (2.0 * math.pi * self.h) ** (-d / 2.0) if self.normalized else 1.0


def gram(kernel: GaussianKernel, A, B) -> np.ndarray:
    A, B = _check_pair(A, B)
    return kernel.constant(A.shape[1]) * np.exp(-sq_dists(A, B) / (2.0 * kernel.h))


def grad_gram(kernel: GaussianKernel, A, B) -> np.ndarray:
    """Gradient of k(x, B_j) in x at x = A_i, shape (|A|, |B|, d)."""
    A, B = _check_pair(A, B)
    K = gram(kernel, A, B)
    diff = A[:, None, :] - B[None, :, :]
    return -K[..., None] * diff / kernel.h


def _mean_gram(kernel: GaussianKernel, A, B) -> float:
    """Mean of the kernel matrix between A and B, accumulated blockwise.

    Uses |a|^2 + |b|^2 - 2 a.b for the distances so large sets go through
    matrix products; when ``A is B`` only the upper block triangle is formed.
    """
    n, d = A.shape
    c = kernel.constant(d)
    a2 = np.einsum("ij,ij->i", A, A)
    b2 = a2 if A is B else np.einsum("ij,ij->i", B, B)
    rows = max(1, _BLOCK_ELEMENTS // max(1, B.shape[0]))
    scale = -0.5 / kernel.h
    total = 0.0
    for s in range(0, n, rows):
        e = min(n, s + rows)
        if A is B:
            # diagonal block plus twice the blocks to its right
            D = a2[s:e, None] + b2[None, s:] - 2.0 * A[s:e] @ B[s:].T
            np.maximum(D, 0.0, out=D)
            D *= scale
            np.exp(D, out=D)
            diag = D[:, : e - s].sum()
            total += diag + 2.0 * D[:, e - s:].sum()
        else:
            D = a2[s:e, None] + b2[None, :] - 2.0 * A[s:e] @ B.T
            np.maximum(D, 0.0, out=D)
            D *= scale
            np.exp(D, out=D)
            total += D.sum()
    return c * total / (n * B.shape[0])


def mmd(Y, Z, kernel: GaussianKernel = GaussianKernel(1.0)) -> float:
    """Squared MMD between the empirical measures of ``Y`` and ``Z`` (V-statistic).

    Diagonal terms are included. Unequal set sizes are accepted.
    """
    Y, Z = _check_pair(Y, Z)
    if len(Y) == 0 or len(Z) == 0:
        raise ValueError("mmd needs nonempty point sets")
    val = _mean_gram(kernel, Y, Y) + _mean_gram(kernel, Z, Z) - 2.0 * _mean_gram(kernel, Y, Z)
    return max(val, 0.0)


class ReferenceMMD:
    """MMD against a fixed (possibly large) reference set.

    The reference self-similarity term is computed once, on first use.
    """

    def __init__(self, reference, kernel: GaussianKernel = GaussianKernel(1.0)):
        self.reference = as_points(reference)
        self.kernel = kernel
        self._self_term = None

    @property
    def self_term(self) -> float:
        if self._self_term is None:
            self._self_term = _mean_gram(self.kernel, self.reference, self.reference)
        return self._self_term

    def __call__(self, Y) -> float:
        Y, R = _check_pair(Y, self.reference)
        val = _mean_gram(self.kernel, Y, Y) + self.self_term - 2.0 * _mean_gram(self.kernel, Y, R)
        return max(val, 0.0)
