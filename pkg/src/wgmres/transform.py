"""Unitary coordinate transforms used inside the weighted inner product.

The cosine transform is the orthonormal DCT-II (the matrix produced by
MATLAB's ``dct(eye(n))``)::

    y[k] = c[k] * sum_n x[n] * cos(pi * (2n + 1) * k / (2N)),   0-based,
    c[0] = sqrt(1/N),  c[k] = sqrt(2/N) otherwise.

Its adjoint is its inverse (an orthonormal DCT-III).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

__all__ = ["TransformKind", "Transform", "forward", "adjoint", "dct_naive", "idct_naive"]

# below this size the direct sum is used
NAIVE_CUTOFF = 16


class TransformKind(str, enum.Enum):
    IDENTITY = "identity"
    COSINE = "cosine"


@dataclass(frozen=True)
class Transform:
    kind: TransformKind
    dim: int
    _twiddle: np.ndarray = field(init=False, repr=False, compare=False)
    _scale: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", TransformKind(self.kind))
        if self.dim < 1:
            raise ValueError("transform dimension must be positive")
        N = self.dim
        if self.kind is TransformKind.COSINE:
            k = np.arange(N)
            twiddle = np.exp(-0.5j * np.pi * k / N)
            scale = np.full(N, np.sqrt(2.0 / N))
            scale[0] = np.sqrt(1.0 / N)
        else:
            twiddle = scale = np.zeros(0)
        twiddle.setflags(write=False)
        scale.setflags(write=False)
        object.__setattr__(self, "_twiddle", twiddle)
        object.__setattr__(self, "_scale", scale)

    @classmethod
    def identity(cls, n):
        return cls(TransformKind.IDENTITY, n)

    @classmethod
    def cosine(cls, n):
        return cls(TransformKind.COSINE, n)

    @property
    def is_identity(self):
        return self.kind is TransformKind.IDENTITY

    def forward(self, x):
        return forward(self, x)

    def adjoint(self, y):
        return adjoint(self, y)


def _check(t, x):
    x = np.asarray(x, dtype=float)
    if x.shape[0] != t.dim:
        raise ValueError(f"dimension mismatch: transform has dim {t.dim}, got {x.shape[0]}")
    return x


def forward(t: Transform, x) -> np.ndarray:
    """Apply Q* (analysis).  Accepts a vector or a matrix of column vectors."""
    x = _check(t, x)
    if t.is_identity:
        return x.copy()
    if t.dim <= NAIVE_CUTOFF:
        return dct_naive(x)
    # Makhoul: even samples ascending, odd samples descending, one complex FFT
    N = t.dim
    v = np.concatenate([x[0::2], x[1::2][::-1]], axis=0)
    V = np.fft.fft(v, axis=0)
    tw = t._twiddle.reshape((-1,) + (1,) * (x.ndim - 1))
    sc = t._scale.reshape(tw.shape)
    return sc * np.real(tw * V)


def adjoint(t: Transform, y) -> np.ndarray:
    """Apply Q (synthesis), the exact inverse of :func:`forward`."""
    y = _check(t, y)
    if t.is_identity:
        return y.copy()
    if t.dim <= NAIVE_CUTOFF:
        return idct_naive(y)
    N = t.dim
    shape = (-1,) + (1,) * (y.ndim - 1)
    Y = y / t._scale.reshape(shape)
    Y_rev = np.zeros_like(Y)
    Y_rev[1:] = Y[:0:-1]
    V = np.conj(t._twiddle).reshape(shape) * (Y - 1j * Y_rev)
    v = np.real(np.fft.ifft(V, axis=0))
    x = np.empty_like(v)
    half = (N + 1) // 2
    x[0::2] = v[:half]
    x[1::2] = v[half:][::-1]
    return x


def _cosine_matrix(N, rows=None):
    # reduce (2n+1)k modulo 4N so the cosine argument stays in [0, 2*pi)
    k = np.arange(N) if rows is None else np.asarray(rows)
    n = np.arange(N)
    phase = np.outer(k, 2 * n + 1) % (4 * N)
    c = np.cos(np.pi * phase / (2 * N))
    scale = np.where(k == 0, np.sqrt(1.0 / N), np.sqrt(2.0 / N))
    return scale[:, None] * c


def dct_naive(x, block=512) -> np.ndarray:
    """Direct O(N^2) evaluation of the orthonormal DCT-II (test oracle)."""
    x = np.asarray(x, dtype=float)
    N = x.shape[0]
    out = np.empty_like(x)
    for start in range(0, N, block):
        rows = np.arange(start, min(start + block, N))
        out[rows] = _cosine_matrix(N, rows) @ x
    return out


def idct_naive(y, block=512) -> np.ndarray:
    """Direct O(N^2) evaluation of the transpose of :func:`dct_naive`."""
    y = np.asarray(y, dtype=float)
    N = y.shape[0]
    out = np.zeros(y.shape, dtype=float)
    for start in range(0, N, block):
        rows = np.arange(start, min(start + block, N))
        out += _cosine_matrix(N, rows).T @ y[rows]
    return out
