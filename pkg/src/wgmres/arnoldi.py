"""Weighted Arnoldi in transformed coordinates.

Only ``u_j = Q* v_j`` is stored, so the transform is applied twice per step
(once each way around the matvec) and never inside the orthogonalization
loop.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sparse import matvec
from .transform import adjoint, forward
from .weighting import InnerProduct

__all__ = ["ArnoldiDecomposition", "arnoldi_start", "arnoldi_extend", "apply_operator", "arnoldi_residual"]

BREAKDOWN_TOL = 1e-14


@dataclass
class ArnoldiDecomposition:
    """Columns ``U[:, :k+1]`` and extended Hessenberg ``H[:k+1, :k]``.

    Storage is preallocated for ``capacity`` columns.  The leading block of
    ``H`` may be full (after a deflated restart); columns appended by
    :func:`arnoldi_extend` are upper Hessenberg.
    """

    ip: InnerProduct
    U: np.ndarray
    H: np.ndarray
    k: int = 0
    max_raw_norm: float = 0.0
    breakdown: bool = False

    @property
    def basis_t(self):
        return self.U[:, : self.k + 1]

    @property
    def hess(self):
        return self.H[: self.k + 1, : self.k]

    @property
    def capacity(self):
        return self.U.shape[1]

    @classmethod
    def allocate(cls, ip, capacity):
        n = ip.dim
        return cls(ip, np.zeros((n, capacity)), np.zeros((capacity, capacity - 1)))

    @classmethod
    def from_basis(cls, ip, basis_t, hess, capacity):
        """Seed with ``k+1`` W-orthonormal columns and a (k+1) x k matrix."""
        basis_t = np.asarray(basis_t, dtype=float)
        hess = np.asarray(hess, dtype=float)
        k = basis_t.shape[1] - 1
        if hess.shape != (k + 1, k):
            raise ValueError("hess must have shape (k+1, k)")
        if capacity < k + 1:
            raise ValueError("capacity too small for the seed basis")
        state = cls.allocate(ip, capacity)
        state.U[:, : k + 1] = basis_t
        state.H[: k + 1, :k] = hess
        state.k = k
        return state


def apply_operator(A, transform, u_t):
    """Return ``Q* A Q u``."""
    return forward(transform, matvec(A, adjoint(transform, u_t)))


def arnoldi_start(A, ip: InnerProduct, r0, capacity=None, transformed=False) -> ArnoldiDecomposition:
    """Initialize with ``u_1 = Q* r0 / ||r0||_W``.

    ``r0`` is in original coordinates unless ``transformed`` is set.
    """
    r_t = np.asarray(r0, dtype=float) if transformed else forward(ip.transform, r0)
    beta = ip.norm(r_t)
    if beta == 0:
        raise ValueError("cannot start Arnoldi from a zero vector")
    state = ArnoldiDecomposition.allocate(ip, capacity or 2)
    state.U[:, 0] = r_t / beta
    return state


def arnoldi_extend(A, ip: InnerProduct, state: ArnoldiDecomposition):
    """Append one Arnoldi step; returns the new Hessenberg column.

    Modified Gram-Schmidt in the W-inner product followed by one full
    reorthogonalization pass.  On (near) breakdown the column is filled, the
    basis is not extended and ``state.breakdown`` is set.
    """
    if state.breakdown:
        raise RuntimeError("decomposition already broke down")
    k = state.k
    if k + 2 > state.capacity:
        raise RuntimeError("Arnoldi storage is full")
    w = ip.weights
    u = apply_operator(A, ip.transform, state.U[:, k])
    raw_norm = ip.norm(u)
    state.max_raw_norm = max(state.max_raw_norm, raw_norm)

    h = np.zeros(k + 2)
    for _ in range(2):
        for j in range(k + 1):
            uj = state.U[:, j]
            c = np.dot(w * u, uj)
            u -= c * uj
            h[j] += c
    h[k + 1] = ip.norm(u)
    state.H[: k + 2, k] = h
    if h[k + 1] <= BREAKDOWN_TOL * state.max_raw_norm:
        state.H[k + 1, k] = 0.0
        state.breakdown = True
        state.k = k + 1
        return state.H[: k + 2, k].copy()
    state.U[:, k + 1] = u / h[k + 1]
    state.k = k + 1
    return h


def arnoldi_residual(A, transform, basis_t, hess):
    """Frobenius norm of ``(Q* A Q) U_k - U_{k+1} H``."""
    k = hess.shape[1]
    if k == 0:
        return 0.0
    lhs = np.column_stack([apply_operator(A, transform, basis_t[:, j]) for j in range(k)])
    return float(np.linalg.norm(lhs - basis_t[:, : k + 1] @ hess))
