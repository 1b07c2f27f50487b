"""GMRES with deflated restarting, allowing the inner product to change at restarts."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular

from .arnoldi import ArnoldiDecomposition, arnoldi_start
from .gmres import (
    CycleInfo,
    SolveConfig,
    SolveHistory,
    _check_system,
    _residual,
    build_inner_product,
    run_cycle,
)
from .sparse import make_rng, matvec
from .transform import adjoint, forward
from .weighting import InnerProduct

__all__ = [
    "DeflationBasis",
    "DeflationError",
    "RestartInfo",
    "harmonic_ritz",
    "harmonic_ritz_vectors",
    "dr_restart",
    "reweight_deflation",
    "solve_dr",
]


class DeflationError(RuntimeError):
    """The deflation space could not be formed or carried to a new inner product."""


@dataclass
class DeflationBasis:
    """``A V_k = V_{k+1} H`` with ``U = Q* V`` stored; the residual is ``V_{k+1} c``."""

    basis_t: np.ndarray
    hess: np.ndarray
    rhs_coeffs: np.ndarray

    @property
    def k(self):
        return self.hess.shape[1]


@dataclass
class RestartInfo:
    cycle: int
    x: np.ndarray
    residual: np.ndarray
    old_ip: InnerProduct
    new_ip: InnerProduct
    before: DeflationBasis
    after: DeflationBasis
    ritz_values: np.ndarray


def harmonic_ritz(hess):
    """Harmonic Ritz values and coefficient vectors of an (m+1) x m matrix.

    Solves ``(H_m + H_m^{-T} h^T h) g = theta g`` where ``h`` is the last
    row of ``hess``.  The values are the roots of the residual polynomial of
    the least-squares problem ``min ||beta e_1 - hess y||``.  Returns
    ``(values, vectors)`` from a real dense eigensolve, so complex values
    come in conjugate pairs.
    """
    hess = np.asarray(hess, dtype=float)
    m = hess.shape[1]
    if hess.shape != (m + 1, m) or m == 0:
        raise ValueError("hess must have shape (m+1, m) with m >= 1")
    Hm = hess[:m]
    h = hess[m]
    try:
        f = np.linalg.solve(Hm.T, h)
    except np.linalg.LinAlgError:
        raise DeflationError("leading block is singular") from None
    if np.linalg.cond(Hm) > 1e14:
        raise DeflationError("leading block is numerically singular")
    values, vectors = np.linalg.eig(Hm + np.outer(f, h))
    return values, vectors


def _select(values, vectors, k, m):
    """Real coefficient columns spanning the k smallest-magnitude harmonic Ritz vectors."""
    order = np.argsort(np.abs(values), kind="stable")
    cols = []
    chosen = []
    used = set()
    for i in order:
        if len(cols) >= k:
            break
        if i in used:
            continue
        used.add(i)
        theta = values[i]
        g = vectors[:, i]
        if abs(theta.imag) <= 1e-12 * max(abs(theta), 1.0):
            cols.append(np.real(g))
            chosen.append(theta.real)
        else:
            partner = min((j for j in order if j not in used),
                          key=lambda j: abs(values[j] - np.conj(theta)), default=None)
            if partner is not None:
                used.add(partner)
            if len(cols) + 2 > m - 1:
                break
            cols.append(np.real(g))
            cols.append(np.imag(g))
            chosen.extend([theta, np.conj(theta)])
    if not cols:
        raise DeflationError("no harmonic Ritz vectors selected")
    return np.column_stack(cols), np.array(chosen)


def harmonic_ritz_vectors(basis_t, hess, transform, count=None):
    """Harmonic Ritz values and the corresponding approximate eigenvectors of ``A``.

    Vectors are returned in original coordinates with unit 2-norm, ordered by
    increasing value magnitude.
    """
    values, vectors = harmonic_ritz(hess)
    m = hess.shape[1]
    order = np.argsort(np.abs(values), kind="stable")[: count or m]
    out = []
    for i in order:
        g = vectors[:, i]
        v = adjoint(transform, basis_t[:, :m] @ g.real)
        if np.iscomplexobj(g) and np.any(g.imag):
            v = v + 1j * adjoint(transform, basis_t[:, :m] @ g.imag)
        out.append(v / np.linalg.norm(v))
    return values[order], out


def dr_restart(basis_t, hess, c, y, k) -> DeflationBasis:
    """Compress a finished cycle to a k-dimensional harmonic Ritz space plus the residual.

    ``basis_t`` is ``U_{m+1}``, ``hess`` the (m+1) x m matrix, ``c`` the
    cycle's right-hand side coefficients (length m+1) and ``y`` its
    least-squares solution.
    """
    hess = np.asarray(hess, dtype=float)
    m = hess.shape[1]
    if not 1 <= k < m:
        raise ValueError("need 1 <= k < m")
    c = np.asarray(c, dtype=float)
    chat = c - hess @ y

    values, vectors = harmonic_ritz(hess)
    G, _ = _select(values, vectors, k, m)
    M = np.zeros((m + 1, G.shape[1] + 1))
    M[:m, :-1] = G
    M[:, -1] = chat
    P, Rf = np.linalg.qr(M)
    diag = np.abs(np.diag(Rf))
    keep = diag > 1e-12 * diag.max()
    if not keep[-1]:
        raise DeflationError("residual lies in the span of the harmonic Ritz vectors")
    if not keep.all():
        warnings.warn(f"dropping {int((~keep).sum())} dependent harmonic Ritz vector(s)", RuntimeWarning)
        P, _ = np.linalg.qr(M[:, keep])
    kk = P.shape[1] - 1
    P[m, :kk] = 0.0  # exact zeros where the Ritz columns have none
    Pk = P[:m, :kk]
    return DeflationBasis(
        basis_t=basis_t[:, : m + 1] @ P,
        hess=P.T @ hess @ Pk,
        rhs_coeffs=P.T @ chat,
    )


def reweight_deflation(basis: DeflationBasis, new_ip: InnerProduct) -> DeflationBasis:
    """Carry ``A V_k = V_{k+1} H`` to a new inner product via Cholesky of the Gram matrix."""
    U = basis.basis_t
    k = basis.k
    M = new_ip.gram(U)
    M = 0.5 * (M + M.T)
    try:
        R = cholesky(M, lower=False)
    except LinAlgError:
        raise DeflationError("Gram matrix is not positive definite") from None
    d = np.abs(np.diag(R)) ** 2
    if d.min() <= 1e-14 * d.max():
        raise DeflationError("Gram matrix is numerically singular")
    U_new = solve_triangular(R, U.T, trans="T", lower=False).T
    RH = R @ basis.hess
    H_new = solve_triangular(R[:k, :k], RH.T, trans="T", lower=False).T
    return DeflationBasis(U_new, H_new, R @ basis.rhs_coeffs)


def solve_dr(A, b, x0=None, config: SolveConfig | None = None,
             callback: Callable[[CycleInfo], None] | None = None,
             on_restart: Callable[[RestartInfo], None] | None = None) -> SolveHistory:
    """GMRES-DR(m, k), optionally with residual or random weighting.

    The first cycle is an ordinary cycle of length ``m``.  Each later cycle
    keeps ``k`` harmonic Ritz vectors (smallest magnitude) plus the residual,
    converts them to the new inner product, and adds ``m - k`` Arnoldi
    steps.  If the deflation space cannot be built the cycle falls back to a
    plain restart.
    """
    config = config or SolveConfig(method="gmres-dr", m=20, k_deflate=5)
    if not 1 <= config.k_deflate < config.m:
        raise ValueError("deflated restarting needs 1 <= k_deflate < m")
    b, x = _check_system(A, b, x0)
    n = A.nrows
    m, k = config.m, config.k_deflate
    transform = config.make_transform(n)
    strategy = config.weight_strategy()
    rng = make_rng(config.seed)

    r = _residual(A, b, x)
    hist = SolveHistory(r0_norm=float(np.linalg.norm(r)))
    if hist.r0_norm == 0:
        hist.record(0, 0, 0.0, 0.0)
        hist.converged = True
        hist.final_x = x
        hist.final_resid2 = 0.0
        return hist
    stop_abs = config.tol * hist.r0_norm

    matvecs = 0
    cycle = 0
    prev = None  # (arn, c, result, ip) of the last full cycle
    while True:
        cycle += 1
        r_t = forward(transform, r)
        ip = build_inner_product(config, strategy, transform, r, r_t, rng)
        budget = config.max_matvec - matvecs

        arn = None
        if prev is not None:
            p_arn, p_c, p_res, p_ip = prev
            try:
                before = dr_restart(p_arn.U[:, : m + 1], p_arn.H[: m + 1, :m], p_c, p_res.y, k)
                after = before if ip.same_weights(p_ip) else reweight_deflation(before, ip)
            except DeflationError as exc:
                warnings.warn(f"cycle {cycle}: deflation failed ({exc}); plain restart", RuntimeWarning)
            else:
                if on_restart is not None:
                    ritz = harmonic_ritz(p_arn.H[: m + 1, :m])[0]
                    on_restart(RestartInfo(cycle, x.copy(), r.copy(), p_ip, ip, before, after, ritz))
                arn = ArnoldiDecomposition.from_basis(ip, after.basis_t, after.hess, m + 1)
                c = after.rhs_coeffs
                steps = min(m - after.k, budget)
        if arn is None:
            beta = ip.norm(r_t)
            if cycle == 1:
                hist.record(0, 0, hist.r0_norm, beta)
            if beta == 0:
                break
            arn = arnoldi_start(A, ip, r_t, capacity=m + 1, transformed=True)
            c = np.array([beta])
            steps = min(m, budget)
        if steps <= 0:
            break
        hist.cycle_bounds.append((ip.s_min, ip.s_max))

        def on_step(resid2, residW, _cycle=cycle):
            nonlocal matvecs
            matvecs += 1
            hist.record(matvecs, _cycle, resid2, residW)

        res = run_cycle(A, ip, arn, c, steps, stop_abs, on_step)
        p = len(res.y)
        if p:
            d = adjoint(transform, arn.U[:, :p] @ res.y)
            x = x + d
            # update through the correction; b - A x would cancel against b
            r = r - matvec(A, d)
        c_full = np.zeros(arn.k + 1)
        c_full[: len(c)] = c
        if callback is not None:
            callback(CycleInfo(cycle, matvecs, x.copy(), r.copy(), ip, arn.basis_t.copy(),
                               arn.hess.copy(), res.y, res.z))
        if res.converged:
            hist.converged = True
            break
        if matvecs >= config.max_matvec:
            break
        prev = (arn, c_full, res, ip) if (arn.k == m and not res.breakdown) else None

    hist.final_x = x
    hist.final_resid2 = float(np.linalg.norm(_residual(A, b, x)))
    return hist
