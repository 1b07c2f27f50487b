"""Restarted GMRES in an inner product that may change at every restart."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_triangular

from .arnoldi import ArnoldiDecomposition, arnoldi_extend, arnoldi_start
from .sparse import make_rng, matvec
from .transform import Transform, TransformKind, adjoint, forward
from .weighting import WEIGHT_FLOOR, InnerProduct, WeightKind, WeightStrategy

__all__ = [
    "Method",
    "SolveConfig",
    "SolveHistory",
    "CycleInfo",
    "GivensLeastSquares",
    "solve",
    "run_cycle",
    "gmres1_root",
    "residual_eigencomponents",
]


class Method(str, enum.Enum):
    GMRES = "gmres"
    WGMRES = "wgmres"
    WGMRES_DCT = "wgmres-dct"
    GMRES_DR = "gmres-dr"
    WGMRES_DR = "wgmres-dr"
    WGMRES_DR_DCT = "wgmres-dr-dct"

    @property
    def weighted(self):
        return self in (Method.WGMRES, Method.WGMRES_DCT, Method.WGMRES_DR, Method.WGMRES_DR_DCT)

    @property
    def cosine(self):
        return self in (Method.WGMRES_DCT, Method.WGMRES_DR_DCT)

    @property
    def deflated(self):
        return self in (Method.GMRES_DR, Method.WGMRES_DR, Method.WGMRES_DR_DCT)


@dataclass(frozen=True)
class SolveConfig:
    """Parameters of one solve.

    ``transform`` overrides the coordinate transform implied by ``method``;
    ``weight_source`` chooses whether residual weights come from the
    transformed residual ``Q* r`` (default) or from ``r`` itself.
    """

    method: Method = Method.GMRES
    m: int = 20
    k_deflate: int = 0
    power: float = 1.0
    tol: float = 1e-8
    max_matvec: int = 20000
    seed: int = 0
    weight_floor: float = WEIGHT_FLOOR
    random_weight_range: Optional[tuple] = None
    weight_source: str = "transformed"
    transform: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.m < 1:
            raise ValueError("restart length m must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_matvec < 0:
            raise ValueError("max_matvec must be nonnegative")
        if self.method.deflated and not (1 <= self.k_deflate < self.m):
            raise ValueError("deflated methods need 1 <= k_deflate < m")
        if self.weight_source not in ("transformed", "raw"):
            raise ValueError("weight_source must be 'transformed' or 'raw'")
        if self.random_weight_range is not None:
            lo, hi = self.random_weight_range
            object.__setattr__(self, "random_weight_range", (float(lo), float(hi)))

    def make_transform(self, n) -> Transform:
        kind = self.transform or (TransformKind.COSINE if self.method.cosine else TransformKind.IDENTITY)
        return Transform(TransformKind(kind), n)

    def weight_strategy(self) -> WeightStrategy:
        if self.random_weight_range is not None:
            lo, hi = self.random_weight_range
            return WeightStrategy(WeightKind.RANDOM, lo=lo, hi=hi, floor=self.weight_floor)
        if self.method.weighted:
            return WeightStrategy(WeightKind.RESIDUAL, power=self.power, floor=self.weight_floor)
        return WeightStrategy(WeightKind.EUCLIDEAN)


@dataclass
class SolveHistory:
    """Per-matvec convergence record.

    ``records`` rows are ``(matvec, cycle, resid2, residW)`` with absolute
    norms; row 0 is the initial residual.  ``cycle_bounds[c-1]`` holds the
    extreme square-root weights ``(s_min, s_max)`` used in cycle ``c``.
    """

    r0_norm: float
    records: list = field(default_factory=list)
    cycle_bounds: list = field(default_factory=list)
    converged: bool = False
    final_x: Optional[np.ndarray] = None
    final_resid2: float = math.nan

    def record(self, matvec, cycle, resid2, residW):
        self.records.append((int(matvec), int(cycle), float(resid2), float(residW)))

    @property
    def matvecs(self):
        return self.records[-1][0] if self.records else 0

    @property
    def cycles(self):
        return len(self.cycle_bounds)

    def as_array(self):
        return np.array(self.records, dtype=float).reshape(-1, 4)

    def relative(self):
        """Records with both norms divided by ``||r0||_2``."""
        a = self.as_array()
        if self.r0_norm > 0:
            a[:, 2:] /= self.r0_norm
        return a

    @property
    def final_rel_resid2(self):
        return self.final_resid2 / self.r0_norm if self.r0_norm > 0 else 0.0


@dataclass
class CycleInfo:
    """State handed to a solve callback at the end of each cycle."""

    cycle: int
    matvecs: int
    x: np.ndarray
    residual: np.ndarray
    inner_product: InnerProduct
    basis_t: np.ndarray
    hess: np.ndarray
    y: np.ndarray
    coeffs: np.ndarray


class GivensLeastSquares:
    """Progressive QR of an extended Hessenberg-like matrix by Givens rotations.

    Solves ``min ||c - H y||_2`` as columns of ``H`` arrive.  Columns may be
    full in their leading rows (deflated restart); every entry below the
    diagonal is annihilated from the bottom up.
    """

    def __init__(self, c, capacity):
        self.g = np.zeros(capacity + 1)
        self.g[: len(c)] = c
        self.R = np.zeros((capacity + 1, capacity))
        self.rotations = []
        self.ncols = 0

    def add_column(self, col):
        j = self.ncols
        h = np.zeros(self.R.shape[0])
        h[: len(col)] = col
        for i, cs, sn in self.rotations:
            h[i], h[i + 1] = cs * h[i] + sn * h[i + 1], -sn * h[i] + cs * h[i + 1]
        last = max(len(col) - 1, j + 1)
        for i in range(last - 1, j - 1, -1):
            a, b = h[i], h[i + 1]
            if b == 0.0:
                continue
            r = math.hypot(a, b)
            cs, sn = a / r, b / r
            h[i], h[i + 1] = r, 0.0
            g = self.g
            g[i], g[i + 1] = cs * g[i] + sn * g[i + 1], -sn * g[i] + cs * g[i + 1]
            self.rotations.append((i, cs, sn))
        self.R[:, j] = h
        self.ncols = j + 1
        return abs(self.g[j + 1])

    @property
    def residual_norm(self):
        return abs(self.g[self.ncols])

    def solution(self):
        p = self.ncols
        if p == 0:
            return np.zeros(0)
        return solve_triangular(self.R[:p, :p], self.g[:p])

    def residual_coeffs(self):
        """Coefficient vector ``c - H y`` of length ``ncols + 1``."""
        p = self.ncols
        z = np.zeros(self.R.shape[0])
        z[p] = self.g[p]
        for i, cs, sn in reversed(self.rotations):
            z[i], z[i + 1] = cs * z[i] - sn * z[i + 1], sn * z[i] + cs * z[i + 1]
        return z[: p + 1]


@dataclass
class CycleResult:
    y: np.ndarray
    z: np.ndarray
    steps: int
    converged: bool
    breakdown: bool


def run_cycle(A, ip, arn: ArnoldiDecomposition, c, steps, stop_abs, on_step=None) -> CycleResult:
    """Advance a (possibly pre-seeded) decomposition by up to ``steps`` matvecs.

    ``c`` holds the coefficients of the cycle's starting residual in the
    current basis.  ``on_step(resid2, residW)`` is called after every matvec.
    Stops early once the 2-norm residual estimate drops to ``stop_abs``.
    """
    capacity = arn.capacity - 1
    ls = GivensLeastSquares(c, capacity)
    for j in range(arn.k):
        ls.add_column(arn.H[: arn.k + 1, j])
    converged = False
    done = 0
    while done < steps and not arn.breakdown:
        col = arnoldi_extend(A, ip, arn)
        residW = ls.add_column(col)
        done += 1
        z = ls.residual_coeffs()
        resid2 = float(np.linalg.norm(arn.U[:, : arn.k + 1] @ z))
        if on_step is not None:
            on_step(resid2, residW)
        if resid2 <= stop_abs:
            converged = True
            break
    return CycleResult(ls.solution(), ls.residual_coeffs(), done, converged, arn.breakdown)


def _residual(A, b, x):
    return b - matvec(A, x)


def _check_system(A, b, x0):
    if A.nrows != A.ncols:
        raise ValueError("matrix must be square")
    b = np.asarray(b, dtype=float)
    if b.shape != (A.nrows,):
        raise ValueError("right-hand side has wrong dimension")
    x = np.zeros(A.nrows) if x0 is None else np.array(x0, dtype=float)
    if x.shape != (A.nrows,):
        raise ValueError("initial guess has wrong dimension")
    return b, x


def build_inner_product(config, strategy, transform, r, r_t, rng):
    source = r_t if config.weight_source == "transformed" else r
    return strategy.build(transform, residual_t=source, rng=rng)


def solve(A, b, x0=None, config: SolveConfig | None = None,
          callback: Callable[[CycleInfo], None] | None = None) -> SolveHistory:
    """Restarted (weighted) GMRES; deflated methods are delegated to ``solve_dr``.

    The inner product for every cycle, including the first, is built from the
    residual at the start of that cycle.  Convergence is tested on the 2-norm
    residual after every matvec.  The residual recomputed with one matvec between
    cycles is not counted as a matvec.
    """
    config = config or SolveConfig()
    if config.method.deflated:
        from .gmres_dr import solve_dr

        return solve_dr(A, b, x0, config, callback=callback)

    b, x = _check_system(A, b, x0)
    n = A.nrows
    transform = config.make_transform(n)
    strategy = config.weight_strategy()
    rng = make_rng(config.seed)

    r = _residual(A, b, x)
    hist = SolveHistory(r0_norm=float(np.linalg.norm(r)))
    stop_abs = config.tol * hist.r0_norm
    if hist.r0_norm == 0:
        hist.record(0, 0, 0.0, 0.0)
        hist.converged = True
        hist.final_x = x
        hist.final_resid2 = 0.0
        return hist

    matvecs = 0
    cycle = 0
    while True:
        cycle += 1
        r_t = forward(transform, r)
        ip = build_inner_product(config, strategy, transform, r, r_t, rng)
        beta = ip.norm(r_t)
        if cycle == 1:
            hist.record(0, 0, hist.r0_norm, beta)
        steps = min(config.m, config.max_matvec - matvecs)
        if steps <= 0 or beta == 0:
            break
        hist.cycle_bounds.append((ip.s_min, ip.s_max))

        arn = arnoldi_start(A, ip, r_t, capacity=config.m + 1, transformed=True)
        c = np.zeros(1)
        c[0] = beta

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
        if callback is not None:
            callback(CycleInfo(cycle, matvecs, x.copy(), r.copy(), ip, arn.basis_t.copy(),
                               arn.hess.copy(), res.y, res.z))
        if res.converged:
            hist.converged = True
            break
        if matvecs >= config.max_matvec:
            break

    hist.final_x = x
    hist.final_resid2 = float(np.linalg.norm(_residual(A, b, x)))
    return hist


def gmres1_root(lam: float, beta: float, weighted: bool = False) -> float:
    """Root of the one-step residual polynomial for ``diag(lam, 1)``, start ``[1, beta]``.

    Unweighted: ``(lam^2 + beta^2) / (lam + beta^2)``; with residual
    weighting the ``beta^2`` terms become ``|beta|^3``.
    """
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    t = abs(beta) ** 3 if weighted else beta * beta
    den = lam + t
    if den == 0:
        raise ZeroDivisionError("root undefined: lambda + beta term vanishes")
    return (lam * lam + t) / den


def residual_eigencomponents(A_diag, r):
    """Magnitudes of the residual's components along the eigenvectors of a diagonal matrix."""
    A_diag = np.asarray(A_diag)
    r = np.asarray(r, dtype=float)
    if A_diag.shape != r.shape:
        raise ValueError("dimension mismatch")
    return np.abs(r)
