"""Weighted inner products <x, y>_W = (S Q* y)^T (S Q* x) with S = diag(sqrt(w))."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .transform import Transform

__all__ = [
    "WEIGHT_FLOOR",
    "InnerProduct",
    "WeightKind",
    "WeightStrategy",
    "weights_from_residual",
    "random_weights",
    "ip_dot",
    "ip_norm",
    "euclidean",
]

WEIGHT_FLOOR = 1e-10


@dataclass(frozen=True)
class InnerProduct:
    """Diagonal weights ``w`` acting in the coordinates of ``transform``.

    All vectors handed to :meth:`dot` and :meth:`norm` are already in
    transformed coordinates.
    """

    transform: Transform
    weights: np.ndarray
    sqrt_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.shape != (self.transform.dim,):
            raise ValueError("weights must match the transform dimension")
        if not np.all(w > 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be positive and finite")
        s = np.sqrt(w)
        w.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "sqrt_weights", s)

    @property
    def dim(self):
        return self.transform.dim

    @property
    def is_unit(self):
        return bool(np.all(self.weights == 1.0))

    @property
    def s_min(self):
        return float(self.sqrt_weights.min())

    @property
    def s_max(self):
        return float(self.sqrt_weights.max())

    def dot(self, x_t, y_t):
        return ip_dot(self, x_t, y_t)

    def norm(self, x_t):
        return ip_norm(self, x_t)

    def gram(self, U):
        """Matrix of pairwise inner products of the columns of ``U``."""
        return U.T @ (self.weights[:, None] * U)

    def same_weights(self, other):
        return self.transform == other.transform and np.array_equal(self.weights, other.weights)


def euclidean(transform: Transform) -> InnerProduct:
    return InnerProduct(transform, np.ones(transform.dim))


class WeightKind(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    RESIDUAL = "residual"
    RANDOM = "random"


@dataclass(frozen=True)
class WeightStrategy:
    kind: WeightKind = WeightKind.EUCLIDEAN
    power: float = 1.0
    lo: float = 0.5
    hi: float = 1.5
    floor: float = WEIGHT_FLOOR

    def __post_init__(self):
        object.__setattr__(self, "kind", WeightKind(self.kind))
        if not np.isfinite(self.power) or self.power < 0:
            raise ValueError("weight power must be finite and nonnegative")
        if self.kind is WeightKind.RANDOM and not (0 <= self.lo < self.hi):
            raise ValueError("random weight range needs 0 <= lo < hi")

    def build(self, transform, residual_t=None, rng=None) -> InnerProduct:
        if self.kind is WeightKind.EUCLIDEAN:
            return euclidean(transform)
        if self.kind is WeightKind.RESIDUAL:
            return InnerProduct(transform, weights_from_residual(residual_t, self.power, self.floor))
        return InnerProduct(transform, random_weights(transform.dim, self.lo, self.hi, rng, self.floor))


def weights_from_residual(r_transformed, power=1.0, floor=WEIGHT_FLOOR) -> np.ndarray:
    """Residual-proportional weights ``clip((|r_j| / max|r|) ** power, floor, 1)``.

    ``power=1`` gives Essai's weighting, ``power=0`` the Euclidean inner
    product.  ``floor=0`` disables the lower bound (any zero weight is then
    rejected by :class:`InnerProduct`).
    """
    r = np.abs(np.asarray(r_transformed, dtype=float))
    rmax = r.max() if r.size else 0.0
    if not rmax > 0:
        raise ValueError("cannot derive weights from a zero residual")
    if power == 0:
        return np.ones_like(r)
    w = (r / rmax) ** power
    return np.clip(w, floor, 1.0)


def random_weights(n, lo, hi, rng, floor=WEIGHT_FLOOR) -> np.ndarray:
    """I.i.d. uniform weights on ``[lo, hi]``, floored at ``floor``."""
    if not (0 <= lo < hi):
        raise ValueError("need 0 <= lo < hi")
    w = rng.uniform(lo, hi, size=n)
    return np.maximum(w, floor)


def ip_dot(ip: InnerProduct, x_t, y_t) -> float:
    x_t = np.asarray(x_t, dtype=float)
    y_t = np.asarray(y_t, dtype=float)
    if x_t.shape != (ip.dim,) or y_t.shape != (ip.dim,):
        raise ValueError("dimension mismatch")
    return float(np.dot(ip.weights * x_t, y_t))


def ip_norm(ip: InnerProduct, x_t) -> float:
    x_t = np.asarray(x_t, dtype=float)
    if x_t.shape != (ip.dim,):
        raise ValueError("dimension mismatch")
    return float(np.linalg.norm(ip.sqrt_weights * x_t))

