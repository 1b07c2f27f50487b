"""Eigenvector localization, residual-polynomial roots and norm-bound checks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gmres_dr import harmonic_ritz
from .sparse import EigenPair
from .transform import Transform, forward

__all__ = [
    "LocalizationReport",
    "loc_p",
    "localization_report",
    "transform_eigvecs",
    "cycle_poly_roots",
    "sandwich_check",
    "read_eigvecs_file",
    "write_eigvecs_file",
]


@dataclass(frozen=True)
class LocalizationReport:
    p_values: np.ndarray
    loc_values: np.ndarray


def _vectors(eigvecs):
    return [np.asarray(getattr(v, "vector", v)) for v in eigvecs]


def loc_p(eigvecs, p: int) -> float:
    """Mass of the first ``p`` eigenvectors held in their ``p`` largest entries.

    ``eigvecs`` are unit vectors ordered by increasing eigenvalue magnitude.
    Returns ``sqrt(sum_j ||v_j^(p)||^2 / p)``, which lies in ``(0, 1]``.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    vecs = _vectors(eigvecs)
    if p > len(vecs):
        raise ValueError("p exceeds the number of eigenvectors")
    total = 0.0
    for v in vecs[:p]:
        mag2 = np.abs(v) ** 2
        if abs(mag2.sum() - 1.0) > 1e-8 * 2:
            raise ValueError("eigenvectors must have unit 2-norm")
        # stable sort keeps the lowest index first among equal magnitudes
        top = np.argsort(-mag2, kind="stable")[:p]
        total += mag2[top].sum()
    return float(np.sqrt(total / p))


def localization_report(eigvecs, p_values) -> LocalizationReport:
    p_values = np.asarray(list(p_values), dtype=int)
    return LocalizationReport(p_values, np.array([loc_p(eigvecs, int(p)) for p in p_values]))


def transform_eigvecs(eigvecs, t: Transform):
    """Express eigenvectors in transformed coordinates (``Q* v``)."""
    out = []
    for v in _vectors(eigvecs):
        if v.shape != (t.dim,):
            raise ValueError("dimension mismatch")
        if np.iscomplexobj(v):
            out.append(forward(t, v.real) + 1j * forward(t, v.imag))
        else:
            out.append(forward(t, v))
    return out


def cycle_poly_roots(hess):
    """Roots of a cycle's residual polynomial (harmonic Ritz values), sorted by magnitude."""
    values, _ = harmonic_ritz(hess)
    values = np.asarray(values)
    if np.all(values.imag == 0):
        values = values.real
    return values[np.argsort(np.abs(values), kind="stable")]


def sandwich_check(history, s_min=None, s_max=None, rtol=1e-10) -> bool:
    """Check ``residW / s_max <= resid2 <= residW / s_min`` for every in-cycle record.

    Without explicit bounds the per-cycle extremes stored in the history are
    used.  Record 0 (before any matvec) is skipped.
    """
    bounds = history.cycle_bounds
    for mv, cycle, resid2, residW in history.records:
        if cycle == 0:
            continue
        lo, hi = (s_min, s_max) if s_min is not None else bounds[cycle - 1]
        if residW / hi > resid2 * (1 + rtol):
            return False
        if resid2 > residW / lo * (1 + rtol):
            return False
    return True


def read_eigvecs_file(path) -> list[EigenPair]:
    """Read ``n k`` then ``k`` lines of ``lambda v_1 ... v_n``; sorted by |lambda|."""
    with open(path) as fh:
        tokens = fh.read().split()
    try:
        n, k = int(tokens[0]), int(tokens[1])
    except (IndexError, ValueError):
        raise ValueError(f"{path}: malformed header, expected 'n k'") from None
    body = tokens[2:]
    if len(body) != k * (n + 1):
        raise ValueError(f"{path}: expected {k * (n + 1)} numbers after the header, found {len(body)}")
    try:
        data = np.array(body, dtype=float).reshape(k, n + 1)
    except ValueError:
        raise ValueError(f"{path}: non-numeric entry") from None
    pairs = []
    for row, (lam, *vec) in enumerate(data.tolist()):
        v = np.array(vec)
        nrm = np.linalg.norm(v)
        if abs(nrm - 1.0) > 1e-6:
            raise ValueError(f"{path}: vector {row + 1} has norm {nrm}, not 1")
        pairs.append(EigenPair(lam, v / nrm))
    pairs.sort(key=lambda pr: abs(pr.value))
    return pairs


def write_eigvecs_file(path, pairs):
    pairs = list(pairs)
    n = len(pairs[0].vector) if pairs else 0
    with open(path, "w") as fh:
        fh.write(f"{n} {len(pairs)}\n")
        for pr in pairs:
            fh.write(" ".join(repr(float(x)) for x in [pr.value, *pr.vector]) + "\n")
