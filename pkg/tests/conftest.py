import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

import wgmres.gmres as gmres_mod
import wgmres.gmres_dr as gmres_dr_mod
from wgmres.diagnostics import sandwich_check

# ---------------------------------------------------------------------------
# every SolveHistory built during a test is checked against the norm sandwich

_created = []
SANDWICH_STATS = {"histories": 0, "records": 0, "failures": 0}


@dataclass
class _TrackedHistory(gmres_mod.SolveHistory):
    def __post_init__(self):
        _created.append(self)


@pytest.fixture(autouse=True)
def _sandwich_guard(monkeypatch):
    monkeypatch.setattr(gmres_mod, "SolveHistory", _TrackedHistory)
    monkeypatch.setattr(gmres_dr_mod, "SolveHistory", _TrackedHistory)
    _created.clear()
    yield
    for hist in _created:
        SANDWICH_STATS["histories"] += 1
        SANDWICH_STATS["records"] += len(hist.records)
        if not sandwich_check(hist):
            SANDWICH_STATS["failures"] += 1
            pytest.fail("norm sandwich violated by a solve in this test")
    _created.clear()


# ---------------------------------------------------------------------------
# acceptance reporting

ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Record a named acceptance criterion; outcome taken from the test result."""

    def register(number, text):
        request.node._criterion = (number, text)

    return register


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    crit = getattr(item, "_criterion", None)
    if crit is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.skipped):
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        prev = ACCEPTANCE.get(crit)
        if prev in (None, "PASS") or status == "FAIL":
            ACCEPTANCE[crit] = status
    elif rep.when == "teardown" and rep.failed:
        ACCEPTANCE[crit] = "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    s = SANDWICH_STATS
    for (number, text), status in sorted(ACCEPTANCE.items()):
        if number == 7 and s["failures"]:
            status = "FAIL"
        terminalreporter.write_line(f"[{status}] {number:>2}. {text}")
    terminalreporter.write_line(
        f"norm sandwich: {s['histories']} solves, {s['records']} records, {s['failures']} violations"
    )


# ---------------------------------------------------------------------------
# shared helpers

def dense_gmres_history(A, b, m):
    """Textbook 2-norm GMRES, one cycle of m steps, zero initial guess.

    Builds the Krylov basis with plain modified Gram-Schmidt and solves each
    least-squares problem with ``numpy.linalg.lstsq``.  Returns residual
    norms for k = 0..m.
    """
    A = np.asarray(A, dtype=float)
    n = len(b)
    V = np.zeros((n, m + 1))
    H = np.zeros((m + 1, m))
    beta = np.linalg.norm(b)
    V[:, 0] = b / beta
    out = [beta]
    for k in range(m):
        w = A @ V[:, k]
        for j in range(k + 1):
            H[j, k] = V[:, j] @ w
            w = w - H[j, k] * V[:, j]
        H[k + 1, k] = np.linalg.norm(w)
        if H[k + 1, k] > 0:
            V[:, k + 1] = w / H[k + 1, k]
        e1 = np.zeros(k + 2)
        e1[0] = beta
        y = np.linalg.lstsq(H[: k + 2, : k + 1], e1, rcond=None)[0]
        out.append(np.linalg.norm(e1 - H[: k + 2, : k + 1] @ y))
    return np.array(out), H


def mm_path(name):
    """Locate a Matrix Market file by basename in $WGMRES_MM_DIR or tests/data."""
    dirs = [os.environ.get("WGMRES_MM_DIR"), Path(__file__).parent / "data"]
    for d in dirs:
        if not d:
            continue
        for suffix in (".mtx", ".MTX"):
            p = Path(d) / f"{name}{suffix}"
            if p.exists():
                return p
    return None


def fixed_weight_history(A, b, weights, m, cycles):
    """W-norm and 2-norm residuals of restarted GMRES with weights held fixed."""
    from wgmres.arnoldi import arnoldi_start
    from wgmres.gmres import run_cycle
    from wgmres.sparse import matvec
    from wgmres.transform import Transform
    from wgmres.weighting import InnerProduct

    n = len(b)
    ip = InnerProduct(Transform.identity(n), weights)
    x = np.zeros(n)
    r = np.array(b, dtype=float)
    resW, res2 = [ip.norm(r)], [np.linalg.norm(r)]
    for _ in range(cycles):
        arn = arnoldi_start(A, ip, r, capacity=m + 1)

        def step(r2, rw):
            res2.append(r2)
            resW.append(rw)

        out = run_cycle(A, ip, arn, np.array([ip.norm(r)]), m, 0.0, step)
        x = x + arn.U[:, : len(out.y)] @ out.y
        r = b - matvec(A, x)
        if out.breakdown:
            break
    return np.array(resW), np.array(res2)


def restarted_dense_gmres(A, b, m, cycles):
    """Restarted 2-norm GMRES built on :func:`dense_gmres_history`."""
    A = np.asarray(A, dtype=float)
    x = np.zeros(len(b))
    out = [np.linalg.norm(b)]
    for _ in range(cycles):
        r = b - A @ x
        norms, H, V, y = _dense_cycle(A, r, m)
        out.extend(norms[1:])
        x = x + V[:, : len(y)] @ y
        if len(y) < m:
            break
    return np.array(out)


def _dense_cycle(A, r, m):
    n = len(r)
    V = np.zeros((n, m + 1))
    H = np.zeros((m + 1, m))
    beta = np.linalg.norm(r)
    V[:, 0] = r / beta
    norms = [beta]
    y = np.zeros(0)
    for k in range(m):
        w = A @ V[:, k]
        for j in range(k + 1):
            H[j, k] = V[:, j] @ w
            w = w - H[j, k] * V[:, j]
        H[k + 1, k] = np.linalg.norm(w)
        e1 = np.zeros(k + 2)
        e1[0] = beta
        y = np.linalg.lstsq(H[: k + 2, : k + 1], e1, rcond=None)[0]
        norms.append(np.linalg.norm(e1 - H[: k + 2, : k + 1] @ y))
        if H[k + 1, k] <= 1e-14 * beta:
            break
        V[:, k + 1] = w / H[k + 1, k]
    return norms, H, V, y


def diagonal_poly_min(lam, d, m):
    """min over phi (deg <= m, phi(0)=1) of sum_j phi(lam_j)^2 d_j^2, by normal equations."""
    lam = np.asarray(lam, dtype=float)
    d = np.asarray(d, dtype=float)
    K = np.column_stack([lam ** k * d for k in range(1, m + 1)])
    a = np.linalg.solve(K.T @ K, -K.T @ d)
    return float(np.sum((d + K @ a) ** 2))


def stagnation_problem():
    A = np.array([[1.0, -4.0], [0.0, 5.0]])
    r0 = np.array([1.0, (5 + np.sqrt(5)) / 10])
    return A, r0


def restart_errors(A, info, r0_norm):
    """Measured invariant errors for one deflated restart (see ``solve_dr``'s ``on_restart``).

    The carried residual is compared with the true one relative to ``r0_norm``:
    once the residual is tiny the two differ by roundoff at the scale of ``b``.
    """
    from wgmres.arnoldi import arnoldi_residual
    from wgmres.transform import adjoint

    t = info.new_ip.transform
    out = {}
    for name, basis, ip in (("before", info.before, info.old_ip), ("after", info.after, info.new_ip)):
        G = ip.gram(basis.basis_t)
        out[f"gram_{name}"] = float(np.abs(G - np.eye(len(G))).max())
        out[f"relation_{name}"] = arnoldi_residual(A, t, basis.basis_t, basis.hess) / A.frobenius_norm()
    rep_before = adjoint(t, info.before.basis_t @ info.before.rhs_coeffs)
    rep_after = adjoint(t, info.after.basis_t @ info.after.rhs_coeffs)
    scale = np.linalg.norm(info.residual)
    out["residual_bookkeeping"] = float(np.linalg.norm(rep_before - info.residual) / r0_norm)
    out["reweight_invariance"] = float(np.linalg.norm(rep_after - rep_before) / scale)
    return out


RESTART_LIMITS = {
    "gram_before": 1e-8,
    "gram_after": 1e-8,
    "relation_before": 1e-8,
    "relation_after": 1e-8,
    "residual_bookkeeping": 1e-8,
    "reweight_invariance": 1e-10,
}
