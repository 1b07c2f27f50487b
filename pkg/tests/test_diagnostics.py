import copy

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wgmres.diagnostics import (
    cycle_poly_roots,
    localization_report,
    loc_p,
    read_eigvecs_file,
    sandwich_check,
    transform_eigvecs,
    write_eigvecs_file,
)
from wgmres.gmres import SolveConfig, solve
from wgmres.sparse import EigenPair, SparseMatrix, gen_diag, laplacian_2d_eigenpairs, randn_vector
from wgmres.transform import Transform

EX2 = [0.01, 0.1, 3, 4, 5, 6, 7, 8, 9, 10]


def test_loc_identity_columns():
    vecs = list(np.eye(6))
    for p in range(1, 7):
        assert loc_p(vecs, p) == 1.0


def test_loc_flat_vector():
    n = 9
    assert loc_p([np.full(n, 1 / np.sqrt(n))], 1) == pytest.approx(1 / np.sqrt(n), rel=1e-15)


def test_loc_errors():
    with pytest.raises(ValueError):
        loc_p([np.array([1.0])], 0)
    with pytest.raises(ValueError):
        loc_p([np.array([1.0])], 2)
    with pytest.raises(ValueError):
        loc_p([np.array([1.0, 1.0])], 1)


def test_loc_accepts_eigenpairs():
    pairs = [EigenPair(1.0, np.array([0.6, 0.8])), EigenPair(2.0, np.array([0.8, -0.6]))]
    assert loc_p(pairs, 1) == pytest.approx(0.8)
    assert loc_p(pairs, 2) == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 25), st.integers(0, 2**32 - 1))
def test_loc_full_orthonormal_set_is_one(n, seed):
    Q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, n)))
    assert loc_p(list(Q.T), n) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 25), st.integers(0, 2**32 - 1))
def test_loc_permutation_covariant(n, seed):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    perm = rng.permutation(n)
    p = int(rng.integers(1, n + 1))
    assert loc_p(list(Q.T[:, perm]), p) == pytest.approx(loc_p(list(Q.T), p), rel=1e-12)


def test_report_range():
    pairs = laplacian_2d_eigenpairs(10, 12, randn_vector(100, 0))
    rep = localization_report(pairs, range(1, 13))
    assert np.all(rep.loc_values > 0) and np.all(rep.loc_values <= 1)


def test_transform_eigvecs():
    vecs = [v.vector for v in laplacian_2d_eigenpairs(8, 5, randn_vector(64, 0))]
    same = transform_eigvecs(vecs, Transform.identity(64))
    for a, b in zip(same, vecs):
        np.testing.assert_array_equal(a, b)
    for v in transform_eigvecs(vecs, Transform.cosine(64)):
        assert abs(np.linalg.norm(v) - 1) <= 1e-12
    z = transform_eigvecs([np.array([1, 1j]) / np.sqrt(2)], Transform.cosine(2))[0]
    assert abs(np.linalg.norm(z) - 1) <= 1e-12
    with pytest.raises(ValueError):
        transform_eigvecs([np.ones(3)], Transform.cosine(4))


def test_cycle_roots_gmres1_alternate():
    roots = []
    solve(gen_diag([2, 1]), np.ones(2), config=SolveConfig(m=1),
          callback=lambda ci: roots.append(cycle_poly_roots(ci.hess)[0]))
    assert roots[0] == pytest.approx(5 / 3, abs=1e-12)
    assert roots[1] == pytest.approx(4 / 3, abs=1e-12)


def test_cycle_roots_full_krylov_normal_matrix():
    rng = np.random.default_rng(1)
    n = 8
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = rng.uniform(1, 5, n)
    A = SparseMatrix.from_dense(Q @ np.diag(lam) @ Q.T)
    roots = []
    solve(A, rng.standard_normal(n), config=SolveConfig(m=n, tol=1e-15),
          callback=lambda ci: roots.append(cycle_poly_roots(ci.hess)))
    np.testing.assert_allclose(np.sort(roots[0]), np.sort(lam), atol=1e-8)


def test_cycle_roots_complex():
    H = np.array([[0.0, -1.0], [1.0, 0.0], [0.0, 0.0]])
    r = cycle_poly_roots(H)
    assert np.iscomplexobj(r)
    np.testing.assert_allclose(sorted(r.imag), [-1, 1])


def test_sandwich_euclidean_and_weighted():
    A = gen_diag(EX2)
    b = randn_vector(10, 3)
    h = solve(A, b, config=SolveConfig(m=3, max_matvec=60))
    assert sandwich_check(h, 1.0, 1.0)
    for _, cyc, r2, rw in h.records[1:]:
        assert abs(r2 - rw) <= 1e-10 * h.r0_norm
    hw = solve(A, b, config=SolveConfig(method="wgmres", m=3))
    assert sandwich_check(hw)


def test_sandwich_negative_control():
    hw = solve(gen_diag(EX2), randn_vector(10, 3), config=SolveConfig(method="wgmres", m=3, max_matvec=30))
    bad = copy.deepcopy(hw)
    mv, cyc, r2, rw = bad.records[5]
    lo, hi = bad.cycle_bounds[cyc - 1]
    bad.records[5] = (mv, cyc, rw / hi * 0.5, rw)
    assert not sandwich_check(bad)
    bad.records[5] = (mv, cyc, rw / lo * 2, rw)
    assert not sandwich_check(bad)


def test_eigvecs_file_trivial(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("1 1\n4.0 1.0\n")
    (pair,) = read_eigvecs_file(p)
    assert pair.value == 4.0
    np.testing.assert_array_equal(pair.vector, [1.0])


def test_eigvecs_round_trip(tmp_path):
    pairs = laplacian_2d_eigenpairs(6, 7, randn_vector(36, 1))
    p = tmp_path / "lap.txt"
    write_eigvecs_file(p, pairs)
    back = read_eigvecs_file(p)
    for a, b in zip(pairs, back):
        assert a.value == b.value
        np.testing.assert_allclose(b.vector, a.vector, atol=1e-15)


def test_eigvecs_sorted_and_renormalized(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("2 2\n-3.0 1.0000001 0.0\n0.5 0.0 1.0\n")
    pairs = read_eigvecs_file(p)
    assert [pr.value for pr in pairs] == [0.5, -3.0]
    assert np.linalg.norm(pairs[1].vector) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("text", ["2 1\n1.0 0.5 0.5\n", "2 2\n1.0 1.0 0.0\n", "x y\n", "1 1\n1.0 abc\n"])
def test_eigvecs_malformed(tmp_path, text):
    p = tmp_path / "bad.txt"
    p.write_text(text)
    with pytest.raises(ValueError):
        read_eigvecs_file(p)
