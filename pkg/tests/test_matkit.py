import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from podstab import matkit
from podstab.errors import NoConvergence, Overflow, SingularMatrix
from podstab.tolerances import DEFAULT

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def matrices(max_rows=64, max_cols=64):
    shape = st.tuples(st.integers(1, max_rows), st.integers(1, max_cols))
    return shape.flatmap(lambda s: arrays(np.float64, s, elements=finite))


# --- LU ---------------------------------------------------------------------


def test_lu_solve_matches_numpy(rng):
    a = rng.standard_normal((12, 12))
    b = rng.standard_normal((12, 3))
    x = matkit.lu_solve(a, b)
    np.testing.assert_allclose(x, np.linalg.solve(a, b), rtol=1e-10, atol=1e-12)


def test_lu_factor_reconstructs(rng):
    a = rng.standard_normal((9, 9))
    f = matkit.lu_factor(a)
    lower = np.tril(f.lu, -1) + np.eye(9)
    upper = np.triu(f.lu)
    np.testing.assert_allclose(lower @ upper, a[f.perm], atol=1e-12)


def test_lu_singular_raises():
    with pytest.raises(SingularMatrix):
        matkit.lu_solve(np.array([[1.0, 2.0], [2.0, 4.0]]), np.ones(2))


# --- SVD --------------------------------------------------------------------


@given(matrices())
def test_svd_invariants(m):
    res = matkit.svd(m)
    k = min(m.shape)
    scale = max(1.0, np.linalg.norm(m))
    assert res.u.shape == (m.shape[0], k) and res.v.shape == (m.shape[1], k)
    assert np.all(np.diff(res.sigma) <= 0) and np.all(res.sigma >= 0)
    assert np.linalg.norm(res.reconstruct() - m) <= 1e-12 * scale * k
    assert np.linalg.norm(res.u.T @ res.u - np.eye(k)) <= 1e-12 * k
    assert np.linalg.norm(res.v.T @ res.v - np.eye(k)) <= 1e-12 * k


@given(matrices(24, 24))
def test_singular_values_match_lapack(m):
    ours = matkit.singular_values(m)
    ref = np.linalg.svd(m, compute_uv=False)
    assert np.max(np.abs(ours - ref)) <= 1e-12 * max(1.0, ref[0])


def test_svd_random_reconstruction_relative(rng):
    for shape in [(64, 64), (64, 10), (10, 64), (33, 17)]:
        m = rng.standard_normal(shape)
        res = matkit.svd(m)
        assert np.linalg.norm(res.reconstruct() - m) / np.linalg.norm(m) <= 1e-10


def test_svd_rank_one_and_zero():
    u = np.arange(1.0, 6.0)
    res = matkit.svd(np.outer(u, [1.0, -1.0, 2.0]))
    assert res.sigma[1] <= 1e-14 * res.sigma[0]
    np.testing.assert_allclose(res.v.T @ res.v, np.eye(3), atol=1e-12)
    z = matkit.svd(np.zeros((4, 3)))
    assert np.all(z.sigma == 0)
    np.testing.assert_allclose(z.u.T @ z.u, np.eye(3), atol=1e-12)


def test_svd_graded_matrix_small_singular_values():
    # Vandermonde-like rows exp(lambda_j k T): column scaling spans ~30 decades
    lam = 15.0 - np.arange(1, 31) ** 2
    y = np.exp(np.outer(lam, 0.1 * np.arange(1, 11)))
    sig = matkit.singular_values(y)
    # Exact integer oracle: with k scaled so entries are powers of q, the
    # leading singular values follow from the same matrix in extended
    # precision.
    import mpmath as mp

    mp.mp.dps = 60
    big = mp.matrix([[mp.e ** (int(l) * k * mp.mpf("0.1")) for k in range(1, 11)] for l in lam])
    ref = [float(s) for s in mp.svd_r(big, compute_uv=False)]
    np.testing.assert_allclose(sig[:5], ref[:5], rtol=1e-12)


def test_svd_max_sweeps_exhausted(rng):
    prof = DEFAULT.with_overrides({"jacobi_max_sweeps": 1})
    with pytest.raises(NoConvergence):
        matkit.svd(rng.standard_normal((20, 20)), prof)


# --- symmetric eigen, Gram-Schmidt, norms --------------------------------------


@given(arrays(np.float64, (8, 8), elements=finite))
def test_sym_eig_decomposes(x):
    s = x + x.T
    r = matkit.sym_eig(s)
    assert np.all(np.diff(r.values) <= 0)
    np.testing.assert_allclose(r.vectors.T @ r.vectors, np.eye(8), atol=1e-12)
    assert np.linalg.norm(s @ r.vectors - r.vectors * r.values) <= 1e-9 * max(np.linalg.norm(s), 1e-300)
    sig = matkit.singular_values(s)
    np.testing.assert_allclose(np.sort(np.abs(r.values))[::-1], sig, atol=1e-12 * max(1.0, sig[0]))


def test_sym_eig_diagonal():
    r = matkit.sym_eig(np.diag([5.0, -1.0]))
    np.testing.assert_array_equal(r.values, [5.0, -1.0])


def test_pivoted_gram_schmidt_spans_range(rng):
    a = rng.standard_normal((10, 3)) @ rng.standard_normal((3, 7))
    q, piv = matkit.pivoted_gram_schmidt(a, 3)
    np.testing.assert_allclose(q.T @ q, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(q @ (q.T @ a), a, atol=1e-10)


def test_op_norm2_matches_numpy(rng):
    m = rng.standard_normal((7, 5))
    assert matkit.op_norm2(m) == pytest.approx(np.linalg.norm(m, 2), rel=1e-13)
    assert matkit.op_norm2(np.zeros((3, 3))) == 0.0


# --- expm -------------------------------------------------------------------


@given(arrays(np.float64, (6, 6), elements=st.floats(-3, 3)))
def test_expm_inverse_identity(x):
    # unit 2-norm keeps cond(expm(a)) moderate; the product error scales with it
    nrm = np.linalg.norm(x, 2)
    a = x / nrm if nrm > 0 else x
    prod = matkit.expm(a) @ matkit.expm(-a)
    assert np.linalg.norm(prod - np.eye(6)) <= 1e-8


def test_expm_matches_scipy(rng):
    for scale in (1e-3, 1.0, 30.0):
        a = scale * rng.standard_normal((10, 10)) / 10
        ref = sla.expm(a)
        assert np.linalg.norm(matkit.expm(a) - ref) <= 1e-12 * np.linalg.norm(ref)


def test_expm_closed_forms():
    np.testing.assert_allclose(matkit.expm(np.zeros((3, 3))), np.eye(3), atol=0)
    rot = matkit.expm(np.array([[0.0, np.pi], [-np.pi, 0.0]]))
    np.testing.assert_allclose(rot, -np.eye(2), atol=1e-13)
    np.testing.assert_allclose(matkit.expm(np.diag([1.0, -2.0])), np.diag(np.exp([1.0, -2.0])), rtol=1e-14)


def test_expm_overflow():
    with pytest.raises(Overflow):
        matkit.expm(np.array([[800.0]]))


# --- matrix sign --------------------------------------------------------------


@given(arrays(np.float64, (6, 6), elements=finite), st.integers(0, 2**31 - 1))
def test_sign_squares_to_identity(x, seed):
    # shift the spectrum away from the imaginary axis
    rng = np.random.default_rng(seed)
    d = np.diag(rng.choice([-1.0, 1.0], 6) * (1.0 + rng.random(6)))
    q = np.linalg.qr(rng.standard_normal((6, 6)))[0]
    a = q @ (d + 0.1 * np.triu(x, 1)) @ q.T
    s = matkit.matrix_sign(a)
    assert np.linalg.norm(s @ s - np.eye(6)) <= 1e-8 * max(1.0, np.linalg.norm(s) ** 2)
    np.testing.assert_allclose(s @ a, a @ s, atol=1e-8 * np.linalg.norm(a) * max(1, np.linalg.norm(s)))


def test_sign_diagonal_and_trace(rng):
    d = np.array([3.0, -1.0, 0.5, -7.0, 2.0])
    q = np.linalg.qr(rng.standard_normal((5, 5)))[0]
    s = matkit.matrix_sign(q @ np.diag(d) @ q.T)
    np.testing.assert_allclose(s, q @ np.diag(np.sign(d)) @ q.T, atol=1e-10)


def test_sign_imaginary_axis_fails():
    with pytest.raises((NoConvergence, SingularMatrix)):
        matkit.matrix_sign(np.array([[0.0, 1.0], [-1.0, 0.0]]))


# --- spectral abscissa ----------------------------------------------------------


@given(arrays(np.float64, st.integers(1, 12), elements=st.floats(-50, 50)))
def test_abscissa_diagonal_exact(d):
    assert abs(matkit.spectral_abscissa(np.diag(d), 1e-6) - d.max()) <= 1e-6


@given(st.integers(0, 2**31 - 1), st.integers(2, 10))
def test_abscissa_similarity_invariant(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    ref = np.linalg.eigvals(a).real.max()
    assert abs(matkit.spectral_abscissa(a, 1e-6) - ref) <= 2e-6


def test_abscissa_complex_pair():
    a = np.array([[-0.5, 3.0], [-3.0, -0.5]])
    assert matkit.spectral_abscissa(a, 1e-8) == pytest.approx(-0.5, abs=1e-8)


# --- text round trip ---------------------------------------------------------


@given(matrices(6, 6))
def test_text_round_trip_is_exact(m):
    back = matkit.matrix_from_text(matkit.matrix_to_text(m))
    assert back.shape == m.shape and np.array_equal(back, m)
