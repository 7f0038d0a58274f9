"""Dense linear-algebra kernel.

Matrices are plain two-dimensional ``float64`` numpy arrays.  Every public
function validates and copies its inputs (:func:`as_matrix`), so callers
never observe in-place modification.  numpy is used for array arithmetic
only; the factorizations themselves (LU, Jacobi SVD, Jacobi eigensolver,
Padé exponential, Newton sign iteration) are implemented here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NoConvergence, Overflow, SingularMatrix
from .tolerances import ToleranceProfile, resolve

_EPS = np.finfo(float).eps
_SAFE = math.sqrt(np.finfo(float).tiny) / _EPS  # squared norms stay normal above this

__all__ = [
    "SvdResult",
    "SymEigResult",
    "LUFactors",
    "as_matrix",
    "fro",
    "lu_factor",
    "lu_solve",
    "svd",
    "singular_values",
    "sym_eig",
    "expm",
    "matrix_sign",
    "spectral_abscissa",
    "op_norm2",
    "pivoted_gram_schmidt",
    "matrix_to_text",
    "matrix_from_text",
]


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Return a fresh 2-D float64 copy of ``x``; 1-D input becomes a column."""
    arr = np.array(x, dtype=float, copy=True)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def _square(x, name: str = "matrix") -> np.ndarray:
    arr = as_matrix(x, name)
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    return arr


def fro(m: np.ndarray) -> float:
    """Frobenius norm."""
    return float(np.sqrt(np.sum(np.square(m))))


# ---------------------------------------------------------------------------
# LU with partial pivoting


@dataclass(frozen=True)
class LUFactors:
    lu: np.ndarray  # unit-lower L below the diagonal, U on and above
    perm: np.ndarray  # row permutation: (P a)[i] = a[perm[i]]
    sign: int
    log_abs_det: float


def lu_factor(a, profile: ToleranceProfile | None = None) -> LUFactors:
    """Gaussian elimination with partial pivoting.

    Raises :class:`SingularMatrix` when a pivot falls below
    ``profile.lu_pivot * ||a||_F``.
    """
    prof = resolve(profile)
    lu = _square(a)
    n = lu.shape[0]
    thresh = prof.lu_pivot * fro(lu)
    perm = np.arange(n)
    sign = 1
    log_det = 0.0
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        piv = abs(lu[p, k])
        if piv == 0.0 or piv < thresh:
            raise SingularMatrix(f"pivot {piv:.3e} at step {k} below {thresh:.3e}")
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
            sign = -sign
        if lu[k, k] < 0:
            sign = -sign
        log_det += math.log(piv)
        lu[k + 1 :, k] /= lu[k, k]
        lu[k + 1 :, k + 1 :] -= lu[k + 1 :, k, None] * lu[k, k + 1 :]
    return LUFactors(lu, perm, sign, log_det)


def lu_apply(f: LUFactors, b: np.ndarray) -> np.ndarray:
    """Solve with precomputed factors; ``b`` is a 2-D array (not copied)."""
    lu = f.lu
    n = lu.shape[0]
    x = b[f.perm].copy()
    for k in range(n - 1):
        x[k + 1 :] -= lu[k + 1 :, k, None] * x[k]
    for k in range(n - 1, -1, -1):
        x[k] /= lu[k, k]
        if k:
            x[:k] -= lu[:k, k, None] * x[k]
    return x


def lu_solve(a, b, profile: ToleranceProfile | None = None) -> np.ndarray:
    """Solve ``a @ x = b``. A 1-D ``b`` yields a 1-D result."""
    vector = np.ndim(b) == 1
    rhs = as_matrix(b, "b")
    f = lu_factor(a, profile)
    if rhs.shape[0] != f.lu.shape[0]:
        raise ValueError(f"b has {rhs.shape[0]} rows, expected {f.lu.shape[0]}")
    x = lu_apply(f, rhs)
    return x[:, 0] if vector else x


# ---------------------------------------------------------------------------
# Jacobi kernels


@lru_cache(maxsize=64)
def _round_robin(n: int) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    """Tournament schedule: n-1 rounds of n/2 disjoint pairs (n even)."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        a = np.array([players[i] for i in range(n // 2)])
        b = np.array([players[n - 1 - i] for i in range(n // 2)])
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        rounds.append((lo, hi))
        players = [players[0], players[-1]] + players[1:-1]
    return tuple(rounds)


def _schedule(n: int):
    """Rounds for ``n`` indices; a padding index (when n is odd) is dropped."""
    m = n + (n % 2)
    out = []
    for lo, hi in _round_robin(m):
        keep = hi < n
        out.append((lo[keep], hi[keep]))
    return out


def _tangent(zeta: np.ndarray) -> np.ndarray:
    """Smaller root of t^2 + 2 zeta t - 1 = 0, overflow-safe."""
    big = np.abs(zeta) > 1e150
    z = np.where(big, 1.0, zeta)
    t = np.sign(z) / (np.abs(z) + np.sqrt(1.0 + z * z))
    t = np.where(z == 0.0, 1.0, t)
    return np.where(big, 0.5 / np.where(big, zeta, 1.0), t)


def _active_rounds(norms: np.ndarray):
    """Round-robin schedule over the columns with nonzero norm only."""
    idx = np.flatnonzero(norms > 0)
    return [(idx[lo], idx[hi]) for lo, hi in _schedule(idx.size)]


def _hestenes(w: np.ndarray, tol: float, max_sweeps: int) -> tuple[np.ndarray, np.ndarray, int, float]:
    """Orthogonalize the columns of ``w`` in place.

    Returns ``(w, q, sweeps, scale)`` with ``w0 @ q = scale * w``; ``w`` is
    left in the power-of-two scaled range so its column norms stay accurate.
    """
    ncol = w.shape[1]
    q = np.eye(ncol)
    tol = max(tol, math.sqrt(w.shape[0]) * _EPS)
    # exact power-of-two scaling so the largest entry is O(1); columns whose
    # squared norm is then not a normal number are far below eps and are zeroed
    peak = float(np.max(np.abs(w))) if w.size else 0.0
    scale = 2.0 ** math.frexp(peak)[1] if peak > 0 else 1.0
    w /= scale
    ref = np.sqrt(np.einsum("ij,ij->j", w, w))
    w[:, ref < _SAFE] = 0.0
    ref[ref < _SAFE] = 0.0
    rounds = _active_rounds(ref)
    for sweep in range(1, max_sweeps + 1):
        rotated = False
        for lo, hi in rounds:
            if lo.size == 0:
                continue
            wl, wh = w[:, lo], w[:, hi]
            al = np.einsum("ij,ij->j", wl, wl)
            be = np.einsum("ij,ij->j", wh, wh)
            ga = np.einsum("ij,ij->j", wl, wh)
            act = (al > 0) & (be > 0) & (np.abs(ga) > tol * np.sqrt(al) * np.sqrt(be))
            if not act.any():
                continue
            rotated = True
            i, j = lo[act], hi[act]
            t = _tangent((be[act] - al[act]) / (2.0 * ga[act]))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            wi, wj = wl[:, act], wh[:, act]
            w[:, i] = c * wi - s * wj
            w[:, j] = s * wi + c * wj
            qi, qj = q[:, i], q[:, j]
            q[:, i] = c * qi - s * qj
            q[:, j] = s * qi + c * qj
        norms = np.sqrt(np.einsum("ij,ij->j", w, w))
        # a column reduced below the rounding accumulated over a sweep carries
        # no significant digits: it is numerically dependent, so deflate it
        dead = (norms > 0) & ((norms <= ncol * _EPS * ref) | (norms < _SAFE))
        if dead.any():
            w[:, dead] = 0.0
            norms[dead] = 0.0
            rounds = _active_rounds(norms)
        ref = np.maximum(ref, norms)
        if not rotated:
            return w, q, sweep, scale
    raise NoConvergence(f"one-sided Jacobi did not converge in {max_sweeps} sweeps")


def _complete_orthonormal(v: np.ndarray, good: np.ndarray) -> np.ndarray:
    """Replace the columns of ``v`` flagged not ``good`` by an orthonormal completion."""
    v = v.copy()
    g = v[:, good]
    comp = np.eye(v.shape[0]) - g @ g.T
    comp -= g @ (g.T @ comp)
    extra, _ = pivoted_gram_schmidt(comp, int(np.sum(~good)))
    v[:, ~good] = extra
    return v


@dataclass(frozen=True)
class SvdResult:
    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray
    sweeps: int = 0

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.v.T


def singular_values(m, profile: ToleranceProfile | None = None) -> np.ndarray:
    """Singular values only, descending (same Jacobi iteration as :func:`svd`)."""
    prof = resolve(profile)
    a = as_matrix(m)
    if a.size == 0:
        raise ValueError("singular values of an empty matrix")
    w, _, _, scale = _hestenes(a.T.copy(), prof.jacobi_tol, prof.jacobi_max_sweeps)
    sig = scale * np.sqrt(np.einsum("ij,ij->j", w, w))
    return -np.sort(-sig)[: min(a.shape)]


def svd(m, profile: ToleranceProfile | None = None) -> SvdResult:
    """Thin SVD ``m = u @ diag(sigma) @ v.T`` by one-sided Jacobi.

    The plane rotations act on the rows of ``m`` (columns of ``m.T``), so the
    left factor is an exact product of rotations.  Row scaling is therefore
    harmless: for strongly graded matrices such as snapshot matrices of
    unstable semigroups, small singular values and their vectors keep full
    relative accuracy where bidiagonalization-based SVDs lose them.
    """
    prof = resolve(profile)
    a = as_matrix(m)
    r, c = a.shape
    if r == 0 or c == 0:
        raise ValueError("svd of an empty matrix")
    k = min(r, c)
    w, q, sweeps, scale = _hestenes(a.T.copy(), prof.jacobi_tol, prof.jacobi_max_sweeps)
    nrm = np.sqrt(np.einsum("ij,ij->j", w, w))
    order = np.argsort(-nrm, kind="stable")[:k]
    nrm = nrm[order]
    u = q[:, order]
    good = nrm > 0
    v = np.zeros((c, k))
    v[:, good] = w[:, order][:, good] / nrm[good]
    sig = scale * nrm
    if not good.all():
        v = _complete_orthonormal(v, good)
    return SvdResult(u, sig, v, sweeps)


@dataclass(frozen=True)
class SymEigResult:
    values: np.ndarray
    vectors: np.ndarray
    sweeps: int = 0


def sym_eig(s, profile: ToleranceProfile | None = None) -> SymEigResult:
    """Cyclic (round-robin parallel) Jacobi eigensolver for symmetric matrices.

    Eigenvalues are returned in descending order.
    """
    prof = resolve(profile)
    a = _square(s)
    n = a.shape[0]
    nrm = fro(a)
    if nrm > 0 and fro(a - a.T) > 1e-10 * nrm:
        raise ValueError("sym_eig requires a symmetric matrix")
    a = 0.5 * (a + a.T)
    q = np.eye(n)
    rounds = _schedule(n)
    floor = 1e-2 * _EPS * nrm
    for sweep in range(1, prof.jacobi_max_sweeps + 1):
        rotated = False
        for lo, hi in rounds:
            if lo.size == 0:
                continue
            apq = a[lo, hi]
            app, aqq = a[lo, lo], a[hi, hi]
            act = (np.abs(apq) > prof.jacobi_tol * np.sqrt(np.abs(app * aqq))) & (
                np.abs(apq) > floor
            )
            if not act.any():
                continue
            rotated = True
            i, j = lo[act], hi[act]
            t = _tangent((aqq[act] - app[act]) / (2.0 * apq[act]))
            c = 1.0 / np.sqrt(1.0 + t * t)
            sn = c * t
            rot = np.eye(n)
            rot[i, i] = c
            rot[j, j] = c
            rot[i, j] = sn
            rot[j, i] = -sn
            a = rot.T @ a @ rot
            a[i, j] = 0.0
            a[j, i] = 0.0
            a = 0.5 * (a + a.T)
            q = q @ rot
        if not rotated:
            vals = np.diag(a).copy()
            order = np.argsort(-vals, kind="stable")
            return SymEigResult(vals[order], q[:, order], sweep)
    raise NoConvergence(f"Jacobi eigensolver did not converge in {prof.jacobi_max_sweeps} sweeps")


def pivoted_gram_schmidt(a, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis of ``k`` columns chosen by largest remaining norm.

    Modified Gram-Schmidt with one reorthogonalization pass.  Returns the
    ``rows x k`` basis and the residual norms of the chosen pivots, the
    last of which measures how far ``a`` is from having rank below ``k``.
    """
    w = as_matrix(a).copy()
    rows, cols = w.shape
    if not 0 <= k <= min(rows, cols):
        raise ValueError(f"cannot extract {k} columns from a {rows}x{cols} matrix")
    q = np.zeros((rows, k))
    piv = np.zeros(k)
    for j in range(k):
        norms = np.sqrt(np.einsum("ij,ij->j", w, w))
        p = int(np.argmax(norms))
        piv[j] = norms[p]
        if norms[p] == 0.0:
            break
        x = w[:, p] / norms[p]
        for _ in range(2):
            x = x - q[:, :j] @ (q[:, :j].T @ x)
            x /= math.sqrt(float(x @ x))
        q[:, j] = x
        w -= x[:, None] * (x @ w)
        w[:, p] = 0.0
    return q, piv


def op_norm2(m, profile: ToleranceProfile | None = None) -> float:
    """Spectral norm (largest singular value)."""
    a = as_matrix(m)
    if a.size == 0 or not np.any(a):
        return 0.0
    return float(singular_values(a, profile)[0])


# ---------------------------------------------------------------------------
# Matrix functions

_PADE_DEGREE = 6
_PADE = [
    math.factorial(2 * _PADE_DEGREE - k)
    * math.factorial(_PADE_DEGREE)
    / (math.factorial(2 * _PADE_DEGREE) * math.factorial(k) * math.factorial(_PADE_DEGREE - k))
    for k in range(_PADE_DEGREE + 1)
]


def expm(a, profile: ToleranceProfile | None = None) -> np.ndarray:
    """Matrix exponential: scaling and squaring with the [6/6] Padé approximant."""
    x = _square(a)
    n = x.shape[0]
    norm1 = float(np.max(np.sum(np.abs(x), axis=0))) if n else 0.0
    s = max(0, math.ceil(math.log2(norm1 / 0.5))) if norm1 > 0 else 0
    x = x / (2.0**s)
    eye = np.eye(n)
    powers = [eye, x]
    for _ in range(2, _PADE_DEGREE + 1):
        powers.append(powers[-1] @ x)
    even = sum(_PADE[k] * powers[k] for k in range(0, _PADE_DEGREE + 1, 2))
    odd = sum(_PADE[k] * powers[k] for k in range(1, _PADE_DEGREE + 1, 2))
    r = lu_solve(even - odd, even + odd, profile)
    try:
        with np.errstate(over="raise", invalid="raise"):
            for _ in range(s):
                r = r @ r
    except FloatingPointError as exc:
        raise Overflow("matrix exponential overflowed while squaring") from exc
    if not np.all(np.isfinite(r)):
        raise Overflow("matrix exponential overflowed")
    return r


def matrix_sign(a, profile: ToleranceProfile | None = None) -> np.ndarray:
    """Matrix sign function by the scaled Newton iteration ``X <- (mu X + X^-1 / mu) / 2``.

    The first step uses determinant scaling ``mu = |det X|^(-1/n)``; later
    steps use Frobenius-norm scaling ``mu = sqrt(||X^-1|| / ||X||)``, which
    keeps the iteration count flat when a single eigenvalue sits close to the
    imaginary axis.  Scaling is dropped once the relative update falls below
    1e-2 so the final steps converge quadratically.

    Raises :class:`SingularMatrix` if ``a`` itself is singular and
    :class:`NoConvergence` when the iteration breaks down or stalls, which
    signals an eigenvalue on or near the imaginary axis.
    """
    prof = resolve(profile)
    x = _square(a)
    n = x.shape[0]
    eye = np.eye(n)
    f = lu_factor(x, prof)
    scaling = True
    for it in range(prof.sign_max_iter):
        inv = lu_apply(f, eye)
        scale = fro(x)
        if not scaling:
            mu = 1.0
        elif it == 0:
            mu = math.exp(-f.log_abs_det / n)
        else:
            mu = math.sqrt(fro(inv) / scale)
        with np.errstate(over="ignore", invalid="ignore"):
            nxt = 0.5 * (mu * x + inv / mu)
        if not np.all(np.isfinite(nxt)):
            raise NoConvergence("sign iteration produced non-finite entries")
        diff = fro(nxt - x)
        x = nxt
        if diff <= prof.sign_tol * scale:
            break
        if diff <= 1e-2 * scale:
            scaling = False
        try:
            f = lu_factor(x, prof)
        except SingularMatrix as exc:
            raise NoConvergence("sign iterate became singular") from exc
    else:
        raise NoConvergence(f"sign iteration did not converge in {prof.sign_max_iter} steps")
    resid = fro(x @ x - eye)
    if resid > prof.sign_check * max(1.0, fro(x) ** 2):
        raise NoConvergence(f"sign(A)^2 deviates from I by {resid:.3e}")
    return x


def _stable_count(a: np.ndarray, shift: float, prof: ToleranceProfile) -> int | None:
    """Number of eigenvalues with real part > shift, or None if the sign iteration fails."""
    n = a.shape[0]
    try:
        sgn = matrix_sign(a - shift * np.eye(n), prof)
    except (NoConvergence, SingularMatrix):
        return None
    return int(round((n + float(np.trace(sgn))) / 2.0))


def _abscissa_seed(a: np.ndarray, nrm: float, prof: ToleranceProfile) -> float | None:
    """Estimate of the spectral abscissa from Gelfand's formula.

    ``rho(exp(h a)) = exp(h alpha(a))``; with ``h = 1 / ||a||`` the
    spectral radius is estimated by repeated normalized squaring,
    ``ln ||M^(2^j)|| / 2^j -> ln rho(M)``.
    """
    h = 1.0 / nrm
    try:
        m = expm(h * a, prof)
    except Overflow:
        return None
    log_c = 0.0
    est = None
    for j in range(1, 61):
        m = m @ m
        s = float(np.max(np.abs(m)))
        if s == 0.0 or not math.isfinite(s):
            return None
        m /= s
        log_c = 2.0 * log_c + math.log(s)
        new = (log_c + math.log(fro(m))) / (2.0**j) / h
        if est is not None and abs(new - est) <= 1e-3 * prof.abscissa_tol and j >= 8:
            return new
        est = new
    return est


def spectral_abscissa(a, tol: float = 1e-6, profile: ToleranceProfile | None = None) -> float:
    """Largest real part of the spectrum, certified by Hurwitz tests.

    ``a - s I`` is Hurwitz exactly when ``sign(a - s I) = -I``.  A candidate
    value from Gelfand's formula (see :func:`_abscissa_seed`) is accepted
    when the Hurwitz tests at ``candidate +- tol / 2`` bracket it; otherwise
    the abscissa is found by bisection over ``[-||a||_2, ||a||_2]``.  A shift
    at which the sign iteration fails is retried slightly to either side; if
    both retries fail the shift sits on the abscissa and is returned.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    prof = resolve(profile)
    x = _square(a)
    if x.shape[0] == 0:
        raise ValueError("spectral abscissa of an empty matrix")
    nrm = op_norm2(x, prof)
    if nrm == 0.0:
        return 0.0
    lo, hi = -nrm, nrm
    seed = _abscissa_seed(x, nrm, prof)
    if seed is not None and lo < seed < hi:
        upper, lower = seed + 0.5 * tol, seed - 0.5 * tol
        if _stable_count(x, upper, prof) == 0:
            hi = min(hi, upper)
            below = _stable_count(x, lower, prof)
            if below is not None and below > 0:
                return seed
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        cut, count = mid, _stable_count(x, mid, prof)
        if count is None:
            for nudge in (0.25 * tol, -0.25 * tol):
                cut, count = mid + nudge, _stable_count(x, mid + nudge, prof)
                if count is not None:
                    break
            else:
                return mid
        if count == 0:
            hi = cut
        else:
            lo = cut
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Text serialization


def matrix_to_text(m) -> str:
    a = as_matrix(m)
    lines = [f"{a.shape[0]} {a.shape[1]}"]
    lines += [" ".join(repr(float(v)) for v in row) for row in a]
    return "\n".join(lines) + "\n"


def matrix_from_text(text: str) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty matrix text")
    rows, cols = (int(t) for t in lines[0].split())
    body = lines[1:]
    if len(body) != rows:
        raise ValueError(f"expected {rows} rows, found {len(body)}")
    data = [[float(t) for t in ln.split()] for ln in body]
    if any(len(r) != cols for r in data):
        raise ValueError(f"every row must have {cols} entries")
    return as_matrix(np.array(data, dtype=float).reshape(rows, cols))
