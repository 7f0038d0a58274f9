"""Reduced operators, the control Riccati equation and Hurwitz certificates.

The Riccati equation solved here is

    a^T p + p a - p b b^T p + eps I = 0,

whose maximal symmetric positive semidefinite solution gives the feedback
``k = -b^T p``.  It is obtained from the stable invariant subspace of the
Hamiltonian ``[[a, -b b^T], [-eps I, -a^T]]``, computed with the matrix sign
function.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import matkit
from .errors import (
    ImaginaryAxisEigenvalue,
    NoConvergence,
    NotStabilizable,
    RankDeficientSubspace,
    SingularMatrix,
)
from .model import EvolutionModel, kalman_rank
from .pod import PodBasis
from .tolerances import ToleranceProfile, resolve

__all__ = [
    "ReducedSystem",
    "RiccatiSolution",
    "reduce_operators",
    "solve_are",
    "are_residual",
    "feedback_gain",
    "hurwitz_margin",
    "check_stabilizable",
    "unstable_modes_controllable",
]


@dataclass(frozen=True)
class ReducedSystem:
    """Galerkin projection ``(V^T A V, V^T B)`` onto a POD basis."""

    a_red: np.ndarray
    b_red: np.ndarray
    basis: PodBasis | None = None


@dataclass(frozen=True)
class RiccatiSolution:
    p: np.ndarray
    k_gain: np.ndarray
    epsilon: float
    residual: float
    closed_loop_abscissa: float
    stabilizable: bool = True

    def to_dict(self) -> dict:
        return {
            "p": self.p.tolist(),
            "k_gain": self.k_gain.tolist(),
            "epsilon": self.epsilon,
            "residual": self.residual,
            "closed_loop_abscissa": self.closed_loop_abscissa,
            "stabilizable": self.stabilizable,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RiccatiSolution":
        return cls(
            p=matkit.as_matrix(d["p"], "p"),
            k_gain=matkit.as_matrix(d["k_gain"], "k_gain"),
            epsilon=float(d["epsilon"]),
            residual=float(d["residual"]),
            closed_loop_abscissa=float(d["closed_loop_abscissa"]),
            stabilizable=bool(d.get("stabilizable", True)),
        )

    @classmethod
    def from_json(cls, text: str) -> "RiccatiSolution":
        return cls.from_dict(json.loads(text))


def reduce_operators(model: EvolutionModel, basis: PodBasis) -> ReducedSystem:
    v = basis.v
    if v.shape[0] != model.n:
        raise ValueError(f"basis has {v.shape[0]} rows, model dimension is {model.n}")
    a_red = v.T @ (model.a_diag[:, None] * v)
    # congruence of a diagonal matrix: symmetric up to rounding
    a_red = 0.5 * (a_red + a_red.T)
    return ReducedSystem(a_red, v.T @ model.b, basis)


def are_residual(a, b, p, epsilon: float) -> float:
    """Frobenius norm of ``a^T p + p a - p b b^T p + eps I``."""
    a, b, p = (np.asarray(x, dtype=float) for x in (a, b, p))
    pb = p @ b
    r = a.T @ p + p @ a - pb @ pb.T + epsilon * np.eye(a.shape[0])
    return matkit.fro(r)


def check_stabilizable(a, b, profile: ToleranceProfile | None = None) -> bool:
    """Hautus test for symmetric ``a``.

    True iff every eigenvector of ``a`` with eigenvalue ``>= 0`` has a
    nonzero (relative to ``||b||_2``) row in ``Q^T b``.
    """
    prof = resolve(profile)
    a = matkit.as_matrix(a, "a")
    b = matkit.as_matrix(b, "b")
    eig = matkit.sym_eig(a, prof)
    unstable = eig.values >= 0
    if not unstable.any():
        return True
    bnorm = matkit.op_norm2(b, prof)
    if bnorm == 0.0:
        return False
    rows = eig.vectors[:, unstable].T @ b
    return bool(np.all(np.sqrt(np.sum(rows * rows, axis=1)) > prof.hautus_rel * bnorm))


def unstable_modes_controllable(a, b, profile: ToleranceProfile | None = None) -> bool:
    """Stabilizability of a general pair ``(a, b)``.

    Let ``Z`` be an orthonormal basis of the unstable invariant subspace of
    ``a^T``, read off ``(I + sign(a^T)) / 2``.  The unstable modes are
    controllable iff ``(Z^T a Z, Z^T b)`` satisfies the Kalman rank
    condition.  Raises :class:`ImaginaryAxisEigenvalue` when ``a`` has an
    eigenvalue on (or numerically near) the imaginary axis.
    """
    prof = resolve(profile)
    a = matkit.as_matrix(a, "a")
    b = matkit.as_matrix(b, "b")
    n = a.shape[0]
    try:
        sgn = matkit.matrix_sign(a.T, prof)
    except (NoConvergence, SingularMatrix) as exc:
        raise ImaginaryAxisEigenvalue(f"a has an eigenvalue near the imaginary axis: {exc}") from exc
    k = int(round((n + float(np.trace(sgn))) / 2.0))
    if k == 0:
        return True
    z, _ = matkit.pivoted_gram_schmidt(0.5 * (np.eye(n) + sgn), k)
    return kalman_rank(z.T @ a @ z, z.T @ b, prof) == k


def solve_are(a, b, epsilon: float, profile: ToleranceProfile | None = None) -> RiccatiSolution:
    """Maximal solution of ``a^T p + p a - p b b^T p + eps I = 0``.

    The stable invariant subspace of the Hamiltonian is the range of
    ``(I - sign(H)) / 2``; an orthonormal basis ``[W1; W2]`` of it gives
    ``p = W2 W1^{-1}`` (the subspace is the graph ``[I; p]``).

    Raises
    ------
    NotStabilizable
        For ``eps = 0`` when an unstable mode is not controllable.  For
        ``eps > 0`` the check is advisory (recorded in ``stabilizable``) and
        a failure surfaces from the subspace extraction instead.
    ImaginaryAxisEigenvalue
        When ``a`` or the Hamiltonian has spectrum on the imaginary axis.
    RankDeficientSubspace
        When ``W1`` is numerically singular.
    """
    prof = resolve(profile)
    a = matkit.as_matrix(a, "a")
    b = matkit.as_matrix(b, "b")
    m = a.shape[0]
    if a.shape != (m, m) or b.shape[0] != m:
        raise ValueError(f"inconsistent shapes a{a.shape}, b{b.shape}")
    if not epsilon >= 0:
        raise ValueError("epsilon must be nonnegative")
    stabilizable = unstable_modes_controllable(a, b, prof)
    if not stabilizable and epsilon == 0:
        raise NotStabilizable("an unstable mode of a is not controllable from b")

    eye = np.eye(m)
    ham = np.block([[a, -b @ b.T], [-epsilon * eye, -a.T]])
    try:
        sgn = matkit.matrix_sign(ham, prof)
    except (NoConvergence, SingularMatrix) as exc:
        raise ImaginaryAxisEigenvalue(f"Hamiltonian sign iteration failed: {exc}") from exc
    stable_proj = 0.5 * (np.eye(2 * m) - sgn)
    if int(round(np.trace(stable_proj))) != m:
        raise ImaginaryAxisEigenvalue("Hamiltonian stable subspace does not have dimension m")
    w, _ = matkit.pivoted_gram_schmidt(stable_proj, m)
    w1, w2 = w[:m], w[m:]
    if matkit.svd(w1, prof).sigma[-1] <= prof.rank_rel:
        raise RankDeficientSubspace("W1 is numerically singular")
    # p W1 = W2  <=>  W1^T p^T = W2^T
    try:
        p = matkit.lu_solve(w1.T, w2.T, prof).T
    except SingularMatrix as exc:
        raise RankDeficientSubspace(f"stable subspace is not a graph over the state block: {exc}") from exc
    p = 0.5 * (p + p.T)
    k = -b.T @ p
    resid = are_residual(a, b, p, epsilon)
    absc = matkit.spectral_abscissa(a + b @ k, prof.abscissa_tol, prof)
    return RiccatiSolution(p, k, float(epsilon), resid, absc, stabilizable)


def feedback_gain(sol: RiccatiSolution, b) -> np.ndarray:
    """``k = -b^T p``."""
    b = matkit.as_matrix(b, "b")
    if b.shape[0] != sol.p.shape[0]:
        raise ValueError(f"b has {b.shape[0]} rows, p is {sol.p.shape[0]}x{sol.p.shape[0]}")
    return -b.T @ sol.p


def hurwitz_margin(a, profile: ToleranceProfile | None = None) -> float:
    """``-spectral_abscissa(a)``; positive means Hurwitz with that margin."""
    return -matkit.spectral_abscissa(a, 1e-6, profile)
