"""Snapshot POD: basis, optimal value, projector and deficiency."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import matkit
from .errors import RankDeficient
from .model import EvolutionModel, SpectralSplit, semigroup_apply
from .tolerances import ToleranceProfile, resolve

__all__ = [
    "SnapshotSet",
    "PodBasis",
    "generate_snapshots",
    "snapshot_rank",
    "pod_reduce",
    "pod_projector",
    "projection_deficiency",
    "sigma_csv",
    "deficiency_csv",
]


@dataclass(frozen=True)
class SnapshotSet:
    """Snapshots ``y_k = S(kT) y0`` for ``k = 1..n`` stored as columns.

    ``stable_norms[k-1]`` is ``||(I - P_ell) y_k||``, kept for decay fits.
    """

    t_step: float
    count_n: int
    y_matrix: np.ndarray
    y0: np.ndarray
    stable_norms: np.ndarray
    rank: int


@dataclass(frozen=True)
class PodBasis:
    v: np.ndarray
    sigma: np.ndarray
    m: int
    j_opt: float
    warn: bool
    t_step: float
    count_n: int

    @property
    def rank(self) -> int:
        return self.v.shape[1]


def snapshot_rank(y: np.ndarray, profile: ToleranceProfile | None = None) -> int:
    """Numerical rank after scaling every nonzero row to unit norm.

    Snapshot matrices of unstable semigroups are strongly row-graded: row j
    scales like ``exp(lambda_j n T)``.  Diagonal row scaling leaves the rank
    unchanged, and the one-sided Jacobi SVD resolves the singular values to
    the accuracy of the equilibrated matrix, so the relative threshold is
    applied there.
    """
    prof = resolve(profile)
    y = matkit.as_matrix(y, "y")
    norms = np.sqrt(np.sum(y * y, axis=1))
    keep = norms > 0
    if not keep.any():
        return 0
    sig = matkit.svd(y[keep] / norms[keep, None], prof).sigma
    return int(np.sum(sig > prof.rank_rel * sig[0]))


def generate_snapshots(
    model: EvolutionModel,
    y0,
    t_step: float,
    count_n: int,
    split: SpectralSplit | None = None,
    profile: ToleranceProfile | None = None,
) -> SnapshotSet:
    """Columns ``S(kT) y0`` for ``k = 1..count_n``.

    Raises :class:`Overflow` when ``exp(lambda_1 n T)`` is not representable.
    """
    if not t_step > 0:
        raise ValueError("t_step must be positive")
    if count_n < 1:
        raise ValueError("count_n must be at least 1")
    y0 = np.asarray(y0, dtype=float).ravel().copy()
    if y0.size != model.n:
        raise ValueError(f"y0 has length {y0.size}, expected {model.n}")
    if not np.any(y0):
        raise ValueError("y0 must be nonzero")
    cols = [semigroup_apply(model, k * t_step, y0) for k in range(1, count_n + 1)]
    y = np.column_stack(cols)
    ell = split.ell if split is not None else int(np.sum(model.a_diag > 0))
    stable = np.sqrt(np.sum(y[ell:] ** 2, axis=0))
    return SnapshotSet(float(t_step), int(count_n), y, y0, stable, snapshot_rank(y, profile))


def _fix_signs(v: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(v), axis=0)
    flip = v[idx, np.arange(v.shape[1])] < 0
    v = v.copy()
    v[:, flip] *= -1.0
    return v


def pod_reduce(snapshots: SnapshotSet, m: int, profile: ToleranceProfile | None = None) -> PodBasis:
    """Rank-``m`` POD basis: leading left singular vectors of the snapshot matrix.

    Each basis vector is signed so that its entry of largest magnitude is
    positive.  ``j_opt`` is the optimal value ``sum_{i>m} sigma_i^2``.
    """
    prof = resolve(profile)
    if m < 1:
        raise ValueError("m must be at least 1")
    if m > snapshots.rank:
        raise RankDeficient(f"m = {m} exceeds the numerical rank {snapshots.rank} of the snapshots")
    res = matkit.svd(snapshots.y_matrix, prof)
    sig = res.sigma
    v = _fix_signs(res.u[:, :m])
    tail = sig[m:]
    j_opt = float(np.sum(tail * tail))
    nxt = sig[m] if m < sig.size else 0.0
    warn = bool(sig[m - 1] - nxt <= prof.gap_rel * sig[0])
    return PodBasis(v, sig.copy(), m, j_opt, warn, snapshots.t_step, snapshots.count_n)


def pod_projector(basis: PodBasis) -> np.ndarray:
    """Orthogonal projector ``V V^T`` onto the POD subspace."""
    return basis.v @ basis.v.T


def projection_deficiency(basis: PodBasis, split: SpectralSplit, profile: ToleranceProfile | None = None) -> float:
    """``||(I - Pi) P_ell||_2``: how much of the unstable subspace the basis misses."""
    if basis.m < split.ell:
        raise ValueError(f"m = {basis.m} is smaller than ell = {split.ell}")
    if split.ell == 0:
        return 0.0
    # (I - V V^T) P_ell is supported on the first ell columns
    e = split.p_ell[:, : split.ell]
    resid = e - basis.v @ (basis.v.T @ e)
    return matkit.op_norm2(resid, profile)


def sigma_csv(rows) -> str:
    """CSV text with header ``n,i,sigma`` from ``(n, sigma_vector)`` pairs (``i`` is 1-based)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "i", "sigma"])
    for n, sig in rows:
        for i, s in enumerate(sig, start=1):
            w.writerow([n, i, repr(float(s))])
    return buf.getvalue()


def deficiency_csv(rows) -> str:
    """CSV text with header ``n,m,deficiency`` from ``(n, m, value)`` triples."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "m", "deficiency"])
    for n, m, d in rows:
        w.writerow([n, m, repr(float(d))])
    return buf.getvalue()
