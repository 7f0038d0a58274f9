"""Full-order closed loop under reduced-order feedback, and its certification."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import matkit
from .errors import InsufficientOrder, PoorInitialState
from .model import EvolutionModel, check_y0_richness, spectral_split
from .pod import PodBasis, generate_snapshots, pod_reduce
from .riccati import RiccatiSolution, hurwitz_margin, reduce_operators, solve_are
from .tolerances import ToleranceProfile, resolve

__all__ = [
    "ClosedLoopSystem",
    "StabilityReport",
    "assemble_closed_loop",
    "decay_rate_estimate",
    "decay_grid",
    "verify_theorem",
    "simulate_trajectory",
    "trajectory_csv",
]

DEFAULT_HORIZON = 20.0
DEFAULT_SAMPLES = 64


@dataclass(frozen=True)
class ClosedLoopSystem:
    """``a_cl = diag(a_diag) + b k V^T``: the full state is fed back through its POD coordinates."""

    a_cl: np.ndarray
    model: EvolutionModel
    basis: PodBasis
    solution: RiccatiSolution


@dataclass(frozen=True)
class StabilityReport:
    n: int
    m: int
    epsilon: float
    abscissa: float
    gamma_star: float
    gamma: float
    gamma_eps: float
    decayrate_gap: float
    final_norm_ratio: float
    trajectory_csv_path: str = ""

    @property
    def stable(self) -> bool:
        return self.abscissa < 0

    @property
    def verdict(self) -> str:
        return "stable" if self.stable else "not_stabilized"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["verdict"] = self.verdict
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def assemble_closed_loop(model: EvolutionModel, basis: PodBasis, sol: RiccatiSolution) -> ClosedLoopSystem:
    v = basis.v
    k = sol.k_gain
    if v.shape[0] != model.n or k.shape != (model.p, v.shape[1]):
        raise ValueError(f"inconsistent shapes: v{v.shape}, k{k.shape}, b{model.b.shape}")
    a_cl = np.diag(model.a_diag) + (model.b @ k) @ v.T
    return ClosedLoopSystem(a_cl, model, basis, sol)


def decay_grid(horizon: float, samples: int) -> np.ndarray:
    """Geometric grid of ``samples`` times from ``horizon / 10`` to ``horizon``."""
    return horizon * np.logspace(-1.0, 0.0, samples)


def decay_rate_estimate(
    sys: ClosedLoopSystem | np.ndarray,
    horizon: float = DEFAULT_HORIZON,
    samples: int = DEFAULT_SAMPLES,
    profile: ToleranceProfile | None = None,
) -> float:
    """Empirical decay rate: least-squares slope of ``-ln ||exp(t a_cl)||_2`` against ``t``.

    Only the last half of the geometric grid enters the fit, so transient
    growth of non-normal systems is discarded; the norms of the first half
    are therefore not evaluated.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if samples < 4:
        raise ValueError("samples must be at least 4")
    a = sys.a_cl if isinstance(sys, ClosedLoopSystem) else matkit.as_matrix(sys)
    t = decay_grid(horizon, samples)[samples // 2 :]
    logs = np.empty(t.size)
    for i, ti in enumerate(t):
        nrm = matkit.op_norm2(matkit.expm(ti * a, profile), profile)
        logs[i] = -math.log(nrm) if nrm > 0 else math.inf
    if not np.all(np.isfinite(logs)):
        return math.inf
    tc = t - t.mean()
    return float(np.dot(tc, logs - logs.mean()) / np.dot(tc, tc))


def simulate_trajectory(sys: ClosedLoopSystem | np.ndarray, y0, t_grid, profile: ToleranceProfile | None = None):
    """Rows ``(t_i, ||exp(t_i a_cl) y0||)`` for an ascending grid starting at ``t >= 0``."""
    a = sys.a_cl if isinstance(sys, ClosedLoopSystem) else matkit.as_matrix(sys)
    y0 = np.asarray(y0, dtype=float).ravel()
    t = np.asarray(t_grid, dtype=float).ravel()
    if t.size == 0:
        raise ValueError("t_grid is empty")
    if t[0] < 0 or np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must be ascending and start at t >= 0")
    rows = []
    for ti in t:
        y = matkit.expm(ti * a, profile) @ y0
        rows.append((float(ti), float(np.linalg.norm(y))))
    return rows


def trajectory_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "norm"])
    for t, nrm in rows:
        w.writerow([repr(float(t)), repr(float(nrm))])
    return buf.getvalue()


def verify_theorem(
    model: EvolutionModel,
    y0,
    t_step: float,
    m: int,
    n: int,
    epsilon: float,
    horizon: float = DEFAULT_HORIZON,
    samples: int = DEFAULT_SAMPLES,
    trajectory_path: str | Path | None = None,
    trajectory_step: float = 0.5,
    profile: ToleranceProfile | None = None,
) -> StabilityReport:
    """Snapshots, POD, reduced Riccati feedback and certification of the full closed loop.

    A closed loop that is not stabilized is reported through the verdict,
    not raised.
    """
    prof = resolve(profile)
    split = spectral_split(model)
    if m < split.ell:
        raise InsufficientOrder(f"m = {m} is smaller than the number of unstable modes {split.ell}")
    if not check_y0_richness(model, split, y0, prof):
        raise PoorInitialState("y0 has a vanishing component on an unstable mode")
    snaps = generate_snapshots(model, y0, t_step, n, split, prof)
    basis = pod_reduce(snaps, m, prof)
    red = reduce_operators(model, basis)
    sol = solve_are(red.a_red, red.b_red, epsilon, prof)
    sys = assemble_closed_loop(model, basis, sol)

    abscissa = matkit.spectral_abscissa(sys.a_cl, prof.abscissa_tol, prof)
    gamma_eps = hurwitz_margin(red.a_red + red.b_red @ sol.k_gain, prof)
    gamma_star = decay_rate_estimate(sys, horizon, samples, prof)
    gap = abs(gamma_star - min(split.gamma, gamma_eps))

    y0v = np.asarray(y0, dtype=float).ravel()
    steps = int(round(horizon / trajectory_step))
    grid = np.linspace(0.0, steps * trajectory_step, steps + 1)
    rows = simulate_trajectory(sys, y0v, grid, prof)
    path = ""
    if trajectory_path is not None:
        Path(trajectory_path).write_text(trajectory_csv(rows))
        path = str(trajectory_path)
    return StabilityReport(
        n=int(n),
        m=int(m),
        epsilon=float(epsilon),
        abscissa=abscissa,
        gamma_star=gamma_star,
        gamma=split.gamma,
        gamma_eps=gamma_eps,
        decayrate_gap=gap,
        final_norm_ratio=rows[-1][1] / float(np.linalg.norm(y0v)),
        trajectory_csv_path=path,
    )
