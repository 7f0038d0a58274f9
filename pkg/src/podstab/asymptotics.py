"""Numerical checks of the convergence statements behind reduced-order stabilization.

Two families of checks live here:

* :func:`appendix_sweep` follows the Riccati solution of a synthetic block
  system ``A(alpha) = [[a1, alpha c3], [alpha c4, a2]]`` as ``(eps, alpha)``
  shrink along a diagonal grid, and verifies that the solution concentrates
  on the unstable block.
* :func:`lemma_suite` sweeps the snapshot count ``n`` on a heat model and
  measures how the POD subspace approaches the unstable eigenspace.

"o(1) in trend" is made concrete as: the last value is below the first,
with an explicit final/initial ratio threshold where one is stated.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import matkit
from .closedloop import assemble_closed_loop, decay_rate_estimate
from .errors import InsufficientOrder, PoorInitialState, StabError
from .model import EvolutionModel, build_model, check_y0_richness, kalman_rank, spectral_split
from .pod import deficiency_csv, generate_snapshots, pod_reduce, projection_deficiency, sigma_csv
from .riccati import check_stabilizable, hurwitz_margin, reduce_operators, solve_are
from .tolerances import ToleranceProfile, resolve

__all__ = [
    "BlockFixture",
    "BlockRiccatiTrace",
    "SweepPointError",
    "block_partition",
    "shipped_fixture",
    "appendix_sweep",
    "block_system_report",
    "refine_grid",
    "lemma_suite",
    "OPERATOR_NORM_NAMES",
    "log_slope",
    "trend_decreasing",
    "report_json",
]


class SweepPointError(StabError):
    """A solver failure inside a sweep, tagged with the offending grid point."""

    def __init__(self, point, cause: Exception):
        super().__init__(f"grid point {point}: {type(cause).__name__}: {cause}")
        self.point = point
        self.cause = cause


# ---------------------------------------------------------------------------
# helpers


def log_slope(x, y) -> float:
    """Least-squares slope of ``ln y`` against ``x``."""
    x = np.asarray(x, dtype=float)
    ly = np.log(np.asarray(y, dtype=float))
    xc = x - x.mean()
    return float(np.dot(xc, ly - ly.mean()) / np.dot(xc, xc))


def trend_decreasing(values, ratio: float | None = None) -> bool:
    """Last value below the first (and below ``ratio * first`` when given)."""
    v = [float(x) for x in values]
    if len(v) < 2:
        return False
    if ratio is not None:
        return v[-1] <= ratio * v[0]
    return v[-1] < v[0]


def _non_increasing_after_first(values, slack: float = 1e-12) -> bool:
    v = [float(x) for x in values]
    return all(b <= a * (1 + slack) + slack for a, b in zip(v[1:], v[2:]))


def block_partition(p, ell: int):
    """Blocks ``(P1, P2, P3)``: top-left ``ell x ell``, bottom-right, top-right."""
    p = matkit.as_matrix(p, "p")
    m = p.shape[0]
    if p.shape != (m, m):
        raise ValueError("p must be square")
    if not 0 < ell < m:
        raise ValueError(f"ell must satisfy 0 < ell < {m}")
    return p[:ell, :ell].copy(), p[ell:, ell:].copy(), p[:ell, ell:].copy()


# ---------------------------------------------------------------------------
# synthetic block system


@dataclass(frozen=True)
class BlockFixture:
    """Block system with an anti-stable block ``a1`` and a Hurwitz block ``a2``.

    ``A(alpha) = [[a1, alpha c3], [alpha c4, a2]]`` and ``B = [b1; b2]``.
    """

    a1: np.ndarray
    a2: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    c3: np.ndarray
    c4: np.ndarray

    def __post_init__(self):
        for name in ("a1", "a2", "b1", "b2", "c3", "c4"):
            object.__setattr__(self, name, matkit.as_matrix(getattr(self, name), name))
        l, r = self.a1.shape[0], self.a2.shape[0]
        ok = (
            self.a1.shape == (l, l)
            and self.a2.shape == (r, r)
            and self.b1.shape[0] == l
            and self.b2.shape == (r, self.b1.shape[1])
            and self.c3.shape == (l, r)
            and self.c4.shape == (r, l)
        )
        if not ok:
            raise ValueError("inconsistent block shapes")

    @property
    def dim_l(self) -> int:
        return self.a1.shape[0]

    @property
    def dim_rest(self) -> int:
        return self.a2.shape[0]

    def a(self, alpha: float) -> np.ndarray:
        return np.block([[self.a1, alpha * self.c3], [alpha * self.c4, self.a2]])

    def b(self) -> np.ndarray:
        return np.vstack([self.b1, self.b2])

    def check(self, profile: ToleranceProfile | None = None) -> dict:
        """Standing assumptions: Kalman condition on ``(a1, b1)``, ``-a1`` and ``a2`` Hurwitz."""
        return {
            "kalman_rank_a1_b1": kalman_rank(self.a1, self.b1, profile),
            "dim_l": self.dim_l,
            "margin_minus_a1": hurwitz_margin(-self.a1, profile),
            "margin_a2": hurwitz_margin(self.a2, profile),
        }

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("a1", "a2", "b1", "b2", "c3", "c4")}

    @classmethod
    def from_dict(cls, d: dict) -> "BlockFixture":
        return cls(**{k: d[k] for k in ("a1", "a2", "b1", "b2", "c3", "c4")})


def shipped_fixture() -> BlockFixture:
    """Scalar blocks: a1 = 1, a2 = -2, b1 = b2 = 1, c3 = c4 = 1."""
    return BlockFixture([[1.0]], [[-2.0]], [[1.0]], [[1.0]], [[1.0]], [[1.0]])


@dataclass
class BlockRiccatiTrace:
    grid: list = field(default_factory=list)
    p1_norm: list = field(default_factory=list)
    p2_norm: list = field(default_factory=list)
    p3_norm: list = field(default_factory=list)
    k_gain: list = field(default_factory=list)
    abscissa: list = field(default_factory=list)
    # block-diagonal reference (alpha set to zero) at the same eps
    q1_norm: list = field(default_factory=list)
    q2_norm: list = field(default_factory=list)
    q3_norm: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps", "alpha", "p1_norm", "p2_norm", "p3_norm", "q1_norm", "q2_norm", "q3_norm", "abscissa", "k_gain"])
        for i, (e, a) in enumerate(self.grid):
            k = " ".join(repr(float(x)) for x in np.ravel(self.k_gain[i]))
            vals = [self.p1_norm[i], self.p2_norm[i], self.p3_norm[i], self.q1_norm[i], self.q2_norm[i], self.q3_norm[i], self.abscissa[i]]
            w.writerow([repr(float(e)), repr(float(a))] + [repr(float(v)) for v in vals] + [k])
        return buf.getvalue()


def appendix_sweep(fixture: BlockFixture, eps_grid, alpha_grid, profile: ToleranceProfile | None = None) -> BlockRiccatiTrace:
    """Solve the Riccati equation along the diagonal ``zip(eps_grid, alpha_grid)``.

    Raises :class:`SweepPointError` naming the grid point when a solve fails.
    """
    prof = resolve(profile)
    eps = [float(e) for e in eps_grid]
    alp = [float(a) for a in alpha_grid]
    if len(eps) != len(alp) or not eps:
        raise ValueError("eps_grid and alpha_grid must be nonempty and of equal length")
    for g in (eps, alp):
        if any(x <= 0 for x in g) or any(b > a for a, b in zip(g, g[1:])):
            raise ValueError("grids must be positive and descending")
    ell = fixture.dim_l
    b = fixture.b()
    out = BlockRiccatiTrace()
    for e, a in zip(eps, alp):
        try:
            sol = solve_are(fixture.a(a), b, e, prof)
            ref = solve_are(fixture.a(0.0), b, e, prof)
        except StabError as exc:
            raise SweepPointError((e, a), exc) from exc
        p1, p2, p3 = block_partition(sol.p, ell)
        q1, q2, q3 = block_partition(ref.p, ell)
        out.grid.append((e, a))
        out.p1_norm.append(matkit.op_norm2(p1, prof))
        out.p2_norm.append(matkit.op_norm2(p2, prof))
        out.p3_norm.append(matkit.op_norm2(p3, prof))
        out.q1_norm.append(matkit.op_norm2(q1, prof))
        out.q2_norm.append(matkit.op_norm2(q2, prof))
        out.q3_norm.append(matkit.op_norm2(q3, prof))
        out.k_gain.append(sol.k_gain)
        out.abscissa.append(sol.closed_loop_abscissa)
    return out


def refine_grid(grid) -> list[float]:
    """Insert the geometric midpoint between consecutive entries (2x refinement)."""
    g = [float(x) for x in grid]
    out = [g[0]]
    for a, b in zip(g, g[1:]):
        out += [math.sqrt(a * b), b]
    return out


def block_system_report(
    fixture: BlockFixture,
    eps_grid,
    alpha_grid,
    profile: ToleranceProfile | None = None,
    decay_ratio: float = 0.05,
    gain_rel: float = 0.05,
    eta_rel: float = 0.2,
) -> tuple[dict, BlockRiccatiTrace]:
    """Pass/fail sections for the block-system statements, plus the diagonal trace."""
    prof = resolve(profile)
    ell = fixture.dim_l
    b = fixture.b()
    assumptions = fixture.check(prof)
    assumptions_pass = (
        assumptions["kalman_rank_a1_b1"] == ell and assumptions["margin_minus_a1"] > 0 and assumptions["margin_a2"] > 0
    )

    # block-diagonal system at eps = 0: the stable block needs no control
    base = solve_are(fixture.a(0.0), b, 0.0, prof)
    p1, p2, p3 = block_partition(base.p, ell)
    n1, n2, n3 = (matkit.op_norm2(x, prof) for x in (p1, p2, p3))
    exact_zero = {
        "pass": bool(n2 <= 1e-8 * n1 and n3 <= 1e-8 * n1),
        "values": {"p1_norm": n1, "p2_norm": n2, "p3_norm": n3},
        "thresholds": {"relative_to_p1": 1e-8},
    }

    trace = appendix_sweep(fixture, eps_grid, alpha_grid, prof)
    p2_ok = _non_increasing_after_first(trace.p2_norm) and trend_decreasing(trace.p2_norm, decay_ratio)
    p3_ok = _non_increasing_after_first(trace.p3_norm) and trend_decreasing(trace.p3_norm, decay_ratio)
    vanishing = {
        "pass": bool(p2_ok and p3_ok),
        "values": {"p2_norm": trace.p2_norm, "p3_norm": trace.p3_norm, "grid": trace.grid},
        "thresholds": {"final_over_initial": decay_ratio},
    }

    k_ref = np.hstack([-fixture.b1.T @ p1, np.zeros((b.shape[1], fixture.dim_rest))])
    k_last = trace.k_gain[-1]
    rel = matkit.fro(k_last - k_ref) / matkit.fro(k_ref)
    gain = {
        "pass": bool(rel <= gain_rel),
        "values": {"k_smallest_grid_point": k_last.tolist(), "k_reference": k_ref.tolist(), "relative_error": rel},
        "thresholds": {"relative_error": gain_rel},
    }

    eta = min(-x for x in trace.abscissa)
    fine = appendix_sweep(fixture, refine_grid(eps_grid), refine_grid(alpha_grid), prof)
    eta_fine = min(-x for x in fine.abscissa)
    uniform = {
        "pass": bool(eta > 0 and eta_fine > 0 and abs(eta_fine - eta) <= eta_rel * eta),
        "values": {"eta": eta, "eta_refined": eta_fine, "abscissa": trace.abscissa},
        "thresholds": {"eta_positive": 0.0, "refinement_relative_change": eta_rel},
    }

    report = {
        "fixture": fixture.to_dict(),
        "assumptions": {"pass": bool(assumptions_pass), "values": assumptions, "thresholds": {}},
        "block_diagonal_exact_zero": exact_zero,
        "off_blocks_vanish": vanishing,
        "gain_limit": gain,
        "uniform_hurwitz": uniform,
    }
    return report, trace


# ---------------------------------------------------------------------------
# POD convergence suite

OPERATOR_NORM_NAMES = (
    "stable_part_of_pod_l",  # ||(I - P_l) Pi_l||
    "a_stable_part_of_pod_l",  # ||A (I - P_l) Pi_l||
    "pod_l_minus_p_l",  # ||Pi_l - P_l||
    "g_times_p_l",  # ||Pi_G P_l||
    "compressed_a_difference",  # ||Pi_l A Pi_l - P_l A P_l||
    "g_a_pod_l",  # ||Pi_G A Pi_l||
    "pod_l_a_g",  # ||Pi_l A Pi_G||
    "g_unstable_a_g",  # ||Pi_G P_l A P_l Pi_G||
)


def _operator_norms(model: EvolutionModel, v: np.ndarray, ell: int, prof) -> dict:
    n_state = model.n
    a = np.diag(model.a_diag)
    p_l = np.zeros((n_state, n_state))
    p_l[:ell, :ell] = np.eye(ell)
    q = np.eye(n_state) - p_l
    vl, vg = v[:, :ell], v[:, ell:]
    pi_l = vl @ vl.T
    pi_g = vg @ vg.T
    mats = (
        q @ pi_l,
        a @ q @ pi_l,
        pi_l - p_l,
        pi_g @ p_l,
        pi_l @ a @ pi_l - p_l @ a @ p_l,
        pi_g @ a @ pi_l,
        pi_l @ a @ pi_g,
        pi_g @ p_l @ a @ p_l @ pi_g,
    )
    return {name: matkit.op_norm2(mat, prof) for name, mat in zip(OPERATOR_NORM_NAMES, mats)}


def _diagonal_path(n_grid, eps_grid):
    """Pairs running jointly along ``n`` ascending and ``eps`` descending."""
    ns = sorted(n_grid)
    es = sorted(eps_grid, reverse=True)
    k = min(len(ns), len(es))
    ni = np.rint(np.linspace(0, len(ns) - 1, k)).astype(int)
    ei = np.rint(np.linspace(0, len(es) - 1, k)).astype(int)
    return [(int(ns[i]), float(es[j])) for i, j in zip(ni, ei)]


def _truncation_check(model: EvolutionModel, y0, t_step: float, m: int, n: int, eps: float, prof) -> dict:
    """Rerun the pipeline with half the modes and report how much the results move.

    Reported only: the adequacy of a truncation is a modelling judgment.
    """
    spec = model.spec
    if spec is None or spec.truncation_n // 2 < 4:
        return {"pass": None, "values": {}, "thresholds": {}, "skipped": "needs a model spec with at least 8 modes"}
    rows = {}
    for size in (spec.truncation_n // 2, spec.truncation_n):
        mdl = model if size == spec.truncation_n else build_model(replace(spec, truncation_n=size), prof)
        split = spectral_split(mdl)
        y = np.asarray(y0, dtype=float)[:size]
        basis = pod_reduce(generate_snapshots(mdl, y, t_step, n, split, prof), m, prof)
        red = reduce_operators(mdl, basis)
        sol = solve_are(red.a_red, red.b_red, eps, prof)
        absc = matkit.spectral_abscissa(assemble_closed_loop(mdl, basis, sol).a_cl, prof.abscissa_tol, prof)
        rows[size] = {"sigma": basis.sigma[: split.ell + 1].tolist(), "abscissa": absc}
    half, full = rows[spec.truncation_n // 2], rows[spec.truncation_n]
    sig_change = max(abs(a - b) / b for a, b in zip(half["sigma"], full["sigma"])) if full["sigma"] else 0.0
    return {
        "pass": None,
        "values": {
            "n": n,
            "eps": eps,
            "modes": [spec.truncation_n // 2, spec.truncation_n],
            "sigma": [half["sigma"], full["sigma"]],
            "abscissa": [half["abscissa"], full["abscissa"]],
            "sigma_relative_change": sig_change,
            "abscissa_change": abs(half["abscissa"] - full["abscissa"]),
        },
        "thresholds": {},
        "reported": "comparison of the truncation against half as many modes",
    }


def lemma_suite(
    model: EvolutionModel,
    y0,
    t_step: float,
    m: int,
    n_grid,
    eps_grid,
    profile: ToleranceProfile | None = None,
    stabilizable_from: int = 15,
    hurwitz_from: int = 15,
    hurwitz_fraction: float = 0.8,
    sigma_growth: float = 5.0,
    sigma_bound_ratio: float = 1.1,
    pod_l_gap_final: float = 0.05,
    gain_leak_ratio: float = 0.1,
    rate_window: tuple[float, float] = (1.3, 0.7),
    horizon: float = 20.0,
    samples: int = 64,
) -> tuple[dict, dict]:
    """Sweep ``n`` and measure the POD convergence quantities.

    Returns ``(report, tables)``: the report has one section per statement
    with ``pass``, ``values`` and ``thresholds``; ``tables`` holds CSV text
    for the per-``n`` sweeps.
    """
    prof = resolve(profile)
    split = spectral_split(model)
    ell = split.ell
    if m < ell:
        raise InsufficientOrder(f"m = {m} is smaller than ell = {ell}")
    if not check_y0_richness(model, split, y0, prof):
        raise PoorInitialState("y0 has a vanishing component on an unstable mode")
    ns = sorted(int(n) for n in n_grid)
    if not ns:
        raise ValueError("n_grid is empty")
    y0 = np.asarray(y0, dtype=float).ravel()

    deficiency, sigmas, norms, stab, margins, j_opts = [], [], [], [], [], []
    for n in ns:
        snaps = generate_snapshots(model, y0, t_step, n, split, prof)
        basis = pod_reduce(snaps, m, prof)
        deficiency.append(projection_deficiency(basis, split, prof))
        sigmas.append(basis.sigma[: ell + 2].tolist())
        j_opts.append(basis.j_opt)
        if 0 < ell < m:
            norms.append(_operator_norms(model, basis.v, ell, prof))
            g = basis.v[:, ell:]
            g_stable = g.copy()
            g_stable[:ell] = 0.0
            block = g_stable.T @ (model.a_diag[:, None] * g_stable)
            margins.append(hurwitz_margin(block, prof))
        red = reduce_operators(model, basis)
        stab.append(check_stabilizable(red.a_red, red.b_red, prof))

    report: dict = {"setup": {"ell": ell, "beta_ell": split.beta_ell, "gamma": split.gamma, "m": m, "t_step": t_step, "n_grid": ns}}
    tables: dict = {}

    # projector bound: log-deficiency affine in n with slope about -beta T
    if ell > 0 and len(ns) >= 2 and all(d > 0 for d in deficiency):
        slope = log_slope(ns, deficiency)
        target = -split.beta_ell * t_step
        lo, hi = rate_window[0] * target, rate_window[1] * target
        report["projector_rate"] = {
            "pass": bool(lo <= slope <= hi),
            "values": {"deficiency": deficiency, "slope": slope, "target_slope": target},
            "thresholds": {"slope_min": lo, "slope_max": hi},
        }
    else:
        report["projector_rate"] = {"pass": None, "values": {"deficiency": deficiency}, "thresholds": {}, "skipped": "no unstable mode or zero deficiency"}

    # singular values: the first ell blow up, the next one stays bounded
    sig = np.array([s + [0.0] * (ell + 2 - len(s)) for s in sigmas])
    growth_ok = bool(ell == 0 or (np.all(np.diff(sig[:, :ell], axis=0) > 0) and np.all(sig[-1, :ell] >= sigma_growth * sig[0, :ell])))
    nxt = sig[:, ell] if sig.shape[1] > ell else np.zeros(len(ns))
    bound_ratio = float(nxt.max() / nxt.min()) if nxt.min() > 0 else math.inf
    report["singular_values"] = {
        "pass": bool(growth_ok and bound_ratio <= sigma_bound_ratio),
        "growth_pass": growth_ok,
        "bounded_pass": bool(bound_ratio <= sigma_bound_ratio),
        # empirical blow-up rates, reported without a target
        "values": {
            "sigma": sig.tolist(),
            "next_max_over_min": bound_ratio,
            "log_slope_per_snapshot": [log_slope(ns, sig[:, i]) if len(ns) >= 2 else None for i in range(ell)],
        },
        "thresholds": {"growth_factor": sigma_growth, "next_max_over_min": sigma_bound_ratio},
    }

    # optimal value stays below the geometric-series bound
    rest = float(np.linalg.norm(y0[ell:]))
    q = math.exp(-2.0 * split.gamma * t_step)
    c1 = rest**2 * q / (1.0 - q)
    report["optimal_value_bound"] = {
        "pass": bool(all(j <= c1 * (1 + 1e-9) for j in j_opts)),
        "values": {"j_opt": j_opts},
        "thresholds": {"c1": c1},
    }

    # the eight operator norms
    if norms:
        series = {k: [d[k] for d in norms] for k in OPERATOR_NORM_NAMES}
        per = {k: trend_decreasing(v) for k, v in series.items()}
        final_gap = series["pod_l_minus_p_l"][-1]
        report["operator_limits"] = {
            "pass": bool(all(per.values()) and final_gap < pod_l_gap_final),
            "per_norm_pass": per,
            "values": series,
            "thresholds": {"trend": "last < first", "pod_l_minus_p_l_final": pod_l_gap_final},
        }
        late = [mg for n, mg in zip(ns, margins) if n >= hurwitz_from]
        thr = hurwitz_fraction * split.gamma
        report["g_block_hurwitz"] = {
            "pass": bool(late and all(mg >= thr for mg in late)),
            "values": {"margin": margins},
            "thresholds": {"margin_min": thr, "from_n": hurwitz_from},
        }
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n"] + list(OPERATOR_NORM_NAMES) + ["g_block_margin"])
        for n, d, mg in zip(ns, norms, margins):
            w.writerow([n] + [repr(float(d[k])) for k in OPERATOR_NORM_NAMES] + [repr(float(mg))])
        tables["operator_norms.csv"] = buf.getvalue()
    else:
        report["operator_limits"] = {"pass": None, "values": {}, "thresholds": {}, "skipped": "requires 0 < ell < m"}
        report["g_block_hurwitz"] = {"pass": None, "values": {}, "thresholds": {}, "skipped": "requires 0 < ell < m"}

    late_stab = [s for n, s in zip(ns, stab) if n >= stabilizable_from]
    report["reduced_stabilizable"] = {
        "pass": bool(late_stab and all(late_stab)),
        "values": {"stabilizable": stab},
        "thresholds": {"from_n": stabilizable_from},
    }

    # feedback leakage into the stable modes along a joint (n up, eps down) path
    path = _diagonal_path(ns, eps_grid)
    leak, gaps = [], []
    q_stable = np.eye(model.n)
    q_stable[:ell, :ell] = 0.0
    for n, e in path:
        snaps = generate_snapshots(model, y0, t_step, n, split, prof)
        basis = pod_reduce(snaps, m, prof)
        red = reduce_operators(model, basis)
        sol = solve_are(red.a_red, red.b_red, e, prof)
        leak.append(matkit.op_norm2(sol.k_gain @ basis.v.T @ q_stable, prof))
        sys = assemble_closed_loop(model, basis, sol)
        g_star = decay_rate_estimate(sys, horizon, samples, prof)
        g_eps = hurwitz_margin(red.a_red + red.b_red @ sol.k_gain, prof)
        gaps.append(abs(g_star - min(split.gamma, g_eps)))
    report["gain_leakage"] = {
        "pass": bool(trend_decreasing(leak, gain_leak_ratio)),
        "values": {"path": path, "leak_norm": leak, "decayrate_gap": gaps},
        "thresholds": {"final_over_initial": gain_leak_ratio},
    }

    report["truncation"] = _truncation_check(model, y0, t_step, m, ns[-1], min(eps_grid), prof)

    tables["sigma.csv"] = sigma_csv(zip(ns, sigmas))
    tables["deficiency.csv"] = deficiency_csv((n, m, d) for n, d in zip(ns, deficiency))
    return report, tables


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, default=_jsonable)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(f"not JSON serializable: {type(x).__name__}")
