"""Experiment configs, sweep orchestration and deterministic report files."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import asymptotics
from .closedloop import verify_theorem
from .errors import ConfigError, StabError
from .model import HeatModelSpec, build_model, check_y0_richness, kalman_rank, spectral_split
from .tolerances import DEFAULT, ToleranceProfile

__all__ = [
    "ExperimentConfig",
    "RunManifest",
    "load_config",
    "make_y0",
    "cmd_stabilize",
    "cmd_lemmas",
    "cmd_model",
    "cmd_plot",
    "render_svg",
    "read_numeric_csv",
    "sweep_csv",
    "thread_cap",
]

Y0_MODES = ("all_ones", "random_seeded", "explicit")


@dataclass(frozen=True)
class ExperimentConfig:
    model: HeatModelSpec
    y0_mode: str
    t_step: float
    n_values: tuple[int, ...]
    m: int
    eps_values: tuple[float, ...]
    horizon: float = 20.0
    samples: int = 64
    output_dir: str = "out"
    y0_seed: int | None = None
    y0_vector: tuple[float, ...] | None = None
    tolerance_overrides: dict = field(default_factory=dict)
    block_system: dict = field(default_factory=dict)

    @property
    def profile(self) -> ToleranceProfile:
        return DEFAULT.with_overrides(self.tolerance_overrides)

    def to_dict(self) -> dict:
        d = {
            "model": self.model.to_dict(),
            "y0_mode": self.y0_mode,
            "t_step": self.t_step,
            "n_values": list(self.n_values),
            "m": self.m,
            "eps_values": list(self.eps_values),
            "horizon": self.horizon,
            "samples": self.samples,
            "output_dir": self.output_dir,
            "tolerance_profile": dict(self.tolerance_overrides),
            "block_system": self.block_system,
        }
        if self.y0_seed is not None:
            d["y0_seed"] = self.y0_seed
        if self.y0_vector is not None:
            d["y0_vector"] = list(self.y0_vector)
        return d


def _number(d: dict, key: str, kind=float, default=None):
    if key not in d:
        if default is None:
            raise ConfigError(f"missing config key '{key}'")
        return default
    val = d[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"'{key}' must be a number")
    if kind is int:
        if int(val) != val:
            raise ConfigError(f"'{key}' must be an integer")
        return int(val)
    if not math.isfinite(val):
        raise ConfigError(f"'{key}' must be finite")
    return float(val)


def parse_config(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    if "model" not in d or not isinstance(d["model"], dict):
        raise ConfigError("missing config object 'model'")
    spec = HeatModelSpec.from_dict(d["model"])
    mode = d.get("y0_mode", "all_ones")
    if mode not in Y0_MODES:
        raise ConfigError(f"y0_mode must be one of {Y0_MODES}")
    seed = vec = None
    if mode == "random_seeded":
        seed = _number(d, "y0_seed", int)
    elif mode == "explicit":
        raw = d.get("y0_vector")
        if not isinstance(raw, list) or len(raw) != spec.truncation_n:
            raise ConfigError(f"y0_vector must be a list of {spec.truncation_n} numbers")
        try:
            vec = tuple(float(x) for x in raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"y0_vector: {exc}") from exc
    t_step = _number(d, "t_step")
    if not t_step > 0:
        raise ConfigError("t_step must be positive")
    ns = d.get("n_values")
    if not isinstance(ns, list) or not ns:
        raise ConfigError("n_values must be a nonempty list")
    if any(isinstance(n, bool) or not isinstance(n, int) or n < 1 for n in ns):
        raise ConfigError("n_values must hold positive integers")
    eps = d.get("eps_values")
    if not isinstance(eps, list) or not eps:
        raise ConfigError("eps_values must be a nonempty list")
    if any(isinstance(e, bool) or not isinstance(e, (int, float)) or not (e >= 0 and math.isfinite(e)) for e in eps):
        raise ConfigError("eps_values must hold nonnegative numbers")
    m = _number(d, "m", int)
    if m < 1:
        raise ConfigError("m must be at least 1")
    horizon = _number(d, "horizon", float, 20.0)
    samples = _number(d, "samples", int, 64)
    if not horizon > 0 or samples < 4:
        raise ConfigError("horizon must be positive and samples at least 4")
    out = d.get("output_dir", "out")
    if not isinstance(out, str) or not out:
        raise ConfigError("output_dir must be a nonempty string")
    tol = d.get("tolerance_profile") or {}
    if not isinstance(tol, dict):
        raise ConfigError("tolerance_profile must be an object")
    try:
        DEFAULT.with_overrides(tol)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"tolerance_profile: {exc}") from exc
    app = d.get("block_system") or {}
    if not isinstance(app, dict):
        raise ConfigError("block_system must be an object")
    return ExperimentConfig(
        model=spec,
        y0_mode=mode,
        t_step=t_step,
        n_values=tuple(ns),
        m=m,
        eps_values=tuple(float(e) for e in eps),
        horizon=horizon,
        samples=samples,
        output_dir=out,
        y0_seed=seed,
        y0_vector=vec,
        tolerance_overrides=dict(tol),
        block_system=app,
    )


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(data)


def make_y0(cfg: ExperimentConfig) -> np.ndarray:
    n = cfg.model.truncation_n
    if cfg.y0_mode == "all_ones":
        return np.ones(n)
    if cfg.y0_mode == "random_seeded":
        return np.random.default_rng(cfg.y0_seed).standard_normal(n)
    return np.array(cfg.y0_vector, dtype=float)


@dataclass
class RunManifest:
    command: str
    config: dict
    runs: list = field(default_factory=list)
    files: list = field(default_factory=list)
    exit_code: int = 0

    def to_dict(self) -> dict:
        return {"command": self.command, "config": self.config, "runs": self.runs, "files": self.files, "exit_code": self.exit_code}


def thread_cap(jobs: int) -> int:
    """Worker count: ``STAB_THREADS`` when set, else 1."""
    raw = os.environ.get("STAB_THREADS", "")
    try:
        cap = int(raw) if raw.strip() else 1
    except ValueError:
        raise ConfigError(f"STAB_THREADS must be an integer, got {raw!r}") from None
    return max(1, min(cap, max(jobs, 1)))


def _fmt(x: float) -> str:
    return repr(float(x))


def _tag(x: float) -> str:
    return f"{x:g}".replace("+", "")


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "eps", "abscissa", "gamma_star", "gamma_eps", "verdict"])
    for r in rows:
        w.writerow([r["n"], _fmt(r["eps"]), _fmt(r["abscissa"]), _fmt(r["gamma_star"]), _fmt(r["gamma_eps"]), r["verdict"]])
    return buf.getvalue()


class _Output:
    """Writes files under one directory and records their hashes."""

    def __init__(self, root: Path):
        self.root = root
        self.files: dict[str, str] = {}
        try:
            root.mkdir(parents=True, exist_ok=True)
            probe = root / ".write_probe"
            probe.write_text("")
            probe.unlink()
        except OSError as exc:
            raise ConfigError(f"output directory {root} is not writable: {exc}") from exc

    def path(self, rel: str) -> Path:
        p = self.root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def record(self, rel: str) -> None:
        self.files[rel] = hashlib.sha256(self.path(rel).read_bytes()).hexdigest()

    def write(self, rel: str, text: str) -> None:
        self.path(rel).write_text(text)
        self.record(rel)

    def inventory(self) -> list:
        return [{"path": k, "sha256": v} for k, v in sorted(self.files.items())]


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=asymptotics._jsonable) + "\n"


def _finish(out: _Output, manifest: RunManifest) -> RunManifest:
    manifest.files = out.inventory()
    out.path("manifest.json").write_text(_dump(manifest.to_dict()))
    return manifest


def cmd_stabilize(cfg: ExperimentConfig, output_dir: str | None = None) -> RunManifest:
    """Run the full pipeline for every ``(n, eps)`` pair and write the reports.

    Solver failures are recorded per run and give exit code 3; a closed loop
    that is not stabilized is a verdict, not a failure.
    """
    prof = cfg.profile
    out = _Output(Path(output_dir or cfg.output_dir))
    model = build_model(cfg.model, prof)
    y0 = make_y0(cfg)
    jobs = [(int(n), float(e)) for n in cfg.n_values for e in cfg.eps_values]

    def work(job):
        n, e = job
        rel = f"trajectories/traj_n{n}_eps{_tag(e)}.csv"
        try:
            rep = verify_theorem(model, y0, cfg.t_step, cfg.m, n, e, cfg.horizon, cfg.samples, out.path(rel), profile=prof)
            return n, e, rel, rep, None
        except StabError as exc:
            return n, e, rel, None, exc

    with ThreadPoolExecutor(max_workers=thread_cap(len(jobs))) as pool:
        results = list(pool.map(work, jobs))

    manifest = RunManifest("run", cfg.to_dict())
    rows = []
    for n, e, rel, rep, exc in results:
        if exc is not None:
            manifest.runs.append({"n": n, "eps": e, "status": "error", "error": type(exc).__name__, "message": str(exc)})
            manifest.exit_code = 3
            continue
        out.record(rel)
        rep_rel = f"reports/report_n{n}_eps{_tag(e)}.json"
        # paths inside reports are relative to the output root
        out.write(rep_rel, _dump(replace(rep, trajectory_csv_path=rel).to_dict()))
        manifest.runs.append({"n": n, "eps": e, "status": "ok", "verdict": rep.verdict})
        rows.append({"n": n, "eps": e, "abscissa": rep.abscissa, "gamma_star": rep.gamma_star, "gamma_eps": rep.gamma_eps, "verdict": rep.verdict})
    out.write("sweep.csv", sweep_csv(rows))
    return _finish(out, manifest)


def cmd_lemmas(cfg: ExperimentConfig, output_dir: str | None = None) -> RunManifest:
    """Run the POD convergence suite and the block-system sweep; write report and CSVs."""
    prof = cfg.profile
    out = _Output(Path(output_dir or cfg.output_dir))
    model = build_model(cfg.model, prof)
    y0 = make_y0(cfg)
    manifest = RunManifest("lemmas", cfg.to_dict())

    app = cfg.block_system
    fixture = asymptotics.BlockFixture.from_dict(app["fixture"]) if "fixture" in app else asymptotics.shipped_fixture()
    grid = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5]
    eps_grid = app.get("eps_grid", grid)
    alpha_grid = app.get("alpha_grid", grid)

    try:
        pod_report, tables = asymptotics.lemma_suite(model, y0, cfg.t_step, cfg.m, cfg.n_values, cfg.eps_values, prof, horizon=cfg.horizon, samples=cfg.samples)
        app_report, trace = asymptotics.block_system_report(fixture, eps_grid, alpha_grid, prof)
    except StabError as exc:
        manifest.runs.append({"status": "error", "error": type(exc).__name__, "message": str(exc)})
        manifest.exit_code = 3
        return _finish(out, manifest)

    report = {"pod_convergence": pod_report, "block_riccati": app_report}
    out.write("lemmas_report.json", _dump(report))
    for name, text in sorted(tables.items()):
        out.write(name, text)
    out.write("block_trace.csv", trace.to_csv())
    for group, sections in report.items():
        for name, sec in sections.items():
            if isinstance(sec, dict) and "pass" in sec:
                manifest.runs.append({"section": f"{group}.{name}", "status": "ok", "pass": sec["pass"]})
    return _finish(out, manifest)


def cmd_model(cfg: ExperimentConfig) -> str:
    """Plain-text summary of the spectrum, the split and the Kalman ranks."""
    prof = cfg.profile
    model = build_model(cfg.model, prof)
    split = spectral_split(model)
    ell = split.ell
    lines = [
        f"N = {model.n}, actuators = {model.p}",
        "eigenvalues: " + " ".join(f"{x:.6g}" for x in model.a_diag),
        f"ell = {ell}",
        f"beta_ell = {split.beta_ell:.6g}" if split.beta_ell is not None else "beta_ell = none (no unstable mode)",
        f"gamma = {split.gamma:.6g}",
    ]
    if ell > 0:
        a_l = np.diag(model.a_diag[:ell])
        lines.append(f"kalman rank (unstable block, B) = {kalman_rank(a_l, model.b[:ell], prof)} of {ell}")
        y0 = make_y0(cfg)
        lines.append(f"kalman rank (unstable block, y0) = {kalman_rank(a_l, y0[:ell], prof)} of {ell}")
    lines.append(f"y0 rich = {check_y0_richness(model, split, make_y0(cfg), prof)}")
    return "\n".join(lines) + "\n"


def read_numeric_csv(path) -> tuple[list[str], np.ndarray]:
    """Header and float data of a CSV; non-numeric columns are dropped.

    Raises :class:`ConfigError` for a missing or empty file, ragged rows, or
    fewer than two numeric columns.
    """
    try:
        text = Path(path).read_text()
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read CSV {path}: {exc}") from exc
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if len(rows) < 2:
        raise ConfigError(f"CSV {path} has no data rows")
    header, body = rows[0], rows[1:]
    if any(len(r) != len(header) for r in body):
        raise ConfigError(f"CSV {path} has rows of unequal length")
    keep, cols = [], []
    for j, name in enumerate(header):
        try:
            cols.append([float(r[j]) for r in body])
        except ValueError:
            continue
        keep.append(name)
    if len(keep) < 2:
        raise ConfigError(f"CSV {path} needs at least two numeric columns")
    data = np.array(cols).T
    if not np.all(np.isfinite(data)):
        raise ConfigError(f"CSV {path} contains non-finite values")
    return keep, data


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _ticks(lo: float, hi: float, log: bool) -> list[float]:
    if log:
        return [float(e) for e in range(math.floor(lo), math.ceil(hi) + 1)]
    if hi == lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / 2))
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (step * mult) <= 6:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    return [first + i * step for i in range(int((hi - first) / step + 1e-9) + 1)]


def render_svg(header: list[str], data: np.ndarray, logy: bool = False, width: int = 640, height: int = 400) -> str:
    """Line plot of every column against the first; one polyline per column."""
    x = data[:, 0]
    ys = data[:, 1:]
    if logy:
        if np.any(ys <= 0):
            raise ConfigError("log scale needs positive y values")
        ys = np.log10(ys)
    pad_l, pad_r, pad_t, pad_b = 70, 20, 20, 50
    xlo, xhi = float(x.min()), float(x.max())
    ylo, yhi = float(ys.min()), float(ys.max())
    if xhi == xlo:
        xlo, xhi = xlo - 0.5, xhi + 0.5
    if yhi == ylo:
        ylo, yhi = ylo - 0.5, yhi + 0.5

    def px(v):
        return pad_l + (v - xlo) / (xhi - xlo) * (width - pad_l - pad_r)

    def py(v):
        return height - pad_b - (v - ylo) / (yhi - ylo) * (height - pad_t - pad_b)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad_l}" y1="{height - pad_b}" x2="{width - pad_r}" y2="{height - pad_b}" stroke="black"/>',
        f'<line x1="{pad_l}" y1="{pad_t}" x2="{pad_l}" y2="{height - pad_b}" stroke="black"/>',
    ]
    for t in _ticks(xlo, xhi, False):
        if xlo <= t <= xhi:
            out.append(f'<text x="{px(t):.2f}" y="{height - pad_b + 18}" font-size="11" text-anchor="middle">{t:g}</text>')
    for t in _ticks(ylo, yhi, logy):
        if ylo <= t <= yhi:
            label = f"1e{int(t)}" if logy else f"{t:g}"
            out.append(f'<text x="{pad_l - 6}" y="{py(t) + 4:.2f}" font-size="11" text-anchor="end">{label}</text>')
    out.append(f'<text x="{(pad_l + width - pad_r) / 2:.2f}" y="{height - 10}" font-size="12" text-anchor="middle">{header[0]}</text>')
    for j in range(ys.shape[1]):
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, ys[:, j]))
        color = _PALETTE[j % len(_PALETTE)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{width - pad_r - 4}" y="{pad_t + 14 * (j + 1)}" font-size="11" text-anchor="end" fill="{color}">{header[j + 1]}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_plot(csv_path, out_svg, logy: bool = False) -> Path:
    header, data = read_numeric_csv(csv_path)
    svg = render_svg(header, data, logy)
    out = Path(out_svg)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(svg)
    except OSError as exc:
        raise ConfigError(f"cannot write {out}: {exc}") from exc
    return out
