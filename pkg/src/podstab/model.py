"""Spectrally truncated heat operator with interval actuators.

The state space is the span of the first ``N`` Dirichlet sine modes
``phi_j(x) = sqrt(2/L) sin(j pi x / L)`` on ``(0, L)``.  In that basis the
operator ``d^2/dx^2 + a`` is diagonal with eigenvalues ``a - (j pi / L)^2``
and an indicator actuator on ``(c, d)`` has the closed-form coefficients
``<phi_j, 1_(c,d)>``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import matkit
from .errors import ConfigError, DegenerateSpectrum, Overflow
from .tolerances import ToleranceProfile, resolve

__all__ = [
    "HeatModelSpec",
    "EvolutionModel",
    "SpectralSplit",
    "build_model",
    "spectral_split",
    "kalman_rank",
    "check_y0_richness",
    "semigroup_apply",
]


@dataclass(frozen=True)
class HeatModelSpec:
    """Parameters of the truncated heat model.

    Parameters
    ----------
    length : float
        Domain length ``L``.
    potential_a : float
        Constant potential ``a``.
    truncation_n : int
        Number of sine modes kept (at least 4).
    actuators : tuple of (float, float)
        Actuator intervals ``(c, d)`` with ``0 <= c < d <= L``.
    """

    length: float
    potential_a: float
    truncation_n: int
    actuators: tuple[tuple[float, float], ...]

    def __post_init__(self):
        acts = tuple((float(c), float(d)) for c, d in self.actuators)
        object.__setattr__(self, "actuators", acts)
        object.__setattr__(self, "length", float(self.length))
        object.__setattr__(self, "potential_a", float(self.potential_a))
        if not (math.isfinite(self.length) and self.length > 0):
            raise ConfigError("length must be a positive number")
        if not math.isfinite(self.potential_a):
            raise ConfigError("potential_a must be finite")
        if isinstance(self.truncation_n, bool) or int(self.truncation_n) != self.truncation_n:
            raise ConfigError("truncation_n must be an integer")
        object.__setattr__(self, "truncation_n", int(self.truncation_n))
        if self.truncation_n < 4:
            raise ConfigError("truncation_n must be at least 4")
        if not acts:
            raise ConfigError("at least one actuator interval is required")
        for c, d in acts:
            if not (0.0 <= c < d <= self.length):
                raise ConfigError(f"actuator ({c}, {d}) must satisfy 0 <= c < d <= L")

    def to_dict(self) -> dict:
        return {
            "length": self.length,
            "potential_a": self.potential_a,
            "truncation_n": self.truncation_n,
            "actuators": [list(iv) for iv in self.actuators],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HeatModelSpec":
        try:
            return cls(
                length=d["length"],
                potential_a=d["potential_a"],
                truncation_n=d["truncation_n"],
                actuators=tuple(tuple(iv) for iv in d["actuators"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid model spec: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "HeatModelSpec":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"model spec is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("model spec must be a JSON object")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "HeatModelSpec":
        return cls.from_json(Path(path).read_text())


@dataclass(frozen=True)
class EvolutionModel:
    """Diagonal generator ``diag(a_diag)`` and control matrix ``b`` (N x p)."""

    a_diag: np.ndarray
    b: np.ndarray
    basis_note: str = "sine-spectral"
    spec: HeatModelSpec | None = field(default=None, compare=False)

    @property
    def n(self) -> int:
        return self.a_diag.size

    @property
    def p(self) -> int:
        return self.b.shape[1]

    def a_matrix(self) -> np.ndarray:
        return np.diag(self.a_diag)


@dataclass(frozen=True)
class SpectralSplit:
    """Unstable/stable splitting of a diagonal spectrum.

    ``beta_ell`` is ``None`` when there is no unstable mode; ``gamma`` is the
    decay rate of the stable part, i.e. minus the largest negative eigenvalue.
    """

    ell: int
    p_ell: np.ndarray
    beta_ell: float | None
    gamma: float


def _mode_integrals(length: float, n: int, c: float, d: float) -> np.ndarray:
    j = np.arange(1, n + 1, dtype=float)
    k = j * (math.pi / length)
    return math.sqrt(2.0 / length) * (np.cos(k * c) - np.cos(k * d)) / k


def build_model(spec: HeatModelSpec, profile: ToleranceProfile | None = None) -> EvolutionModel:
    """Assemble the truncated model; raises DegenerateSpectrum on a zero eigenvalue."""
    prof = resolve(profile)
    j = np.arange(1, spec.truncation_n + 1, dtype=float)
    lam = spec.potential_a - (j * (math.pi / spec.length)) ** 2
    hit = np.flatnonzero(np.abs(lam) <= prof.zero_eig)
    if hit.size:
        raise DegenerateSpectrum(f"eigenvalue {lam[hit[0]]:.3e} of mode {hit[0] + 1} is zero")
    b = np.column_stack([_mode_integrals(spec.length, spec.truncation_n, c, d) for c, d in spec.actuators])
    return EvolutionModel(lam, b, "sine-spectral", spec)


def spectral_split(model: EvolutionModel) -> SpectralSplit:
    lam = model.a_diag
    ell = int(np.sum(lam > 0))
    p_ell = np.zeros((model.n, model.n))
    p_ell[:ell, :ell] = np.eye(ell)
    beta = float(lam[ell - 1]) if ell > 0 else None
    gamma = float(-lam[ell]) if ell < model.n else math.inf
    return SpectralSplit(ell, p_ell, beta, gamma)


def controllability_matrix(a, b) -> np.ndarray:
    a = matkit.as_matrix(a, "a")
    b = matkit.as_matrix(b, "b")
    blocks = [b]
    for _ in range(a.shape[0] - 1):
        blocks.append(a @ blocks[-1])
    return np.hstack(blocks)


def kalman_rank(a, b, profile: ToleranceProfile | None = None) -> int:
    """Rank of ``[b, ab, ..., a^(k-1) b]`` counted as ``sigma_i > rank_rel * sigma_1``."""
    prof = resolve(profile)
    a = matkit.as_matrix(a, "a")
    b = matkit.as_matrix(b, "b")
    if a.shape[0] != a.shape[1] or b.shape[0] != a.shape[0]:
        raise ValueError(f"inconsistent shapes a{a.shape}, b{b.shape}")
    if a.shape[0] == 0:
        return 0
    ctrb = controllability_matrix(a, b)
    if not np.any(ctrb):
        return 0
    sig = matkit.svd(ctrb, prof).sigma
    return int(np.sum(sig > prof.rank_rel * sig[0]))


def check_y0_richness(model: EvolutionModel, split: SpectralSplit, y0, profile: ToleranceProfile | None = None) -> bool:
    """True iff every unstable spectral component of ``y0`` is nonzero."""
    prof = resolve(profile)
    y = np.asarray(y0, dtype=float).ravel()
    if y.size != model.n:
        raise ValueError(f"y0 has length {y.size}, expected {model.n}")
    nrm = float(np.linalg.norm(y))
    if split.ell == 0:
        return True
    return bool(np.all(np.abs(y[: split.ell]) > prof.richness_rel * nrm)) and nrm > 0


def semigroup_apply(model: EvolutionModel, t: float, y) -> np.ndarray:
    """``S(t) y = exp(t A) y`` for the diagonal generator."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    y = np.asarray(y, dtype=float).ravel()
    if y.size != model.n:
        raise ValueError(f"y has length {y.size}, expected {model.n}")
    try:
        with np.errstate(over="raise"):
            return np.exp(t * model.a_diag) * y
    except FloatingPointError as exc:
        raise Overflow(f"exp(t * lambda_1) overflows at t = {t}") from exc
