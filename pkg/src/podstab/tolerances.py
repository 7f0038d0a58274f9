"""Central tolerance profile.

Every numerical operation accepts an optional ``profile`` argument; when it
is omitted the module-level :data:`DEFAULT` is used.  Overrides coming from
an experiment config are applied with :meth:`ToleranceProfile.with_overrides`.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class ToleranceProfile:
    # LU: pivot below lu_pivot * ||a||_F is treated as singular
    lu_pivot: float = 1e-13
    # Jacobi SVD / eigensolver
    jacobi_tol: float = 1e-15
    jacobi_max_sweeps: int = 50
    # matrix sign Newton iteration
    sign_tol: float = 1e-11
    sign_max_iter: int = 100
    sign_check: float = 1e-8
    # numerical rank: sigma_i > rank_rel * sigma_1
    rank_rel: float = 1e-10
    # bisection width for spectral abscissa
    abscissa_tol: float = 1e-6
    # zero-eigenvalue rejection for the heat model
    zero_eig: float = 1e-12
    # y0 richness: |y0_j| > richness_rel * ||y0||
    richness_rel: float = 1e-12
    # Hautus test: ||row|| > hautus_rel * ||b||_2
    hautus_rel: float = 1e-10
    # POD uniqueness warning: sigma_m - sigma_{m+1} <= gap_rel * sigma_1
    gap_rel: float = 1e-10

    def with_overrides(self, overrides: dict | None) -> "ToleranceProfile":
        if not overrides:
            return self
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise KeyError(f"unknown tolerance keys: {sorted(unknown)}")
        return replace(self, **overrides)

    def as_dict(self) -> dict:
        return asdict(self)


DEFAULT = ToleranceProfile()


def resolve(profile: ToleranceProfile | None) -> ToleranceProfile:
    return DEFAULT if profile is None else profile
