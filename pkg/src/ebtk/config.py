"""Numerical tolerances and solver/run configuration records.

All test assertions and library checks read their thresholds from here so
that there is a single place to change them.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

TOL_HERM = 1e-12  # absolute, per entry
TOL_PSD = 1e-9  # min eigenvalue allowed below zero
TOL_RECON = 1e-10  # relative Frobenius error of eigen-reconstruction
TOL_TP = 1e-9  # trace preservation / POVM completeness
TOL_PROB = 1e-10  # probability vectors summing to one
EPS_FEAS = 1e-7
EPS_SEP = 1e-6
GRAM_DROP_TOL = 1e-10


@dataclass(frozen=True)
class SolverConfig:
    """Settings for the alternating-projection feasibility solver.

    ``method`` is ``"dykstra"`` (default) or ``"alternating"``; the latter
    drops the correction term and is Fejer monotone.
    """

    eps_feas: float = EPS_FEAS
    max_iters: int = 50_000
    stall_window: int = 1_000
    stall_tol: float = 1e-12
    # a window drop below stall_rtol * gap also counts as a stall
    stall_rtol: float = 1e-6
    method: str = "dykstra"

    def __post_init__(self):
        if self.eps_feas <= 0 or self.stall_tol <= 0 or self.stall_rtol < 0:
            raise ValueError("solver tolerances must be positive")
        if self.max_iters < 1 or self.stall_window < 1:
            raise ValueError("iteration counts must be positive")
        if self.method not in ("dykstra", "alternating"):
            raise ValueError(f"unknown solver method {self.method!r}")


@dataclass(frozen=True)
class DecompositionConfig:
    """Settings for the product-ensemble search used to certify separability."""

    eps_sep: float = EPS_SEP
    max_iters: int = 400
    restarts: int = 4
    seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce a report; embedded in every CLI output."""

    eps_feas: float = EPS_FEAS
    eps_sep: float = EPS_SEP
    max_iters: int = 50_000
    stall_window: int = 1_000
    joint_levels: tuple[int, ...] = (2, 3)
    seed: int = 0
    dim_cap: int = 4096
    broadcast: bool = True

    def __post_init__(self):
        if self.eps_feas <= 0 or self.eps_sep <= 0:
            raise ValueError("eps_feas and eps_sep must be positive")
        if self.max_iters < 1 or self.stall_window < 1 or self.dim_cap < 1:
            raise ValueError("max_iters, stall_window and dim_cap must be positive")
        levels = tuple(int(n) for n in self.joint_levels)
        if any(n < 2 or n > 6 for n in levels):
            raise ValueError(f"joint_levels must lie in 2..6, got {list(levels)}")
        object.__setattr__(self, "joint_levels", levels)

    def solver(self) -> SolverConfig:
        return SolverConfig(
            eps_feas=self.eps_feas, max_iters=self.max_iters, stall_window=self.stall_window
        )

    def decomposition(self) -> DecompositionConfig:
        return DecompositionConfig(eps_sep=self.eps_sep, seed=self.seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["joint_levels"] = list(self.joint_levels)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config field(s): {sorted(unknown)}")
        kwargs = dict(data)
        if "joint_levels" in kwargs:
            kwargs["joint_levels"] = tuple(kwargs["joint_levels"])
        return cls(**kwargs)

    def merged(self, **overrides) -> "RunConfig":
        d = self.to_dict()
        d.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig.from_dict(d)


DEFAULT_RUN = RunConfig()
