"""PSD feasibility by alternating projections.

Decides whether ``{X Hermitian : X >= 0, <A_i, X> = b_i}`` is nonempty by
iterating projections onto the affine set and the PSD cone (with Dykstra's
correction on the cone step). There is no dual certificate, so a
``LikelyInfeasible`` verdict is a stall heuristic, not a proof.

Any object exposing ``dim``, ``project_affine``, ``project_psd``,
``constraint_residual`` and ``check`` can be solved; :class:`FeasibilityProblem`
is the generic explicit-constraint implementation and the structured
problems in :mod:`ebtk.criteria` reuse the same driver.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .config import GRAM_DROP_TOL, TOL_PSD, SolverConfig
from .errors import BadShape, InconsistentConstraints
from .linalg import check_hermitian, herm_to_real, hermitian_part, real_to_herm


class Verdict(str, Enum):
    FEASIBLE = "Feasible"
    LIKELY_INFEASIBLE = "LikelyInfeasible"
    UNDECIDED = "Undecided"


@dataclass
class FeasibilityOutcome:
    verdict: Verdict
    witness: Optional[np.ndarray]
    residual: float
    iterations: int
    # residual drop over the trailing stall window when the run ended
    window_drop: Optional[float] = None
    details: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.verdict is Verdict.FEASIBLE


def project_psd(x) -> np.ndarray:
    """Frobenius-nearest PSD matrix: clip negative eigenvalues at zero."""
    w, v = np.linalg.eigh(hermitian_part(x))
    if w[0] >= 0:
        return hermitian_part(x)
    w = np.clip(w, 0.0, None)
    return hermitian_part((v * w) @ v.conj().T)


def negative_part_norm(x) -> float:
    w = np.linalg.eigvalsh(hermitian_part(x))
    return float(np.sqrt(np.sum(np.clip(w, None, 0.0) ** 2)))


def _gram_schmidt(rows: np.ndarray, rhs: np.ndarray, drop_tol: float):
    """Orthonormalize constraint rows, dropping dependent ones after a consistency check."""
    m, n = rows.shape
    q = np.zeros((min(m, n), n))
    t = np.zeros(min(m, n))
    k = 0
    for a, b in zip(rows, rhs):
        norm_a = np.linalg.norm(a)
        if norm_a == 0:
            if abs(b) > 1e-9:
                raise InconsistentConstraints("zero constraint with nonzero right-hand side")
            continue
        v, beta = a.copy(), float(b)
        for _ in range(2):  # classical Gram-Schmidt, re-orthogonalized once
            c = q[:k] @ v
            v -= q[:k].T @ c
            beta -= c @ t[:k]
        nv = np.linalg.norm(v)
        if nv <= drop_tol * norm_a:
            if abs(beta) > 1e-8 * max(1.0, abs(b)):
                raise InconsistentConstraints(
                    f"dependent constraint disagrees with the others by {abs(beta):.3e}"
                )
            continue
        q[k] = v / nv
        t[k] = beta / nv
        k += 1
    return q[:k].copy(), t[:k].copy()


class FeasibilityProblem:
    """Explicit instance: ``X >= 0`` on ``C^dim`` with ``Tr(A_i X) = b_i``."""

    def __init__(self, dim: int, constraints: Sequence[tuple], drop_tol: float = GRAM_DROP_TOL):
        self.dim = int(dim)
        mats, vals = [], []
        for a, b in constraints:
            a = check_hermitian(a, 1e-10)
            if a.shape != (self.dim, self.dim):
                raise BadShape(f"constraint of shape {a.shape} for dim {self.dim}")
            mats.append(hermitian_part(a))
            vals.append(float(np.real(b)))
        self.constraints = list(zip(mats, vals))
        rows = np.array([herm_to_real(a) for a in mats]) if mats else np.zeros((0, self.dim**2))
        self._q, self._t = _gram_schmidt(rows, np.array(vals), drop_tol)

    @property
    def rank(self) -> int:
        return self._q.shape[0]

    def project_affine(self, x) -> np.ndarray:
        v = herm_to_real(hermitian_part(x))
        if self.rank:
            v = v - self._q.T @ (self._q @ v - self._t)
        return real_to_herm(v, self.dim)

    def project_psd(self, x) -> np.ndarray:
        return project_psd(x)

    def constraint_residual(self, x) -> float:
        """Euclidean norm of the vector ``(Tr(A_i X) - b_i)_i``."""
        x = np.asarray(x)
        r = [np.vdot(a, x).real - b for a, b in self.constraints]
        return float(np.linalg.norm(r)) if r else 0.0

    def check(self, x) -> dict:
        return verify_witness(self, x)


def project_affine(x, problem) -> np.ndarray:
    return problem.project_affine(x)


def verify_witness(problem, x, eps_feas: float | None = None) -> dict:
    """Independent re-check of a candidate witness.

    Uses a fresh eigenvalue computation and the problem's own constraint
    evaluation; nothing from the iteration state is reused.
    """
    x = np.asarray(x, dtype=complex)
    herm_dev = float(np.max(np.abs(x - x.conj().T))) if x.size else 0.0
    min_eig = float(np.linalg.eigvalsh(hermitian_part(x))[0])
    cres = float(problem.constraint_residual(x))
    report = {"hermitian_deviation": herm_dev, "min_eigenvalue": min_eig, "constraint_residual": cres}
    if eps_feas is not None:
        report["ok"] = herm_dev <= 1e-10 and min_eig >= -TOL_PSD and cres <= eps_feas
    return report


def solve(problem, cfg: SolverConfig | None = None, initial=None, callback=None) -> FeasibilityOutcome:
    """Alternating projections between the affine set and the PSD cone.

    ``Feasible`` once the affine iterate is PSD within ``TOL_PSD`` and the
    combined residual (cone violation and constraint violation) is at most
    ``eps_feas``. ``LikelyInfeasible`` when the distance between the two
    iterates has stopped decreasing (drop over ``stall_window`` iterations
    below ``stall_tol`` or below ``stall_rtol`` times the distance) while
    still above ``100 * eps_feas``.

    ``callback(it, x, y)``, if given, sees the affine iterate ``x`` and the
    cone iterate ``y`` after every iteration.
    """
    cfg = cfg or SolverConfig()
    n = problem.dim
    x0 = np.zeros((n, n), dtype=complex) if initial is None else hermitian_part(initial)
    x = problem.project_affine(x0)
    p = np.zeros_like(x)
    history: list[float] = []
    best = np.inf
    dykstra = cfg.method == "dykstra"
    min_eig_fn = getattr(problem, "min_eigenvalue", None) or (
        lambda m: float(np.linalg.eigvalsh(hermitian_part(m))[0])
    )
    gap = np.inf
    for it in range(1, cfg.max_iters + 1):
        if dykstra:
            y = problem.project_psd(x + p)
            p = x + p - y
        else:
            y = problem.project_psd(x)
        x = problem.project_affine(y)
        if callback is not None:
            callback(it, x, y)
        gap = float(np.linalg.norm(x - y))
        history.append(gap)
        if gap <= cfg.eps_feas:
            min_eig = min_eig_fn(x)
            if min_eig >= -TOL_PSD:
                cres = float(problem.constraint_residual(x))
                residual = max(negative_part_norm(x), cres) if min_eig < 0 else cres
                if residual <= cfg.eps_feas:
                    return FeasibilityOutcome(
                        Verdict.FEASIBLE, x, residual, it, details={"min_eigenvalue": min_eig}
                    )
        best = min(best, gap)
        if it > cfg.stall_window:
            drop = history[-cfg.stall_window - 1] - gap
            if drop < max(cfg.stall_tol, cfg.stall_rtol * gap) and gap > 100 * cfg.eps_feas:
                return FeasibilityOutcome(
                    Verdict.LIKELY_INFEASIBLE, None, gap, it, window_drop=float(drop),
                    details={"best_residual": best},
                )
    drop = history[-cfg.stall_window - 1] - gap if len(history) > cfg.stall_window else None
    return FeasibilityOutcome(
        Verdict.UNDECIDED, None, gap, cfg.max_iters, window_drop=drop,
        details={"best_residual": best},
    )
