"""Randomization order, broadcasting channels and QC factorizations.

Each question asks for an unknown channel ``X`` (through its Choi state on
``src (x) dst``) satisfying linear equations of the form
``Tr(G X(R)) = value``. With ``X(R) = d_src Tr_src[(R^T (x) 1) C]`` each
equation is the trace constraint ``Tr[(d_src R^T (x) G) C] = value``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from ..channels import (
    Channel,
    Povm,
    apply,
    compose,
    constant_channel,
    identity_channel,
    preparation_channel,
    qc_channel,
)
from ..config import TOL_PSD, DecompositionConfig, SolverConfig
from ..errors import DimensionCap, DimensionMismatch, InconsistentConstraints
from ..feasibility import FeasibilityOutcome, FeasibilityProblem, Verdict, solve, verify_witness
from ..linalg import hermitian_basis, hermitian_part, partial_trace
from .separable import factored_holevo, ppt_check

EXPLICIT_DIM_CAP = 64
# dense candidate witnesses are only formed up to this Choi dimension
CANDIDATE_DIM_CAP = 1024


def _channel_search_problem(d_src: int, d_dst: int, equations: Iterable[tuple]) -> FeasibilityProblem:
    """Trace-preserving maps ``src -> dst`` subject to ``Tr(G X(R)) = value``."""
    cons = []
    for r, g, value in equations:
        cons.append((d_src * np.kron(np.asarray(r).T, g), value))
    for h in hermitian_basis(d_src):
        cons.append((np.kron(h, np.eye(d_dst)), np.trace(h).real / d_src))
    return FeasibilityProblem(d_src * d_dst, cons)


def _input_basis_images(c: Channel):
    for h in hermitian_basis(c.dim_in):
        yield h, hermitian_part(apply(c, h))


def _as_channel(choi, d_src: int, d_dst: int) -> Optional[Channel]:
    try:
        return Channel(d_src, d_dst, choi)
    except Exception:
        return None


def _candidate_first(
    problem_factory: Callable[[], FeasibilityProblem],
    candidates: list[tuple[str, np.ndarray]],
    residual_fn: Callable[[np.ndarray], float],
    cfg: SolverConfig,
    dim: int,
    dim_cap: int,
) -> FeasibilityOutcome:
    for name, choi in candidates:
        res = residual_fn(choi)
        if res <= cfg.eps_feas and np.linalg.eigvalsh(choi)[0] >= -TOL_PSD:
            return FeasibilityOutcome(
                Verdict.FEASIBLE, choi, res, 0, details={"source": f"candidate:{name}"}
            )
    if dim > dim_cap:
        raise DimensionCap(f"explicit problem dimension {dim} exceeds cap {dim_cap}")
    try:
        problem = problem_factory()
    except InconsistentConstraints as exc:
        # the affine set itself is empty: an exact refutation, no iteration needed
        return FeasibilityOutcome(
            Verdict.LIKELY_INFEASIBLE, None, float("inf"), 0,
            details={"source": "constraints", "inconsistent": str(exc)},
        )
    out = solve(problem, cfg)
    out.details["source"] = "solver"
    out.details["constraint_rank"] = problem.rank
    if out.verdict is Verdict.FEASIBLE:
        check = verify_witness(problem, out.witness, cfg.eps_feas)
        out.details["verified_residual"] = residual_fn(out.witness)
        if not check["ok"]:
            out.verdict = Verdict.UNDECIDED
            out.details["rejected_witness"] = True
    return out


# --- randomization order -----------------------------------------------------------


def order_residual(lhs: Channel, rhs: Channel, alpha_choi) -> float:
    """Frobenius distance between the Choi states of ``alpha o rhs`` and ``lhs``.

    Trace preservation of ``alpha`` is included as a separate term so that a
    non-channel candidate cannot pass.
    """
    d_src, d_dst = rhs.dim_out, lhs.dim_out
    alpha_choi = np.asarray(alpha_choi, dtype=complex)
    s_alpha = d_src * alpha_choi.reshape(d_src, d_dst, d_src, d_dst).transpose(1, 3, 0, 2).reshape(
        d_dst**2, d_src**2
    )
    s = s_alpha @ rhs.transfer_matrix()
    din = lhs.dim_in
    choi = s.reshape(d_dst, d_dst, din, din).transpose(2, 0, 3, 1).reshape(din * d_dst, din * d_dst) / din
    tp = partial_trace(alpha_choi, (d_src, d_dst), [0]) - np.eye(d_src) / d_src
    return float(max(np.linalg.norm(choi - lhs.choi), np.linalg.norm(tp)))


def randomization_order(
    lhs: Channel, rhs: Channel, cfg: SolverConfig | None = None, dim_cap: int = EXPLICIT_DIM_CAP
) -> FeasibilityOutcome:
    """Is ``lhs = alpha o rhs`` for some channel ``alpha``? The witness is the Choi state of alpha."""
    if lhs.dim_in != rhs.dim_in:
        raise DimensionMismatch("channels must share the input space")
    cfg = cfg or SolverConfig()
    d_src, d_dst = rhs.dim_out, lhs.dim_out
    candidates = []
    if d_src == d_dst:
        candidates.append(("identity", identity_channel(d_src).choi))
    lhs_out = [apply(lhs, h) for h in hermitian_basis(lhs.dim_in)]
    sigma = apply(lhs, np.eye(lhs.dim_in) / lhs.dim_in)
    if all(np.allclose(o, np.trace(h) * sigma, atol=1e-12) for o, h in zip(lhs_out, hermitian_basis(lhs.dim_in))):
        candidates.append(("constant", constant_channel(hermitian_part(sigma), d_src).choi))

    def factory():
        eqs = []
        for h, r in _input_basis_images(rhs):
            target = apply(lhs, h)
            for g in hermitian_basis(d_dst):
                eqs.append((r, g, np.vdot(g, target).real))
        return _channel_search_problem(d_src, d_dst, eqs)

    out = _candidate_first(
        factory, candidates, lambda x: order_residual(lhs, rhs, x), cfg, d_src * d_dst, dim_cap
    )
    if out.feasible:
        out.details["alpha"] = _as_channel(out.witness, d_src, d_dst)
    return out


# --- broadcasting -------------------------------------------------------------------


def broadcast_residual(c: Channel, psi_choi) -> float:
    """How far ``psi`` (out -> out (x) out) is from broadcasting ``c``.

    Largest Frobenius deviation of either composed marginal from ``c`` over a
    Hermitian operator basis, together with trace preservation of ``psi``.
    """
    d = c.dim_out
    psi_choi = np.asarray(psi_choi, dtype=complex)
    t = psi_choi.reshape(d, d * d, d, d * d)
    worst = float(np.linalg.norm(partial_trace(psi_choi, (d, d * d), [0]) - np.eye(d) / d))
    for _, r in _input_basis_images(c):
        out = d * np.einsum("ij,iajb->ab", r, t)
        for keep in ([0], [1]):
            worst = max(worst, float(np.linalg.norm(partial_trace(out, (d, d), keep) - r)))
    return worst


def classical_copy_broadcast(d: int) -> np.ndarray:
    """Choi state of ``|i><j| -> delta_ij |ii><ii|`` on ``d``-level outputs."""
    choi = np.zeros((d**3, d**3), dtype=complex)
    for i in range(d):
        k = i * d * d + i * d + i
        choi[k, k] = 1.0 / d
    return choi


def broadcast_feasibility(
    c: Channel, cfg: SolverConfig | None = None, dim_cap: int = EXPLICIT_DIM_CAP
) -> FeasibilityOutcome:
    """Search for ``psi: out -> out (x) out`` whose two composed marginals reproduce ``c``.

    Channels with diagonal outputs are tried first against classical
    duplication, constant channels against ``rho -> Tr(rho) sigma (x) sigma``;
    every candidate is accepted only through :func:`broadcast_residual`.
    """
    cfg = cfg or SolverConfig()
    d = c.dim_out
    if d**3 > max(dim_cap, CANDIDATE_DIM_CAP):
        raise DimensionCap(f"broadcast witness dimension {d**3} exceeds cap {max(dim_cap, CANDIDATE_DIM_CAP)}")
    outs = [r for _, r in _input_basis_images(c)]
    candidates = []
    if all(np.max(np.abs(r - np.diag(np.diag(r)))) <= 1e-12 for r in outs):
        candidates.append(("classical_copy", classical_copy_broadcast(d)))
    sigma = apply(c, np.eye(c.dim_in) / c.dim_in)
    hs = hermitian_basis(c.dim_in)
    if all(np.allclose(r, np.trace(h) * sigma, atol=1e-12) for r, h in zip(outs, hs)):
        candidates.append(("constant", np.kron(np.eye(d) / d, np.kron(sigma, sigma))))

    def factory():
        eqs = []
        eye = np.eye(d)
        for r in outs:
            for g in hermitian_basis(d):
                val = np.vdot(g, r).real
                eqs.append((r, np.kron(g, eye), val))
                eqs.append((r, np.kron(eye, g), val))
        return _channel_search_problem(d, d * d, eqs)

    return _candidate_first(factory, candidates, lambda x: broadcast_residual(c, x), cfg, d**3, dim_cap)


# --- QC factorization ------------------------------------------------------------------


@dataclass
class QcFactorization:
    povm: Povm
    gamma: Channel  # quantum-classical: measure and record
    alpha: Channel  # classical-quantum: prepare
    residual: float
    k: int


def qc_from_holevo(h, c: Channel | None = None) -> QcFactorization:
    gamma = qc_channel(h.povm)
    alpha = preparation_channel(h.preparations)
    res = 0.0 if c is None else float(np.linalg.norm(compose(alpha, gamma).choi - c.choi))
    return QcFactorization(h.povm, gamma, alpha, res, len(h.povm))


def qc_factorization(
    c: Channel, k_max: int | None = None, cfg: DecompositionConfig | None = None, tol: float = 1e-6
) -> Optional[QcFactorization]:
    """Smallest ``k`` with ``c = alpha o gamma`` for a k-outcome QC channel ``gamma``.

    Each ``k`` is attempted by fitting the Choi state with ``k`` terms
    ``A_i (x) tau_i``; restarts are seeded, so ties resolve in seed order.
    """
    if not ppt_check(c).passed:
        return None
    cfg = cfg or DecompositionConfig()
    k_max = k_max or (c.dim_in * c.dim_out) ** 2
    for k in range(1, k_max + 1):
        h, _ = factored_holevo(c, k, cfg, tol)
        if h is None:
            continue
        fac = qc_from_holevo(h, c)
        if fac.residual <= tol:
            return fac
    return None
