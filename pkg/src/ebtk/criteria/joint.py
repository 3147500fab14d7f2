"""n-joint channels: feasibility, symmetrization, constructive witnesses.

A joint channel for ``n`` copies is encoded by its Choi state ``J`` on
``in (x) out^n``. The constraints are that every single-copy marginal
``Tr_{outs except k} J`` equals the base Choi state; trace preservation of
the joint channel follows from any one of them. Symmetry under permuting
output copies is imposed without loss of generality, which lets the affine
projection be written in closed form and the PSD projection be split into
the isotypic blocks of the permutation action.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..channels import Channel, HolevoForm
from ..config import TOL_PSD, SolverConfig
from ..errors import BadShape, DimensionCap
from ..feasibility import FeasibilityOutcome, FeasibilityProblem, Verdict, solve
from ..linalg import (
    hermitian_basis,
    hermitian_part,
    kron,
    partial_trace,
    permutation_indices,
    permute_factors,
)

DEFAULT_DIM_CAP = 4096


@dataclass(frozen=True)
class JointProblem:
    base: Channel
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("a joint problem needs n >= 2 copies")

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.base.dim_in,) + (self.base.dim_out,) * self.n

    @property
    def ambient_dim(self) -> int:
        return self.base.dim_in * self.base.dim_out**self.n


def _output_permutations(din: int, dout: int, n: int):
    """Flat index maps for every permutation of the output copies."""
    dims = (din,) + (dout,) * n
    for perm in itertools.permutations(range(n)):
        yield perm, permutation_indices(dims, (0,) + tuple(1 + p for p in perm))


def symmetrize_joint(j, dims, n: int) -> np.ndarray:
    """Average ``J`` over all permutations of the ``n`` output copies."""
    j = np.asarray(j, dtype=complex)
    din, dout = dims
    if j.shape != (din * dout**n,) * 2:
        raise BadShape(f"J of shape {j.shape} does not match {din} x {dout}^{n}")
    acc = np.zeros_like(j)
    count = 0
    for _, idx in _output_permutations(din, dout, n):
        acc += j[np.ix_(idx, idx)]
        count += 1
    return acc / count


def joint_marginal(j, dims, n: int, copy: int) -> np.ndarray:
    """Reduced state on ``in (x) out_copy``."""
    din, dout = dims
    return partial_trace(j, (din,) + (dout,) * n, [0, 1 + copy])


def marginalize_joint(j, dims, n: int, m: int) -> np.ndarray:
    """Keep the input and the first ``m`` output copies of an ``n``-joint Choi state."""
    din, dout = dims
    return partial_trace(j, (din,) + (dout,) * n, list(range(m + 1)))


def joint_from_holevo(h: HolevoForm, n: int) -> np.ndarray:
    """Joint Choi state ``sum_i (M_i^T/d) (x) tau_i^{(x) n}``: measure once, prepare n copies."""
    d = h.dim_in
    return sum(
        np.kron(m.T / d, kron([tau] * n)) for m, tau in zip(h.povm.effects, h.preparations)
    )


def verify_joint_witness(base: Channel, n: int, j) -> dict:
    """Independent check of a joint witness: PSD and every marginal equal to the base."""
    j = np.asarray(j, dtype=complex)
    dims = base.dims
    residuals = [float(np.linalg.norm(joint_marginal(j, dims, n, k) - base.choi)) for k in range(n)]
    return {
        "min_eigenvalue": float(np.linalg.eigvalsh(hermitian_part(j))[0]),
        "hermitian_deviation": float(np.max(np.abs(j - j.conj().T))),
        "marginal_residuals": residuals,
    }


class _IsotypicBlocks:
    """Orthogonal change of basis block-diagonalizing every permutation-symmetric ``J``.

    The eigenspaces of a generic Hermitian element of the group algebra of
    ``S_n`` (acting on ``out^n``) are invariant under everything commuting
    with the permutations, so symmetric matrices are block diagonal there.
    """

    def __init__(self, din: int, dout: int, n: int, seed: int = 12345):
        rng = np.random.default_rng(seed)
        size = dout**n
        g = np.zeros((size, size))
        eye = np.eye(size)
        for perm in itertools.permutations(range(n)):
            idx = permutation_indices((dout,) * n, perm)
            p = eye[idx]
            g += rng.standard_normal() * (p + p.T)
        w, v = np.linalg.eigh(g)
        scale = max(1.0, np.max(np.abs(w)))
        cuts = np.flatnonzero(np.diff(w) > 1e-7 * scale) + 1
        groups = np.split(np.arange(size), cuts)
        cols, self.slices = [], []
        start = 0
        for grp in groups:
            block_cols = [i * size + c for i in range(din) for c in grp]
            cols.extend(block_cols)
            self.slices.append(slice(start, start + len(block_cols)))
            start += len(block_cols)
        full = np.kron(np.eye(din), v)
        self.u = full[:, cols]
        self.valid = self._self_test(din, dout, n, rng)

    def _self_test(self, din, dout, n, rng) -> bool:
        d = din * dout**n
        x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        x = symmetrize_joint(x + x.conj().T, (din, dout), n)
        xb = self.u.T @ x @ self.u
        mask = np.ones(xb.shape, dtype=bool)
        for s in self.slices:
            mask[s, s] = False
        return float(np.max(np.abs(xb[mask]), initial=0.0)) <= 1e-9 * np.linalg.norm(x)

    def _to_blocks(self, x: np.ndarray):
        # u is real: transform real and imaginary parts separately so every
        # product stays a contiguous real BLAS call; only diagonal blocks are formed
        u = self.u
        xr = np.ascontiguousarray(x.real) @ u
        xi = np.ascontiguousarray(x.imag) @ u
        for s in self.slices:
            us = u[:, s]
            yield s, hermitian_part(us.T @ xr[:, s] + 1j * (us.T @ xi[:, s]))

    def min_eigenvalue(self, x: np.ndarray) -> float:
        return min(float(np.linalg.eigvalsh(b)[0]) for _, b in self._to_blocks(x))

    def project_psd(self, x: np.ndarray) -> np.ndarray:
        u = self.u
        wr = np.zeros(x.shape)
        wi = np.zeros(x.shape)
        for s, blk in self._to_blocks(x):
            w, v = np.linalg.eigh(blk)
            if w[-1] > 0:
                b = (v * np.clip(w, 0.0, None)) @ v.conj().T
                wr[:, s] = u[:, s] @ b.real
                wi[:, s] = u[:, s] @ b.imag
        return hermitian_part((wr @ u.T) + 1j * (wi @ u.T))


class SymmetricJointFeasibility:
    """Structured feasibility instance for a symmetric n-joint Choi state."""

    # Both projections map symmetric matrices to symmetric matrices, so inside
    # the solver loop full re-symmetrization is only needed to wash out
    # roundoff. ``assume_symmetric`` turns that shortcut on; callers passing
    # arbitrary matrices must leave it off.
    resymmetrize_every = 50

    def __init__(self, base: Channel, n: int, use_blocks: bool = True, assume_symmetric: bool = False):
        self.base = base
        self.assume_symmetric = assume_symmetric
        self._calls = 0
        self.n = n
        self.din, self.dout = base.dims
        self.dim = self.din * self.dout**n
        self._perms = [idx for _, idx in _output_permutations(self.din, self.dout, n)]
        # index maps placing (in, out_1) onto (in, out_k) for the embeddings
        dims = (self.din,) + (self.dout,) * n
        self._embeds = []
        for k in range(n):
            order = [0] + list(range(2, n + 1))
            order.insert(k + 1, 1)
            self._embeds.append(permutation_indices(dims, order))
        self._blocks = None
        if use_blocks and n > 1 and self.dout > 1:
            blocks = _IsotypicBlocks(self.din, self.dout, n)
            if blocks.valid:
                self._blocks = blocks

    def symmetrize(self, x) -> np.ndarray:
        acc = np.zeros_like(x)
        for idx in self._perms:
            acc += x[np.ix_(idx, idx)]
        return acc / len(self._perms)

    def _first_marginal(self, x) -> np.ndarray:
        a = self.din * self.dout
        rest = self.dout ** (self.n - 1)
        return np.einsum("aibi->ab", x.reshape(a, rest, a, rest))

    def _embed(self, z, k: int) -> np.ndarray:
        big = np.kron(z, np.eye(self.dout ** (self.n - 1)))
        idx = self._embeds[k]
        return big[np.ix_(idx, idx)]

    def project_affine(self, x) -> np.ndarray:
        """Nearest symmetric matrix whose single-copy marginals all equal the base Choi."""
        x = hermitian_part(np.asarray(x, dtype=complex))
        if not self.assume_symmetric or self._calls % self.resymmetrize_every == 0:
            x = self.symmetrize(x)
        self._calls += 1
        n, d, din = self.n, self.dout, self.din
        r = self.base.choi - self._first_marginal(x)
        z_in = np.einsum("aibi->ab", r.reshape(din, d, din, d)) / (n * d ** (n - 1))
        z = (r - (n - 1) * d ** (n - 2) * np.kron(z_in, np.eye(d))) / d ** (n - 1)
        delta = sum(self._embed(z, k) for k in range(n))
        return hermitian_part(x + delta)

    def project_psd(self, x) -> np.ndarray:
        if self._blocks is not None:
            return self._blocks.project_psd(x)
        w, v = np.linalg.eigh(hermitian_part(x))
        return hermitian_part((v * np.clip(w, 0.0, None)) @ v.conj().T)

    def min_eigenvalue(self, x) -> float:
        if self._blocks is not None:
            return self._blocks.min_eigenvalue(x)
        return float(np.linalg.eigvalsh(hermitian_part(x))[0])

    def constraint_residual(self, x) -> float:
        """Largest Frobenius deviation of a single-copy marginal from the base Choi."""
        x = np.asarray(x)
        return max(
            float(np.linalg.norm(joint_marginal(x, self.base.dims, self.n, k) - self.base.choi))
            for k in range(self.n)
        )

    def check(self, x) -> dict:
        return verify_joint_witness(self.base, self.n, x)


class BlockJointFeasibility(SymmetricJointFeasibility):
    """The symmetric instance with iterates stored in the isotypic basis.

    Symmetric iterates are block diagonal there, so the PSD projection is a
    handful of small eigendecompositions and the affine projection only
    needs the single-copy marginal and its adjoint, both precomputed as
    small per-block tensors. Dense changes of basis happen only when
    roundoff is washed out by re-symmetrizing. Use :meth:`to_original` and
    :meth:`from_original` to move matrices in and out.
    """

    def __init__(self, base: Channel, n: int):
        super().__init__(base, n, use_blocks=True, assume_symmetric=True)
        if self._blocks is None:
            raise ValueError("isotypic blocks unavailable for this instance")
        u, slices = self._blocks.u, self._blocks.slices
        a = self.din * self.dout
        rest = self.dout ** (n - 1)
        self._slices = slices
        # marg[s][a,b,i,j]: first marginal of u_s e_ij u_s^T
        # lift[s][a,b,i,j]: block s of sum_k embed_k(e_ab)
        self._marg, self._lift = [], []
        inverses = [np.argsort(idx) for idx in self._embeds]
        for s in slices:
            us = u[:, s]
            v = us.reshape(a, rest, -1)
            self._marg.append(np.einsum("ari,brj->abij", v, v))
            lift = 0
            for inv in inverses:
                w = us[inv].reshape(a, rest, -1)
                lift = lift + np.einsum("ari,brj->abij", w, w)
            self._lift.append(lift)
        # stacked as real matrices so both maps are single BLAS products
        self._marg_mat = np.concatenate([g.reshape(a * a, -1) for g in self._marg], axis=1)
        self._lift_mat = np.concatenate([h.reshape(a * a, -1) for h in self._lift], axis=1).T.copy()
        self._sizes = [s.stop - s.start for s in slices]

    def to_original(self, x) -> np.ndarray:
        u = self._blocks.u
        return hermitian_part(u @ np.asarray(x).real @ u.T + 1j * (u @ np.asarray(x).imag @ u.T))

    def from_original(self, j) -> np.ndarray:
        u = self._blocks.u
        j = self.symmetrize(hermitian_part(np.asarray(j, dtype=complex)))
        full = u.T @ j.real @ u + 1j * (u.T @ j.imag @ u)
        out = np.zeros_like(full)
        for s in self._slices:
            out[s, s] = full[s, s]
        return hermitian_part(out)

    def project_affine(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        if self._calls % self.resymmetrize_every == 0:
            x = self.from_original(self.to_original(x))
        self._calls += 1
        n, d, din = self.n, self.dout, self.din
        a = self.din * d
        flat = np.concatenate([x[s, s].ravel() for s in self._slices])
        marg = (self._marg_mat @ flat.real + 1j * (self._marg_mat @ flat.imag)).reshape(a, a)
        r = self.base.choi - marg
        z_in = np.einsum("aibi->ab", r.reshape(din, d, din, d)) / (n * d ** (n - 1))
        z = (r - (n - 1) * d ** (n - 2) * np.kron(z_in, np.eye(d))) / d ** (n - 1)
        zf = z.ravel()
        delta = self._lift_mat @ zf.real + 1j * (self._lift_mat @ zf.imag)
        out = np.zeros_like(x)
        pos = 0
        for m, s in zip(self._sizes, self._slices):
            blk = x[s, s] + delta[pos : pos + m * m].reshape(m, m)
            out[s, s] = hermitian_part(blk)
            pos += m * m
        return out

    def project_psd(self, x) -> np.ndarray:
        out = np.zeros_like(x, dtype=complex)
        for s in self._slices:
            w, v = np.linalg.eigh(hermitian_part(x[s, s]))
            if w[-1] > 0:
                out[s, s] = hermitian_part((v * np.clip(w, 0.0, None)) @ v.conj().T)
        return out

    def min_eigenvalue(self, x) -> float:
        return min(float(np.linalg.eigvalsh(hermitian_part(x[s, s]))[0]) for s in self._slices)

    def constraint_residual(self, x) -> float:
        return super().constraint_residual(self.to_original(x))

    def check(self, x) -> dict:
        return verify_joint_witness(self.base, self.n, self.to_original(x))


def explicit_joint_problem(base: Channel, n: int) -> FeasibilityProblem:
    """The same instance as a generic list of trace constraints (small sizes only)."""
    din, dout = base.dims
    dims = (din,) + (dout,) * n
    d = din * dout**n
    cons = []
    local = hermitian_basis(din * dout)
    for k in range(n):
        order = [0] + list(range(2, n + 1))
        order.insert(k + 1, 1)
        for g in local:
            a = permute_factors(np.kron(g, np.eye(dout ** (n - 1))), dims, order)
            cons.append((a, np.vdot(g, base.choi).real))
    swap = (1, 0) + tuple(range(2, n))
    cycle = tuple(range(1, n)) + (0,)
    for gen in {swap, cycle}:
        idx = permutation_indices(dims, (0,) + tuple(1 + p for p in gen))
        for e in hermitian_basis(d):
            cons.append((e - e[np.ix_(idx, idx)], 0.0))
    return FeasibilityProblem(d, cons)


def n_joint_feasibility(
    base: Channel | JointProblem,
    n: int | None = None,
    cfg: SolverConfig | None = None,
    dim_cap: int = DEFAULT_DIM_CAP,
    initial=None,
) -> FeasibilityOutcome:
    """Decide whether ``base`` has an n-joint channel.

    A ``Feasible`` outcome carries the symmetric joint Choi state as witness
    and the per-copy marginal residuals in ``details``; the witness has been
    re-verified by :func:`verify_joint_witness`.
    """
    if isinstance(base, JointProblem):
        base, n = base.base, base.n
    problem = JointProblem(base, int(n))
    if problem.ambient_dim > dim_cap:
        raise DimensionCap(f"ambient dimension {problem.ambient_dim} exceeds cap {dim_cap}")
    # every solver iterate is symmetric up to roundoff
    try:
        fp = BlockJointFeasibility(base, problem.n)
        if initial is not None:
            initial = fp.from_original(initial)
    except ValueError:
        fp = SymmetricJointFeasibility(base, problem.n, assume_symmetric=True)
    cfg = cfg or SolverConfig()
    out = solve(fp, cfg, initial=initial)
    out.details["n"] = problem.n
    out.details["block_psd"] = fp._blocks is not None
    if out.verdict is Verdict.FEASIBLE:
        # The solver stops once the affine iterate is PSD up to TOL_PSD, and
        # partial traces add those small negative parts up. Prefer the cone
        # projection of the witness whenever it still meets the constraints.
        candidates = [out.witness, fp.project_psd(out.witness)]
        if isinstance(fp, BlockJointFeasibility):
            candidates = [fp.symmetrize(fp.to_original(w)) for w in candidates]
        out.witness = candidates[0]
        check = verify_joint_witness(base, problem.n, candidates[0])
        polished = verify_joint_witness(base, problem.n, candidates[1])
        if max(polished["marginal_residuals"]) <= cfg.eps_feas:
            out.witness, check = candidates[1], polished
            out.residual = max(polished["marginal_residuals"])
        out.details["polished"] = out.witness is candidates[1]
        out.details["marginal_residuals"] = check["marginal_residuals"]
        out.details["min_eigenvalue"] = check["min_eigenvalue"]
        if check["min_eigenvalue"] < -TOL_PSD or max(check["marginal_residuals"]) > cfg.eps_feas:
            out.verdict = Verdict.UNDECIDED
            out.details["rejected_witness"] = True
    return out


def isotypic_multiplicities(d: int, n: int) -> list[tuple[tuple[int, ...], int, int]]:
    """(partition, S_n irrep dimension, GL_d multiplicity) for out^n, via hook formulas."""
    out = []
    for lam in _partitions(n):
        if len(lam) > d:
            continue
        hooks, contents = 1, 1
        for i, row in enumerate(lam):
            for j in range(row):
                arm = row - j - 1
                leg = sum(1 for r in lam[i + 1 :] if r > j)
                hooks *= arm + leg + 1
                contents *= d + j - i
        out.append((lam, math.factorial(n) // hooks, contents // hooks))
    return out


def _partitions(n: int, largest: int | None = None):
    largest = largest or n
    if n == 0:
        yield ()
        return
    for first in range(min(n, largest), 0, -1):
        for rest in _partitions(n - first, first):
            yield (first,) + rest
