"""Finite-dimensional quantum channels in the Schroedinger picture.

A :class:`Channel` is stored through its trace-one Choi state on
``in (x) out``::

    choi = (1/d_in) * sum_ij |i><j| (x) Phi(|i><j|)

so that ``Tr_out(choi) = I/d_in`` expresses trace preservation. Heisenberg
maps are the Hilbert-Schmidt duals: a unital outcome-to-input map ``L``
corresponds to the channel ``Phi`` with ``Tr(Phi(rho) A) = Tr(rho L(A))``.
Commutative outcome algebras are realized as the diagonal matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import TOL_PROB, TOL_PSD, TOL_TP
from .errors import (
    DimensionMismatch,
    InvalidChannel,
    InvalidEnsemble,
    InvalidHolevoForm,
    InvalidPovm,
    NotTracePreserving,
)
from .linalg import as_matrix, check_hermitian, hermitian_part, kron, partial_trace, permute_factors


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def _min_eig(a: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(hermitian_part(a))[0])


def _check_state(rho, name: str = "state", tol: float = TOL_TP) -> np.ndarray:
    rho = check_hermitian(rho, 1e-10)
    if _min_eig(rho) < -TOL_PSD:
        raise InvalidChannel(f"{name} is not positive semidefinite")
    if abs(np.trace(rho).real - 1.0) > tol:
        raise InvalidChannel(f"{name} does not have unit trace")
    return rho


@dataclass(frozen=True, eq=False)
class Channel:
    dim_in: int
    dim_out: int
    choi: np.ndarray

    def __post_init__(self):
        d = self.dim_in * self.dim_out
        choi = as_matrix(self.choi)
        if choi.shape != (d, d):
            raise DimensionMismatch(
                f"Choi shape {choi.shape} does not match {self.dim_in}x{self.dim_out}"
            )
        dev = np.max(np.abs(choi - choi.conj().T))
        if dev > 1e-10:
            raise InvalidChannel(f"Choi matrix is not Hermitian (deviation {dev:.2e})")
        choi = hermitian_part(choi)
        if _min_eig(choi) < -TOL_PSD:
            raise InvalidChannel("Choi matrix is not positive semidefinite (not CP)")
        marg = partial_trace(choi, (self.dim_in, self.dim_out), [0])
        tp_dev = np.max(np.abs(marg - np.eye(self.dim_in) / self.dim_in))
        if tp_dev > TOL_TP:
            raise NotTracePreserving(f"Tr_out(choi) deviates from I/d_in by {tp_dev:.2e}")
        object.__setattr__(self, "choi", _frozen(choi))

    @property
    def dims(self) -> tuple[int, int]:
        return (self.dim_in, self.dim_out)

    def transfer_matrix(self) -> np.ndarray:
        """Matrix ``S`` with ``vec(Phi(X)) = S @ vec(X)`` (row-major vec)."""
        di, do = self.dims
        t = self.choi.reshape(di, do, di, do).transpose(1, 3, 0, 2)
        return di * t.reshape(do * do, di * di)

    def __repr__(self):
        return f"Channel(dim_in={self.dim_in}, dim_out={self.dim_out})"


def channel_from_choi(choi, dim_in: int, dim_out: int) -> Channel:
    return Channel(int(dim_in), int(dim_out), choi)


def apply(c: Channel, rho) -> np.ndarray:
    """Apply the channel to an operator (linear, so non-Hermitian input is allowed)."""
    x = as_matrix(rho)
    if x.shape != (c.dim_in, c.dim_in):
        raise DimensionMismatch(f"input of shape {x.shape} for a channel with dim_in={c.dim_in}")
    t = c.choi.reshape(c.dim_in, c.dim_out, c.dim_in, c.dim_out)
    return c.dim_in * np.einsum("ij,iajb->ab", x, t)


def channel_from_transfer(s, dim_in: int, dim_out: int) -> Channel:
    t = np.asarray(s, dtype=complex).reshape(dim_out, dim_out, dim_in, dim_in)
    choi = t.transpose(2, 0, 3, 1).reshape(dim_in * dim_out, dim_in * dim_out) / dim_in
    return Channel(dim_in, dim_out, choi)


def compose(outer: Channel, inner: Channel) -> Channel:
    """The channel ``rho -> outer(inner(rho))``."""
    if inner.dim_out != outer.dim_in:
        raise DimensionMismatch(
            f"cannot compose: inner outputs {inner.dim_out}, outer expects {outer.dim_in}"
        )
    s = outer.transfer_matrix() @ inner.transfer_matrix()
    return channel_from_transfer(s, inner.dim_in, outer.dim_out)


def tensor(a: Channel, b: Channel) -> Channel:
    """Parallel composition; composite input is ``in_a (x) in_b``."""
    big = kron(a.choi, b.choi)
    dims = (a.dim_in, a.dim_out, b.dim_in, b.dim_out)
    choi = permute_factors(big, dims, (0, 2, 1, 3))
    return Channel(a.dim_in * b.dim_in, a.dim_out * b.dim_out, choi)


# --- Kraus form ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class KrausForm:
    operators: tuple

    def __post_init__(self):
        ops = [as_matrix(k) for k in self.operators]
        if not ops:
            raise NotTracePreserving("empty Kraus list")
        shape = ops[0].shape
        if any(k.shape != shape for k in ops):
            raise DimensionMismatch("Kraus operators have different shapes")
        total = sum(k.conj().T @ k for k in ops)
        dev = np.max(np.abs(total - np.eye(shape[1])))
        if dev > TOL_TP:
            raise NotTracePreserving(f"sum K^dag K deviates from identity by {dev:.2e}")
        object.__setattr__(self, "operators", tuple(_frozen(k) for k in ops))

    @property
    def dim_in(self) -> int:
        return self.operators[0].shape[1]

    @property
    def dim_out(self) -> int:
        return self.operators[0].shape[0]


def channel_from_kraus(k: KrausForm | Sequence) -> Channel:
    if not isinstance(k, KrausForm):
        k = KrausForm(tuple(k))
    di, do = k.dim_in, k.dim_out
    choi = np.zeros((di * do, di * do), dtype=complex)
    for op in k.operators:
        v = op.T.reshape(-1)  # entry (i, a) = K[a, i]
        choi += np.outer(v, v.conj())
    return Channel(di, do, choi / di)


def kraus_from_channel(c: Channel, tol: float = 1e-12) -> KrausForm:
    w, v = np.linalg.eigh(c.choi)
    ops = []
    for lam, vec in zip(w, v.T):
        if lam > tol:
            ops.append(np.sqrt(c.dim_in * lam) * vec.reshape(c.dim_in, c.dim_out).T)
    return KrausForm(tuple(ops))


# --- POVMs and measure-prepare channels ------------------------------------------


@dataclass(frozen=True, eq=False)
class Povm:
    effects: tuple

    def __post_init__(self):
        effs = [check_hermitian(e, 1e-10) for e in self.effects]
        if not effs:
            raise InvalidPovm("a POVM needs at least one effect")
        d = effs[0].shape[0]
        if any(e.shape != (d, d) for e in effs):
            raise InvalidPovm("effects have different dimensions")
        for i, e in enumerate(effs):
            if _min_eig(e) < -TOL_PSD:
                raise InvalidPovm(f"effect {i} is not positive semidefinite")
        dev = np.max(np.abs(sum(effs) - np.eye(d)))
        if dev > TOL_TP:
            raise InvalidPovm(f"effects sum to identity only within {dev:.2e}")
        object.__setattr__(self, "effects", tuple(_frozen(hermitian_part(e)) for e in effs))

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    def __len__(self):
        return len(self.effects)

    def probabilities(self, rho) -> np.ndarray:
        rho = as_matrix(rho)
        return np.array([np.trace(e @ rho).real for e in self.effects])


@dataclass(frozen=True, eq=False)
class HolevoForm:
    """Measure with ``povm``, then prepare ``preparations[i]`` on outcome ``i``."""

    povm: Povm
    preparations: tuple

    def __post_init__(self):
        preps = [as_matrix(p) for p in self.preparations]
        if len(preps) != len(self.povm):
            raise InvalidHolevoForm(
                f"{len(self.povm)} effects but {len(preps)} preparations"
            )
        d = preps[0].shape[0]
        for i, p in enumerate(preps):
            if p.shape != (d, d):
                raise InvalidHolevoForm("preparations have different dimensions")
            try:
                _check_state(p, f"preparation {i}")
            except Exception as exc:
                raise InvalidHolevoForm(str(exc)) from None
        object.__setattr__(self, "preparations", tuple(_frozen(hermitian_part(p)) for p in preps))

    @property
    def dim_in(self) -> int:
        return self.povm.dim

    @property
    def dim_out(self) -> int:
        return self.preparations[0].shape[0]


def holevo_to_channel(h: HolevoForm) -> Channel:
    """Choi = sum_i (M_i^T / d_in) (x) tau_i."""
    d = h.dim_in
    choi = sum(np.kron(m.T / d, tau) for m, tau in zip(h.povm.effects, h.preparations))
    return Channel(d, h.dim_out, choi)


def qc_channel(p: Povm) -> Channel:
    """Measure ``p`` and write the outcome into a diagonal (classical) register."""
    k = len(p)
    preps = []
    for i in range(k):
        e = np.zeros((k, k), dtype=complex)
        e[i, i] = 1.0
        preps.append(e)
    return holevo_to_channel(HolevoForm(p, tuple(preps)))


def preparation_channel(states: Sequence) -> Channel:
    """Classical-to-quantum channel: ``|i><j| -> delta_ij * states[i]``."""
    k = len(states)
    d = as_matrix(states[0]).shape[0]
    choi = np.zeros((k * d, k * d), dtype=complex)
    for i, s in enumerate(states):
        choi[i * d : (i + 1) * d, i * d : (i + 1) * d] = as_matrix(s) / k
    return Channel(k, d, choi)


# --- Ensembles (finite separable decompositions) ------------------------------------


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Weighted product states ``sum_i w_i sigma_i (x) tau_i``."""

    weights: np.ndarray
    left_states: tuple
    right_states: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or len(w) == 0:
            raise InvalidEnsemble("weights must be a non-empty vector")
        if len(self.left_states) != len(w) or len(self.right_states) != len(w):
            raise InvalidEnsemble("weights and state lists differ in length")
        if np.any(w < 0):
            raise InvalidEnsemble("weights must be nonnegative")
        if abs(w.sum() - 1.0) > TOL_PROB:
            raise InvalidEnsemble(f"weights sum to {w.sum():.12f}, not 1")
        left = [as_matrix(s) for s in self.left_states]
        right = [as_matrix(s) for s in self.right_states]
        for group in (left, right):
            for i, s in enumerate(group):
                try:
                    _check_state(s, f"component {i}")
                except Exception as exc:
                    raise InvalidEnsemble(str(exc)) from None
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "left_states", tuple(_frozen(hermitian_part(s)) for s in left))
        object.__setattr__(self, "right_states", tuple(_frozen(hermitian_part(s)) for s in right))

    def __len__(self):
        return len(self.weights)

    @property
    def dims(self) -> tuple[int, int]:
        return (self.left_states[0].shape[0], self.right_states[0].shape[0])

    def reconstruct(self) -> np.ndarray:
        return sum(w * np.kron(s, t) for w, s, t in zip(self.weights, self.left_states, self.right_states))


# --- generators -----------------------------------------------------------------


def identity_channel(d: int) -> Channel:
    return channel_from_kraus([np.eye(d)])


def unitary_channel(u) -> Channel:
    return channel_from_kraus([as_matrix(u)])


def constant_channel(sigma, dim_in: int) -> Channel:
    sigma = as_matrix(sigma)
    return Channel(dim_in, sigma.shape[0], np.kron(np.eye(dim_in) / dim_in, sigma))


def depolarizing(d: int, p: float) -> Channel:
    """``rho -> (1-p) rho + p Tr(rho) I/d``; entanglement breaking iff p >= d/(d+1)."""
    phi = np.eye(d).reshape(-1) / np.sqrt(d)
    choi = (1 - p) * np.outer(phi, phi) + p * np.eye(d * d) / (d * d)
    return Channel(d, d, choi)


def dephasing(d: int) -> Channel:
    """Completely dephasing (classical-copy) channel: keeps only the diagonal."""
    ops = []
    for i in range(d):
        e = np.zeros((d, d))
        e[i, i] = 1.0
        ops.append(e)
    return channel_from_kraus(ops)


def computational_povm(d: int) -> Povm:
    effs = []
    for i in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[i, i] = 1.0
        effs.append(e)
    return Povm(tuple(effs))


def qubit_sic_povm() -> Povm:
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    y = np.array([[0, -1j], [1j, 0]])
    z = np.diag([1.0, -1.0]).astype(complex)
    s = 1 / np.sqrt(3)
    signs = [(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)]
    return Povm(tuple((np.eye(2) + s * (a * x + b * y + c * z)) / 4 for a, b, c in signs))


def _ginibre(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)


def random_unitary(d: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(_ginibre(rng, d, d))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    g = _ginibre(rng, d, rank or d)
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_channel(dim_in: int, dim_out: int, rank: int, seed) -> Channel:
    """Channel from a Haar-like Stinespring isometry (QR of a Ginibre matrix)."""
    if rank < 1:
        raise ValueError("rank must be at least 1")
    if dim_out * rank < dim_in:
        raise ValueError("dim_out * rank must be at least dim_in for an isometry")
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(_ginibre(rng, dim_out * rank, dim_in))
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    ops = [q[k * dim_out : (k + 1) * dim_out, :] for k in range(rank)]
    return channel_from_kraus(ops)


def random_povm(d: int, k: int, rng: np.random.Generator) -> Povm:
    """Wishart effects congruence-normalized to sum to the identity."""
    raw = [g @ g.conj().T for g in (_ginibre(rng, d, d) for _ in range(k))]
    w, v = np.linalg.eigh(sum(raw))
    s = (v / np.sqrt(w)) @ v.conj().T
    effs = [hermitian_part(s @ e @ s) for e in raw]
    # absorb the rounding left in the completeness relation into the last effect
    effs[-1] = effs[-1] + (np.eye(d) - sum(effs))
    return Povm(tuple(effs))


def random_holevo(dim_in: int, dim_out: int, k: int, seed) -> HolevoForm:
    if k < 1:
        raise ValueError("k must be at least 1")
    rng = np.random.default_rng(seed)
    povm = random_povm(dim_in, k, rng)
    preps = tuple(random_density(dim_out, rng) for _ in range(k))
    return HolevoForm(povm, preps)


def choi_distance(a: Channel, b: Channel) -> float:
    if a.dims != b.dims:
        raise DimensionMismatch("channels act between different spaces")
    return float(np.linalg.norm(a.choi - b.choi))


def basis_trace_distance(a: Channel, b: Channel) -> float:
    """Largest trace-norm difference of the outputs on the basis states |i><i|, |+_ij>, |+i_ij>."""
    if a.dims != b.dims:
        raise DimensionMismatch("channels act between different spaces")
    d = a.dim_in
    worst = 0.0
    states = []
    for i in range(d):
        v = np.zeros(d, dtype=complex)
        v[i] = 1
        states.append(np.outer(v, v))
    for i in range(d):
        for j in range(i + 1, d):
            for ph in (1, 1j):
                v = np.zeros(d, dtype=complex)
                v[i], v[j] = 1 / np.sqrt(2), ph / np.sqrt(2)
                states.append(np.outer(v, v.conj()))
    for rho in states:
        diff = apply(a, rho) - apply(b, rho)
        worst = max(worst, float(np.sum(np.abs(np.linalg.eigvalsh(hermitian_part(diff))))))
    return worst
