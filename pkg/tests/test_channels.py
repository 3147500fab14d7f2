import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import PAULI_X, PAULI_Y, PAULI_Z, PHI_PLUS, random_state
from ebtk.channels import (
    Channel,
    Ensemble,
    HolevoForm,
    KrausForm,
    Povm,
    apply,
    channel_from_kraus,
    compose,
    computational_povm,
    constant_channel,
    dephasing,
    depolarizing,
    holevo_to_channel,
    identity_channel,
    kraus_from_channel,
    qc_channel,
    qubit_sic_povm,
    random_channel,
    random_holevo,
    tensor,
)
from ebtk.errors import InvalidChannel, InvalidEnsemble, InvalidPovm, NotTracePreserving
from ebtk.linalg import permute_factors

BELL = np.outer(PHI_PLUS, PHI_PLUS)


def basis_proj(d, i):
    e = np.zeros((d, d), dtype=complex)
    e[i, i] = 1
    return e


def test_identity_kraus_choi():
    assert np.allclose(channel_from_kraus([np.eye(2)]).choi, BELL)


def test_dephasing_kraus_choi():
    c = channel_from_kraus([basis_proj(2, 0), basis_proj(2, 1)])
    assert np.allclose(c.choi, np.diag([0.5, 0, 0, 0.5]))


@pytest.mark.parametrize("p", [0.0, 0.3, 0.75, 1.0])
def test_depolarizing_from_paulis(p):
    ops = [np.sqrt(1 - p) * np.eye(2)] + [np.sqrt(p / 3) * s for s in (PAULI_X, PAULI_Y, PAULI_Z)]
    c = channel_from_kraus(ops)
    # Pauli-twirled Bell state: weight 1-p on Phi+, p/3 on each other Bell state
    assert np.allclose(np.linalg.eigvalsh(c.choi), sorted([p / 3] * 3 + [1 - p]))
    assert np.allclose(c.choi, depolarizing(2, 4 * p / 3).choi)


def test_apply_examples(rng):
    rho = random_state(2, rng)
    assert np.allclose(apply(identity_channel(2), rho), rho)
    assert np.allclose(apply(depolarizing(2, 1.0), rho), np.eye(2) / 2)
    plus = np.full((2, 2), 0.5)
    assert np.allclose(apply(dephasing(2), plus), np.eye(2) / 2)


@given(st.integers(0, 10_000))
def test_apply_agrees_with_kraus(seed):
    rng = np.random.default_rng(seed)
    c = random_channel(2, 3, 2, seed)
    k = kraus_from_channel(c)
    rho = random_state(2, rng)
    assert np.allclose(apply(c, rho), sum(a @ rho @ a.conj().T for a in k.operators), atol=1e-12)


def test_compose_examples(rng):
    c = random_channel(2, 2, 2, 5)
    assert np.allclose(compose(identity_channel(2), c).choi, c.choi)
    sigma = random_state(3, rng)
    k = constant_channel(sigma, 2)
    assert np.allclose(compose(k, c).choi, k.choi)
    dp = compose(dephasing(2), depolarizing(2, 0.4))
    for rho in (basis_proj(2, 0), np.full((2, 2), 0.5), random_state(2, rng)):
        inner = 0.6 * rho + 0.4 * np.eye(2) / 2
        assert np.allclose(apply(dp, rho), np.diag(np.diag(inner)))


@given(st.integers(0, 10_000))
def test_compose_associative(seed):
    a, b, c = random_channel(2, 3, 2, seed), random_channel(3, 2, 2, seed + 1), random_channel(2, 2, 3, seed + 2)
    lhs = compose(compose(c, b), a)
    rhs = compose(c, compose(b, a))
    assert np.max(np.abs(lhs.choi - rhs.choi)) < 1e-10


def test_tensor_examples(rng):
    assert np.allclose(tensor(identity_channel(2), identity_channel(2)).choi, identity_channel(4).choi)
    s, t = random_state(2, rng), random_state(3, rng)
    lhs = tensor(constant_channel(s, 2), constant_channel(t, 2))
    assert np.allclose(lhs.choi, constant_channel(np.kron(s, t), 4).choi)
    # (dephasing (x) id) on a Bell state
    out = apply(tensor(dephasing(2), identity_channel(2)), BELL)
    assert np.allclose(out, np.diag([0.5, 0, 0, 0.5]))


@given(st.integers(0, 10_000))
def test_tensor_is_permuted_kron(seed):
    a, b = random_channel(2, 3, 2, seed), random_channel(3, 2, 2, seed + 7)
    expected = permute_factors(np.kron(a.choi, b.choi), (2, 3, 3, 2), (0, 2, 1, 3))
    assert np.array_equal(tensor(a, b).choi, expected)


def test_holevo_examples(rng):
    sigma, tau = random_state(2, rng), random_state(2, rng)
    const = holevo_to_channel(HolevoForm(Povm((np.eye(2),)), (sigma,)))
    assert np.allclose(const.choi, constant_channel(sigma, 2).choi)
    cc = holevo_to_channel(HolevoForm(computational_povm(2), (basis_proj(2, 0), basis_proj(2, 1))))
    assert np.allclose(cc.choi, dephasing(2).choi)
    half = holevo_to_channel(HolevoForm(Povm((np.eye(2) / 2, np.eye(2) / 2)), (sigma, tau)))
    assert np.allclose(half.choi, constant_channel((sigma + tau) / 2, 2).choi)


def test_qc_examples():
    q = qc_channel(Povm((np.eye(2),)))
    assert q.dim_out == 1 and np.allclose(q.choi, np.eye(2) / 2)
    assert np.allclose(qc_channel(computational_povm(3)).choi, dephasing(3).choi)
    sic = qc_channel(qubit_sic_povm())
    assert sic.dims == (2, 4)
    # trace preservation: the output of each input basis state sums to one
    for i in range(2):
        assert np.isclose(np.trace(apply(sic, basis_proj(2, i))).real, 1.0)


@given(st.integers(2, 3), st.integers(1, 5), st.integers(0, 10_000))
def test_qc_outputs_are_diagonal(d, k, seed):
    rng = np.random.default_rng(seed)
    h = random_holevo(d, 2, k, seed)
    out = apply(qc_channel(h.povm), random_state(d, rng))
    assert np.all(out[~np.eye(k, dtype=bool)] == 0)


def test_random_generators():
    u = random_channel(2, 2, 1, 11)
    w = np.linalg.eigvalsh(u.choi)
    assert np.isclose(w[-1], 1.0) and np.allclose(w[:-1], 0, atol=1e-12)
    h = random_holevo(2, 2, 4, 3)
    holevo_to_channel(h)  # raises if any invariant fails
    assert np.array_equal(random_channel(2, 3, 2, 9).choi, random_channel(2, 3, 2, 9).choi)
    h1, h2 = random_holevo(3, 2, 5, 9), random_holevo(3, 2, 5, 9)
    assert all(np.array_equal(a, b) for a, b in zip(h1.povm.effects, h2.povm.effects))


@given(st.integers(2, 3), st.integers(2, 3), st.integers(1, 6), st.integers(0, 10_000))
def test_holevo_choi_reconstructs_from_ensemble(di, do, k, seed):
    h = random_holevo(di, do, k, seed)
    c = holevo_to_channel(h)
    # each term M_i^T/d (x) tau_i is a weighted product state
    weights = np.array([np.trace(m).real / di for m in h.povm.effects])
    left = tuple(m.T / np.trace(m).real for m in h.povm.effects)
    e = Ensemble(weights, left, h.preparations)
    assert np.max(np.abs(e.reconstruct() - c.choi)) < 1e-10


def test_invariant_violations():
    with pytest.raises(InvalidChannel):
        Channel(2, 2, -np.eye(4) / 4)
    with pytest.raises(NotTracePreserving):
        Channel(2, 2, np.diag([0.5, 0.5, 0, 0]))
    with pytest.raises(InvalidPovm):
        Povm((np.eye(2) / 2,))
    with pytest.raises(InvalidEnsemble):
        Ensemble(np.array([0.5, 0.6]), (np.eye(2) / 2,) * 2, (np.eye(2) / 2,) * 2)
    with pytest.raises(NotTracePreserving):
        KrausForm((np.eye(2) * 0.5,))


def test_choi_is_read_only():
    c = identity_channel(2)
    with pytest.raises(ValueError):
        c.choi[0, 0] = 1
