import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qdistill.info import BellMixture, bell_state, BELL_LABELS
from qdistill.linalg import (
    DensityMatrix,
    KrausMap,
    PureState,
    StateError,
    eig_hermitian,
    fidelity,
    ket,
    max_entangled,
    partial_trace,
    psd_inv_sqrt,
    psd_sqrt,
    purify,
    random_density,
    random_pure,
    random_unitary,
    schmidt,
    tensor,
    trace_norm,
)

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(1, 4)


def test_density_invariants_rejected():
    with pytest.raises(StateError, match="trace"):
        DensityMatrix(np.diag([0.5, 0.4]))
    with pytest.raises(StateError, match="hermiticity"):
        DensityMatrix(np.array([[0.5, 0.2], [0.0, 0.5]]))
    with pytest.raises(StateError, match="positivity"):
        DensityMatrix(np.diag([1.2, -0.2]))
    with pytest.raises(StateError, match="normalization"):
        PureState([1.0, 1.0])
    with pytest.raises(StateError, match="dims"):
        DensityMatrix(np.eye(4) / 4, (2, 3))


def test_kraus_flags():
    g = 0.3
    amp = KrausMap([np.diag([1, np.sqrt(1 - g)]), np.array([[0, np.sqrt(g)], [0, 0]])])
    assert amp.is_trace_preserving
    assert not KrausMap([np.diag([1.0, 0.5])]).is_trace_preserving
    with pytest.raises(StateError, match="trace-nonincreasing"):
        KrausMap([np.eye(2), np.eye(2)])


def test_tensor_examples():
    mixed = DensityMatrix(np.eye(2) / 2)
    out = tensor(mixed, mixed)
    assert np.allclose(out.data, np.eye(4) / 4) and out.dims == (2, 2)
    assert np.allclose(tensor(PureState(ket(0, 2)), PureState(ket(1, 2))).amplitudes, ket(1, 4))


@given(seeds, dims, dims)
def test_tensor_partial_trace_roundtrip(seed, da, db):
    rng = np.random.default_rng(seed)
    rho, sigma = DensityMatrix(random_density(da, rng)), DensityMatrix(random_density(db, rng))
    joint = tensor(rho, sigma)
    assert abs(np.trace(joint.data) - 1) < 1e-12
    assert np.allclose(partial_trace(joint, [0]).data, rho.data, atol=1e-12)
    assert np.allclose(partial_trace(joint, [1]).data, sigma.data, atol=1e-12)


def test_partial_trace_examples():
    assert np.allclose(partial_trace(max_entangled(2), [0]).data, np.eye(2) / 2)
    with pytest.raises(IndexError):
        partial_trace(max_entangled(2), [2])
    with pytest.raises(ValueError):
        partial_trace(max_entangled(2), [])


def test_bell_purification_marginal():
    p = [0.7, 0.1, 0.15, 0.05]
    psi = BellMixture(p).purification()
    # build independently from the amplitudes sum sqrt(p_ij) |Phi_ij>|ij>
    direct = sum(np.sqrt(w) * np.kron(bell_state(l), np.eye(4)[k]) for k, (w, l) in enumerate(zip(p, BELL_LABELS)))
    assert np.allclose(psi.amplitudes, direct)
    mix = sum(w * np.outer(bell_state(l), bell_state(l).conj()) for w, l in zip(p, BELL_LABELS))
    assert np.allclose(partial_trace(psi, [0, 1]).data, mix, atol=1e-12)


def test_eig_examples():
    lam, _ = eig_hermitian(np.eye(2) / 2)
    assert np.allclose(lam, [0.5, 0.5])
    lam, _ = eig_hermitian(np.diag([1.0, -1.0]))
    assert np.allclose(lam, [1, -1])
    with pytest.raises(ValueError):
        eig_hermitian(np.array([[0, 1], [0, 0]]))


@given(seeds, st.integers(1, 6))
def test_eig_reconstruction(seed, d):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = a + a.conj().T
    lam, u = eig_hermitian(h)
    assert np.all(np.diff(lam) <= 1e-12)
    assert np.max(np.abs(u @ np.diag(lam) @ u.conj().T - h)) <= 1e-9
    assert np.allclose(u.conj().T @ u, np.eye(d), atol=1e-10)


def test_trace_norm_examples():
    rho = np.diag([0.3, 0.7])
    assert trace_norm(rho - rho) == 0
    assert trace_norm(np.diag([1.0, -1.0])) == pytest.approx(2)
    assert trace_norm(np.diag([0.3, -0.3])) == pytest.approx(0.6)
    assert trace_norm(np.array([[0, 1], [0, 0]])) == pytest.approx(1)


def test_fidelity_examples():
    rho = DensityMatrix(np.diag([0.3, 0.7]))
    assert fidelity(rho, rho) == pytest.approx(1)
    assert fidelity(PureState(ket(0, 2)), PureState(ket(1, 2))) == 0
    assert fidelity(DensityMatrix(np.diag([1.0, 0.0])), DensityMatrix(np.eye(2) / 2)) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        fidelity(rho, DensityMatrix(np.eye(3) / 3))


@given(seeds, st.integers(1, 4))
def test_fidelity_symmetric_and_pure_overlap(seed, d):
    rng = np.random.default_rng(seed)
    rho, sigma = DensityMatrix(random_density(d, rng)), DensityMatrix(random_density(d, rng))
    assert fidelity(rho, sigma) == pytest.approx(fidelity(sigma, rho), abs=1e-9)
    u, v = random_pure(d, rng), random_pure(d, rng)
    dense = fidelity(DensityMatrix(np.outer(u, u.conj())), DensityMatrix(np.outer(v, v.conj())))
    assert dense == pytest.approx(abs(np.vdot(u, v)) ** 2, abs=1e-7)
    assert fidelity(PureState(u), PureState(v)) == pytest.approx(abs(np.vdot(u, v)) ** 2, abs=1e-12)


def test_purify_examples():
    pure = PureState(random_pure(3, np.random.default_rng(0)))
    out = purify(pure.density())
    assert out.dims == (3, 1)
    assert abs(abs(np.vdot(out.amplitudes, pure.amplitudes)) - 1) < 1e-10
    me = purify(DensityMatrix(np.eye(2) / 2))
    assert np.allclose(schmidt(me, [0]).weights, [0.5, 0.5])


@given(seeds, st.integers(3, 5))
def test_purify_roundtrip(seed, d):
    rng = np.random.default_rng(seed)
    rho = DensityMatrix(random_density(d, rng, rank=3))
    psi = purify(rho)
    assert psi.dims[-1] == 3
    assert np.max(np.abs(partial_trace(psi, [0]).data - rho.data)) <= 1e-9


def test_schmidt_examples():
    assert np.allclose(schmidt(max_entangled(2), [0]).weights, [0.5, 0.5])
    prod = PureState(np.kron(random_pure(2, np.random.default_rng(1)), random_pure(3, np.random.default_rng(2))), (2, 3))
    assert np.allclose(schmidt(prod, [0]).weights, [1.0])
    bell = BellMixture([0.7, 0.1, 0.1, 0.1]).purification()
    assert np.allclose(schmidt(bell, [0]).weights, [0.5, 0.5], atol=1e-12)


@given(seeds, st.integers(1, 3), st.integers(1, 3), st.integers(1, 3))
def test_schmidt_reconstruction(seed, a, b, c):
    rng = np.random.default_rng(seed)
    psi = PureState(random_pure(a * b * c, rng), (a, b, c))
    sch = schmidt(psi, [0, 2])
    assert abs(sch.weights.sum() - 1) < 1e-12 and np.all(np.diff(sch.weights) <= 1e-15)
    rebuilt = sch.reconstruct().reshape(a, c, b).transpose(0, 2, 1).reshape(-1)
    assert np.max(np.abs(rebuilt - psi.amplitudes)) <= 1e-9


@given(seeds, st.integers(1, 5))
def test_sqrt_helpers(seed, d):
    rng = np.random.default_rng(seed)
    rho = random_density(d, rng, rank=max(1, d - 1))
    r = psd_sqrt(rho)
    assert np.allclose(r @ r, rho, atol=1e-10)
    inv, supp = psd_inv_sqrt(rho)
    assert np.allclose(r @ inv, supp, atol=1e-8)
    u = random_unitary(d, rng)
    assert np.allclose(u @ u.conj().T, np.eye(d), atol=1e-12)


def test_fuchs_van_de_graaf_and_gentle_measurement_suite():
    rng = np.random.default_rng(20261015)
    for _ in range(1000):
        d = int(rng.integers(2, 5))
        rho = DensityMatrix(random_density(d, rng, rank=int(rng.integers(1, d + 1))))
        sigma = DensityMatrix(random_density(d, rng, rank=int(rng.integers(1, d + 1))))
        f = fidelity(rho, sigma)
        half = 0.5 * trace_norm(rho.data - sigma.data)
        assert 1 - np.sqrt(f) <= half + 1e-9
        assert half <= np.sqrt(1 - f) + 1e-9
        u = random_unitary(d, rng)
        x = (u * rng.uniform(0, 1, d)) @ u.conj().T
        lam = 1 - np.trace(rho.data @ x).real
        rx = psd_sqrt(x)
        assert trace_norm(rx @ rho.data @ rx - rho.data) <= np.sqrt(8 * lam) + 1e-9
