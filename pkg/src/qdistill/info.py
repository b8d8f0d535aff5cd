"""Entropic functionals and closed-form distillation rates.

All logarithms are base 2.  Eigenvalues below ``EIG_FLOOR`` are dropped
from entropy sums.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import (
    DensityMatrix,
    PureState,
    StateError,
    hermitianize,
    partial_trace_array,
    reduced_from_vector,
    schmidt,
)

EIG_FLOOR = 1e-12


def _check_distribution(p, tol: float = 1e-10) -> np.ndarray:
    p = np.asarray(p, dtype=float).reshape(-1)
    if np.any(p < -tol):
        raise ValueError(f"probabilities must be nonnegative, got {p}")
    if abs(p.sum() - 1) > tol:
        raise ValueError(f"probabilities must sum to one, got sum {p.sum():.12g}")
    return np.clip(p, 0.0, None)


def shannon_entropy(p) -> float:
    p = np.asarray(p, dtype=float).reshape(-1)
    if np.any(p < -1e-12):
        raise ValueError("negative probability")
    p = p[p > EIG_FLOOR]
    return float(-np.sum(p * np.log2(p)))


def binary_entropy(x: float) -> float:
    return shannon_entropy([x, 1 - x])


def spectrum(rho) -> np.ndarray:
    a = rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho)
    return np.linalg.eigvalsh(hermitianize(a))


def von_neumann_entropy(rho) -> float:
    """Shannon entropy of the eigenvalue spectrum of ``rho``."""
    w = spectrum(rho)
    w = w[w > EIG_FLOOR]
    return float(-np.sum(w * np.log2(w)))


def entropy_unnormalized(sigma: np.ndarray) -> float:
    """-tr(sigma log sigma) for a PSD operator of arbitrary trace."""
    w = spectrum(sigma)
    w = w[w > EIG_FLOOR]
    return float(-np.sum(w * np.log2(w)))


def _dims_of(rho, dims, parts: int):
    if isinstance(rho, DensityMatrix):
        dims = rho.dims
        rho = rho.data
    if dims is None or len(dims) != parts:
        raise ValueError(f"state needs {parts} subsystem dims, got {dims}")
    return np.asarray(rho), list(dims)


def _marginal_entropy(rho, dims, keep) -> float:
    return von_neumann_entropy(partial_trace_array(rho, dims, keep))


def mutual_information(rho, dims=None) -> float:
    """I(A:B) = H(A) + H(B) - H(AB)."""
    rho, dims = _dims_of(rho, dims, 2)
    return (_marginal_entropy(rho, dims, [0]) + _marginal_entropy(rho, dims, [1])
            - von_neumann_entropy(rho))


def conditional_mutual_information(rho, dims=None) -> float:
    """I(A:C|B) = H(AB) + H(BC) - H(ABC) - H(B) for subsystems ordered A, B, C."""
    rho, dims = _dims_of(rho, dims, 3)
    return (_marginal_entropy(rho, dims, [0, 1]) + _marginal_entropy(rho, dims, [1, 2])
            - von_neumann_entropy(rho) - _marginal_entropy(rho, dims, [1]))


def coherent_information(rho, dims=None) -> float:
    """I_c(A>B) = H(B) - H(AB)."""
    rho, dims = _dims_of(rho, dims, 2)
    return _marginal_entropy(rho, dims, [1]) - von_neumann_entropy(rho)


def holevo(probs, states) -> float:
    """Holevo quantity H(sum_x P(x) rho_x) - sum_x P(x) H(rho_x)."""
    probs = _check_distribution(probs)
    states = [s.data if isinstance(s, DensityMatrix) else np.asarray(s) for s in states]
    if len(states) != len(probs):
        raise ValueError(f"{len(probs)} probabilities but {len(states)} states")
    avg = sum(p * s for p, s in zip(probs, states))
    return von_neumann_entropy(avg) - sum(
        p * von_neumann_entropy(s) for p, s in zip(probs, states) if p > 0)


def cq_state(probs, states) -> DensityMatrix:
    """sum_x P(x) |x><x| (x) rho_x with dims (|X|, d)."""
    probs = _check_distribution(probs)
    states = [s.data if isinstance(s, DensityMatrix) else np.asarray(s) for s in states]
    k, d = len(probs), states[0].shape[0]
    out = np.zeros((k * d, k * d), dtype=complex)
    for x, (p, s) in enumerate(zip(probs, states)):
        out[x * d:(x + 1) * d, x * d:(x + 1) * d] = p * s
    return DensityMatrix(out, (k, d))


def coherent_info_loss(probs, states) -> float:
    """H(sum p_i rho_i) - sum p_i H(rho_i): the loss of coherent information
    when an ensemble of bipartite pure states is mixed."""
    return holevo(probs, states)


def fannes_tau(delta: float) -> float:
    """Correction term of the Fannes inequality: -delta log delta up to 1/4, then 1/2."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if delta == 0:
        return 0.0
    if delta <= 0.25:
        return float(-delta * np.log2(delta))
    return 0.5


def fannes_bound(delta: float, dim: int) -> float:
    return delta * np.log2(dim) + fannes_tau(delta)


@dataclass(frozen=True)
class CqqState:
    """Source sum_x P(x)|x><x|^A (x) rho_x^{BE}.

    ``states`` holds one density matrix on B (x) E per letter, ``dims`` is
    ``(d_B, d_E)``.  Invariants are checked at construction.
    """

    probs: np.ndarray
    states: tuple
    dims: tuple[int, int]

    def __post_init__(self):
        probs = _check_distribution(self.probs)
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 2:
            raise StateError("cqq dims must be (d_B, d_E)")
        mats = []
        for s in self.states:
            dm = s if isinstance(s, DensityMatrix) else DensityMatrix(s, dims)
            if dm.dim != dims[0] * dims[1]:
                raise StateError(f"state of size {dm.dim} does not match dims {dims}")
            mats.append(dm.data)
        if len(mats) != len(probs):
            raise StateError(f"{len(probs)} probabilities but {len(mats)} states")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "states", tuple(mats))
        object.__setattr__(self, "dims", dims)

    @property
    def alphabet_size(self) -> int:
        return len(self.probs)

    @property
    def d_B(self) -> int:
        return self.dims[0]

    @property
    def d_E(self) -> int:
        return self.dims[1]

    def bob_states(self) -> list[np.ndarray]:
        return [partial_trace_array(s, self.dims, [0]) for s in self.states]

    def eve_states(self) -> list[np.ndarray]:
        return [partial_trace_array(s, self.dims, [1]) for s in self.states]

    def with_probs(self, probs) -> "CqqState":
        return CqqState(probs, self.states, self.dims)

    def density(self) -> DensityMatrix:
        """Full ABE density matrix with dims (|X|, d_B, d_E)."""
        cq = cq_state(self.probs, self.states)
        return DensityMatrix(cq.data, (self.alphabet_size,) + self.dims)

    @classmethod
    def from_classical(cls, probs, bob_channel, eve_channel=None) -> "CqqState":
        """Commuting (diagonal) embedding of classical channels X -> Y, X -> Z.

        Rows of ``bob_channel`` are the distributions W(y|x); Eve defaults to a
        trivial one-dimensional system.
        """
        bob = np.asarray(bob_channel, dtype=float)
        eve = np.ones((len(probs), 1)) if eve_channel is None else np.asarray(eve_channel, dtype=float)
        states = [np.kron(np.diag(b), np.diag(e)) for b, e in zip(bob, eve)]
        return cls(probs, states, (bob.shape[1], eve.shape[1]))


def wiretap_rate(s: CqqState) -> float:
    """I(X;B) - I(X;E)."""
    return holevo(s.probs, s.bob_states()) - holevo(s.probs, s.eve_states())


def comm_cost_key(s: CqqState) -> float:
    """Forward communication H(X) - I(X;B) = H(A|B) of the key protocol."""
    return shannon_entropy(s.probs) - holevo(s.probs, s.bob_states())


def cqq_from_pure(psi: PureState, basis: np.ndarray | None = None) -> CqqState:
    """Cqq source obtained when Alice measures A of a pure |psi>^{ABE}.

    Without ``basis`` the Schmidt basis of the A|BE cut is used.  When A's
    marginal is diagonal in the computational basis that basis is used, which
    keeps degenerate cases deterministic.  A custom ``basis`` (columns) must
    diagonalize rho^A, i.e. give a Schmidt decomposition.
    """
    if len(psi.dims) != 3:
        raise ValueError("expected a tripartite pure state with dims (d_A, d_B, d_E)")
    d_a, d_b, d_e = psi.dims
    m = psi.amplitudes.reshape(d_a, d_b * d_e)
    rho_a = m @ m.conj().T
    if basis is None:
        off = rho_a - np.diag(np.diag(rho_a))
        if np.max(np.abs(off)) < 1e-12:
            basis = np.eye(d_a, dtype=complex)
        else:
            sch = schmidt(psi, [0])
            basis = sch.left
    basis = np.asarray(basis, dtype=complex)
    d_check = basis.conj().T @ rho_a @ basis
    if np.max(np.abs(d_check - np.diag(np.diag(d_check)))) > 1e-9:
        raise ValueError("basis does not diagonalize the A marginal (not a Schmidt basis)")
    rows = basis.conj().T @ m
    weights = np.real(np.einsum("ij,ij->i", rows, rows.conj()))
    keep = weights > 1e-12
    probs = weights[keep] / weights[keep].sum()
    states = []
    for r, w in zip(rows[keep], weights[keep]):
        v = r / np.sqrt(w)
        states.append(np.outer(v, v.conj()))
    return CqqState(probs, states, (d_b, d_e))


def purification_of(rho_ab: DensityMatrix) -> PureState:
    """Canonical purification |psi>^{ABE} of a bipartite state."""
    from .linalg import purify

    if len(rho_ab.dims) != 2:
        raise ValueError("expected a bipartite state")
    return purify(rho_ab)


def comm_cost_ent(rho_ab: DensityMatrix) -> float:
    """I(A:E) evaluated on the purification of rho^{AB}."""
    psi = purification_of(rho_ab)
    d_a, d_b, d_e = psi.dims
    v = psi.amplitudes
    h_a = von_neumann_entropy(reduced_from_vector(v, psi.dims, [0]))
    h_e = von_neumann_entropy(reduced_from_vector(v, psi.dims, [2]))
    h_ae = von_neumann_entropy(reduced_from_vector(v, psi.dims, [1]))
    return h_a + h_e - h_ae


def comm_cost_ent_split(psi: PureState, basis: np.ndarray | None = None) -> tuple[float, float]:
    """(code information, phase information) = (H(X) - I(X;B), I(X;E)) for the
    Schmidt measurement of a purification."""
    s = cqq_from_pure(psi, basis)
    return comm_cost_key(s), holevo(s.probs, s.eve_states())


# ---------------------------------------------------------------- Bell mixtures

BELL_LABELS = ("00", "01", "10", "11")


def bell_state(label: str) -> np.ndarray:
    """Phi_00 = Phi+, Phi_01 = Phi-, Phi_10 = Psi+, Phi_11 = Psi-."""
    i, j = int(label[0]), int(label[1])
    v = np.zeros(4, dtype=complex)
    v[0 * 2 + i] = 1.0
    v[1 * 2 + (1 - i)] = (-1.0) ** j
    return v / np.sqrt(2)


@dataclass(frozen=True)
class BellMixture:
    """sum_ij p_ij Phi_ij with weights ordered as (00, 01, 10, 11)."""

    p: np.ndarray

    def __post_init__(self):
        p = _check_distribution(self.p)
        if p.shape != (4,):
            raise StateError("a Bell mixture has exactly four weights")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    def density(self) -> DensityMatrix:
        rho = sum(w * np.outer(bell_state(l), bell_state(l).conj()) for w, l in zip(self.p, BELL_LABELS))
        return DensityMatrix(rho, (2, 2))

    def purification(self) -> PureState:
        """sum_ij sqrt(p_ij)|Phi_ij>^{AB}|ij>^E, dims (2, 2, 4)."""
        psi = sum(np.sqrt(w) * np.kron(bell_state(l), np.eye(4)[k]) for k, (w, l) in enumerate(zip(self.p, BELL_LABELS)))
        return PureState(psi, (2, 2, 4))

    def cqq(self) -> CqqState:
        """Cqq source from measuring A in the computational (Schmidt) basis."""
        return cqq_from_pure(self.purification(), np.eye(2))

    def code_information(self) -> float:
        return binary_entropy(self.p[0] + self.p[1])

    def phase_information(self) -> float:
        return shannon_entropy(self.p) - self.code_information()


def hashing_rate(m: BellMixture) -> float:
    """1 - H({p})."""
    return 1.0 - shannon_entropy(m.p)


def rates_summary(m: BellMixture) -> dict[str, float]:
    """Closed-form rates and communication costs of a Bell mixture."""
    rho = m.density()
    code, phase = comm_cost_ent_split(m.purification(), np.eye(2))
    return {
        "hashing_rate": hashing_rate(m),
        "coherent_information": coherent_information(rho),
        "wiretap_rate": wiretap_rate(m.cqq()),
        "comm_cost_ent": comm_cost_ent(rho),
        "code_information": code,
        "phase_information": phase,
    }


def is_distribution(p: Sequence[float]) -> bool:
    try:
        _check_distribution(p)
    except ValueError:
        return False
    return True
