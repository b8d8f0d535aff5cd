"""Coherent hashing: one-way entanglement distillation simulated exactly at small n.

The source is written as |psi> = sum_x sqrt(p_x) |x>_A |psi_x>_BE in a
basis diagonalizing rho_A.  For one type Q Alice applies the instrument
C_l = sqrt(|T_Q| / ((1+eps) L M S)) sum_{ms} |ms><u(lms)|, Bob extracts
(m, s) coherently with the square roots of a pretty-good measurement,
Alice measures s in the Fourier basis and Bob undoes the phase, and
finally Bob rotates his leftover register so that Eve is decoupled.

Eve's n-copy space is never built.  All vectors <b^n|psi_{x^n}> for x^n
in the type class live in a subspace whose Gram matrix is a product of
single-site Gram matrices; its eigendecomposition gives exact coordinates
("the Eve frame") in which Eve's type-class average sigma(Q) is diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .codebook import Codebook, choose_rates, fit_rates, pgm_decoder, sample_codebook
from .info import BellMixture, CqqState, holevo, purification_of, shannon_entropy
from .linalg import DensityMatrix, PureState, fidelity, psd_sqrt, trace_norm
from .typicality import (
    BudgetExceeded,
    TypeVector,
    num_types,
    string_index,
    type_class_array,
    type_probability,
    typical_types,
)

AMPLITUDE_BUDGET = 2**20
FRAME_CUTOFF = 1e-13


class ConstructionError(RuntimeError):
    """The instrument is not a valid quantum operation (evenness violated)."""


# ---------------------------------------------------------------- source

@dataclass(frozen=True)
class SchmidtSource:
    probs: np.ndarray
    kets: np.ndarray       # (K, d_B, d_E): <x|_A psi / sqrt(p_x)
    basis: np.ndarray      # columns: the A basis vectors kept

    @property
    def d_B(self) -> int:
        return self.kets.shape[1]

    @property
    def d_E(self) -> int:
        return self.kets.shape[2]

    def cqq(self) -> CqqState:
        states = [np.outer(k.ravel(), k.ravel().conj()) for k in self.kets]
        return CqqState(self.probs, states, (self.d_B, self.d_E))


def schmidt_source(state, cutoff: float = 1e-12) -> SchmidtSource:
    """Letter ensemble of a bipartite state's purification.

    Accepts a BellMixture, a DensityMatrix on AB, or a PureState on ABE.  The
    computational basis of A is used when rho_A is diagonal, otherwise its
    eigenbasis (descending).  Zero-weight letters are dropped.
    """
    if isinstance(state, BellMixture):
        psi = state.purification()
    elif isinstance(state, PureState):
        psi = state
    else:
        psi = purification_of(state if isinstance(state, DensityMatrix) else DensityMatrix(state))
    if len(psi.dims) != 3:
        raise ValueError("expected a tripartite purification (A, B, E)")
    d_a, d_b, d_e = psi.dims
    mat = psi.amplitudes.reshape(d_a, d_b * d_e)
    rho_a = mat @ mat.conj().T
    if np.max(np.abs(rho_a - np.diag(np.diag(rho_a)))) < 1e-12:
        basis = np.eye(d_a, dtype=complex)
    else:
        w, v = np.linalg.eigh(rho_a)
        basis = v[:, ::-1]
    rows = basis.conj().T @ mat
    probs = np.real(np.einsum("ij,ij->i", rows, rows.conj()))
    keep = probs > cutoff
    kets = rows[keep] / np.sqrt(probs[keep])[:, None]
    p = probs[keep] / probs[keep].sum()
    return SchmidtSource(p, kets.reshape(-1, d_b, d_e), basis[:, keep])


# ---------------------------------------------------------------- Eve frame

@dataclass
class EveFrame:
    """Exact coordinates for Eve's span over one type class.

    ``block(j)`` is the d_B^n x r matrix of <b^n|psi_{x^n}> for the j-th
    string of ``strings``; sigma(Q) = diag(eigs) / |T_Q| in these coordinates.
    """

    q: TypeVector
    strings: np.ndarray
    coords: np.ndarray     # (r, |T_Q| d_B^n)
    eigs: np.ndarray       # (r,)
    d_bn: int

    @property
    def rank(self) -> int:
        return len(self.eigs)

    def block(self, j: int) -> np.ndarray:
        return self.coords[:, j * self.d_bn:(j + 1) * self.d_bn].T

    def sigma(self) -> np.ndarray:
        return np.diag(self.eigs / len(self.strings)).astype(complex)


def build_eve_frame(src: SchmidtSource, q: TypeVector, max_vectors: int = 8192) -> EveFrame:
    strings = type_class_array(q)
    n = q.n
    d_b = src.d_B
    d_bn = d_b**n
    count = len(strings) * d_bn
    if count > max_vectors:
        raise BudgetExceeded(f"Eve frame needs {count} vectors (limit {max_vectors})")
    # single-site Gram over (x, b)
    site = src.kets.reshape(-1, src.d_E)
    g1 = site.conj() @ site.T
    bstr = np.array(np.unravel_index(np.arange(d_bn), (d_b,) * n)).T if n else np.zeros((1, 0), int)
    idx = (strings[:, None, :] * d_b + bstr[None, :, :]).reshape(count, n)
    gram = np.ones((count, count), dtype=complex)
    for i in range(n):
        gram *= g1[np.ix_(idx[:, i], idx[:, i])]
    w, v = np.linalg.eigh(0.5 * (gram + gram.conj().T))
    keep = w > FRAME_CUTOFF * max(w.max(), 1.0)
    w, v = w[keep][::-1], v[:, keep][:, ::-1]
    coords = np.sqrt(w)[:, None] * v.conj().T
    return EveFrame(q, strings, coords, w, d_bn)


# ---------------------------------------------------------------- instrument

@dataclass
class TypeCode:
    q: TypeVector
    prob: float
    code: Codebook
    word_index: np.ndarray    # (L, M, S) -> row of frame.strings
    frame: EveFrame | None


@dataclass
class HashingInstrument:
    src: SchmidtSource
    n: int
    delta: float
    eps: float
    blocks: list
    M: int

    def gamma(self, block) -> float:
        """Probability of each outcome l of this type."""
        return block.prob / ((1 + self.eps) * block.code.L)

    @property
    def abort_probability(self) -> float:
        return max(0.0, 1.0 - sum(self.gamma(b) * b.code.L for b in self.blocks))

    def kraus(self, block, l: int) -> np.ndarray:
        """Dense C_l as an (M S) x K^n matrix in the Schmidt basis of A^n."""
        c = block.code
        k = len(self.src.probs)
        out = np.zeros((c.M * c.S, k**self.n))
        cols = string_index(c.code(l), k)
        out[np.arange(c.M * c.S), cols] = 1.0
        return out * math.sqrt(len(block.frame.strings if block.frame else type_class_array(block.q))
                               / ((1 + self.eps) * c.L * c.M * c.S))

    def completeness(self) -> tuple[float, float]:
        """(max eigenvalue of sum C^dag C, || sum C^dag C + C_0^2 - 1 ||_max)."""
        k = len(self.src.probs)
        dim = k**self.n
        if dim > 4096:
            raise BudgetExceeded(f"A^n dimension {dim} too large for a dense completeness check")
        total = np.zeros((dim, dim))
        for b in self.blocks:
            for l in range(b.code.L):
                c = self.kraus(b, l)
                total += c.T @ c
        top = float(np.linalg.eigvalsh(total)[-1])
        if top > 1 + 1e-9:
            raise ConstructionError(f"sum of C^dag C has eigenvalue {top} > 1: evenness violated")
        c0 = psd_sqrt(np.eye(dim) - total)
        return top, float(np.max(np.abs(total + c0 @ c0 - np.eye(dim))))


def build_hashing_instrument(state, n: int, delta: float, eps: float, seed=0,
                             layout: str = "cyclic", with_frames: bool = True) -> HashingInstrument:
    src = state if isinstance(state, SchmidtSource) else schmidt_source(state)
    s = src.cqq()
    p = src.probs
    types = [q for q in typical_types(n, p, delta) if type_probability(q, p) > 0]
    if not types:
        raise ValueError("no typical type at this n and delta")
    m_common = min(_fitted(s, q, delta).M for q in types)
    blocks = []
    for q in types:
        rates = _fitted(s, q, delta, m_common)
        code = sample_codebook(q, rates, [int(seed)] + list(q.counts), layout)
        strings = type_class_array(q)
        k = q.alphabet_size
        ref = string_index(strings, k)
        order = np.argsort(ref)
        widx = order[np.searchsorted(ref[order], string_index(code.words.reshape(-1, n), k))]
        mult = np.bincount(widx, minlength=len(strings))
        weight = mult * len(strings) / ((1 + eps) * code.L * code.M * code.S)
        if weight.max() > 1 + 1e-12:
            raise ConstructionError(f"type {q.counts}: multiplicity {mult.max()} breaks the instrument")
        frame = build_eve_frame(src, q) if with_frames else None
        blocks.append(TypeCode(q, type_probability(q, p), code,
                               widx.reshape(code.L, code.M, code.S), frame))
    return HashingInstrument(src, n, delta, eps, blocks, m_common)


def _fitted(s: CqqState, q: TypeVector, delta: float, m_cap=None):
    rates = choose_rates(s, q, delta)
    return fit_rates(rates, q, m_cap=m_cap)


# ---------------------------------------------------------------- stages (dense)

@dataclass
class DecodeResult:
    state: np.ndarray        # (MS, K, d, r), includes the 1/sqrt(MS) factor
    errors: np.ndarray       # e_ms
    fidelity: float          # to the ideal decoded state


def coherent_decode(blocks: np.ndarray, povm: np.ndarray) -> DecodeResult:
    """Apply |phi> -> sum_k |k> sqrt(D_k)|phi> to (1/sqrt(MS)) sum_j |j>_A Psi_j.

    ``blocks[j]`` is Psi_j (Bob rows, Eve columns).
    """
    blocks = np.asarray(blocks)
    ms = len(blocks)
    roots = np.stack([psd_sqrt(d) for d in povm])
    out = np.einsum("kab,jbr->jkar", roots, blocks) / math.sqrt(ms)
    rho_b = np.einsum("jar,jbr->jab", blocks, blocks.conj())
    errors = 1 - np.real(np.einsum("jab,jba->j", povm, rho_b))
    overlap = np.einsum("jar,jjar->", blocks.conj(), out) / math.sqrt(ms)
    return DecodeResult(out, errors, float(abs(overlap) ** 2))


def fourier_phase_step(state: np.ndarray, m: int, s: int, seed=None, t: int | None = None):
    """Alice measures her s register in the Fourier basis; Bob undoes the phase.

    ``state`` has shape (M S, K, ...) with Alice's (m, s) first and Bob's
    decoded k = (m', s') second.  Returns (t, probabilities of all t, the
    normalized corrected state of shape (M, K, ...)).  The outcome is
    sampled from ``seed`` unless ``t`` is given.
    """
    st = np.asarray(state).reshape((m, s) + state.shape[1:])
    branches = np.fft.fft(st, axis=1) / math.sqrt(s)       # sum_s e^{-2 pi i s t / S}
    k = st.shape[2]
    s_bob = np.arange(k) % s
    probs = np.sum(np.abs(branches) ** 2, axis=tuple(i for i in range(branches.ndim) if i != 1))
    if t is None:
        rng = np.random.default_rng(seed)
        t = int(rng.choice(s, p=probs / probs.sum()))
    phase = np.exp(2j * np.pi * s_bob * t / s)
    shape = (1, k) + (1,) * (st.ndim - 3)
    corrected = branches[:, t] * phase.reshape(shape)
    return t, probs, corrected / math.sqrt(probs[t])


def canonical_purification(sigma: np.ndarray, dim: int | None = None) -> np.ndarray:
    """|zeta> = sum_i sqrt(lambda_i)|i>|v_i> as a (dim x d) matrix, eigenvalues descending."""
    w, v = np.linalg.eigh(0.5 * (sigma + sigma.conj().T))
    w, v = np.clip(w[::-1], 0, None), v[:, ::-1]
    rank = int(np.sum(w > 1e-14))
    dim = rank if dim is None else dim
    if dim < rank:
        raise ValueError(f"purifying register of dimension {dim} < rank {rank}")
    z = np.zeros((dim, sigma.shape[0]), dtype=complex)
    z[:rank] = np.sqrt(w[:rank])[:, None] * v[:, :rank].T
    return z


def optimal_isometry(y: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, float]:
    """Isometry V maximizing |<zeta|(V (x) 1)|y>| with y, zeta as matrices.

    V = W^dag from the polar decomposition of y z^dag restricted to the
    rows of ``y``; returns (V of shape (rows z, rows y), achieved overlap).
    """
    x = z.conj() @ y.T  # tr(Z^dag V Y) = sum_ij V_ij x_ij
    u, sv, vh = np.linalg.svd(x, full_matrices=False)
    v_iso = (u @ vh).conj()
    return v_iso, float(sv.sum())


def _diagonal_isometry(y: np.ndarray, zdiag: np.ndarray, zdim: int) -> tuple[np.ndarray, float]:
    """optimal_isometry for zeta = sum_i z_i |i>|i> padded to ``zdim`` rows."""
    r = len(zdiag)
    x = np.zeros((zdim, y.shape[0]), dtype=complex)
    x[:r] = zdiag[:, None] * y.T
    u, sv, vh = np.linalg.svd(x, full_matrices=False)
    return (u @ vh).conj(), float(sv.sum())


def eve_decouple(tilde: np.ndarray, sigma: np.ndarray, dim: int | None = None):
    """Per-m isometries U_m on Bob's leftover register.

    ``tilde[m]`` is psi-tilde_m as a (Bob x Eve) matrix.  Returns (list of U_m,
    achieved overlaps, fidelity of the ideal state after U with Phi_M (x) zeta).
    """
    m_size, rows = tilde.shape[0], tilde.shape[1]
    z = canonical_purification(sigma, max(rows, int(np.sum(np.linalg.eigvalsh(sigma) > 1e-14)))
                               if dim is None else dim)
    us, overlaps = [], []
    for m in range(m_size):
        v, ov = optimal_isometry(tilde[m], z)
        us.append(v)
        overlaps.append(ov)
    return us, np.array(overlaps), float(np.mean(overlaps) ** 2)


# ---------------------------------------------------------------- protocol

@dataclass
class EntReport:
    fidelity: float
    fidelity_unconditional: float
    log_M: float
    M: int
    abort_probability: float
    fidelity_decode: float
    fidelity_fourier: float
    fidelity_decouple: float
    geometry_bound: float
    target_bound: float
    comm_bits: float
    code_bits: float
    phase_bits: float
    code_rate: float
    phase_rate: float
    completeness_defect: float
    eve_invariance_decode: float
    eve_invariance_fourier: float
    recombination_defect: float
    uhlmann_gap: float
    bad_code_fraction: float
    stages: list = field(default_factory=list)

    def as_row(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if k != "stages"}


def _code_stage(inst: HashingInstrument, block: TypeCode, l: int, budget: int, checks: bool) -> dict:
    frame = block.frame
    c = block.code
    m_size, s_size = c.M, c.S
    ms = m_size * s_size
    d = frame.d_bn
    r = frame.rank
    if ms * d * r > budget:
        raise BudgetExceeded(f"post-instrument state has {ms * d * r} amplitudes (budget {budget})")
    psi = np.stack([frame.block(j) for j in block.word_index[l].ravel()])     # (MS, d, r)
    rho_b = psi @ psi.conj().transpose(0, 2, 1)
    povm = pgm_decoder(rho_b)
    roots = np.stack([psd_sqrt(e) for e in povm])
    success = np.real(np.einsum("jab,jba->j", povm, rho_b))
    f8 = abs(np.einsum("jab,jba->", roots, rho_b) / ms) ** 2

    # purification of sigma(Q) on Bob's leftover register (s', B^n), padded to
    # rank r; in the Eve frame it is diagonal: zeta = sum_i z_i |i>|i>
    rows = s_size * d
    zdiag = np.sqrt(frame.eigs / len(frame.strings))
    zdim = max(rows, r)

    # decoupling isometries from the ideal states psi-tilde_m
    isos, ideal_overlaps = [], []
    uhl = 0.0
    for m in range(m_size):
        y = psi[m * s_size:(m + 1) * s_size].reshape(rows, r) / math.sqrt(s_size)
        v, ov = _diagonal_isometry(y, zdiag, zdim)
        isos.append(v)
        ideal_overlaps.append(ov)
        if checks:
            sig_m = y.T @ y.conj()
            uhl = max(uhl, abs(ov - math.sqrt(fidelity(sig_m, frame.sigma()))))
    ov_dec = float(np.mean(ideal_overlaps))

    # Fourier branches per (m_A, k): B_t = sum_s e^{-2 pi i s t / S} sqrt(D_k) Psi_{ms}
    probs = np.zeros(s_size)
    ref9 = np.zeros(s_size, dtype=complex)
    final = np.zeros(s_size, dtype=complex)
    eve_after = np.zeros((r, r), dtype=complex) if checks else None
    eve_decoded = np.zeros((r, r), dtype=complex) if checks else None
    norm = 1.0 / math.sqrt(s_size * ms)   # 1/sqrt(S) from Fourier, 1/sqrt(MS) from the state
    s_bob = np.arange(s_size)
    phases = np.exp(2j * np.pi * np.outer(np.arange(s_size), s_bob) / s_size)   # (t, s')
    for m in range(m_size):
        blk = psi[m * s_size:(m + 1) * s_size]                               # (S, d, r)
        a = roots[:, None] @ blk[None]                                       # (K, S, d, r)
        if checks:
            flat = a.reshape(-1, r)
            eve_decoded += flat.T @ flat.conj() / ms
        b = np.fft.fft(a, axis=1) * norm                                     # (K, t, d, r)
        probs += np.sum(np.abs(b) ** 2, axis=(0, 2, 3))
        if checks:
            flat = b.reshape(-1, r)
            eve_after += flat.T @ flat.conj()
        own = b[m * s_size:(m + 1) * s_size].transpose(1, 0, 2, 3)          # Bob's m' = m: (t, s', d, r)
        corrected = phases[:, :, None, None] * own
        ideal = blk / math.sqrt(ms)
        ref9 += corrected.reshape(s_size, -1) @ ideal.conj().ravel()
        for t in range(s_size):
            x = corrected[t].reshape(rows, r)
            # tr(Z^dag V X) with Z diagonal
            final[t] += np.sum(zdiag * np.sum(isos[m][:r] * x.T, axis=1)) / math.sqrt(m_size)

    probs_n = probs / probs.sum()
    f9_t = np.abs(ref9) ** 2 / probs
    fin_t = np.abs(final) ** 2 / probs
    theta2 = math.acos(min(1.0, ov_dec))
    theta1 = np.arccos(np.clip(np.sqrt(f9_t), 0, 1))
    geom = float(np.sum(probs_n * np.cos(np.minimum(theta1 + theta2, np.pi / 2)) ** 2))
    out = {
        "type": block.q.counts, "l": l,
        "success": float(success.mean()),
        "fidelity_decode": float(f8),
        "fidelity_fourier": float(np.sum(np.sqrt(probs_n / s_size * f9_t)) ** 2),
        "fidelity_decouple": ov_dec**2,
        "fidelity": float(np.sum(probs_n * fin_t)),
        "geometry_bound": geom,
        "t_probs": probs_n,
        "pr_norm": float(probs.sum()),
        "uhlmann_gap": uhl,
    }
    if checks:
        flat = psi.reshape(-1, r)
        eve_before = flat.T @ flat.conj() / ms
        total_povm = povm.sum(axis=0)
        recomb = 0.0
        for j in range(ms):
            # (1-e) phi_OK^E + e phi_bad^E against psi^E, reduced to Bob's side
            q_, r_ = np.linalg.qr(psi[j].T)
            ok = roots[j] @ roots[j]
            bad = total_povm - povm[j]
            delta = r_ @ (ok + bad - np.eye(d)).T @ r_.conj().T
            recomb = max(recomb, trace_norm(delta))
        out["eve_invariance_decode"] = trace_norm(eve_decoded - eve_before)
        out["eve_invariance_fourier"] = trace_norm(eve_after - eve_before)
        out["recombination_defect"] = recomb
    return out


def run_hashing_protocol(state, n: int, delta: float, eps: float, seed=0,
                         budget: int = AMPLITUDE_BUDGET, layout: str = "cyclic",
                         check_codes: int = 1) -> EntReport:
    """Full pipeline; the heavier invariance checks run on the first
    ``check_codes`` codes of every type."""
    inst = build_hashing_instrument(state, n, delta, eps, seed, layout)
    src = inst.src
    top, completeness = inst.completeness() if len(src.probs) ** n <= 4096 else (float("nan"), float("nan"))
    abort = inst.abort_probability
    stages = []
    weights = []
    for b in inst.blocks:
        for l in range(b.code.L):
            stages.append(_code_stage(inst, b, l, budget, checks=l < check_codes))
            weights.append(inst.gamma(b))
    w = np.array(weights) / sum(weights)

    def avg(key):
        return float(sum(wi * st[key] for wi, st in zip(w, stages)))

    def worst(key):
        vals = [st[key] for st in stages if key in st]
        return float(max(vals)) if vals else 0.0

    s = src.cqq()
    i_b = holevo(s.probs, s.bob_states())
    i_e = holevo(s.probs, s.eve_states())
    h_x = shannon_entropy(s.probs)
    mean_log_l = float(sum(wi * math.log2(_code_of(inst, st).L) for wi, st in zip(w, stages)))
    mean_log_s = float(sum(wi * math.log2(_code_of(inst, st).S) for wi, st in zip(w, stages)))
    code_bits = math.log2(num_types(n, len(src.probs))) + mean_log_l
    fid = avg("fidelity")
    return EntReport(
        fidelity=fid,
        fidelity_unconditional=fid * (1 - abort),
        log_M=math.log2(inst.M), M=inst.M,
        abort_probability=abort,
        fidelity_decode=avg("fidelity_decode"),
        fidelity_fourier=avg("fidelity_fourier"),
        fidelity_decouple=avg("fidelity_decouple"),
        geometry_bound=avg("geometry_bound"),
        target_bound=1 - 12 * math.sqrt(eps),
        comm_bits=code_bits + mean_log_s,
        code_bits=code_bits, phase_bits=mean_log_s,
        code_rate=float(h_x - i_b), phase_rate=float(i_e),
        completeness_defect=completeness,
        eve_invariance_decode=worst("eve_invariance_decode"),
        eve_invariance_fourier=worst("eve_invariance_fourier"),
        recombination_defect=worst("recombination_defect"),
        uhlmann_gap=worst("uhlmann_gap"),
        bad_code_fraction=float(np.mean([st["success"] < 1 - eps for st in stages])),
        stages=stages,
    )


def _code_of(inst: HashingInstrument, stage: dict) -> Codebook:
    for b in inst.blocks:
        if b.q.counts == stage["type"]:
            return b.code
    raise KeyError(stage["type"])
