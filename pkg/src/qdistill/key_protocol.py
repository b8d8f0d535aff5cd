"""One-way secret key distillation from a cqq source, simulated exactly at small n.

Alice observes x^n, announces its type Q and the index l of a code C_l
containing x^n, and keeps the message index m of a matching codeword as
her key.  Bob decodes (m, s) from his state with the code's decoder and
keeps m.  The three protocol conditions are evaluated on the exact joint
distribution of (Q, l, m, m') and Eve's conditional states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .codebook import (
    Codebook,
    RateChoice,
    WordStates,
    choose_rates,
    fit_rates,
    is_classical,
    ml_decoder,
    pgm_decoder,
    sample_codebook,
    type_class_average,
)
from .info import CqqState, fannes_tau, wiretap_rate
from .linalg import trace_norm
from .typicality import (
    BudgetExceeded,
    TypeVector,
    num_types,
    string_index,
    type_class_array,
    type_of,
    type_probability,
    typical_types,
)


@dataclass(frozen=True)
class KeyProtocolSpec:
    source: CqqState
    n: int
    delta: float
    eps: float
    seed: int = 0
    rate_bound: float | None = None
    decoder: str = "auto"
    layout: str = "cyclic"
    budget: int = 2**12

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if self.decoder not in ("auto", "pgm", "ml"):
            raise ValueError(f"unknown decoder {self.decoder!r}")


@dataclass
class KeyReport:
    error_probability: float
    uniformity: float
    leakage: float
    abort_probability: float
    failure_probability: float
    log_M: float
    M: int
    comm_bits: float
    branch_total: float
    eve_consistency: float
    bad_code_fraction: float
    codes: dict = field(default_factory=dict)
    error_estimate: float | None = None
    error_stderr: float | None = None
    trials: int = 0

    def as_row(self) -> dict:
        row = {k: v for k, v in self.__dict__.items() if k != "codes"}
        row["types_used"] = len(self.codes)
        return row


@dataclass
class TypeBranch:
    """Everything Alice and Bob share for one announced type."""

    q: TypeVector
    prob: float
    rates: RateChoice
    code: Codebook
    strings: np.ndarray
    word_index: np.ndarray   # (L, M, S) -> row of ``strings``
    choice: np.ndarray       # (L, M, S) Pr(l, m, s | Q)
    covered: np.ndarray      # (|T_Q|,) whether x^n lies in some code


def _type_seed(seed, q: TypeVector) -> list[int]:
    return [int(seed)] + list(q.counts)


def build_branches(spec: KeyProtocolSpec) -> list[TypeBranch]:
    """Typical types, their (size-fitted) codebooks and Alice's choice law.

    The key size M is common to every type: the smallest fitted M.
    """
    s = spec.source
    p = s.probs
    types = [q for q in typical_types(spec.n, p, spec.delta) if type_probability(q, p) > 0]
    if not types:
        return []
    fitted = [fit_rates(choose_rates(s, q, spec.delta), q) for q in types]
    m_common = min(r.M for r in fitted)
    branches = []
    for q in types:
        rates = fit_rates(choose_rates(s, q, spec.delta), q, m_cap=m_common)
        if spec.rate_bound is not None and rates.L > 2.0 ** (spec.n * spec.rate_bound) * (1 + 1e-12):
            raise ValueError(f"L = {rates.L} exceeds the communication bound 2^(nF) for type {q.counts}")
        code = sample_codebook(q, rates, _type_seed(spec.seed, q), spec.layout)
        strings = type_class_array(q)
        k = q.alphabet_size
        ref = string_index(strings, k)
        order = np.argsort(ref)
        codes = string_index(code.words.reshape(-1, q.n), k)
        widx = order[np.searchsorted(ref[order], codes)].reshape(code.L, code.M, code.S)
        # count[x, l]: number of (m, s) in C_l with word x
        count = np.zeros((len(strings), code.L))
        for l in range(code.L):
            np.add.at(count[:, l], widx[l].ravel(), 1.0)
        ncodes = (count > 0).sum(axis=1)
        covered = ncodes > 0
        t = len(strings)
        ls = np.arange(code.L)[:, None, None]
        choice = 1.0 / (t * ncodes[widx] * count[widx, ls])
        branches.append(TypeBranch(q, type_probability(q, p), rates, code, strings, widx, choice, covered))
    return branches


def _decoder_for(spec: KeyProtocolSpec, bob: WordStates, states: np.ndarray) -> np.ndarray:
    kind = spec.decoder
    if kind == "auto":
        kind = "ml" if is_classical(bob.site) else "pgm"
    return ml_decoder(states) if kind == "ml" else pgm_decoder(states)


def _diagonal_product(site_diags, words) -> np.ndarray:
    out = np.ones((len(words), 1))
    for i in range(words.shape[1]):
        out = (out[:, :, None] * site_diags[words[:, i]][:, None, :]).reshape(len(words), -1)
    return out


def _code_transition(spec: KeyProtocolSpec, bob: WordStates, words: np.ndarray) -> np.ndarray:
    """Decoding transition matrix of one code, rows and columns ordered by (m, s)."""
    kind = spec.decoder
    classical = is_classical(bob.site)
    if kind == "auto":
        kind = "ml" if classical else "pgm"
    if kind == "ml" and classical:
        # diagonal shortcut, same tie-splitting rule as ml_decoder
        probs = _diagonal_product(np.real(np.stack([np.diag(w) for w in bob.site])), words)
        best = probs.max(axis=0)
        win = np.isclose(probs, best[None, :], rtol=0, atol=1e-13)
        return probs @ (win / win.sum(axis=0, keepdims=True)).T
    states = bob.stack(words)
    return _transition(_decoder_for(spec, bob, states), states)


def _transition(povm: np.ndarray, states: np.ndarray) -> np.ndarray:
    """P[i, j] = tr(D_j rho_i)."""
    k, d = states.shape[0], states.shape[1]
    return np.real(states.reshape(k, -1) @ povm.transpose(0, 2, 1).reshape(k, -1).T)


ZERO_TOL = 1e-12


def evaluate_conditions(joint: np.ndarray, eve_blocks, sigma_blocks) -> tuple[float, float, float]:
    """Left-hand sides of the three protocol conditions.

    ``joint[m, m']`` is the distribution of (K, K') conditional on no abort.
    ``eve_blocks[m]`` is a list over public messages (Q, l) of unnormalized
    operators Pr(Q, l, K=m) rho^E_{Q l m}; ``sigma_blocks`` lists the blocks
    Pr(Q, l) sigma(Q) of the reference state sigma_0 in the same order.
    """
    joint = np.asarray(joint, dtype=float)
    err = float(joint.sum() - np.trace(joint))
    pk = joint.sum(axis=1)
    size = len(pk)
    unif = 0.0 if size == 1 else float(np.abs(pk - 1.0 / size).sum())
    leak = 0.0
    for m in range(size):
        if pk[m] <= 0:
            continue
        d = sum(trace_norm(a / pk[m] - b) for a, b in zip(eve_blocks[m], sigma_blocks))
        leak = max(leak, d)
    # summation-order noise below ZERO_TOL is reported as an exact zero
    return tuple(0.0 if v < ZERO_TOL else v for v in (err, unif, leak))


def run_key_protocol(spec: KeyProtocolSpec, trials: int = 0, trial_seed=None) -> KeyReport:
    """Exact simulation; with ``trials > 0`` also a Monte Carlo estimate of the
    error probability from sampled source strings and measurement outcomes."""
    s = spec.source
    branches = build_branches(spec)
    if not branches:
        raise ValueError("no typical type has positive probability; increase n or delta")
    m_size = branches[0].code.M
    bob = WordStates(s.bob_states(), spec.budget)
    eve = WordStates(s.eve_states(), spec.budget)
    d_e = eve.dim(spec.n)
    if d_e > spec.budget or bob.dim(spec.n) > spec.budget:
        raise BudgetExceeded("Bob or Eve block dimension exceeds the budget")

    joint = np.zeros((m_size, m_size))
    ok_mass = 0.0
    transitions = {}
    bad_codes, total_codes = 0.0, 0
    for br in branches:
        c = br.code
        ms = c.M * c.S
        ok_mass += br.prob * float(br.covered.mean())
        for l in range(c.L):
            words = br.strings[br.word_index[l].ravel()]
            trans = _code_transition(spec, bob, words)
            transitions[(br.q.counts, l)] = trans
            success = float(np.mean(np.diag(trans)))
            bad_codes += success < 1 - spec.eps
            total_codes += 1
            # Pr(m' | m, s): sum over s'
            to_m = trans.reshape(ms, c.M, c.S).sum(axis=2)
            w = br.prob * br.choice[l].ravel()
            joint += (w[:, None] * to_m).reshape(c.M, c.S, c.M).sum(axis=1)
    abort = 1.0 - ok_mass
    if ok_mass <= 0:
        raise ValueError("every branch aborts")
    joint_ok = joint / ok_mass
    branch_total = abort + float(joint.sum())

    eve_blocks = [[] for _ in range(m_size)]
    sigma_blocks = []
    consistency = 0.0
    for br in branches:
        c = br.code
        sigma = type_class_average(s.eve_states(), br.q, budget=spec.budget)
        strings_eve = eve.stack(br.strings)
        # Eve's average over covered strings, directly and by bookkeeping
        direct = np.einsum("x,xab->ab", br.covered / br.covered.sum(), strings_eve)
        booked = np.zeros_like(direct)
        for l in range(c.L):
            w = br.prob * br.choice[l] / ok_mass
            blocks = np.einsum("ms,msab->mab", w, strings_eve[br.word_index[l]])
            booked += blocks.sum(axis=0)
            pql = float(w.sum())
            sigma_blocks.append(pql * sigma)
            for m in range(c.M):
                eve_blocks[m].append(blocks[m])
        booked /= br.prob * br.covered.mean() / ok_mass
        consistency = max(consistency, trace_norm(booked - direct))

    err, unif, leak = evaluate_conditions(joint_ok, eve_blocks, sigma_blocks)
    k = s.alphabet_size
    mean_log_l = sum(br.prob * br.covered.mean() * math.log2(br.code.L) for br in branches) / ok_mass
    report = KeyReport(
        error_probability=err, uniformity=unif, leakage=leak,
        abort_probability=float(max(abort, 0.0)),
        failure_probability=float(min(1.0, max(abort, 0.0) + (1 - max(abort, 0.0)) * err)),
        log_M=math.log2(m_size), M=m_size,
        comm_bits=float(math.log2(num_types(spec.n, k)) + mean_log_l),
        branch_total=float(branch_total), eve_consistency=consistency,
        bad_code_fraction=bad_codes / total_codes,
        codes={br.q.counts: (br.code.L, br.code.M, br.code.S) for br in branches},
    )
    if trials > 0:
        report.error_estimate, report.error_stderr = _sample_error(
            spec, branches, transitions, trials, spec.seed if trial_seed is None else trial_seed)
        report.trials = trials
    return report


def _sample_error(spec, branches, transitions, trials, seed) -> tuple[float, float]:
    """Monte Carlo estimate of Pr{K != K' | no abort}."""
    rng = np.random.default_rng(seed)
    s = spec.source
    lookup = {br.q.counts: br for br in branches}
    errors = []
    draws = 0
    while len(errors) < trials:
        draws += 1
        if draws > 100 * trials:
            break
        xn = rng.choice(s.alphabet_size, size=spec.n, p=s.probs)
        q = type_of(xn, range(s.alphabet_size))
        br = lookup.get(q.counts)
        if br is None:
            continue
        c = br.code
        x_row = int(np.flatnonzero((br.strings == xn).all(axis=1))[0])
        if not br.covered[x_row]:
            continue
        hits = br.word_index == x_row
        codes = np.flatnonzero(hits.any(axis=(1, 2)))
        l = int(rng.choice(codes))
        matches = np.argwhere(hits[l])
        m, s_idx = matches[rng.integers(len(matches))]
        trans = transitions[(q.counts, l)]
        row = np.clip(trans[m * c.S + s_idx], 0, None)
        j = rng.choice(len(row), p=row / row.sum())
        errors.append(j // c.S != m)
    e = np.asarray(errors, dtype=float)
    if len(e) == 0:
        return float("nan"), float("nan")
    return float(e.mean()), float(e.std(ddof=1) / np.sqrt(len(e))) if len(e) > 1 else 0.0


def achievable_rate_report(spec: KeyProtocolSpec, report: KeyReport | None = None) -> dict:
    """Achieved (log M)/n next to the wiretap rate and its finite-n corrected target."""
    if report is None:
        report = run_key_protocol(spec)
    s = spec.source
    dims = s.alphabet_size * s.d_B * s.d_E
    delta_prime = 2 * spec.delta * math.log2(dims) + 2 * fannes_tau(spec.delta)
    wt = float(wiretap_rate(s))
    return {
        "rate": report.log_M / spec.n,
        "wiretap_rate": wt,
        "delta_prime": delta_prime,
        "target": wt - 3 * spec.delta - delta_prime,
    }
