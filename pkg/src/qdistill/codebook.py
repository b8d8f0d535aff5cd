"""Random codebooks over a type class and the three code properties.

A codebook holds ``L * M * S`` words ``u[l, m, s]`` from one type class.
The properties checked here are evenness (every string of the class is
covered about ``LMS / |T_Q|`` times), secrecy (the average of Eve's states
over ``s`` is close to the type-class average ``sigma(Q)``) and goodness
(Bob can decode ``(m, s)`` from his states).  Bob's decoder is the
pretty-good (square-root) measurement; for commuting states a
maximum-likelihood decoder is also available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .info import CqqState, holevo, von_neumann_entropy
from .linalg import hermitianize, psd_inv_sqrt, trace_norm
from .typicality import (
    BudgetExceeded,
    ENUMERATION_LIMIT,
    TypeVector,
    product_operator,
    sample_type_class,
    string_index,
    type_class_array,
    type_class_size,
)

DEFAULT_TRIALS = 200


def _exp2_ceil(exponent: float) -> int:
    # guard against 2**2.0000000001 rounding up to 5
    return max(1, math.ceil(2.0 ** exponent - 1e-9))


@dataclass(frozen=True)
class RateChoice:
    S: int
    M: int
    L: int
    delta: float
    info_bob: float
    info_eve: float
    entropy: float
    n: int

    @property
    def size(self) -> int:
        return self.L * self.M * self.S


def choose_rates(s: CqqState, q: TypeVector, delta: float) -> RateChoice:
    """Code sizes from the type's Holevo quantities.

    S = 2^{n(I_E + 2 delta)}, M = 2^{n(I_B - I_E - 3 delta)},
    L = 2^{n(H(Q) - I_B + 2 delta)}, each rounded up and floored at 1.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    n = q.n
    qd = q.distribution
    i_b = max(0.0, float(holevo(qd, s.bob_states())))
    i_e = max(0.0, float(holevo(qd, s.eve_states())))
    h = q.entropy()
    return RateChoice(
        S=_exp2_ceil(n * (i_e + 2 * delta)),
        M=_exp2_ceil(n * (i_b - i_e - 3 * delta)),
        L=_exp2_ceil(n * (h - i_b + 2 * delta)),
        delta=delta, info_bob=i_b, info_eve=i_e, entropy=h, n=n,
    )


def fit_rates(rates: RateChoice, q: TypeVector, m_cap: int | None = None) -> RateChoice:
    """Adjust code sizes so a collision-free, exactly even code exists at this n.

    S and M are capped so that ``M * S <= |T_Q|`` (M first, optionally also
    by ``m_cap``), and S = 1 when Eve's states coincide; L is then raised to the least value that covers the type
    class with ``L * M * S`` a multiple of ``|T_Q|``.
    """
    t = type_class_size(q)
    # with Eve's states all equal there is nothing to hide: no s index needed
    s_size = 1 if rates.info_eve <= 1e-12 else min(rates.S, t)
    m_size = max(1, min(rates.M, t // s_size))
    if m_cap is not None:
        m_size = max(1, min(m_size, m_cap))
    ms = m_size * s_size
    step = t // math.gcd(t, ms)
    l_size = max(rates.L, math.ceil(t / ms))
    l_size = step * math.ceil(l_size / step)
    return RateChoice(S=s_size, M=m_size, L=l_size, delta=rates.delta, info_bob=rates.info_bob,
                      info_eve=rates.info_eve, entropy=rates.entropy, n=rates.n)


@dataclass(frozen=True)
class Codebook:
    q: TypeVector
    L: int
    M: int
    S: int
    words: np.ndarray
    seed: object = None
    layout: str = "iid"

    def __post_init__(self):
        w = np.asarray(self.words, dtype=np.int64)
        if w.shape != (self.L, self.M, self.S, self.q.n):
            raise ValueError(f"words have shape {w.shape}, expected {(self.L, self.M, self.S, self.q.n)}")
        counts = np.stack([(w == a).sum(axis=-1) for a in range(self.q.alphabet_size)], axis=-1)
        if not np.all(counts == np.asarray(self.q.counts)):
            raise ValueError("some codeword is not in the type class")
        w.setflags(write=False)
        object.__setattr__(self, "words", w)

    @property
    def n(self) -> int:
        return self.q.n

    def code(self, l: int) -> np.ndarray:
        """Codewords of C_l, shape (M * S, n), ordered by (m, s)."""
        return self.words[l].reshape(self.M * self.S, self.n)

    def multiplicities(self) -> tuple[np.ndarray, np.ndarray]:
        """(type-class strings, number of codewords equal to each)."""
        tc = type_class_array(self.q)
        k = self.q.alphabet_size
        codes = string_index(self.words.reshape(-1, self.n), k)
        ref = string_index(tc, k)
        order = np.argsort(ref)
        pos = np.searchsorted(ref[order], codes)
        counts = np.bincount(order[pos], minlength=len(tc))
        return tc, counts


def sample_codebook(q: TypeVector, rates, seed, layout: str = "iid") -> Codebook:
    """Random codebook over the type class.

    ``layout="iid"`` draws every word independently and uniformly.
    ``layout="cyclic"`` lays the codes consecutively along one uniformly random
    ordering of the type class (wrapping around), so that each code with
    ``M * S <= |T_Q|`` is collision-free and multiplicities differ by at most one.
    """
    L, M, S = (rates.L, rates.M, rates.S) if isinstance(rates, RateChoice) else rates
    rng = np.random.default_rng(seed)
    total = L * M * S
    if layout == "iid":
        words = sample_type_class(q, total, rng)
    elif layout == "cyclic":
        tc = type_class_array(q)
        order = tc[rng.permutation(len(tc))]
        words = order[np.arange(total) % len(tc)]
    else:
        raise ValueError(f"unknown layout {layout!r}")
    return Codebook(q, L, M, S, words.reshape(L, M, S, q.n), seed, layout)


def check_evenness(c: Codebook, eps: float) -> tuple[bool, float]:
    """Exact multiplicity check; returns (passes, worst |count/expected - 1|)."""
    _, counts = c.multiplicities()
    expected = c.L * c.M * c.S / len(counts)
    ratio = counts / expected
    ok = bool(np.all(ratio >= 1 - eps - 1e-12) and np.all(ratio <= 1 + eps + 1e-12))
    return ok, float(np.max(np.abs(ratio - 1)))


def evenness_bound(c: Codebook, eps: float) -> float:
    """Lower bound on Pr{eps-evenness} for i.i.d. codewords (Chernoff)."""
    t = type_class_size(c.q)
    return 1 - c.q.alphabet_size ** c.n * 2.0 ** (-c.L * c.M * c.S * eps**2 / (2 * math.log(2) * t))


# ---------------------------------------------------------------- product states

class WordStates:
    """Cache of product operators rho_{x_1} (x) ... (x) rho_{x_n}."""

    def __init__(self, site_states: Sequence[np.ndarray], budget: int = 2**12):
        self.site = [np.asarray(s, dtype=complex) for s in site_states]
        self.budget = budget
        self._cache: dict[tuple, np.ndarray] = {}

    def dim(self, n: int) -> int:
        return self.site[0].shape[0] ** n

    def __call__(self, word) -> np.ndarray:
        key = tuple(int(a) for a in word)
        out = self._cache.get(key)
        if out is None:
            if self.dim(len(key)) > self.budget:
                raise BudgetExceeded(f"product dimension {self.dim(len(key))} exceeds budget {self.budget}")
            out = product_operator([self.site[a] for a in key])
            self._cache[key] = out
        return out

    def stack(self, words: np.ndarray) -> np.ndarray:
        return np.stack([self(w) for w in np.atleast_2d(words)])


def type_class_average(site_states: Sequence[np.ndarray], q: TypeVector,
                       limit: int = ENUMERATION_LIMIT, budget: int = 2**12) -> np.ndarray:
    """sigma(Q) = |T_Q|^{-1} sum_{x^n in T_Q} rho_{x^n}, by enumeration."""
    ws = WordStates(site_states, budget)
    if ws.dim(q.n) > budget:
        raise BudgetExceeded(f"product dimension {ws.dim(q.n)} exceeds budget {budget}")
    tc = type_class_array(q, limit)
    acc = np.zeros((ws.dim(q.n),) * 2, dtype=complex)
    for w in tc:
        acc += product_operator([ws.site[a] for a in w])
    return hermitianize(acc / len(tc))


def eve_sigma(s: CqqState, q: TypeVector, budget: int = 2**12) -> np.ndarray:
    """Eve's average state over the type class (exact enumeration)."""
    return type_class_average(s.eve_states(), q, budget=budget)


def eve_sigma_estimate(s: CqqState, q: TypeVector, samples: int, seed,
                       budget: int = 2**12) -> tuple[np.ndarray, float]:
    """Monte Carlo estimate of sigma(Q) and the standard error of its entries
    (largest over matrix elements)."""
    ws = WordStates(s.eve_states(), budget)
    words = sample_type_class(q, samples, seed)
    mats = ws.stack(words)
    mean = mats.mean(axis=0)
    stderr = float(np.max(np.abs(mats.std(axis=0, ddof=1))) / np.sqrt(samples)) if samples > 1 else float("inf")
    return hermitianize(mean), stderr


def check_secrecy(c: Codebook, s: CqqState, eps: float, sigma: np.ndarray | None = None,
                  budget: int = 2**12) -> tuple[bool, float]:
    """max over (l, m) of ||S^{-1} sum_s rho^E_{u(lms)} - sigma(Q)||_1 against eps."""
    if sigma is None:
        sigma = eve_sigma(s, c.q, budget)
    ws = WordStates(s.eve_states(), budget)
    worst = 0.0
    for l in range(c.L):
        for m in range(c.M):
            avg = sum(ws(w) for w in c.words[l, m]) / c.S
            worst = max(worst, trace_norm(avg - sigma))
    return worst <= eps, worst


# ---------------------------------------------------------------- decoders

def pgm_decoder(states: Sequence[np.ndarray], priors=None) -> np.ndarray:
    """Pretty-good measurement D_j = G^{-1/2} p_j W_j G^{-1/2}, G = sum_j p_j W_j.

    The complement of G's support is split evenly across the elements so that
    the POVM sums to the identity.  Returns an array of shape (N, d, d).
    """
    w = np.asarray(states, dtype=complex)
    n_states, d = w.shape[0], w.shape[1]
    p = np.full(n_states, 1.0 / n_states) if priors is None else np.asarray(priors, dtype=float)
    gram = np.einsum("j,jab->ab", p, w)
    if np.max(np.abs(gram)) == 0:
        raise ValueError("all decoding states are zero")
    g_inv, support = psd_inv_sqrt(gram)
    comp = (np.eye(d) - support) / n_states
    povm = g_inv[None] @ (p[:, None, None] * w) @ g_inv[None] + comp
    return np.stack([hermitianize(e) for e in povm])


def is_classical(states: Sequence[np.ndarray], tol: float = 1e-12) -> bool:
    """True if all states are diagonal in the computational basis."""
    for s in states:
        s = np.asarray(s)
        if np.max(np.abs(s - np.diag(np.diag(s)))) > tol:
            return False
    return True


def ml_decoder(states: Sequence[np.ndarray]) -> np.ndarray:
    """Maximum-likelihood decoder for diagonal states; ties are split uniformly."""
    if not is_classical(states):
        raise ValueError("maximum-likelihood decoding needs commuting diagonal states")
    probs = np.real(np.stack([np.diag(s) for s in states]))
    best = probs.max(axis=0)
    winners = np.isclose(probs, best[None, :], rtol=0, atol=1e-13)
    weights = winners / winners.sum(axis=0, keepdims=True)
    return np.stack([np.diag(w).astype(complex) for w in weights])


def success_probabilities(povm: np.ndarray, states: Sequence[np.ndarray]) -> np.ndarray:
    """tr(D_j W_j) for each j."""
    return np.real(np.einsum("jab,jba->j", povm, np.asarray(states)))


def helstrom_success(rho0, rho1, p0: float = 0.5) -> float:
    """Optimal success probability for discriminating two states."""
    return 0.5 * (1 + trace_norm(p0 * np.asarray(rho0) - (1 - p0) * np.asarray(rho1)))


def code_decoder(c: Codebook, l: int, bob: WordStates, decoder: str = "pgm"):
    states = bob.stack(c.code(l))
    if decoder == "auto":
        decoder = "ml" if is_classical(bob.site) else "pgm"
    povm = ml_decoder(states) if decoder == "ml" else pgm_decoder(states)
    return povm, states


def check_goodness(c: Codebook, l: int, s: CqqState, eps: float, decoder: str = "pgm",
                   budget: int = 2**12) -> tuple[bool, float]:
    """Average decoding success of C_l (over its M*S words) against 1 - eps."""
    bob = WordStates(s.bob_states(), budget)
    povm, states = code_decoder(c, l, bob, decoder)
    avg = float(success_probabilities(povm, states).mean())
    return avg >= 1 - eps, avg


# ---------------------------------------------------------------- experiments

@dataclass
class ExperimentRow:
    params: dict
    statistic: str
    mean: float
    stderr: float
    max: float
    extra: dict = field(default_factory=dict)


def _stderr(x: np.ndarray) -> float:
    return float(x.std(ddof=1) / np.sqrt(len(x))) if len(x) > 1 else 0.0


def covering_experiment(channel: Sequence[np.ndarray], q: TypeVector, m_values: Sequence[int],
                        trials: int = DEFAULT_TRIALS, seed=0, budget: int = 2**12) -> list[ExperimentRow]:
    """Trace distance ||M^{-1} sum_j W_{U(j)} - sigma(Q)||_1 for i.i.d. uniform
    words from the type class, ``trials`` repetitions for each M."""
    ws = WordStates(channel, budget)
    tc = type_class_array(q)
    sigma = type_class_average(channel, q, budget=budget)
    all_states = ws.stack(tc)
    k = q.alphabet_size
    lookup = {int(code): i for i, code in enumerate(string_index(tc, k))}
    info = holevo(q.distribution, channel)
    rows = []
    for m_idx, m in enumerate(m_values):
        rng = np.random.default_rng([int(seed), m_idx, int(m)])
        dists = np.empty(trials)
        for t in range(trials):
            words = sample_type_class(q, int(m), rng)
            idx = [lookup[int(cw)] for cw in string_index(words, k)]
            avg = all_states[idx].mean(axis=0)
            dists[t] = trace_norm(avg - sigma)
        rows.append(ExperimentRow(
            params={"n": q.n, "M": int(m), "trials": trials, "seed": seed},
            statistic="trace_distance",
            mean=float(dists.mean()), stderr=_stderr(dists), max=float(dists.max()),
            extra={"holevo_bits": info},
        ))
    return rows


def covering_bound(m: int, n: int, d: int, info: float, delta: float, eps: float) -> float:
    """2 d^n 2^{-M iota^n eps / (288 ln 2)} with log iota = -I(P;W) - delta."""
    return 2 * d**n * 2.0 ** (-m * 2.0 ** (-n * (info + delta)) * eps / (288 * math.log(2)))


def chernoff_bound(dim: int, m: int, alpha: float, eta: float) -> float:
    """2D 2^{-M alpha eta^2 / (2 ln 2)}."""
    return 2 * dim * 2.0 ** (-m * alpha * eta**2 / (2 * math.log(2)))


def in_operator_interval(x: np.ndarray, lo: np.ndarray, hi: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.linalg.eigvalsh(hermitianize(x - lo))[0] >= -tol
                and np.linalg.eigvalsh(hermitianize(hi - x))[0] >= -tol)


def chernoff_experiment(sampler: Callable[[np.random.Generator, int], np.ndarray], mean_operator: np.ndarray,
                        m: int, eta: float, trials: int = DEFAULT_TRIALS, seed=0) -> ExperimentRow:
    """Empirical Pr{M^{-1} sum_j X_j not in [(1-eta)A, (1+eta)A]}.

    ``sampler(rng, size)`` returns an array (size, D, D) of operators with
    0 <= X <= 1 and expectation ``mean_operator`` = A >= alpha 1, alpha > 0.
    """
    a = hermitianize(np.asarray(mean_operator, dtype=complex))
    alpha = float(np.linalg.eigvalsh(a)[0])
    if alpha <= 0:
        raise ValueError("the mean operator must be positive definite (alpha > 0)")
    if not 0 < eta < 0.5:
        raise ValueError("eta must lie in (0, 1/2)")
    rng = np.random.default_rng(seed)
    outside = np.zeros(trials)
    for t in range(trials):
        xs = sampler(rng, m)
        avg = xs.mean(axis=0)
        outside[t] = not in_operator_interval(avg, (1 - eta) * a, (1 + eta) * a)
    dim = a.shape[0]
    return ExperimentRow(
        params={"D": dim, "M": m, "eta": eta, "trials": trials, "seed": seed},
        statistic="tail_probability",
        mean=float(outside.mean()), stderr=_stderr(outside), max=float(outside.max()),
        extra={"bound": chernoff_bound(dim, m, alpha, eta), "alpha": alpha},
    )


def finite_set_sampler(ops: np.ndarray, weights=None):
    """Sampler drawing from a finite set of operators; returns (sampler, mean)."""
    ops = np.asarray(ops, dtype=complex)
    w = np.full(len(ops), 1.0 / len(ops)) if weights is None else np.asarray(weights, dtype=float)

    def sampler(rng, size):
        return ops[rng.choice(len(ops), size=size, p=w)]

    return sampler, np.einsum("k,kab->ab", w, ops)


def random_effect_set(dim: int, count: int, rng: np.random.Generator, floor: float = 0.0) -> np.ndarray:
    """``count`` random operators with floor*1 <= X <= 1."""
    from .linalg import random_unitary

    out = []
    for _ in range(count):
        u = random_unitary(dim, rng)
        lam = floor + (1 - floor) * rng.random(dim)
        out.append((u * lam) @ u.conj().T)
    return np.stack(out)


def von_neumann_entropy_bits(rho) -> float:
    return von_neumann_entropy(rho)
