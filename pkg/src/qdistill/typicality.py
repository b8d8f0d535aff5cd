"""Method of types: type vectors, type classes, typical sets and projectors.

Strings are handled as integer arrays of letter indices ``0..k-1``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .info import shannon_entropy, von_neumann_entropy
from .linalg import hermitianize

ENUMERATION_LIMIT = 10**6
DEFAULT_MATRIX_BUDGET = 2**11


class BudgetExceeded(RuntimeError):
    """Raised when an exact computation would exceed its size budget."""


@dataclass(frozen=True)
class TypeVector:
    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts) or not counts:
            raise ValueError(f"invalid type counts {counts}")
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def alphabet_size(self) -> int:
        return len(self.counts)

    @property
    def distribution(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.n

    def entropy(self) -> float:
        return shannon_entropy(self.distribution)

    def base_string(self) -> np.ndarray:
        return np.repeat(np.arange(self.alphabet_size), self.counts)


def type_of(xn: Sequence, alphabet: Sequence | None = None) -> TypeVector:
    """Letter counts of ``xn``; the alphabet defaults to its sorted letters."""
    letters = list(xn)
    if alphabet is None:
        alphabet = sorted(set(letters))
    index = {a: i for i, a in enumerate(alphabet)}
    counts = [0] * len(alphabet)
    for a in letters:
        if a not in index:
            raise ValueError(f"letter {a!r} not in alphabet {list(alphabet)}")
        counts[index[a]] += 1
    return TypeVector(counts)


def enumerate_types(n: int, k: int) -> list[TypeVector]:
    """All types of length-n strings over k letters (stars and bars order)."""
    out = []
    for bars in itertools.combinations(range(n + k - 1), k - 1):
        edges = (-1,) + bars + (n + k - 1,)
        out.append(TypeVector([edges[i + 1] - edges[i] - 1 for i in range(k)]))
    return out


def num_types(n: int, k: int) -> int:
    return math.comb(n + k - 1, k - 1)


def type_class_size(q: TypeVector) -> int:
    """Multinomial coefficient n! / prod(counts!)."""
    size = math.factorial(q.n)
    for c in q.counts:
        size //= math.factorial(c)
    return size


def iter_type_class(q: TypeVector) -> Iterator[tuple[int, ...]]:
    """Strings of the type class in lexicographic order."""
    counts = list(q.counts)
    n = q.n
    word = [0] * n

    def rec(pos):
        if pos == n:
            yield tuple(word)
            return
        for a, c in enumerate(counts):
            if c:
                counts[a] -= 1
                word[pos] = a
                yield from rec(pos + 1)
                counts[a] += 1

    yield from rec(0)


def type_class_array(q: TypeVector, limit: int = ENUMERATION_LIMIT) -> np.ndarray:
    size = type_class_size(q)
    if size > limit:
        raise BudgetExceeded(f"type class has {size} elements (limit {limit})")
    return np.array(list(iter_type_class(q)), dtype=np.int64).reshape(size, q.n)


def string_index(words: np.ndarray, k: int) -> np.ndarray:
    """Integer code of each row (base-k, first letter most significant)."""
    words = np.atleast_2d(words)
    weights = k ** np.arange(words.shape[1] - 1, -1, -1, dtype=np.int64)
    return words @ weights


def sample_type_class(q: TypeVector, count: int, seed) -> np.ndarray:
    """``count`` i.i.d. uniform strings from the type class, shape (count, n).

    Each sample is a seeded Fisher-Yates shuffle of the canonical base string.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    base = np.tile(q.base_string(), (count, 1))
    return rng.permuted(base, axis=1)


def is_typical_type(q: TypeVector, p, delta: float) -> bool:
    """Closed condition ||P - Q/n||_1 <= delta."""
    p = np.asarray(p, dtype=float)
    if p.shape != (q.alphabet_size,):
        raise ValueError("type and distribution must share the alphabet")
    return bool(np.sum(np.abs(p - q.distribution)) <= delta + 1e-12)


def typical_types(n: int, p, delta: float) -> list[TypeVector]:
    return [q for q in enumerate_types(n, len(p)) if is_typical_type(q, p, delta)]


def type_probability(q: TypeVector, p) -> float:
    """P^n(T_Q) = |T_Q| prod_x P(x)^{n Q(x)}."""
    p = np.asarray(p, dtype=float)
    logp = 0.0
    for c, px in zip(q.counts, p):
        if c:
            if px <= 0:
                return 0.0
            logp += c * math.log(px)
    return math.exp(math.lgamma(q.n + 1) - sum(math.lgamma(c + 1) for c in q.counts) + logp)


def entropy_typical_set(p, n: int, delta: float) -> tuple[int, float]:
    """Size and probability of {x^n : |-(1/n) log P^n(x^n) - H(P)| <= delta}.

    Sequence probabilities depend only on the type, so the sum runs over types.
    """
    p = np.asarray(p, dtype=float)
    h = shannon_entropy(p)
    size, mass = 0, 0.0
    for q in enumerate_types(n, len(p)):
        if any(c and px <= 0 for c, px in zip(q.counts, p)):
            continue
        rate = -sum(c * math.log2(px) for c, px in zip(q.counts, p) if c) / n
        if abs(rate - h) <= delta + 1e-12:
            size += type_class_size(q)
            mass += type_probability(q, p)
    return size, mass


# ---------------------------------------------------------------- projectors

@dataclass(frozen=True)
class TypicalProjector:
    projector: np.ndarray
    interval: tuple[float, float]
    delta: float
    mass: float

    @property
    def rank(self) -> int:
        return int(round(np.trace(self.projector).real))


def _site_spectra(states: Sequence[np.ndarray]):
    out = []
    for s in states:
        w, v = np.linalg.eigh(hermitianize(np.asarray(s, dtype=complex)))
        out.append((np.clip(w, 0.0, None), v))
    return out


def _product_window(spectra, center: float, delta: float, budget: int):
    """Eigen-data of a product operator and the mask of eigenvalues whose
    per-site log rate lies within ``delta`` of ``center``."""
    dim = int(np.prod([len(w) for w, _ in spectra]))
    if dim > budget:
        raise BudgetExceeded(f"product dimension {dim} exceeds budget {budget}")
    n = len(spectra)
    logw = np.zeros(1)
    probs = np.ones(1)
    for w, _ in spectra:
        with np.errstate(divide="ignore"):
            lw = np.where(w > 0, np.log2(np.where(w > 0, w, 1.0)), -np.inf)
        logw = np.add.outer(logw, lw).reshape(-1)
        probs = np.multiply.outer(probs, w).reshape(-1)
    rate = -logw / n
    mask = np.isfinite(rate) & (np.abs(rate - center) <= delta + 1e-12)
    return mask, probs


def _product_projector(spectra, mask) -> np.ndarray:
    vecs = spectra[0][1]
    for _, v in spectra[1:]:
        vecs = np.kron(vecs, v)
    vk = vecs[:, mask]
    return vk @ vk.conj().T


def typical_projector(rho, n: int, delta: float, budget: int = DEFAULT_MATRIX_BUDGET) -> TypicalProjector:
    """Spectral projector of rho^{(x)n} onto eigenvalues in
    [2^{-n(H+delta)}, 2^{-n(H-delta)}], boundaries included."""
    rho = np.asarray(getattr(rho, "data", rho))
    h = von_neumann_entropy(rho)
    spectra = _site_spectra([rho] * n)
    mask, probs = _product_window(spectra, h, delta, budget)
    proj = _product_projector(spectra, mask)
    return TypicalProjector(proj, (2.0 ** (-n * (h + delta)), 2.0 ** (-n * (h - delta))),
                            delta, float(probs[mask].sum()))


def conditional_entropy(channel: Sequence[np.ndarray], q) -> float:
    """H(W|Q) = sum_x Q(x) H(W_x)."""
    return float(sum(px * von_neumann_entropy(w) for px, w in zip(q, channel) if px > 0))


def conditional_typical_projector(channel: Sequence[np.ndarray], xn: Sequence[int], delta: float,
                                  budget: int = DEFAULT_MATRIX_BUDGET) -> TypicalProjector:
    """Projector onto eigenvectors of W_{x^n} with eigenvalues in the window
    around 2^{-n H(W|P)}, P the type of ``xn``."""
    xn = list(xn)
    n = len(xn)
    q = type_of(xn, range(len(channel))).distribution
    h = conditional_entropy(channel, q)
    spectra = _site_spectra([channel[x] for x in xn])
    mask, probs = _product_window(spectra, h, delta, budget)
    proj = _product_projector(spectra, mask)
    return TypicalProjector(proj, (2.0 ** (-n * (h + delta)), 2.0 ** (-n * (h - delta))),
                            delta, float(probs[mask].sum()))


def product_operator(mats: Sequence[np.ndarray]) -> np.ndarray:
    out = np.asarray(mats[0])
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def lln_trace(xn: Sequence[int], channel: Sequence[np.ndarray], delta: float,
              budget: int = DEFAULT_MATRIX_BUDGET) -> float:
    """tr(W_{x^n} Pi^n_{rho,delta}) with rho the average output under the type of x^n."""
    xn = list(xn)
    q = type_of(xn, range(len(channel))).distribution
    rho = sum(px * np.asarray(w) for px, w in zip(q, channel))
    proj = typical_projector(rho, len(xn), delta, budget).projector
    w_n = product_operator([channel[x] for x in xn])
    return float(np.real(np.trace(w_n @ proj)))


def check_lln_operator(xn: Sequence[int], channel: Sequence[np.ndarray], delta: float, eps: float,
                       budget: int = DEFAULT_MATRIX_BUDGET) -> bool:
    """Whether tr(W_{x^n} Pi^n_{rho,delta}) >= 1 - eps at this finite n."""
    return lln_trace(xn, channel, delta, budget) >= 1 - eps
