"""Multi-start maximization of the single-copy distillation formulas.

Every objective is evaluated exactly from entropies on a feasible point, so
each reported value is a valid lower bound on the true maximum whatever the
optimizer does.  Results are the best of the plug-in points and the local
ascents started from them and from seeded random points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .info import CqqState, entropy_unnormalized, holevo
from .linalg import DensityMatrix, KrausMap, hermitianize, partial_trace_array, psd_inv_sqrt

MAXITER = 200


@dataclass
class OptResult:
    value: float
    argument: object
    restarts: int
    trace: list = field(default_factory=list)
    plugins: dict = field(default_factory=dict)
    ceiling: float | None = None

    def __post_init__(self):
        for name, v in self.plugins.items():
            if self.value < v - 1e-9:
                raise AssertionError(f"best value {self.value} below plug-in {name} = {v}")


def _seeds(seed, count: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def _ascend(objective: Callable[[np.ndarray], float], starts, maxiter: int = MAXITER):
    """Local ascent from each start; returns (best value, best x, per-start values).

    Ties are broken by start order, so results are deterministic.
    """
    best_v, best_x, trace = -np.inf, None, []
    for x0 in starts:
        res = minimize(lambda x: -objective(x), x0, method="L-BFGS-B", options={"maxiter": maxiter})
        v = objective(res.x)  # re-evaluate exactly at the returned feasible point
        trace.append(float(v))
        if v > best_v + 1e-12:
            best_v, best_x = float(v), res.x
    return best_v, best_x, trace


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------- K1 for cqq states

def cqq_objective(s: CqqState, channel: np.ndarray, n_t: int) -> float:
    """I(U;B|T) - I(U;E|T) for U drawn from X through ``channel`` (rows x, columns (t, u)).

    Columns are grouped into ``n_t`` consecutive blocks; T is the block index.
    The H(U|T) terms of both mutual informations cancel, leaving unnormalized
    entropies of the conditional operators.
    """
    channel = np.asarray(channel, dtype=float)
    n_u = channel.shape[1] // n_t
    w = s.probs[:, None] * channel
    out = []
    for states in (s.bob_states(), s.eve_states()):
        a = np.einsum("xc,xab->cab", w, np.stack(states))
        val = 0.0
        for t in range(n_t):
            blk = a[t * n_u:(t + 1) * n_u]
            val += entropy_unnormalized(blk.sum(axis=0)) - sum(entropy_unnormalized(x) for x in blk)
        out.append(val)
    return float(out[0] - out[1])


def k1_cqq(s: CqqState, restarts: int = 4, seed=0, n_t: int | None = None, n_u: int | None = None,
           maxiter: int = MAXITER) -> OptResult:
    """Maximize I(U;B|T) - I(U;E|T) over channels X -> U and T a function of U.

    U ranges over pairs (t, u) with t < n_t (default |X|) and u < n_u
    (default |X|), so |U| <= |X|^2 and T is the first component.
    """
    k = s.alphabet_size
    n_t = k if n_t is None else n_t
    n_u = k if n_u is None else n_u
    cols = n_t * n_u
    if n_u < 1 or n_t < 1:
        raise ValueError("cardinalities must be positive")

    def channel_of(x):
        return _softmax_rows(x.reshape(k, cols))

    def objective(x):
        return cqq_objective(s, channel_of(x), n_t)

    plug = np.zeros((k, cols))
    plug[np.arange(k), np.arange(k) % cols] = 1.0                # U = X (or folded), T constant
    trivial = np.zeros((k, cols))
    trivial[:, 0] = 1.0
    plugins = {"U=X": cqq_objective(s, plug, n_t), "U constant": cqq_objective(s, trivial, n_t)}
    starts = [np.where(plug > 0, 8.0, -8.0).ravel()]
    for sd in _seeds(seed, restarts):
        starts.append(np.random.default_rng(sd).normal(scale=2.0, size=k * cols))
    v, x, trace = _ascend(objective, starts, maxiter)
    best_name = max(plugins, key=plugins.get)
    if plugins[best_name] >= v:
        v, arg = plugins[best_name], (plug if best_name == "U=X" else trivial)
    else:
        arg = channel_of(x)
    return OptResult(v, {"channel": arg, "n_t": n_t}, restarts, trace, plugins,
                     ceiling=float(holevo(s.probs, s.bob_states())) if n_t == 1 else None)


# ---------------------------------------------------------------- POVM-based K1

def _normalized_operators(x: np.ndarray, count: int, d: int) -> np.ndarray:
    """A_k = M_k (sum M^dag M)^{-1/2} from real parameters."""
    m = (x[: count * d * d] + 1j * x[count * d * d:]).reshape(count, d, d)
    s = np.einsum("kba,kbc->ac", m.conj(), m)
    inv, _ = psd_inv_sqrt(s, cutoff=1e-14)
    return m @ inv


def _measured_cqq(rho: np.ndarray, dims, elements: np.ndarray):
    """Unnormalized conditional BE operators tr_A[(E_k (x) 1) rho] for each element."""
    d_a = dims[0]
    rest = int(np.prod(dims[1:]))
    r = rho.reshape(d_a, rest, d_a, rest)
    return np.einsum("kba,arbs->krs", elements, r)


def _grouped_gain(ops_b, ops_e, n_t: int) -> float:
    n_x = len(ops_b) // n_t
    total = 0.0
    for ops, sign in ((ops_b, 1.0), (ops_e, -1.0)):
        for t in range(n_t):
            blk = ops[t * n_x:(t + 1) * n_x]
            total += sign * (entropy_unnormalized(blk.sum(axis=0)) - sum(entropy_unnormalized(a) for a in blk))
    return float(total)


def k1_general_value(rho, dims, elements: np.ndarray, n_t: int) -> float:
    d_a, d_b, d_e = dims
    be = _measured_cqq(np.asarray(rho), dims, elements)
    be4 = be.reshape(-1, d_b, d_e, d_b, d_e)
    ops_b = np.einsum("kaebe->kab", be4)
    ops_e = np.einsum("kbabc->kac", be4)
    return _grouped_gain(ops_b, ops_e, n_t)


def k1_general(rho_abe, restarts: int = 2, seed=0, n_t: int | None = None, n_x: int | None = None,
               maxiter: int = MAXITER) -> OptResult:
    """Maximize I(X;B|T) - I(X;E|T) over POVMs on A, T a function of the outcome.

    Outcomes are n_t groups of n_x elements (defaults d_A^2 and d_A^2, i.e.
    |X| <= d_A^4 and |T| <= d_A^2); T is the group index.
    """
    rho = np.asarray(rho_abe.data if isinstance(rho_abe, DensityMatrix) else rho_abe, dtype=complex)
    dims = tuple(rho_abe.dims) if isinstance(rho_abe, DensityMatrix) else None
    if dims is None or len(dims) != 3:
        raise ValueError("k1_general needs a DensityMatrix with dims (d_A, d_B, d_E)")
    d_a = dims[0]
    n_t = d_a**2 if n_t is None else n_t
    n_x = d_a**2 if n_x is None else n_x
    count = n_t * n_x

    def elements_of(x):
        a = _normalized_operators(x, count, d_a)
        return a.conj().transpose(0, 2, 1) @ a

    def objective(x):
        return k1_general_value(rho, dims, elements_of(x), n_t)

    rho_a = partial_trace_array(rho, dims, [0])
    w, v = np.linalg.eigh(rho_a)
    basis = np.eye(d_a) if np.allclose(rho_a, np.diag(np.diag(rho_a)), atol=1e-12) else v
    schmidt = np.zeros((count, d_a, d_a), dtype=complex)
    for i in range(min(d_a, n_x)):
        schmidt[i] = np.outer(basis[:, i], basis[:, i].conj())
    if n_x < d_a:
        schmidt[n_x - 1] += np.eye(d_a) - schmidt[:n_x].sum(axis=0)
    plugins = {"schmidt measurement": k1_general_value(rho, dims, schmidt, n_t)}

    def params_of(elements):
        m = np.stack([_sqrt_psd(e) for e in elements]) + 1e-3 * np.eye(d_a)[None]
        return np.concatenate([m.real.ravel(), m.imag.ravel()])

    starts = [params_of(schmidt)]
    for sd in _seeds(seed, restarts):
        starts.append(np.random.default_rng(sd).normal(size=2 * count * d_a * d_a))
    v, x, trace = _ascend(objective, starts, maxiter)
    if plugins["schmidt measurement"] >= v:
        v, arg = plugins["schmidt measurement"], schmidt
    else:
        arg = elements_of(x)
    return OptResult(v, {"povm": arg, "n_t": n_t}, restarts, trace, plugins)


def _sqrt_psd(m):
    w, v = np.linalg.eigh(hermitianize(m))
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


# ---------------------------------------------------------------- D1

def instrument_value(rho: np.ndarray, dims, ops: np.ndarray) -> float:
    """sum_l lambda_l I_c(A>B) of the branches (A_l (x) 1) rho (A_l (x) 1)^dag."""
    d_a, d_b = dims
    total = 0.0
    for a in ops:
        k = np.kron(a, np.eye(d_b))
        br = k @ rho @ k.conj().T
        b = partial_trace_array(br, (a.shape[0], d_b), [1])
        total += entropy_unnormalized(b) - entropy_unnormalized(br)
    return float(total)


def d1(rho_ab, restarts: int = 4, seed=0, outcomes: int | None = None, maxiter: int = MAXITER) -> OptResult:
    """Maximize sum_l lambda_l I_c(A>B)_{rho_l} over rank-one instruments on A
    with at most ``outcomes`` (default d_A^2) branches."""
    dm = rho_ab if isinstance(rho_ab, DensityMatrix) else DensityMatrix(rho_ab)
    rho = np.asarray(dm.data)
    dims = tuple(dm.dims)
    if len(dims) != 2:
        raise ValueError("d1 needs a bipartite state")
    d_a = dims[0]
    count = d_a**2 if outcomes is None else outcomes

    def ops_of(x):
        return _normalized_operators(x, count, d_a)

    def objective(x):
        return instrument_value(rho, dims, ops_of(x))

    identity = np.zeros((count, d_a, d_a), dtype=complex)
    identity[0] = np.eye(d_a)
    measure = np.zeros((count, d_a, d_a), dtype=complex)
    plugins = {"identity": instrument_value(rho, dims, identity[:1])}
    if count >= d_a:
        for i in range(d_a):
            measure[i, i, i] = 1.0
        plugins["measure A"] = instrument_value(rho, dims, measure)

    def params_of(ops):
        m = ops + 1e-3 * np.eye(d_a)[None]
        return np.concatenate([m.real.ravel(), m.imag.ravel()])

    starts = [params_of(identity)]
    for sd in _seeds(seed, restarts):
        starts.append(np.random.default_rng(sd).normal(size=2 * count * d_a * d_a))
    if restarts == 0:
        starts = []
    v, x, trace = _ascend(objective, starts, maxiter) if starts else (-np.inf, None, [])
    best_plug = max(plugins, key=plugins.get)
    if plugins[best_plug] >= v:
        v, arg = plugins[best_plug], (identity[:1] if best_plug == "identity" else measure)
    else:
        arg = ops_of(x)
    return OptResult(v, {"instrument": arg}, restarts, trace, plugins, ceiling=math.log2(d_a))


# ---------------------------------------------------------------- channel coherent information

def _complementary(channel: KrausMap, rho: np.ndarray) -> np.ndarray:
    ops = channel.operators
    return np.array([[np.trace(ki @ rho @ kj.conj().T) for kj in ops] for ki in ops])


def channel_ic_value(channel: KrausMap, rho_in: np.ndarray) -> float:
    """I_c(A'>B) for the purification of ``rho_in`` sent through the channel:
    H(N(rho)) - H(N^c(rho))."""
    return float(entropy_unnormalized(channel.apply(rho_in)) - entropy_unnormalized(_complementary(channel, rho_in)))


def channel_coherent_info(channel: KrausMap, restarts: int = 4, seed=0, maxiter: int = MAXITER) -> OptResult:
    """Maximum single-use coherent information over input states (signed)."""
    if not channel.is_trace_preserving:
        raise ValueError("channel must be trace preserving")
    d = channel.d_in

    def rho_of(x):
        m = (x[: d * d] + 1j * x[d * d:]).reshape(d, d)
        r = m @ m.conj().T
        return r / np.trace(r).real

    def objective(x):
        return channel_ic_value(channel, rho_of(x))

    plugins = {"maximally mixed": channel_ic_value(channel, np.eye(d) / d)}
    for i in range(d):
        e = np.zeros((d, d))
        e[i, i] = 1.0
        plugins[f"pure |{i}>"] = channel_ic_value(channel, e)
    starts = [np.concatenate([np.eye(d).ravel() / math.sqrt(d), np.zeros(d * d)])]
    for sd in _seeds(seed, restarts):
        starts.append(np.random.default_rng(sd).normal(size=2 * d * d))
    v, x, trace = _ascend(objective, starts, maxiter)
    best_plug = max(plugins, key=plugins.get)
    arg = rho_of(x)
    if plugins[best_plug] >= v:
        v = plugins[best_plug]
        arg = np.eye(d) / d if best_plug == "maximally mixed" else np.diag(np.eye(d)[int(best_plug[6])])
    return OptResult(v, {"input": arg}, restarts, trace, plugins, ceiling=math.log2(d))


# ---------------------------------------------------------------- Caratheodory

def caratheodory_reduce(points, weights, tol: float = 1e-12) -> np.ndarray:
    """Weights with support at most d+1 and the same barycenter.

    Repeatedly finds an affine dependency among the supported points and moves
    along it until a weight vanishes.
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    if x.shape[0] == 1 and np.ndim(points) == 1:
        x = x.T
    w = np.asarray(weights, dtype=float).copy()
    if w.ndim != 1 or len(w) != len(x):
        raise ValueError("one weight per point required")
    if np.any(w < -tol) or abs(w.sum() - 1) > 1e-9:
        raise ValueError("weights must form a probability distribution")
    w = np.clip(w, 0, None)
    d = x.shape[1]
    target = w @ x
    while True:
        active = np.flatnonzero(w > 0)
        if len(active) <= d + 1:
            break
        a = np.vstack([x[active].T, np.ones(len(active))])
        _, _, vh = np.linalg.svd(a)
        v = vh[-1]
        if v.max() <= tol:
            v = -v
        pos = v > tol
        ratios = w[active][pos] / v[pos]
        j = int(np.argmin(ratios))
        w[active] -= ratios[j] * v
        w[active[np.flatnonzero(pos)[j]]] = 0.0
        w = np.where(w < tol, 0.0, w)
    w /= w.sum()
    if np.count_nonzero(w) > d + 1 or np.max(np.abs(w @ x - target)) > 1e-9:
        raise AssertionError("reduction postconditions violated")
    return w
