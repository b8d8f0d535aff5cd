"""Independent brute-force oracles used by the tests."""

import itertools
import math

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from qdistill.info import coherent_information, von_neumann_entropy
from qdistill.linalg import partial_trace_array


def simplex_grid(k, steps):
    pts = [c for c in itertools.product(range(steps + 1), repeat=k) if sum(c) == steps]
    return np.array(pts, dtype=float) / steps


def _lower_envelope(xy, z):
    """Lower convex envelope of points (xy, z) evaluated at the points themselves."""
    try:
        hull = ConvexHull(np.column_stack([xy, z]))
    except QhullError:
        return z.copy()
    eq = hull.equations
    lower = eq[eq[:, -2] < -1e-12]
    planes = -(xy @ lower[:, :-2].T + lower[:, -1]) / lower[:, -2]
    return np.minimum(z, planes.max(axis=1))


def k1_grid_oracle(probs, bob, eve, steps=20):
    """max I(U;B|T) - I(U;E|T) for 3-letter sources over grid directions.

    The objective per column v of the channel, f(v) = H(sum p_x v_x rho^B_x)
    - H(sum p_x v_x rho^E_x) with unnormalized entropies, is 1-homogeneous, so
    the optimum is 3 * (concave envelope of f - convex envelope of f) at the
    simplex center, both envelopes taken over the grid.
    """
    probs = np.asarray(probs)
    grid = simplex_grid(len(probs), steps)

    def h_unn(a):
        tr = np.trace(a).real
        if tr <= 1e-15:
            return 0.0
        return tr * von_neumann_entropy(a / tr) - tr * math.log2(tr)

    def f(c):
        w = probs * c
        return h_unn(sum(wi * b for wi, b in zip(w, bob))) - h_unn(sum(wi * e for wi, e in zip(w, eve)))

    phi = np.array([f(c) for c in grid])
    xy = grid[:, :2]
    gap = phi - _lower_envelope(xy, phi)
    center = np.full(len(probs), 1.0 / len(probs))
    res = linprog(-gap, A_eq=np.vstack([grid.T, np.ones(len(grid))])[1:], b_eq=np.append(center[1:], 1.0),
                  bounds=(0, None), method="highs")
    return float(-res.fun) * len(probs)


def d1_two_outcome_oracle(rho, steps_angle=9, steps_eig=21):
    """max over identity and 2-outcome qubit POVMs {E, 1-E} (branches sqrt(E))
    of sum_l p_l I_c(A>B)_{rho_l}, on a grid."""
    best = coherent_information(rho, (2, 2))
    eig = np.linspace(0, 1, steps_eig)
    for th in np.linspace(0, np.pi, steps_angle):
        for ph in np.linspace(0, 2 * np.pi, 2 * steps_angle, endpoint=False):
            v = np.array([np.cos(th / 2), np.exp(1j * ph) * np.sin(th / 2)])
            w = np.array([-np.exp(-1j * ph) * np.sin(th / 2), np.cos(th / 2)])
            pv, pw = np.outer(v, v.conj()), np.outer(w, w.conj())
            for a in eig:
                for b in eig:
                    total = 0.0
                    for x, y in ((a, b), (1 - a, 1 - b)):
                        root = np.sqrt(x) * pv + np.sqrt(y) * pw
                        k = np.kron(root, np.eye(2))
                        br = k @ rho @ k.conj().T
                        p = np.trace(br).real
                        if p > 1e-12:
                            total += p * coherent_information(br / p, (2, 2))
                    best = max(best, total)
    return best


def channel_diagonal_oracle(kraus, steps=10001):
    """max over diagonal inputs diag(1-q, q) of H(B) - H(A'B), via the
    purification sqrt(1-q)|00> + sqrt(q)|11> on A'A."""
    best = -np.inf
    for q in np.linspace(0, 1, steps):
        psi = np.zeros(4)
        psi[0], psi[3] = math.sqrt(1 - q), math.sqrt(q)
        rho = np.outer(psi, psi)
        out = sum(np.kron(np.eye(2), k) @ rho @ np.kron(np.eye(2), k).conj().T for k in kraus)
        hb = von_neumann_entropy(partial_trace_array(out, (2, 2), [1]))
        best = max(best, hb - von_neumann_entropy(out))
    return best


def ml_key_error(spec, branches, channel):
    """Exhaustive Pr{K != K' | no abort} for a classical source with Bob's
    letter channel W(y|x), decoded by maximum likelihood with uniform ties."""
    channel = np.asarray(channel, dtype=float)
    n = spec.n
    p = spec.source.probs
    by_type = {b.q.counts: b for b in branches}
    k_in, k_out = channel.shape
    err, ok = 0.0, 0.0
    for xs in itertools.product(range(k_in), repeat=n):
        px = float(np.prod(p[list(xs)]))
        counts = tuple(int(c) for c in np.bincount(xs, minlength=k_in))
        br = by_type.get(counts)
        if br is None or px == 0:
            continue
        words = br.code.words
        l_hits = [l for l in range(br.code.L) if any(tuple(w) == xs for w in words[l].reshape(-1, n))]
        if not l_hits:
            continue
        ok += px
        for l in l_hits:
            matches = [(m, s) for m in range(br.code.M) for s in range(br.code.S) if tuple(words[l, m, s]) == xs]
            flat = words[l].reshape(-1, n)
            for ys in itertools.product(range(k_out), repeat=n):
                py = float(np.prod([channel[x, y] for x, y in zip(xs, ys)]))
                if py == 0:
                    continue
                lik = np.array([np.prod([channel[a, y] for a, y in zip(w, ys)]) for w in flat])
                winners = np.flatnonzero(np.isclose(lik, lik.max(), rtol=0, atol=1e-15))
                for m, _ in matches:
                    wrong = sum(1 for j in winners if j // br.code.S != m) / len(winners)
                    err += px / len(l_hits) / len(matches) * py * wrong
    return err / ok


def qubit_ket(theta):
    return np.array([math.cos(theta / 2), math.sin(theta / 2)])


def three_letter_instances(count=8, seed=5):
    """Seeded 3-letter cqq sources with pure qubit Bob and Eve states:
    list of (probs, bob states, eve states)."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        a = rng.uniform(0, 2 * np.pi, 3)
        b = rng.uniform(0, 2 * np.pi, 3)
        p = rng.dirichlet(np.ones(3) * 3)
        bob = [np.outer(qubit_ket(t), qubit_ket(t)) for t in a]
        eve = [np.outer(qubit_ket(t), qubit_ket(t)) for t in b]
        out.append((p, bob, eve))
    return out
