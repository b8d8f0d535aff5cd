"""One test per acceptance criterion; each records a PASS/FAIL line that is
printed in the terminal summary."""

import io
import math
import time

import numpy as np
import pytest

from oracles import d1_two_outcome_oracle, k1_grid_oracle, ml_key_error, three_letter_instances
from qdistill import cli
from qdistill import codebook as cb
from qdistill.info import (
    BellMixture,
    CqqState,
    binary_entropy,
    coherent_information,
    comm_cost_ent,
    comm_cost_ent_split,
    conditional_mutual_information,
    cqq_from_pure,
    fannes_bound,
    hashing_rate,
    purification_of,
    shannon_entropy,
    von_neumann_entropy,
    wiretap_rate,
)
from qdistill.key_protocol import KeyProtocolSpec, build_branches, run_key_protocol
from qdistill.ent_protocol import run_hashing_protocol
from qdistill.linalg import DensityMatrix, fidelity, psd_sqrt, random_density, random_unitary, trace_norm
from qdistill.optimizers import caratheodory_reduce, d1, k1_cqq

FLIP = [[0.9, 0.1], [0.1, 0.9]]
BELL = BellMixture([0.85, 0.05, 0.05, 0.05])


@pytest.fixture
def verdict(record_property):
    """verdict(label, ok, detail) records the outcome line and asserts."""
    def check(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
        print(line)
        record_property("acceptance", line)
        assert ok, line
    return check


@pytest.fixture(scope="module")
def bell_runs():
    return {n: run_hashing_protocol(BELL, n, 0.001, 0.1, seed=0) for n in (4, 6)}


def test_criterion_1_formulas(verdict):
    t0 = time.perf_counter()
    gaps = [abs(hashing_rate(BellMixture([0.9, 0.1, 0, 0])) - (1 - binary_entropy(0.9)))]
    rng = np.random.default_rng(1)
    for _ in range(5):
        p = rng.dirichlet(np.ones(4))
        m = BellMixture(p)
        code, phase = comm_cost_ent_split(m.purification(), np.eye(2))
        gaps += [abs(comm_cost_ent(m.density()) - shannon_entropy(p)),
                 abs(code - binary_entropy(p[0] + p[1])),
                 abs(phase - (shannon_entropy(p) - binary_entropy(p[0] + p[1])))]
        rho = DensityMatrix(random_density(4, rng), (2, 2))
        gaps.append(abs(wiretap_rate(cqq_from_pure(purification_of(rho))) - coherent_information(rho)))
    elapsed = time.perf_counter() - t0
    verdict("1 formula suite", max(gaps) <= 1e-9 and elapsed < 1,
            f"max deviation {max(gaps):.2e} (tol 1e-9), {elapsed:.2f} s (limit 1 s)")


def test_criterion_2_invariant_suites(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    ssa, fvdg_lo, fvdg_hi, fannes, gentle = [], [], [], [], []
    for _ in range(1000):
        dims = tuple(int(x) for x in rng.integers(1, 3, size=3))
        rho = random_density(int(np.prod(dims)), rng, rank=int(rng.integers(1, 4)))
        ssa.append(conditional_mutual_information(rho, dims))
        d = int(rng.integers(2, 5))
        a = random_density(d, rng, rank=int(rng.integers(1, d + 1)))
        b = random_density(d, rng, rank=int(rng.integers(1, d + 1)))
        f, half = fidelity(a, b), 0.5 * trace_norm(a - b)
        fvdg_lo.append(half - (1 - math.sqrt(f)))
        fvdg_hi.append(math.sqrt(max(1 - f, 0)) - half)
        t = rng.uniform(0, 1) ** 3
        c = (1 - t) * a + t * random_density(d, rng)
        dist = trace_norm(a - c)
        fannes.append(fannes_bound(dist, d) - abs(von_neumann_entropy(a) - von_neumann_entropy(c)))
        u = random_unitary(d, rng)
        x = (u * rng.uniform(0, 1, d)) @ u.conj().T
        lam = 1 - np.trace(a @ x).real
        rx = psd_sqrt(x)
        gentle.append(math.sqrt(8 * max(lam, 0)) - trace_norm(rx @ a @ rx - a))
    elapsed = time.perf_counter() - t0
    worst = {"SSA": min(ssa), "FvdG lower": min(fvdg_lo), "FvdG upper": min(fvdg_hi),
             "Fannes": min(fannes), "gentle": min(gentle)}
    ok = worst["SSA"] >= -1e-8 and all(v >= -1e-9 for k, v in worst.items() if k != "SSA") and elapsed < 60
    verdict("2 invariant suites", ok,
            ", ".join(f"{k} min slack {v:.1e}" for k, v in worst.items()) + f", {elapsed:.1f} s (limit 60 s)")


def test_criterion_3_covering(verdict):
    t0 = time.perf_counter()
    ch = cli.symmetric_qubit_channel(0.5)
    n = 6
    q = cli._nearest_type(ch.probs, n)
    lo_m, hi_m = 2 ** math.ceil(n * 0.1), 2 ** math.ceil(n * 0.9)
    lo, hi = (cb.covering_experiment(ch.states, q, [m], trials=200, seed=0)[0] for m in (lo_m, hi_m))
    sep = (lo.mean - hi.mean) / math.hypot(lo.stderr, hi.stderr)
    elapsed = time.perf_counter() - t0
    verdict("3 covering lemma", hi.mean < lo.mean and sep >= 3 and elapsed < 300,
            f"I={hi.extra['holevo_bits']:.3f} bits, mean ||.||_1 {lo.mean:.4f} (M={lo_m}) vs {hi.mean:.4f} "
            f"(M={hi_m}), separation {sep:.1f} SE (need 3), {elapsed:.1f} s (limit 300 s)")


def test_criterion_4_chernoff(verdict):
    t0 = time.perf_counter()
    slack = []
    for i, dim in enumerate((1, 2, 4)):
        for j, m in enumerate((50, 500)):
            r = cli._chernoff_task((dim, m, 0.25, 1000, 4, [0, i, j]))
            slack.append((r.extra["bound"] + 3 * r.stderr - r.mean, dim, m, r.mean, r.extra["bound"]))
    elapsed = time.perf_counter() - t0
    worst = min(slack)
    verdict("4 operator Chernoff", worst[0] >= 0 and elapsed < 120,
            f"worst cell D={worst[1]} M={worst[2]} tail {worst[3]:.4f} vs bound {worst[4]:.4g}, "
            f"{elapsed:.1f} s (limit 120 s)")


def test_criterion_5_key_protocol(verdict):
    t0 = time.perf_counter()
    copy = run_key_protocol(KeyProtocolSpec(CqqState.from_classical([0.5, 0.5], np.eye(2)), 8, 0.1, 0.1, seed=0))
    spec = KeyProtocolSpec(CqqState.from_classical([0.5, 0.5], FLIP), 8, 0.1, 0.1, seed=3)
    noisy = run_key_protocol(spec, trials=2000, trial_seed=3)
    exact = ml_key_error(spec, build_branches(spec), FLIP)
    elapsed = time.perf_counter() - t0
    ok = (copy.error_probability == 0 and copy.uniformity <= 1e-9 and copy.leakage <= 1e-9
          and abs(noisy.error_probability - exact) <= 1e-9
          and abs(noisy.error_estimate - exact) <= 3 * noisy.error_stderr and elapsed < 120)
    verdict("5 key protocol", ok,
            f"copy: error {copy.error_probability}, uniformity {copy.uniformity:.1e}, leakage {copy.leakage:.1e}; "
            f"10% flip: exact {noisy.error_probability:.6f}, Monte Carlo {noisy.error_estimate:.4f} "
            f"+- {noisy.error_stderr:.4f}, ML oracle {exact:.6f}; {elapsed:.1f} s (limit 120 s)")


def test_criterion_6_phi_plus_fidelity(verdict):
    rep = run_hashing_protocol(BellMixture([1, 0, 0, 0]), 4, 0.001, 0.1, seed=0)
    verdict("6a Phi+ fidelity", rep.fidelity >= 1 - 1e-6, f"fidelity {rep.fidelity:.12f} (need >= 1 - 1e-6)")


def test_criterion_6_phi_plus_yield(verdict):
    rep = run_hashing_protocol(BellMixture([1, 0, 0, 0]), 4, 0.001, 0.1, seed=0)
    verdict("6b Phi+ yield", math.floor(rep.log_M) == 4,
            f"log M = {rep.log_M:.3f}, floor {math.floor(rep.log_M)} (need n = 4)")


def test_criterion_6_bell_invariants(verdict, bell_runs):
    t0 = time.perf_counter()
    worst = {k: max(getattr(r, k) for r in bell_runs.values())
             for k in ("eve_invariance_decode", "eve_invariance_fourier", "completeness_defect",
                       "recombination_defect")}
    verdict("6c Bell invariants n=4,6", all(v <= 1e-9 for v in worst.values()),
            ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + " (tol 1e-9)")


def test_criterion_6_bell_trend(verdict, bell_runs):
    f4, f6 = bell_runs[4].fidelity, bell_runs[6].fidelity
    verdict("6d Bell fidelity trend", f6 >= f4, f"fidelity n=4 {f4:.4f}, n=6 {f6:.4f} (need n=6 >= n=4)")


def test_criterion_7_optimizers(verdict):
    t0 = time.perf_counter()
    p, bob, eve = three_letter_instances()[3]
    s = CqqState(p, [np.kron(b, e) for b, e in zip(bob, eve)], (2, 2))
    k1_gap = abs(k1_cqq(s, restarts=4, seed=0).value - k1_grid_oracle(p, bob, eve, steps=20))
    f = 0.9
    werner = BellMixture([f, (1 - f) / 3, (1 - f) / 3, (1 - f) / 3]).density()
    d1_gap = abs(d1(werner, restarts=4, seed=0).value - d1_two_outcome_oracle(werner.data))
    rng = np.random.default_rng(7)
    plug = []
    for i in range(100):
        m = BellMixture(rng.dirichlet(np.ones(4) * 0.5))
        v = d1(m.density(), restarts=1, seed=i, maxiter=30).value
        plug.append(min(v - coherent_information(m.density()), v - hashing_rate(m)))
    cara_ok = 0
    for _ in range(1000):
        d, k = int(rng.integers(1, 6)), int(rng.integers(1, 40))
        x, w = rng.normal(size=(k, d)), rng.dirichlet(np.ones(k))
        red = caratheodory_reduce(x, w)
        cara_ok += bool(np.count_nonzero(red) <= d + 1 and np.all(red >= 0) and abs(red.sum() - 1) <= 1e-12
                        and np.max(np.abs(red @ x - w @ x)) <= 1e-9 and np.all(red[w == 0] == 0))
    elapsed = time.perf_counter() - t0
    ok = k1_gap <= 1e-3 and d1_gap <= 1e-3 and min(plug) >= -1e-6 and cara_ok == 1000 and elapsed < 600
    verdict("7 optimizers", ok,
            f"k1 vs grid {k1_gap:.1e}, d1 vs grid {d1_gap:.1e} (tol 1e-3); d1 minus plug-ins min {min(plug):.1e} "
            f"(tol -1e-6); Caratheodory {cara_ok}/1000; {elapsed:.1f} s (limit 600 s)")


DETERMINISM_RUNS = [
    ["rates"], ["simulate-key", "--trials", "200"], ["simulate-ent", "--per-code"],
    ["covering", "--trials", "20"], ["chernoff", "--trials", "50"],
    ["optimize", "--objective", "k1-cqq", "--restarts", "2"],
    ["optimize", "--objective", "d1", "--restarts", "2"],
    ["typicality", "--probs", "0.25,0.75"],
]


def test_criterion_8_determinism(verdict):
    differing = []
    for args in DETERMINISM_RUNS:
        outs = []
        for _ in range(2):
            buf = io.StringIO()
            assert cli.run(args + ["--seed", "11"], stdout=buf, stderr=io.StringIO()) == 0
            outs.append(buf.getvalue().encode())
        if outs[0] != outs[1]:
            differing.append(args[0])
    verdict("8 determinism", not differing,
            f"{len(DETERMINISM_RUNS) - len(differing)}/{len(DETERMINISM_RUNS)} subcommand runs byte-identical")
