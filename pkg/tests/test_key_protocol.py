import math

import numpy as np
import pytest

from oracles import ml_key_error
from qdistill.codebook import pgm_decoder
from qdistill.info import BellMixture, CqqState, fannes_tau
from qdistill.key_protocol import (
    KeyProtocolSpec,
    achievable_rate_report,
    build_branches,
    evaluate_conditions,
    run_key_protocol,
)
from qdistill.linalg import random_density
from qdistill.typicality import BudgetExceeded, product_operator

FLIP = [[0.9, 0.1], [0.1, 0.9]]


def _copy():
    return CqqState.from_classical([0.5, 0.5], np.eye(2))


@pytest.mark.parametrize("n", [2, 4, 6, 8])
def test_perfect_copy_has_zero_error(n):
    rep = run_key_protocol(KeyProtocolSpec(_copy(), n, 0.1, 0.1, seed=n))
    assert rep.error_probability == 0
    assert rep.uniformity <= 1e-9 and rep.leakage == 0
    assert rep.branch_total == pytest.approx(1, abs=1e-9)


def test_trivial_bob():
    s = CqqState.from_classical([0.5, 0.5], [[1.0], [1.0]])
    rep = run_key_protocol(KeyProtocolSpec(s, 6, 0.1, 0.1, decoder="pgm"))
    assert rep.uniformity <= 1e-9
    assert rep.error_probability == pytest.approx(1 - 1 / rep.M, abs=1e-9)


def test_eve_trivial_leakage_zero_and_conservation():
    rep = run_key_protocol(KeyProtocolSpec(CqqState.from_classical([0.4, 0.6], FLIP), 6, 0.2, 0.1))
    assert rep.leakage == 0
    assert rep.branch_total == pytest.approx(1, abs=1e-9)
    assert 0 <= rep.abort_probability <= 1 and 0 <= rep.error_probability <= 1


def test_quantum_eve_bookkeeping_and_ranges():
    rep = run_key_protocol(KeyProtocolSpec(BellMixture([0.85, 0.05, 0.05, 0.05]).cqq(), 4, 0.3, 0.1, seed=2))
    assert rep.eve_consistency <= 1e-9
    assert rep.branch_total == pytest.approx(1, abs=1e-9)
    assert 0 <= rep.leakage <= 2 and 0 <= rep.uniformity <= 2


def test_noisy_copy_matches_ml_oracle():
    spec = KeyProtocolSpec(CqqState.from_classical([0.5, 0.5], FLIP), 6, 0.1, 0.1, seed=1)
    rep = run_key_protocol(spec, trials=1500)
    exact = ml_key_error(spec, build_branches(spec), FLIP)
    assert rep.error_probability == pytest.approx(exact, abs=1e-12)
    assert abs(rep.error_estimate - exact) <= 4 * rep.error_stderr


def test_evaluate_conditions_examples():
    # one-time pad: uniform key, perfect agreement, Eve independent
    m = 4
    sigma = np.eye(2) / 2
    joint = np.eye(m) / m
    eve = [[sigma / m] for _ in range(m)]
    assert evaluate_conditions(joint, eve, [sigma]) == (0.0, 0.0, 0.0)
    assert evaluate_conditions(np.array([[1.0]]), [[sigma]], [sigma])[1] == 0


def _brute_force_joint(spec):
    """Independent enumeration of Pr(K=m, K'=m' | no abort) with PGM decoding."""
    s = spec.source
    bob_site = s.bob_states()
    branches = build_branches(spec)
    m_size = branches[0].code.M
    joint = np.zeros((m_size, m_size))
    ok = 0.0
    for br in branches:
        c = br.code
        for x_idx, x in enumerate(br.strings):
            px = br.prob / len(br.strings)
            hits = [(l, m, t) for l in range(c.L) for m in range(c.M) for t in range(c.S)
                    if br.word_index[l, m, t] == x_idx]
            if not hits:
                continue
            ok += px
            codes = sorted({h[0] for h in hits})
            rho = product_operator([bob_site[a] for a in x])
            for l in codes:
                mine = [h for h in hits if h[0] == l]
                words = [product_operator([bob_site[a] for a in br.strings[br.word_index[l, mm, tt]]])
                         for mm in range(c.M) for tt in range(c.S)]
                povm = pgm_decoder(words)
                for _, m, _ in mine:
                    for j, e in enumerate(povm):
                        joint[m, j // c.S] += px / len(codes) / len(mine) * np.trace(e @ rho).real
    return joint / ok


def test_joint_distribution_matches_enumeration():
    rng = np.random.default_rng(3)
    bob = [random_density(2, rng), random_density(2, rng)]
    eve = [random_density(2, rng), random_density(2, rng)]
    s = CqqState([0.5, 0.5], [np.kron(b, e) for b, e in zip(bob, eve)], (2, 2))
    spec = KeyProtocolSpec(s, 4, 0.5, 0.1, seed=5, decoder="pgm")
    rep = run_key_protocol(spec)
    joint = _brute_force_joint(spec)
    assert rep.error_probability == pytest.approx(joint.sum() - np.trace(joint), abs=1e-9)
    assert rep.uniformity == pytest.approx(np.abs(joint.sum(axis=1) - 1 / len(joint)).sum(), abs=1e-9)


def test_rate_report_perfect_copy():
    spec = KeyProtocolSpec(_copy(), 8, 0.1, 0.1)
    rep = achievable_rate_report(spec)
    dp = 2 * 0.1 * math.log2(2 * 2 * 1) + 2 * fannes_tau(0.1)
    assert rep["wiretap_rate"] == pytest.approx(1)
    assert rep["delta_prime"] == pytest.approx(dp)
    assert rep["target"] == pytest.approx(1 - 0.3 - dp)
    assert rep["rate"] >= rep["target"]


def test_rate_report_eve_copy():
    s = CqqState([0.5, 0.5], [np.kron(np.eye(2) / 2, np.diag(e)) for e in np.eye(2)], (2, 2))
    spec = KeyProtocolSpec(s, 4, 0.1, 0.1)
    report = run_key_protocol(spec)
    rates = achievable_rate_report(spec, report)
    assert rates["target"] <= 0 and report.M == 1


def test_rate_bound_and_budget():
    with pytest.raises(ValueError, match="2\\^\\(nF\\)"):
        build_branches(KeyProtocolSpec(_copy(), 6, 0.1, 0.1, rate_bound=0.01))
    s = BellMixture([0.85, 0.05, 0.05, 0.05]).cqq()
    with pytest.raises(BudgetExceeded):
        run_key_protocol(KeyProtocolSpec(s, 8, 0.3, 0.1, budget=64))


def test_spec_validation():
    with pytest.raises(ValueError):
        KeyProtocolSpec(_copy(), 0, 0.1, 0.1)
    with pytest.raises(ValueError):
        KeyProtocolSpec(_copy(), 4, 0.0, 0.1)


def test_deterministic_per_seed():
    spec = KeyProtocolSpec(CqqState.from_classical([0.5, 0.5], FLIP), 6, 0.1, 0.1, seed=9)
    a, b = run_key_protocol(spec, trials=50), run_key_protocol(spec, trials=50)
    assert a.as_row() == b.as_row()
