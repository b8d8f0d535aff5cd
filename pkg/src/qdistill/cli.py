"""Batch front end: JSON state files in, CSV tables out.

Every subcommand is a pure function of (input file, flags, seed), so re-running
it reproduces the output byte for byte.  Exit status is 0 on success, 1 on an
input error and 2 when a run would exceed the amplitude budget.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import codebook as cb
from .ent_protocol import AMPLITUDE_BUDGET, ConstructionError, run_hashing_protocol
from .info import (
    BellMixture,
    CqqState,
    binary_entropy,
    coherent_information,
    comm_cost_ent,
    comm_cost_key,
    holevo,
    rates_summary,
    wiretap_rate,
)
from .key_protocol import KeyProtocolSpec, achievable_rate_report, run_key_protocol
from .linalg import DensityMatrix, KrausMap, StateError
from .optimizers import channel_coherent_info, d1, k1_cqq, k1_general
from .typicality import (
    BudgetExceeded,
    TypeVector,
    enumerate_types,
    is_typical_type,
    type_class_size,
    type_probability,
)

EXIT_OK, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2
KINDS = ("density", "cqq", "bell-mixture", "channel")

UNITS = {
    "bits": ("log_M", "comm_bits", "code_bits", "phase_bits", "code_rate", "phase_rate", "rate",
             "wiretap_rate", "target", "delta_prime", "hashing_rate", "coherent_information",
             "comm_cost_ent", "comm_cost_key", "code_information", "phase_information", "holevo_bob",
             "holevo_eve", "holevo_bits", "value", "ceiling", "best_plugin", "entropy", "shannon_entropy"),
    "probability": ("error_probability", "abort_probability", "failure_probability", "branch_total",
                    "bad_code_fraction", "error_estimate", "error_stderr", "tail_probability",
                    "tail_stderr", "bound", "type_probability", "typical_mass"),
    "trace distance": ("uniformity", "leakage", "eve_consistency", "trace_distance", "trace_distance_stderr",
                       "trace_distance_max", "eve_invariance_decode", "eve_invariance_fourier",
                       "recombination_defect", "completeness_defect"),
    "fidelity": ("fidelity", "fidelity_unconditional", "fidelity_decode", "fidelity_fourier",
                 "fidelity_decouple", "geometry_bound", "target_bound", "uhlmann_gap"),
}
UNIT_OF = {name: unit for unit, names in UNITS.items() for name in names}


class InputError(ValueError):
    """Malformed or invalid input, reported with the offending field."""


@dataclass(frozen=True)
class CqChannel:
    """Classical-quantum channel x -> rho_x with an input distribution."""

    probs: np.ndarray
    states: tuple

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if len(probs) != len(self.states):
            raise StateError(f"{len(probs)} probabilities but {len(self.states)} states")
        if np.any(probs < -1e-12) or abs(probs.sum() - 1) > 1e-10:
            raise StateError("probs must form a probability distribution")
        mats = tuple(s.data if isinstance(s, DensityMatrix) else DensityMatrix(s).data for s in self.states)
        if len({m.shape for m in mats}) != 1:
            raise StateError("channel output states must share one dimension")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "states", mats)


# ---------------------------------------------------------------- state files

def _complex_matrix(obj, where: str) -> np.ndarray:
    try:
        a = np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{where}: matrix entries must be numbers or [re, im] pairs ({exc})") from None
    if a.ndim == 2:
        return a.astype(complex)
    if a.ndim != 3 or a.shape[-1] != 2:
        raise InputError(f"{where}: expected a real matrix or a matrix of [re, im] pairs, got array shape {a.shape}")
    return a[..., 0] + 1j * a[..., 1]


def _encode_matrix(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _field(doc: dict, name: str, where: str = ""):
    if name not in doc:
        raise InputError(f"{where}missing field '{name}'")
    return doc[name]


def _probs(doc: dict) -> np.ndarray:
    raw = doc["probs"] if "probs" in doc else _field(doc, "p")
    try:
        return np.array(raw, dtype=float)
    except (TypeError, ValueError):
        raise InputError("field 'probs': expected a list of numbers") from None


def state_from_dict(doc: dict):
    kind = _field(doc, "kind")
    if kind not in KINDS:
        raise InputError(f"field 'kind': '{kind}' is not one of {', '.join(KINDS)}")
    try:
        if kind == "bell-mixture":
            return BellMixture(_probs(doc))
        if kind == "density":
            rho = _complex_matrix(_field(doc, "matrix"), "field 'matrix'")
            return DensityMatrix(rho, tuple(doc["dims"]) if "dims" in doc else None)
        if kind == "cqq":
            states = []
            for i, m in enumerate(_field(doc, "states")):
                states.append(_complex_matrix(m, f"field 'states[{i}]'"))
            return CqqState(_probs(doc), states, tuple(_field(doc, "dims")))
        if "kraus" in doc:
            ops = [_complex_matrix(m, f"field 'kraus[{i}]'") for i, m in enumerate(doc["kraus"])]
            return KrausMap(ops)
        states = [_complex_matrix(m, f"field 'states[{i}]'") for i, m in enumerate(_field(doc, "states"))]
        return CqChannel(_probs(doc), states)
    except StateError as exc:
        raise InputError(f"{kind}: {exc}") from None


def state_to_dict(obj, name: str | None = None) -> dict:
    if isinstance(obj, BellMixture):
        doc = {"kind": "bell-mixture", "probs": [float(x) for x in obj.p]}
    elif isinstance(obj, DensityMatrix):
        doc = {"kind": "density", "dims": list(obj.dims), "matrix": _encode_matrix(obj.data)}
    elif isinstance(obj, CqqState):
        doc = {"kind": "cqq", "dims": list(obj.dims), "probs": [float(x) for x in obj.probs],
               "states": [_encode_matrix(s) for s in obj.states]}
    elif isinstance(obj, KrausMap):
        doc = {"kind": "channel", "kraus": [_encode_matrix(k) for k in obj.operators]}
    elif isinstance(obj, CqChannel):
        doc = {"kind": "channel", "probs": [float(x) for x in obj.probs],
               "states": [_encode_matrix(s) for s in obj.states]}
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    if name is not None:
        doc["name"] = name
    return doc


def parse_state_file(path):
    """Load and validate a JSON state file; errors name the line or field."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise InputError(f"{path}: top level must be a JSON object")
    try:
        return state_from_dict(doc)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


def write_state_file(obj, path, name: str | None = None) -> None:
    _atomic_write(path, json.dumps(state_to_dict(obj, name), indent=1) + "\n")


def _metadata(path) -> dict:
    """Optional name and default seed; parse errors surface in parse_state_file."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, ValueError):
        return {}
    return {k: doc[k] for k in ("name", "seed") if k in doc} if isinstance(doc, dict) else {}


# ---------------------------------------------------------------- output

def _atomic_write(path, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (tuple, list)):
        return " ".join(_cell(x) for x in v)
    return str(v)


def _header(name: str) -> str:
    unit = UNIT_OF.get(name)
    return f"{name} [{unit}]" if unit else name


def render_csv(rows: list[dict], long: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if long:
        w.writerow(["row", "quantity", "value", "unit"])
        for i, row in enumerate(rows):
            if set(row) == {"quantity", "value", "unit"}:
                w.writerow([i, row["quantity"], _cell(row["value"]), row["unit"]])
                continue
            for k, v in row.items():
                w.writerow([i, k, _cell(v), UNIT_OF.get(k, "")])
        return buf.getvalue()
    cols = list(rows[0]) if rows else []
    for row in rows[1:]:
        cols += [k for k in row if k not in cols]
    w.writerow([_header(c) for c in cols])
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in cols])
    return buf.getvalue()


# ---------------------------------------------------------------- defaults

def default_bell() -> BellMixture:
    return BellMixture([0.85, 0.05, 0.05, 0.05])


def default_key_source() -> CqqState:
    return CqqState.from_classical([0.5, 0.5], [[0.9, 0.1], [0.1, 0.9]])


def symmetric_qubit_channel(info: float = 0.5) -> CqChannel:
    """Two pure qubit states at equal weights with Holevo quantity ``info``."""
    if not 0 < info < 1:
        raise ValueError("info must lie in (0, 1)")
    theta = brentq(lambda t: binary_entropy(0.5 * (1 + math.cos(2 * t))) - info, 1e-9, math.pi / 4)
    kets = [np.array([math.cos(theta), sign * math.sin(theta)]) for sign in (1, -1)]
    return CqChannel([0.5, 0.5], [np.outer(k, k) for k in kets])


def _nearest_type(p, n: int) -> TypeVector:
    p = np.asarray(p, dtype=float)
    counts = np.floor(n * p).astype(int)
    order = np.argsort(-(n * p - counts), kind="stable")
    counts[order[: n - counts.sum()]] += 1
    return TypeVector(tuple(int(c) for c in counts))


# ---------------------------------------------------------------- config

@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    n: int | None
    delta: float | None
    eps: float | None
    seed: int
    trials: int | None
    budget: int
    inp: str | None
    out: str | None
    long: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.n is not None and not 1 <= self.n <= 64:
            raise InputError("--n must lie in [1, 64]")
        if self.delta is not None and not 0 < self.delta < 1:
            raise InputError("--delta must lie in (0, 1)")
        if self.eps is not None and not 0 < self.eps < 1:
            raise InputError("--eps must lie in (0, 1)")
        if self.seed < 0:
            raise InputError("--seed must be nonnegative")
        if self.trials is not None and self.trials < 0:
            raise InputError("--trials must be nonnegative")
        if self.budget < 1:
            raise InputError("--budget must be positive")
        if self.jobs < 1:
            raise InputError("--jobs must be positive")


def _load(cfg: RunConfig, default):
    return parse_state_file(cfg.inp) if cfg.inp else default()


def _int_list(text: str, flag: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"{flag}: expected a comma-separated list of integers") from None
    if not vals or min(vals) < 1:
        raise InputError(f"{flag}: values must be positive integers")
    return vals


def _map(fn, tasks, jobs: int):
    """Ordered map; results do not depend on the number of workers."""
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


# ---------------------------------------------------------------- subcommands

def cmd_rates(cfg: RunConfig, args) -> list[dict]:
    obj = _load(cfg, default_bell)
    if isinstance(obj, BellMixture):
        return [{"quantity": k, "value": v, "unit": "bits"} for k, v in rates_summary(obj).items()]
    if isinstance(obj, DensityMatrix):
        if len(obj.dims) != 2:
            raise InputError("rates: a density input must be bipartite (dims [d_A, d_B])")
        vals = {"coherent_information": coherent_information(obj), "comm_cost_ent": comm_cost_ent(obj)}
    elif isinstance(obj, CqqState):
        vals = {"holevo_bob": holevo(obj.probs, obj.bob_states()), "holevo_eve": holevo(obj.probs, obj.eve_states()),
                "wiretap_rate": wiretap_rate(obj), "comm_cost_key": comm_cost_key(obj)}
    elif isinstance(obj, CqChannel):
        vals = {"holevo_bits": holevo(obj.probs, obj.states)}
    else:
        raise InputError("rates: a Kraus channel has no closed-form rates; use optimize --objective channel-ic")
    return [{"quantity": k, "value": float(v), "unit": "bits"} for k, v in vals.items()]


def cmd_simulate_key(cfg: RunConfig, args) -> list[dict]:
    src = _load(cfg, default_key_source)
    if isinstance(src, BellMixture):
        src = src.cqq()
    if not isinstance(src, CqqState):
        raise InputError("simulate-key needs a cqq or bell-mixture input")
    n = cfg.n or 8
    spec = KeyProtocolSpec(src, n, cfg.delta or 0.1, cfg.eps or 0.1, seed=cfg.seed,
                           decoder=args.decoder, budget=min(cfg.budget, 2**16))
    report = run_key_protocol(spec, trials=cfg.trials or 0, trial_seed=cfg.seed)
    row = {"n": n, "seed": cfg.seed}
    row.update(report.as_row())
    row.update(achievable_rate_report(spec, report))
    return [row]


def cmd_simulate_ent(cfg: RunConfig, args) -> list[dict]:
    state = _load(cfg, default_bell)
    if not isinstance(state, (BellMixture, DensityMatrix)):
        raise InputError("simulate-ent needs a bell-mixture or bipartite density input")
    n = cfg.n or 4
    try:
        report = run_hashing_protocol(state, n, cfg.delta or 0.001, cfg.eps or 0.1, seed=cfg.seed,
                                      budget=cfg.budget)
    except ConstructionError as exc:
        raise InputError(f"simulate-ent: {exc}; try a larger --delta or --eps") from None
    rows = [{"stage": "summary", "n": n, "seed": cfg.seed, **report.as_row()}]
    if args.per_code:
        for st in report.stages:
            rows.append({"stage": "code", "type": st["type"], "code": st["l"],
                         **{k: v for k, v in st.items() if isinstance(v, float)}})
    return rows


def _covering_task(task):
    channel, q, m, trials, seed = task
    return cb.covering_experiment(channel, q, [m], trials=trials, seed=seed)[0]


def cmd_covering(cfg: RunConfig, args) -> list[dict]:
    ch = _load(cfg, symmetric_qubit_channel)
    if not isinstance(ch, CqChannel):
        raise InputError("covering needs a channel file with 'states' and 'probs'")
    n = cfg.n or 6
    q = _nearest_type(ch.probs, n)
    d = ch.states[0].shape[0]
    if d**n > cfg.budget:
        raise BudgetExceeded(f"output dimension {d**n} exceeds budget {cfg.budget}")
    ms = _int_list(args.M, "--M") if args.M else [2 ** math.ceil(n * f) for f in (0.1, 0.5, 0.9)]
    trials = cfg.trials or 200
    tasks = [(ch.states, q, m, trials, cfg.seed) for m in ms]
    rows = []
    for m, r in zip(ms, _map(_covering_task, tasks, cfg.jobs)):
        rows.append({"n": n, "type": q.counts, "M": m, "trials": trials, "seed": cfg.seed,
                     "trace_distance": r.mean, "trace_distance_stderr": r.stderr, "trace_distance_max": r.max,
                     "holevo_bits": r.extra["holevo_bits"]})
    return rows


def _chernoff_task(task):
    dim, m, eta, trials, count, seed = task
    rng = np.random.default_rng(seed)
    ops = cb.random_effect_set(dim, count, rng)
    sampler, mean = cb.finite_set_sampler(ops)
    return cb.chernoff_experiment(sampler, mean, m, eta, trials=trials, seed=rng)


def cmd_chernoff(cfg: RunConfig, args) -> list[dict]:
    dims = _int_list(args.D, "--D")
    ms = _int_list(args.M or "50,500", "--M")
    if not 0 < args.eta < 0.5:
        raise InputError("--eta must lie in (0, 1/2)")
    trials = cfg.trials or 1000
    tasks = [(dim, m, args.eta, trials, args.operators, [cfg.seed, i, j])
             for i, dim in enumerate(dims) for j, m in enumerate(ms)]
    rows = []
    for (dim, m, *_), r in zip(tasks, _map(_chernoff_task, tasks, cfg.jobs)):
        rows.append({"D": dim, "M": m, "eta": args.eta, "trials": trials, "seed": cfg.seed,
                     "alpha": r.extra["alpha"], "tail_probability": r.mean, "tail_stderr": r.stderr,
                     "bound": r.extra["bound"]})
    return rows


def cmd_optimize(cfg: RunConfig, args) -> list[dict]:
    obj = _load(cfg, default_bell)
    copies = args.n_copies
    if copies < 1:
        raise InputError("--n-copies must be positive")
    kind = args.objective
    if kind == "k1-cqq":
        s = obj.cqq() if isinstance(obj, BellMixture) else obj
        if not isinstance(s, CqqState):
            raise InputError("k1-cqq needs a cqq or bell-mixture input")
        if copies > 1:
            raise InputError("k1-cqq works on a single copy; use --n-copies 1")
        res = k1_cqq(s, restarts=args.restarts, seed=cfg.seed, n_t=args.t_card, n_u=args.u_card)
    elif kind == "k1":
        rho = obj.purification().density() if isinstance(obj, BellMixture) else obj
        if not isinstance(rho, DensityMatrix) or len(rho.dims) != 3:
            raise InputError("k1 needs a tripartite density (dims [d_A, d_B, d_E]) or a bell-mixture")
        rho = _tensor_power(rho, copies)
        res = k1_general(rho, restarts=args.restarts, seed=cfg.seed, n_t=args.t_card, n_x=args.u_card)
    elif kind == "d1":
        rho = obj.density() if isinstance(obj, BellMixture) else obj
        if not isinstance(rho, DensityMatrix) or len(rho.dims) != 2:
            raise InputError("d1 needs a bipartite density or a bell-mixture")
        rho = _tensor_power(rho, copies)
        res = d1(rho, restarts=args.restarts, seed=cfg.seed, outcomes=args.u_card)
    else:
        if not isinstance(obj, KrausMap):
            raise InputError("channel-ic needs a channel file with 'kraus'")
        ch = obj
        for _ in range(copies - 1):
            ch = KrausMap([np.kron(a, b) for a in ch.operators for b in obj.operators])
        res = channel_coherent_info(ch, restarts=args.restarts, seed=cfg.seed)
    best_name, best_val = max(res.plugins.items(), key=lambda kv: kv[1]) if res.plugins else ("", float("nan"))
    return [{"objective": kind, "n_copies": copies, "restarts": res.restarts, "seed": cfg.seed,
             "value": res.value / copies, "best_plugin": best_val / copies, "plugin": best_name,
             "ceiling": None if res.ceiling is None else res.ceiling / copies}]


def _tensor_power(rho: DensityMatrix, copies: int) -> DensityMatrix:
    """rho^{(x) copies} regrouped so each party holds all of its copies."""
    if copies == 1:
        return rho
    k = len(rho.dims)
    t = rho.data
    for _ in range(copies - 1):
        t = np.kron(t, rho.data)
    dims = list(rho.dims) * copies
    order = [c * k + p for p in range(k) for c in range(copies)]
    nd = len(dims)
    t = t.reshape(dims + dims).transpose(order + [nd + i for i in order])
    size = t.shape[: nd]
    grouped = tuple(int(np.prod(rho.dims[p] ** copies)) for p in range(k))
    return DensityMatrix(t.reshape(int(np.prod(size)), -1), grouped)


def cmd_typicality(cfg: RunConfig, args) -> list[dict]:
    if args.probs:
        try:
            p = np.array([float(v) for v in args.probs.split(",")])
        except ValueError:
            raise InputError("--probs: expected comma-separated numbers") from None
        if np.any(p < 0) or abs(p.sum() - 1) > 1e-10:
            raise InputError("--probs must form a probability distribution")
    else:
        obj = _load(cfg, default_key_source)
        if not hasattr(obj, "probs") and not isinstance(obj, BellMixture):
            raise InputError("typicality needs --probs or an input with 'probs'")
        p = np.asarray(obj.p if isinstance(obj, BellMixture) else obj.probs)
    n = cfg.n or 6
    delta = cfg.delta or 0.1
    if len(p) ** n > cfg.budget * 64:
        raise BudgetExceeded(f"{len(p)}^{n} strings exceed the enumeration budget")
    rows = []
    for q in enumerate_types(n, len(p)):
        rows.append({"type": q.counts, "class_size": type_class_size(q),
                     "type_probability": type_probability(q, p),
                     "typical": is_typical_type(q, p, delta)})
    return rows


COMMANDS = {
    "rates": cmd_rates,
    "simulate-key": cmd_simulate_key,
    "simulate-ent": cmd_simulate_ent,
    "covering": cmd_covering,
    "chernoff": cmd_chernoff,
    "optimize": cmd_optimize,
    "typicality": cmd_typicality,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--in", dest="inp", help="JSON state file (kind: density, cqq, bell-mixture, channel)")
    common.add_argument("--out", help="output CSV path (default: stdout)")
    common.add_argument("--seed", type=int, default=None, help="master seed (default: file 'seed' or 0)")
    common.add_argument("--n", type=int, help="block length")
    common.add_argument("--delta", type=float, help="typicality slack")
    common.add_argument("--eps", type=float, help="error parameter")
    common.add_argument("--trials", type=int, help="Monte Carlo repetitions")
    common.add_argument("--budget", type=int, default=AMPLITUDE_BUDGET, help="amplitude cap (default 2^20)")
    common.add_argument("--long", action="store_true", help="emit a long-format (row, quantity, value, unit) table")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for independent tasks")

    p = argparse.ArgumentParser(prog="qdistill", description="Key and entanglement distillation simulations")
    sub = p.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("rates", parents=[common], help="closed-form rates and communication costs")
    sk = sub.add_parser("simulate-key", parents=[common], help="exact secret-key protocol run")
    sk.add_argument("--decoder", choices=("auto", "pgm", "ml"), default="auto")
    se = sub.add_parser("simulate-ent", parents=[common], help="exact hashing protocol run")
    se.add_argument("--per-code", action="store_true", help="add one row per code")
    co = sub.add_parser("covering", parents=[common], help="covering experiment over M")
    co.add_argument("--M", help="comma-separated codebook sizes")
    ch = sub.add_parser("chernoff", parents=[common], help="operator Chernoff tail experiment")
    ch.add_argument("--D", default="1,2,4", help="comma-separated dimensions")
    ch.add_argument("--M", help="comma-separated sample counts (default 50,500)")
    ch.add_argument("--eta", type=float, default=0.25)
    ch.add_argument("--operators", type=int, default=4, help="size of the finite operator set")
    op = sub.add_parser("optimize", parents=[common], help="numerical lower bounds on K1, D1 or Q1")
    op.add_argument("--objective", choices=("k1-cqq", "k1", "d1", "channel-ic"), required=True)
    op.add_argument("--restarts", type=int, default=4)
    op.add_argument("--t-card", type=int, help="cardinality cap on the conditioning variable")
    op.add_argument("--u-card", type=int, help="cardinality cap on the measured variable or outcomes")
    op.add_argument("--n-copies", type=int, default=1)
    ty = sub.add_parser("typicality", parents=[common], help="list types, class sizes and typicality")
    ty.add_argument("--probs", help="comma-separated letter distribution")
    return p


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        seed = args.seed
        if seed is None:
            seed = int(_metadata(args.inp).get("seed", 0)) if args.inp else 0
        cfg = RunConfig(args.subcommand, args.n, args.delta, args.eps, seed, args.trials, args.budget,
                        args.inp, args.out, args.long, args.jobs)
        rows = COMMANDS[cfg.subcommand](cfg, args)
    except BudgetExceeded as exc:
        print(f"qdistill: budget refusal: {exc}", file=stderr)
        return EXIT_BUDGET
    except (InputError, StateError, ValueError, json.JSONDecodeError) as exc:
        print(f"qdistill: input error: {exc}", file=stderr)
        return EXIT_INPUT
    text = render_csv(rows, long=cfg.long)
    if cfg.out:
        _atomic_write(cfg.out, text)
    else:
        stdout.write(text)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
