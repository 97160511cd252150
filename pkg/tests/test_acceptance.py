"""Acceptance criteria 1-9, each at its stated tolerance.

Every criterion records one PASS/FAIL line, repeated in the terminal
summary. Criteria 2-7 share one evaluated corpus: 500 seeded instances with
n in [2,6], k in [2,8] and density in {0.3, 0.5, 0.7}.
"""

import time
from fractions import Fraction as F

import pytest

from conftest import record

from cdemech import checks
from cdemech.instance import Instance
from cdemech.mechanism import MechanismConfig, run
from cdemech.rates import min_sum_rate_bound_check

CORPUS_SIZE = 500
CORPUS_SEED = 1
CROSSVAL_SUBCORPUS = 100
TIE_DRAWS = 10
TIME_BUDGET_S = 300.0


@pytest.fixture(scope="module")
def evaluated():
    start = time.perf_counter()
    rows = []
    for inst in checks.corpus(CORPUS_SIZE, seed=CORPUS_SEED):
        r1, p1, t1 = run(inst, MechanismConfig(1))
        r2, p2, t2 = run(inst, MechanismConfig(2))
        rows.append((inst, (r1, p1), (r2, p2), t1, t2))
    return rows, time.perf_counter() - start


def _summarize(criterion, failures, detail):
    ok = not failures
    record(criterion, ok, detail if ok else f"{detail}; first failure: {failures[0]}")
    assert ok, failures[:5]


def test_criterion_1_worked_traces():
    tri = Instance.from_holdings([[1, 2], [2, 3], [1, 3]], q=11)
    r1, p1, _ = run(tri, MechanismConfig(1))
    r2, p2, _ = run(tri, MechanismConfig(2))
    from cdemech.economics import utilities

    fails = []
    if r1 != (1, 1, 0):
        fails.append(f"algo1 r={r1}")
    if (p1.get(2, 1), p1.get(3, 1), p1.get(1, 2)) != (F(1, 2), F(1, 2), F(1)) or p1.total != 2:
        fails.append(f"algo1 p={p1.entries}")
    if utilities(tri, r1, p1) != (0, F(1, 2), F(1, 2)):
        fails.append("algo1 utilities")
    if p2.p_minus != (F(2, 3),) * 3:
        fails.append(f"algo2 p-={p2.p_minus}")
    if utilities(tri, r2, p2) != (F(1, 3),) * 3:
        fails.append("algo2 utilities")

    # runtime: median of repeated single runs after warm-up
    timings = {}
    for variant in (1, 2):
        cfg = MechanismConfig(variant)
        for _ in range(20):
            run(tri, cfg)
        samples = []
        for _ in range(101):
            t0 = time.perf_counter()
            run(tri, cfg)
            samples.append(time.perf_counter() - t0)
        timings[variant] = sorted(samples)[50] * 1e3
        if timings[variant] >= 1.0:
            fails.append(f"algo{variant} median runtime {timings[variant]:.3f} ms >= 1 ms")
    _summarize(
        1, fails, f"exact traces match; median runtime algo1 {timings[1]:.3f} ms, algo2 {timings[2]:.3f} ms"
    )


def test_criterion_2_optimality_suite(evaluated):
    rows, run_time = evaluated
    start = time.perf_counter()
    fails = []
    for idx, (inst, out1, out2, _, _) in enumerate(rows):
        for label, (r, p) in (("algo1", out1), ("algo2", out2)):
            fails += [f"#{idx} {m}" for m in checks.check_outputs(inst, r, p, label)]
            fails += [f"#{idx} {m}" for m in checks.check_stable(inst, r, p, label)]
    elapsed = run_time + time.perf_counter() - start
    if elapsed > TIME_BUDGET_S:
        fails.append(f"took {elapsed:.1f} s > {TIME_BUDGET_S:.0f} s")
    _summarize(2, fails, f"{len(rows)} instances x 2 algorithms rational, stable, optimal in {elapsed:.1f} s")


def test_criterion_3_comparisons(evaluated):
    rows, _ = evaluated
    fails = []
    for idx, (inst, out1, out2, _, _) in enumerate(rows):
        fails += [f"#{idx} {m}" for m in checks.check_comparisons(inst, out1, out2)]
    _summarize(3, fails, f"{len(rows)} instances: sum-utility identity, min-utility dominance, closed form")


def test_criterion_4_wave_bound(evaluated):
    rows, _ = evaluated
    fails = []
    covered = 0
    for idx, (inst, _, _, t1, _) in enumerate(rows):
        if inst.n > checks.WAVE_MAX_USERS:
            continue
        covered += 1
        fails += [f"#{idx} {m}" for m in checks.check_wave_bound(inst, t1)]
    _summarize(4, fails, f"{covered} instances with n <= {checks.WAVE_MAX_USERS}, every qualifying coalition")


def test_criterion_5_ledger_laws(evaluated):
    rows, _ = evaluated
    fails = []
    for idx, (inst, _, _, t1, t2) in enumerate(rows):
        fails += [f"#{idx} algo1 {m}" for m in checks.check_ledger_algo1(inst, t1)]
        fails += [f"#{idx} algo2 {m}" for m in checks.check_ledger_algo2(inst, t2)]
    _summarize(5, fails, f"{len(rows)} instances, every round prefix")


def test_criterion_6_replay(evaluated):
    rows, _ = evaluated
    fails = []
    for idx, (inst, _, _, t1, t2) in enumerate(rows):
        for t in (t1, t2):
            fails += [f"#{idx} {m}" for m in checks.check_replay(inst, t)]
    kinds = ", ".join(checks.MUTATION_LABELS)
    _summarize(6, fails, f"{2 * len(rows)} transcripts replay clean; mutations detected: {kinds}")


def test_criterion_7_sum_rate_bound(evaluated):
    rows, _ = evaluated
    fails = [f"#{idx}" for idx, (inst, *_rest) in enumerate(rows) if not min_sum_rate_bound_check(inst)]
    _summarize(7, fails, f"{len(rows)} instances within min+max wants")


def test_criterion_8_stability_cross_validation(evaluated):
    rows, _ = evaluated
    fails = []
    covered = 0
    for idx, (inst, out1, out2, _, _) in enumerate(rows[:CROSSVAL_SUBCORPUS]):
        if inst.n > checks.CROSSVAL_MAX_USERS:
            continue
        covered += 1
        pairs = [out1, out2] + checks.adversarial_pairs(inst, out1[0], seed=idx)
        fails += [f"#{idx} {m}" for m in checks.check_cross_validation(inst, pairs)]
    _summarize(
        8, fails, f"{covered} instances with n <= {checks.CROSSVAL_MAX_USERS} in the first {CROSSVAL_SUBCORPUS}"
    )


def test_criterion_9_tie_break_invariance(evaluated):
    rows, _ = evaluated
    fails = []
    for idx, (inst, *_rest) in enumerate(rows):
        fails += [f"#{idx} {m}" for m in checks.check_tie_break(inst, draws=TIE_DRAWS, seed=idx)]
    _summarize(9, fails, f"{len(rows)} instances x {TIE_DRAWS} seeded draws vs lowest index")
