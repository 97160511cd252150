"""Property checks over instances and a seeded corpus driver.

Each ``check_*`` function returns a list of human-readable failure strings
(empty on success) so the sweep command and the test-suite can share them.
"""

import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from itertools import combinations

import numpy as np

from .economics import (
    BrokerLedger,
    blocking_search,
    check_stability,
    coalition_margin,
    explain_optimality,
    is_rational_pair,
    utilities,
    utility_comparisons,
)
from .instance import generate, is_coalition, minor_coalitions
from .mechanism import (
    PAYMENT_MISMATCH,
    TRANSMITTER_NOT_MAX,
    V_NOT_INNOVATIVE,
    MechanismConfig,
    replay_verify,
    run,
)
from .rates import is_achieving, min_sum_rate, min_sum_rate_bound_check

CHECKS = (
    "rational",
    "stability",
    "optimality",
    "comparisons",
    "waves",
    "ledger",
    "replay",
    "bound",
    "tiebreak",
    "crossval",
)

WAVE_MAX_USERS = 5
CROSSVAL_MAX_USERS = 4


def corpus(count, n_range=(2, 6), k_range=(2, 8), densities=(0.3, 0.5, 0.7), seed=1):
    """``count`` instances, each drawn from its own child seed of ``seed``."""
    rng = np.random.default_rng(seed)
    out = []
    for idx in range(count):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        k = int(rng.integers(k_range[0], k_range[1] + 1))
        density = float(densities[int(rng.integers(len(densities)))])
        out.append(generate(n, k, density, seed=[seed, idx]))
    return out


def prefixes(transcript):
    """Per-round snapshots ``(record, rates, p_plus, p_minus)`` after each round."""
    n = transcript.n
    r = [0] * n
    plus = [Fraction(0)] * n
    minus = [Fraction(0)] * n
    for rec in transcript.rounds:
        r[rec.transmitter - 1] += 1
        for i, x in rec.credits:
            plus[i - 1] += x
        for i, x in rec.debits:
            minus[i - 1] += x
        yield rec, tuple(r), tuple(plus), tuple(minus)


def check_outputs(instance, rates, payments, label):
    fails = []
    if not is_rational_pair(instance, rates, payments):
        fails.append(f"{label}: not rational")
    ok, why = explain_optimality(instance, rates, payments)
    if not ok:
        fails.append(f"{label}: not optimal ({why})")
    best = min_sum_rate(instance, instance.users)
    if sum(rates) != best:
        fails.append(f"{label}: r_N={sum(rates)} but oracle min sum-rate is {best}")
    if payments.total != sum(rates):
        fails.append(f"{label}: p_N={payments.total} != r_N={sum(rates)}")
    return fails


def check_stable(instance, rates, payments, label):
    report = check_stability(instance, rates, payments)
    return [] if report.stable else [f"{label}: unstable margins {report.margins}"]


def check_comparisons(instance, out1, out2):
    rep = utility_comparisons(instance, out1, out2, check=False)
    fails = []
    if not rep.sums_match:
        fails.append(f"sum-utility {rep.sum_utility} != {rep.expected_sum}")
    if not rep.min_dominates:
        fails.append(f"min-utility algo2 {rep.min_utility[1]} < algo1 {rep.min_utility[0]}")
    if not rep.closed_form_holds:
        fails.append(f"min-utility algo2 {rep.min_utility[1]} != closed form {rep.closed_form_min}")
    return fails


def check_ledger_algo1(instance, transcript):
    fails = []
    prev_total = Fraction(0)
    done = set(i for i, l in enumerate(transcript.completion_round, start=1) if l == 0)
    for rec, r, plus, minus in prefixes(transcript):
        total = sum(minus, Fraction(0))
        if total - prev_total != 1:
            fails.append(f"round {rec.l}: payments grew by {total - prev_total}")
        prev_total = total
        if plus != tuple(Fraction(x) for x in r):
            fails.append(f"round {rec.l}: p_plus {plus} != r {r}")
        payers = done.intersection(rec.r_set)
        if payers:
            fails.append(f"round {rec.l}: completed users {sorted(payers)} in R_l")
        done.update(i for i, l in enumerate(transcript.completion_round, start=1) if l == rec.l)
    return fails


def check_ledger_algo2(instance, transcript):
    wants = instance.want_counts
    fails = []
    for rec, _, _, minus in prefixes(transcript):
        over = [i for i in instance.users if minus[i - 1] > wants[i - 1]]
        if over:
            fails.append(f"round {rec.l}: users {over} paid more than they want")
    return fails


def check_wave_bound(instance, transcript):
    """Every coalition inside the first s waves that meets wave s needs a
    sum-rate of at least the round at which wave s completes."""
    fails = []
    reached = []
    for l_s, users in transcript.waves:
        reached.extend(users)
        wave = set(users)
        for size in range(1, len(reached) + 1):
            for s in combinations(sorted(reached), size):
                if wave.isdisjoint(s) or not is_coalition(instance, s):
                    continue
                msr = min_sum_rate(instance, s)
                if l_s > msr:
                    fails.append(f"wave at round {l_s}: coalition {s} has min sum-rate {msr}")
    return fails


def mutate(transcript, kind):
    """Corrupt a transcript: ``zero_vector`` (round 1), ``wrong_transmitter``
    (first round with a user outside T_l) or ``wrong_payment`` (round 1)."""
    rounds = list(transcript.rounds)
    if not rounds:
        return None
    if kind == "zero_vector":
        rounds[0] = replace(rounds[0], v=(0,) * len(rounds[0].v))
    elif kind == "wrong_transmitter":
        for idx, rec in enumerate(rounds):
            outside = [i for i in range(1, transcript.n + 1) if i not in rec.t_set]
            if outside:
                rounds[idx] = replace(rec, transmitter=outside[0])
                break
        else:
            return None
    elif kind == "wrong_payment":
        rec = rounds[0]
        debits = ((rec.debits[0][0], rec.debits[0][1] + 1),) + rec.debits[1:]
        rounds[0] = replace(rec, debits=debits)
    else:
        raise ValueError(kind)
    return replace(transcript, rounds=tuple(rounds))


MUTATION_LABELS = {
    "zero_vector": V_NOT_INNOVATIVE,
    "wrong_transmitter": TRANSMITTER_NOT_MAX,
    "wrong_payment": PAYMENT_MISMATCH,
}


def check_replay(instance, transcript):
    fails = []
    report = replay_verify(instance, transcript)
    if not report.ok:
        fails.append(f"replay failed: {report.to_text().strip()}")
    for kind, label in MUTATION_LABELS.items():
        bad = mutate(transcript, kind)
        if bad is None:
            continue
        if label not in replay_verify(instance, bad).labels:
            fails.append(f"mutation {kind} not reported as {label!r}")
    return fails


def check_tie_break(instance, draws=10, seed=0):
    fails = []
    base1 = run(instance, MechanismConfig(1))
    base2 = run(instance, MechanismConfig(2))
    for d in range(draws):
        tie = seed * 1000 + d
        r1, p1, _ = run(instance, MechanismConfig(1, tie_break_seed=tie))
        r2, p2, _ = run(instance, MechanismConfig(2, tie_break_seed=tie))
        if sum(r1) != sum(base1[0]) or p1.total != base1[1].total:
            fails.append(f"algo1 aggregates differ under tie seed {tie}")
        if p2.p_minus != base2[1].p_minus or sum(r2) != sum(base2[0]):
            fails.append(f"algo2 p_minus differs under tie seed {tie}")
        for v, r, p in ((1, r1, p1), (2, r2, p2)):
            ok, why = explain_optimality(instance, r, p)
            if not ok:
                fails.append(f"algo{v} under tie seed {tie} not optimal: {why}")
    return fails


def adversarial_pairs(instance, rates, count=4, seed=0):
    """Random rational (r, ledger) pairs around ``rates``; many are unstable."""
    rng = np.random.default_rng(seed)
    wants = instance.want_counts
    out = []
    for _ in range(count):
        r = list(rates)
        if rng.random() < 0.5:
            r[int(rng.integers(instance.n))] += 1
        den = int(rng.integers(1, 5))
        extra = int(rng.integers(0, 2 * den + 1))
        total = sum(r) * den + extra
        cap = [w * den for w in wants]
        if total > sum(cap):
            continue
        minus = [0] * instance.n
        for _ in range(total):
            room = [i for i in range(instance.n) if minus[i] < cap[i]]
            minus[room[int(rng.integers(len(room)))]] += 1
        plus = [x * den for x in r]
        for _ in range(extra):
            plus[int(rng.integers(instance.n))] += 1
        ledger = BrokerLedger(
            tuple(Fraction(x, den) for x in plus), tuple(Fraction(x, den) for x in minus)
        )
        out.append((tuple(r), ledger))
    return out


def check_cross_validation(instance, pairs):
    """Margin sign versus bounded exhaustive blocking search, per coalition."""
    fails = []
    for r, p in pairs:
        if not is_rational_pair(instance, r, p) or not is_achieving(instance, instance.users, r):
            continue
        utils = utilities(instance, r, p)
        for s in minor_coalitions(instance):
            margin, _ = coalition_margin(instance, s, utils)
            found = blocking_search(instance, s, r, p) is not None
            if found != (margin < 0):
                fails.append(f"coalition {s}: margin {margin} but search found={found} for r={r}")
    return fails


@dataclass
class SweepResult:
    count: int
    seed: int
    passed: dict = field(default_factory=dict)
    failed: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)

    @property
    def ok(self):
        return not any(self.failed.values())

    def to_dict(self):
        return {
            "count": self.count,
            "seed": self.seed,
            "properties": {
                name: {
                    "pass": self.passed.get(name, 0),
                    "fail": self.failed.get(name, 0),
                    "skipped": self.skipped.get(name, 0),
                }
                for name in self.passed
            },
            "failures": self.artifacts,
        }

    def to_text(self):
        lines = [f"sweep seed={self.seed} count={self.count}"]
        for name in self.passed:
            verdict = "PASS" if not self.failed[name] else "FAIL"
            lines.append(
                f"{name:<12} {verdict}  pass={self.passed[name]} fail={self.failed[name]} skipped={self.skipped[name]}"
            )
        if self.ok:
            lines.append(f"all {self.count} × all properties PASS")
        return "\n".join(lines) + "\n"


def evaluate(instance, checks=CHECKS, tie_draws=10, index=0, crossval=True):
    """Run both mechanisms on one instance and every enabled check; returns
    ``{check: failures or None if skipped}`` plus the two transcripts."""
    results = {}
    r1, p1, t1 = run(instance, MechanismConfig(1))
    r2, p2, t2 = run(instance, MechanismConfig(2))
    if "rational" in checks:
        results["rational"] = [
            f"algo{v}: not rational"
            for v, (r, p) in ((1, (r1, p1)), (2, (r2, p2)))
            if not is_rational_pair(instance, r, p)
        ]
    if "stability" in checks:
        results["stability"] = check_stable(instance, r1, p1, "algo1") + check_stable(instance, r2, p2, "algo2")
    if "optimality" in checks:
        results["optimality"] = check_outputs(instance, r1, p1, "algo1") + check_outputs(instance, r2, p2, "algo2")
    if "comparisons" in checks:
        results["comparisons"] = check_comparisons(instance, (r1, p1), (r2, p2))
    if "waves" in checks:
        results["waves"] = check_wave_bound(instance, t1) if instance.n <= WAVE_MAX_USERS else None
    if "ledger" in checks:
        results["ledger"] = check_ledger_algo1(instance, t1) + check_ledger_algo2(instance, t2)
    if "replay" in checks:
        results["replay"] = check_replay(instance, t1) + check_replay(instance, t2)
    if "bound" in checks:
        results["bound"] = [] if min_sum_rate_bound_check(instance) else ["min sum-rate exceeds min+max wants"]
    if "tiebreak" in checks:
        results["tiebreak"] = check_tie_break(instance, draws=tie_draws, seed=index)
    if "crossval" in checks:
        if crossval and instance.n <= CROSSVAL_MAX_USERS:
            pairs = [(r1, p1), (r2, p2)] + adversarial_pairs(instance, r1, seed=index)
            results["crossval"] = check_cross_validation(instance, pairs)
        else:
            results["crossval"] = None
    return results, t1, t2


def sweep(instances, checks=CHECKS, seed=0, tie_draws=10, crossval_limit=100):
    """Evaluate every instance; the flow-backed cross-validation only runs on
    the first ``crossval_limit`` instances."""
    result = SweepResult(len(instances), seed)
    for name in checks:
        result.passed[name] = result.failed[name] = result.skipped[name] = 0
    for idx, inst in enumerate(instances):
        outcome, t1, t2 = evaluate(inst, checks, tie_draws=tie_draws, index=idx, crossval=idx < crossval_limit)
        for name in checks:
            fails = outcome[name]
            if fails is None:
                result.skipped[name] += 1
            elif fails:
                result.failed[name] += 1
                result.artifacts.append(
                    {
                        "index": idx,
                        "check": name,
                        "messages": fails,
                        "instance": inst.to_dict(),
                        "transcripts": [json.loads(t1.render()), json.loads(t2.render())],
                    }
                )
            else:
                result.passed[name] += 1
    return result
