"""Round-by-round execution of the two payment mechanisms.

Both variants share one transmission schedule. Each round the user with the
largest knowledge (lowest index, or a seeded draw on ties) broadcasts a
coded packet built from its own holdings that is innovative to every user
whose knowledge does not yet contain the transmitter's holdings. They differ
only in who pays:

* variant 1 (peer payments): each receiving user pays ``1/|R|`` to the
  transmitter;
* variant 2 (broker): the users with the largest ``|wants| - paid`` split one
  unit, and the broker credits the transmitter one unit.

The :class:`Transcript` is the source of truth; rates and payments are
derived from it.
"""

import hashlib
import json
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from . import _kernels, rational
from .economics import BrokerLedger, PaymentMatrix
from .errors import ConfigurationError, InputError, InvariantError
from .field import SelectionPolicy, SubspaceBasis, contains, contains_subspace, insert, is_prime, select_avoiding

ONE = Fraction(1)
GENERIC_MAX_SUBSET = 6

# replay violation labels
TRANSMITTER_NOT_MAX = "transmitter not in T_l"
T_SET_MISMATCH = "T_l mismatch"
R_SET_MISMATCH = "R_l mismatch"
P_SET_MISMATCH = "P_l mismatch"
V_OUTSIDE_HOLDINGS = "v outside span(U_t)"
V_NOT_INNOVATIVE = "v not innovative for users in R_l"
V_INNOVATIVE_OUTSIDE = "v innovative outside R_l"
PAYMENT_MISMATCH = "payment delta mismatch"
ROUND_AFTER_DONE = "round after omniscience"
ROUND_INDEX = "round index mismatch"
INCOMPLETE = "final knowledge incomplete"
COMPLETION_MISMATCH = "completion rounds mismatch"
WAVES_MISMATCH = "waves mismatch"


@dataclass(frozen=True)
class MechanismConfig:
    """``tie_break_seed=None`` picks the lowest-index maximal user; an int
    draws uniformly among them from that seed."""

    variant: int = 1
    tie_break_seed: int | None = None
    selection: SelectionPolicy = field(default_factory=SelectionPolicy)
    q_override: int | None = None

    def __post_init__(self):
        if self.variant not in (1, 2):
            raise ConfigurationError(f"variant must be 1 or 2, got {self.variant!r}")
        if self.q_override is not None and not is_prime(self.q_override):
            raise ConfigurationError(f"q_override={self.q_override} is not prime")

    def field_size(self, instance):
        q = self.q_override if self.q_override is not None else instance.q
        if q < instance.n:
            raise ConfigurationError(f"q={q} must be >= n={instance.n}")
        if self.selection.kind == "randomized" and q < instance.n * instance.k:
            warnings.warn(f"q={q} < n*k={instance.n * instance.k}: random selection may need retries")
        return q

    def to_dict(self):
        return {
            "variant": self.variant,
            "tie_break": (
                {"policy": "lowest"}
                if self.tie_break_seed is None
                else {"policy": "seeded", "seed": self.tie_break_seed}
            ),
            "selection": (
                {"policy": "deterministic"}
                if self.selection.kind == "deterministic"
                else {"policy": "randomized", "seed": self.selection.seed}
            ),
            "q_override": self.q_override,
        }

    @classmethod
    def from_dict(cls, doc):
        try:
            tb = doc["tie_break"]
            sel = doc["selection"]
            return cls(
                variant=doc["variant"],
                tie_break_seed=None if tb["policy"] == "lowest" else int(tb["seed"]),
                selection=(
                    SelectionPolicy.deterministic()
                    if sel["policy"] == "deterministic"
                    else SelectionPolicy.randomized(sel["seed"])
                ),
                q_override=doc.get("q_override"),
            )
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed config: {exc}") from None


@dataclass(frozen=True)
class RoundRecord:
    l: int
    transmitter: int
    t_set: tuple
    r_set: tuple
    p_set: tuple | None
    v: tuple
    debits: tuple  # ((user, amount), ...) paid this round
    credits: tuple  # ((user, amount), ...) received this round

    def to_dict(self):
        return {
            "l": self.l,
            "transmitter": self.transmitter,
            "t_set": list(self.t_set),
            "r_set": list(self.r_set),
            "p_set": None if self.p_set is None else list(self.p_set),
            "v": list(self.v),
            "debits": [[i, rational.to_json(x)] for i, x in self.debits],
            "credits": [[i, rational.to_json(x)] for i, x in self.credits],
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            l=doc["l"],
            transmitter=doc["transmitter"],
            t_set=tuple(doc["t_set"]),
            r_set=tuple(doc["r_set"]),
            p_set=None if doc["p_set"] is None else tuple(doc["p_set"]),
            v=tuple(doc["v"]),
            debits=tuple((i, rational.from_json(x)) for i, x in doc["debits"]),
            credits=tuple((i, rational.from_json(x)) for i, x in doc["credits"]),
        )


@dataclass(frozen=True)
class Transcript:
    instance_digest: str
    config: MechanismConfig
    n: int
    rounds: tuple
    completion_round: tuple  # per user; 0 = omniscient from the start
    waves: tuple  # ((round, (users...)), ...) in increasing round order

    def rates(self):
        r = [0] * self.n
        for rec in self.rounds:
            r[rec.transmitter - 1] += 1
        return tuple(r)

    def payments(self):
        if self.config.variant == 1:
            rows = [[Fraction(0)] * self.n for _ in range(self.n)]
            for rec in self.rounds:
                for i, amount in rec.debits:
                    rows[i - 1][rec.transmitter - 1] += amount
            return PaymentMatrix(tuple(map(tuple, rows)))
        plus = [Fraction(0)] * self.n
        minus = [Fraction(0)] * self.n
        for rec in self.rounds:
            for i, amount in rec.credits:
                plus[i - 1] += amount
            for i, amount in rec.debits:
                minus[i - 1] += amount
        return BrokerLedger(tuple(plus), tuple(minus))

    def to_dict(self):
        return {
            "instance_digest": self.instance_digest,
            "config": self.config.to_dict(),
            "n": self.n,
            "rounds": [rec.to_dict() for rec in self.rounds],
            "completion_round": list(self.completion_round),
            "waves": [{"round": l, "users": list(users)} for l, users in self.waves],
        }

    def render(self):
        return json.dumps(self.to_dict(), indent=1) + "\n"

    @classmethod
    def from_dict(cls, doc):
        try:
            return cls(
                instance_digest=doc["instance_digest"],
                config=MechanismConfig.from_dict(doc["config"]),
                n=doc["n"],
                rounds=tuple(RoundRecord.from_dict(rec) for rec in doc["rounds"]),
                completion_round=tuple(doc["completion_round"]),
                waves=tuple((w["round"], tuple(w["users"])) for w in doc["waves"]),
            )
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed transcript: {exc}") from None

    @classmethod
    def parse(cls, text):
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise InputError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None

    def digest(self):
        return hashlib.sha256(self.render().encode("utf-8")).hexdigest()


def waves_from_completion(completion):
    by_round = {}
    for i, l in enumerate(completion, start=1):
        by_round.setdefault(l, []).append(i)
    return tuple((l, tuple(users)) for l, users in sorted(by_round.items()))


def _tie_break(candidates, rng):
    if rng is None:
        return candidates[0]
    return candidates[int(rng.integers(len(candidates)))]


def _broker_payers(wants, paid):
    left = [w - p for w, p in zip(wants, paid)]
    top = max(left)
    return tuple(i for i, x in enumerate(left, start=1) if x == top)


def _forbidden(know, ambient, r_set):
    """Subspaces v must avoid: each receiver's knowledge (required), then
    sums of several users' knowledge that do not already contain span(U_t).

    The sums are not required by the round rules, but a vector falling into
    one of them can merge two users' future knowledge and cost an extra
    round later; avoiding them keeps the schedule optimal under any
    tie-break. They are dropped, largest subsets last, when q is too small
    to avoid them all.
    """
    hard = [know[i - 1] for i in r_set]
    n, q = len(know), ambient.q
    room = q - 1 - len(hard)
    seen = set(hard)
    soft = []
    sums = {(i,): know[i] for i in range(n)}
    for size in range(2, min(n, GENERIC_MAX_SUBSET) + 1):
        for combo in combinations(range(n), size):
            if len(soft) >= room:
                return hard + soft
            head = sums.get(combo[:-1])
            if head is None:
                continue
            w = SubspaceBasis._wrap(_kernels.rref(np.concatenate((head.rows, know[combo[-1]].rows)), q), ambient.k, q)
            if w.is_full():
                continue  # supersets are full too
            sums[combo] = w
            if w not in seen and not contains_subspace(w, ambient):
                seen.add(w)
                soft.append(w)
    return hard + soft[: max(room, 0)]


def run(instance, config=None):
    """Execute the mechanism; returns ``(rates, payments, transcript)``."""
    config = config or MechanismConfig()
    q = config.field_size(instance)
    n, k = instance.n, instance.k
    units = [SubspaceBasis.units(h, k, q) for h in instance.holdings]
    know = list(units)
    wants = [Fraction(w) for w in instance.want_counts]
    paid = [Fraction(0)] * n
    tie_rng = None if config.tie_break_seed is None else np.random.default_rng(config.tie_break_seed)
    sel_rng = None if config.selection.kind == "deterministic" else np.random.default_rng(config.selection.seed)
    completion = [0 if b.is_full() else None for b in know]
    rounds = []

    def partial():
        return Transcript(instance.digest(), config, n, tuple(rounds), tuple(completion), ())

    l = 1
    while not all(b.is_full() for b in know):
        if l > n * k:
            raise InvariantError(f"no termination after {n * k} rounds", partial())
        dims = [b.rank for b in know]
        top = max(dims)
        t_set = tuple(i for i in instance.users if dims[i - 1] == top)
        p_set = _broker_payers(wants, paid) if config.variant == 2 else None
        t = _tie_break(t_set, tie_rng)
        r_set = tuple(i for i in instance.users if not contains_subspace(know[i - 1], units[t - 1]))
        if not r_set:
            raise InvariantError(f"round {l}: nobody lacks the transmitter's holdings", partial())
        try:
            v = select_avoiding(units[t - 1], _forbidden(know, units[t - 1], r_set), config.selection, sel_rng)
        except InvariantError as exc:
            raise InvariantError(f"round {l}: {exc}", partial()) from exc

        for i in r_set:
            know[i - 1], fresh = insert(know[i - 1], v)
            if not fresh:
                raise InvariantError(f"round {l}: v not innovative for user {i}", partial())
            if completion[i - 1] is None and know[i - 1].is_full():
                completion[i - 1] = l

        if config.variant == 1:
            share = Fraction(1, len(r_set))
            debits = tuple((i, share) for i in r_set)
        else:
            share = Fraction(1, len(p_set))
            debits = tuple((i, share) for i in p_set)
            for i in p_set:
                paid[i - 1] += share
        rounds.append(RoundRecord(l, t, t_set, r_set, p_set, v, debits, ((t, ONE),)))
        l += 1

    transcript = Transcript(
        instance.digest(), config, n, tuple(rounds), tuple(completion), waves_from_completion(completion)
    )
    rates = transcript.rates()
    payments = transcript.payments()
    if sum(rates) != len(rounds) or payments.total != len(rounds):
        raise InvariantError("derived rates/payments disagree with the round count", transcript)
    return rates, payments, transcript


def run_algo1(instance, config=None):
    config = config or MechanismConfig()
    if config.variant != 1:
        config = MechanismConfig(1, config.tie_break_seed, config.selection, config.q_override)
    return run(instance, config)


def run_algo2(instance, config=None):
    config = config or MechanismConfig(variant=2)
    if config.variant != 2:
        config = MechanismConfig(2, config.tie_break_seed, config.selection, config.q_override)
    return run(instance, config)


@dataclass(frozen=True)
class Violation:
    round: int
    label: str
    detail: str = ""


@dataclass
class VerificationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    @property
    def labels(self):
        return {v.label for v in self.violations}

    def add(self, l, label, detail=""):
        self.violations.append(Violation(l, label, detail))

    def to_text(self):
        if self.ok:
            return "replay: all checks pass\n"
        return "".join(f"round {v.round}: {v.label} {v.detail}".rstrip() + "\n" for v in self.violations)


def replay_verify(instance, transcript):
    """Re-simulate a transcript from the instance and report every deviation
    from the mechanism's rules, round by round."""
    if transcript.instance_digest != instance.digest():
        raise InputError("transcript was produced for a different instance")
    report = VerificationReport()
    config = transcript.config
    q = config.field_size(instance)
    k = instance.k
    units = [SubspaceBasis.units(h, k, q) for h in instance.holdings]
    know = list(units)
    wants = [Fraction(w) for w in instance.want_counts]
    paid = [Fraction(0)] * instance.n
    completion = [0 if b.is_full() else None for b in know]

    for expected_l, rec in enumerate(transcript.rounds, start=1):
        l = rec.l
        if l != expected_l:
            report.add(expected_l, ROUND_INDEX, f"recorded {l}")
        if all(b.is_full() for b in know):
            report.add(l, ROUND_AFTER_DONE)
            break
        dims = [b.rank for b in know]
        top = max(dims)
        t_set = tuple(i for i in instance.users if dims[i - 1] == top)
        t = rec.transmitter
        if not 1 <= t <= instance.n:
            report.add(l, TRANSMITTER_NOT_MAX, f"user {t} does not exist")
            break
        if t not in t_set:
            report.add(l, TRANSMITTER_NOT_MAX, f"user {t} has dim {dims[t - 1]} < {top}")
        if tuple(rec.t_set) != t_set:
            report.add(l, T_SET_MISMATCH, f"recorded {list(rec.t_set)}, expected {list(t_set)}")
        r_set = tuple(i for i in instance.users if not contains_subspace(know[i - 1], units[t - 1]))
        if tuple(rec.r_set) != r_set:
            report.add(l, R_SET_MISMATCH, f"recorded {list(rec.r_set)}, expected {list(r_set)}")
        p_set = None
        if config.variant == 2:
            p_set = _broker_payers(wants, paid)
            if rec.p_set is None or tuple(rec.p_set) != p_set:
                report.add(l, P_SET_MISMATCH, f"recorded {rec.p_set}, expected {list(p_set)}")

        try:
            v = np.asarray(rec.v, dtype=np.int64)
            in_span = contains(units[t - 1], v)
        except InputError as exc:
            report.add(l, V_OUTSIDE_HOLDINGS, str(exc))
            break
        if not in_span:
            report.add(l, V_OUTSIDE_HOLDINGS)
        innovated = []
        for i in instance.users:
            know[i - 1], fresh = insert(know[i - 1], v)
            if fresh:
                innovated.append(i)
            if completion[i - 1] is None and know[i - 1].is_full():
                completion[i - 1] = l
        missed = [i for i in r_set if i not in innovated]
        if missed:
            report.add(l, V_NOT_INNOVATIVE, f"users {missed}")
        extra = [i for i in innovated if i not in r_set]
        if extra:
            report.add(l, V_INNOVATIVE_OUTSIDE, f"users {extra}")

        if config.variant == 1:
            debits = tuple((i, Fraction(1, len(r_set))) for i in r_set) if r_set else ()
        else:
            debits = tuple((i, Fraction(1, len(p_set))) for i in p_set)
            for i in p_set:
                paid[i - 1] += Fraction(1, len(p_set))
        if tuple(rec.debits) != debits or tuple(rec.credits) != ((t, ONE),):
            report.add(l, PAYMENT_MISMATCH)

    if not all(b.is_full() for b in know):
        report.add(len(transcript.rounds), INCOMPLETE)
    if tuple(completion) != tuple(transcript.completion_round):
        report.add(len(transcript.rounds), COMPLETION_MISMATCH)
    elif tuple(transcript.waves) != waves_from_completion(completion):
        report.add(len(transcript.rounds), WAVES_MISMATCH)
    return report
