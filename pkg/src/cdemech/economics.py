"""Utilities, rationality, stability and optimality of rate-payment pairs.

All arithmetic is exact (``fractions.Fraction``). Payments come either as a
peer-to-peer :class:`PaymentMatrix` or as a broker's :class:`BrokerLedger`;
both expose ``p_plus`` (incoming) and ``p_minus`` (outgoing) per user, which
is all the utility depends on.

Stability is decided coalition by coalition through a margin::

    margin(S) = sum_{i in S} u_i(r, p) - (sum_{i in S} |wants_i| - minrate(S))

A minor coalition can block iff its margin is negative: any deviation
(r~, p~) over S pays out exactly what it collects, so the members' total
utility is ``sum |wants_i| - r~_S``, which can strictly beat the current
total only when the margin is negative; conversely a negative margin is
turned into an explicit blocking pair by :func:`blocking_witness`. This
equivalence is derived, not taken on faith: :func:`blocking_search` checks it
by exhaustive enumeration plus an exact min-cost circulation.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import networkx as nx

from . import rational
from .errors import BudgetError, InputError, InvariantError, NotRationalError
from .instance import minor_coalitions
from .rates import is_achieving, min_rate_vector, min_sum_rate

MAX_STABILITY_USERS = 6

ZERO = Fraction(0)


@dataclass(frozen=True)
class PaymentMatrix:
    """``entries[i-1][j-1]`` is the total paid by user i to user j."""

    entries: tuple

    def __post_init__(self):
        rows = tuple(tuple(rational.frac(x) for x in row) for row in self.entries)
        n = len(rows)
        if any(len(row) != n for row in rows):
            raise InputError("payment matrix must be square")
        for i, row in enumerate(rows):
            if row[i] != 0:
                raise InputError(f"p[{i + 1},{i + 1}] must be 0")
            if any(x < 0 for x in row):
                raise InputError(f"row {i + 1} has a negative payment")
        object.__setattr__(self, "entries", rows)

    @classmethod
    def zeros(cls, n):
        return cls(tuple((ZERO,) * n for _ in range(n)))

    @property
    def n(self):
        return len(self.entries)

    @property
    def p_plus(self):
        return tuple(sum((row[i] for row in self.entries), ZERO) for i in range(self.n))

    @property
    def p_minus(self):
        return tuple(sum(row, ZERO) for row in self.entries)

    @property
    def total(self):
        return sum(self.p_minus, ZERO)

    def get(self, i, j):
        return self.entries[i - 1][j - 1]

    def add(self, i, j, amount):
        rows = [list(row) for row in self.entries]
        rows[i - 1][j - 1] += rational.frac(amount)
        return PaymentMatrix(tuple(map(tuple, rows)))

    def in_scope(self, s):
        """Membership in P_S: no payment crosses the boundary of ``s``."""
        s = set(s)
        for i in range(1, self.n + 1):
            for j in range(1, self.n + 1):
                if (i in s) != (j in s) and self.get(i, j) != 0:
                    return False
        return True

    def to_dict(self):
        return {"kind": "matrix", "entries": [[rational.to_json(x) for x in row] for row in self.entries]}


@dataclass(frozen=True)
class BrokerLedger:
    """Aggregate payments cleared through a broker."""

    p_plus: tuple
    p_minus: tuple

    def __post_init__(self):
        plus = tuple(rational.frac(x) for x in self.p_plus)
        minus = tuple(rational.frac(x) for x in self.p_minus)
        if len(plus) != len(minus):
            raise InputError("p_plus and p_minus differ in length")
        if any(x < 0 for x in plus + minus):
            raise InputError("ledger entries must be nonnegative")
        if sum(plus, ZERO) != sum(minus, ZERO):
            raise InputError("ledger does not balance: sum(p_plus) != sum(p_minus)")
        object.__setattr__(self, "p_plus", plus)
        object.__setattr__(self, "p_minus", minus)

    @classmethod
    def zeros(cls, n):
        return cls((ZERO,) * n, (ZERO,) * n)

    @property
    def n(self):
        return len(self.p_plus)

    @property
    def total(self):
        return sum(self.p_plus, ZERO)

    def in_scope(self, s):
        return all(self.p_plus[i - 1] == 0 and self.p_minus[i - 1] == 0 for i in range(1, self.n + 1) if i not in s)

    def to_matrix(self):
        return realize_matrix(self.p_plus, self.p_minus)

    def to_dict(self):
        return {
            "kind": "ledger",
            "p_plus": [rational.to_json(x) for x in self.p_plus],
            "p_minus": [rational.to_json(x) for x in self.p_minus],
        }


def payments_from_dict(doc):
    if not isinstance(doc, dict) or doc.get("kind") not in ("matrix", "ledger"):
        raise InputError("payments must be an object with kind 'matrix' or 'ledger'")
    try:
        if doc["kind"] == "matrix":
            return PaymentMatrix(tuple(tuple(rational.from_json(x) for x in row) for row in doc["entries"]))
        return BrokerLedger(
            tuple(rational.from_json(x) for x in doc["p_plus"]),
            tuple(rational.from_json(x) for x in doc["p_minus"]),
        )
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed payments: {exc}") from None


def realize_matrix(p_plus, p_minus):
    """A zero-diagonal payment matrix with the given marginals.

    Solved as an integer max-flow after scaling by the common denominator,
    so the result is exact and deterministic.
    """
    plus = [rational.frac(x) for x in p_plus]
    minus = [rational.frac(x) for x in p_minus]
    n = len(plus)
    total = sum(plus, ZERO)
    if total != sum(minus, ZERO):
        raise InputError("marginals do not balance")
    if total == 0:
        return PaymentMatrix.zeros(n)
    scale = math.lcm(*(x.denominator for x in plus + minus))
    g = nx.DiGraph()
    for i in range(n):
        if minus[i]:
            g.add_edge("src", ("out", i), capacity=int(minus[i] * scale))
        if plus[i]:
            g.add_edge(("in", i), "dst", capacity=int(plus[i] * scale))
    for i in range(n):
        for j in range(n):
            if i != j and minus[i] and plus[j]:
                g.add_edge(("out", i), ("in", j))
    value, flow = nx.maximum_flow(g, "src", "dst")
    if value != total * scale:
        raise InvariantError("marginals admit no zero-diagonal payment matrix")
    rows = [[ZERO] * n for _ in range(n)]
    for i in range(n):
        for (_, j), f in flow.get(("out", i), {}).items():
            rows[i][j] = Fraction(f, scale)
    return PaymentMatrix(tuple(map(tuple, rows)))


def _check_payments(instance, payments):
    if payments.n != instance.n:
        raise InputError(f"payments cover {payments.n} users, instance has {instance.n}")


def utility(instance, r, payments, i):
    """``(u, u_plus, u_minus)`` of user i, where u_plus is what i earns net of
    its own transmissions and u_minus is the value received net of payments."""
    _check_payments(instance, payments)
    if not 1 <= i <= instance.n:
        raise InputError(f"user {i} outside 1..{instance.n}")
    u_plus = payments.p_plus[i - 1] - r[i - 1]
    u_minus = instance.k - len(instance.holdings[i - 1]) - payments.p_minus[i - 1]
    return u_plus + u_minus, u_plus, u_minus


def utilities(instance, r, payments):
    return tuple(utility(instance, r, payments, i)[0] for i in instance.users)


def is_rational_pair(instance, r, payments, scope=None):
    scope = frozenset(instance.users if scope is None else scope)
    if len(r) != instance.n:
        raise InputError(f"rate vector has length {len(r)}, expected {instance.n}")
    if any(r[i - 1] != 0 for i in instance.users if i not in scope):
        raise InputError("rate vector is nonzero outside the scope")
    if not payments.in_scope(scope):
        raise InputError("payments cross the boundary of the scope")
    for i in scope:
        _, up, um = utility(instance, r, payments, i)
        if up < 0 or um < 0:
            return False
    return True


@dataclass(frozen=True)
class Witness:
    coalition: tuple
    rates: tuple
    payments: PaymentMatrix

    def to_dict(self):
        return {
            "coalition": list(self.coalition),
            "rates": list(self.rates),
            "payments": self.payments.to_dict(),
        }


@dataclass(frozen=True)
class StabilityReport:
    margins: dict  # coalition tuple -> Fraction
    min_rates: dict  # coalition tuple -> int
    witnesses: dict = field(default_factory=dict)
    rational: bool = True

    @property
    def stable(self):
        return all(m >= 0 for m in self.margins.values())

    @property
    def vacuous(self):
        return not self.margins

    def to_dict(self):
        return {
            "stable": self.stable,
            "vacuous": self.vacuous,
            "rational": self.rational,
            "coalitions": [
                {
                    "members": list(s),
                    "min_sum_rate": self.min_rates[s],
                    "margin": rational.to_json(m),
                    "witness": self.witnesses[s].to_dict() if s in self.witnesses else None,
                }
                for s, m in self.margins.items()
            ],
        }

    def to_text(self):
        if self.vacuous:
            return "no minor coalitions: stable by vacuity\n"
        head = ("coalition", "minrate", "margin", "blocks")
        body = [
            ("{" + ",".join(map(str, s)) + "}", str(self.min_rates[s]), rational.fmt(m), "yes" if m < 0 else "no")
            for s, m in self.margins.items()
        ]
        widths = [max(len(row[c]) for row in [head] + body) for c in range(4)]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in [head] + body]
        for s, w in self.witnesses.items():
            lines.append(f"witness {set(s)}: r~={list(w.rates)}")
        return "\n".join(lines) + "\n"


def _check_budget(instance):
    if instance.n > MAX_STABILITY_USERS:
        raise BudgetError(f"stability check limited to n <= {MAX_STABILITY_USERS}")


def coalition_margin(instance, s, utils):
    wants = instance.want_counts
    msr = min_sum_rate(instance, s)
    return sum((utils[i - 1] for i in s), ZERO) - (sum(wants[i - 1] for i in s) - msr), msr


def check_stability(instance, r, payments, require_rational=True):
    """Margin table over every minor coalition, with a blocking pair for each
    negative margin (only built when (r, p) is rational)."""
    _check_budget(instance)
    rat = is_rational_pair(instance, r, payments)
    if require_rational and not rat:
        raise NotRationalError("stability is only defined here for rational rate-payment pairs")
    utils = utilities(instance, r, payments)
    margins, min_rates, witnesses = {}, {}, {}
    for s in minor_coalitions(instance):
        margin, msr = coalition_margin(instance, s, utils)
        margins[s] = margin
        min_rates[s] = msr
        if margin < 0 and rat:
            w = blocking_witness(instance, s, r, payments)
            if not is_blocking(instance, s, r, payments, w.rates, w.payments):
                raise InvariantError(f"constructed witness for {s} does not block")
            witnesses[s] = w
    return StabilityReport(margins, min_rates, witnesses, rat)


def is_blocking(instance, s, r, payments, r_dev, p_dev):
    """Both Pareto bullets plus membership of (r_dev, p_dev) in R_S x P_S and
    its rationality over S."""
    s = frozenset(s)
    if not is_achieving(instance, s, r_dev) or not p_dev.in_scope(s):
        return False
    if not is_rational_pair(instance, r_dev, p_dev, scope=s):
        return False
    before = utilities(instance, r, payments)
    after = utilities(instance, r_dev, p_dev)
    gains = [after[i - 1] - before[i - 1] for i in s]
    return all(g >= 0 for g in gains) and any(g > 0 for g in gains)


def blocking_witness(instance, s, r, payments):
    """Explicit deviation for a coalition with negative margin.

    Uses a min-rate vector for S and hands each member its current utility
    plus an equal share of the slack as a net transfer.
    """
    s = tuple(sorted(s))
    utils = utilities(instance, r, payments)
    wants = instance.want_counts
    r_dev = min_rate_vector(instance, s)
    need = {i: utils[i - 1] + r_dev[i - 1] - wants[i - 1] for i in s}
    slack = -sum(need.values(), ZERO)
    if slack <= 0:
        raise InputError(f"coalition {s} has nonnegative margin; nothing to witness")
    share = slack / len(s)
    plus = [ZERO] * instance.n
    minus = [ZERO] * instance.n
    for i in s:
        t = need[i] + share
        plus[i - 1] = max(Fraction(r_dev[i - 1]), t)
        minus[i - 1] = plus[i - 1] - t
    try:
        p_dev = realize_matrix(plus, minus)
    except InvariantError:
        found = _flow_deviation(instance, s, utils, r_dev)
        if found is None:
            raise InvariantError(f"no realizable deviation for coalition {s}") from None
        p_dev = found
    return Witness(s, r_dev, p_dev)


def _flow_deviation(instance, s, utils, r_dev):
    """Payments in P_S that keep (r_dev, p) rational over S and leave no
    member of S worse off, or None when none exist or nobody gains.

    Feasibility is decided exactly as a circulation with lower bounds on the
    scaled-integer network below; flow polytopes are integral, so an integer
    circulation exists iff a rational payment matrix does.

        out_i -> in_j        payment p_ij, j != i
        in_i  -> c_i         lower bound r_dev_i   (receipts cover own rate)
        c_i   -> out_i       capacity wants_i      (never pay beyond wants)
        c_i  <-> hub         net transfer t_i >= u_i + r_dev_i - wants_i
    """
    s = tuple(sorted(s))
    wants = instance.want_counts
    floor = {i: rational.frac(utils[i - 1]) + r_dev[i - 1] - wants[i - 1] for i in s}
    if sum(floor.values(), ZERO) >= 0:
        return None  # total gain -sum(floor) is fixed, since payments stay inside S
    scale = math.lcm(*(x.denominator for x in floor.values()))
    arcs = []  # (u, v, lower, upper or None)
    for i in s:
        arcs.append((("in", i), ("c", i), r_dev[i - 1] * scale, None))
        arcs.append((("c", i), ("out", i), 0, wants[i - 1] * scale))
        d = int(floor[i] * scale)
        arcs.append((("c", i), "hub", max(d, 0), None))
        if d < 0:
            arcs.append(("hub", ("c", i), 0, -d))
        for j in s:
            if j != i:
                arcs.append((("out", i), ("in", j), 0, None))
    g = nx.DiGraph()
    demand = {}
    for u, v, lo, hi in arcs:
        attrs = {} if hi is None else {"capacity": hi - lo}
        g.add_edge(u, v, **attrs)
        demand[u] = demand.get(u, 0) + lo
        demand[v] = demand.get(v, 0) - lo
    nx.set_node_attributes(g, demand, "demand")
    try:
        _, flow = nx.network_simplex(g)
    except nx.NetworkXUnfeasible:
        return None
    entries = [[ZERO] * instance.n for _ in range(instance.n)]
    for i in s:
        for j in s:
            if j != i:
                entries[i - 1][j - 1] = Fraction(flow[("out", i)][("in", j)], scale)
    return PaymentMatrix(tuple(map(tuple, entries)))


def blocking_search(instance, s, r, payments, extra=1):
    """Bounded exhaustive search for a blocking pair over coalition ``s``.

    Enumerates every integer r~ in the region of S with total at most
    minrate(S) + ``extra`` and asks an exact circulation for payments. Returns the
    first blocking (r~, p~) found as a :class:`Witness`, else None.
    """
    s = tuple(sorted(s))
    utils = utilities(instance, r, payments)
    cap = min_sum_rate(instance, s) + extra
    for local in product(range(cap + 1), repeat=len(s)):
        if sum(local) > cap:
            continue
        r_dev = [0] * instance.n
        for i, x in zip(s, local):
            r_dev[i - 1] = x
        r_dev = tuple(r_dev)
        if not is_achieving(instance, s, r_dev):
            continue
        p_dev = _flow_deviation(instance, s, utils, r_dev)
        if p_dev is not None and is_blocking(instance, s, r, payments, r_dev, p_dev):
            return Witness(s, r_dev, p_dev)
    return None


def explain_optimality(instance, r, payments):
    """``(optimal, reason)``. Optimal means: r reaches omniscience, r_N and
    p_N equal the min sum-rate, the pair is rational, and N is stable."""
    r_n = sum(r)
    if not is_achieving(instance, instance.users, r):
        return False, "rate vector does not let every user reach omniscience"
    best = min_sum_rate(instance, instance.users)
    if r_n > best:
        return False, f"r_N={r_n} > {best}"
    p_n = payments.total
    if p_n != r_n:
        return False, f"p_N={rational.fmt(p_n)} {'>' if p_n > r_n else '<'} r_N={r_n}"
    if not is_rational_pair(instance, r, payments):
        return False, "not rational"
    report = check_stability(instance, r, payments)
    if not report.stable:
        blocking = [set(s) for s, m in report.margins.items() if m < 0]
        return False, f"unstable: {blocking[0]} can block"
    return True, f"r_N=p_N={r_n}"


def check_optimality(instance, r, payments):
    return explain_optimality(instance, r, payments)[0]


@dataclass(frozen=True)
class ComparisonReport:
    expected_sum: Fraction
    sum_utility: tuple  # (algo1, algo2)
    min_utility: tuple  # (algo1, algo2)
    c: Fraction
    closed_form_min: Fraction

    @property
    def sums_match(self):
        return all(x == self.expected_sum for x in self.sum_utility)

    @property
    def min_dominates(self):
        return self.min_utility[1] >= self.min_utility[0]

    @property
    def closed_form_holds(self):
        return self.min_utility[1] == self.closed_form_min

    @property
    def ok(self):
        return self.sums_match and self.min_dominates and self.closed_form_holds

    def to_dict(self):
        return {
            "expected_sum_utility": rational.to_json(self.expected_sum),
            "sum_utility": [rational.to_json(x) for x in self.sum_utility],
            "min_utility": [rational.to_json(x) for x in self.min_utility],
            "c": rational.to_json(self.c),
            "closed_form_min_utility": rational.to_json(self.closed_form_min),
            "sums_match": self.sums_match,
            "min_dominates": self.min_dominates,
            "closed_form_holds": self.closed_form_holds,
        }

    def to_text(self):
        f = rational.fmt
        return (
            f"sum-utility   algo1={f(self.sum_utility[0])}  algo2={f(self.sum_utility[1])}  "
            f"expected={f(self.expected_sum)}\n"
            f"min-utility   algo1={f(self.min_utility[0])}  algo2={f(self.min_utility[1])}  "
            f"closed form k-max(c,max|X_i|)={f(self.closed_form_min)} with c={f(self.c)}\n"
        )


def utility_comparisons(instance, out1, out2, check=True):
    """Compare an Algorithm 1 output ``(r, p)`` with an Algorithm 2 output."""
    (r1, p1), (r2, p2) = out1, out2
    if check:
        for label, (r, p) in (("algo1", out1), ("algo2", out2)):
            ok, why = explain_optimality(instance, r, p)
            if not ok:
                raise InputError(f"{label} output is not optimal: {why}")
    u1 = utilities(instance, r1, p1)
    u2 = utilities(instance, r2, p2)
    expected = Fraction(sum(instance.want_counts) - sum(r1))
    sizes = [len(h) for h in instance.holdings]
    c = min(sizes[i] + p2.p_minus[i] for i in range(instance.n))
    closed = instance.k - max(c, Fraction(max(sizes)))
    return ComparisonReport(expected, (sum(u1, ZERO), sum(u2, ZERO)), (min(u1), min(u2)), c, closed)
