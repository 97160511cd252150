"""Problem instances, coalitions and the instance file format.

Users are numbered 1..n and packets 1..k throughout. An instance file is a
UTF-8 JSON object::

    {"n": 3, "k": 3, "q": 11, "holdings": [[1, 2], [2, 3], [1, 3]]}
"""

import hashlib
import json
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import BudgetError, ConfigurationError, InputError
from .field import is_prime, next_prime

MAX_ENUMERATED_USERS = 20
GENERATE_RETRIES = 1000


@dataclass(frozen=True)
class Instance:
    n: int
    k: int
    q: int
    holdings: tuple  # tuple of sorted tuples of 1-based packet indices

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 2:
            raise InputError("n must be >= 2")
        if not isinstance(self.k, int) or self.k < 1:
            raise InputError("k must be >= 1")
        if not isinstance(self.q, int) or not is_prime(self.q):
            raise InputError(f"q={self.q!r} must be a prime")
        if self.q < self.n:
            raise InputError(f"q={self.q} must be >= n={self.n}")
        if len(self.holdings) != self.n:
            raise InputError(f"holdings has {len(self.holdings)} entries, expected n={self.n}")
        norm = []
        for i, xs in enumerate(self.holdings, start=1):
            xs = tuple(sorted(set(xs)))
            for j in xs:
                if not isinstance(j, int) or not 1 <= j <= self.k:
                    raise InputError(f"holdings[{i - 1}]: packet {j!r} outside 1..{self.k}")
            norm.append(xs)
        covered = set().union(*norm)
        if len(covered) != self.k:
            missing = sorted(set(range(1, self.k + 1)) - covered)
            raise InputError(f"packets {missing} are held by no user")
        object.__setattr__(self, "holdings", tuple(norm))

    @classmethod
    def from_holdings(cls, holdings, q=None):
        """Build an instance; ``k`` is the largest packet index, ``q`` defaults
        to the smallest prime >= n*k."""
        holdings = [tuple(h) for h in holdings]
        n = len(holdings)
        k = max((j for h in holdings for j in h), default=0)
        return cls(n, k, q if q is not None else default_q(n, k), tuple(holdings))

    def held(self, i):
        return frozenset(self.holdings[i - 1])

    def wanted(self, i):
        return frozenset(range(1, self.k + 1)) - self.held(i)

    @property
    def users(self):
        return range(1, self.n + 1)

    @property
    def want_counts(self):
        return tuple(self.k - len(h) for h in self.holdings)

    def held_mask(self, i):
        m = 0
        for j in self.holdings[i - 1]:
            m |= 1 << (j - 1)
        return m

    def want_mask(self, i):
        return ((1 << self.k) - 1) & ~self.held_mask(i)

    def to_dict(self):
        return {"n": self.n, "k": self.k, "q": self.q, "holdings": [list(h) for h in self.holdings]}

    def render(self):
        return json.dumps(self.to_dict(), separators=(",", ":")) + "\n"

    def digest(self):
        return hashlib.sha256(self.render().encode("utf-8")).hexdigest()


def default_q(n, k):
    return next_prime(max(n * k, n))


def parse(text):
    """Parse an instance document, raising InputError with a field diagnostic."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise InputError("instance document must be a JSON object")
    for key in ("n", "k", "q", "holdings"):
        if key not in doc:
            raise InputError(f"missing field {key!r}")
    for key in ("n", "k", "q"):
        if not isinstance(doc[key], int) or isinstance(doc[key], bool):
            raise InputError(f"field {key!r} must be an integer")
    holdings = doc["holdings"]
    if not isinstance(holdings, list) or not all(isinstance(h, list) for h in holdings):
        raise InputError("field 'holdings' must be a list of lists")
    for i, h in enumerate(holdings):
        if len(set(h)) != len(h):
            raise InputError(f"holdings[{i}]: duplicate packet index")
        if any(not isinstance(j, int) or isinstance(j, bool) for j in h):
            raise InputError(f"holdings[{i}]: packet indices must be integers")
    try:
        return Instance(doc["n"], doc["k"], doc["q"], tuple(tuple(h) for h in holdings))
    except InputError as exc:
        raise InputError(f"invalid instance: {exc}") from None


def load(path):
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


def save(instance, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(instance.render())


def _check_users(instance, s):
    s = frozenset(s)
    if not s:
        raise InputError("coalition must be nonempty")
    bad = [i for i in s if not 1 <= i <= instance.n]
    if bad:
        raise InputError(f"user index {bad[0]} outside 1..{instance.n}")
    return s


def is_coalition(instance, s):
    """A user set is a coalition when its holdings jointly cover every packet."""
    s = _check_users(instance, s)
    covered = 0
    for i in s:
        covered |= instance.held_mask(i)
    return covered == (1 << instance.k) - 1


def minor_coalitions(instance):
    """All proper coalitions S of N, smallest first then lexicographic."""
    if instance.n > MAX_ENUMERATED_USERS:
        raise BudgetError(f"coalition enumeration limited to n <= {MAX_ENUMERATED_USERS}")
    out = []
    for size in range(1, instance.n):
        for s in combinations(instance.users, size):
            if is_coalition(instance, s):
                out.append(s)
    return out


def generate(n, k, density, seed, q=None):
    """Random covering instance with at least one non-omniscient user.

    Each packet goes to each user with probability ``density``; packets left
    uncovered are handed to a seed-chosen user.
    """
    if n < 2:
        raise ConfigurationError("n must be >= 2")
    if k < 1:
        raise ConfigurationError("k must be >= 1")
    if not 0 < density <= 1:
        raise ConfigurationError("density must lie in (0, 1]")
    if density == 1:
        raise ConfigurationError("density=1 makes every user omniscient; no valid instance exists")
    rng = np.random.default_rng(seed)
    for _ in range(GENERATE_RETRIES):
        grant = rng.random((n, k)) < density
        for j in range(k):
            if not grant[:, j].any():
                grant[rng.integers(n), j] = True
        if grant.all(axis=1).all():
            continue
        holdings = tuple(tuple(int(j) + 1 for j in np.flatnonzero(row)) for row in grant)
        return Instance(n, k, q if q is not None else default_q(n, k), holdings)
    raise ConfigurationError(f"no instance with a non-omniscient user after {GENERATE_RETRIES} draws")
