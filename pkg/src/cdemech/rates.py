"""Omniscience-achieving rate region and the brute-force min sum-rate oracle.

For a coalition S, an integer rate vector r supported on S lets every member
of S reach omniscience iff every nonempty proper subset T of S transmits at
least as many packets as the members outside T are jointly missing::

    sum(r[i] for i in T) >= |intersection of wants(j) for j in S - T|

Rate vectors are length-n tuples indexed by user - 1.
"""

from functools import lru_cache

import numpy as np

from . import _kernels
from .errors import BudgetError, InputError
from .instance import is_coalition

MAX_CUT_USERS = 20
MAX_ORACLE_USERS = 8
MAX_ORACLE_PACKETS = 10


def cut_constraints(instance, s):
    """List of ``(subset, bound)`` for every nonempty proper subset of ``s``."""
    members = sorted(s)
    m = len(members)
    if m > MAX_CUT_USERS:
        raise BudgetError(f"cut enumeration limited to |S| <= {MAX_CUT_USERS}")
    masks, bounds = _cuts(tuple(instance.want_mask(i) for i in members), instance.k)
    out = []
    for mask, bound in zip(masks, bounds):
        subset = tuple(members[j] for j in range(m) if (mask >> j) & 1)
        out.append((subset, int(bound)))
    return out


@lru_cache(maxsize=4096)
def _cuts(want_masks, k):
    m = len(want_masks)
    full = (1 << m) - 1
    masks, bounds = [], []
    for mask in range(1, full):
        common = (1 << k) - 1
        for j in range(m):
            if not (mask >> j) & 1:
                common &= want_masks[j]
        masks.append(mask)
        bounds.append(common.bit_count())
    return np.array(masks, dtype=np.int64), np.array(bounds, dtype=np.int64)


def is_achieving(instance, s, r):
    """Check ``r`` against every cut of coalition ``s``."""
    s = frozenset(s)
    if len(r) != instance.n:
        raise InputError(f"rate vector has length {len(r)}, expected {instance.n}")
    if any(x < 0 or int(x) != x for x in r):
        raise InputError("rates must be nonnegative integers")
    outside = [i for i in instance.users if i not in s and r[i - 1] != 0]
    if outside:
        raise InputError(f"user {outside[0]} is outside the coalition but has a nonzero rate")
    if len(s) > MAX_CUT_USERS:
        raise BudgetError(f"cut enumeration limited to |S| <= {MAX_CUT_USERS}")
    if not is_coalition(instance, s):
        return False
    return all(sum(r[i - 1] for i in subset) >= bound for subset, bound in cut_constraints(instance, s))


def min_sum_rate(instance, s):
    """Smallest total rate of any vector in the region of coalition ``s``."""
    return sum(min_rate_vector(instance, s))


def min_rate_vector(instance, s):
    """The witness for :func:`min_sum_rate`: the lexicographically first
    vector of minimum sum (as a length-n tuple)."""
    s = frozenset(s)
    if not is_coalition(instance, s):
        raise InputError(f"{sorted(s)} is not a coalition")
    if len(s) > MAX_ORACLE_USERS or instance.k > MAX_ORACLE_PACKETS:
        raise BudgetError(
            f"min sum-rate oracle limited to |S| <= {MAX_ORACLE_USERS} and k <= {MAX_ORACLE_PACKETS}"
        )
    members = tuple(sorted(s))
    local = _search(tuple(instance.want_mask(i) for i in members), instance.k)
    r = [0] * instance.n
    for i, x in zip(members, local):
        r[i - 1] = x
    return tuple(r)


@lru_cache(maxsize=65536)
def _search(want_masks, k):
    m = len(want_masks)
    masks, bounds = _cuts(want_masks, k)
    # no vector can total less than its largest single cut bound
    start = int(bounds.max()) if bounds.size else 0
    for total in range(start, m * k + 1):
        hit = _kernels.first_feasible(m, k, total, masks, bounds)
        if hit.size:
            return tuple(int(x) for x in hit)
    raise AssertionError("coalition has an empty rate region")  # unreachable for coalitions


def min_sum_rate_bound_check(instance):
    """min sum-rate of N never exceeds min |wants| + max |wants|."""
    wants = instance.want_counts
    return min_sum_rate(instance, instance.users) <= min(wants) + max(wants)
