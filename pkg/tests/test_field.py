import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdemech.errors import ConfigurationError, InputError, InvariantError
from cdemech.field import (
    SelectionPolicy,
    SubspaceBasis,
    contains,
    contains_subspace,
    insert,
    is_prime,
    next_prime,
    select_avoiding,
)


def span_of(vectors, k, q):
    return SubspaceBasis.span(vectors, k, q)


def enumerate_span(basis):
    """Every vector of span(basis), by brute force over coefficients."""
    q = basis.q
    out = set()
    for coeffs in itertools.product(range(q), repeat=basis.rank):
        v = np.zeros(basis.k, dtype=np.int64)
        for c, row in zip(coeffs, basis.rows):
            v = (v + c * row) % q
        out.add(tuple(int(x) for x in v))
    return out


def all_vectors(k, q):
    return list(itertools.product(range(q), repeat=k))


def test_primes():
    assert [p for p in range(20) if is_prime(p)] == [2, 3, 5, 7, 11, 13, 17, 19]
    assert next_prime(12) == 13
    assert next_prime(13) == 13
    assert next_prime(0) == 2


def test_insert_into_empty():
    b, fresh = insert(SubspaceBasis.zero(3, 5), (1, 0, 0))
    assert b.rank == 1 and fresh


def test_insert_scalar_multiple():
    b = span_of([(1, 0, 0)], 3, 5)
    b2, fresh = insert(b, (3, 0, 0))
    assert b2.rank == 1 and not fresh


def test_insert_sum_of_rows():
    b = span_of([(1, 1, 0), (0, 0, 1)], 3, 5)
    b2, fresh = insert(b, (1, 1, 1))
    assert b2.rank == 2 and not fresh
    assert b2 == b


def test_insert_length_mismatch():
    with pytest.raises(InputError):
        insert(SubspaceBasis.zero(3, 5), (1, 0))
    with pytest.raises(InputError):
        insert(SubspaceBasis.zero(2, 5), (5, 0))


def test_contains_examples():
    assert contains(span_of([(1, 0), (0, 1)], 2, 5), (4, 4))
    assert contains(SubspaceBasis.zero(2, 5), (0, 0))
    assert contains(span_of([(1, 2, 0)], 3, 5), (2, 4, 0))
    assert not contains(span_of([(1, 2, 0)], 3, 5), (2, 3, 0))


def test_contains_subspace_examples():
    full = SubspaceBasis.units([1, 2, 3], 3, 5)
    assert contains_subspace(full, span_of([(1, 2, 3)], 3, 5))
    assert not contains_subspace(span_of([(1, 0, 0)], 3, 5), span_of([(1, 0, 0), (0, 1, 0)], 3, 5))
    assert contains_subspace(span_of([(1, 1, 0), (0, 0, 1)], 3, 5), span_of([(1, 1, 1)], 3, 5))


def test_contains_subspace_ambient_mismatch():
    with pytest.raises(InputError):
        contains_subspace(SubspaceBasis.zero(2, 5), SubspaceBasis.zero(3, 5))
    with pytest.raises(InputError):
        contains_subspace(SubspaceBasis.zero(2, 5), SubspaceBasis.zero(2, 7))


def test_units_and_pivots():
    b = SubspaceBasis.units([3, 1], 4, 7)
    assert b.vectors() == [(1, 0, 0, 0), (0, 0, 1, 0)]
    assert b.pivots == (0, 2)
    with pytest.raises(InputError):
        SubspaceBasis.units([5], 4, 7)


def test_rows_are_read_only():
    b = SubspaceBasis.units([1], 2, 3)
    with pytest.raises(ValueError):
        b.rows[0, 0] = 2


@pytest.mark.parametrize("q,k", [(2, 3), (3, 2), (3, 3), (5, 2)])
def test_membership_matches_enumeration(q, k):
    # exhaustive over every 1- and 2-generator span
    vecs = all_vectors(k, q)
    for gens in itertools.combinations(vecs, 2):
        b = span_of(gens, k, q)
        members = enumerate_span(b)
        for v in vecs:
            assert contains(b, v) == (v in members)


@pytest.mark.parametrize("q,k", [(3, 3), (5, 2), (5, 3)])
def test_span_closed_under_sum_and_scaling(q, k):
    rng = np.random.default_rng(q * 10 + k)
    vecs = all_vectors(k, q)
    for _ in range(15):
        idx = rng.choice(len(vecs), size=2, replace=False)
        b = span_of([vecs[i] for i in idx], k, q)
        members = sorted(enumerate_span(b))
        for v in members:
            for c in range(q):
                assert contains(b, tuple(c * x % q for x in v))
        for v, w in itertools.combinations(members, 2):
            assert contains(b, tuple((x + y) % q for x, y in zip(v, w)))


vector_lists = st.integers(2, 5).flatmap(
    lambda k: st.lists(st.lists(st.integers(0, 6), min_size=k, max_size=k), min_size=1, max_size=6)
)


@settings(max_examples=200, deadline=None)
@given(vector_lists, st.randoms(use_true_random=False))
def test_canonical_form_is_order_independent(vecs, rnd):
    k, q = len(vecs[0]), 7
    b1 = SubspaceBasis.zero(k, q)
    for v in vecs:
        b1, _ = insert(b1, v)
    shuffled = list(vecs)
    rnd.shuffle(shuffled)
    b2 = SubspaceBasis.zero(k, q)
    for v in shuffled:
        b2, _ = insert(b2, v)
    assert b1 == b2
    assert np.array_equal(b1.rows, b2.rows)
    assert hash(b1) == hash(b2)
    assert b1 == span_of(vecs, k, q)


@settings(max_examples=200, deadline=None)
@given(vector_lists)
def test_insert_idempotent(vecs):
    k, q = len(vecs[0]), 7
    b = span_of(vecs[:-1], k, q)
    once, _ = insert(b, vecs[-1])
    twice, fresh = insert(once, vecs[-1])
    assert twice == once and not fresh


def test_select_avoiding_one_line():
    amb = SubspaceBasis.units([1, 2], 2, 3)
    v = select_avoiding(amb, [span_of([(1, 0)], 2, 3)])
    assert v[1] != 0


def test_select_avoiding_two_lines():
    amb = span_of([(1, 0, 0), (0, 1, 0)], 3, 5)
    forb = [span_of([(1, 0, 0)], 3, 5), span_of([(0, 1, 0)], 3, 5)]
    v = select_avoiding(amb, forb)
    assert v == (1, 1, 0)


def test_select_avoiding_precondition():
    amb = span_of([(1, 0)], 2, 3)
    with pytest.raises(InvariantError):
        select_avoiding(amb, [span_of([(1, 0)], 2, 3)])


def test_select_avoiding_field_too_small():
    q = 2
    amb = SubspaceBasis.units([1, 2], 2, q)
    forb = [span_of([(1, 0)], 2, q), span_of([(0, 1)], 2, q)]
    with pytest.raises(ConfigurationError):
        select_avoiding(amb, forb, SelectionPolicy.deterministic())


def test_select_avoiding_three_lines_in_plane_q5():
    q = 5
    amb = SubspaceBasis.units([1, 2], 2, q)
    forb = [span_of([v], 2, q) for v in [(1, 0), (0, 1), (1, 1)]]
    v = select_avoiding(amb, forb)
    assert all(not contains(f, v) for f in forb) and contains(amb, v)


def test_exhaustive_single_forbidden_line_q5_k3():
    q, k = 5, 3
    vecs = [v for v in all_vectors(k, q) if any(v)]
    lines = {span_of([v], k, q) for v in vecs}
    ambients = {span_of([v, w], k, q) for v, w in itertools.combinations(vecs, 2)} | lines
    checked = 0
    for amb in ambients:
        for line in lines:
            if contains_subspace(line, amb):
                continue
            v = select_avoiding(amb, [line])
            assert contains(amb, v) and not contains(line, v)
            checked += 1
    assert checked > 1000


def test_randomized_policy_reproducible():
    q = 11
    amb = SubspaceBasis.units([1, 2, 3], 3, q)
    forb = [SubspaceBasis.units([1, 2], 3, q), SubspaceBasis.units([2, 3], 3, q)]
    pol = SelectionPolicy.randomized(42)
    a = select_avoiding(amb, forb, pol)
    b = select_avoiding(amb, forb, pol)
    assert a == b
    assert all(not contains(f, a) for f in forb)


def test_randomized_policy_needs_seed():
    with pytest.raises(ConfigurationError):
        SelectionPolicy("randomized")
    with pytest.raises(ConfigurationError):
        SelectionPolicy("greedy")
