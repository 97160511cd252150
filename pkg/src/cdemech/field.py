"""Prime-field linear algebra for knowledge spaces.

A packet is identified with its encoding vector in GF(q)^k. A user's
knowledge is the span of the unit vectors of the packets it holds plus every
broadcast vector so far; it is stored as a :class:`SubspaceBasis` in reduced
row-echelon form, which makes bases canonical (equal subspaces compare equal
row by row).
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigurationError, InputError, InvariantError

RANDOM_DRAWS_PER_Q = 64


def is_prime(q):
    if q < 2:
        return False
    if q < 4:
        return True
    if q % 2 == 0:
        return False
    f = 3
    while f * f <= q:
        if q % f == 0:
            return False
        f += 2
    return True


def next_prime(x):
    """Smallest prime >= x."""
    p = max(2, int(x))
    while not is_prime(p):
        p += 1
    return p


@dataclass(frozen=True, eq=False)
class SubspaceBasis:
    """Canonical (RREF) basis of a subspace of GF(q)^k.

    ``rows`` is a read-only int64 array of shape ``(rank, k)``; use the
    constructors below rather than building one by hand.
    """

    rows: np.ndarray
    k: int
    q: int

    @classmethod
    def zero(cls, k, q):
        return cls._wrap(np.zeros((0, k), dtype=np.int64), k, q)

    @classmethod
    def span(cls, vectors, k, q):
        vecs = [_as_vector(v, k, q) for v in vectors]
        if not vecs:
            return cls.zero(k, q)
        return cls._wrap(_kernels.rref(np.vstack(vecs), q), k, q)

    @classmethod
    def units(cls, packets, k, q):
        """Span of the unit vectors u_j for 1-based packet indices ``packets``."""
        idx = sorted(set(packets))
        rows = np.zeros((len(idx), k), dtype=np.int64)
        for r, j in enumerate(idx):
            if not 1 <= j <= k:
                raise InputError(f"packet index {j} outside 1..{k}")
            rows[r, j - 1] = 1
        return cls._wrap(rows, k, q)

    @classmethod
    def _wrap(cls, rows, k, q):
        rows = np.asarray(rows, dtype=np.int64).reshape(-1, k)
        if rows.flags.writeable:
            rows = rows.copy() if rows.base is not None else rows
            rows.flags.writeable = False
        return cls(rows, k, q)

    @property
    def rank(self):
        return self.rows.shape[0]

    @property
    def pivots(self):
        return tuple(int(np.flatnonzero(row)[0]) for row in self.rows)

    def is_full(self):
        return self.rank == self.k

    def vectors(self):
        return [tuple(int(x) for x in row) for row in self.rows]

    def __eq__(self, other):
        if not isinstance(other, SubspaceBasis):
            return NotImplemented
        return (
            self.k == other.k
            and self.q == other.q
            and np.array_equal(self.rows, other.rows)
        )

    def __hash__(self):
        return hash((self.k, self.q, self.rows.tobytes()))

    def __repr__(self):
        return f"SubspaceBasis(k={self.k}, q={self.q}, rows={self.vectors()})"


def _as_vector(v, k, q):
    arr = np.asarray(v, dtype=np.int64).reshape(-1)
    if arr.shape[0] != k:
        raise InputError(f"vector has length {arr.shape[0]}, expected {k}")
    if k and (arr.min() < 0 or arr.max() >= q):
        raise InputError(f"vector entries must lie in [0, {q})")
    return arr


def _residual(basis, v):
    # zero iff v in span(basis)
    return _kernels.residual(basis.rows, v, basis.q)


def _check_same_space(a, b):
    if a.k != b.k or a.q != b.q:
        raise InputError(f"ambient mismatch: GF({a.q})^{a.k} vs GF({b.q})^{b.k}")


def insert(basis, v):
    """Add ``v`` to the span; returns ``(new_basis, innovative)``."""
    vec = _as_vector(v, basis.k, basis.q)
    if not _residual(basis, vec).any():
        return basis, False
    rows = _kernels.rref(np.concatenate((basis.rows, vec[None, :])), basis.q)
    return SubspaceBasis._wrap(rows, basis.k, basis.q), True


def contains(basis, v):
    vec = _as_vector(v, basis.k, basis.q)
    return not _residual(basis, vec).any()


def contains_subspace(a, b):
    """True iff span(b) is a subspace of span(a)."""
    _check_same_space(a, b)
    if b.rank > a.rank:
        return False
    return _kernels.spans_all(a.rows, b.rows, a.q)


@dataclass(frozen=True)
class SelectionPolicy:
    """How :func:`select_avoiding` picks a vector.

    ``deterministic`` runs a greedy coefficient sweep; ``randomized``
    rejection-samples uniform vectors of the ambient span from ``seed``.
    """

    kind: str = "deterministic"
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in ("deterministic", "randomized"):
            raise ConfigurationError(f"unknown selection policy {self.kind!r}")
        if self.kind == "randomized" and self.seed is None:
            raise ConfigurationError("randomized selection needs an explicit seed")

    @classmethod
    def deterministic(cls):
        return cls("deterministic")

    @classmethod
    def randomized(cls, seed):
        return cls("randomized", int(seed))


def select_avoiding(ambient, forbidden, policy=None, rng=None):
    """Pick v in span(ambient) with v outside every forbidden subspace.

    ``rng`` is only consulted by the randomized policy; it may be a
    ``numpy.random.Generator`` (so successive calls draw from one stream) or
    a seed. When omitted, the policy's own seed is used.
    """
    policy = policy or SelectionPolicy()
    for f in forbidden:
        _check_same_space(ambient, f)
    if any(contains_subspace(f, ambient) for f in forbidden):
        raise InvariantError(
            "precondition violated: ambient subspace lies inside a forbidden subspace"
        )
    q = ambient.q
    if policy.kind == "deterministic":
        if q <= len(forbidden):
            raise ConfigurationError(
                f"deterministic selection needs q > {len(forbidden)} forbidden subspaces, got q={q}"
            )
        v = _greedy_sweep(ambient, forbidden)
    else:
        gen = np.random.default_rng(policy.seed if rng is None else rng)
        v = _rejection_sample(ambient, forbidden, gen)

    if _residual(ambient, v).any() or any(not _residual(f, v).any() for f in forbidden):
        raise InvariantError(f"selected vector {tuple(v)} violates the avoidance condition")
    return tuple(int(x) for x in v)


def _greedy_sweep(ambient, forbidden):
    q = ambient.q
    basis = ambient.rows
    v = basis[0].copy()
    partial = SubspaceBasis.span([basis[0]], ambient.k, q)
    escaped = [not contains_subspace(f, partial) for f in forbidden]
    for b in basis[1:]:
        partial, _ = insert(partial, b)
        now = [not contains_subspace(f, partial) for f in forbidden]
        newly = any(n and not e for n, e in zip(now, escaped))
        # v already avoids the escaped subspaces; each rules out one coefficient
        for c in range(q):
            if c == 0 and newly:
                continue
            cand = (v + c * b) % q
            if all(not e or _residual(f, cand).any() for f, e in zip(forbidden, escaped)):
                v = cand
                break
        else:
            raise InvariantError("greedy sweep ran out of coefficients")
        escaped = now
    return v


def _rejection_sample(ambient, forbidden, gen):
    q = ambient.q
    for _ in range(RANDOM_DRAWS_PER_Q * q):
        coeffs = gen.integers(0, q, size=ambient.rank)
        v = coeffs @ ambient.rows % q
        if v.any() and all(_residual(f, v).any() for f in forbidden):
            return v
    raise InvariantError(f"no valid vector after {RANDOM_DRAWS_PER_Q * q} random draws")
