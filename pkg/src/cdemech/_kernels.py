"""Hot numeric kernels.

Every kernel exists twice: a numba ``@njit`` version and a pure-numpy
version with identical results. The public names (``rref``,
``first_feasible``) are bound to the numba path unless the environment
variable ``CDEMECH_NO_NUMBA`` is set to a truthy value or numba is not
importable. Both paths stay importable so tests and benchmarks can compare
them directly.
"""

import os
from functools import lru_cache

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("CDEMECH_NO_NUMBA", "").lower() not in (
    "1",
    "true",
    "yes",
    "on",
)


# ---------------------------------------------------------------------------
# Reduced row-echelon form over GF(q)
# ---------------------------------------------------------------------------


def rref_numpy(mat, q):
    """Reduced row-echelon form of ``mat`` over GF(q); zero rows dropped."""
    a = np.asarray(mat, dtype=np.int64) % q
    rows, cols = a.shape
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.flatnonzero(a[r:, c])
        if nz.size == 0:
            continue
        p = r + int(nz[0])
        if p != r:
            a[[r, p]] = a[[p, r]]
        a[r] = a[r] * pow(int(a[r, c]), q - 2, q) % q
        f = a[:, c].copy()
        f[r] = 0
        a = (a - np.outer(f, a[r])) % q
        r += 1
    return np.ascontiguousarray(a[:r])


def residual_numpy(rows, v, q):
    """``v`` reduced against RREF ``rows``; all-zero iff v lies in their span."""
    w = np.array(v, dtype=np.int64)
    for row in rows:
        p = int(np.flatnonzero(row)[0])
        if w[p]:
            w = (w - w[p] * row) % q
    return w


def spans_all_numpy(rows, others, q):
    """True iff every row of ``others`` lies in the span of RREF ``rows``."""
    return all(not residual_numpy(rows, o, q).any() for o in others)


# ---------------------------------------------------------------------------
# Minimum sum-rate level scan
# ---------------------------------------------------------------------------


@lru_cache(maxsize=256)
def _compositions(m, cap, total):
    # all vectors in [0, cap]^m summing to total, lexicographic order
    if m == 1:
        if total <= cap:
            return np.array([[total]], dtype=np.int64)
        return np.zeros((0, 1), dtype=np.int64)
    blocks = []
    for a in range(min(cap, total) + 1):
        rest = _compositions(m - 1, cap, total - a)
        if rest.shape[0]:
            head = np.full((rest.shape[0], 1), a, dtype=np.int64)
            blocks.append(np.hstack([head, rest]))
    if not blocks:
        return np.zeros((0, m), dtype=np.int64)
    out = np.vstack(blocks)
    out.flags.writeable = False
    return out


def first_feasible_numpy(m, cap, total, masks, bounds):
    """Lex-first r in [0,cap]^m with sum ``total`` meeting every cut.

    Cut ``c`` requires ``sum(r[j] for j in bits(masks[c])) >= bounds[c]``.
    Returns an int64 vector, or an empty array when no such r exists.
    """
    comps = _compositions(m, cap, total)
    if comps.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    masks = np.asarray(masks, dtype=np.int64)
    if masks.size == 0:
        return comps[0].copy()
    sel = (masks[None, :] >> np.arange(m, dtype=np.int64)[:, None]) & 1
    ok = np.all(comps @ sel >= np.asarray(bounds, dtype=np.int64)[None, :], axis=1)
    hit = np.flatnonzero(ok)
    if hit.size == 0:
        return np.zeros(0, dtype=np.int64)
    return comps[hit[0]].copy()


if HAVE_NUMBA:

    @njit(cache=True)
    def _modinv(a, q):
        result = 1
        base = a % q
        e = q - 2
        while e > 0:
            if e & 1:
                result = result * base % q
            base = base * base % q
            e >>= 1
        return result

    @njit(cache=True)
    def rref_numba(mat, q):
        a = mat.copy() % q
        rows, cols = a.shape
        r = 0
        for c in range(cols):
            if r == rows:
                break
            piv = -1
            for i in range(r, rows):
                if a[i, c] != 0:
                    piv = i
                    break
            if piv < 0:
                continue
            if piv != r:
                for j in range(cols):
                    tmp = a[r, j]
                    a[r, j] = a[piv, j]
                    a[piv, j] = tmp
            inv = _modinv(a[r, c], q)
            for j in range(cols):
                a[r, j] = a[r, j] * inv % q
            for i in range(rows):
                if i != r and a[i, c] != 0:
                    f = a[i, c]
                    for j in range(cols):
                        a[i, j] = (a[i, j] - f * a[r, j]) % q
            r += 1
        return a[:r].copy()

    @njit(cache=True)
    def residual_numba(rows, v, q):
        w = v.copy()
        k = w.shape[0]
        for r in range(rows.shape[0]):
            p = 0
            while rows[r, p] == 0:
                p += 1
            f = w[p]
            if f != 0:
                for j in range(k):
                    w[j] = (w[j] - f * rows[r, j]) % q
        return w

    @njit(cache=True)
    def spans_all_numba(rows, others, q):
        for o in range(others.shape[0]):
            w = residual_numba(rows, others[o], q)
            for j in range(w.shape[0]):
                if w[j] != 0:
                    return False
        return True

    @njit(cache=True)
    def _meets_cuts(r, masks, bounds):
        m = r.shape[0]
        for c in range(masks.shape[0]):
            s = 0
            for j in range(m):
                if (masks[c] >> j) & 1:
                    s += r[j]
            if s < bounds[c]:
                return False
        return True

    @njit(cache=True)
    def first_feasible_numba(m, cap, total, masks, bounds):
        r = np.zeros(m, dtype=np.int64)
        rem = total
        for i in range(m - 1, -1, -1):
            x = min(cap, rem)
            r[i] = x
            rem -= x
        if rem > 0:
            return np.zeros(0, dtype=np.int64)
        while True:
            if _meets_cuts(r, masks, bounds):
                return r
            found = -1
            suffix = r[m - 1]
            for i in range(m - 2, -1, -1):
                if r[i] < cap and suffix > 0:
                    found = i
                    break
                suffix += r[i]
            if found < 0:
                return np.zeros(0, dtype=np.int64)
            r[found] += 1
            rem = suffix - 1
            for j in range(m - 1, found, -1):
                x = min(cap, rem)
                r[j] = x
                rem -= x


def rref(mat, q):
    mat = np.ascontiguousarray(mat, dtype=np.int64)
    if USE_NUMBA:
        return rref_numba(mat, np.int64(q))
    return rref_numpy(mat, q)


def residual(rows, v, q):
    if USE_NUMBA:
        return residual_numba(rows, v, np.int64(q))
    return residual_numpy(rows, v, q)


def spans_all(rows, others, q):
    if USE_NUMBA:
        return spans_all_numba(rows, others, np.int64(q))
    return spans_all_numpy(rows, others, q)


def first_feasible(m, cap, total, masks, bounds):
    masks = np.ascontiguousarray(masks, dtype=np.int64)
    bounds = np.ascontiguousarray(bounds, dtype=np.int64)
    if USE_NUMBA:
        return first_feasible_numba(m, cap, total, masks, bounds)
    return first_feasible_numpy(m, cap, total, masks, bounds)


def backend():
    return "numba" if USE_NUMBA else "numpy"
