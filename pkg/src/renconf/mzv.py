"""Numeric evaluation of multiple zeta values.

Used as the independent numeric check for the scalar relation table.  The
evaluator is based on the Hoelder convolution: an admissible index tuple
(k1, ..., km), k1 >= 2, corresponds to a binary word in the letters {0, 1},

    w = 0^(k1-1) 1  0^(k2-1) 1  ...  0^(km-1) 1,

and the iterated-integral representation over [0, 1] can be split at 1/2,

    zeta(w) = sum_{j=0}^{|w|} Li(tau(w[:j]); 1/2) * Li(w[j:]; 1/2),

where tau reverses the word and flips its letters.  Every factor is a
multiple polylogarithm at x = 1/2, whose nested sum converges geometrically
(one binary digit per term), so a few hundred terms give far more accuracy
than any floating-point target used in the tests.

Conventions: zeta(k1, ..., km) = sum over n1 > n2 > ... > nm >= 1 of
1 / (n1^k1 * ... * nm^km).  Only the leading index must satisfy k1 >= 2.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache


def _word(indices: tuple[int, ...]) -> tuple[int, ...]:
    w: list[int] = []
    for k in indices:
        w.extend([0] * (k - 1))
        w.append(1)
    return tuple(w)


def _indices(word: tuple[int, ...]) -> tuple[int, ...]:
    # Inverse of _word for words ending in 1: split on the 1s.
    if word and word[-1] != 1:
        raise ValueError("word must end with the letter 1")
    out: list[int] = []
    run = 0
    for letter in word:
        if letter == 0:
            run += 1
        else:
            out.append(run + 1)
            run = 0
    return tuple(out)


def _tau(word: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(1 - a for a in reversed(word))


@lru_cache(maxsize=None)
def _li_half(indices: tuple[int, ...], nterms: int) -> Fraction:
    """Li_{s1,...,sr}(1/2) as an exact truncated Fraction.

    chain[j](n) carries sum over n > n_j > ... > n_r >= 1 of the inner
    product; iterate from the innermost index outwards.
    """
    if not indices:
        return Fraction(1)
    s = list(indices)
    r = len(s)
    # chain values for the tail starting at position j, as arrays over n.
    inner = [Fraction(1)] * (nterms + 1)  # position r+1: empty chain == 1
    for j in range(r - 1, 0, -1):
        acc = Fraction(0)
        nxt = [Fraction(0)] * (nterms + 1)
        for n in range(1, nterms + 1):
            nxt[n] = acc  # sum over m < n
            acc += inner[n] * Fraction(1, n ** s[j])
        inner = nxt
    total = Fraction(0)
    half = Fraction(1, 2)
    power = Fraction(1)
    for n in range(1, nterms + 1):
        power *= half
        total += power * inner[n] * Fraction(1, n ** s[0])
    return total


def mzv_fraction(indices: tuple[int, ...], nterms: int = 128) -> Fraction:
    """Exact-rational approximation of zeta(indices); error < ~2**-nterms."""
    ks = tuple(int(k) for k in indices)
    if not ks or ks[0] < 2 or any(k < 1 for k in ks):
        raise ValueError(f"inadmissible multiple zeta index {indices!r}")
    w = _word(ks)
    total = Fraction(0)
    for j in range(len(w) + 1):
        left = _tau(w[:j])
        right = w[j:]
        left_val = _li_half(_indices(left), nterms) if left else Fraction(1)
        right_val = _li_half(_indices(right), nterms) if right else Fraction(1)
        total += left_val * right_val
    return total


@lru_cache(maxsize=None)
def mzv(indices: tuple[int, ...]) -> float:
    """zeta(k1,...,km) as a float, accurate to full double precision."""
    return float(mzv_fraction(tuple(indices), nterms=96))


def mzv_naive(indices: tuple[int, ...], nmax: int) -> float:
    """Direct truncated nested sum; slow convergence, used as a cross-check."""
    ks = tuple(int(k) for k in indices)
    depth = len(ks)
    if depth == 1:
        return sum(1.0 / n ** ks[0] for n in range(1, nmax + 1))
    inner = [1.0] * (nmax + 1)
    for j in range(depth - 1, 0, -1):
        acc = 0.0
        nxt = [0.0] * (nmax + 1)
        for n in range(1, nmax + 1):
            nxt[n] = acc
            acc += inner[n] / n ** ks[j]
        inner = nxt
    return sum(inner[n] / n ** ks[0] for n in range(1, nmax + 1))
