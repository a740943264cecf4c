"""Exact bound arithmetic: geometric sums, level translations, power towers.

The decision algorithms convert quantifier rank n (or block count r with
block width q) into the closure depth they must explore:

    t_rank(k, 0) = 0          t_rank(k, n+1) = geom_sum(k, t_rank(k, n)+1) + t_rank(k, n) + 1
    t_block(k, 0, q) = 0      t_block(k, n+1, q) = q*geom_sum(k, t_block(k, n, q)+1) + t_block(k, n, q) + 1

All arithmetic is exact (Python integers / fractions); nothing here uses
floating point.  Values growing past ``Caps.max_bits`` bits are carried as
certified log2 intervals so that comparisons against power towers remain
decidable without materializing the numbers.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .runtime import Caps, CapExceeded, DEFAULT_CAPS

__all__ = [
    "geom_sum", "t_rank", "t_block", "supexp", "tower_exponent",
    "tower_exponent_block", "bound_check", "t1_rank_closed", "t1_block_closed",
]


def geom_sum(k: int, n: int) -> int:
    """Sum of k**i for i in 0..n, with 0**0 = 1 (so geom_sum(0, n) == 1)."""
    if k < 0 or n < 0:
        raise ValueError("geom_sum needs k, n >= 0")
    if k == 1:
        return n + 1
    return (k ** (n + 1) - 1) // (k - 1)


def _next_level(k: int, q: int, t: int) -> int:
    return q * geom_sum(k, t + 1) + t + 1


def _bits_estimate(k: int, q: int, t: int) -> int:
    # upper estimate of the bit size of _next_level(k, q, t)
    if k <= 1:
        return (q * (t + 2) + t + 1).bit_length()
    return (t + 2) * k.bit_length() + q.bit_length() + 2


def t_rank(k: int, n: int, caps: Caps = DEFAULT_CAPS) -> int:
    """Closure depth sufficient for rank-n elementary equivalence."""
    return t_block(k, n, 1, caps)


def t_block(k: int, n: int, q: int, caps: Caps = DEFAULT_CAPS) -> int:
    """Closure depth sufficient for n alternating blocks of width at most q."""
    if k < 0 or n < 0 or q < 0:
        raise ValueError("t_block needs k, n, q >= 0")
    if n > 0 and q < 1:
        raise ValueError("t_block needs q >= 1 when n >= 1")
    t = 0
    for _ in range(n):
        if _bits_estimate(k, q, t) > caps.max_bits:
            raise CapExceeded(f"t_block({k}, {n}, {q}) exceeds {caps.max_bits} bits")
        t = _next_level(k, q, t)
    return t


def t1_rank_closed(n: int) -> int:
    """Closed form of t_rank(1, n): 3*(2**n - 1)."""
    return 3 * (2 ** n - 1)


def t1_block_closed(n: int, q: int) -> Fraction:
    """Closed form of t_block(1, n, q): (2q+1)*((q+1)**n - 1)/q."""
    return Fraction((2 * q + 1) * ((q + 1) ** n - 1), q)


def supexp(x: int, n: int, caps: Caps = DEFAULT_CAPS) -> int:
    """Iterated exponential: supexp(x, 0) = x, supexp(x, n+1) = 2**supexp(x, n)."""
    if x < 0 or n < 0:
        raise ValueError("supexp needs x, n >= 0")
    v = x
    for _ in range(n):
        if v > caps.max_bits:
            raise CapExceeded(f"supexp({x}, {n}) exceeds {caps.max_bits} bits")
        v = 1 << v
    return v


# ---------------------------------------------------------------------------
# Exact integer ceilings of log-expressions

def _log2_interval(num: int, den: int = 1, prec: int = 64) -> tuple[Fraction, Fraction]:
    """Certified bounds lo <= log2(num/den) <= hi with hi - lo <= 2/prec."""
    if num <= 0 or den <= 0:
        raise ValueError("log2 of a non-positive value")
    a = num ** prec
    b = den ** prec
    diff = a.bit_length() - b.bit_length()
    return Fraction(diff - 1, prec), Fraction(diff + 1, prec)


def _frac_log2_interval(fr: Fraction, prec: int) -> tuple[Fraction, Fraction]:
    return _log2_interval(fr.numerator, fr.denominator, prec)


def _ceil_frac(fr: Fraction) -> int:
    return -((-fr.numerator) // fr.denominator)


def _exact_ceil(make_interval) -> int:
    """Ceiling of a real number given by shrinking rational intervals."""
    prec = 64
    while prec <= 1 << 22:
        lo, hi = make_interval(prec)
        clo, chi = _ceil_frac(lo), _ceil_frac(hi)
        if clo == chi:
            return clo
        prec *= 4
    raise CapExceeded("log expression too close to an integer to resolve")


def tower_exponent(k: int) -> int:
    """Least integer >= (k+3)*log2(k) + log2(log2(k)) + 2 (needs k >= 2)."""
    if k < 2:
        raise ValueError("tower exponent defined for k >= 2")
    if k & (k - 1) == 0:
        e = k.bit_length() - 1
        if e & (e - 1) == 0:
            return (k + 3) * e + (e.bit_length() - 1) + 2

        def interval(prec):
            lo, hi = _log2_interval(e, 1, prec)
            return ((k + 3) * e + 2 + lo, (k + 3) * e + 2 + hi)

        return _exact_ceil(interval)

    def interval(prec):
        llo, lhi = _log2_interval(k, 1, prec)
        # log2(log2 k) from the rational bounds on log2 k
        ilo, _ = _frac_log2_interval(llo, prec)
        _, ihi = _frac_log2_interval(lhi, prec)
        return ((k + 3) * llo + ilo + 2, (k + 3) * lhi + ihi + 2)

    return _exact_ceil(interval)


def tower_exponent_block(k: int, q: int) -> int:
    """Least integer >= 4*q*k*log2(k) (needs k >= 2, q >= 1)."""
    if k < 2 or q < 1:
        raise ValueError("block tower exponent defined for k >= 2, q >= 1")
    if k & (k - 1) == 0:
        return 4 * q * k * (k.bit_length() - 1)

    def interval(prec):
        lo, hi = _log2_interval(k, 1, prec)
        return (4 * q * k * lo, 4 * q * k * hi)

    return _exact_ceil(interval)


# ---------------------------------------------------------------------------
# Tower comparisons without materializing either side

@dataclass(frozen=True)
class _LogRange:
    """Certified bounds on log2 of a positive integer too large to hold."""
    lo: Fraction
    hi: Fraction


def _t_block_ranged(k: int, n: int, q: int, caps: Caps) -> int | _LogRange:
    """t_block value, escaping to log2 bounds past the bit cap."""
    t: int | _LogRange = 0
    klo, khi = _log2_interval(k, 1, 4096)
    qlo_p1, qhi_p1 = _log2_interval(q + 1, 1, 4096)
    qlo, qhi = (Fraction(0), Fraction(0)) if q == 1 else _log2_interval(q, 1, 4096)
    for _ in range(n):
        if isinstance(t, int):
            if _bits_estimate(k, q, t) <= caps.max_bits:
                t = _next_level(k, q, t)
                continue
            # q*geom_sum(k, t+1) + t + 1 lies between k**(t+1) and (q+1)*k**(t+2)
            t = _LogRange(lo=(t + 1) * klo + qlo, hi=(t + 2) * khi + qhi_p1)
        else:
            # exponentiating a log-range needs 2**t.lo, beyond exact reach
            raise CapExceeded("nested bound too large to track even in log space")
    return t


def bound_check(k: int, n: int, q: int | None = None, caps: Caps = DEFAULT_CAPS) -> bool:
    """Check the growth bound: the level translation stays below a power tower.

    Rank form (q is None): t_rank(k, n) <= supexp(tower_exponent(k), n-1).
    Block form: t_block(k, n, q) <= supexp(tower_exponent_block(k, q), n-1).
    The exponents use integer ceilings of the underlying log expressions.
    Requires k >= 2 and n >= 1.
    """
    if k < 2:
        raise ValueError("bound_check requires k >= 2")
    if n < 1:
        raise ValueError("bound_check requires n >= 1")
    if q is None:
        x = tower_exponent(k)
        t = _t_block_ranged(k, n, 1, caps)
    else:
        x = tower_exponent_block(k, q)
        t = _t_block_ranged(k, n, q, caps)
    return _leq_tower(t, x, n - 1, caps)


def _leq_tower(t: int | _LogRange, x: int, height: int, caps: Caps) -> bool:
    """Decide t <= supexp(x, height)."""
    while height > 0 and isinstance(t, int):
        if t <= 1:
            return True
        # t <= 2**y  iff  bit_length(t-1) <= y
        t = (t - 1).bit_length()
        height -= 1
    if isinstance(t, int):
        return t <= x
    if height == 0:
        # log2(x) lies in [bit_length(x)-1, bit_length(x))
        if t.lo > x.bit_length():
            return False
        if t.hi <= x.bit_length() - 1:
            return True
        raise CapExceeded("bound comparison within log-interval uncertainty")
    y = supexp(x, height - 1, caps)  # may itself raise CapExceeded
    if t.hi <= y:
        return True
    if t.lo > y:
        return False
    raise CapExceeded("bound comparison within log-interval uncertainty")
