"""Exact scalars with certified comparisons.

Three value modes, all immutable:

* ``Rat`` -- arbitrary-precision rational, always in lowest terms.
* ``Monomial`` -- a product of prime powers with rational exponents,
  kept exact under multiplication (rational exponents arise from the
  degree ratios of the layered instances, which involve factorials
  raised to the phase step).
* ``Interval`` -- a dyadic enclosure [lo, hi] with directed rounding.

Additions and comparisons of irrational monomials fall back to interval
enclosures; everything multiplicative stays closed-form.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

DEFAULT_PRECISION = 256
PRECISION_CAP = int(os.environ.get("MMDA_LAB_PRECISION_CAP", "4096"))

LT, EQ, GT, UNDECIDED = "<", "=", ">", "undecided"


class PrecisionCapExceeded(ArithmeticError):
    """Raised when a comparison stays undecided at the precision cap."""


# ---------------------------------------------------------------------------
# dyadic helpers


def floor_log2(x: Fraction) -> int:
    """Largest e with 2**e <= x, for x > 0."""
    if x <= 0:
        raise ValueError("floor_log2 needs a positive argument")
    n, d = x.numerator, x.denominator
    e = n.bit_length() - d.bit_length()
    # candidate is within 1 of the truth; fix up by exact comparison
    while _pow2_le(e + 1, n, d):
        e += 1
    while not _pow2_le(e, n, d):
        e -= 1
    return e


def _pow2_le(e: int, n: int, d: int) -> bool:
    # 2**e <= n/d ?
    if e >= 0:
        return (d << e) <= n
    return d <= (n << -e)


def round_dyadic(x: Fraction, prec: int, up: bool) -> Fraction:
    """Round x to a dyadic rational with ~prec significant bits.

    ``up=True`` rounds toward +inf, ``up=False`` toward -inf, so the
    result always brackets x from the requested side.
    """
    if x == 0:
        return Fraction(0)
    if x.denominator == 1 and abs(x.numerator).bit_length() <= prec:
        return x
    shift = prec - 1 - floor_log2(abs(x))
    if shift <= 0:
        scaled = Fraction(x.numerator, x.denominator * (1 << -shift)) if shift else x
        num = scaled.numerator // scaled.denominator
        if up and num * scaled.denominator != scaled.numerator:
            num += 1
        return Fraction(num * (1 << -shift)) if shift else Fraction(num)
    num = (x.numerator << shift) // x.denominator
    exact = (x.numerator << shift) % x.denominator == 0
    if up and not exact:
        num += 1
    return Fraction(num, 1 << shift)


# ---------------------------------------------------------------------------
# scalar base


class Scalar:
    """Common base for Rat / Monomial / Interval values."""

    def __mul__(self, other: "Scalar") -> "Scalar":
        return scalar_mul(self, other)

    def __add__(self, other: "Scalar") -> "Scalar":
        return scalar_add(self, other)

    def __sub__(self, other: "Scalar") -> "Scalar":
        return scalar_add(self, scalar_neg(other))

    def to_interval(self, prec: int = DEFAULT_PRECISION) -> "Interval":
        raise NotImplementedError

    def as_fraction(self) -> Fraction | None:
        """Exact rational value when one exists, else None."""
        return None

    def approx(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class Rat(Scalar):
    value: Fraction

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))

    def to_interval(self, prec: int = DEFAULT_PRECISION) -> "Interval":
        return Interval(round_dyadic(self.value, prec, up=False),
                        round_dyadic(self.value, prec, up=True), prec)

    def as_fraction(self) -> Fraction:
        return self.value

    def approx(self) -> float:
        return float(self.value)

    def __repr__(self):
        return f"Rat({self.value})"


ZERO = Rat(Fraction(0))
ONE = Rat(Fraction(1))


@dataclass(frozen=True)
class Interval(Scalar):
    """Closed enclosure [lo, hi]; bounds are finite Fractions."""

    lo: Fraction
    hi: Fraction
    prec: int = DEFAULT_PRECISION

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"inverted interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def sign(self) -> int | None:
        """-1, 0, +1 when certified, None when the enclosure straddles 0."""
        if self.hi < 0:
            return -1
        if self.lo > 0:
            return 1
        if self.lo == 0 == self.hi:
            return 0
        return None

    def contains(self, q) -> bool:
        q = Fraction(q)
        return self.lo <= q <= self.hi

    def to_interval(self, prec: int = DEFAULT_PRECISION) -> "Interval":
        return self

    def approx(self) -> float:
        return float((self.lo + self.hi) / 2)

    def round_out(self, prec: int | None = None) -> "Interval":
        p = prec or self.prec
        return Interval(round_dyadic(self.lo, p, up=False),
                        round_dyadic(self.hi, p, up=True), p)

    def __repr__(self):
        return f"Interval({float(self.lo):.6g}, {float(self.hi):.6g})"


def iv_add(a: Interval, b: Interval) -> Interval:
    p = max(a.prec, b.prec)
    return Interval(a.lo + b.lo, a.hi + b.hi, p).round_out()


def iv_neg(a: Interval) -> Interval:
    return Interval(-a.hi, -a.lo, a.prec)


def iv_mul(a: Interval, b: Interval) -> Interval:
    cands = (a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi)
    p = max(a.prec, b.prec)
    return Interval(min(cands), max(cands), p).round_out()


def iv_scale(a: Interval, q: Fraction) -> Interval:
    if q >= 0:
        return Interval(a.lo * q, a.hi * q, a.prec).round_out()
    return Interval(a.hi * q, a.lo * q, a.prec).round_out()


def iv_div(a: Interval, b: Interval) -> Interval:
    if b.lo <= 0 <= b.hi:
        raise ZeroDivisionError("division by an interval containing zero")
    cands = (a.lo / b.lo, a.lo / b.hi, a.hi / b.lo, a.hi / b.hi)
    p = max(a.prec, b.prec)
    return Interval(min(cands), max(cands), p).round_out()


# ---------------------------------------------------------------------------
# certified elementary enclosures (exact-rational series with explicit tails)


def _atanh_bounds(z: Fraction, prec: int) -> tuple[Fraction, Fraction]:
    """Bounds on atanh(z) for 0 <= z <= 1/2."""
    if z == 0:
        return Fraction(0), Fraction(0)
    tol = Fraction(1, 1 << (prec + 4))
    total = Fraction(0)
    term = z
    zz = z * z
    k = 0
    while term / (2 * k + 1) > tol:
        total += term / (2 * k + 1)
        term *= zz
        k += 1
        # keep intermediate sizes bounded
        total = round_dyadic(total, prec + 16, up=False)
        term = round_dyadic(term, prec + 16, up=True)
    # remainder: sum_{j>=k} z^(2j+1)/(2j+1) <= term/( (2k+1) (1-z^2) )
    rem = term / ((2 * k + 1) * (1 - zz))
    return total, total + rem + tol * (k + 2)


@lru_cache(maxsize=None)
def _ln2_bounds(prec: int) -> tuple[Fraction, Fraction]:
    lo, hi = _atanh_bounds(Fraction(1, 3), prec)
    return 2 * lo, 2 * hi


def log2_interval(q: Fraction, prec: int = DEFAULT_PRECISION) -> Interval:
    """Certified enclosure of log2(q) for a positive rational q."""
    return _log2_interval_cached(Fraction(q), prec)


@lru_cache(maxsize=4096)
def _log2_interval_cached(q: Fraction, prec: int) -> Interval:
    if q <= 0:
        raise ValueError("log2 of a non-positive value")
    e = floor_log2(q)
    r = q / Fraction(1 << e) if e >= 0 else q * Fraction(1 << -e)
    # r in [1, 2); ln r = 2 atanh((r-1)/(r+1)), z in [0, 1/3]
    z = (r - 1) / (r + 1)
    a_lo, a_hi = _atanh_bounds(round_dyadic(z, prec + 16, up=False), prec)
    _, a_hi2 = _atanh_bounds(round_dyadic(z, prec + 16, up=True), prec)
    a_hi = max(a_hi, a_hi2)
    l2_lo, l2_hi = _ln2_bounds(prec)
    # log2(q) = e + 2*atanh(z)/ln2, the fraction being >= 0
    lo = e + (2 * a_lo) / l2_hi
    hi = e + (2 * a_hi) / l2_lo
    return Interval(lo, hi, prec).round_out()


def _exp_bounds(x: Fraction, prec: int) -> tuple[Fraction, Fraction]:
    """Bounds on exp(x) for |x| <= 1."""
    if abs(x) > 1:
        raise ValueError("reduced exponential argument expected")
    tol = Fraction(1, 1 << (prec + 4))
    total = Fraction(1)
    term = Fraction(1)
    k = 0
    while True:
        k += 1
        term = term * x / k
        total += term
        if abs(term) <= tol and k >= 2:
            break
    # |remainder| <= 2*|term| once |x|/(k+1) <= 1/2
    rem = 2 * abs(term) + tol
    return total - rem, total + rem


def exp2_point_bounds(x: Fraction, prec: int = DEFAULT_PRECISION) -> tuple[Fraction, Fraction]:
    """Bounds on 2**x for rational x."""
    n = math.floor(x)
    f = x - n  # in [0, 1)
    l2_lo, l2_hi = _ln2_bounds(prec)
    e_lo, _ = _exp_bounds(round_dyadic(f * l2_lo, prec + 8, up=False), prec)
    _, e_hi = _exp_bounds(round_dyadic(f * l2_hi, prec + 8, up=True), prec)
    scale = Fraction(1 << n) if n >= 0 else Fraction(1, 1 << -n)
    return e_lo * scale, e_hi * scale


def exp2_interval(x: Interval, prec: int | None = None) -> Interval:
    p = prec or x.prec
    lo, _ = exp2_point_bounds(x.lo, p)
    _, hi = exp2_point_bounds(x.hi, p)
    return Interval(lo, hi, p).round_out()


def entropy_interval(x: Fraction, prec: int = DEFAULT_PRECISION) -> Interval:
    """Enclosure of h(x) = -x log2 x - (1-x) log2(1-x), with h(0)=h(1)=0."""
    x = Fraction(x)
    if not 0 <= x <= 1:
        raise ValueError("entropy argument must lie in [0, 1]")
    if x == 0 or x == 1:
        return Interval(Fraction(0), Fraction(0), prec)
    t1 = iv_scale(log2_interval(x, prec), -x)
    t2 = iv_scale(log2_interval(1 - x, prec), -(1 - x))
    return iv_add(t1, t2)


@dataclass(frozen=True)
class EntropyValue:
    """Entropy of a Bernoulli(argument) variable, with its enclosure."""

    argument: Fraction
    value: Interval


def entropy_value(x, prec: int = DEFAULT_PRECISION) -> EntropyValue:
    x = Fraction(x)
    return EntropyValue(x, entropy_interval(x, prec))


# ---------------------------------------------------------------------------
# monomials over prime bases


@lru_cache(maxsize=None)
def _primes_upto(n: int) -> tuple[int, ...]:
    if n < 2:
        return ()
    sieve = bytearray(b"\x01") * (n + 1)
    sieve[0] = sieve[1] = 0
    for p in range(2, int(n ** 0.5) + 1):
        if sieve[p]:
            sieve[p * p:: p] = b"\x00" * len(range(p * p, n + 1, p))
    return tuple(i for i, v in enumerate(sieve) if v)


def _factor_int(n: int) -> dict[int, int]:
    if n <= 0:
        raise ValueError("monomials represent positive values only")
    out: dict[int, int] = {}
    m = n
    p = 2
    while p * p <= m:
        while m % p == 0:
            out[p] = out.get(p, 0) + 1
            m //= p
        p += 1 if p == 2 else 2
    if m > 1:
        out[m] = out.get(m, 0) + 1
    return out


def factorial_exponents(n: int) -> dict[int, int]:
    """Prime factorization of n! via Legendre's formula."""
    out = {}
    for p in _primes_upto(n):
        e, q = 0, n
        while q:
            q //= p
            e += q
        out[p] = e
    return out


class Monomial(Scalar):
    """Finite product of prime powers with rational exponents (value > 0)."""

    __slots__ = ("exponents",)

    def __init__(self, exponents: dict[int, Fraction] | None = None):
        exps = {}
        for base, e in (exponents or {}).items():
            e = Fraction(e)
            if e == 0:
                continue
            if base <= 1:
                raise ValueError("monomial bases must exceed 1")
            for p, k in _factor_int(base).items():
                cur = exps.get(p, Fraction(0)) + k * e
                if cur:
                    exps[p] = cur
                elif p in exps:
                    del exps[p]
        object.__setattr__(self, "exponents", tuple(sorted(exps.items())))

    def __setattr__(self, *a):  # immutable
        raise AttributeError("Monomial is immutable")

    # construction helpers ---------------------------------------------
    @classmethod
    def one(cls) -> "Monomial":
        return cls({})

    @classmethod
    def from_int(cls, n: int) -> "Monomial":
        return cls({p: Fraction(e) for p, e in _factor_int(n).items()})

    @classmethod
    def from_fraction(cls, q: Fraction) -> "Monomial":
        q = Fraction(q)
        num = _factor_int(q.numerator)
        den = _factor_int(q.denominator)
        exps = {p: Fraction(e) for p, e in num.items()}
        for p, e in den.items():
            exps[p] = exps.get(p, Fraction(0)) - e
        return cls(exps)

    @classmethod
    def from_factorial(cls, n: int) -> "Monomial":
        return cls({p: Fraction(e) for p, e in factorial_exponents(n).items()})

    @classmethod
    def from_binomial(cls, n: int, k: int) -> "Monomial":
        if not 0 <= k <= n:
            raise ValueError("binomial out of range")
        exps = {p: Fraction(e) for p, e in factorial_exponents(n).items()}
        for p, e in factorial_exponents(k).items():
            exps[p] = exps.get(p, Fraction(0)) - e
        for p, e in factorial_exponents(n - k).items():
            exps[p] = exps.get(p, Fraction(0)) - e
        return cls(exps)

    # algebra ------------------------------------------------------------
    def mul(self, other: "Monomial") -> "Monomial":
        exps = dict(self.exponents)
        for p, e in other.exponents:
            exps[p] = exps.get(p, Fraction(0)) + e
        return Monomial({p: e for p, e in exps.items()})

    def div(self, other: "Monomial") -> "Monomial":
        return self.mul(other.pow(Fraction(-1)))

    def pow(self, q) -> "Monomial":
        q = Fraction(q)
        return Monomial({p: e * q for p, e in self.exponents})

    # conversions ---------------------------------------------------------
    @property
    def is_rational(self) -> bool:
        return all(e.denominator == 1 for _, e in self.exponents)

    def as_fraction(self) -> Fraction | None:
        if not self.is_rational:
            return None
        num = den = 1
        for p, e in self.exponents:
            if e > 0:
                num *= p ** int(e)
            else:
                den *= p ** int(-e)
        return Fraction(num, den)

    def log2_interval(self, prec: int = DEFAULT_PRECISION) -> Interval:
        acc = Interval(Fraction(0), Fraction(0), prec)
        for p, e in self.exponents:
            acc = iv_add(acc, iv_scale(log2_interval(Fraction(p), prec), e))
        return acc

    def to_interval(self, prec: int = DEFAULT_PRECISION) -> Interval:
        f = self.as_fraction()
        if f is not None:
            return Rat(f).to_interval(prec)
        return exp2_interval(self.log2_interval(prec), prec)

    def approx(self) -> float:
        return 2.0 ** sum(float(e) * math.log2(p) for p, e in self.exponents)

    def __eq__(self, other):
        return isinstance(other, Monomial) and self.exponents == other.exponents

    def __hash__(self):
        return hash(self.exponents)

    def __repr__(self):
        if not self.exponents:
            return "Monomial(1)"
        body = "*".join(f"{p}^{e}" for p, e in self.exponents)
        return f"Monomial({body})"


MONO_ONE = Monomial.one()


# ---------------------------------------------------------------------------
# public operations


def scalar_neg(a: Scalar) -> Scalar:
    if isinstance(a, Rat):
        return Rat(-a.value)
    if isinstance(a, Interval):
        return iv_neg(a)
    raise TypeError("cannot negate a monomial exactly; convert first")


def scalar_mul(a: Scalar, b: Scalar) -> Scalar:
    """Exact within a mode, certified interval across modes."""
    if isinstance(a, Rat) and isinstance(b, Rat):
        return Rat(a.value * b.value)
    if isinstance(a, Monomial) and isinstance(b, Monomial):
        return a.mul(b)
    return iv_mul(a.to_interval(), b.to_interval())


def scalar_add(a: Scalar, b: Scalar) -> Scalar:
    if isinstance(a, Rat) and isinstance(b, Rat):
        return Rat(a.value + b.value)
    fa, fb = a.as_fraction(), b.as_fraction()
    if fa is not None and fb is not None:
        return Rat(fa + fb)
    return iv_add(a.to_interval(), b.to_interval())


def as_scalar(x) -> Scalar:
    if isinstance(x, Scalar):
        return x
    if isinstance(x, (int, Fraction)):
        return Rat(Fraction(x))
    raise TypeError(f"cannot coerce {type(x)!r} to Scalar")


def compare_certified(a, b, prec: int = DEFAULT_PRECISION,
                      cap: int = PRECISION_CAP) -> str:
    """Certified ordering of two scalars.

    Exact operands escalate precision internally (doubling up to ``cap``,
    then raising :class:`PrecisionCapExceeded`); a comparison involving an
    opaque interval is answered at its stored precision and may return
    ``"undecided"``.
    """
    a, b = as_scalar(a), as_scalar(b)
    if isinstance(a, Rat) and isinstance(b, Rat):
        return LT if a.value < b.value else GT if a.value > b.value else EQ
    if isinstance(a, Interval) or isinstance(b, Interval):
        ia, ib = a.to_interval(), b.to_interval()
        if ia.hi < ib.lo:
            return LT
        if ia.lo > ib.hi:
            return GT
        if ia.lo == ia.hi == ib.lo == ib.hi:
            return EQ
        return UNDECIDED

    # exact operands, at least one monomial
    if isinstance(a, Monomial) and isinstance(b, Monomial):
        if a.exponents == b.exponents:
            return EQ
        fa, fb = a.as_fraction(), b.as_fraction()
        if fa is not None and fb is not None:
            return LT if fa < fb else GT
        diff = lambda p: iv_add(a.log2_interval(p), iv_neg(b.log2_interval(p)))
    else:
        mono, rat, flip = (a, b, False) if isinstance(a, Monomial) else (b, a, True)
        fm = mono.as_fraction()
        if fm is not None:
            r = LT if fm < rat.value else GT if fm > rat.value else EQ
            return {LT: GT, GT: LT, EQ: EQ}[r] if flip else r
        if rat.value <= 0:
            return GT if not flip else LT  # monomials are positive
        diff = lambda p: iv_add(mono.log2_interval(p),
                                iv_neg(log2_interval(rat.value, p)))
        if flip:
            inner = diff
            diff = lambda p: iv_neg(inner(p))

    # a sign certified at low precision is still certified; start cheap
    p = min(64, prec)
    while True:
        s = diff(p).sign()
        if s is not None:
            return LT if s < 0 else GT if s > 0 else EQ
        if p >= cap:
            raise PrecisionCapExceeded(f"comparison undecided at {cap} bits")
        p = min(2 * p, cap) if p >= prec else prec


def log2_binomial(n: int, k: int, prec: int = DEFAULT_PRECISION,
                  tol: Fraction | None = None) -> Interval:
    """Certified enclosure of log2(C(n, k)), computed from the exact value."""
    if k < 0 or n < 0 or k > n:
        raise ValueError(f"binomial C({n},{k}) out of domain")
    c = math.comb(n, k)
    if c == 1:
        return Interval(Fraction(0), Fraction(0), prec)
    iv = log2_interval(Fraction(c), prec)
    if tol is not None:
        p = prec
        while iv.width > tol:
            p = 2 * p
            if p > PRECISION_CAP:
                raise PrecisionCapExceeded("log2_binomial tolerance unreachable")
            iv = log2_interval(Fraction(c), p)
    return iv


def scalar_to_json(x: Scalar | Fraction | int) -> dict:
    """Exact string form plus a decimal approximation."""
    x = as_scalar(x)
    if isinstance(x, Rat):
        return {"exact": str(x.value), "approx": float(x.value)}
    if isinstance(x, Monomial):
        return {"monomial": {str(p): str(e) for p, e in x.exponents},
                "approx": x.approx()}
    return {"lo": str(x.lo), "hi": str(x.hi), "approx": x.approx()}
