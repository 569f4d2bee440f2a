"""Truncated l-adic integers: elements of Z/l^m carrying (l, m)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cache

from .errors import DomainError, PrecisionMismatch

# l^m must stay below this bound so products of two residues fit in 128 bits
# and, more importantly, so the numpy group engine can multiply residues in int64.
MODULUS_CAP = 2**61


@cache
def is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p % 2 == 0:
        return p == 2
    return all(p % d for d in range(3, math.isqrt(p) + 1, 2))


def check_prime_precision(prime: int, precision: int) -> int:
    """Validate (l, m) and return the modulus l^m."""
    if not is_prime(prime):
        raise DomainError(f"{prime} is not prime")
    if precision < 1:
        raise DomainError("precision must be at least 1")
    q = prime**precision
    if q >= MODULUS_CAP:
        raise DomainError(f"{prime}^{precision} exceeds the supported modulus cap 2^61")
    return q


def vl(x: int, prime: int, cap: int) -> int:
    """l-adic valuation of the integer x, capped at `cap` (x = 0 gives cap)."""
    if x == 0:
        return cap
    e = 0
    while e < cap and x % prime == 0:
        x //= prime
        e += 1
    return e


def vee(prime: int) -> int:
    """The constant v: 1 for l = 2, 0 otherwise."""
    return 1 if prime == 2 else 0


@dataclass(frozen=True, slots=True)
class PadicScalar:
    prime: int
    precision: int
    residue: int

    def __post_init__(self):
        q = check_prime_precision(self.prime, self.precision)
        if not 0 <= self.residue < q:
            object.__setattr__(self, "residue", self.residue % q)

    @classmethod
    def of(cls, prime: int, precision: int, value: int) -> PadicScalar:
        return cls(prime, precision, value % prime**precision)

    @property
    def modulus(self) -> int:
        return self.prime**self.precision

    @property
    def v(self) -> int:
        return vee(self.prime)

    def truncate(self, precision: int) -> PadicScalar:
        """Coerce to a smaller precision (the only sanctioned precision change)."""
        if precision > self.precision:
            raise DomainError("cannot raise precision of a truncated l-adic integer")
        return PadicScalar.of(self.prime, precision, self.residue)

    def _coerce(self, other) -> int:
        if isinstance(other, PadicScalar):
            if (other.prime, other.precision) != (self.prime, self.precision):
                raise PrecisionMismatch(
                    f"({self.prime},{self.precision}) vs ({other.prime},{other.precision})"
                )
            return other.residue
        if isinstance(other, int):
            return other
        return NotImplemented

    def _new(self, value: int) -> PadicScalar:
        return PadicScalar(self.prime, self.precision, value % self.modulus)

    def __add__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._new(self.residue + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._new(self.residue - o)

    def __rsub__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._new(o - self.residue)

    def __mul__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._new(self.residue * o)

    __rmul__ = __mul__

    def __neg__(self):
        return self._new(-self.residue)

    def __pow__(self, e: int):
        if e < 0:
            return self.inverse() ** (-e)
        return self._new(pow(self.residue, e, self.modulus))

    def inverse(self) -> PadicScalar:
        if self.residue % self.prime == 0:
            raise DomainError(f"{self.residue} is not a unit mod {self.prime}")
        return self._new(pow(self.residue, -1, self.modulus))

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self * self._new(o).inverse()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self._new(o) * self.inverse()

    def __eq__(self, other):
        if isinstance(other, PadicScalar):
            return (self.prime, self.precision, self.residue) == (
                other.prime,
                other.precision,
                other.residue,
            )
        if isinstance(other, int):
            return self.residue == other % self.modulus
        return NotImplemented

    def __hash__(self):
        return hash((self.prime, self.precision, self.residue))

    def __int__(self):
        return self.residue

    def __repr__(self):
        return f"{self.residue} (mod {self.prime}^{self.precision})"

    def is_unit(self) -> bool:
        return self.residue % self.prime != 0


def valuation(x: PadicScalar) -> int:
    return vl(x.residue, x.prime, x.precision)


def _series_terms(prime: int, precision: int, vt: int, factorial: bool) -> int:
    """Smallest K such that every term t^k/k (or t^k/k!) with k > K vanishes mod l^m.

    Term k of the log series has valuation at least k*vt - floor(log_l k); for exp
    it is at least k*vt - floor((k-1)/(l-1)). Both lower bounds are nondecreasing
    in k when vt >= 1, so the first k reaching m works for all later k too.
    """
    k = 1
    while True:
        if factorial:
            bound = k * vt - (k - 1) // (prime - 1)
        else:
            bound = k * vt - ilog(k, prime)
        if bound >= precision:
            return k
        k += 1


def ilog(k: int, prime: int) -> int:
    """floor(log_l k) for k >= 1, in exact integer arithmetic."""
    e = 0
    while k >= prime:
        k //= prime
        e += 1
    return e


def log_series(t: int, prime: int, precision: int, vt: int) -> int:
    """log(1 + t) mod l^m for an integer t of valuation vt >= 1 + v."""
    if vt >= precision:
        return 0
    n_terms = _series_terms(prime, precision, vt, factorial=False)
    guard = ilog(n_terms, prime) + 2
    work = prime ** (precision + guard)
    q = prime**precision
    total = 0
    power = 1
    for k in range(1, n_terms + 1):
        power = power * t % work
        e = vl(k, prime, 64)
        unit = k // prime**e
        term = (power // prime**e) * pow(unit, -1, work) % work
        total += term if k % 2 else -term
    return total % q


def exp_series(t: int, prime: int, precision: int, vt: int) -> int:
    """exp(t) mod l^m for an integer t of valuation vt >= 1 + v."""
    if vt >= precision:
        return 1
    n_terms = _series_terms(prime, precision, vt, factorial=True)
    guard = (n_terms - 1) // (prime - 1) + 2
    work = prime ** (precision + guard)
    q = prime**precision
    total = 1
    power = 1
    fact_e = 0
    fact_unit = 1
    for k in range(1, n_terms + 1):
        power = power * t % work
        e = vl(k, prime, 64)
        fact_e += e
        fact_unit = fact_unit * (k // prime**e) % work
        total += (power // prime**fact_e) * pow(fact_unit, -1, work)
    return total % q


def log_unit(u: PadicScalar) -> PadicScalar:
    """l-adic logarithm on 1 + l^(1+v) Z_l."""
    t = (u.residue - 1) % u.modulus
    vt = vl(t, u.prime, u.precision)
    if vt < 1 + u.v:
        raise DomainError(f"log_unit needs u = 1 mod {u.prime}^{1 + u.v}")
    return PadicScalar(u.prime, u.precision, log_series(t, u.prime, u.precision, vt))


def exp_unit(t: PadicScalar) -> PadicScalar:
    """l-adic exponential on l^(1+v) Z_l."""
    vt = valuation(t)
    if vt < 1 + t.v:
        raise DomainError(f"exp_unit needs valuation at least {1 + t.v}")
    return PadicScalar(t.prime, t.precision, exp_series(t.residue, t.prime, t.precision, vt))


def teichmuller(x: PadicScalar) -> PadicScalar:
    """Multiplicative representative of x mod l, found by iterating x -> x^l."""
    if not x.is_unit():
        raise DomainError("teichmuller needs a unit")
    if x.prime == 2:
        # F_2 has a single unit and its multiplicative lift is 1.
        return PadicScalar(2, x.precision, 1)
    q = x.modulus
    y = x.residue
    for _ in range(x.precision + 1):
        z = pow(y, x.prime, q)
        if z == y:
            return PadicScalar(x.prime, x.precision, y)
        y = z
    raise AssertionError("Teichmuller iteration did not stabilize")  # pragma: no cover
