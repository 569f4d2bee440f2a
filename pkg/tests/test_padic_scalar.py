from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from pink_forge.errors import DomainError, PrecisionMismatch
from pink_forge.padic_scalar import (
    PadicScalar,
    exp_unit,
    is_prime,
    log_unit,
    teichmuller,
    valuation,
    vee,
)

PRIMES = [2, 3, 5, 7]


def scalars(p, m):
    return st.integers(0, p**m - 1).map(lambda r: PadicScalar(p, m, r))


def log_oracle(u, p, m):
    """log(u) mod p^m via exact rationals, summing until terms are invisible mod p^m."""
    t = Fraction(u - 1)
    total = Fraction(0)
    for k in range(1, 40 * m + 40):
        total += (-1) ** (k - 1) * t**k / k
    num, den = total.numerator, total.denominator
    # den may carry powers of p; the exact sum is a p-adic integer, so reduce by hand
    q = p ** (m + 60)
    return num * pow(den, -1, q) % p**m if den % p else None


def test_valuation_examples():
    assert valuation(PadicScalar(5, 4, 50)) == 2
    assert valuation(PadicScalar(5, 4, 0)) == 4
    assert valuation(PadicScalar(2, 6, 12)) == 2


def test_construction_checks_prime_and_reduces():
    with pytest.raises(DomainError):
        PadicScalar(4, 2, 1)
    with pytest.raises(DomainError):
        PadicScalar(5, 0, 1)
    assert PadicScalar(5, 2, -1).residue == 24
    assert PadicScalar.of(5, 2, 26).residue == 1
    assert vee(2) == 1 and vee(7) == 0
    assert [p for p in range(20) if is_prime(p)] == [2, 3, 5, 7, 11, 13, 17, 19]


def test_mixed_precision_is_an_error():
    with pytest.raises(PrecisionMismatch):
        PadicScalar(5, 2, 1) + PadicScalar(5, 3, 1)
    assert PadicScalar(5, 3, 126).truncate(2) == PadicScalar(5, 2, 1)
    with pytest.raises(DomainError):
        PadicScalar(5, 2, 1).truncate(3)


def test_log_examples():
    assert log_unit(PadicScalar(5, 3, 6)).residue == 55
    assert log_unit(PadicScalar(5, 3, 1)).residue == 0
    r = log_unit(PadicScalar(2, 6, 5))
    assert valuation(r) == 2
    with pytest.raises(DomainError):
        log_unit(PadicScalar(5, 3, 2))
    with pytest.raises(DomainError):
        log_unit(PadicScalar(2, 6, 3))


def test_log_matches_rational_oracle():
    # 1 + 5 and 1 + 25: the rational partial sums converge 5-adically
    for u, p, m in [(6, 5, 3), (26, 5, 4), (4, 3, 5), (9, 2, 6), (8, 7, 3)]:
        assert log_unit(PadicScalar(p, m, u)).residue == log_oracle(u, p, m)


def test_exp_examples():
    assert exp_unit(PadicScalar(5, 3, 0)).residue == 1
    assert exp_unit(PadicScalar(5, 3, 55)).residue == 6
    u = exp_unit(PadicScalar(2, 5, 4))
    assert u.residue % 4 == 1 and valuation(u - 1) == 2
    with pytest.raises(DomainError):
        exp_unit(PadicScalar(2, 5, 2))
    with pytest.raises(DomainError):
        exp_unit(PadicScalar(5, 3, 1))


def test_teichmuller_examples():
    assert teichmuller(PadicScalar(5, 2, 2)).residue == 7
    assert teichmuller(PadicScalar(5, 4, 1)).residue == 1
    w = teichmuller(PadicScalar(7, 3, 3))
    assert teichmuller(w) == w
    assert teichmuller(PadicScalar(2, 5, 7)).residue == 1
    with pytest.raises(DomainError):
        teichmuller(PadicScalar(5, 2, 10))


@given(st.sampled_from(PRIMES), st.integers(1, 8), st.data())
def test_ring_axioms(p, m, data):
    x, y, z = (data.draw(scalars(p, m)) for _ in range(3))
    assert (x + y) + z == x + (y + z)
    assert (x * y) * z == x * (y * z)
    assert x * (y + z) == x * y + x * z
    assert x - x == PadicScalar(p, m, 0)


@given(st.sampled_from(PRIMES), st.integers(1, 10), st.data())
def test_valuation_multiplicative_below_cap(p, m, data):
    x, y = data.draw(scalars(p, m)), data.draw(scalars(p, m))
    assert valuation(x * y) == min(m, valuation(x) + valuation(y))


@settings(max_examples=200)
@given(st.sampled_from(PRIMES), st.integers(2, 12), st.data())
def test_log_exp_round_trip(p, m, data):
    v = vee(p)
    assume(m > 1 + v)
    t = PadicScalar(p, m, p ** (1 + v) * data.draw(st.integers(0, p**m)))
    assert log_unit(exp_unit(t)) == t
    u = PadicScalar(p, m, 1) + t
    assert exp_unit(log_unit(u)) == u
    assert valuation(log_unit(u)) == valuation(t)
    assert valuation(exp_unit(t) - 1) == valuation(t)


@given(st.sampled_from([3, 5, 7, 11]), st.integers(1, 6), st.data())
def test_teichmuller_multiplicative(p, m, data):
    x = data.draw(st.integers(1, p**m - 1).filter(lambda r: r % p))
    y = data.draw(st.integers(1, p**m - 1).filter(lambda r: r % p))
    X, Y = PadicScalar(p, m, x), PadicScalar(p, m, y)
    w = teichmuller(X)
    assert w**p == w
    assert (w - X).residue % p == 0
    assert teichmuller(X * Y) == w * teichmuller(Y)
