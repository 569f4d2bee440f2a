"""Submodules of (Z/l^m)^d in Howell normal form."""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, LemmaViolation, PrecisionMismatch
from .padic_matrix import D, L, R, conjugation_operator
from .padic_scalar import check_prime_precision, vee, vl


def _howell(rows: list[list[int]], prime: int, precision: int, dim: int) -> tuple[tuple[int, ...], ...]:
    q = prime**precision
    pool = [[x % q for x in r] for r in rows]
    pool = [r for r in pool if any(r)]
    basis: list[list[int]] = []
    pivots: list[tuple[int, int]] = []  # (column, exponent)
    for col in range(dim):
        if not pool:
            break
        vals = [vl(r[col], prime, precision) for r in pool]
        best = min(range(len(pool)), key=lambda i: vals[i])
        e = vals[best]
        if e >= precision:
            continue
        piv = pool.pop(best)
        unit = piv[col] // prime**e
        inv = pow(unit, -1, q)
        piv = [x * inv % q for x in piv]
        pe = prime**e
        rest = []
        for r in pool:
            if r[col]:
                f = r[col] // pe
                r = [(x - f * y) % q for x, y in zip(r, piv)]
            if any(r):
                rest.append(r)
        # l^(m-e) * pivot row has a zero at `col`; the Howell property needs it kept
        if e > 0:
            shifted = [x * prime ** (precision - e) % q for x in piv]
            if any(shifted):
                rest.append(shifted)
        pool = rest
        basis.append(piv)
        pivots.append((col, e))
    for k, (col, e) in enumerate(pivots):
        pe = prime**e
        for i in range(k):
            f = basis[i][col] // pe
            if f:
                basis[i] = [(x - f * y) % q for x, y in zip(basis[i], basis[k])]
    return tuple(tuple(r) for r in basis)


@dataclass(frozen=True)
class ModLattice:
    """A Z/l^m-submodule of (Z/l^m)^dim; `basis` is its Howell form."""

    prime: int
    precision: int
    dim: int
    basis: tuple[tuple[int, ...], ...]

    @classmethod
    def span(cls, prime: int, precision: int, dim: int, vectors: Iterable[Sequence[int]]) -> ModLattice:
        check_prime_precision(prime, precision)
        rows = []
        for v in vectors:
            if len(v) != dim:
                raise DomainError(f"vector of length {len(v)} in a rank-{dim} module")
            rows.append([int(x) for x in v])
        return cls(prime, precision, dim, _howell(rows, prime, precision, dim))

    @classmethod
    def zero(cls, prime: int, precision: int, dim: int) -> ModLattice:
        return cls.span(prime, precision, dim, [])

    @classmethod
    def scaled_standard(cls, prime: int, precision: int, dim: int, k: int) -> ModLattice:
        """l^k (Z/l^m)^dim."""
        return cls.span(prime, precision, dim, [[prime**k if i == j else 0 for j in range(dim)] for i in range(dim)])

    @property
    def modulus(self) -> int:
        return self.prime**self.precision

    def _same(self, other: ModLattice):
        if (self.prime, self.precision, self.dim) != (other.prime, other.precision, other.dim):
            raise PrecisionMismatch("lattices over different rings or dimensions")

    def _pivots(self):
        out = []
        for row in self.basis:
            col = next(i for i, x in enumerate(row) if x)
            out.append((col, vl(row[col], self.prime, self.precision)))
        return out

    def reduce(self, v: Sequence[int]) -> list[int]:
        """Remainder of v after Howell reduction (zero iff v is in the lattice)."""
        q = self.modulus
        v = [int(x) % q for x in v]
        for row, (col, e) in zip(self.basis, self._pivots()):
            pe = self.prime**e
            if v[col] % pe:
                continue
            f = v[col] // pe
            if f:
                v = [(x - f * y) % q for x, y in zip(v, row)]
        return v

    def __contains__(self, v: Sequence[int]) -> bool:
        if len(v) != self.dim:
            raise DomainError("dimension mismatch")
        return not any(self.reduce(v))

    def contains_many(self, vectors: np.ndarray) -> np.ndarray:
        """Vectorized membership for an (N, dim) integer array."""
        q = self.modulus
        v = np.asarray(vectors, dtype=object) % q
        for row, (col, e) in zip(self.basis, self._pivots()):
            pe = self.prime**e
            f = v[:, col] // pe
            v = (v - np.outer(f, np.array(row, dtype=object))) % q
        return ~np.any(v != 0, axis=1)

    def contains_lattice(self, other: ModLattice) -> bool:
        self._same(other)
        return all(row in self for row in other.basis)

    def __eq__(self, other):
        if not isinstance(other, ModLattice):
            return NotImplemented
        return (self.prime, self.precision, self.dim, self.basis) == (
            other.prime,
            other.precision,
            other.dim,
            other.basis,
        )

    def __hash__(self):
        return hash((self.prime, self.precision, self.dim, self.basis))

    def __add__(self, other: ModLattice) -> ModLattice:
        self._same(other)
        return ModLattice.span(self.prime, self.precision, self.dim, self.basis + other.basis)

    def is_zero(self) -> bool:
        return not self.basis

    def order(self) -> int:
        """Number of elements: the product of l^(m - e) over pivots."""
        total = 1
        for _, e in self._pivots():
            total *= self.prime ** (self.precision - e)
        return total

    def apply_operator(self, T: Sequence[Sequence[int]]) -> ModLattice:
        return apply_operator(self, T)

    def project(self, precision: int) -> ModLattice:
        """Reduction to a smaller precision."""
        if precision > self.precision:
            raise DomainError("projection can only lower precision")
        return ModLattice.span(self.prime, precision, self.dim, self.basis)

    def coordinates(self, idx: Sequence[int]) -> ModLattice:
        """Image under the coordinate projection onto the listed indices."""
        return ModLattice.span(self.prime, self.precision, len(idx), [[row[i] for i in idx] for row in self.basis])

    def scaled_level(self) -> int | None:
        """Smallest k with l^k (Z/l^m)^dim inside the lattice (None if even k = m - 1 fails)."""
        for k in range(self.precision):
            if self.contains_lattice(ModLattice.scaled_standard(self.prime, self.precision, self.dim, k)):
                return k
        return None

    def __repr__(self):
        return f"ModLattice(l={self.prime}, m={self.precision}, d={self.dim}, basis={list(self.basis)})"


def span(prime: int, precision: int, dim: int, vectors: Iterable[Sequence[int]]) -> ModLattice:
    return ModLattice.span(prime, precision, dim, vectors)


def contains(lattice: ModLattice, v: Sequence[int]) -> bool:
    return v in lattice


def contains_lattice(l1: ModLattice, l2: ModLattice) -> bool:
    return l1.contains_lattice(l2)


def apply_operator(lattice: ModLattice, T: Sequence[Sequence[int]]) -> ModLattice:
    """span{T w : w in basis}."""
    d = lattice.dim
    if len(T) != d or any(len(r) != d for r in T):
        raise DomainError("operator shape does not match lattice dimension")
    q = lattice.modulus
    images = [[sum(T[i][j] * w[j] for j in range(d)) % q for i in range(d)] for w in lattice.basis]
    return ModLattice.span(lattice.prime, lattice.precision, d, images)


def conj_operators(prime: int, precision: int, s: int) -> list[list[list[int]]]:
    """Matrices of X -> C^-1 X C for C = L(l^s), R(l^s), D(l^s)."""
    a = prime**s
    return [conjugation_operator(g(a, prime, precision)) for g in (L, R, D)]


def conj_saturate(W: ModLattice, s: int, t: int) -> ModLattice:
    """Close W under conjugation by L(l^s), R(l^s), D(l^s) and certify the resulting ball.

    The closed lattice must contain l^(t+4s+4v) sl2; failing that raises LemmaViolation.
    """
    p, m = W.prime, W.precision
    v = vee(p)
    if W.dim != 3:
        raise DomainError("conj_saturate works on sl2 coordinates (d = 3)")
    if (p == 2 and s < 2) or (p in (3, 5) and s < 1) or s < 0:
        raise DomainError(f"s = {s} is outside the valid range for l = {p}")
    if t < 0 or t + 4 * s + 4 * v >= m:
        raise DomainError("t + 4s + 4v must be below the precision")
    if W.project(t + 1).is_zero():
        raise DomainError(f"W must be nonzero mod l^{t + 1}")
    ops = conj_operators(p, m, s)
    current = W
    for _ in range(3 * m * 3 + 3):
        nxt = current
        for T in ops:
            nxt = nxt + apply_operator(nxt, T)
        if nxt == current:
            break
        current = nxt
    else:  # pragma: no cover - the module has finite length
        raise AssertionError("saturation did not stabilize")
    target = ModLattice.scaled_standard(p, m, 3, t + 4 * s + 4 * v)
    if not current.contains_lattice(target):
        raise LemmaViolation(
            f"conjugation-stable lattice lacks l^{t + 4 * s + 4 * v} sl2",
            certificate={"W": W.basis, "s": s, "t": t, "closure": current.basis},
        )
    return current
