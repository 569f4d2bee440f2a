"""2x2 matrices over Z/l^m, tuples of them, and the matrix-level maps built on them.

Coordinates on sl2 are always (x, h, y) per factor, where
x = [[0,1],[0,0]], h = [[1,0],[0,-1]], y = [[0,0],[1,0]].
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from .errors import DomainError, NonConvergence, PrecisionMismatch
from .padic_scalar import (
    PadicScalar,
    check_prime_precision,
    ilog,
    vee,
    vl,
)


@dataclass(frozen=True, slots=True)
class Mat2:
    prime: int
    precision: int
    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        q = check_prime_precision(self.prime, self.precision)
        for name in "abcd":
            val = getattr(self, name)
            if not 0 <= val < q:
                object.__setattr__(self, name, val % q)

    @classmethod
    def identity(cls, prime: int, precision: int) -> Mat2:
        return cls(prime, precision, 1, 0, 0, 1)

    @classmethod
    def from_rows(cls, prime: int, precision: int, rows) -> Mat2:
        (a, b), (c, d) = rows
        return cls(prime, precision, int(a), int(b), int(c), int(d))

    @property
    def modulus(self) -> int:
        return self.prime**self.precision

    @property
    def entries(self) -> tuple[PadicScalar, PadicScalar, PadicScalar, PadicScalar]:
        p, m = self.prime, self.precision
        return tuple(PadicScalar(p, m, x) for x in (self.a, self.b, self.c, self.d))

    def residues(self) -> tuple[int, int, int, int]:
        return (self.a, self.b, self.c, self.d)

    def _check(self, other: Mat2):
        if (self.prime, self.precision) != (other.prime, other.precision):
            raise PrecisionMismatch("matrices over different rings")

    def __mul__(self, other: Mat2) -> Mat2:
        self._check(other)
        a, b, c, d = self.a, self.b, self.c, self.d
        e, f, g, h = other.a, other.b, other.c, other.d
        return Mat2(self.prime, self.precision, a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)

    def __add__(self, other: Mat2) -> Mat2:
        self._check(other)
        return Mat2(self.prime, self.precision, self.a + other.a, self.b + other.b,
                    self.c + other.c, self.d + other.d)

    def __sub__(self, other: Mat2) -> Mat2:
        self._check(other)
        return Mat2(self.prime, self.precision, self.a - other.a, self.b - other.b,
                    self.c - other.c, self.d - other.d)

    def scale(self, k: int) -> Mat2:
        return Mat2(self.prime, self.precision, k * self.a, k * self.b, k * self.c, k * self.d)

    def det(self) -> int:
        return (self.a * self.d - self.b * self.c) % self.modulus

    def trace(self) -> int:
        return (self.a + self.d) % self.modulus

    def inverse(self) -> Mat2:
        det = self.det()
        if det % self.prime == 0:
            raise DomainError("matrix is not invertible")
        inv = 1 if det == 1 else pow(det, -1, self.modulus)
        return Mat2(self.prime, self.precision, inv * self.d, -inv * self.b, -inv * self.c, inv * self.a)

    def __pow__(self, e: int) -> Mat2:
        base = self if e >= 0 else self.inverse()
        e = abs(e)
        result = Mat2.identity(self.prime, self.precision)
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    def reduce(self, k: int) -> Mat2:
        return Mat2(self.prime, k, self.a, self.b, self.c, self.d)

    def is_identity(self) -> bool:
        return (self.a, self.b, self.c, self.d) == (1, 0, 0, 1)

    def congruent_identity(self, level: int) -> bool:
        """True when the matrix is Id mod l^level."""
        if level <= 0:
            return True
        r = self.prime ** min(level, self.precision)
        return (self.a - 1) % r == 0 and self.b % r == 0 and self.c % r == 0 and (self.d - 1) % r == 0

    def valuation(self) -> int:
        """Minimum entry valuation (m for the zero matrix)."""
        return min(vl(x, self.prime, self.precision) for x in self.residues())

    def __repr__(self):
        return f"[[{self.a},{self.b}],[{self.c},{self.d}]] mod {self.prime}^{self.precision}"


@dataclass(frozen=True, slots=True)
class GroupElement:
    parts: tuple[Mat2, ...]

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise DomainError("a group element needs at least one factor")
        ring = (parts[0].prime, parts[0].precision)
        if any((p.prime, p.precision) != ring for p in parts):
            raise PrecisionMismatch("factors over different rings")
        object.__setattr__(self, "parts", parts)

    @classmethod
    def identity(cls, prime: int, precision: int, n: int) -> GroupElement:
        return cls((Mat2.identity(prime, precision),) * n)

    @classmethod
    def from_residues(cls, prime: int, precision: int, values: Sequence[int]) -> GroupElement:
        if len(values) % 4 or not values:
            raise DomainError("need 4n residues")
        vals = [int(v) for v in values]
        return cls(tuple(Mat2(prime, precision, *vals[i:i + 4]) for i in range(0, len(vals), 4)))

    @classmethod
    def embed(cls, mat: Mat2, slot: int, n: int) -> GroupElement:
        """The tuple with `mat` in position `slot` and Id elsewhere."""
        one = Mat2.identity(mat.prime, mat.precision)
        return cls(tuple(mat if i == slot else one for i in range(n)))

    @property
    def prime(self) -> int:
        return self.parts[0].prime

    @property
    def precision(self) -> int:
        return self.parts[0].precision

    @property
    def n(self) -> int:
        return len(self.parts)

    def key(self) -> tuple[int, ...]:
        return tuple(x for p in self.parts for x in p.residues())

    def __mul__(self, other: GroupElement) -> GroupElement:
        if self.n != other.n:
            raise PrecisionMismatch("different numbers of factors")
        return GroupElement(tuple(x * y for x, y in zip(self.parts, other.parts)))

    def inverse(self) -> GroupElement:
        return GroupElement(tuple(p.inverse() for p in self.parts))

    def __pow__(self, e: int) -> GroupElement:
        return GroupElement(tuple(p**e for p in self.parts))

    def reduce(self, k: int) -> GroupElement:
        return GroupElement(tuple(p.reduce(k) for p in self.parts))

    def is_identity(self) -> bool:
        return all(p.is_identity() for p in self.parts)

    def __getitem__(self, i: int) -> Mat2:
        return self.parts[i]

    def __repr__(self):
        return "(" + ", ".join(repr(p).split(" mod")[0] for p in self.parts) + f") mod {self.prime}^{self.precision}"


@dataclass(frozen=True, slots=True)
class Ball:
    """The principal congruence ball B_l(k_1, ..., k_n) at precision m."""

    prime: int
    precision: int
    levels: tuple[int, ...]

    def __post_init__(self):
        check_prime_precision(self.prime, self.precision)
        levels = tuple(int(k) for k in self.levels)
        if any(k < 0 or k > self.precision for k in levels):
            raise DomainError("ball levels must lie in [0, m]")
        object.__setattr__(self, "levels", levels)

    @property
    def n(self) -> int:
        return len(self.levels)

    def __contains__(self, g: GroupElement) -> bool:
        return all(p.det() == 1 and p.congruent_identity(k) for p, k in zip(g.parts, self.levels))

    def generators(self) -> list[GroupElement]:
        """Tuple generators L, R, D(l^k) in each factor with k >= 1 (Id elsewhere)."""
        gens = []
        for j, k in enumerate(self.levels):
            if k == 0 or k >= self.precision:
                continue
            a = self.prime**k
            for kind in "LRD":
                gens.append(GroupElement.embed(standard_gen(kind, a, self.prime, self.precision), j, self.n))
        return gens

    def order(self) -> int:
        """Cardinality at precision m: l^(3(m-k)) per factor with k >= 1."""
        total = 1
        for k in self.levels:
            if k == 0:
                raise DomainError("order of B(0) is |SL2(Z/l^m)|, not a ball count")
            total *= self.prime ** (3 * (self.precision - k))
        return total


def _scalar_args(a, prime, precision) -> tuple[int, int, int]:
    if isinstance(a, PadicScalar):
        if prime is not None and (prime, precision) != (a.prime, a.precision):
            raise PrecisionMismatch("scalar ring differs from requested ring")
        return a.prime, a.precision, a.residue
    if prime is None or precision is None:
        raise DomainError("integer arguments need an explicit prime and precision")
    return prime, precision, int(a)


def standard_gen(kind: str, a, prime: int | None = None, precision: int | None = None) -> Mat2:
    """L(a) = [[1,0],[a,1]], R(a) = [[1,a],[0,1]], D(a) = diag(1+a, (1+a)^-1)."""
    p, m, x = _scalar_args(a, prime, precision)
    q = p**m
    if kind == "L":
        return Mat2(p, m, 1, 0, x, 1)
    if kind == "R":
        return Mat2(p, m, 1, x, 0, 1)
    if kind == "D":
        if (1 + x) % p == 0:
            raise DomainError("D(a) needs 1 + a to be a unit")
        return Mat2(p, m, 1 + x, 0, 0, pow(1 + x, -1, q))
    raise DomainError(f"unknown generator kind {kind!r}")


def L(a, prime=None, precision=None) -> Mat2:
    return standard_gen("L", a, prime, precision)


def R(a, prime=None, precision=None) -> Mat2:
    return standard_gen("R", a, prime, precision)


def D(a, prime=None, precision=None) -> Mat2:
    return standard_gen("D", a, prime, precision)


def theta_precision(prime: int, precision: int) -> int:
    """Precision of Theta values: m for odd l, m - 1 for l = 2."""
    return precision - vee(prime)


def theta_mat(g: Mat2) -> tuple[int, int, int]:
    """(x, h, y) coordinates of g - tr(g)/2."""
    p, m = g.prime, g.precision
    if p == 2:
        if not g.congruent_identity(2):
            raise DomainError("Theta at l = 2 needs the matrix to be Id mod 4")
        q = 2 ** (m - 1)
        # a - d is a multiple of 4 read mod 2^m, so halving it is exact mod 2^(m-1)
        return (g.b % q, ((g.a - g.d) % 2**m) // 2 % q, g.c % q)
    q = p**m
    half = pow(2, -1, q)
    return (g.b, (g.a - g.d) * half % q, g.c)


def theta(g: GroupElement | Mat2) -> tuple[int, ...]:
    if isinstance(g, Mat2):
        return theta_mat(g)
    return tuple(x for part in g.parts for x in theta_mat(part))


def _matmul_int(x, y, q):
    a, b, c, d = x
    e, f, g, h = y
    return ((a * e + b * g) % q, (a * f + b * h) % q, (c * e + d * g) % q, (c * f + d * h) % q)


def _mat_series(t: tuple[int, int, int, int], prime: int, precision: int, vt: int, kind: str):
    """log(Id + t) or exp(t) for an integer matrix t of valuation vt, returned mod l^m."""
    from .padic_scalar import _series_terms

    q = prime**precision
    factorial = kind == "exp"
    n_terms = _series_terms(prime, precision, vt, factorial=factorial)
    guard = ((n_terms - 1) // (prime - 1) if factorial else ilog(n_terms, prime)) + 2
    work = prime ** (precision + guard)
    total = [1, 0, 0, 1] if factorial else [0, 0, 0, 0]
    power = (1, 0, 0, 1)
    fact_e, fact_unit = 0, 1
    for k in range(1, n_terms + 1):
        power = _matmul_int(power, t, work)
        e = vl(k, prime, 64)
        if factorial:
            fact_e += e
            fact_unit = fact_unit * (k // prime**e) % work
            shift, unit = fact_e, fact_unit
        else:
            shift, unit = e, k // prime**e
        inv = pow(unit, -1, work)
        sign = -1 if (not factorial and k % 2 == 0) else 1
        for i in range(4):
            total[i] += sign * (power[i] // prime**shift) * inv
    return tuple(x % q for x in total)


def mat_log(g: Mat2) -> Mat2:
    """Matrix logarithm on B(1+v), as a truncated series with guard digits."""
    p, m = g.prime, g.precision
    t = (g.a - 1, g.b, g.c, g.d - 1)
    vt = min(vl(x % g.modulus, p, m) for x in t)
    if vt < 1 + vee(p):
        raise DomainError(f"mat_log needs g = Id mod {p}^{1 + vee(p)}")
    if vt >= m:
        return Mat2(p, m, 0, 0, 0, 0)
    return Mat2(p, m, *_mat_series(tuple(x % g.modulus for x in t), p, m, vt, "log"))


def mat_exp(t: Mat2) -> Mat2:
    """Matrix exponential on l^(1+v) M_2."""
    p, m = t.prime, t.precision
    vt = t.valuation()
    if vt < 1 + vee(p):
        raise DomainError(f"mat_exp needs t = 0 mod {p}^{1 + vee(p)}")
    if vt >= m:
        return Mat2.identity(p, m)
    return Mat2(p, m, *_mat_series(t.residues(), p, m, vt, "exp"))


def comm(g, h):
    """The commutator g h g^-1 h^-1 (works for Mat2 and GroupElement)."""
    return g * h * g.inverse() * h.inverse()


def comm_iterated(gs: Sequence):
    """Comm_1(g1, g2) = [g1, g2]; Comm_k(g1..g_{k+1}) = [Comm_{k-1}(g1..g_k), g_{k+1}]."""
    if len(gs) < 2:
        raise DomainError("an iterated commutator needs at least two elements")
    acc = comm(gs[0], gs[1])
    for g in gs[2:]:
        acc = comm(acc, g)
    return acc


def power_stabilize(g, exponent_base: int):
    """Iterate g -> g^base until the value is stable mod l^m.

    For base l^2 this converges whenever each part has mod-l order prime to l;
    `NonConvergence` means the caller's contract on g was violated.
    """
    prime = g.prime
    if prime == 2:
        raise DomainError("power_stabilize is defined for odd l")
    if exponent_base not in (prime, prime * prime):
        raise DomainError("exponent base must be l or l^2")
    bound = g.precision * exponent_base + 1
    x = g
    for _ in range(bound):
        y = x**exponent_base
        if y == x:
            return x
        x = y
    raise NonConvergence(f"g^({exponent_base}^k) did not stabilize within {bound} steps")


def power_padic(g, beta: PadicScalar):
    """g^beta for beta in Z_l, valid when g = Id mod l^(1+v).

    On B(1+v) the map k -> g^k factors through Z/l^m, so the residue of beta
    (its first m digits) determines the power exactly.
    """
    parts = g.parts if isinstance(g, GroupElement) else (g,)
    if any(not p.congruent_identity(1 + vee(p.prime)) for p in parts):
        raise DomainError("power_padic needs g = Id mod l^(1+v)")
    if (beta.prime, beta.precision) != (g.prime, g.precision):
        raise PrecisionMismatch("exponent and matrix over different rings")
    return g**beta.residue


def diag_limit_product(a: PadicScalar, b: PadicScalar, c: PadicScalar, d: PadicScalar, terms: int) -> Mat2:
    """Partial product prod_{i=-N}^{-1} R(c)^((ab)^-i) [R(c), L(d)] prod_{i=1}^{N} L(d)^(-(ab)^i)."""
    p, m = a.prime, a.precision
    for x in (a, b, c, d):
        if (x.prime, x.precision) != (p, m):
            raise PrecisionMismatch("scalars over different rings")
        if x.residue % p:
            raise DomainError("diag_limit_product needs all valuations >= 1")
    q = p**m
    ab = a.residue * b.residue % q
    result = Mat2.identity(p, m)
    for i in range(terms, 0, -1):
        result = result * R(c.residue * pow(ab, i, q), p, m)
    result = result * comm(R(c), L(d))
    for i in range(1, terms + 1):
        result = result * L(-d.residue * pow(ab, i, q), p, m)
    return result


def sl2_basis(prime: int, precision: int) -> tuple[Mat2, Mat2, Mat2]:
    """The matrices x, h, y in coordinate order."""
    return (
        Mat2(prime, precision, 0, 1, 0, 0),
        Mat2(prime, precision, 1, 0, 0, -1),
        Mat2(prime, precision, 0, 0, 1, 0),
    )


def traceless(coords: Iterable[int], prime: int, precision: int) -> Mat2:
    """The traceless matrix with (x, h, y) coordinates `coords`."""
    x, h, y = coords
    return Mat2(prime, precision, h, x, y, -h)


def conjugation_operator(C: Mat2) -> list[list[int]]:
    """3x3 matrix of X -> C^-1 X C on (x, h, y) coordinates (columns are images of x, h, y)."""
    p, m = C.prime, C.precision
    Ci = C.inverse()
    cols = []
    for basis in sl2_basis(p, m):
        img = Ci * basis * C
        cols.append((img.b, img.a, img.c))
    return [[cols[j][i] for j in range(3)] for i in range(3)]
