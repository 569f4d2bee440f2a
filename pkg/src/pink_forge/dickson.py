"""Dickson classification of subgroups of SL2(F_l).

Containment in a Cartan, Borel or normalizer is read off from the action on
the projective line over F_{l^2}: a Borel fixes a rational point, a split
Cartan fixes two, a nonsplit Cartan fixes a conjugate pair of irrational
points, and the normalizers stabilize such a pair setwise.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass
from functools import cache

import numpy as np

from .errors import DomainError, NotNormalSylow, UnclassifiableError
from .group_engine import (
    FiniteGroup,
    _grow_subgroup,
    _identity_row,
    _is_identity_mod,
    _keys,
    _mul,
    closure,
)
from .padic_matrix import GroupElement

PRIORITY = (
    "SplitCartan",
    "NonsplitCartan",
    "Borel",
    "NormalizerSplitCartan",
    "NormalizerNonsplitCartan",
    "Exceptional",
    "Full",
)

# element-order statistics of the projective images A4, S4, A5
_EXCEPTIONAL = {
    "A4": {1: 1, 2: 3, 3: 8},
    "S4": {1: 1, 2: 9, 3: 8, 4: 6},
    "A5": {1: 1, 2: 15, 3: 20, 5: 24},
}


@dataclass(frozen=True)
class SubgroupType:
    label: str
    exceptional: str | None = None

    def __str__(self):
        return f"Exceptional({self.exceptional})" if self.exceptional else self.label

    @property
    def is_cartan(self) -> bool:
        return self.label in ("SplitCartan", "NonsplitCartan")

    @property
    def is_normalizer(self) -> bool:
        return self.label.startswith("Normalizer")


# ---------------------------------------------------------------- F_{l^2} and P^1


@cache
def _quadratic(p: int) -> tuple[int, int]:
    """(t, n) with X^2 - tX - n irreducible over F_p."""
    for t in range(p):
        for n in range(1, p):
            if all((x * x - t * x - n) % p for x in range(p)):
                return t, n
    raise AssertionError("no irreducible quadratic")  # pragma: no cover


@cache
def _projective_line(p: int):
    """Points of P^1(F_{p^2}) as pairs (x, y) of F_{p^2} elements (u, w) = u + wX.

    Returns (points, index, rational mask, conjugate index array).
    """
    t, n = _quadratic(p)
    field = [(u, w) for u in range(p) for w in range(p)]
    points = [((1, 0), (0, 0))] + [(z, (1, 0)) for z in field]
    index = {pt: i for i, pt in enumerate(points)}
    rational = np.array([pt[0][1] == 0 and pt[1][1] == 0 for pt in points])
    # Frobenius sends X to its other root t - X
    conj = np.array([index[(_frob(pt[0], t, p), _frob(pt[1], t, p))] for pt in points])
    return points, index, rational, conj, (t, n)


def _frob(z, t, p):
    u, w = z
    return ((u + w * t) % p, (-w) % p)


def _fmul(x, y, t, n, p):
    u1, w1 = x
    u2, w2 = y
    # X^2 = tX + n
    return ((u1 * u2 + w1 * w2 * n) % p, (u1 * w2 + u2 * w1 + w1 * w2 * t) % p)


def _finv(x, t, n, p):
    # brute force is fine for desk-scale primes
    for u in range(p):
        for w in range(p):
            if _fmul(x, (u, w), t, n, p) == (1, 0):
                return (u, w)
    raise ZeroDivisionError


@cache
def _inverse_table(p: int):
    _, _, _, _, (t, n) = _projective_line(p)
    return {(u, w): _finv((u, w), t, n, p) for u in range(p) for w in range(p) if (u, w) != (0, 0)}


def _action(mat: Sequence[int], p: int) -> np.ndarray:
    """Permutation of P^1(F_{p^2}) induced by a matrix [[a,b],[c,d]] mod p."""
    points, index, _, _, (t, n) = _projective_line(p)
    inv = _inverse_table(p)
    a, b, c, d = (int(x) % p for x in mat)
    perm = np.empty(len(points), dtype=np.int64)
    for i, (x, y) in enumerate(points):
        nx = ((a * x[0] + b * y[0]) % p, (a * x[1] + b * y[1]) % p)
        ny = ((c * x[0] + d * y[0]) % p, (c * x[1] + d * y[1]) % p)
        if ny == (0, 0):
            perm[i] = 0
        else:
            perm[i] = index[(_fmul(nx, inv[ny], t, n, p), (1, 0))]
    return perm


# ---------------------------------------------------------------- helpers on row sets


def _rows(H) -> tuple[np.ndarray, int]:
    if isinstance(H, FiniteGroup):
        if H.precision != 1 or H.n != 1:
            raise DomainError("Dickson classification needs a subgroup of SL2(F_l) (m = 1, n = 1)")
        return H.image, H.prime
    raise TypeError("expected a FiniteGroup")


def _generator_rows(rows: np.ndarray, p: int) -> np.ndarray:
    _, _, gens = _grow_subgroup(rows, p, max(rows.shape[0], 1) + 1, "subgroup")
    return gens


def _pow_rows(rows: np.ndarray, e: int, p: int) -> np.ndarray:
    result = np.tile(_identity_row(1), (rows.shape[0], 1))
    base = rows.copy()
    while e:
        if e & 1:
            result = _mul(result, base, p)
        base = _mul(base, base, p)
        e >>= 1
    return result


def element_orders(rows: np.ndarray, p: int, projective: bool = False) -> np.ndarray:
    """Orders of the rows (of their images in PSL2 when `projective`)."""
    orders = np.zeros(rows.shape[0], dtype=np.int64)
    x = np.tile(_identity_row(1), (rows.shape[0], 1))
    minus = np.array([p - 1, 0, 0, p - 1]) % p
    for k in range(1, 2 * p * (p * p - 1) + 1):
        x = _mul(x, rows, p)
        done = _is_identity_mod(x, p)
        if projective:
            done |= ~np.any((x - minus) % p != 0, axis=1)
        newly = done & (orders == 0)
        orders[newly] = k
        if (orders > 0).all():
            break
    return orders


def ell_sylow_rows(rows: np.ndarray, p: int) -> np.ndarray | None:
    """The elements of l-power order if they form a subgroup, else None."""
    rows = np.asarray(rows, dtype=np.int64) % p
    # every l-element of SL2(F_l) has order 1 or l
    mask = _is_identity_mod(_pow_rows(rows, p, p), p)
    S = rows[mask]
    sk = np.sort(_keys(S, p))
    prods = _mul(np.repeat(S, S.shape[0], axis=0), np.tile(S, (S.shape[0], 1)), p)
    if not np.isin(_keys(prods, p), sk).all():
        return None
    return S[np.argsort(_keys(S, p))]


def _as_group(rows: np.ndarray, p: int) -> FiniteGroup:
    gens = _generator_rows(rows, p)
    if not gens.shape[0]:
        gens = _identity_row(1)[None, :]
    return closure([GroupElement.from_residues(p, 1, g.tolist()) for g in gens])


def ell_sylow(H: FiniteGroup) -> FiniteGroup:
    rows, p = _rows(H)
    S = ell_sylow_rows(rows, p)
    if S is None:
        raise NotNormalSylow("elements of l-power order do not form a subgroup")
    return _as_group(S, p)


# ---------------------------------------------------------------- classification


def _matches(rows: np.ndarray, p: int, gens: np.ndarray | None = None) -> list[SubgroupType]:
    full_order = p * (p * p - 1)
    out = []
    if gens is None:
        gens = _generator_rows(rows, p)
    perms = [_action(g, p) for g in gens]
    points, _, rational, conj, _ = _projective_line(p)
    npts = len(points)
    fixed = np.ones(npts, dtype=bool)
    for perm in perms:
        fixed &= perm == np.arange(npts)
    rat_fixed = np.flatnonzero(fixed & rational)
    if len(rat_fixed) >= 2:
        out.append(SubgroupType("SplitCartan"))
    if np.any(fixed & ~rational):
        out.append(SubgroupType("NonsplitCartan"))
    if len(rat_fixed) >= 1:
        out.append(SubgroupType("Borel"))
    rat = np.flatnonzero(rational)
    split_norm = False
    for i in range(len(rat)):
        for j in range(i + 1, len(rat)):
            P, Q = rat[i], rat[j]
            if all({perm[P], perm[Q]} == {P, Q} for perm in perms):
                split_norm = True
                break
        if split_norm:
            break
    if split_norm:
        out.append(SubgroupType("NormalizerSplitCartan"))
    for P in np.flatnonzero(~rational):
        Q = conj[P]
        if all({perm[P], perm[Q]} == {P, Q} for perm in perms):
            out.append(SubgroupType("NormalizerNonsplitCartan"))
            break
    orders = element_orders(rows, p, projective=True)
    center = int(np.sum(orders == 1))
    pgroup_order = rows.shape[0] // center
    if pgroup_order in (12, 24, 60):
        stats = {k: v // center for k, v in Counter(orders.tolist()).items()}
        for name, ref in _EXCEPTIONAL.items():
            if stats == ref:
                out.append(SubgroupType("Exceptional", name))
    if rows.shape[0] == full_order:
        out.append(SubgroupType("Full"))
    return out


def type_set(H: FiniteGroup) -> list[SubgroupType]:
    """Every Dickson type whose containment condition H satisfies, in priority order."""
    rows, p = _rows(H)
    gens = np.array([g.key() for g in H.generators], dtype=np.int64) % p
    return _matches(rows, p, gens)


def classify_rows(rows: np.ndarray, p: int) -> SubgroupType:
    matches = _matches(rows, p)
    return _pick(matches, rows.shape[0] == p * (p * p - 1))


def _pick(matches: list[SubgroupType], full: bool) -> SubgroupType:
    if full:
        return SubgroupType("Full")
    for label in PRIORITY:
        for t in matches:
            if t.label == label:
                return t
    raise UnclassifiableError("no Dickson type matched")


def classify(H: FiniteGroup) -> SubgroupType:
    """The most specific Dickson type of H (the whole group is always Full)."""
    rows, p = _rows(H)
    if p > 50:
        raise DomainError("classification is limited to l <= 50")
    return _pick(type_set(H), rows.shape[0] == p * (p * p - 1))


def is_borel_type(H: FiniteGroup) -> bool:
    return any(t.label == "Borel" for t in type_set(H))


def sylow_quotient_order(rows: np.ndarray, p: int) -> int:
    """|H / N(H)| for H in SL2(F_l) given by its element rows."""
    S = ell_sylow_rows(rows, p)
    return rows.shape[0] // (1 if S is None else S.shape[0])


def cartan_mask(rows: np.ndarray, p: int) -> np.ndarray | None:
    """For rows inside the normalizer of a Cartan, the mask of those in the Cartan itself.

    The Cartan is the pointwise stabilizer of a pair of points of P^1(F_{l^2})
    that the whole group stabilizes setwise.  Returns None when no such pair exists.
    """
    rows = np.asarray(rows, dtype=np.int64) % p
    perms = np.array([_action(r, p) for r in rows])
    _, _, rational, conj, _ = _projective_line(p)
    rat = np.flatnonzero(rational)
    pairs = [(int(P), int(conj[P])) for P in np.flatnonzero(~rational)]
    pairs += [(int(rat[i]), int(rat[j])) for i in range(len(rat)) for j in range(i + 1, len(rat))]
    for P, Q in pairs:
        a, b = perms[:, P], perms[:, Q]
        if np.all(((a == P) & (b == Q)) | ((a == Q) & (b == P))):
            return a == P
    return None
