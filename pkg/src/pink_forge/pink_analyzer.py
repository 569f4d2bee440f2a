"""Pink Lie algebras and finite-level checks of the large-image statements.

Every ball-containment claim is checked only when its level is below the
working precision m; otherwise the report says InconclusiveAtPrecision and
carries the strongest level that could be verified.
"""

from __future__ import annotations

import itertools
from collections.abc import Sequence
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import dickson
from .errors import (
    CapExceeded,
    ConstructionFailed,
    DomainError,
    HypothesisUnmet,
    LemmaViolation,
    PreconditionError,
)
from .group_engine import (
    DEFAULT_CAP,
    FiniteGroup,
    _grow_subgroup,
    _identity_row,
    _inv,
    _is_identity_mod,
    _keys,
    _lookup,
    _mul,
    _normal_closure_by,
    _unique_rows,
    ball_tuple_generators,
    closure,
    contains_ball,
    derived_subgroup,
    goursat_combine,
    graph_defect,
    preimage,
    projection,
    reduction_kernel,
    search_elements,
)
from .modlattice import ModLattice, conj_saturate
from .padic_matrix import (
    D,
    GroupElement,
    L,
    Mat2,
    R,
    conjugation_operator,
    power_stabilize,
    theta,
    theta_precision,
)
from .padic_scalar import PadicScalar, vee, vl

VERIFIED = "Verified"
INCONCLUSIVE = "InconclusiveAtPrecision"
VIOLATION = "LemmaViolation"


def _gens(G) -> list[GroupElement]:
    gens = list(G.generators) if isinstance(G, FiniteGroup) else list(G)
    if not gens:
        raise DomainError("at least one generator is required")
    return gens


def _ring(gens: Sequence[GroupElement]) -> tuple[int, int, int]:
    g = gens[0]
    return g.prime, g.precision, g.n


# ---------------------------------------------------------------- Lie algebra


def group_algebra_span(G) -> ModLattice:
    """The Z/l^m-span of the elements of G inside M_2(Z/l^m)^n (rank 4n).

    It is the smallest module containing Id and closed under right
    multiplication by the generators, so no enumeration of G is needed.
    """
    gens = _gens(G)
    p, m, n = _ring(gens)
    q = p**m
    grows = _unique_rows(np.array([g.key() for g in gens], dtype=np.int64) % q, q)[0]
    span = ModLattice.span(p, m, 4 * n, [_identity_row(n).tolist()])
    while True:
        B = np.array(span.basis, dtype=np.int64)
        prods = _mul(np.repeat(B, grows.shape[0], axis=0), np.tile(grows, (B.shape[0], 1)), q)
        nxt = ModLattice.span(p, m, 4 * n, list(span.basis) + prods.tolist())
        if nxt == span:
            return span
        span = nxt


def _theta_row(row: Sequence[int], p: int, m: int) -> list[int]:
    q = p**m
    out = []
    for j in range(0, len(row), 4):
        a, b, c, d = (int(x) % q for x in row[j:j + 4])
        if p == 2:
            qt = 2 ** (m - 1)
            diff = (a - d) % q
            if diff % 2:
                raise DomainError("Theta at l = 2 needs a - d even")
            out += [b % qt, diff // 2 % qt, c % qt]
        else:
            out += [b, (a - d) * pow(2, -1, q) % q, c]
    return out


def lie_algebra(G) -> ModLattice:
    """L(G): the span of Theta(g) over g in G, in (x, h, y) coordinates per factor.

    Theta is linear, so L(G) is the Theta-image of the algebra span of G.
    """
    gens = _gens(G)
    p, m, n = _ring(gens)
    if p == 2 and (m < 2 or any(not part.congruent_identity(2) for g in gens for part in g.parts)):
        raise DomainError("at l = 2 the group must be trivial mod 4")
    span = group_algebra_span(gens)
    rows = [_theta_row(r, p, m) for r in span.basis]
    return ModLattice.span(p, theta_precision(p, m), 3 * n, rows)


def k_found(lattice: ModLattice) -> int | None:
    """Smallest k with l^k sl2^n inside the lattice (the strongest such statement)."""
    return lattice.scaled_level()


def trace_form_module(lattice: ModLattice) -> ModLattice:
    """Span of the per-factor traces tr(u w) over pairs of basis vectors."""
    if lattice.dim % 3:
        raise DomainError("expected sl2^n coordinates")
    n = lattice.dim // 3
    q = lattice.modulus
    vecs = []
    for u, w in itertools.combinations_with_replacement(lattice.basis, 2):
        vec = []
        for f in range(n):
            x1, h1, y1 = u[3 * f:3 * f + 3]
            x2, h2, y2 = w[3 * f:3 * f + 3]
            vec.append((2 * h1 * h2 + x1 * y2 + y1 * x2) % q)
        vecs.append(vec)
    return ModLattice.span(lattice.prime, lattice.precision, n, vecs)


def scalar_saturation(G: FiniteGroup) -> FiniteGroup:
    """(Z_l^* G) cut back to SL2^n: G together with the scalar -Id in every factor."""
    minus = GroupElement(tuple(Mat2(G.prime, G.precision, -1, 0, 0, -1) for _ in range(G.n)))
    return closure(list(G.generators) + [minus], G.cap)


# ---------------------------------------------------------------- reports


@dataclass
class PinkReport:
    descriptor: str
    prime: int
    precision: int
    n: int
    lie_algebra: ModLattice | None
    k_found: int | None
    k: int
    hypothesis_holds: bool | None
    claimed_level: int
    conclusion_checked: tuple[tuple[int, bool], ...]
    subgroup_indices: dict
    verdict: str
    notes: tuple[str, ...] = ()
    certificate: dict | None = field(default=None, repr=False)

    @property
    def verified_level(self) -> int | None:
        """Smallest ball level whose containment was verified."""
        good = [lvl for lvl, ok in self.conclusion_checked if ok]
        return min(good) if good else None

    def pairs(self) -> list[tuple[str, str]]:
        out = [
            ("check", self.descriptor),
            ("prime", str(self.prime)),
            ("precision", str(self.precision)),
            ("factors", str(self.n)),
            ("k", str(self.k)),
            ("k_found", "none" if self.k_found is None else str(self.k_found)),
            ("hypothesis", "unknown" if self.hypothesis_holds is None else str(self.hypothesis_holds).lower()),
            ("claimed_level", str(self.claimed_level)),
            ("checked", ",".join(f"{lvl}:{'ok' if ok else 'fail'}" for lvl, ok in self.conclusion_checked) or "none"),
            ("verified_level", "none" if self.verified_level is None else str(self.verified_level)),
        ]
        for name, value in self.subgroup_indices.items():
            out.append((f"index[{name}]", str(value)))
        if self.lie_algebra is not None:
            out.append(("lie_basis", ";".join(",".join(map(str, r)) for r in self.lie_algebra.basis) or "0"))
        for note in self.notes:
            out.append(("note", note))
        out.append(("verdict", self.verdict))
        return out


def _ball_scan(H: FiniteGroup, levels: Sequence[int]) -> tuple[tuple[int, bool], ...]:
    return tuple((lvl, contains_ball(H, (lvl,) * H.n)) for lvl in levels)


def _checkable_levels(p: int, m: int) -> range:
    # ball generators are known from level 1 (odd l) or 2 (l = 2)
    return range(1 + vee(p), m)


def pink_proell_check(G: FiniteGroup, k: int) -> PinkReport:
    """If L(G) contains l^k sl2^n then G' contains B(2k, ..., 2k)."""
    p, m, n = G.prime, G.precision, G.n
    if p == 2:
        raise DomainError("the pro-l check is stated for odd l")
    if k < 1:
        raise DomainError("k must be positive")
    if not G.is_proell():
        raise HypothesisUnmet("G is not pro-l (its image mod l is nontrivial)")
    lie = lie_algebra(G)
    kf = k_found(lie)
    hyp = lie.contains_lattice(ModLattice.scaled_standard(p, m, 3 * n, k))
    checked: tuple = ()
    notes = []
    cert = None
    if 2 * k >= m:
        verdict = INCONCLUSIVE
        notes.append(f"level 2k = {2 * k} is not below the precision {m}")
    elif not hyp:
        verdict = VERIFIED
        notes.append("hypothesis fails, statement holds vacuously")
    else:
        Gd = derived_subgroup(G)
        ok = contains_ball(Gd, (2 * k,) * n)
        checked = ((2 * k, ok),)
        verdict = VERIFIED if ok else VIOLATION
        if not ok:
            missing = [g for g in ball_tuple_generators(p, m, (2 * k,) * n) if g not in Gd]
            cert = {"generators": [g.key() for g in G.generators], "missing": [g.key() for g in missing]}
    return PinkReport("pink-proell", p, m, n, lie, kf, k, hyp, 2 * k, checked, {}, verdict, tuple(notes), cert)


# ---------------------------------------------------------------- approximate eigenvalues


def _det(M: list[list[int]]) -> int:
    """Exact integer determinant (Bareiss)."""
    M = [row[:] for row in M]
    d = len(M)
    sign, prev = 1, 1
    for k in range(d - 1):
        if M[k][k] == 0:
            swap = next((i for i in range(k + 1, d) if M[i][k]), None)
            if swap is None:
                return 0
            M[k], M[swap] = M[swap], M[k]
            sign = -sign
        for i in range(k + 1, d):
            for j in range(k + 1, d):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return sign * M[-1][-1] if d else 1


def charpoly_at(g: Sequence[Sequence[int]], lam: int, modulus: int) -> int:
    """det(lam Id - g) mod `modulus`."""
    d = len(g)
    M = [[((lam if i == j else 0) - int(g[i][j])) % modulus for j in range(d)] for i in range(d)]
    return _det(M) % modulus


def approx_eigen_check(g: Sequence[Sequence[int]], lam: PadicScalar, w: Sequence[int], nlevel: int, alpha: int) -> bool:
    """Whether v(p_g(lam)) >= nlevel - alpha, given g w = lam w mod l^nlevel and w != 0 mod l^(alpha+1)."""
    p, m = lam.prime, lam.precision
    q = p**m
    d = len(g)
    if any(len(r) != d for r in g) or len(w) != d:
        raise DomainError("g must be square and match w")
    if not 0 <= alpha < nlevel <= m:
        raise PreconditionError("need 0 <= alpha < nlevel <= m")
    r = p**nlevel
    for i in range(d):
        if (sum(int(g[i][j]) * int(w[j]) for j in range(d)) - lam.residue * int(w[i])) % r:
            raise PreconditionError(f"g w differs from lam w mod {p}^{nlevel}")
    if all(int(x) % p ** (alpha + 1) == 0 for x in w):
        raise PreconditionError(f"w vanishes mod {p}^{alpha + 1}")
    value = charpoly_at(g, lam.residue, q)
    return vl(value, p, m) >= nlevel - alpha


# ---------------------------------------------------------------- mod-l layer helpers


def _pow_rows(rows: np.ndarray, e: int, q: int) -> np.ndarray:
    result = np.tile(_identity_row(rows.shape[1] // 4), (rows.shape[0], 1))
    base = rows.copy()
    while e:
        if e & 1:
            result = _mul(result, base, q)
        base = _mul(base, base, q)
        e >>= 1
    return result


def _member(rows: np.ndarray, table: np.ndarray, q: int) -> np.ndarray:
    """Mask of rows (mod q) lying in the row set `table`."""
    if not table.shape[0]:
        return np.zeros(rows.shape[0], dtype=bool)
    return _lookup(np.sort(_keys(table % q, q)), _keys(rows % q, q))[1]


def _lpart_free(x: int, p: int) -> int:
    while x % p == 0:
        x //= p
    return x


def _ell_part(x: int, p: int) -> int:
    return x // _lpart_free(x, p)


def _factor_orders(rows4: np.ndarray, p: int) -> np.ndarray:
    uniq, uk = _unique_rows(rows4 % p, p)
    orders = dickson.element_orders(uniq, p)
    pos, _ = _lookup(uk, _keys(rows4 % p, p))
    return orders[pos]


def _sylow_or_trivial(rows4: np.ndarray, p: int) -> np.ndarray:
    """N of a subgroup of SL2(F_l): its l-Sylow when normal, else the identity."""
    uniq, _ = _unique_rows(rows4 % p, p)
    syl = dickson.ell_sylow_rows(uniq, p)
    return np.array([[1, 0, 0, 1]], dtype=np.int64) if syl is None else syl


def ell_sylow_mask(G: FiniteGroup) -> np.ndarray:
    """Mask over G.image of one l-Sylow of G(l).

    The Sylow is grown greedily from the lexicographically least l-element,
    trying the remaining l-elements in order, so the choice is reproducible.
    A rejected element stays rejected (the subgroup only grows), so the
    result is a maximal l-subgroup, hence a Sylow.
    """
    p = G.prime
    img = G.image
    target = _ell_part(img.shape[0], p)
    ell_mask = _is_identity_mod(_pow_rows(img, p, p), p)
    ident = _identity_row(G.n)[None, :]
    rows, keys = ident, _keys(ident, p)
    gens = np.zeros((0, img.shape[1]), dtype=np.int64)
    for x in img[ell_mask]:
        if rows.shape[0] == target:
            break
        if _lookup(keys, _keys(x[None, :], p))[1][0]:
            continue
        trial = np.concatenate([gens, x[None, :]])
        try:
            from .group_engine import _bfs

            new_rows, new_keys = _bfs(trial, p, target, seed=rows, fresh=1)
        except CapExceeded:
            continue
        if _ell_part(new_rows.shape[0], p) != new_rows.shape[0]:
            continue
        rows, keys, gens = new_rows, new_keys, trial
    if rows.shape[0] != target:
        raise LemmaViolation("greedy l-subgroup is not a Sylow")  # pragma: no cover
    return _member(img, rows, p)


def sylow_preimage_T(G: FiniteGroup) -> FiniteGroup:
    """Preimage in G of an l-Sylow of G(l) (deterministic choice)."""
    p = G.prime
    T = preimage(G, ell_sylow_mask(G))
    bound = (p * (p * p - 1) // p) ** G.n
    idx = G.order // T.order
    if bound % idx:
        raise LemmaViolation(f"[G:T] = {idx} does not divide {bound}")
    return T


# ---------------------------------------------------------------- first reduction


@dataclass
class FirstReduction:
    case: int
    verdict: str
    T: FiniteGroup | None
    types: tuple[str, str]
    indices: dict
    properties: dict
    claims: tuple[tuple[str, int, bool | None], ...]
    witness: GroupElement | None = None
    notes: tuple[str, ...] = ()

    def pairs(self) -> list[tuple[str, str]]:
        out = [("check", "first-reduction"), ("case", str(self.case)),
               ("types", f"{self.types[0]},{self.types[1]}")]
        out += [(f"index[{k}]", str(v)) for k, v in self.indices.items()]
        out += [(f"property[{k}]", str(v).lower()) for k, v in self.properties.items()]
        for name, level, status in self.claims:
            out.append((f"claim[{name}]", f"{level}:{'inconclusive' if status is None else ('ok' if status else 'fail')}"))
        out += [("note", x) for x in self.notes]
        out.append(("verdict", self.verdict))
        return out


_PM = {"plus": (1, 0, 0, 1), "minus": (-1, 0, 0, -1)}


def _pm_mask(rows4: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    r = rows4 % p
    plus = ~np.any(r != np.array(_PM["plus"]) % p, axis=1)
    minus = ~np.any(r != np.array(_PM["minus"]) % p, axis=1)
    return plus, minus


def _easy_witness(img: np.ndarray, p: int) -> tuple[int, int] | None:
    """An image row (+-Id, b) with the prime-to-l part of ord(b) at least 3 (or mirrored).

    Returns (row index, slot of b).
    """
    for slot in (1, 0):
        other = img[:, 4 * (1 - slot):4 * (1 - slot) + 4]
        mine = img[:, 4 * slot:4 * slot + 4]
        plus, minus = _pm_mask(other, p)
        orders = _factor_orders(mine, p)
        free = np.array([_lpart_free(int(o), p) for o in orders])
        hit = np.flatnonzero((plus | minus) & (free >= 3))
        if hit.size:
            return int(hit[0]), slot
    return None


def _slot(g: GroupElement, j: int) -> GroupElement:
    return GroupElement((g.parts[j],))


def _slot_closure(elements: Sequence[GroupElement], conjugators: Sequence[GroupElement], j: int,
                  cap: int) -> FiniteGroup:
    """Normal closure, inside factor j, of the j-th parts of elements trivial elsewhere."""
    first = [_slot(e, j) for e in elements] or [_slot(conjugators[0], j) ** 0]
    return _normal_closure_by(closure(first, cap), [_slot(g, j) for g in conjugators], cap)


def _is_split(mat: Mat2) -> bool:
    p = mat.prime
    t = mat.trace() % p
    return any((x * x - t * x + 1) % p == 0 for x in range(p))


def _case_one(G: FiniteGroup, idx: int, slot: int, n1: int, n2: int) -> FirstReduction:
    p, m = G.prime, G.precision
    lift = GroupElement.from_residues(p, m, G.lifts[idx].tolist())
    # kill the pro-l parts: the l^2-power limit has +-Id in the other slot
    w = power_stabilize(lift, p * p)
    b = w.parts[slot]
    nb = (n1, n2)[slot]
    order_b = int(dickson.element_orders(np.array([b.reduce(1).residues()]) % p, p)[0])
    level = 2 * nb if (_is_split(b) or order_b == 4) else 4 * nb
    comms = [w.inverse() * g * w * g.inverse() for g in G.generators]
    for c in comms:
        if not c.parts[1 - slot].is_identity():
            raise LemmaViolation("commutator with (+-Id, b) is not trivial in the other slot")
    claims = []
    if level < m:
        K = _slot_closure(comms, G.generators, slot, G.cap)
        ok = contains_ball(K, (level,))
        if not ok:
            raise LemmaViolation(f"{{Id}} x B({level}) missing from G", certificate={"witness": w.key()})
        claims.append((f"G>=Id x B({level})" if slot else f"G>=B({level}) x Id", level, True))
    else:
        claims.append(("slot ball", level, None))
    big = 20 * max(n1, n2)
    if big < m:
        ok = contains_ball(derived_subgroup(G), (big, big))
        if not ok:
            raise LemmaViolation(f"G' lacks B({big},{big})")
        claims.append(("G'>=B(20max)", big, True))
        verdict = VERIFIED
    else:
        claims.append(("G'>=B(20max)", big, None))
        verdict = INCONCLUSIVE
    return FirstReduction(1, verdict, None, ("-", "-"), {}, {}, tuple(claims), w,
                          (f"witness slot {slot}, order of b mod l: {order_b}",))


def _cyclic_descent(rows4: np.ndarray, p: int) -> np.ndarray:
    """Rows of the largest cyclic subgroup of index dividing 24 (least generator on ties)."""
    uniq, _ = _unique_rows(rows4 % p, p)
    orders = dickson.element_orders(uniq, p)
    size = uniq.shape[0]
    best = None
    for i in np.argsort(-orders, kind="stable"):
        o = int(orders[i])
        if size % o == 0 and 24 % (size // o) == 0:
            best = uniq[i]
            break
    if best is None:
        raise ConstructionFailed("no cyclic subgroup of index dividing 24")
    powers = [np.array([1, 0, 0, 1], dtype=np.int64)]
    x = best.copy()
    while not _is_identity_mod(x[None, :], p)[0]:
        powers.append(x)
        x = _mul(x[None, :], best[None, :], p)[0]
    return np.array(powers)


def _graph_M(Hrows: np.ndarray, p: int) -> np.ndarray | None:
    """M in GL2(F_l) with y = +-M x M^-1 on every row (x, y), least first."""
    _, _, gens = _grow_subgroup(Hrows, p, Hrows.shape[0] + 1, "subgroup")
    allM = np.array([m for m in itertools.product(range(p), repeat=4) if (m[0] * m[3] - m[1] * m[2]) % p],
                    dtype=np.int64)
    Minv = _inv(allM, p)
    ok = np.ones(allM.shape[0], dtype=bool)
    for g in gens:
        x = np.tile(g[:4], (allM.shape[0], 1))
        y = g[4:] % p
        c = _mul(_mul(allM, x, p), Minv, p)
        ok &= ~np.any(c != y, axis=1) | ~np.any(c != (-y) % p, axis=1)
    hit = np.flatnonzero(ok)
    return allM[hit[0]] if hit.size else None


def _t_properties(T_img: np.ndarray, p: int) -> tuple[dict, tuple[str, str], tuple[int, int]]:
    A, B = T_img[:, :4], T_img[:, 4:]
    N1, N2 = _sylow_or_trivial(A, p), _sylow_or_trivial(B, p)
    in1, in2 = _member(A, N1, p), _member(B, N2, p)
    u1, u2 = _unique_rows(A, p)[0], _unique_rows(B, p)[0]
    types = (str(dickson.classify_rows(u1, p)), str(dickson.classify_rows(u2, p)))
    quot = (u1.shape[0] // N1.shape[0], u2.shape[0] // N2.shape[0])
    allowed = ("Borel", "SplitCartan", "NonsplitCartan", "Full")
    pa, ma = _pm_mask(A, p)
    pb, mb = _pm_mask(B, p)
    both = (pa | ma) & (pb | mb)
    props = {
        "3a": bool(np.all(in1 == in2)),
        "3b": all(t in allowed for t in types),
        "3c": all(8 % x != 0 for x in quot),
        "3e": bool(np.all(pa[both] == pb[both])),
    }
    return props, types, quot


def first_reduction(G: FiniteGroup, n1: int, n2: int) -> FirstReduction:
    """Run the reduction to a graph-like subgroup T of G (n = 2, l > 5) at the mod-l layer.

    Case 1: an element (+-Id, b) with ord(b) large exists; the ball claims are
    checked where the precision allows.  Otherwise H (index | 24), K (index | 4)
    and T are built as preimages of subgroups of G(l), and T is checked for
    properties (3a)-(3e) (case 3) or for being pro-l (case 2).
    """
    p, m = G.prime, G.precision
    if G.n != 2:
        raise DomainError("first_reduction needs n = 2")
    if p <= 5:
        raise DomainError("first_reduction needs l > 5")
    if n1 < 1 or n2 < 1:
        raise DomainError("ball levels must be positive")
    for j, nj in ((0, n1), (1, n2)):
        if nj < m and not contains_ball(projection(G, [j]), (nj,)):
            raise PreconditionError(f"factor {j + 1} does not contain B({nj})")
    img = G.image
    wit = _easy_witness(img, p)
    if wit is not None:
        return _case_one(G, wit[0], wit[1], n1, n2)

    notes = []
    A = img[:, :4]
    u1 = _unique_rows(A, p)[0]
    type1 = dickson.classify_rows(u1, p)
    maskH = np.ones(img.shape[0], dtype=bool)
    if type1.is_normalizer:
        cm = dickson.cartan_mask(u1, p)
        if cm is None:
            raise ConstructionFailed("normalizer type without a stable pair")
        maskH = _member(A, u1[cm], p)
        notes.append("H: Cartan part of a normalizer")
    elif type1.label == "Exceptional":
        maskH = _member(A, _cyclic_descent(A, p), p)
        notes.append(f"H: cyclic subgroup of the exceptional group {type1.exceptional}")
    H = img[maskH]
    HA, HB = H[:, :4], H[:, 4:]
    pa, ma = _pm_mask(HA, p)
    pb, mb = _pm_mask(HB, p)
    has_split_minus = bool(np.any((ma & pb) | (pa & mb)))
    typeH1 = dickson.classify_rows(_unique_rows(HA, p)[0], p)
    if not has_split_minus:
        maskK = np.ones(H.shape[0], dtype=bool)
    elif typeH1.label == "Full":
        M = _graph_M(H, p)
        if M is None:
            raise ConstructionFailed("(Full, Full) image is not a signed conjugation graph")
        conj = _mul(_mul(np.tile(M, (H.shape[0], 1)), HA, p), _inv(M[None, :], p).repeat(H.shape[0], axis=0), p)
        maskK = ~np.any(conj != HB % p, axis=1)
        notes.append("K: kernel of the sign character")
    else:
        N1, N2 = _sylow_or_trivial(HA, p), _sylow_or_trivial(HB, p)
        nker = H[_member(HA, N1, p) & _member(HB, N2, p)]
        squares = _unique_rows(_mul(H, H, p), p)[0]
        prods = _mul(np.repeat(squares, nker.shape[0], axis=0), np.tile(nker, (squares.shape[0], 1)), p)
        maskK = _member(H, _unique_rows(prods, p)[0], p)
        notes.append("K: kernel to the quotient by squares")
    Krows = H[maskK]
    indices = {"G:H": img.shape[0] // H.shape[0], "H:K": H.shape[0] // Krows.shape[0]}
    propsK, _, _ = _t_properties(Krows, p)
    if propsK["3c"]:
        case, Trows = 3, Krows
    else:
        N1 = _sylow_or_trivial(Krows[:, :4], p)
        case, Trows = 2, Krows[_member(Krows[:, :4], N1, p)]
    T = preimage(G, _member(img, Trows, p))
    props, types, _ = _t_properties(T.image, p)
    idx = img.shape[0] // T.image.shape[0]
    indices["G:T"] = idx
    if case == 3:
        props["3d"] = all(nj >= m or contains_ball(projection(T, [j]), (nj,)) for j, nj in ((0, n1), (1, n2)))
        props["index|192"] = 192 % idx == 0
        if not all(props.values()):
            raise ConstructionFailed(f"T misses properties {[k for k, v in props.items() if not v]}")
    else:
        props = {"pro-l": T.image_is_lgroup(), "3e": props["3e"], "index|2304": 2304 % idx == 0}
        if not all(props.values()):
            raise ConstructionFailed(f"pro-l T misses properties {[k for k, v in props.items() if not v]}")
    return FirstReduction(case, VERIFIED, T, types, indices, props, (), None, tuple(notes))


# ---------------------------------------------------------------- main theorem


def _min_ball_level(H: FiniteGroup, j: int) -> int | None:
    P = projection(H, [j])
    for lvl in _checkable_levels(H.prime, H.precision):
        if contains_ball(P, (lvl,)):
            return lvl
    return None


def _pair_preimage(H: FiniteGroup, i: int, j: int, T: FiniteGroup) -> FiniteGroup:
    cols = list(range(4 * i, 4 * i + 4)) + list(range(4 * j, 4 * j + 4))
    mask = _member(H.image[:, cols], T.image, H.prime)
    return preimage(H, mask)


def main_theorem_harness(G: FiniteGroup, k: int) -> PinkReport:
    """Build H as in the general statement and check its ball conclusion where the precision allows."""
    p, m, n = G.prime, G.precision, G.n
    if k < 1:
        raise DomainError("k must be positive")
    notes = []
    if p == 2:
        if m < 2:
            raise DomainError("l = 2 needs precision at least 2")
        H = reduction_kernel(G, 2)
        notes.append("H: kernel mod 4")
    elif p == 3:
        H = reduction_kernel(G, 1)
        notes.append("H: kernel mod 3")
    elif n == 1:
        H = sylow_preimage_T(G)
        notes.append("H: l-Sylow preimage")
    else:
        H = G
        for t in range(n):
            rows = H.image[:, 4 * t:4 * t + 4]
            if dickson.classify_rows(_unique_rows(rows, p)[0], p).label == "Exceptional":
                H = preimage(H, _member(rows, _cyclic_descent(rows, p), p))
                notes.append(f"factor {t + 1}: cyclic descent")
        for i, j in itertools.combinations(range(n), 2):
            P = projection(H, [i, j])
            if p == 5:
                T = sylow_preimage_T(P)
                notes.append(f"pair ({i + 1},{j + 1}): l-Sylow preimage")
            else:
                ni, nj = _min_ball_level(H, i), _min_ball_level(H, j)
                if ni is None or nj is None:
                    notes.append(f"pair ({i + 1},{j + 1}): no ball below precision, kept as is")
                    continue
                fr = first_reduction(P, ni, nj)
                notes.append(f"pair ({i + 1},{j + 1}): first reduction case {fr.case}")
                if fr.T is None:
                    continue
                T = fr.T
            H = _pair_preimage(H, i, j, T)
    indices = {"G:H": G.order // H.order}
    lie = lie_algebra(H)
    kf = k_found(lie)
    hyp = lie.contains_lattice(ModLattice.scaled_standard(p, lie.precision, 3 * n, k))
    claimed = (607 if p == 2 else 80) * (max(n, 2) - 1) * k
    checked = _ball_scan(H, _checkable_levels(p, m))
    cert = None
    if n >= 2 and claimed < m:
        s = [[0 if a == b else claimed for b in range(n)] for a in range(n)]
        notes.append(f"Goursat recombination: {goursat_combine(H, s).verdict}")
    if not hyp:
        verdict = VERIFIED
        notes.append("hypothesis fails, statement holds vacuously")
    elif claimed < m:
        ok = contains_ball(H, (claimed,) * n)
        verdict = VERIFIED if ok else VIOLATION
        if not ok:
            cert = {"generators": [g.key() for g in G.generators], "level": claimed}
    else:
        verdict = INCONCLUSIVE
        notes.append(f"claimed level {claimed} is not below the precision {m}")
    return PinkReport("main-theorem", p, m, n, lie, kf, k, hyp, claimed, checked, indices, verdict,
                      tuple(notes), cert)


# ---------------------------------------------------------------- graph of SL2 intermediate


@dataclass
class GraphSL2Report:
    level: int
    witness: GroupElement
    kernel_element: GroupElement
    u: tuple[int, ...]
    saturated: ModLattice
    intermediate_level: int
    intermediate: bool | None
    claim_level: int
    claim: bool | None
    verdict: str


def graph_sl2_intermediate(G: FiniteGroup | Sequence[GroupElement], level: int,
                           cap: int = DEFAULT_CAP) -> GraphSL2Report:
    """Certify {Id} x B(2(level-1)) inside G' for a graph-like G with a defect at `level`.

    Needs an element trivial mod l^level in one slot but not the other, and
    G_1 = SL2.  The first slot is corrected to Id using l^(level-1) powers of
    elements with first parts R(l), L(l), D(l); the resulting (Id, u) is then
    saturated under conjugation and its normal closure is checked.
    """
    gens = _gens(G)
    p, m, n = _ring(gens)
    if n != 2 or p < 7:
        raise DomainError("needs n = 2 and l >= 7")
    if not 2 <= level <= m:
        raise DomainError("level must lie in [2, m]")
    wit = graph_defect(gens, level, cap)
    if wit is None:
        raise HypothesisUnmet(f"G(l^{level}) is the graph of an isomorphism")
    slot = 1 if wit.parts[0].congruent_identity(level) else 0
    other = 1 - slot
    z = GroupElement.identity(p, m, 2)
    if not wit.parts[other].is_identity():
        targets = {}
        for mat in (R(p, p, m), L(p, p, m), D(p, p, m)):
            targets[mat.residues()] = mat
        cols = list(range(4 * other, 4 * other + 4))
        hits, _ = search_elements(gens, lambda rows: [tuple(r) for r in rows[:, cols].tolist()], targets, cap)
        if len(hits) < 3:
            raise HypothesisUnmet("could not find lifts of R(l), L(l), D(l) in the first factor")
        small = [h ** (p ** (level - 1)) for h in hits.values()]
        P = closure(small, cap)
        want = wit.parts[other].inverse().residues()
        rows = P.elements()
        match = np.flatnonzero(~np.any(rows[:, cols] != np.array(want), axis=1))
        if not match.size:
            raise LemmaViolation("power subgroup misses the inverse of the witness")
        z = GroupElement.from_residues(p, m, rows[match[0]].tolist())
    g = z * wit
    if not g.parts[other].is_identity() or g.parts[slot].congruent_identity(level):
        raise LemmaViolation("corrected element is not of the form (Id, u) with u nontrivial")
    u = theta(g.parts[slot])
    W = ModLattice.span(p, m, 3, [u])
    sat = W
    ops = [conjugation_operator(h.parts[slot]) for h in gens]
    while True:
        nxt = sat
        for T in ops:
            nxt = nxt + nxt.apply_operator(T)
        if nxt == sat:
            break
        sat = nxt
    t = level - 1
    if t < m:
        conj_saturate(W, 0, t)  # raises LemmaViolation if the ball is missing
    inter = 2 * (level - 1)
    status = None
    if inter < m:
        K = _slot_closure([g], gens, slot, cap)
        status = contains_ball(derived_subgroup(K), (inter,))
        if not status:
            raise LemmaViolation(f"derived subgroup lacks Id x B({inter})")
    claim = 4 * (level - 1)
    claim_status = None
    if claim < m and isinstance(G, FiniteGroup):
        claim_status = contains_ball(derived_subgroup(G), (claim, claim))
        if not claim_status:
            raise LemmaViolation(f"G' lacks B({claim},{claim})")
    verdict = INCONCLUSIVE if claim_status is None else VERIFIED
    return GraphSL2Report(level, wit, g, u, sat, inter, status, claim, claim_status, verdict)


# ---------------------------------------------------------------- 2-adic example group


def example_graph_group(n1: int, p: int, m: int, cap: int = DEFAULT_CAP) -> FiniteGroup:
    """Group generated by B_2(p, p) and the diagonal copy of B_2(n1)."""
    if not 3 <= n1 < p < m:
        raise DomainError("need 3 <= n1 < p < m")
    gens = ball_tuple_generators(2, m, (p, p))
    for mat in (L(2**n1, 2, m), R(2**n1, 2, m), D(2**n1, 2, m)):
        gens.append(GroupElement((mat, mat)))
    return closure(gens, cap)


def remark_conjugation_identities(n1: int, m: int) -> dict[str, bool]:
    """Conjugation by N = diag(2^(n1+1), 1): exact over Q and as integer identities mod 2^m."""
    a = 2 ** (2 * n1 + 1)
    N = [[Fraction(2 ** (n1 + 1)), Fraction(0)], [Fraction(0), Fraction(1)]]
    Ni = [[1 / N[0][0], Fraction(0)], [Fraction(0), Fraction(1)]]

    def mm(X, Y):
        return [[sum(X[i][k] * Y[k][j] for k in range(2)) for j in range(2)] for i in range(2)]

    Rq = [[Fraction(1), Fraction(a)], [Fraction(0), Fraction(1)]]
    Lq = [[Fraction(1), Fraction(0)], [Fraction(a), Fraction(1)]]
    out = {
        "N^-1 R(2^(2n1+1)) N = R(2^n1)": mm(mm(Ni, Rq), N) == [[1, 2**n1], [0, 1]],
        "N^-1 L(2^(2n1+1)) N = L(2^(3n1+2))": mm(mm(Ni, Lq), N) == [[1, 0], [2 ** (3 * n1 + 2), 1]],
    }
    q = 2**m
    Nm = Mat2(2, m, 2 ** (n1 + 1), 0, 0, 1)
    out["N R(2^n1) = R(2^(2n1+1)) N mod 2^m"] = (Nm * R(2**n1, 2, m)).residues() == (R(a, 2, m) * Nm).residues()
    out["L(2^(2n1+1)) N = N L(2^(3n1+2)) mod 2^m"] = (
        (L(a, 2, m) * Nm).residues() == (Nm * L(2 ** (3 * n1 + 2) % q, 2, m)).residues()
    )
    return out
