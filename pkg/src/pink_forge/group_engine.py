"""Finite-level subgroups of GL2(Z/l^m)^n.

A group is stored in two layers: its image mod l (with one lift per image
element) and the kernel of reduction mod l, both enumerated and sorted.  Every
element is then `lift * kernel_element` for a unique pair, which makes
membership a two-step lookup and lets groups like SL2(Z/49)^2 (about 10^10
elements) live in a few megabytes.  Rows are int64 vectors of 4n residues,
row-major per factor; sorting is lexicographic on those tuples.
"""

from __future__ import annotations

import itertools
from collections.abc import Callable, Iterable, Iterator, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CapExceeded,
    DomainError,
    HypothesisUnmet,
    LemmaViolation,
    PrecisionMismatch,
)
from .padic_matrix import Ball, GroupElement, Mat2, comm, comm_iterated, standard_gen
from .padic_scalar import check_prime_precision, vee

DEFAULT_CAP = 2**24
ENGINE_MODULUS_CAP = 2**31  # keeps a*e + b*g below 2^63 in int64
_CHUNK = 1 << 21  # rows per vectorized product batch


# ---------------------------------------------------------------- row arithmetic


def _mul(A: np.ndarray, B: np.ndarray, q: int) -> np.ndarray:
    """Row-wise product of (N, 4n) arrays (B may be a single row)."""
    n = A.shape[-1] // 4
    A3 = A.reshape(-1, n, 4)
    B3 = np.broadcast_to(B.reshape(-1, n, 4), A3.shape)
    a, b, c, d = (A3[..., i] for i in range(4))
    e, f, g, h = (B3[..., i] for i in range(4))
    out = np.empty(A3.shape, dtype=np.int64)
    out[..., 0] = (a * e + b * g) % q
    out[..., 1] = (a * f + b * h) % q
    out[..., 2] = (c * e + d * g) % q
    out[..., 3] = (c * f + d * h) % q
    return out.reshape(A.shape[0] if A.ndim == 2 else 1, -1)


def _inv(A: np.ndarray, q: int) -> np.ndarray:
    n = A.shape[-1] // 4
    A3 = A.reshape(-1, n, 4)
    a, b, c, d = (A3[..., i] for i in range(4))
    det = (a * d - b * c) % q
    out = np.empty(A3.shape, dtype=np.int64)
    out[..., 0], out[..., 1], out[..., 2], out[..., 3] = d, (-b) % q, (-c) % q, a
    if np.any(det != 1):
        inv = np.ones_like(det)
        for val in np.unique(det):
            if val != 1:
                inv[det == val] = pow(int(val), -1, q)
        out = (out * inv[..., None]) % q
    return out.reshape(A.shape)


def _identity_row(n: int) -> np.ndarray:
    return np.tile(np.array([1, 0, 0, 1], dtype=np.int64), n)


def _is_identity_mod(A: np.ndarray, r: int, slots: Sequence[int] | None = None) -> np.ndarray:
    """Mask of rows that are Id mod r in every listed slot (all slots by default)."""
    n = A.shape[1] // 4
    ident = _identity_row(n)
    diff = (A - ident) % r
    if slots is None:
        return ~np.any(diff != 0, axis=1)
    cols = [4 * s + i for s in slots for i in range(4)]
    return ~np.any(diff[:, cols] != 0, axis=1)


def _keys(A: np.ndarray, q: int) -> np.ndarray:
    """Sort keys whose order is lexicographic on rows with entries in [0, q)."""
    width = A.shape[1]
    if q**width < 2**63:
        k = np.zeros(A.shape[0], dtype=np.int64)
        for j in range(width):
            k = k * q + A[:, j]
        return k
    return np.ascontiguousarray(A.astype(">i8")).view(f"V{8 * width}").ravel()


def _lookup(sorted_keys: np.ndarray, keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Positions of `keys` in `sorted_keys` and a found-mask."""
    if sorted_keys.size == 0:
        return np.zeros(keys.shape[0], dtype=np.int64), np.zeros(keys.shape[0], dtype=bool)
    pos = np.searchsorted(sorted_keys, keys)
    pos_c = np.minimum(pos, sorted_keys.size - 1)
    return pos_c, sorted_keys[pos_c] == keys


def _merge(seen, seen_k, rows, k):
    """Merge sorted (seen, seen_k) with disjoint sorted (rows, k)."""
    pos = np.searchsorted(seen_k, k)
    return np.insert(seen, pos, rows, axis=0), np.insert(seen_k, pos, k)


def _unique_rows(A: np.ndarray, q: int) -> tuple[np.ndarray, np.ndarray]:
    k = _keys(A, q)
    uk, idx = np.unique(k, return_index=True)
    return A[idx], uk


def _products(frontier: np.ndarray, gens: np.ndarray, q: int) -> Iterator[np.ndarray]:
    """All frontier[i] * gens[j], in batches."""
    step = max(1, _CHUNK // max(1, gens.shape[0]))
    for s in range(0, frontier.shape[0], step):
        F = frontier[s:s + step]
        yield _mul(np.repeat(F, gens.shape[0], axis=0), np.tile(gens, (F.shape[0], 1)), q)


def _bfs(gens: np.ndarray, q: int, cap: int, seed: np.ndarray | None = None, what: str = "group",
         fresh: int = 0):
    """Closure of `gens`, optionally starting from a set `seed` already closed
    under all but the last `fresh` generators.

    Returns (rows, keys), sorted by key.
    """
    width = gens.shape[1]
    allg, _ = _unique_rows(np.concatenate([gens, _inv(gens, q)]), q)
    if seed is None:
        seen = _identity_row(width // 4)[None, :]
    else:
        seen = seed
    seen_k = _keys(seen, q)
    order = np.argsort(seen_k, kind="stable")
    seen, seen_k = seen[order], seen_k[order]
    frontier = seen
    if seed is not None and fresh:
        # a path leaving the old subgroup first does so through a new generator
        new = gens[-fresh:]
        new = np.concatenate([new, _inv(new, q)])
        rows, k = _unique_rows(np.concatenate(list(_products(seen, new, q))), q)
        _, found = _lookup(seen_k, k)
        rows, k = rows[~found], k[~found]
        if seen.shape[0] + rows.shape[0] > cap:
            raise CapExceeded(cap, what)
        seen, seen_k = _merge(seen, seen_k, rows, k)
        frontier = rows
    while frontier.shape[0]:
        fresh_rows, fresh_keys = [], []
        for cand in _products(frontier, allg, q):
            rows, k = _unique_rows(cand, q)
            _, found = _lookup(seen_k, k)
            fresh_rows.append(rows[~found])
            fresh_keys.append(k[~found])
        if not fresh_rows:
            break
        rows = np.concatenate(fresh_rows)
        k = np.concatenate(fresh_keys)
        k, idx = np.unique(k, return_index=True)
        rows = rows[idx]
        if seen.shape[0] + rows.shape[0] > cap:
            raise CapExceeded(cap, what)
        seen, seen_k = _merge(seen, seen_k, rows, k)
        frontier = rows
    return seen, seen_k


def _image_bfs(gens: np.ndarray, prime: int, q: int, cap: int):
    """Closure of the image mod l, tracking one lift per image element.

    Returns (image rows, image keys, lifts, schreier rows).  The Schreier rows
    u_t s u_{ts}^-1 generate the kernel of reduction.
    """
    width = gens.shape[1]
    allg, _ = _unique_rows(np.concatenate([gens, _inv(gens, q)]), q)
    ident = _identity_row(width // 4)[None, :]
    img, img_k, lifts = ident % prime, _keys(ident % prime, prime), ident
    frontier = ident
    schreier = []
    while frontier.shape[0]:
        new_l, new_k = [], []
        for cand in _products(frontier, allg, q):
            ck = _keys(cand % prime, prime)
            pos, found = _lookup(img_k, ck)
            if found.any():
                hit = cand[found]
                s = _mul(hit, _inv(lifts[pos[found]], q), q)
                s = s[~_is_identity_mod(s, q)]
                if s.size:
                    schreier.append(_unique_rows(s, q)[0])
            new_l.append(cand[~found])
            new_k.append(ck[~found])
        rows = np.concatenate(new_l)
        k = np.concatenate(new_k)
        if not rows.shape[0]:
            break
        uk, idx, inv_idx = np.unique(k, return_index=True, return_inverse=True)
        first = rows[idx]
        # duplicates inside this round also yield Schreier elements
        dup = np.ones(rows.shape[0], dtype=bool)
        dup[idx] = False
        if dup.any():
            s = _mul(rows[dup], _inv(first[inv_idx[dup]], q), q)
            s = s[~_is_identity_mod(s, q)]
            if s.size:
                schreier.append(_unique_rows(s, q)[0])
        if img.shape[0] + first.shape[0] > cap:
            raise CapExceeded(cap, "image mod l")
        img = np.concatenate([img, first % prime])
        img_k = np.concatenate([img_k, uk])
        lifts = np.concatenate([lifts, first])
        order = np.argsort(img_k, kind="stable")
        img, img_k, lifts = img[order], img_k[order], lifts[order]
        frontier = first
    srows = np.concatenate(schreier) if schreier else np.zeros((0, width), dtype=np.int64)
    if srows.shape[0]:
        srows, _ = _unique_rows(srows, q)
    return img, img_k, lifts, srows


def _grow_subgroup(candidates: np.ndarray, q: int, cap: int, what: str, base=None):
    """Subgroup generated by the rows of `candidates`, adding one generator at a time.

    Returns (rows, keys, generator rows).  Only candidates outside the current
    subgroup are ever added, so the generator list stays short.
    """
    width = candidates.shape[1]
    if base is None:
        rows = _identity_row(width // 4)[None, :]
        keys = _keys(rows, q)
        gens = np.zeros((0, width), dtype=np.int64)
    else:
        rows, keys, gens = base
    pending = candidates
    while pending.shape[0]:
        _, found = _lookup(keys, _keys(pending, q))
        pending = pending[~found]
        if not pending.shape[0]:
            break
        gens = np.concatenate([gens, pending[:1]])
        rows, keys = _bfs(gens, q, cap, seed=rows, what=what, fresh=1)
    return rows, keys, gens


# ---------------------------------------------------------------- FiniteGroup


@dataclass(frozen=True, eq=False)
class FiniteGroup:
    """An enumerated subgroup of GL2(Z/l^m)^n (see module docstring for the layout)."""

    prime: int
    precision: int
    n: int
    generators: tuple[GroupElement, ...]
    image: np.ndarray = field(repr=False)
    image_keys: np.ndarray = field(repr=False)
    lifts: np.ndarray = field(repr=False)
    kernel: np.ndarray = field(repr=False)
    kernel_keys: np.ndarray = field(repr=False)
    kernel_generators: np.ndarray = field(repr=False)
    cap: int = DEFAULT_CAP

    @property
    def modulus(self) -> int:
        return self.prime**self.precision

    @property
    def order(self) -> int:
        return int(self.image.shape[0]) * int(self.kernel.shape[0])

    def __len__(self) -> int:
        return self.order

    @property
    def width(self) -> int:
        return 4 * self.n

    def generator_rows(self) -> np.ndarray:
        if not self.generators:
            return np.zeros((0, self.width), dtype=np.int64)
        return np.array([g.key() for g in self.generators], dtype=np.int64)

    def contains_rows(self, A: np.ndarray) -> np.ndarray:
        A = np.asarray(A, dtype=np.int64).reshape(-1, self.width) % self.modulus
        pos, found = _lookup(self.image_keys, _keys(A % self.prime, self.prime))
        out = np.zeros(A.shape[0], dtype=bool)
        if found.any():
            k = _mul(_inv(self.lifts[pos[found]], self.modulus), A[found], self.modulus)
            _, inker = _lookup(self.kernel_keys, _keys(k, self.modulus))
            out[found] = inker
        return out

    def __contains__(self, g) -> bool:
        if isinstance(g, Mat2):
            g = GroupElement((g,))
        if (g.prime, g.precision, g.n) != (self.prime, self.precision, self.n):
            raise PrecisionMismatch("element and group live in different rings")
        return bool(self.contains_rows(np.array(g.key(), dtype=np.int64))[0])

    def elements(self, cap: int | None = None) -> np.ndarray:
        """All elements as a sorted (order, 4n) array."""
        cap = self.cap if cap is None else cap
        if self.order > cap:
            raise CapExceeded(cap, "element listing")
        q = self.modulus
        parts = [_mul(np.repeat(self.lifts[i:i + 1], self.kernel.shape[0], axis=0), self.kernel, q)
                 for i in range(self.image.shape[0])]
        rows = np.concatenate(parts)
        order = np.argsort(_keys(rows, q), kind="stable")
        return rows[order]

    def __iter__(self) -> Iterator[GroupElement]:
        for row in self.elements():
            yield GroupElement.from_residues(self.prime, self.precision, row.tolist())

    def is_proell(self) -> bool:
        """True when the image mod l is trivial (for l odd: the group is pro-l)."""
        return self.image.shape[0] == 1

    def image_is_lgroup(self) -> bool:
        size = self.image.shape[0]
        while size % self.prime == 0:
            size //= self.prime
        return size == 1

    def identity(self) -> GroupElement:
        return GroupElement.identity(self.prime, self.precision, self.n)

    def __repr__(self):
        return (f"FiniteGroup(l={self.prime}, m={self.precision}, n={self.n}, order={self.order}, "
                f"image={self.image.shape[0]}, kernel={self.kernel.shape[0]})")


def _check_generators(generators: Sequence[GroupElement], allow_gl: bool):
    if not generators:
        raise DomainError("at least one generator (possibly Id) is required")
    g0 = generators[0]
    ring = (g0.prime, g0.precision, g0.n)
    for g in generators:
        if (g.prime, g.precision, g.n) != ring:
            raise PrecisionMismatch("generators live in different rings")
        for p in g.parts:
            det = p.det()
            if not allow_gl and det != 1:
                raise DomainError(f"generator part {p} does not have determinant 1")
            if det % g.prime == 0:
                raise DomainError(f"generator part {p} is not invertible")
    q = g0.prime**g0.precision
    if q >= ENGINE_MODULUS_CAP:
        raise DomainError("the group engine needs l^m < 2^31")
    return ring


def closure(generators: Iterable[GroupElement], cap: int = DEFAULT_CAP, allow_gl: bool = False) -> FiniteGroup:
    """The subgroup generated by `generators`, fully enumerated in two layers.

    `cap` bounds each stored layer (image mod l and kernel); `elements()`
    additionally refuses to list more than `cap` rows.
    """
    generators = tuple(generators)
    prime, precision, n = _check_generators(generators, allow_gl)
    q = prime**precision
    gens = np.array([g.key() for g in generators], dtype=np.int64)
    img, img_k, lifts, schreier = _image_bfs(gens, prime, q, cap)
    if precision == 1:
        schreier = schreier[:0]
    kernel, kernel_k, kgens = _grow_subgroup(schreier, q, cap, "kernel mod l")
    return FiniteGroup(prime, precision, n, generators, img, img_k, lifts, kernel, kernel_k, kgens, cap)


def group_from_layers(prime, precision, n, image, lifts, kernel, kernel_gens, cap=DEFAULT_CAP,
                      generators: Sequence[GroupElement] | None = None) -> FiniteGroup:
    """Assemble a group from a closed sub-image (with lifts) and a kernel.

    The image must be a subgroup of GL2(F_l)^n and the kernel must be normalized
    by the lifts; callers guarantee both (typically a preimage construction).
    """
    q = prime**precision
    img_k = _keys(image, prime)
    order = np.argsort(img_k, kind="stable")
    image, img_k, lifts = image[order], img_k[order], lifts[order]
    ker_k = _keys(kernel, q)
    korder = np.argsort(ker_k, kind="stable")
    kernel, ker_k = kernel[korder], ker_k[korder]
    if generators is None:
        _, _, img_gens = _grow_subgroup(image, prime, cap, "image mod l")
        pos, _ = _lookup(img_k, _keys(img_gens, prime))
        rows = np.concatenate([lifts[pos], kernel_gens]) if kernel_gens.shape[0] else lifts[pos]
        if not rows.shape[0]:
            rows = _identity_row(n)[None, :]
        generators = tuple(GroupElement.from_residues(prime, precision, r.tolist()) for r in rows)
    return FiniteGroup(prime, precision, n, tuple(generators), image, img_k, lifts, kernel, ker_k,
                       kernel_gens, cap)


def from_elements(prime: int, precision: int, rows: np.ndarray, cap: int = DEFAULT_CAP) -> FiniteGroup:
    """The group whose element set is `rows` (which must be closed under products)."""
    rows = np.asarray(rows, dtype=np.int64)
    q = prime**precision
    elems, _, gens = _grow_subgroup(rows, q, cap, "group")
    if elems.shape[0] != _unique_rows(rows, q)[0].shape[0]:
        raise DomainError("row set is not closed under multiplication")
    if not gens.shape[0]:
        gens = _identity_row(rows.shape[1] // 4)[None, :]
    return closure([GroupElement.from_residues(prime, precision, g.tolist()) for g in gens], cap)


def preimage(G: FiniteGroup, mask: np.ndarray) -> FiniteGroup:
    """Preimage in G of the sub-image selected by a boolean mask over G.image."""
    return group_from_layers(G.prime, G.precision, G.n, G.image[mask], G.lifts[mask], G.kernel,
                             G.kernel_generators, G.cap)


def trivial_group(prime: int, precision: int, n: int) -> FiniteGroup:
    return closure([GroupElement.identity(prime, precision, n)])


# ---------------------------------------------------------------- operations


def _ball_level_ok(prime: int, s: int) -> bool:
    if s == 0:
        return prime >= 5
    return prime >= 3 or s >= 2


def ball_tuple_generators(prime: int, precision: int, levels: Sequence[int]) -> list[GroupElement]:
    """Tuple generators of B(levels): L, R, D(l^s) per factor, or L(1), R(1) when s = 0."""
    n = len(levels)
    out = []
    for j, s in enumerate(levels):
        if not _ball_level_ok(prime, s):
            raise DomainError(f"level {s} is outside the range where the ball generators are known (l = {prime})")
        if s >= precision:
            continue
        if s == 0:
            mats = [standard_gen(k, 1, prime, precision) for k in "LR"]
        else:
            mats = [standard_gen(k, prime**s, prime, precision) for k in "LRD"]
        out.extend(GroupElement.embed(mat, j, n) for mat in mats)
    return out


def contains_ball(G: FiniteGroup, levels: Ball | Sequence[int]) -> bool:
    """Whether G contains B_l(levels) at precision m.

    Levels s >= 1 use the L, R, D(l^s) generators; s = 0 (l >= 5) uses L(1), R(1),
    which generate SL2(Z/l^m) because SL2(Z) surjects onto it.
    """
    lv = levels.levels if isinstance(levels, Ball) else tuple(levels)
    if len(lv) != G.n:
        raise DomainError("ball and group have different numbers of factors")
    gens = ball_tuple_generators(G.prime, G.precision, lv)
    if not gens:
        return True
    rows = np.array([g.key() for g in gens], dtype=np.int64)
    return bool(G.contains_rows(rows).all())


def ball_group(prime: int, precision: int, levels: Sequence[int], cap: int = DEFAULT_CAP) -> FiniteGroup:
    gens = ball_tuple_generators(prime, precision, levels) or [GroupElement.identity(prime, precision, len(levels))]
    return closure(gens, cap)


def sl2_generators(prime: int, precision: int, n: int = 1, slots: Sequence[int] | None = None) -> list[GroupElement]:
    """L(1), R(1) in each listed slot: generators of SL2(Z/l^m) per factor."""
    slots = range(n) if slots is None else slots
    return [GroupElement.embed(standard_gen(k, 1, prime, precision), j, n) for j in slots for k in "LR"]


def normal_closure(G: FiniteGroup, elements: Sequence[GroupElement], cap: int | None = None) -> FiniteGroup:
    """Smallest subgroup containing `elements` and normalized by the generators of G."""
    cap = G.cap if cap is None else cap
    return _normal_closure_by(closure(list(elements) or [G.identity()], cap), G.generators, cap)


def derived_subgroup(G: FiniteGroup, cap: int | None = None) -> FiniteGroup:
    """G' as the normal closure of commutators of generators."""
    gens = G.generators
    comms = [comm(a, b) for a, b in itertools.combinations(gens, 2)]
    comms = [c for c in comms if not c.is_identity()]
    return normal_closure(G, comms, cap)


def commutator_subgroup(A: FiniteGroup, B: FiniteGroup, cap: int = DEFAULT_CAP) -> FiniteGroup:
    """[A, B]: normal closure in <A, B> of the commutators of generators."""
    ambient = closure(list(A.generators) + list(B.generators), cap)
    comms = [comm(a, b) for a in A.generators for b in B.generators]
    return normal_closure(ambient, [c for c in comms if not c.is_identity()], cap)


def _random_ball_element(rng, prime: int, precision: int, s: int) -> Mat2:
    q = prime**precision
    if s == 0:
        return (standard_gen("L", rng.randrange(q), prime, precision)
                * standard_gen("R", rng.randrange(q), prime, precision)
                * standard_gen("L", rng.randrange(q), prime, precision))
    # L(x) R(y) D(z) with v(x), v(y), v(z) >= s covers all of B(s)
    a = prime**s
    return (standard_gen("L", a * rng.randrange(q), prime, precision)
            * standard_gen("R", a * rng.randrange(q), prime, precision)
            * standard_gen("D", a * rng.randrange(q), prime, precision))


def _frattini_vector(g: Mat2, k: int) -> tuple[int, int, int]:
    p = g.prime
    s = p**k
    return ((g.a - 1) // s % p, g.b // s % p, g.c // s % p)


def _rank_mod_p(rows: list[tuple[int, ...]], p: int) -> int:
    rows = [list(r) for r in rows]
    rank, col, width = 0, 0, len(rows[0]) if rows else 0
    while rank < len(rows) and col < width:
        piv = next((i for i in range(rank, len(rows)) if rows[i][col] % p), None)
        if piv is None:
            col += 1
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        inv = pow(rows[rank][col], -1, p)
        rows[rank] = [x * inv % p for x in rows[rank]]
        for i in range(len(rows)):
            if i != rank and rows[i][col] % p:
                f = rows[i][col]
                rows[i] = [(x - f * y) % p for x, y in zip(rows[i], rows[rank])]
        rank += 1
        col += 1
    return rank


def _sift(g: Mat2, start: int, target: int, bases: dict, queue: list) -> bool:
    """Push g (in B(start)) up to B(target) by cancelling its images against `bases`.

    bases[j] holds (pivot, vector, element) triples in reduced echelon form for
    B(j)/B(j+1).  A new direction at level j < target is recorded and its l-th
    power queued for the next level.  Returns True when g adds a new direction
    at level `target`.
    """
    p = g.prime
    j = start
    while True:
        while j < target and g.congruent_identity(j + 1):
            j += 1
        if g.congruent_identity(target + 1) and j >= target:
            return False
        vec = list(_frattini_vector(g, j))
        for piv, bvec, elt in bases.setdefault(j, []):
            coef = vec[piv]
            if coef:
                g = g * elt ** (p - coef)
                vec = [(x - coef * y) % p for x, y in zip(vec, bvec)]
        piv = next((i for i, x in enumerate(vec) if x), None)
        if piv is None:
            if j >= target:
                return False
            j += 1
            continue
        inv = pow(vec[piv], -1, p)
        g = g**inv
        vec = [x * inv % p for x in vec]
        for idx, (bp, bvec, belt) in enumerate(bases[j]):
            coef = bvec[piv]
            if coef:
                bases[j][idx] = (bp, [(x - coef * y) % p for x, y in zip(bvec, vec)], belt * g ** (p - coef))
        bases[j].append((piv, vec, g))
        if j >= target:
            return True
        queue.append((g**p, j + 1))
        return False


def commutator_ball_certificate(prime: int, precision: int, levels: Sequence[int], seed: int = 0,
                                tries: int = 400) -> list[Mat2] | None:
    """Witnesses that Comm(B(s1), ..., B(sn)) contains B(k), k = sum(s) + (n-1)v, without enumeration.

    Random iterated commutators lie in B(sum(s)) and in the commutator group C.
    Sifting them level by level (products and l-th powers stay in C) yields
    elements of C in B(k); three whose images span B(k)/B(k+1) generate B(k)
    by the Burnside basis theorem, as B(k+1) is the Frattini subgroup of B(k)
    for k >= 1 + v.  Returns the witnesses, or None if `tries` samples did not
    reach rank 3.
    """
    import random

    v = vee(prime)
    n = len(levels)
    k = sum(levels) + (n - 1) * v
    start = sum(levels)
    if k < 1 + v or k >= precision:
        raise DomainError(f"certificate needs 1 + v <= {k} < m")
    rng = random.Random(seed)
    bases: dict = {}
    queue: list = []
    for _ in range(tries):
        c = comm_iterated([_random_ball_element(rng, prime, precision, s) for s in levels])
        if not c.congruent_identity(start):
            raise LemmaViolation("iterated commutator outside B(sum of levels)")
        queue.append((c, start))
        while queue:
            g, j = queue.pop()
            _sift(g, j, k, bases, queue)
            if len(bases.get(k, ())) == 3:
                return [elt for _, _, elt in bases[k]]
    return None


def commutator_ball_check(prime: int, precision: int, levels: Sequence[int],
                          cap: int = DEFAULT_CAP, method: str = "enumerate") -> tuple[int, bool | None]:
    """Does Comm(B(s1), ..., B(sn)) contain B(s1 + ... + sn + (n-1)v)?

    `method` is "enumerate" (closure and exact membership) or "frattini"
    (see commutator_ball_certificate).  Returns (level, answer); the answer is
    None when the level is not below the precision or no certificate was found.
    """
    check_prime_precision(prime, precision)
    if len(levels) < 2:
        raise DomainError("need at least two ball levels")
    for s in levels:
        if not _ball_level_ok(prime, s):
            raise DomainError(f"ball level {s} invalid for l = {prime}")
    level = sum(levels) + (len(levels) - 1) * vee(prime)
    if level >= precision:
        return level, None
    if method == "frattini":
        return level, (True if commutator_ball_certificate(prime, precision, levels) else None)
    if method != "enumerate":
        raise DomainError(f"unknown method {method!r}")
    C = ball_group(prime, precision, (levels[0],), cap)
    for s in levels[1:]:
        C = commutator_subgroup(C, ball_group(prime, precision, (s,), cap), cap)
    return level, contains_ball(C, (level,))


def reduction_image(G: FiniteGroup, k: int) -> FiniteGroup:
    if not 1 <= k <= G.precision:
        raise DomainError("reduction level must lie in [1, m]")
    if k == G.precision:
        return G
    if k == 1:
        ker = _identity_row(G.n)[None, :]
        gens = tuple(g.reduce(1) for g in G.generators)
        return FiniteGroup(G.prime, 1, G.n, gens, G.image, G.image_keys, G.image, ker,
                           _keys(ker, G.prime), ker[:0], G.cap)
    return closure([g.reduce(k) for g in G.generators], G.cap, allow_gl=True)


def reduction_kernel(G: FiniteGroup, k: int) -> FiniteGroup:
    """{g in G : g = Id mod l^k}, at precision m."""
    if not 1 <= k <= G.precision:
        raise DomainError("reduction level must lie in [1, m]")
    rows = G.kernel[_is_identity_mod(G.kernel, G.prime**k)]
    if k == 1:
        gens = G.kernel_generators
        if not gens.shape[0]:
            gens = _identity_row(G.n)[None, :]
        return closure([GroupElement.from_residues(G.prime, G.precision, r.tolist()) for r in gens], G.cap)
    return from_elements(G.prime, G.precision, rows, G.cap)


def projection(G: FiniteGroup, slots: Sequence[int]) -> FiniteGroup:
    """Image of G under the projection to the listed factors."""
    gens = [GroupElement(tuple(g.parts[s] for s in slots)) for g in G.generators]
    return closure(gens, G.cap, allow_gl=True)


def index(G: FiniteGroup, H: FiniteGroup) -> int:
    if not all(h in G for h in H.generators):
        raise DomainError("H is not a subgroup of G")
    if G.order % H.order:
        raise LemmaViolation("subgroup order does not divide group order")
    return G.order // H.order


def _factor_rows(image: np.ndarray, j: int) -> np.ndarray:
    return image[:, 4 * j:4 * j + 4]


def max_normal_proell(G: FiniteGroup) -> FiniteGroup:
    """N(G): preimage of the product of the per-factor normal l-Sylows of G(l)."""
    from .dickson import ell_sylow_rows

    p = G.prime
    mask = np.ones(G.image.shape[0], dtype=bool)
    for j in range(G.n):
        proj, _ = _unique_rows(_factor_rows(G.image, j), p)
        syl = ell_sylow_rows(proj, p)
        if syl is None:
            syl = np.array([[1, 0, 0, 1]], dtype=np.int64)
        _, found = _lookup(np.sort(_keys(syl, p)), _keys(_factor_rows(G.image, j), p))
        mask &= found
    return preimage(G, mask)


# ---------------------------------------------------------------- witness search


def search_elements(generators: Sequence[GroupElement], project: Callable[[np.ndarray], np.ndarray],
                    targets: dict, cap: int = DEFAULT_CAP) -> tuple[dict, bool]:
    """Breadth-first search through the group generated by `generators` for elements
    whose projection key (rows -> keys) matches a target.

    Powers of each generator are visited first, so l-power multiples of
    generators are found immediately.  Returns ({target: GroupElement}, exhausted),
    where exhausted means the whole group was enumerated.
    """
    prime, precision, n = _check_generators(generators, allow_gl=True)
    q = prime**precision
    gens = np.array([g.key() for g in generators], dtype=np.int64)
    allg, _ = _unique_rows(np.concatenate([gens, _inv(gens, q)]), q)
    found: dict = {}

    def scan(rows):
        for i, kk in enumerate(project(rows)):
            if kk in targets and kk not in found:
                found[kk] = GroupElement.from_residues(prime, precision, rows[i].tolist())

    powers = [_identity_row(n)[None, :]]
    for g in gens:
        x = g[None, :]
        for _ in range(q * q):
            if _is_identity_mod(x, q)[0]:
                break
            powers.append(x)
            x = _mul(x, g[None, :], q)
    seen, seen_k = _unique_rows(np.concatenate(powers), q)
    order = np.argsort(seen_k)
    seen, seen_k = seen[order], seen_k[order]
    scan(seen)
    frontier = seen
    while frontier.shape[0] and len(found) < len(targets):
        new_rows = []
        for cand in _products(frontier, allg, q):
            rows, k = _unique_rows(cand, q)
            _, hit = _lookup(seen_k, k)
            new_rows.append(rows[~hit])
        rows, k = _unique_rows(np.concatenate(new_rows), q)
        if seen.shape[0] + rows.shape[0] > cap:
            scan(rows)
            if len(found) == len(targets):
                break
            raise CapExceeded(cap, "witness search")
        scan(rows)
        seen, seen_k = _merge(seen, seen_k, rows, k)
        frontier = rows
    return found, frontier.shape[0] == 0


def _pair_projector(i: int, j: int) -> Callable[[np.ndarray], list]:
    cols = [4 * i + t for t in range(4)] + [4 * j + t for t in range(4)]
    return lambda rows: [tuple(r) for r in rows[:, cols].tolist()]


class _SlotSifter:
    """Level-by-level sifting of elements whose slot j lies in B(1).

    bases[k] holds (pivot, vector, element) triples, in reduced echelon form,
    spanning the image of (H cap B(k)) / B(k+1) in slot j, where H is the
    group generated by everything inserted.  The set is closed under l-th
    powers and commutators, so it is a polycyclic generating sequence for the
    slot-j image of H and `express` is exact.  Elements that sift to Id in
    slot j without being Id are kept in `residues`.
    """

    def __init__(self, prime: int, precision: int, slot: int):
        self.p, self.m, self.j = prime, precision, slot
        self.bases: dict[int, list] = {}
        self.residues: list[GroupElement] = []

    def _level(self, x: Mat2) -> int:
        k = 1
        while k < self.m and x.congruent_identity(k + 1):
            k += 1
        return k

    def _reduce(self, g: GroupElement, k: int) -> tuple[GroupElement, list[int]]:
        p = self.p
        vec = list(_frattini_vector(g.parts[self.j], k))
        for piv, bvec, elt in self.bases.get(k, ()):
            c = vec[piv]
            if c:
                g = elt.inverse() ** c * g
                vec = [(x - c * y) % p for x, y in zip(vec, bvec)]
        return g, vec

    def elements(self) -> list[GroupElement]:
        return [e for lv in self.bases.values() for _, _, e in lv]

    def insert(self, g: GroupElement) -> None:
        queue = [g]
        while queue:
            g = queue.pop()
            while not g.parts[self.j].is_identity():
                k = self._level(g.parts[self.j])
                g, vec = self._reduce(g, k)
                piv = next((i for i, x in enumerate(vec) if x), None)
                if piv is None:
                    continue
                inv = pow(vec[piv], -1, self.p)
                g = g**inv
                vec = [x * inv % self.p for x in vec]
                level = self.bases.setdefault(k, [])
                for idx, (bp, bvec, belt) in enumerate(level):
                    c = bvec[piv]
                    if c:
                        level[idx] = (bp, [(x - c * y) % self.p for x, y in zip(bvec, vec)], g.inverse() ** c * belt)
                others = self.elements()
                level.append((piv, vec, g))
                queue.append(g**self.p)
                queue.extend(comm(g, e) for e in others)
                g = None
                break
            if g is not None and not g.is_identity():
                self.residues.append(g)

    def close_relations(self) -> None:
        """Sift l-th powers and commutators of the final basis once more."""
        elts = self.elements()
        for a in elts:
            self.insert(a**self.p)
        for a, b in itertools.combinations(elts, 2):
            self.insert(comm(a, b))

    def express(self, x: Mat2, n: int) -> GroupElement | None:
        """An element of H whose slot j equals x (x in B(1)), or None if there is none."""
        p = self.p
        W = GroupElement.identity(p, self.m, n)
        r = x
        while not r.is_identity():
            k = self._level(r)
            vec = list(_frattini_vector(r, k))
            for piv, bvec, elt in self.bases.get(k, ()):
                c = vec[piv]
                if c:
                    r = elt.parts[self.j].inverse() ** c * r
                    W = W * elt**c
                    vec = [(a - c * b) % p for a, b in zip(vec, bvec)]
            if any(vec):
                return None
        return W


class _SlotImage:
    """The slot-j image of <gens> with a lift for every element.

    The image mod l is enumerated with one representative per residue class;
    Schreier generators feed a _SlotSifter for the part in B(1).  `residues`
    then normally generate the kernel of the slot-j projection.
    """

    def __init__(self, gens: Sequence[GroupElement], slot: int):
        g0 = gens[0]
        self.p, self.m, self.n, self.j = g0.prime, g0.precision, g0.n, slot
        ident = GroupElement.identity(self.p, self.m, self.n)
        self.reps = {self._key(ident): ident}
        frontier = [ident]
        both = list(gens) + [g.inverse() for g in gens]
        while frontier:
            nxt = []
            for r in frontier:
                for s in both:
                    t = r * s
                    if self._key(t) not in self.reps:
                        self.reps[self._key(t)] = t
                        nxt.append(t)
            frontier = nxt
        self.sifter = _SlotSifter(self.p, self.m, slot)
        inverses = {k: r.inverse() for k, r in self.reps.items()}
        for r in self.reps.values():
            for s in gens:
                t = r * s
                self.sifter.insert(t * inverses[self._key(t)])
        self.sifter.close_relations()
        # a representative is only defined up to B(1); its class is what matters
        self.residues = self.sifter.residues

    def _key(self, g: GroupElement) -> tuple:
        return g.parts[self.j].reduce(1).residues()

    def express(self, x: Mat2) -> GroupElement | None:
        r = self.reps.get(x.reduce(1).residues())
        if r is None:
            return None
        w = self.sifter.express(r.parts[self.j].inverse() * x, self.n)
        return None if w is None else r * w


def _slot_witnesses(gens: Sequence[GroupElement], i: int, j: int, targets: Sequence[Mat2]) -> dict:
    """Elements of <gens> that are Id in slot i and equal a target in slot j.

    The kernel of the slot-i projection is the normal closure of the residues
    of a _SlotImage on slot i; its slot-j image is grown one generator at a
    time until it is stable under conjugation by `gens`.  Returns
    {target residues: element} for the targets that lie in that image.
    """
    A = _SlotImage(gens, i)
    ident = GroupElement.identity(A.p, A.m, A.n)
    kgens: list[GroupElement] = []
    B = None
    pending = list(A.residues)
    while pending:
        x = pending.pop()
        if x.parts[j].is_identity():
            continue
        if B is not None and B.express(x.parts[j]) is not None:
            continue
        kgens.append(x)
        B = _SlotImage(kgens, j)
        pending.extend(g * y * g.inverse() for g in gens for y in kgens)
    out = {}
    for x in targets:
        if x.is_identity():
            out[x.residues()] = ident
            continue
        w = None if B is None else B.express(x)
        if w is not None and w.parts[i].is_identity() and w.parts[j] == x:
            out[x.residues()] = w
    return out


# ---------------------------------------------------------------- Goursat


@dataclass
class GoursatReport:
    prime: int
    precision: int
    levels: tuple[int, ...]
    verified: tuple[bool | None, ...]  # None: level >= m, not checkable
    witnesses: dict = field(repr=False)
    kernels: dict = field(repr=False)

    @property
    def verdict(self) -> str:
        if any(v is False for v in self.verified):
            return "LemmaViolation"
        if any(v is None for v in self.verified):
            return "InconclusiveAtPrecision"
        return "Verified"


def _level_generators(prime, precision, s):
    if s == 0:
        return [standard_gen(k, 1, prime, precision) for k in "LR"]
    return [standard_gen(k, prime**s, prime, precision) for k in "LRD"]


def goursat_combine(G: FiniteGroup | Sequence[GroupElement], s: Sequence[Sequence[int]],
                    cap: int = DEFAULT_CAP) -> GoursatReport:
    """Certify the product-ball conclusion of the integral Goursat lemma.

    The pair hypothesis is certified by finding, for each ordered pair (i, j)
    and each generator g of B(s_ij), an element of G with Id in slot i and g in
    slot j.  The conclusion in slot k is then certified by iterated commutators
    of such elements (which are Id outside slot k) and their normal closure.
    """
    gens = list(G.generators) if isinstance(G, FiniteGroup) else list(G)
    prime, precision, n = _check_generators(gens, allow_gl=False)
    v = vee(prime)
    if n < 2:
        raise DomainError("goursat_combine needs n >= 2")
    if len(s) != n or any(len(r) != n for r in s):
        raise DomainError("level matrix must be n x n")
    for i in range(n):
        for j in range(n):
            if i != j:
                if s[i][j] != s[j][i]:
                    raise DomainError("level matrix must be symmetric")
                if (prime == 2 and s[i][j] < 2) or (prime == 3 and s[i][j] < 1) or s[i][j] < 0:
                    raise DomainError(f"level {s[i][j]} invalid for l = {prime}")
    ident = Mat2.identity(prime, precision)
    targets = {}
    for i in range(n):
        for j in range(n):
            if i == j or s[i][j] >= precision:
                continue
            for g in _level_generators(prime, precision, s[i][j]):
                key = (i, j, ident.residues() + g.residues())
                targets[key] = None

    # search over each ordered pair's projection separately
    witnesses: dict = {}
    for i in range(n):
        for j in range(n):
            want = {k[2]: k for k in targets if k[0] == i and k[1] == j}
            if not want:
                continue
            mats = [Mat2(prime, precision, *kk[4:]) for kk in want]
            found = _slot_witnesses(gens, i, j, mats)
            hits = {ident.residues() + r: elt for r, elt in found.items()}
            missing = {kk: v for kk, v in want.items() if kk not in hits}
            if missing:
                extra, _ = search_elements(gens, _pair_projector(i, j), missing, cap)
                hits.update(extra)
            if len(hits) < len(want):
                raise HypothesisUnmet(f"pair ({i},{j}) projection lacks B({s[i][j]},{s[i][j]})")
            for kk, elt in hits.items():
                witnesses[want[kk]] = elt

    levels, verified, report_w, kernels = [], [], {}, {}
    for k in range(n):
        others = [j for j in range(n) if j != k]
        level = sum(s[k][j] for j in others) + (n - 2) * v
        levels.append(level)
        if level >= precision:
            verified.append(None)
            continue
        if any(s[k][j] >= precision for j in others):
            verified.append(None)
            continue
        # x_j: Id in slot j, generator of B(s_kj) in slot k
        choices = []
        for j in others:
            opts = []
            for g in _level_generators(prime, precision, s[k][j]):
                opts.append(witnesses[(j, k, ident.residues() + g.residues())])
            choices.append(opts)
        comms = []
        for combo in itertools.product(*choices):
            c = comm_iterated(list(combo)) if len(combo) >= 2 else combo[0]
            for j in others:
                if not c.parts[j].is_identity():
                    raise LemmaViolation("iterated commutator is not trivial outside its slot")
            comms.append(c)
        report_w[k] = comms
        conj = [GroupElement((g.parts[k],)) for g in gens]
        ambient = closure([GroupElement((c.parts[k],)) for c in comms] or [GroupElement((ident,))], cap)
        K = _normal_closure_by(ambient, conj, cap)
        kernels[k] = K
        ok = contains_ball(K, (level,))
        verified.append(ok)
        if not ok:
            raise LemmaViolation(f"slot {k}: commutator witnesses do not generate B({level})",
                                 certificate={"witnesses": comms})
    return GoursatReport(prime, precision, tuple(levels), tuple(verified), report_w, kernels)


def _normal_closure_by(N: FiniteGroup, conjugators: Sequence[GroupElement], cap: int) -> FiniteGroup:
    while True:
        new = []
        for g in conjugators:
            gi = g.inverse()
            for h in N.generators:
                c = g * h * gi
                if c not in N:
                    new.append(c)
        if not new:
            return N
        N = closure(list(N.generators) + new, cap)


# ---------------------------------------------------------------- graph defect


def _defect_mask(rows: np.ndarray, r: int) -> np.ndarray:
    a = _is_identity_mod(rows, r, [0])
    b = _is_identity_mod(rows, r, [1])
    return (a & ~b) | (b & ~a)


def graph_defect(G: FiniteGroup | Sequence[GroupElement], t: int, cap: int = DEFAULT_CAP) -> GroupElement | None:
    """An element trivial mod l^t in one slot but not the other, or None.

    None certifies that G(l^t) is the graph of an isomorphism between its two
    projections.  For an enumerated group the scan is exhaustive.  For a bare
    generator list, a generator witness or a conjugation certificate (an
    invertible M with g_2 = M g_1 M^-1 mod l^t for every generator) settles the
    question without enumeration; otherwise the group is enumerated under `cap`.
    """
    if isinstance(G, FiniteGroup):
        return _graph_defect_scan(G, t)
    gens = list(G)
    prime, precision, n = _check_generators(gens, allow_gl=True)
    if n != 2:
        raise DomainError("graph_defect needs n = 2")
    if not 0 <= t <= precision:
        raise DomainError("t must lie in [0, m]")
    if t == 0:
        return None
    r = prime**t
    rows = np.array([g.key() for g in gens], dtype=np.int64)
    hit = np.flatnonzero(_defect_mask(rows, r))
    if hit.size:
        return gens[int(hit[0])]
    if conjugation_certificate(gens, t) is not None:
        return None
    return _graph_defect_scan(closure(gens, cap, allow_gl=True), t)


def _graph_defect_scan(G: FiniteGroup, t: int) -> GroupElement | None:
    if G.n != 2:
        raise DomainError("graph_defect needs n = 2")
    if not 0 <= t <= G.precision:
        raise DomainError("t must lie in [0, m]")
    if t == 0:
        return None
    q, r = G.modulus, G.prime**t
    # an element Id mod l^t in a slot is Id mod l there, so only cosets whose
    # image is Id in some slot can contain a witness
    cand = _is_identity_mod(G.image, G.prime, [0]) | _is_identity_mod(G.image, G.prime, [1])
    step = max(1, _CHUNK // max(1, G.kernel.shape[0]))
    idx = np.flatnonzero(cand)
    for s in range(0, idx.size, step):
        lifts = G.lifts[idx[s:s + step]]
        rows = _mul(np.repeat(lifts, G.kernel.shape[0], axis=0), np.tile(G.kernel, (lifts.shape[0], 1)), q)
        hit = _defect_mask(rows, r)
        if hit.any():
            rows = rows[hit]
            best = rows[np.argmin(_keys(rows, q))] if rows.shape[0] > 1 else rows[0]
            return GroupElement.from_residues(G.prime, G.precision, best.tolist())
    return None


def conjugation_certificate(generators: Sequence[GroupElement], t: int) -> Mat2 | None:
    """An M in GL2(Z/l^t) with g_2 = M g_1 M^-1 mod l^t for every generator, if one exists.

    The conditions M g_1 = g_2 M are linear in the entries of M; the solution
    module comes from a Howell-form kernel computation and an invertible member
    is found by searching combinations mod l.
    """
    from .modlattice import ModLattice

    prime = generators[0].prime
    q = prime**t
    # row vector (m1, m2, m3, m4) times matrix A gives all equations
    cols = []
    for g in generators:
        a, b, c, d = (x % q for x in g.parts[0].residues())
        e, f, gg, h = (x % q for x in g.parts[1].residues())
        # (M g1)_{rs} - (g2 M)_{rs} for M = [[m1, m2], [m3, m4]]
        cols.append([a - e, c, -f, 0])  # entry (0,0): m1 a + m2 c - e m1 - f m3
        cols.append([b, d - e, 0, -f])  # entry (0,1): m1 b + m2 d - e m2 - f m4
        cols.append([-gg, 0, a - h, c])  # entry (1,0): m3 a + m4 c - g m1 - h m3
        cols.append([0, -gg, b, d - h])  # entry (1,1): m3 b + m4 d - g m2 - h m4
    width = len(cols)
    rows = [[cols[c][i] % q for c in range(width)] + [1 if j == i else 0 for j in range(4)] for i in range(4)]
    H = ModLattice.span(prime, t, width + 4, rows)
    kernel = [row[width:] for row in H.basis if not any(row[:width])]
    if not kernel:
        return None
    for coeffs in itertools.product(range(prime), repeat=len(kernel)):
        M = [sum(c * k[i] for c, k in zip(coeffs, kernel)) % q for i in range(4)]
        if (M[0] * M[3] - M[1] * M[2]) % prime:
            return Mat2(prime, t, *M)
    return None
