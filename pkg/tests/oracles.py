"""Brute-force reference computations on SL2(F_l), shared by the unit and acceptance tests."""

from functools import cache

import numpy as np

from pink_forge.dickson import classify_rows, ell_sylow_rows
from pink_forge.group_engine import (
    _keys,
    _mul,
    closure,
    max_normal_proell,
    sl2_generators,
)
from pink_forge.padic_matrix import GroupElement, Mat2


class SL2Table:
    """SL2(F_p) with a full multiplication table; subgroups are boolean masks."""

    def __init__(self, p):
        self.p = p
        self.rows = closure(sl2_generators(p, 1)).image
        self.N = self.rows.shape[0]
        self.keys = _keys(self.rows, p)
        self.mul = np.stack([self.index(_mul(np.repeat(self.rows[i:i + 1], self.N, 0), self.rows, p))
                             for i in range(self.N)])
        self.identity = int(self.index(np.array([[1, 0, 0, 1]]))[0])
        self.inv = np.argmax(self.mul == self.identity, axis=1)
        # conj[g, x] = g x g^-1
        self.conj = self.mul[self.mul, self.inv[:, None]]

    def index(self, A):
        return np.searchsorted(self.keys, _keys(np.asarray(A) % self.p, self.p))

    def generate(self, gens, start=None):
        H = np.zeros(self.N, dtype=bool) if start is None else start.copy()
        H[self.identity] = True
        frontier = np.flatnonzero(H)
        gens = np.asarray(list(gens), dtype=np.int64)
        while frontier.size and gens.size:
            cand = np.unique(self.mul[np.ix_(frontier, gens)].ravel())
            cand = cand[~H[cand]]
            H[cand] = True
            frontier = cand
        return H

    def subgroups(self):
        """Every subgroup, as the closures of <c, b> over cyclic c and all b.

        Each subgroup of SL2(F_p) is generated by two elements, and one of them
        may be taken from any cyclic subgroup it contains, so this list is complete
        for the primes used here (checked against the known counts in the tests).
        """
        cyclic = {}
        for a in range(self.N):
            h = self.generate([a])
            cyclic.setdefault(h.tobytes(), (a, h))
        subs = {k: h for k, (_, h) in cyclic.items()}
        for a, h in cyclic.values():
            for b in range(self.N):
                if not h[b]:
                    H = self.generate([a, b], start=h)
                    subs.setdefault(H.tobytes(), H)
        return list(subs.values())

    def normal_ell_core(self, H):
        """Largest normal p-subgroup of H: all x whose normal closure in H is a p-group."""
        members = np.flatnonzero(H)
        core = np.zeros(self.N, dtype=bool)
        for x in members:
            if core[x]:
                continue
            conjugates = np.unique(self.conj[members, x])
            K = self.generate(conjugates)
            size = int(K.sum())
            while size % self.p == 0:
                size //= self.p
            if size == 1:
                core |= K
        return core

    def is_normal(self, K, H):
        members = np.flatnonzero(H)
        return bool(K[self.conj[np.ix_(members, np.flatnonzero(K))]].all())


@cache
def sl2_table(p):
    return SL2Table(p)


def dickson_sweep(p, rng):
    """Classify every subgroup of SL2(F_p), checking order bounds, conjugation
    invariance and N(H) against the brute-force core.  Returns the labels."""
    T = sl2_table(p)
    out = []
    for H in T.subgroups():
        rows = T.rows[H]
        t = classify_rows(rows, p)
        order = rows.shape[0]
        if t.label == "SplitCartan":
            assert (p - 1) % order == 0
        if t.label == "NonsplitCartan":
            assert (p + 1) % order == 0
        if t.label == "Borel":
            assert (p * (p - 1)) % order == 0
        members = np.flatnonzero(H)
        for g in (T.index([[1, 1, 0, 1]])[0], T.index([[1, 0, 1, 1]])[0], rng.randrange(T.N)):
            conj = np.zeros(T.N, dtype=bool)
            conj[T.conj[g, members]] = True
            assert classify_rows(T.rows[conj], p) == t
        core = T.normal_ell_core(H)
        assert T.is_normal(core, H)
        syl = ell_sylow_rows(rows, p)
        expected = 1 if syl is None else syl.shape[0]
        assert core.sum() == expected
        G = closure([GroupElement((Mat2(p, 1, *r),)) for r in rows.tolist()])
        assert max_normal_proell(G).order == core.sum()
        out.append(t)
    return out
