"""Random open subgroups of SL2(Z/l^m)^n: a ball plus a few twist generators."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .group_engine import ball_tuple_generators
from .padic_matrix import D, GroupElement, L, Mat2, R

TWIST_MODES = ("product", "graph", "signed-graph")
ELEMENT_KINDS = ("generic", "diagonal", "borel", "weyl")


@dataclass(frozen=True)
class SampledGroup:
    prime: int
    precision: int
    n: int
    generators: tuple[GroupElement, ...]
    label: str
    proell: bool


def _unit(rng: random.Random, p: int, q: int) -> int:
    while True:
        x = rng.randrange(q)
        if x % p:
            return x


def random_sl2(rng: random.Random, p: int, m: int, kind: str = "generic") -> Mat2:
    q = p**m
    if kind == "generic":
        return L(rng.randrange(q), p, m) * R(rng.randrange(q), p, m) * L(rng.randrange(q), p, m)
    u = _unit(rng, p, q)
    diag = Mat2(p, m, u, 0, 0, pow(u, -1, q))
    if kind == "diagonal":
        return diag
    if kind == "borel":
        return diag * R(rng.randrange(q), p, m)
    if kind == "weyl":
        return Mat2(p, m, 0, -1, 1, 0) * diag
    raise ValueError(kind)


def random_ball_element(rng: random.Random, p: int, m: int, level: int = 1) -> Mat2:
    """A random element of B(level) as a product L(l^s a) R(l^s b) D(l^s c)."""
    q = p**m
    s = p**level
    return L(s * rng.randrange(q), p, m) * R(s * rng.randrange(q), p, m) * D(s * rng.randrange(q), p, m)


def random_gl2(rng: random.Random, p: int, m: int) -> Mat2:
    q = p**m
    while True:
        M = Mat2(p, m, *(rng.randrange(q) for _ in range(4)))
        if M.det() % p:
            return M


def sample_group(rng: random.Random, p: int, m: int, n: int, proell: bool = False, ball: int = 1,
                 twists: int | None = None) -> SampledGroup:
    """A ball B(ball, ..., ball) (omitted when ball >= m) plus random twists.

    Twists are products of independent elements per factor, graphs x -> M x M^-1
    on every factor, or graphs with a sign flip.  With `proell` every twist lies
    in B(1)^n, so the group is pro-l.
    """
    gens = list(ball_tuple_generators(p, m, (ball,) * n)) if ball < m else []
    count = rng.randint(1, 2) if twists is None else twists
    modes = []
    for _ in range(count):
        mode = rng.choice(TWIST_MODES if n >= 2 else ("product",))
        kind = rng.choice(ELEMENT_KINDS)
        if proell:
            mode = "product" if mode == "signed-graph" else mode
            kind = "ball"

        def draw(kind=kind):
            return random_ball_element(rng, p, m) if proell else random_sl2(rng, p, m, kind)

        if mode == "product":
            parts = tuple(draw() for _ in range(n))
        else:
            x = draw()
            parts = [x]
            for _ in range(n - 1):
                M = random_gl2(rng, p, m)
                y = M * x * M.inverse()
                if mode == "signed-graph":
                    y = y.scale(-1)
                parts.append(y)
            parts = tuple(parts)
        gens.append(GroupElement(parts))
        modes.append(f"{mode}:{kind}")
    if not gens:
        gens = [GroupElement.identity(p, m, n)]
    return SampledGroup(p, m, n, tuple(gens), " ".join(modes), proell)


def sample_groups(p: int, m: int, n: int, count: int, seed: int, **kwargs) -> list[SampledGroup]:
    rng = random.Random(seed)
    return [sample_group(rng, p, m, n, **kwargs) for _ in range(count)]


def conjugation_graph(p: int, m: int, M: Mat2, extra: tuple[GroupElement, ...] = ()) -> list[GroupElement]:
    """Generators (g, M g M^-1) for g = L(1), R(1), D(1), plus `extra`."""
    Mi = M.inverse()
    gens = [GroupElement((g, M * g * Mi)) for g in (L(1, p, m), R(1, p, m), D(1, p, m))]
    return gens + list(extra)


def diagonal_construction(p: int, m: int, n: int, ball: int = 1) -> list[GroupElement]:
    """SL2 embedded diagonally in slots 1 and 2, independent SL2 factors after that,
    plus B(ball)^n.  Every pair projection contains B(ball, ball)."""
    if n < 2:
        raise ValueError("need n >= 2")
    ident = Mat2.identity(p, m)
    gens = []
    for mk in (L, R):
        g = mk(1, p, m)
        gens.append(GroupElement((g, g) + (ident,) * (n - 2)))
        for j in range(2, n):
            gens.append(GroupElement.embed(g, j, n))
    return gens + list(ball_tuple_generators(p, m, (ball,) * n))
