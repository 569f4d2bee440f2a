"""Exact evaluation of matrix identities stored as data.

Each catalog entry names a parameter grid, optional derived quantities
(`let`), filters (`where`) and two expressions.  Expressions are parsed with
`ast` and evaluated over Z/l^m by a small whitelist interpreter: integers stay
exact until a division or a matrix constructor forces a reduction.
"""

from __future__ import annotations

import ast
import itertools
import json
import operator
from collections.abc import Callable
from dataclasses import dataclass, field
from importlib import resources
from typing import Any

from .errors import DomainError
from .padic_matrix import D, L, Mat2, R, comm, diag_limit_product
from .padic_scalar import PadicScalar, vl


@dataclass
class Ring:
    prime: int
    precision: int

    @property
    def q(self) -> int:
        return self.prime**self.precision

    def unit_inverse(self, x: int) -> int:
        if x % self.prime == 0:
            raise DomainError(f"{x} is not a unit mod {self.prime}")
        return pow(x, -1, self.q)


def _nonsquare(p: int) -> int:
    squares = {x * x % p for x in range(1, p)}
    for x in range(2, p):
        if x not in squares:
            return x
    raise DomainError(f"every unit is a square mod {p}")


def _smin(p: int) -> int:
    return 2 if p == 2 else 1 if p == 3 else 0


def _builtins(ring: Ring) -> dict[str, Callable[..., Any]]:
    p, m, q = ring.prime, ring.precision, ring.q

    def as_int(x) -> int:
        if isinstance(x, Mat2):
            raise DomainError("expected a scalar, got a matrix")
        return int(x) % q

    def scalar(x) -> PadicScalar:
        return PadicScalar(p, m, as_int(x))

    return {
        "L": lambda x: L(as_int(x), p, m),
        "R": lambda x: R(as_int(x), p, m),
        "D": lambda x: D(as_int(x), p, m),
        "Id": lambda: Mat2.identity(p, m),
        "mat": lambda a, b, c, d: Mat2(p, m, *(as_int(v) for v in (a, b, c, d))),
        "diag": lambda a, d: Mat2(p, m, as_int(a), 0, 0, as_int(d)),
        "comm": comm,
        "inv": lambda g: g.inverse() if isinstance(g, Mat2) else ring.unit_inverse(g),
        "entry": lambda g, i, j: g.residues()[2 * int(i) + int(j)],
        "diag_limit": lambda a, b, c, d, n: diag_limit_product(scalar(a), scalar(b), scalar(c), scalar(d), int(n)),
        "unit": lambda x: as_int(x) % p != 0,
        "val": lambda x: vl(as_int(x), p, m),
        "nonsquare": lambda: _nonsquare(p),
        "smin": lambda: _smin(p),
    }


_COMPARE = {
    ast.Eq: operator.eq,
    ast.NotEq: operator.ne,
    ast.Lt: operator.lt,
    ast.LtE: operator.le,
    ast.Gt: operator.gt,
    ast.GtE: operator.ge,
}


class Evaluator:
    """Whitelist interpreter for identity expressions over one ring."""

    def __init__(self, ring: Ring, env: dict[str, Any]):
        self.ring = ring
        self.env = env
        self.funcs = _builtins(ring)

    def __call__(self, source: str):
        tree = ast.parse(source, mode="eval")
        return self._eval(tree.body)

    def _eval(self, node):
        if isinstance(node, ast.Constant) and isinstance(node.value, int) and not isinstance(node.value, bool):
            return node.value
        if isinstance(node, ast.Name):
            if node.id not in self.env:
                raise DomainError(f"unknown name {node.id!r}")
            return self.env[node.id]
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            x = self._eval(node.operand)
            if isinstance(x, Mat2):
                return x.scale(-1) if isinstance(node.op, ast.USub) else x
            return -x if isinstance(node.op, ast.USub) else x
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.Not):
            return not self._eval(node.operand)
        if isinstance(node, ast.BinOp):
            return self._binop(node.op, self._eval(node.left), self._eval(node.right))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
            fn = self.funcs.get(node.func.id)
            if fn is None:
                raise DomainError(f"unknown function {node.func.id!r}")
            return fn(*(self._eval(a) for a in node.args))
        if isinstance(node, ast.Compare):
            left = self._eval(node.left)
            for op, right_node in zip(node.ops, node.comparators):
                right = self._eval(right_node)
                if type(op) not in _COMPARE or not _COMPARE[type(op)](left, right):
                    return False
                left = right
            return True
        if isinstance(node, ast.BoolOp):
            values = (self._eval(v) for v in node.values)
            return all(values) if isinstance(node.op, ast.And) else any(values)
        raise DomainError(f"unsupported syntax: {ast.dump(node)}")

    def _binop(self, op, x, y):
        q = self.ring.q
        xm, ym = isinstance(x, Mat2), isinstance(y, Mat2)
        if isinstance(op, ast.Add) and not (xm or ym):
            return x + y
        if isinstance(op, ast.Sub) and not (xm or ym):
            return x - y
        if isinstance(op, (ast.Add, ast.Sub)) and xm and ym:
            return x + y if isinstance(op, ast.Add) else x - y
        if isinstance(op, ast.Mult):
            if xm and ym:
                return x * y
            if xm or ym:
                mat, k = (x, y) if xm else (y, x)
                return mat.scale(k % q)
            return x * y
        if isinstance(op, ast.Div) and not (xm or ym):
            return x * self.ring.unit_inverse(y) % q
        if isinstance(op, ast.Pow) and not ym:
            if xm:
                return x ** int(y)
            if y >= 0:
                return x**y
            return pow(self.ring.unit_inverse(x), -y, q)
        raise DomainError(f"unsupported operands for {type(op).__name__}")


def equal_mod(x, y, ring: Ring) -> bool:
    if isinstance(x, Mat2) and isinstance(y, Mat2):
        return x.residues() == y.residues()
    if isinstance(x, Mat2) or isinstance(y, Mat2):
        raise DomainError("cannot compare a matrix with a scalar")
    return (x - y) % ring.q == 0


@dataclass(frozen=True)
class IdentityEntry:
    name: str
    family: str
    params: dict[str, list[int]]
    lhs: str
    rhs: str
    let: dict[str, str] = field(default_factory=dict)
    where: tuple[str, ...] = ()

    @classmethod
    def from_dict(cls, data: dict) -> IdentityEntry:
        params = {k: list(v) for k, v in data["params"].items()}
        if "l" not in params or "m" not in params:
            raise DomainError(f"entry {data.get('name')!r} must range over l and m")
        return cls(data["name"], data.get("family", ""), params, data["lhs"], data["rhs"],
                   dict(data.get("let", {})), tuple(data.get("where", ())))


@dataclass(frozen=True)
class IdentityResult:
    name: str
    family: str
    params: tuple[tuple[str, int], ...]
    ok: bool
    detail: str = ""


def load_catalog(name_or_path: str = "default") -> list[IdentityEntry]:
    if name_or_path == "default":
        text = resources.files("pink_forge").joinpath("data/identities.json").read_text()
    else:
        with open(name_or_path) as fh:
            text = fh.read()
    return [IdentityEntry.from_dict(d) for d in json.loads(text)["identities"]]


def _grid(entry: IdentityEntry, l: int | None, m: int | None):
    params = dict(entry.params)
    if l is not None:
        if l not in params["l"]:
            return
        params["l"] = [l]
    if m is not None:
        params["m"] = [m]
    names = list(params)
    for values in itertools.product(*(params[k] for k in names)):
        yield dict(zip(names, values))


def check_entry(entry: IdentityEntry, l: int | None = None, m: int | None = None) -> list[IdentityResult]:
    results = []
    for combo in _grid(entry, l, m):
        ring = Ring(combo["l"], combo["m"])
        env: dict[str, Any] = dict(combo)
        ev = Evaluator(ring, env)
        key = tuple(combo.items())
        try:
            for name, expr in entry.let.items():
                env[name] = ev(expr)
            if not all(ev(cond) for cond in entry.where):
                continue
            ok = equal_mod(ev(entry.lhs), ev(entry.rhs), ring)
            results.append(IdentityResult(entry.name, entry.family, key, ok, "" if ok else "sides differ"))
        except DomainError as exc:
            results.append(IdentityResult(entry.name, entry.family, key, False, str(exc)))
    return results


def run_catalog(entries: list[IdentityEntry], l: int | None = None, m: int | None = None) -> list[IdentityResult]:
    out = []
    for entry in entries:
        out.extend(check_entry(entry, l, m))
    return out
