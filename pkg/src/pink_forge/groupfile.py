"""Line-oriented group files.

    prime=5
    precision=2
    factors=1
    label=ball
    expected_type=Borel
    gen=1,5,0,1

Each `gen=` line holds 4n residues, row-major per factor.  `label` and
`expected_type` are optional.  Blank lines and `#` comments are skipped on
read and never written, so write(read(text)) == text for any file the
writer produced.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DomainError
from .padic_matrix import GroupElement
from .padic_scalar import check_prime_precision

_HEADER = ("prime", "precision", "factors")
_OPTIONAL = ("label", "expected_type")


@dataclass(frozen=True)
class GroupFile:
    prime: int
    precision: int
    factors: int
    generators: tuple[tuple[int, ...], ...]
    label: str | None = None
    expected_type: str | None = None

    def __post_init__(self):
        check_prime_precision(self.prime, self.precision)
        if self.factors < 1:
            raise DomainError("factors must be at least 1")
        q = self.prime**self.precision
        for gen in self.generators:
            if len(gen) != 4 * self.factors:
                raise DomainError(f"generator has {len(gen)} residues, expected {4 * self.factors}")
            if any(not 0 <= x < q for x in gen):
                raise DomainError(f"residues must lie in [0, {q})")
            for j in range(self.factors):
                a, b, c, d = gen[4 * j: 4 * j + 4]
                if (a * d - b * c) % q != 1:
                    raise DomainError(f"factor {j} of generator {list(gen)} does not have determinant 1")
        for value in (self.label, self.expected_type):
            if value is not None and ("\n" in value or value != value.strip()):
                raise DomainError("metadata values must be single trimmed lines")

    def elements(self) -> list[GroupElement]:
        if not self.generators:
            return [GroupElement.identity(self.prime, self.precision, self.factors)]
        return [GroupElement.from_residues(self.prime, self.precision, g) for g in self.generators]

    @classmethod
    def from_elements(cls, elements, label: str | None = None, expected_type: str | None = None) -> GroupFile:
        elements = list(elements)
        if not elements:
            raise DomainError("need at least one generator")
        g0 = elements[0]
        return cls(g0.prime, g0.precision, g0.n, tuple(tuple(g.key()) for g in elements), label, expected_type)


def dumps(gf: GroupFile) -> str:
    lines = [f"prime={gf.prime}", f"precision={gf.precision}", f"factors={gf.factors}"]
    if gf.label is not None:
        lines.append(f"label={gf.label}")
    if gf.expected_type is not None:
        lines.append(f"expected_type={gf.expected_type}")
    lines += ["gen=" + ",".join(str(x) for x in g) for g in gf.generators]
    return "\n".join(lines) + "\n"


def loads(text: str) -> GroupFile:
    header: dict[str, int] = {}
    meta: dict[str, str] = {}
    gens = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise DomainError(f"line {lineno}: expected key=value")
        key = key.strip()
        value = value.strip()
        if key in _HEADER:
            if key in header:
                raise DomainError(f"line {lineno}: duplicate {key}")
            try:
                header[key] = int(value)
            except ValueError:
                raise DomainError(f"line {lineno}: {key} must be an integer") from None
        elif key in _OPTIONAL:
            meta[key] = value
        elif key == "gen":
            try:
                gens.append(tuple(int(x) for x in value.split(",")))
            except ValueError:
                raise DomainError(f"line {lineno}: generator residues must be integers") from None
        else:
            raise DomainError(f"line {lineno}: unknown key {key!r}")
    missing = [k for k in _HEADER if k not in header]
    if missing:
        raise DomainError(f"missing header field(s): {', '.join(missing)}")
    return GroupFile(header["prime"], header["precision"], header["factors"], tuple(gens),
                     meta.get("label"), meta.get("expected_type"))


def read(path: str) -> GroupFile:
    with open(path) as fh:
        return loads(fh.read())


def write(path: str, gf: GroupFile) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(gf))
