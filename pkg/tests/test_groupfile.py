import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pink_forge import groupfile
from pink_forge.errors import DomainError
from pink_forge.groupfile import GroupFile
from pink_forge.padic_matrix import GroupElement, L, R
from pink_forge.sampler import sample_groups

SL2_F5 = "prime=5\nprecision=1\nfactors=1\nlabel=SL2(F_5)\nexpected_type=Full\ngen=1,1,0,1\ngen=1,0,1,1\n"


def test_round_trip_is_byte_identical(tmp_path):
    gf = groupfile.loads(SL2_F5)
    assert gf.prime == 5 and gf.factors == 1 and gf.label == "SL2(F_5)"
    assert groupfile.dumps(gf) == SL2_F5
    path = tmp_path / "g.grp"
    groupfile.write(str(path), gf)
    assert path.read_text() == SL2_F5
    assert groupfile.read(str(path)) == gf


def test_comments_and_blank_lines_are_skipped():
    text = "# SL2(F_5)\n\nprime = 5\nprecision=1\n  factors=1\n# generators\ngen=1,1,0,1\n\ngen=1,0,1,1\n"
    gf = groupfile.loads(text)
    assert gf.generators == ((1, 1, 0, 1), (1, 0, 1, 1))
    assert gf.label is None and gf.expected_type is None
    assert "#" not in groupfile.dumps(gf)


def test_identity_file_has_identity_generator():
    gf = groupfile.loads("prime=3\nprecision=2\nfactors=2\n")
    (g,) = gf.elements()
    assert g == GroupElement.identity(3, 2, 2)


@pytest.mark.parametrize("text", [
    "prime=5\nprecision=1\nfactors=1\ngen=1,1,1,1\n",          # det 0
    "prime=5\nprecision=1\nfactors=1\ngen=1,5,0,1\n",          # residue out of range
    "prime=5\nprecision=1\nfactors=2\ngen=1,1,0,1\n",          # wrong length
    "prime=6\nprecision=1\nfactors=1\n",                       # not prime
    "prime=5\nprecision=0\nfactors=1\n",
    "prime=5\nprecision=1\nfactors=0\n",
    "prime=5\nprecision=1\n",                                  # missing header
    "prime=5\nprime=5\nprecision=1\nfactors=1\n",
    "prime=5\nprecision=1\nfactors=1\ncolour=red\n",
    "prime=5\nprecision=1\nfactors=1\ngen=1,a,0,1\n",
    "prime=five\nprecision=1\nfactors=1\n",
    "prime=5\nprecision=1\nfactors=1\njunk\n",
])
def test_invalid_files(text):
    with pytest.raises(DomainError):
        groupfile.loads(text)


def test_metadata_must_be_one_line():
    with pytest.raises(DomainError):
        GroupFile(5, 1, 1, ((1, 1, 0, 1),), label="two\nlines")
    with pytest.raises(DomainError):
        GroupFile.from_elements([])


def test_from_elements():
    gens = [GroupElement((L(1, 7, 2), R(3, 7, 2)))]
    gf = GroupFile.from_elements(gens, label="x")
    assert gf.factors == 2 and gf.precision == 2
    assert gf.elements() == gens


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([(2, 3), (3, 2), (5, 2), (7, 3)]), st.integers(1, 3), st.integers(0, 10**6))
def test_round_trip_property(pm, n, seed):
    p, m = pm
    sg = sample_groups(p, m, n, 1, seed, ball=2 if p == 2 else 1)[0]
    gf = GroupFile.from_elements(sg.generators, label=sg.label)
    text = groupfile.dumps(gf)
    back = groupfile.loads(text)
    assert back == gf
    assert groupfile.dumps(back) == text
    assert back.elements() == list(sg.generators)
