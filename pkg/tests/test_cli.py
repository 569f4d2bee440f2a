import subprocess
import sys

import pytest

from pink_forge import groupfile
from pink_forge.cli import main
from pink_forge.group_engine import closure, reduction_image

SL2_F5 = "prime=5\nprecision=1\nfactors=1\ngen=1,1,0,1\ngen=1,0,1,1\n"


@pytest.fixture
def run(capsys, monkeypatch):
    monkeypatch.delenv("PINK_FORGE_CAP", raising=False)

    def _run(*argv):
        code = main([str(a) for a in argv])
        out, err = capsys.readouterr()
        return code, out, err
    return _run


def fields(out, sep=": "):
    pairs = [line.split(sep, 1) for line in out.splitlines()]
    return {k: v for k, v in pairs}


@pytest.fixture
def sl2_file(tmp_path):
    path = tmp_path / "sl2.grp"
    path.write_text(SL2_F5)
    return path


def test_closure_sl2(run, sl2_file):
    code, out, _ = run("closure", "--file", sl2_file)
    assert code == 0
    f = fields(out)
    assert f["order"] == "120" and f["status"] == "pass"
    assert f["tool"].startswith("pink-forge ")
    assert f["prime"] == "5" and f["precision"] == "1" and f["factors"] == "1"
    assert f["cap"] == str(2**24)
    assert f["verdicts"] == "Verified,InconclusiveAtPrecision,LemmaViolation"


def test_closure_identity_and_dump(run, tmp_path):
    path = tmp_path / "id.grp"
    path.write_text("prime=5\nprecision=2\nfactors=1\n")
    code, out, _ = run("closure", "--file", path, "--dump")
    assert code == 0 and fields(out)["order"] == "1"
    assert "element: 1,0,0,1" in out.splitlines()


def test_cap_exceeded_exits_2(run, sl2_file, monkeypatch):
    code, out, err = run("closure", "--file", sl2_file, "--cap", 10)
    assert code == 2 and out == "" and "cap" in err
    monkeypatch.setenv("PINK_FORGE_CAP", "10")
    assert main(["closure", "--file", str(sl2_file)]) == 2


def test_usage_errors_exit_3(run, sl2_file, tmp_path):
    assert run("frobnicate")[0] == 3
    assert run("closure", "--file", tmp_path / "missing.grp")[0] == 3
    assert run("closure")[0] == 3
    assert run("closure", "--file", sl2_file, "--cap", 0)[0] == 3
    assert run("check", "commutator", "--l", 5)[0] == 3
    bad = tmp_path / "bad.grp"
    bad.write_text("prime=5\nprecision=1\nfactors=1\ngen=1,1,1,1\n")
    assert run("closure", "--file", bad)[0] == 3
    # graph-defect needs two factors
    assert run("check", "graph-defect", "--file", sl2_file, "--t", 1)[0] == 3


def test_lie_and_classify(run, sl2_file, tmp_path):
    code, out, _ = run("lie", "--file", sl2_file)
    assert code == 0
    assert [v for k, v in (x.split(": ") for x in out.splitlines()) if k == "basis"] == ["1,0,0", "0,1,0", "0,0,1"]
    assert fields(out)["k_found"] == "0"
    code, out, _ = run("classify", "--file", sl2_file)
    assert code == 0 and fields(out)["type[1]"] == "Full"
    wrong = tmp_path / "wrong.grp"
    wrong.write_text(SL2_F5.replace("factors=1\n", "factors=1\nexpected_type=Borel\n"))
    code, out, _ = run("classify", "--file", wrong)
    assert code == 1 and fields(out)["status"] == "fail"


def test_check_pink_proell(run, sl2_file):
    code, out, _ = run("check", "pink-proell", "--l", 5, "--m", 3, "--k", 1, "--ball", 1)
    f = fields(out)
    assert code == 0 and f["verdict"] == "Verified" and f["status"] == "pass"
    assert f["checked"] == "2:ok"
    # SL2(F_5) is not pro-5
    code, out, _ = run("check", "pink-proell", "--file", sl2_file, "--k", 1)
    assert code == 1 and "HypothesisUnmet" in fields(out)["error"]


def test_check_identities(run):
    code, out, _ = run("check", "identities", "--catalog", "default", "--l", 7, "--m", 5)
    f = fields(out)
    assert code == 0 and f["verdict"] == "Verified" and f["instances"] == "107"
    assert "failure" not in f


def test_check_main_theorem_inconclusive(run):
    code, out, _ = run("check", "main-theorem", "--l", 5, "--m", 2, "--n", 2, "--k", 3)
    f = fields(out)
    assert code == 0
    assert f["verdict"] == "InconclusiveAtPrecision"
    assert f["verified_level"] == "1"


def test_check_commutator_goursat_saturate(run):
    for method in ("enumerate", "frattini"):
        code, out, _ = run("check", "commutator", "--l", 5, "--m", 4, "--s", "1,1", "--method", method)
        assert code == 0 and fields(out)["target_level"] == "2"
    code, out, _ = run("check", "goursat", "--l", 5, "--m", 3, "--n", 3)
    f = fields(out)
    assert code == 0 and f["levels"] == "2,2,2" and f["verdict"] == "Verified"
    code, out, _ = run("check", "conj-saturate", "--l", 5, "--m", 8, "--count", 5)
    assert code == 0 and fields(out)["samples"] == "5"


def test_machine_format_and_determinism(run):
    argv = ("check", "pink-proell", "--l", 5, "--m", 3, "--k", 1, "--format", "machine")
    _, a, _ = run(*argv)
    _, b, _ = run(*argv)
    assert a == b
    assert all("=" in line and ": " not in line for line in a.splitlines())
    assert fields(a, "=")["verdict"] == "Verified"


def test_sample_to_stdout_is_seed_deterministic(run):
    argv = ("sample", "--l", 3, "--m", 2, "--n", 2, "--count", 4, "--seed", 7)
    code, a, _ = run(*argv)
    assert code == 0
    assert run(*argv)[1] == a
    assert run("sample", "--l", 3, "--m", 2, "--n", 2, "--count", 4, "--seed", 8)[1] != a


def test_sample_files_close_under_cap(run, tmp_path):
    code, _, _ = run("sample", "--l", 3, "--m", 2, "--n", 2, "--count", 5, "--seed", 1, "--out", tmp_path)
    assert code == 0
    paths = sorted(tmp_path.glob("sample-*.grp"))
    assert [p.name for p in paths] == [f"sample-{i:03d}.grp" for i in range(5)]
    for path in paths:
        assert run("closure", "--file", path)[0] == 0


def test_sample_proell_flag(run, tmp_path):
    run("sample", "--l", 5, "--m", 2, "--n", 2, "--count", 3, "--proell", "--out", tmp_path)
    for path in sorted(tmp_path.glob("*.grp")):
        G = closure(groupfile.read(str(path)).elements())
        assert reduction_image(G, 1).order == 1


def test_first_reduction_from_file(run, tmp_path):
    path = tmp_path / "g.grp"
    # SL2(Z/49)^2 has Full images in both factors, the easy case
    text = "prime=7\nprecision=2\nfactors=2\ngen=1,1,0,1,1,0,0,1\ngen=1,0,1,1,1,0,0,1\n" \
           "gen=1,0,0,1,1,1,0,1\ngen=1,0,0,1,1,0,1,1\n"
    path.write_text(text)
    code, out, _ = run("check", "first-reduction", "--file", path, "--n1", 1, "--n2", 1)
    f = fields(out)
    assert code == 0 and f["case"] == "1"


def test_console_script_entry_point(sl2_file):
    proc = subprocess.run([sys.executable, "-m", "pink_forge.cli", "closure", "--file", str(sl2_file)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "order: 120" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "pink_forge.cli", "--version"], capture_output=True, text=True,
                          check=False)
    assert proc.stdout.startswith("pink-forge ")
