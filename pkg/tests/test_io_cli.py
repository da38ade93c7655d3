import csv
import io
import json

import numpy as np
import pytest

from conewish import io as cio
from conewish.algebra import StructuralZeroError
from conewish.cli import main
from conewish.poset import n_poset

N_TEXT = "1 < 3\n2 < 3\n2 < 4\n"
DIAMOND_TEXT = "i < k\nk < j\ni < s\ns < j\n"
# x13 = 1, x23 = 1, x24 = 0.5 on a diagonal of (2, 3, 5, 4)
N_MATRIX = "1,2,3,4\n2,0,1,0\n0,3,1,0.5\n1,1,5,0\n0,0.5,0,4\n"


@pytest.fixture
def files(tmp_path):
    def write(name, text):
        f = tmp_path / name
        f.write_text(text)
        return str(f)
    return write


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


# ----------------------------------------------------------------------
# io

def test_parse_matrix_reorders_rows():
    p = n_poset()
    m = cio.parse_matrix("4,3,2,1\n4,0,0.5,0\n0,5,1,1\n0.5,1,3,0\n0,1,0,2\n", p)
    assert np.allclose(m.entries, cio.parse_matrix(N_MATRIX, p).entries)


def test_parse_matrix_json_and_errors():
    p = n_poset()
    m = cio.parse_matrix(json.dumps({"labels": [1, 2, 3, 4], "matrix": np.eye(4).tolist()}), p)
    assert np.allclose(m.entries, np.eye(4))
    with pytest.raises(cio.MatrixFormatError):
        cio.parse_matrix("1,2,3\n1,0,0\n0,1,0\n0,0,1\n", p)
    with pytest.raises(cio.MatrixFormatError):
        cio.parse_matrix("1,2,3,4\n1,0,0,x\n", p)
    with pytest.raises(cio.MatrixFormatError):
        cio.parse_matrix('{"labels": [1, 2, 3, 4]}', p)
    bad = np.eye(4)
    bad[0, 3] = bad[3, 0] = 1.0  # 1 and 4 are unrelated
    with pytest.raises(StructuralZeroError):
        cio.parse_matrix(cio.matrix_to_csv(bad, p), p)


def test_matrix_csv_round_trip(rng):
    p = n_poset()
    x = cio.parse_matrix(N_MATRIX, p).entries * rng.uniform(0.5, 2)
    back = cio.parse_matrix(cio.matrix_to_csv(x, p), p).entries
    assert np.array_equal(back, x)


def test_sample_columns_follow_layout():
    p = n_poset()
    names = [f"{p.labels[i]}{p.labels[j]}" for i, j in cio.sample_columns(p)]
    assert names == ["11", "22", "31", "32", "33", "42", "44"]


def test_manifest_has_hash_and_no_time():
    m = cio.manifest(n_poset(), "x", seed=3)
    assert m["poset"]["hash"] == n_poset().content_hash()
    assert m["seed"] == 3 and not any("time" in k for k in m)


# ----------------------------------------------------------------------
# poset and algebra commands

def test_poset_check(capsys, files):
    code, out, _ = run(capsys, "poset", "check", files("n.txt", N_TEXT))
    assert code == 0
    assert out.strip() == "F: ok; sources: {2}; 𝒳: λ₁>0, λ₂>0, λ₃>1, λ₄>1/2"


def test_poset_check_violation_prints_witness(capsys, files):
    code, out, _ = run(capsys, "poset", "check", "--poset", files("d.txt", DIAMOND_TEXT))
    assert code == 2
    assert "F: violated" in out
    assert "witness: i < k < j" in out and "witness: i < s < j" in out


def test_poset_describe(capsys, files):
    code, out, _ = run(capsys, "poset", "describe", files("n.txt", N_TEXT))
    assert code == 0
    assert f"hash: {n_poset().content_hash()}" in out
    assert "S: {3}" in out and "n..\t7" in out


def test_parse_error_and_missing_file(capsys, files, tmp_path):
    code, _, err = run(capsys, "poset", "check", files("bad.txt", "1 < 2\n1 < < 3\n"))
    assert code == 1 and "line 2" in err
    code, _, _ = run(capsys, "poset", "check", tmp_path / "nope.txt")
    assert code == 1
    code, _, _ = run(capsys, "poset", "check", files("cyc.txt", "1 < 2\n2 < 1\n"))
    assert code == 1


def test_usage_errors(capsys, files):
    assert run(capsys, "bogus")[0] == 1
    assert run(capsys, "poset", "check")[0] == 1
    assert run(capsys, "wishart", "sample", files("n.txt", N_TEXT))[0] == 1
    assert run(capsys, "wishart", "sample", files("n.txt", N_TEXT), "--lambda", "1,2")[0] == 1


def test_algebra_verify(capsys, files, tmp_path):
    code, out, _ = run(capsys, "algebra", "verify", files("n.txt", N_TEXT), "--trials", 20)
    assert code == 0 and out.count("PASS") == 6
    code, _, _ = run(capsys, "algebra", "verify", files("d.txt", DIAMOND_TEXT), "--trials", 20,
                     "--json", "--out", tmp_path / "ax")
    assert code == 3
    rep = json.loads((tmp_path / "ax" / "axioms.json").read_text())
    assert rep["passed"] is False


# ----------------------------------------------------------------------
# cone commands

def test_cone_decompose(capsys, files):
    code, out, _ = run(capsys, "cone", "decompose", files("n.txt", N_TEXT),
                       "--matrix", files("x.csv", N_MATRIX))
    assert code == 0
    obj = json.loads(out)
    d = obj["D"]
    assert d["3"] == pytest.approx(5 - 1 / 2 - 1 / 3)
    assert d["4"] == pytest.approx(4 - 0.25 / 3)


def test_cone_components(capsys, files):
    code, out, _ = run(capsys, "cone", "components", files("n.txt", N_TEXT),
                       "--matrix", files("x.csv", N_MATRIX))
    assert code == 0
    comps = json.loads(out)["components"]
    total = sum(np.array(v) for v in comps.values())
    assert np.allclose(total, cio.parse_matrix(N_MATRIX, n_poset()).entries)


def test_cone_domain_errors(capsys, files):
    code, _, err = run(capsys, "cone", "decompose", files("n.txt", N_TEXT),
                       "--matrix", files("neg.csv", N_MATRIX.replace("1,1,5,0", "1,1,-5,0")))
    assert code == 2 and "NotInCone" in err and "pivot at 3" in err
    bad = "1,2,3,4\n1,0,0,1\n0,1,0,0\n0,0,1,0\n1,0,0,1\n"
    code, _, err = run(capsys, "cone", "decompose", files("n.txt", N_TEXT),
                       "--matrix", files("sz.csv", bad))
    assert code == 2 and "StructuralZeroError" in err


# ----------------------------------------------------------------------
# wishart commands

def test_wishart_sample_is_deterministic(capsys, files, tmp_path):
    n = files("n.txt", N_TEXT)
    for d in ("a", "b"):
        code, _, _ = run(capsys, "wishart", "sample", n, "--lambda", "1,1,2,1", "--draws", 50,
                         "--seed", 7, "--out", tmp_path / d)
        assert code == 0
    a, b = tmp_path / "a", tmp_path / "b"
    assert (a / "samples.csv").read_text() == (b / "samples.csv").read_text()
    assert (a / "manifest.json").read_text() == (b / "manifest.json").read_text()
    rows = list(csv.reader(io.StringIO((a / "samples.csv").read_text())))
    assert rows[0] == ["x[1,1]", "x[2,2]", "x[3,1]", "x[3,2]", "x[3,3]", "x[4,2]", "x[4,4]"]
    assert len(rows) == 51
    man = json.loads((a / "manifest.json").read_text())
    assert man["poset"]["hash"] == n_poset().content_hash()
    assert man["seed"] == 7 and man["lambda"] == {"1": 1.0, "2": 1.0, "3": 2.0, "4": 1.0}


def test_wishart_density_and_laplace(capsys, files):
    n = files("n.txt", N_TEXT)
    code, out, _ = run(capsys, "wishart", "laplace", n, "--lambda", "1,1,2,1", "--theta", "0")
    assert code == 0 and json.loads(out)["laplace"] == 1.0
    code, out, _ = run(capsys, "wishart", "density", n, "--lambda", "1,1,2,1",
                       "--at", files("x.csv", N_MATRIX))
    assert code == 0 and np.isfinite(json.loads(out)["log_density"])


def test_wishart_invalid_lambda(capsys, files):
    code, _, err = run(capsys, "wishart", "sample", files("n.txt", N_TEXT), "--lambda", "1,1,0.5,1")
    assert code == 2 and "lambda_3 = 0.5 violates lambda_3 > 1" in err


def test_wishart_rejects_F_violation(capsys, files):
    code, _, err = run(capsys, "wishart", "sample", files("d.txt", DIAMOND_TEXT),
                       "--lambda", "1,1,1,2")
    assert code == 2 and "witness:" in err


# ----------------------------------------------------------------------
# characterize

def test_characterize_writes_reports(capsys, files, tmp_path):
    n = files("n.txt", N_TEXT)
    outs = []
    for d in ("a", "b"):
        code, out, _ = run(capsys, "characterize", "run", n, "--lambda", "1,1,2,1", "--suite",
                           "quick", "--out", tmp_path / d)
        assert code == 0
        outs.append(out)
    assert outs[0] == outs[1]
    rep = json.loads((tmp_path / "a" / "report.json").read_text())
    assert rep["passed"] is True
    assert rep["manifest"]["suite"] == "quick"
    assert (tmp_path / "a" / "report.json").read_text() == (tmp_path / "b" / "report.json").read_text()
    assert "SKIP" in (tmp_path / "a" / "report.txt").read_text()
