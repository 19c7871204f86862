import json

import pytest

from cohmms.cli import main

TWO = {"labels": ["a", "b"], "dist": [[0, 1], [1, 0]], "mu": ["1/2", "1/2"]}
THREE = {"labels": ["a", "b", "c"], "dist": [[0, 1, "6/5"], [1, 0, "3/2"], ["6/5", "3/2", 0]],
         "mu": ["1/3", "1/3", "1/3"]}


@pytest.fixture
def write(tmp_path):
    def _write(name, doc):
        path = tmp_path / name
        path.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
        return str(path)
    return _write


def _run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "montecarlo" in capsys.readouterr().out


def test_unknown_command_is_usage_error(capsys):
    assert main(["frobnicate"]) == 2


def test_closure_two_point(write, capsys):
    code, out, _ = _run(capsys, ["closure", "--space", write("two.json", TWO)])
    doc = json.loads(out)
    assert code == 0
    assert doc["class_count"] == 2 and doc["full"] is False and doc["axioms_ok"] is True


def test_closure_csv(write, capsys):
    code, out, _ = _run(capsys, ["closure", "--space", write("two.json", TWO), "--format", "csv"])
    assert out.splitlines()[0] == "x_label,y_label,class_id"
    assert out.splitlines()[2] == "a,b,1"


def test_fullness_three_point(write, capsys):
    code, out, _ = _run(capsys, ["fullness", "--space", write("three.json", THREE)])
    assert json.loads(out)["full"] is True


def test_validate_reports_triangle_violation(write, capsys):
    bad = {"dist": [[0, 1, 5], [1, 0, 1], [5, 1, 0]], "mu": ["1/3", "1/3", "1/3"]}
    code, out, _ = _run(capsys, ["validate", "--space", write("bad.json", bad)])
    assert code == 1
    assert "triangle" in out


def test_malformed_json_names_field(write, capsys):
    code, _, err = _run(capsys, ["closure", "--space", write("bad.json", {"dist": [[0, 1], [1, 0]]})])
    assert code == 2 and "mu" in err
    code, _, err = _run(capsys, ["closure", "--space", write("junk.json", "{not json")])
    assert code == 2


def test_missing_file(capsys):
    code, _, err = _run(capsys, ["closure", "--space", "/nonexistent/space.json"])
    assert code == 2


def test_genericity_output(write, capsys):
    code, out, _ = _run(capsys, ["genericity", "--space", write("three.json", THREE), "--N", "3"])
    doc = json.loads(out)
    assert code == 0
    assert doc["satisfied"] is False
    assert doc["separation_profile"]["N_min"] is None
    assert doc["density_condition"] == {"off_diag_injective": True, "diag_power2_injective": True}


def test_laplacian_checks(write, capsys):
    code, out, _ = _run(capsys, ["laplacian", "--space", write("three.json", THREE),
                                 "--check", "membership,variational,psd,hadamard"])
    doc = json.loads(out)
    assert code == 0
    assert all(doc[k]["ok"] for k in ("membership", "variational", "psd", "hadamard"))


def test_laplacian_rejects_nonuniform_and_unknown_check(write, capsys):
    skew = dict(TWO, mu=["1/3", "2/3"])
    assert _run(capsys, ["laplacian", "--space", write("skew.json", skew)])[0] == 2
    assert _run(capsys, ["laplacian", "--space", write("two.json", TWO), "--check", "spectral"])[0] == 2


def test_census(write, capsys):
    code, out, _ = _run(capsys, ["census", "--space", write("three.json", THREE), "--a", "1", "--b", "1"])
    assert json.loads(out)["diagonal"] == ["1", "1", "0"]


def test_distance_symmetric(write, capsys):
    other = dict(TWO, mu=["1/4", "3/4"])
    code, out, _ = _run(capsys, ["distance", "--a", write("x.json", TWO), "--b", write("y.json", other),
                                 "--symmetric"])
    doc = json.loads(out)
    assert doc["upper"] == "1/4" and doc["symmetrized"] == "1/2" and doc["exact"] is True


def test_generate_roundtrip(tmp_path, capsys):
    out = tmp_path / "g.json"
    assert main(["generate", "--n", "4", "--seed", "3", "--out", str(out)]) == 0
    assert main(["validate", "--space", str(out)]) == 0


def test_montecarlo_is_byte_identical(tmp_path, capsys):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        assert main(["montecarlo", "--n", "2..4", "--samples", "5", "--seed", "7", "--csv", str(p),
                     "--json", str(p.with_suffix(".json"))]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    summary = json.loads(paths[0].with_suffix(".json").read_text())
    assert summary["per_n"]["2"]["fraction_full"] == 0.0
    assert summary["per_n"]["3"]["fraction_full"] == 1.0
