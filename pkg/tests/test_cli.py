import csv
import json
from pathlib import Path

import pytest

from milnor.cli import run

SPECS = Path(__file__).resolve().parent.parent / "bundle_specs"


def _run(capsys, *argv):
    code = run([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_check_trivial(capsys):
    code, out, _ = _run(capsys, "check", SPECS / "trivial.json")
    doc = json.loads(out)
    assert code == 0 and doc["ok"] and doc["partition"]["ok"]
    assert doc["cocycle"]["max_cocycle"] == 0.0


@pytest.mark.parametrize("name", ["hopf", "so3_clutching", "t_alpha", "torus_base", "circle_base", "interval_base"])
def test_check_all_specs(capsys, name):
    code, out, _ = _run(capsys, "check", SPECS / f"{name}.json")
    assert code == 0 and json.loads(out)["ok"]


def test_chern_hopf_and_csv(capsys, tmp_path):
    grid = tmp_path / "F.csv"
    code, out, _ = _run(capsys, "chern", SPECS / "hopf.json", "--csv", grid)
    doc = json.loads(out)
    assert code == 0 and abs(doc["value"] - 1.0) < 1e-3 and doc["nearest"] == 1.0
    with open(grid) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["chart", "x0", "x1", "F"] and len(rows) > 1000


def test_chern_t_alpha(capsys):
    code, out, _ = _run(capsys, "chern", SPECS / "t_alpha.json")
    doc = json.loads(out)
    assert code == 0 and doc["lattice"] == [1, 1]


def test_chern_rejects_nonabelian(capsys):
    code, _, err = _run(capsys, "chern", SPECS / "so3_clutching.json")
    assert code == 1 and "U1" in err


def test_malformed_json_reports_byte_offset(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_bytes(b'{"base": "S2-two-disks",\n "group": {"kind": "U1"} "x": 1}')
    code, _, err = _run(capsys, "check", bad)
    assert code == 2 and "byte 50" in err  # where "x" starts


def test_bad_expression_reports_byte_offset(capsys, tmp_path):
    spec = json.loads((SPECS / "hopf.json").read_text())
    spec["transitions"]["1,0"]["expr"] = "phi + * 2"
    text = json.dumps(spec)
    path = tmp_path / "expr.json"
    path.write_text(text)
    code, _, err = _run(capsys, "check", path)
    assert code == 2
    offset = int(err.split("byte ")[1].split(":")[0])
    assert text.encode()[offset:offset + 1] == b"*"


def test_missing_file(capsys, tmp_path):
    code, _, err = _run(capsys, "check", tmp_path / "nope.json")
    assert code == 2 and "cannot read" in err


def test_output_is_byte_identical(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(["classify", str(SPECS / "hopf.json"), "--samples", "5", "--out", str(a)]) == 0
    assert run(["classify", str(SPECS / "hopf.json"), "--samples", "5", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert run(["classify", str(SPECS / "hopf.json"), "--samples", "5", "--seed", "9", "--out", str(b)]) == 0
    assert a.read_bytes() != b.read_bytes()
    assert capsys.readouterr().out == ""


def test_classify(capsys):
    code, out, _ = _run(capsys, "classify", SPECS / "so3_clutching.json", "--samples", "10")
    doc = json.loads(out)
    assert code == 0 and len(doc["points"]) == 10
    assert doc["chart_independence"]["equivalent"]
    assert doc["round_trip"]["max_deviation"] < 1e-9


def test_holonomy(capsys):
    code, out, _ = _run(capsys, "holonomy", SPECS / "hopf.json", "--steps", "10000")
    doc = json.loads(out)
    assert code == 0 and abs(doc["lift"] + 3.141592653589793) < 1e-9 and doc["certificate"] <= 1e-5
    code, out, _ = _run(capsys, "holonomy", SPECS / "hopf.json", "--loop", "0:0.8;2*pi*t")
    assert code == 0 and json.loads(out)["ok"]
    code, _, err = _run(capsys, "holonomy", SPECS / "hopf.json", "--loop", "meridian")
    assert code == 2 and "bad loop" in err


def test_contract(capsys):
    code, out, _ = _run(capsys, "contract", "--stage", "6", "--tau", "0.7", "--group", '{"kind": "SO3"}')
    doc = json.loads(out)
    assert code == 0 and doc["checks"] == {"end_is_basepoint": True, "start_is_point": True}
    code, _, _ = _run(capsys, "contract", "--tau", "2")
    assert code == 2


def test_homotopy(capsys):
    code, out, _ = _run(capsys, "homotopy", SPECS / "tables.json")
    doc = json.loads(out)
    assert code == 0
    assert doc["shifts"]["T_alpha"]["2"] == "Z^2" and doc["shifts"]["T_alpha"]["1"] == "0"
    status = {(e["sub"], e["total"]): e["status"] for e in doc["extensions"]}
    assert status[("Q", "R")] == "exact" and status[("PDO", "FIO")] == "undetermined"
