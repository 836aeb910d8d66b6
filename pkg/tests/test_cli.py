import io
import json
from pathlib import Path

import pytest

from multop.cli import RunConfig, main, run
from multop.decompose import recheck
from multop.measure import load_spec

DATA = Path(__file__).resolve().parent.parent / "data"


def call(**kw):
    out, err = io.StringIO(), io.StringIO()
    code = run(RunConfig(**kw), out, err)
    return code, out.getvalue(), err.getvalue()


def test_decompose_records_reverify(tmp_path):
    path = tmp_path / "cert.json"
    code, _, _ = call(command="decompose", inputs=[str(DATA / "lebesgue_line.json")], p=2.0, epsilon=0.5,
                      level=8, out=str(path), format="records")
    assert code == 0
    doc = json.loads(path.read_text())
    assert doc["verification"]["ok"]
    assert set(doc["verification"]["checks"].values()) == {"pass"}
    assert recheck(doc["certificate"], load_spec(DATA / "lebesgue_line.json")).ok


def test_decompose_table_columns():
    code, out, _ = call(command="decompose", inputs=[str(DATA / "plane_uniform.json")], p=3.0, epsilon=1.0,
                        level=8)
    assert code == 0
    header = out.splitlines()[0].split(",")
    assert header[:5] == ["level", "K_upper", "discretization_error", "cutoff", "empirical_constant"]


def test_classify_rational_pair():
    code, out, _ = call(command="classify", inputs=[str(DATA / "lebesgue_line.json"),
                                                    str(DATA / "lebesgue_rational_atoms.json")],
                        p=3.0, format="records")
    assert code == 0
    assert json.loads(out)["verdict"]["similar_mod_compact"] is True


def test_malformed_spec_exit_2():
    code, out, err = call(command="classify", inputs=[str(DATA / "malformed_mass.json"),
                                                      str(DATA / "lebesgue_line.json")], p=3.0)
    assert code == 2 and out == ""
    assert json.loads(err)["field"] == "atoms[0].mass"


@pytest.mark.parametrize("kw, field", [
    ({"p": 1.0}, "--p"),
    ({"level": 15}, "--level"),
    ({"epsilon": -1.0}, "--epsilon"),
    ({"inputs": []}, "inputs"),
])
def test_bad_config_exit_2(kw, field):
    base = {"command": "decompose", "inputs": [str(DATA / "lebesgue_line.json")]}
    base.update(kw)
    code, _, err = call(**base)
    assert code == 2 and json.loads(err)["field"] == field


def test_missing_file_exit_2():
    code, _, err = call(command="norms", inputs=["does/not/exist.json"])
    assert code == 2 and "error" in json.loads(err)


def test_precondition_failure_exit_2():
    code, _, err = call(command="demo-absorb", inputs=[str(DATA / "left_half.json")], entries=[0.9], level=6)
    assert code == 2 and "off-support" in json.loads(err)["error"]


def test_demo_nonembed_rows():
    code, out, _ = call(command="demo-nonembed", p=4.0)
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "k,lp_norm,l2_norm,sqrt_k,upper,ratio" and len(lines) == 9


def test_haar_const_and_norms():
    code, out, _ = call(command="haar-const", inputs=[str(DATA / "lebesgue_line.json")], p=2.0, level=3)
    assert code == 0
    assert all(abs(float(r.split(",")[2]) - 1) < 1e-12 for r in out.strip().splitlines()[1:])
    code, out, _ = call(command="norms", inputs=[str(DATA / "harmonic_atoms.json")], p=3.0, level=4)
    assert code == 0 and out.count("\n") == 2


def test_main_entry_point(capsys):
    assert main(["demo-absorb", str(DATA / "lebesgue_line.json"), "--entries", "0.25,0.75", "--level", "8",
                 "--p", "3"]) == 0
    assert "similarity_defect_upper" in capsys.readouterr().out


def test_repeat_runs_identical():
    kw = dict(command="haar-const", inputs=[str(DATA / "plane_uniform.json")], p=3.0, level=4, seed=42)
    assert call(**kw) == call(**kw)
