import io
import json

import numpy as np
import pytest

from carnot.cli import run
from carnot.extremal import engel_beta


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def table(text):
    lines = text.strip().split("\n")
    return lines[0].split(","), np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])


def test_verify_engel_example():
    code, out, err = call("verify-engel", "--tmax", "10", "--grid", "10000")
    assert code == 0
    header, rows = table(out)
    assert rows.shape == (10000, len(header))
    assert np.max(np.abs(rows[:, 1:])) < 1e-9


def test_integrate_matches_beta():
    code, out, _ = call("integrate", "--group", "engel", "--lambda", "0,1,2,1", "--g0", "2,0,0,0",
                        "--t1", "2", "--step", "1e-3")
    assert code == 0
    header, rows = table(out)
    assert header[:5] == ["t", "x1", "x2", "x12", "x112"] and header[-1] == "speed"
    assert np.max(np.abs(rows[:, 1:5] - engel_beta(rows[:, 0]))) < 1e-6


def test_width_of_collinear_points(tmp_path):
    f = tmp_path / "pts.csv"
    f.write_text("1,2,3\n2,4,6\n-1,-2,-3\n")
    code, out, _ = call("width", "--points", f"@{f}")
    assert code == 0
    _, rows = table(out)
    assert rows[0, 0] == 0.0


def test_fit_plane_reports_constant():
    code, out, err = call("fit-plane", "--points", "1,0;0,1;1,1", "--m", "2")
    assert code == 0 and "K:" in err
    header, rows = table(out)
    assert header == ["index", "distance", "in_support"] and rows.shape == (3, 3)


@pytest.mark.parametrize("group", ["engel", "g_rank2_step4"])
def test_correct_instances(group):
    code, out, _ = call("correct", "--group", group, "--instances", "10")
    assert code == 0
    header, rows = table(out)
    assert rows.shape[0] == 10
    assert np.all(rows[:, header.index("word_residual")] < 1e-12)


def test_triangle_and_lines():
    assert call("triangle", "--group", "engel", "--instances", "5")[0] == 0
    code, out, _ = call("lines", "--preset", "lift")
    assert code == 0 and out.split("\n")[1].startswith("0,nan")
    code, out, _ = call("lines", "--group", "engel", "--dir1", "1,0,0,0", "--dir2", "2,0,0,0")
    _, rows = table(out)
    assert rows[0, 0] == 1 and rows[0, 1] == pytest.approx(0.5)


def test_blowdown_and_svg():
    code, out, err = call("blowdown", "--window=0,1,5", "--hs", "1,10")
    assert code == 0 and "direction" in err
    _, rows = table(out)
    assert rows.shape == (10, 6)
    code, out, _ = call("blowdown", "--format", "svg", "--window=-1,1,21")
    assert code == 0 and out.startswith("<svg") and out.count("<polyline") == 3


def test_check_commands():
    assert call("tangent-check", "--pairs", "20")[0] == 0
    assert call("verify-lift", "--tmax", "20", "--grid", "201")[0] == 0
    code, _, err = call("rough-check", "--curve", "circle", "--samples", "40")
    assert code == 0 and "hyperplane" in err


def test_failure_exit_code():
    code, _, err = call("verify-engel", "--tol", "1e-300", "--grid", "100")
    assert code == 1 and err.strip().splitlines()[-1].startswith("FAILED:")


def test_rough_check_rejects_bad_points(tmp_path):
    t = np.linspace(0, 10, 11)
    data = np.column_stack([t, 2 * t, 0 * t, 0 * t])
    f = tmp_path / "pts.txt"
    np.savetxt(f, data)
    code, _, err = call("rough-check", "--points", f"@{f}", "--C", "0.1")
    assert code == 1 and "witness" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["nonsense"],
        ["integrate"],
        ["integrate", "--lambda", "1,0", "--step", "-1"],
        ["width", "--points", "1,a"],
        ["correct", "--group", "no_such_group"],
        ["blowdown", "--window=0,1"],
        ["verify-engel", "--format", "pdf"],
        ["verify-engel", "--out", "/nonexistent/dir/x.csv"],
        ["width", "--format", "svg", "--points", "1,0;0,1"],
    ],
)
def test_invalid_input_exit_code(argv):
    assert call(*argv)[0] == 2


def test_determinism():
    a = call("correct", "--group", "engel", "--instances", "5", "--seed", "7")[1]
    b = call("correct", "--group", "engel", "--instances", "5", "--seed", "7")[1]
    c = call("correct", "--group", "engel", "--instances", "5", "--seed", "8")[1]
    assert a == b and a != c


def test_csv_format():
    out = call("correct", "--group", "engel", "--instances", "2")[1]
    assert "\r" not in out and out.endswith("\n")
    value = out.split("\n")[1].split(",")[1]
    assert float(repr(float(value))) == float(value) and len(value.replace("-", "").replace(".", "")) >= 15


def test_config_and_flag_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"instances": 3, "group": "engel", "seed": 1}))
    _, out, _ = call("correct", "--config", str(cfg))
    assert len(out.strip().split("\n")) == 4
    _, out2, _ = call("correct", "--config", str(cfg), "--instances", "2")
    assert len(out2.strip().split("\n")) == 3
    assert out2.split("\n")[1] == out.split("\n")[1]
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert call("correct", "--config", str(bad))[0] == 2
    bad.write_text(json.dumps({"no_such_key": 1}))
    assert call("correct", "--config", str(bad))[0] == 2


def test_output_directory(tmp_path, monkeypatch):
    monkeypatch.setenv("CARNOT_OUTPUT_DIR", str(tmp_path))
    code, out, _ = call("lines", "--preset", "lift", "--out", "lines.csv")
    assert code == 0 and out == ""
    assert (tmp_path / "lines.csv").read_text().startswith("finite,c,")


@pytest.mark.parametrize(
    "argv",
    [
        ["integrate", "--lambda", "0,1,2,1"],
        ["width", "--points", "1,0;0,1"],
        ["fit-plane", "--points", "1,0;0,1"],
        ["correct", "--group", "engel"],
        ["triangle", "--group", "engel"],
        ["blowdown"],
        ["lines", "--preset", "lift"],
        ["tangent-check"],
        ["verify-engel"],
        ["verify-lift"],
        ["rough-check"],
    ],
)
def test_dry_run(argv):
    code, out, err = call(*argv, "--dry-run")
    assert code == 0 and out == "" and err.strip() == "ok"


def test_dry_run_still_validates():
    assert call("fit-plane", "--points", "1,0;0,1", "--m", "5", "--dry-run")[0] == 2
    assert call("blowdown", "--hs", "10,1", "--dry-run")[0] == 2
