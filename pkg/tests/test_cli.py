import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from unfairedge.cli import main, parse_query

MODELS = Path(__file__).resolve().parents[1] / "models"


def _err(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_parse_query():
    assert parse_query("R=0, A=1,G=2") == {"R": 0, "A": 1, "G": 2}
    for bad in ("R", "R=x", ""):
        with pytest.raises(Exception):
            parse_query(bad)


def test_validate_shipped_model(capsys):
    assert main(["validate", "--model", str(MODELS / "bail.json")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["valid"] and doc["sensitive"] == ["A", "G", "R"]
    assert "R->J" in doc["unfairEdges"]


def test_validate_rejects_bad_model(tmp_path, capsys):
    doc = json.loads((MODELS / "toy1.json").read_text())
    doc["cpts"]["Y"]["table"][0] = [0.7, 0.2]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["validate", "--model", str(bad)]) == 2
    assert _err(capsys)["error"] != "io"
    bad.write_text("{not json")
    assert main(["validate", "--model", str(bad)]) == 2


def test_missing_file_is_io_error(tmp_path, capsys):
    assert main(["validate", "--model", str(tmp_path / "absent.json")]) == 4
    assert _err(capsys)["error"] == "io"


def test_fit_writes_sidecar(tmp_path, capsys):
    assert main(["fit", "--model", str(MODELS / "toy1.json"), "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "fit.csv").open()))
    assert [r["node"] for r in rows] == ["Y"]
    assert json.loads((tmp_path / "fitted.json").read_text())


def test_priority_csv_is_sorted(tmp_path, capsys):
    args = ["priority", "--model", str(MODELS / "bail.json"), "--s", "R=0,A=1,G=0", "--y", "J=1",
            "--wu", "0.5", "--wp", "0.5", "--out", str(tmp_path)]
    assert main(args) == 0
    out = capsys.readouterr().out
    rows = list(csv.DictReader((tmp_path / "priority.csv").open()))
    assert out == (tmp_path / "priority.csv").read_text()
    pr = [float(r["priority"]) for r in rows]
    assert pr == sorted(pr, reverse=True) and len(rows) == 7
    for r in rows:
        assert float(r["priority"]) == pytest.approx(0.5 * float(r["mu"]) + 0.5 * float(r["potential"]), rel=1e-12)
    assert (tmp_path / "priority.svg").read_text().lstrip().startswith("<?xml")


def test_negative_weight_is_rejected(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["priority", "--model", str(MODELS / "toy1.json"), "--s", "S=1", "--y", "Y=1", "--wu", "-1"])
    assert exc.value.code == 2


def test_unknown_query_variable(tmp_path, capsys):
    assert main(["priority", "--model", str(MODELS / "toy1.json"), "--s", "Q=1", "--y", "Y=1",
                 "--out", str(tmp_path)]) == 2


def test_remove_reduces_total_unfairness(tmp_path, capsys):
    assert main(["remove", "--model", str(MODELS / "toy1.json"), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "removal.json").read_text())
    assert rep["sumMuAfter"] < rep["sumMuBefore"]
    assert main(["validate", "--model", str(tmp_path / "new_model.json")]) == 0


def test_solver_budget_gives_exit_3(tmp_path, capsys):
    code = main(["remove", "--model", str(MODELS / "bail.json"), "--kind", "linear", "--iterations", "2",
                 "--out", str(tmp_path)])
    assert code == 3
    assert _err(capsys)["error"] == "non_convergence"
    assert (tmp_path / "new_model.json").exists()


def test_plots_do_not_change_csv(tmp_path, capsys):
    common = ["experiment", "edge-property", "--draws", "2", "--epochs", "100"]
    assert main(common + ["--out", str(tmp_path / "a")]) == 0
    assert main(common + ["--out", str(tmp_path / "b"), "--no-plots"]) == 0
    a, b = tmp_path / "a", tmp_path / "b"
    assert (a / "edge-property.csv").read_bytes() == (b / "edge-property.csv").read_bytes()
    assert (a / "edge-property.svg").exists() and not (b / "edge-property.svg").exists()


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "unfairedge.cli", "validate", "--model", str(MODELS / "toy1.json")],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["unfairEdges"] == ["S->Y"]
