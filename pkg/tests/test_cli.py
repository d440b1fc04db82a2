import json
import subprocess
import sys

import pytest

from robust_pooling.bench import read_csv
from robust_pooling.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_solve_then_verify_round_trip(tmp_path, capsys):
    sol = tmp_path / "sol.json"
    report = tmp_path / "report.json"
    code, out, _ = run(capsys, "solve", "--instance", "haverly1", "--set", "ellipsoid", "--r", "0.1",
                       "--out", sol, "--report", report)
    assert code == EXIT_OK and "certified: yes" in out
    doc = json.loads(report.read_text())
    assert doc["status"] == "Optimal" and doc["profit"] == pytest.approx(280.0, rel=1e-6)
    code, out, _ = run(capsys, "verify", "--instance", "haverly1", "--solution", sol,
                       "--set", "ellipsoid", "--r", "0.1")
    assert code == EXIT_OK and "certified: yes" in out


def test_verify_fails_for_nominal_solution(tmp_path, capsys):
    sol = tmp_path / "nominal.json"
    assert run(capsys, "solve", "--instance", "haverly1", "--method", "nominal", "--out", sol)[0] == EXIT_OK
    code, out, _ = run(capsys, "verify", "--instance", "haverly1", "--solution", sol, "--set", "box", "--r", "0.1")
    assert code == EXIT_FAIL and "certified: no" in out


def test_config_overrides_flags(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"geometry": "polyhedron", "r": 0.2, "method": "reform", "delta_star": 1e-6}))
    report = tmp_path / "r.json"
    code, out, _ = run(capsys, "solve", "--instance", "haverly1", "--set", "box", "--r", "0.0",
                       "--config", cfg, "--report", report)
    assert code == EXIT_OK and "set=polyhedron r=0.2 method=reform" in out
    assert json.loads(report.read_text())["profit"] == pytest.approx(234.7826087, rel=1e-6)


@pytest.mark.parametrize("argv", [
    ["solve", "--instance", "nowhere"],
    ["sweep", "--csv", "x.csv", "--r-grid", "0.1:0.2:3"],
    ["solve", "--instance", "haverly1", "--gamma", "3"],
])
def test_usage_errors(argv, capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code, _, err = run(capsys, *argv)
    assert code == EXIT_USAGE and err.startswith("error:")


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"colour": "blue"}))
    code, _, err = run(capsys, "verify", "--instance", "haverly1", "--solution", "x", "--config", cfg)
    assert code == EXIT_USAGE and "colour" in err


def test_argparse_usage_exit():
    with pytest.raises(SystemExit) as exc:
        main(["solve"])
    assert exc.value.code == EXIT_USAGE


def test_sweep_writes_csv_and_manifest(tmp_path, capsys):
    csv_path = tmp_path / "sweep.csv"
    code, out, _ = run(capsys, "sweep", "--instances", "haverly1", "--sets", "box,polyhedron",
                       "--r-grid", "0,0.1", "--csv", csv_path)
    assert code == EXIT_OK
    rows = read_csv(csv_path.open())
    assert len(rows) == 4 and all(r.robust_certified for r in rows)
    assert not (tmp_path / "sweep.csv.partial").exists()
    doc = json.loads((tmp_path / "sweep.json").read_text())
    assert doc["rows"] == 4 and doc["r_grid"] == [0.0, 0.1]
    assert out.count("Optimal") == 4


def test_compare_report(tmp_path, capsys):
    report = tmp_path / "cmp.json"
    code, out, _ = run(capsys, "compare", "--instance", "haverly3", "--set", "box", "--r", "0.1",
                       "--report", report)
    assert code == EXIT_OK and "reform vs cut-multi" in out
    doc = json.loads(report.read_text())
    assert not doc["disagreement"] and set(doc["methods"]) == {"reform", "cut-single", "cut-multi", "safety"}


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "robust_pooling", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "sweep" in proc.stdout
