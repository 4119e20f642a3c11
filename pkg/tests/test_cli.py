import json
import subprocess
import sys

import numpy as np
import pytest

from anyonweave import category
from anyonweave.cli import EXIT_FAIL, EXIT_IMPOSSIBLE, EXIT_OK, EXIT_USAGE, g12, main
from anyonweave.gates import CEG, EG, equal_up_to_phase


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def json_lines(out):
    return [json.loads(x) for x in out.splitlines() if x.strip()]


@pytest.fixture
def corrupted(tmp_path):
    data = category.load_golden()
    key = sorted(k for k in data if k.startswith("F"))[3]
    data[key]["re"] += 1e-7
    path = tmp_path / "golden.json"
    path.write_text(json.dumps(data))
    return path, key


# -- verify -------------------------------------------------------------------------------

def test_verify_passes(capsys):
    code, out, _ = run(capsys, "verify")
    assert code == EXIT_OK
    assert {line.split()[0] for line in out.splitlines()} >= {"pentagon", "hexagon", "unitarity", "dimension", "oracle"}
    assert "FAIL" not in out


def test_verify_json(capsys):
    code, out, _ = run(capsys, "verify", "--output", "json")
    report = json.loads(out)
    assert code == EXIT_OK and report["pass"]
    assert report["checks"]["oracle"]["mismatches"] == 0


def test_verify_flags_corrupted_golden(capsys, corrupted):
    path, key = corrupted
    code, out, _ = run(capsys, "verify", "--golden", str(path))
    assert code == EXIT_FAIL
    assert key in out


def test_verify_reads_golden_from_environment(capsys, corrupted, monkeypatch):
    path, key = corrupted
    monkeypatch.setenv("ANYONWEAVE_GOLDEN", str(path))
    code, out, _ = run(capsys, "verify", "--output", "json")
    report = json.loads(out)
    assert code == EXIT_FAIL
    assert report["checks"]["oracle"]["first"]["symbol"] == key


def test_verify_missing_golden(capsys, tmp_path):
    code, _, _ = run(capsys, "verify", "--golden", str(tmp_path / "none.json"))
    assert code == EXIT_FAIL


# -- basis ----------------------------------------------------------------------------------------

def test_basis(capsys):
    code, out, _ = run(capsys, "basis", "2", "2", "2", "2", "--output", "json")
    assert code == EXIT_OK and json.loads(out)["dimension"] == 3


# -- run ----------------------------------------------------------------------------------------

def test_run_forced_plan(capsys):
    code, out, _ = run(capsys, "run", "ceg_winning", "--forced")
    rows = json_lines(out)
    assert code == EXIT_OK
    assert rows[-1]["result"] == "gate-produced"
    assert rows[-1]["probability"] == pytest.approx(0.000217013888889, rel=1e-9)


def test_run_sample_is_deterministic(capsys):
    a = run(capsys, "run", "ceg_winning", "--seed", "7", "--input", "bell", "--dump")
    b = run(capsys, "run", "ceg_winning", "--seed", "7", "--input", "bell", "--dump")
    assert a == b
    last = json_lines(a[1])[-1]
    assert last["seed"] == 7 and last["rng"] == "numpy.random.PCG64"
    assert "state" in last


def test_run_enumerate_sums_to_one(capsys):
    code, out, _ = run(capsys, "run", "process_p", "--enumerate", "--input", "qutrit:1,0,1")
    rows = json_lines(out)
    summary = rows[-1]
    assert code == EXIT_OK
    assert summary["passes"] == len(rows) - 1
    assert sum(r["probability"] for r in rows[:-1]) == pytest.approx(1.0, abs=1e-9)
    assert sum(t["probability"] for t in summary["terminals"]) == pytest.approx(1.0, abs=1e-9)


def test_run_impossible_outcome(capsys):
    code, _, err = run(capsys, "run", "ceg_winning", "--force", "4,0,0,0,0,0,0")
    assert code == EXIT_IMPOSSIBLE
    assert "impossible outcome 4" in err


def test_run_script_file(capsys, tmp_path):
    path = tmp_path / "tiny.proto"
    path.write_text("anyons: 1 1\nfuse 0 {0 -> done}\nlabel done:\nresult intact-input\n")
    code, out, _ = run(capsys, "run", str(path), "--seed", "1")
    assert code == EXIT_OK and json_lines(out)[-1]["result"] == "intact-input"


def test_run_parse_error_is_usage(capsys, tmp_path):
    path = tmp_path / "bad.proto"
    path.write_text("anyons: 1 1\ngoto nowhere\n")
    code, _, err = run(capsys, "run", str(path))
    assert code == EXIT_USAGE
    assert ":2:6:" in err


@pytest.mark.parametrize("argv", [
    ("run", "no_such_script"),
    ("run", "ceg_winning", "--option", "final_twist=maybe"),
    ("run", "ceg_winning", "--option", "nosuch=on"),
    ("run", "ceg_winning", "--input", "qutrit:1,2"),
    ("run", "ceg_winning", "--budget", "0"),
])
def test_usage_errors(capsys, argv):
    assert run(capsys, *argv)[0] == EXIT_USAGE


@pytest.mark.parametrize("argv", [("frobnicate",), ("run",), ("stats", "ceg_winning", "--runs", "x")])
def test_argument_errors_exit_64(capsys, argv):
    with pytest.raises(SystemExit) as info:
        main(list(argv))
    capsys.readouterr()
    assert info.value.code == EXIT_USAGE


# -- extract-gate ---------------------------------------------------------------------------------

def test_extract_gate_ceg(capsys):
    code, out, _ = run(capsys, "extract-gate", "ceg_winning", "--golden", "CEG", "--output", "json")
    data = json.loads(out)
    assert code == EXIT_OK and data["golden"]["match"]
    u = np.array([[complex(*z) if isinstance(z, list) else z for z in row] for row in data["gate"]])
    assert equal_up_to_phase(u, CEG, 1e-9)


def test_extract_gate_eg_human(capsys):
    code, out, _ = run(capsys, "extract-gate", "ceg_winning", "--no-final-twist", "--golden", "EG")
    assert code == EXIT_OK
    assert "matches EG" in out


def test_extract_gate_mismatch(capsys):
    code, out, _ = run(capsys, "extract-gate", "ceg_winning", "--golden", "EG", "--output", "json")
    data = json.loads(out)
    assert code == EXIT_FAIL
    assert not data["golden"]["match"] and data["golden"]["deviation"] > 0.1


def test_extract_gate_main4(capsys):
    code, _, _ = run(capsys, "extract-gate", "recovery_main4", "--golden", "REC4")
    assert code == EXIT_OK


# -- stats ----------------------------------------------------------------------------------------

def test_stats(capsys):
    code, out, _ = run(capsys, "stats", "ceg_winning", "--runs", "500", "--seed", "3", "--output", "json")
    data = json.loads(out)
    assert code == EXIT_OK and data["pass"]
    assert sum(b["count"] for b in data["branches"]) == 500


# -- formatting and entry point -----------------------------------------------------------------

def test_g12():
    assert g12(1e-13) == 0.0
    assert g12(0.1 + 0.2) == 0.3
    assert g12(-EG[0, 0].real) == 0.5


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "anyonweave.cli", "basis", "1", "2", "2", "1"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "dimension 2" in proc.stdout
