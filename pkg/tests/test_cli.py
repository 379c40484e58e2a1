import json
import subprocess
import sys
from pathlib import Path

import pytest

from bgwtilt.cli import run_cli

MODELS = Path(__file__).resolve().parent.parent / "demos" / "models"


def model(name):
    return str(MODELS / f"{name}.json")


def test_check_on_pair_family(tmp_path, capsys):
    out = tmp_path / "check.json"
    assert run_cli(["check", "--model", model("pair_family"), "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["assumptions"]["A2_empty_word"]["status"] == "pass"
    assert rep["assumptions"]["irreducible"]["status"] == "pass"
    assert "A.2 empty word: pass" in capsys.readouterr().out


def test_criticalize_binary(tmp_path, capsys):
    out, trace = tmp_path / "tilt.json", tmp_path / "trace.csv"
    code = run_cli(["criticalize", "--model", model("subcritical_binary"), "--rho-tol", "1e-12",
                    "--domain-bound", "100", "--trace-out", str(trace), "--out", str(out)])
    assert code == 0
    rep = json.loads(out.read_text())
    assert float(rep["tilt"]["b"][0]) == pytest.approx(1.41421356, abs=1e-8)
    assert rep["exact_b"] == ["0 + 1*sqrt(2)"]
    assert trace.read_text().startswith("arclength,b_1,beta,rho_tilde,detI_1,degenerate_flag")
    assert "1.414213562" in capsys.readouterr().out


def test_tilt_round_trip(tmp_path):
    tilt, tilted = tmp_path / "tilt.json", tmp_path / "tilted.json"
    assert run_cli(["criticalize", "--model", model("subcritical_binary"), "--out", str(tilt)]) == 0
    assert run_cli(["tilt", "--model", model("subcritical_binary"), "--tilt", str(tilt), "--out", str(tilted)]) == 0
    assert run_cli(["check", "--model", str(tilted)]) == 0
    # the same tilt applied to a different family is caught
    other = tmp_path / "other.json"
    other.write_text(Path(model("critical_binary")).read_text())
    assert run_cli(["tilt", "--model", str(other), "--tilt", str(tilt)]) == 2


def test_enumerate_unreachable_target(tmp_path, capsys):
    out = tmp_path / "e.json"
    assert run_cli(["enumerate", "--model", model("critical_binary"), "--root", "1", "--g", "4", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["trees"] == 0 and rep["Z"] == "0"
    assert "Z = 0" in capsys.readouterr().out


def test_enumerate_csv(tmp_path):
    csv = tmp_path / "e.csv"
    assert run_cli(["enumerate", "--model", model("critical_binary"), "--root", "1", "--g", "5", "--csv", str(csv)]) == 0
    assert len(csv.read_text().splitlines()) == 3


def test_equiv_test_verdicts(tmp_path):
    assert run_cli(["equiv-test", "--model", model("subcritical_binary"), "--max-size", "9"]) == 0
    out = tmp_path / "eq.json"
    code = run_cli(["equiv-test", "--model", model("pair_family"), "--other", model("pair_family_long_word"),
                    "--max-size", "8", "--out", str(out)])
    assert code == 2
    assert json.loads(out.read_text())["verdict"] == "fail"


def test_sampling_is_reproducible(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["sample", "--model", model("two_type_weighted"), "--root", "1", "--g", "9", "--n", "50", "--seed", "7"]
    assert run_cli(args + ["--out", str(a)]) == 0
    assert run_cli(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_kesten_sample(tmp_path):
    out = tmp_path / "k.json"
    assert run_cli(["kesten-sample", "--model", model("critical_binary"), "--root", "1", "--radius", "1",
                    "--n", "5", "--seed", "1", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["balls"] == ["1:2 1:0 1:0"] * 5


def test_local_limit_reports(tmp_path):
    out = tmp_path / "ll.json"
    args = ["local-limit", "--model", model("critical_binary"), "--root", "1", "--radius", "2",
            "--sizes", "4,9,11", "--samples", "200", "--bootstrap", "10", "--seed", "3", "--out", str(out)]
    run_cli(args)
    first = out.read_bytes()
    run_cli(args)
    assert out.read_bytes() == first
    rep = json.loads(first)
    assert rep["schema"] == 1
    assert [c["achievable"] for c in rep["cells"]] == [False, True, True]


def test_error_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"num_types": 1,\n "law": }')
    assert run_cli(["check", "--model", str(bad)]) == 1
    assert "line 2" in capsys.readouterr().err
    assert run_cli(["check", "--model", str(tmp_path / "missing.json")]) == 1
    assert run_cli(["no-such-command"]) == 1
    assert run_cli(["enumerate", "--model", model("critical_binary"), "--root", "5", "--g", "3"]) == 1
    escape = tmp_path / "escape.json"
    escape.write_text(json.dumps({
        "num_types": 2, "gamma": [1, 1],
        "law": {"kind": "projection", "types": [
            {"entries": [{"counts": [0, 0], "prob": "1/3"}, {"counts": [1, 0], "prob": "1/3"},
                         {"counts": [0, 1], "prob": "1/3"}]}] * 2}}))
    assert run_cli(["criticalize", "--model", str(escape)]) == 3
    assert run_cli(["criticalize", "--model", str(escape), "--allow-escape-failure", "--domain-bound", "50"]) == 4
    no_empty = tmp_path / "no_empty.json"
    no_empty.write_text(json.dumps({
        "num_types": 1, "gamma": [1],
        "law": {"kind": "projection", "types": [{"entries": [{"counts": [1], "prob": "1"}]}]}}))
    assert run_cli(["check", "--model", str(no_empty)]) == 3


def test_console_entry_point():
    done = subprocess.run([sys.executable, "-m", "bgwtilt", "check", "--model", model("poisson2")],
                          capture_output=True, text=True)
    assert done.returncode == 0
    assert "A.1" in done.stdout
