import json
import subprocess
import sys

import pytest

from qcompa.cli import main

SMALL = ["--n-antennas", "4", "--n-cells", "2", "--n-users", "1", "--n-subcarriers", "4"]


def test_solve_json(capsys):
    assert main(["solve", *SMALL, "--algorithms", "qcomp_pa,qcomp", "--seed", "3"]) == 0
    doc = json.loads(capsys.readouterr().out)
    res = doc["results"]
    assert doc["seed"] == 3
    assert res["qcomp_pa"]["status"] == "ok" and res["qcomp_pa"]["converged"]
    assert res["qcomp_pa"]["p0_dbm"] <= res["qcomp"]["p0_dbm"] + 0.01
    assert len(res["qcomp"]["antenna_power_dbm"]) == 2


def test_solve_infeasible_exit_code(tmp_path):
    out = tmp_path / "r.json"
    code = main(["solve", *SMALL, "--bits", "1", "--gamma-db", "15", "--brief", "--out", str(out)])
    assert code == 2
    assert json.loads(out.read_text())["results"]["qcomp_pa"]["status"] == "infeasible"


def test_bad_resolution_is_an_error(capsys):
    assert main(["solve", *SMALL, "--bits", "7"]) == 1
    assert "unsupported" in capsys.readouterr().err


def test_sweep_csv_byte_identical(tmp_path):
    args = ["sweep", "--trials", "1", "--bits", "3", "--gamma-db=-3", "--seed", "4",
            "--algorithms", "qcomp_pa,qcomp"]
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_antennas": 4, "n_cells": 2, "n_users": 1, "n_subcarriers": 4}))
    for name in ("a", "b"):
        assert main([*args, "--config", str(cfg), "--out-dir", str(tmp_path / name)]) == 0
    a = (tmp_path / "a" / "records.csv").read_bytes()
    assert a == (tmp_path / "b" / "records.csv").read_bytes()
    assert a.count(b"\n") == 3


def test_sweep_env_seed(tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_antennas": 4, "n_cells": 2, "n_users": 1, "n_subcarriers": 4,
                               "trials": 1, "bits": [3], "gamma_db": [-3],
                               "algorithms": ["qcomp"]}))
    monkeypatch.setenv("QCOMPA_SEED", "9")
    main(["sweep", "--config", str(cfg), "--out-dir", str(tmp_path / "env")])
    main(["sweep", "--config", str(cfg), "--out-dir", str(tmp_path / "flag"), "--seed", "9"])
    main(["sweep", "--config", str(cfg), "--out-dir", str(tmp_path / "other"), "--seed", "10"])
    env = (tmp_path / "env" / "records.csv").read_bytes()
    assert env == (tmp_path / "flag" / "records.csv").read_bytes()
    assert env != (tmp_path / "other" / "records.csv").read_bytes()


def test_papr_csv(tmp_path):
    outs = []
    for name in ("a", "b"):
        path = tmp_path / f"{name}.csv"
        assert main(["papr", *SMALL, "--trials", "2", "--estimator", "temporal", "--seed", "1",
                     "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    lines = outs[0].decode().splitlines()
    assert lines[0] == "algorithm,trial,estimator,papr_db" and len(lines) == 7


def test_conflicting_sources(tmp_path):
    with pytest.raises(SystemExit):
        main(["sweep", "--config", "x.json", "--preset", "wideband-desk",
              "--out-dir", str(tmp_path)])


def test_validate_subcommand():
    proc = subprocess.run([sys.executable, "-m", "qcompa.cli", "validate", "--trials", "2"],
                          capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert "FAIL" not in proc.stdout and proc.stdout.count("PASS") >= 6
