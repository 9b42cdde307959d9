import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from becat.cli import main, read_run
from becat.detection import EtaDistribution, run_sequence
from becat.fock import fock_state


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_hat_csv(tmp_path):
    out = tmp_path / "hat.csv"
    assert main(["hat", "--sites", "3", "--atoms-per-site", "20", "--xi", "0", "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header == ["N_alpha", "N_beta", "probability"]
    assert len(rows) == 1891
    assert sum(float(r[2]) for r in rows) == pytest.approx(1.0, abs=1e-10)
    keys = [(int(r[0]), int(r[1])) for r in rows]
    assert keys == sorted(keys)


def test_hat_xi_independent(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["hat", "--atoms-per-site", "8", "--xi", "0", "--out", str(a)])
    main(["hat", "--atoms-per-site", "8", "--xi", "0.7", "--out", str(b)])
    pa = np.array([float(r[2]) for r in read_csv(a)[1]])
    pb = np.array([float(r[2]) for r in read_csv(b)[1]])
    assert np.max(np.abs(pa - pb)) < 1e-10


def test_hat_empty_sector(capsys):
    assert main(["hat", "--atoms-per-site", "0"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines == ["N_alpha,N_beta,probability", "0,0,1.0"]


def test_usage_errors(capsys):
    assert main(["hat", "--sites", "4"]) == 1
    assert main(["hat", "--format", "parquet"]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["hat", "--bogus"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 1


def test_ground_with_sidecar(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["ground", "--sites", "3", "--atoms", "60", "--uj", "0", "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header == ["uj", "N_alpha", "N_beta", "probability"]
    best = max(rows, key=lambda r: float(r[3]))
    assert (best[1], best[2]) == ("60", "0") and float(best[3]) == pytest.approx(1.0, abs=1e-8)
    meta = json.loads((tmp_path / "g.csv.meta.json").read_text())
    res = meta["results"][0]
    assert res["energy"] == pytest.approx(-120.0) and res["residual"] < 1e-8
    assert res["near_degenerate"] is False


def test_ground_fans_out(tmp_path, monkeypatch):
    monkeypatch.setenv("BECAT_THREADS", "2")
    out = tmp_path / "g.csv"
    assert main(["ground", "--atoms", "9", "--uj", "0", "5", "50", "--boundary", "open", "--out", str(out)]) == 0
    _, rows = read_csv(out)
    assert [float(u) for u in dict.fromkeys(r[0] for r in rows)] == [0.0, 5.0, 50.0]
    meta = json.loads((tmp_path / "g.csv.meta.json").read_text())
    assert [r["uj"] for r in meta["results"]] == [0.0, 5.0, 50.0]


def detect(tmp_path, name, *extra):
    path = tmp_path / name
    args = ["detect", "--atoms-per-site", "10", "--detections", "10", "--seed", "42", "--out", str(path), *extra]
    assert main(args) == 0
    return path


def test_detect_run_file(tmp_path):
    path = detect(tmp_path, "run.json")
    data, state = read_run(path)
    assert data["version"] == 1 and len(data["events"]) == 10
    assert state.total_atoms == 20 and data["basis"]["total_atoms"] == 20
    ev = data["events"][0]
    assert ev["theta"] == ev["u"] / ev["eta"]
    # exact round trip through the text format
    ref = run_sequence(fock_state((10, 10, 10)), 10, EtaDistribution.delta(1.0), 42)
    assert np.array_equal(state.amplitudes, ref.final_state.amplitudes)
    assert [e["u"] for e in data["events"]] == [e.u for e in ref.events]


def test_detect_is_deterministic(tmp_path):
    a = json.loads(detect(tmp_path, "a.json").read_text())
    b = json.loads(detect(tmp_path, "b.json").read_text())
    a.pop("created")
    b.pop("created")
    assert json.dumps(a) == json.dumps(b)


def test_detect_zero_and_too_many(tmp_path):
    path = tmp_path / "r0.json"
    assert main(["detect", "--atoms-per-site", "2", "--detections", "0", "--out", str(path)]) == 0
    data, state = read_run(path)
    assert data["events"] == [] and abs(state.amplitude((2, 2, 2))) == 1.0
    assert main(["detect", "--atoms-per-site", "1", "--detections", "4"]) == 1
    assert main(["detect", "--eta-dist", "weird:1"]) == 1


def test_phase_and_number_commands(tmp_path, capsys):
    run = detect(tmp_path, "run.json")
    capsys.readouterr()
    grid = tmp_path / "phase.csv"
    assert main(["phase", "--run", str(run), "--grid", "32", "--out", str(grid)]) == 0
    report = dict(line.split(" ", 1) for line in capsys.readouterr().out.strip().splitlines())
    assert float(report["swap_asymmetry"]) < 1e-8
    assert "phi1" in report and "phi2" in report
    header, rows = read_csv(grid)
    assert header == ["phi_ba", "phi_cb", "probability"] and len(rows) == 32 * 32

    nums = tmp_path / "number.csv"
    assert main(["number", "--run", str(run), "--out", str(nums)]) == 0
    report = dict(line.split(" ", 1) for line in capsys.readouterr().out.strip().splitlines())
    assert {"predicted_frequency", "dominant_frequency_b", "dominant_frequency_a", "contrast_b"} <= set(report)
    header, rows = read_csv(nums)
    assert header == ["N_a", "N_b", "probability"]
    assert len(rows) == 21 * 22 // 2
    assert sum(float(r[2]) for r in rows) == pytest.approx(1.0, abs=1e-12)


def test_fock_run_has_no_cat(tmp_path, capsys):
    path = tmp_path / "r0.json"
    main(["detect", "--atoms-per-site", "3", "--detections", "0", "--out", str(path)])
    assert main(["phase", "--run", str(path), "--out", str(tmp_path / "p.csv")]) == 2
    assert "no cat structure" in capsys.readouterr().err
    nums = tmp_path / "n.csv"
    assert main(["number", "--run", str(path), "--no-fringes", "--out", str(nums)]) == 0
    _, rows = read_csv(nums)
    assert [r for r in rows if float(r[2]) > 0] == [["3", "3", "1.0"]]


def test_bad_run_file(tmp_path):
    path = tmp_path / "x.json"
    path.write_text(json.dumps({"format": "becat-run", "version": 99}))
    assert main(["phase", "--run", str(path)]) == 1
    assert main(["phase", "--run", str(tmp_path / "missing.json")]) == 1


def test_coherent_command(tmp_path, capsys):
    out = tmp_path / "c.csv"
    assert main(["coherent", "--modes", "4", "--phases", "0", "1", "2.5", "0.3", "--out", str(out)]) == 0
    assert "invariant" in capsys.readouterr().out
    header, rows = read_csv(out)
    assert header == ["u", "density"] and len(rows) == 1024
    assert main(["coherent", "--modes", "4", "--phases", "0", "1", "2.5", "0.3", "--swap", "0", "1",
                 "--out", str(out)]) == 0
    assert "changed" in capsys.readouterr().out
    assert main(["coherent", "--modes", "3", "--phases", "0", "1"]) == 1


def test_help_lists_defaults():
    res = subprocess.run([sys.executable, "-m", "becat", "detect", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "default: 100" in res.stdout and "delta:1.0" in res.stdout
