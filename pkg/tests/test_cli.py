import hashlib
import json
import pathlib
import subprocess
import sys

import numpy as np
import pytest

from qutritsim.cli import main
from qutritsim.device_model import reference_device, shift_vs_qubit_frequency

EXAMPLE = str(pathlib.Path(__file__).resolve().parent.parent
              / "configs" / "example.yaml")


def sha(path):
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


def read_fits(path):
    rows = open(path).read().strip().split("\n")[1:]
    return {name: float(value) for name, value in
            (row.split(",") for row in rows)}


def test_spectrum_golden(tmp_path, capsys):
    out = str(tmp_path)
    assert main(["spectrum", "--config", EXAMPLE, "--out", out]) == 0
    csv = tmp_path / "spectrum" / "spectrum.csv"
    lines = csv.read_text().strip().split("\n")
    assert lines[0] == "omega01_MHz,s0_MHz,s1_MHz,s2_MHz"
    got = np.array([[float(c) for c in line.split(",")]
                    for line in lines[1:]])
    expected = shift_vs_qubit_frequency(
        reference_device(), np.linspace(4500.0, 6300.0, 91))
    assert got.shape == expected.shape
    assert np.abs(got - expected).max() == 0.0   # 17 digits round-trip
    manifest = json.loads((tmp_path / "spectrum" / "manifest.json")
                          .read_text())
    assert manifest["command"] == "spectrum"
    assert manifest["config"]["device"]["g0"] == 115.0
    assert manifest["seed"] == 0
    assert "timestamp" not in json.dumps(manifest).lower()


def test_missing_config_exits_2_without_outputs(tmp_path, capsys):
    out = tmp_path / "runs"
    rc = main(["spectrum", "--config", "/no/such.yaml", "--out", str(out)])
    assert rc == 2
    assert not out.exists()
    err = capsys.readouterr().err
    assert err.startswith("error: config:") and err.count("\n") == 1


def test_bad_config_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("device:\n  qubits: 5\n")
    rc = main(["spectrum", "--config", str(cfg), "--out", str(tmp_path)])
    assert rc == 2
    err = capsys.readouterr().err
    assert "bad.yaml:2" in err and "qubits" in err


def test_runtime_error_exits_1(tmp_path, capsys):
    rc = main(["ramsey12", "--out", str(tmp_path), "--detuning", "0"])
    assert rc == 1
    err = capsys.readouterr().err
    assert err.startswith("error: run:") and "detuning" in err


def test_readout_outputs(tmp_path, capsys):
    out = str(tmp_path)
    assert main(["readout", "--out", out]) == 0
    fits = read_fits(tmp_path / "readout" / "fits.csv")
    assert fits["s0_MHz"] == pytest.approx(10.0265, abs=1e-3)
    assert fits["t1_2_ns"] == pytest.approx(700.0, rel=1e-6)
    header = (tmp_path / "readout" / "traces.csv").read_text(
        ).split("\n")[0]
    assert header == "time_ns,i_0,q_0,i_1,q_1,i_2,q_2"
    assert "s = (10.0265" in capsys.readouterr().out


def test_tomo_reproducible_and_seed_sensitive(tmp_path, capsys):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("tomo:\n  target: psi_a\n  bootstrap_resamples: 0\n")
    out = str(tmp_path)
    args = ["tomo", "--config", str(cfg), "--out", out]
    assert main(args) == 0
    stdout = capsys.readouterr().out
    assert "F=0." in stdout and "preparation F=" in stdout
    tdir = tmp_path / "tomo"
    files = sorted(p.name for p in tdir.iterdir())
    assert files == ["density_matrix.csv", "density_matrix_linear.csv",
                     "fits.csv", "manifest.json", "populations.csv",
                     "record.csv"]
    before = {f: sha(tdir / f) for f in files}
    assert main(args) == 0
    assert {f: sha(tdir / f) for f in files} == before
    assert main(args + ["--seed", "9"]) == 0
    assert sha(tdir / "record.csv") != before["record.csv"]
    manifest = json.loads((tdir / "manifest.json").read_text())
    assert manifest["seed"] == 9
    assert manifest["target"] == "psi_a"


def test_batch_with_named_targets(tmp_path, capsys):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("batch:\n  targets: ['0', '2']\n")
    assert main(["batch", "--config", str(cfg),
                 "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "batch" / "batch.csv").read_text().strip()
    lines = rows.split("\n")
    assert lines[0] == "index,state,fidelity,preparation_fidelity,mle_cost"
    assert len(lines) == 3
    assert lines[1].split(",")[1] == "|0>"
    assert "batch: mean F=" in capsys.readouterr().out


def test_rabi_cli_override(tmp_path, capsys):
    assert main(["rabi", "--out", str(tmp_path),
                 "--transition", "12"]) == 0
    assert "rabi 12: pi amplitude" in capsys.readouterr().out
    fits = read_fits(tmp_path / "rabi" / "fits.csv")
    assert fits["contrast"] > 0.8


def test_selftest_passes(tmp_path, capsys):
    assert main(["selftest", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 5 and "FAIL" not in out


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.startswith("qutritsim ")


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "qutritsim.cli", "spectrum",
         "--out", str(tmp_path)],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "spectrum" / "spectrum.csv").exists()
