import os
import subprocess
import sys

import pytest

from lpgcn.cli import main

from test_data import FIXTURE

SMALL = "synth_n = 40\nsynth_d = 10\nsynth_features = gaussian\nepochs = 2\np_grid = 1.5, 2\n"


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(SMALL + f"output_dir = {tmp_path / 'out'}\n")
    return str(path)


def test_train(cfg, capsys, tmp_path):
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "m.csv")]) == 0
    assert "epoch 2:" in capsys.readouterr().out
    assert (tmp_path / "m.csv").is_file()


def test_twin(cfg, capsys):
    assert main(["twin", "--config", cfg, "--seed", "3"]) == 0
    assert "perturbed node" in capsys.readouterr().out


def test_sweep_and_plotdata(cfg, tmp_path, capsys):
    assert main(["sweep", "--config", cfg, "--threads", "2"]) == 0
    metrics = tmp_path / "out" / "metrics.csv"
    assert metrics.is_file()
    assert main(["plotdata", str(metrics), "--kind", "sparsity"]) == 0
    assert (tmp_path / "out" / "plot_sparsity.csv").is_file()


def test_bounds(cfg, capsys):
    assert main(["bounds", "--config", cfg]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("p,filter,lambda_G_max") and len(lines) == 3


def test_spectral_dataset(capsys):
    assert main(["spectral", "--dataset", str(FIXTURE), "--filter", "unnormalized"]) == 0
    out = capsys.readouterr().out.splitlines()
    value = float(out[1].split(",")[1])
    assert value == pytest.approx(1 + 2 ** 0.5, abs=1e-6)


def test_synth(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path / "s"), "--n", "30", "--d", "5"]) == 0
    assert (tmp_path / "s" / "features.csv").is_file()


def test_input_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("p_grid = 2.5\n")
    assert main(["train", "--config", str(bad)]) == 1
    assert "p must lie in (1,2]" in capsys.readouterr().err


def test_missing_dataset_exit_code(tmp_path, capsys):
    assert main(["spectral", "--dataset", str(tmp_path / "none")]) == 1


def test_threads_env_fallback(cfg, tmp_path, monkeypatch):
    monkeypatch.setenv("LPGCN_THREADS", "2")
    assert main(["sweep", "--config", cfg, "--output-dir", str(tmp_path / "env")]) == 0


def test_module_entry_point(cfg):
    proc = subprocess.run([sys.executable, "-m", "lpgcn.cli", "bounds", "--config", cfg],
                          capture_output=True, text=True, env=os.environ.copy())
    assert proc.returncode == 0, proc.stderr
