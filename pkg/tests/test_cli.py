"""Unit tests for the command line front end."""
import json

import pytest

from driftreplay.cli import build_parser, main, parse_config, read_kv_file
from driftreplay.streams import load_features


def parse_run(argv):
    args = build_parser().parse_args(["run", *argv])
    return parse_config(args)


FAST = ["--n-subconcepts", "2", "--dim", "4", "--train-per", "60",
        "--test-per", "20", "--hidden-sizes", "8", "--epochs-per-batch", "2",
        "--methods", "rsb", "--seeds", "7"]


# ----------------------------------------------------------------- parsing

def test_defaults_match_published_settings():
    config = parse_run([])
    assert config.c_max == 10
    assert config.rsb_config().c_min == 5
    assert config.b_max == 100
    assert config.omega_max == 100
    assert config.n_s == 1000
    assert config.tau_s == 0.5
    assert config.alpha_r == 0.4
    assert config.beta == 4.0
    assert config.schedule == "stationary"
    assert config.methods == ("rsb", "sb", "cb0", "cb1", "nn", "offline")


def test_flag_overrides_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# experiment settings\ntau_s=0.5\nbeta=2.0\n")
    config = parse_run(["--config", str(cfg), "--tau-s", "0.2"])
    assert config.tau_s == 0.2   # flag wins
    assert config.beta == 2.0    # file value survives


def test_invalid_centroid_bounds_rejected():
    with pytest.raises(SystemExit) as exc:
        main(["run", "--c-min", "20", "--c-max", "10"])
    assert exc.value.code == 2


def test_unknown_config_key_rejected(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("tau_sigma=0.5\n")
    with pytest.raises(SystemExit) as exc:
        main(["run", "--config", str(cfg)])
    assert exc.value.code == 2


def test_malformed_config_line_rejected(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("tau_s 0.5\n")
    with pytest.raises(SystemExit) as exc:
        main(["validate", "--config", str(cfg)])
    assert exc.value.code == 2


def test_kv_file_parsing(tmp_path):
    cfg = tmp_path / "a.cfg"
    cfg.write_text("# comment\n\nalpha_r = 0.3\nmethods=rsb,nn\n")
    assert read_kv_file(cfg) == {"alpha_r": "0.3", "methods": "rsb,nn"}


def test_env_var_sets_default_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("DRIFTREPLAY_OUT", str(tmp_path / "envout"))
    config = parse_run([])
    assert config.out_dir == str(tmp_path / "envout")
    config = parse_run(["--out", str(tmp_path / "flagout")])
    assert config.out_dir == str(tmp_path / "flagout")


def test_validate_subcommand(capsys):
    assert main(["validate", "--methods", "rsb,nn", "--seeds", "1,2"]) == 0
    assert "2 methods" in capsys.readouterr().out


# ----------------------------------------------------------------- gen-data

def test_gen_data_writes_loadable_features(tmp_path):
    spec = tmp_path / "data.cfg"
    spec.write_text("n_subconcepts=2\ndim=3\ntrain_per=15\ntest_per=5\nseed=4\n")
    out = tmp_path / "features.txt"
    assert main(["gen-data", "--spec", str(spec), "--out", str(out)]) == 0
    data = load_features(out)
    assert data.dim == 3
    assert len(data.train(0)) == 15
    assert len(data.test(1)) == 5


def test_gen_data_rejects_unknown_key(tmp_path):
    spec = tmp_path / "data.cfg"
    spec.write_text("bogus=1\n")
    with pytest.raises(SystemExit) as exc:
        main(["gen-data", "--spec", str(spec), "--out", str(tmp_path / "x")])
    assert exc.value.code == 2


# ---------------------------------------------------------------- run (e2e)

def run_small(out_dir):
    return main(["run", *FAST, "--out", str(out_dir)])


def test_small_run_emits_expected_rows(tmp_path):
    out = tmp_path / "out"
    assert run_small(out) == 0
    lines = (out / "accuracy_seed7.csv").read_text().splitlines()
    header, rows = lines[0], lines[1:]
    assert header == "batch,method,accuracy,subconcept,subconcept_accuracy"
    overall = [r for r in rows if r.split(",")[3] == ""]
    assert len(overall) == 2  # one overall row per stationary batch
    summary = json.loads((out / "summary.json").read_text())
    assert "rsb" in summary["omega_all"]
    assert summary["seeds"] == [7]


def test_repeated_runs_are_byte_identical(tmp_path):
    out1, out2 = tmp_path / "one", tmp_path / "two"
    assert run_small(out1) == 0
    assert run_small(out2) == 0
    assert ((out1 / "accuracy_seed7.csv").read_bytes()
            == (out2 / "accuracy_seed7.csv").read_bytes())
    assert ((out1 / "summary.json").read_bytes()
            == (out2 / "summary.json").read_bytes())
