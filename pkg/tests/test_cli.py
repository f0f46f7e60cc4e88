import json
import subprocess
import sys

import pytest

from anonymixer.cli import COMMANDS, build_parser, main

QUICK_CONF = """
[data]
toy = yes
toy_n = 160
toy_m = 3

[pipeline]
k_max = 5
threshold = 0.15

[ctgan]
noise_dim = 8
generator_hidden = 16
discriminator_hidden = 16
batch_size = 32
epochs = 2
"""


@pytest.fixture
def conf(tmp_path):
    p = tmp_path / "quick.conf"
    p.write_text(QUICK_CONF)
    return p


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("command", sorted(COMMANDS))
def test_help_documents_every_flag(command, capsys):
    with pytest.raises(SystemExit) as info:
        main([command, "--help"])
    assert info.value.code == 0
    text = capsys.readouterr().out
    for flag in ("--config", "--seed", "--out", "--algorithm", "--k-min", "--k-max", "--eps-grid",
                 "--minpts-grid", "--states", "--epochs", "--batch", "--metric-space", "--threshold"):
        assert flag in text, flag


def test_top_level_help_lists_subcommands():
    text = build_parser().format_help()
    for command in COMMANDS:
        assert command in text


def test_missing_config_exit_1(tmp_path, capsys):
    missing = tmp_path / "nowhere.conf"
    code, _, err = _run(capsys, "cluster", "--config", str(missing))
    assert code == 1 and str(missing) in err


@pytest.mark.parametrize("argv", [["cluster", "--bogus"], ["explode"], [], ["cluster", "--metric-space", "tsne"]])
def test_usage_errors_exit_1(argv, capsys):
    code, _, err = _run(capsys, *argv)
    assert code == 1 and "usage" in err


def test_bad_config_value_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.conf"
    p.write_text("[data]\ntoy = yes\n[pipeline]\nalgorithms = spectral\n")
    code, _, err = _run(capsys, "cluster", "--config", str(p))
    assert code == 2 and "[config]" in err


def test_cluster_prints_selection_and_sweep(tmp_path, capsys):
    out = tmp_path / "out"
    code, text, _ = _run(capsys, "cluster", "--algorithm", "kmeans", "--k-min", "2", "--k-max", "10", "--out", str(out))
    assert code == 0
    assert "selected k: 2" in text
    sweep = [ln.split() for ln in text.splitlines() if ln.strip() and ln.split()[0].isdigit()]
    assert [int(r[0]) for r in sweep] == list(range(2, 11))
    assert (out / "labels_kmeans.csv").exists() and (out / "silhouette_sweep.svg").exists()


def test_stage_commands_chain(tmp_path, conf, capsys):
    out = str(tmp_path / "o")
    base = ["--config", str(conf), "--out", out, "--algorithm", "kmeans"]
    assert _run(capsys, "ingest", *base)[0] == 0
    code, text, _ = _run(capsys, "train", *base)
    assert code == 0 and "checkpoint sha256" in text
    code, text, _ = _run(capsys, "synthesize", *base, "--rows", "50")
    assert code == 0 and "sampled 50 rows" in text
    code, text, _ = _run(capsys, "evaluate", *base)
    assert code == 0 and "rel. dev." in text
    assert json.loads((tmp_path / "o" / "evaluation_kmeans.json").read_text())["algorithms"]["kmeans"]


def test_single_algorithm_commands_need_one(tmp_path, conf, capsys):
    code, _, err = _run(capsys, "train", "--config", str(conf), "--out", str(tmp_path), "--algorithm", "kmeans,ghmm")
    assert code == 2 and "exactly one" in err


def test_synthesize_without_checkpoint(tmp_path, conf, capsys):
    code, _, err = _run(capsys, "synthesize", "--config", str(conf), "--out", str(tmp_path), "--algorithm", "kmeans")
    assert code == 2 and "run 'train' first" in err


def test_run_all_hash_matches_report(tmp_path, conf, capsys):
    out = tmp_path / "run"
    code, text, _ = _run(capsys, "run-all", "--config", str(conf), "--seed", "42", "--out", str(out))
    assert code == 0
    printed = next(ln.split(": ")[1] for ln in text.splitlines() if ln.startswith("config hash:"))
    doc = json.loads((out / "report.json").read_text())
    assert doc["payload"]["provenance"]["config_hash"] == printed
    assert doc["payload"]["provenance"]["root_seed"] == 42
    code, text, _ = _run(capsys, "report", "--out", str(out))
    assert code == 0 and f"config hash: {printed}" in text


def test_report_detects_tampering(tmp_path, conf, capsys):
    out = tmp_path / "run"
    assert _run(capsys, "run-all", "--config", str(conf), "--out", str(out), "--algorithm", "kmeans")[0] == 0
    doc = json.loads((out / "report.json").read_text())
    doc["payload"]["threshold"] = 0.99
    (out / "report.json").write_text(json.dumps(doc))
    code, _, err = _run(capsys, "report", "--out", str(out))
    assert code == 2 and "modified" in err


def test_gen_toy_config_round_trip(tmp_path, capsys):
    out = tmp_path / "toy"
    code, _, _ = _run(capsys, "gen-toy", "--out", str(out), "--rows", "120", "--dims", "3", "--epochs", "2", "--batch", "32")
    assert code == 0
    header = (out / "toy.csv").read_text().splitlines()[0].split(",")
    assert header[:2] == ["timestamp", "device_mac"]
    code, text, _ = _run(capsys, "ingest", "--config", str(out / "toy.conf"), "--out", str(out / "ing"))
    assert code == 0 and "dropped quasi-identifiers: timestamp, device_mac" in text


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "anonymixer", "report", "--out", str(tmp_path)],
                          capture_output=True, text=True, env={"ANONYMIXER_LOG": "quiet", "PATH": ""})
    assert proc.returncode == 2 and "[report]" in proc.stderr
