import subprocess
import sys
from pathlib import Path

import pytest

from mimolab import cli, config, mnnet, vq


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_help_lists_commands():
    out = subprocess.run([sys.executable, "-m", "mimolab", "--help"], capture_output=True, text=True, check=True)
    for cmd in ("train", "ber", "sweep", "analyze", "reproduce"):
        assert cmd in out.stdout


def test_ber_mlsd(capsys):
    assert run("ber", "--detector", "MLSD", "--M", 2, "--N", 2, "--snr", "0:4:2", "--min-bit-errors", 20) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[1].startswith("snr_db,") and len(lines) == 5


def test_train_then_ber_from_bundle(tmp_path, capsys):
    bundle = tmp_path / "det.txt"
    assert run("train", "--M", 2, "--N", 2, "--scheme", "BPSK", "--hidden", "16", "--iterations", 20,
               "--batch-size", 50, "--out", bundle) == 0
    assert vq.load_detector(bundle).config.M == 2
    csv_path = tmp_path / "vq.csv"
    assert run("ber", "--detector", "VQ", "--M", 2, "--N", 2, "--scheme", "BPSK", "--bundle", bundle,
               "--snr", "2", "--min-bit-errors", 10, "--out", csv_path) == 0
    assert csv_path.read_text().startswith("snr_db,")


def test_train_mnnet(tmp_path):
    out = tmp_path / "graph"
    assert run("train", "--detector", "MNNET", "--M", 2, "--N", 2, "--scheme", "BPSK", "--hidden", "8",
               "--iterations", 5, "--batch-size", 20, "--out", out) == 0
    assert mnnet.load_graph(out).trained


def test_sweep_and_replay(tmp_path, capsys):
    ini = tmp_path / "exp.ini"
    ini.write_text("[zf]\ndetector = ZF\nM = 2\nN = 4\nsnr = 0 3\nmin_bit_errors = 30\nchunk_size = 1000\n"
                   "[mf]\ndetector = MF\nM = 2\nN = 4\nsnr = 0 3\nmin_bit_errors = 30\nchunk_size = 1000\n")
    out = tmp_path / "run"
    assert run("sweep", ini, "--out", out) == 0
    assert {p.name for p in out.iterdir()} == {"zf.csv", "mf.csv", "manifest.json"}
    capsys.readouterr()
    assert run("sweep", "--replay", out / "manifest.json") == 0
    assert capsys.readouterr().out.count("identical") == 2


def test_ber_from_config_needs_single_section(tmp_path):
    ini = tmp_path / "exp.ini"
    ini.write_text("[a]\ndetector = MLSD\nM = 2\nN = 2\n[b]\ndetector = MLSD\nM = 2\nN = 2\n")
    assert run("ber", "--config", ini) == 2


@pytest.mark.parametrize("report", ["compression", "complexity"])
def test_analyze(tmp_path, report):
    out = tmp_path / "r.csv"
    args = ["analyze", report, "--out", out]
    if report == "complexity":
        args += ["--kinds", "MF", "MLSD", "VQ", "--hidden", "8"]
    assert run(*args) == 0
    assert len(out.read_text().splitlines()) > 1


def test_errors_exit_with_status_two(tmp_path):
    assert run("ber", "--detector", "MLSD", "--snr", "4 2") == 2
    assert run("ber", "--detector", "VQ", "--bundle", tmp_path / "nope") == 2


def test_reproduce_quick(tmp_path):
    assert run("reproduce", "fig6", "--scale", "quick", "--out", tmp_path) == 0
    assert len(list(tmp_path.glob("*.csv"))) == 6


def test_example_config_parses():
    specs = config.read_specs(Path(__file__).parent.parent / "scripts" / "example.ini")
    assert [s.detector for s in specs] == ["MLSD", "LMMSE", "VQ", "MNNET"]
