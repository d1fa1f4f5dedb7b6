import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from rbdeconv.experiments import imaging
from rbdeconv.experiments.cli import main

SMALL = ["--K", "6", "--N", "5", "--trials", "2", "--iters", "300"]


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def usage_code(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    return exc.value.code


def test_bench_to_stdout(capsys):
    code, out, _ = run(["bench", *SMALL, "--L", "60", "--algo", "robb,ama"], capsys)
    rows = list(csv.DictReader(out.splitlines()))
    assert code == 0
    assert [r["algorithm"] for r in rows] == ["ROBB", "AMA"]


def test_bench_writes_csv_and_sidecar(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    code, stdout, _ = run(["bench", *SMALL, "--L", "60", "--seed", "4", "--out", str(out)], capsys)
    assert code == 0 and stdout == ""
    meta = json.loads((tmp_path / "bench.csv.json").read_text())
    assert meta["spec"]["seed"] == 4 and meta["spec"]["L"] == [60]
    assert meta["command"] == "bench" and "backend" in meta
    first = out.read_bytes()
    run(["bench", *SMALL, "--L", "60", "--seed", "4", "--out", str(out)], capsys)
    assert out.read_bytes() == first


def test_phase_and_noise(capsys):
    code, out, _ = run(["phase", *SMALL, "--ratio-grid", "1.0,3.0", "--algo", "ROBB"], capsys)
    assert code == 0 and len(out.splitlines()) == 3
    code, out, _ = run(["noise", *SMALL, "--L", "60", "--snr-grid", "20,40"], capsys)
    assert code == 0 and out.splitlines()[0] == "L,snr_db,rmse_db,trials"


def test_check_exit_code(tmp_path, capsys):
    code, out, err = run(["check"], capsys)
    assert code == 0 and json.loads(out)["passed"]
    assert err.count("PASS") >= 15
    report = tmp_path / "r.json"
    assert main(["check", "--out", str(report)]) == 0
    assert json.loads(report.read_text())["passed"]


def test_check_failure_exit_code(monkeypatch, capsys):
    from rbdeconv.experiments import cli

    monkeypatch.setattr(cli, "run_check", lambda **kw: {"passed": False, "checks": [{"name": "x", "passed": False, "detail": "d"}]})
    code, _, err = run(["check"], capsys)
    assert code == 1 and "FAIL x" in err


def test_deblur_small_image(tmp_path, capsys):
    img = imaging.test_image(256)[::8, ::8]
    src = tmp_path / "in.pgm"
    imaging.write_pgm(src, img)
    out = tmp_path / "deblur.csv"
    code, _, _ = run(
        ["deblur", "--image", str(src), "--kernel", "motion", "--kernel-len", "5", "--N", "400", "--iters", "40", "--out", str(out)],
        capsys,
    )
    assert code == 0
    rows = list(csv.DictReader(out.read_text().splitlines()))
    assert [int(r["iteration"]) for r in rows] == [20, 40]
    assert imaging.read_pgm(str(out) + ".pgm").shape == (32, 32)
    meta = json.loads((tmp_path / "deblur.csv.json").read_text())
    assert meta["image_shape"] == [32, 32] and 0 < meta["energy_fraction"] <= 1


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["bench", "--K", "abc"],
        ["bench", "--algo", "SGD"],
        ["bench", "--trials", "0"],
        ["bench", "--L", "10", "--K", "20"],
        ["phase", "--ratio-grid", "2,1"],
        ["noise", "--snr-grid", "ten"],
        ["deblur", "--kernel", "box"],
        ["deblur", "--kernel-len", "0"],
        ["deblur", "--image", "/nonexistent/x.pgm"],
    ],
)
def test_invalid_arguments_exit_2(argv, capsys):
    assert usage_code(argv) == 2


def test_bad_thread_env_exit_2(monkeypatch, capsys):
    monkeypatch.setenv("RBDECONV_THREADS", "-3")
    assert usage_code(["check"]) == 2


def test_console_entry_point():
    env = dict(os.environ, RBDECONV_THREADS="1")
    proc = subprocess.run([sys.executable, "-m", "rbdeconv.experiments.cli", "--version"], capture_output=True, text=True, env=env)
    assert proc.returncode == 0 and proc.stdout.startswith("rbdeconv ")
    proc = subprocess.run([sys.executable, "-m", "rbdeconv.experiments.cli", "bench", "--K", "x"], capture_output=True, text=True, env=env)
    assert proc.returncode == 2
