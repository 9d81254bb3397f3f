"""CLI surface and the CSV trace contract."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from manifold_cd.bench import (
    CSV_HEADER,
    read_trace_csv,
    run_experiment,
    write_trace_csv,
)
from manifold_cd.cli import main
from manifold_cd.optimize import OptimizerConfig


def _run_cli(args):
    return main(args)


class TestCsvContract:
    def test_header_and_roundtrip(self, tmp_path):
        cfg = OptimizerConfig(algorithm="rcd", epochs=3, eta=0.1,
                              selection="cyclic", seed=1, grad_log_every=1,
                              feas_log_every=2)
        path = str(tmp_path / "t.csv")
        result = run_experiment("procrustes", 8, 3, 1, cfg, out_path=path)
        with open(path, encoding="utf-8") as fh:
            first = fh.readline().rstrip("\n")
        assert first == CSV_HEADER
        records = read_trace_csv(path)
        assert records == result.trace.records

    def test_lf_endings_and_empty_optionals(self, tmp_path):
        cfg = OptimizerConfig(algorithm="rcd", epochs=2, eta=0.1,
                              selection="cyclic", seed=1)
        path = str(tmp_path / "t.csv")
        run_experiment("procrustes", 6, 2, 1, cfg, out_path=path)
        raw = open(path, "rb").read()
        assert b"\r" not in raw
        line = raw.decode("utf-8").splitlines()[1]
        fields = line.split(",")
        assert len(fields) == 7
        assert fields[3] == "" and fields[4] == "" and fields[6] == ""

    def test_float_format_is_lossless(self, tmp_path):
        cfg = OptimizerConfig(algorithm="rcdlin", epochs=4, eta=0.17,
                              selection="random", seed=3)
        path = str(tmp_path / "t.csv")
        result = run_experiment("pca", 8, 2, 3, cfg, out_path=path)
        back = read_trace_csv(path)
        for a, b in zip(result.trace.records, back):
            assert a.f == b.f  # exact, not approximate

    def test_byte_identical_reruns(self, tmp_path):
        blobs = []
        for tag in ("a", "b"):
            path = str(tmp_path / f"{tag}.csv")
            code = _run_cli([
                "run", "--problem", "procrustes", "--algo", "rcd",
                "--select", "cyclic", "--n", "10", "--p", "4",
                "--eta", "0.125", "--epochs", "5", "--seed", "7",
                "--out", path,
            ])
            assert code == 0
            blobs.append(open(path, "rb").read())
        assert blobs[0] == blobs[1]


class TestCliCommands:
    def test_flops_table(self, capsys):
        assert _run_cli(["flops"]) == 0
        out = capsys.readouterr().out
        assert "flop model" in out
        assert "factored SPSD" in out

    def test_preset_listing_and_dump(self, capsys, tmp_path):
        assert _run_cli(["preset"]) == 0
        names = capsys.readouterr().out.split()
        assert "procrustes-desk" in names
        out_path = str(tmp_path / "cfg.json")
        assert _run_cli(["preset", "procrustes-desk", "--out", out_path]) == 0
        cfg = json.loads(open(out_path).read())
        assert cfg["problem"] == "procrustes" and cfg["eta"] > 0

    def test_unknown_preset_fails(self):
        assert _run_cli(["preset", "nope"]) == 1

    def test_run_reports_gap(self, capsys, tmp_path):
        path = str(tmp_path / "t.csv")
        code = _run_cli([
            "run", "--problem", "procrustes", "--algo", "rcd",
            "--select", "cyclic", "--n", "12", "--p", "5", "--eta", "0.125",
            "--epochs", "60", "--seed", "7", "--out", path,
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "gap=" in out and "closed_form" in out

    def test_config_file_with_override(self, capsys, tmp_path):
        cfg_path = str(tmp_path / "cfg.json")
        with open(cfg_path, "w") as fh:
            json.dump({"problem": "procrustes", "n": 10, "p": 4, "seed": 3,
                       "algo": "rcd", "select": "cyclic", "eta": 0.125,
                       "epochs": 5}, fh)
        out_path = str(tmp_path / "t.csv")
        code = _run_cli(["run", "--config", cfg_path, "--epochs", "7",
                         "--out", out_path])
        assert code == 0
        records = read_trace_csv(out_path)
        assert records[-1].k == 6  # override wins over the file value

    def test_config_unknown_keys_rejected(self, tmp_path, capsys):
        cfg_path = str(tmp_path / "cfg.json")
        with open(cfg_path, "w") as fh:
            json.dump({"problem": "procrustes", "bogus": 1}, fh)
        assert _run_cli(["run", "--config", cfg_path]) == 1
        assert "bogus" in capsys.readouterr().err

    def test_grid_emits_best_config(self, capsys, tmp_path):
        out_path = str(tmp_path / "best.json")
        code = _run_cli([
            "grid", "--problem", "procrustes", "--algo", "rcd",
            "--select", "cyclic", "--n", "8", "--p", "3", "--epochs", "20",
            "--seed", "2", "--trace", "epoch", "--out", out_path,
        ])
        assert code == 0
        best = json.loads(open(out_path).read())
        assert best["grid"] == "2^-10..2^3"
        assert best["eta"] in [2.0**k for k in range(-10, 4)]

    def test_usage_error_exit_2(self):
        proc = subprocess.run(
            [sys.executable, "-m", "manifold_cd.cli", "run", "--bogus-flag"],
            capture_output=True,
        )
        assert proc.returncode == 2

    def test_wall_flag_populates_wall_ns(self, tmp_path):
        path = str(tmp_path / "t.csv")
        code = _run_cli([
            "run", "--problem", "procrustes", "--algo", "rcd",
            "--select", "cyclic", "--n", "8", "--p", "3", "--eta", "0.125",
            "--epochs", "2", "--seed", "1", "--out", path, "--wall",
        ])
        assert code == 0
        records = read_trace_csv(path)
        assert all(r.wall_ns is not None for r in records)
        assert all(b.wall_ns >= a.wall_ns for a, b in zip(records, records[1:]))

    def test_lorentz_run(self, tmp_path, capsys):
        path = str(tmp_path / "t.csv")
        code = _run_cli([
            "run", "--problem", "lorentz", "--algo", "rcdlin",
            "--select", "time-cyclic", "--n", "3", "--p", "12",
            "--eta", "0.05", "--eta-decay", "0.1", "--epochs", "5",
            "--seed", "29", "--out", path,
        ])
        assert code == 0
        records = read_trace_csv(path)
        assert len(records) == 5


def test_grid_parallelism_is_deterministic(monkeypatch):
    from manifold_cd.bench import grid_search

    cfg = OptimizerConfig(algorithm="rcd", epochs=15, eta=0.1,
                          selection="cyclic", seed=2, trace="epoch")
    best_serial, scored_serial = grid_search("procrustes", 8, 3, 2, cfg)
    monkeypatch.setenv("MANIFOLD_CD_THREADS", "3")
    best_par, scored_par = grid_search("procrustes", 8, 3, 2, cfg)
    assert best_serial == best_par
    assert scored_serial == scored_par


def test_planted_run_reports_absolute_gap(capsys, tmp_path):
    path = str(tmp_path / "t.csv")
    code = _run_cli([
        "run", "--problem", "nearest-symplectic", "--planted",
        "--algo", "rcd", "--select", "cyclic", "--n", "4", "--p", "3",
        "--eta", "0.02", "--epochs", "50", "--seed", "9", "--out", path,
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "abs_gap=" in out  # planted reference is exactly zero, flagged
