import json
import subprocess
import sys
from pathlib import Path

import pytest

from fogbench.cli import main
from fogbench.report import read_csv

HERE = Path(__file__).resolve().parent
CONFIGS = HERE.parent / "configs"
GOLDEN = HERE / "golden"
DEFAULT = str(CONFIGS / "default.json")


def cli(*args, env=None):
    import os
    e = {**os.environ, "COLUMNS": "100", **(env or {})}
    return subprocess.run([sys.executable, "-m", "fogbench", *args], capture_output=True, text=True, env=e)


@pytest.mark.parametrize("cmd", ["", "run", "validate", "probe", "list-workloads"])
def test_help_golden(cmd):
    r = cli(*([cmd] if cmd else []), "--help")
    assert r.returncode == 0
    golden = GOLDEN / f"help{'-' + cmd if cmd else ''}.txt"
    assert r.stdout == golden.read_text()


def test_usage_errors_exit_2():
    assert cli().returncode == 2
    assert cli("run", DEFAULT, "--repetitions", "0").returncode == 2
    assert cli("run", DEFAULT, "--modes", "sideways").returncode == 2
    assert cli("frobnicate").returncode == 2


def test_validate(tmp_path, capsys):
    assert main(["validate", DEFAULT]) == 0
    assert "6 workloads" in capsys.readouterr().out
    bad = json.loads(Path(DEFAULT).read_text())
    bad["workloads"][4].pop("modes")
    bad["nodes"] = [n for n in bad["nodes"] if n["tier"] == "cloud"]
    (tmp_path / "bad.json").write_text(json.dumps(bad))
    assert main(["validate", str(tmp_path / "bad.json")]) == 1
    err = capsys.readouterr().err
    assert "CloudEdge requires ≥1 edge node" in err and "foglamp" in err


def test_run_repetitions_one(tmp_path, capsys):
    cfg = json.loads(Path(DEFAULT).read_text())
    cfg["workloads"] = [{"profile": "RealfdLike"}]
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert main(["run", str(tmp_path / "c.json"), "--repetitions", "1", "--modes", "cloud-only", "edge-only",
                 "cloud-edge", "--out", str(tmp_path / "o")]) == 0
    out = capsys.readouterr().out
    assert "4 records, 0 failed" in out
    (csv,) = [p for p in (tmp_path / "o").glob("*.csv") if not p.name.endswith("_agg.csv")]
    assert len(read_csv(csv)) == 4


def test_run_single_mode(tmp_path, capsys):
    cfg = json.loads(Path(DEFAULT).read_text())
    cfg["workloads"] = [{"profile": "PokemonLike", "asset_count": 3}]
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert main(["run", str(tmp_path / "c.json"), "--repetitions", "1", "--modes", "edge-only",
                 "--out", str(tmp_path / "o")]) == 0
    assert "3 records" in capsys.readouterr().out


def test_env_output_dir(tmp_path, monkeypatch, capsys):
    cfg = json.loads(Path(DEFAULT).read_text())
    cfg["workloads"] = [{"profile": "PokemonLike"}]
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    monkeypatch.setenv("FOGBENCH_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["run", str(tmp_path / "c.json"), "--repetitions", "1"]) == 0
    assert list((tmp_path / "env").glob("*.txt"))


def test_seed_random_is_accepted(tmp_path, capsys):
    cfg = json.loads(Path(DEFAULT).read_text())
    cfg["workloads"] = [{"profile": "PokemonLike"}]
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert main(["run", str(tmp_path / "c.json"), "--seed", "random", "--repetitions", "1",
                 "--out", str(tmp_path)]) == 0
    assert capsys.readouterr().out.count("seed ") >= 1


def test_list_workloads(tmp_path, capsys):
    desc = {"name": "echo", "services": [{"name": "e", "command": ["true"]}], "payloads": [{"payload_bytes": 1}]}
    (tmp_path / "p.json").write_text(json.dumps(desc))
    assert main(["list-workloads", "--plugin", str(tmp_path / "p.json")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "YoloLike\tbuiltin" and lines[-1] == "echo\tplugin" and len(lines) == 7
    (tmp_path / "bad.json").write_text("{}")
    assert main(["list-workloads", "--plugin", str(tmp_path / "bad.json")]) == 1


def test_probe(capsys):
    assert main(["probe", DEFAULT, "--node", "edge-1"]) == 0
    out = dict(line.split("\t") for line in capsys.readouterr().out.splitlines())
    assert out["core_count"] == "4" and out["cpu_model"] == "virtual edge SoC"
    assert main(["probe", DEFAULT, "--node", "nope"]) == 1


def test_run_failure_exit_1(tmp_path, capsys):
    cfg = {"nodes": [{"id": "edge-1", "tier": "edge", "external": {"adapter": "stub", "address": "pi",
                                                                     "options": {"refuse": True}}}],
           "workloads": [{"profile": "PokemonLike"}], "modes": ["edge-only"], "repetitions": 2}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert main(["run", str(tmp_path / "c.json"), "--out", str(tmp_path / "o")]) == 1
    cap = capsys.readouterr()
    assert "2 failed" in cap.out and "edge-1" in cap.err
    assert list((tmp_path / "o").glob("*.csv"))
