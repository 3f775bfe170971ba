import json
from pathlib import Path

import pytest

from fogbench.config import config_hash, config_snapshot, load_run_config, parse_level, parse_mode, run_config_from_dict
from fogbench.errors import ConfigError
from fogbench.model import DeploymentMode as M, validate_run_config
from fogbench.stress import StressLevel as S

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
NODE = {"id": "e", "tier": "edge", "virtual": {"compute_speed": 1e7, "uplink_bandwidth": 1e6,
                                               "downlink_bandwidth": 1e6}}
CLOUD = {"id": "c", "tier": "cloud", "virtual": {"compute_speed": 1e8, "uplink_bandwidth": 1e6,
                                                 "downlink_bandwidth": 1e6}}


def test_mode_and_level_aliases():
    assert parse_mode("CloudEdge") is M.CLOUD_EDGE and parse_mode("fog") is M.CLOUD_EDGE
    assert parse_mode("edge_only") is M.EDGE_ONLY
    assert parse_level("VeryHigh") is S.VERY_HIGH
    with pytest.raises(ValueError):
        parse_mode("moon")


def test_shipped_configs_validate():
    for f in CONFIGS.glob("*.json"):
        validate_run_config(load_run_config(f))


def test_unknown_keys_all_reported():
    d = {"nodes": [{**NODE, "colour": "red"}], "workloads": [{"profile": "YoloLike"}], "modes": ["edge-only"],
         "repetitons": 3}
    with pytest.raises(ConfigError) as ei:
        run_config_from_dict(d)
    v = ei.value.violations
    assert any("repetitons" in x for x in v) and any("colour" in x for x in v)


def test_explicit_placement_and_overrides():
    d = {"nodes": [NODE, CLOUD], "workloads": [{"profile": "RealfdLike", "asset_count": 2}],
         "modes": ["cloud-edge"], "placements": [{"workload": "realfd",
                                                  "services": {"FD": "c", "GSC": "e", "MD": "e"}}]}
    cfg = validate_run_config(run_config_from_dict(d))
    (wname, p), = cfg.placements
    assert p.label() == "GSC@e;MD@e;FD@c"
    assert len(cfg.workload("realfd").assets) == 2


def test_file_asset_relative_to_config(tmp_path):
    (tmp_path / "a.bin").write_bytes(b"\x01" * 77)
    d = {"nodes": [NODE], "workloads": [{"profile": "PokemonLike", "assets": [{"id": "a", "file": "a.bin"}]}],
         "modes": ["edge-only"]}
    (tmp_path / "cfg.json").write_text(json.dumps(d))
    cfg = validate_run_config(load_run_config(tmp_path / "cfg.json"))
    assert cfg.workload("pokemon").assets[0].payload_bytes == 77


def test_plugin_workload_in_config(tmp_path):
    desc = {"name": "echo", "services": [{"name": "e", "command": ["cp", "{input}", "{output}"]}],
            "payloads": [{"id": "p", "payload_bytes": 10}]}
    (tmp_path / "echo.json").write_text(json.dumps(desc))
    d = {"nodes": [NODE], "workloads": [{"plugin": "echo.json"}], "modes": ["edge-only"]}
    cfg = validate_run_config(run_config_from_dict(d, tmp_path))
    assert cfg.workload("echo").services[0].command == ("cp", "{input}", "{output}")


def test_bad_json_and_missing_file(tmp_path):
    (tmp_path / "x.json").write_text("{nope")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_run_config(tmp_path / "x.json")
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "missing.json")


def test_snapshot_hash_stable_and_ignores_output_dir():
    from dataclasses import replace
    cfg = load_run_config(CONFIGS / "default.json")
    snap = config_snapshot(cfg)
    json.dumps(snap)
    assert "output_dir" not in snap
    assert config_hash(cfg) == config_hash(replace(cfg, output_dir="elsewhere"))
    assert config_hash(cfg) != config_hash(replace(cfg, repetitions=3))
