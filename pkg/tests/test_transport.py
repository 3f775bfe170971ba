import json
import subprocess

import pytest

from fogbench.cli import main
from fogbench.model import NodeSpec, ProbeSettings, Profile, ServicePlacement, Tier, TransportParams
from fogbench.nodes import OBSERVER, Direction, ExternalNode, probe_platform, transfer
from fogbench.transport import LocalTransport, SshTransport, StubTransport, load_transport, register_transport
from fogbench.workloads import make_profile, run_pipeline


def local_node(tmp_path, **options):
    spec = NodeSpec("local", Tier.EDGE, TransportParams("local", "localhost", str(tmp_path / "wd"), options))
    return ExternalNode(spec)


def test_load_transport_by_name_and_path():
    assert isinstance(load_transport("local"), LocalTransport)
    assert isinstance(load_transport("fogbench.transport:StubTransport", {"refuse": True}), StubTransport)
    with pytest.raises(ValueError):
        load_transport("pigeon")
    register_transport("mine", StubTransport)
    assert isinstance(load_transport("mine"), StubTransport)


def test_local_node_runs_pipeline_with_commands(tmp_path):
    w = make_profile(Profile.CUSTOM, {"name": "copy", "services": [
        {"name": "cp", "command": ["cp", "{input}", "{output}"], "output_ratio": 1.0}],
        "assets": [{"id": "in.bin", "payload_bytes": 4096, "seed": 1}]})
    n = local_node(tmp_path)
    h = n.provision(w)
    asset = w.assets[0]
    transfer(OBSERVER, n, asset.payload_bytes, Direction.UP, payload=asset.materialize(),
             remote_path=n.path("copy", asset.id))
    r = run_pipeline(w, ServicePlacement.of({"cp": "local"}), asset, {"local": n}, {"local": h})
    assert (tmp_path / "wd" / "copy" / "cp.out").read_bytes() == asset.materialize()
    assert r.exec_results[0].wall_time > 0


def test_local_burn_scales_with_work(tmp_path):
    n = local_node(tmp_path, burn_iterations_per_work_unit=1.0)
    h = n.provision(make_profile(Profile.POKEMON_LIKE))
    small = min(n.exec_task(h, 1_000).wall_time for _ in range(3))
    big = min(n.exec_task(h, 3_000_000).wall_time for _ in range(3))
    assert big > small


def test_local_probe(tmp_path):
    m = probe_platform(local_node(tmp_path), ProbeSettings(archive_bytes=50_000, download_bytes=100_000,
                                                           io_bytes=1 << 20))
    assert m.core_count and m.core_count >= 1
    assert m.download_rate > 0 and m.unzip_time is not None


def test_local_end_to_end_cli(tmp_path, capsys):
    cfg = {"nodes": [{"id": "edge-1", "tier": "edge",
                      "external": {"adapter": "local", "address": "localhost", "workdir": str(tmp_path / "wd"),
                                   "options": {"burn_iterations_per_work_unit": 0.001}}}],
           "workloads": [{"profile": "PokemonLike"}], "modes": ["edge-only"], "repetitions": 2,
           "probe": {"archive_bytes": 10000, "download_bytes": 10000, "io_bytes": 1048576},
           "result_store": {"kind": "directory", "path": str(tmp_path / "store")}}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert main(["run", str(tmp_path / "c.json"), "--out", str(tmp_path / "o")]) == 0
    assert "2 records, 0 failed" in capsys.readouterr().out
    assert len(list((tmp_path / "store").iterdir())) == 2


def test_ssh_argv_and_failures():
    seen = []

    def runner(argv, **kw):
        seen.append(argv)
        return subprocess.CompletedProcess(argv, 0 if argv[-1] != "false" else 1, b"ok", b"")

    t = SshTransport(extra_args=["-p", "2222"], runner=runner)
    s = t.open("pi@10.0.0.2")
    assert seen[-1] == ["ssh", "-p", "2222", "pi@10.0.0.2", "true"]
    t.exec(s, ["echo", "a b"])
    assert seen[-1][-1] == "echo 'a b'"
    bad = SshTransport(runner=lambda argv, **kw: subprocess.CompletedProcess(argv, 255, b"", b"refused"))
    with pytest.raises(ConnectionError):
        bad.open("nowhere")
