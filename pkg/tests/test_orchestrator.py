from dataclasses import replace

import pytest

from conftest import validated
from fogbench.errors import ConfigError
from fogbench.metrics import identity_violations
from fogbench.model import DeploymentMode as M, NodeSpec, ServicePlacement, Profile, Tier, TransportParams, validate_run_config
from fogbench.nodes import VirtualNode
from fogbench.orchestrator import offload_assets, plan_cells, run_benchmark
from fogbench.presets import default_nodes, default_run_config
from fogbench.stress import StressLevel as S
from fogbench.transport import CommandResult, StubTransport
from fogbench.workloads import make_profile


def test_requires_validated_config():
    with pytest.raises(ConfigError):
        run_benchmark(default_run_config())


def test_plan_order_and_count():
    cfg = validated(repetitions=1, stress_levels=(S.NONE, S.LOW), user_counts=(1, 2))
    cells = plan_cells(cfg.config)
    # 6 profiles: CO + EO each, CE: yolo 1, sphinx/aeneas/pokemon 1, realfd 2, foglamp 0
    assert len(cells) == (12 + 6) * 4
    assert [c.workload.name for c in cells[:4 * 3]] == ["yolo"] * 12
    assert [c.mode for c in cells[:12:4]] == [M.CLOUD_ONLY, M.EDGE_ONLY, M.CLOUD_EDGE]


def test_cardinality_three_assets():
    w = make_profile(Profile.REALFD_LIKE, {"asset_count": 3})
    cfg = validate_run_config(replace(default_run_config(profiles=[], modes=[M.CLOUD_ONLY], repetitions=25),
                                      workloads=(w,)))
    res = run_benchmark(cfg)
    assert len(res.records) == 75
    assert {r.key.asset for r in res.records} == {"frame-0", "frame-1", "frame-2"}
    assert sorted({r.key.repetition for r in res.records}) == list(range(25))


def test_t4_only_in_cloud_edge():
    res = run_benchmark(validated(repetitions=2))
    for r in res.records:
        if r.key.mode is M.CLOUD_EDGE:
            assert r.timing.t4_offload > 0 and r.timing.bytes_down_cloud_edge > 0
        else:
            assert r.timing.t4_offload == 0 and r.timing.bytes_down_cloud_edge == 0
        assert identity_violations(r.timing, r.metrics) == []


def test_offload_hand_value():
    cloud = VirtualNode(replace(default_nodes()[0], backend=replace(default_nodes()[0].backend, jitter_fraction=0)))
    edge = VirtualNode(replace(default_nodes()[1], backend=replace(default_nodes()[1].backend, jitter_fraction=0)))
    w = make_profile(Profile.YOLO_LIKE)
    p = ServicePlacement.of({"resize": "edge-1", "detect": "edge-1"}, w.service_names)
    r = offload_assets(cloud, edge, w, p)
    # 10 MB over min(8e6, 2e6) B/s plus 0.25 + 0.025 s of latency
    assert r.bytes == 10_000_000 and r.wall_time == pytest.approx(5.0 + 0.275)


def test_stress_only_on_edge_and_released():
    seen = []
    res = run_benchmark(validated(profiles=[Profile.POKEMON_LIKE], repetitions=2, stress_levels=(S.NONE, S.HIGH)),
                        on_cell=lambda c, recs: seen.append((c.mode, c.stress, recs[0].metrics.rtt)))
    by = {(m, s): rtt for m, s, rtt in seen}
    assert by[(M.CLOUD_ONLY, S.HIGH)] == pytest.approx(by[(M.CLOUD_ONLY, S.NONE)], rel=0.2)
    assert by[(M.EDGE_ONLY, S.HIGH)] > by[(M.EDGE_ONLY, S.NONE)]
    assert res.all_ok


def test_concurrent_cell_records_load_summary():
    res = run_benchmark(validated(profiles=[Profile.POKEMON_LIKE], modes=[M.EDGE_ONLY], repetitions=2,
                                  user_counts=(1, 4)))
    multi = [r for r in res.records if r.key.users == 4]
    assert len(multi) == 2 and all(r.load.throughput == 20 for r in multi)
    assert all(r.load is None for r in res.records if r.key.users == 1)


def test_provision_failure_recorded_not_raised():
    bad = NodeSpec("edge-1", Tier.EDGE, TransportParams("stub", "pi"))
    cfg = validate_run_config(replace(default_run_config(profiles=[Profile.POKEMON_LIKE], repetitions=2),
                                      nodes=(default_nodes()[0], bad)))
    res = run_benchmark(cfg, transports={"edge-1": StubTransport(refuse=True)})
    failed = res.failures
    assert failed and all("edge-1" in r.error for r in failed)
    assert all(r.success for r in res.records if r.key.mode is M.CLOUD_ONLY)
    assert len(res.records) == 3 * 2
    assert "edge-1" in res.platform and res.platform["edge-1"].unavailable


def test_exec_failure_one_record_each():
    t = StubTransport()
    n = {"k": 0}

    def py(argv):
        n["k"] += 1
        return CommandResult(1 if n["k"] % 2 else 0, "crash")

    t.handlers["python3"] = py
    ext = NodeSpec("edge-1", Tier.EDGE, TransportParams("stub", "pi"))
    cfg = validate_run_config(replace(default_run_config(profiles=[Profile.POKEMON_LIKE], modes=[M.EDGE_ONLY],
                                                         repetitions=4), nodes=(ext,)))
    res = run_benchmark(cfg, transports={"edge-1": t})
    assert len(res.records) == 4
    assert 0 < len(res.failures) < 4
    assert all("game-server" in r.error or "crash" in r.error for r in res.failures)


def test_seed_changes_results():
    a = run_benchmark(validated(profiles=[Profile.SPHINX_LIKE], repetitions=3), seed=1)
    b = run_benchmark(validated(profiles=[Profile.SPHINX_LIKE], repetitions=3), seed=2)
    c = run_benchmark(validated(profiles=[Profile.SPHINX_LIKE], repetitions=3), seed=1)
    rtt = lambda res: [r.metrics.rtt for r in res.records]
    assert rtt(a) == rtt(c) != rtt(b)
