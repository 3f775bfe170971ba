import pytest
from hypothesis import given, strategies as st

from fogbench.errors import AlreadyReleased, SpawnFailure, StressAlreadyActive
from fogbench.model import NodeSpec, Tier, TransportParams, VirtualParams
from fogbench.nodes import ExternalNode, VirtualNode
from fogbench.stress import (NO_STRESS, StressLevel as S, apply_stress, available_core_fraction, release_stress,
                             stress_profile)
from fogbench.transport import CommandResult, StubTransport

LEVELS = list(S)


def vnode(cores=4):
    return VirtualNode(NodeSpec("e", Tier.EDGE, VirtualParams(100.0, 1e6, 1e6, core_count=cores)))


def test_level_order():
    assert S.NONE < S.MINIMAL < S.LOW < S.MEDIUM < S.HIGH < S.VERY_HIGH
    assert sorted(reversed(LEVELS)) == LEVELS


@given(st.integers(1, 256))
def test_profiles_nondecreasing(cores):
    prev = -1
    for lv in LEVELS:
        c = stress_profile(lv, cores).cpu_cores_stressed
        assert c >= prev or lv is S.VERY_HIGH and c == cores
        prev = c


def test_invalid_core_count():
    with pytest.raises(ValueError):
        stress_profile(S.LOW, 0)


@given(st.integers(1, 64), st.integers(0, 128))
def test_core_fraction_bounds(cores, stressed):
    f = available_core_fraction(cores, stressed)
    assert 0 < f <= 1
    assert f >= 0.25 / cores


def test_apply_release_virtual():
    n = vnode()
    h = apply_stress(n, stress_profile(S.VERY_HIGH, 4))
    assert n.stress_state.available_core_fraction == 0.25 / 4
    assert n.stress_state.ram_penalty_factor == pytest.approx(1.2)
    with pytest.raises(StressAlreadyActive):
        apply_stress(n, stress_profile(S.LOW, 4))
    release_stress(h)
    assert n.stress_state is NO_STRESS and n.active_stress is None
    with pytest.raises(AlreadyReleased):
        release_stress(h)


def test_minimal_throttles_bandwidth():
    n = vnode()
    apply_stress(n, stress_profile(S.MINIMAL, 4))
    assert n.stress_state.effective_bandwidth(1e6) == 21740
    assert n.stress_state.effective_bandwidth(1000) == 1000


def stub_node(**handlers):
    t = StubTransport()

    def sh(argv):
        return CommandResult(0, f"{t.new_pid()}\n")

    t.handlers.update({"sh": sh, **handlers})
    spec = NodeSpec("x", Tier.EDGE, TransportParams("stub", "host",
                                                     options={"network_stress_url": "http://h/f"}))
    return ExternalNode(spec, t), t


def test_external_spawn_and_kill():
    n, t = stub_node()
    h = apply_stress(n, stress_profile(S.MINIMAL, 4))
    assert len(h.process_ids) == 2
    spawned = [c for c in t.calls if c[0] == "exec" and c[1][0] == "sh"]
    assert "--cpu 1" in spawned[0][1][2] and "--limit-rate 21740" in spawned[1][1][2]
    release_stress(h)
    kills = [c[1] for c in t.calls if c[0] == "exec" and c[1][0] == "kill"]
    assert sorted(int(k[1]) for k in kills) == sorted(h.process_ids)
    assert n.active_stress is None


def test_external_spawn_failure_reaps_partial():
    n, t = stub_node()
    calls = {"n": 0}

    def sh(argv):
        calls["n"] += 1
        return CommandResult(0, "4242\n") if calls["n"] == 1 else CommandResult(127, "stress: not found")

    t.handlers["sh"] = sh
    with pytest.raises(SpawnFailure):
        apply_stress(n, stress_profile(S.VERY_HIGH, 4))
    assert ("exec", ("kill", "4242")) in t.calls
    assert n.active_stress is None
