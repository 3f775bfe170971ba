"""The calibrated default virtual testbed.

The edge node computes 5x slower than the cloud node, sits 10x closer to the
observer, and has 4x less bandwidth to it.  These are calibration constants,
not measurements; override them per node in a config file.
"""

from __future__ import annotations

from typing import Iterable, Optional

from .model import (DeploymentMode, NodeSpec, Profile, ResultStoreSpec, RunConfig, Tier, VirtualParams,
                    WorkloadSpec)
from .stress import StressLevel
from .workloads import BUILTIN_PROFILES, make_profile

CLOUD = VirtualParams(
    compute_speed=1e8,
    uplink_bandwidth=8e6,
    downlink_bandwidth=8e6,
    link_latency=0.25,
    jitter_fraction=0.05,
    seed=1,
    core_count=8,
    cpu_model="virtual cloud vCPU",
    cpu_frequency=3.0e9,
    io_read_rate=500e6,
    io_write_rate=300e6,
)

EDGE = VirtualParams(
    compute_speed=2e7,
    uplink_bandwidth=2e6,
    downlink_bandwidth=2e6,
    link_latency=0.025,
    jitter_fraction=0.05,
    seed=2,
    core_count=4,
    cpu_model="virtual edge SoC",
    cpu_frequency=2.0e9,
    io_read_rate=80e6,
    io_write_rate=40e6,
)


def default_nodes() -> tuple[NodeSpec, NodeSpec]:
    return (NodeSpec("cloud-1", Tier.CLOUD, CLOUD), NodeSpec("edge-1", Tier.EDGE, EDGE))


def default_workloads(profiles: Iterable[Profile] = BUILTIN_PROFILES) -> tuple[WorkloadSpec, ...]:
    return tuple(make_profile(p) for p in profiles)


def default_run_config(
    profiles: Iterable[Profile] = BUILTIN_PROFILES,
    modes: Iterable[DeploymentMode] = tuple(DeploymentMode),
    repetitions: int = 25,
    stress_levels=(StressLevel.NONE,),
    user_counts=(1,),
    seed: Optional[int] = None,
    **kw,
) -> RunConfig:
    """All built-in profiles on the default testbed.

    Workloads that need no cloud asset are kept out of cloud-edge mode.
    """
    workloads = default_workloads(profiles)
    modes = frozenset(modes)
    wm = {w.name: frozenset(m for m in modes if m is not DeploymentMode.CLOUD_EDGE)
          for w in workloads if not w.requires_cloud_asset and DeploymentMode.CLOUD_EDGE in modes}
    extra = {"seed": seed} if seed is not None else {}
    return RunConfig(
        nodes=default_nodes(),
        workloads=workloads,
        modes=modes,
        repetitions=repetitions,
        stress_levels=tuple(stress_levels),
        user_counts=tuple(user_counts),
        result_store=kw.pop("result_store", ResultStoreSpec()),
        cost_rate_per_hour=kw.pop("cost_rate_per_hour", 0.0944),
        workload_modes=wm,
        **extra,
        **kw,
    )
