"""Runs a benchmarking campaign cell by cell.

A cell is one (workload, mode, placement, stress level, user count).  Inside
a cell the environment is provisioned once, stress is applied, the offload
asset (cloud-edge only) is shipped once, and then every asset is run once per
repetition.  Each (asset, repetition) yields exactly one record, failed or
not.
"""

from __future__ import annotations

import logging
import random
import statistics
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

from .errors import ConfigError, FogbenchError, ProvisionFailure, TransferFailure
from .loadgen import LoadProfile, LoadSummary, LoadTarget, run_load, summarize, wall_duration
from .metrics import AppMetrics, TimingBreakdown, compute_app_metrics
from .model import (DeploymentMode, RunConfig, ServicePlacement, Tier, ValidatedRunConfig, WorkloadSpec,
                    cloud_edge_cells, placements_for_mode, validate_run_config)
from .nodes import Direction, NodeRuntime, PlatformMetrics, TransferResult, probe_platform, transfer
from .stress import StressLevel, apply_stress, release_stress, stress_profile
from .testbed import Testbed

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExperimentKey:
    workload: str
    mode: DeploymentMode
    placement: ServicePlacement
    stress: StressLevel
    users: int
    asset: str
    repetition: int

    @property
    def cell(self) -> tuple:
        return (self.workload, self.mode, self.placement, self.stress, self.users)


@dataclass
class Record:
    key: ExperimentKey
    timing: TimingBreakdown
    metrics: AppMetrics
    load: Optional[LoadSummary] = None
    success: bool = True
    error: str = ""


@dataclass(frozen=True)
class Cell:
    workload: WorkloadSpec
    mode: DeploymentMode
    placement: ServicePlacement
    stress: StressLevel
    users: int
    cloud_node: Optional[str]
    edge_node: Optional[str]


@dataclass
class ResultSet:
    records: list[Record]
    config_snapshot: ValidatedRunConfig
    seed: int
    platform: dict[str, PlatformMetrics] = field(default_factory=dict)

    @property
    def all_ok(self) -> bool:
        return all(r.success for r in self.records)

    @property
    def failures(self) -> list[Record]:
        return [r for r in self.records if not r.success]


def plan_cells(config: RunConfig) -> list[Cell]:
    """Every experiment cell in execution order."""
    clouds = [n.id for n in config.nodes_of(Tier.CLOUD)]
    edges = [n.id for n in config.nodes_of(Tier.EDGE)]
    explicit: dict[str, list[ServicePlacement]] = {}
    for wname, p in config.placements:
        explicit.setdefault(wname, []).append(p)
    cells = []
    for w in config.workloads:
        for mode in config.modes_for(w.name):
            layouts: list[tuple[ServicePlacement, Optional[str], Optional[str]]] = []
            if mode is DeploymentMode.CLOUD_ONLY:
                for c in clouds:
                    layouts += [(p, c, None) for p in placements_for_mode(w, mode, c, "")]
            elif mode is DeploymentMode.EDGE_ONLY:
                for e in edges:
                    layouts += [(p, None, e) for p in placements_for_mode(w, mode, "", e)]
            elif w.name in explicit:
                tiers = {n.id: n.tier for n in config.nodes}
                for p in explicit[w.name]:
                    c = next(n for n in p.node_ids if tiers[n] is Tier.CLOUD) if any(
                        tiers[n] is Tier.CLOUD for n in p.node_ids) else clouds[0]
                    e = next(n for n in p.node_ids if tiers[n] is Tier.EDGE)
                    layouts.append((p, c, e))
            else:
                for c in clouds:
                    for e in edges:
                        layouts += [(p, c, e) for p in cloud_edge_cells(w, c, e)]
            for p, c, e in layouts:
                for level in config.stress_levels:
                    for users in config.user_counts:
                        cells.append(Cell(w, mode, p, level, users, c, e))
    return cells


def offload_assets(cloud_node: NodeRuntime, edge_node: NodeRuntime, workload: WorkloadSpec,
                   placement: ServicePlacement, stress_state=None) -> TransferResult:
    """Ship the offload payloads of every edge-placed service from cloud to edge."""
    edge_services = [s for s in workload.services if placement.node_for(s.name) == edge_node.id]
    nbytes = sum(s.offload_payload_bytes for s in edge_services)
    remote = None
    if not edge_node.is_virtual:
        remote = edge_node.path(workload.name, "offload.bin")
    return transfer(cloud_node, edge_node, nbytes, Direction.CLOUD_TO_EDGE, stress_state, remote_path=remote)


def _core_count(node: NodeRuntime, platform: Mapping[str, PlatformMetrics]) -> int:
    if node.is_virtual:
        return node.spec.backend.core_count
    m = platform.get(node.id)
    return (m.core_count if m and m.core_count else 1)


def _timing_from_records(recs, t2s, t4, ce_bytes, file_length):
    ok = [r for r in recs if r.success]
    if not ok:
        return TimingBreakdown(t4_offload=t4, bytes_down_cloud_edge=ce_bytes, file_length=file_length)
    return TimingBreakdown(
        t1_flight=statistics.fmean(r.t1 for r in ok),
        et_exec=statistics.fmean(r.et for r in ok),
        t2_store=statistics.fmean(t2s) if t2s else 0.0,
        t3_results=statistics.fmean(r.t3 for r in ok),
        t4_offload=t4,
        bytes_up=round(statistics.fmean(r.bytes_up for r in ok)),
        bytes_down=round(statistics.fmean(r.bytes_down for r in ok)),
        bytes_down_cloud_edge=ce_bytes,
        file_length=file_length,
    )


def run_cell(cell: Cell, testbed: Testbed, config: RunConfig, seed: int,
             platform: Mapping[str, PlatformMetrics]) -> list[Record]:
    w = cell.workload
    label = f"{seed}:{w.name}:{cell.mode.value}:{cell.placement.label()}:{cell.stress.value}:{cell.users}"
    keys = [ExperimentKey(w.name, cell.mode, cell.placement, cell.stress, cell.users, a.id, rep)
            for rep in range(config.repetitions) for a in w.assets]
    rate = config.cost_rate_per_hour

    def failed(key, error, t4=0.0, ce_bytes=0):
        t = TimingBreakdown(t4_offload=t4, bytes_down_cloud_edge=ce_bytes, file_length=w.audio_length_seconds)
        return Record(key, t, compute_app_metrics(t, rate), None, False, error)

    node_ids = cell.placement.node_ids
    try:
        handles = testbed.provision(w, node_ids)
    except ProvisionFailure as exc:
        return [failed(k, str(exc)) for k in keys]

    targets = [nid for nid in node_ids if testbed.node(nid).spec.tier in config.stress_targets]
    stress_handles = []
    records: list[Record] = []
    try:
        for nid in targets:
            node = testbed.node(nid)
            sset = stress_profile(cell.stress, _core_count(node, platform))
            stress_handles.append(apply_stress(node, sset))

        t4, ce_bytes = 0.0, 0
        if cell.mode is DeploymentMode.CLOUD_EDGE:
            try:
                off = offload_assets(testbed.node(cell.cloud_node), testbed.node(cell.edge_node), w, cell.placement)
            except TransferFailure as exc:
                return [failed(k, f"offload: {exc}") for k in keys]
            t4, ce_bytes = off.wall_time, off.bytes

        for key in keys:
            asset = next(a for a in w.assets if a.id == key.asset)
            rng_key = f"{label}:{asset.id}:{key.repetition}"
            try:
                if cell.users == 1:
                    trace = testbed.request(w, cell.placement, asset, handles, random.Random(rng_key))
                    t2 = testbed.upload_results(trace.pipeline.last_node, trace.pipeline.final_output_bytes)
                    timing = TimingBreakdown(
                        t1_flight=trace.t1.wall_time,
                        et_exec=trace.pipeline.et,
                        t2_store=t2.wall_time if t2 else 0.0,
                        t3_results=trace.t3.wall_time,
                        t4_offload=t4,
                        bytes_up=trace.t1.bytes,
                        bytes_down=trace.t3.bytes,
                        bytes_down_cloud_edge=ce_bytes,
                        file_length=w.audio_length_seconds,
                    )
                    records.append(Record(key, timing, compute_app_metrics(timing, rate)))
                else:
                    ld = config.load
                    profile = LoadProfile(cell.users, LoadTarget(w, cell.placement, asset),
                                          ld.requests_per_user, ld.duration, ld.think_time)
                    reqs = run_load(profile, testbed, handles, seed_key=rng_key)
                    last = cell.placement.node_for(w.services[-1].name)
                    t2s = []
                    for r in reqs:
                        if r.success:
                            up = testbed.upload_results(last, r.bytes_down)
                            t2s.append(up.wall_time if up else 0.0)
                    summary = summarize(reqs, wall_duration(reqs))
                    timing = _timing_from_records(reqs, t2s, t4, ce_bytes, w.audio_length_seconds)
                    ok = summary.fail_count == 0
                    err = "" if ok else f"{summary.fail_count} of {summary.throughput} requests failed"
                    records.append(Record(key, timing, compute_app_metrics(timing, rate), summary, ok, err))
            except FogbenchError as exc:
                records.append(failed(key, str(exc), t4, ce_bytes))
        return records
    finally:
        for h in stress_handles:
            if not h.released:
                release_stress(h)


def run_benchmark(config, transports: Optional[Mapping] = None, seed: Optional[int] = None,
                  on_cell: Optional[Callable[[Cell, list[Record]], None]] = None,
                  testbed: Optional[Testbed] = None) -> ResultSet:
    if not isinstance(config, ValidatedRunConfig):
        raise ConfigError("run_benchmark needs a validated config; call validate_run_config first")
    cfg = config.config
    seed = cfg.seed if seed is None else seed
    tb = testbed or Testbed.from_config(cfg, transports, seed)
    platform = {}
    for nid, node in tb.nodes.items():
        platform[nid] = probe_platform(node, cfg.probe)
    records: list[Record] = []
    try:
        for cell in plan_cells(cfg):
            recs = run_cell(cell, tb, cfg, seed, platform)
            records.extend(recs)
            if on_cell is not None:
                on_cell(cell, recs)
    finally:
        leaked = tb.active_stress()
        if testbed is None:
            tb.close()
    if leaked:
        raise RuntimeError(f"stress still active on nodes {leaked}")
    return ResultSet(records, config, seed, platform)
