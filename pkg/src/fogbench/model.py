"""Domain types, deployment modes and service placement.

Everything here is an immutable value.  ``validate_run_config`` is the single
gate between a parsed configuration and the orchestrator; it collects every
violation it can find before raising.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional, Union

from .errors import ConfigError
from .stress import StressLevel

MiB = 1024 * 1024


class DeploymentMode(str, Enum):
    CLOUD_ONLY = "cloud-only"
    EDGE_ONLY = "edge-only"
    CLOUD_EDGE = "cloud-edge"


class Tier(str, Enum):
    CLOUD = "cloud"
    EDGE = "edge"


class Profile(str, Enum):
    YOLO_LIKE = "YoloLike"
    SPHINX_LIKE = "SphinxLike"
    AENEAS_LIKE = "AeneasLike"
    POKEMON_LIKE = "PokemonLike"
    FOGLAMP_LIKE = "FoglampLike"
    REALFD_LIKE = "RealfdLike"
    CUSTOM = "Custom"


@dataclass(frozen=True)
class VirtualParams:
    """Deterministic stand-in for a physical node.

    Bandwidths are seen from the node: ``uplink_bandwidth`` carries bytes from
    the observer *to* the node, ``downlink_bandwidth`` carries bytes back.
    ``link_latency`` is the one-way propagation delay to the observer.
    """

    compute_speed: float
    uplink_bandwidth: float
    downlink_bandwidth: float
    link_latency: float = 0.0
    jitter_fraction: float = 0.0
    seed: int = 0
    core_count: int = 4
    cpu_model: str = "virtual-cpu"
    cpu_frequency: float = 2.0e9
    uptime: float = 0.0
    io_read_rate: float = 100e6
    io_write_rate: float = 50e6
    ram_stress_penalty: float = 0.10
    unzip_work_per_byte: float = 1.0


@dataclass(frozen=True)
class TransportParams:
    adapter: str
    address: str = ""
    workdir: str = "/tmp/fogbench"
    options: Mapping[str, object] = field(default_factory=dict)


@dataclass(frozen=True)
class NodeSpec:
    id: str
    tier: Tier
    backend: Union[VirtualParams, TransportParams]
    labels: Mapping[str, str] = field(default_factory=dict)

    @property
    def is_virtual(self) -> bool:
        return isinstance(self.backend, VirtualParams)


@dataclass(frozen=True)
class ServiceSpec:
    """One stage of a workload pipeline.

    Work for an input of ``n`` bytes is ``fixed_work + compute_cost * n``;
    the stage emits ``round(n * output_ratio)`` bytes and lets an item through
    with probability ``filter_probability``.  ``offload_payload_bytes`` must
    travel cloud to edge before the stage may run on an edge node.
    """

    name: str
    compute_cost: float = 0.0
    fixed_work: float = 0.0
    output_ratio: float = 1.0
    filter_probability: float = 1.0
    offload_payload_bytes: int = 0
    command: Optional[tuple[str, ...]] = None

    def work_for(self, input_bytes: int) -> float:
        return self.fixed_work + self.compute_cost * input_bytes

    def output_for(self, input_bytes: int) -> int:
        return round(input_bytes * self.output_ratio)


@dataclass(frozen=True)
class GeneratedRandom:
    seed: int = 0


@dataclass(frozen=True)
class FileSource:
    path: str


@dataclass(frozen=True)
class AssetSpec:
    id: str
    payload_bytes: int
    content_source: Union[GeneratedRandom, FileSource] = GeneratedRandom()

    def materialize(self) -> bytes:
        src = self.content_source
        if isinstance(src, FileSource):
            data = Path(src.path).read_bytes()
            if len(data) != self.payload_bytes:
                raise ConfigError(
                    f"asset {self.id}: file {src.path} has {len(data)} bytes, "
                    f"declared payload_bytes={self.payload_bytes}"
                )
            return data
        return random.Random(f"asset:{self.id}:{src.seed}").randbytes(self.payload_bytes)


@dataclass(frozen=True)
class WorkloadSpec:
    name: str
    profile: Profile
    services: tuple[ServiceSpec, ...]
    assets: tuple[AssetSpec, ...]
    requires_cloud_asset: bool = True
    audio_length_seconds: Optional[float] = None
    labels: Mapping[str, str] = field(default_factory=dict)

    @property
    def service_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.services)

    def service(self, name: str) -> ServiceSpec:
        for s in self.services:
            if s.name == name:
                return s
        raise KeyError(name)


@dataclass(frozen=True)
class ServicePlacement:
    """Ordered service -> node-id assignment (pipeline order)."""

    assignments: tuple[tuple[str, str], ...]

    @classmethod
    def of(cls, mapping: Mapping[str, str], order=None) -> "ServicePlacement":
        keys = list(order) if order is not None else list(mapping)
        return cls(tuple((k, mapping[k]) for k in keys))

    @property
    def mapping(self) -> dict[str, str]:
        return dict(self.assignments)

    def node_for(self, service: str) -> str:
        for name, node in self.assignments:
            if name == service:
                return node
        raise KeyError(service)

    @property
    def node_ids(self) -> tuple[str, ...]:
        seen: list[str] = []
        for _, node in self.assignments:
            if node not in seen:
                seen.append(node)
        return tuple(seen)

    def label(self) -> str:
        return ";".join(f"{s}@{n}" for s, n in self.assignments)

    @classmethod
    def parse_label(cls, text: str) -> "ServicePlacement":
        pairs = []
        for part in text.split(";"):
            service, _, node = part.partition("@")
            pairs.append((service, node))
        return cls(tuple(pairs))


@dataclass(frozen=True)
class ResultStoreSpec:
    """Where results are uploaded (T2).

    ``virtual`` models the link; ``directory`` writes the bytes locally and
    times the write; ``none`` skips the upload (T2 = 0).
    """

    kind: str = "virtual"
    bandwidth: float = 10e6
    latency: float = 0.05
    jitter_fraction: float = 0.0
    seed: int = 0
    path: Optional[str] = None


@dataclass(frozen=True)
class LoadSettings:
    requests_per_user: Optional[int] = 5
    duration: Optional[float] = None
    think_time: float = 0.0


@dataclass(frozen=True)
class ProbeSettings:
    archive_bytes: int = 34 * MiB
    download_bytes: int = 200 * MiB
    io_bytes: int = 16 * MiB


DEFAULT_SEED = 20190101


@dataclass(frozen=True)
class RunConfig:
    nodes: tuple[NodeSpec, ...]
    workloads: tuple[WorkloadSpec, ...]
    modes: frozenset[DeploymentMode]
    placements: tuple[tuple[str, ServicePlacement], ...] = ()
    repetitions: int = 25
    stress_levels: tuple[StressLevel, ...] = (StressLevel.NONE,)
    user_counts: tuple[int, ...] = (1,)
    result_store: ResultStoreSpec = ResultStoreSpec()
    cost_rate_per_hour: float = 0.0
    output_dir: str = "results"
    seed: int = DEFAULT_SEED
    load: LoadSettings = LoadSettings()
    probe: ProbeSettings = ProbeSettings()
    stress_targets: frozenset[Tier] = frozenset({Tier.EDGE})
    workload_modes: Mapping[str, frozenset[DeploymentMode]] = field(default_factory=dict)

    def node(self, node_id: str) -> NodeSpec:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def workload(self, name: str) -> WorkloadSpec:
        for w in self.workloads:
            if w.name == name:
                return w
        raise KeyError(name)

    def nodes_of(self, tier: Tier) -> tuple[NodeSpec, ...]:
        return tuple(n for n in self.nodes if n.tier == tier)

    def modes_for(self, workload: str) -> list[DeploymentMode]:
        allowed = self.workload_modes.get(workload)
        modes = [m for m in DeploymentMode if m in self.modes]
        if allowed is not None:
            modes = [m for m in modes if m in allowed]
        return modes


@dataclass(frozen=True)
class ValidatedRunConfig:
    """A RunConfig that passed validation; attribute access is delegated."""

    config: RunConfig

    def __getattr__(self, name):
        return getattr(self.config, name)


def placements_for_mode(
    workload: WorkloadSpec, mode: DeploymentMode, cloud_node: str, edge_node: str
) -> list[ServicePlacement]:
    names = workload.service_names
    if mode is DeploymentMode.CLOUD_ONLY:
        return [ServicePlacement(tuple((s, cloud_node) for s in names))]
    if mode is DeploymentMode.EDGE_ONLY:
        return [ServicePlacement(tuple((s, edge_node) for s in names))]
    out = []
    for k in range(1, len(names)):
        out.append(
            ServicePlacement(
                tuple((s, edge_node if i < k else cloud_node) for i, s in enumerate(names))
            )
        )
    return out


def cloud_edge_cells(workload: WorkloadSpec, cloud_node: str, edge_node: str) -> list[ServicePlacement]:
    """Placements the orchestrator runs in cloud-edge mode.

    Multi-service workloads use the proper prefix splits.  A single-service
    workload has none, so it runs its one service on the edge with the
    offload asset shipped from the cloud.
    """
    splits = placements_for_mode(workload, DeploymentMode.CLOUD_EDGE, cloud_node, edge_node)
    if splits or len(workload.services) != 1:
        return splits
    return placements_for_mode(workload, DeploymentMode.EDGE_ONLY, cloud_node, edge_node)


def placement_violations(
    workload: WorkloadSpec, placement: ServicePlacement, mode: DeploymentMode, tiers: Mapping[str, Tier]
) -> list[str]:
    errs = []
    names = [s for s, _ in placement.assignments]
    if sorted(names) != sorted(workload.service_names) or len(set(names)) != len(names):
        errs.append(
            f"placement for workload {workload.name}: services {names} must list each of "
            f"{list(workload.service_names)} exactly once"
        )
        return errs
    unknown = [n for _, n in placement.assignments if n not in tiers]
    if unknown:
        errs.append(f"placement for workload {workload.name}: unknown node ids {unknown}")
        return errs
    ordered = [tiers[placement.node_for(s)] for s in workload.service_names]
    if mode is DeploymentMode.CLOUD_ONLY and any(t is not Tier.CLOUD for t in ordered):
        errs.append(f"placement for workload {workload.name}: cloud-only must use cloud nodes only")
    elif mode is DeploymentMode.EDGE_ONLY and any(t is not Tier.EDGE for t in ordered):
        errs.append(f"placement for workload {workload.name}: edge-only must use edge nodes only")
    elif mode is DeploymentMode.CLOUD_EDGE:
        k = 0
        while k < len(ordered) and ordered[k] is Tier.EDGE:
            k += 1
        prefix_ok = all(t is Tier.CLOUD for t in ordered[k:])
        n = len(ordered)
        k_ok = 1 <= k < n or (n == 1 and k == 1)
        if not (prefix_ok and k_ok):
            errs.append(
                f"placement for workload {workload.name}: cloud-edge placement must put "
                f"services 1..k on edge and k+1..n on cloud (1 <= k < n)"
            )
    return errs


def _positive(x) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x) and x > 0


def _nonneg(x) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x) and x >= 0


def _workload_violations(w: WorkloadSpec) -> list[str]:
    errs = []
    where = f"workload {w.name}"
    if not w.services:
        errs.append(f"{where}: services must be non-empty")
    if not w.assets:
        errs.append(f"{where}: assets must be non-empty")
    names = [s.name for s in w.services]
    if len(set(names)) != len(names):
        errs.append(f"{where}: duplicate service names {names}")
    for s in w.services:
        sw = f"{where} service {s.name}"
        if not _nonneg(s.compute_cost):
            errs.append(f"{sw}: compute_cost must be >= 0")
        if not _nonneg(s.fixed_work):
            errs.append(f"{sw}: fixed_work must be >= 0")
        if not _nonneg(s.output_ratio):
            errs.append(f"{sw}: output_ratio must be >= 0")
        if not (_nonneg(s.filter_probability) and s.filter_probability <= 1):
            errs.append(f"{sw}: filter_probability must be in [0, 1]")
        if not (isinstance(s.offload_payload_bytes, int) and s.offload_payload_bytes >= 0):
            errs.append(f"{sw}: offload_payload_bytes must be an integer >= 0")
    ids = [a.id for a in w.assets]
    if len(set(ids)) != len(ids):
        errs.append(f"{where}: duplicate asset ids {ids}")
    for a in w.assets:
        if not (isinstance(a.payload_bytes, int) and a.payload_bytes > 0):
            errs.append(f"{where} asset {a.id}: payload_bytes must be an integer > 0")
        elif isinstance(a.content_source, FileSource):
            p = Path(a.content_source.path)
            if not p.is_file():
                errs.append(f"{where} asset {a.id}: file {p} does not exist")
            elif p.stat().st_size != a.payload_bytes:
                errs.append(
                    f"{where} asset {a.id}: file {p} has {p.stat().st_size} bytes, "
                    f"payload_bytes={a.payload_bytes}"
                )
    if w.profile is Profile.SPHINX_LIKE and not _positive(w.audio_length_seconds):
        errs.append(f"{where}: audio_length_seconds must be > 0 for SphinxLike")
    if w.audio_length_seconds is not None and not _positive(w.audio_length_seconds):
        errs.append(f"{where}: audio_length_seconds must be > 0")
    if w.profile is Profile.FOGLAMP_LIKE and w.requires_cloud_asset:
        errs.append(f"{where}: FoglampLike must have requires_cloud_asset = false")
    return errs


def _node_violations(n: NodeSpec) -> list[str]:
    errs = []
    b = n.backend
    where = f"node {n.id}"
    if isinstance(b, VirtualParams):
        for fname in ("compute_speed", "uplink_bandwidth", "downlink_bandwidth", "cpu_frequency",
                      "io_read_rate", "io_write_rate", "unzip_work_per_byte"):
            if not _positive(getattr(b, fname)):
                errs.append(f"{where}: {fname} must be > 0")
        for fname in ("link_latency", "uptime", "ram_stress_penalty"):
            if not _nonneg(getattr(b, fname)):
                errs.append(f"{where}: {fname} must be >= 0")
        if not (_nonneg(b.jitter_fraction) and b.jitter_fraction < 1):
            errs.append(f"{where}: jitter_fraction must be in [0, 1)")
        if not (isinstance(b.core_count, int) and b.core_count >= 1):
            errs.append(f"{where}: core_count must be an integer >= 1")
    elif not b.adapter:
        errs.append(f"{where}: external backend needs a transport adapter")
    return errs


def validate_run_config(config: RunConfig) -> ValidatedRunConfig:
    errs: list[str] = []
    if isinstance(config, ValidatedRunConfig):
        config = config.config

    if not config.nodes:
        errs.append("nodes: at least one node is required")
    ids = [n.id for n in config.nodes]
    for dup in sorted({i for i in ids if ids.count(i) > 1}):
        errs.append(f"nodes: duplicate node id {dup}")
    for n in config.nodes:
        errs.extend(_node_violations(n))

    if not config.workloads:
        errs.append("workloads: at least one workload is required")
    wnames = [w.name for w in config.workloads]
    for dup in sorted({w for w in wnames if wnames.count(w) > 1}):
        errs.append(f"workloads: duplicate workload name {dup}")
    for w in config.workloads:
        errs.extend(_workload_violations(w))

    if not config.modes:
        errs.append("modes: at least one deployment mode is required")
    n_cloud = len(config.nodes_of(Tier.CLOUD))
    n_edge = len(config.nodes_of(Tier.EDGE))
    if DeploymentMode.CLOUD_ONLY in config.modes and n_cloud < 1:
        errs.append("CloudOnly requires ≥1 cloud node")
    if DeploymentMode.EDGE_ONLY in config.modes and n_edge < 1:
        errs.append("EdgeOnly requires ≥1 edge node")
    if DeploymentMode.CLOUD_EDGE in config.modes:
        if n_cloud < 1:
            errs.append("CloudEdge requires ≥1 cloud node")
        if n_edge < 1:
            errs.append("CloudEdge requires ≥1 edge node")

    for name, modes in config.workload_modes.items():
        if name not in wnames:
            errs.append(f"workload_modes: unknown workload {name}")
        elif not config.modes_for(name):
            errs.append(f"workload {name}: no deployment mode left after restricting to {sorted(m.value for m in modes)}")
    for w in config.workloads:
        if DeploymentMode.CLOUD_EDGE in config.modes_for(w.name) and not w.requires_cloud_asset:
            errs.append(
                f"workload {w.name}: does not require a cloud asset and cannot run in cloud-edge mode"
            )

    tiers = {n.id: n.tier for n in config.nodes}
    for wname, placement in config.placements:
        if wname not in wnames:
            errs.append(f"placements: unknown workload {wname}")
            continue
        errs.extend(placement_violations(config.workload(wname), placement, DeploymentMode.CLOUD_EDGE, tiers))
        if DeploymentMode.CLOUD_EDGE not in config.modes_for(wname):
            errs.append(f"placements: workload {wname} has an explicit placement but does not run cloud-edge")

    if not (isinstance(config.repetitions, int) and config.repetitions >= 1):
        errs.append("repetitions: must be an integer >= 1")
    if not config.user_counts:
        errs.append("user_counts: at least one entry is required")
    for u in config.user_counts:
        if not (isinstance(u, int) and u >= 1):
            errs.append(f"user_counts: entry {u!r} must be an integer >= 1")
    if len(set(config.user_counts)) != len(config.user_counts):
        errs.append("user_counts: duplicate entries")
    if not config.stress_levels:
        errs.append("stress_levels: at least one level is required")
    if len(set(config.stress_levels)) != len(config.stress_levels):
        errs.append("stress_levels: duplicate entries")
    if not _nonneg(config.cost_rate_per_hour):
        errs.append("cost_rate_per_hour: must be >= 0")

    rs = config.result_store
    if rs.kind not in ("virtual", "directory", "none"):
        errs.append(f"result_store: unknown kind {rs.kind!r}")
    elif rs.kind == "virtual":
        if not _positive(rs.bandwidth):
            errs.append("result_store: bandwidth must be > 0")
        if not _nonneg(rs.latency):
            errs.append("result_store: latency must be >= 0")
        if not (_nonneg(rs.jitter_fraction) and rs.jitter_fraction < 1):
            errs.append("result_store: jitter_fraction must be in [0, 1)")
    elif rs.kind == "directory" and not rs.path:
        errs.append("result_store: directory store needs a path")

    ld = config.load
    if (ld.requests_per_user is None) == (ld.duration is None):
        errs.append("load: exactly one of requests_per_user / duration must be set")
    if ld.requests_per_user is not None and not (isinstance(ld.requests_per_user, int) and ld.requests_per_user >= 1):
        errs.append("load: requests_per_user must be an integer >= 1")
    if ld.duration is not None and not _positive(ld.duration):
        errs.append("load: duration must be > 0")
    if not _nonneg(ld.think_time):
        errs.append("load: think_time must be >= 0")
    for fname in ("archive_bytes", "download_bytes", "io_bytes"):
        v = getattr(config.probe, fname)
        if not (isinstance(v, int) and v > 0):
            errs.append(f"probe: {fname} must be an integer > 0")

    if errs:
        raise ConfigError(errs)
    return ValidatedRunConfig(config)
