"""Synthetic workload profiles, the service pipeline engine, and plugins.

The six built-in profiles keep the shape of the applications they stand in
for (type tags, service decomposition, which asset travels where).  Their
magnitudes are calibration constants for the default virtual testbed:
object detection and speech recognition are compute-heavy, forced alignment
and the IoT gateway are dominated by moving bytes.
"""

from __future__ import annotations

import json
import random
import threading
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping, Optional

from .errors import DuplicateName, ExecFailure, InvalidDescriptor, TransferFailure
from .model import AssetSpec, FileSource, GeneratedRandom, Profile, ServicePlacement, ServiceSpec, WorkloadSpec
from .nodes import Direction, ExecResult, ExternalNode, NodeRuntime, TransferResult, transfer
from .stress import StressState

_BUILTIN: dict[Profile, WorkloadSpec] = {
    Profile.YOLO_LIKE: WorkloadSpec(
        name="yolo",
        profile=Profile.YOLO_LIKE,
        services=(
            # offloads: network geometry for resize, trained weights for detect
            ServiceSpec("resize", compute_cost=5.0, output_ratio=0.25, offload_payload_bytes=2_000_000),
            ServiceSpec("detect", compute_cost=100.0, fixed_work=1e8, output_ratio=0.02,
                        offload_payload_bytes=8_000_000),
        ),
        assets=(AssetSpec("image", 200_000, GeneratedRandom(1)),),
        labels={"type": "BI,CI", "offload_asset": "trained model and weights"},
    ),
    Profile.SPHINX_LIKE: WorkloadSpec(
        name="sphinx",
        profile=Profile.SPHINX_LIKE,
        services=(
            ServiceSpec("transcribe", compute_cost=200.0, fixed_work=5e7, output_ratio=0.005,
                        offload_payload_bytes=3_000_000),
        ),
        # 5 s of 16 kHz 16-bit mono audio
        assets=(AssetSpec("audio", 160_000, GeneratedRandom(2)),),
        audio_length_seconds=5.0,
        labels={"type": "BI,CI", "offload_asset": "trained acoustic model"},
    ),
    Profile.AENEAS_LIKE: WorkloadSpec(
        name="aeneas",
        profile=Profile.AENEAS_LIKE,
        services=(
            ServiceSpec("align", compute_cost=1.0, fixed_work=1e5, output_ratio=0.01,
                        offload_payload_bytes=10_000),
        ),
        assets=(AssetSpec("audio-text", 800_000, GeneratedRandom(3)),),
        labels={"type": "BI", "offload_asset": "text segment"},
    ),
    Profile.POKEMON_LIKE: WorkloadSpec(
        name="pokemon",
        profile=Profile.POKEMON_LIKE,
        services=(
            ServiceSpec("game-server", compute_cost=50.0, fixed_work=1e5, output_ratio=1.0,
                        offload_payload_bytes=500_000),
        ),
        assets=(AssetSpec("location-update", 2_000, GeneratedRandom(4)),),
        labels={"type": "LC,LA", "offload_asset": "location state"},
    ),
    Profile.FOGLAMP_LIKE: WorkloadSpec(
        name="foglamp",
        profile=Profile.FOGLAMP_LIKE,
        services=(ServiceSpec("gateway", compute_cost=10.0, fixed_work=1e4, output_ratio=1.0),),
        assets=(AssetSpec("sensor-batch", 4_000, GeneratedRandom(5)),),
        requires_cloud_asset=False,
        labels={"type": "LC"},
    ),
    Profile.REALFD_LIKE: WorkloadSpec(
        name="realfd",
        profile=Profile.REALFD_LIKE,
        services=(
            ServiceSpec("GSC", compute_cost=2.0, output_ratio=2 / 3, offload_payload_bytes=100_000),
            ServiceSpec("MD", compute_cost=1.0, output_ratio=1.0, filter_probability=0.8,
                        offload_payload_bytes=200_000),
            ServiceSpec("FD", compute_cost=50.0, fixed_work=1e7, output_ratio=0.001,
                        offload_payload_bytes=1_000_000),
        ),
        assets=(AssetSpec("frame", 900_000, GeneratedRandom(6)),),
        labels={"type": "LC,BI,CI", "offload_asset": "edge service models"},
    ),
}

BUILTIN_PROFILES = tuple(_BUILTIN)

_SERVICE_FIELDS = {f.name for f in fields(ServiceSpec)} - {"name"}
_OVERRIDE_KEYS = {"name", "services", "assets", "asset_count", "audio_length_seconds",
                  "requires_cloud_asset", "labels"}


def asset_from_dict(d: Mapping, default_id: str = "asset") -> AssetSpec:
    if isinstance(d, AssetSpec):
        return d
    unknown = set(d) - {"id", "payload_bytes", "seed", "file"}
    if unknown:
        raise ValueError(f"asset: unknown keys {sorted(unknown)}")
    src = FileSource(str(d["file"])) if "file" in d else GeneratedRandom(int(d.get("seed", 0)))
    size = d.get("payload_bytes")
    if size is None and "file" in d:
        size = Path(d["file"]).stat().st_size
    return AssetSpec(str(d.get("id", default_id)), size, src)


def service_from_dict(d: Mapping) -> ServiceSpec:
    if isinstance(d, ServiceSpec):
        return d
    unknown = set(d) - _SERVICE_FIELDS - {"name"}
    if unknown:
        raise ValueError(f"service: unknown keys {sorted(unknown)}")
    kw = dict(d)
    if kw.get("command") is not None:
        kw["command"] = tuple(kw["command"])
    return ServiceSpec(**kw)


def make_profile(profile: Profile, overrides: Optional[Mapping] = None) -> WorkloadSpec:
    """Build a workload from a profile plus partial overrides.

    ``overrides`` may set ``name``, ``labels``, ``audio_length_seconds``,
    ``requires_cloud_asset``, replace ``assets`` outright, replicate the
    default asset ``asset_count`` times, and patch individual services with
    ``services={"detect": {"compute_cost": 50}}``.  For ``Custom`` the
    ``services`` entry is the full list.
    """
    profile = Profile(profile)
    ov = dict(overrides or {})
    unknown = set(ov) - _OVERRIDE_KEYS
    if unknown:
        raise ValueError(f"profile overrides: unknown keys {sorted(unknown)}")

    if profile is Profile.CUSTOM:
        services = tuple(service_from_dict(s) for s in ov.get("services", ()))
        base = WorkloadSpec(name=ov.get("name", "custom"), profile=profile, services=services, assets=())
    else:
        base = _BUILTIN[profile]
        patches = ov.get("services", {})
        if not isinstance(patches, Mapping):
            raise ValueError("profile overrides: services must map service name to fields")
        missing = set(patches) - set(base.service_names)
        if missing:
            raise ValueError(f"profile {profile.value}: no services named {sorted(missing)}")
        services = []
        for s in base.services:
            patch = dict(patches.get(s.name, {}))
            bad = set(patch) - _SERVICE_FIELDS
            if bad:
                raise ValueError(f"service {s.name}: unknown fields {sorted(bad)}")
            if patch.get("command") is not None:
                patch["command"] = tuple(patch["command"])
            services.append(replace(s, **patch))
        base = replace(base, services=tuple(services))

    assets = base.assets
    if "assets" in ov:
        assets = tuple(asset_from_dict(a, f"asset-{i}") for i, a in enumerate(ov["assets"]))
    if "asset_count" in ov:
        n = int(ov["asset_count"])
        if n < 1:
            raise ValueError("asset_count must be >= 1")
        proto = assets[0]
        seed = proto.content_source.seed if isinstance(proto.content_source, GeneratedRandom) else 0
        assets = tuple(
            AssetSpec(f"{proto.id}-{i}", proto.payload_bytes, GeneratedRandom(seed * 1000 + i))
            for i in range(n)
        )

    kw = {"assets": assets}
    for key in ("name", "audio_length_seconds", "requires_cloud_asset"):
        if key in ov:
            kw[key] = ov[key]
    if "labels" in ov:
        kw["labels"] = {**base.labels, **ov["labels"]}
    if profile is Profile.FOGLAMP_LIKE and kw.get("requires_cloud_asset"):
        raise ValueError("FoglampLike never requires a cloud asset")
    return replace(base, **kw)


@dataclass
class PipelineResult:
    exec_results: list[ExecResult]
    final_output_bytes: int
    dropped: bool
    boundary_transfers: list[TransferResult] = field(default_factory=list)
    # Ordered (kind, result, service) steps, for contention scheduling.
    steps: list = field(default_factory=list)
    last_node: Optional[str] = None

    @property
    def exec_time(self) -> float:
        return sum(r.wall_time for r in self.exec_results)

    @property
    def boundary_time(self) -> float:
        return sum(t.wall_time for t in self.boundary_transfers)

    @property
    def et(self) -> float:
        """Execution time: service ETs plus any cross-node hand-offs."""
        return self.exec_time + self.boundary_time


def _format_command(template, workload: str, service: ServiceSpec, node: NodeRuntime,
                    input_path: str, output_path: str, in_bytes: int, work: float):
    values = {"input": input_path, "output": output_path, "input_bytes": in_bytes,
              "work": int(work), "workload": workload, "service": service.name}
    return [tok.format(**values) for tok in template]


def run_pipeline(workload: WorkloadSpec, placement: ServicePlacement, asset: AssetSpec,
                 nodes: Mapping[str, NodeRuntime], handles: Mapping[str, object],
                 stress_state: Optional[Mapping[str, StressState]] = None,
                 rng: Optional[random.Random] = None) -> PipelineResult:
    """Run every service of ``workload`` in order for one asset.

    ``handles`` maps node id to the provisioned environment for this
    workload.  ``stress_state`` maps node id to a stress snapshot; nodes not
    listed use their live state.  Filtering stages draw from ``rng``.
    """
    rng = rng if rng is not None else random.Random(0)
    stress_state = stress_state or {}
    in_bytes = asset.payload_bytes
    prev: Optional[NodeRuntime] = None
    result = PipelineResult([], 0, False)
    input_path = asset.id
    for svc in workload.services:
        node_id = placement.node_for(svc.name)
        node = nodes[node_id]
        st = stress_state.get(node_id)
        try:
            if prev is not None and prev is not node:
                t = transfer(prev, node, in_bytes, Direction.INTER_SERVICE, st)
                result.boundary_transfers.append(t)
                result.steps.append(("transfer", t, svc.name))
            work = svc.work_for(in_bytes)
            command = None
            output_path = f"{svc.name}.out"
            if svc.command and isinstance(node, ExternalNode):
                command = _format_command(svc.command, workload.name, svc, node,
                                          node.path(workload.name, input_path),
                                          node.path(workload.name, output_path), in_bytes, work)
            r = node.exec_task(handles[node_id], work, st, command)
        except ExecFailure as exc:
            raise ExecFailure(node_id, f"workload {workload.name}: {exc}", service=svc.name) from exc
        except TransferFailure as exc:
            raise TransferFailure(f"workload {workload.name}: {exc}", service=svc.name) from exc
        result.exec_results.append(r)
        result.steps.append(("exec", r, svc.name))
        result.last_node = node_id
        in_bytes = svc.output_for(in_bytes)
        input_path = output_path
        prev = node
        if svc.filter_probability < 1.0 and rng.random() >= svc.filter_probability:
            result.dropped = True
            result.final_output_bytes = 0
            return result
    result.final_output_bytes = in_bytes
    return result


class PluginRegistry:
    """Named workloads contributed from descriptor files or dicts.

    A descriptor looks like::

        {"name": "thumbnailer", "type": "BI",
         "services": [{"name": "thumb", "command": ["convert", "{input}", "{output}"],
                       "compute_cost": 3.0, "output_ratio": 0.1}],
         "payloads": [{"id": "photo", "payload_bytes": 250000}],
         "offload_asset": {"service": "thumb", "payload_bytes": 40000},
         "requires_cloud_asset": true}

    Command tokens ``{input}``, ``{output}``, ``{input_bytes}`` and ``{work}``
    are substituted when the service runs on an external node.
    """

    _KEYS = {"name", "type", "services", "payloads", "offload_asset", "requires_cloud_asset",
             "audio_length_seconds", "description"}

    def __init__(self):
        self._plugins: dict[str, WorkloadSpec] = {}
        self._lock = threading.Lock()

    def register(self, descriptor) -> str:
        if isinstance(descriptor, (str, Path)):
            path = Path(descriptor)
            try:
                descriptor = json.loads(path.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise InvalidDescriptor(f"{path}: {exc}") from exc
        spec = self.parse(descriptor)
        with self._lock:
            if spec.name in self._plugins or spec.name in builtin_names() or spec.name in _BUILTIN_NAMES:
                raise DuplicateName(f"workload name {spec.name!r} is already registered")
            self._plugins[spec.name] = spec
        return spec.name

    def parse(self, d) -> WorkloadSpec:
        if not isinstance(d, Mapping):
            raise InvalidDescriptor("descriptor must be a mapping")
        problems = []
        unknown = set(d) - self._KEYS
        if unknown:
            problems.append(f"unknown keys {sorted(unknown)}")
        name = d.get("name")
        if not isinstance(name, str) or not name:
            problems.append("name must be a non-empty string")
        services = []
        for i, s in enumerate(d.get("services") or []):
            try:
                svc = service_from_dict(s)
            except (TypeError, ValueError) as exc:
                problems.append(f"service {i}: {exc}")
                continue
            if not svc.command:
                problems.append(f"service {svc.name}: command is required")
            services.append(svc)
        if not d.get("services"):
            problems.append("services must be non-empty")
        assets = []
        for i, a in enumerate(d.get("payloads") or []):
            try:
                assets.append(asset_from_dict(a, f"payload-{i}"))
            except (TypeError, ValueError, OSError) as exc:
                problems.append(f"payload {i}: {exc}")
        if not d.get("payloads"):
            problems.append("payloads must be non-empty")
        off = d.get("offload_asset")
        if off is not None:
            target = off.get("service") if isinstance(off, Mapping) else None
            names = [s.name for s in services]
            if target not in names:
                problems.append(f"offload_asset.service {target!r} is not one of {names}")
            else:
                services = [replace(s, offload_payload_bytes=int(off.get("payload_bytes", 0)))
                            if s.name == target else s for s in services]
        if problems:
            raise InvalidDescriptor(f"plugin {name!r}: " + "; ".join(problems))
        labels = {"type": str(d["type"])} if "type" in d else {}
        spec = WorkloadSpec(name=name, profile=Profile.CUSTOM, services=tuple(services),
                            assets=tuple(assets),
                            requires_cloud_asset=bool(d.get("requires_cloud_asset", True)),
                            audio_length_seconds=d.get("audio_length_seconds"), labels=labels)
        from .model import _workload_violations

        problems = _workload_violations(spec)
        if problems:
            raise InvalidDescriptor(f"plugin {name!r}: " + "; ".join(problems))
        return spec

    def get(self, name: str) -> WorkloadSpec:
        return self._plugins[name]

    def names(self) -> list[str]:
        return sorted(self._plugins)

    def __contains__(self, name):
        return name in self._plugins

    def clear(self):
        self._plugins.clear()


REGISTRY = PluginRegistry()
_BUILTIN_NAMES = frozenset(w.name for w in _BUILTIN.values())


def register_plugin(descriptor, registry: PluginRegistry = REGISTRY) -> str:
    return registry.register(descriptor)


def builtin_names() -> list[str]:
    return [p.value for p in BUILTIN_PROFILES]


def list_workloads(registry: PluginRegistry = REGISTRY) -> list[tuple[str, str]]:
    """(name, origin) pairs: built-in profiles first, then plugins."""
    out = [(p.value, "builtin") for p in BUILTIN_PROFILES]
    out += [(n, "plugin") for n in registry.names()]
    return out
