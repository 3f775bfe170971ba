"""Named stress levels, their stressor sets, and applying them to nodes.

On virtual nodes stress is a degradation model: stressed cores shrink the
fraction of the CPU a task gets, RAM stressors add a fixed penalty each, and
a network throttle caps link bandwidth.  On external nodes the same sets are
realised as background processes spawned through the node's transport.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

MiB = 1024 * 1024

# A fully stressed node still gets this many cores' worth of CPU.
CORE_FLOOR = 0.25

NETWORK_THROTTLE_RATE = 21740
NETWORK_THROTTLE_FILE_BYTES = 256 * MiB


class StressLevel(str, Enum):
    NONE = "none"
    MINIMAL = "minimal"
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    VERY_HIGH = "very-high"

    @property
    def rank(self) -> int:
        return _ORDER.index(self)

    def __lt__(self, other):
        if not isinstance(other, StressLevel):
            return NotImplemented
        return self.rank < other.rank

    def __le__(self, other):
        if not isinstance(other, StressLevel):
            return NotImplemented
        return self.rank <= other.rank

    def __gt__(self, other):
        if not isinstance(other, StressLevel):
            return NotImplemented
        return self.rank > other.rank

    def __ge__(self, other):
        if not isinstance(other, StressLevel):
            return NotImplemented
        return self.rank >= other.rank


_ORDER = list(StressLevel)


@dataclass(frozen=True)
class NetworkThrottle:
    file_bytes: int
    rate: float


@dataclass(frozen=True)
class StressorSet:
    cpu_cores_stressed: int = 0
    ram_stressor_count: int = 0
    network_throttle: Optional[NetworkThrottle] = None

    @property
    def is_idle(self) -> bool:
        return self.cpu_cores_stressed == 0 and self.ram_stressor_count == 0 and self.network_throttle is None


def stress_profile(level: StressLevel, node_core_count: int) -> StressorSet:
    if node_core_count < 1:
        raise ValueError("node_core_count must be >= 1")
    level = StressLevel(level)
    if level is StressLevel.NONE:
        return StressorSet()
    if level is StressLevel.MINIMAL:
        return StressorSet(
            cpu_cores_stressed=1,
            network_throttle=NetworkThrottle(NETWORK_THROTTLE_FILE_BYTES, NETWORK_THROTTLE_RATE),
        )
    if level is StressLevel.LOW:
        return StressorSet(cpu_cores_stressed=2)
    if level is StressLevel.MEDIUM:
        return StressorSet(cpu_cores_stressed=3)
    if level is StressLevel.HIGH:
        return StressorSet(cpu_cores_stressed=4)
    return StressorSet(cpu_cores_stressed=node_core_count, ram_stressor_count=2)


def available_core_fraction(core_count: int, stressed: int) -> float:
    return max(core_count - stressed, CORE_FLOOR) / core_count


@dataclass(frozen=True)
class StressState:
    """Snapshot of the stress active on one node."""

    stressors: StressorSet = StressorSet()
    available_core_fraction: float = 1.0
    bandwidth_fraction: float = 1.0
    throttle_rate: Optional[float] = None
    ram_penalty_factor: float = 1.0

    def effective_bandwidth(self, bandwidth: float) -> float:
        if self.throttle_rate is None:
            return bandwidth
        return bandwidth * min(1.0, self.throttle_rate / bandwidth)


NO_STRESS = StressState()


def virtual_stress_state(stressors: StressorSet, core_count: int, bandwidth: float,
                         ram_penalty: float = 0.10) -> StressState:
    throttle = stressors.network_throttle
    return StressState(
        stressors=stressors,
        available_core_fraction=available_core_fraction(core_count, stressors.cpu_cores_stressed),
        bandwidth_fraction=min(1.0, throttle.rate / bandwidth) if throttle else 1.0,
        throttle_rate=throttle.rate if throttle else None,
        ram_penalty_factor=1.0 + ram_penalty * stressors.ram_stressor_count,
    )


@dataclass
class StressHandle:
    node: object
    stressors: StressorSet
    process_ids: list = field(default_factory=list)
    released: bool = False


_lock = threading.Lock()


def apply_stress(node, stressors: StressorSet) -> StressHandle:
    """Activate ``stressors`` on a node runtime and return the handle to release.

    The node must expose ``spec``, ``stress_state``, ``active_stress`` and,
    for external nodes, ``spawn_stressor``/``terminate_stressor``.
    """
    from .errors import SpawnFailure, StressAlreadyActive

    with _lock:
        if node.active_stress is not None:
            raise StressAlreadyActive(f"node {node.spec.id} already has stress applied")
        handle = StressHandle(node=node, stressors=stressors)
        if node.spec.is_virtual:
            p = node.spec.backend
            node.stress_state = virtual_stress_state(
                stressors, p.core_count, p.uplink_bandwidth, p.ram_stress_penalty
            )
        else:
            try:
                if stressors.cpu_cores_stressed:
                    handle.process_ids.append(node.spawn_stressor("cpu", {"count": stressors.cpu_cores_stressed}))
                if stressors.ram_stressor_count:
                    handle.process_ids.append(node.spawn_stressor("ram", {"count": stressors.ram_stressor_count}))
                if stressors.network_throttle:
                    t = stressors.network_throttle
                    handle.process_ids.append(
                        node.spawn_stressor("network", {"file_bytes": t.file_bytes, "rate": t.rate})
                    )
            except Exception as exc:
                for pid in handle.process_ids:
                    try:
                        node.terminate_stressor(pid)
                    except Exception:
                        pass
                raise SpawnFailure(f"node {node.spec.id}: {exc}") from exc
            node.stress_state = StressState(stressors=stressors)
        node.active_stress = handle
        return handle


def release_stress(handle: StressHandle) -> None:
    from .errors import AlreadyReleased

    with _lock:
        if handle.released:
            raise AlreadyReleased(f"stress on node {handle.node.spec.id} already released")
        node = handle.node
        errors = []
        for pid in handle.process_ids:
            try:
                node.terminate_stressor(pid)
            except Exception as exc:  # keep reaping the rest
                errors.append(exc)
        handle.released = True
        node.stress_state = NO_STRESS
        node.active_stress = None
    if errors:
        raise errors[0]
