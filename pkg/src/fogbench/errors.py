"""Exception hierarchy shared by every fogbench module."""

from __future__ import annotations


class FogbenchError(Exception):
    """Base class for all harness errors."""


class ConfigError(FogbenchError):
    """A run configuration could not be parsed or failed validation.

    ``violations`` holds every problem found, not just the first one.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ProvisionFailure(FogbenchError):
    def __init__(self, node_id: str, detail: str):
        self.node_id = node_id
        super().__init__(f"node {node_id}: cannot provision environment: {detail}")


class ExecFailure(FogbenchError):
    def __init__(self, node_id: str, detail: str, service: str | None = None):
        self.node_id = node_id
        self.service = service
        where = f"service {service} on node {node_id}" if service else f"node {node_id}"
        super().__init__(f"{where}: task failed: {detail}")


class TransferFailure(FogbenchError):
    def __init__(self, detail: str, service: str | None = None):
        self.service = service
        prefix = f"service {service}: " if service else ""
        super().__init__(f"{prefix}transfer failed: {detail}")


class ProbeFailure(FogbenchError):
    def __init__(self, node_id: str, metric: str, detail: str):
        self.node_id = node_id
        self.metric = metric
        super().__init__(f"node {node_id}: probe of {metric} failed: {detail}")


class StressAlreadyActive(FogbenchError):
    pass


class AlreadyReleased(FogbenchError):
    pass


class SpawnFailure(FogbenchError):
    pass


class DuplicateName(FogbenchError):
    pass


class InvalidDescriptor(FogbenchError):
    pass


class EmptyLog(FogbenchError):
    pass


class EmptyInput(FogbenchError):
    pass


class HeterogeneousKey(FogbenchError):
    pass
