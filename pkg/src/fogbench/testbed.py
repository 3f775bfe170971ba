"""A set of node runtimes plus the result store, and the request path over them.

One request is: asset from the observer to the first service's node (T1),
the service pipeline (ET, including cross-node hand-offs), and results back
to the observer (T3).  :meth:`Testbed.request` returns every step with its
duration so callers can either sum them (one user) or replay them through a
contention model (many users).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .model import AssetSpec, NodeSpec, ResultStoreSpec, RunConfig, ServicePlacement, WorkloadSpec
from .nodes import (OBSERVER, Direction, EnvironmentHandle, ExecResult, ExternalNode, NodeRuntime, ResultStore,
                    TransferResult, make_node, transfer)
from .workloads import PipelineResult, run_pipeline


@dataclass(frozen=True)
class Step:
    component: str  # "t1", "et" or "t3"
    resource: str
    occupancy: float
    latency: float
    result: object


@dataclass
class RequestTrace:
    t1: TransferResult
    pipeline: PipelineResult
    t3: TransferResult
    steps: list = field(default_factory=list)

    @property
    def rtt(self) -> float:
        return self.t1.wall_time + self.pipeline.et + self.t3.wall_time


def _transfer_step(component: str, t: TransferResult) -> Step:
    return Step(component, t.link, t.wall_time - t.latency, t.latency, t)


def _exec_step(r: ExecResult) -> Step:
    return Step("et", f"{r.node_id}/cpu", r.wall_time, 0.0, r)


class Testbed:
    def __init__(self, nodes: Mapping[str, NodeRuntime], result_store: Optional[ResultStore] = None,
                 run_seed: int = 0):
        self.nodes = dict(nodes)
        self.result_store = result_store
        self.run_seed = run_seed

    @classmethod
    def from_config(cls, config: RunConfig, transports: Optional[Mapping] = None,
                    seed: Optional[int] = None) -> "Testbed":
        seed = config.seed if seed is None else seed
        transports = transports or {}
        nodes = {n.id: make_node(n, seed, transports.get(n.id)) for n in config.nodes}
        return cls(nodes, ResultStore(config.result_store, seed), seed)

    @property
    def is_virtual(self) -> bool:
        return all(n.is_virtual for n in self.nodes.values())

    def node(self, node_id: str) -> NodeRuntime:
        return self.nodes[node_id]

    def provision(self, workload: WorkloadSpec, node_ids) -> dict[str, EnvironmentHandle]:
        return {nid: self.nodes[nid].provision(workload) for nid in node_ids}

    def request(self, workload: WorkloadSpec, placement: ServicePlacement, asset: AssetSpec,
                handles: Mapping[str, EnvironmentHandle], rng: random.Random) -> RequestTrace:
        first = self.nodes[placement.node_for(workload.services[0].name)]
        payload = None
        remote = None
        if isinstance(first, ExternalNode):
            payload = asset.materialize()
            remote = first.path(workload.name, asset.id)
        t1 = transfer(OBSERVER, first, asset.payload_bytes, Direction.UP, payload=payload, remote_path=remote)
        pipe = run_pipeline(workload, placement, asset, self.nodes, handles, rng=rng)
        last = self.nodes[pipe.last_node]
        remote = None
        if isinstance(last, ExternalNode) and not pipe.dropped:
            svc = workload.service(pipe.steps[-1][2])
            if svc.command:
                remote = last.path(workload.name, f"{svc.name}.out")
        t3 = transfer(last, OBSERVER, pipe.final_output_bytes, Direction.DOWN, remote_path=remote)
        steps = [_transfer_step("t1", t1)]
        for kind, res, _ in pipe.steps:
            steps.append(_transfer_step("et", res) if kind == "transfer" else _exec_step(res))
        steps.append(_transfer_step("t3", t3))
        return RequestTrace(t1, pipe, t3, steps)

    def upload_results(self, node_id: str, nbytes: int) -> Optional[TransferResult]:
        """T2: push a result of ``nbytes`` from a node to the result store."""
        store = self.result_store
        if store is None or store.spec.kind == "none":
            return None
        node = self.nodes[node_id]
        if isinstance(node, ExternalNode) and store.is_virtual:
            lat = store.spec.latency
            occupy = nbytes / store.spec.bandwidth * (1.0 + store.jitter.draw()) if nbytes else 0.0
            return TransferResult.of(nbytes, lat + occupy, Direction.TO_RESULT_STORE, lat, "result-store")
        return transfer(node, store, nbytes, Direction.TO_RESULT_STORE)

    def active_stress(self) -> list[str]:
        return [nid for nid, n in self.nodes.items() if n.active_stress is not None]

    def close(self):
        for n in self.nodes.values():
            if isinstance(n, ExternalNode):
                n.close()
