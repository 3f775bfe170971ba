"""Node runtime: provisioning, task execution, byte transfer and probing.

Two backends sit behind one interface.  :class:`VirtualNode` computes wall
times from its :class:`~fogbench.model.VirtualParams` and a counter-based
jitter stream, so nothing sleeps and results are bit-reproducible.
:class:`ExternalNode` drives a real machine through a
:class:`~fogbench.transport.Transport` and reports measured wall-clock times.
"""

from __future__ import annotations

import hashlib
import io
import random
import re
import threading
import time
import zipfile
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Union

from .errors import ExecFailure, ProbeFailure, ProvisionFailure, TransferFailure
from .model import NodeSpec, ProbeSettings, ResultStoreSpec, TransportParams, VirtualParams, WorkloadSpec
from .stress import NO_STRESS, StressState
from .transport import ShellStressorAdapter, Transport, load_transport


class Direction(str, Enum):
    UP = "up"
    DOWN = "down"
    CLOUD_TO_EDGE = "cloud-to-edge"
    TO_RESULT_STORE = "to-result-store"
    INTER_SERVICE = "inter-service"


class EnvState(str, Enum):
    BUILT = "built"
    RUNNING = "running"
    STOPPED = "stopped"


@dataclass
class EnvironmentHandle:
    node_id: str
    workload_name: str
    state: EnvState = EnvState.BUILT


@dataclass(frozen=True)
class ExecResult:
    node_id: str
    work_units: float
    wall_time: float
    exit_ok: bool = True
    log: str = ""


@dataclass(frozen=True)
class TransferResult:
    bytes: int
    wall_time: float
    rate: float
    direction: Direction
    # Propagation share of wall_time; the rest occupies the link.
    latency: float = 0.0
    link: str = ""

    @classmethod
    def of(cls, nbytes: int, wall_time: float, direction: Direction, latency: float = 0.0, link: str = ""):
        rate = nbytes / wall_time if nbytes > 0 and wall_time > 0 else 0.0
        return cls(nbytes, wall_time, rate, direction, latency, link)


@dataclass
class PlatformMetrics:
    cpu_model: Optional[str] = None
    core_count: Optional[int] = None
    cpu_frequency: Optional[float] = None
    uptime: Optional[float] = None
    unzip_time: Optional[float] = None
    download_rate: Optional[float] = None
    io_read_rate: Optional[float] = None
    io_write_rate: Optional[float] = None
    unavailable: dict = field(default_factory=dict)

    FIELDS = ("cpu_model", "core_count", "cpu_frequency", "uptime", "unzip_time",
              "download_rate", "io_read_rate", "io_write_rate")

    def as_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.FIELDS}


class Observer:
    """The machine driving the benchmark; endpoint of T1 and T3."""

    id = "observer"
    is_virtual = True


OBSERVER = Observer()


def counter_uniform(key: str, counter: int) -> float:
    """Uniform draw in [0, 1) from a keyed counter; pure function of its inputs."""
    digest = hashlib.blake2b(f"{key}#{counter}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big") / 2.0**64


class _JitterStream:
    def __init__(self, key: str, fraction: float):
        self.key = key
        self.fraction = fraction
        self.counter = 0
        self._lock = threading.Lock()

    def draw(self) -> float:
        """Multiplicative jitter in [-fraction, +fraction]."""
        if self.fraction == 0:
            return 0.0
        with self._lock:
            u = counter_uniform(self.key, self.counter)
            self.counter += 1
        return (2.0 * u - 1.0) * self.fraction


class NodeRuntime:
    def __init__(self, spec: NodeSpec):
        self.spec = spec
        self.stress_state: StressState = NO_STRESS
        self.active_stress = None
        self._envs: dict[str, EnvironmentHandle] = {}
        self._lock = threading.RLock()
        self.build_count = 0

    @property
    def id(self) -> str:
        return self.spec.id

    @property
    def is_virtual(self) -> bool:
        return self.spec.is_virtual


class VirtualNode(NodeRuntime):
    def __init__(self, spec: NodeSpec, run_seed: int = 0):
        super().__init__(spec)
        p: VirtualParams = spec.backend
        self.params = p
        self.jitter = _JitterStream(f"{run_seed}:{p.seed}:{spec.id}", p.jitter_fraction)

    def provision(self, workload: WorkloadSpec) -> EnvironmentHandle:
        with self._lock:
            h = self._envs.get(workload.name)
            if h is None or h.state is not EnvState.RUNNING:
                self.build_count += 1
                h = EnvironmentHandle(self.id, workload.name, EnvState.RUNNING)
                self._envs[workload.name] = h
            return h

    def exec_task(self, handle: EnvironmentHandle, work_units: float,
                  stress_state: Optional[StressState] = None, command=None) -> ExecResult:
        _check_running(handle, self.id)
        if work_units < 0:
            raise ValueError("work_units must be >= 0")
        st = self.stress_state if stress_state is None else stress_state
        if work_units == 0:
            return ExecResult(self.id, 0.0, 0.0)
        speed = self.params.compute_speed * st.available_core_fraction
        base = work_units / speed * st.ram_penalty_factor
        return ExecResult(self.id, work_units, base * (1.0 + self.jitter.draw()))


class ExternalNode(NodeRuntime):
    """A real machine reached through a transport adapter.

    Synthetic work with no command runs a portable busy loop of
    ``work_units * burn_iterations_per_work_unit`` iterations.
    """

    def __init__(self, spec: NodeSpec, transport: Optional[Transport] = None):
        super().__init__(spec)
        p: TransportParams = spec.backend
        self.params = p
        opts = dict(p.options)
        self.burn_scale = float(opts.pop("burn_iterations_per_work_unit", 0.01))
        self.stress_commands = opts.pop("stress_commands", None)
        self.network_stress_url = opts.pop("network_stress_url", None)
        self.transport = transport if transport is not None else load_transport(p.adapter, opts)
        self.session = None
        self._stressors: Optional[ShellStressorAdapter] = None

    def _connect(self):
        if self.session is None:
            try:
                self.session = self.transport.open(self.params.address)
            except Exception as exc:
                raise ProvisionFailure(self.id, str(exc)) from exc
        return self.session

    def path(self, *parts: str) -> str:
        return "/".join([self.params.workdir.rstrip("/"), *parts])

    def provision(self, workload: WorkloadSpec) -> EnvironmentHandle:
        with self._lock:
            h = self._envs.get(workload.name)
            if h is not None and h.state is EnvState.RUNNING:
                return h
            session = self._connect()
            try:
                res = self.transport.exec(session, ["mkdir", "-p", self.path(workload.name)])
            except Exception as exc:
                raise ProvisionFailure(self.id, str(exc)) from exc
            if res.exit_code != 0:
                raise ProvisionFailure(self.id, f"exit {res.exit_code}: {res.output.strip()}")
            self.build_count += 1
            h = EnvironmentHandle(self.id, workload.name, EnvState.RUNNING)
            self._envs[workload.name] = h
            return h

    def burn_argv(self, work_units: float) -> list[str]:
        n = int(work_units * self.burn_scale)
        prog = "import sys\nx=0\nfor i in range(int(sys.argv[1])): x=(x*31+i)%1000003"
        return ["python3", "-c", prog, str(n)]

    def exec_task(self, handle: EnvironmentHandle, work_units: float,
                  stress_state: Optional[StressState] = None, command=None) -> ExecResult:
        _check_running(handle, self.id)
        if work_units < 0:
            raise ValueError("work_units must be >= 0")
        argv = list(command) if command else (self.burn_argv(work_units) if work_units > 0 else None)
        if argv is None:
            return ExecResult(self.id, 0.0, 0.0)
        with self._lock:
            t0 = time.perf_counter()
            try:
                res = self.transport.exec(self.session, argv)
            except Exception as exc:
                raise ExecFailure(self.id, str(exc)) from exc
            wall = time.perf_counter() - t0
        if res.exit_code != 0:
            raise ExecFailure(self.id, f"exit {res.exit_code}: {res.output.strip()}")
        return ExecResult(self.id, work_units, wall, True, res.output)

    def run(self, argv: list[str]):
        self._connect()
        return self.transport.exec(self.session, argv)

    def put(self, data: bytes, remote_path: str) -> None:
        self._connect()
        self.transport.put(self.session, data, remote_path)

    def get(self, remote_path: str) -> bytes:
        self._connect()
        return self.transport.get(self.session, remote_path)

    def make_remote_file(self, remote_path: str, nbytes: int) -> None:
        res = self.run(["sh", "-c", f"mkdir -p \"$(dirname '{remote_path}')\" && "
                                     f"head -c {int(nbytes)} /dev/zero > '{remote_path}'"])
        if res.exit_code != 0:
            raise TransferFailure(f"node {self.id}: cannot stage {nbytes} bytes: {res.output.strip()}")

    def _stressor_adapter(self) -> ShellStressorAdapter:
        if self._stressors is None:
            self._connect()
            self._stressors = ShellStressorAdapter(self.transport, self.session, self.stress_commands,
                                                   self.network_stress_url)
        return self._stressors

    def spawn_stressor(self, kind: str, params: dict) -> int:
        return self._stressor_adapter().spawn(kind, params)

    def terminate_stressor(self, pid: int) -> None:
        self._stressor_adapter().terminate(pid)

    def close(self):
        if self.session is not None:
            self.transport.close(self.session)
            self.session = None


def _check_running(handle: EnvironmentHandle, node_id: str) -> None:
    if handle.state is not EnvState.RUNNING:
        raise ExecFailure(node_id, f"environment for {handle.workload_name} is {handle.state.value}, not running")
    if handle.node_id != node_id:
        raise ExecFailure(node_id, f"handle belongs to node {handle.node_id}")


class ResultStore:
    """Byte sink standing in for an object store bucket."""

    id = "result-store"

    def __init__(self, spec: ResultStoreSpec, run_seed: int = 0):
        self.spec = spec
        self.jitter = _JitterStream(f"{run_seed}:{spec.seed}:result-store", spec.jitter_fraction)
        self._n = 0

    @property
    def is_virtual(self) -> bool:
        return self.spec.kind != "directory"

    def write(self, data: bytes) -> float:
        path = Path(self.spec.path)
        path.mkdir(parents=True, exist_ok=True)
        self._n += 1
        t0 = time.perf_counter()
        with open(path / f"result-{self._n:06d}.bin", "wb") as fh:
            fh.write(data)
        return time.perf_counter() - t0


Endpoint = Union[NodeRuntime, Observer, ResultStore]


def make_node(spec: NodeSpec, run_seed: int = 0, transport: Optional[Transport] = None) -> NodeRuntime:
    if spec.is_virtual:
        return VirtualNode(spec, run_seed)
    return ExternalNode(spec, transport)


def provision_environment(node: NodeRuntime, workload: WorkloadSpec) -> EnvironmentHandle:
    return node.provision(workload)


def exec_task(node: NodeRuntime, handle: EnvironmentHandle, work_units: float,
              stress_state: Optional[StressState] = None, command=None) -> ExecResult:
    return node.exec_task(handle, work_units, stress_state, command)


def _virtual_link(src: Endpoint, dst: Endpoint, stress: StressState):
    """(latency, bandwidth, jitter stream, resource key) for a modelled link."""
    if isinstance(src, Observer) and isinstance(dst, VirtualNode):
        p = dst.params
        return p.link_latency, stress.effective_bandwidth(p.uplink_bandwidth), dst.jitter, f"{dst.id}/in"
    if isinstance(src, VirtualNode) and isinstance(dst, Observer):
        p = src.params
        return p.link_latency, stress.effective_bandwidth(p.downlink_bandwidth), src.jitter, f"{src.id}/out"
    if isinstance(src, VirtualNode) and isinstance(dst, VirtualNode):
        lat = src.params.link_latency + dst.params.link_latency
        bw = min(src.params.downlink_bandwidth, dst.params.uplink_bandwidth)
        return lat, stress.effective_bandwidth(bw), dst.jitter, f"{dst.id}/in"
    if isinstance(src, VirtualNode) and isinstance(dst, ResultStore):
        lat = src.params.link_latency + dst.spec.latency
        bw = min(src.params.downlink_bandwidth, dst.spec.bandwidth)
        return lat, stress.effective_bandwidth(bw), dst.jitter, f"{src.id}/out"
    raise TransferFailure(f"no virtual link from {src.id} to {dst.id}")


def _payload(nbytes: int, tag: str) -> bytes:
    return random.Random(f"payload:{tag}:{nbytes}").randbytes(nbytes)


def transfer(src: Endpoint, dst: Endpoint, nbytes: int, direction: Direction,
             stress_state: Optional[StressState] = None, *, payload: Optional[bytes] = None,
             remote_path: Optional[str] = None) -> TransferResult:
    """Move ``nbytes`` from ``src`` to ``dst``.

    Between virtual endpoints the duration is
    ``latency + nbytes / effective_bandwidth * (1 + jitter)``.  When either
    endpoint is an external node the bytes really travel and the wall clock
    is measured.  ``stress_state`` defaults to the stress of whichever
    endpoint node is stressed.
    """
    if nbytes < 0:
        raise ValueError("nbytes must be >= 0")
    if stress_state is None:
        stress_state = _endpoint_stress(src, dst)
    external = [e for e in (src, dst) if isinstance(e, ExternalNode)]
    store_dir = isinstance(dst, ResultStore) and not dst.is_virtual
    if not external and not store_dir:
        lat, bw, jitter, link = _virtual_link(src, dst, stress_state)
        if nbytes == 0:
            return TransferResult.of(0, lat, direction, lat, link)
        occupy = nbytes / bw * (1.0 + jitter.draw())
        return TransferResult.of(nbytes, lat + occupy, direction, lat, link)
    if isinstance(dst, ResultStore) and dst.is_virtual:
        # Real node, modelled store: time the pull, model the upload.
        raise TransferFailure("a virtual result store needs a virtual source node")
    return _measured_transfer(src, dst, nbytes, direction, payload, remote_path)


def _endpoint_stress(src, dst) -> StressState:
    for e in (dst, src):
        if isinstance(e, NodeRuntime) and e.stress_state is not NO_STRESS:
            return e.stress_state
    return NO_STRESS


def _measured_transfer(src, dst, nbytes, direction, payload, remote_path) -> TransferResult:
    tag = remote_path or f"{src.id}-{dst.id}-{direction.value}"
    path = remote_path or f"xfer/{direction.value}-{nbytes}.bin"
    try:
        if isinstance(src, ExternalNode):
            full = path if path.startswith("/") else src.path(path)
            if remote_path is None:
                src.make_remote_file(full, nbytes)
            t0 = time.perf_counter()
            data = src.get(full)
            wall = time.perf_counter() - t0
        else:
            data = payload if payload is not None else _payload(nbytes, tag)
            wall = 0.0
        if isinstance(dst, ExternalNode):
            full = path if path.startswith("/") else dst.path(path)
            t0 = time.perf_counter()
            dst.put(data, full)
            wall += time.perf_counter() - t0
        elif isinstance(dst, ResultStore):
            wall += dst.write(data)
    except TransferFailure:
        raise
    except Exception as exc:
        raise TransferFailure(f"{src.id} -> {dst.id}: {exc}") from exc
    if nbytes > 0 and wall <= 0:
        wall = 1e-9
    return TransferResult.of(len(data), wall, direction, 0.0, f"{src.id}->{dst.id}")


def probe_platform(node: NodeRuntime, settings: ProbeSettings = ProbeSettings(), strict: bool = False) -> PlatformMetrics:
    """Collect the platform metric block for one node.

    Metrics that cannot be obtained are left ``None`` with a reason in
    ``unavailable``; ``strict=True`` raises :class:`ProbeFailure` instead.
    """
    if isinstance(node, VirtualNode):
        m = _probe_virtual(node, settings)
    else:
        m = _probe_external(node, settings)
    if strict and m.unavailable:
        metric, reason = next(iter(m.unavailable.items()))
        raise ProbeFailure(node.id, metric, reason)
    return m


def _probe_virtual(node: VirtualNode, settings: ProbeSettings) -> PlatformMetrics:
    p = node.params
    env = node.provision(_PROBE_WORKLOAD)
    unzip = node.exec_task(env, settings.archive_bytes * p.unzip_work_per_byte)
    dl = transfer(OBSERVER, node, settings.download_bytes, Direction.DOWN)
    return PlatformMetrics(
        cpu_model=p.cpu_model,
        core_count=p.core_count,
        cpu_frequency=p.cpu_frequency,
        uptime=p.uptime,
        unzip_time=unzip.wall_time,
        download_rate=dl.rate,
        io_read_rate=p.io_read_rate,
        io_write_rate=p.io_write_rate,
    )


def _probe_external(node: ExternalNode, settings: ProbeSettings) -> PlatformMetrics:
    m = PlatformMetrics()

    def attempt(metric, fn):
        try:
            fn()
        except Exception as exc:
            m.unavailable[metric] = str(exc) or type(exc).__name__

    def ok(argv):
        res = node.run(argv)
        if res.exit_code != 0:
            raise RuntimeError(f"{argv[0]} exited {res.exit_code}")
        return res.output

    try:
        node._connect()
    except ProvisionFailure as exc:
        for f in PlatformMetrics.FIELDS:
            m.unavailable[f] = str(exc)
        return m

    cpuinfo = {}

    def read_cpuinfo():
        cpuinfo["text"] = ok(["cat", "/proc/cpuinfo"])

    attempt("cpu_model", read_cpuinfo)

    def cpu_model():
        match = re.search(r"^(model name|Model|Hardware)\s*:\s*(.+)$", cpuinfo["text"], re.M)
        if not match:
            raise RuntimeError("no model name in /proc/cpuinfo")
        m.cpu_model = match.group(2).strip()

    if "text" in cpuinfo:
        attempt("cpu_model", cpu_model)

    def cores():
        m.core_count = int(ok(["nproc"]).strip())

    attempt("core_count", cores)

    def freq():
        out = ok(["cat", "/sys/devices/system/cpu/cpu0/cpufreq/cpuinfo_max_freq"]).strip()
        m.cpu_frequency = float(out) * 1e3

    def freq_fallback():
        match = re.search(r"^cpu MHz\s*:\s*([\d.]+)", cpuinfo.get("text", ""), re.M)
        if not match:
            raise RuntimeError("cpu frequency not exposed")
        m.cpu_frequency = float(match.group(1)) * 1e6

    try:
        freq()
    except Exception:
        attempt("cpu_frequency", freq_fallback)

    def uptime():
        m.uptime = float(ok(["cat", "/proc/uptime"]).split()[0])

    attempt("uptime", uptime)

    probe_dir = node.path("probe")

    def unzip():
        buf = io.BytesIO()
        with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
            zf.writestr("weights.bin", _payload(settings.archive_bytes, "probe-archive"))
        archive = f"{probe_dir}/reference.zip"
        node.put(buf.getvalue(), archive)
        t0 = time.perf_counter()
        res = node.run(["unzip", "-o", "-q", archive, "-d", f"{probe_dir}/unzipped"])
        if res.exit_code != 0:
            res = node.run(["python3", "-m", "zipfile", "-e", archive, f"{probe_dir}/unzipped"])
        if res.exit_code != 0:
            raise RuntimeError(f"unzip exited {res.exit_code}")
        m.unzip_time = time.perf_counter() - t0

    attempt("unzip_time", unzip)

    def download():
        r = transfer(OBSERVER, node, settings.download_bytes, Direction.DOWN,
                     remote_path=f"{probe_dir}/download.bin")
        m.download_rate = r.rate

    attempt("download_rate", download)

    io_file = f"{probe_dir}/io.bin"
    mib = max(1, settings.io_bytes // (1024 * 1024))

    def io_write():
        t0 = time.perf_counter()
        ok(["dd", "if=/dev/zero", f"of={io_file}", "bs=1048576", f"count={mib}", "conv=fsync"])
        m.io_write_rate = mib * 1048576 / max(time.perf_counter() - t0, 1e-9)

    def io_read():
        t0 = time.perf_counter()
        ok(["dd", f"if={io_file}", "of=/dev/null", "bs=1048576"])
        m.io_read_rate = mib * 1048576 / max(time.perf_counter() - t0, 1e-9)

    attempt("io_write_rate", io_write)
    attempt("io_read_rate", io_read)
    return m


_PROBE_WORKLOAD = WorkloadSpec(name="__probe__", profile=None, services=(), assets=())
