"""Remote command transports used by external nodes.

A transport opens a session to a node address and can run an argv, push
bytes to a remote path and pull them back.  Three adapters ship:

``local``
    runs commands with :mod:`subprocess` on this machine.  Useful to
    benchmark the observer itself and for integration tests.
``ssh``
    shells out to the ``ssh`` client; bytes are streamed through
    ``cat`` on the remote side.
``stub``
    in-memory fake with a call log and scripted command results.

Other adapters are loaded from ``"package.module:ClassName"``.
"""

from __future__ import annotations

import importlib
import re
import shlex
import subprocess
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional


@dataclass
class CommandResult:
    exit_code: int
    output: str = ""


class Transport:
    """Adapter interface.  Subclasses override every method."""

    def open(self, address: str):
        raise NotImplementedError

    def exec(self, session, argv: list[str]) -> CommandResult:
        raise NotImplementedError

    def put(self, session, data: bytes, remote_path: str) -> None:
        raise NotImplementedError

    def get(self, session, remote_path: str) -> bytes:
        raise NotImplementedError

    def close(self, session) -> None:
        pass


class LocalTransport(Transport):
    def __init__(self, timeout: Optional[float] = None, **_):
        self.timeout = timeout

    def open(self, address: str):
        return {"address": address}

    def exec(self, session, argv):
        try:
            proc = subprocess.run(argv, capture_output=True, timeout=self.timeout)
        except FileNotFoundError as exc:
            return CommandResult(127, str(exc))
        out = proc.stdout.decode(errors="replace") + proc.stderr.decode(errors="replace")
        return CommandResult(proc.returncode, out)

    def put(self, session, data, remote_path):
        p = Path(remote_path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_bytes(data)

    def get(self, session, remote_path):
        return Path(remote_path).read_bytes()


class SshTransport(Transport):
    def __init__(self, ssh: str = "ssh", extra_args=(), timeout: Optional[float] = None,
                 runner: Callable = subprocess.run, **_):
        self.ssh = ssh
        self.extra_args = list(extra_args)
        self.timeout = timeout
        self.runner = runner

    def _argv(self, address, remote_cmd: str) -> list[str]:
        return [self.ssh, *self.extra_args, address, remote_cmd]

    def open(self, address):
        res = self.runner(self._argv(address, "true"), capture_output=True, timeout=self.timeout)
        if res.returncode != 0:
            raise ConnectionError(f"ssh to {address} failed: {res.stderr!r}")
        return {"address": address}

    def exec(self, session, argv):
        cmd = " ".join(shlex.quote(a) for a in argv)
        res = self.runner(self._argv(session["address"], cmd), capture_output=True, timeout=self.timeout)
        return CommandResult(res.returncode, (res.stdout or b"").decode(errors="replace")
                             + (res.stderr or b"").decode(errors="replace"))

    def put(self, session, data, remote_path):
        q = shlex.quote(remote_path)
        cmd = f"mkdir -p $(dirname {q}) && cat > {q}"
        res = self.runner(self._argv(session["address"], cmd), input=data, capture_output=True,
                          timeout=self.timeout)
        if res.returncode != 0:
            raise OSError(f"put {remote_path} failed: {res.stderr!r}")

    def get(self, session, remote_path):
        res = self.runner(self._argv(session["address"], f"cat {shlex.quote(remote_path)}"),
                          capture_output=True, timeout=self.timeout)
        if res.returncode != 0:
            raise OSError(f"get {remote_path} failed: {res.stderr!r}")
        return res.stdout


_STAGE = re.compile(r"head -c (\d+) /dev/zero > '([^']+)'")


@dataclass
class StubTransport(Transport):
    """In-memory transport for tests.

    ``handlers`` maps the first argv token to a callable returning a
    :class:`CommandResult` (or an exit code).  Unhandled commands succeed
    with empty output, except that a ``head -c N /dev/zero > 'path'``
    staging command creates the file in ``files``.  Every call is appended
    to ``calls``.
    """

    refuse: bool = False
    handlers: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)
    calls: list = field(default_factory=list)

    def __post_init__(self):
        self._lock = threading.Lock()
        self._next_pid = 1000

    def open(self, address):
        self.calls.append(("open", address))
        if self.refuse:
            raise ConnectionRefusedError(f"connection to {address!r} refused")
        return {"address": address}

    def exec(self, session, argv):
        with self._lock:
            self.calls.append(("exec", tuple(argv)))
        handler = self.handlers.get(argv[0])
        if handler is None:
            staged = _STAGE.search(argv[-1]) if argv[0] == "sh" else None
            if staged:
                self.files[staged.group(2)] = bytes(int(staged.group(1)))
            return CommandResult(0, "")
        res = handler(list(argv))
        return res if isinstance(res, CommandResult) else CommandResult(int(res))

    def put(self, session, data, remote_path):
        self.calls.append(("put", remote_path, len(data)))
        self.files[remote_path] = bytes(data)

    def get(self, session, remote_path):
        self.calls.append(("get", remote_path))
        try:
            return self.files[remote_path]
        except KeyError:
            raise FileNotFoundError(remote_path) from None

    def close(self, session):
        self.calls.append(("close", session["address"]))

    def new_pid(self) -> int:
        with self._lock:
            self._next_pid += 1
            return self._next_pid


_ADAPTERS: dict[str, Callable[..., Transport]] = {
    "local": LocalTransport,
    "ssh": SshTransport,
    "stub": StubTransport,
}


def register_transport(name: str, factory: Callable[..., Transport]) -> None:
    _ADAPTERS[name] = factory


def load_transport(adapter: str, options: Optional[dict] = None) -> Transport:
    options = dict(options or {})
    if adapter in _ADAPTERS:
        return _ADAPTERS[adapter](**options)
    if ":" in adapter:
        module, _, attr = adapter.partition(":")
        factory = getattr(importlib.import_module(module), attr)
        return factory(**options)
    raise ValueError(f"unknown transport adapter {adapter!r}")


DEFAULT_STRESS_COMMANDS = {
    "cpu": ["stress", "--cpu", "{count}"],
    "ram": ["stress", "--vm", "{count}"],
    "network": ["curl", "-s", "--limit-rate", "{rate}", "-o", "/dev/null", "--max-filesize", "{file_bytes}", "{url}"],
}


class ShellStressorAdapter:
    """Spawns ``stress``/``stress-ng``-style background processes remotely.

    ``spawn`` wraps the template in ``sh -c '... & echo $!'`` and returns the
    remote pid; ``terminate`` sends ``kill`` to it.
    """

    def __init__(self, transport: Transport, session, commands: Optional[dict] = None,
                 network_url: Optional[str] = None):
        self.transport = transport
        self.session = session
        self.commands = {**DEFAULT_STRESS_COMMANDS, **(commands or {})}
        self.network_url = network_url

    def spawn(self, kind: str, params: dict) -> int:
        template = self.commands.get(kind)
        if template is None:
            raise RuntimeError(f"no stressor command for kind {kind!r}")
        values = {**params, "url": self.network_url or ""}
        if kind == "network" and not self.network_url:
            raise RuntimeError("network stress needs a network_stress_url option")
        argv = [tok.format(**{k: (int(v) if isinstance(v, float) and v.is_integer() else v)
                              for k, v in values.items()}) for tok in template]
        line = " ".join(shlex.quote(a) for a in argv)
        res = self.transport.exec(self.session, ["sh", "-c", f"{line} >/dev/null 2>&1 & echo $!"])
        if res.exit_code != 0:
            raise RuntimeError(f"spawn {kind} exited {res.exit_code}: {res.output.strip()}")
        try:
            return int(res.output.strip().split()[-1])
        except (ValueError, IndexError):
            raise RuntimeError(f"spawn {kind}: no pid in output {res.output!r}") from None

    def terminate(self, pid: int) -> None:
        res = self.transport.exec(self.session, ["kill", str(pid)])
        if res.exit_code != 0:
            raise RuntimeError(f"kill {pid} exited {res.exit_code}: {res.output.strip()}")
