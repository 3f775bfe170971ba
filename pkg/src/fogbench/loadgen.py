"""Closed-loop concurrent users and their summary statistics.

Each simulated user sends a request, waits for the response, thinks, and
repeats.  On an all-virtual testbed the users are replayed on a logical
clock: every CPU and link is a FIFO server, so requests queue behind each
other exactly as they would on a node that runs one task at a time.  On
real nodes the users are threads and latency is wall-clock time.
"""

from __future__ import annotations

import heapq
import random
import statistics
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import EmptyLog, ExecFailure, FogbenchError, TransferFailure
from .model import AssetSpec, ServicePlacement, WorkloadSpec


@dataclass(frozen=True)
class LoadTarget:
    workload: WorkloadSpec
    placement: ServicePlacement
    asset: AssetSpec


@dataclass(frozen=True)
class LoadProfile:
    user_count: int
    target: LoadTarget
    requests_per_user: Optional[int] = None
    duration: Optional[float] = None
    think_time: float = 0.0

    def __post_init__(self):
        if self.user_count < 1:
            raise ValueError("user_count must be >= 1")
        if (self.requests_per_user is None) == (self.duration is None):
            raise ValueError("set exactly one of requests_per_user / duration")
        if self.requests_per_user is not None and self.requests_per_user < 1:
            raise ValueError("requests_per_user must be >= 1")
        if self.think_time < 0:
            raise ValueError("think_time must be >= 0")


@dataclass
class RequestRecord:
    user_id: int
    seq: int
    start: float
    latency: float
    success: bool
    t1: float = 0.0
    et: float = 0.0
    t3: float = 0.0
    bytes_up: int = 0
    bytes_down: int = 0
    error: str = ""


@dataclass(frozen=True)
class LoadSummary:
    concurrency: float
    throughput: int
    success_count: int
    fail_count: int
    avg_response_time: float
    stddev_response_time: float
    avg_latency: float


def summarize(records, wall_duration: float) -> LoadSummary:
    if not records:
        raise EmptyLog("no request records to summarize")
    lat = [r.latency for r in records]
    ok = sum(1 for r in records if r.success)
    avg = statistics.fmean(lat)
    sd = statistics.stdev(lat) if len(lat) > 1 else 0.0
    conc = sum(lat) / wall_duration if wall_duration > 0 else 0.0
    return LoadSummary(
        concurrency=conc,
        throughput=len(records),
        success_count=ok,
        fail_count=len(records) - ok,
        avg_response_time=avg,
        stddev_response_time=sd,
        avg_latency=avg,
    )


def wall_duration(records) -> float:
    """Span from the first request start to the last response."""
    return max(r.start + r.latency for r in records) - min(r.start for r in records)


def _rng_for(seed_key: str, user: int, seq: int) -> random.Random:
    return random.Random(f"{seed_key}:u{user}:r{seq}")


def run_load(profile: LoadProfile, testbed, handles, seed_key: str = "load",
             on_event: Optional[Callable[[float, dict], None]] = None) -> list[RequestRecord]:
    """Drive ``profile.user_count`` closed-loop users against ``profile.target``.

    ``handles`` are the provisioned environments (node id -> handle).
    ``on_event`` (virtual testbeds only) is called after every scheduling
    event with the logical time and a count of users per state.
    """
    if testbed.is_virtual:
        return _run_virtual(profile, testbed, handles, seed_key, on_event)
    return _run_threads(profile, testbed, handles, seed_key)


_START, _STEP = 0, 1


def _run_virtual(profile, testbed, handles, seed_key, on_event):
    tgt = profile.target
    free_at: dict[str, float] = {}
    events: list = []
    tie = 0
    records: list[RequestRecord] = []
    state = {u: "thinking" for u in range(profile.user_count)}
    # per-user in-progress request: [trace, step index, start, component end times]
    active: dict[int, list] = {}

    def push(t, kind, user, seq):
        nonlocal tie
        heapq.heappush(events, (t, tie, kind, user, seq))
        tie += 1

    for u in range(profile.user_count):
        push(0.0, _START, u, 0)

    def more(seq, t):
        if profile.requests_per_user is not None:
            return seq < profile.requests_per_user
        return t < profile.duration

    while events:
        t, _, kind, user, seq = heapq.heappop(events)
        if kind == _START:
            try:
                trace = testbed.request(tgt.workload, tgt.placement, tgt.asset, handles,
                                        _rng_for(seed_key, user, seq))
            except (ExecFailure, TransferFailure) as exc:
                records.append(RequestRecord(user, seq, t, 0.0, False, error=str(exc)))
                state[user] = "thinking"
                if more(seq + 1, t + profile.think_time):
                    push(t + profile.think_time, _START, user, seq + 1)
                else:
                    state[user] = "done"
                continue
            active[user] = [trace, 0, t, {}]
        trace, idx, start, ends = active[user]
        step = trace.steps[idx]
        begin = max(t, free_at.get(step.resource, 0.0))
        state[user] = "queued" if begin > t else "in_flight"
        finish = begin + step.occupancy
        free_at[step.resource] = finish
        done_at = finish + step.latency
        ends[step.component] = done_at
        if idx + 1 < len(trace.steps):
            active[user][1] = idx + 1
            push(done_at, _STEP, user, seq)
        else:
            t1_end = ends["t1"]
            et_end = ends.get("et", t1_end)
            records.append(RequestRecord(
                user, seq, start, done_at - start, True,
                t1=t1_end - start, et=et_end - t1_end, t3=done_at - et_end,
                bytes_up=trace.t1.bytes, bytes_down=trace.t3.bytes,
            ))
            del active[user]
            nxt = done_at + profile.think_time
            if more(seq + 1, nxt):
                state[user] = "thinking"
                push(nxt, _START, user, seq + 1)
            else:
                state[user] = "done"
        if on_event is not None:
            counts = {"in_flight": 0, "queued": 0, "thinking": 0, "done": 0}
            for s in state.values():
                counts[s] += 1
            on_event(t, counts)
    records.sort(key=lambda r: (r.start, r.user_id, r.seq))
    return records


def _run_threads(profile, testbed, handles, seed_key):
    tgt = profile.target
    records: list[RequestRecord] = []
    lock = threading.Lock()
    t0 = time.perf_counter()

    def user_loop(user):
        seq = 0
        while True:
            now = time.perf_counter() - t0
            if profile.requests_per_user is not None and seq >= profile.requests_per_user:
                return
            if profile.duration is not None and now >= profile.duration:
                return
            try:
                trace = testbed.request(tgt.workload, tgt.placement, tgt.asset, handles,
                                        _rng_for(seed_key, user, seq))
                end = time.perf_counter() - t0
                rec = RequestRecord(user, seq, now, end - now, True, trace.t1.wall_time,
                                    trace.pipeline.et, trace.t3.wall_time, trace.t1.bytes, trace.t3.bytes)
            except FogbenchError as exc:
                end = time.perf_counter() - t0
                rec = RequestRecord(user, seq, now, end - now, False, error=str(exc))
            with lock:
                records.append(rec)
            seq += 1
            if profile.think_time:
                time.sleep(profile.think_time)

    with ThreadPoolExecutor(max_workers=profile.user_count) as pool:
        list(pool.map(user_loop, range(profile.user_count)))
    records.sort(key=lambda r: (r.start, r.user_id, r.seq))
    return records
