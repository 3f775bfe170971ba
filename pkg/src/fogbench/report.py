"""CSV and text outputs of a finished campaign.

Three files per run, all named after ``run_id``:

``<run_id>.csv``
    one row per record, columns in :data:`CSV_COLUMNS` (schema version
    :data:`CSV_SCHEMA_VERSION`).  Absent optional values are empty strings.
    ``stddev_rt`` is the sample (n-1) standard deviation; ``concurrency`` is
    total response time divided by the load session's wall duration.
``<run_id>_agg.csv``
    per-cell mean and sample stddev of every metric.
``<run_id>.txt``
    the human-readable report.
"""

from __future__ import annotations

import csv
import io
import json
import time
from collections import OrderedDict
from pathlib import Path
from typing import Optional

from .config import config_hash, config_snapshot
from .metrics import METRIC_FIELDS, aggregate, identity_violations, mean_and_stddev
from .model import DeploymentMode
from .orchestrator import Record, ResultSet

CSV_SCHEMA_VERSION = 1

KEY_COLUMNS = ("workload", "mode", "placement", "stress", "users", "asset", "repetition")
TIMING_COLUMNS = ("t1", "et", "t2", "t3", "t4")
METRIC_COLUMNS = ("rtt", "cl", "complete_comp", "complete_comm", "cost", "rtf", "bytes_up", "bytes_down",
                  "bytes_down_ce", "rate_up", "rate_down", "rate_down_ce")
LOAD_COLUMNS = ("throughput", "success", "fail", "avg_rt", "stddev_rt", "avg_latency", "concurrency")
CSV_COLUMNS = KEY_COLUMNS + TIMING_COLUMNS + METRIC_COLUMNS + LOAD_COLUMNS + ("ok",)

_INT_COLUMNS = {"users", "repetition", "bytes_up", "bytes_down", "bytes_down_ce", "throughput", "success", "fail"}
_STR_COLUMNS = {"workload", "mode", "placement", "stress", "asset"}


def record_row(r: Record) -> dict:
    k, t, m, ld = r.key, r.timing, r.metrics, r.load
    row = {
        "workload": k.workload, "mode": k.mode.value, "placement": k.placement.label(),
        "stress": k.stress.value, "users": k.users, "asset": k.asset, "repetition": k.repetition,
        "t1": t.t1_flight, "et": t.et_exec, "t2": t.t2_store, "t3": t.t3_results, "t4": t.t4_offload,
        "rtt": m.rtt, "cl": m.communication_latency, "complete_comp": m.complete_computation_latency,
        "complete_comm": m.complete_communication_latency, "cost": m.cost, "rtf": m.rtf,
        "bytes_up": t.bytes_up, "bytes_down": t.bytes_down, "bytes_down_ce": t.bytes_down_cloud_edge,
        "rate_up": m.bytes_up_rate, "rate_down": m.bytes_down_rate, "rate_down_ce": m.bytes_down_cloud_edge_rate,
        "ok": r.success,
    }
    for col in LOAD_COLUMNS:
        row[col] = None
    if ld is not None:
        row.update({
            "throughput": ld.throughput, "success": ld.success_count, "fail": ld.fail_count,
            "avg_rt": ld.avg_response_time, "stddev_rt": ld.stddev_response_time,
            "avg_latency": ld.avg_latency, "concurrency": ld.concurrency,
        })
    return row


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(col: str, text: str):
    if text == "":
        return None
    if col == "ok":
        return text == "true"
    if col in _STR_COLUMNS:
        return text
    if col in _INT_COLUMNS:
        return int(text)
    return float(text)


def render_csv(results: ResultSet) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in results.records:
        row = record_row(r)
        w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def write_csv(results: ResultSet, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_csv(results))
    return path


def read_csv(path) -> list[dict]:
    """Parse a records CSV back into typed row dicts (inverse of ``record_row``)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"{path}: header does not match schema version {CSV_SCHEMA_VERSION}")
        return [{c: _parse(c, v) for c, v in zip(header, line)} for line in reader]


def _cells(results: ResultSet) -> "OrderedDict[tuple, list[Record]]":
    cells: OrderedDict = OrderedDict()
    for r in results.records:
        cells.setdefault(r.key.cell, []).append(r)
    return cells


AGG_KEY_COLUMNS = ("workload", "mode", "placement", "stress", "users")


def cell_aggregates(results: ResultSet):
    """Yield (cell key, records, AggregateMetrics or None) over successful records."""
    for cell, recs in _cells(results).items():
        ok = [r for r in recs if r.success]
        agg = aggregate([r.metrics for r in ok]) if ok else None
        yield cell, recs, agg


def render_agg_csv(results: ResultSet) -> str:
    cols = list(AGG_KEY_COLUMNS) + ["records", "failed"]
    for m in METRIC_FIELDS:
        cols += [f"{m}_mean", f"{m}_stddev"]
    cols += ["t4_mean"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for (wl, mode, placement, stress, users), recs, agg in cell_aggregates(results):
        row = [wl, mode.value, placement.label(), stress.value, users, len(recs),
               sum(1 for r in recs if not r.success)]
        for m in METRIC_FIELDS:
            s = agg[m] if agg else None
            row += [_fmt(s.mean if s else None), _fmt(s.stddev if s else None)]
        ok = [r.timing.t4_offload for r in recs if r.success]
        row.append(_fmt(mean_and_stddev(ok).mean if ok else None))
        w.writerow(row)
    return buf.getvalue()


def write_agg_csv(results: ResultSet, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_agg_csv(results))
    return path


def _pm(stat) -> str:
    return f"{stat.mean:.6f} ± {stat.stddev:.6f}"


def render_verbose(results: ResultSet) -> str:
    out = []
    add = out.append
    add("fogbench report")
    add(f"seed: {results.seed}")
    add(f"csv schema version: {CSV_SCHEMA_VERSION}")
    add(f"records: {len(results.records)} ({len(results.failures)} failed)")
    add("")
    add("== configuration ==")
    add(json.dumps(config_snapshot(results.config_snapshot), indent=2, sort_keys=True))
    add("")
    add("== platform metrics ==")
    for nid in sorted(results.platform):
        m = results.platform[nid]
        add(f"[{nid}]")
        for f in m.FIELDS:
            v = getattr(m, f)
            if v is None:
                add(f"  {f:<14} unavailable ({m.unavailable.get(f, 'not collected')})")
            else:
                add(f"  {f:<14} {v}")
    add("")
    add("== per-cell latency (mean ± sample stddev, seconds) ==")
    best: dict = {}
    load_lines = []
    for (wl, mode, placement, stress, users), recs, agg in cell_aggregates(results):
        head = f"{wl} | {mode.value} | {placement.label()} | stress={stress.value} | users={users}"
        if agg is None:
            add(f"{head}: all {len(recs)} records failed")
            continue
        for r in recs:
            if r.success:
                bad = identity_violations(r.timing, r.metrics)
                if bad:
                    raise AssertionError(f"latency identity broken for {r.key}: {bad}")
        line = f"{head}: n={agg.repetition_count} RTT {_pm(agg['rtt'])}  CL {_pm(agg['communication_latency'])}"
        if mode is DeploymentMode.CLOUD_EDGE:
            line += f"  complete RTT {_pm(agg['complete_computation_latency'])}"
        if agg["rtf"] is not None:
            line += f"  RTF {_pm(agg['rtf'])}"
        add(line)
        if users == 1 and stress.rank == 0:
            cur = best.get(wl, {})
            prev = cur.get(mode)
            if prev is None or agg["rtt"].mean < prev[0]:
                cur[mode] = (agg["rtt"].mean, agg["communication_latency"].mean, placement.label())
            best[wl] = cur
        loads = [r.load for r in recs if r.load is not None]
        if loads:
            avg = mean_and_stddev([ld.avg_response_time for ld in loads])
            conc = mean_and_stddev([ld.concurrency for ld in loads])
            load_lines.append(
                f"{head}: avg response {_pm(avg)}  concurrency {conc.mean:.3f}  "
                f"samples {sum(ld.throughput for ld in loads)}  failed {sum(ld.fail_count for ld in loads)}"
            )
    if load_lines:
        add("")
        add("== concurrent users ==")
        out.extend(load_lines)
    add("")
    add("== deployment mode comparison (unstressed, single user) ==")
    add(f"{'workload':<16}{'mode':<12}{'mean RTT':>14}{'mean CL':>14}  best placement")
    for wl, modes in best.items():
        winner = min(modes, key=lambda m: modes[m][0])
        for mode in DeploymentMode:
            if mode not in modes:
                continue
            rtt, cl, label = modes[mode]
            mark = "  <- min RTT" if mode is winner else ""
            add(f"{wl:<16}{mode.value:<12}{rtt:>14.6f}{cl:>14.6f}  {label}{mark}")
    add("")
    return "\n".join(out)


def write_verbose(results: ResultSet, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_verbose(results))
    return path


def best_modes(results: ResultSet) -> dict[str, DeploymentMode]:
    """Per workload, the mode whose best unstressed single-user cell has the lowest mean RTT."""
    best: dict = {}
    for (wl, mode, _, stress, users), _, agg in cell_aggregates(results):
        if agg is None or users != 1 or stress.rank != 0:
            continue
        cur = best.setdefault(wl, {})
        cur[mode] = min(cur.get(mode, float("inf")), agg["rtt"].mean)
    return {wl: min(modes, key=modes.get) for wl, modes in best.items()}


def make_run_id(results: ResultSet, now: Optional[float] = None) -> str:
    stamp = time.strftime("%Y%m%dT%H%M%S", time.gmtime(now if now is not None else time.time()))
    return f"{config_hash(results.config_snapshot)}-{stamp}"


def write_outputs(results: ResultSet, out_dir, run_id: Optional[str] = None) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = run_id or make_run_id(results)
    rid, n = base, 1
    while (out_dir / f"{rid}.csv").exists():
        n += 1
        rid = f"{base}-{n}"
    return {
        "csv": write_csv(results, out_dir / f"{rid}.csv"),
        "agg": write_agg_csv(results, out_dir / f"{rid}_agg.csv"),
        "txt": write_verbose(results, out_dir / f"{rid}.txt"),
    }
