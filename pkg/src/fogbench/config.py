"""Reading a RunConfig from JSON, and writing a normalised snapshot back out.

Unknown keys anywhere in the file are errors, so a typo never silently falls
back to a default.  All problems found are reported together.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from enum import Enum
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError, DuplicateName, InvalidDescriptor
from .model import (DEFAULT_SEED, DeploymentMode, LoadSettings, NodeSpec, ProbeSettings, Profile, ResultStoreSpec,
                    RunConfig, ServicePlacement, Tier, TransportParams, VirtualParams)
from .stress import StressLevel
from .workloads import REGISTRY, PluginRegistry, make_profile

_MODE_ALIASES = {
    "cloud-only": DeploymentMode.CLOUD_ONLY, "cloudonly": DeploymentMode.CLOUD_ONLY,
    "edge-only": DeploymentMode.EDGE_ONLY, "edgeonly": DeploymentMode.EDGE_ONLY,
    "cloud-edge": DeploymentMode.CLOUD_EDGE, "cloudedge": DeploymentMode.CLOUD_EDGE, "fog": DeploymentMode.CLOUD_EDGE,
}

_TOP_KEYS = {"nodes", "workloads", "modes", "placements", "repetitions", "stress_levels", "user_counts",
             "result_store", "cost_rate_per_hour", "output_dir", "seed", "load", "probe", "stress_targets",
             "plugins"}


def parse_mode(text: str) -> DeploymentMode:
    key = str(text).strip().lower().replace("_", "-")
    if key in _MODE_ALIASES:
        return _MODE_ALIASES[key]
    if key.replace("-", "") in _MODE_ALIASES:
        return _MODE_ALIASES[key.replace("-", "")]
    raise ValueError(f"unknown deployment mode {text!r}")


def parse_level(text: str) -> StressLevel:
    key = str(text).strip().lower().replace("_", "-")
    if key == "veryhigh":
        key = "very-high"
    return StressLevel(key)


class _Errors(list):
    def keys(self, where: str, d: Any, allowed: set, required: set = frozenset()) -> bool:
        if not isinstance(d, Mapping):
            self.append(f"{where}: expected an object")
            return False
        for k in sorted(set(d) - allowed):
            self.append(f"{where}: unknown key {k!r}")
        for k in sorted(required - set(d)):
            self.append(f"{where}: missing key {k!r}")
        return not (set(d) - allowed) and not (required - set(d))


def _fields(cls) -> set:
    return {f.name for f in dataclasses.fields(cls)}


def _node(d, i, errs: _Errors):
    where = f"nodes[{i}]"
    if not errs.keys(where, d, {"id", "tier", "virtual", "external", "labels"}, {"id", "tier"}):
        return None
    try:
        tier = Tier(str(d["tier"]).lower())
    except ValueError:
        errs.append(f"{where}: tier must be 'cloud' or 'edge'")
        return None
    if ("virtual" in d) == ("external" in d):
        errs.append(f"{where}: exactly one of 'virtual' / 'external' is required")
        return None
    if "virtual" in d:
        if not errs.keys(f"{where}.virtual", d["virtual"], _fields(VirtualParams),
                         {"compute_speed", "uplink_bandwidth", "downlink_bandwidth"}):
            return None
        backend = VirtualParams(**d["virtual"])
    else:
        if not errs.keys(f"{where}.external", d["external"], _fields(TransportParams), {"adapter"}):
            return None
        backend = TransportParams(**d["external"])
    return NodeSpec(str(d["id"]), tier, backend, dict(d.get("labels", {})))


def _workload(d, i, errs: _Errors, registry: PluginRegistry, base_dir: Path):
    where = f"workloads[{i}]"
    if not isinstance(d, Mapping):
        errs.append(f"{where}: expected an object")
        return None, None
    modes = None
    if "modes" in d:
        try:
            modes = frozenset(parse_mode(m) for m in d["modes"])
        except ValueError as exc:
            errs.append(f"{where}: {exc}")
    if "plugin" in d:
        errs.keys(where, d, {"plugin", "modes"})
        ref = str(d["plugin"])
        path = base_dir / ref
        try:
            if ref not in registry and (ref.endswith(".json") or path.is_file()):
                spec = registry.parse(json.loads(path.read_text()))
                if spec.name not in registry:
                    registry.register(json.loads(path.read_text()))
                ref = spec.name
            return registry.get(ref), modes
        except KeyError:
            errs.append(f"{where}: no registered plugin named {ref!r}")
        except (OSError, json.JSONDecodeError, InvalidDescriptor, DuplicateName) as exc:
            errs.append(f"{where}: {exc}")
        return None, modes
    overrides = {k: v for k, v in d.items() if k not in ("profile", "modes")}
    if "profile" not in d:
        errs.append(f"{where}: missing key 'profile' (or 'plugin')")
        return None, modes
    try:
        profile = Profile(d["profile"])
        if "assets" in overrides:
            overrides["assets"] = [
                {**a, "file": str(base_dir / a["file"])} if isinstance(a, Mapping) and "file" in a else a
                for a in overrides["assets"]
            ]
        return make_profile(profile, overrides), modes
    except (ValueError, TypeError, OSError) as exc:
        errs.append(f"{where}: {exc}")
        return None, modes


def run_config_from_dict(d: Mapping, base_dir: Path = Path("."), registry: PluginRegistry = REGISTRY) -> RunConfig:
    errs = _Errors()
    if not isinstance(d, Mapping):
        raise ConfigError("config: expected a JSON object at top level")
    errs.keys("config", d, _TOP_KEYS, {"nodes", "workloads", "modes"})

    for p in d.get("plugins", []):
        try:
            path = base_dir / p
            spec = registry.parse(json.loads(path.read_text()))
            if spec.name not in registry:
                registry.register(json.loads(path.read_text()))
        except (OSError, json.JSONDecodeError, InvalidDescriptor, DuplicateName) as exc:
            errs.append(f"plugins: {p}: {exc}")

    nodes = [n for i, raw in enumerate(d.get("nodes", [])) if (n := _node(raw, i, errs)) is not None]
    workloads, workload_modes = [], {}
    for i, raw in enumerate(d.get("workloads", [])):
        w, modes = _workload(raw, i, errs, registry, base_dir)
        if w is not None:
            workloads.append(w)
            if modes is not None:
                workload_modes[w.name] = modes

    modes = set()
    for m in d.get("modes", []):
        try:
            modes.add(parse_mode(m))
        except ValueError as exc:
            errs.append(f"modes: {exc}")

    placements = []
    for i, p in enumerate(d.get("placements", [])):
        if not errs.keys(f"placements[{i}]", p, {"workload", "services"}, {"workload", "services"}):
            continue
        wname = p["workload"]
        order = None
        for w in workloads:
            if w.name == wname:
                order = [s for s in w.service_names if s in p["services"]] + [
                    s for s in p["services"] if s not in w.service_names]
        placements.append((wname, ServicePlacement.of(p["services"], order)))

    levels = []
    for lv in d.get("stress_levels", ["none"]):
        try:
            levels.append(parse_level(lv))
        except ValueError:
            errs.append(f"stress_levels: unknown level {lv!r}")

    targets = set()
    for t in d.get("stress_targets", ["edge"]):
        try:
            targets.add(Tier(str(t).lower()))
        except ValueError:
            errs.append(f"stress_targets: unknown tier {t!r}")

    def section(key, cls):
        raw = d.get(key)
        if raw is None:
            return cls()
        if errs.keys(key, raw, _fields(cls)):
            return cls(**raw)
        return cls()

    result_store = section("result_store", ResultStoreSpec)
    load = d.get("load")
    if isinstance(load, Mapping) and "duration" in load and "requests_per_user" not in load:
        load = {**load, "requests_per_user": None}
    load_settings = LoadSettings()
    if load is not None and errs.keys("load", load, _fields(LoadSettings)):
        load_settings = LoadSettings(**load)
    probe = section("probe", ProbeSettings)

    if errs:
        raise ConfigError(list(errs))
    return RunConfig(
        nodes=tuple(nodes),
        workloads=tuple(workloads),
        modes=frozenset(modes),
        placements=tuple(placements),
        repetitions=d.get("repetitions", 25),
        stress_levels=tuple(levels),
        user_counts=tuple(d.get("user_counts", [1])),
        result_store=result_store,
        cost_rate_per_hour=d.get("cost_rate_per_hour", 0.0),
        output_dir=str(d.get("output_dir", "results")),
        seed=d.get("seed", DEFAULT_SEED),
        load=load_settings,
        probe=probe,
        stress_targets=frozenset(targets),
        workload_modes=workload_modes,
    )


def load_run_config(path, registry: PluginRegistry = REGISTRY) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return run_config_from_dict(raw, path.parent, registry)


def _plain(obj):
    if isinstance(obj, Enum):
        return obj.value
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Mapping):
        return {str(_plain(k)): _plain(v) for k, v in sorted(obj.items(), key=lambda kv: str(_plain(kv[0])))}
    if isinstance(obj, (frozenset, set)):
        return sorted(_plain(x) for x in obj)
    if isinstance(obj, (list, tuple)):
        return [_plain(x) for x in obj]
    return obj


def config_snapshot(config) -> dict:
    """Fully expanded, JSON-serialisable view of a (validated) config.

    ``output_dir`` is left out: where results land does not change them.
    """
    cfg = getattr(config, "config", config)
    out = _plain(cfg)
    out.pop("output_dir", None)
    out["placements"] = [{"workload": w, "placement": p.label()} for w, p in cfg.placements]
    return out


def config_hash(config) -> str:
    text = json.dumps(config_snapshot(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:12]
