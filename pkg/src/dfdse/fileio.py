"""Input documents and result files.

Applications and architectures are YAML documents. An application lists
actors with per-core-type tick times and channels with producer,
consumer list, delay, capacity, and token bytes. An architecture lists
core types with costs, tiles with their typed cores, memory capacities,
and interconnect bandwidths in bytes per second; bandwidths are converted
to exact bytes per tick using the configured tick length.

Result files avoid wall-clock data on purpose: two runs with the same
configuration and seed must serialize byte for byte identically.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Any

import yaml

from .binding import Task
from .caps_hms import Schedule, f_wrap
from .model import (
    Actor,
    ApplicationGraph,
    ArchitectureGraph,
    Channel,
    make_application,
    make_architecture,
)

DEFAULT_TICK_US = Fraction(1)


class InputFormatError(ValueError):
    """The document is syntactically valid YAML but violates the schema."""


def _require(mapping: dict, key: str, context: str) -> Any:
    if key not in mapping:
        raise InputFormatError(f"{context}: missing required field {key!r}")
    return mapping[key]


def load_application(path: str | Path) -> ApplicationGraph:
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise InputFormatError(f"{path}: application document must be a mapping")
    actors = []
    for entry in _require(raw, "actors", str(path)):
        exec_times = {
            str(k): int(v) for k, v in _require(entry, "exec_times", "actor").items()
        }
        actors.append(Actor(id=str(_require(entry, "id", "actor")), exec_times=exec_times))
    channels = []
    writes = []
    reads = []
    for entry in _require(raw, "channels", str(path)):
        cid = str(_require(entry, "id", "channel"))
        channels.append(
            Channel(
                id=cid,
                delay=int(entry.get("delay", 0)),
                capacity=int(_require(entry, "capacity", f"channel {cid}")),
                token_size=int(_require(entry, "token_bytes", f"channel {cid}")),
                is_mrb=bool(entry.get("is_mrb", False)),
            )
        )
        writes.append((str(_require(entry, "producer", f"channel {cid}")), cid))
        consumers = _require(entry, "consumers", f"channel {cid}")
        if not isinstance(consumers, list):
            raise InputFormatError(f"channel {cid}: consumers must be a list")
        for consumer in consumers:
            reads.append((cid, str(consumer)))
    return make_application(actors, channels, writes, reads)


def dump_application(app: ApplicationGraph, path: str | Path) -> None:
    doc = {
        "actors": [
            {"id": aid, "exec_times": dict(sorted(app.actors[aid].exec_times.items()))}
            for aid in app.actor_ids()
        ],
        "channels": [
            {
                "id": cid,
                "producer": app.producer_of(cid),
                "consumers": app.consumers_of(cid),
                "delay": app.channels[cid].delay,
                "capacity": app.channels[cid].capacity,
                "token_bytes": app.channels[cid].token_size,
                "is_mrb": app.channels[cid].is_mrb,
            }
            for cid in app.channel_ids()
        ],
    }
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False), encoding="utf-8")


def bytes_per_tick(bytes_per_second: int | float, tick_us: Fraction) -> Fraction:
    """Exact bandwidth conversion: bytes/s times tick length in seconds."""
    return Fraction(bytes_per_second) * tick_us / Fraction(1_000_000)


def load_architecture(path: str | Path, tick_us: Fraction = DEFAULT_TICK_US) -> ArchitectureGraph:
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise InputFormatError(f"{path}: architecture document must be a mapping")
    core_types = {
        str(_require(t, "id", "core type")): float(_require(t, "cost", "core type"))
        for t in _require(raw, "core_types", str(path))
    }
    defaults = raw.get("defaults", {})
    core_mem = int(_require(defaults, "core_memory_bytes", "defaults"))
    tile_mem = int(_require(defaults, "tile_memory_bytes", "defaults"))
    crossbar_bw = _require(defaults, "crossbar_bandwidth", "defaults")
    noc_bw = _require(raw, "noc_bandwidth", str(path))
    tiles = []
    for tile in _require(raw, "tiles", str(path)):
        tile_id = str(_require(tile, "id", "tile"))
        cores = [
            (str(_require(c, "id", f"tile {tile_id} core")), str(_require(c, "type", "core")))
            for c in _require(tile, "cores", f"tile {tile_id}")
        ]
        tiles.append((tile_id, cores))
    arch = make_architecture(
        core_types=core_types,
        tiles=tiles,
        core_memory_bytes=core_mem,
        tile_memory_bytes=tile_mem,
        crossbar_bytes_per_tick=bytes_per_tick(crossbar_bw, tick_us),
        noc_bytes_per_tick=bytes_per_tick(noc_bw, tick_us),
    )
    return arch


def task_label(task: Task) -> str:
    if isinstance(task, str):
        return task
    return f"({task[0]},{task[1]})"


def parse_task_label(label: str) -> Task:
    if label.startswith("(") and label.endswith(")"):
        left, right = label[1:-1].split(",", 1)
        return (left, right)
    return label


def write_trace(schedule: Schedule, path: str | Path) -> None:
    """Delimited schedule trace: one line per task with its resources,
    start, duration, and wrapped segments."""
    lines = ["task\tkind\tresources\tstart\tduration\tsegments"]
    lines.append(f"#period\t{schedule.period}")
    for task in schedule.tasks.tasks():
        duration = schedule.tasks.durations[task]
        if isinstance(task, str):
            kind = "actor"
            resources = [schedule.actor_binding[task]]
        else:
            kind = "write" if task[0] in schedule.actor_binding else "read"
            resources = [r for r in schedule.tasks.routes[task]]
        segments = ";".join(
            f"{lo}-{hi}" for lo, hi in f_wrap(schedule.period, schedule.start_times[task], duration)
        )
        lines.append(
            "\t".join(
                [
                    task_label(task),
                    kind,
                    ",".join(resources),
                    str(schedule.start_times[task]),
                    str(duration),
                    segments,
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_trace(path: str | Path) -> tuple[int, dict[Task, int]]:
    """Read back period and start times from a trace file."""
    period = None
    starts: dict[Task, int] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("task\t"):
            continue
        if line.startswith("#period"):
            period = int(line.split("\t")[1])
            continue
        fields = line.split("\t")
        starts[parse_task_label(fields[0])] = int(fields[3])
    if period is None:
        raise InputFormatError(f"{path}: trace has no #period line")
    return period, starts


def dump_json(payload: dict, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
