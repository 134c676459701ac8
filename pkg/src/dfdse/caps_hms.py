"""Greedy modulo scheduling of actors and their channel accesses.

The scheduler packs each actor's reads, execution, and writes into one
contiguous block on its core, searching earliest-first for a block start
whose wrapped footprint is free on the core and whose individual reads
and writes fit every traversed interconnect. Start times may exceed the
period; occupancy always lives in the wrapped interval [0, P).

Failure to place an actor within one period of its data-ready time means
no schedule with the candidate period exists under this discipline; the
decoding loop then retries with a longer period and finally enlarges
channel capacities to cover tokens that stay live across iterations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .binding import (
    ChannelBinding,
    ChannelDecision,
    Task,
    TaskSet,
    binding_fits,
    determine_channel_bindings,
    reads_of,
    required_capacity,
    task_durations,
    writes_of,
)
from .model import ApplicationGraph, ArchitectureGraph, ValidationReport

Interval = tuple[int, int]


class DeadlockError(RuntimeError):
    """The graph has a cycle without initial tokens; no period can help."""


def f_wrap(period: int, start: int, duration: int) -> tuple[Interval, ...]:
    """Occupancy of [start, start+duration) folded into [0, period).

    Zero-duration tasks occupy nothing; durations above the period have no
    wrapped representation and are rejected.
    """
    if period < 1:
        raise ValueError("period must be >= 1")
    if duration < 0:
        raise ValueError("duration must be >= 0")
    if duration > period:
        raise ValueError(f"duration {duration} exceeds period {period}")
    if duration == 0:
        return ()
    lo = start % period
    hi = lo + duration
    if hi <= period:
        return ((lo, hi),)
    return ((lo, period), (0, hi - period))


def _overlaps(occupied: list[Interval], candidate: tuple[Interval, ...]) -> bool:
    for lo, hi in candidate:
        for olo, ohi in occupied:
            if lo < ohi and olo < hi:
                return True
    return False


def _add(occupied: list[Interval], candidate: tuple[Interval, ...]) -> None:
    occupied.extend(candidate)
    occupied.sort()


def topological_priorities(app: ApplicationGraph) -> dict[str, int]:
    """Priority per actor from a topological sort, lowest value first,
    ties broken by actor id. Cyclic graphs are retried with channels that
    carry initial tokens removed; a remaining cycle is a deadlock.
    """
    for skip_delayed in (False, True):
        succs: dict[str, set[str]] = {a: set() for a in app.actor_ids()}
        indeg = {a: 0 for a in app.actor_ids()}
        for cid in app.channel_ids():
            if skip_delayed and app.channels[cid].delay >= 1:
                continue
            producer = app.producer_of(cid)
            for consumer in app.consumers_of(cid):
                if consumer not in succs[producer]:
                    succs[producer].add(consumer)
                    indeg[consumer] += 1
        order: list[str] = []
        available = sorted(a for a, d in indeg.items() if d == 0)
        while available:
            a = available.pop(0)
            order.append(a)
            changed = False
            for b in sorted(succs[a]):
                indeg[b] -= 1
                if indeg[b] == 0:
                    available.append(b)
                    changed = True
            if changed:
                available.sort()
        if len(order) == len(app.actors):
            return {a: i for i, a in enumerate(order)}
    raise DeadlockError("cycle without initial tokens; the graph can never fire")


def _initially_ready(app: ApplicationGraph, actor_id: str) -> bool:
    inputs = app.inputs_of(actor_id)
    return all(app.channels[c].delay >= 1 for c in inputs)


@dataclass
class Schedule:
    """A periodic schedule: start time per task plus the context needed to
    verify and render it."""

    period: int
    start_times: dict[Task, int]
    actor_binding: dict[str, str]
    channel_binding: ChannelBinding
    tasks: TaskSet
    capacities: dict[str, int] = field(default_factory=dict)


def period_lower_bound(tasks: TaskSet) -> int:
    """Busiest resource load: no period can beat the summed durations of
    the tasks sharing one core or interconnect."""
    loads = [
        sum(tasks.durations[t] for t in assigned)
        for assigned in tasks.by_resource.values()
    ]
    return max(loads, default=0)


def caps_hms(
    app: ApplicationGraph,
    actor_binding: Mapping[str, str],
    channel_binding: ChannelBinding,
    tasks: TaskSet,
    period: int,
) -> Schedule | None:
    """Try to build a schedule with the candidate period.

    Returns None when some actor block cannot be placed, which signals the
    caller to retry with period + 1. Raises DeadlockError when the graph
    itself can never fire completely.
    """
    if period < 1:
        raise ValueError("period must be >= 1")
    priority = topological_priorities(app)
    util: dict[str, list[Interval]] = {r: [] for r in tasks.by_resource}
    start_times: dict[Task, int] = {}
    lower: dict[str, int] = {a: 0 for a in app.actor_ids()}
    scheduled: set[str] = set()
    ready = {a for a in app.actor_ids() if _initially_ready(app, a)}

    while ready:
        actor = min(ready, key=lambda a: (priority[a], a))
        core = actor_binding[actor]
        read_tasks = reads_of(app, actor)
        write_tasks = writes_of(app, actor)
        tau_in = sum(tasks.durations[t] for t in read_tasks)
        tau_out = sum(tasks.durations[t] for t in write_tasks)
        block = tau_in + tasks.durations[actor] + tau_out
        if block > period:
            return None

        placed = False
        for candidate in range(lower[actor], lower[actor] + period):
            if _overlaps(util[core], f_wrap(period, candidate, block)):
                continue
            # Reads are packed before the execution, writes directly after,
            # both in channel-id order.
            comm_starts: dict[Task, int] = {}
            cursor = candidate
            for t in read_tasks:
                comm_starts[t] = cursor
                cursor += tasks.durations[t]
            exec_start = cursor
            cursor += tasks.durations[actor]
            for t in write_tasks:
                comm_starts[t] = cursor
                cursor += tasks.durations[t]

            feasible = True
            for t, s_t in comm_starts.items():
                wrapped = f_wrap(period, s_t, tasks.durations[t])
                for r in tasks.routes[t]:
                    if r in util and _overlaps(util[r], wrapped):
                        feasible = False
                        break
                if not feasible:
                    break
            if not feasible:
                continue

            start_times[actor] = exec_start
            _add(util[core], f_wrap(period, exec_start, tasks.durations[actor]))
            for t, s_t in comm_starts.items():
                start_times[t] = s_t
                wrapped = f_wrap(period, s_t, tasks.durations[t])
                for r in tasks.routes[t]:
                    if r in util:
                        _add(util[r], wrapped)
            block_end = candidate + block
            for _, cid in write_tasks:
                if app.channels[cid].delay == 0:
                    for successor in app.consumers_of(cid):
                        lower[successor] = max(lower[successor], block_end)
            scheduled.add(actor)
            ready.discard(actor)
            for cid in app.outputs_of(actor):
                for successor in app.consumers_of(cid):
                    if successor in scheduled or successor in ready:
                        continue
                    inputs = app.inputs_of(successor)
                    if all(
                        app.channels[c].delay >= 1 or app.producer_of(c) in scheduled
                        for c in inputs
                    ):
                        ready.add(successor)
            placed = True
            break
        if not placed:
            return None

    if scheduled != set(app.actor_ids()):
        raise DeadlockError(
            f"actors never became ready: {sorted(set(app.actor_ids()) - scheduled)}"
        )
    return Schedule(
        period=period,
        start_times=start_times,
        actor_binding=dict(actor_binding),
        channel_binding=channel_binding,
        tasks=tasks,
        capacities={},
    )


@dataclass
class DecodeResult:
    """Decoded phenotype core: period, bindings, final capacities."""

    period: int
    actor_binding: dict[str, str]
    channel_binding: ChannelBinding
    capacities: dict[str, int]
    schedule: Schedule | None
    proven_optimal: bool
    feasible: bool


def decode_via_heuristic(
    app: ApplicationGraph,
    decisions: Mapping[str, ChannelDecision],
    actor_binding: Mapping[str, str],
    arch: ArchitectureGraph,
) -> DecodeResult:
    """Bind channels, grow the period from its lower bound until the
    scheduler succeeds, then grow channel capacities to cover the found
    schedule, rebinding and rescheduling if a memory overflows."""
    capacities = {cid: app.channels[cid].capacity for cid in app.channel_ids()}
    channel_binding = determine_channel_bindings(decisions, capacities, actor_binding, app, arch)
    tasks = task_durations(app, actor_binding, channel_binding, arch)
    period = max(1, period_lower_bound(tasks))

    for _ in range(10 * len(app.channels) + 10):
        serial = max(1, tasks.serial_bound())
        schedule = caps_hms(app, actor_binding, channel_binding, tasks, period)
        while schedule is None:
            period += 1
            if period > serial:
                raise RuntimeError("scheduler exceeded the serial bound; this is a bug")
            schedule = caps_hms(app, actor_binding, channel_binding, tasks, period)
        for cid in app.channel_ids():
            needed = required_capacity(app, cid, schedule.start_times, tasks.durations, period)
            capacities[cid] = max(capacities[cid], needed)
        if binding_fits(channel_binding, capacities, app, arch):
            schedule.capacities = dict(capacities)
            return DecodeResult(
                period=period,
                actor_binding=dict(actor_binding),
                channel_binding=channel_binding,
                capacities=dict(capacities),
                schedule=schedule,
                proven_optimal=False,
                feasible=True,
            )
        channel_binding = determine_channel_bindings(
            decisions, capacities, actor_binding, app, arch
        )
        tasks = task_durations(app, actor_binding, channel_binding, arch)
    raise RuntimeError("channel rebinding failed to converge; this is a bug")


def utilization_sets(schedule: Schedule) -> dict[str, list[Interval]]:
    """Wrapped occupancy per core and interconnect, for rendering and checks."""
    util: dict[str, list[Interval]] = {r: [] for r in schedule.tasks.by_resource}
    for resource, assigned in schedule.tasks.by_resource.items():
        for t in assigned:
            wrapped = f_wrap(schedule.period, schedule.start_times[t], schedule.tasks.durations[t])
            util[resource].extend(wrapped)
        util[resource].sort()
    return util


def verify_schedule(schedule: Schedule, app: ApplicationGraph) -> ValidationReport:
    """Independent checks of a concrete schedule; violations are data.

    Checked: wrapped occupancy is pairwise disjoint on every core and
    interconnect; every task and every actor's read-to-write span fits in
    one period; reads respect the producing write shifted by the channel
    delay; reads precede their actor and writes follow it.
    """
    report = ValidationReport()
    period = schedule.period
    starts = schedule.start_times
    durations = schedule.tasks.durations

    for task in schedule.tasks.tasks():
        if starts[task] < 0:
            report.add("negative-start", str(task), f"start {starts[task]} < 0")
        if durations[task] > period:
            report.add("task-too-long", str(task), f"duration {durations[task]} > period {period}")

    for resource, assigned in sorted(schedule.tasks.by_resource.items()):
        segments: list[tuple[int, int, Task]] = []
        for t in assigned:
            for lo, hi in f_wrap(period, starts[t], min(durations[t], period)):
                segments.append((lo, hi, t))
        segments.sort()
        for (lo1, hi1, t1), (lo2, hi2, t2) in zip(segments, segments[1:]):
            if lo2 < hi1:
                report.add(
                    "overlap",
                    resource,
                    f"tasks {t1} and {t2} overlap in [{lo2}, {min(hi1, hi2)})",
                )

    for aid in app.actor_ids():
        group_tasks = [*reads_of(app, aid), aid, *writes_of(app, aid)]
        begin = min(starts[t] for t in group_tasks)
        end = max(starts[t] + durations[t] for t in group_tasks)
        if end - begin > period:
            report.add("span", aid, f"read-to-write span {end - begin} exceeds period {period}")
        for t in reads_of(app, aid):
            if starts[t] + durations[t] > starts[aid]:
                report.add("read-order", str(t), "read finishes after its actor starts")
        for t in writes_of(app, aid):
            if starts[aid] + durations[aid] > starts[t]:
                report.add("write-order", str(t), "write starts before its actor finishes")

    for cid in app.channel_ids():
        chan = app.channels[cid]
        write = (app.producer_of(cid), cid)
        for consumer in app.consumers_of(cid):
            read = (cid, consumer)
            if starts[write] + durations[write] - period * chan.delay > starts[read]:
                report.add(
                    "dependency",
                    cid,
                    f"read by {consumer} starts before the producing write lands",
                )

    return report
