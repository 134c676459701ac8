"""Channel placement, allocation objectives, and task timing.

Every channel carries one of five placement decisions: producer-local,
producer-tile, consumer-local, consumer-tile, or global memory. Concrete
bindings fall back along the ladder local -> tile -> global whenever a
memory would overflow, so a feasible binding always exists because the
global memory is unbounded.

Scheduling operates on tasks: every actor is a task on its core, and
every read or write edge is a task on the producer/consumer core plus all
interconnects its route traverses. Memories never carry tasks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Mapping, Union

from .model import GLOBAL_MEMORY, ApplicationGraph, ArchitectureGraph

# A task is an actor id, or a (producer, channel) / (channel, consumer) edge.
Task = Union[str, tuple[str, str]]


class ChannelDecision(str, Enum):
    GLOBAL = "GLOBAL"
    TILE_PROD = "TILE-PROD"
    TILE_CONS = "TILE-CONS"
    PROD = "PROD"
    CONS = "CONS"


class InfeasibleBinding(ValueError):
    """An actor was bound to a core type it cannot execute on."""


@dataclass
class ChannelBinding:
    binding: dict[str, str]
    used_bytes: dict[str, int]

    def memory_of(self, channel_id: str) -> str:
        return self.binding[channel_id]


def determine_channel_bindings(
    decisions: Mapping[str, ChannelDecision],
    capacities: Mapping[str, int],
    actor_binding: Mapping[str, str],
    app: ApplicationGraph,
    arch: ArchitectureGraph,
) -> ChannelBinding:
    """Resolve channel decisions into memory bindings, channels in sorted
    id order, accumulating per-memory usage. For multi-reader channels the
    consumer-side cases use the lowest-id consumer.
    """
    used: dict[str, int] = {q: 0 for q in arch.memory_ids()}
    binding: dict[str, str] = {}

    def fits(memory_id: str, demand: int) -> bool:
        cap = arch.memory_capacity[memory_id]
        return cap is None or used[memory_id] + demand <= cap

    def bind(channel_id: str, memory_id: str, demand: int) -> None:
        binding[channel_id] = memory_id
        used[memory_id] += demand

    for cid in app.channel_ids():
        decision = ChannelDecision(decisions[cid])
        demand = capacities[cid] * app.channels[cid].token_size
        producer = app.producer_of(cid)
        consumer = app.consumers_of(cid)[0]
        p_prod = actor_binding[producer]
        p_cons = actor_binding[consumer]
        tile_prod = arch.tiles[arch.cores[p_prod].tile]
        tile_cons = arch.tiles[arch.cores[p_cons].tile]

        if decision is ChannelDecision.PROD:
            q = arch.core_memory[p_prod]
            if fits(q, demand):
                bind(cid, q, demand)
                continue
            decision = ChannelDecision.TILE_PROD
        if decision is ChannelDecision.TILE_PROD:
            if fits(tile_prod.memory, demand):
                bind(cid, tile_prod.memory, demand)
            else:
                bind(cid, GLOBAL_MEMORY, demand)
            continue
        if decision is ChannelDecision.CONS:
            q = arch.core_memory[p_cons]
            if fits(q, demand):
                bind(cid, q, demand)
                continue
            decision = ChannelDecision.TILE_CONS
        if decision is ChannelDecision.TILE_CONS:
            if fits(tile_cons.memory, demand):
                bind(cid, tile_cons.memory, demand)
            else:
                bind(cid, GLOBAL_MEMORY, demand)
            continue
        bind(cid, GLOBAL_MEMORY, demand)

    return ChannelBinding(binding=binding, used_bytes=used)


def binding_fits(
    channel_binding: ChannelBinding,
    capacities: Mapping[str, int],
    app: ApplicationGraph,
    arch: ArchitectureGraph,
) -> bool:
    """Re-check memory capacities for possibly enlarged channel capacities."""
    demand: dict[str, int] = {}
    for cid, q in channel_binding.binding.items():
        demand[q] = demand.get(q, 0) + capacities[cid] * app.channels[cid].token_size
    for q, total in demand.items():
        cap = arch.memory_capacity[q]
        if cap is not None and total > cap:
            return False
    return True


def allocation(actor_binding: Mapping[str, str], arch: ArchitectureGraph) -> dict[str, int]:
    """Cores of each type that host at least one actor."""
    occupied = set(actor_binding.values())
    counts = {t: 0 for t in sorted(arch.core_type_costs)}
    for p in occupied:
        counts[arch.cores[p].core_type] += 1
    return counts


def core_cost(alloc: Mapping[str, int], costs: Mapping[str, float]) -> float:
    return sum(alloc[t] * costs[t] for t in alloc)


def memory_footprint(app: ApplicationGraph, capacities: Mapping[str, int] | None = None) -> int:
    """Total buffer bytes: capacity times token size, summed over channels."""
    total = 0
    for cid in app.channel_ids():
        chan = app.channels[cid]
        gamma = chan.capacity if capacities is None else capacities[cid]
        total += gamma * chan.token_size
    return total


@dataclass
class TaskSet:
    """Durations and resource assignment of all actor and edge tasks."""

    durations: dict[Task, int]
    routes: dict[tuple[str, str], tuple[str, ...]]
    by_resource: dict[str, tuple[Task, ...]] = field(default_factory=dict)

    def tasks(self) -> list[Task]:
        return sorted(self.durations, key=_task_key)

    def serial_bound(self) -> int:
        return sum(self.durations.values())


def _task_key(task: Task) -> tuple:
    return (0, task, "") if isinstance(task, str) else (1, task[0], task[1])


def transfer_ticks(token_bytes: int, bandwidths: list[Fraction]) -> int:
    """Ticks to move one token over the slowest traversed interconnect,
    rounded up so contention is never underestimated."""
    if not bandwidths:
        return 0
    slowest = min(bandwidths)
    return math.ceil(Fraction(token_bytes) / slowest)


def task_durations(
    app: ApplicationGraph,
    actor_binding: Mapping[str, str],
    channel_binding: ChannelBinding,
    arch: ArchitectureGraph,
) -> TaskSet:
    """Derive every task duration and the per-resource task lists.

    Actor durations come from the bound core's type; edge durations from
    the token size over the minimum bandwidth along the route, zero when
    the route contains no interconnect.
    """
    durations: dict[Task, int] = {}
    routes: dict[tuple[str, str], tuple[str, ...]] = {}
    by_resource: dict[str, list[Task]] = {p: [] for p in arch.core_ids()}
    for h in arch.interconnect_ids():
        by_resource[h] = []

    for aid in app.actor_ids():
        core = actor_binding[aid]
        core_type = arch.cores[core].core_type
        actor = app.actors[aid]
        if not actor.can_run_on(core_type):
            raise InfeasibleBinding(f"actor {aid} cannot execute on core type {core_type}")
        durations[aid] = actor.exec_times[core_type]
        by_resource[core].append(aid)

    def add_edge(edge: tuple[str, str], actor_id: str, channel_id: str) -> None:
        core = actor_binding[actor_id]
        memory = channel_binding.memory_of(channel_id)
        route = arch.route(core, memory)
        routes[edge] = route
        hops = [arch.bandwidth[r] for r in route if r in arch.bandwidth]
        durations[edge] = transfer_ticks(app.channels[channel_id].token_size, hops)
        for r in route:
            if r in by_resource:
                by_resource[r].append(edge)

    for a, c in sorted(app.writes):
        add_edge((a, c), a, c)
    for c, a in sorted(app.reads):
        add_edge((c, a), a, c)

    return TaskSet(
        durations=durations,
        routes=routes,
        by_resource={r: tuple(sorted(ts, key=_task_key)) for r, ts in by_resource.items()},
    )


def reads_of(app: ApplicationGraph, actor_id: str) -> list[tuple[str, str]]:
    """Read tasks of an actor, ordered by channel id."""
    return [(c, actor_id) for c in app.inputs_of(actor_id)]


def writes_of(app: ApplicationGraph, actor_id: str) -> list[tuple[str, str]]:
    """Write tasks of an actor, ordered by channel id."""
    return [(actor_id, c) for c in app.outputs_of(actor_id)]


def required_capacity(
    app: ApplicationGraph,
    channel_id: str,
    start_times: Mapping[Task, int],
    durations: Mapping[Task, int],
    period: int,
) -> int:
    """Smallest capacity that the periodic schedule never exceeds.

    A slot is claimed when its write starts and released when the slowest
    reader's read completes, delay periods later; simultaneous release and
    claim still count as two live tokens.
    """
    chan = app.channels[channel_id]
    producer = app.producer_of(channel_id)
    write = (producer, channel_id)
    s_write = start_times[write]
    worst = 0
    for consumer in app.consumers_of(channel_id):
        read = (channel_id, consumer)
        read_done = start_times[read] + durations[read]
        worst = max(worst, (read_done - s_write) // period + 1)
    return chan.delay + worst
