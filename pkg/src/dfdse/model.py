"""Application graphs, architecture graphs and the combined mapping problem.

An application is a bipartite graph of actors and FIFO channels with
marked-graph firing semantics (one token per adjacent channel per firing).
The target platform is a tiled many-core: every core owns a core-local
memory, every tile adds a tile-local memory and a crossbar, and a NoC
connects the tiles to each other and to an unbounded global memory.

All identifiers are plain strings with a total order; every iteration in
this package walks them in sorted order so that runs are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping

GLOBAL_MEMORY = "q_global"
NOC = "h_noc"


@dataclass(frozen=True)
class Actor:
    """A computational node; ``exec_times`` maps core type to ticks.

    A core type missing from the map cannot execute the actor.
    """

    id: str
    exec_times: Mapping[str, int]

    def can_run_on(self, core_type: str) -> bool:
        return core_type in self.exec_times


@dataclass(frozen=True)
class Channel:
    """A FIFO vertex: ``delay`` initial tokens, ``capacity`` in tokens,
    ``token_size`` in bytes. ``is_mrb`` marks merged multi-reader buffers,
    which are the only channels allowed more than one consumer."""

    id: str
    delay: int
    capacity: int
    token_size: int
    is_mrb: bool = False


@dataclass
class ApplicationGraph:
    """Bipartite actor/channel graph.

    ``writes`` holds (actor, channel) producer edges and ``reads`` holds
    (channel, actor) consumer edges. The graph is treated as immutable
    after construction; transforms build new instances.
    """

    actors: dict[str, Actor]
    channels: dict[str, Channel]
    writes: frozenset[tuple[str, str]]
    reads: frozenset[tuple[str, str]]

    def actor_ids(self) -> list[str]:
        return sorted(self.actors)

    def channel_ids(self) -> list[str]:
        return sorted(self.channels)

    def producers_of(self, channel_id: str) -> list[str]:
        return sorted(a for a, c in self.writes if c == channel_id)

    def producer_of(self, channel_id: str) -> str:
        producers = self.producers_of(channel_id)
        if len(producers) != 1:
            raise ValueError(f"channel {channel_id} has {len(producers)} producers")
        return producers[0]

    def consumers_of(self, channel_id: str) -> list[str]:
        return sorted(a for c, a in self.reads if c == channel_id)

    def inputs_of(self, actor_id: str) -> list[str]:
        return sorted(c for c, a in self.reads if a == actor_id)

    def outputs_of(self, actor_id: str) -> list[str]:
        return sorted(c for a, c in self.writes if a == actor_id)

    def copy(self) -> ApplicationGraph:
        return ApplicationGraph(
            actors=dict(self.actors),
            channels=dict(self.channels),
            writes=frozenset(self.writes),
            reads=frozenset(self.reads),
        )


def make_application(
    actors: Iterable[Actor],
    channels: Iterable[Channel],
    writes: Iterable[tuple[str, str]],
    reads: Iterable[tuple[str, str]],
) -> ApplicationGraph:
    return ApplicationGraph(
        actors={a.id: a for a in actors},
        channels={c.id: c for c in channels},
        writes=frozenset(writes),
        reads=frozenset(reads),
    )


@dataclass(frozen=True)
class Core:
    id: str
    core_type: str
    tile: str


@dataclass(frozen=True)
class Tile:
    id: str
    cores: tuple[str, ...]
    memory: str
    crossbar: str


@dataclass
class ArchitectureGraph:
    """Tiled many-core platform model.

    ``memory_capacity`` maps memory id to bytes; ``None`` means unbounded
    (only the global memory). ``bandwidth`` maps interconnect id to bytes
    per tick as an exact Fraction so transfer durations never suffer from
    float rounding.
    """

    cores: dict[str, Core]
    tiles: dict[str, Tile]
    memory_capacity: dict[str, int | None]
    bandwidth: dict[str, Fraction]
    core_type_costs: dict[str, float]
    core_memory: dict[str, str] = field(default_factory=dict)

    def core_ids(self) -> list[str]:
        return sorted(self.cores)

    def memory_ids(self) -> list[str]:
        return sorted(self.memory_capacity)

    def interconnect_ids(self) -> list[str]:
        return sorted(self.bandwidth)

    def tile_of_memory(self, memory_id: str) -> str | None:
        """Owning tile of a memory, or None for the global memory."""
        for tile in self.tiles.values():
            if tile.memory == memory_id:
                return tile.id
        for core_id, mem in self.core_memory.items():
            if mem == memory_id:
                return self.cores[core_id].tile
        return None

    def route(self, core_id: str, memory_id: str) -> tuple[str, ...]:
        """Resources traversed when core ``core_id`` accesses ``memory_id``.

        Core-local access involves no interconnect; intra-tile access only
        the tile crossbar; inter-tile access both crossbars and the NoC;
        global-memory access the local crossbar and the NoC.
        """
        if core_id not in self.cores:
            raise KeyError(f"unknown core {core_id}")
        if memory_id not in self.memory_capacity:
            raise KeyError(f"unknown memory {memory_id}")
        core = self.cores[core_id]
        tile = self.tiles[core.tile]
        if self.core_memory.get(core_id) == memory_id:
            return (core_id, memory_id)
        if memory_id == GLOBAL_MEMORY:
            return (core_id, tile.crossbar, NOC, memory_id)
        target_tile = self.tile_of_memory(memory_id)
        if target_tile == core.tile:
            return (core_id, tile.crossbar, memory_id)
        return (core_id, tile.crossbar, NOC, self.tiles[target_tile].crossbar, memory_id)


def make_architecture(
    core_types: Mapping[str, float],
    tiles: Iterable[tuple[str, Iterable[tuple[str, str]]]],
    core_memory_bytes: int,
    tile_memory_bytes: int,
    crossbar_bytes_per_tick: Fraction,
    noc_bytes_per_tick: Fraction,
) -> ArchitectureGraph:
    """Build a uniform architecture; memory and crossbar ids are derived
    from core and tile ids (``q_<core>``, ``q_<tile>``, ``h_<tile>``)."""
    cores: dict[str, Core] = {}
    tile_map: dict[str, Tile] = {}
    capacity: dict[str, int | None] = {GLOBAL_MEMORY: None}
    bandwidth: dict[str, Fraction] = {NOC: Fraction(noc_bytes_per_tick)}
    core_memory: dict[str, str] = {}
    for tile_id, tile_cores in tiles:
        core_ids = []
        for core_id, core_type in tile_cores:
            if core_type not in core_types:
                raise ValueError(f"tile {tile_id} uses unknown core type {core_type}")
            cores[core_id] = Core(core_id, core_type, tile_id)
            core_memory[core_id] = f"q_{core_id}"
            capacity[f"q_{core_id}"] = core_memory_bytes
            core_ids.append(core_id)
        tile_map[tile_id] = Tile(tile_id, tuple(core_ids), f"q_{tile_id}", f"h_{tile_id}")
        capacity[f"q_{tile_id}"] = tile_memory_bytes
        bandwidth[f"h_{tile_id}"] = Fraction(crossbar_bytes_per_tick)
    return ArchitectureGraph(
        cores=cores,
        tiles=tile_map,
        memory_capacity=capacity,
        bandwidth=bandwidth,
        core_type_costs=dict(core_types),
        core_memory=core_memory,
    )


@dataclass
class SpecificationGraph:
    """Application plus architecture plus derived mapping options."""

    app: ApplicationGraph
    arch: ArchitectureGraph

    def feasible_cores(self, actor_id: str) -> list[str]:
        actor = self.app.actors[actor_id]
        return [
            p
            for p in self.arch.core_ids()
            if actor.can_run_on(self.arch.cores[p].core_type)
        ]


@dataclass(frozen=True)
class Violation:
    code: str
    element: str
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, code: str, element: str, message: str) -> None:
        self.violations.append(Violation(code, element, message))

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "\n".join(f"{v.code} [{v.element}]: {v.message}" for v in self.violations)


def validate(spec: SpecificationGraph) -> ValidationReport:
    """Check every structural invariant; violations are data, not errors."""
    report = ValidationReport()
    app, arch = spec.app, spec.arch

    if not app.actors:
        report.add("no-actors", "application", "application graph has no actors")

    shared = set(app.actors) & set(app.channels)
    for name in sorted(shared):
        report.add("id-clash", name, "identifier used for both an actor and a channel")

    for a, c in sorted(app.writes) + sorted(app.reads):
        if a not in app.actors and a not in app.channels:
            report.add("dangling-edge", a, "edge endpoint is not a graph vertex")
        if c not in app.channels and c not in app.actors:
            report.add("dangling-edge", c, "edge endpoint is not a graph vertex")
    for a, c in sorted(app.writes):
        if a in app.channels or c in app.actors:
            report.add("not-bipartite", f"{a}->{c}", "producer edge must go actor to channel")
    for c, a in sorted(app.reads):
        if c in app.actors or a in app.channels:
            report.add("not-bipartite", f"{c}->{a}", "consumer edge must go channel to actor")

    for cid in app.channel_ids():
        chan = app.channels[cid]
        producers = app.producers_of(cid)
        consumers = app.consumers_of(cid)
        if len(producers) != 1:
            report.add("producer-count", cid, f"channel has {len(producers)} producers, expected 1")
        if not consumers:
            report.add("consumer-count", cid, "channel has no consumer")
        elif len(consumers) > 1 and not chan.is_mrb:
            report.add(
                "consumer-count",
                cid,
                f"plain channel has {len(consumers)} consumers; only MRB channels may fan out",
            )
        if chan.capacity < 1:
            report.add("capacity", cid, f"capacity {chan.capacity} < 1")
        if chan.token_size < 1:
            report.add("token-size", cid, f"token size {chan.token_size} < 1")
        if chan.delay < 0:
            report.add("delay", cid, f"delay {chan.delay} < 0")

    known_types = set(arch.core_type_costs)
    for aid in app.actor_ids():
        actor = app.actors[aid]
        if not actor.exec_times:
            report.add("unmappable-actor", aid, "actor has no execution time on any core type")
        for core_type, ticks in sorted(actor.exec_times.items()):
            if core_type not in known_types:
                report.add("unknown-core-type", aid, f"execution time names unknown core type {core_type}")
            if ticks < 0:
                report.add("exec-time", aid, f"negative execution time on {core_type}")
        if not spec.feasible_cores(aid):
            report.add("unmappable-actor", aid, "no core in the architecture can execute this actor")

    seen_resources: set[str] = set()
    for tile_id in sorted(arch.tiles):
        tile = arch.tiles[tile_id]
        for resource in tile.cores + (tile.memory, tile.crossbar):
            if resource in seen_resources:
                report.add("tile-overlap", resource, "resource belongs to more than one tile")
            seen_resources.add(resource)
    for core_id in arch.core_ids():
        if core_id not in arch.core_memory:
            report.add("core-memory", core_id, "core has no core-local memory")

    return report


def detect_multicast(app: ApplicationGraph) -> list[str]:
    """Actors that only duplicate data: exactly one input channel, two or
    more output channels, identical token sizes across the whole family,
    no initial tokens on the outputs, and equal output capacities.
    """
    found = []
    for aid in app.actor_ids():
        inputs = app.inputs_of(aid)
        outputs = app.outputs_of(aid)
        if len(inputs) != 1 or len(outputs) < 2:
            continue
        c_in = app.channels[inputs[0]]
        outs = [app.channels[c] for c in outputs]
        if any(c.token_size != c_in.token_size for c in outs):
            continue
        if any(c.delay != 0 for c in outs):
            continue
        if any(c.capacity != outs[0].capacity for c in outs):
            continue
        found.append(aid)
    return found
