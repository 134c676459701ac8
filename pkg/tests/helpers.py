"""Shared test utilities: fixture loading, random instances, and the
simulation oracles the module tests check against."""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import numpy as np

from dfdse.binding import ChannelDecision, determine_channel_bindings, task_durations
from dfdse.fileio import load_application, load_architecture
from dfdse.model import (
    Actor,
    ApplicationGraph,
    ArchitectureGraph,
    Channel,
    SpecificationGraph,
    make_application,
    make_architecture,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def fig1_app() -> ApplicationGraph:
    return load_application(FIXTURES / "fig1_app.yaml")


def fig7_app() -> ApplicationGraph:
    return load_application(FIXTURES / "fig7_app.yaml")


def demo_arch() -> ArchitectureGraph:
    return load_architecture(FIXTURES / "demo_arch.yaml")


def manycore_arch() -> ArchitectureGraph:
    return load_architecture(FIXTURES / "manycore24_arch.yaml")


def demo_spec() -> SpecificationGraph:
    return SpecificationGraph(app=fig1_app(), arch=demo_arch())


FIG5_BINDING = {"a1": "p3", "a2": "p3", "a3": "p1", "a4": "p2", "a5": "p3"}
FIG5_DECISIONS = {
    "c1": ChannelDecision.PROD,
    "c2": ChannelDecision.CONS,
    "c3": ChannelDecision.CONS,
    "c4": ChannelDecision.PROD,
    "c5": ChannelDecision.PROD,
}
FIG4_BINDING = {"a1": "p3", "a3": "p1", "a4": "p2", "a5": "p3"}
FIG7_BINDING = {"a1": "p1", "a2": "p1", "a3": "p2", "a4": "p3", "a5": "p4"}


def bound_tasks(app, decisions, actor_binding, arch):
    capacities = {c: app.channels[c].capacity for c in app.channel_ids()}
    cb = determine_channel_bindings(decisions, capacities, actor_binding, app, arch)
    return cb, task_durations(app, actor_binding, cb, arch)


def random_instance(rng: np.random.Generator):
    """Small random mapped instance: application, architecture, binding,
    decisions. Graphs are DAGs, optionally with one delayed feedback
    channel, sized for the exhaustive period oracle."""
    n_actors = int(rng.integers(2, 6))
    actor_ids = [f"a{i}" for i in range(n_actors)]
    n_types = int(rng.integers(1, 3))
    type_ids = [f"t{i}" for i in range(n_types)]
    actors = [
        Actor(aid, {t: int(rng.integers(1, 5)) for t in type_ids}) for aid in actor_ids
    ]

    n_channels = int(rng.integers(1, 7))
    channels, writes, reads = [], [], []
    for k in range(n_channels):
        i = int(rng.integers(0, n_actors - 1))
        j = int(rng.integers(i + 1, n_actors))
        cid = f"c{k}"
        channels.append(
            Channel(
                id=cid,
                delay=int(rng.integers(0, 3)) if rng.random() < 0.3 else 0,
                capacity=int(rng.integers(1, 4)),
                token_size=int(rng.choice([1, 2, 3, 4])),
                is_mrb=False,
            )
        )
        writes.append((actor_ids[i], cid))
        reads.append((cid, actor_ids[j]))
    if rng.random() < 0.25 and n_actors >= 2:
        # one feedback channel, kept live by initial tokens
        j = int(rng.integers(1, n_actors))
        i = int(rng.integers(0, j))
        cid = "cb"
        channels.append(Channel(cid, delay=int(rng.integers(1, 3)), capacity=2, token_size=1))
        writes.append((actor_ids[j], cid))
        reads.append((cid, actor_ids[i]))
    app = make_application(actors, channels, writes, reads)

    n_tiles = int(rng.integers(1, 3))
    cores_per_tile = int(rng.integers(1, 3))
    tiles = []
    core_ids = []
    n = 0
    for t in range(n_tiles):
        tile_cores = []
        for _ in range(cores_per_tile):
            n += 1
            core_id = f"p{n}"
            tile_cores.append((core_id, type_ids[int(rng.integers(0, n_types))]))
            core_ids.append(core_id)
        tiles.append((f"T{t + 1}", tile_cores))
    arch = make_architecture(
        core_types={t: 1.0 + 0.5 * i for i, t in enumerate(type_ids)},
        tiles=tiles,
        core_memory_bytes=64,
        tile_memory_bytes=256,
        crossbar_bytes_per_tick=Fraction(int(rng.choice([1, 2, 4]))),
        noc_bytes_per_tick=Fraction(1),
    )
    binding = {aid: core_ids[int(rng.integers(0, len(core_ids)))] for aid in actor_ids}
    alphabet = list(ChannelDecision)
    decisions = {
        c: alphabet[int(rng.integers(0, len(alphabet)))] for c in app.channel_ids()
    }
    return app, arch, binding, decisions
