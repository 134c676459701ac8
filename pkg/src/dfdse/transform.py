"""Selective replacement of multi-cast actors by multi-reader buffers.

A multi-cast actor copies its single input channel to several output
channels. Replacing it merges the whole channel family into one MRB
channel that keeps a single copy of each token. The merged capacity is
the sum of the input capacity and the (shared) output capacity, which is
the most tokens that can ever accumulate along any input-output pair.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .model import ApplicationGraph, Channel, detect_multicast

MRB_ID_SEPARATOR = "+"


def mrb_channel_params(c_in: Channel, outs: Sequence[Channel]) -> tuple[int, int, int]:
    """(delay, capacity, token_size) of the merged buffer.

    Raises ValueError if the family is not a well-formed multi-cast
    neighbourhood (mismatched token sizes, delayed outputs, or unequal
    output capacities).
    """
    if not outs:
        raise ValueError("a multi-cast family needs at least one output channel")
    for c in outs:
        if c.token_size != c_in.token_size:
            raise ValueError(f"token size of {c.id} differs from input {c_in.id}")
        if c.delay != 0:
            raise ValueError(f"output channel {c.id} carries initial tokens")
        if c.capacity != outs[0].capacity:
            raise ValueError(f"output capacities differ: {c.id} vs {outs[0].id}")
    return c_in.delay, c_in.capacity + outs[0].capacity, c_in.token_size


@dataclass(frozen=True)
class Replacement:
    """One applied merge: which actor vanished and which channels fused.

    ``input_channel`` is the input at merge time; for chained multi-cast
    actors it can name an MRB created by an earlier step.
    """

    actor: str
    input_channel: str
    output_channels: tuple[str, ...]
    mrb_id: str


def mrb_id_for(channel_ids: Sequence[str]) -> str:
    return MRB_ID_SEPARATOR.join(sorted(channel_ids))


def substitute_mrbs_with_plan(
    app: ApplicationGraph, xi: Mapping[str, int]
) -> tuple[ApplicationGraph, list[Replacement]]:
    """Replace every selected multi-cast actor and its adjacent channels by
    one MRB channel, returning the transformed graph and the applied steps.

    Selected actors are processed in sorted id order; the producer edge is
    rewired onto the new channel and each former output consumer becomes
    one of its readers.
    """
    multicast = detect_multicast(app)
    if set(xi) != set(multicast):
        raise ValueError(
            f"replacement function domain {sorted(xi)} does not match "
            f"detected multi-cast actors {multicast}"
        )
    result = app.copy()
    plan: list[Replacement] = []
    for actor in multicast:
        if not xi[actor]:
            continue
        c_in_id = result.inputs_of(actor)[0]
        out_ids = result.outputs_of(actor)
        adjacent = {c_in_id, *out_ids}
        delay, capacity, token_size = mrb_channel_params(
            result.channels[c_in_id], [result.channels[c] for c in out_ids]
        )
        mrb = Channel(
            id=mrb_id_for(sorted(adjacent)),
            delay=delay,
            capacity=capacity,
            token_size=token_size,
            is_mrb=True,
        )
        writes = set()
        for a, c in result.writes:
            if a == actor:
                continue
            writes.add((a, mrb.id) if c in adjacent else (a, c))
        reads = set()
        for c, a in result.reads:
            if a == actor:
                continue
            reads.add((mrb.id, a) if c in adjacent else (c, a))
        actors = {aid: act for aid, act in result.actors.items() if aid != actor}
        channels = {cid: ch for cid, ch in result.channels.items() if cid not in adjacent}
        channels[mrb.id] = mrb
        result = ApplicationGraph(
            actors=actors,
            channels=channels,
            writes=frozenset(writes),
            reads=frozenset(reads),
        )
        plan.append(Replacement(actor, c_in_id, tuple(out_ids), mrb.id))
    return result, plan


def substitute_mrbs(app: ApplicationGraph, xi: Mapping[str, int]) -> ApplicationGraph:
    graph, _ = substitute_mrbs_with_plan(app, xi)
    return graph


def decision_source(plan: Sequence[Replacement], channel_id: str) -> str:
    """Original-graph channel whose placement decision an MRB inherits.

    Chained merges resolve through intermediate MRBs down to the original
    input channel of the first merge.
    """
    by_id = {step.mrb_id: step for step in plan}
    current = channel_id
    while current in by_id:
        current = by_id[current].input_channel
    return current
