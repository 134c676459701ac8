"""Multi-reader buffer index arithmetic.

A multi-reader buffer stores each token once and hands it to every reader
in FIFO order. One write index tracks the next free slot; one read index
per reader tracks that reader's next token, with -1 meaning the buffer is
empty from that reader's point of view. A slot is free again only after
the slowest reader has passed it.

Token payloads are not stored here; schedulers only need occupancy. The
FIFO-equivalence tests drive the same index arithmetic with synthetic
sequence numbers.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping

EMPTY = -1


@dataclass(frozen=True)
class MrbState:
    """Immutable snapshot of a buffer: firing updates return new states."""

    capacity: int
    write_index: int
    read_indices: Mapping[str, int]

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        if not self.read_indices:
            raise ValueError("a buffer needs at least one registered reader")
        if not 0 <= self.write_index < self.capacity:
            raise ValueError(f"write index {self.write_index} outside [0, {self.capacity})")
        for reader, rho in self.read_indices.items():
            if rho != EMPTY and not 0 <= rho < self.capacity:
                raise ValueError(f"read index {rho} of {reader} outside [0, {self.capacity})")
        object.__setattr__(self, "read_indices", MappingProxyType(dict(self.read_indices)))

    @classmethod
    def empty(cls, capacity: int, readers: Iterable[str]) -> MrbState:
        return cls(capacity, 0, {r: EMPTY for r in readers})

    def readers(self) -> list[str]:
        return sorted(self.read_indices)


def available_tokens(state: MrbState, reader: str) -> int:
    """Tokens the given reader can still consume."""
    if reader not in state.read_indices:
        raise KeyError(f"unknown reader {reader}")
    rho = state.read_indices[reader]
    if rho == EMPTY:
        return 0
    return ((state.write_index - rho - 1) % state.capacity) + 1


def free_places(state: MrbState) -> int:
    """Slots the writer may still fill: capacity minus the slowest reader's backlog."""
    return state.capacity - max(available_tokens(state, r) for r in state.read_indices)


def fire_writer(state: MrbState, count: int = 1) -> MrbState:
    """Produce ``count`` tokens; empty readers are re-anchored to the old
    write index before it advances."""
    if count < 0:
        raise ValueError("produce count must be >= 0")
    if count == 0:
        return state
    if free_places(state) < count:
        raise ValueError(
            f"cannot produce {count} tokens with only {free_places(state)} free places"
        )
    indices = {
        r: state.write_index if rho == EMPTY else rho
        for r, rho in state.read_indices.items()
    }
    return MrbState(
        capacity=state.capacity,
        write_index=(state.write_index + count) % state.capacity,
        read_indices=indices,
    )


def fire_reader(state: MrbState, reader: str, count: int = 1) -> MrbState:
    """Consume ``count`` tokens for one reader; consuming the last visible
    token resets its index to empty."""
    if count < 0:
        raise ValueError("consume count must be >= 0")
    if count == 0:
        return state
    visible = available_tokens(state, reader)
    if visible < count:
        raise ValueError(f"reader {reader} sees {visible} tokens, cannot consume {count}")
    rho = state.read_indices[reader]
    new_rho = EMPTY if visible == count else (rho + count) % state.capacity
    indices = dict(state.read_indices)
    indices[reader] = new_rho
    return MrbState(state.capacity, state.write_index, indices)
