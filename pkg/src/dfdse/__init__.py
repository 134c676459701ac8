"""Dataflow-to-many-core mapping explorer.

Maps marked-graph dataflow applications onto tiled heterogeneous
many-core models, selectively merging multi-cast actors into multi-reader
buffers, and explores period / memory-footprint / core-cost trade-offs
with an NSGA-II loop over two interchangeable schedule decoders.
"""

from .model import (
    Actor,
    ApplicationGraph,
    ArchitectureGraph,
    Channel,
    SpecificationGraph,
    detect_multicast,
    validate,
)

__all__ = [
    "Actor",
    "ApplicationGraph",
    "ArchitectureGraph",
    "Channel",
    "SpecificationGraph",
    "detect_multicast",
    "validate",
]

__version__ = "0.1.0"
