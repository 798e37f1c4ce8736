from __future__ import annotations
from .topologies import (
    omitting_sequence,
    random_connected_graph,
    rotating_link_failures,
    write_base50,
    write_omitting_sequence,
)

__all__ = [
    "omitting_sequence",
    "random_connected_graph",
    "rotating_link_failures",
    "write_base50",
    "write_omitting_sequence",
]
