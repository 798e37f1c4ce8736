from __future__ import annotations

from enum import Enum
from functools import cached_property
from typing import Any

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveInt, field_serializer, field_validator, model_validator

Edge = tuple[int, int]


def _normalize_edge(raw: Any) -> Edge:
    i, j = (int(v) for v in raw)
    return (i, j) if i < j else (j, i)


def _normalize_edges(raw: Any) -> frozenset[Edge]:
    if raw is None:
        return frozenset()
    return frozenset(_normalize_edge(edge) for edge in raw)


class PhysicalTopology(BaseModel):
    """Undirected communication graph on agents 0..n_agents-1."""

    model_config = ConfigDict(frozen=True)

    n_agents: PositiveInt
    edges: frozenset[Edge] = Field(default_factory=frozenset)

    @field_validator("edges", mode="before")
    @classmethod
    def _coerce_edges(cls, value: Any) -> frozenset[Edge]:
        return _normalize_edges(value)

    @model_validator(mode="after")
    def _check_edges(self) -> PhysicalTopology:
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop ({i},{i}) is not allowed")
            if i < 0 or j >= self.n_agents:
                raise ValueError(f"edge ({i},{j}) out of range for {self.n_agents} agents")
        return self

    @field_serializer("edges")
    def _serialize_edges(self, edges: frozenset[Edge]) -> list[list[int]]:
        return [list(edge) for edge in sorted(edges)]

    @classmethod
    def from_adjacency(cls, mask: np.ndarray) -> PhysicalTopology:
        rows, cols = np.nonzero(np.triu(mask, k=1))
        return cls(n_agents=mask.shape[0], edges=frozenset(zip(rows.tolist(), cols.tolist(), strict=True)))

    @cached_property
    def adjacency(self) -> np.ndarray:
        mask = np.zeros((self.n_agents, self.n_agents), dtype=bool)
        for i, j in self.edges:
            mask[i, j] = True
            mask[j, i] = True
        mask.setflags(write=False)
        return mask

    def neighbors(self, agent: int) -> list[int]:
        return np.flatnonzero(self.adjacency[agent]).tolist()

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n_agents))
        graph.add_edges_from(self.edges)
        return graph


class GeneratorKind(str, Enum):
    STATIC = "static"
    SAMPLED = "induced_subgraph_sampling"
    EXPLICIT = "explicit"


class TopologyEvent(BaseModel):
    """Failures in force at a single step."""

    model_config = ConfigDict(frozen=True)

    k: int = Field(ge=0)
    failed_nodes: frozenset[int] = Field(default_factory=frozenset)
    failed_links: frozenset[Edge] = Field(default_factory=frozenset)

    @field_validator("failed_links", mode="before")
    @classmethod
    def _coerce_links(cls, value: Any) -> frozenset[Edge]:
        return _normalize_edges(value)

    @field_serializer("failed_nodes")
    def _serialize_nodes(self, nodes: frozenset[int]) -> list[int]:
        return sorted(nodes)

    @field_serializer("failed_links")
    def _serialize_links(self, links: frozenset[Edge]) -> list[list[int]]:
        return [list(link) for link in sorted(links)]


class TopologySequence(BaseModel):
    """Time-varying graph G(k): the base graph minus the failures recorded for step k."""

    model_config = ConfigDict(frozen=True)

    base: PhysicalTopology
    window: PositiveInt = 1
    generator: GeneratorKind = GeneratorKind.STATIC
    q: float | None = Field(default=None, gt=0, lt=1)
    horizon: int | None = Field(default=None, ge=0)
    events: tuple[TopologyEvent, ...] = ()

    @model_validator(mode="after")
    def _check_events(self) -> TopologySequence:
        seen: set[int] = set()
        n = self.base.n_agents
        for event in self.events:
            if event.k in seen:
                raise ValueError(f"duplicate event for step {event.k}")
            seen.add(event.k)
            bad_nodes = [v for v in event.failed_nodes if not 0 <= v < n]
            if bad_nodes:
                raise ValueError(f"step {event.k}: failed nodes {bad_nodes} out of range")
            for i, j in event.failed_links:
                if i == j or i < 0 or j >= n:
                    raise ValueError(f"step {event.k}: failed link ({i},{j}) is invalid")
        return self

    @classmethod
    def static(cls, base: PhysicalTopology, window: int = 1) -> TopologySequence:
        return cls(base=base, window=window, generator=GeneratorKind.STATIC)

    @property
    def n_agents(self) -> int:
        return self.base.n_agents

    @cached_property
    def event_index(self) -> dict[int, TopologyEvent]:
        return {event.k: event for event in self.events}

    def event_at(self, k: int) -> TopologyEvent | None:
        return self.event_index.get(k)


class ConnectivityCertificate(BaseModel):
    model_config = ConfigDict(frozen=True)

    window_start: int
    window_len: int
    fiedler_value: float = Field(ge=0.0)
    connected: bool
