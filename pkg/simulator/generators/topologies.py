from __future__ import annotations

from pathlib import Path

import networkx as nx
import numpy as np

from overair.models.topology import GeneratorKind, PhysicalTopology, TopologyEvent, TopologySequence
from overair.services.graph import save_sequence, save_topology, standin_base_graph

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"
BASE50_PATH = FIXTURES / "topologies" / "base50.json"


def random_connected_graph(n_agents: int, edge_prob: float, rng: np.random.Generator) -> PhysicalTopology:
    """Erdos-Renyi graph with a random spanning path added so it is always connected."""
    seed = int(rng.integers(0, 2**32 - 1))
    graph = nx.gnp_random_graph(n_agents, edge_prob, seed=seed)
    order = rng.permutation(n_agents).tolist()
    graph.add_edges_from(zip(order[:-1], order[1:], strict=True))
    return PhysicalTopology(n_agents=n_agents, edges=frozenset(graph.edges()))


def omitting_sequence(
    base: PhysicalTopology,
    agent: int,
    horizon: int,
    window: int,
) -> TopologySequence:
    """``agent`` is down at every step, so no window can ever reach it."""
    events = tuple(TopologyEvent(k=k, failed_nodes=frozenset({agent})) for k in range(horizon))
    return TopologySequence(
        base=base,
        window=window,
        generator=GeneratorKind.EXPLICIT,
        horizon=horizon,
        events=events,
    )


def rotating_link_failures(base: PhysicalTopology, horizon: int, window: int) -> TopologySequence:
    """Drops one base edge per step in round-robin order; every window stays connected
    when the base graph has no bridges."""
    edges = sorted(base.edges)
    events = tuple(
        TopologyEvent(k=k, failed_links=frozenset({edges[k % len(edges)]})) for k in range(horizon)
    )
    return TopologySequence(
        base=base,
        window=window,
        generator=GeneratorKind.EXPLICIT,
        horizon=horizon,
        events=events,
    )


def write_base50(path: str | Path = BASE50_PATH) -> Path:
    return save_topology(standin_base_graph(), path)


def write_omitting_sequence(path: str | Path, *, agent: int = 7, horizon: int = 30, window: int = 3) -> Path:
    return save_sequence(omitting_sequence(standin_base_graph(), agent, horizon, window), path)
