from __future__ import annotations

from collections.abc import Callable
from pathlib import Path
from typing import NoReturn

import networkx as nx
import numpy as np
import structlog
from scipy.linalg import eigvalsh
from tenacity import RetryCallState, Retrying, retry_if_result, stop_after_attempt

from overair.config import get_settings
from overair.errors import BaseDisconnected, CertificationFailed, TopologyError
from overair.models.scenario import STANDIN_AGENTS, TopologySpec
from overair.models.topology import (
    ConnectivityCertificate,
    GeneratorKind,
    PhysicalTopology,
    TopologyEvent,
    TopologySequence,
)

logger = structlog.get_logger(__name__)


# --- base graphs -------------------------------------------------------------


def complete_graph(n_agents: int) -> PhysicalTopology:
    edges = frozenset((i, j) for i in range(n_agents) for j in range(i + 1, n_agents))
    return PhysicalTopology(n_agents=n_agents, edges=edges)


def ring_graph(n_agents: int, hops: int = 1) -> PhysicalTopology:
    edges = {
        (i, (i + h) % n_agents) for i in range(n_agents) for h in range(1, hops + 1) if (i + h) % n_agents != i
    }
    return PhysicalTopology(n_agents=n_agents, edges=frozenset(edges))


def path_graph(n_agents: int) -> PhysicalTopology:
    return PhysicalTopology(n_agents=n_agents, edges=frozenset((i, i + 1) for i in range(n_agents - 1)))


def standin_base_graph() -> PhysicalTopology:
    """Deterministic 50-agent connected graph of average degree 4.4.

    A two-hop ring lattice plus one chord (i, i+17) from every fifth agent. This is a
    stand-in for a hand-drawn 50-agent network, not a reproduction of it.
    """
    lattice = ring_graph(STANDIN_AGENTS, hops=2)
    chords = {(i, (i + 17) % STANDIN_AGENTS) for i in range(0, STANDIN_AGENTS, 5)}
    return PhysicalTopology(n_agents=STANDIN_AGENTS, edges=lattice.edges | frozenset(chords))


def load_topology(path: str | Path) -> PhysicalTopology:
    return PhysicalTopology.model_validate_json(Path(path).read_text(encoding="utf-8"))


def save_topology(topo: PhysicalTopology, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(topo.model_dump_json(indent=2), encoding="utf-8")
    return path


def load_sequence(path: str | Path) -> TopologySequence:
    return TopologySequence.model_validate_json(Path(path).read_text(encoding="utf-8"))


def save_sequence(seq: TopologySequence, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(seq.model_dump_json(indent=2), encoding="utf-8")
    return path


def base_from_spec(spec: TopologySpec) -> PhysicalTopology:
    if spec.graph == "complete":
        return complete_graph(spec.n_agents or 0)
    if spec.graph == "ring":
        return ring_graph(spec.n_agents or 0)
    if spec.graph == "standin50":
        return standin_base_graph()
    if spec.graph == "edges":
        return PhysicalTopology(n_agents=spec.n_agents or 0, edges=frozenset(spec.edges or ()))
    return load_topology(spec.path or "")


# --- time-varying topology ---------------------------------------------------


def failed_nodes_mask(seq: TopologySequence, k: int) -> np.ndarray:
    failed = np.zeros(seq.n_agents, dtype=bool)
    event = seq.event_at(k)
    if event is not None and event.failed_nodes:
        failed[list(event.failed_nodes)] = True
    return failed


def active_mask(seq: TopologySequence, k: int) -> np.ndarray:
    """Adjacency of G(k). Node failures remove every incident edge, whatever the link state."""
    if k < 0:
        raise ValueError(f"step index must be nonnegative, got {k}")
    mask = np.array(seq.base.adjacency, dtype=bool)
    event = seq.event_at(k)
    if event is None:
        return mask
    for i, j in event.failed_links:
        mask[i, j] = False
        mask[j, i] = False
    if event.failed_nodes:
        nodes = list(event.failed_nodes)
        mask[nodes, :] = False
        mask[:, nodes] = False
    return mask


def active_topology(seq: TopologySequence, k: int) -> PhysicalTopology:
    return PhysicalTopology.from_adjacency(active_mask(seq, k))


# --- connectivity ------------------------------------------------------------


def _union_certificate(union: np.ndarray, window_start: int, window_len: int, tol: float) -> ConnectivityCertificate:
    n = union.shape[0]
    graph = nx.from_numpy_array(union.astype(float))
    reachable = nx.is_connected(graph)
    if n == 1:
        # a single agent is trivially connected and has no second eigenvalue
        return ConnectivityCertificate(
            window_start=window_start, window_len=window_len, fiedler_value=0.0, connected=True
        )
    laplacian = np.diag(union.sum(axis=1).astype(float)) - union.astype(float)
    fiedler_value = max(float(eigvalsh(laplacian)[1]), 0.0)
    spectral = fiedler_value > tol
    if spectral != reachable:
        raise TopologyError(
            f"connectivity verdicts disagree on window {window_start}: "
            f"lambda2={fiedler_value:.3e}, bfs={reachable}"
        )
    return ConnectivityCertificate(
        window_start=window_start, window_len=window_len, fiedler_value=fiedler_value, connected=spectral
    )


def is_jointly_connected(
    seq: TopologySequence,
    window_start: int,
    L: int | None = None,
    *,
    tol: float | None = None,
) -> ConnectivityCertificate:
    """Certify that G(k) u ... u G(k+L-1) is connected, spectrally and by BFS."""
    window_len = L if L is not None else seq.window
    tol = get_settings().connectivity_tol if tol is None else tol
    union = np.zeros((seq.n_agents, seq.n_agents), dtype=bool)
    for k in range(window_start, window_start + window_len):
        union |= active_mask(seq, k)
    return _union_certificate(union, window_start, window_len, tol)


def certify_sequence(
    seq: TopologySequence,
    *,
    aligned: bool = True,
    tol: float | None = None,
) -> list[ConnectivityCertificate]:
    """Certificates for every aligned window (or every sliding window) inside the horizon."""
    horizon = seq.horizon if seq.horizon is not None else seq.window
    stride = seq.window if aligned else 1
    return [
        is_jointly_connected(seq, start, seq.window, tol=tol)
        for start in range(0, horizon - seq.window + 1, stride)
    ]


def first_failure(certificates: list[ConnectivityCertificate]) -> ConnectivityCertificate | None:
    return next((cert for cert in certificates if not cert.connected), None)


# --- induced-subgraph sampling -----------------------------------------------


def _draw_window(
    graph: nx.Graph, adjacency: np.ndarray, window: int, q: float, rng: np.random.Generator
) -> np.ndarray:
    # Rows 0..L-2 sample agents independently. Row L-1 picks every agent missed so far,
    # then a base-graph path from a random member of each component of the union to a
    # random member of one root component, so the window's union is connected.
    n_agents = adjacency.shape[0]
    picks = np.empty((window, n_agents), dtype=bool)
    picks[:-1] = rng.random((window - 1, n_agents)) < q
    picks[-1] = ~picks[:-1].any(axis=0)

    union = nx.from_numpy_array(_union_of_induced(adjacency, picks).astype(int))
    components = [sorted(component) for component in nx.connected_components(union)]
    if len(components) > 1:
        representatives = [int(rng.choice(component)) for component in components]
        root = representatives[0]
        for member in representatives[1:]:
            picks[-1, nx.shortest_path(graph, member, root)] = True
    return picks


def _union_of_induced(base: np.ndarray, picks: np.ndarray) -> np.ndarray:
    union = np.zeros_like(base)
    for picked in picks:
        union |= base & np.outer(picked, picked)
    return union


def _log_regeneration(window_start: int) -> Callable[[RetryCallState], None]:
    def _after(retry_state: RetryCallState) -> None:
        logger.warning(
            "Sampled window not jointly connected; regenerating",
            window_start=window_start,
            attempt=retry_state.attempt_number,
        )

    return _after


def _raise_certification_failed(window_start: int) -> Callable[[RetryCallState], NoReturn]:
    def _callback(retry_state: RetryCallState) -> NoReturn:
        raise CertificationFailed(window_start=window_start, attempts=retry_state.attempt_number)

    return _callback


def generate_sampled_sequence(
    base: PhysicalTopology,
    L: int,
    q: float,
    horizon: int,
    rng: np.random.Generator,
    *,
    retries: int | None = None,
    tol: float | None = None,
) -> TopologySequence:
    """Time-varying graph by induced-subgraph sampling, L-connected by construction.

    Agents left unpicked at a step are node failures at that step. Every complete
    aligned window is certified and redrawn (same stream, continuing) until connected.
    A trailing partial window is sampled without completion.
    """
    graph = base.to_networkx()
    if base.n_agents > 1 and not nx.is_connected(graph):
        raise BaseDisconnected(base.n_agents, nx.number_connected_components(graph))
    if not 0.0 < q < 1.0:
        raise ValueError(f"sampling probability must lie in (0, 1), got {q}")
    if L < 1:
        raise ValueError(f"window length must be positive, got {L}")

    settings = get_settings()
    retries = settings.certification_retries if retries is None else retries
    tol = settings.connectivity_tol if tol is None else tol
    n = base.n_agents
    adjacency = np.array(base.adjacency, dtype=bool)
    everyone = np.arange(n)
    events: list[TopologyEvent] = []

    for start in range(0, horizon, L):
        length = min(L, horizon - start)
        if length < L:
            picks = rng.random((length, n)) < q
        else:

            def attempt(start: int = start) -> tuple[np.ndarray, ConnectivityCertificate]:
                drawn = _draw_window(graph, adjacency, L, q, rng)
                return drawn, _union_certificate(_union_of_induced(adjacency, drawn), start, L, tol)

            retrying = Retrying(
                stop=stop_after_attempt(retries),
                retry=retry_if_result(lambda outcome: not outcome[1].connected),
                after=_log_regeneration(start),
                retry_error_callback=_raise_certification_failed(start),
            )
            picks, _ = retrying(attempt)
        for offset, picked in enumerate(picks):
            failed = frozenset(everyone[~picked].tolist())
            if failed:
                events.append(TopologyEvent(k=start + offset, failed_nodes=failed))

    return TopologySequence(
        base=base,
        window=L,
        generator=GeneratorKind.SAMPLED,
        q=q,
        horizon=horizon,
        events=tuple(events),
    )


def sequence_from_spec(
    spec: TopologySpec,
    base: PhysicalTopology,
    horizon: int,
    rng: np.random.Generator,
) -> TopologySequence:
    if spec.mode == "static":
        return TopologySequence(base=base, window=spec.window, horizon=horizon)
    if spec.mode == "sampled":
        return generate_sampled_sequence(base, spec.window, spec.q or 0.5, horizon, rng)
    return load_sequence(spec.sequence_path or "")
