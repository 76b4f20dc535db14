"""Survival-maximizing route planning over belief maps.

The survival probability of traversing an arc is the destination node's
posterior probability of tolerable danger, ``P(level <= tau)``. A path's
survival is the product over its arcs, so the best route is a shortest path
under per-arc weights ``-log(survival)``; near-zero survivals are clamped at
``SURVIVAL_FLOOR`` to keep the search total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from heapq import heappop, heappush
from typing import Iterable, Mapping

from .danger import DangerPmf, validate_level
from .environment import EnvironmentGraph
from .errors import InputError, PlanningError
from .fusion import DangerPosterior

SURVIVAL_FLOOR = 1e-9


@dataclass(frozen=True)
class PlannedPath:
    """Node sequence from the source to an exit plus its survival estimate."""

    nodes: tuple[int, ...]
    survival_estimate: float


class BeliefMap:
    """Per-node danger posteriors covering every node of a graph."""

    def __init__(self, posteriors: Mapping[int, DangerPosterior]):
        self.posteriors = dict(posteriors)

    @classmethod
    def uniform(cls, graph: EnvironmentGraph) -> "BeliefMap":
        prior = DangerPosterior(DangerPmf.uniform())
        return cls({node_id: prior for node_id in graph.nodes})

    @classmethod
    def from_ground_truth(cls, graph: EnvironmentGraph) -> "BeliefMap":
        return cls(
            {node_id: DangerPosterior(info.truth) for node_id, info in graph.nodes.items()}
        )

    def __getitem__(self, node_id: int) -> DangerPosterior:
        return self.posteriors[node_id]

    def __setitem__(self, node_id: int, posterior: DangerPosterior) -> None:
        self.posteriors[node_id] = posterior

    def __contains__(self, node_id: int) -> bool:
        return node_id in self.posteriors

    def covers(self, graph: EnvironmentGraph) -> bool:
        return all(node_id in self.posteriors for node_id in graph.nodes)


def edge_survival(beliefs: BeliefMap, dest: int, tau: int) -> float:
    """Estimated survival of moving onto ``dest``: P(danger(dest) <= tau)."""
    validate_level(tau, "tolerance")
    try:
        posterior = beliefs[dest]
    except KeyError:
        raise InputError(f"no belief for node {dest}")
    return posterior.pmf.cdf(tau)


def path_survival(
    graph: EnvironmentGraph, beliefs: BeliefMap, path: Iterable[int], tau: int
) -> float:
    """Product of arc survivals along a path; the source contributes none."""
    nodes = list(path)
    if not nodes:
        raise InputError("a path must contain at least its starting node")
    survival = 1.0
    for a, b in zip(nodes, nodes[1:]):
        if (a, b) not in graph.arcs:
            raise InputError(f"path uses missing arc ({a}, {b})")
        survival *= edge_survival(beliefs, b, tau)
    return survival


def _node_weights(graph: EnvironmentGraph, beliefs: BeliefMap, tau: int) -> list[float]:
    weights = []
    for node_id in graph.order:
        s = beliefs[node_id].pmf.cdf(tau)
        weights.append(-math.log(max(min(s, 1.0), SURVIVAL_FLOOR)))
    return weights


def _min_weight_route(
    adjacency: tuple[tuple[int, ...], ...],
    weight: list[float],
    source: int,
    exits: frozenset[int],
) -> tuple[int, ...] | None:
    """Dijkstra over dense indices with deterministic tie-breaking.

    Heap keys are ``(total weight, hop count, node sequence)``, so equal-cost
    routes resolve to fewer hops and then the lexicographically smallest
    sequence. Weights are per-destination-node and non-negative, which keeps
    keys monotone along edges; the first exit popped is therefore optimal.
    """
    visited = bytearray(len(adjacency))
    heap: list[tuple[float, int, tuple[int, ...]]] = [(0.0, 0, (source,))]
    while heap:
        dist, hops, path = heappop(heap)
        v = path[-1]
        if visited[v]:
            continue
        visited[v] = 1
        if v in exits:
            return path
        hops += 1
        for u in adjacency[v]:
            if not visited[u]:
                heappush(heap, (dist + weight[u], hops, path + (u,)))
    return None


def safest_path(
    graph: EnvironmentGraph,
    beliefs: BeliefMap,
    tau: int,
    source: int | None = None,
    exits: Iterable[int] | None = None,
) -> PlannedPath:
    """Maximum-survival route from ``source`` to the best exit in the set."""
    validate_level(tau, "tolerance")
    source = graph.start if source is None else source
    exit_ids = graph.exits if exits is None else frozenset(exits)
    if source not in graph.nodes:
        raise InputError(f"unknown source node {source}")
    for e in exit_ids:
        if e not in graph.nodes:
            raise InputError(f"unknown exit node {e}")
    if not beliefs.covers(graph):
        missing = sorted(set(graph.nodes) - set(beliefs.posteriors))
        raise InputError(f"belief map does not cover nodes {missing[:5]}")
    weights = _node_weights(graph, beliefs, tau)
    route = _min_weight_route(
        graph.adjacency,
        weights,
        graph.index[source],
        frozenset(graph.index[e] for e in exit_ids),
    )
    if route is None:
        raise PlanningError(f"no exit in {sorted(exit_ids)} is reachable from {source}")
    nodes = tuple(graph.order[i] for i in route)
    return PlannedPath(nodes, path_survival(graph, beliefs, nodes, tau))


def brute_force_safest_path(
    graph: EnvironmentGraph,
    beliefs: BeliefMap,
    tau: int,
    source: int | None = None,
    exits: Iterable[int] | None = None,
    max_nodes: int = 12,
) -> PlannedPath:
    """Exhaustive maximum-survival search over all simple paths.

    Only for small graphs; used as an independent check of ``safest_path``.
    Applies the same tie rule: survival, then fewer hops, then the smallest
    node sequence.
    """
    if graph.node_count > max_nodes:
        raise InputError(
            f"brute-force search refused: {graph.node_count} nodes > cap {max_nodes}"
        )
    validate_level(tau, "tolerance")
    source = graph.start if source is None else source
    exit_ids = graph.exits if exits is None else frozenset(exits)
    if not beliefs.covers(graph):
        raise InputError("belief map does not cover the graph")
    survival = {
        node_id: beliefs[node_id].pmf.cdf(tau) for node_id in graph.order
    }
    best: tuple[float, int, tuple[int, ...]] | None = None

    def consider(path: tuple[int, ...], s: float):
        nonlocal best
        key = (-s, len(path), path)
        if best is None or key < best:
            best = key

    def extend(path: tuple[int, ...], s: float, on_path: set[int]):
        node = path[-1]
        if node in exit_ids:
            consider(path, s)
            return
        for nxt in graph.neighbors(node):
            if nxt not in on_path:
                on_path.add(nxt)
                extend(path + (nxt,), s * survival[nxt], on_path)
                on_path.remove(nxt)

    extend((source,), 1.0, {source})
    if best is None:
        raise PlanningError(f"no exit in {sorted(exit_ids)} is reachable from {source}")
    return PlannedPath(best[2], -best[0])
