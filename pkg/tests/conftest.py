import random

import pytest

from hazardnav.danger import DangerPmf
from hazardnav.environment import EnvironmentGraph, NodeInfo, school54
from hazardnav.fusion import DangerPosterior
from hazardnav.likelihood import LikelihoodMatrix
from hazardnav.planner import BeliefMap


@pytest.fixture(scope="session")
def school():
    return school54()


def make_graph(truths, arcs, start, exits, labels=None, undirected=True):
    """Small-graph helper: truths maps node id -> DangerPmf or 5-tuple."""
    nodes = {}
    for node_id, truth in truths.items():
        pmf = truth if isinstance(truth, DangerPmf) else DangerPmf(tuple(truth))
        nodes[node_id] = NodeInfo(pmf, labels.get(node_id) if labels else None)
    arc_list = list(arcs)
    if undirected:
        arc_list += [(b, a) for a, b in arcs]
    return EnvironmentGraph(nodes, arc_list, start, exits)


def line_graph(truth_by_node, undirected=True):
    """Chain 0-1-...-k with the last node as the exit."""
    ids = sorted(truth_by_node)
    arcs = list(zip(ids, ids[1:]))
    return make_graph(truth_by_node, arcs, ids[0], [ids[-1]], undirected=undirected)


def random_pmf(rng, floor=0.0):
    weights = [rng.random() + floor for _ in range(5)]
    total = sum(weights)
    return DangerPmf(tuple(w / total for w in weights))


def random_matrix(rng, modality):
    cols = []
    for _ in range(5):
        weights = [rng.random() + 0.05 for _ in range(5)]
        total = sum(weights)
        cols.append([w / total for w in weights])
    rows = tuple(tuple(cols[j][i] for j in range(5)) for i in range(5))
    return LikelihoodMatrix(rows, modality)


def random_reachable_graph(rng, max_nodes=9):
    """Random directed graph with >= 1 exit reachable from the start.

    Belief CDFs stay >= 0.1 per level (see random_beliefs), so on <= 8-arc
    simple paths the planner's survival floor can never bind.
    """
    n = rng.randint(2, max_nodes)
    truths = {i: random_pmf(rng, floor=1.0) for i in range(n)}
    arcs = set()
    for a in range(n):
        for b in range(n):
            if a != b and rng.random() < 0.35:
                arcs.add((a, b))
    start = rng.randrange(n)
    exit_count = rng.randint(1, max(1, n // 3))
    exits = rng.sample([i for i in range(n) if i != start], k=min(exit_count, n - 1))
    # Guarantee reachability with a random chain from start to the first exit.
    chain = [start] + rng.sample([i for i in range(n) if i not in (start, exits[0])],
                                 k=rng.randint(0, max(0, n - 2) // 2)) + [exits[0]]
    arcs.update(zip(chain, chain[1:]))
    return make_graph(truths, arcs, start, exits, undirected=False)


def random_beliefs(rng, graph):
    """Full-coverage beliefs with every PMF entry >= 0.1."""
    return BeliefMap(
        {node_id: DangerPosterior(random_pmf(rng, floor=1.0)) for node_id in graph.nodes}
    )


def seeded(seed):
    return random.Random(seed)
