"""Directed location graphs with per-node ground-truth danger PMFs.

The on-disk format is JSON:

    {"undirected": bool, "nodes": [{"id": int, "truth": [5 floats], "label": str?}],
     "arcs": [[int, int]], "start": int, "exits": [int]}

``undirected: true`` is loader sugar: each listed arc is expanded into both
directions. Graphs are immutable after construction and safe to share across
workers.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .danger import DangerPmf
from .errors import GraphValidationError, InputError

SCHOOL54_ASSET = "school54.json"


@dataclass(frozen=True)
class NodeInfo:
    truth: DangerPmf
    label: str | None = None


class EnvironmentGraph:
    """Validated directed graph of locations.

    Besides the raw node/arc data this precomputes dense-index adjacency and
    per-node truth CDFs, which the planner and mission loop lean on heavily.
    """

    def __init__(
        self,
        nodes: Mapping[int, NodeInfo],
        arcs: Iterable[tuple[int, int]],
        start: int,
        exits: Iterable[int],
    ):
        self.nodes = dict(sorted(nodes.items()))
        self.arcs = frozenset((int(a), int(b)) for a, b in arcs)
        self.start = int(start)
        self.exits = frozenset(int(e) for e in exits)
        self._validate()

        self.order = tuple(self.nodes)  # sorted node ids
        self.index = {node_id: i for i, node_id in enumerate(self.order)}
        out: list[list[int]] = [[] for _ in self.order]
        for a, b in self.arcs:
            out[self.index[a]].append(self.index[b])
        # Dense indices follow ascending node ids, so sorting dense indices
        # matches sorting ids; path tie-breaks rely on this.
        self.adjacency = tuple(tuple(sorted(n)) for n in out)
        self.truth_cumulative = tuple(
            self._cumulative(self.nodes[node_id].truth) for node_id in self.order
        )

    @staticmethod
    def _cumulative(pmf: DangerPmf) -> tuple[float, ...]:
        total = 0.0
        cum = []
        for p in pmf.probs:
            total += p
            cum.append(total)
        return tuple(cum)

    def _validate(self):
        if not self.nodes:
            raise GraphValidationError("graph has no nodes")
        if self.start not in self.nodes:
            raise GraphValidationError(f"start node {self.start} is not in the graph")
        if not self.exits:
            raise GraphValidationError("graph needs at least one exit")
        for e in sorted(self.exits):
            if e not in self.nodes:
                raise GraphValidationError(f"exit node {e} is not in the graph")
        for a, b in sorted(self.arcs):
            if a == b:
                raise GraphValidationError(f"self-loop arc ({a}, {b}) is not allowed")
            if a not in self.nodes or b not in self.nodes:
                raise GraphValidationError(f"arc ({a}, {b}) references a missing node")
        # Some exit must be reachable from the start.
        succ: dict[int, list[int]] = {node_id: [] for node_id in self.nodes}
        for a, b in self.arcs:
            succ[a].append(b)
        seen = {self.start}
        frontier = [self.start]
        while frontier:
            node = frontier.pop()
            if node in self.exits:
                return
            for nxt in succ[node]:
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        raise GraphValidationError(
            f"no exit is reachable from start node {self.start}"
        )

    # -- queries ------------------------------------------------------------

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def truth(self, node_id: int) -> DangerPmf:
        return self.nodes[node_id].truth

    def neighbors(self, node_id: int) -> tuple[int, ...]:
        """Out-neighbors of a node under the directed arcs, ascending."""
        if node_id not in self.nodes:
            raise InputError(f"unknown node {node_id}")
        return tuple(self.order[i] for i in self.adjacency[self.index[node_id]])

    def __eq__(self, other):
        if not isinstance(other, EnvironmentGraph):
            return NotImplemented
        return (
            self.nodes == other.nodes
            and self.arcs == other.arcs
            and self.start == other.start
            and self.exits == other.exits
        )

    def __hash__(self):
        return hash((self.start, self.exits, len(self.nodes), len(self.arcs)))

    def __repr__(self):
        return (
            f"EnvironmentGraph(nodes={len(self.nodes)}, arcs={len(self.arcs)}, "
            f"start={self.start}, exits={sorted(self.exits)})"
        )


# ---------------------------------------------------------------------------
# File format
# ---------------------------------------------------------------------------

def environment_from_dict(data: dict, source: str = "environment") -> EnvironmentGraph:
    try:
        undirected = bool(data.get("undirected", False))
        nodes = {}
        for entry in data["nodes"]:
            node_id = int(entry["id"])
            if node_id in nodes:
                raise GraphValidationError(f"duplicate node id {node_id}")
            if node_id < 0:
                raise GraphValidationError(f"node ids must be non-negative, got {node_id}")
            truth = DangerPmf(tuple(float(p) for p in entry["truth"]))
            nodes[node_id] = NodeInfo(truth, entry.get("label"))
        arcs = [(int(a), int(b)) for a, b in data["arcs"]]
        if undirected:
            arcs += [(b, a) for a, b in arcs]
        start = int(data["start"])
        exits = [int(e) for e in data["exits"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{source}: malformed environment object: {exc!r}", code="E_ENV_PARSE")
    except InputError as exc:
        raise GraphValidationError(f"{source}: {exc}")
    return EnvironmentGraph(nodes, arcs, start, exits)


def environment_to_dict(graph: EnvironmentGraph) -> dict:
    """Normalized form: directed arc list, nodes and arcs sorted."""
    nodes = []
    for node_id, info in graph.nodes.items():
        entry: dict = {"id": node_id, "truth": list(info.truth.probs)}
        if info.label is not None:
            entry["label"] = info.label
        nodes.append(entry)
    return {
        "undirected": False,
        "nodes": nodes,
        "arcs": [list(arc) for arc in sorted(graph.arcs)],
        "start": graph.start,
        "exits": sorted(graph.exits),
    }


def load_environment(path: str | Path) -> EnvironmentGraph:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON: {exc}", code="E_ENV_PARSE")
    return environment_from_dict(data, source=str(path))


def save_environment(graph: EnvironmentGraph, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write(environment_json(graph))


def environment_json(graph: EnvironmentGraph) -> str:
    """Canonical serialization; byte-stable for identical graphs."""
    return json.dumps(environment_to_dict(graph), indent=2) + "\n"


def school54() -> EnvironmentGraph:
    """The bundled 54-node, two-exit school building map."""
    payload = resources.files(__package__).joinpath(f"assets/{SCHOOL54_ASSET}")
    return environment_from_dict(json.loads(payload.read_text()), source=SCHOOL54_ASSET)


# ---------------------------------------------------------------------------
# Synthetic generation
# ---------------------------------------------------------------------------

def generate_synthetic(
    n: int,
    connectivity: float,
    regions: Sequence[tuple[float, DangerPmf]],
    exits: int = 2,
    seed: int = 0,
) -> EnvironmentGraph:
    """Random region-structured environment, deterministic under ``seed``.

    Nodes are split into contiguous id blocks, one per region, each taking
    the region's ground-truth PMF. A locally-attached random tree plus extra
    short-range edges (targeting the requested average out-degree) keeps the
    graph connected, the start sits in the lowest-danger region, and exits go
    to the nodes farthest from the start.
    """
    if n < 2:
        raise InputError(f"need at least 2 nodes, got {n}")
    if connectivity < 1:
        raise InputError(f"connectivity must be >= 1, got {connectivity}")
    if not regions:
        raise InputError("need at least one region")
    if not 1 <= exits <= n - 1:
        raise InputError(f"exit count must be in 1..{n - 1}, got {exits}")
    fractions = [f for f, _ in regions]
    if any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise InputError(f"region fractions must be non-negative and sum to 1: {fractions}")

    rng = random.Random(seed)

    # Largest-remainder split of n nodes over the regions.
    raw = [f * n for f in fractions]
    sizes = [int(r) for r in raw]
    leftovers = sorted(
        range(len(regions)), key=lambda i: (raw[i] - sizes[i], i), reverse=True
    )
    for i in range(n - sum(sizes)):
        sizes[leftovers[i % len(regions)]] += 1

    nodes: dict[int, NodeInfo] = {}
    region_of: list[int] = []
    node_id = 0
    for ri, ((_, pmf), size) in enumerate(zip(regions, sizes)):
        for _ in range(size):
            nodes[node_id] = NodeInfo(pmf, f"region{ri}-{node_id}")
            region_of.append(ri)
            node_id += 1

    # Random tree with local attachment, then extra short-range edges.
    window = max(2, n // 8)
    pairs = set()
    for i in range(1, n):
        parent = rng.randrange(max(0, i - window), i)
        pairs.add((parent, i))
    target_edges = round(n * connectivity / 2)
    extra = target_edges - (n - 1)
    attempts = 0
    while extra > 0 and attempts < 20 * (extra + 1):
        attempts += 1
        a = rng.randrange(n)
        b = rng.randrange(max(0, a - window), min(n, a + window + 1))
        lo, hi = min(a, b), max(a, b)
        if lo != hi and (lo, hi) not in pairs:
            pairs.add((lo, hi))
            extra -= 1
    arcs = [(a, b) for a, b in pairs] + [(b, a) for a, b in pairs]

    safest_region = min(
        range(len(regions)), key=lambda ri: regions[ri][1].expected_level()
    )
    start = region_of.index(safest_region)

    # Exits: the nodes farthest from the start by hop count.
    adj: list[list[int]] = [[] for _ in range(n)]
    for a, b in pairs:
        adj[a].append(b)
        adj[b].append(a)
    dist = [-1] * n
    dist[start] = 0
    frontier = [start]
    while frontier:
        nxt = []
        for u in frontier:
            for v in adj[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    nxt.append(v)
        frontier = nxt
    candidates = sorted(
        (i for i in range(n) if i != start), key=lambda i: (-dist[i], -i)
    )
    exit_nodes = candidates[:exits]

    return EnvironmentGraph(nodes, arcs, start, exit_nodes)
