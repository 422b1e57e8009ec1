"""Multi-Dimensional Reeb Graphs.

The MDRG decomposes a JCN into a hierarchy of quantized Reeb graphs: the
graph of the first field, then per node the graphs of the second field
restricted to that node's joint contour, and so on. ``morseify`` turns any
of these graphs into the Reeb graph of a Morse function (five node types,
distinct critical values) so persistence pairing is well defined.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import InputDataError
from .jcn import JointContourNet, Quantization

__all__ = [
    "ReebNode",
    "ReebGraph",
    "MDRG",
    "reeb_of_dimension1",
    "restrict_and_reeb",
    "build_mdrg",
    "morseify",
    "classify",
    "cycle_rank",
    "mdrg_to_json",
]

_NODE_TYPES = ("minimum", "maximum", "regular", "down-fork", "up-fork")


@dataclass(frozen=True)
class ReebNode:
    id: int
    value: float
    bin: int
    members: tuple[int, ...] = ()  # JCN node ids; empty for synthetic Morse nodes


@dataclass(frozen=True)
class ReebGraph:
    nodes: tuple[ReebNode, ...]
    edges: tuple[tuple[int, int], ...]  # sorted pairs of node ids
    field_index: int = 0

    def __post_init__(self) -> None:
        ids = [n.id for n in self.nodes]
        if ids != sorted(ids) or len(set(ids)) != len(ids):
            raise ValueError("Reeb nodes must be sorted by unique id")

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def node(self, nid: int) -> ReebNode:
        i = np.searchsorted([n.id for n in self.nodes], nid)
        return self.nodes[int(i)]

    def values(self) -> dict[int, float]:
        return {n.id: n.value for n in self.nodes}

    def adjacency(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {n.id: [] for n in self.nodes}
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return adj

    def negated(self) -> "ReebGraph":
        nodes = tuple(replace(n, value=-n.value) for n in self.nodes)
        return ReebGraph(nodes=nodes, edges=self.edges, field_index=self.field_index)


def classify(rg: ReebGraph) -> dict[int, str]:
    """Node types from up/down degrees, ties broken by node id."""
    adj = rg.adjacency()
    order = {n.id: (n.value, n.id) for n in rg.nodes}
    out: dict[int, str] = {}
    for n in rg.nodes:
        down = sum(1 for m in adj[n.id] if order[m] < order[n.id])
        up = sum(1 for m in adj[n.id] if order[m] > order[n.id])
        if down == 0 and up == 0:
            out[n.id] = "isolated"
        elif (down, up) == (0, 1):
            out[n.id] = "minimum"
        elif (down, up) == (1, 0):
            out[n.id] = "maximum"
        elif (down, up) == (1, 1):
            out[n.id] = "regular"
        elif (down, up) == (2, 1):
            out[n.id] = "down-fork"
        elif (down, up) == (1, 2):
            out[n.id] = "up-fork"
        else:
            out[n.id] = "degenerate"
    return out


def cycle_rank(rg: ReebGraph) -> int:
    """First Betti number: |E| - |V| + #components."""
    adj = rg.adjacency()
    seen: set[int] = set()
    comps = 0
    for n in rg.nodes:
        if n.id in seen:
            continue
        comps += 1
        stack = [n.id]
        seen.add(n.id)
        while stack:
            cur = stack.pop()
            for m in adj[cur]:
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
    return len(rg.edges) - len(rg.nodes) + comps


def _components(members: list[int], adj: dict[int, list[int]]) -> list[list[int]]:
    """Connected components of an induced subgraph, each sorted, ordered by min id."""
    member_set = set(members)
    seen: set[int] = set()
    comps: list[list[int]] = []
    for start in sorted(members):
        if start in seen:
            continue
        comp = []
        stack = [start]
        seen.add(start)
        while stack:
            cur = stack.pop()
            comp.append(cur)
            for nxt in adj[cur]:
                if nxt in member_set and nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        comps.append(sorted(comp))
    return comps


def _quantized_reeb(
    jcn: JointContourNet,
    members: list[int],
    field_index: int,
) -> ReebGraph:
    """Contract the induced JCN subgraph along everything but one field."""
    quant = jcn.quants[field_index]
    bins = {m: jcn.nodes[m].bins[field_index] for m in members}
    member_set = set(members)
    adj_full = jcn.adjacency()
    same_adj = {
        m: [x for x in adj_full[m] if x in member_set and bins[x] == bins[m]]
        for m in members
    }
    groups = _components(members, same_adj)
    node_of_member: dict[int, int] = {}
    nodes = []
    centers = quant.centers
    for nid, grp in enumerate(groups):
        b = bins[grp[0]]
        nodes.append(
            ReebNode(id=nid, value=float(centers[b]), bin=b, members=tuple(grp))
        )
        for m in grp:
            node_of_member[m] = nid
    edges = set()
    for m in members:
        for x in adj_full[m]:
            if x in member_set and bins[x] != bins[m]:
                a, b = node_of_member[m], node_of_member[x]
                edges.add((min(a, b), max(a, b)))
    return ReebGraph(nodes=tuple(nodes), edges=tuple(sorted(edges)), field_index=field_index)


def reeb_of_dimension1(jcn: JointContourNet) -> ReebGraph:
    """Quantized Reeb graph of the first field (contract along the others)."""
    if not jcn.nodes:
        raise InputDataError("empty JCN")
    return _quantized_reeb(jcn, [n.id for n in jcn.nodes], 0)


def restrict_and_reeb(
    jcn: JointContourNet,
    members,
    field_index: int,
) -> list[ReebGraph]:
    """Reeb graphs of one field restricted to a set of JCN nodes.

    Splits along ``field_index`` bins and contracts along all later
    fields; one graph is returned per connected component of the induced
    subgraph.
    """
    members = sorted(int(m) for m in members)
    if not members:
        raise InputDataError("restrict_and_reeb needs a nonempty member set")
    if not 0 <= field_index < jcn.field_count:
        raise InputDataError(
            f"field index {field_index} out of range for {jcn.field_count} fields"
        )
    member_set = set(members)
    adj_full = jcn.adjacency()
    adj = {m: [x for x in adj_full[m] if x in member_set] for m in members}
    return [
        _quantized_reeb(jcn, comp, field_index)
        for comp in _components(members, adj)
    ]


@dataclass(frozen=True)
class MDRG:
    """Hierarchy of quantized Reeb graphs.

    ``graphs[0]`` is the first-field graph; ``parents[g]`` is
    ``(parent_graph_index, parent_node_id, parent_bin)`` (None for the
    root); ``levels[g]`` the 1-based dimension of graph g.
    """

    quants: tuple[Quantization, ...]
    graphs: tuple[ReebGraph, ...]
    levels: tuple[int, ...]
    parents: tuple[tuple[int, int, int] | None, ...]

    @property
    def level_count(self) -> int:
        return len(self.quants)

    @property
    def level1(self) -> ReebGraph:
        return self.graphs[0]

    def graphs_at_level(self, level: int) -> list[int]:
        return [g for g, lv in enumerate(self.levels) if lv == level]

    def collection(self, level: int, bin_index: int) -> list[int]:
        """Graph indices at ``level + 1`` whose parent node sits in ``bin_index``.

        These are the per-quantized-value Reeb graph sets that the distance
        matches by optimal bijection.
        """
        return [
            g
            for g, meta in enumerate(self.parents)
            if meta is not None
            and self.levels[g] == level + 1
            and meta[2] == bin_index
        ]

    @property
    def signature(self) -> tuple:
        return tuple(q.signature for q in self.quants)


def build_mdrg(jcn: JointContourNet) -> MDRG:
    """Decompose a JCN into its full Reeb graph hierarchy."""
    level1 = reeb_of_dimension1(jcn)
    graphs: list[ReebGraph] = [level1]
    levels: list[int] = [1]
    parents: list[tuple[int, int, int] | None] = [None]
    frontier = [0]
    for level in range(2, jcn.field_count + 1):
        next_frontier = []
        for gi in frontier:
            for node in graphs[gi].nodes:
                for child in restrict_and_reeb(jcn, node.members, level - 1):
                    graphs.append(child)
                    levels.append(level)
                    parents.append((gi, node.id, node.bin))
                    next_frontier.append(len(graphs) - 1)
        frontier = next_frontier
    return MDRG(
        quants=jcn.quants,
        graphs=tuple(graphs),
        levels=tuple(levels),
        parents=tuple(parents),
    )


def morseify(rg: ReebGraph, epsilon: float) -> ReebGraph:
    """Split degenerate forks and separate equal critical values.

    Returns a graph whose nodes all have one of the five Morse degree
    profiles (isolated single-node components pass through) and whose
    critical values are pairwise distinct. Connectivity and cycle rank are
    preserved exactly; the input is returned unchanged when it is already
    Morse. ``epsilon`` must be far below any genuine value gap.
    """
    if epsilon <= 0:
        raise InputDataError(f"epsilon must be positive, got {epsilon}")
    values = {n.id: n.value for n in rg.nodes}
    meta = {n.id: (n.bin, n.members) for n in rg.nodes}
    adj: dict[int, set[int]] = {n.id: set() for n in rg.nodes}
    for a, b in rg.edges:
        adj[a].add(b)
        adj[b].add(a)
    next_id = max(values, default=-1) + 1
    changed = False

    def order(i: int) -> tuple[float, int]:
        return (values[i], i)

    # 1. no edge may join equal values
    for _ in range(10_000):
        bumped = False
        for a in sorted(adj):
            for b in sorted(adj[a]):
                if values[a] == values[b]:
                    values[max(a, b)] += epsilon
                    bumped = changed = True
        if not bumped:
            break
    else:  # pragma: no cover
        raise RuntimeError("morseify failed to separate edge values")

    def profile(i: int) -> tuple[int, int]:
        down = sum(1 for m in adj[i] if order(m) < order(i))
        return down, len(adj[i]) - down

    def new_node(value: float, like: int) -> int:
        nonlocal next_id, changed
        nid = next_id
        next_id += 1
        values[nid] = value
        meta[nid] = (meta[like][0], ())
        adj[nid] = set()
        changed = True
        return nid

    def connect(a: int, b: int) -> None:
        adj[a].add(b)
        adj[b].add(a)

    def disconnect(a: int, b: int) -> None:
        adj[a].discard(b)
        adj[b].discard(a)

    # 2. split degenerate nodes
    work = sorted(values)
    while work:
        i = work.pop(0)
        down, up = profile(i)
        if (down, up) in ((0, 0), (0, 1), (1, 0), (1, 1), (2, 1), (1, 2)):
            continue
        if down >= 2 and up >= 2:
            top = new_node(values[i] + epsilon, i)
            for m in [m for m in adj[i] if order(m) > order(i)]:
                disconnect(i, m)
                connect(top, m)
            connect(i, top)
            work.extend([i, top])
        elif down >= 3:
            children = sorted((m for m in adj[i] if order(m) < order(i)), key=order)
            for m in children:
                disconnect(i, m)
            prev = None
            for t in range(down - 2):
                fork = new_node(values[i] - (down - 2 - t) * epsilon, i)
                connect(fork, children[t] if prev is None else prev)
                if prev is None:
                    connect(fork, children[1])
                else:
                    connect(fork, children[t + 1])
                prev = fork
            connect(i, prev)
            connect(i, children[-1])
            work.append(i)
        elif up >= 3:
            children = sorted(
                (m for m in adj[i] if order(m) > order(i)), key=order, reverse=True
            )
            for m in children:
                disconnect(i, m)
            prev = None
            for t in range(up - 2):
                fork = new_node(values[i] + (up - 2 - t) * epsilon, i)
                connect(fork, children[t] if prev is None else prev)
                if prev is None:
                    connect(fork, children[1])
                else:
                    connect(fork, children[t + 1])
                prev = fork
            connect(i, prev)
            connect(i, children[-1])
            work.append(i)
        elif down == 0:  # minimum that immediately splits
            connect(new_node(values[i] - epsilon, i), i)
            work.append(i)
        else:  # maximum that immediately joins
            connect(new_node(values[i] + epsilon, i), i)
            work.append(i)

    # 3. pairwise distinct critical values
    def critical(i: int) -> bool:
        down, up = profile(i)
        return (down, up) != (1, 1)

    for _ in range(100):
        crits = sorted((i for i in values if critical(i)), key=order)
        collide = False
        prev_val = None
        for i in crits:
            if prev_val is not None and values[i] <= prev_val:
                values[i] = prev_val + epsilon
                collide = changed = True
            prev_val = values[i]
        if not collide:
            break

    if not changed:
        return rg

    nodes = tuple(
        ReebNode(id=i, value=values[i], bin=meta[i][0], members=meta[i][1])
        for i in sorted(values)
    )
    edges = tuple(sorted((min(a, b), max(a, b)) for a in adj for b in adj[a] if a < b))
    return ReebGraph(nodes=nodes, edges=edges, field_index=rg.field_index)


def mdrg_to_json(mdrg: MDRG) -> str:
    payload = {
        "quantizations": [{"lo": q.lo, "hi": q.hi, "q": q.q} for q in mdrg.quants],
        "graphs": [
            {
                "level": mdrg.levels[g],
                "parent": list(mdrg.parents[g]) if mdrg.parents[g] else None,
                "nodes": [
                    {
                        "id": n.id,
                        "value": n.value,
                        "bin": n.bin,
                        "members": list(n.members),
                    }
                    for n in rg.nodes
                ],
                "edges": [list(e) for e in rg.edges],
            }
            for g, rg in enumerate(mdrg.graphs)
        ],
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))
