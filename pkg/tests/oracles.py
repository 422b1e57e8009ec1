"""Independent brute-force oracles used to check the fast implementations.

These deliberately avoid the package's union-find/threshold-search code
paths: components are recomputed by BFS per threshold, loops come from
exhaustive cycle-space enumeration, and matchings from factorial search.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations, permutations

import numpy as np


def _order_key(rg):
    values = rg.values()
    return lambda nid: (values[nid], nid)


def _bfs_components(nodes, adjacency):
    nodes = set(nodes)
    seen = set()
    comps = []
    for start in sorted(nodes):
        if start in seen:
            continue
        comp = {start}
        queue = [start]
        seen.add(start)
        while queue:
            cur = queue.pop()
            for nxt in adjacency.get(cur, ()):
                if nxt in nodes and nxt not in seen:
                    seen.add(nxt)
                    comp.add(nxt)
                    queue.append(nxt)
        comps.append(comp)
    return comps


def sweep_pd0_oracle(rg):
    """Threshold sweep with from-scratch component recomputation.

    Returns a sorted list of (birth, death) tuples matching compute_pd0's
    convention (global pair per multi-node component, no (v, v) points).
    """
    values = rg.values()
    key = _order_key(rg)
    adjacency = {n.id: set() for n in rg.nodes}
    for a, b in rg.edges:
        adjacency[a].add(b)
        adjacency[b].add(a)
    order = sorted(adjacency, key=key)
    active: list[int] = []
    prev_comps: list[set[int]] = []
    points = []
    for u in order:
        active.append(u)
        comps = _bfs_components(active, adjacency)
        u_comp = next(c for c in comps if u in c)
        merged = [c for c in prev_comps if c & u_comp]
        if len(merged) >= 2:
            mins = sorted((min(c, key=key) for c in merged), key=key)
            for dying in mins[1:]:
                points.append((values[dying], values[u]))
        prev_comps = comps
    for comp in prev_comps:
        if len(comp) >= 2:
            lo = min(comp, key=key)
            hi = max(comp, key=key)
            points.append((values[lo], values[hi]))
    return sorted(points)


def _edge_set(rg):
    return {tuple(sorted(e)) for e in rg.edges}


def _spanning_forest_cycbasis(rg):
    """Fundamental cycles as edge sets from a BFS spanning forest."""
    adjacency = {n.id: set() for n in rg.nodes}
    for a, b in rg.edges:
        adjacency[a].add(b)
        adjacency[b].add(a)
    parent: dict[int, int | None] = {}
    tree_edges = set()
    for start in sorted(adjacency):
        if start in parent:
            continue
        parent[start] = None
        queue = [start]
        while queue:
            cur = queue.pop(0)
            for nxt in sorted(adjacency[cur]):
                if nxt not in parent:
                    parent[nxt] = cur
                    tree_edges.add(tuple(sorted((cur, nxt))))
                    queue.append(nxt)

    def path_to_root(v):
        path = [v]
        while parent[path[-1]] is not None:
            path.append(parent[path[-1]])
        return path

    basis = []
    for e in sorted(_edge_set(rg) - tree_edges):
        a, b = e
        pa, pb = path_to_root(a), path_to_root(b)
        sa, sb = set(pa), set(pb)
        meet = next(x for x in pa if x in sb)
        cyc = {e}
        for path in (pa, pb):
            for i in range(len(path) - 1):
                if path[i] == meet:
                    break
                cyc.add(tuple(sorted((path[i], path[i + 1]))))
        basis.append(frozenset(cyc))
    return basis


def enumerate_simple_cycles(rg):
    """All simple cycles, as frozensets of edges (cycle-space search)."""
    basis = _spanning_forest_cycbasis(rg)
    cycles = set()
    for r in range(1, len(basis) + 1):
        for combo in combinations(basis, r):
            edges = frozenset()
            for cyc in combo:
                edges = edges.symmetric_difference(cyc)
            if not edges:
                continue
            degree: dict[int, int] = {}
            for a, b in edges:
                degree[a] = degree.get(a, 0) + 1
                degree[b] = degree.get(b, 0) + 1
            if any(d != 2 for d in degree.values()):
                continue
            adjacency: dict[int, set[int]] = {}
            for a, b in edges:
                adjacency.setdefault(a, set()).add(b)
                adjacency.setdefault(b, set()).add(a)
            comps = _bfs_components(degree, adjacency)
            if len(comps) == 1:
                cycles.add(edges)
    return cycles


def cycle_space_exdg1_oracle(rg):
    """Extended loop pairing by exhaustive search over all simple cycles.

    For every node that is the maximum of some simple cycle, take the
    cycle with the largest minimum and pair the two; returns sorted
    (birth, death) = (fork value, cycle-min value) tuples.
    """
    values = rg.values()
    key = _order_key(rg)
    by_max: dict[int, list[frozenset]] = {}
    for cyc in enumerate_simple_cycles(rg):
        nodes = {v for e in cyc for v in e}
        top = max(nodes, key=key)
        by_max.setdefault(top, []).append(cyc)
    points = []
    for top, cycles in by_max.items():
        best_min = None
        for cyc in cycles:
            nodes = {v for e in cyc for v in e}
            cyc_min = min(nodes, key=key)
            if best_min is None or key(cyc_min) > key(best_min):
                best_min = cyc_min
        points.append((values[top], values[best_min]))
    return sorted(points)


@lru_cache(maxsize=None)
def _perm_array(n: int) -> np.ndarray:
    return np.array(list(permutations(range(n))), dtype=np.int64)


def brute_bottleneck(xa: np.ndarray, ya: np.ndarray) -> float:
    """Factorial minimization over diagonal-augmented bijections."""
    m, n = len(xa), len(ya)
    size = m + n
    if size == 0:
        return 0.0
    costs = np.zeros((size, size))
    if m and n:
        costs[:m, :n] = np.abs(xa[:, None, :] - ya[None, :, :]).max(axis=2)
    if m:
        costs[:m, n:] = (np.abs(xa[:, 1] - xa[:, 0]) / 2.0)[:, None]
    if n:
        costs[m:, :n] = (np.abs(ya[:, 1] - ya[:, 0]) / 2.0)[None, :]
    perms = _perm_array(size)
    rows = np.arange(size)
    return float(costs[rows, perms].max(axis=1).min())


def brute_assignment(cost: np.ndarray, objective: str) -> float:
    """Best achievable total (min-sum) or maximum (min-max) over all perms."""
    cost = np.asarray(cost, dtype=np.float64)
    n = cost.shape[0]
    perms = _perm_array(n)
    rows = np.arange(n)
    gathered = cost[rows, perms]
    if objective == "minsum":
        return float(gathered.sum(axis=1).min())
    return float(gathered.max(axis=1).min())


def random_reeb_graph(rng: np.random.Generator, max_nodes: int = 12):
    """Connected random graph with values, then morseified by the caller.

    Occasionally injects repeated values and high-degree nodes so the
    Morse-ification paths get exercised.
    """
    from mftopo.mdrg import ReebGraph, ReebNode

    n = int(rng.integers(2, max_nodes + 1))
    edges = set()
    for i in range(1, n):
        edges.add((int(rng.integers(0, i)), i))
    extra = int(rng.integers(0, 4))
    for _ in range(extra):
        a, b = rng.integers(0, n, 2)
        if a != b:
            edges.add((min(int(a), int(b)), max(int(a), int(b))))
    values = rng.uniform(0, 10, n)
    if rng.random() < 0.3 and n >= 3:  # force ties
        values[rng.integers(0, n)] = values[rng.integers(0, n)]
    values = np.round(values, 3)  # coarse grid makes collisions common
    nodes = tuple(
        ReebNode(id=i, value=float(values[i]), bin=0) for i in range(n)
    )
    return ReebGraph(nodes=nodes, edges=tuple(sorted(edges)), field_index=0)
