"""Persistence diagrams of Morse-ified Reeb graphs.

Three diagrams per graph: ``pd0`` pairs ordinary down-forks with the
minima they kill during the ascending sweep and replaces the essential bar
with the global (min, max) pair; ``pd0-neg`` is the same computation on
the value-negated graph (superlevel filtration); ``exdg1`` pairs each
essential down-fork with the highest-valued minimum over the cycles it
closes, one point per independent loop.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import InputDataError
from .mdrg import ReebGraph, classify, morseify

__all__ = [
    "DiagramPoint",
    "PersistenceDiagram",
    "compute_pd0",
    "compute_pd0_neg",
    "compute_exdg1",
    "diagram_set",
    "require_morse",
    "diagrams_to_csv",
    "diagrams_from_csv",
]

KINDS = ("pd0", "pd0-neg", "exdg1")


@dataclass(frozen=True)
class DiagramPoint:
    birth: float
    death: float
    birth_node: int
    death_node: int

    @property
    def persistence(self) -> float:
        return abs(self.death - self.birth)


@dataclass(frozen=True)
class PersistenceDiagram:
    points: tuple[DiagramPoint, ...]
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise InputDataError(f"unknown diagram kind {self.kind!r}")

    def __len__(self) -> int:
        return len(self.points)

    def array(self) -> np.ndarray:
        if not self.points:
            return np.empty((0, 2))
        return np.array([[p.birth, p.death] for p in self.points])

    def max_half_persistence(self) -> float:
        if not self.points:
            return 0.0
        return max(p.persistence for p in self.points) / 2.0

    @staticmethod
    def empty(kind: str) -> "PersistenceDiagram":
        return PersistenceDiagram(points=(), kind=kind)


def require_morse(rg: ReebGraph) -> None:
    """Reject graphs that are not Reeb graphs of a Morse function.

    Isolated nodes (single-node components) are tolerated; they carry a
    trivial min=max contour.
    """
    types = classify(rg)
    bad = [i for i, t in types.items() if t == "degenerate"]
    if bad:
        raise InputDataError(f"non-Morse Reeb graph: degenerate node(s) {bad}")
    crit_values = sorted(
        n.value for n in rg.nodes if types[n.id] not in ("regular", "isolated")
    )
    for a, b in zip(crit_values, crit_values[1:]):
        if a == b:
            raise InputDataError(
                f"non-Morse Reeb graph: repeated critical value {a!r}"
            )


def _sweep_order(rg: ReebGraph) -> list[int]:
    return [n.id for n in sorted(rg.nodes, key=lambda n: (n.value, n.id))]


def compute_pd0(rg: ReebGraph) -> PersistenceDiagram:
    """0-dimensional diagram of the sublevel filtration.

    Disconnected graphs are processed per component; every component with
    at least two nodes contributes its global (min, max) pair in place of
    the infinite bar. The zero-persistence (v, v) pair of single-node
    components is omitted (it is invisible to the bottleneck distance).
    """
    require_morse(rg)
    values = rg.values()
    adj = rg.adjacency()
    order = _sweep_order(rg)
    rank = {nid: i for i, nid in enumerate(order)}

    parent: dict[int, int] = {}
    comp_min: dict[int, int] = {}
    comp_max: dict[int, int] = {}
    comp_size: dict[int, int] = {}

    def find(a: int) -> int:
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    points: list[DiagramPoint] = []
    for u in order:
        parent[u] = u
        comp_min[u] = u
        comp_max[u] = u
        comp_size[u] = 1
        for w in adj[u]:
            if rank.get(w, 1 << 60) >= rank[u]:
                continue  # not yet activated
            ru, rw = find(u), find(w)
            if ru == rw:
                continue  # closes a loop; handled by the extended pairing
            mu, mw = comp_min[ru], comp_min[rw]
            if (values[mu], mu) <= (values[mw], mw):
                survivor, dying = mu, mw
            else:
                survivor, dying = mw, mu
            if dying != u:
                # merging two components that existed before u; u merely
                # being absorbed into a lower component is not a death
                points.append(
                    DiagramPoint(
                        birth=values[dying],
                        death=values[u],
                        birth_node=dying,
                        death_node=u,
                    )
                )
            parent[rw] = ru
            comp_min[ru] = survivor
            comp_max[ru] = max(comp_max[ru], comp_max[rw], key=lambda x: (values[x], x))
            comp_size[ru] += comp_size[rw]

    roots = sorted({find(n.id) for n in rg.nodes})
    for root in roots:
        if comp_size[root] < 2:
            continue
        lo, hi = comp_min[root], comp_max[root]
        points.append(
            DiagramPoint(
                birth=values[lo], death=values[hi], birth_node=lo, death_node=hi
            )
        )
    points.sort(key=lambda p: (p.birth, p.death, p.birth_node))
    return PersistenceDiagram(points=tuple(points), kind="pd0")


def compute_pd0_neg(rg: ReebGraph) -> PersistenceDiagram:
    """PD0 of the superlevel filtration, reported in negated coordinates."""
    neg = compute_pd0(rg.negated())
    return PersistenceDiagram(points=neg.points, kind="pd0-neg")


def compute_exdg1(rg: ReebGraph) -> PersistenceDiagram:
    """First extended diagram: one (down-fork, up-fork) pair per loop.

    For each essential down-fork, taken in decreasing value, the paired
    node is the bottleneck of the maximin path between its two lower
    branches; that node realizes the largest cycle minimum.
    """
    require_morse(rg)
    values = rg.values()
    adj = rg.adjacency()
    order = _sweep_order(rg)
    rank = {nid: i for i, nid in enumerate(order)}

    parent = {nid: nid for nid in order}

    def find(a: int) -> int:
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    essential: list[tuple[int, int, int]] = []
    activated: set[int] = set()
    for u in order:
        activated.add(u)
        lower = [w for w in adj[u] if rank[w] < rank[u]]
        if len(lower) == 2 and find(lower[0]) == find(lower[1]):
            essential.append((u, lower[0], lower[1]))
        for w in lower:
            parent[find(w)] = find(u)

    points: list[DiagramPoint] = []
    for u, w1, w2 in sorted(essential, key=lambda e: (values[e[0]], e[0]), reverse=True):
        below = [x for x in order if rank[x] < rank[u]]
        # insert nodes from the top; the node completing the w1-w2 link is
        # the maximin bottleneck (larger ids first so ties pick smaller ids)
        sub_parent: dict[int, int] = {}

        def sfind(a: int) -> int:
            root = a
            while sub_parent[root] != root:
                root = sub_parent[root]
            while sub_parent[a] != root:
                sub_parent[a], a = root, sub_parent[a]
            return root

        bottleneck_node = None
        for x in sorted(below, key=lambda n: (values[n], n), reverse=True):
            sub_parent[x] = x
            for nb in adj[x]:
                if nb in sub_parent and rank[nb] < rank[u]:
                    sub_parent[sfind(nb)] = sfind(x)
            if w1 in sub_parent and w2 in sub_parent and sfind(w1) == sfind(w2):
                bottleneck_node = x
                break
        if bottleneck_node is None:  # pragma: no cover
            raise RuntimeError("essential fork without a connecting cycle")
        points.append(
            DiagramPoint(
                birth=values[u],
                death=values[bottleneck_node],
                birth_node=u,
                death_node=bottleneck_node,
            )
        )
    points.sort(key=lambda p: (p.birth, p.death, p.birth_node))
    return PersistenceDiagram(points=tuple(points), kind="exdg1")


def diagram_set(rg: ReebGraph, epsilon: float) -> dict[str, PersistenceDiagram]:
    """Morse-ify once and compute all three diagrams."""
    morse = morseify(rg, epsilon)
    return {
        "pd0": compute_pd0(morse),
        "pd0-neg": compute_pd0_neg(morse),
        "exdg1": compute_exdg1(morse),
    }


def diagrams_to_csv(diagrams) -> str:
    """Serialize diagrams to the CSV interchange format."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["kind", "birth", "death", "birth_node", "death_node"])
    for dg in diagrams:
        for p in dg.points:
            writer.writerow([dg.kind, repr(p.birth), repr(p.death), p.birth_node, p.death_node])
    return buf.getvalue()


def diagrams_from_csv(text: str) -> list[PersistenceDiagram]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][:2] != ["kind", "birth"]:
        raise InputDataError("diagram CSV must start with the standard header")
    by_kind: dict[str, list[DiagramPoint]] = {}
    for row in rows[1:]:
        if not row:
            continue
        kind, birth, death, bn, dn = row
        by_kind.setdefault(kind, []).append(
            DiagramPoint(
                birth=float(birth),
                death=float(death),
                birth_node=int(bn),
                death_node=int(dn),
            )
        )
    return [
        PersistenceDiagram(points=tuple(pts), kind=kind)
        for kind, pts in sorted(by_kind.items())
    ]
