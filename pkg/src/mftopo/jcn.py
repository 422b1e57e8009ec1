"""Joint Contour Net: the quantized approximation of the Reeb space.

Nodes are connected components of quantized fibers (joint contours);
edges record their adjacency inside the domain. The default construction
clips every simplex by the slab boundaries of each field, so that each
(simplex, bin-vector) fragment is a convex region; fragments with equal
bin-vectors merge across shared facets via union-find. A fast approximate
mode bins whole simplices at their barycenter instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import product

import numpy as np

from .clipping import FastTriBivariate, SimplexClipper, edge_realized
from .errors import InputDataError
from .mesh import MultiFieldMesh

__all__ = [
    "Quantization",
    "make_quantization",
    "JCNNode",
    "JointContourNet",
    "build_jcn",
    "fragment_measures",
    "jcn_to_json",
    "jcn_to_dot",
]


@dataclass(frozen=True)
class Quantization:
    """Uniform subdivision of a range into q slabs.

    Slabs are half-open ``[lo + b*w, lo + (b+1)*w)`` except the top slab,
    which is closed at ``hi`` so that every range value lands in exactly
    one slab: ``bin(v) = clamp(floor((v - lo)/w), 0, q-1)``. A degenerate
    range (hi == lo) collapses to one slab of nominal width 1.
    """

    lo: float
    hi: float
    q: int

    def __post_init__(self) -> None:
        if self.q < 1:
            raise InputDataError(f"slab count must be >= 1, got {self.q}")
        if self.hi < self.lo:
            raise InputDataError(f"range [{self.lo}, {self.hi}] is inverted")
        object.__setattr__(
            self,
            "_width",
            1.0 if self.hi == self.lo else (self.hi - self.lo) / self.q,
        )

    @property
    def degenerate(self) -> bool:
        return self.hi == self.lo

    @property
    def width(self) -> float:
        return self._width

    @property
    def centers(self) -> np.ndarray:
        if self.degenerate:
            return np.array([self.lo])
        return self.lo + (np.arange(self.q) + 0.5) * self._width

    def bin(self, v):
        if np.ndim(v):
            if self.degenerate:
                return np.zeros(np.shape(v), dtype=np.int64)
            raw = np.floor((np.asarray(v, dtype=np.float64) - self.lo) / self._width)
            return np.clip(raw, 0, self.q - 1).astype(np.int64)
        if self.degenerate:
            return 0
        raw = int((float(v) - self.lo) // self._width)
        return 0 if raw < 0 else (self.q - 1 if raw >= self.q else raw)

    def level(self, b: int) -> float:
        """Lower boundary of slab b."""
        return self.lo + b * self.width

    def slab(self, b: int) -> tuple[float, float, bool]:
        """(lower, upper, is_top) of slab b."""
        return self.level(b), self.level(b + 1), b == self.q - 1

    @property
    def signature(self) -> tuple[float, float, int]:
        return (self.lo, self.hi, self.q)


def make_quantization(ranges, q: int) -> Quantization:
    """Quantize the union of one or more value ranges into q slabs.

    When comparing two fields the grid covers both ranges, so both sides
    are binned identically.
    """
    if q < 1:
        raise InputDataError(f"slab count must be >= 1, got {q}")
    ranges = list(ranges)
    if not ranges:
        raise InputDataError("make_quantization needs at least one range")
    lo = min(float(r[0]) for r in ranges)
    hi = max(float(r[1]) for r in ranges)
    return Quantization(lo=lo, hi=hi, q=q)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, a: int) -> int:
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1


@dataclass(frozen=True)
class JCNNode:
    id: int
    bins: tuple[int, ...]
    members: tuple[tuple[int, tuple[int, ...]], ...]  # (simplex, bin-vector) fragments
    values: tuple[float, ...]  # representative field values (bin centers)


@dataclass(frozen=True)
class JointContourNet:
    nodes: tuple[JCNNode, ...]
    edges: tuple[tuple[int, int], ...]
    quants: tuple[Quantization, ...]
    mode: str

    @property
    def field_count(self) -> int:
        return len(self.quants)

    def node_bins(self) -> np.ndarray:
        return np.array([n.bins for n in self.nodes], dtype=np.int64)

    def adjacency(self) -> list[list[int]]:
        cached = getattr(self, "_adjacency", None)
        if cached is None:
            cached = [[] for _ in self.nodes]
            for a, b in self.edges:
                cached[a].append(b)
                cached[b].append(a)
            object.__setattr__(self, "_adjacency", cached)
        return cached


def _candidate_bounds(quant: Quantization, vmin: float, vmax: float):
    b0, b1 = quant.bin(vmin), quant.bin(vmax)
    return [(b,) + quant.slab(b) for b in range(b0, b1 + 1)]


def _neighbor_deltas(r: int) -> list[tuple[int, ...]]:
    """Nonzero steps in {-1,0,1}^r, one per unordered pair (lexicographic > 0)."""
    out = []
    for d in product((-1, 0, 1), repeat=r):
        if any(d) and d > tuple([0] * r):
            out.append(d)
    return out


def build_jcn(
    mesh: MultiFieldMesh,
    quants: list[Quantization] | tuple[Quantization, ...],
    mode: str = "clip",
) -> JointContourNet:
    """Build the Joint Contour Net of a multi-field mesh.

    ``mode='clip'`` (default) slices simplices exactly along slab
    boundaries; ``mode='vertex'`` assigns whole simplices the bin-vector of
    their barycenter (coarser, much faster). Regions that meet a slab only
    on its open upper face are treated as empty, so boundary values follow
    the quantization's floor rule exactly.
    """
    quants = tuple(quants)
    r = len(quants)
    if r == 0:
        raise InputDataError("build_jcn needs at least one field")
    if mesh.field_count != r:
        raise InputDataError(
            f"mesh has {mesh.field_count} fields but {r} quantizations were given"
        )
    if r > mesh.simplex_dim:
        raise InputDataError(
            f"{r} fields on a {mesh.simplex_dim}-dimensional mesh: "
            "the Reeb space (and hence the JCN) is not defined"
        )
    if mode not in ("clip", "vertex"):
        raise InputDataError(f"unknown JCN mode {mode!r}")
    if mesh.simplices.shape[0] == 0:
        raise InputDataError("mesh has no simplices")

    if mode == "vertex":
        frag_bins, frag_of_simplex = _vertex_fragments(mesh, quants)
    else:
        frag_bins, frag_of_simplex = _clip_fragments(mesh, quants)

    frag_keys = sorted(frag_bins)
    frag_index = {key: i for i, key in enumerate(frag_keys)}
    uf = _UnionFind(len(frag_keys))

    contact_edges = _merge_and_contacts(
        mesh, quants, mode, frag_of_simplex, frag_index, uf
    )

    # components -> nodes, deterministically ordered by smallest fragment key
    groups: dict[int, list[int]] = {}
    for i in range(len(frag_keys)):
        groups.setdefault(uf.find(i), []).append(i)
    ordered_roots = sorted(groups, key=lambda root: frag_keys[min(groups[root])])
    node_of_root = {root: nid for nid, root in enumerate(ordered_roots)}
    centers = [q.centers for q in quants]
    nodes = []
    for nid, root in enumerate(ordered_roots):
        members = tuple(frag_keys[i] for i in sorted(groups[root]))
        bins = members[0][1]
        nodes.append(
            JCNNode(
                id=nid,
                bins=bins,
                members=members,
                values=tuple(float(centers[j][bins[j]]) for j in range(r)),
            )
        )
    edge_set = set()
    for fa, fb in contact_edges:
        na, nb = node_of_root[uf.find(fa)], node_of_root[uf.find(fb)]
        if na != nb:
            edge_set.add((min(na, nb), max(na, nb)))
    return JointContourNet(
        nodes=tuple(nodes),
        edges=tuple(sorted(edge_set)),
        quants=quants,
        mode=mode,
    )


def _facets(mesh: MultiFieldMesh) -> dict[tuple[int, ...], list[int]]:
    """Map sorted facet vertex tuples to the simplices containing them."""
    k = mesh.simplices.shape[1]
    table: dict[tuple[int, ...], list[int]] = {}
    for s, simplex in enumerate(mesh.simplices):
        for drop in range(k):
            facet = tuple(sorted(int(v) for i, v in enumerate(simplex) if i != drop))
            table.setdefault(facet, []).append(s)
    return table


def _vertex_fragments(mesh, quants):
    bary = [f[mesh.simplices].mean(axis=1) for f in mesh.fields]
    bins = np.stack([quants[j].bin(bary[j]) for j in range(len(quants))], axis=1)
    frag_bins = {}
    frag_of_simplex = []
    for s in range(mesh.simplices.shape[0]):
        b = tuple(int(x) for x in bins[s])
        frag_bins[(s, b)] = b
        frag_of_simplex.append([b])
    return frag_bins, frag_of_simplex


def _clip_fragments(mesh, quants):
    r = len(quants)
    widths = np.array([q.width for q in quants])
    sim_values = [f[mesh.simplices] for f in mesh.fields]
    bmins = [quants[j].bin(sim_values[j].min(axis=1)) for j in range(r)]
    bmaxs = [quants[j].bin(sim_values[j].max(axis=1)) for j in range(r)]
    fast_tri = mesh.simplex_dim == 2 and r == 2
    frag_bins = {}
    frag_of_simplex = []
    for s in range(mesh.simplices.shape[0]):
        single = all(bmins[j][s] == bmaxs[j][s] for j in range(r))
        if r == 1:
            realized = [(b,) for b in range(bmins[0][s], bmaxs[0][s] + 1)]
        elif single:
            realized = [tuple(int(bmins[j][s]) for j in range(r))]
        else:
            bounds = [
                [(b,) + quants[j].slab(b) for b in range(bmins[j][s], bmaxs[j][s] + 1)]
                for j in range(r)
            ]
            values = [sim_values[j][s] for j in range(r)]
            if fast_tri:
                clipper = FastTriBivariate(values, widths)
            else:
                clipper = SimplexClipper(np.stack(values), widths)
            realized = list(clipper.realized_cells(bounds))
        frag_of_simplex.append(realized)
        for b in realized:
            frag_bins[(s, b)] = b
    return frag_bins, frag_of_simplex


def _merge_and_contacts(mesh, quants, mode, frag_of_simplex, frag_index, uf):
    r = len(quants)
    widths = np.array([q.width for q in quants])
    contact_edges: list[tuple[int, int]] = []

    if mode == "vertex":
        for facet, incident in sorted(_facets(mesh).items()):
            for i in range(len(incident)):
                for j in range(i + 1, len(incident)):
                    sa, sb = incident[i], incident[j]
                    ba, bb = frag_of_simplex[sa][0], frag_of_simplex[sb][0]
                    fa, fb = frag_index[(sa, ba)], frag_index[(sb, bb)]
                    if ba == bb:
                        uf.union(fa, fb)
                    else:
                        contact_edges.append((fa, fb))
        return contact_edges

    # intra-simplex contacts between neighbouring cells. When the cells
    # differ in a single field the contact is nonempty by convexity and
    # generically (d-1)-dimensional, so the edge is added directly; only
    # multi-field (diagonal) neighbours, which matter exactly when slab
    # boundaries coincide on the simplex, get the measured contact test.
    deltas = _neighbor_deltas(r)
    fast_tri = mesh.simplex_dim == 2 and r == 2
    for s, realized in enumerate(frag_of_simplex):
        if len(realized) < 2:
            continue
        realized_set = set(realized)
        clipper = None
        for b in realized:
            for d in deltas:
                b2 = tuple(b[j] + d[j] for j in range(r))
                if b2 not in realized_set:
                    continue
                if sum(1 for x in d if x) == 1:
                    contact_edges.append(
                        (frag_index[(s, b)], frag_index[(s, b2)])
                    )
                    continue
                if clipper is None:
                    values = mesh.field_values(s)
                    clipper = (
                        FastTriBivariate(values, widths)
                        if fast_tri
                        else SimplexClipper(values, widths)
                    )
                levels = []
                boxes = []
                for j in range(r):
                    if d[j] != 0:
                        levels.append((j, quants[j].level(max(b[j], b2[j]))))
                    else:
                        lo, hi, _ = quants[j].slab(b[j])
                        boxes.append((j, lo, hi))
                area = clipper.contact_measure(levels, boxes)
                if area > 1e-9:
                    contact_edges.append((frag_index[(s, b)], frag_index[(s, b2)]))

    # same-cell merges across interior facets
    field_arrays = mesh.fields
    facet_dim = mesh.simplex_dim - 1
    for facet, incident in sorted(_facets(mesh).items()):
        if len(incident) < 2:
            continue
        values = [[float(f[v]) for v in facet] for f in field_arrays]
        if r == 1:
            lo = min(values[0])
            hi = max(values[0])
            on_facet = [(b,) for b in range(quants[0].bin(lo), quants[0].bin(hi) + 1)]
        elif facet_dim == 1:
            on_facet = edge_realized(values, quants)
        else:
            bounds = [
                _candidate_bounds(quants[j], min(values[j]), max(values[j]))
                for j in range(r)
            ]
            if all(len(b) == 1 for b in bounds):
                on_facet = [tuple(b[0][0] for b in bounds)]
            else:
                on_facet = list(
                    SimplexClipper(np.array(values), widths).realized_cells(bounds)
                )
        for b in on_facet:
            present = [
                frag_index[(s, b)] for s in incident if (s, b) in frag_index
            ]
            for i in range(1, len(present)):
                uf.union(present[0], present[i])
    return contact_edges


def fragment_measures(
    mesh: MultiFieldMesh, jcn: JointContourNet
) -> dict[tuple[int, tuple[int, ...]], float]:
    """Geometric measure of every clip-mode fragment (coverage diagnostic)."""
    if jcn.mode != "clip":
        raise InputDataError("fragment measures are defined for clip mode only")
    widths = np.array([q.width for q in jcn.quants])
    simplex_measure = mesh.simplex_measures()
    out: dict[tuple[int, tuple[int, ...]], float] = {}
    for node in jcn.nodes:
        for s, b in node.members:
            clipper = SimplexClipper(mesh.field_values(s), widths)
            boxes = [jcn.quants[j].slab(b[j])[:2] for j in range(len(b))]
            out[(s, b)] = clipper.cell_fraction(boxes) * float(simplex_measure[s])
    return out


def jcn_to_json(jcn: JointContourNet) -> str:
    payload = {
        "mode": jcn.mode,
        "quantizations": [
            {"lo": q.lo, "hi": q.hi, "q": q.q} for q in jcn.quants
        ],
        "nodes": [
            {
                "id": n.id,
                "bins": list(n.bins),
                "values": list(n.values),
                "fragments": [[s, list(b)] for s, b in n.members],
            }
            for n in jcn.nodes
        ],
        "edges": [list(e) for e in jcn.edges],
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def jcn_to_dot(jcn: JointContourNet) -> str:
    lines = ["graph jcn {"]
    for n in jcn.nodes:
        label = ",".join(f"{v:g}" for v in n.values)
        lines.append(f'  n{n.id} [label="{label}"];')
    for a, b in jcn.edges:
        lines.append(f"  n{a} -- n{b};")
    lines.append("}")
    return "\n".join(lines)
