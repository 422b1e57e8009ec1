"""Bottleneck distance, optimal bijections, and MDRG distances.

The diagram distance augments each side with diagonal slots (a real point
may retire to the diagonal at half its persistence) and minimizes the
maximum L-inf displacement via threshold search over candidate costs. The
MDRG distance sums the first-level diagram distance with per-slab optimal
bijections between the child Reeb-graph collections, padded with empty
diagrams when cardinalities differ. The total distance is the weighted sum
over the three diagram kinds; the superlevel component reuses the same
hierarchy through value negation, which matches re-running the pipeline on
the mirrored quantization.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .errors import ConfigError, InputDataError
from .mdrg import MDRG
from .persistence import KINDS, PersistenceDiagram, diagram_set

__all__ = [
    "Matching",
    "MatchedPair",
    "DistanceReport",
    "bottleneck",
    "hungarian",
    "bottleneck_assignment",
    "optimal_bijection",
    "MDRGDiagrams",
    "compute_mdrg_diagrams",
    "mdrg_distance",
    "total_distance",
    "generalized_distance",
    "shape_distance",
    "DEFAULT_WEIGHTS",
]

DEFAULT_WEIGHTS = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)

OBJECTIVES = ("minimax", "hungarian")


@dataclass(frozen=True)
class MatchedPair:
    left: tuple[float, float] | None  # None = diagonal
    right: tuple[float, float] | None
    cost: float


@dataclass(frozen=True)
class Matching:
    pairs: tuple[MatchedPair, ...]
    cost: float


def _augmented_costs(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """(m+n, m+n) cost matrix with diagonal slots appended on both sides."""
    m, n = len(x), len(y)
    size = m + n
    c = np.zeros((size, size))
    if m and n:
        c[:m, :n] = np.abs(x[:, None, :] - y[None, :, :]).max(axis=2)
    if m:
        c[:m, n:] = (np.abs(x[:, 1] - x[:, 0]) / 2.0)[:, None]
    if n:
        c[m:, :n] = (np.abs(y[:, 1] - y[:, 0]) / 2.0)[None, :]
    return c


def _perfect_matching(mask: np.ndarray) -> np.ndarray | None:
    n = mask.shape[0]
    if n > 128:
        match = maximum_bipartite_matching(csr_matrix(mask), perm_type="column")
        return None if (match < 0).any() else match
    # augmenting-path matching; sparse machinery costs more than it saves
    # on the small matrices the per-slab bijections produce
    admissible = [np.flatnonzero(row) for row in mask]
    match_right = [-1] * n

    def try_assign(u: int, seen: list[bool]) -> bool:
        for v in admissible[u]:
            if not seen[v]:
                seen[v] = True
                if match_right[v] == -1 or try_assign(match_right[v], seen):
                    match_right[v] = u
                    return True
        return False

    for u in range(n):
        if not try_assign(u, [False] * n):
            return None
    perm = np.empty(n, dtype=np.int64)
    for v, u in enumerate(match_right):
        perm[u] = v
    return perm


def _threshold_assignment(costs: np.ndarray) -> tuple[float, np.ndarray]:
    """Smallest t admitting a perfect matching within {cost <= t}, plus one."""
    if costs.size == 0:
        return 0.0, np.empty(0, dtype=np.int64)
    candidates = np.unique(costs)
    lo, hi = 0, len(candidates) - 1
    best = _perfect_matching(costs <= candidates[hi])
    if best is None:
        raise InputDataError("cost matrix admits no perfect matching")
    while lo < hi:
        mid = (lo + hi) // 2
        match = _perfect_matching(costs <= candidates[mid])
        if match is None:
            lo = mid + 1
        else:
            hi = mid
            best = match
    return float(candidates[lo]), best


def bottleneck(
    x: PersistenceDiagram, y: PersistenceDiagram
) -> tuple[float, Matching]:
    """Bottleneck distance between two diagrams of the same kind."""
    if x.kind != y.kind:
        raise InputDataError(f"diagram kind mismatch: {x.kind!r} vs {y.kind!r}")
    xa, ya = x.array(), y.array()
    m, n = len(xa), len(ya)
    if m + n == 0:
        return 0.0, Matching(pairs=(), cost=0.0)
    costs = _augmented_costs(xa, ya)
    value, match = _threshold_assignment(costs)
    pairs = []
    for i, j in enumerate(match):
        left = tuple(xa[i]) if i < m else None
        right = tuple(ya[j]) if j < n else None
        if left is None and right is None:
            continue
        pairs.append(MatchedPair(left=left, right=right, cost=float(costs[i, j])))
    return value, Matching(pairs=tuple(pairs), cost=value)


def bottleneck_value(x: PersistenceDiagram, y: PersistenceDiagram) -> float:
    """Bottleneck distance without reconstructing the matching."""
    if x.kind != y.kind:
        raise InputDataError(f"diagram kind mismatch: {x.kind!r} vs {y.kind!r}")
    xa, ya = x.array(), y.array()
    if len(xa) + len(ya) == 0:
        return 0.0
    value, _ = _threshold_assignment(_augmented_costs(xa, ya))
    return value


def _validated_square(cost) -> np.ndarray:
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise InputDataError(f"assignment matrix must be square, got {cost.shape}")
    if cost.size and not np.isfinite(cost).all():
        raise InputDataError("assignment matrix must be finite")
    return cost


def hungarian(cost) -> np.ndarray:
    """Min-sum assignment (permutation minimizing the total cost)."""
    cost = _validated_square(cost)
    if cost.size == 0:
        return np.empty(0, dtype=np.int64)
    _, cols = linear_sum_assignment(cost)
    return cols


def bottleneck_assignment(cost) -> np.ndarray:
    """Min-max assignment (permutation minimizing the largest used entry)."""
    cost = _validated_square(cost)
    if cost.size == 0:
        return np.empty(0, dtype=np.int64)
    _, perm = _threshold_assignment(cost)
    return perm


def optimal_bijection(
    s_f: list[PersistenceDiagram],
    s_g: list[PersistenceDiagram],
    objective: str = "minimax",
) -> tuple[float, list[tuple[int | None, int | None, float]], np.ndarray]:
    """Optimal bijection between two Reeb-graph diagram collections.

    The shorter side is padded with empty (dummy) diagrams. Regardless of
    the selection objective, the returned value is the supremum of the
    bottleneck costs along the bijection. Pairs use None for dummy slots.
    """
    if objective not in OBJECTIVES:
        raise ConfigError(f"unknown bijection objective {objective!r}")
    nf, ng = len(s_f), len(s_g)
    size = max(nf, ng)
    if size == 0:
        return 0.0, [], np.empty((0, 0))
    kind = (s_f + s_g)[0].kind
    pad_f = list(s_f) + [PersistenceDiagram.empty(kind)] * (size - nf)
    pad_g = list(s_g) + [PersistenceDiagram.empty(kind)] * (size - ng)
    cost = np.zeros((size, size))
    for i in range(size):
        for j in range(size):
            cost[i, j] = bottleneck_value(pad_f[i], pad_g[j])
    perm = bottleneck_assignment(cost) if objective == "minimax" else hungarian(cost)
    value = float(cost[np.arange(size), perm].max()) if size else 0.0
    pairs = [
        (
            i if i < nf else None,
            int(perm[i]) if perm[i] < ng else None,
            float(cost[i, perm[i]]),
        )
        for i in range(size)
    ]
    return value, pairs, cost


@dataclass(frozen=True)
class MDRGDiagrams:
    """All persistence diagrams of one MDRG, morseified once per graph."""

    mdrg: MDRG
    per_graph: tuple[dict[str, PersistenceDiagram], ...]

    def level1(self, kind: str) -> PersistenceDiagram:
        return self.per_graph[0][kind]

    def collection(self, level: int, bin_index: int, kind: str):
        return [
            self.per_graph[g][kind]
            for g in self.mdrg.collection(level, bin_index)
        ]


def compute_mdrg_diagrams(mdrg: MDRG) -> MDRGDiagrams:
    per_graph = []
    for g, rg in enumerate(mdrg.graphs):
        eps = mdrg.quants[rg.field_index].width * 1e-6
        per_graph.append(diagram_set(rg, eps))
    return MDRGDiagrams(mdrg=mdrg, per_graph=tuple(per_graph))


def _check_compatible(a: MDRG, b: MDRG, quants=None) -> None:
    if a.signature != b.signature:
        raise InputDataError(
            "MDRGs were built over different quantizations; distances across "
            f"grids are undefined ({a.signature} vs {b.signature})"
        )
    if quants is not None:
        sig = tuple(q.signature for q in quants)
        if sig != a.signature:
            raise InputDataError(
                f"supplied quantization {sig} does not match the MDRGs {a.signature}"
            )


def _component_distance(
    da: MDRGDiagrams,
    db: MDRGDiagrams,
    kind: str,
    objective: str,
) -> tuple[float, dict]:
    """One diagram-kind component of the MDRG distance, with trace."""
    level1_value, level1_match = bottleneck(da.level1(kind), db.level1(kind))
    total = level1_value
    levels_trace = []
    quants = da.mdrg.quants
    for level in range(1, len(quants)):
        # the level-(i+1) collections are indexed by the slabs of field i,
        # which also normalizes the slab sum
        parent_quant = quants[level - 1]
        bins_trace = []
        level_sum = 0.0
        for c in range(parent_quant.q):
            s_f = da.collection(level, c, kind)
            s_g = db.collection(level, c, kind)
            if not s_f and not s_g:
                continue
            value, pairs, _ = optimal_bijection(s_f, s_g, objective)
            level_sum += value
            bins_trace.append(
                {
                    "bin": c,
                    "center": float(parent_quant.centers[c]),
                    "value": value,
                    "pairs": [[i, j, cost] for i, j, cost in pairs],
                }
            )
        total += level_sum / parent_quant.q
        levels_trace.append({"level": level + 1, "sum": level_sum, "bins": bins_trace})
    trace = {
        "value": total,
        "level1": {
            "value": level1_value,
            "matching": [
                {"left": p.left, "right": p.right, "cost": p.cost}
                for p in level1_match.pairs
            ],
        },
        "levels": levels_trace,
    }
    return total, trace


def mdrg_distance(
    a: MDRG,
    b: MDRG,
    kind: str,
    quants=None,
    objective: str = "minimax",
    _diagrams: tuple[MDRGDiagrams, MDRGDiagrams] | None = None,
) -> float:
    """Distance between two MDRGs for one diagram kind.

    Both MDRGs must be built over the same per-level quantization; the
    first-level term is a plain bottleneck distance and every deeper level
    adds the mean (over slabs) of the per-slab optimal-bijection suprema.
    """
    if kind not in KINDS:
        raise InputDataError(f"unknown diagram kind {kind!r}")
    _check_compatible(a, b, quants)
    if _diagrams is None:
        _diagrams = (compute_mdrg_diagrams(a), compute_mdrg_diagrams(b))
    value, _ = _component_distance(_diagrams[0], _diagrams[1], kind, objective)
    return value


@dataclass(frozen=True)
class DistanceReport:
    """Full trace of one total-distance evaluation (recomputable parts)."""

    weights: tuple[float, float, float]
    objective: str
    quantizations: tuple[tuple[float, float, int], ...]
    components: dict = field(default_factory=dict)
    distance: float = 0.0

    def to_dict(self) -> dict:
        return {
            "weights": list(self.weights),
            "objective": self.objective,
            "quantizations": [
                {"lo": lo, "hi": hi, "q": q} for lo, hi, q in self.quantizations
            ],
            "components": self.components,
            "distance": self.distance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def _validate_weights(weights) -> tuple[float, float, float]:
    w = tuple(float(x) for x in weights)
    if len(w) != 3 or any(x < 0 for x in w):
        raise ConfigError(f"weights must be three nonnegative numbers, got {weights}")
    if abs(sum(w) - 1.0) > 1e-9:
        raise ConfigError(f"weights must sum to 1, got {sum(w)!r}")
    return w


def total_distance(
    a: MDRG,
    b: MDRG,
    quants=None,
    weights=DEFAULT_WEIGHTS,
    objective: str = "minimax",
    _diagrams: tuple[MDRGDiagrams, MDRGDiagrams] | None = None,
) -> DistanceReport:
    """Weighted sum of the sublevel, superlevel, and loop components.

    The superlevel component is the distance between the MDRGs of the
    negated fields; under the mirrored quantization that hierarchy equals
    the original one with negated node values, so it is evaluated from the
    pd0-neg diagrams of the same graphs.
    """
    w = _validate_weights(weights)
    if objective not in OBJECTIVES:
        raise ConfigError(f"unknown bijection objective {objective!r}")
    _check_compatible(a, b, quants)
    if _diagrams is None:
        _diagrams = (compute_mdrg_diagrams(a), compute_mdrg_diagrams(b))
    da, db = _diagrams
    components = {}
    values = {}
    for kind in KINDS:
        value, trace = _component_distance(da, db, kind, objective)
        components[kind] = trace
        values[kind] = value
    d_t = w[0] * values["pd0"] + w[1] * values["pd0-neg"] + w[2] * values["exdg1"]
    return DistanceReport(
        weights=w,
        objective=objective,
        quantizations=a.signature,
        components=components,
        distance=d_t,
    )


def generalized_distance(
    a: MDRG,
    b: MDRG,
    quants=None,
    weights=DEFAULT_WEIGHTS,
    objective: str = "minimax",
) -> float:
    """Total distance for MDRGs over any number of fields (r >= 2 reduces
    to the bivariate definition when r == 2; r == 1 keeps only the
    first-level terms)."""
    if a.level_count != b.level_count:
        raise InputDataError(
            f"level count mismatch: {a.level_count} vs {b.level_count}"
        )
    return total_distance(a, b, quants=quants, weights=weights, objective=objective).distance


def shape_distance(
    mesh1,
    descriptors1: np.ndarray,
    mesh2,
    descriptors2: np.ndarray,
    count: int,
    q: int,
    weights=DEFAULT_WEIGHTS,
    objective: str = "minimax",
    mode: str = "clip",
) -> tuple[float, list[float]]:
    """Sum of total distances over consecutive descriptor pairs.

    Descriptor column i holds the i-th normalized eigenfunction magnitude;
    term i compares the bivariate field (col i, col i+1) of both shapes
    over a shared union-range quantization per component.
    """
    from .jcn import build_jcn, make_quantization
    from .mdrg import build_mdrg
    from .mesh import MultiFieldMesh

    descriptors1 = np.asarray(descriptors1, dtype=np.float64)
    descriptors2 = np.asarray(descriptors2, dtype=np.float64)
    if count < 2:
        raise ConfigError(f"eigenfunction count must be >= 2, got {count}")
    if count > descriptors1.shape[1] or count > descriptors2.shape[1]:
        raise ConfigError(
            f"eigenfunction count {count} exceeds available descriptors "
            f"({descriptors1.shape[1]}, {descriptors2.shape[1]})"
        )
    terms: list[float] = []
    for i in range(count - 1):
        quants = []
        for j in (i, i + 1):
            f1, f2 = descriptors1[:, j], descriptors2[:, j]
            quants.append(
                make_quantization(
                    [(f1.min(), f1.max()), (f2.min(), f2.max())], q
                )
            )
        fielded1 = MultiFieldMesh(
            vertices=mesh1.vertices,
            simplices=mesh1.simplices,
            fields=(descriptors1[:, i], descriptors1[:, i + 1]),
            field_names=(f"phi{i + 1}", f"phi{i + 2}"),
        )
        fielded2 = MultiFieldMesh(
            vertices=mesh2.vertices,
            simplices=mesh2.simplices,
            fields=(descriptors2[:, i], descriptors2[:, i + 1]),
            field_names=(f"phi{i + 1}", f"phi{i + 2}"),
        )
        mdrg1 = build_mdrg(build_jcn(fielded1, quants, mode))
        mdrg2 = build_mdrg(build_jcn(fielded2, quants, mode))
        report = total_distance(mdrg1, mdrg2, weights=weights, objective=objective)
        terms.append(report.distance)
    return float(sum(terms)), terms
