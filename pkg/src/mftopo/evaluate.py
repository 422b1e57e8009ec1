"""Retrieval-quality metrics and time-series peak ranking.

All metrics are rank based: any monotone increasing transform of the
distance matrix leaves them unchanged. Ranking ties break by item index so
results are deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputDataError

__all__ = [
    "LabeledDistanceMatrix",
    "retrieval_metrics",
    "peak_ranking",
    "timeseries_peaks",
]


@dataclass(frozen=True)
class LabeledDistanceMatrix:
    """Symmetric nonnegative distance matrix with a class label per item."""

    matrix: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InputDataError(f"distance matrix must be square, got {m.shape}")
        n = m.shape[0]
        if len(self.labels) != n:
            raise InputDataError(f"{len(self.labels)} labels for {n} items")
        if (m < 0).any():
            raise InputDataError("distance matrix has negative entries")
        if np.abs(np.diag(m)).max(initial=0.0) > 1e-9:
            raise InputDataError("distance matrix diagonal must be zero")
        scale = max(float(np.abs(m).max(initial=0.0)), 1.0)
        if np.abs(m - m.T).max(initial=0.0) > 1e-9 * scale:
            raise InputDataError("distance matrix must be symmetric")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def retrieval_metrics(
    data: LabeledDistanceMatrix, emeasure_cutoff: int = 32
) -> dict[str, float]:
    """NN, 1-Tier, 2-Tier, e-measure, and DCG, each in [0, 1].

    Per query the other items are ranked by distance (ties by index).
    1-Tier/2-Tier are recall within the first |C|-1 / 2(|C|-1) results.
    The e-measure is the harmonic precision/recall mean over the first
    min(emeasure_cutoff, n-1) results, normalized by its value under the
    ideal ordering so perfect retrieval scores 1. DCG uses log2 discounting
    from rank 2 and ideal-DCG normalization.
    """
    m, labels = data.matrix, data.labels
    n = data.size
    class_size = {lab: labels.count(lab) for lab in set(labels)}
    small = sorted(lab for lab, s in class_size.items() if s < 2)
    if small:
        raise InputDataError(
            f"classes with a single member make NN undefined: {small}"
        )
    nn_hits = 0
    tier1 = []
    tier2 = []
    emeasure = []
    dcg = []
    k_cut = min(emeasure_cutoff, n - 1)
    for i in range(n):
        others = [j for j in range(n) if j != i]
        others.sort(key=lambda j: (m[i, j], j))
        rel = np.array([labels[j] == labels[i] for j in others])
        c = class_size[labels[i]] - 1  # relevant items available
        nn_hits += bool(rel[0])
        tier1.append(rel[:c].sum() / c)
        tier2.append(rel[: min(2 * c, n - 1)].sum() / c)

        found = int(rel[:k_cut].sum())
        precision = found / k_cut
        recall = found / c
        e = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
        ideal_found = min(k_cut, c)
        ip = ideal_found / k_cut
        ir = ideal_found / c
        e_ideal = 2 * ip * ir / (ip + ir)
        emeasure.append(e / e_ideal)

        gains = rel.astype(float)
        discounts = np.concatenate(
            [[1.0], 1.0 / np.log2(np.arange(2, n))]
        ) if n > 2 else np.array([1.0])
        value = float((gains * discounts[: len(gains)]).sum())
        ideal = float(discounts[:c].sum())
        dcg.append(value / ideal)
    return {
        "nn": nn_hits / n,
        "tier1": float(np.mean(tier1)),
        "tier2": float(np.mean(tier2)),
        "emeasure": float(np.mean(emeasure)),
        "dcg": float(np.mean(dcg)),
    }


def peak_ranking(distances) -> list[dict]:
    """Peaks of a distance sequence ranked by prominence.

    A peak is any sample of a maximal run of equal values that is strictly
    above both neighbouring values (sequence ends count as lower, but a
    constant sequence has no peaks). Prominence is the peak value minus the
    higher of the two shoulders, where a shoulder is the minimum value
    walking outward until the first strictly higher sample.
    """
    d = [float(x) for x in distances]
    n = len(d)
    if n == 0 or len(set(d)) == 1:
        return []
    runs: list[tuple[int, int]] = []
    start = 0
    for i in range(1, n + 1):
        if i == n or d[i] != d[start]:
            runs.append((start, i - 1))
            start = i
    peaks: list[dict] = []
    for a, b in runs:
        v = d[a]
        left_ok = a == 0 or d[a - 1] < v
        right_ok = b == n - 1 or d[b + 1] < v
        if not (left_ok and right_ok) or (a == 0 and b == n - 1):
            continue
        shoulders = []
        if a > 0:
            lo = math.inf
            j = a - 1
            while j >= 0 and d[j] <= v:
                lo = min(lo, d[j])
                j -= 1
            shoulders.append(lo)
        if b < n - 1:
            lo = math.inf
            j = b + 1
            while j < n and d[j] <= v:
                lo = min(lo, d[j])
                j += 1
            shoulders.append(lo)
        prominence = v - max(shoulders)
        for t in range(a, b + 1):
            peaks.append({"t": t + 1, "distance": v, "prominence": prominence})
    peaks.sort(key=lambda p: (-p["prominence"], p["t"]))
    return peaks


def timeseries_peaks(sites, distance_fn) -> tuple[list[float], list[dict]]:
    """Consecutive-site distances and their ranked peaks.

    ``sites`` is the ordered sequence of fields (any objects the supplied
    ``distance_fn`` accepts); entry t of the result is the distance from
    site t to site t+1, 1-based.
    """
    sites = list(sites)
    if len(sites) < 2:
        raise InputDataError("time series needs at least two sites")
    distances = [
        float(distance_fn(sites[t], sites[t + 1])) for t in range(len(sites) - 1)
    ]
    return distances, peak_ranking(distances)
