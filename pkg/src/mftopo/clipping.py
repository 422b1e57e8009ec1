"""Convex clipping of simplices by field slabs.

Every scalar field is affine over a mesh simplex, so the region of a
simplex mapping into one quantization cell is a convex polytope. This
module slices simplices (segments, triangles, tetrahedra) by affine
constraints in reduced barycentric coordinates: a k-simplex lives at
``x in R^k`` with vertices 0, e_1, ..., e_k, and a field evaluates as
``F(x) = c + g . x``.

The JCN builder needs three primitives:
  * enumerate the quantization cells a simplex (or facet) actually meets,
    with half-open slab semantics,
  * decide whether the regions of two neighbouring cells share a
    (k-1)-dimensional contact inside one simplex,
  * measure fragments for the coverage diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

__all__ = ["SimplexClipper", "AffineField"]

_DEDUP_TOL = 1e-12


@dataclass(frozen=True)
class AffineField:
    """F(x) = offset + gradient . x on reduced barycentric coordinates."""

    offset: float
    gradient: np.ndarray

    @classmethod
    def from_vertex_values(cls, values: np.ndarray) -> "AffineField":
        values = np.asarray(values, dtype=np.float64)
        return cls(float(values[0]), values[1:] - values[0])

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        if points.ndim == 1:
            return self.offset + float(points @ self.gradient)
        return self.offset + points @ self.gradient


def _dedupe_loop(points: list[np.ndarray]) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    for p in points:
        if out and np.max(np.abs(out[-1] - p)) <= _DEDUP_TOL:
            continue
        out.append(p)
    while len(out) > 1 and np.max(np.abs(out[0] - out[-1])) <= _DEDUP_TOL:
        out.pop()
    return out


def _clip_loop(points: np.ndarray, vals: np.ndarray, eps: float) -> np.ndarray:
    """Sutherland-Hodgman step keeping the region vals <= 0."""
    m = len(points)
    out: list[np.ndarray] = []
    for i in range(m):
        a, b = points[i], points[(i + 1) % m]
        va, vb = vals[i], vals[(i + 1) % m]
        if va <= eps:
            out.append(a)
        if (va <= eps) != (vb <= eps):
            t = va / (va - vb)
            out.append(a + t * (b - a))
    return np.array(_dedupe_loop(out)) if out else np.empty((0, points.shape[1]))


def _loop_area(points: np.ndarray) -> float:
    """Area of a planar convex loop (2D shoelace or 3D cross-product sum)."""
    if len(points) < 3:
        return 0.0
    if points.shape[1] == 2:
        x, y = points[:, 0], points[:, 1]
        return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))
    c = points.mean(axis=0)
    total = np.zeros(3)
    for i in range(len(points)):
        total += np.cross(points[i] - c, points[(i + 1) % len(points)] - c)
    return 0.5 * float(np.linalg.norm(total))


def _order_loop(points: list[np.ndarray], normal: np.ndarray) -> list[np.ndarray]:
    """Order coplanar points of a convex polygon by angle around the centroid."""
    pts = np.array(points)
    c = pts.mean(axis=0)
    n = normal / (np.linalg.norm(normal) or 1.0)
    ref = np.eye(3)[int(np.argmin(np.abs(n)))]
    u = np.cross(n, ref)
    u /= np.linalg.norm(u) or 1.0
    w = np.cross(n, u)
    rel = pts - c
    ang = np.arctan2(rel @ w, rel @ u)
    order = np.argsort(ang, kind="stable")
    return [pts[i] for i in order]


class _Polyhedron:
    """Convex polyhedron as vertex array plus ordered face loops."""

    def __init__(self, verts: np.ndarray, faces: list[list[int]]):
        self.verts = verts
        self.faces = faces

    def clip(
        self, fld: AffineField, level: float, tol: float
    ) -> tuple["_Polyhedron | None", list[np.ndarray]]:
        """Clip to F <= level; returns (clipped or None, cap-loop points)."""
        vals = fld(self.verts) - level
        if np.all(vals >= -tol):
            on = [self.verts[i] for i in range(len(self.verts)) if abs(vals[i]) <= tol]
            if np.all(vals <= tol):  # flat: everything on the plane
                return self, on
            return None, _order_loop(on, fld.gradient) if len(on) >= 3 else on
        if np.all(vals <= tol):
            on = [self.verts[i] for i in range(len(self.verts)) if abs(vals[i]) <= tol]
            return self, _order_loop(on, fld.gradient) if len(on) >= 3 else on

        cut_cache: dict[tuple[int, int], np.ndarray] = {}

        def cut_point(i: int, j: int) -> np.ndarray:
            key = (i, j) if i < j else (j, i)
            if key not in cut_cache:
                t = vals[key[0]] / (vals[key[0]] - vals[key[1]])
                cut_cache[key] = self.verts[key[0]] + t * (
                    self.verts[key[1]] - self.verts[key[0]]
                )
            return cut_cache[key]

        new_loops: list[list[np.ndarray]] = []
        plane_pts: list[np.ndarray] = [
            self.verts[i] for i in range(len(self.verts)) if abs(vals[i]) <= tol
        ]
        for loop in self.faces:
            out: list[np.ndarray] = []
            m = len(loop)
            for k in range(m):
                i, j = loop[k], loop[(k + 1) % m]
                if vals[i] <= tol:
                    out.append(self.verts[i])
                if (vals[i] <= tol) != (vals[j] <= tol):
                    p = cut_point(i, j)
                    out.append(p)
                    plane_pts.append(p)
            out = _dedupe_loop(out)
            if len(out) >= 3:
                new_loops.append(out)
        # cap face on the cut plane
        uniq: list[np.ndarray] = []
        for p in plane_pts:
            if all(np.max(np.abs(p - q)) > 1e-10 for q in uniq):
                uniq.append(p)
        cap = _order_loop(uniq, fld.gradient) if len(uniq) >= 3 else uniq
        if len(cap) >= 3:
            new_loops.append(list(cap))
        if not new_loops:
            return None, cap
        # re-index vertices
        verts: list[np.ndarray] = []
        faces: list[list[int]] = []
        for loop in new_loops:
            idx = []
            for p in loop:
                for k, q in enumerate(verts):
                    if np.max(np.abs(p - q)) <= 1e-10:
                        idx.append(k)
                        break
                else:
                    verts.append(p)
                    idx.append(len(verts) - 1)
            seen = []
            for k in idx:
                if k not in seen:
                    seen.append(k)
            if len(seen) >= 3:
                faces.append(seen)
        if not faces or len(verts) < 4:
            return None, cap
        return _Polyhedron(np.array(verts), faces), cap

    def volume(self) -> float:
        c = self.verts.mean(axis=0)
        total = 0.0
        for loop in self.faces:
            face_sum = 0.0
            v0 = self.verts[loop[0]] - c
            for k in range(1, len(loop) - 1):
                v1 = self.verts[loop[k]] - c
                v2 = self.verts[loop[k + 1]] - c
                face_sum += float(np.dot(v0, np.cross(v1, v2)))
            total += abs(face_sum)
        return total / 6.0


def _clip_segment(
    seg: np.ndarray, fld: AffineField, lo: float, hi: float, tol: float
) -> np.ndarray | None:
    """Clip a segment (2, k) to lo <= F <= hi (closed)."""
    a, b = seg[0], seg[1]
    fa, fb = float(fld(a)), float(fld(b))
    t0, t1 = 0.0, 1.0
    df = fb - fa
    for bound, sense in ((lo, +1), (hi, -1)):
        # keep sense*(F - bound) >= 0
        va = sense * (fa - bound)
        vb = sense * (fb - bound)
        if va < -tol and vb < -tol:
            return None
        if va < -tol or vb < -tol:
            t = (bound - fa) / df
            if va < -tol:
                t0 = max(t0, t)
            else:
                t1 = min(t1, t)
    if t0 > t1:
        return None
    return np.array([a + t0 * (b - a), a + t1 * (b - a)])


class SimplexClipper:
    """Slab enumeration and contact tests for one simplex.

    ``values`` is the (r, k+1) array of field values at the simplex
    vertices; ``widths`` are the per-field slab widths used to scale
    tolerances.
    """

    def __init__(self, values: np.ndarray, widths: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        self.r, verts = values.shape[0], values.shape[1]
        self.k = verts - 1
        if self.k not in (1, 2, 3):
            raise ValueError(f"unsupported simplex dimension {self.k}")
        self.fields = [AffineField.from_vertex_values(values[j]) for j in range(self.r)]
        self.widths = np.asarray(widths, dtype=np.float64)
        self.tol = self.widths * 1e-9

    def _initial(self):
        if self.k == 1:
            return "segment", np.array([[0.0], [1.0]])
        if self.k == 2:
            return "polygon", np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        verts = np.array(
            [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        )
        faces = [[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]]
        return "polyhedron", _Polyhedron(verts, faces)

    # ---- slab enumeration -------------------------------------------------

    def realized_cells(self, bounds: list[list[tuple[int, float, float, bool]]]):
        """Enumerate cells with nonempty (half-open) region in this simplex.

        ``bounds[j]`` lists ``(bin, lo, hi, top)`` candidates for field j,
        where ``top`` marks the closed top slab. Yields bin tuples.

        A cell is realized when the closed clip is nonempty and, for every
        field whose slab is not the closed top one, the region reaches
        strictly below the slab's upper boundary. The strictness test runs
        on the fully clipped region: later slabs can shrink the region onto
        an earlier slab's open face (duplicated fields do exactly this).
        """
        if all(len(b) == 1 for b in bounds):
            yield tuple(b[0][0] for b in bounds)
            return
        tag, obj = self._initial()
        yield from self._enumerate(tag, obj, bounds, 0, ())

    def _enumerate(self, tag, obj, bounds, j, prefix):
        if j == self.r:
            for jj, (_, _, hi, top) in enumerate(prefix):
                if not top and self._min_value(tag, obj, jj) >= hi - self.tol[jj]:
                    return
            yield tuple(b for b, _, _, _ in prefix)
            return
        for b, lo, hi, top in bounds[j]:
            clipped = self._clip_box(tag, obj, j, lo, hi)
            if clipped is None:
                continue
            ctag, cobj = clipped
            if not top and self._min_value(ctag, cobj, j) >= hi - self.tol[j]:
                continue  # already confined to the open upper face
            yield from self._enumerate(
                ctag, cobj, bounds, j + 1, prefix + ((b, lo, hi, top),)
            )

    def _clip_box(self, tag, obj, j, lo, hi):
        fld = self.fields[j]
        tol = self.tol[j]
        if tag == "point":
            v = float(fld(obj[0]))
            return (tag, obj) if lo - tol <= v <= hi + tol else None
        if tag == "segment":
            seg = _clip_segment(obj, fld, lo, hi, tol)
            return None if seg is None else ("segment", seg)
        if tag == "polygon":
            loop = _clip_loop(obj, fld(obj) - hi, tol)
            if len(loop) == 0:
                return None
            loop = _clip_loop(loop, lo - fld(loop), tol)
            if len(loop) == 0:
                return None
            return ("polygon", loop)
        poly, _ = obj.clip(fld, hi, tol)
        if poly is None:
            return None
        neg = AffineField(-fld.offset, -fld.gradient)
        poly, _ = poly.clip(neg, -lo, tol)
        if poly is None:
            return None
        return ("polyhedron", poly)

    def _min_value(self, tag, obj, j) -> float:
        pts = obj.verts if tag == "polyhedron" else obj
        return float(np.min(self.fields[j](pts)))

    # ---- contact between neighbouring cells -------------------------------

    def contact_measure(
        self,
        levels: list[tuple[int, float]],
        boxes: list[tuple[int, float, float]],
    ) -> float:
        """(k-1)-measure of the set {F_j = level_j} inside the common box.

        ``levels`` lists the differing fields with their shared slab
        boundary, ``boxes`` the closed intervals of the remaining fields.
        Returns 0 when the contact degenerates below dimension k-1.
        """
        tag, obj = self._initial()
        for j, level in levels:
            sec = self._section(tag, obj, j, level)
            if sec is None:
                return 0.0
            tag, obj = sec
        for j, lo, hi in boxes:
            clipped = self._clip_box(tag, obj, j, lo, hi)
            if clipped is None:
                return 0.0
            tag, obj = clipped
        if self.k == 2:
            if tag != "segment" or len(obj) < 2:
                return 0.0
            return float(np.linalg.norm(obj[1] - obj[0]))
        if tag != "polygon":
            return 0.0
        return _loop_area(np.asarray(obj))

    def _section(self, tag, obj, j, level):
        fld = self.fields[j]
        tol = self.tol[j]
        if tag == "polyhedron":
            vals = fld(obj.verts) - level
            if np.all(np.abs(vals) <= tol):
                return tag, obj  # degenerate: constraint holds identically
            poly, cap = obj.clip(fld, level, tol)
            if len(cap) >= 3:
                return "polygon", np.array(cap)
            if len(cap) == 2:
                return "segment", np.array(cap)
            return None
        if tag == "polygon":
            pts = np.asarray(obj)
            vals = fld(pts) - level
            if np.all(np.abs(vals) <= tol):
                return tag, obj
            kept = _clip_loop(pts, vals, tol)
            if len(kept) == 0:
                return None
            on = [p for p in kept if abs(float(fld(p)) - level) <= tol]
            if len(on) < 2:
                return ("point", np.array(on)) if on else None
            arr = np.array(on)
            d = arr[:, None, :] - arr[None, :, :]
            i, k = np.unravel_index(
                np.argmax((d * d).sum(-1)), (len(arr), len(arr))
            )
            seg = np.array([arr[i], arr[k]])
            if np.linalg.norm(seg[1] - seg[0]) <= _DEDUP_TOL:
                return "point", seg[:1]
            return "segment", seg
        if tag == "point":
            return (tag, obj) if abs(float(fld(obj[0])) - level) <= tol else None
        # segment
        a, b = obj[0], obj[1]
        fa, fb = float(fld(a)) - level, float(fld(b)) - level
        if abs(fa) <= tol and abs(fb) <= tol:
            return tag, obj
        if (fa > tol and fb > tol) or (fa < -tol and fb < -tol):
            return None
        t = fa / (fa - fb) if fa != fb else 0.0
        return "point", np.array([a + t * (b - a)])

    # ---- fragment measure --------------------------------------------------

    def cell_fraction(self, boxes: list[tuple[float, float]]) -> float:
        """Fraction of the simplex measure inside the closed cell."""
        tag, obj = self._initial()
        for j, (lo, hi) in enumerate(boxes):
            clipped = self._clip_box(tag, obj, j, lo, hi)
            if clipped is None:
                return 0.0
            tag, obj = clipped
        if self.k == 1:
            return float(abs(obj[1][0] - obj[0][0])) if tag == "segment" else 0.0
        if self.k == 2:
            return _loop_area(np.asarray(obj)) / 0.5 if tag == "polygon" else 0.0
        return obj.volume() * 6.0 if tag == "polyhedron" else 0.0


def _hull_2d(points: list[tuple[float, float]]):
    """Convex hull loop of a few 2D points (monotone chain).

    Returns ``(loop, collinear)``; a collinear point set degenerates to its
    two extreme points, a single point to a one-element loop.
    """
    pts = sorted(set(points))
    if len(pts) == 1:
        return pts, True
    scale = max(
        max(abs(p[0]) for p in pts) - min(p[0] for p in pts),
        max(abs(p[1]) for p in pts) - min(p[1] for p in pts),
        1e-300,
    )
    tol = 1e-12 * scale * scale

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= tol:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= tol:
            upper.pop()
        upper.append(p)
    loop = lower[:-1] + upper[:-1]
    if len(loop) < 3:
        return [pts[0], pts[-1]], True
    return loop, False


class BivariateImageClipper:
    """Fast realized-cell enumeration for two fields on one simplex.

    Works in the image plane: the simplex maps onto the convex hull of its
    vertex value pairs, fields become coordinate projections, and a cell is
    realized exactly when the (half-open) box meets that hull. This covers
    triangles, tetrahedra, and their facets uniformly with plain floats.
    """

    __slots__ = ("loop", "collinear", "tol")

    def __init__(self, pairs, widths):
        self.loop, self.collinear = _hull_2d([(float(a), float(b)) for a, b in pairs])
        self.tol = (float(widths[0]) * 1e-9, float(widths[1]) * 1e-9)

    @staticmethod
    def _clip(poly, vals, eps):
        out = []
        m = len(poly)
        for i in range(m):
            a = poly[i]
            va = vals[i]
            ib = i + 1 if i + 1 < m else 0
            b = poly[ib]
            vb = vals[ib]
            ina = va <= eps
            if ina:
                out.append(a)
            if ina != (vb <= eps):
                t = va / (va - vb)
                out.append((a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))
        return out

    def _clip_box(self, poly, j, lo, hi):
        eps = self.tol[j]
        vals = [p[j] for p in poly]
        if max(vals) > hi + eps:
            poly = self._clip(poly, [v - hi for v in vals], eps)
            if not poly:
                return None
            vals = [p[j] for p in poly]
        if min(vals) < lo - eps:
            poly = self._clip(poly, [lo - v for v in vals], eps)
            if not poly:
                return None
        return poly

    def realized_cells(self, bounds):
        for b0, lo0, hi0, top0 in bounds[0]:
            p0 = self._clip_box(self.loop, 0, lo0, hi0)
            if p0 is None:
                continue
            if not top0 and min(p[0] for p in p0) >= hi0 - self.tol[0]:
                continue
            for b1, lo1, hi1, top1 in bounds[1]:
                p1 = self._clip_box(p0, 1, lo1, hi1)
                if p1 is None:
                    continue
                if not top1 and min(p[1] for p in p1) >= hi1 - self.tol[1]:
                    continue
                if not top0 and min(p[0] for p in p1) >= hi0 - self.tol[0]:
                    continue
                yield (b0, b1)

    def diagonal_contact(self, l0: float, l1: float) -> bool:
        """Whether cells meeting only at the box corner (l0, l1) share a
        full-dimensional contact in the domain.

        For a rank-2 image the corner preimage has codimension 2, never a
        facet; only a collinear (rank-deficient) image passing through the
        corner produces one.
        """
        if not self.collinear:
            return False
        (x0, y0), (x1, y1) = self.loop[0], self.loop[-1]
        dx, dy = x1 - x0, y1 - y0
        if abs(dx) <= self.tol[0] and abs(dy) <= self.tol[1]:
            return abs(x0 - l0) <= self.tol[0] and abs(y0 - l1) <= self.tol[1]
        if abs(dx) >= abs(dy):
            t = (l0 - x0) / dx if dx else -1.0
        else:
            t = (l1 - y0) / dy if dy else -1.0
        if t < -1e-12 or t > 1 + 1e-12:
            return False
        return (
            abs(x0 + t * dx - l0) <= self.tol[0]
            and abs(y0 + t * dy - l1) <= self.tol[1]
        )


def scalar_realized(values, quant) -> list[tuple[int, ...]]:
    """Realized slabs of one field on a simplex or facet: the image is an
    interval, so every slab between bin(min) and bin(max) is realized."""
    lo = min(float(v) for v in values)
    hi = max(float(v) for v in values)
    return [(b,) for b in range(quant.bin(lo), quant.bin(hi) + 1)]


def full_rank_map(values: np.ndarray, widths: np.ndarray) -> bool:
    """Whether the field map has full affine rank r on this simplex.

    With full rank, cells that differ in several coordinates meet only in
    codimension >= 2, so no JCN edge can arise between them.
    """
    diffs = values[:, 1:] - values[:, :1]
    r = values.shape[0]
    scale = np.maximum(np.abs(diffs).max(axis=1), widths * 1e-9)
    if r == 2:
        best = 0.0
        for i in range(diffs.shape[1]):
            for j in range(i + 1, diffs.shape[1]):
                best = max(
                    best,
                    abs(
                        diffs[0, i] * diffs[1, j] - diffs[0, j] * diffs[1, i]
                    ),
                )
        return best > 1e-9 * scale[0] * scale[1]
    if r == 3 and diffs.shape[1] >= 3:
        best = 0.0
        cols = diffs.shape[1]
        for i in range(cols):
            for j in range(i + 1, cols):
                for k in range(j + 1, cols):
                    m = diffs[:, (i, j, k)]
                    best = max(best, abs(float(np.linalg.det(m))))
        return best > 1e-9 * scale[0] * scale[1] * scale[2]
    return False
