"""Simplicial domains and field ingestion.

A :class:`MultiFieldMesh` is the common input of the whole pipeline: a
triangle surface or tetrahedral volume together with any number of
per-vertex scalar fields. Regular grids are converted to tetrahedra with a
conforming 6-tet split so that downstream connectivity never depends on
which side of a cell face a fragment lives on.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import InputDataError

__all__ = [
    "MultiFieldMesh",
    "RegularGrid",
    "load_mesh",
    "write_mesh",
    "attach_field",
    "grid_to_mesh",
    "load_volume",
    "load_field",
]


def _component_count(n_vertices: int, edges: np.ndarray) -> int:
    """Connected components of the 1-skeleton (union by rank)."""
    parent = np.arange(n_vertices)

    def find(a: int) -> int:
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    for a, b in edges:
        ra, rb = find(int(a)), find(int(b))
        if ra != rb:
            parent[rb] = ra
    return len({find(i) for i in range(n_vertices)})


@dataclass(frozen=True)
class MultiFieldMesh:
    """Simplicial mesh with r per-vertex scalar fields.

    ``simplices`` is (m, 3) for triangle surfaces or (m, 4) for
    tetrahedral volumes. Instances are treated as immutable; operations
    that extend them return new instances sharing the geometry arrays.
    """

    vertices: np.ndarray
    simplices: np.ndarray
    fields: tuple[np.ndarray, ...] = ()
    field_names: tuple[str, ...] = ()
    component_count: int = field(default=0)

    def __post_init__(self) -> None:
        verts = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        simp = np.ascontiguousarray(np.asarray(self.simplices, dtype=np.int64))
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise InputDataError(f"vertices must be (n, 3), got {verts.shape}")
        if simp.ndim != 2 or simp.shape[1] not in (3, 4):
            raise InputDataError(
                f"simplices must be (m, 3) triangles or (m, 4) tetrahedra, got {simp.shape}"
            )
        n = verts.shape[0]
        if simp.size and (simp.min() < 0 or simp.max() >= n):
            raise InputDataError(
                f"simplex vertex index out of range [0, {n}): found {simp.min()}..{simp.max()}"
            )
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "simplices", simp)
        flds = tuple(np.ascontiguousarray(np.asarray(f, dtype=np.float64)) for f in self.fields)
        for name, f in zip(self.field_names, flds):
            if f.shape != (n,):
                raise InputDataError(
                    f"field {name!r} has length {f.shape}, expected ({n},)"
                )
        if len(flds) != len(self.field_names):
            raise InputDataError("fields and field_names must have equal length")
        object.__setattr__(self, "fields", flds)
        object.__setattr__(self, "field_names", tuple(self.field_names))
        if self.component_count == 0:
            object.__setattr__(
                self, "component_count", _component_count(n, self.edges())
            )

    @property
    def vertex_count(self) -> int:
        return self.vertices.shape[0]

    @property
    def simplex_dim(self) -> int:
        """2 for triangles, 3 for tetrahedra."""
        return self.simplices.shape[1] - 1

    @property
    def field_count(self) -> int:
        return len(self.fields)

    def edges(self) -> np.ndarray:
        """Unique undirected 1-skeleton edges, sorted pairs."""
        k = self.simplices.shape[1]
        pairs = [
            self.simplices[:, [i, j]] for i in range(k) for j in range(i + 1, k)
        ]
        e = np.vstack(pairs) if pairs else np.empty((0, 2), dtype=np.int64)
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def field_values(self, simplex_index: int) -> np.ndarray:
        """(r, k+1) field values at the vertices of one simplex."""
        idx = self.simplices[simplex_index]
        return np.stack([f[idx] for f in self.fields])

    def simplex_measures(self) -> np.ndarray:
        """Area (triangles) or volume (tets) of every simplex."""
        v = self.vertices[self.simplices]
        if self.simplex_dim == 2:
            a = v[:, 1] - v[:, 0]
            b = v[:, 2] - v[:, 0]
            return 0.5 * np.linalg.norm(np.cross(a, b), axis=1)
        a = v[:, 1] - v[:, 0]
        b = v[:, 2] - v[:, 0]
        c = v[:, 3] - v[:, 0]
        return np.abs(np.einsum("ij,ij->i", a, np.cross(b, c))) / 6.0


@dataclass(frozen=True)
class RegularGrid:
    """Axis-aligned regular grid with per-node scalar fields in x-fastest order."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    fields: tuple[np.ndarray, ...] = ()
    field_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if len(self.dims) != 3 or any(int(d) < 2 for d in self.dims):
            raise InputDataError(f"grid dims must be 3 integers >= 2, got {self.dims}")
        if any(s <= 0 for s in self.spacing):
            raise InputDataError(f"grid spacing must be positive, got {self.spacing}")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))
        n = self.dims[0] * self.dims[1] * self.dims[2]
        flds = tuple(np.ascontiguousarray(np.asarray(f, dtype=np.float64)) for f in self.fields)
        for name, f in zip(self.field_names, flds):
            if f.shape != (n,):
                raise InputDataError(
                    f"grid field {name!r} has {f.size} values, expected {n}"
                )
        if len(flds) != len(self.field_names):
            raise InputDataError("fields and field_names must have equal length")
        object.__setattr__(self, "fields", flds)
        object.__setattr__(self, "field_names", tuple(self.field_names))


def load_mesh(path: str | Path, fmt: str | None = None) -> MultiFieldMesh:
    """Load a triangle surface from an OFF or OBJ file (fields empty).

    ``fmt`` defaults to the file extension. Non-triangular faces are
    rejected; vertex indices are validated against the vertex count.
    """
    path = Path(path)
    if fmt is None:
        fmt = path.suffix.lstrip(".").lower()
    if fmt not in ("off", "obj"):
        raise InputDataError(f"unsupported mesh format {fmt!r} (expected off or obj)")
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputDataError(f"cannot read mesh file {path}: {exc}") from exc
    if fmt == "off":
        verts, faces = _parse_off(text, path)
    else:
        verts, faces = _parse_obj(text, path)
    return MultiFieldMesh(vertices=verts, simplices=faces)


def _meaningful_lines(text: str) -> list[str]:
    out = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append(line)
    return out


def _parse_off(text: str, path: Path) -> tuple[np.ndarray, np.ndarray]:
    lines = _meaningful_lines(text)
    if not lines:
        raise InputDataError(f"{path}: empty OFF file")
    first = lines.pop(0)
    if first.upper().startswith("OFF"):
        rest = first[3:].strip()
        if rest:
            lines.insert(0, rest)
    else:
        # tolerate headerless files that start directly with the counts
        lines.insert(0, first)
    if not lines:
        raise InputDataError(f"{path}: missing OFF counts line")
    counts = lines.pop(0).split()
    if len(counts) < 2:
        raise InputDataError(f"{path}: malformed OFF counts line {counts!r}")
    try:
        nv, nf = int(counts[0]), int(counts[1])
    except ValueError as exc:
        raise InputDataError(f"{path}: malformed OFF counts line {counts!r}") from exc
    if len(lines) < nv + nf:
        raise InputDataError(
            f"{path}: OFF file truncated ({len(lines)} data lines, need {nv + nf})"
        )
    try:
        verts = np.array(
            [[float(t) for t in lines[i].split()[:3]] for i in range(nv)],
            dtype=np.float64,
        ).reshape(nv, 3)
    except ValueError as exc:
        raise InputDataError(f"{path}: bad vertex line in OFF file: {exc}") from exc
    faces = []
    for i in range(nv, nv + nf):
        toks = lines[i].split()
        try:
            cnt = int(toks[0])
            idx = [int(t) for t in toks[1 : 1 + cnt]]
        except (ValueError, IndexError) as exc:
            raise InputDataError(f"{path}: bad face line {lines[i]!r}") from exc
        if cnt != 3 or len(idx) != 3:
            raise InputDataError(
                f"{path}: face with {cnt} vertices; only triangles are supported"
            )
        if any(j < 0 or j >= nv for j in idx):
            raise InputDataError(
                f"{path}: face {lines[i]!r} references a vertex outside [0, {nv})"
            )
        faces.append(idx)
    return verts, np.array(faces, dtype=np.int64).reshape(len(faces), 3)


def _parse_obj(text: str, path: Path) -> tuple[np.ndarray, np.ndarray]:
    verts: list[list[float]] = []
    faces: list[list[int]] = []
    for line in _meaningful_lines(text):
        toks = line.split()
        if toks[0] == "v":
            try:
                verts.append([float(t) for t in toks[1:4]])
            except ValueError as exc:
                raise InputDataError(f"{path}: bad vertex line {line!r}") from exc
        elif toks[0] == "f":
            refs = toks[1:]
            if len(refs) != 3:
                raise InputDataError(
                    f"{path}: face with {len(refs)} vertices; only triangles are supported"
                )
            idx = []
            for r in refs:
                try:
                    i = int(r.split("/")[0])
                except ValueError as exc:
                    raise InputDataError(f"{path}: bad face token {r!r}") from exc
                idx.append(i - 1 if i > 0 else len(verts) + i)
            if any(j < 0 or j >= len(verts) for j in idx):
                raise InputDataError(
                    f"{path}: face {line!r} references a vertex outside [0, {len(verts)})"
                )
            faces.append(idx)
    if not verts:
        raise InputDataError(f"{path}: OBJ file contains no vertices")
    return (
        np.array(verts, dtype=np.float64).reshape(len(verts), 3),
        np.array(faces, dtype=np.int64).reshape(len(faces), 3),
    )


def write_mesh(mesh: MultiFieldMesh, path: str | Path) -> None:
    """Write a triangle mesh as OFF (round-trips through :func:`load_mesh`)."""
    if mesh.simplex_dim != 2:
        raise InputDataError("write_mesh supports triangle surfaces only")
    path = Path(path)
    with path.open("w") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.vertex_count} {mesh.simplices.shape[0]} 0\n")
        for v in mesh.vertices:
            fh.write(f"{float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for s in mesh.simplices:
            fh.write(f"3 {s[0]} {s[1]} {s[2]}\n")


def attach_field(mesh: MultiFieldMesh, name: str, values: np.ndarray) -> MultiFieldMesh:
    """Return a new mesh with one more named field (order-preserving)."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (mesh.vertex_count,):
        raise InputDataError(
            f"field {name!r} has {values.size} values, mesh has {mesh.vertex_count} vertices"
        )
    if name in mesh.field_names:
        raise InputDataError(f"duplicate field name {name!r}")
    return replace(
        mesh,
        fields=mesh.fields + (values,),
        field_names=mesh.field_names + (name,),
    )


# Kuhn subdivision: six tetrahedra around the (0,0,0)-(1,1,1) diagonal of a
# cell, as vertex-addition paths. Faces induced on cell boundaries use the
# min-to-max corner diagonal of that face, so adjacent cells conform.
_KUHN_PATHS = (
    (0, 1, 3, 7),
    (0, 1, 5, 7),
    (0, 2, 3, 7),
    (0, 2, 6, 7),
    (0, 4, 5, 7),
    (0, 4, 6, 7),
)


def grid_to_mesh(grid: RegularGrid) -> MultiFieldMesh:
    """Tetrahedralize a regular grid (6 tets per cell, conforming faces).

    Vertex order (and hence field order) is preserved: x-fastest, then y,
    then z, matching the grid's storage contract.
    """
    nx, ny, nz = grid.dims
    sx, sy, sz = grid.spacing
    xs = np.arange(nx, dtype=np.float64) * sx
    ys = np.arange(ny, dtype=np.float64) * sy
    zs = np.arange(nz, dtype=np.float64) * sz
    zz, yy, xx = np.meshgrid(zs, ys, xs, indexing="ij")
    verts = np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])

    def vid(ix, iy, iz):
        return ix + nx * (iy + ny * iz)

    ix, iy, iz = np.meshgrid(
        np.arange(nx - 1), np.arange(ny - 1), np.arange(nz - 1), indexing="ij"
    )
    ix, iy, iz = ix.ravel(), iy.ravel(), iz.ravel()
    corner = np.empty((ix.size, 8), dtype=np.int64)
    for code in range(8):
        bx, by, bz = code & 1, (code >> 1) & 1, (code >> 2) & 1
        corner[:, code] = vid(ix + bx, iy + by, iz + bz)
    tets = np.concatenate([corner[:, list(p)] for p in _KUHN_PATHS], axis=0)

    # orient so every tet has positive signed volume
    p = verts[tets]
    signed = np.einsum(
        "ij,ij->i",
        p[:, 1] - p[:, 0],
        np.cross(p[:, 2] - p[:, 0], p[:, 3] - p[:, 0]),
    )
    flip = signed < 0
    tets[flip, 0], tets[flip, 1] = tets[flip, 1].copy(), tets[flip, 0].copy()

    return MultiFieldMesh(
        vertices=verts,
        simplices=tets,
        fields=grid.fields,
        field_names=grid.field_names,
    )


def load_volume(
    path: str | Path,
    dims: tuple[int, int, int],
    fmt: str | None = None,
) -> np.ndarray:
    """Load one scalar volume in x-fastest order.

    Formats: ``raw-f32-le``, ``raw-f64-le`` (little-endian binary) or
    ``csv`` (one value per row or comma-separated; a non-numeric first row
    is skipped as a header). Defaults by extension: .f64/.raw64 -> f64,
    .csv -> csv, anything else -> f32.
    """
    path = Path(path)
    n = int(np.prod([int(d) for d in dims]))
    if fmt is None:
        suffix = path.suffix.lower()
        if suffix in (".f64", ".raw64"):
            fmt = "raw-f64-le"
        elif suffix == ".csv":
            fmt = "csv"
        else:
            fmt = "raw-f32-le"
    if fmt in ("raw-f32-le", "raw-f64-le"):
        dtype = "<f4" if fmt == "raw-f32-le" else "<f8"
        try:
            data = np.fromfile(path, dtype=dtype)
        except OSError as exc:
            raise InputDataError(f"cannot read volume {path}: {exc}") from exc
        if data.size != n:
            raise InputDataError(
                f"{path}: {data.size} values for dims {tuple(dims)} (expected {n})"
            )
        return data.astype(np.float64)
    if fmt != "csv":
        raise InputDataError(f"unsupported volume format {fmt!r}")
    values = _read_numeric_csv(path)
    if values.size != n:
        raise InputDataError(
            f"{path}: {values.size} values for dims {tuple(dims)} (expected {n})"
        )
    return values


def _read_numeric_csv(path: Path) -> np.ndarray:
    try:
        with Path(path).open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    except OSError as exc:
        raise InputDataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise InputDataError(f"{path}: empty file")
    start = 0
    try:
        [float(c) for c in rows[0] if c.strip()]
    except ValueError:
        start = 1  # header row
    values: list[float] = []
    for row in rows[start:]:
        for cell in row:
            cell = cell.strip()
            if not cell:
                continue
            try:
                values.append(float(cell))
            except ValueError as exc:
                raise InputDataError(f"{path}: non-numeric cell {cell!r}") from exc
    return np.array(values, dtype=np.float64)


def load_field(path: str | Path, column: str | int | None = None) -> np.ndarray:
    """Load a per-vertex scalar field.

    Plain text / single-column files: one value per line. CSV with several
    columns: pick ``column`` by header name or 0-based index.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    except OSError as exc:
        raise InputDataError(f"cannot read field file {path}: {exc}") from exc
    if not rows:
        raise InputDataError(f"{path}: empty field file")
    header: list[str] | None = None
    try:
        [float(c) for c in rows[0] if c.strip()]
    except ValueError:
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
    col = 0
    if column is not None:
        if isinstance(column, int) or (isinstance(column, str) and column.isdigit()):
            col = int(column)
        else:
            if header is None or column not in header:
                raise InputDataError(f"{path}: no column named {column!r}")
            col = header.index(column)
    try:
        return np.array([float(r[col]) for r in rows], dtype=np.float64)
    except (ValueError, IndexError) as exc:
        raise InputDataError(f"{path}: bad field data: {exc}") from exc
