"""Run configuration, manifest handling, and the batch drivers.

The drivers behind the service endpoints live here: descriptor export,
pairwise distance, distance-matrix builds (resumable, worker pool), metric
evaluation, and the consecutive-site time-series study. Results are keyed
by pair index, never by completion order, so the worker count cannot
change any output byte.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distance import (
    DEFAULT_WEIGHTS,
    OBJECTIVES,
    DistanceReport,
    shape_distance,
    total_distance,
)
from .errors import ConfigError, InputDataError
from .evaluate import LabeledDistanceMatrix, peak_ranking, retrieval_metrics
from .jcn import build_jcn, make_quantization
from .mdrg import build_mdrg
from .mesh import (
    MultiFieldMesh,
    RegularGrid,
    attach_field,
    grid_to_mesh,
    load_field,
    load_mesh,
    load_volume,
)
from .spectral import (
    cotangent_laplacian,
    descriptors,
    descriptors_from_csv,
    descriptors_to_csv,
    solve_eigen,
)

__all__ = [
    "RunConfig",
    "ItemSpec",
    "LoadedItem",
    "load_manifest",
    "load_item",
    "field_distance_report",
    "pair_distance",
    "run_descriptors",
    "run_distance",
    "run_matrix",
    "run_evaluate",
    "run_timeseries",
]


@dataclass(frozen=True)
class RunConfig:
    """Pipeline knobs shared by all commands."""

    q: tuple[int, ...] = (32,)
    weights: tuple[float, float, float] = DEFAULT_WEIGHTS
    objective: str = "minimax"
    mode: str = "clip"
    eigen_count: int = 12
    emeasure_cutoff: int = 32
    workers: int = 1

    def __post_init__(self) -> None:
        q = (self.q,) if isinstance(self.q, int) else tuple(int(x) for x in self.q)
        object.__setattr__(self, "q", q)
        if any(x < 1 for x in q):
            raise ConfigError(f"slab counts must be >= 1, got {q}")
        w = tuple(float(x) for x in self.weights)
        if len(w) != 3 or any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-9:
            raise ConfigError(
                f"weights must be three nonnegative values summing to 1, got {w}"
            )
        object.__setattr__(self, "weights", w)
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"unknown bijection objective {self.objective!r}")
        if self.mode not in ("clip", "vertex"):
            raise ConfigError(f"unknown fragment mode {self.mode!r}")
        if self.eigen_count < 2:
            raise ConfigError(f"eigenfunction count must be >= 2, got {self.eigen_count}")
        if self.workers < 1:
            raise ConfigError(f"worker count must be >= 1, got {self.workers}")

    def slab_counts(self, levels: int) -> tuple[int, ...]:
        if len(self.q) == 1:
            return self.q * levels
        if len(self.q) != levels:
            raise ConfigError(
                f"{len(self.q)} slab counts configured for {levels} field levels"
            )
        return self.q

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise InputDataError(f"cannot read config {path}: {exc}") from exc
        if path.suffix.lower() == ".toml":
            try:
                import tomllib  # py311+
            except ModuleNotFoundError:
                import tomli as tomllib
            data = tomllib.loads(text)
        else:
            data = json.loads(text)
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)


@dataclass(frozen=True)
class ItemSpec:
    """One manifest row: where an item's geometry and data come from."""

    id: str
    label: str = ""
    mesh: str | None = None
    grid_dims: tuple[int, int, int] | None = None
    grid_spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    fields: tuple[str, ...] = ()
    descriptors: str | None = None


@dataclass(frozen=True)
class LoadedItem:
    """Loaded geometry plus either attached fields or a descriptor table."""

    id: str
    label: str
    mesh: MultiFieldMesh
    descriptors: np.ndarray | None = None


def _parse_triple(text: str, caster, what: str):
    parts = [p for p in text.replace(",", "x").split("x") if p]
    if len(parts) != 3:
        raise InputDataError(f"{what} must have three components, got {text!r}")
    return tuple(caster(p) for p in parts)


def load_manifest(path: str | Path) -> list[ItemSpec]:
    """Read an item manifest CSV.

    Columns: ``id`` (required), ``label``, ``mesh`` (OFF/OBJ path),
    ``grid_dims`` ("41x41x41"), ``grid_spacing``, ``fields``
    (semicolon-joined per-vertex or volume files), ``descriptors``
    (precomputed descriptor CSV). Paths are resolved relative to the
    manifest location.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise InputDataError(f"cannot read manifest {path}: {exc}") from exc
    if not rows:
        raise InputDataError(f"manifest {path} has no items")
    base = path.parent
    items = []
    for row in rows:
        row = {k.strip(): (v or "").strip() for k, v in row.items() if k}
        if not row.get("id"):
            raise InputDataError(f"manifest {path}: every row needs an id")

        def _resolve(p: str) -> str:
            return str((base / p) if not Path(p).is_absolute() else Path(p))

        items.append(
            ItemSpec(
                id=row["id"],
                label=row.get("label", ""),
                mesh=_resolve(row["mesh"]) if row.get("mesh") else None,
                grid_dims=_parse_triple(row["grid_dims"], int, "grid_dims")
                if row.get("grid_dims")
                else None,
                grid_spacing=_parse_triple(
                    row["grid_spacing"], float, "grid_spacing"
                )
                if row.get("grid_spacing")
                else (1.0, 1.0, 1.0),
                fields=tuple(
                    _resolve(p) for p in row.get("fields", "").split(";") if p
                ),
                descriptors=_resolve(row["descriptors"])
                if row.get("descriptors")
                else None,
            )
        )
    ids = [it.id for it in items]
    if len(set(ids)) != len(ids):
        raise InputDataError(f"manifest {path} has duplicate item ids")
    return items


def compute_descriptor_table(mesh: MultiFieldMesh, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decompose a surface and return (eigenvalues, descriptor matrix)."""
    op = cotangent_laplacian(mesh)
    eig = descriptors(solve_eigen(op, count), count)
    return eig.eigenvalues, eig.descriptors


def load_item(spec: ItemSpec, config: RunConfig) -> LoadedItem:
    """Materialize a manifest row.

    Field files attached to a mesh or grid put the item in field mode;
    otherwise the item carries a descriptor table (loaded from CSV or
    computed from the surface spectrum with ``config.eigen_count``).
    """
    if spec.mesh is not None:
        mesh = load_mesh(spec.mesh)
        if spec.fields:
            for i, fpath in enumerate(spec.fields):
                mesh = attach_field(mesh, f"f{i + 1}", load_field(fpath))
            return LoadedItem(id=spec.id, label=spec.label, mesh=mesh)
        if spec.descriptors is not None:
            _, table = descriptors_from_csv(Path(spec.descriptors).read_text())
            if table.shape[0] != mesh.vertex_count:
                raise InputDataError(
                    f"item {spec.id}: descriptor rows ({table.shape[0]}) do not "
                    f"match mesh vertices ({mesh.vertex_count})"
                )
            if table.shape[1] < config.eigen_count:
                raise InputDataError(
                    f"item {spec.id}: {table.shape[1]} descriptor columns, "
                    f"need {config.eigen_count}"
                )
            return LoadedItem(
                id=spec.id, label=spec.label, mesh=mesh, descriptors=table
            )
        _, table = compute_descriptor_table(mesh, config.eigen_count)
        return LoadedItem(id=spec.id, label=spec.label, mesh=mesh, descriptors=table)
    if spec.grid_dims is not None:
        if not spec.fields:
            raise InputDataError(f"item {spec.id}: grid items need field volumes")
        volumes = tuple(load_volume(p, spec.grid_dims) for p in spec.fields)
        grid = RegularGrid(
            dims=spec.grid_dims,
            spacing=spec.grid_spacing,
            fields=volumes,
            field_names=tuple(f"f{i + 1}" for i in range(len(volumes))),
        )
        return LoadedItem(id=spec.id, label=spec.label, mesh=grid_to_mesh(grid))
    raise InputDataError(f"item {spec.id}: needs either a mesh or grid_dims")


def field_distance_report(
    a: LoadedItem, b: LoadedItem, config: RunConfig
) -> DistanceReport:
    """Total distance between two items carrying explicit fields."""
    ra, rb = a.mesh.field_count, b.mesh.field_count
    if ra == 0 or rb == 0:
        raise ConfigError("field distance needs items with attached fields")
    if ra != rb:
        raise ConfigError(f"field count mismatch: {a.id} has {ra}, {b.id} has {rb}")
    slabs = config.slab_counts(ra)
    quants = [
        make_quantization(
            [
                (a.mesh.fields[j].min(), a.mesh.fields[j].max()),
                (b.mesh.fields[j].min(), b.mesh.fields[j].max()),
            ],
            slabs[j],
        )
        for j in range(ra)
    ]
    mdrg_a = build_mdrg(build_jcn(a.mesh, quants, config.mode))
    mdrg_b = build_mdrg(build_jcn(b.mesh, quants, config.mode))
    return total_distance(
        mdrg_a,
        mdrg_b,
        quants=quants,
        weights=config.weights,
        objective=config.objective,
    )


def pair_distance(a: LoadedItem, b: LoadedItem, config: RunConfig) -> float:
    """Distance between two items, selecting field or descriptor mode."""
    if a.descriptors is not None and b.descriptors is not None:
        value, _ = shape_distance(
            a.mesh,
            a.descriptors,
            b.mesh,
            b.descriptors,
            count=config.eigen_count,
            q=config.q[0],
            weights=config.weights,
            objective=config.objective,
            mode=config.mode,
        )
        return value
    if (a.descriptors is None) != (b.descriptors is None):
        raise ConfigError(
            f"cannot compare field item and descriptor item ({a.id}, {b.id})"
        )
    return field_distance_report(a, b, config).distance


# ---------------------------------------------------------------------------
# worker pool plumbing: items are broadcast once per worker; tasks carry
# only pair indices so scheduling order cannot matter
_WORKER_ITEMS: list[LoadedItem] | None = None
_WORKER_CONFIG: RunConfig | None = None


def _init_worker(items: list[LoadedItem], config: RunConfig) -> None:
    global _WORKER_ITEMS, _WORKER_CONFIG
    _WORKER_ITEMS = items
    _WORKER_CONFIG = config


def _pair_task(task: tuple[int, int]) -> tuple[int, int, float]:
    i, j = task
    return i, j, pair_distance(_WORKER_ITEMS[i], _WORKER_ITEMS[j], _WORKER_CONFIG)


def _compute_pairs(
    items: list[LoadedItem],
    pairs: list[tuple[int, int]],
    config: RunConfig,
) -> dict[tuple[int, int], float]:
    if not pairs:
        return {}
    if config.workers == 1:
        _init_worker(items, config)
        return {(i, j): _pair_task((i, j))[2] for i, j in pairs}
    results: dict[tuple[int, int], float] = {}
    with ProcessPoolExecutor(
        max_workers=config.workers,
        initializer=_init_worker,
        initargs=(items, config),
    ) as pool:
        for i, j, d in pool.map(_pair_task, pairs, chunksize=1):
            results[(i, j)] = d
    return results


def _format_float(x: float) -> str:
    return repr(float(x))


def run_descriptors(
    mesh_path: str | Path, count: int, out_path: str | Path | None
) -> dict:
    """Descriptor CSV export for one surface."""
    if count < 1:
        raise ConfigError(f"eigenfunction count must be >= 1, got {count}")
    mesh = load_mesh(mesh_path)
    op = cotangent_laplacian(mesh)
    eig = descriptors(solve_eigen(op, count), count)
    text = descriptors_to_csv(eig)
    if out_path is not None:
        Path(out_path).write_text(text)
    return {
        "vertices": mesh.vertex_count,
        "eigenvalues": [float(v) for v in eig.eigenvalues],
        "out_path": str(out_path) if out_path is not None else None,
    }


def run_distance(
    spec_a: ItemSpec,
    spec_b: ItemSpec,
    config: RunConfig,
    out_path: str | Path | None = None,
) -> dict:
    """Distance report between two items (full trace in field mode)."""
    a = load_item(spec_a, config)
    b = load_item(spec_b, config)
    if a.descriptors is not None and b.descriptors is not None:
        value, terms = shape_distance(
            a.mesh,
            a.descriptors,
            b.mesh,
            b.descriptors,
            count=config.eigen_count,
            q=config.q[0],
            weights=config.weights,
            objective=config.objective,
            mode=config.mode,
        )
        payload = {
            "a": a.id,
            "b": b.id,
            "mode": "descriptors",
            "distance": value,
            "terms": terms,
        }
    else:
        report = field_distance_report(a, b, config)
        payload = {
            "a": a.id,
            "b": b.id,
            "mode": "fields",
            "distance": report.distance,
            "report": report.to_dict(),
        }
    if out_path is not None:
        Path(out_path).write_text(
            json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"
        )
        payload["out_path"] = str(out_path)
    return payload


def _pairs_sidecar(out_path: Path) -> Path:
    return out_path.with_name(out_path.name + ".pairs.csv")


def _read_sidecar(path: Path) -> dict[tuple[int, int], float]:
    done: dict[tuple[int, int], float] = {}
    if not path.exists():
        return done
    with path.open(newline="") as fh:
        for row in csv.reader(fh):
            if len(row) == 3:
                done[(int(row[0]), int(row[1]))] = float(row[2])
    return done


def run_matrix(
    manifest_path: str | Path,
    config: RunConfig,
    out_path: str | Path,
    resume: bool = False,
) -> dict:
    """Pairwise distance matrix over a manifest, written as labeled CSV.

    With ``resume`` the sidecar ``<out>.pairs.csv`` from an interrupted run
    is reused and only missing pairs are computed.
    """
    out_path = Path(out_path)
    specs = load_manifest(manifest_path)
    items = [load_item(s, config) for s in specs]
    n = len(items)
    all_pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    sidecar = _pairs_sidecar(out_path)
    done = _read_sidecar(sidecar) if resume else {}
    done = {p: d for p, d in done.items() if p in set(all_pairs)}
    todo = [p for p in all_pairs if p not in done]
    done.update(_compute_pairs(items, todo, config))

    matrix = np.zeros((n, n))
    for (i, j), d in done.items():
        matrix[i, j] = matrix[j, i] = d

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id"] + [it.id for it in items])
    for i, it in enumerate(items):
        writer.writerow([it.id] + [_format_float(matrix[i, j]) for j in range(n)])
    out_path.write_text(buf.getvalue())

    side = io.StringIO()
    sw = csv.writer(side, lineterminator="\n")
    for i, j in all_pairs:
        sw.writerow([i, j, _format_float(done[(i, j)])])
    sidecar.write_text(side.getvalue())

    labels_path = out_path.with_name(out_path.stem + ".labels.csv")
    lbuf = io.StringIO()
    lw = csv.writer(lbuf, lineterminator="\n")
    lw.writerow(["id", "label"])
    for it in items:
        lw.writerow([it.id, it.label])
    labels_path.write_text(lbuf.getvalue())

    return {
        "items": n,
        "pairs_total": len(all_pairs),
        "pairs_computed": len(todo),
        "out_path": str(out_path),
        "labels_path": str(labels_path),
    }


def read_matrix_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    try:
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputDataError(f"cannot read matrix {path}: {exc}") from exc
    if not rows or rows[0][:1] != ["id"]:
        raise InputDataError(f"{path}: matrix CSV must start with an 'id' header")
    ids = rows[0][1:]
    try:
        matrix = np.array(
            [[float(v) for v in row[1:]] for row in rows[1:]], dtype=np.float64
        )
    except ValueError as exc:
        raise InputDataError(f"{path}: bad matrix cell: {exc}") from exc
    if matrix.shape != (len(ids), len(ids)):
        raise InputDataError(f"{path}: matrix shape {matrix.shape} vs {len(ids)} ids")
    return ids, matrix


def read_labels_csv(path: str | Path) -> dict[str, str]:
    try:
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputDataError(f"cannot read labels {path}: {exc}") from exc
    if not rows:
        raise InputDataError(f"{path}: empty labels file")
    if rows[0] and rows[0][0].strip().lower() == "id":
        rows = rows[1:]
    out = {}
    for row in rows:
        if len(row) >= 2:
            out[row[0].strip()] = row[1].strip()
    return out


def run_evaluate(
    matrix_path: str | Path,
    labels_path: str | Path,
    emeasure_cutoff: int = 32,
    out_path: str | Path | None = None,
) -> dict:
    """Retrieval metrics of a labeled distance matrix."""
    ids, matrix = read_matrix_csv(matrix_path)
    label_map = read_labels_csv(labels_path)
    missing = [i for i in ids if i not in label_map]
    if missing:
        raise InputDataError(f"labels missing for items: {missing}")
    data = LabeledDistanceMatrix(
        matrix=matrix, labels=tuple(label_map[i] for i in ids)
    )
    metrics = retrieval_metrics(data, emeasure_cutoff=emeasure_cutoff)
    if out_path is not None:
        Path(out_path).write_text(
            json.dumps(metrics, sort_keys=True, separators=(",", ":")) + "\n"
        )
    return metrics


def run_timeseries(
    manifest_path: str | Path,
    config: RunConfig,
    out_path: str | Path | None = None,
) -> dict:
    """Distances between consecutive manifest items plus ranked peaks."""
    specs = load_manifest(manifest_path)
    if len(specs) < 2:
        raise InputDataError("time series needs at least two sites")
    items = [load_item(s, config) for s in specs]
    pairs = [(t, t + 1) for t in range(len(items) - 1)]
    computed = _compute_pairs(items, pairs, config)
    distances = [computed[(t, t + 1)] for t in range(len(items) - 1)]
    peaks = peak_ranking(distances)
    prominences = {p["t"]: p["prominence"] for p in peaks}
    if out_path is not None:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "distance", "prominence"])
        for t, d in enumerate(distances, start=1):
            writer.writerow(
                [t, _format_float(d), _format_float(prominences.get(t, 0.0))]
            )
        Path(out_path).write_text(buf.getvalue())
    return {
        "sites": len(items),
        "distances": distances,
        "peaks": peaks,
        "out_path": str(out_path) if out_path is not None else None,
    }
