import csv
import json

import numpy as np
import pytest

import synthdata
from mftopo.errors import ConfigError, InputDataError
from mftopo.mesh import write_mesh
from mftopo.pipeline import (
    ItemSpec,
    RunConfig,
    load_item,
    load_manifest,
    pair_distance,
    run_descriptors,
    run_distance,
    run_evaluate,
    run_matrix,
    run_timeseries,
)


def test_config_validation():
    cfg = RunConfig(q=8, workers=2)
    assert cfg.q == (8,)
    assert cfg.slab_counts(3) == (8, 8, 8)
    with pytest.raises(ConfigError):
        RunConfig(weights=(0.5, 0.5, 0.5))
    with pytest.raises(ConfigError):
        RunConfig(objective="nope")
    with pytest.raises(ConfigError):
        RunConfig(q=0)
    with pytest.raises(ConfigError):
        RunConfig(q=(4, 8)).slab_counts(3)


def test_config_from_files(tmp_path):
    j = tmp_path / "c.json"
    j.write_text(json.dumps({"q": [4, 8], "eigen_count": 6}))
    cfg = RunConfig.from_file(j)
    assert cfg.q == (4, 8) and cfg.eigen_count == 6
    t = tmp_path / "c.toml"
    t.write_text('q = 16\nobjective = "hungarian"\n')
    cfg = RunConfig.from_file(t, workers=3)
    assert cfg.q == (16,) and cfg.objective == "hungarian" and cfg.workers == 3


def _write_field(path, values):
    path.write_text("\n".join(repr(float(v)) for v in values) + "\n")


def _field_item(tmp_path, name, mesh, fields):
    mesh_path = tmp_path / f"{name}.off"
    write_mesh(mesh, mesh_path)
    field_paths = []
    for i, f in enumerate(fields):
        p = tmp_path / f"{name}_f{i}.txt"
        _write_field(p, f)
        field_paths.append(str(p))
    return ItemSpec(id=name, label="x", mesh=str(mesh_path), fields=tuple(field_paths))


def test_load_item_modes(tmp_path):
    sheet = synthdata.planar_sheet(4, 4)
    spec = _field_item(tmp_path, "a", sheet, [sheet.vertices[:, 0]])
    item = load_item(spec, RunConfig(q=4))
    assert item.mesh.field_count == 1
    assert item.descriptors is None
    sphere = synthdata.icosphere(1)
    mesh_path = tmp_path / "s.off"
    write_mesh(sphere, mesh_path)
    spec2 = ItemSpec(id="s", mesh=str(mesh_path))
    item2 = load_item(spec2, RunConfig(q=4, eigen_count=3))
    assert item2.descriptors.shape == (sphere.vertex_count, 3)
    with pytest.raises(InputDataError):
        load_item(ItemSpec(id="bad"), RunConfig())


def test_grid_item_and_scalar_distance(tmp_path):
    dims = (3, 3, 3)
    n = int(np.prod(dims))
    xs = np.arange(n) % 3
    a = tmp_path / "a.f64"
    b = tmp_path / "b.f64"
    np.asarray(xs, dtype="<f8").tofile(a)
    np.asarray(-xs, dtype="<f8").tofile(b)
    spec_a = ItemSpec(id="a", grid_dims=dims, fields=(str(a),))
    spec_b = ItemSpec(id="b", grid_dims=dims, fields=(str(b),))
    cfg = RunConfig(q=4)
    item_a = load_item(spec_a, cfg)
    item_b = load_item(spec_b, cfg)
    assert item_a.mesh.simplex_dim == 3
    assert pair_distance(item_a, item_a, cfg) == 0.0
    assert pair_distance(item_a, item_b, cfg) > 0.0


def test_field_count_mismatch(tmp_path):
    sheet = synthdata.planar_sheet(4, 4)
    a = _field_item(tmp_path, "a", sheet, [sheet.vertices[:, 0]])
    b = _field_item(
        tmp_path, "b", sheet, [sheet.vertices[:, 0], sheet.vertices[:, 1]]
    )
    cfg = RunConfig(q=4)
    with pytest.raises(ConfigError, match="mismatch"):
        pair_distance(load_item(a, cfg), load_item(b, cfg), cfg)


def test_manifest_parsing(tmp_path):
    m = tmp_path / "manifest.csv"
    m.write_text(
        "id,label,mesh,grid_dims,fields,descriptors\n"
        "s1,sphere,s1.off,,,\n"
        "g1,grid,,3x3x3,vol.f64,\n"
    )
    items = load_manifest(m)
    assert items[0].id == "s1" and items[0].mesh.endswith("s1.off")
    assert items[1].grid_dims == (3, 3, 3)
    assert items[1].fields[0].endswith("vol.f64")
    dup = tmp_path / "dup.csv"
    dup.write_text("id,label\nx,a\nx,b\n")
    with pytest.raises(InputDataError, match="duplicate"):
        load_manifest(dup)


def test_run_descriptors(tmp_path):
    sphere = synthdata.icosphere(1)
    mesh_path = tmp_path / "s.off"
    write_mesh(sphere, mesh_path)
    out = tmp_path / "desc.csv"
    payload = run_descriptors(mesh_path, 4, out)
    assert payload["vertices"] == sphere.vertex_count
    rows = out.read_text().splitlines()
    assert len(rows) == sphere.vertex_count + 1
    assert len(rows[0].split(",")) == 4


def test_run_distance_report(tmp_path):
    sheet = synthdata.planar_sheet(5, 5)
    f1 = sheet.vertices[:, 0]
    f2 = sheet.vertices[:, 1]
    a = _field_item(tmp_path, "a", sheet, [f1, f2])
    b = _field_item(tmp_path, "b", sheet, [f1, f2])
    out = tmp_path / "report.json"
    payload = run_distance(a, b, RunConfig(q=4), out)
    assert payload["distance"] == 0.0
    data = json.loads(out.read_text())
    assert data["mode"] == "fields"
    w = data["report"]["weights"]
    parts = data["report"]["components"]
    recombined = (
        w[0] * parts["pd0"]["value"]
        + w[1] * parts["pd0-neg"]["value"]
        + w[2] * parts["exdg1"]["value"]
    )
    assert data["distance"] == pytest.approx(recombined)


def _tiny_manifest(tmp_path, n_items=4):
    sheet = synthdata.planar_sheet(5, 5)
    rng = np.random.default_rng(0)
    rows = ["id,label,mesh,fields"]
    for i in range(n_items):
        f1 = synthdata.smooth_random_field(sheet, rng)
        f2 = synthdata.smooth_random_field(sheet, rng)
        spec = _field_item(tmp_path, f"i{i}", sheet, [f1, f2])
        rows.append(
            f"i{i},c{i % 2},{spec.mesh},{spec.fields[0]};{spec.fields[1]}"
        )
    m = tmp_path / "manifest.csv"
    m.write_text("\n".join(rows) + "\n")
    return m


def test_run_matrix_and_resume(tmp_path):
    manifest = _tiny_manifest(tmp_path)
    out = tmp_path / "dist.csv"
    cfg = RunConfig(q=4)
    payload = run_matrix(manifest, cfg, out)
    assert payload["pairs_computed"] == 6
    first = out.read_bytes()
    # resume with a complete sidecar computes nothing new
    payload2 = run_matrix(manifest, cfg, out, resume=True)
    assert payload2["pairs_computed"] == 0
    assert out.read_bytes() == first
    # truncate the sidecar: only missing pairs recompute
    sidecar = out.with_name(out.name + ".pairs.csv")
    rows = sidecar.read_text().splitlines()
    sidecar.write_text("\n".join(rows[:3]) + "\n")
    payload3 = run_matrix(manifest, cfg, out, resume=True)
    assert payload3["pairs_computed"] == 3
    assert out.read_bytes() == first
    # matrix is symmetric with labeled header
    with out.open() as fh:
        parsed = list(csv.reader(fh))
    assert parsed[0][0] == "id"
    n = len(parsed) - 1
    vals = np.array([[float(x) for x in row[1:]] for row in parsed[1:]])
    np.testing.assert_array_equal(vals, vals.T)


def test_matrix_worker_count_invariance(tmp_path):
    manifest = _tiny_manifest(tmp_path)
    out1 = tmp_path / "w1.csv"
    out4 = tmp_path / "w4.csv"
    run_matrix(manifest, RunConfig(q=4, workers=1), out1)
    run_matrix(manifest, RunConfig(q=4, workers=4), out4)
    assert out1.read_bytes() == out4.read_bytes()


def test_run_evaluate(tmp_path):
    manifest = _tiny_manifest(tmp_path)
    out = tmp_path / "dist.csv"
    run_matrix(manifest, RunConfig(q=4), out)
    labels = out.with_name(out.stem + ".labels.csv")
    metrics = run_evaluate(out, labels, out_path=tmp_path / "metrics.json")
    assert set(metrics) == {"nn", "tier1", "tier2", "emeasure", "dcg"}
    saved = json.loads((tmp_path / "metrics.json").read_text())
    assert saved == pytest.approx(metrics)


def test_run_timeseries(tmp_path):
    sheet = synthdata.planar_sheet(5, 5)
    rows = ["id,label,mesh,fields"]
    base1 = sheet.vertices[:, 0]
    base2 = sheet.vertices[:, 1]
    for i in range(5):
        scale = 1.0 if i != 3 else 4.0
        spec = _field_item(tmp_path, f"t{i}", sheet, [base1 * scale, base2])
        rows.append(f"t{i},,{spec.mesh},{spec.fields[0]};{spec.fields[1]}")
    m = tmp_path / "series.csv"
    m.write_text("\n".join(rows) + "\n")
    out = tmp_path / "peaks.csv"
    payload = run_timeseries(m, RunConfig(q=4), out)
    assert len(payload["distances"]) == 4
    # site 4 anomalous (1-based): transitions 3 and 4 spike
    assert {p["t"] for p in payload["peaks"]} == {3, 4}
    text = out.read_text().splitlines()
    assert text[0] == "t,distance,prominence"
    assert len(text) == 5
