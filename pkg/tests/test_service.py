import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

import synthdata
from mftopo.mesh import write_mesh
from mftopo.service import app


@pytest.fixture()
def client():
    return TestClient(app, raise_server_exceptions=False)


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"
    assert body["version"]


def test_descriptors_endpoint(client, tmp_path):
    sphere = synthdata.icosphere(1)
    mesh_path = tmp_path / "s.off"
    write_mesh(sphere, mesh_path)
    out = tmp_path / "desc.csv"
    resp = client.post(
        "/descriptors",
        json={"mesh_path": str(mesh_path), "count": 3, "out_path": str(out)},
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["vertices"] == sphere.vertex_count
    assert len(body["eigenvalues"]) == 4
    assert out.exists()


def test_descriptors_missing_file_is_400(client, tmp_path):
    resp = client.post(
        "/descriptors", json={"mesh_path": str(tmp_path / "nope.off"), "count": 3}
    )
    assert resp.status_code == 400


def test_distance_endpoint_fields(client, tmp_path):
    sheet = synthdata.planar_sheet(5, 5)
    mesh_path = tmp_path / "m.off"
    write_mesh(sheet, mesh_path)
    f1 = tmp_path / "f1.txt"
    f2 = tmp_path / "f2.txt"
    f1.write_text("\n".join(str(v) for v in sheet.vertices[:, 0]))
    f2.write_text("\n".join(str(v) for v in sheet.vertices[:, 1]))
    item = {
        "id": "a",
        "mesh": str(mesh_path),
        "fields": [str(f1), str(f2)],
    }
    resp = client.post(
        "/distance",
        json={"a": item, "b": dict(item, id="b"), "config": {"q": 4}},
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["distance"] == 0.0
    assert body["mode"] == "fields"
    assert body["report"]["components"]["pd0"]["value"] == 0.0


def test_distance_field_count_mismatch_is_422(client, tmp_path):
    sheet = synthdata.planar_sheet(4, 4)
    mesh_path = tmp_path / "m.off"
    write_mesh(sheet, mesh_path)
    f1 = tmp_path / "f1.txt"
    f1.write_text("\n".join(str(v) for v in sheet.vertices[:, 0]))
    a = {"id": "a", "mesh": str(mesh_path), "fields": [str(f1)]}
    b = {"id": "b", "mesh": str(mesh_path), "fields": [str(f1), str(f1)]}
    resp = client.post("/distance", json={"a": a, "b": b, "config": {"q": 4}})
    assert resp.status_code == 422


def test_bad_config_is_422(client, tmp_path):
    resp = client.post(
        "/distance",
        json={
            "a": {"id": "a", "mesh": "x.off"},
            "b": {"id": "b", "mesh": "y.off"},
            "config": {"weights": [1.0, 1.0, 1.0]},
        },
    )
    assert resp.status_code == 422


def test_matrix_evaluate_timeseries_endpoints(client, tmp_path):
    sheet = synthdata.planar_sheet(5, 5)
    rng = np.random.default_rng(1)
    rows = ["id,label,mesh,fields"]
    for i in range(4):
        mesh_path = tmp_path / f"m{i}.off"
        write_mesh(sheet, mesh_path)
        f1 = tmp_path / f"a{i}.txt"
        f2 = tmp_path / f"b{i}.txt"
        f1.write_text("\n".join(str(v) for v in synthdata.smooth_random_field(sheet, rng)))
        f2.write_text("\n".join(str(v) for v in synthdata.smooth_random_field(sheet, rng)))
        rows.append(f"m{i},c{i % 2},{mesh_path},{f1};{f2}")
    manifest = tmp_path / "manifest.csv"
    manifest.write_text("\n".join(rows) + "\n")
    out = tmp_path / "dist.csv"
    resp = client.post(
        "/matrix",
        json={
            "manifest_path": str(manifest),
            "out_path": str(out),
            "config": {"q": 4},
        },
    )
    assert resp.status_code == 200
    assert resp.json()["pairs_computed"] == 6

    resp = client.post(
        "/evaluate",
        json={
            "matrix_path": str(out),
            "labels_path": str(out.with_name(out.stem + ".labels.csv")),
        },
    )
    assert resp.status_code == 200
    assert set(resp.json()) == {"nn", "tier1", "tier2", "emeasure", "dcg"}

    resp = client.post(
        "/timeseries",
        json={"manifest_path": str(manifest), "config": {"q": 4}},
    )
    assert resp.status_code == 200
    assert len(resp.json()["distances"]) == 3
