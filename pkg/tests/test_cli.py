import json

import numpy as np
import pytest

import synthdata
from mftopo.cli import main
from mftopo.mesh import write_mesh


def _sphere_off(tmp_path, name="s.off"):
    p = tmp_path / name
    write_mesh(synthdata.icosphere(1), p)
    return p


def test_usage_error_exit_code(capsys):
    assert main(["descriptors"]) == 1
    assert main([]) == 1
    assert main(["not-a-command"]) == 1


def test_descriptors_command(tmp_path, capsys):
    mesh = _sphere_off(tmp_path)
    out = tmp_path / "d.csv"
    code = main(["descriptors", str(mesh), "-E", "3", "--out", str(out)])
    assert code == 0
    assert out.exists()
    payload = json.loads(capsys.readouterr().out)
    assert payload["vertices"] == 42
    assert main(["descriptors", str(mesh), "-E", "0", "--out", str(out)]) == 1


def test_descriptors_missing_file_exit_2(tmp_path, capsys):
    out = tmp_path / "d.csv"
    code = main(["descriptors", str(tmp_path / "nope.off"), "--out", str(out)])
    assert code == 2


def test_distance_command_fields(tmp_path, capsys):
    sheet = synthdata.planar_sheet(5, 5)
    mesh = tmp_path / "m.off"
    write_mesh(sheet, mesh)
    f1 = tmp_path / "f1.txt"
    f2 = tmp_path / "f2.txt"
    f1.write_text("\n".join(str(v) for v in sheet.vertices[:, 0]))
    f2.write_text("\n".join(str(v) for v in sheet.vertices[:, 1]))
    fields = f"{f1};{f2}"
    out = tmp_path / "report.json"
    code = main(
        [
            "distance",
            str(mesh),
            str(mesh),
            "--fields-a",
            fields,
            "--fields-b",
            fields,
            "--q",
            "4",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["distance"] == 0.0
    assert json.loads(out.read_text())["mode"] == "fields"


def test_distance_grid_volumes(tmp_path, capsys):
    dims = "3x3x3"
    n = 27
    xs = (np.arange(n) % 3).astype("<f8")
    a = tmp_path / "a.f64"
    b = tmp_path / "b.f64"
    xs.tofile(a)
    (xs * 2).tofile(b)
    code = main(
        ["distance", str(a), str(b), "--grid-dims", dims, "--q", "3"]
    )
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["distance"] >= 0.0


def test_matrix_evaluate_roundtrip(tmp_path, capsys):
    sheet = synthdata.planar_sheet(5, 5)
    rng = np.random.default_rng(7)
    rows = ["id,label,mesh,fields"]
    for i in range(4):
        mesh_path = tmp_path / f"m{i}.off"
        write_mesh(sheet, mesh_path)
        fa = tmp_path / f"fa{i}.txt"
        fb = tmp_path / f"fb{i}.txt"
        fa.write_text("\n".join(str(v) for v in synthdata.smooth_random_field(sheet, rng)))
        fb.write_text("\n".join(str(v) for v in synthdata.smooth_random_field(sheet, rng)))
        rows.append(f"m{i},c{i % 2},{mesh_path},{fa};{fb}")
    manifest = tmp_path / "manifest.csv"
    manifest.write_text("\n".join(rows) + "\n")
    out = tmp_path / "matrix.csv"
    assert main(["matrix", str(manifest), "--out", str(out), "--q", "4"]) == 0
    capsys.readouterr()
    labels = out.with_name(out.stem + ".labels.csv")
    code = main(["evaluate", str(out), str(labels)])
    assert code == 0
    metrics = json.loads(capsys.readouterr().out)
    assert set(metrics) == {"nn", "tier1", "tier2", "emeasure", "dcg"}


def test_timeseries_command(tmp_path, capsys):
    sheet = synthdata.planar_sheet(5, 5)
    rows = ["id,label,mesh,fields"]
    for i in range(4):
        mesh_path = tmp_path / f"t{i}.off"
        write_mesh(sheet, mesh_path)
        scale = 1.0 if i != 2 else 5.0
        fa = tmp_path / f"ta{i}.txt"
        fb = tmp_path / f"tb{i}.txt"
        fa.write_text("\n".join(str(v * scale) for v in sheet.vertices[:, 0]))
        fb.write_text("\n".join(str(v) for v in sheet.vertices[:, 1]))
        rows.append(f"t{i},,{mesh_path},{fa};{fb}")
    manifest = tmp_path / "series.csv"
    manifest.write_text("\n".join(rows) + "\n")
    code = main(["timeseries", str(manifest), "--q", "4"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert len(payload["distances"]) == 3


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("q = 3\nweights = [0.5, 0.25, 0.25]\n")
    mesh = _sphere_off(tmp_path)
    # bad weights via flag -> usage error
    code = main(
        [
            "distance",
            str(mesh),
            str(mesh),
            "--config",
            str(cfg),
            "--weights",
            "1,1,1",
        ]
    )
    assert code == 1


def test_byte_identical_reruns(tmp_path):
    mesh = _sphere_off(tmp_path)
    out1 = tmp_path / "d1.csv"
    out2 = tmp_path / "d2.csv"
    assert main(["descriptors", str(mesh), "-E", "3", "--out", str(out1)]) == 0
    assert main(["descriptors", str(mesh), "-E", "3", "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
