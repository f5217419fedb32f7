import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from semiflat import cli, export
from semiflat.cubic_diff import RationalCubicDifferential
from semiflat.geometry import ChartAtlas
from semiflat.mesh import build_mesh


def write_toml(tmp_path, text):
    p = tmp_path / "run.toml"
    p.write_text(text)
    return p


def test_print_defaults_parses(capsys):
    assert cli.main(["--print-defaults"]) == 0
    text = capsys.readouterr().out
    cfg = cli.tomllib.loads(text)
    assert cfg["solver"]["n_theta"] == 128 and cfg["transport"]["field"] == "solution"


def test_validate_six_poles(tmp_path, capsys):
    assert cli.main(["validate", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["divisor"]["pole_count"] == 6 and rep["divisor"]["zero_count"] == 0
    assert rep["provenance"]["kernel_backend"] in ("cython", "python")
    assert "PASS" in capsys.readouterr().out


def test_five_pole_divisor_rejected(tmp_path, capsys):
    poles = ", ".join(f"[{np.cos(a):.6f}, {np.sin(a):.6f}]" for a in 2 * np.pi * np.arange(5) / 5)
    cfg = write_toml(tmp_path, f"[cubic]\npoles = [{poles}]\nzeros = []\n")
    assert cli.main(["validate", "--config", str(cfg), "--out", str(tmp_path)]) != 0
    assert "DegreeMismatch" in capsys.readouterr().err


def test_bad_config_rejected(tmp_path, capsys):
    cfg = write_toml(tmp_path, "[transport]\nfield = \"nonsense\"\n")
    assert cli.main(["holonomy", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert "ConfigError" in capsys.readouterr().err


def test_holonomy_on_model_field(tmp_path):
    cfg = write_toml(tmp_path, "[transport]\nfield = \"model\"\n")
    assert cli.main(["holonomy", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    pole = rep["poles"][0]
    assert pole["class"] == "ParabolicWithFixedPoint"
    assert {w["winding"] for w in pole["windings"]} == {1}
    with open(tmp_path / "fields" / "pole0_developed.csv") as fh:
        assert next(csv.reader(fh)) == ["alpha1", "alpha2"]
    assert (tmp_path / "plots" / "pole0_developed.svg").stat().st_size > 0


def test_reports_deterministic(tmp_path):
    cfg = cli.load_config(write_toml(tmp_path, "[transport]\nfield = \"model\"\n"), out=tmp_path)
    a, _ = cli.run("winding", cfg)
    b, _ = cli.run("winding", cfg)
    assert json.dumps(cli._jsonable(cli.strip_timing(a)), sort_keys=True) == \
        json.dumps(cli._jsonable(cli.strip_timing(b)), sort_keys=True)
    assert cli.config_hash(cfg) == cli.config_hash({**cfg, "out": "elsewhere"})


def test_mirror_command(tmp_path):
    assert cli.main(["mirror", "--out", str(tmp_path)]) == 0
    assert any(p.name.startswith("blaschke_metric") for p in (tmp_path / "fields").iterdir())


def test_pole_out_of_range(tmp_path, capsys):
    cfg = write_toml(tmp_path, "[solver]\nn_theta = 16\nt_min = -16.0\n")
    cfg_d = cli.load_config(cfg, out=tmp_path)
    with pytest.raises(cli.ConfigError):
        cli.Run(cfg_d, pole=9).poles(6)


def test_mesh_field_csv(tmp_path):
    U = RationalCubicDifferential.from_divisor(np.exp(2j * np.pi * np.arange(6) / 6))
    mesh = build_mesh(ChartAtlas.build(U), n_theta=16, t_min=-16.0)
    vals = np.arange(mesh.n, dtype=float)
    path = tmp_path / "v.csv"
    export.write_mesh_field(path, mesh, vals)
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["chart", "re_z", "im_z", "value"]
    assert len(rows) == mesh.n
    assert {r["chart"] for r in rows} == {"sphere"} | {f"pole{k}" for k in range(6)}
    export.heatmap_svg(tmp_path / "v.svg", mesh.z[mesh.kind == -1], vals[mesh.kind == -1], title="v")
    assert (tmp_path / "v.svg").read_text().lstrip().startswith("<?xml")


def test_pure_python_fallback():
    env = {**os.environ, "SEMIFLAT_PURE_PYTHON": "1"}
    code = "from semiflat import kernels; print(kernels.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
