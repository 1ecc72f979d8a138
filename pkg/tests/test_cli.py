import csv
import json
import math

import numpy as np
import pytest

from insulopt import __version__
from insulopt.cli import ConfigError, RunConfig, config_from_args, main, parse_domain
from insulopt.io import boundary_rows, export_vtk, write_boundary_csv
from insulopt.mesh import generate_square, generate_two_discs

from conftest import disc


def read_summary(path):
    out = {}
    for line in path.read_text().splitlines():
        key, _, val = line.partition(" = ")
        out[key] = val
    return out


class TestVTK:
    def test_two_triangles(self, tmp_path):
        mesh = generate_square(1)
        export_vtk(mesh, {"u": np.arange(4.0)}, tmp_path / "f.vtk")
        text = (tmp_path / "f.vtk").read_text().splitlines()
        assert text[0] == "# vtk DataFile Version 3.0"
        assert "DATASET UNSTRUCTURED_GRID" in text
        assert "POINTS 4 double" in text
        assert "CELLS 2 8" in text
        i = text.index("CELL_TYPES 2")
        assert text[i + 1:i + 3] == ["5", "5"]
        assert "POINT_DATA 4" in text and "SCALARS u double 1" in text

    def test_geometry_only(self, tmp_path):
        export_vtk(generate_square(2), {}, tmp_path / "f.vtk")
        assert "POINT_DATA" not in (tmp_path / "f.vtk").read_text()

    def test_nan_refused(self, tmp_path):
        mesh = generate_square(1)
        with pytest.raises(ValueError, match="non-finite"):
            export_vtk(mesh, {"u": np.array([0.0, np.nan, 1.0, 2.0])}, tmp_path / "f.vtk")

    def test_length_mismatch(self, tmp_path):
        with pytest.raises(ValueError):
            export_vtk(generate_square(1), {"u": np.zeros(3)}, tmp_path / "f.vtk")

    def test_io_error_surfaces(self, tmp_path):
        with pytest.raises(OSError):
            export_vtk(generate_square(1), {}, tmp_path / "missing" / "f.vtk")


class TestBoundaryCSV:
    @pytest.mark.parametrize("mesh", [disc(3), generate_square(5), generate_two_discs(1, 0.5, 0.5, 2)],
                             ids=["disc", "square", "two-discs"])
    def test_arclength(self, mesh, tmp_path):
        n = mesh.n_vertices
        write_boundary_csv(mesh, np.ones(n), np.zeros(n), tmp_path / "b.csv")
        with open(tmp_path / "b.csv") as fh:
            rows = list(csv.DictReader(fh))
        for c in range(mesh.n_components):
            s = np.array([float(r["arclength"]) for r in rows if int(r["component"]) == c])
            assert np.all(np.diff(s) > 0)
            edges = mesh.boundary_edges[mesh.edge_component == c]
            perim = np.hypot(*(mesh.vertices[edges[:, 1]] - mesh.vertices[edges[:, 0]]).T).sum()
            assert abs(s[-1] - perim) < 1e-10

    def test_counterclockwise(self):
        mesh = disc(2)
        rows = boundary_rows(mesh, np.zeros(mesh.n_vertices), np.zeros(mesh.n_vertices))
        ang = np.unwrap([math.atan2(r[3], r[2]) for r in rows])
        assert np.all(np.diff(ang) > 0)


class TestConfig:
    def test_flags_override_file(self, tmp_path):
        cfg_file = tmp_path / "run.ini"
        cfg_file.write_text("[problem]\nk = 2.0\nm = 3.0\n[output]\nout = from-file\n")
        cfg = config_from_args(["--config", str(cfg_file), "--m", "0.5"])
        assert cfg.k == 2.0 and cfg.m == 0.5 and cfg.out == "from-file"

    def test_unknown_key(self, tmp_path):
        cfg_file = tmp_path / "run.ini"
        cfg_file.write_text("colour = blue\n")
        with pytest.raises(ConfigError, match="unknown"):
            config_from_args(["--config", str(cfg_file)])

    @pytest.mark.parametrize("spec", ["square:8", "disc:1:3", "two-discs:1:0.5:0.5:2", "file:m.txt"])
    def test_domains(self, spec):
        parse_domain(spec)

    @pytest.mark.parametrize("spec", ["square", "disc:1", "hexagon:3", "disc:a:3"])
    def test_bad_domains(self, spec):
        with pytest.raises(ConfigError):
            parse_domain(spec)

    def test_grid(self):
        cfg = RunConfig(m_grid="0.1:10:3")
        assert np.allclose(cfg.masses(), [0.1, 1.0, 10.0])
        assert RunConfig(m_grid="1:2:0").masses() == []


class TestMain:
    def test_negative_mass(self, tmp_path, capsys):
        assert main(["--m", "-1", "--out", str(tmp_path)]) == 1
        assert "m must be positive" in capsys.readouterr().err

    def test_bad_domain_exit(self, tmp_path):
        assert main(["--domain", "disc:0:3", "--out", str(tmp_path)]) == 1

    def test_energy_disc(self, tmp_path):
        out = tmp_path / "run"
        assert main(["--mode", "energy", "--domain", "disc:1:6", "--k", "1", "--m", "1",
                     "--f-const", "1", "--out", str(out)]) == 0
        summary = read_summary(out / "summary.txt")
        assert float(summary["radial_max_error_rel"]) <= 0.01
        assert float(summary["energy"]) < 0
        for name in ("fields.vtk", "boundary.csv", "manifest.json", "mesh.txt"):
            assert (out / name).exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["version"] == __version__
        assert manifest["partial"] is False
        assert manifest["config"]["domain"] == "disc:1:6"

    def test_deterministic_and_replay(self, tmp_path):
        args = ["--mode", "sweep", "--domain", "square:6", "--m-grid", "0.2:2:3", "--restarts", "2",
                "--seed", "7"]
        assert main(args + ["--out", str(tmp_path / "a")]) == 0
        assert main(args + ["--out", str(tmp_path / "b")]) == 0
        assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()
        # every summary number is recomputed from the manifest alone
        assert main(["--replay", str(tmp_path / "a" / "manifest.json"), "--out", str(tmp_path / "c")]) == 0
        assert (tmp_path / "a" / "summary.txt").read_text() == (tmp_path / "c" / "summary.txt").read_text()
        assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "c" / "sweep.csv").read_bytes()

    def test_eigen_mode(self, tmp_path):
        assert main(["--mode", "eigen", "--domain", "disc:1:2", "--m", "5", "--restarts", "2",
                     "--out", str(tmp_path)]) == 0
        summary = read_summary(tmp_path / "summary.txt")
        assert float(summary["lambda_m"]) < float(summary["neumann_Lambda"])

    def test_mesh_file_domain(self, tmp_path):
        assert main(["--mode", "energy", "--domain", "square:4", "--out", str(tmp_path / "a")]) == 0
        assert main(["--mode", "energy", "--domain", f"file:{tmp_path / 'a' / 'mesh.txt'}",
                     "--out", str(tmp_path / "b")]) == 0
        assert (tmp_path / "a" / "boundary.csv").read_bytes() == (tmp_path / "b" / "boundary.csv").read_bytes()

    def test_nonconvergence_exit(self, tmp_path):
        code = main(["--mode", "eigen", "--domain", "disc:1:3", "--m", "0.01", "--restarts", "1",
                     "--max-iter", "2", "--out", str(tmp_path)])
        assert code == 2
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["partial"] is True and manifest["status"] == "not-converged"
        assert (tmp_path / "summary.txt").exists()

    def test_energy_nonconvergence_exit(self, tmp_path):
        assert main(["--mode", "energy", "--domain", "square:8", "--m", "0.01", "--max-iter", "2",
                     "--out", str(tmp_path)]) == 2

    def test_two_component_mode(self, tmp_path):
        assert main(["--mode", "two-component", "--domain", "two-discs:1:0.5:0.5:3",
                     "--out", str(tmp_path)]) == 0
        summary = read_summary(tmp_path / "summary.txt")
        assert float(summary["mass_fraction_0"]) > 0.95

    def test_threshold_mode(self, tmp_path):
        assert main(["--mode", "threshold", "--domain", "disc:1:2", "--bracket", "0.25:8",
                     "--bracket-tol", "0.05", "--restarts", "2", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "threshold.csv").exists()
        assert float(read_summary(tmp_path / "summary.txt")["m0"]) > 0

    def test_concentration_mode(self, tmp_path):
        assert main(["--mode", "concentration", "--domain", "square:8", "--m-grid", "0.1:1:2",
                     "--out", str(tmp_path)]) == 0
        rows = (tmp_path / "concentration.csv").read_text().splitlines()
        assert rows[0] == "m,near_fraction,iterations" and len(rows) == 3
