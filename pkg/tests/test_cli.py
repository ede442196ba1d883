"""End-to-end checks of the command-line interface (run in process)."""

import dataclasses
import json

import numpy as np
import pytest

import rectmorley.space
from rectmorley import cli
from rectmorley.mesh import build_uniform, mesh_to_spec


def run(capsys, argv):
    code = cli.main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestSolve:
    def test_solve_emits_json(self, capsys):
        code, out, _ = run(capsys, ["solve", "--mesh", "uniform:8"])
        assert code == cli.EXIT_OK
        doc = json.loads(out)
        assert doc["config"]["mesh_spec"] == "uniform:8"
        assert doc["ndof"] == 9 * 9 + 2 * 8 * 9
        assert doc["err_l2"] > 0
        assert doc["err_h1"] > doc["err_l2"]
        assert doc["solver"]["converged"] is True
        assert doc["solver"]["relative_residual"] <= 1e-12

    def test_zero_problem_is_solved_exactly(self, capsys):
        code, out, _ = run(capsys, ["solve", "--mesh", "uniform:4", "--problem", "zero"])
        assert code == cli.EXIT_OK
        doc = json.loads(out)
        assert doc["err_l2"] <= 1e-12
        assert doc["err_h1"] <= 1e-12

    def test_output_file(self, capsys, tmp_path):
        path = tmp_path / "result.json"
        code, out, _ = run(capsys, ["solve", "--mesh", "uniform:4", "--output", str(path)])
        assert code == cli.EXIT_OK
        assert out == ""
        doc = json.loads(path.read_text())
        assert doc["ndof"] > 0

    def test_mesh_from_file(self, capsys, tmp_path):
        grid = build_uniform(((0.0, 1.0), (0.0, 1.0)), (4, 4))
        path = tmp_path / "mesh.json"
        path.write_text(json.dumps(mesh_to_spec(grid)))
        code, out, _ = run(capsys, ["solve", "--mesh", f"file:{path}"])
        assert code == cli.EXIT_OK
        assert json.loads(out)["h"] == pytest.approx(np.sqrt(2.0) / 4.0)

    @pytest.mark.parametrize(
        "argv",
        [
            ["solve", "--mesh", "uniform:0"],
            ["solve", "--mesh", "hexagonal:8"],
            ["solve", "--mesh", "uniform:8", "--dim", "1"],
            ["solve", "--mesh", "uniform:8", "--domain", "1,0"],
            ["solve", "--mesh", "uniform:8", "--domain", "zero,one"],
            ["solve", "--mesh", "pattern:1-4"],
            ["solve", "--mesh", "pattern:4,level=2"],
            ["solve", "--mesh", "file:/no/such/mesh.json"],
            ["solve", "--mesh", "divisional:split=0.0,counts=1:1"],
            ["solve", "--mesh", "divisional:split=0.5,counts=1"],
        ],
    )
    def test_invalid_configs(self, capsys, argv):
        code, _, err = run(capsys, argv)
        assert code == cli.EXIT_INVALID_CONFIG
        assert "error" in err

    def test_unknown_problem_rejected_by_parser(self, capsys):
        code, _, err = run(capsys, ["solve", "--mesh", "uniform:4", "--problem", "mystery"])
        assert code == cli.EXIT_INVALID_CONFIG
        assert "invalid choice" in err

    def test_file_mesh_dim_mismatch(self, capsys, tmp_path):
        grid = build_uniform(((0.0, 1.0),) * 3, (2, 2, 2))
        path = tmp_path / "mesh3d.json"
        path.write_text(json.dumps(mesh_to_spec(grid)))
        code, _, err = run(capsys, ["solve", "--mesh", f"file:{path}", "--dim", "2"])
        assert code == cli.EXIT_INVALID_CONFIG
        assert "dim" in err


class TestStudy:
    def test_csv_on_stdout(self, capsys):
        code, out, _ = run(
            capsys, ["study", "--mesh", "uniform", "--levels", "4,8,16", "--problem", "bubble"]
        )
        assert code == cli.EXIT_OK
        lines = out.strip().splitlines()
        assert len(lines) == 4
        header = lines[0].split(",")
        assert "err_h1" in header and "rate_h1" in header
        first = dict(zip(header, lines[1].split(",")))
        assert first["rate_h1"] == ""
        last = dict(zip(header, lines[3].split(",")))
        assert 1.5 < float(last["rate_h1"]) < 2.5

    def test_deterministic_output(self, capsys):
        argv = ["study", "--mesh", "pattern:1-2", "--levels", "2,4"]
        code_a, out_a, _ = run(capsys, argv)
        code_b, out_b, _ = run(capsys, argv)
        assert code_a == code_b == cli.EXIT_OK
        assert out_a == out_b

    def test_file_outputs(self, capsys, tmp_path):
        csv_path = tmp_path / "study.csv"
        json_path = tmp_path / "study.json"
        code, out, _ = run(
            capsys,
            [
                "study",
                "--mesh",
                "divisional:split=0.3,counts=2:3",
                "--levels",
                "1,2",
                "--csv",
                str(csv_path),
                "--json",
                str(json_path),
            ],
        )
        assert code == cli.EXIT_OK
        assert out == ""
        assert len(csv_path.read_text().strip().splitlines()) == 3
        doc = json.loads(json_path.read_text())
        assert doc["metadata"]["config"]["command"] == "study"
        assert len(doc["records"]) == 2

    @pytest.mark.parametrize(
        "argv",
        [
            ["study", "--mesh", "uniform", "--levels", "8"],
            ["study", "--mesh", "uniform:8", "--levels", "4,8"],
            ["study", "--mesh", "uniform", "--levels", "4,4.5"],
            ["study", "--mesh", "file:/tmp/m.json", "--levels", "4,8"],
        ],
    )
    def test_invalid_configs(self, capsys, argv):
        code, _, err = run(capsys, argv)
        assert code == cli.EXIT_INVALID_CONFIG
        assert "error" in err


EXPECTED_LEMMAS = {
    "unisolvence",
    "cell-boundary-orthogonality",
    "patch-orthogonality",
    "strengthened-cauchy-schwarz",
    "interpolation-expansion",
    "stable-decomposition",
    "dof-conformity",
}


class TestVerify:
    def test_single_dim_report(self, capsys):
        code, out, _ = run(capsys, ["verify", "--dims", "2", "--trials", "5"])
        assert code == cli.EXIT_OK
        doc = json.loads(out)
        assert doc["all_pass"] is True
        assert len(doc["reports"]) == 7
        assert {r["lemma"] for r in doc["reports"]} == EXPECTED_LEMMAS
        assert all(r["dim"] == 2 and r["pass"] for r in doc["reports"])
        assert doc["config"]["trials"] == 5

    def test_two_dims(self, capsys):
        code, out, _ = run(capsys, ["verify", "--trials", "3"])
        assert code == cli.EXIT_OK
        doc = json.loads(out)
        assert [r["dim"] for r in doc["reports"]] == [2] * 7 + [3] * 7

    def test_thread_cap_does_not_change_output(self, capsys, monkeypatch):
        code_a, out_a, _ = run(capsys, ["verify", "--dims", "2", "--trials", "5"])
        monkeypatch.setenv("MORLEY_THREADS", "1")
        code_b, out_b, _ = run(capsys, ["verify", "--dims", "2", "--trials", "5"])
        assert code_a == code_b == cli.EXIT_OK
        assert out_a == out_b

    def test_fault_injection_is_caught(self, capsys, monkeypatch):
        original = rectmorley.space.build_dof_map

        def flipped(grid):
            dm = original(grid)
            signs = dm.cell_signs.copy()
            signs[:, 2**grid.dim :] = np.abs(signs[:, 2**grid.dim :])
            return dataclasses.replace(dm, cell_signs=signs)

        monkeypatch.setattr(rectmorley.space, "build_dof_map", flipped)
        code, out, _ = run(capsys, ["verify", "--dims", "2", "--trials", "3"])
        assert code == cli.EXIT_VERIFY_FAILED
        doc = json.loads(out)
        failing = {r["lemma"] for r in doc["reports"] if not r["pass"]}
        assert failing == {"dof-conformity"}

    def test_dim_one_rejected(self, capsys):
        code, _, err = run(capsys, ["verify", "--dims", "1,2"])
        assert code == cli.EXIT_INVALID_CONFIG
        assert "dim" in err


class TestParser:
    def test_help_exits_zero(self, capsys):
        assert cli.main(["--help"]) == cli.EXIT_OK
        capsys.readouterr()

    def test_missing_subcommand(self, capsys):
        assert cli.main([]) == cli.EXIT_INVALID_CONFIG
        capsys.readouterr()

    def test_console_entry_point_registered(self):
        from importlib.metadata import entry_points

        eps = entry_points(group="console_scripts")
        names = {ep.name: ep.value for ep in eps}
        assert names.get("morley") == "rectmorley.cli:console_main"

    def test_module_alias(self):
        import subprocess
        import sys

        proc = subprocess.run(
            [sys.executable, "-m", "rectmorley", "--help"], capture_output=True
        )
        assert proc.returncode == 0
        assert b"solve" in proc.stdout
