"""CLI exit-code contract, artifact round-trips, determinism."""

import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from plate6.cli import main
from plate6.fileio import (
    ConfigError,
    load_boundary,
    load_loads,
    load_material,
    load_run_config,
    read_fields_csv,
    write_fields_csv,
)
from plate6.constitutive import CosseratParams, EngineeringParams, IsotropicCoefficients
from plate6.kinematics import PlateGrid, identity_configuration


def write_json(path: Path, doc: dict) -> Path:
    path.write_text(json.dumps(doc, indent=1))
    return path


@pytest.fixture
def workspace(tmp_path):
    write_json(
        tmp_path / "material.json",
        {
            "schema_version": 1,
            "kind": "engineering",
            "young_modulus": 1.0,
            "poisson_ratio": 0.3,
            "thickness": 0.1,
        },
    )
    write_json(tmp_path / "loads_zero.json", {"schema_version": 1})
    write_json(
        tmp_path / "loads_bending.json",
        {"schema_version": 1, "f": [0.0, 0.0, 0.001]},
    )
    write_json(
        tmp_path / "boundary.json",
        {
            "schema_version": 1,
            "edges": {
                "left": "dirichlet",
                "right": "dirichlet",
                "bottom": "dirichlet",
                "top": "dirichlet",
            },
            "mode": "clamped",
            "y_star": "reference",
            "Q_star": "identity",
        },
    )
    write_json(
        tmp_path / "run_zero.json",
        {
            "schema_version": 1,
            "grid": {"lengths": [1.0, 1.0], "nodes": [7, 7], "thickness": 0.1},
            "material": "material.json",
            "loads": "loads_zero.json",
            "boundary": "boundary.json",
            "solver": {"max_iterations": 50, "grad_tolerance": 1e-9},
            "output": {"directory": "out_zero"},
        },
    )
    write_json(
        tmp_path / "run_bending.json",
        {
            "schema_version": 1,
            "grid": {"lengths": [1.0, 1.0], "nodes": [9, 9], "thickness": 0.1},
            "material": "material.json",
            "loads": "loads_bending.json",
            "boundary": "boundary.json",
            "solver": {"max_iterations": 3000, "grad_tolerance": 1e-8, "seed": 3},
            "output": {"directory": "out_bending"},
        },
    )
    return tmp_path


def file_hashes(root: Path) -> dict:
    return {
        p.relative_to(root): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


class TestCheckMaterial:
    def test_engineering_passes(self, workspace, capsys):
        code = main(["check-material", str(workspace / "material.json")])
        assert code == 0
        assert "PASS" in capsys.readouterr().out

    def test_violating_coefficients_fail(self, tmp_path, capsys):
        path = write_json(
            tmp_path / "bad.json",
            {
                "schema_version": 1,
                "kind": "isotropic_coefficients",
                "alpha": [1.0, 2.0, 1.0, 1.0],
                "beta": [1.0, 0.0, 1.0, 1.0],
            },
        )
        code = main(["check-material", str(path)])
        out = capsys.readouterr().out
        assert code == 1
        assert "alpha3 - alpha2 > 0" in out
        assert "FAIL" in out

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        assert main(["check-material", str(path)]) == 2

    def test_missing_file(self, tmp_path):
        assert main(["check-material", str(tmp_path / "nope.json")]) == 2

    def test_anisotropic_identity_passes(self, tmp_path):
        path = write_json(
            tmp_path / "aniso.json",
            {"schema_version": 1, "kind": "anisotropic", "matrix": np.eye(12).tolist()},
        )
        assert main(["check-material", str(path)]) == 0

    def test_cosserat_degenerate_fails_regime(self, tmp_path, capsys):
        path = write_json(
            tmp_path / "cos0.json",
            {
                "schema_version": 1,
                "kind": "cosserat",
                "mu": 1.0,
                "lambda": 1.0,
                "mu_c": 0.0,
                "internal_length": 0.1,
                "thickness": 0.1,
            },
        )
        code = main(["check-material", str(path)])
        assert code == 1
        assert "mu_c > 0" in capsys.readouterr().out


class TestSolve:
    def test_zero_load_identity(self, workspace, capsys):
        code = main(["solve", "--config", str(workspace / "run_zero.json")])
        out = capsys.readouterr().out
        assert code == 0
        assert "converged: True" in out
        report = json.loads((workspace / "out_zero" / "solve_report.json").read_text())
        assert report["converged"] is True
        assert abs(report["final_energy"]["total"]) < 1e-20

    def test_artifacts_roundtrip(self, workspace):
        assert main(["solve", "--config", str(workspace / "run_bending.json")]) == 0
        out = workspace / "out_bending"
        rc = load_run_config(workspace / "run_bending.json")
        config = read_fields_csv(out / "fields.csv", rc.grid)
        config.validate(rc.grid, tol=1e-9)
        # strains CSV parses and has one row per cell
        rows = (out / "strains.csv").read_text().strip().splitlines()
        assert len(rows) == 1 + rc.grid.cells_x * rc.grid.cells_y
        history = (out / "history.csv").read_text().strip().splitlines()
        assert history[0] == "iteration,total,membrane,bending,load_potential,grad_norm,step"
        assert len(history) >= 2
        for name in ("solve_report.json", "residual_report.json"):
            doc = json.loads((out / name).read_text())
            assert doc["schema_version"] == 1
        vtk = (out / "fields.vtk").read_text().splitlines()
        assert vtk[0].startswith("# vtk DataFile")
        assert any(line.startswith("DIMENSIONS 9 9 1") for line in vtk)

    def test_deterministic_rerun(self, workspace):
        assert main(["solve", "--config", str(workspace / "run_bending.json"),
                     "--output", str(workspace / "det_a")]) == 0
        assert main(["solve", "--config", str(workspace / "run_bending.json"),
                     "--output", str(workspace / "det_b")]) == 0
        for name in ("fields.csv", "strains.csv", "history.csv", "fields.vtk"):
            a = (workspace / "det_a" / name).read_bytes()
            b = (workspace / "det_b" / name).read_bytes()
            assert a == b, f"{name} differs between identical runs"

    def test_inputs_never_mutated(self, workspace):
        before = {p: p.read_bytes() for p in workspace.glob("*.json")}
        main(["solve", "--config", str(workspace / "run_bending.json")])
        for p, content in before.items():
            assert p.read_bytes() == content

    def test_nonconvergence_exit_one_artifacts_written(self, workspace, tmp_path):
        doc = json.loads((workspace / "run_bending.json").read_text())
        doc["solver"]["max_iterations"] = 2
        doc["output"]["directory"] = "out_short"
        write_json(workspace / "run_short.json", doc)
        code = main(["solve", "--config", str(workspace / "run_short.json")])
        assert code == 1
        assert (workspace / "out_short" / "fields.csv").exists()
        report = json.loads((workspace / "out_short" / "solve_report.json").read_text())
        assert report["converged"] is False

    def test_missing_boundary_file(self, workspace, caplog):
        doc = json.loads((workspace / "run_zero.json").read_text())
        doc["boundary"] = "missing_boundary.json"
        write_json(workspace / "run_missing.json", doc)
        code = main(["solve", "--config", str(workspace / "run_missing.json")])
        assert code == 2

    def test_indefinite_material_rejected(self, workspace):
        write_json(
            workspace / "bad_material.json",
            {
                "schema_version": 1,
                "kind": "isotropic_coefficients",
                "alpha": [1.0, 2.0, 1.0, 1.0],
                "beta": [1.0, 0.0, 1.0, 1.0],
            },
        )
        doc = json.loads((workspace / "run_zero.json").read_text())
        doc["material"] = "bad_material.json"
        write_json(workspace / "run_bad.json", doc)
        assert main(["solve", "--config", str(workspace / "run_bad.json")]) == 2


class TestVerify:
    def test_identity_case_passes(self, workspace):
        assert main(["solve", "--config", str(workspace / "run_zero.json")]) == 0
        doc = json.loads((workspace / "run_zero.json").read_text())
        doc["verify"] = {"fields": "out_zero/fields.csv", "residual_max": 1e-10}
        write_json(workspace / "run_verify.json", doc)
        assert main(["verify", "--config", str(workspace / "run_verify.json")]) == 0

    def test_solved_bending_verifies(self, workspace):
        assert main(["solve", "--config", str(workspace / "run_bending.json")]) == 0
        doc = json.loads((workspace / "run_bending.json").read_text())
        doc["verify"] = {"fields": "out_bending/fields.csv"}
        write_json(workspace / "run_vb.json", doc)
        assert main(["verify", "--config", str(workspace / "run_vb.json")]) == 0

    def test_corrupted_fields_exit_two(self, workspace):
        assert main(["solve", "--config", str(workspace / "run_zero.json")]) == 0
        fields = workspace / "out_zero" / "fields.csv"
        fields.write_text(fields.read_text().replace("1.0", "banana", 1))
        doc = json.loads((workspace / "run_zero.json").read_text())
        doc["verify"] = {"fields": "out_zero/fields.csv"}
        write_json(workspace / "run_corrupt.json", doc)
        assert main(["verify", "--config", str(workspace / "run_corrupt.json")]) == 2

    def test_tolerance_violation_exit_one(self, workspace):
        assert main(["solve", "--config", str(workspace / "run_bending.json")]) == 0
        doc = json.loads((workspace / "run_bending.json").read_text())
        # absurd residual gate: the converged state cannot satisfy 1e-30
        doc["verify"] = {"fields": "out_bending/fields.csv", "residual_max": 1e-30}
        write_json(workspace / "run_tight.json", doc)
        assert main(["verify", "--config", str(workspace / "run_tight.json")]) == 1


class TestEquivalence:
    def cosserat_doc(self, **overrides):
        doc = {
            "schema_version": 1,
            "kind": "cosserat",
            "mu": 1.0,
            "lambda": 1.0,
            "mu_c": 0.5,
            "internal_length": 0.01,
            "a5": 1.0,
            "a6": 1.0,
            "a7": 0.0,
            "p": 1.0,
            "a4": 0.0,
            "thickness": 0.1,
        }
        doc.update(overrides)
        return doc

    def test_valid_parameters_pass(self, tmp_path, capsys):
        path = write_json(tmp_path / "cos.json", self.cosserat_doc())
        code = main(["equivalence", str(path), "--samples", "4000", "--seed", "2"])
        out = capsys.readouterr().out
        assert code == 0
        fitted = float(out.split("fitted shear correction: ")[1].splitlines()[0])
        assert abs(fitted - 1.0) <= 1e-12

    def test_wrong_exponent_exit_two(self, tmp_path):
        path = write_json(tmp_path / "cos_p2.json", self.cosserat_doc(p=2.0))
        assert main(["equivalence", str(path)]) == 2

    def test_degenerate_couple_modulus_warns_but_runs(self, tmp_path, caplog):
        path = write_json(tmp_path / "cos_mu0.json", self.cosserat_doc(mu_c=0.0))
        code = main(["equivalence", str(path), "--samples", "2000"])
        assert code == 0
        assert any("mu_c = 0" in r.message for r in caplog.records)


class TestFileFormats:
    def test_material_kinds_roundtrip(self, tmp_path):
        m = load_material(
            write_json(
                tmp_path / "iso.json",
                {
                    "schema_version": 1,
                    "kind": "isotropic_coefficients",
                    "alpha": [0.1, 0.0, 0.2, 0.15],
                    "beta": [0.01, 0.0, 0.02, 0.015],
                },
            )
        )
        assert isinstance(m, IsotropicCoefficients)
        m = load_material(
            write_json(
                tmp_path / "eng.json",
                {
                    "schema_version": 1,
                    "kind": "engineering",
                    "young_modulus": 2.0,
                    "poisson_ratio": 0.25,
                    "thickness": 0.05,
                },
            )
        )
        assert isinstance(m, EngineeringParams)
        m = load_material(
            write_json(
                tmp_path / "cos.json",
                {
                    "schema_version": 1,
                    "kind": "cosserat",
                    "mu": 1.0,
                    "lambda": 2.0,
                    "mu_c": 0.1,
                    "internal_length": 0.05,
                    "thickness": 0.2,
                },
            )
        )
        assert isinstance(m, CosseratParams)

    def test_unknown_kind_rejected(self, tmp_path):
        path = write_json(tmp_path / "weird.json", {"schema_version": 1, "kind": "rubber"})
        with pytest.raises(ConfigError, match="kind"):
            load_material(path)

    def test_wrong_schema_version(self, tmp_path):
        path = write_json(tmp_path / "v2.json", {"schema_version": 2, "kind": "engineering"})
        with pytest.raises(ConfigError, match="schema_version"):
            load_material(path)

    def test_fields_csv_roundtrip(self, tmp_path, rng):
        from plate6.so3 import exp_so3

        grid = PlateGrid(1.0, 1.0, 5, 4, 0.1)
        cfg = identity_configuration(grid)
        cfg.y = cfg.y + 0.01 * rng.standard_normal(cfg.y.shape)
        cfg.Q = exp_so3(0.2 * rng.standard_normal((5, 4, 3)))
        write_fields_csv(tmp_path / "f.csv", grid, cfg)
        back = read_fields_csv(tmp_path / "f.csv", grid)
        np.testing.assert_array_equal(back.y, cfg.y)
        np.testing.assert_array_equal(back.Q, cfg.Q)

    def test_loads_per_node(self, tmp_path):
        grid = PlateGrid(1.0, 1.0, 3, 3, 0.1)
        f = np.zeros((3, 3, 3))
        f[1, 1] = [0.0, 0.0, 2.0]
        path = write_json(
            tmp_path / "loads.json", {"schema_version": 1, "f": f.tolist()}
        )
        loads = load_loads(path, grid)
        np.testing.assert_array_equal(loads.f, f)

    def test_boundary_edge_mismatch(self, tmp_path):
        grid = PlateGrid(1.0, 1.0, 3, 3, 0.1, dirichlet_edges=frozenset({"left"}))
        path = write_json(
            tmp_path / "bd.json",
            {
                "schema_version": 1,
                "edges": {"left": "dirichlet", "right": "dirichlet",
                          "bottom": "free", "top": "free"},
                "mode": "relaxed",
            },
        )
        with pytest.raises(ConfigError, match="edge labels"):
            load_boundary(path, grid)

    def test_boundary_constant_rotation(self, tmp_path):
        from plate6.so3 import exp_so3

        grid = PlateGrid(1.0, 1.0, 3, 3, 0.1, dirichlet_edges=frozenset({"left"}))
        R = exp_so3([0.1, 0.2, 0.3])
        path = write_json(
            tmp_path / "bd.json",
            {
                "schema_version": 1,
                "edges": {"left": "dirichlet", "right": "free",
                          "bottom": "free", "top": "free"},
                "mode": "clamped",
                "y_star": [0.0, 0.0, 0.1],
                "Q_star": R.tolist(),
            },
        )
        bd = load_boundary(path, grid)
        np.testing.assert_allclose(bd.Q_star[0, 0], R)
        np.testing.assert_allclose(bd.y_star[0, 1, 2], 0.1)

    def test_non_rotation_q_star_rejected(self, tmp_path):
        grid = PlateGrid(1.0, 1.0, 3, 3, 0.1, dirichlet_edges=frozenset({"left"}))
        path = write_json(
            tmp_path / "bd.json",
            {
                "schema_version": 1,
                "edges": {"left": "dirichlet", "right": "free",
                          "bottom": "free", "top": "free"},
                "mode": "clamped",
                "Q_star": (2.0 * np.eye(3)).tolist(),
            },
        )
        with pytest.raises(ConfigError, match="rotation"):
            load_boundary(path, grid)
