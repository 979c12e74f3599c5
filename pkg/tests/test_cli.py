"""Configuration parsing, file formats and run orchestration."""

import os

import numpy as np
import pytest

from wgf2d.cli import (
    load_density_table,
    main,
    parse_config,
    read_nearfield_binary,
    run_convergence,
    run_nearfield,
    run_solve,
    run_validate,
)
from wgf2d.errors import ConfigError, ValidationFailure

BASE = """
[medium]
depths = [0.0, 1.5]
wavenumbers = [[10.0, 0.0], [20.0, 0.0], [30.0, 0.0]]
nu = [1.0, 1.0]

[incidence]
alpha = -1.0471975511965976

[window]
A_over_lambda = 4.0
c = 0.7

[discretization]
points_per_wavelength = 10.0
"""

DEFECTS = """
[[defects]]
interface = 1
kind = "semicircle_bump"
radius = 1.0
"""


def write_cfg(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestParseConfig:
    def test_minimal_valid(self, tmp_path):
        cfg = parse_config(write_cfg(tmp_path, BASE))
        assert cfg.stack.n_layers == 3
        assert cfg.c == 0.7
        assert len(cfg.config_hash) == 16

    def test_unknown_key_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config(write_cfg(tmp_path, BASE + "\n[nearfield]\nrect=[0,1,0,1]\nnx=4\nny=4\nbogus=1\n"))

    def test_unknown_section_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown config section"):
            parse_config(write_cfg(tmp_path, BASE + "\n[solverx]\nfoo=1\n"))

    def test_schema_bounds(self, tmp_path):
        bad = BASE.replace("c = 0.7", "c = 1.4")
        with pytest.raises(ConfigError):
            parse_config(write_cfg(tmp_path, bad))
        bad = BASE.replace("alpha = -1.0471975511965976", "alpha = 0.3")
        with pytest.raises(ConfigError):
            parse_config(write_cfg(tmp_path, bad))

    def test_complex_pairs(self, tmp_path):
        text = BASE.replace("[20.0, 0.0]", "[20.0, 0.5]")
        cfg = parse_config(write_cfg(tmp_path, text))
        assert cfg.stack.wavenumbers[1] == 20.0 + 0.5j

    def test_duplicate_defect_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config(write_cfg(tmp_path, BASE + DEFECTS + DEFECTS))

    def test_missing_file_and_parse_error(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config(str(tmp_path / "missing.toml"))
        with pytest.raises(ConfigError):
            parse_config(write_cfg(tmp_path, "not == toml =="))


@pytest.mark.slow
class TestRunSolve:
    def test_outputs_and_determinism(self, tmp_path):
        cfg = parse_config(write_cfg(tmp_path, BASE + DEFECTS))
        out1 = tmp_path / "o1"
        out2 = tmp_path / "o2"
        run_solve(cfg, str(out1))
        run_solve(cfg, str(out2))
        t1 = (out1 / "densities.csv").read_text()
        t2 = (out2 / "densities.csv").read_text()
        assert t1 == t2
        head = t1.splitlines()[0]
        assert head == "interface,t,x,y,w,Re_phi,Im_phi,Re_psi,Im_psi"
        meta = (out1 / "densities.meta").read_text()
        assert f"config_hash={cfg.config_hash}" in meta
        assert "interface1_blend_width" in meta
        assert "residual" in meta

    def test_density_table_roundtrip(self, tmp_path):
        from wgf2d.cli import build_problem

        cfg = parse_config(write_cfg(tmp_path, BASE + DEFECTS))
        out = tmp_path / "o"
        run_solve(cfg, str(out))
        problem = build_problem(cfg.stack, cfg.incidence, cfg.defects,
                                cfg.a_over_lambda, cfg.c, cfg.ppw)
        dens = load_density_table(str(out / "densities.csv"), problem)
        assert dens.phi[0].dtype == complex
        assert len(dens.phi[0]) == problem.grids[0].n_nodes


@pytest.mark.slow
class TestRunNearfield:
    def test_binary_roundtrip_and_mask(self, tmp_path):
        text = BASE + DEFECTS + "\n[nearfield]\nrect = [-1.5, 1.5, -1.0, 1.5]\nnx = 24\nny = 18\ntext_dump = true\n"
        cfg = parse_config(write_cfg(tmp_path, text))
        out = tmp_path / "o"
        run_nearfield(cfg, str(out))
        values, mask, bounds = read_nearfield_binary(str(out / "nearfield.wgf2"))
        assert values.shape == (18, 24)
        assert bounds == (-1.5, 1.5, -1.0, 1.5)
        assert np.any(mask == 1)  # the rectangle straddles the bump surface
        assert np.all(np.isfinite(values))
        assert (out / "nearfield.csv").exists()
        # byte-identity of a rewrite
        import hashlib

        h1 = hashlib.sha256((out / "nearfield.wgf2").read_bytes()).hexdigest()
        run_nearfield(cfg, str(out))
        h2 = hashlib.sha256((out / "nearfield.wgf2").read_bytes()).hexdigest()
        assert h1 == h2

    def test_solve_then_nearfield_from_table(self, tmp_path):
        text = BASE + DEFECTS + "\n[nearfield]\nrect = [-1.0, 1.0, -0.8, 1.2]\nnx = 8\nny = 6\n"
        cfg = parse_config(write_cfg(tmp_path, text))
        out = tmp_path / "o"
        run_solve(cfg, str(out))
        run_nearfield(cfg, str(out), densities=str(out / "densities.csv"))
        assert (out / "nearfield.wgf2").exists()


class TestRunConvergence:
    def test_single_entry_rejected(self, tmp_path):
        text = BASE + "\n[convergence]\nA_list_over_lambda = [4.0]\n"
        with pytest.raises(ConfigError):
            parse_config(write_cfg(tmp_path, text))

    @pytest.mark.slow
    def test_flat_convergence_rows(self, tmp_path):
        text = BASE + "\n[convergence]\nA_list_over_lambda = [2.0, 3.0, 4.0]\n"
        cfg = parse_config(write_cfg(tmp_path, text))
        out = tmp_path / "o"
        res = run_convergence(cfg, str(out))
        lines = (out / "convergence.csv").read_text().splitlines()
        assert lines[0] == "A_over_lambda,alpha,max_rel_error"
        assert len(lines) == 3
        errs = [float(l.split(",")[2]) for l in lines[1:]]
        # tiny windows leave cross-quadrature residue; errors shrink with A
        assert errs[0] < 1e-4 and errs[1] < errs[0]


class TestRunValidate:
    def test_default_config_passes(self, tmp_path):
        cfg = parse_config(write_cfg(tmp_path, BASE))
        out = tmp_path / "o"
        res = run_validate(cfg, str(out))
        report = (out / "validate.txt").read_text()
        assert res["failed"] == 0
        assert "result=PASS" in report
        assert f"config_hash={cfg.config_hash}" in report
        assert "tool_version=" in report

    def test_negative_control_branch_flip(self, tmp_path):
        cfg = parse_config(write_cfg(tmp_path, BASE))
        out = tmp_path / "o"
        with pytest.raises(ValidationFailure):
            run_validate(cfg, str(out), _negate_branch=True)
        report = (out / "validate.txt").read_text()
        assert "FAIL branch_discipline_sweep" in report


class TestMain:
    def test_malformed_config_exit_2(self, tmp_path, capsys):
        bad = write_cfg(tmp_path, BASE.replace("c = 0.7", "c = 2.0"))
        code = main(["validate", "--config", bad, "--out", str(tmp_path / "o")])
        assert code == 2
        assert not (tmp_path / "o" / "validate.txt").exists()

    def test_validate_ok_exit_0(self, tmp_path):
        cfg = write_cfg(tmp_path, BASE)
        code = main(["validate", "--config", cfg, "--out", str(tmp_path / "o")])
        assert code == 0

    def test_farfield_requires_slab_exit_2(self, tmp_path):
        text = BASE + "\n[farfield]\nntheta = 8\n"
        cfg = write_cfg(tmp_path, text)
        code = main(["farfield", "--config", cfg, "--out", str(tmp_path / "o")])
        assert code == 2  # k1 != k3: not a slab
