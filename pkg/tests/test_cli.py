"""Batch interface: every command, report shape, exit codes."""

import json

import numpy as np
import pytest

from slmoduli.cli import main
from slmoduli.hessian import load_potential


def _write(path, payload):
    path.write_text(json.dumps(payload))
    return str(path)


def _report(out):
    with open(out / "report.json") as fh:
        return json.load(fh)


def test_cy_validate_std(tmp_path):
    assert main(["cy-validate", "--out", str(tmp_path)]) == 0
    report = _report(tmp_path)
    assert report["command"] == "cy-validate"
    assert all(c["pass"] for c in report["axioms"].values())


def test_cy_validate_saved_model(tmp_path):
    from slmoduli.cymodel import save_model, std_model

    model_path = tmp_path / "model.json"
    save_model(std_model(3), model_path)
    cfg = _write(tmp_path / "cfg.json", {"model": str(model_path)})
    assert main(["cy-validate", "--config", cfg, "--out", str(tmp_path)]) == 0


def test_family_scan_std(tmp_path):
    cfg = _write(
        tmp_path / "cfg.json",
        {"family": "std:2", "grid": {"n": 3}, "fiber_resolution": 8},
    )
    assert main(["family-scan", "--config", cfg, "--out", str(tmp_path)]) == 0
    report = _report(tmp_path)
    for key in ("mclean", "prop1", "prop2", "thm3", "prop3"):
        assert report["checks"][key]["pass"], key
    scan = (tmp_path / "scan.csv").read_text().splitlines()
    assert scan[0].startswith("t_1,t_2,vol_H1")
    assert len(scan) == 10


def test_family_scan_tilt(tmp_path):
    cfg = _write(
        tmp_path / "cfg.json",
        {"family": "tilt:1:2", "grid": {"n": 4, "ranges": [[0.0, 1.0]]}},
    )
    assert main(["family-scan", "--config", cfg, "--out", str(tmp_path)]) == 0


def test_embed_writes_table(tmp_path):
    assert main(["embed", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "embedding.csv").read_text().splitlines()
    assert lines[0] == "t_1,t_2,u_1,u_2,v_1,v_2"
    assert len(lines) == 1 + 81


def test_legendre_command(tmp_path):
    cfg = _write(
        tmp_path / "cfg.json",
        {
            "potential": {
                "axes": [[-1, 1, 33], [-1, 1, 33]],
                "expr": "(u1**2 + u2**2) / 2 + 0.1*cosh(u1)",
            }
        },
    )
    assert main(["legendre", "--config", cfg, "--out", str(tmp_path)]) == 0
    dual = load_potential(tmp_path / "dual.csv")
    assert dual.dim == 2


def test_ma_solve_and_partial_legendre(tmp_path):
    cfg = _write(
        tmp_path / "ma.json", {"boundary": "cosh(u1) + cosh(u2)", "n": 65}
    )
    assert main(["ma-solve", "--config", cfg, "--out", str(tmp_path)]) == 0
    report = _report(tmp_path)
    assert report["iterations"] <= 15
    cfg2 = _write(
        tmp_path / "pl.json", {"potential": str(tmp_path / "solution.csv")}
    )
    assert main(["partial-legendre", "--config", cfg2, "--out", str(tmp_path)]) == 0
    assert _report(tmp_path)["checks"]["prop3"]["pass"]


def test_semiflat_command_with_oracle(tmp_path):
    cfg = _write(
        tmp_path / "ma.json", {"boundary": "(u1**2 + u2**2) / 2", "n": 33}
    )
    assert main(["ma-solve", "--config", cfg, "--out", str(tmp_path)]) == 0
    cfg2 = _write(
        tmp_path / "sf.json", {"potential": str(tmp_path / "solution.csv")}
    )
    assert main(
        ["semiflat", "--config", cfg2, "--out", str(tmp_path), "--oracle"]
    ) == 0
    report = _report(tmp_path)
    assert "ricci_oracle" in report["checks"]


def test_semiflat_flags_non_ma_potential(tmp_path):
    cfg = _write(
        tmp_path / "cfg.json",
        {
            "potential": {
                "axes": [[-1, 1, 33], [-1, 1, 33]],
                "expr": "u1**4/12 + u1**2/2 + u2**2/2",
                "c": 1.0,
            }
        },
    )
    assert main(["semiflat", "--config", cfg, "--out", str(tmp_path)]) == 1
    report = _report(tmp_path)
    assert not report["checks"]["prop5"]["pass"]


def test_gh_command(tmp_path):
    assert main(["gh", "--out", str(tmp_path)]) == 0
    report = _report(tmp_path)
    assert report["checks"]["ricci_flat"]["pass"]


def test_config_error_exit_code(tmp_path):
    assert main(["cy-validate", "--config", "/nonexistent.json",
                 "--out", str(tmp_path)]) == 2
    assert main(["gh", "--tol", "-1", "--out", str(tmp_path)]) == 2
    bad = _write(tmp_path / "bad.json", {"V": "os.system('true')"})
    assert main(["gh", "--config", bad, "--out", str(tmp_path)]) == 2


def test_report_is_deterministic(tmp_path):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert main(["cy-validate", "--out", str(out1)]) == 0
    assert main(["cy-validate", "--out", str(out2)]) == 0
    assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()
    assert (out1 / "run.log").exists()
