import csv
import json

import pytest

from collbreak.cli import ConfigError, RunConfig, load_config, main


def write_config(tmp_path, **over):
    cfg = {"kernel": "example_5_1", "t_end": 1.0, "integrator": {"method": "rk45_adaptive", "observe_every": 0.5}}
    cfg.update(over)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return str(p)


def read_csv(path):
    return list(csv.DictReader(open(path)))


def test_run_example_5_1(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--config", write_config(tmp_path), "--out", str(out), "--quiet"]) == 0
    rows = read_csv(out / "moments.csv")
    assert [float(r["t"]) for r in rows] == [0, 0.5, 1.0]
    assert float(rows[-1]["M0"]) == pytest.approx(2.0, abs=1e-7)
    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["mass_drift"] < 1e-12 and diag["negativity_clips"] == 0
    assert "origin_number_rate" in diag["final"]
    assert len(read_csv(out / "density.csv")) == 30


def test_midpoint_reports_mass_drift(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--config", write_config(tmp_path, scheme="midpoint"), "--out", str(out), "--quiet"]) == 0
    assert json.loads((out / "diagnostics.json").read_text())["mass_drift"] > 1e-4


def test_outputs_are_byte_identical(tmp_path):
    cfg = write_config(tmp_path, grid={"family": "random", "cells": 20})
    for name in ("a", "b"):
        assert main(["run", "--config", cfg, "--seed", "7", "--out", str(tmp_path / name), "--quiet"]) == 0
    for f in ("moments.csv", "density.csv", "diagnostics.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_invalid_kernel_exits_2(tmp_path, capsys):
    assert main(["run", "--config", write_config(tmp_path, kernel="nope"), "--out", str(tmp_path), "--quiet"]) == 2
    assert "config error" in capsys.readouterr().err


@pytest.mark.parametrize("over", [
    {"bogus": 1},
    {"grid": {"family": "random"}},
    {"grid": {"family": "geometric", "seed": 3}},
    {"scheme": "vam2d"},
    {"dimension": 2},
    {"integrator": {"method": "leapfrog"}},
    {"integrator": {"t_end": 3}},
])
def test_config_errors_exit_2(tmp_path, over):
    assert main(["run", "--config", write_config(tmp_path, **over), "--out", str(tmp_path), "--quiet"]) == 2


def test_unreadable_config_exits_2(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.json"), "--quiet"]) == 2


def test_numeric_abort_exits_3(tmp_path, capsys):
    cfg = write_config(tmp_path, t_end=8.0, integrator={"method": "rk4_fixed", "dt": 8.0})
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o"), "--quiet"]) == 3
    err = capsys.readouterr().err
    assert "negative count" in err and '"step"' in err


def test_eoc_one_doubling(tmp_path):
    cfg = write_config(tmp_path, eoc={"families": ["uniform"], "base_cells": 30})
    out = tmp_path / "e"
    assert main(["eoc", "--config", cfg, "--doublings", "1", "--out", str(out), "--quiet"]) == 0
    rows = read_csv(out / "eoc.csv")
    assert len(rows) == 2 and float(rows[0]["eoc"]) == 0.0
    assert (out / "eoc.md").read_text().startswith("| Grids | uniform L1 error | uniform EOC |")


def test_eoc_rejects_zero_doublings(tmp_path):
    assert main(["eoc", "--config", write_config(tmp_path), "--doublings", "0", "--quiet"]) == 2


def test_grid_command(tmp_path):
    out = tmp_path / "g"
    cfg = write_config(tmp_path, grid={"family": "random", "cells": 12, "seed": 1})
    assert main(["grid", "--config", cfg, "--seed", "5", "--out", str(out), "--quiet"]) == 0
    g = json.loads((out / "grid.json").read_text())
    assert g["seed"] == 5 and len(g["boundaries"]) == 13
    assert len(read_csv(out / "grid.csv")) == 13


def test_validate_kernel(tmp_path, capsys):
    assert main(["validate-kernel", "example_5_2", "--out", str(tmp_path)]) == 0
    text = capsys.readouterr().out
    assert "fragment_lower_bound" in text and "warn" in text
    assert json.loads((tmp_path / "validation.json").read_text())["ok"] is True
    assert main(["validate-kernel", "no:such"]) == 2
    assert main(["validate-kernel", "example_2d_i"]) == 2


def test_two_dimensional_run(tmp_path):
    cfg = write_config(tmp_path, dimension=2, scheme="vam2d", kernel="example_2d_i",
                       grid={"family": "geometric", "cells": 10})
    out = tmp_path / "o"
    assert main(["run", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    rows = read_csv(out / "moments.csv")
    assert list(rows[0]) == ["t", "M00", "M10", "M01", "M11"]
    assert float(rows[-1]["M00"]) == pytest.approx(4.0, rel=1e-2)
    assert len(read_csv(out / "density.csv")) == 100


def test_config_round_trip_and_seed_override(tmp_path):
    cfg = load_config(write_config(tmp_path, grid={"family": "random", "cells": 8, "seed": 1}), seed=9)
    assert cfg.grid.seed == 9 and cfg.eoc.seed == 9
    assert RunConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"grid": {"family": "hex"}})
