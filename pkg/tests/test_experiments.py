import json
import os

import numpy as np
import pytest

from mfgmsfem import cli
from mfgmsfem.config import ExperimentConfig, config_from_dict, load_config, save_config
from mfgmsfem.errors import ConfigError, CoverageError, InputError
from mfgmsfem.experiments import (ErrorTable, reference_key, rescale_contrast, run_diagnostics,
                                  run_reference, run_sweep, setup_problem)
from mfgmsfem.export import (export_field_vtk, export_table_csv, format_percent)
from mfgmsfem.fem import PermeabilityField, build_structured_mesh
from mfgmsfem.permeability import (generate_permeability, load_permeability, read_raster,
                                   write_raster)

SMALL = {"nx": 16, "ny": 16, "n_points": 9, "gamma": [2.0, 3.0], "M": [2, 3],
         "N_t": [5, 10], "sweep_nt": 5, "reference_nt": 200,
         "permeability": {"channels": 2, "inclusions": 3, "contrast": 100.0}}


def _write_json(path, data):
    path.write_text(json.dumps(data))
    return str(path)


# configuration

def test_minimal_config_defaults(tmp_path):
    cfg = load_config(_write_json(tmp_path / "c.json", {"nx": 20, "ny": 20, "n_points": 16}))
    assert cfg.beta == 0.01 and cfg.gamma == [3.0] and cfg.model == "linear"
    assert cfg.t_max == 0.2 and cfg.reference_nt == 30000 and cfg.contrast == 1e4


def test_gamma_one_rejected(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(_write_json(tmp_path / "c.json", {"gamma": 1}))
    assert info.value.key == "gamma"


@pytest.mark.parametrize("data,key", [
    ({"M": []}, "M"), ({"t_max": 0}, "t_max"), ({"contrast": 0.5}, "contrast"),
    ({"model": "cubic"}, "model"), ({"nx": 0}, "nx"), ({"bogus": 1}, "bogus"),
    ({"N_t": [10, -1]}, "N_t"), ({"sweeps": ["time"]}, "sweeps"),
])
def test_invalid_keys_named(data, key):
    with pytest.raises(ConfigError) as info:
        config_from_dict(data)
    assert info.value.key == key


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(str(bad))


def test_config_round_trip(tmp_path):
    cfg = config_from_dict(SMALL)
    save_config(cfg, tmp_path / "a.json")
    again = load_config(str(tmp_path / "a.json"))
    assert again == cfg
    save_config(again, tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


# permeability

def test_uniform_raster(tmp_path):
    mesh = build_structured_mesh(10, 10)
    write_raster(np.ones((5, 5)), tmp_path / "k.txt")
    k = load_permeability(str(tmp_path / "k.txt"), mesh)
    np.testing.assert_array_equal(k.values, 1.0)
    assert k.contrast == 1.0


def test_raster_orientation_and_upsampling(tmp_path):
    mesh = build_structured_mesh(4, 2)
    (tmp_path / "k.txt").write_text("2 1\n1 5\n")
    k = load_permeability(str(tmp_path / "k.txt"), mesh)
    np.testing.assert_array_equal(k.squares(mesh), [[1, 1, 5, 5], [1, 1, 5, 5]])
    (tmp_path / "k2.txt").write_text("1 2\n1\n7\n")
    k = load_permeability(str(tmp_path / "k2.txt"), build_structured_mesh(2, 2))
    # first row is the bottom row
    np.testing.assert_array_equal(k.squares(build_structured_mesh(2, 2)), [[1, 1], [7, 7]])


@pytest.mark.parametrize("content", ["3 3\n1 1 1 1 1 1 1 1 1\n", "2 2\n1 1 1\n",
                                     "2 2\n1 1 1 -1\n", "2\n1 1\n", "a b\n"])
def test_raster_errors(tmp_path, content):
    (tmp_path / "k.txt").write_text(content)
    with pytest.raises(InputError):
        load_permeability(str(tmp_path / "k.txt"), build_structured_mesh(4, 4))


def test_generator():
    mesh = build_structured_mesh(20, 20)
    plain = generate_permeability({}, mesh, seed=4)
    np.testing.assert_array_equal(plain.values, 1.0)
    spec = {"channels": 4, "inclusions": 6, "contrast": 1e4, "margin": 2}
    a = generate_permeability(spec, mesh, seed=4)
    b = generate_permeability(spec, mesh, seed=4)
    assert a.values.tobytes() == b.values.tobytes()
    assert set(np.unique(a.values)) == {1.0, 1e4}
    sq = a.squares(mesh)
    assert np.all(sq[:2] == 1) and np.all(sq[:, -2:] == 1)
    with pytest.raises(InputError):
        generate_permeability({"rivers": 2}, mesh)


def test_shipped_fields():
    mesh = build_structured_mesh(100, 100)
    for name in ("linear", "semilinear"):
        k = load_permeability(name, mesh)
        assert k.contrast == pytest.approx(1e4)
        assert k.values.size == 20000
    raster = read_raster(os.path.join(os.path.dirname(cli.__file__), "data", "kappa_linear.txt"))
    assert raster.shape == (100, 100)


def test_rescale_contrast():
    mesh = build_structured_mesh(2, 2)
    k = PermeabilityField.from_squares([1.0, 100.0, 1.0, 100.0], mesh)
    r = rescale_contrast(k, 1e4)
    assert r.contrast == pytest.approx(1e4)
    np.testing.assert_allclose(np.unique(r.values), [1.0, 1e4])
    assert rescale_contrast(PermeabilityField.uniform(mesh), 1e4).contrast == 1.0


# runners

def test_reference_decays_and_caches(tmp_path):
    cfg = config_from_dict({"nx": 12, "ny": 12, "permeability": {}, "reference_nt": 50})
    problem = setup_problem(cfg)
    res = run_reference(cfg, problem, cache_dir=str(tmp_path))
    assert np.abs(res.final).max() < np.abs(problem.p0).max()
    assert res.stats["cached"] is False
    assert os.path.exists(tmp_path / f"reference_{reference_key(problem)}.npz")
    again = run_reference(cfg, problem, cache_dir=str(tmp_path))
    assert again.stats["cached"] is True
    assert again.final.tobytes() == res.final.tobytes()


def test_reference_first_order_self_convergence():
    finals = []
    for n in (50, 100, 200):
        cfg = config_from_dict({"nx": 12, "ny": 12, "permeability": {}, "reference_nt": n})
        finals.append(run_reference(cfg).final)
    d1 = np.linalg.norm(finals[0] - finals[1])
    d2 = np.linalg.norm(finals[1] - finals[2])
    assert 1.7 < d1 / d2 < 2.3


def test_semilinear_zero_initial_state_stays_zero():
    cfg = config_from_dict({"nx": 12, "ny": 12, "permeability": {}, "reference_nt": 20,
                            "model": "semilinear"})
    problem = setup_problem(cfg)
    problem.p0_full = np.zeros_like(problem.p0_full)
    assert not np.any(run_reference(cfg, problem).final)


@pytest.fixture(scope="module")
def small_sweep():
    cfg = config_from_dict(SMALL)
    return cfg, run_sweep(cfg)


def test_sweep_tables(small_sweep):
    cfg, result = small_sweep
    assert set(result.tables) == {(m, k) for m in ("fd", "ei") for k in ("gamma", "nt")}
    g = result.tables[("ei", "gamma")]
    assert [(r.M, r.param) for r in g.rows] == [(2, 2.0), (2, 3.0), (3, 2.0), (3, 3.0)]
    nt = result.tables[("fd", "nt")]
    assert [(r.M, r.param) for r in nt.rows] == [(2, 5.0), (2, 10.0), (3, 5.0), (3, 10.0)]
    for table in result.tables.values():
        for row in table.rows:
            assert np.isfinite(row.l2) and np.isfinite(row.h1)
            assert row.l2 >= 0 and row.h1 >= 0
    # sweep_gamma defaults to gamma[0]; the shared run (gamma = 2, N_t = 5) must agree
    assert cfg.sweep_gamma == 2.0
    assert (g.lookup(3, 2.0).l2, g.lookup(3, 2.0).h1) == \
        (result.tables[("ei", "nt")].lookup(3, 5.0).l2, result.tables[("ei", "nt")].lookup(3, 5.0).h1)


def test_sweep_cache_is_bit_identical(small_sweep, tmp_path):
    cfg, cached = small_sweep
    uncached = run_sweep(cfg, reference=cached.reference, cache=False)
    for key, table in cached.tables.items():
        export_table_csv(table, tmp_path / "a.csv")
        export_table_csv(uncached.tables[key], tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert table.rows == uncached.tables[key].rows


def test_diagnostics_report():
    cfg = config_from_dict(SMALL)
    cloud, reports = run_diagnostics(cfg)
    assert cloud.n_points == 9
    assert set(reports) == {"2.0", "3.0"}
    for rep in reports.values():
        assert rep["covered"] and rep["C_ov"] >= 1


# export

def test_percent_formatting():
    assert format_percent(50.7305) == "50.730"
    assert format_percent(50.7315) == "50.732"
    assert format_percent(0.0) == "0.000"
    assert format_percent(100) == "100.000"


def test_empty_table_csv(tmp_path):
    export_table_csv(ErrorTable("ei", "gamma"), tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text() == "M,param,L2_percent,H1_percent\n"


def test_table_csv_content(tmp_path):
    t = ErrorTable("fd", "nt")
    t.add(5, 500, 2.2255, 10.0)
    t.add(3, 50, 68.75, 80.1234)
    export_table_csv(t, tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().splitlines() == [
        "M,param,L2_percent,H1_percent", "3,50,68.750,80.123", "5,500,2.226,10.000"]


GOLDEN_VTK = """# vtk DataFile Version 3.0
pressure
ASCII
DATASET UNSTRUCTURED_GRID
POINTS 4 double
0.0 0.0 0
1.0 0.0 0
0.0 1.0 0
1.0 1.0 0
CELLS 2 8
3 0 1 3
3 0 3 2
CELL_TYPES 2
5
5
POINT_DATA 4
SCALARS pressure double 1
LOOKUP_TABLE default
0.0
0.5
0.25
1.0
CELL_DATA 2
SCALARS kappa double 1
LOOKUP_TABLE default
1.0
10000.0
"""


def test_vtk_golden_and_deterministic(tmp_path):
    mesh = build_structured_mesh(1, 1)
    kappa = PermeabilityField.from_values([1.0, 1e4])
    field = np.array([0.0, 0.5, 0.25, 1.0])
    export_field_vtk(field, mesh, tmp_path / "a.vtk", kappa=kappa)
    export_field_vtk(field, mesh, tmp_path / "b.vtk", kappa=kappa)
    assert (tmp_path / "a.vtk").read_text() == GOLDEN_VTK
    assert (tmp_path / "a.vtk").read_bytes() == (tmp_path / "b.vtk").read_bytes()
    with pytest.raises(InputError):
        export_field_vtk(np.ones(3), mesh, tmp_path / "c.vtk")


def test_export_io_error_names_path(tmp_path):
    with pytest.raises(OSError, match="nope"):
        export_table_csv(ErrorTable("ei", "nt"), tmp_path / "nope" / "t.csv")


# command line

def test_cli_sweep_outputs_and_determinism(tmp_path):
    cfg = _write_json(tmp_path / "c.json", SMALL)
    for out in ("o1", "o2"):
        assert cli.main(["sweep", "--config", cfg, "--out", str(tmp_path / out)]) == 0
    for name in ("errors_fd_gamma.csv", "errors_ei_gamma.csv", "errors_fd_nt.csv",
                 "errors_ei_nt.csv"):
        assert (tmp_path / "o1" / name).read_bytes() == (tmp_path / "o2" / name).read_bytes()
    for name in ("field_fd.vtk", "field_ei.vtk", "field_reference.vtk"):
        assert (tmp_path / "o1" / name).exists()


def test_cli_diag_and_pointcloud(tmp_path):
    cfg = _write_json(tmp_path / "c.json", SMALL)
    assert cli.main(["diag", "--config", cfg, "--out", str(tmp_path)]) == 0
    diag = json.loads((tmp_path / "diag.json").read_text())
    assert set(diag["3.0"]) >= {"C_ov", "delta", "lambda_max_overlap", "covered"}
    assert cli.main(["pointcloud", "--config", cfg, "--out", str(tmp_path / "pc")]) == 0
    lines = (tmp_path / "pc" / "cloud.csv").read_text().splitlines()
    assert lines[0] == "x,y,r" and len(lines) == 10


def test_cli_exit_codes(tmp_path, monkeypatch):
    bad = _write_json(tmp_path / "bad.json", {"gamma": [0.5]})
    assert cli.main(["reference", "--config", bad, "--out", str(tmp_path)]) == 2
    good = _write_json(tmp_path / "good.json", {"nx": 4, "ny": 4, "reference_nt": 2,
                                                "permeability": {}})

    def failing(config, out):
        raise CoverageError("forced", [1])

    monkeypatch.setitem(cli.COMMANDS, "reference", failing)
    assert cli.main(["reference", "--config", good, "--out", str(tmp_path)]) == 3
