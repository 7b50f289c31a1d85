import csv
import json

import numpy as np
import pytest

from handsoff.experiments import (
    CASES,
    SUMMARY_COLUMNS,
    ConfigError,
    ExperimentConfig,
    builtin_case,
    config_from_dict,
    config_to_dict,
    emit_table,
    load_config,
    read_summary,
    run_case,
    save_config,
)
from handsoff.plant import PlantSpec
from handsoff.solver import InfeasibleError


def _write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return p


_MINIMAL = {"plant": {"poles": [[-0.025, 1.0]], "auto_conjugate": True},
            "T": 20, "x0": [1, 1], "lambda": 0.1}


# --- registry ----------------------------------------------------------------

def test_registry_matches_benchmark_table():
    assert sorted(CASES) == list(range(1, 10))
    assert CASES[1].lam == 1.0 and CASES[2].lam == 0.1
    assert CASES[3].xi == (1.0, 1.0) and CASES[4].xi == (10.0, 1.0)
    assert CASES[8].T == CASES[9].T == 40.0
    assert all(CASES[c].T == 20.0 for c in range(1, 8))
    assert CASES[8].plant.poles == CASES[9].plant.poles
    assert sorted(CASES[8].plant.poles, key=lambda r: (r.real, r.imag)) == \
        [complex(0, -1), 0, 0, 0, 0, complex(0, 1)]
    assert sorted(p.imag for p in CASES[7].plant.poles)[-1] == pytest.approx(2 * np.sqrt(2))


def test_builtin_case_lookup_and_errors():
    assert builtin_case("5").case_no == 5
    assert builtin_case(8, T=20.0).T == 20.0
    with pytest.raises(ConfigError, match="1-9"):
        builtin_case(10)
    with pytest.raises(ConfigError):
        builtin_case("x")


@pytest.mark.parametrize("case", list(CASES))
def test_registry_round_trips_through_json(case, tmp_path):
    cfg = CASES[case]
    path = tmp_path / "c.json"
    save_config(cfg, path)
    assert load_config(path) == cfg
    assert config_from_dict(json.loads(json.dumps(config_to_dict(cfg)))) == cfg


# --- load_config ---------------------------------------------------------------

def test_case3_file():
    doc = config_to_dict(CASES[3])
    cfg = config_from_dict(doc)
    assert set(cfg.plant.poles) == {complex(-0.025, 1), complex(-0.025, -1)}
    assert cfg.T == 20.0 and cfg.xi == (1.0, 1.0) and cfg.lam == 0.1


def test_auto_conjugate(tmp_path):
    cfg = load_config(_write(tmp_path, _MINIMAL))
    assert cfg.plant.order == 2 and cfg.N == 2000 and cfg.U_max == 1.0
    assert cfg.threshold == 1e-4 and cfg.methods == ("lasso", "en", "clot")


def test_missing_lambda_is_fine_for_lasso_only(tmp_path):
    doc = dict(_MINIMAL, methods=["lasso"])
    del doc["lambda"]
    assert load_config(_write(tmp_path, doc)).lam is None
    doc["methods"] = "all"
    with pytest.raises(ConfigError, match="lambda"):
        load_config(_write(tmp_path, doc))


@pytest.mark.parametrize("patch,match", [
    ({"lambda": -0.1}, "lambda"),
    ({"T": 0}, "T must be"),
    ({"T": -3}, "T must be"),
    ({"methods": ["lasso", "ridge"]}, "unknown method"),
    ({"x0": [1, 1, 1]}, "order"),
    ({"N": 0}, "N must be"),
    ({"realization": "modal"}, "realization"),
    ({"solver": {"rho": -1}}, "solver"),
    ({"solver": {"tolerance": 1}}, "unknown solver"),
    ({"colour": "red"}, "unknown configuration key"),
    ({"plant": {"poles": [[1, 2]]}}, "conjugate"),
    ({"plant": {"poles": [-1], "zeros": [-2]}}, "strictly proper"),
    ({"plant": {"poles": ["a"]}}, r"poles\[0\]"),
])
def test_validation_errors(tmp_path, patch, match):
    doc = dict(_MINIMAL, **patch)
    with pytest.raises(ConfigError, match=match):
        load_config(_write(tmp_path, doc))


def test_parse_error_reports_position(tmp_path):
    path = _write(tmp_path, '{\n  "T": 20,\n  "x0": [1, 1,]\n}')
    with pytest.raises(ConfigError, match=r"cfg\.json:3:\d+"):
        load_config(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="nope.json"):
        load_config(tmp_path / "nope.json")


def test_missing_required_key(tmp_path):
    doc = dict(_MINIMAL)
    del doc["x0"]
    with pytest.raises(ConfigError, match="x0"):
        load_config(_write(tmp_path, doc))


# --- run_case / emit_table ---------------------------------------------------

def _small(case_no, **kw):
    return builtin_case(case_no, N=300, **kw)


def test_run_case_outputs(tmp_path):
    run_dir = run_case(_small(3), tmp_path)
    assert run_dir.name == "case3_N300"
    for m in ("lasso", "en", "clot"):
        with open(run_dir / f"trajectory_{m}.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["t", "u", "x1", "x2", "norm_x"]
        assert len(rows) == 302 and rows[-1][1] == ""
        assert float(rows[-1][0]) == pytest.approx(20.0)
        metrics = json.loads((run_dir / f"metrics_{m}.json").read_text())
        assert metrics["converged"] and 0 <= metrics["sparsity_density"] <= 1
        assert metrics["terminal_residual"] <= 1e-6 * (1 + np.sqrt(2))
    summary = read_summary(run_dir)
    assert [r["method"] for r in summary] == ["lasso", "en", "clot"]
    assert tuple(summary[0]) == SUMMARY_COLUMNS
    assert load_config(run_dir / "config.json") == _small(3)


def test_run_case_method_subset_and_grid_override(tmp_path):
    run_dir = run_case(_small(1), tmp_path, methods=["clot"], N=200)
    assert run_dir.name == "case1_N200"
    assert [r["method"] for r in read_summary(run_dir)] == ["clot"]
    assert not (run_dir / "trajectory_lasso.csv").exists()


def test_run_case_is_deterministic(tmp_path):
    a = run_case(_small(1), tmp_path / "a")
    b = run_case(_small(1), tmp_path / "b")
    for m in ("lasso", "en", "clot"):
        assert (a / f"trajectory_{m}.csv").read_bytes() == (b / f"trajectory_{m}.csv").read_bytes()
    strip = [{k: v for k, v in r.items() if k != "wall_ms"} for r in read_summary(a)]
    assert strip == [{k: v for k, v in r.items() if k != "wall_ms"} for r in read_summary(b)]


def test_run_case_infeasible_leaves_history(tmp_path):
    cfg = builtin_case(8, N=400, T=20.0, realization="canonical", methods=("clot",))
    with pytest.raises(InfeasibleError):
        run_case(cfg, tmp_path)
    hist = (tmp_path / "case8_N400" / "residual_history_clot.csv").read_text().splitlines()
    assert hist[0] == "iteration,primal_residual,dual_residual" and len(hist) > 1


def test_custom_config_label(tmp_path):
    cfg = ExperimentConfig(PlantSpec(poles=(-1.0, -2.0)), T=5.0, xi=(1, 0), lam=0.1,
                           N=100, name="mine")
    assert run_case(cfg, tmp_path).name == "mine_N100"


def test_emit_table(tmp_path):
    d1 = run_case(_small(3), tmp_path)
    d2 = run_case(_small(1, methods=("lasso",)), tmp_path)
    rows, text = emit_table([d2, d1], tmp_path / "all.csv")
    assert len(rows) == 4
    lines = text.splitlines()
    assert lines[0] == "N = 300"
    assert lines[2].split()[0] == "1" and lines[2].split()[2] == "-"
    assert lines[3].split()[0] == "3"
    with open(tmp_path / "all.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 4


def test_emit_table_empty(tmp_path):
    rows, text = emit_table([], tmp_path / "empty.csv")
    assert rows == [] and text == ""
    assert (tmp_path / "empty.csv").read_text() == ",".join(SUMMARY_COLUMNS) + "\n"
