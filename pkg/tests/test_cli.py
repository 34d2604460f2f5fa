import json
from pathlib import Path

import numpy as np
import pytest

from l4decomp import matio
from l4decomp.cli import main

GOLDEN = Path(__file__).parent / "golden"
SCHEMAS = json.loads((GOLDEN / "json_schemas.json").read_text())


def _header(path):
    return Path(path).read_text().splitlines()[0]


def _golden_header(name):
    return (GOLDEN / name).read_text().strip()


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("bundle")
    assert main(["synth", "--p", "30", "--r", "3", "--n", "1500", "--theta", "0.2", "--seed", "7", "--out", str(out)]) == 0
    return out


def test_synth_outputs_and_determinism(bundle, tmp_path, capsys):
    assert sorted(p.name for p in bundle.iterdir()) == ["A.l4m", "X.l4m", "Y.l4m", "manifest.json"]
    assert sorted(json.loads((bundle / "manifest.json").read_text())) == SCHEMAS["synth_manifest"]
    capsys.readouterr()
    assert main(["synth", "--p", "30", "--r", "3", "--n", "1500", "--theta", "0.2", "--seed", "7", "--out", str(tmp_path)]) == 0
    assert capsys.readouterr().out.strip() == "seed 7"
    for name in ("A.l4m", "X.l4m", "Y.l4m", "manifest.json"):
        assert (bundle / name).read_bytes() == (tmp_path / name).read_bytes()


def test_synth_csv_format(tmp_path):
    assert main(["synth", "--p", "6", "--r", "2", "--n", "20", "--theta", "0.5", "--format", "csv", "--out", str(tmp_path)]) == 0
    assert matio.load_matrix(tmp_path / "Y.csv").shape == (6, 20)


def test_synth_bad_dims_exit_2(tmp_path, capsys):
    assert main(["synth", "--p", "5", "--r", "5", "--n", "100", "--theta", "0.1", "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err
    assert main(["synth", "--p", "5"]) == 2
    assert main(["bogus"]) == 2


def test_decompose_report_and_golden_schema(bundle, tmp_path, capsys):
    out = tmp_path / "d"
    assert main(["decompose", "--Y", str(bundle / "Y.l4m"), "--r", "3", "--truth", str(bundle), "--out", str(out),
                 "--deterministic"]) == 0
    assert "frobenius_err" in capsys.readouterr().out
    rep = json.loads((out / "report.json").read_text())
    schema = SCHEMAS["decompose"]
    assert sorted(rep) == schema["top"]
    assert all(sorted(c) == schema["column"] for c in rep["columns"])
    assert sorted(rep["recovery"]) == schema["recovery"]
    assert len(rep["recovery"]["per_column_err"]) == 3
    assert isinstance(rep["recovery"]["success"], bool)
    assert _header(out / "traces.csv") == _golden_header("traces_header.csv")
    A_est = matio.load_matrix(out / "A_est.l4m")
    assert A_est.shape == (30, 3) and abs(np.linalg.norm(A_est, 2) - 1) <= 1e-10
    # deterministic output is reproducible byte-for-byte
    out2 = tmp_path / "d2"
    main(["decompose", "--Y", str(bundle / "Y.l4m"), "--r", "3", "--truth", str(bundle), "--out", str(out2), "--deterministic"])
    for name in ("report.json", "traces.csv", "A_est.l4m"):
        assert (out / name).read_bytes() == (out2 / name).read_bytes()


def test_decompose_adm_same_schema(bundle, tmp_path):
    out = tmp_path / "adm"
    assert main(["decompose", "--Y", str(bundle / "Y.l4m"), "--r", "3", "--A", str(bundle / "A.l4m"), "--method", "adm",
                 "--out", str(out), "--deterministic"]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert sorted(rep) == SCHEMAS["decompose"]["top"]
    assert all(sorted(c) == SCHEMAS["decompose"]["column"] for c in rep["columns"])
    assert matio.load_matrix(out / "A_est.l4m").shape == (30, 3)


def test_decompose_errors(bundle, tmp_path):
    assert main(["decompose", "--Y", str(tmp_path / "missing.l4m"), "--r", "3", "--out", str(tmp_path)]) == 1
    assert main(["decompose", "--Y", str(bundle / "Y.l4m"), "--r", "40", "--out", str(tmp_path)]) == 2
    assert main(["decompose", "--r", "3"]) == 2
    # rank failure: Y of rank 2 with r = 3
    Y = np.random.default_rng(0).standard_normal((10, 2)) @ np.random.default_rng(1).standard_normal((2, 50))
    matio.save_matrix(tmp_path / "low.l4m", Y)
    assert main(["decompose", "--Y", str(tmp_path / "low.l4m"), "--r", "3", "--out", str(tmp_path)]) == 3
    (tmp_path / "junk.l4m").write_bytes(b"not a matrix")
    assert main(["decompose", "--Y", str(tmp_path / "junk.l4m"), "--r", "3", "--out", str(tmp_path)]) == 1


SWEEP = ["sweep", "--p", "20", "--r", "3", "--theta", "0.1", "0.3", "--n", "500", "--trials", "2"]


def test_sweep_golden_headers_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(SWEEP + ["--deterministic", "--out", str(a)]) == 0
    assert main(SWEEP + ["--deterministic", "--jobs", "2", "--out", str(b)]) == 0
    assert _header(a / "cells.csv") == _golden_header("cells_header.csv")
    assert _header(a / "trials.csv") == _golden_header("trials_header.csv")
    for name in ("cells.csv", "trials.csv", "heatmap.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert not (a / "timings.csv").exists()
    assert len((a / "cells.csv").read_text().splitlines()) == 3


def test_sweep_timings_when_not_deterministic(tmp_path):
    assert main(SWEEP + ["--out", str(tmp_path)]) == 0
    assert _header(tmp_path / "timings.csv") == "r,theta,n,wall_time"


def test_sweep_bad_args(tmp_path):
    assert main(["sweep", "--trials", "0", "--out", str(tmp_path)]) == 2
    assert main(["sweep", "--p", "10", "--r", "10", "--out", str(tmp_path)]) == 2
    assert main(SWEEP + ["--jobs", "0", "--out", str(tmp_path)]) == 2


def test_config_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"p": 20, "r": [3], "theta": [0.2], "n": [500], "trials": 3, "deterministic": True}))
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    rows = (tmp_path / "a" / "cells.csv").read_text().splitlines()
    assert rows[1].split(",")[5] == "3"  # trials from the file
    assert main(["sweep", "--config", str(cfg), "--trials", "1", "--out", str(tmp_path / "b")]) == 0
    rows = (tmp_path / "b" / "cells.csv").read_text().splitlines()
    assert rows[1].split(",")[5] == "1"  # the flag wins
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"no_such_option": 1}))
    assert main(["sweep", "--config", str(bad)]) == 2
    assert main(["sweep", "--config", str(tmp_path / "absent.json")]) == 1


def test_paper_scale_grid(monkeypatch, tmp_path):
    from l4decomp import cli, experiments

    seen = {}

    def fake_run_sweep(grid, opts, jobs=1):
        seen["grid"] = grid
        return [], experiments.aggregate(grid, [])

    monkeypatch.setattr(experiments, "run_sweep", fake_run_sweep)
    assert cli.main(["sweep", "--paper-scale", "--deterministic", "--out", str(tmp_path)]) == 0
    g = seen["grid"]
    assert g.trials == experiments.PAPER_TRIALS == 200
    assert g.theta_values == tuple(experiments.PAPER_THETAS) and g.r_values == tuple(experiments.PAPER_RS)
    assert cli.main(["sweep", "--paper-scale", "--r", "10", "--deterministic", "--out", str(tmp_path)]) == 0
    assert seen["grid"].r_values == (10,) and seen["grid"].trials == 200


def test_landscape_command(tmp_path, capsys):
    out = tmp_path / "l"
    assert main(["landscape", "--analytic", "--p", "3", "--theta", "0.1", "--samples", "100", "--starts", "5",
                 "--out", str(out)]) == 0
    rep = json.loads((out / "landscape.json").read_text())
    assert sorted(rep) == SCHEMAS["landscape"]
    singles = [t for t in rep["taxonomy"] if t["case"] == "single-spike"]
    assert singles and all(abs(t["alpha"] - 1) <= 1e-7 for t in singles)
    assert not rep["outside_theory"]
    assert (out / "landscape.svg").read_text().lstrip().startswith("<")
    capsys.readouterr()
    assert main(["landscape", "--analytic", "--p", "3", "--theta", "0.5", "--C-star", "0.65", "--samples", "20",
                 "--starts", "1", "--out", str(out)]) == 0
    assert "outside-theory" in capsys.readouterr().err
    assert json.loads((out / "landscape.json").read_text())["outside_theory"]
    assert main(["landscape", "--samples", "0", "--out", str(out)]) == 2


def test_compare_command(tmp_path, bundle):
    assert main(["compare", "--bundle", str(bundle), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "compare.json").read_text())
    assert sorted(rep) == SCHEMAS["compare"]["top"]
    assert sorted(rep["l4"]) == SCHEMAS["compare"]["method"] == sorted(rep["adm"])
    assert isinstance(rep["l4_better"], bool)
