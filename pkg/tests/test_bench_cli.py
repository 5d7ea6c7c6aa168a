import csv
import json

import numpy as np
import pytest

from rehss.bench import (
    CSV_COLUMNS, ExperimentConfig, FileProblem, export_spectrum, it_ratio, load_problem, log_grid,
    run_benchmark, run_sweep, run_theory_report,
)
from rehss.cli import main
from rehss.errors import InvalidAlpha
from rehss.krylov import GmresConfig
from rehss.problems import Flow, StokesSpec, generate_stokes, mm_write
from rehss.saddle import BlockVector, SaddlePointSystem, rhs_all_ones
from rehss.linalg import SparseMatrix
from rehss.spectral import read_scatter

from _systems import dense_system, toy


def small_system():
    return dense_system(np.diag([2.0, 3.0, 4.0]), [[1.0, 0.0, 1.0]], label="small")


def test_config_rejects_bad_alpha():
    with pytest.raises(InvalidAlpha):
        ExperimentConfig(StokesSpec(4), alphas=[1.0, 0.0])
    with pytest.raises(InvalidAlpha):
        ExperimentConfig(StokesSpec(4), alphas=[])
    with pytest.raises(ValueError):
        ExperimentConfig(StokesSpec(4), preconditioners=[])


def test_toy_rehss_one_cycle():
    sys = toy()
    rhs_all_ones(sys)
    rows = run_benchmark(ExperimentConfig(sys, ["rehss"]))
    assert [r.IT for r in rows] == [1, 1, 1, 1]
    assert all(r.termination == "converged" for r in rows)


def test_benchmark_rows_order_and_files(tmp_path):
    out = tmp_path / "r.csv"
    cfg = ExperimentConfig(StokesSpec(4), ["hss", "rehss", "none"], [1e-2, 1.0], output=str(out))
    rows = run_benchmark(cfg)
    assert [(r.precond, r.alpha) for r in rows] == [
        ("HSS", 1e-2), ("HSS", 1.0), ("REHSS", 1e-2), ("REHSS", 1.0), ("none", 1e-2), ("none", 1.0)]
    with open(out) as fh:
        recs = list(csv.DictReader(fh))
    assert tuple(recs[0].keys()) == CSV_COLUMNS
    assert recs[0]["problem"] == "lid" and recs[0]["grid"] == "4x4"
    assert all(r.max_error <= 1e-6 for r in rows if r.termination == "converged")

    cfg.format, cfg.output = "json", str(tmp_path / "r.json")
    rows2 = run_benchmark(cfg)
    data = json.loads((tmp_path / "r.json").read_text())
    assert [d["IT"] for d in data] == [r.IT for r in rows2]
    # deterministic apart from timings
    assert [(r.IT, r.inner_iters, r.relres) for r in rows] == [(r.IT, r.inner_iters, r.relres) for r in rows2]


def test_file_problem(tmp_path):
    sys = generate_stokes(StokesSpec(4))
    mm_write(sys.A, tmp_path / "A.mtx")
    mm_write(sys.B, tmp_path / "B.mtx")
    loaded = load_problem(FileProblem(str(tmp_path / "A.mtx"), str(tmp_path / "B.mtx")))
    assert (loaded.n, loaded.m) == (sys.n, sys.m)
    assert np.allclose(loaded.rhs.concat(), rhs_all_ones(sys).concat())


def test_sweep_curves(tmp_path):
    grid = log_grid(-2, 2, 5)
    assert np.allclose(grid, [1e-2, 1e-1, 1, 10, 100])
    curves = run_sweep(ExperimentConfig(StokesSpec(8), ["rehss", "hss"]), grid, tmp_path)
    assert set(curves) == {"REHSS", "HSS"} and len(curves["REHSS"]) == 5
    lines = (tmp_path / "sweep_rehss_it.txt").read_text().splitlines()
    assert lines[0].startswith("#") and len(lines) == 6
    assert float(lines[1].split()[0]) == pytest.approx(-2.0)
    assert (tmp_path / "sweep_hss_seconds.txt").exists()
    hss = [it for _, it, _ in curves["HSS"]]
    assert hss[-1] >= min(hss)
    with pytest.raises(InvalidAlpha):
        run_sweep(ExperimentConfig(StokesSpec(8)), [], tmp_path)


def test_rehss_sweep_insensitive_on_desk_problem():
    rows = run_benchmark(ExperimentConfig(StokesSpec(16), ["rehss"], log_grid(-4, 2, 7)))
    assert it_ratio(rows) <= 4


def test_theory_report_toy_and_mac():
    rep = run_theory_report(toy())
    assert rep.ok and rep.bounds.delta == pytest.approx(-0.75) and rep.bounds.corollary_holds
    assert "PASS minpoly" in rep.summary()
    sys = generate_stokes(StokesSpec(8))
    rhs_all_ones(sys)
    rep = run_theory_report(sys)
    assert rep.ok, rep.summary()


def test_theory_report_degrades_when_too_large():
    sys = generate_stokes(StokesSpec(32))
    rhs_all_ones(sys)
    rep = run_theory_report(sys)
    assert rep.bounds is None and "skipped" in rep.note
    assert len(rep.rows) == 4 and rep.ok


def test_export_spectrum(tmp_path):
    pre, plain = export_spectrum(toy(), "rehss", 1.0, tmp_path / "toy.txt")
    body = (tmp_path / "toy.txt").read_text().splitlines()
    assert body[1:] == ["0.25 0", "1 0"]
    assert (tmp_path / "toy_A.txt").read_text().splitlines()[1:] == ["1 0", "1 0"]
    export_spectrum(toy(), "none", 1.0, tmp_path / "plain.txt")
    assert (tmp_path / "plain.txt").read_text().splitlines()[1:] == ["1 0", "1 0"]
    with pytest.raises(OSError):
        export_spectrum(toy(), "rehss", 1.0, tmp_path / "missing" / "x.txt")


# --- command line --------------------------------------------------------------

def test_cli_bench_csv(tmp_path, capsys):
    out = tmp_path / "b.csv"
    rc = main(["bench", "--problem", "channel", "--n", "4", "--precond", "rhss,rehss",
               "--alpha", "1e-2,1", "--out", str(out)])
    assert rc == 0
    with open(out) as fh:
        recs = list(csv.DictReader(fh))
    assert len(recs) == 4 and {r["precond"] for r in recs} == {"RHSS", "REHSS"}
    assert "REHSS" in capsys.readouterr().out


def test_cli_rejects_nonpositive_alpha(tmp_path, capsys):
    out = tmp_path / "b.csv"
    assert main(["bench", "--n", "4", "--alpha", "1,-1", "--out", str(out)]) == 1
    assert not out.exists()
    assert "alpha" in capsys.readouterr().err


def test_cli_usage_errors():
    with pytest.raises(SystemExit) as info:
        main(["bench", "--precond", "ilu"])
    assert info.value.code == 2
    with pytest.raises(SystemExit):
        main([])


def test_cli_spectrum_gen_theory_sweep(tmp_path, capsys):
    assert main(["spectrum", "--n", "4", "--precond", "rehss", "--alpha", "1", "--out", str(tmp_path / "s.txt")]) == 0
    header, vals = read_scatter(tmp_path / "s.txt")
    assert header == "# MAC-fv-lid-4x4 REHSS alpha=1" and len(vals) == 39
    assert (tmp_path / "s_A.txt").exists()
    assert main(["spectrum", "--n", "4", "--out", str(tmp_path / "f.txt")]) == 0
    assert {p.name for p in tmp_path.glob("f_alpha*.txt") if not p.stem.endswith("_A")} == {"f_alpha0.01.txt", "f_alpha0.1.txt", "f_alpha1.txt"}

    assert main(["gen", "--problem", "colliding", "--n", "4", "--out-A", str(tmp_path / "A.mtx"),
                 "--out-B", str(tmp_path / "B.mtx")]) == 0
    assert main(["bench", "--matA", str(tmp_path / "A.mtx"), "--matB", str(tmp_path / "B.mtx"),
                 "--precond", "rehss", "--format", "json", "--out", str(tmp_path / "r.json")]) == 0
    assert len(json.loads((tmp_path / "r.json").read_text())) == 4
    assert main(["theory", "--n", "4"]) == 0
    assert "PASS alpha_above_delta_rho_lt_1" in capsys.readouterr().out
    assert main(["sweep", "--n", "4", "--precond", "rehss", "--alpha-log-range", "-1", "1", "3",
                 "--out", str(tmp_path / "sw")]) == 0
    assert (tmp_path / "sw" / "sweep_rehss_it.txt").exists()


def test_cli_bad_files(tmp_path):
    assert main(["bench", "--matA", str(tmp_path / "nope.mtx"), "--matB", str(tmp_path / "nope.mtx")]) == 1
    assert main(["bench", "--matA", str(tmp_path / "a.mtx")]) == 1
