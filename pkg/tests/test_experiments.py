import csv

import numpy as np
import pytest
import yaml

from qskyrm import (ConfigError, DimensionCapError, LatticeSpec, build_lattice,
                    diagonalize, hamiltonian_parts, parse_config,
                    run_experiment)
from qskyrm.cli import main

SPECTRUM_N2 = """
kind: spectrum
model:
  n: 2
  deltas: [0.25, 0.51]
  dmi_grid: {values: [0.0, 0.5, 1.0]}
"""


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_spectrum_rows_match_direct_diagonalization(tmp_path):
    cfg = parse_config(SPECTRUM_N2)
    man = run_experiment(cfg, out_dir=tmp_path / "out",
                         cache_dir=tmp_path / "cache")
    rows = _read_csv(tmp_path / "out" / "results.csv")
    assert len(rows) == 6
    lat = build_lattice(LatticeSpec(n=2))
    for row in rows:
        assert row["status"] == "ok"
        A, B = hamiltonian_parts(lat, float(row["delta"]))
        es = diagonalize(A + float(row["dmi"]) * B)
        assert float(row["dimension"]) == 16
        assert float(row["ground_energy"]) == pytest.approx(
            es.eigenvalues[0], abs=1e-12)
        assert float(row["gap_01"]) == pytest.approx(
            es.eigenvalues[1] - es.eigenvalues[0], abs=1e-12)
        assert float(row["e7"]) == pytest.approx(es.eigenvalues[7], abs=1e-12)
    assert man["status"] == "ok"
    assert man["points_total"] == 6 and man["points_failed"] == 0
    assert man["spectra_computed"] == 6 and man["cache_hits"] == 0
    assert man["experiment"] == "spectrum"
    assert "results.csv" in man["files"] and "manifest.yaml" in man["files"]
    # manifest on disk round-trips and embeds the full config
    disk = yaml.safe_load((tmp_path / "out" / "manifest.yaml").read_text())
    assert disk["config_hash"] == man["config_hash"]
    assert disk["config"]["model"]["n"] == 2


def test_rerun_hits_cache_and_threads_do_not_change_bytes(tmp_path):
    cfg = parse_config(SPECTRUM_N2)
    cache = tmp_path / "cache"
    run_experiment(cfg, out_dir=tmp_path / "a", threads=1, cache_dir=cache)
    man2 = run_experiment(cfg, out_dir=tmp_path / "b", threads=3,
                          cache_dir=cache)
    assert man2["spectra_computed"] == 0
    assert man2["cache_hits"] == 6
    a = (tmp_path / "a" / "results.csv").read_bytes()
    b = (tmp_path / "b" / "results.csv").read_bytes()
    assert a == b


def test_cache_opt_out(tmp_path):
    cfg = parse_config(SPECTRUM_N2)
    cache = tmp_path / "cache"
    man = run_experiment(cfg, out_dir=tmp_path / "out", use_cache=False,
                         cache_dir=cache)
    assert man["spectra_computed"] == 6
    assert not cache.exists()


def test_failed_points_become_error_rows(tmp_path):
    # the ground texture at zero coupling has a zero-length central moment,
    # the point at 1.0 is fine; the sweep must report both honestly
    cfg = parse_config("""
kind: topology-sweep
model:
  n: 2
  delta: 0.25
  dmi_grid: {values: [0.0, 1.0]}
""")
    man = run_experiment(cfg, out_dir=tmp_path / "out",
                         cache_dir=tmp_path / "cache")
    assert man["status"] == "partial"
    assert man["points_failed"] == 1
    rows = _read_csv(tmp_path / "out" / "results.csv")
    assert len(rows) == 2
    bad, good = rows
    assert bad["status"] == "error"
    assert "VanishingMomentError" in bad["error"]
    assert bad["dmi"] == "0"  # grid params survive into the error row
    assert np.isnan(float(bad["topological_index"]))
    assert good["status"] == "ok"
    assert float(good["topological_index"]) == pytest.approx(-1.0, abs=1e-6)
    statuses = [p["status"] for p in man["points"]]
    assert statuses == ["error", "ok"]


def test_strict_mode_raises(tmp_path):
    cfg = parse_config("kind: spectrum\nmodel: {n: 4, delta: 0.5, dmi: 0.0}\n")
    with pytest.raises(DimensionCapError):
        run_experiment(cfg, out_dir=tmp_path / "out", strict=True,
                       cache_dir=tmp_path / "cache")
    cfg2 = parse_config("kind: otto-cycle\nmodel: {n: 1, delta: 0.5}\n")
    with pytest.raises(ConfigError, match="t_hot"):
        run_experiment(cfg2, out_dir=tmp_path / "out2", strict=True,
                       cache_dir=tmp_path / "cache")


def test_otto_cycle_kind(tmp_path):
    cfg = parse_config("""
kind: otto-cycle
model: {n: 1, delta: 0.5}
thermal: {t_hot: 2.0, t_cold: 0.5, skyrmion_count: 3}
""")
    man = run_experiment(cfg, out_dir=tmp_path / "out",
                         cache_dir=tmp_path / "cache")
    assert man["status"] == "ok"
    row = _read_csv(tmp_path / "out" / "results.csv")[0]
    assert float(row["carnot_bound"]) == pytest.approx(0.75)
    assert float(row["skyrmion_count"]) == 3
    assert row["mode"] in ("engine", "refrigerator")
    assert np.isnan(float(row["rate"]))  # ideal strokes carry no rate


def test_transition_matrix_kind_writes_matrix_file(tmp_path):
    cfg = parse_config("""
kind: transition-matrix
model: {n: 1, delta: 0.5, dmi_grid: {values: [0.0]}}
protocol: {rates: [0.5]}
numeric: {initial_levels: null, initial_steps: 64}
output: {formats: [csv, matrix]}
""")
    man = run_experiment(cfg, out_dir=tmp_path / "out",
                         cache_dir=tmp_path / "cache")
    assert man["status"] == "ok"
    assert "matrix_0000.csv" in man["files"]
    ents = _read_csv(tmp_path / "out" / "matrix_0000.csv")
    # the single-site drive term vanishes, so nothing can move: identity
    vals = {(e["m"], e["n"]): float(e["p"]) for e in ents}
    assert len(vals) == 4
    assert vals[("0", "0")] == pytest.approx(1.0, abs=1e-8)
    assert vals[("0", "1")] == pytest.approx(0.0, abs=1e-8)
    row = _read_csv(tmp_path / "out" / "results.csv")[0]
    assert float(row["row_sum_defect"]) < 1e-8
    assert float(row["col_sum_defect"]) < 1e-8


def test_irrwork_kind_static_drive_wastes_nothing(tmp_path):
    # single-site model has no drive term, so every snapshot must report
    # zero wasted work under both accountings
    cfg = parse_config("""
kind: irrwork-sweep
model: {n: 1, delta: 0.5, dmi_grid: {values: [0.5, 1.0]}}
protocol: {rates: [0.5, 0.1]}
thermal: {beta: 0.5}
numeric: {initial_steps: 64}
""")
    man = run_experiment(cfg, out_dir=tmp_path / "out",
                         cache_dir=tmp_path / "cache")
    assert man["status"] == "ok"
    rows = _read_csv(tmp_path / "out" / "results.csv")
    assert len(rows) == 4  # 2 rates x 2 snapshot points
    for row in rows:
        assert abs(float(row["w_irr"])) < 1e-10
        assert abs(float(row["w_irr_literal"])) < 1e-10
    rates = [float(r["rate"]) for r in rows]
    assert rates == sorted(rates, reverse=True)


def test_phases_kind_static_drive_is_dynamical(tmp_path):
    cfg = parse_config("""
kind: phases
model: {n: 1, delta: 0.5, dmi_grid: {values: [1.0, 2.0]}}
protocol: {rates: [0.5]}
numeric: {initial_steps: 64}
""")
    man = run_experiment(cfg, out_dir=tmp_path / "out",
                         cache_dir=tmp_path / "cache")
    assert man["status"] == "ok"
    rows = _read_csv(tmp_path / "out" / "results.csv")
    # endpoint already sits on the snapshot grid, so nothing extra appended
    assert [float(r["dmi"]) for r in rows] == [1.0, 2.0]
    for row in rows:
        assert abs(float(row["geometric"])) < 1e-8
        assert float(row["residual_infidelity"]) < 1e-8


def test_efficiency_curve_kind(tmp_path):
    cfg = parse_config("""
kind: efficiency-curve
model: {n: 1, delta: 0.5}
thermal: {t_hot_points: 4}
""")
    man = run_experiment(cfg, out_dir=tmp_path / "out",
                         cache_dir=tmp_path / "cache")
    assert man["points_total"] == 4
    rows = _read_csv(tmp_path / "out" / "results.csv")
    hots = [float(r["t_hot"]) for r in rows]
    assert hots == sorted(hots)
    assert hots[-1] == pytest.approx(20.0)


def test_cli_success_and_exit_codes(tmp_path, capsys):
    cfgfile = tmp_path / "run.yaml"
    cfgfile.write_text(
        "kind: spectrum\nmodel: {n: 1, delta: 0.5, "
        "dmi_grid: {values: [0.0, 1.0]}}\n")
    out = tmp_path / "out"
    code = main(["spectrum", "--config", str(cfgfile), "--out", str(out),
                 "--cache-dir", str(tmp_path / "cache")])
    assert code == 0
    assert "2/2 points ok" in capsys.readouterr().out
    assert (out / "results.csv").exists()

    # config kind and subcommand must agree
    code = main(["phases", "--config", str(cfgfile), "--out", str(out)])
    assert code == 1
    assert "does not match" in capsys.readouterr().err

    # unreadable config reports instead of crashing
    code = main(["spectrum", "--config", str(tmp_path / "absent.yaml")])
    assert code == 1

    code = main(["spectrum", "--config", str(cfgfile), "--out", str(out),
                 "--threads", "0"])
    assert code == 1


def test_cli_partial_run_exit_code(tmp_path, capsys):
    cfgfile = tmp_path / "run.yaml"
    cfgfile.write_text("""
kind: topology-sweep
model:
  n: 2
  delta: 0.25
  dmi_grid: {values: [0.0, 1.0]}
""")
    code = main(["topology-sweep", "--config", str(cfgfile),
                 "--out", str(tmp_path / "out"),
                 "--cache-dir", str(tmp_path / "cache")])
    assert code == 2
    captured = capsys.readouterr()
    assert "1/2 points ok" in captured.out
    assert "failed" in captured.err
