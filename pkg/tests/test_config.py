import numpy as np
import pytest

from qskyrm import (EXPERIMENT_KINDS, ConfigError, ExperimentConfig, GridSpec,
                    dump_config, load_config, parse_config)
from qskyrm.config import DEFAULT_DELTAS, DEFAULT_RATES


def test_minimal_document_fills_defaults():
    cfg = parse_config("kind: spectrum\n")
    assert cfg.kind == "spectrum"
    assert cfg.model.n == 3
    assert cfg.model.boundary is True
    assert cfg.model.effective_deltas() == DEFAULT_DELTAS
    assert cfg.protocol.rates == DEFAULT_RATES
    assert cfg.protocol.d0 == 0.0 and cfg.protocol.d1 == 2.0
    assert cfg.thermal.t_cold == 0.5
    assert cfg.numeric.initial_steps == 2000
    assert cfg.output.formats == ["csv"]


def test_default_dmi_grid_has_41_points():
    cfg = parse_config("kind: spectrum\n")
    pts = cfg.model.dmi_points()
    assert len(pts) == 41
    assert pts[0] == 0.0 and pts[-1] == 2.0
    assert np.allclose(np.diff(pts), 0.05)


def test_scalar_dmi_wins_over_grid():
    cfg = parse_config("kind: spectrum\nmodel:\n  dmi: 0.3\n")
    assert cfg.model.dmi_points().tolist() == [0.3]


def test_t_hot_grid_log_spacing():
    cfg = parse_config("kind: efficiency-curve\n")
    grid = cfg.thermal.t_hot_grid()
    assert len(grid) == 40
    assert grid[-1] == pytest.approx(20.0)
    assert grid[0] > 0.5  # strictly above the cold bath
    # uniform ratio between neighbours
    ratios = grid[1:] / grid[:-1]
    assert np.allclose(ratios, ratios[0])
    assert grid[0] == pytest.approx(0.5 * (20.0 / 0.5) ** (1 / 40))


def test_round_trip_identity():
    text = """
kind: irrwork-sweep
model:
  n: 2
  delta: 0.51
  dmi_grid: {start: 0.1, stop: 2.0, step: 0.1}
protocol:
  rates: [0.5, 0.1]
thermal:
  beta: 0.5
numeric:
  initial_steps: 500
"""
    cfg = parse_config(text)
    again = parse_config(dump_config(cfg))
    assert again == cfg


def test_unknown_key_rejected_with_path():
    with pytest.raises(ConfigError) as exc:
        parse_config("kind: spectrum\nmodel:\n  flavor: up\n")
    assert "model.flavor" in str(exc.value)


def test_unknown_kind_rejected():
    with pytest.raises(ConfigError):
        parse_config("kind: make-coffee\n")
    with pytest.raises(ConfigError):
        parse_config("model: {n: 2}\n")  # kind is mandatory


def test_delta_and_deltas_conflict():
    with pytest.raises(ConfigError) as exc:
        parse_config("kind: spectrum\nmodel:\n  delta: 0.5\n  deltas: [0.1]\n")
    assert "delta" in str(exc.value)


def test_grid_single_form_enforced():
    with pytest.raises(ConfigError):
        parse_config(
            "kind: spectrum\nmodel:\n  dmi_grid: {step: 0.1, count: 5}\n")
    GridSpec(step=0.1)
    GridSpec(count=5)
    GridSpec(values=[1.0])
    with pytest.raises(ValueError):
        GridSpec(step=-0.1)
    with pytest.raises(ValueError):
        GridSpec(count=1)
    with pytest.raises(ValueError):
        GridSpec(values=[])


def test_grid_points_forms():
    assert GridSpec(values=[0.3, 0.1]).points().tolist() == [0.3, 0.1]
    assert GridSpec(start=0.0, stop=1.0, count=3).points().tolist() == [0.0, 0.5, 1.0]
    stepped = GridSpec(start=0.0, stop=1.0, step=0.25).points()
    assert stepped.tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]
    # step that does not divide the span still yields a grid inside it
    ragged = GridSpec(start=0.0, stop=1.0, step=0.3).points()
    assert ragged[0] == 0.0 and ragged[-1] <= 1.0 + 1e-12


def test_rates_validation():
    with pytest.raises(ConfigError):
        parse_config("kind: phases\nprotocol:\n  rates: []\n")
    with pytest.raises(ConfigError):
        parse_config("kind: phases\nprotocol:\n  rates: [0.1, -0.5]\n")


def test_literal_fields_enforced():
    with pytest.raises(ConfigError):
        parse_config("kind: otto-cycle\nthermal:\n  stroke_iv_beta: tepid\n")
    with pytest.raises(ConfigError):
        parse_config("kind: spectrum\noutput:\n  formats: [csv, pdf]\n")


def test_malformed_and_non_mapping_yaml():
    with pytest.raises(ConfigError) as exc:
        parse_config("kind: [unclosed\n")
    assert "YAML" in str(exc.value)
    with pytest.raises(ConfigError) as exc:
        parse_config("- a\n- b\n")
    assert "mapping" in str(exc.value)
    with pytest.raises(ConfigError):
        parse_config("")  # empty document lacks the mandatory kind


def test_load_config_reads_file(tmp_path):
    p = tmp_path / "run.yaml"
    p.write_text("kind: topology-sweep\nmodel: {n: 2}\n")
    cfg = load_config(p)
    assert cfg.kind == "topology-sweep"
    assert cfg.model.n == 2


def test_every_kind_parses():
    for kind in EXPERIMENT_KINDS:
        cfg = parse_config(f"kind: {kind}\n")
        assert isinstance(cfg, ExperimentConfig)
