import json
import math

import pytest
import yaml
from hypothesis import given, strategies as st

from geostrichartz.cli import main
from geostrichartz.runner import (
    EXPERIMENTS,
    THREADS_ENV,
    ConfigError,
    ExperimentConfig,
    RunReport,
    emit_plot_data,
    render_csv,
    resolve_threads,
    run,
)


def _write(tmp_path, data, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data), encoding="utf-8")
    return str(p)


# ---------------------------------------------------------------- configuration


@pytest.mark.parametrize("experiment", EXPERIMENTS)
def test_defaults_validate_and_round_trip(experiment):
    cfg = ExperimentConfig(experiment)
    cfg.validate()
    again = ExperimentConfig.from_dict(yaml.safe_load(cfg.dump()))
    assert again == cfg
    assert again.digest() == cfg.digest()


@given(
    F=st.floats(1.01, 50),
    eps=st.floats(0.01, 10),
    seed=st.integers(0, 2 ** 31),
    values=st.lists(st.floats(0.1, 10), min_size=3, max_size=6),
)
def test_config_round_trip_is_lossless(F, eps, seed, values):
    cfg = ExperimentConfig.from_dict(
        {"experiment": "sweep-epsilon", "dispersion": {"froude": F, "epsilon": eps}, "seed": seed, "values": values}
    )
    again = ExperimentConfig.from_dict(yaml.safe_load(cfg.dump()))
    assert again == cfg


def test_digest_ignores_output_location_and_threads():
    a = ExperimentConfig("weight-check", out="x", threads=1)
    b = ExperimentConfig("weight-check", out="y", threads=4)
    c = ExperimentConfig("weight-check", seed=3)
    assert a.digest() == b.digest() != c.digest()


@pytest.mark.parametrize(
    "data, field_name",
    [
        ({"dispersion": {"froude": 1.0}}, "dispersion.froude"),
        ({"dispersion": {"epsilon": 0.0}}, "dispersion.epsilon"),
        ({"dispersion": {"brunt": -1.0}}, "dispersion.brunt"),
        ({"values": [0.5, 1.5]}, "values"),
        ({"grid": {"points": 7}}, "grid.points"),
        ({"grid": {"size": 7}}, "grid.size"),
        ({"colour": "red"}, "colour"),
        ({"seed": "abc"}, "seed"),
    ],
)
def test_invalid_configs_name_the_field(data, field_name):
    with pytest.raises(ConfigError, match=field_name.replace(".", r"\.")):
        ExperimentConfig.from_dict({"experiment": "sharpness", **data})


def test_cli_rejects_froude_one(tmp_path, capsys):
    path = _write(tmp_path, {"dispersion": {"froude": 1.0}})
    code = main(["sweep-froude", "--config", path, "--out", str(tmp_path / "o")])
    err = capsys.readouterr().err
    assert code == 2
    assert "dispersion.froude" in err and "> 1" in err


def test_cli_rejects_mismatched_experiment(tmp_path):
    path = _write(tmp_path, {"experiment": "sharpness"})
    assert main(["slice-check", "--config", path, "--out", str(tmp_path)]) == 2


def test_cli_rejects_unreadable_config(tmp_path):
    assert main(["slice-check", "--config", str(tmp_path / "missing.yaml")]) == 2


# ---------------------------------------------------------------- threads


def test_thread_precedence(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    assert resolve_threads(None) == 1
    monkeypatch.setenv(THREADS_ENV, "3")
    assert resolve_threads(None) == 3
    assert resolve_threads(2) == 2
    monkeypatch.setenv(THREADS_ENV, "many")
    with pytest.raises(ConfigError):
        resolve_threads(None)


def test_env_threads_reach_the_report(tmp_path, monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "2")
    out = tmp_path / "o"
    assert main(["weight-check", "--out", str(out), "--no-figures"]) == 0
    assert json.loads((out / "weight-check.json").read_text())["threads"] == 2


# ---------------------------------------------------------------- outputs


def _small_epsilon(tmp_path, name, *extra):
    out = tmp_path / name
    code = main(["sweep-epsilon", "--out", str(out), "--resolution", "16", "--no-figures", *extra])
    return code, out


def test_csv_bitwise_identical_across_runs(tmp_path, monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    _, a = _small_epsilon(tmp_path, "a")
    _, b = _small_epsilon(tmp_path, "b")
    _, c = _small_epsilon(tmp_path, "c", "--threads", "2")
    ref = (a / "sweep-epsilon.csv").read_bytes()
    assert (b / "sweep-epsilon.csv").read_bytes() == ref
    assert (c / "sweep-epsilon.csv").read_bytes() == ref


def test_every_file_carries_the_config_hash(tmp_path):
    out = tmp_path / "o"
    assert main(["slice-check", "--out", str(out)]) == 0
    summary = json.loads((out / "slice-check.json").read_text())
    h = summary["config_hash"]
    files = sorted(out.iterdir())
    assert {f.suffix for f in files} == {".csv", ".json", ".dat", ".png"}
    for f in files:
        assert h.encode() in f.read_bytes(), f.name
    assert sorted(summary["config"]) == sorted(ExperimentConfig("slice-check").to_dict())


def test_emit_plot_data_rejects_empty_report(tmp_path):
    cfg = ExperimentConfig("weight-check")
    with pytest.raises(ValueError, match="no sweep"):
        emit_plot_data(RunReport(cfg, cfg.digest()), tmp_path)


def _data_rows(path):
    lines = path.read_text().splitlines()
    header = [l for l in lines if l.startswith("#")]
    rows = [[float(x) for x in l.split()] for l in lines if l and not l.startswith("#")]
    return header, rows


def test_epsilon_plot_file_has_two_log_columns(tmp_path):
    code, out = _small_epsilon(tmp_path, "e")
    assert code == 0
    header, rows = _data_rows(out / "sweep-epsilon_epsilon.dat")
    assert "# columns: 1:log_epsilon 2:log_quotient" in header
    assert all(len(r) == 2 for r in rows)
    eps = [0.25, 0.5, 1.0, 2.0, 4.0]
    assert [r[0] for r in rows] == pytest.approx([math.log(e) for e in eps])
    slope = (rows[-1][1] - rows[0][1]) / (rows[-1][0] - rows[0][0])
    assert slope == pytest.approx(1 / 6, abs=0.02)


def test_froude_plot_file_has_three_columns(tmp_path):
    out = tmp_path / "f"
    cfg = _write(tmp_path, {"seeds": 1, "window": {"half_width": 5.0, "samples": 17}})
    main(["sweep-froude", "--config", cfg, "--out", str(out), "--resolution", "16", "--no-figures"])
    header, rows = _data_rows(out / "sweep-froude_froude.dat")
    assert "# columns: 1:F 2:quotient 3:normalized" in header
    for F, q, nq in rows:
        assert nq == pytest.approx(q * (F - 1) ** (1 / 6) / math.sqrt(F))


def test_slice_plot_file_is_level_and_residual(tmp_path):
    out = tmp_path / "s"
    cfg = _write(tmp_path, {"surface": "rotation"})
    assert main(["slice-check", "--config", cfg, "--out", str(out), "--no-figures"]) == 0
    header, rows = _data_rows(out / "slice-check_refinement.dat")
    assert "# columns: 1:level 2:rotation" in header
    assert [r[0] for r in rows] == [0, 1, 2]
    assert rows[0][1] < 1e-4


def test_csv_rows_carry_hash_and_layout(tmp_path):
    cfg = ExperimentConfig("weight-check")
    rep = run(cfg, write=False)
    text = render_csv(rep)
    lines = text.splitlines()
    assert lines[0].split(",")[0] == "config_hash"
    assert all(l.startswith(rep.config_hash + ",") for l in lines[1:])


# ---------------------------------------------------------------- experiments


def test_sweep_epsilon_defaults_exit_zero(tmp_path, capsys):
    out = tmp_path / "d"
    assert main(["sweep-epsilon", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "[PASS]" in text and "[FAIL]" not in text
    summary = json.loads((out / "sweep-epsilon.json").read_text())
    assert summary["passed"] is True
    assert summary["resolution"] == {"grid_points": 48, "time_samples": 65}
    assert (out / "sweep-epsilon.csv").exists()


def test_sharpness_reports_bounded_verdict(tmp_path):
    rep = run(ExperimentConfig("sharpness"), out_dir=tmp_path, figures=False)
    assert rep.passed
    assert rep.details["verdict"] == "bounded"
    assert abs(rep.details["slope"]) <= 0.05


def test_sharpness_divergent_case(tmp_path):
    cfg = ExperimentConfig.from_dict({"experiment": "sharpness", "exponents": {"p": 4, "q": 4, "s": 0.75}})
    rep = run(cfg, write=False)
    assert rep.details["verdict"] == "divergent"
    assert rep.details["slope"] == pytest.approx(-0.25, abs=0.05)


def test_failed_check_exits_one(tmp_path):
    # an impossible tolerance turns the fitted slope into a failure
    path = _write(tmp_path, {"tolerance": 1e-12})
    assert main(["sharpness", "--config", path, "--out", str(tmp_path / "o"), "--no-figures"]) == 1
