import csv
import json

import numpy as np
import pytest

from srfm.analysis import doublet_model
from srfm.cli import EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_IO, EXIT_OK, main
from srfm.config import (PRESETS, ConfigError, ScenarioConfig, config_from_mapping, env_overrides,
                         load_config, load_preset)
from srfm.runner import (SPECTRUM_COLUMNS, SWEEP_COLUMNS, InputDataError, read_two_column,
                         run_fit, run_spectrum, run_sweep)


def write(path, text):
    path.write_text(text)
    return path


# -- configuration ------------------------------------------------------------

def test_presets_resolve_to_reference_values():
    a = load_preset("fig2a")
    assert a.density_per_cm3 == 4.9e17 and a.drive_rabi_GHz == 0
    assert a.fm_range_GHz == 0.1 and a.fm_rate_Hz == 400
    assert load_preset("fig2b").excitation_override == 0.645
    c, d = load_preset("fig2c"), load_preset("fig2d")
    assert (c.drive_rabi_GHz, c.drive_detuning_GHz) == (8, 3)
    assert (d.drive_rabi_GHz, d.drive_detuning_GHz) == (8, 0)
    for name, det in (("fig4_d0", 0), ("fig4_d3", 3)):
        cfg = load_preset(name)
        assert cfg.drive_rabi_GHz == 12 and cfg.drive_detuning_GHz == det
    sweep = load_preset("fig3")
    omegas = [np.hypot(r, d) for r, _, d in sweep.sweep_points()]
    assert len(omegas) == 9 and min(omegas) >= 6 and max(omegas) <= 12
    assert sorted({d for _, _, d in sweep.sweep_points()}) == [-6, -3, 0, 3, 6]


def test_preset_rabi_follows_root_power():
    sweep = load_preset("fig3")
    for rabi, power in zip(sweep.sweep_rabi_GHz[:3], (0.3, 0.4, 0.5)):
        assert rabi == pytest.approx(8 * np.sqrt(power / 0.5), rel=1e-12)


def test_config_file_parsing(tmp_path):
    path = write(tmp_path / "a.cfg", "# comment\nscenario_id = mine\ndensity_per_cm3 = 2e17  # inline\n"
                 "drive_power_W = 0.5\nprobe_points = 801\nthrough_origin = no\n")
    cfg = load_config(path, environ={})
    assert cfg.scenario_id == "mine" and cfg.density_per_cm3 == 2e17
    assert cfg.drive_power_W == 0.5 and cfg.drive_rabi_GHz is None
    assert cfg.probe_points == 801 and cfg.through_origin is False
    assert cfg.drive().resolved_rabi(cfg.atom()) / (2 * np.pi) == pytest.approx(2.5298, rel=1e-4)


@pytest.mark.parametrize("text, key", [
    ("drive_rabi_GHz = 1\ndrive_power_W = 1\n", "drive_rabi_GHz"),
    ("density_per_cm3 = 1e17\n", "drive_rabi_GHz"),
    ("drive_rabi_GHz = 1\nprobe_points = 150\n", "probe_points"),
    ("drive_rabi_GHz = 0\nprobe_span_GHz = 100\n", "probe_span_GHz"),
    ("drive_rabi_GHz = abc\n", "drive_rabi_GHz"),
    ("drive_rabi_GHz = 1\nwidget = 3\n", "widget"),
    ("drive_rabi_GHz = 1\nwindow_index = 0.5\n", "window_index"),
    ("drive_rabi_GHz = 1\nexcitation_override = 1.5\n", "excitation_override"),
    ("drive_rabi_GHz = 1\ndrive_area_cm2 = 0\n", "drive_area_cm2"),
    ("drive_rabi_GHz = 1\npopulation_decay_GHz = -1\n", "population_decay_GHz"),
    ("sweep_rabi_GHz = 8\n", "sweep_rabi_GHz"),
    ("sweep_rabi_GHz = 8, 9\nsweep_detuning_GHz = 1\n", "sweep_detuning_GHz"),
])
def test_config_errors_name_the_field(tmp_path, text, key):
    with pytest.raises(ConfigError, match=f"^{key}"):
        load_config(write(tmp_path / "bad.cfg", text), environ={})


def test_env_overrides(tmp_path):
    env = {"SRFM_DENSITY_PER_CM3": "2.45e17", "SRFM_DRIVE_RABI_GHZ": "10", "HOME": "/x"}
    assert env_overrides(env) == {"density_per_cm3": "2.45e17", "drive_rabi_GHz": "10"}
    cfg = load_preset("fig4_d0", environ=env)
    assert cfg.density_per_cm3 == 2.45e17 and cfg.drive_rabi_GHz == 10
    with pytest.raises(ConfigError, match="SRFM_NOPE"):
        env_overrides({"SRFM_NOPE": "1"})


def test_config_echo_round_trip():
    cfg = load_preset("fig3")
    again = config_from_mapping(json.loads(json.dumps(cfg.as_dict())))
    assert again == cfg
    defaults = ScenarioConfig().as_dict()
    assert set(cfg.as_dict()) == set(defaults)


# -- spectrum -----------------------------------------------------------------

def test_spectrum_csv_schema_and_report(tmp_path):
    assert main(["reproduce", "fig2a", "--out", str(tmp_path)]) == EXIT_OK
    with open(tmp_path / "fig2a.csv") as handle:
        rows = list(csv.reader(handle))
    assert tuple(rows[0]) == SPECTRUM_COLUMNS
    assert len(rows) == 2002
    for value in rows[1]:
        assert float(repr(float(value))) == float(value)
    report = json.loads((tmp_path / "fig2a.report.json").read_text())
    assert report["scenario_id"] == "fig2a" and report["kind"] == "spectrum"
    assert report["analysis"]["estimated_width_GHz"] == pytest.approx(28.4, rel=0.15)
    assert report["derived"]["gamma_self_GHz"] == pytest.approx(28.4)
    assert report["derived"]["lorentz_shift_GHz"] == pytest.approx(28.4 / 3)
    assert report["config"]["probe_points"] == 2001
    assert report["wall_time_s"] >= 0


def test_rerun_from_echoed_config_is_identical(tmp_path):
    assert main(["reproduce", "fig2c", "--out", str(tmp_path / "a")]) == EXIT_OK
    echoed = tmp_path / "a" / "fig2c.report.json"
    assert main(["spectrum", "--config", str(echoed), "--out", str(tmp_path / "b")]) == EXIT_OK
    assert (tmp_path / "a" / "fig2c.csv").read_bytes() == (tmp_path / "b" / "fig2c.csv").read_bytes()


def test_json_format_and_grid_points(tmp_path):
    assert main(["reproduce", "fig2b", "--out", str(tmp_path), "--format", "json",
                 "--grid-points", "1001"]) == EXIT_OK
    data = json.loads((tmp_path / "fig2b.json").read_text())
    assert set(data) == set(SPECTRUM_COLUMNS) and len(data["R"]) == 1001


def test_config_error_exit_code(tmp_path, capsys):
    bad = write(tmp_path / "bad.cfg", "drive_rabi_GHz = 1\nprobe_points = 10\n")
    assert main(["spectrum", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "probe_points" in capsys.readouterr().err
    assert not list(tmp_path.glob("*.csv"))


def test_missing_config_is_io_error(tmp_path):
    assert main(["spectrum", "--config", str(tmp_path / "nope.cfg")]) == EXIT_IO


def test_non_convergence_suppresses_output(tmp_path, capsys):
    cfg = write(tmp_path / "c.cfg", "scenario_id = stuck\ndrive_rabi_GHz = 12\nsolver_max_iter = 2\n")
    assert main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "out")]) == EXIT_CONVERGENCE
    assert not (tmp_path / "out").exists()
    assert "converge" in capsys.readouterr().err


def test_spectrum_rejects_sweep_config():
    assert main(["spectrum", "--config", str(_preset_file("fig3"))]) == EXIT_CONFIG


def _preset_file(name):
    from importlib import resources
    return resources.files("srfm") / "presets" / "v1" / f"{name}.cfg"


# -- sweep --------------------------------------------------------------------

def test_sweep_csv_and_thread_order(tmp_path):
    text = ("scenario_id = small\ndrive_detuning_reference = shifted\n"
            "sweep_rabi_GHz = 8, 12, 8\nsweep_detuning_GHz = 0, 0, 0\n")
    cfg_path = write(tmp_path / "s.cfg", text)
    assert main(["sweep", "--config", str(cfg_path), "--out", str(tmp_path / "t1")]) == EXIT_OK
    assert main(["sweep", "--config", str(cfg_path), "--out", str(tmp_path / "t3"),
                 "--threads", "3"]) == EXIT_OK
    one = (tmp_path / "t1" / "small.csv").read_text()
    assert one == (tmp_path / "t3" / "small.csv").read_text()
    rows = list(csv.reader(one.splitlines()))
    assert tuple(rows[0]) == SWEEP_COLUMNS
    assert rows[1] == rows[3]  # duplicate point, identical fit
    report = json.loads((tmp_path / "t1" / "small.report.json").read_text())
    assert report["linear_fit"]["through_origin"] is True


def test_duplicate_points_leave_slope_unchanged():
    base = load_config(overrides={"drive_detuning_reference": "shifted",
                                  "sweep_rabi_GHz": "8, 12"}, environ={})
    dup = load_config(overrides={"drive_detuning_reference": "shifted",
                                 "sweep_rabi_GHz": "8, 12, 8, 12"}, environ={})
    assert run_sweep(dup).linear_fit.slope == pytest.approx(run_sweep(base).linear_fit.slope,
                                                            rel=1e-12)


def test_single_point_sweep_is_rejected(tmp_path):
    cfg = write(tmp_path / "one.cfg", "sweep_rabi_GHz = 8\n")
    assert main(["sweep", "--config", str(cfg)]) == EXIT_CONFIG


def test_sweep_all_failed_exit(tmp_path):
    cfg = write(tmp_path / "f.cfg", "sweep_rabi_GHz = 8, 10\nsolver_max_iter = 1\n")
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONVERGENCE
    assert not (tmp_path / "o").exists()


def test_sweep_flags_failed_points(monkeypatch):
    import srfm.runner as runner
    from srfm.model import ConvergenceError

    real = runner.simulate

    def flaky(config, rabi_ghz=None, **kwargs):
        if rabi_ghz == 10:
            raise ConvergenceError("forced", last_iterate=0.0, residual=1.0, iterations=1)
        return real(config, rabi_ghz=rabi_ghz, **kwargs)

    monkeypatch.setattr(runner, "simulate", flaky)
    cfg = load_config(overrides={"drive_detuning_reference": "shifted",
                                 "sweep_rabi_GHz": "8, 10, 12"}, environ={})
    run = run_sweep(cfg)
    assert [p.fit_ok for p in run.points] == [True, False, True]
    assert run.points[1].error == "forced"
    assert len(run.linear_fit.points) == 2


# -- fit ----------------------------------------------------------------------

def _doublet_file(path, s=7.6, w=4.25, rows=2001):
    x = np.linspace(-60, 60, rows)
    y = doublet_model(x, (1.0, 0.8), 0.5, s, w)
    path.write_text("detuning_GHz,signal\n" + "".join(f"{float(a)!r},{float(b)!r}\n" for a, b in zip(x, y)))
    return path


def test_fit_round_trip_exact(tmp_path):
    src = _doublet_file(tmp_path / "d.csv")
    assert main(["fit", str(src), "--out", str(tmp_path), "--phase", "0"]) == EXIT_OK
    report = json.loads((tmp_path / "d.fit.report.json").read_text())
    fit = report["doublet_fit"]
    assert fit["splitting_GHz"] == pytest.approx(7.6, rel=1e-6)
    assert fit["width_GHz"] == pytest.approx(8.5, rel=1e-6)
    assert report["residual_trace"][0] >= report["residual_trace"][-1]


def test_fit_of_emitted_spectrum(tmp_path):
    assert main(["reproduce", "fig4", "--out", str(tmp_path)]) == EXIT_OK
    run = run_fit(tmp_path / "fig4_d0.csv")
    assert run.fit.splitting == pytest.approx(12, rel=0.25)


def test_fit_constant_signal_flagged(tmp_path, capsys):
    src = tmp_path / "flat.csv"
    src.write_text("".join(f"{i},1.0\n" for i in range(60)))
    assert main(["fit", str(src)]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["doublet_fit"]["degenerate"] is True


def test_fit_parse_errors_carry_line_numbers(tmp_path):
    src = tmp_path / "bad.csv"
    src.write_text("x,y\n" + "".join(f"{i},{i}\n" for i in range(60)) + "61,oops\n")
    with pytest.raises(InputDataError, match=r"bad.csv:62"):
        read_two_column(src)
    assert main(["fit", str(src)]) == EXIT_IO


def test_fit_needs_fifty_rows(tmp_path):
    src = tmp_path / "short.csv"
    src.write_text("".join(f"{i},{i}\n" for i in range(49)))
    with pytest.raises(InputDataError, match="50"):
        read_two_column(src)


def test_fit_non_convergence_is_not_failure(tmp_path, capsys):
    src = _doublet_file(tmp_path / "d.csv")
    assert main(["fit", str(src), "--max-iter", "1"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["doublet_fit"]["converged"] is False


# -- determinism --------------------------------------------------------------

@pytest.mark.parametrize("name", [p for p in PRESETS if p != "fig3"])
def test_spectrum_runs_are_byte_identical(tmp_path, name):
    a = run_spectrum(load_preset(name), out_dir=tmp_path / "a")
    b = run_spectrum(load_preset(name), out_dir=tmp_path / "b")
    assert (tmp_path / "a" / f"{name}.csv").read_bytes() == (tmp_path / "b" / f"{name}.csv").read_bytes()
