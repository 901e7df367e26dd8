"""End-to-end tests of the command-line interface."""

import csv
import json
import math

import numpy as np
import pytest

from jjosc.circuit_model import PhysicalConstants as C
from jjosc.cli import load_device_config, main, parse_sweep
from jjosc.errors import ConfigError
from jjosc.presets import fast_test_oscillator, spiral_oscillator
from jjosc.steady_state import max_abs_j1, optimal_load

#: suffixes that satisfy the units-in-headers rule
UNIT_SUFFIXES = (
    "_a", "_v", "_hz", "_w", "_ohm", "_s", "_f", "_h", "_k",
    "_rad", "_c", "_frac", "_w_per_hz", "_hz_per_sqrt_w",
)
LABEL_COLUMNS = {"region", "op", "error", "locked"}


def device_toml(tmp_path, name, j, r, temperature=0.015):
    path = tmp_path / name
    path.write_text(
        "[junction]\n"
        f"ic_a = {j.ic!r}\n"
        f"cs_f = {j.cs!r}\n"
        f"rs_ohm = {j.rs!r}\n"
        "[resonator]\n"
        f"l1_h = {r.l1!r}\n"
        f"c1_f = {r.c1!r}\n"
        f"r1_ohm = {r.r1!r}\n"
        f"lp_h = {r.lp!r}\n"
        f"qt = {r.qt!r}\n"
        f"qe = {r.qe!r}\n"
        "[environment]\n"
        f"temperature_k = {temperature!r}\n"
    )
    return path


@pytest.fixture()
def spiral_config(tmp_path):
    j, r = spiral_oscillator()
    return device_toml(tmp_path, "spiral_device.toml", j, r)


@pytest.fixture()
def fast_config(tmp_path):
    j, r = fast_test_oscillator()
    return device_toml(tmp_path, "fast_device.toml", j, r)


def read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    return header, rows


def assert_unit_suffixed(header):
    for column in header:
        if column in LABEL_COLUMNS:
            continue
        assert column.endswith(UNIT_SUFFIXES), f"column {column!r} lacks a unit suffix"


class TestConfigParsing:
    def test_valid_config_loads(self, spiral_config):
        j, r, temperature = load_device_config(spiral_config)
        assert j.ic == pytest.approx(10e-6)
        assert temperature == pytest.approx(0.015)

    def test_missing_key_is_path_qualified(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("[junction]\nic_a = 1e-5\ncs_f = 1e-10\n[resonator]\n")
        with pytest.raises(ConfigError, match="junction.rs_ohm"):
            load_device_config(bad)

    def test_invalid_value_is_path_qualified(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text(
            "[junction]\nic_a = -1e-5\ncs_f = 1e-10\nrs_ohm = 1.0\n"
            "[resonator]\nl1_h = 2e-9\nc1_f = 3.6e-13\nr1_ohm = 0.007\n"
        )
        with pytest.raises(ConfigError, match="junction"):
            load_device_config(bad)

    def test_sweep_parsing(self):
        grid = parse_sweep("0e-6:25e-6:5e-6", "--ib")
        assert grid == pytest.approx([0.0, 5e-6, 10e-6, 15e-6, 20e-6, 25e-6])

    def test_sweep_rejects_bad_input(self):
        with pytest.raises(ConfigError):
            parse_sweep("1:0:1", "--ib")
        with pytest.raises(ConfigError):
            parse_sweep("0:1:-1", "--ib")
        with pytest.raises(ConfigError):
            parse_sweep("0:1", "--ib")


class TestSweepBias:
    def test_step_window_and_units(self, spiral_config, tmp_path, capsys):
        out = tmp_path / "run"
        code = main(
            [
                "sweep-bias",
                "--config",
                str(spiral_config),
                "--ib",
                "0e-6:25e-6:0.25e-6",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        header, rows = read_csv(out / "bias_sweep.csv")
        assert_unit_suffixed(header)
        step_ibs = [float(r[0]) for r in rows if r[1] == "shapiro_step"]
        assert min(step_ibs) >= 10e-6 and max(step_ibs) <= 19e-6
        assert min(step_ibs) <= 13e-6 <= max(step_ibs)
        manifest = json.loads((out / "bias_sweep.csv.manifest.json").read_text())
        assert manifest["command"] == "sweep-bias"
        assert manifest["config_sha256"]

    def test_empty_range_exits_2(self, spiral_config, tmp_path, capsys):
        code = main(
            [
                "sweep-bias",
                "--config",
                str(spiral_config),
                "--ib",
                "25e-6:0e-6:1e-6",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == 2
        record = json.loads(capsys.readouterr().err.strip())
        assert record["error"] == "ConfigError"

    def test_round_trip_byte_identical(self, spiral_config, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        argv = ["sweep-bias", "--config", str(spiral_config), "--ib", "11e-6:15e-6:0.5e-6"]
        assert main(argv + ["--out", str(out_a)]) == 0
        assert main(argv + ["--out", str(out_b)]) == 0
        assert (out_a / "bias_sweep.csv").read_bytes() == (out_b / "bias_sweep.csv").read_bytes()


class TestOperatingPoint:
    def test_solution_row(self, spiral_config, tmp_path):
        out = tmp_path / "op"
        code = main(
            ["operating-point", "--config", str(spiral_config), "--ib", "14.5e-6", "--out", str(out)]
        )
        assert code == 0
        header, rows = read_csv(out / "operating_point.csv")
        assert_unit_suffixed(header)
        row = dict(zip(header, rows[0]))
        assert float(row["f_emit_hz"]) == pytest.approx(5.34745e9, rel=1e-4)
        assert row["region"] == "shapiro_step"

    def test_outside_step_exits_3(self, spiral_config, tmp_path, capsys):
        code = main(
            ["operating-point", "--config", str(spiral_config), "--ib", "5e-6", "--out", str(tmp_path)]
        )
        assert code == 3
        record = json.loads(capsys.readouterr().err.strip())
        assert record["error"] == "NoOscillationError"


class TestSimulateAndSpectrum:
    def test_trace_then_spectrum(self, fast_config, tmp_path):
        out = tmp_path / "sim"
        code = main(
            [
                "simulate",
                "--config",
                str(fast_config),
                "--ib",
                "0.8e-6",
                "--duration",
                "1.2e-6",
                "--dt-out",
                "4.8e-11",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        header, rows = read_csv(out / "trace.csv")
        assert_unit_suffixed(header)
        assert len(rows) == 25000

        out2 = tmp_path / "spec"
        code = main(
            [
                "spectrum",
                "--trace",
                str(out / "trace.csv"),
                "--segment",
                "4096",
                "--out",
                str(out2),
            ]
        )
        assert code == 0
        header, rows = read_csv(out2 / "spectrum.csv")
        assert_unit_suffixed(header)
        f = np.array([float(r[0]) for r in rows])
        psd = np.array([float(r[1]) for r in rows])
        assert f[np.argmax(psd)] == pytest.approx(1.072e9, rel=0.01)

    def test_iv_command(self, fast_config, tmp_path):
        out = tmp_path / "iv"
        code = main(
            [
                "iv",
                "--config",
                str(fast_config),
                "--ib",
                "0e-6:2e-6:0.5e-6",
                "--duration",
                "0.3e-6",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        header, rows = read_csv(out / "iv_curve.csv")
        assert_unit_suffixed(header)
        assert float(rows[0][1]) == pytest.approx(0.0, abs=1e-9)
        assert float(rows[-1][1]) == pytest.approx(2e-6 * 3.0, rel=0.05)


class TestAnalysisCommands:
    def test_adler_fit(self, tmp_path):
        data = tmp_path / "adler.csv"
        k = 5.0e13
        with open(data, "w") as fh:
            fh.write("p_inj_w,delta_f_hz\n")
            for p in np.geomspace(1e-14, 1e-12, 6):
                fh.write(f"{p},{k * math.sqrt(p)}\n")
        out = tmp_path / "fit"
        code = main(["adler-fit", "--data", str(data), "--out", str(out)])
        assert code == 0
        header, rows = read_csv(out / "adler_fit.csv")
        assert_unit_suffixed(header)
        assert float(rows[0][0]) == pytest.approx(k, rel=1e-9)

    def test_fidelity_command(self, tmp_path):
        pn = tmp_path / "pn.csv"
        pn.write_text("f_off_hz,l_dbc_per_hz\n10e3,-95\n1e6,-116\n5e6,-120\n")
        out = tmp_path / "fid"
        code = main(
            [
                "fidelity",
                "--phase-noise",
                str(pn),
                "--op",
                "all",
                "--tau-geom",
                "1e-5:1e-2:4",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        header, rows = read_csv(out / "infidelity.csv")
        assert_unit_suffixed(header)
        assert len(rows) == 12  # 3 ops x 4 taus
        by_op = {}
        for row in rows:
            by_op.setdefault(row[1], []).append(float(row[2]))
        assert set(by_op) == {"ramsey", "hahn_echo", "not_gate"}
        assert all(0.0 <= v <= 0.5 for vs in by_op.values() for v in vs)

    def test_fidelity_requires_tau(self, tmp_path, capsys):
        pn = tmp_path / "pn.csv"
        pn.write_text("10e3,-95\n")
        code = main(["fidelity", "--phase-noise", str(pn), "--out", str(tmp_path)])
        assert code == 2

    def test_design_optimize(self, tmp_path):
        out = tmp_path / "design"
        code = main(
            [
                "design-optimize",
                "--target-power",
                "28e-12",
                "--freq",
                "5.35e9",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        header, rows = read_csv(out / "design.csv")
        assert_unit_suffixed(header)
        row = dict(zip(header, rows[0]))
        _, j1_peak = max_abs_j1()
        expected_ic = 28e-12 / (j1_peak * C.phi0 * 5.35e9)
        assert float(row["ic_required_a"]) == pytest.approx(expected_ic, rel=1e-9)
        assert float(row["r1_optimal_ohm"]) == pytest.approx(
            optimal_load(expected_ic, 192e-12, 2 * math.pi * 5.35e9), rel=1e-9
        )

    def test_injection_map_command(self, fast_config, tmp_path):
        out = tmp_path / "map"
        code = main(
            [
                "injection-map",
                "--config",
                str(fast_config),
                "--ib",
                "0.8e-6",
                "--f-inj",
                "1.068e9:1.080e9:4e6",
                "--p-inj-dbm",
                "-100",
                "--coupling",
                "1.0",
                "--duration",
                "8e-6",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        header, _ = read_csv(out / "injection_map.csv")
        assert header == ["f_inj_hz", "f_sa_hz", "psd_w_per_hz"]
        header, rows = read_csv(out / "injection_summary.csv")
        assert_unit_suffixed(header)
        assert any(r[1] == "True" for r in rows)
