"""Tests for phase-noise models, filter functions and infidelity."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sp_integrate

from jjosc.errors import EmptyInputError, NonMonotoneFrequenciesError
from jjosc.fidelity import (
    PhaseNoiseModel,
    QubitOperation,
    average_fidelity,
    dephasing_integral,
    filter_function,
    infidelity,
    infidelity_curve,
    load_phase_noise_csv,
    not_gate_components,
    phase_noise_from_points,
    write_infidelity_csv,
)

ANCHORS = [(10e3, -95.0), (1e6, -116.0), (5e6, -120.0)]


@pytest.fixture(scope="module")
def anchor_model():
    return phase_noise_from_points(ANCHORS)


class TestPhaseNoiseModel:
    def test_anchors_reproduced_exactly(self, anchor_model):
        for f, level in ANCHORS:
            assert anchor_model.level_dbc(f) == pytest.approx(level, abs=1e-12)

    def test_log_log_interpolation(self, anchor_model):
        # 100 kHz lies mid-decade between the 10 kHz and 1 MHz anchors
        assert anchor_model.level_dbc(100e3) == pytest.approx(-105.5, abs=1e-9)

    def test_flat_extrapolation(self, anchor_model):
        assert anchor_model.level_dbc(1.0) == pytest.approx(-95.0, abs=1e-12)
        assert anchor_model.level_dbc(1e9) == pytest.approx(-120.0, abs=1e-12)

    def test_single_point_is_flat(self):
        model = phase_noise_from_points([(1e6, -116.0)])
        for f in (1.0, 1e3, 1e6, 1e9):
            assert model.level_dbc(f) == pytest.approx(-116.0, abs=1e-12)

    def test_empty_input(self):
        with pytest.raises(EmptyInputError):
            phase_noise_from_points([])

    def test_non_monotone_frequencies(self):
        with pytest.raises(NonMonotoneFrequenciesError):
            phase_noise_from_points([(1e3, -90.0), (1e2, -100.0)])


class TestFilterFunctions:
    def test_ramsey_vanishes_at_dc(self):
        assert filter_function(QubitOperation.RAMSEY, 0.0, 1e-3) == 0.0

    def test_ramsey_quarter_period(self):
        # pi f tau = pi/2 puts sin^2 at 1
        tau = 1e-3
        f = 0.5 / tau
        assert filter_function(QubitOperation.RAMSEY, f, tau) == pytest.approx(
            8.0 * math.pi, rel=1e-12
        )

    def test_echo_closed_form(self):
        tau = 2e-4
        f = np.array([0.3, 1.7, 9.4]) / tau
        expected = 32.0 * math.pi * np.sin(0.5 * math.pi * f * tau) ** 4
        assert filter_function(QubitOperation.HAHN_ECHO, f, tau) == pytest.approx(
            expected, rel=1e-12
        )

    @pytest.mark.parametrize("f_tau", [1e-3, 0.03, 0.5, 0.999, 1.0, 1.001, 2.7, 31.4, 1e3])
    def test_not_gate_matches_quadrature(self, f_tau):
        # independent oracle: adaptive quadrature of the defining
        # projections of cos(Omega t), sin(Omega t)
        tau = 1.7e-3
        f = f_tau / tau
        omega_r = math.pi / tau

        def quad(fn):
            # oscillatory-weight quadrature stays accurate at large f tau
            re = sp_integrate.quad(
                lambda t: fn(omega_r * t), 0, tau, weight="cos", wvar=2 * math.pi * f,
                limit=600,
            )[0]
            im = sp_integrate.quad(
                lambda t: fn(omega_r * t), 0, tau, weight="sin", wvar=2 * math.pi * f,
                limit=600,
            )[0]
            return re * re + im * im

        cz2_ref = quad(math.cos)
        cy2_ref = quad(math.sin)
        cz2, cy2 = not_gate_components(f, tau)
        assert float(cz2) == pytest.approx(cz2_ref, rel=1e-8, abs=1e-30)
        assert float(cy2) == pytest.approx(cy2_ref, rel=1e-8, abs=1e-30)

    def test_low_frequency_suppression_orders(self):
        tau = 1e-3
        f = np.geomspace(1e-3 / tau, 1e-2 / tau, 40)
        for op, expected in [(QubitOperation.RAMSEY, 2.0), (QubitOperation.HAHN_ECHO, 4.0)]:
            g = filter_function(op, f, tau)
            slope = float(np.polyfit(np.log10(f), np.log10(g), 1)[0])
            assert slope == pytest.approx(expected, abs=0.05)


class TestDephasingIntegral:
    def test_flat_noise_analytic(self):
        # flat -120 dBc/Hz to 10 MHz: sin^2 averages to 1/2, so
        # X = 4 * 1e-12 * f_max / 2 = 2e-5
        flat = phase_noise_from_points([(1e3, -120.0)])
        x = dephasing_integral(flat, QubitOperation.RAMSEY, 1e-3, f_max=10e6)
        assert x == pytest.approx(2.0e-5, rel=1e-3)

    def test_anchor_model_ten_ms(self, anchor_model):
        # all operations land within a factor of 5 of 1e-3
        for op in QubitOperation:
            value = infidelity(dephasing_integral(anchor_model, op, 10e-3))
            assert 0.2e-3 <= value <= 5.0e-3

    def test_short_time_limit(self, anchor_model):
        values = [
            infidelity(dephasing_integral(anchor_model, QubitOperation.RAMSEY, tau))
            for tau in (1e-10, 1e-11, 1e-12)
        ]
        assert values[0] > values[1] > values[2]
        assert values[2] < 1e-8

    def test_echo_beats_ramsey_for_decaying_noise(self):
        # steep 1/f-like decay across the whole integration band
        steep = phase_noise_from_points(
            [(1.0, -30.0), (1e3, -120.0), (1e6, -210.0), (1e9, -300.0)]
        )
        for tau in np.geomspace(1e-6, 1e-2, 7):
            xr = dephasing_integral(steep, QubitOperation.RAMSEY, float(tau))
            xe = dephasing_integral(steep, QubitOperation.HAHN_ECHO, float(tau))
            assert xe <= xr * (1.0 + 1e-9) + 1e-30

    def test_ten_db_gives_factor_ten(self, anchor_model):
        x1 = dephasing_integral(anchor_model, QubitOperation.RAMSEY, 1e-4)
        x2 = dephasing_integral(anchor_model.raised(10.0), QubitOperation.RAMSEY, 1e-4)
        assert x2 == pytest.approx(10.0 * x1, rel=1e-9)

    @given(
        delta_db=st.floats(-30.0, 30.0),
        tau_exp=st.floats(-7.0, -2.0),
    )
    @settings(max_examples=30, deadline=None)
    def test_linearity_in_linear_noise_power(self, anchor_model, delta_db, tau_exp):
        tau = 10.0**tau_exp
        x1 = dephasing_integral(anchor_model, QubitOperation.HAHN_ECHO, tau)
        x2 = dephasing_integral(anchor_model.raised(delta_db), QubitOperation.HAHN_ECHO, tau)
        assert x2 == pytest.approx(10.0 ** (delta_db / 10.0) * x1, rel=1e-9)


class TestFidelityFormulas:
    def test_zero_dephasing(self):
        assert average_fidelity(0.0) == 1.0
        assert infidelity(0.0) == 0.0

    def test_fully_dephased(self):
        assert average_fidelity(1e6) == pytest.approx(0.5, abs=1e-12)
        assert infidelity(1e6) == pytest.approx(0.5, abs=1e-12)

    def test_small_x_series(self):
        assert infidelity(2e-5) == pytest.approx(1e-5, rel=1e-4)

    @given(x=st.floats(0.0, 1e3))
    @settings(max_examples=100)
    def test_infidelity_bounds(self, x):
        value = infidelity(x)
        assert 0.0 <= value <= 0.5
        assert average_fidelity(x) == pytest.approx(1.0 - value, rel=1e-12)

    def test_negative_x_rejected(self):
        with pytest.raises(ValueError):
            infidelity(-1.0)


class TestCurveAndCsv:
    def test_curve_monotone_in_tau_for_flat_noise(self, anchor_model):
        taus = np.geomspace(1e-6, 1e-2, 5)
        curve = infidelity_curve(anchor_model, QubitOperation.RAMSEY, taus)
        assert np.all(np.diff(curve) > 0.0)

    def test_csv_round_trip(self, tmp_path, anchor_model):
        src = tmp_path / "pn.csv"
        src.write_text(
            "f_off_hz,l_dbc_per_hz\n10e3,-95\n1e6,-116\n5e6,-120\n"
        )
        model = load_phase_noise_csv(src)
        assert model.level_dbc(100e3) == pytest.approx(-105.5, abs=1e-9)

        out = tmp_path / "infid.csv"
        write_infidelity_csv(
            out, [(1e-3, QubitOperation.RAMSEY, 1.5e-5), (1e-2, QubitOperation.NOT_GATE, 9e-4)]
        )
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "tau_s,op,infidelity_frac"
        assert lines[1].startswith("0.001,ramsey,")

    def test_empty_csv_rejected(self, tmp_path):
        src = tmp_path / "empty.csv"
        src.write_text("f_off_hz,l_dbc_per_hz\n")
        with pytest.raises(EmptyInputError):
            load_phase_noise_csv(src)
