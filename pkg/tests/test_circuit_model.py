"""Unit and property tests for the perturbative junction model."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from jjosc.circuit_model import (
    I1_FLOOR,
    JunctionParams,
    PhysicalConstants as C,
    bessel_j,
    dc_junction_current,
    derived_junction_quantities,
    drive_state,
    junction_impedance,
    locking_phase,
    max_abs_j1,
    reduced_drive,
)
from jjosc.errors import DegenerateError, UnlockedError

FIG_JUNCTION = JunctionParams(ic=10e-6, cs=192e-12, rs=1.0)


def make_junction(ic, cs, rs):
    return JunctionParams(ic=ic, cs=cs, rs=rs)


junction_strategy = st.builds(
    make_junction,
    ic=st.floats(1e-6, 1e-4),
    cs=st.floats(1e-11, 1e-9),
    rs=st.floats(0.1, 100.0),
)


class TestConstants:
    def test_flux_quantum_derived(self):
        assert C.phi0 == C.h / (2.0 * C.e)

    def test_codata_2018(self):
        assert C.e == 1.602176634e-19
        assert C.h == 6.62607015e-34
        assert C.kB == 1.380649e-23
        assert C.hbar == C.h / (2.0 * math.pi)


class TestBessel:
    def test_trivial_values(self):
        assert bessel_j(0, 0.0) == 1.0
        assert bessel_j(1, 0.0) == 0.0
        assert bessel_j(5, 0.0) == 0.0

    def test_against_scipy(self):
        # scipy is the independent oracle for the hand-rolled evaluator
        for n in range(0, 6):
            for x in np.linspace(0.0, 49.5, 700):
                assert bessel_j(n, float(x)) == pytest.approx(
                    special.jv(n, x), abs=1e-12
                )

    def test_negative_argument_parity(self):
        for n in range(0, 4):
            for x in (0.3, 2.7, 11.0):
                assert bessel_j(n, -x) == pytest.approx(
                    (-1.0) ** n * bessel_j(n, x), abs=1e-15
                )

    def test_j1_maximum(self):
        x_peak, j1_peak = max_abs_j1()
        assert j1_peak == pytest.approx(0.5819, abs=1e-4)
        assert x_peak == pytest.approx(1.8412, abs=1e-4)
        # local refinement beats neighbouring samples
        assert j1_peak >= abs(bessel_j(1, x_peak - 1e-6))
        assert j1_peak >= abs(bessel_j(1, x_peak + 1e-6))

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            bessel_j(0, 50.0)
        with pytest.raises(ValueError):
            bessel_j(-1, 1.0)

    @given(x=st.floats(1e-6, 20.0))
    @settings(max_examples=200)
    def test_recurrence_identity(self, x):
        # J0(x) + J2(x) == 2 J1(x) / x
        lhs = bessel_j(0, x) + bessel_j(2, x)
        rhs = 2.0 * bessel_j(1, x) / x
        assert lhs == pytest.approx(rhs, abs=1e-10)


class TestDerivedQuantities:
    def test_fig_device_values(self):
        d = derived_junction_quantities(FIG_JUNCTION)
        # frozen from direct evaluation of phi0/(2 pi ic) etc.
        assert d.lj == pytest.approx(3.2910598e-11, rel=1e-6)
        assert d.omega_p / (2.0 * math.pi) == pytest.approx(2.0021731e9, rel=1e-6)
        # e^2/(2 cs h): lands at the low edge of the expected 100-600 kHz window
        assert d.ec / C.h == pytest.approx(100886.6, rel=1e-6)
        assert 100e3 <= d.ec / C.h <= 600e3

    def test_oscillation_above_plasma_frequency(self):
        d = derived_junction_quantities(FIG_JUNCTION)
        assert 2.0 * math.pi * 5.35e9 > 2.0 * d.omega_p

    @given(j=junction_strategy)
    @settings(max_examples=100)
    def test_plasma_frequency_forms_agree(self, j):
        d = derived_junction_quantities(j)
        from_energies = math.sqrt(8.0 * d.ej * d.ec) / C.hbar
        assert from_energies == pytest.approx(d.omega_p, rel=1e-12)

    def test_invalid_params_rejected(self):
        with pytest.raises(ValueError):
            JunctionParams(ic=-1e-6, cs=1e-10, rs=1.0)
        with pytest.raises(ValueError):
            JunctionParams(ic=1e-6, cs=0.0, rs=1.0)


class TestDcJunctionCurrent:
    def test_balanced_bias_gives_zero(self):
        omega = 2.0 * math.pi * 5e9
        ib = C.phi0 * omega / (2.0 * math.pi * 2.5)
        assert dc_junction_current(ib, 2.5, omega) == pytest.approx(0.0, abs=1e-20)

    def test_fig_device_peak_bias(self):
        ij = dc_junction_current(17.7e-6, 1.0, 2.0 * math.pi * 5.175e9)
        assert ij == pytest.approx(6.9990e-6, rel=1e-4)

    def test_zero_bias_sign_convention(self):
        omega = 2.0 * math.pi * 5e9
        assert dc_junction_current(0.0, 1.0, omega) == pytest.approx(
            -C.phi0 * omega / (2.0 * math.pi), rel=1e-12
        )


class TestLockingPhase:
    def test_zero_current_zero_phase(self):
        assert locking_phase(0.0, 10e-6, 1.2) == 0.0

    def test_edge_of_locking_range(self):
        x = 1.2
        ij = 10e-6 * bessel_j(1, x)
        assert locking_phase(ij, 10e-6, x) == pytest.approx(-math.pi / 2.0, rel=1e-6)

    def test_unlocked_raises(self):
        x = 1.2
        ij = 1.01 * 10e-6 * abs(bessel_j(1, x))
        with pytest.raises(UnlockedError):
            locking_phase(ij, 10e-6, x)


class TestJunctionImpedance:
    OMEGA = 2.0 * math.pi * 5.35e9

    def test_zero_dc_current_zero_resistance(self):
        z = junction_impedance(FIG_JUNCTION, self.OMEGA, 100e-6, 0.0)
        assert z.re == 0.0

    def test_vanishing_junction_is_pure_capacitor(self):
        j = JunctionParams(ic=1e-13, cs=192e-12, rs=1.0)
        z = junction_impedance(j, self.OMEGA, 100e-6, 0.0)
        assert z.re == 0.0
        assert z.im == pytest.approx(-1.0 / (self.OMEGA * j.cs), rel=1e-6)

    def test_gain_magnitude_frozen_value(self):
        z = junction_impedance(FIG_JUNCTION, self.OMEGA, 100e-6, 3e-6)
        assert z.re == pytest.approx(-6.6377e-3, rel=1e-4)
        # independent route through phi0 instead of hbar/e
        alt = -self.OMEGA * C.phi0 * 3e-6 / (math.pi * (100e-6) ** 2)
        assert z.re == pytest.approx(alt, rel=1e-12)

    def test_unlocked_raises(self):
        x = reduced_drive(100e-6, self.OMEGA, FIG_JUNCTION.cs)
        ij = 1.01 * FIG_JUNCTION.ic * abs(bessel_j(1, x))
        with pytest.raises(UnlockedError):
            junction_impedance(FIG_JUNCTION, self.OMEGA, 100e-6, ij)

    def test_degenerate_drive_raises(self):
        with pytest.raises(DegenerateError):
            junction_impedance(FIG_JUNCTION, self.OMEGA, 0.5 * I1_FLOOR, 0.0)

    @given(
        j=junction_strategy,
        f_ghz=st.floats(0.5, 20.0),
        x=st.floats(0.01, 3.5),
        s=st.floats(-0.99, 0.99),
    )
    @settings(max_examples=200)
    def test_power_identity_and_gain_sign(self, j, f_ghz, x, s):
        # -Re(Z) I1^2 / 2 == hbar omega ij / (2 e) is algebraically exact
        omega = 2.0 * math.pi * f_ghz * 1e9
        i1 = x * C.phi0 * omega**2 * j.cs / (2.0 * math.pi)
        if i1 < 10.0 * I1_FLOOR:
            return
        ij = s * j.ic * bessel_j(1, x)
        z = junction_impedance(j, omega, i1, ij)
        lhs = -z.re * i1 * i1 / 2.0
        rhs = C.hbar * omega * ij / (2.0 * C.e)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-40)
        if abs(s) > 1e-12:  # sign check meaningless once re underflows
            assert (z.re < 0.0) == (ij > 0.0)
            assert (z.re > 0.0) == (ij < 0.0)

    @given(
        j=junction_strategy,
        f_ghz=st.floats(0.5, 20.0),
        x=st.floats(0.05, 3.5),
        s=st.floats(-0.999, 0.999),
    )
    @settings(max_examples=200)
    def test_locking_phase_roundtrip(self, j, f_ghz, x, s):
        # ic J1 sin(-phic) reconstructs the junction DC current
        omega = 2.0 * math.pi * f_ghz * 1e9
        i1 = x * C.phi0 * omega**2 * j.cs / (2.0 * math.pi)
        if i1 < 10.0 * I1_FLOOR:
            return
        ij = s * j.ic * bessel_j(1, x)
        state = drive_state(j, omega, i1, ij)
        reconstructed = j.ic * bessel_j(1, state.i1_reduced) * math.sin(-state.phic)
        assert reconstructed == pytest.approx(ij, rel=1e-12, abs=1e-30)
