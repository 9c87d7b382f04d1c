import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eneqsim.errors import NoCrossingError, ValidationError
from eneqsim.inout import (
    AvoidedCrossingMap,
    ResonatorParams,
    avoided_crossing_map,
    required_input_power,
    lorentzian_response,
    photon_occupancy,
    s21_coupled,
    transmission_phase,
    transmission_trace,
)
from eneqsim.units import H_PLANCK


RES = ResonatorParams(f_r_ghz=6.426, kappa_mhz=0.4)


class TestBareResonator:
    def test_peak_at_resonance(self):
        assert lorentzian_response(RES.f_r_ghz, RES) == pytest.approx(1.0, rel=1e-12)

    def test_half_power_at_half_linewidth(self):
        # FWHM = kappa: half power at f_r +- kappa/2
        for sign in (+1.0, -1.0):
            f = RES.f_r_ghz + sign * 0.5 * RES.kappa_mhz * 1e-3
            assert lorentzian_response(f, RES) == pytest.approx(0.5, rel=1e-9)

    def test_phase_values(self):
        assert transmission_phase(RES.f_r_ghz, RES) == 0.0
        f_half = RES.f_r_ghz + 0.5 * RES.kappa_mhz * 1e-3
        assert transmission_phase(f_half, RES) == pytest.approx(math.pi / 4.0, rel=1e-9)
        assert transmission_phase(RES.f_r_ghz + 1.0, RES) == pytest.approx(
            math.pi / 2.0, abs=1e-3
        )

    def test_phase_odd_around_resonance(self):
        df = np.linspace(-0.01, 0.01, 41)
        ph = transmission_phase(RES.f_r_ghz + df, RES)
        np.testing.assert_allclose(ph, -ph[::-1], atol=1e-12)

    def test_q_factor(self):
        assert RES.q_factor == pytest.approx(1.6e4, rel=5e-3)

    def test_partition_defaults_symmetric(self):
        assert RES.kappa_in_mhz == RES.kappa_out_mhz == 0.2
        assert RES.kappa_i_mhz == 0.0

    def test_partition_must_sum(self):
        with pytest.raises(ValidationError):
            ResonatorParams(kappa_mhz=0.4, kappa_in_mhz=0.1, kappa_out_mhz=0.1, kappa_i_mhz=0.1)
        ok = ResonatorParams(kappa_mhz=0.4, kappa_in_mhz=0.1, kappa_out_mhz=0.2, kappa_i_mhz=0.1)
        assert ok.kappa_in_mhz == 0.1


class TestPhotonBudget:
    def test_single_photon_power(self):
        # independent evaluation of P = 2 h f_r kappa_angular for n = 1
        kappa_ang = 2.0 * math.pi * RES.kappa_mhz * 1e6
        p_watt = 2.0 * H_PLANCK * RES.f_r_ghz * 1e9 * kappa_ang
        expect_dbm = 10.0 * math.log10(p_watt / 1e-3)
        got = required_input_power(RES, 1.0)
        assert got == pytest.approx(expect_dbm, abs=1e-9)
        assert got == pytest.approx(-136.7, abs=0.05)
        # close to the quoted single-photon drive level
        assert abs(got - (-135.0)) < 2.0

    def test_round_trip_exact(self):
        for n in (1e-3, 1.0, 42.0):
            p = required_input_power(RES, n)
            assert photon_occupancy(RES, p) == pytest.approx(n, rel=1e-12)
            p2 = required_input_power(RES, n, simplified=True)
            assert photon_occupancy(RES, p2, simplified=True) == pytest.approx(n, rel=1e-12)

    def test_linear_in_power(self):
        p0 = -140.0
        n0 = photon_occupancy(RES, p0)
        assert photon_occupancy(RES, p0 + 10.0) == pytest.approx(10.0 * n0, rel=1e-12)

    def test_simplified_equals_full_when_symmetric(self):
        assert photon_occupancy(RES, -136.7) == pytest.approx(
            photon_occupancy(RES, -136.7, simplified=True), rel=1e-12
        )

    def test_internal_loss_costs_photons(self):
        lossy = ResonatorParams(
            f_r_ghz=6.426, kappa_mhz=0.4, kappa_in_mhz=0.15, kappa_out_mhz=0.15, kappa_i_mhz=0.1
        )
        assert photon_occupancy(lossy, -136.7) < photon_occupancy(RES, -136.7)

    def test_rejects_nonpositive_occupancy(self):
        with pytest.raises(ValidationError):
            required_input_power(RES, 0.0)


class TestCoupledTransmission:
    def test_decoupled_limit_is_exact(self):
        f = np.linspace(6.42, 6.432, 301)
        s21 = s21_coupled(f, RES, f_q_ghz=6.0, g_mhz=0.0, gamma_mhz=1.0)
        np.testing.assert_allclose(np.abs(s21) ** 2, lorentzian_response(f, RES), rtol=1e-14)
        np.testing.assert_allclose(np.angle(s21), transmission_phase(f, RES), atol=1e-14)

    def test_on_resonance_splitting_is_twice_g(self):
        g = 20.0  # MHz, narrow lines so the peaks sit at f_r +- g
        res = ResonatorParams(f_r_ghz=6.426, kappa_mhz=0.1)
        f = RES.f_r_ghz + np.linspace(-40.0, 40.0, 16001) * 1e-3
        y = np.abs(s21_coupled(f, res, res.f_r_ghz, g, 0.05)) ** 2
        mid = len(f) // 2
        lo = f[np.argmax(y[:mid])]
        hi = f[mid + np.argmax(y[mid:])]
        assert (hi - lo) * 1e3 == pytest.approx(2.0 * g, rel=5e-3)

    def test_splitting_grows_with_g(self):
        res = ResonatorParams(f_r_ghz=6.426, kappa_mhz=0.4)
        f = res.f_r_ghz + np.linspace(-30.0, 30.0, 12001) * 1e-3
        seps = []
        for g in (3.5, 7.0, 14.0):
            y = np.abs(s21_coupled(f, res, res.f_r_ghz, g, 1.7)) ** 2
            mid = len(f) // 2
            seps.append(f[mid + np.argmax(y[mid:])] - f[np.argmax(y[:mid])])
        assert seps[0] < seps[1] < seps[2]

    def test_qubit_adds_loss_on_resonance(self):
        y0 = np.abs(s21_coupled(RES.f_r_ghz, RES, RES.f_r_ghz, 3.5, 1.7)) ** 2
        assert y0 < 0.5  # hybridization empties the bare peak

    @settings(max_examples=60, deadline=None)
    @given(
        kappa=st.floats(0.01, 10.0),
        g=st.floats(0.0, 50.0),
        gamma=st.floats(0.01, 20.0),
        dq=st.floats(-0.2, 0.2),
    )
    def test_passive_transmission_never_exceeds_unity(self, kappa, g, gamma, dq):
        res = ResonatorParams(f_r_ghz=6.426, kappa_mhz=kappa)
        f = res.f_r_ghz + np.linspace(-0.3, 0.3, 201)
        y = np.abs(s21_coupled(f, res, res.f_r_ghz + dq, g, gamma)) ** 2
        assert np.max(y) <= 1.0 + 1e-9

    def test_rejects_bad_coupling(self):
        with pytest.raises(ValidationError):
            s21_coupled(6.426, RES, 6.426, -1.0, 1.0)
        with pytest.raises(ValidationError):
            s21_coupled(6.426, RES, 6.426, 3.5, 0.0)

    def test_trace_csv(self, tmp_path):
        f = np.linspace(6.42, 6.432, 11)
        tr = transmission_trace(f, RES)
        path = tmp_path / "trace.csv"
        tr.to_csv(str(path))
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 11
        assert float(rows[5]["s21_sq"]) == pytest.approx(tr.s21_sq[5], rel=1e-15)
        assert list(rows[0].keys()) == ["f_p_ghz", "s21_sq", "phase_rad"]


class TestAvoidedCrossing:
    def linear_map(self, g=4.5, gamma=3.4, n_v=41, slope_mhz_per_mv=2.0):
        v = np.linspace(-20.0, 20.0, n_v) + 500.0
        fq = RES.f_r_ghz + slope_mhz_per_mv * (v - 500.0) * 1e-3
        df = np.linspace(-12.0, 12.0, 121)
        return avoided_crossing_map(v, fq, RES, g, gamma, df)

    def test_crossing_found_at_linear_zero(self):
        m = self.linear_map()
        assert m.crossing_v_rg_mv == pytest.approx(500.0, abs=1e-9)

    def test_interpolated_crossing_between_samples(self):
        v = np.array([490.0, 499.0, 501.0, 510.0])
        fq = RES.f_r_ghz + 2.0 * (v - 500.5) * 1e-3
        m = avoided_crossing_map(v, fq, RES, 4.5, 3.4, np.linspace(-10, 10, 21))
        assert m.crossing_v_rg_mv == pytest.approx(500.5, abs=1e-9)

    def test_reflection_symmetry_for_linear_qubit_line(self):
        m = self.linear_map()
        np.testing.assert_allclose(m.s21_sq, m.s21_sq[::-1, ::-1], rtol=1e-10)

    def test_far_detuned_qubit_leaves_bare_lorentzian(self):
        # residual dispersive pull g^2/Delta shrinks as the qubit moves away
        f = RES.f_r_ghz + np.linspace(-2.0, 2.0, 401) * 1e-3
        bare = lorentzian_response(f, RES)

        def deviation(delta_ghz):
            y = np.abs(s21_coupled(f, RES, RES.f_r_ghz + delta_ghz, 4.5, 3.4)) ** 2
            return np.max(np.abs(y - bare))

        assert deviation(4.0) < 0.02
        assert deviation(4.0) < deviation(0.4) / 5.0

    def test_no_crossing_raises_with_distance(self):
        v = np.linspace(0.0, 10.0, 11)
        fq = np.full(11, RES.f_r_ghz + 0.5)
        with pytest.raises(NoCrossingError, match="closest approach"):
            avoided_crossing_map(v, fq, RES, 4.5, 3.4, [0.0])

    def test_map_csv_and_sidecar(self, tmp_path):
        m = self.linear_map(n_v=5)
        path = tmp_path / "map.csv"
        m.to_csv(str(path))
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 5 * 121
        assert list(rows[0].keys()) == ["dv_rg_mv", "df_p_mhz", "s21_sq"]
        side = m.sidecar()
        assert side["g_mhz"] == 4.5
        assert side["n_voltages"] == 5

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            avoided_crossing_map([1.0, 2.0], [6.4], RES, 4.5, 3.4, [0.0])
