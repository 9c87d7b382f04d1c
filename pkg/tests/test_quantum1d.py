import csv
import math

import numpy as np
import pytest

from eneqsim.errors import NumericError, ValidationError
from eneqsim.quantum1d import (
    EigenSolution,
    Grid1D,
    TrapParams,
    ZPotentialParams,
    build_y_potential,
    build_z_potential,
    default_y_grid,
    default_z_grid,
    dipole_matrix_elements,
    grid_from_bounds,
    potential_from_csv,
    qubit_spectrum_vs_voltage,
    solve_schrodinger_1d,
    transition_set,
    voltage_for_frequency,
    write_spectrum_csv,
)
from eneqsim.units import COULOMB_MEV_NM, HBAR2_OVER_2ME_MEV_NM2, RYDBERG_MEV, ghz_to_mev

C = HBAR2_OVER_2ME_MEV_NM2


def harmonic_potential(hbar_omega_mev, span_zpf=9.0, dx_frac=0.003):
    """0.5*K*x^2 with K chosen so hbar*omega has the requested value."""
    x_zpf = math.sqrt(C / hbar_omega_mev)
    k = hbar_omega_mev**2 / (2.0 * C)
    grid = grid_from_bounds(-span_zpf * x_zpf, span_zpf * x_zpf, dx_frac * x_zpf)
    v = 0.5 * k * grid.positions_nm**2
    from eneqsim.quantum1d import Potential1D

    return Potential1D(grid=grid, values_mev=v), x_zpf


class TestGrid:
    def test_positions_and_endpoint(self):
        g = grid_from_bounds(-1.0, 1.0, 0.5)
        assert g.n == 5
        np.testing.assert_allclose(g.positions_nm, [-1.0, -0.5, 0.0, 0.5, 1.0])
        assert g.x1_nm == 1.0

    @pytest.mark.parametrize("bad", [dict(dx_nm=0.0), dict(dx_nm=-0.1), dict(n=2)])
    def test_rejects_bad_construction(self, bad):
        kw = dict(x0_nm=0.0, dx_nm=0.1, n=10)
        kw.update(bad)
        with pytest.raises(ValidationError):
            Grid1D(**kw)

    def test_rejects_non_finite(self):
        with pytest.raises(ValidationError):
            Grid1D(x0_nm=float("nan"), dx_nm=0.1, n=10)


class TestZPotential:
    def test_prefactor_matches_dielectric_formula(self):
        eps = 1.244
        p = ZPotentialParams(epsilon=eps)
        assert p.prefactor == pytest.approx((eps - 1.0) / (4.0 * (eps + 1.0)), rel=1e-12)
        assert p.prefactor == pytest.approx(0.027184, abs=1e-6)

    def test_sampled_values(self):
        params = ZPotentialParams()
        grid = grid_from_bounds(-0.5, 10.0, 0.01)
        pot = build_z_potential(grid, params)
        z = grid.positions_nm
        v = pot.values_mev
        # substrate barrier
        assert v[z <= 0.0][0] == pytest.approx(700.0)
        # clamp region held at the cutoff value
        b_nm = params.cutoff_b_angstrom * 0.1
        inner = (z > 0.0) & (z < b_nm)
        np.testing.assert_allclose(v[inner], -params.prefactor * COULOMB_MEV_NM / b_nm)
        # image tail
        i = np.searchsorted(z, 5.0)
        assert v[i] == pytest.approx(-params.prefactor * COULOMB_MEV_NM / z[i], rel=1e-12)
        # tail rises monotonically toward zero from above the cutoff
        tail = v[z >= b_nm]
        assert np.all(np.diff(tail) > 0.0)
        assert tail[-1] < 0.0

    def test_hard_wall_continuation(self):
        params = ZPotentialParams(continuation="hard-wall")
        grid = grid_from_bounds(-0.5, 10.0, 0.01)
        v = build_z_potential(grid, params).values_mev
        z = grid.positions_nm
        inner = (z > 0.0) & (z < params.cutoff_b_angstrom * 0.1)
        np.testing.assert_allclose(v[inner], 700.0)

    def test_grid_must_cover_barrier_and_cutoff(self):
        params = ZPotentialParams()
        with pytest.raises(ValidationError):
            build_z_potential(grid_from_bounds(0.5, 10.0, 0.01), params)
        with pytest.raises(ValidationError):
            build_z_potential(grid_from_bounds(-0.5, 0.2, 0.01), params)

    @pytest.mark.parametrize(
        "kw",
        [
            dict(barrier_u_ev=-1.0),
            dict(cutoff_b_angstrom=0.0),
            dict(epsilon=0.9),
            dict(continuation="mirror"),
            dict(barrier_u_ev=float("inf")),
        ],
    )
    def test_rejects_bad_params(self, kw):
        with pytest.raises(ValidationError):
            ZPotentialParams(**kw)

    def test_bound_state_smoke(self):
        pot = build_z_potential(default_z_grid(), ZPotentialParams())
        sol = solve_schrodinger_1d(pot, n_states=2)
        e0, e1 = sol.energies_mev
        assert e0 < e1 < 0.0
        assert sol.count_nodes(0) == 0
        assert sol.count_nodes(1) == 1
        assert sol.unbound == (False, False)


class TestSolver:
    def test_harmonic_levels_match_analytic(self):
        hw = 1.0
        pot, _ = harmonic_potential(hw)
        sol = solve_schrodinger_1d(pot, n_states=3)
        exact = (np.arange(3) + 0.5) * hw
        np.testing.assert_allclose(sol.energies_mev, exact, rtol=1e-6)
        assert sol.boundary_ok

    def test_harmonic_dipole_matches_zero_point_length(self):
        hw = 1.0
        pot, x_zpf = harmonic_potential(hw)
        sol = solve_schrodinger_1d(pot, n_states=3)
        d = dipole_matrix_elements(sol)
        # |<0|x|1>| = x_zpf, |<1|x|2>| = sqrt(2) x_zpf, <0|x|2> = 0 by parity
        # (signs depend on the leading-lobe-positive state convention)
        assert abs(d[0, 1]) == pytest.approx(x_zpf, rel=1e-6)
        assert abs(d[1, 2]) == pytest.approx(math.sqrt(2.0) * x_zpf, rel=1e-6)
        assert abs(d[0, 2]) < 1e-8 * x_zpf
        assert np.allclose(d, d.T)

    def test_normalization_within_tolerance(self):
        pot, _ = harmonic_potential(1.0)
        sol = solve_schrodinger_1d(pot, n_states=4)
        norms = pot.grid.dx_nm * np.sum(sol.wavefunctions**2, axis=1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-10)

    def test_sign_convention_first_component_positive(self):
        pot, _ = harmonic_potential(1.0)
        sol = solve_schrodinger_1d(pot, n_states=4)
        for k in range(4):
            psi = sol.wavefunctions[k]
            nz = np.flatnonzero(np.abs(psi) > 1e-12)
            assert psi[nz[0]] > 0.0

    def test_node_counts(self):
        pot, _ = harmonic_potential(1.0)
        sol = solve_schrodinger_1d(pot, n_states=5)
        assert [sol.count_nodes(k) for k in range(5)] == [0, 1, 2, 3, 4]

    def test_energies_ascending(self):
        pot, _ = harmonic_potential(2.0)
        sol = solve_schrodinger_1d(pot, n_states=5)
        assert np.all(np.diff(sol.energies_mev) > 0.0)

    def test_heavier_mass_scales_levels(self):
        pot, _ = harmonic_potential(1.0)
        light = solve_schrodinger_1d(pot, n_states=1)
        from eneqsim.units import M_ELECTRON

        heavy = solve_schrodinger_1d(pot, mass_kg=2.0 * M_ELECTRON, n_states=1)
        # omega ~ 1/sqrt(m) at fixed spring constant
        ratio = heavy.energies_mev[0] / light.energies_mev[0]
        assert ratio == pytest.approx(1.0 / math.sqrt(2.0), rel=1e-5)

    def test_refinement_converges_monotonically_from_below(self):
        hw = 1.0
        e0 = []
        for dx_frac in (0.012, 0.006, 0.003):
            pot, _ = harmonic_potential(hw, dx_frac=dx_frac)
            e0.append(solve_schrodinger_1d(pot, n_states=1).energies_mev[0])
        diffs = np.diff(e0)
        # three-point kinetic stencil underestimates, so refining raises E0
        assert np.all(diffs > 0.0)
        # second-order convergence: each halving shrinks the error ~4x
        assert diffs[1] / diffs[0] == pytest.approx(0.25, abs=0.05)
        richardson = e0[-1] + diffs[-1] / 3.0
        assert richardson == pytest.approx(0.5 * hw, rel=1e-8)

    def test_unbound_states_flagged(self):
        grid = grid_from_bounds(-20.0, 20.0, 0.02)
        v = np.where(np.abs(grid.positions_nm) < 1.0, -5.0, 0.0)
        from eneqsim.quantum1d import Potential1D

        sol = solve_schrodinger_1d(Potential1D(grid=grid, values_mev=v), n_states=3)
        assert sol.unbound[0] is False
        assert sol.unbound[1] is True and sol.unbound[2] is True

    def test_narrow_box_flags_boundary(self):
        pot, _ = harmonic_potential(1.0, span_zpf=2.0, dx_frac=0.01)
        sol = solve_schrodinger_1d(pot, n_states=3)
        assert not sol.boundary_ok
        assert sol.edge_amplitude > 1e-8

    def test_solver_input_validation(self):
        pot, _ = harmonic_potential(1.0)
        with pytest.raises(ValidationError):
            solve_schrodinger_1d(pot, mass_kg=0.0)
        with pytest.raises(ValidationError):
            solve_schrodinger_1d(pot, n_states=0)
        with pytest.raises(ValidationError):
            solve_schrodinger_1d(pot, n_states=pot.grid.n)


class TestHydrogenicLimit:
    """High barrier, tiny cutoff: the image tail alone is a hydrogen problem.

    With an impenetrable surface the spectrum is exactly -Lambda^2 Ry / n^2.
    A finite barrier lets the levels sink below that (the tail leaks into
    z < 0), so the gap to the analytic values must shrink monotonically as
    the barrier grows.
    """

    def analytic_mev(self, n):
        lam = ZPotentialParams().prefactor
        return -(lam**2) * RYDBERG_MEV / n**2

    def test_gap_shrinks_monotonically_with_barrier_height(self):
        ideal = np.array([self.analytic_mev(n) for n in (1, 2, 3)])
        grid = grid_from_bounds(-0.1, 160.0, 0.002)
        gaps = []
        for u_ev in (10.0, 30.0, 100.0):
            pot = build_z_potential(
                grid, ZPotentialParams(barrier_u_ev=u_ev, cutoff_b_angstrom=0.05)
            )
            sol = solve_schrodinger_1d(pot)
            assert np.all(sol.energies_mev < ideal)  # leakage only ever overbinds
            gaps.append(np.abs(sol.energies_mev - ideal))
        assert np.all(np.diff(np.array(gaps), axis=0) < 0.0)

    def test_wall_at_surface_recovers_analytic_spectrum(self):
        # domain edge on the surface: no room to leak, so the analytic
        # spectrum emerges to grid accuracy
        grid = grid_from_bounds(0.0, 160.0, 0.002)
        pot = build_z_potential(
            grid, ZPotentialParams(barrier_u_ev=100.0, cutoff_b_angstrom=0.05)
        )
        sol = solve_schrodinger_1d(pot)
        for k, n in enumerate((1, 2, 3)):
            assert sol.energies_mev[k] == pytest.approx(self.analytic_mev(n), rel=5e-3)


class TestTrap:
    def test_beta_arithmetic(self):
        trap = TrapParams()
        assert trap.beta_um(516.0) == pytest.approx((516.0 - 339.0) * 1e-3 / 0.8271, rel=1e-12)
        assert trap.beta_um(516.0) == pytest.approx(0.2140, abs=2e-4)
        assert trap.beta_um(339.0) == 0.0

    def test_tilt_direction(self):
        trap = TrapParams()
        grid = default_y_grid()
        v = build_y_potential(grid, trap, 516.0).values_mev
        y = grid.positions_nm
        i_plus = np.searchsorted(y, 300.0)
        i_minus = np.searchsorted(y, -300.0)
        assert v[i_plus] > v[i_minus]

    def test_sweet_spot_parity(self):
        trap = TrapParams()
        sol = solve_schrodinger_1d(build_y_potential(default_y_grid(), trap, 339.0), n_states=3)
        psi0 = sol.wavefunctions[0]
        assert np.max(np.abs(psi0 - psi0[::-1])) < 1e-8 * np.max(np.abs(psi0))
        d = dipole_matrix_elements(sol)
        assert abs(d[0, 2]) < 1e-8
        assert abs(d[0, 1]) > 1.0  # tens of nm
        assert abs(d[1, 2]) > 1.0

    def test_transition_set_frequencies(self):
        grid = Grid1D(x0_nm=0.0, dx_nm=1.0, n=3)
        sol = EigenSolution(
            grid=grid,
            energies_mev=np.array([0.0, ghz_to_mev(1.0), ghz_to_mev(3.1)]),
            wavefunctions=np.zeros((3, 3)),
            mass_kg=1.0,
            unbound=(False, False, False),
            edge_amplitude=0.0,
            boundary_ok=True,
        )
        tr = transition_set(sol, f_r_ghz=1.05)
        assert tr.f_ghz[(0, 1)] == pytest.approx(1.0, rel=1e-12)
        assert tr.f_ghz[(1, 2)] == pytest.approx(2.1, rel=1e-12)
        assert tr.f_ghz[(0, 2)] == pytest.approx(3.1, rel=1e-12)
        assert tr.alpha_mhz == pytest.approx(1100.0, rel=1e-9)
        assert tr.delta_mhz == pytest.approx(-50.0, rel=1e-9)

    def test_alpha_absent_with_two_states(self):
        trap = TrapParams()
        sol = solve_schrodinger_1d(build_y_potential(default_y_grid(), trap, 400.0), n_states=2)
        tr = transition_set(sol)
        assert tr.alpha_mhz is None
        assert tr.delta_mhz is None

    def test_spectrum_symmetric_about_sweet_spot(self):
        trap = TrapParams()
        rows = qubit_spectrum_vs_voltage(trap, [339.0 - 77.0, 339.0, 339.0 + 77.0])
        f_lo, f_ss, f_hi = (r.f01_ghz for r in rows)
        assert f_lo == pytest.approx(f_hi, rel=1e-9)
        assert f_ss < f_lo  # minimum at the symmetry point

    def test_spectrum_rows_sorted_and_threaded_identical(self):
        trap = TrapParams()
        volts = [500.0, 300.0, 400.0, 350.0]
        rows1 = qubit_spectrum_vs_voltage(trap, volts, threads=1)
        rows2 = qubit_spectrum_vs_voltage(trap, volts, threads=3)
        assert [r.v_rg_mv for r in rows1] == sorted(volts)
        assert rows1 == rows2

    def test_spectrum_records_per_point_failure(self, monkeypatch):
        import eneqsim.quantum1d as q

        real = q.eigh_tridiagonal

        def flaky(d, e, **kw):
            if flaky.calls == 1:
                flaky.calls += 1
                raise np.linalg.LinAlgError("did not converge")
            flaky.calls += 1
            return real(d, e, **kw)

        flaky.calls = 0
        monkeypatch.setattr(q, "eigh_tridiagonal", flaky)
        rows = qubit_spectrum_vs_voltage(TrapParams(), [350.0, 400.0, 450.0])
        errs = [r for r in rows if r.error is not None]
        assert len(errs) == 1
        assert errs[0].f01_ghz is None
        ok = [r for r in rows if r.error is None]
        assert all(r.f01_ghz is not None for r in ok)

    def test_spectrum_csv_round_trip(self, tmp_path):
        trap = TrapParams()
        rows = qubit_spectrum_vs_voltage(trap, [339.0, 416.0])
        path = tmp_path / "spectrum.csv"
        write_spectrum_csv(rows, str(path))
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            back = list(reader)
        assert reader.fieldnames == [
            "v_rg_mv",
            "f01_ghz",
            "f12_ghz",
            "alpha_mhz",
            "d01_nm",
            "d02_nm",
            "d12_nm",
        ]
        assert float(back[0]["v_rg_mv"]) == 339.0
        assert float(back[1]["f01_ghz"]) == rows[1].f01_ghz  # repr round trip

    def test_voltage_for_frequency_brackets(self):
        trap = TrapParams()
        v = voltage_for_frequency(trap, 6.326, 340.0, 516.0)
        rows = qubit_spectrum_vs_voltage(trap, [v])
        assert rows[0].f01_ghz == pytest.approx(6.326, abs=1e-4)
        with pytest.raises(NumericError):
            voltage_for_frequency(trap, 20.0, 340.0, 516.0)


class TestPotentialCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "pot.csv"
        path.write_text("position_nm,energy_mev\n0.0,1.5\n0.5,2.5\n1.0,3.5\n")
        pot = potential_from_csv(str(path))
        assert pot.grid.n == 3
        assert pot.grid.dx_nm == pytest.approx(0.5)
        np.testing.assert_allclose(pot.values_mev, [1.5, 2.5, 3.5])

    def test_headerless_accepted(self, tmp_path):
        path = tmp_path / "pot.csv"
        path.write_text("0.0,1.0\n1.0,2.0\n2.0,3.0\n")
        assert potential_from_csv(str(path)).grid.n == 3

    def test_malformed_reports_line(self, tmp_path):
        path = tmp_path / "pot.csv"
        path.write_text("position_nm,energy_mev\n0.0,1.0\noops\n1.0,2.0\n")
        with pytest.raises(ValidationError, match=":3"):
            potential_from_csv(str(path))

    def test_nonuniform_rejected(self, tmp_path):
        path = tmp_path / "pot.csv"
        path.write_text("0.0,1.0\n1.0,2.0\n2.5,3.0\n")
        with pytest.raises(ValidationError, match="uniform"):
            potential_from_csv(str(path))
