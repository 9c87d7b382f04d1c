"""One-dimensional Schrodinger solver and the electron trapping potentials.

The vertical (z) problem is an electron bound above a dielectric surface by
its image charge, with a finite barrier into the substrate:

    V(z) = -Lambda * e^2/(4 pi eps0 z)   for z > b,   Lambda = (eps-1)/(4(eps+1))
    V(z) = U                             for z <= 0

with a configurable continuation on 0 < z < b (clamp to V(b), or hard wall).
The in-plane (y) problem is the gate-defined trap

    V(y) = (1/2) k2 (beta y + y^2 + zeta y^4),   beta = (V_rg - V_ss) / eta

Energies are in meV, positions in nm (trap coefficients quoted per um as in
the electrode model), voltages in mV. Eigenpairs come from the symmetric
tridiagonal form of the three-point finite-difference Hamiltonian with
Dirichlet boundaries, solved by bisection plus inverse iteration.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

from .errors import NumericError, ValidationError
from .units import COULOMB_MEV_NM, HBAR2_OVER_2ME_MEV_NM2, M_ELECTRON, mev_to_ghz

__all__ = [
    "Grid1D",
    "Potential1D",
    "ZPotentialParams",
    "TrapParams",
    "EigenSolution",
    "TransitionSet",
    "SpectrumRow",
    "grid_from_bounds",
    "default_z_grid",
    "default_y_grid",
    "build_z_potential",
    "build_y_potential",
    "potential_from_csv",
    "solve_schrodinger_1d",
    "transition_set",
    "dipole_matrix_elements",
    "qubit_spectrum_vs_voltage",
    "voltage_for_frequency",
    "write_spectrum_csv",
    "SPECTRUM_CSV_HEADER",
]

# relative edge amplitude above which a solution is flagged as box-truncated
EDGE_AMPLITUDE_TOL = 1e-8


@dataclass(frozen=True)
class Grid1D:
    """Uniform position grid. Positions are x0_nm + i*dx_nm, i = 0..n-1."""

    x0_nm: float
    dx_nm: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.x0_nm) and math.isfinite(self.dx_nm)):
            raise ValidationError("grid bounds must be finite")
        if self.dx_nm <= 0.0:
            raise ValidationError(f"grid step must be positive, got {self.dx_nm}")
        if self.n < 3:
            raise ValidationError(f"grid needs at least 3 points, got {self.n}")

    @property
    def x1_nm(self) -> float:
        return self.x0_nm + self.dx_nm * (self.n - 1)

    @cached_property
    def positions_nm(self) -> np.ndarray:
        return self.x0_nm + self.dx_nm * np.arange(self.n)


def grid_from_bounds(x0_nm: float, x1_nm: float, dx_nm: float) -> Grid1D:
    """Grid covering [x0, x1] with step dx; the endpoint is included."""
    if not x1_nm > x0_nm:
        raise ValidationError("grid upper bound must exceed lower bound")
    n = int(round((x1_nm - x0_nm) / dx_nm)) + 1
    return Grid1D(x0_nm=x0_nm, dx_nm=dx_nm, n=n)


def default_z_grid() -> Grid1D:
    """z in [-0.5 nm, 60 nm] at 0.1 A. Resolves the barrier tail and the
    bound-state scale (about 2 nm) with room for the n=2,3 tails."""
    return grid_from_bounds(-0.5, 60.0, 0.01)


def default_y_grid() -> Grid1D:
    """y in [-1.5, 1.5] um at 0.5 nm; trap states extend a few hundred nm."""
    return grid_from_bounds(-1500.0, 1500.0, 0.5)


@dataclass(frozen=True)
class Potential1D:
    """Potential energy sampled on a grid, in meV."""

    grid: Grid1D
    values_mev: np.ndarray
    label: str = "custom"

    def __post_init__(self):
        v = np.asarray(self.values_mev, dtype=float)
        object.__setattr__(self, "values_mev", v)
        if v.shape != (self.grid.n,):
            raise ValidationError(
                f"potential has {v.shape} values for a {self.grid.n}-point grid"
            )
        if not np.all(np.isfinite(v)):
            raise ValidationError("potential contains non-finite values")


@dataclass(frozen=True)
class ZPotentialParams:
    """Image-charge surface potential parameters.

    barrier_u_ev: substrate barrier height U for z <= 0.
    cutoff_b_angstrom: inner cutoff b below which the -1/z form is not used.
    epsilon: dielectric constant of the substrate.
    prefactor_override: replaces the derived Lambda = (eps-1)/(4(eps+1)).
    continuation: 'clamp' holds V at V(b) on 0 < z < b; 'hard-wall' raises
        that region to the barrier height instead.
    """

    barrier_u_ev: float = 0.7
    cutoff_b_angstrom: float = 2.3
    epsilon: float = 1.244
    prefactor_override: float | None = None
    continuation: str = "clamp"

    def __post_init__(self):
        for name in ("barrier_u_ev", "cutoff_b_angstrom", "epsilon"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v)):
                raise ValidationError(f"{name} must be finite, got {v!r}")
        if self.barrier_u_ev <= 0.0:
            raise ValidationError("barrier height must be positive")
        if self.cutoff_b_angstrom <= 0.0:
            raise ValidationError("cutoff b must be positive")
        if self.epsilon <= 1.0:
            raise ValidationError("dielectric constant must exceed 1")
        if self.continuation not in ("clamp", "hard-wall"):
            raise ValidationError(
                f"continuation must be 'clamp' or 'hard-wall', got {self.continuation!r}"
            )
        if self.prefactor_override is not None and not (
            math.isfinite(self.prefactor_override) and self.prefactor_override > 0.0
        ):
            raise ValidationError("prefactor override must be positive and finite")

    @property
    def prefactor(self) -> float:
        """Dimensionless image-charge prefactor Lambda."""
        if self.prefactor_override is not None:
            return self.prefactor_override
        return (self.epsilon - 1.0) / (4.0 * (self.epsilon + 1.0))


def build_z_potential(grid: Grid1D, params: ZPotentialParams) -> Potential1D:
    """Sample the surface potential on a grid.

    The grid must cover the barrier region (some z <= 0) and reach beyond the
    cutoff b, otherwise the model is meaningless and a ValidationError is
    raised.
    """
    b_nm = params.cutoff_b_angstrom * 0.1
    z = grid.positions_nm
    if z[0] > 0.0:
        raise ValidationError("z grid must cover z <= 0 (the barrier region)")
    if z[-1] <= b_nm:
        raise ValidationError("z grid must extend beyond the cutoff b")
    u_mev = params.barrier_u_ev * 1e3
    coeff = params.prefactor * COULOMB_MEV_NM  # meV nm
    v = np.empty_like(z)
    barrier = z <= 0.0
    inner = (z > 0.0) & (z < b_nm)
    outer = z >= b_nm
    v[barrier] = u_mev
    v[outer] = -coeff / z[outer]
    if params.continuation == "clamp":
        v[inner] = -coeff / b_nm
    else:
        v[inner] = u_mev
    return Potential1D(grid=grid, values_mev=v, label="z-model")


@dataclass(frozen=True)
class TrapParams:
    """Gate-defined in-plane trap coefficients.

    k2 is the harmonic coefficient (meV/um^2), eta converts gate voltage to
    the linear-tilt length beta (V/um), zeta is the quartic coefficient
    (1/um^2), and v_ss_mv is the symmetry-point (sweet spot) voltage.
    """

    k2_mev_per_um2: float = 5.536
    eta_v_per_um: float = 0.8271
    zeta_per_um2: float = 15.4
    v_ss_mv: float = 339.0

    def __post_init__(self):
        for name in ("k2_mev_per_um2", "eta_v_per_um", "zeta_per_um2", "v_ss_mv"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v)):
                raise ValidationError(f"{name} must be finite, got {v!r}")
        if self.k2_mev_per_um2 <= 0.0:
            raise ValidationError("k2 must be positive")
        if self.eta_v_per_um == 0.0:
            raise ValidationError("eta must be nonzero")
        if self.zeta_per_um2 < 0.0:
            raise ValidationError("zeta must be nonnegative")

    def beta_um(self, v_rg_mv: float) -> float:
        """Tilt parameter beta = (V_rg - V_ss)/eta, in um."""
        return (v_rg_mv - self.v_ss_mv) * 1e-3 / self.eta_v_per_um


def build_y_potential(grid: Grid1D, params: TrapParams, v_rg_mv: float) -> Potential1D:
    """Sample the trap potential at gate voltage v_rg_mv (grid in nm)."""
    if not math.isfinite(v_rg_mv):
        raise ValidationError("gate voltage must be finite")
    y_um = grid.positions_nm * 1e-3
    beta = params.beta_um(v_rg_mv)
    v = 0.5 * params.k2_mev_per_um2 * (
        beta * y_um + y_um**2 + params.zeta_per_um2 * y_um**4
    )
    return Potential1D(grid=grid, values_mev=v, label="y-model")


def potential_from_csv(path: str) -> Potential1D:
    """Read a potential from a two-column CSV (position_nm, energy_mev)."""
    positions: list[float] = []
    values: list[float] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if lineno == 1 and row[0].strip() == "position_nm":
                if [c.strip() for c in row] != ["position_nm", "energy_mev"]:
                    raise ValidationError(
                        f"{path}:1: expected header position_nm,energy_mev"
                    )
                continue
            if len(row) != 2:
                raise ValidationError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                positions.append(float(row[0]))
                values.append(float(row[1]))
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
    if len(positions) < 3:
        raise ValidationError(f"{path}: need at least 3 samples")
    x = np.asarray(positions)
    steps = np.diff(x)
    dx = steps[0]
    if dx <= 0 or not np.allclose(steps, dx, rtol=1e-9, atol=0.0):
        raise ValidationError(f"{path}: positions must be uniformly increasing")
    grid = Grid1D(x0_nm=x[0], dx_nm=dx, n=len(x))
    return Potential1D(grid=grid, values_mev=np.asarray(values), label="custom")


@dataclass(frozen=True)
class EigenSolution:
    """Lowest eigenpairs of a 1-D potential.

    energies_mev are ascending. wavefunctions has shape (n_states, n) and is
    normalized so dx * sum(psi**2) == 1; each state's first component above
    1e-12 in magnitude is made positive. unbound marks states whose energy
    exceeds the escape threshold (the lower of the two edge potentials);
    edge_amplitude is the largest wavefunction amplitude at either grid edge
    relative to that state's peak, and boundary_ok says every state is below
    the 1e-8 box-truncation tolerance. A potential with a built-in wall (the
    surface model's substrate barrier) keeps some weight at the wall-side
    edge, so boundary_ok is meaningful mainly for soft-walled traps.
    """

    grid: Grid1D
    energies_mev: np.ndarray
    wavefunctions: np.ndarray
    mass_kg: float
    unbound: tuple[bool, ...]
    edge_amplitude: float
    boundary_ok: bool
    label: str = "custom"

    @property
    def n_states(self) -> int:
        return len(self.energies_mev)

    def count_nodes(self, i: int) -> int:
        """Interior sign changes of state i, ignoring near-zero samples."""
        psi = self.wavefunctions[i]
        keep = np.abs(psi) > 1e-7 * np.max(np.abs(psi))
        signs = np.sign(psi[keep])
        return int(np.sum(signs[1:] * signs[:-1] < 0))


def solve_schrodinger_1d(
    potential: Potential1D,
    mass_kg: float = M_ELECTRON,
    n_states: int = 3,
) -> EigenSolution:
    """Lowest n_states eigenpairs of the potential for a particle of mass_kg.

    Builds the three-point finite-difference Hamiltonian (symmetric
    tridiagonal, Dirichlet boundaries) and asks LAPACK for the index range
    [0, n_states), which uses Sturm bisection for the values and inverse
    iteration for the vectors.
    """
    if not (math.isfinite(mass_kg) and mass_kg > 0.0):
        raise ValidationError(f"mass must be positive and finite, got {mass_kg!r}")
    n = potential.grid.n
    if not (1 <= n_states <= n - 2):
        raise ValidationError(f"n_states must be in [1, {n - 2}], got {n_states}")
    dx = potential.grid.dx_nm
    t = HBAR2_OVER_2ME_MEV_NM2 * (M_ELECTRON / mass_kg) / dx**2
    diag = 2.0 * t + potential.values_mev
    off = np.full(n - 1, -t)
    try:
        w, v = eigh_tridiagonal(diag, off, select="i", select_range=(0, n_states - 1))
    except Exception as exc:
        raise NumericError(f"eigensolve failed: {exc}") from exc
    psi = v.T / math.sqrt(dx)
    for k in range(n_states):
        nz = np.flatnonzero(np.abs(v[:, k]) > 1e-12)
        if len(nz) and v[nz[0], k] < 0.0:
            psi[k] = -psi[k]
    escape = min(potential.values_mev[0], potential.values_mev[-1])
    unbound = tuple(bool(e > escape) for e in w)
    peaks = np.max(np.abs(psi), axis=1)
    edge = np.maximum(np.abs(psi[:, 0]), np.abs(psi[:, -1])) / peaks
    edge_amplitude = float(np.max(edge))
    return EigenSolution(
        grid=potential.grid,
        energies_mev=w,
        wavefunctions=psi,
        mass_kg=mass_kg,
        unbound=unbound,
        edge_amplitude=edge_amplitude,
        boundary_ok=bool(edge_amplitude < EDGE_AMPLITUDE_TOL),
        label=potential.label,
    )


@dataclass(frozen=True)
class TransitionSet:
    """Transition frequencies between solved levels.

    f_ghz maps (i, j) with i < j to the transition frequency in GHz.
    alpha_mhz is the anharmonicity f_12 - f_01 in MHz, or None when fewer
    than three levels are available (absent, never zero). delta_mhz is
    f_01 - f_r in MHz when a resonator reference was given.
    """

    f_ghz: Mapping[tuple[int, int], float]
    alpha_mhz: float | None
    f_r_ghz: float | None = None
    delta_mhz: float | None = None

    @property
    def f01_ghz(self) -> float:
        return self.f_ghz[(0, 1)]


def transition_set(solution: EigenSolution, f_r_ghz: float | None = None) -> TransitionSet:
    """Transition frequencies (and detuning from a resonator, if given)."""
    k = solution.n_states
    if k < 2:
        raise ValidationError("need at least two states for transitions")
    e = solution.energies_mev
    f = {
        (i, j): float(mev_to_ghz(e[j] - e[i]))
        for i in range(k)
        for j in range(i + 1, k)
    }
    alpha = 1e3 * (f[(1, 2)] - f[(0, 1)]) if k >= 3 else None
    delta = 1e3 * (f[(0, 1)] - f_r_ghz) if f_r_ghz is not None else None
    return TransitionSet(f_ghz=f, alpha_mhz=alpha, f_r_ghz=f_r_ghz, delta_mhz=delta)


def dipole_matrix_elements(solution: EigenSolution) -> np.ndarray:
    """Position matrix elements d_ij = dx * sum(psi_i * x * psi_j), in nm."""
    x = solution.grid.positions_nm
    dx = solution.grid.dx_nm
    weighted = solution.wavefunctions * x
    return dx * (weighted @ solution.wavefunctions.T)


SPECTRUM_CSV_HEADER = (
    "v_rg_mv",
    "f01_ghz",
    "f12_ghz",
    "alpha_mhz",
    "d01_nm",
    "d02_nm",
    "d12_nm",
)


@dataclass(frozen=True)
class SpectrumRow:
    """One gate voltage of a trap spectrum sweep. error is a failure message
    for this point (numeric fields are then None); the sweep keeps going."""

    v_rg_mv: float
    f01_ghz: float | None = None
    f12_ghz: float | None = None
    alpha_mhz: float | None = None
    d01_nm: float | None = None
    d02_nm: float | None = None
    d12_nm: float | None = None
    error: str | None = None

    def csv_cells(self) -> tuple:
        return (
            self.v_rg_mv,
            self.f01_ghz,
            self.f12_ghz,
            self.alpha_mhz,
            self.d01_nm,
            self.d02_nm,
            self.d12_nm,
        )


def _spectrum_point(
    params: TrapParams, v_rg_mv: float, grid: Grid1D, mass_kg: float, n_states: int
) -> SpectrumRow:
    try:
        pot = build_y_potential(grid, params, v_rg_mv)
        sol = solve_schrodinger_1d(pot, mass_kg=mass_kg, n_states=n_states)
        tr = transition_set(sol)
        d = dipole_matrix_elements(sol)
        return SpectrumRow(
            v_rg_mv=v_rg_mv,
            f01_ghz=tr.f_ghz[(0, 1)],
            f12_ghz=tr.f_ghz[(1, 2)] if n_states >= 3 else None,
            alpha_mhz=tr.alpha_mhz,
            d01_nm=float(d[0, 1]),
            d02_nm=float(d[0, 2]) if n_states >= 3 else None,
            d12_nm=float(d[1, 2]) if n_states >= 3 else None,
        )
    except ValidationError:
        raise
    except Exception as exc:  # keep sweeping, record the failure
        return SpectrumRow(v_rg_mv=v_rg_mv, error=str(exc))


def qubit_spectrum_vs_voltage(
    params: TrapParams,
    v_rg_mv: Sequence[float],
    grid: Grid1D | None = None,
    mass_kg: float = M_ELECTRON,
    n_states: int = 3,
    threads: int = 1,
) -> list[SpectrumRow]:
    """Solve the trap across a gate-voltage sweep.

    Rows come back in ascending voltage regardless of input order. threads
    fans the independent per-voltage solves out to a thread pool; results are
    assembled by index so the output does not depend on scheduling.
    """
    if grid is None:
        grid = default_y_grid()
    if n_states < 2:
        raise ValidationError("spectrum sweep needs at least 2 states")
    voltages = sorted(float(v) for v in v_rg_mv)
    if threads > 1 and len(voltages) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(
                pool.map(
                    lambda v: _spectrum_point(params, v, grid, mass_kg, n_states),
                    voltages,
                )
            )
    else:
        rows = [_spectrum_point(params, v, grid, mass_kg, n_states) for v in voltages]
    return rows


def write_spectrum_csv(rows: Iterable[SpectrumRow], path: str) -> None:
    from .fileio import write_csv

    write_csv(path, SPECTRUM_CSV_HEADER, (r.csv_cells() for r in rows))


def voltage_for_frequency(
    params: TrapParams,
    f01_target_ghz: float,
    v_lo_mv: float,
    v_hi_mv: float,
    grid: Grid1D | None = None,
    mass_kg: float = M_ELECTRON,
    xtol_mv: float = 1e-3,
) -> float:
    """Gate voltage at which f_01 equals the target, by bisection on [lo, hi].

    The bracket must straddle the target (f_01 is monotone in |V_rg - V_ss|),
    otherwise a NumericError is raised.
    """
    if grid is None:
        grid = default_y_grid()

    def objective(v_mv: float) -> float:
        pot = build_y_potential(grid, params, v_mv)
        sol = solve_schrodinger_1d(pot, mass_kg=mass_kg, n_states=2)
        return float(mev_to_ghz(sol.energies_mev[1] - sol.energies_mev[0])) - f01_target_ghz

    lo, hi = objective(v_lo_mv), objective(v_hi_mv)
    if lo == 0.0:
        return v_lo_mv
    if hi == 0.0:
        return v_hi_mv
    if lo * hi > 0.0:
        raise NumericError(
            f"f_01 = {f01_target_ghz} GHz not bracketed on [{v_lo_mv}, {v_hi_mv}] mV "
            f"(offsets {lo:+.4f} and {hi:+.4f} GHz)"
        )
    return float(brentq(objective, v_lo_mv, v_hi_mv, xtol=xtol_mv))
