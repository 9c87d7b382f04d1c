"""Dipole-coupling calibration and dispersive readout.

The resonator's zero-point field E_r is not computed from geometry; it is
calibrated from one measured coupling and the corresponding dipole element:

    E_r = h g01 / (e d01),      g_ij = e d_ij E_r / h

Dispersive shifts for a weakly anharmonic three-level electron:

    chi_ij = g_ij^2 / Delta_ij,   Delta_ij = f_ij - f_r
    chi    = chi_01 - chi_12/2 + chi_02/2

with a two-level transmon-style estimate chi = g^2 alpha / (Delta (Delta +
alpha)) for comparison. All g, chi, Delta in MHz (quoted /2pi).

Readout convention: the measured transmission phase at the bare resonator
frequency is positive when the dressed resonance is blueshifted. The ground
state shifts the resonator by -chi and the excited state by +chi, so

    phi_ground  = arctan(-2 chi / kappa),   phi_excited = arctan(+2 chi / kappa)

and for a qubit below the resonator (chi < 0) pumping it pulls the phase
down, a dip; above, a peak. Driving the qubit at f_s gives the saturation
lineshape

    P_e(f_s) = 0.5 s / (1 + s + ((f_s - f_q)/(gamma/2))^2)

with gamma the FWHM in ordinary frequency and s the dimensionless pump
saturation parameter; the apparent width is power-broadened to
gamma sqrt(1 + s).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import CalibrationError, ResonanceError, ValidationError
from .inout import ResonatorParams
from .units import E_CHARGE, H_PLANCK

__all__ = [
    "CouplingModel",
    "DispersiveResult",
    "TwoToneRow",
    "calibrate_zero_point_field",
    "coupling_strengths",
    "coupling_model_from_dipoles",
    "dispersive_shift_multilevel",
    "dispersive_shift_transmon",
    "readout_phase_shift",
    "saturation_parameter",
    "qubit_population",
    "two_tone_trace",
    "two_tone_map",
    "write_two_tone_csv",
    "TWO_TONE_CSV_HEADER",
]

# warn when |Delta_01| is not large next to g_01 (dispersive expansion fails)
DISPERSIVE_RATIO = 5.0


def calibrate_zero_point_field(g01_mhz: float, d01_nm: float) -> float:
    """Zero-point field E_r = h g01 / (e d01), in V/m.

    Raises CalibrationError when the dipole element vanishes (a
    parity-forbidden transition cannot calibrate the field).
    """
    if not (math.isfinite(g01_mhz) and g01_mhz > 0.0):
        raise ValidationError("coupling g01 must be positive")
    if not math.isfinite(d01_nm) or d01_nm == 0.0:
        raise CalibrationError("dipole element d01 is zero; cannot calibrate the field")
    return H_PLANCK * g01_mhz * 1e6 / (E_CHARGE * abs(d01_nm) * 1e-9)


def coupling_strengths(
    dipoles_nm: np.ndarray, zero_point_field_v_per_m: float
) -> dict[tuple[int, int], float]:
    """g_ij = e |d_ij| E_r / h in MHz for every pair i < j.

    Magnitudes only; a parity-forbidden pair comes back as 0.
    """
    d = np.asarray(dipoles_nm, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValidationError("dipole matrix must be square")
    if not (math.isfinite(zero_point_field_v_per_m) and zero_point_field_v_per_m > 0.0):
        raise ValidationError("zero-point field must be positive")
    k = d.shape[0]
    scale = E_CHARGE * zero_point_field_v_per_m * 1e-9 / H_PLANCK / 1e6
    return {
        (i, j): abs(d[i, j]) * scale for i in range(k) for j in range(i + 1, k)
    }


@dataclass(frozen=True)
class CouplingModel:
    """Calibrated field plus the coupling it implies for each transition."""

    zero_point_field_v_per_m: float
    g_mhz: Mapping[tuple[int, int], float]
    gamma_mhz: float

    def __post_init__(self):
        if not (math.isfinite(self.gamma_mhz) and self.gamma_mhz > 0.0):
            raise ValidationError("qubit linewidth gamma must be positive")


def coupling_model_from_dipoles(
    g01_mhz: float, dipoles_nm: np.ndarray, gamma_mhz: float
) -> CouplingModel:
    """Calibrate E_r from the (0,1) transition, then scale every pair.

    By construction the returned g_01 reproduces the input exactly.
    """
    d = np.asarray(dipoles_nm, dtype=float)
    field = calibrate_zero_point_field(g01_mhz, d[0, 1])
    g = coupling_strengths(d, field)
    return CouplingModel(zero_point_field_v_per_m=field, g_mhz=g, gamma_mhz=gamma_mhz)


@dataclass(frozen=True)
class DispersiveResult:
    """Per-transition and total dispersive shift.

    chi_mhz maps (i, j) to g_ij^2/Delta_ij; chi_total_mhz combines them as
    chi_01 - chi_12/2 + chi_02/2 (pairs beyond the lowest three levels do
    not enter the total). phase_deg is the excited-state readout phase when
    a resonator linewidth was supplied.
    """

    chi_mhz: Mapping[tuple[int, int], float]
    chi_total_mhz: float
    detunings_mhz: Mapping[tuple[int, int], float]
    phase_deg: float | None = None


def dispersive_shift_multilevel(
    g_mhz: Mapping[tuple[int, int], float],
    f_ghz: Mapping[tuple[int, int], float],
    f_r_ghz: float,
    kappa_mhz: float | None = None,
) -> DispersiveResult:
    """Multilevel dispersive shift from per-transition couplings.

    f_ghz holds transition frequencies keyed like g_mhz. Transitions with
    zero coupling contribute nothing. A transition exactly on resonance has
    no dispersive limit; that raises a ResonanceError naming the pair. With
    only the (0,1) entry the total reduces to g^2/Delta exactly.
    """
    chi: dict[tuple[int, int], float] = {}
    det: dict[tuple[int, int], float] = {}
    for pair, g in g_mhz.items():
        if pair not in f_ghz:
            raise ValidationError(f"no transition frequency for pair {pair}")
        delta = (f_ghz[pair] - f_r_ghz) * 1e3
        det[pair] = delta
        if g == 0.0:
            chi[pair] = 0.0
            continue
        if delta == 0.0:
            raise ResonanceError(
                f"transition {pair[0]}-{pair[1]} is resonant with the readout mode"
            )
        chi[pair] = g**2 / delta
    g01 = g_mhz.get((0, 1), 0.0)
    d01 = det.get((0, 1))
    if d01 is not None and g01 > 0.0 and abs(d01) < DISPERSIVE_RATIO * g01:
        warnings.warn(
            f"dispersive expansion marginal: |Delta_01| = {abs(d01):.3g} MHz "
            f"< {DISPERSIVE_RATIO:g} g_01 = {DISPERSIVE_RATIO * g01:.3g} MHz",
            stacklevel=2,
        )
    total = chi.get((0, 1), 0.0) - 0.5 * chi.get((1, 2), 0.0) + 0.5 * chi.get((0, 2), 0.0)
    phase = None
    if kappa_mhz is not None:
        phase = readout_phase_shift(total, kappa_mhz)[1]
    return DispersiveResult(
        chi_mhz=chi, chi_total_mhz=total, detunings_mhz=det, phase_deg=phase
    )


def dispersive_shift_transmon(g01_mhz: float, alpha_mhz: float, delta_mhz: float) -> float:
    """Weak-anharmonicity estimate chi = g^2 alpha / (Delta (Delta + alpha))."""
    if delta_mhz == 0.0:
        raise ResonanceError("qubit is resonant with the readout mode")
    if delta_mhz + alpha_mhz == 0.0:
        raise ResonanceError("1-2 transition is resonant with the readout mode")
    return g01_mhz**2 * alpha_mhz / (delta_mhz * (delta_mhz + alpha_mhz))


def readout_phase_shift(chi_mhz: float, kappa_mhz: float) -> tuple[float, float]:
    """(ground, excited) transmission phase at the bare resonator, in degrees.

    Antisymmetric pair +-arctan(2 chi / kappa): the ground state shifts the
    resonance by -chi and reads arctan(-2 chi/kappa), the excited state the
    opposite. Saturates at +-90 deg for |chi| >> kappa.
    """
    if not (math.isfinite(kappa_mhz) and kappa_mhz > 0.0):
        raise ValidationError("kappa must be positive")
    excited = math.degrees(math.atan(2.0 * chi_mhz / kappa_mhz))
    return (-excited, excited)


def saturation_parameter(omega_pump_mhz: float, gamma_mhz: float) -> float:
    """Saturation s = 2 (Omega_pump / gamma)^2; s = 1 at half saturation."""
    if gamma_mhz <= 0.0:
        raise ValidationError("gamma must be positive")
    return 2.0 * (omega_pump_mhz / gamma_mhz) ** 2


def qubit_population(f_s_ghz, f_q_ghz: float, gamma_mhz: float, s: float):
    """Steady-state excited population under a saturating drive at f_s.

    Lorentzian of FWHM gamma at s -> 0, power-broadened to
    gamma sqrt(1 + s); approaches 1/2 on resonance as s -> inf.
    """
    if not (math.isfinite(s) and s > 0.0):
        raise ValidationError("pump saturation parameter must be positive")
    if not (math.isfinite(gamma_mhz) and gamma_mhz > 0.0):
        raise ValidationError("gamma must be positive")
    df_mhz = (np.asarray(f_s_ghz, dtype=float) - f_q_ghz) * 1e3
    return 0.5 * s / (1.0 + s + (df_mhz / (0.5 * gamma_mhz)) ** 2)


def two_tone_trace(
    f_s_ghz,
    f_q_ghz: float,
    chi_mhz: float,
    resonator: ResonatorParams,
    gamma_mhz: float,
    s: float,
):
    """Readout phase versus pump frequency, in degrees.

    Baseline is the ground-state phase; the pumped feature moves toward the
    excited-state phase in proportion to P_e, so the trace equals
    arctan(2 chi/kappa) * (2 P_e - 1). chi < 0 (qubit below the resonator)
    makes a dip, chi > 0 a peak.
    """
    p_e = qubit_population(f_s_ghz, f_q_ghz, gamma_mhz, s)
    phi_g, phi_e = readout_phase_shift(chi_mhz, resonator.kappa_mhz)
    return phi_g + (phi_e - phi_g) * p_e


TWO_TONE_CSV_HEADER = ("v_rg_mv", "delta_fs_mhz", "phase_deg")


@dataclass(frozen=True)
class TwoToneRow:
    v_rg_mv: float
    delta_fs_mhz: float
    phase_deg: float


def two_tone_map(
    v_rg_mv: Sequence[float],
    f_q_ghz: Sequence[float],
    g01_mhz: float,
    resonator: ResonatorParams,
    gamma_mhz: float,
    s: float,
    delta_fs_mhz: Sequence[float],
) -> list[TwoToneRow]:
    """Pump-probe phase map across gate voltage.

    f_q_ghz is the qubit frequency per voltage (trap solve or stand-in);
    the readout pull at each voltage is the two-level chi = g01^2/Delta.
    Pump offsets delta_fs_mhz are relative to the bare resonator. Voltages
    where the qubit lands exactly on the resonator are skipped (the
    dispersive readout model does not apply there).
    """
    rows: list[TwoToneRow] = []
    dfs = np.asarray(delta_fs_mhz, dtype=float)
    f_s = resonator.f_r_ghz + dfs * 1e-3
    for v, fq in zip(v_rg_mv, f_q_ghz):
        delta_mhz = (fq - resonator.f_r_ghz) * 1e3
        if delta_mhz == 0.0:
            continue
        chi = g01_mhz**2 / delta_mhz
        phase = two_tone_trace(f_s, fq, chi, resonator, gamma_mhz, s)
        rows.extend(
            TwoToneRow(v_rg_mv=float(v), delta_fs_mhz=float(d), phase_deg=float(p))
            for d, p in zip(dfs, phase)
        )
    return rows


def write_two_tone_csv(rows: Sequence[TwoToneRow], path: str) -> None:
    from .fileio import write_csv

    write_csv(
        path,
        TWO_TONE_CSV_HEADER,
        ((r.v_rg_mv, r.delta_fs_mhz, r.phase_deg) for r in rows),
    )
