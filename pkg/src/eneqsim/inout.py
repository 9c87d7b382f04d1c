"""Resonator transmission and the photon budget.

Response models for a two-sided resonator probed in transmission, alone

    (A/A0)^2 = (kappa/2pi)^2 / (4 (f - f_r)^2 + (kappa/2pi)^2)
    phi      = arctan(4 pi (f - f_r) / kappa)

and hybridized with a qubit,

    S21(f_p) = (kappa/2) / ( i (w_r - w_p) + kappa/2
                             + g^2 / (gamma + i (w_q - w_p)) )

with w = 2 pi f and kappa, g, gamma angular. The qubit term adds loss
(positive real part), so |S21| <= 1 for any passive parameter set; on
resonance f_q = f_r the peaks split by 2 g in ordinary frequency. gamma is
the qubit's angular half-width, so a quoted linewidth of gamma/2pi MHz enters
as 2 pi times that value.

The intracavity photon number follows the input-output budget

    n = kappa_in P / (h f_r (kappa_in + kappa_out + kappa_i)^2)

with every kappa angular; the symmetric overcoupled case reduces to
n = P / (2 h f_r kappa).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NoCrossingError, ValidationError
from .units import H_PLANCK, dbm_to_watt, watt_to_dbm

__all__ = [
    "ResonatorParams",
    "TransmissionTrace",
    "AvoidedCrossingMap",
    "lorentzian_response",
    "transmission_phase",
    "photon_occupancy",
    "required_input_power",
    "s21_coupled",
    "transmission_trace",
    "avoided_crossing_map",
    "TRACE_CSV_HEADER",
    "MAP_CSV_HEADER",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ResonatorParams:
    """Readout resonator: frequency, total linewidth, and its partition.

    kappa_mhz is the total linewidth kappa/2pi (FWHM in ordinary frequency).
    The in/out/internal partition defaults to the symmetric overcoupled case
    kappa_in = kappa_out = kappa/2, kappa_i = 0; an explicit partition must
    sum to the total.
    """

    f_r_ghz: float = 6.426
    kappa_mhz: float = 0.4
    kappa_in_mhz: float | None = None
    kappa_out_mhz: float | None = None
    kappa_i_mhz: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.f_r_ghz) and self.f_r_ghz > 0.0):
            raise ValidationError("resonator frequency must be positive")
        if not (math.isfinite(self.kappa_mhz) and self.kappa_mhz > 0.0):
            raise ValidationError("kappa must be positive")
        parts = (self.kappa_in_mhz, self.kappa_out_mhz, self.kappa_i_mhz)
        if all(p is None for p in parts):
            object.__setattr__(self, "kappa_in_mhz", 0.5 * self.kappa_mhz)
            object.__setattr__(self, "kappa_out_mhz", 0.5 * self.kappa_mhz)
            object.__setattr__(self, "kappa_i_mhz", 0.0)
        else:
            if any(p is None for p in parts):
                raise ValidationError("give all of kappa_in/out/i or none")
            if any(p < 0.0 or not math.isfinite(p) for p in parts):
                raise ValidationError("kappa partition terms must be nonnegative")
            total = self.kappa_in_mhz + self.kappa_out_mhz + self.kappa_i_mhz
            if not math.isclose(total, self.kappa_mhz, rel_tol=1e-9, abs_tol=1e-12):
                raise ValidationError(
                    f"kappa partition sums to {total} MHz, expected {self.kappa_mhz}"
                )

    @property
    def q_factor(self) -> float:
        return self.f_r_ghz * 1e3 / self.kappa_mhz


def lorentzian_response(f_ghz, params: ResonatorParams):
    """Normalized transmitted power (A/A0)^2 of the bare resonator."""
    df_mhz = (np.asarray(f_ghz, dtype=float) - params.f_r_ghz) * 1e3
    k = params.kappa_mhz
    return k**2 / (4.0 * df_mhz**2 + k**2)


def transmission_phase(f_ghz, params: ResonatorParams):
    """Transmission phase in rad; odd around f_r, +-pi/2 far away."""
    df_mhz = (np.asarray(f_ghz, dtype=float) - params.f_r_ghz) * 1e3
    return np.arctan(2.0 * df_mhz / params.kappa_mhz)


def photon_occupancy(
    params: ResonatorParams, p_in_dbm: float, simplified: bool = False
) -> float:
    """Mean intracavity photon number for a given applied power.

    simplified=True uses the symmetric overcoupled shortcut
    P/(2 h f_r kappa); otherwise the full partitioned budget. The two agree
    exactly when the partition is symmetric with no internal loss.
    """
    p_watt = dbm_to_watt(p_in_dbm)
    f_r_hz = params.f_r_ghz * 1e9
    if simplified:
        kappa_ang = TWO_PI * params.kappa_mhz * 1e6
        return p_watt / (2.0 * H_PLANCK * f_r_hz * kappa_ang)
    k_in = TWO_PI * params.kappa_in_mhz * 1e6
    k_total = TWO_PI * params.kappa_mhz * 1e6
    return k_in * p_watt / (H_PLANCK * f_r_hz * k_total**2)


def required_input_power(
    params: ResonatorParams, n_bar: float, simplified: bool = False
) -> float:
    """Applied power in dBm that sustains n_bar photons. Inverse of
    photon_occupancy at fixed parameters (exact round trip)."""
    if not (math.isfinite(n_bar) and n_bar > 0.0):
        raise ValidationError("photon number must be positive")
    f_r_hz = params.f_r_ghz * 1e9
    if simplified:
        kappa_ang = TWO_PI * params.kappa_mhz * 1e6
        p_watt = n_bar * 2.0 * H_PLANCK * f_r_hz * kappa_ang
    else:
        k_in = TWO_PI * params.kappa_in_mhz * 1e6
        k_total = TWO_PI * params.kappa_mhz * 1e6
        p_watt = n_bar * H_PLANCK * f_r_hz * k_total**2 / k_in
    return watt_to_dbm(p_watt)


def s21_coupled(
    f_p_ghz,
    params: ResonatorParams,
    f_q_ghz: float,
    g_mhz: float,
    gamma_mhz: float,
):
    """Complex transmission of the resonator-qubit system at probe f_p.

    g_mhz and gamma_mhz are quoted /2pi as usual; g = 0 reduces exactly to
    the bare Lorentzian. gamma must be positive when g is nonzero, or the
    qubit term would be lossless and singular on resonance.
    """
    if g_mhz < 0.0 or not math.isfinite(g_mhz):
        raise ValidationError("coupling g must be nonnegative")
    if g_mhz > 0.0 and not (math.isfinite(gamma_mhz) and gamma_mhz > 0.0):
        raise ValidationError("qubit linewidth gamma must be positive when coupled")
    f_p = np.asarray(f_p_ghz, dtype=float)
    # detunings first (in MHz), then to angular, to avoid cancellation of
    # large absolute frequencies
    dr = TWO_PI * (params.f_r_ghz - f_p) * 1e3
    kappa = TWO_PI * params.kappa_mhz
    denom = 1j * dr + 0.5 * kappa
    if g_mhz > 0.0:
        dq = TWO_PI * (f_q_ghz - f_p) * 1e3
        g = TWO_PI * g_mhz
        gamma = TWO_PI * gamma_mhz
        denom = denom + g**2 / (gamma + 1j * dq)
    return (0.5 * kappa) / denom


TRACE_CSV_HEADER = ("f_p_ghz", "s21_sq", "phase_rad")


@dataclass(frozen=True)
class TransmissionTrace:
    """Complex transmission samples with unit off-resonant normalization."""

    f_p_ghz: np.ndarray
    s21: np.ndarray
    a0: float = 1.0

    @property
    def s21_sq(self) -> np.ndarray:
        return np.abs(self.s21) ** 2 * self.a0**2

    @property
    def phase_rad(self) -> np.ndarray:
        return np.angle(self.s21)

    def csv_rows(self):
        s2 = self.s21_sq
        ph = self.phase_rad
        for i in range(len(self.f_p_ghz)):
            yield (float(self.f_p_ghz[i]), float(s2[i]), float(ph[i]))

    def to_csv(self, path: str) -> None:
        from .fileio import write_csv

        write_csv(path, TRACE_CSV_HEADER, self.csv_rows())


def transmission_trace(
    f_p_ghz,
    params: ResonatorParams,
    f_q_ghz: float | None = None,
    g_mhz: float = 0.0,
    gamma_mhz: float = 0.0,
) -> TransmissionTrace:
    """Sample S21 over a probe sweep; qubit optional."""
    f_p = np.asarray(f_p_ghz, dtype=float)
    if f_q_ghz is None or g_mhz == 0.0:
        s21 = s21_coupled(f_p, params, params.f_r_ghz, 0.0, 1.0)
    else:
        s21 = s21_coupled(f_p, params, f_q_ghz, g_mhz, gamma_mhz)
    return TransmissionTrace(f_p_ghz=f_p, s21=s21)


MAP_CSV_HEADER = ("dv_rg_mv", "df_p_mhz", "s21_sq")


@dataclass(frozen=True)
class AvoidedCrossingMap:
    """Transmitted power on a (gate voltage, probe offset) grid.

    dv_rg_mv are gate offsets from the crossing voltage, df_p_mhz probe
    offsets from the bare resonator; s21_sq has shape (len(dv), len(df)).
    """

    crossing_v_rg_mv: float
    dv_rg_mv: np.ndarray
    df_p_mhz: np.ndarray
    s21_sq: np.ndarray
    f_q_ghz: np.ndarray
    resonator: ResonatorParams
    g_mhz: float
    gamma_mhz: float

    def csv_rows(self):
        for i, dv in enumerate(self.dv_rg_mv):
            for j, df in enumerate(self.df_p_mhz):
                yield (float(dv), float(df), float(self.s21_sq[i, j]))

    def to_csv(self, path: str) -> None:
        from .fileio import write_csv

        write_csv(path, MAP_CSV_HEADER, self.csv_rows())

    def sidecar(self) -> dict:
        return {
            "crossing_v_rg_mv": self.crossing_v_rg_mv,
            "f_r_ghz": self.resonator.f_r_ghz,
            "kappa_mhz": self.resonator.kappa_mhz,
            "g_mhz": self.g_mhz,
            "gamma_mhz": self.gamma_mhz,
            "n_voltages": int(len(self.dv_rg_mv)),
            "n_probe_points": int(len(self.df_p_mhz)),
        }


def avoided_crossing_map(
    v_rg_mv: Sequence[float],
    f_q_ghz: Sequence[float],
    params: ResonatorParams,
    g_mhz: float,
    gamma_mhz: float,
    df_p_mhz: Sequence[float],
) -> AvoidedCrossingMap:
    """|S21|^2 map around the qubit-resonator crossing.

    f_q_ghz gives the qubit frequency at each gate voltage (from the trap
    model or any linearized stand-in). The qubit line must cross the
    resonator inside the range, else a NoCrossingError explains how far away
    it stayed.
    """
    v = np.asarray(v_rg_mv, dtype=float)
    fq = np.asarray(f_q_ghz, dtype=float)
    if v.shape != fq.shape or v.ndim != 1 or len(v) < 2:
        raise ValidationError("voltage and qubit-frequency arrays must match, length >= 2")
    detuning = fq - params.f_r_ghz
    exact = np.nonzero(detuning == 0.0)[0]
    sign_change = np.nonzero(np.diff(np.signbit(detuning)))[0]
    if len(exact):
        crossing_v = float(v[exact[0]])
    elif len(sign_change):
        # interpolate the zero of f_q - f_r between the straddling points
        i = sign_change[0]
        frac = detuning[i] / (detuning[i] - detuning[i + 1])
        crossing_v = float(v[i] + frac * (v[i + 1] - v[i]))
    else:
        raise NoCrossingError(
            "qubit never crosses the resonator in the swept range "
            f"(closest approach {1e3 * np.min(np.abs(detuning)):.3f} MHz)"
        )
    df = np.asarray(df_p_mhz, dtype=float)
    f_p = params.f_r_ghz + df * 1e-3
    s21_sq = np.empty((len(v), len(df)))
    for i in range(len(v)):
        s21_sq[i] = np.abs(s21_coupled(f_p, params, fq[i], g_mhz, gamma_mhz)) ** 2
    return AvoidedCrossingMap(
        crossing_v_rg_mv=crossing_v,
        dv_rg_mv=v - crossing_v,
        df_p_mhz=df,
        s21_sq=s21_sq,
        f_q_ghz=fq,
        resonator=params,
        g_mhz=g_mhz,
        gamma_mhz=gamma_mhz,
    )
