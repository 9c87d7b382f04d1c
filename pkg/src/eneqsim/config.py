"""Run configuration: TOML file -> validated, fully-defaulted key set.

Every key the tool understands is declared in KEYS with its default, units,
and one-line description; that table is the single source for validation,
for the --help listing, and for the resolved snapshot recorded in run
manifests. Unknown keys are rejected with their full dotted path.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - 3.10 fallback
    import tomli as tomllib

from .dynamics import DecoherenceParams
from .errors import ValidationError
from .inout import ResonatorParams
from .quantum1d import Grid1D, TrapParams, ZPotentialParams, grid_from_bounds

OUTDIR_ENV = "ENEQSIM_OUT"


@dataclass(frozen=True)
class ConfigKey:
    default: Any
    units: str
    help: str


# dotted path -> declaration; section order here is the --help order
KEYS: dict[str, ConfigKey] = {
    "seed": ConfigKey(0, "", "seed for every random number stream"),
    "outdir": ConfigKey("", "", f"output directory; empty means ${OUTDIR_ENV} or '.'"),
    "threads": ConfigKey(1, "", "worker threads for sweeps and noise averaging"),
    "realizations": ConfigKey(5000, "", "noise realizations per time-domain sweep point"),
    # vertical binding model (solve z)
    "surface.barrier_u_ev": ConfigKey(0.7, "eV", "substrate barrier height U"),
    "surface.cutoff_b_angstrom": ConfigKey(2.3, "A", "inner cutoff b of the image potential"),
    "surface.epsilon": ConfigKey(1.244, "", "substrate dielectric constant"),
    "surface.continuation": ConfigKey("clamp", "", "potential on 0 < z < b: clamp | hard-wall"),
    "surface.z_min_nm": ConfigKey(-0.5, "nm", "vertical grid start"),
    "surface.z_max_nm": ConfigKey(60.0, "nm", "vertical grid end"),
    "surface.dz_nm": ConfigKey(0.01, "nm", "vertical grid spacing"),
    # in-plane gate trap (solve y, spectrum-map, rabi-split)
    "trap.k2_mev_per_um2": ConfigKey(5.536, "meV/um^2", "harmonic trap coefficient"),
    "trap.eta_v_per_um": ConfigKey(0.8271, "V/um", "gate lever arm"),
    "trap.zeta_per_um2": ConfigKey(15.4, "1/um^2", "quartic trap coefficient"),
    "trap.v_ss_mv": ConfigKey(339.0, "mV", "sweet-spot gate voltage"),
    "trap.v_rg_mv": ConfigKey(516.0, "mV", "gate bias for a single-point solve"),
    "trap.y_half_um": ConfigKey(1.5, "um", "in-plane grid half-width"),
    "trap.dy_nm": ConfigKey(0.5, "nm", "in-plane grid spacing"),
    # readout resonator
    "resonator.f_r_ghz": ConfigKey(6.426, "GHz", "bare resonator frequency"),
    "resonator.kappa_mhz": ConfigKey(0.4, "MHz", "total resonator linewidth"),
    # qubit-resonator coupling for transmission models
    "coupling.g01_mhz": ConfigKey(4.5, "MHz", "vacuum coupling at the crossing"),
    "coupling.gamma_mhz": ConfigKey(3.4, "MHz", "qubit linewidth in transmission models"),
    # two-tone spectroscopy map (spectrum-map --two-tone)
    "twotone.s": ConfigKey(1.0, "", "pump saturation parameter"),
    "twotone.span_mhz": ConfigKey(25.0, "MHz", "pump detuning half-span"),
    "twotone.n_points": ConfigKey(201, "", "pump detunings per gate voltage"),
    "twotone.record_delta_mhz": ConfigKey(
        -100.0, "MHz", "qubit-resonator detuning for the embedded dispersive record"
    ),
    # avoided-crossing map (rabi-split)
    "rabisplit.probe_span_mhz": ConfigKey(15.0, "MHz", "probe offset half-span around f_r"),
    "rabisplit.n_probe": ConfigKey(401, "", "probe points per gate voltage"),
    # time-domain drive
    "dynamics.f_q_ghz": ConfigKey(6.326, "GHz", "qubit frequency for time-domain runs"),
    "dynamics.f_drive_ghz": ConfigKey(0.0, "GHz", "drive frequency; 0 means on resonance"),
    "dynamics.rabi_mhz": ConfigKey(10.0, "MHz", "drive amplitude (Rabi frequency)"),
    # decoherence channels
    "noise.t1_us": ConfigKey(15.0, "us", "energy relaxation time; inf disables"),
    "noise.quasistatic_sigma_mhz": ConfigKey(4.5, "MHz", "shot-to-shot detuning spread"),
    "noise.pink_amplitude_mhz": ConfigKey(0.0, "MHz", "1/f detuning amplitude at 1 Hz"),
    "noise.pink_exponent": ConfigKey(1.0, "", "1/f spectral exponent, in [0.5, 1.5]"),
    "noise.white_dephasing_mhz": ConfigKey(0.0, "MHz", "extra white dephasing rate"),
    # sweep windows
    "sweeps.voltage.start_mv": ConfigKey(100.0, "mV", "gate sweep start"),
    "sweeps.voltage.stop_mv": ConfigKey(600.0, "mV", "gate sweep end"),
    "sweeps.voltage.n_points": ConfigKey(100, "", "gate sweep points"),
    "sweeps.rabi.start_ns": ConfigKey(0.0, "ns", "pulse-length sweep start"),
    "sweeps.rabi.stop_ns": ConfigKey(400.0, "ns", "pulse-length sweep end"),
    "sweeps.rabi.step_ns": ConfigKey(2.0, "ns", "pulse-length sweep step"),
    "sweeps.t1.start_ns": ConfigKey(0.0, "ns", "relaxation delay sweep start"),
    "sweeps.t1.stop_ns": ConfigKey(45000.0, "ns", "relaxation delay sweep end"),
    "sweeps.t1.step_ns": ConfigKey(1500.0, "ns", "relaxation delay sweep step"),
    "sweeps.ramsey.start_ns": ConfigKey(0.0, "ns", "free-evolution sweep start"),
    "sweeps.ramsey.stop_ns": ConfigKey(150.0, "ns", "free-evolution sweep end"),
    "sweeps.ramsey.step_ns": ConfigKey(2.0, "ns", "free-evolution sweep step"),
    "sweeps.echo.start_ns": ConfigKey(0.0, "ns", "total echo delay sweep start"),
    "sweeps.echo.stop_ns": ConfigKey(600.0, "ns", "total echo delay sweep end"),
    "sweeps.echo.step_ns": ConfigKey(8.0, "ns", "total echo delay sweep step"),
}

_SECTIONS = {path.rsplit(".", 1)[0] for path in KEYS if "." in path}
# intermediate tables like "sweeps" are valid too
_SECTIONS |= {s.split(".")[0] for s in _SECTIONS}


def _check_type(path: str, value: Any) -> Any:
    default = KEYS[path].default
    if isinstance(default, bool):  # not used today, but bool is an int subclass
        if not isinstance(value, bool):
            raise ValidationError(f"{path}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(f"{path}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if not isinstance(value, str):
        raise ValidationError(f"{path}: expected a string, got {value!r}")
    return value


def _walk(table: Mapping[str, Any], prefix: str, flat: dict[str, Any], problems: list[str]):
    for name, value in table.items():
        path = f"{prefix}.{name}" if prefix else name
        if isinstance(value, dict):
            if path in KEYS:
                problems.append(f"{path} is a value, not a section")
            elif path in _SECTIONS:
                _walk(value, path, flat, problems)
            else:
                problems.append(f"unknown config section '{path}'")
        elif path in KEYS:
            try:
                flat[path] = _check_type(path, value)
            except ValidationError as err:
                problems.append(str(err))
        elif path in _SECTIONS:
            problems.append(f"{path} is a section, expected a table")
        else:
            problems.append(f"unknown config key '{path}'")


@dataclass(frozen=True)
class RunConfig:
    """Fully-resolved configuration; values keyed by dotted path."""

    values: Mapping[str, Any]

    def __getitem__(self, path: str) -> Any:
        return self.values[path]

    @property
    def seed(self) -> int:
        return self.values["seed"]

    @property
    def threads(self) -> int:
        return self.values["threads"]

    @property
    def realizations(self) -> int:
        return self.values["realizations"]

    @property
    def outdir(self) -> str:
        configured = self.values["outdir"]
        return configured or os.environ.get(OUTDIR_ENV, "") or "."

    def surface_params(self) -> ZPotentialParams:
        return ZPotentialParams(
            barrier_u_ev=self["surface.barrier_u_ev"],
            cutoff_b_angstrom=self["surface.cutoff_b_angstrom"],
            epsilon=self["surface.epsilon"],
            continuation=self["surface.continuation"],
        )

    def z_grid(self) -> Grid1D:
        return grid_from_bounds(
            self["surface.z_min_nm"], self["surface.z_max_nm"], self["surface.dz_nm"]
        )

    def trap_params(self) -> TrapParams:
        return TrapParams(
            k2_mev_per_um2=self["trap.k2_mev_per_um2"],
            eta_v_per_um=self["trap.eta_v_per_um"],
            zeta_per_um2=self["trap.zeta_per_um2"],
            v_ss_mv=self["trap.v_ss_mv"],
        )

    def y_grid(self) -> Grid1D:
        half_nm = self["trap.y_half_um"] * 1e3
        return grid_from_bounds(-half_nm, half_nm, self["trap.dy_nm"])

    def resonator(self) -> ResonatorParams:
        return ResonatorParams(
            f_r_ghz=self["resonator.f_r_ghz"], kappa_mhz=self["resonator.kappa_mhz"]
        )

    def decoherence(self) -> DecoherenceParams:
        return DecoherenceParams(
            t1_us=self["noise.t1_us"],
            quasistatic_sigma_mhz=self["noise.quasistatic_sigma_mhz"],
            pink_amplitude_mhz=self["noise.pink_amplitude_mhz"],
            pink_exponent=self["noise.pink_exponent"],
            white_dephasing_mhz=self["noise.white_dephasing_mhz"],
        )

    def drive_frequency_ghz(self) -> float:
        configured = self["dynamics.f_drive_ghz"]
        return configured if configured > 0.0 else self["dynamics.f_q_ghz"]

    def voltage_values_mv(self) -> np.ndarray:
        n = self["sweeps.voltage.n_points"]
        if n < 1:
            raise ValidationError("sweeps.voltage.n_points: must be at least 1")
        return np.linspace(
            self["sweeps.voltage.start_mv"], self["sweeps.voltage.stop_mv"], n
        )

    def time_sweep(self, kind: str) -> tuple[float, float, float]:
        base = f"sweeps.{kind}"
        return (self[f"{base}.start_ns"], self[f"{base}.stop_ns"], self[f"{base}.step_ns"])

    def snapshot(self) -> dict:
        """Resolved values as a nested dict (the manifest's config record)."""
        nested: dict[str, Any] = {}
        for path in KEYS:
            parts = path.split(".")
            node = nested
            for part in parts[:-1]:
                node = node.setdefault(part, {})
            node[parts[-1]] = self.values[path]
        return nested


def load_config(path: str | None = None, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Defaults, then the TOML file (if any), then explicit overrides.

    All problems in the file are reported together, each with the full
    dotted path of the offending key.
    """
    values: dict[str, Any] = {p: k.default for p, k in KEYS.items()}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                table = tomllib.load(fh)
        except OSError as err:
            raise ValidationError(f"cannot read config file {path}: {err.strerror}")
        except tomllib.TOMLDecodeError as err:
            raise ValidationError(f"{path}: {err}")
        loaded: dict[str, Any] = {}
        problems: list[str] = []
        _walk(table, "", loaded, problems)
        if problems:
            raise ValidationError("; ".join(problems))
        values.update(loaded)
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = _check_type(key, value)
    return RunConfig(values=values)


def key_listing() -> str:
    """One line per config key, for the CLI help epilog."""
    lines = ["configuration keys (TOML paths; defaults shown):"]
    for path, key in KEYS.items():
        name = f"{path} ({key.units})" if key.units else path
        lines.append(f"  {name:38s} {key.default!r:10} {key.help}")
    return "\n".join(lines)
