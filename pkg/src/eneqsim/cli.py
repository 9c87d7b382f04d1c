"""Command-line front end.

Each invocation runs one command, writes plot-ready CSV/JSON into the output
directory (atomically, with floats in shortest round-trip form), and records
a manifest with the resolved config and a sha256 per output, so identical
config + seed reproduce identical bytes at any thread count.

Exit codes: 0 success, 2 invalid config or input, 3 numeric failure,
4 fit did not converge. Commands never plot.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import __version__
from .config import OUTDIR_ENV, RunConfig, key_listing, load_config
from .cqed import (
    coupling_model_from_dipoles,
    dispersive_shift_multilevel,
    two_tone_map,
    write_two_tone_csv,
)
from .dynamics import PROTOCOL_KINDS, generate_protocol, run_protocol
from .errors import NumericError, ValidationError
from .fileio import read_csv_columns, write_csv, write_json
from .fitting import (
    FitResult,
    extract_qubit_line,
    fit_decay,
    fit_lorentzian,
    fit_rabi_oscillation,
    fit_vacuum_rabi,
    select_decay_family,
)
from .inout import avoided_crossing_map, transmission_trace
from .manifest import MANIFEST_NAME, build_manifest, verify_manifest, write_manifest
from .quantum1d import (
    build_y_potential,
    build_z_potential,
    dipole_matrix_elements,
    qubit_spectrum_vs_voltage,
    solve_schrodinger_1d,
    transition_set,
    voltage_for_frequency,
    write_spectrum_csv,
)

# cmd_fit model name -> (x column, y column)
FIT_COLUMNS = {
    "lorentzian": ("f_p_ghz", "s21_sq"),
    "vacuum_rabi": ("f_p_ghz", "s21_sq"),
    "exp": ("sweep_ns", "p_e"),
    "gaussian": ("sweep_ns", "p_e"),
    "stretched": ("sweep_ns", "p_e"),
    "rabi_oscillation": ("sweep_ns", "p_e"),
    "qubit_line": ("f_s_ghz", "phase_deg"),
}


def _configure(args: argparse.Namespace) -> RunConfig:
    overrides = {
        "seed": args.seed,
        "outdir": args.out,
        "threads": args.threads,
        "realizations": args.realizations,
    }
    if getattr(args, "vrg", None) is not None:
        overrides["trap.v_rg_mv"] = args.vrg
    return load_config(args.config, overrides)


def _finish(
    command: str,
    cfg: RunConfig,
    outdir: str,
    outputs: list[str],
    started: float,
    records: dict[str, dict] | None = None,
):
    manifest = build_manifest(
        command,
        __version__,
        cfg.seed,
        cfg.snapshot(),
        outdir,
        outputs,
        {"total": round(time.time() - started, 6)},
        records=records,
    )
    write_manifest(manifest, os.path.join(outdir, MANIFEST_NAME))


def _print_fit(result: FitResult) -> None:
    for name, value in result.params.items():
        err = result.stderr.get(name, float("inf"))
        print(f"  {name} = {value:.6g} +/- {err:.3g}")


def _solved_trap_f01(cfg: RunConfig, v_rg_mv: float) -> float:
    pot = build_y_potential(cfg.y_grid(), cfg.trap_params(), v_rg_mv)
    return transition_set(solve_schrodinger_1d(pot, n_states=3)).f01_ghz


def _pair_keys(values: dict[tuple[int, int], float]) -> dict[str, float]:
    return {f"{i}-{j}": val for (i, j), val in values.items()}


def _dispersive_record(cfg: RunConfig, v_mv: np.ndarray, f01_ghz: np.ndarray) -> dict | None:
    """Calibrated multilevel dispersive chain at the configured detuning.

    The operating point sits on the branch above the sweet spot; if f_01
    never reaches f_r + record_delta there, no record is embedded.
    """
    f_r = cfg["resonator.f_r_ghz"]
    target = f_r + cfg["twotone.record_delta_mhz"] * 1e-3
    i_min = int(np.argmin(f01_ghz))
    rest = f01_ghz[i_min:] - target
    trap, grid = cfg.trap_params(), cfg.y_grid()
    zeros = np.nonzero(rest == 0.0)[0]
    if zeros.size:
        v_op = float(v_mv[i_min + zeros[0]])
    else:
        flips = np.nonzero(rest[:-1] * rest[1:] < 0.0)[0]
        if not flips.size:
            return None
        k = i_min + int(flips[0])
        v_op = voltage_for_frequency(trap, target, v_mv[k], v_mv[k + 1], grid=grid)
    sol = solve_schrodinger_1d(build_y_potential(grid, trap, v_op), n_states=3)
    model = coupling_model_from_dipoles(
        cfg["coupling.g01_mhz"], dipole_matrix_elements(sol), cfg["coupling.gamma_mhz"]
    )
    result = dispersive_shift_multilevel(
        model.g_mhz, transition_set(sol).f_ghz, f_r, cfg["resonator.kappa_mhz"]
    )
    return {
        "v_rg_mv": v_op,
        "zero_point_field_v_per_m": model.zero_point_field_v_per_m,
        "g_mhz": _pair_keys(dict(model.g_mhz)),
        "chi_mhz": _pair_keys(dict(result.chi_mhz)),
        "detunings_mhz": _pair_keys(dict(result.detunings_mhz)),
        "chi_total_mhz": result.chi_total_mhz,
        "phase_deg": result.phase_deg,
    }


# --- commands -----------------------------------------------------------------


def cmd_solve(args: argparse.Namespace) -> int:
    cfg = _configure(args)
    outdir, started = cfg.outdir, time.time()
    if args.model == "z":
        grid = cfg.z_grid()
        potential = build_z_potential(grid, cfg.surface_params())
        axis = "z_nm"
    else:
        grid = cfg.y_grid()
        potential = build_y_potential(grid, cfg.trap_params(), cfg["trap.v_rg_mv"])
        axis = "y_nm"
    solution = solve_schrodinger_1d(potential, n_states=3)
    trans = transition_set(solution)
    dip = dipole_matrix_elements(solution)

    levels_name = f"{args.model}_levels.csv"
    waves_name = f"{args.model}_wavefunctions.csv"
    write_csv(
        os.path.join(outdir, levels_name),
        ("state", "energy_mev"),
        ((i, float(e)) for i, e in enumerate(solution.energies_mev)),
    )
    psi = solution.wavefunctions
    write_csv(
        os.path.join(outdir, waves_name),
        (axis, "psi0", "psi1", "psi2"),
        zip(grid.positions_nm, psi[0], psi[1], psi[2]),
    )
    _finish(f"solve {args.model}", cfg, outdir, [levels_name, waves_name], started)

    e = solution.energies_mev
    print(f"E0 = {e[0]:.4f} meV")
    print(f"E1 - E0 = {e[1] - e[0]:.4f} meV")
    print(f"f_01 = {trans.f01_ghz:.4f} GHz")
    print(f"alpha = {trans.alpha_mhz:+.2f} MHz")
    print(f"d01 = {dip[0, 1]:.3f} nm")
    return 0


def _crossing_voltages(v_mv: np.ndarray, detuning: np.ndarray) -> list[float]:
    found = [float(v_mv[i]) for i in np.nonzero(detuning == 0.0)[0]]
    for i in np.nonzero(np.diff(np.signbit(detuning)))[0]:
        if detuning[i] == 0.0 or detuning[i + 1] == 0.0:
            continue  # exact hits already collected
        frac = detuning[i] / (detuning[i] - detuning[i + 1])
        found.append(float(v_mv[i] + frac * (v_mv[i + 1] - v_mv[i])))
    return sorted(found)


def cmd_spectrum_map(args: argparse.Namespace) -> int:
    cfg = _configure(args)
    outdir, started = cfg.outdir, time.time()
    rows = qubit_spectrum_vs_voltage(
        cfg.trap_params(), cfg.voltage_values_mv(), grid=cfg.y_grid(), threads=cfg.threads
    )
    outputs = ["spectrum.csv"]
    write_spectrum_csv(rows, os.path.join(outdir, "spectrum.csv"))

    good = [r for r in rows if r.f01_ghz is not None]
    if not good:
        raise NumericError("no voltage in the sweep produced a solvable spectrum")
    v = np.array([r.v_rg_mv for r in good])
    f01 = np.array([r.f01_ghz for r in good])
    f_r = cfg["resonator.f_r_ghz"]

    records = {}
    if args.two_tone:
        half = cfg["twotone.span_mhz"]
        dfs = np.linspace(-half, half, cfg["twotone.n_points"])
        tt_rows = two_tone_map(
            v,
            f01,
            cfg["coupling.g01_mhz"],
            cfg.resonator(),
            cfg["coupling.gamma_mhz"],
            cfg["twotone.s"],
            dfs,
        )
        write_two_tone_csv(tt_rows, os.path.join(outdir, "two_tone.csv"))
        outputs.append("two_tone.csv")
        record = _dispersive_record(cfg, v, f01)
        if record is not None:
            records["dispersive"] = record
    _finish("spectrum-map", cfg, outdir, outputs, started, records)

    i_min = int(np.argmin(f01))
    print(f"sweet spot: V_rg = {v[i_min]:.2f} mV (f_01 minimum {f01[i_min]:.4f} GHz)")
    if records:
        rec = records["dispersive"]
        print(
            f"dispersive record at V_rg = {rec['v_rg_mv']:.2f} mV: "
            f"chi_total = {rec['chi_total_mhz']:.4f} MHz, "
            f"phase = {rec['phase_deg']:+.1f} deg"
        )
    elif args.two_tone:
        delta = cfg["twotone.record_delta_mhz"]
        print(
            "dispersive record skipped: f_01 does not reach "
            f"f_r {delta:+.0f} MHz above the sweet spot"
        )
    crossings = _crossing_voltages(v, f01 - f_r)
    if crossings:
        listed = ", ".join(f"{x:.2f} mV" for x in crossings)
        print(f"f_01 = f_r ({f_r:.4f} GHz) at: {listed}")
    else:
        print(f"f_01 never reaches f_r = {f_r:.4f} GHz in the swept range")
    return 0


def cmd_rabi_split(args: argparse.Namespace) -> int:
    cfg = _configure(args)
    outdir, started = cfg.outdir, time.time()
    resonator = cfg.resonator()
    g01 = cfg["coupling.g01_mhz"]
    gamma = cfg["coupling.gamma_mhz"]

    rows = qubit_spectrum_vs_voltage(
        cfg.trap_params(), cfg.voltage_values_mv(), grid=cfg.y_grid(), threads=cfg.threads
    )
    good = [r for r in rows if r.f01_ghz is not None]
    if len(good) < 2:
        raise NumericError("fewer than two solvable voltages in the sweep")
    v = np.array([r.v_rg_mv for r in good])
    f01 = np.array([r.f01_ghz for r in good])

    half = cfg["rabisplit.probe_span_mhz"]
    dfs = np.linspace(-half, half, cfg["rabisplit.n_probe"])
    cmap = avoided_crossing_map(v, f01, resonator, g01, gamma, dfs)
    cmap.to_csv(os.path.join(outdir, "crossing_map.csv"))
    write_json(os.path.join(outdir, "crossing_map.json"), cmap.sidecar())

    # re-solve at the interpolated crossing for the on-resonance trace
    f_q_cross = _solved_trap_f01(cfg, cmap.crossing_v_rg_mv)
    trace = transmission_trace(
        resonator.f_r_ghz + dfs * 1e-3, resonator, f_q_cross, g01, gamma
    )
    trace.to_csv(os.path.join(outdir, "crossing_trace.csv"))
    fit = fit_vacuum_rabi(trace.f_p_ghz, trace.s21_sq, resonator)
    write_json(os.path.join(outdir, "rabi_fit.json"), fit.to_json_dict())
    _finish(
        "rabi-split",
        cfg,
        outdir,
        ["crossing_map.csv", "crossing_map.json", "crossing_trace.csv", "rabi_fit.json"],
        started,
    )

    print(f"crossing at V_rg = {cmap.crossing_v_rg_mv:.2f} mV")
    if not fit.converged:
        print(f"single peak: {fit.message}")
        return 4
    print(f"g = {fit.params['g_mhz']:.3f} +/- {fit.stderr['g_mhz']:.3g} MHz")
    print(f"gamma = {fit.params['gamma_mhz']:.3f} +/- {fit.stderr['gamma_mhz']:.3g} MHz")
    print(f"kappa = {resonator.kappa_mhz:.3f} MHz (held fixed)")
    return 0


def cmd_timedomain(args: argparse.Namespace) -> int:
    cfg = _configure(args)
    outdir, started = cfg.outdir, time.time()
    kind = args.kind
    start, stop, step = cfg.time_sweep(kind)
    protocol = generate_protocol(
        kind, cfg["dynamics.rabi_mhz"], cfg.drive_frequency_ghz(), stop, step, start
    )
    curve = run_protocol(
        protocol,
        cfg["dynamics.f_q_ghz"],
        cfg.decoherence(),
        n_realizations=cfg.realizations,
        seed=cfg.seed,
        threads=cfg.threads,
    )
    curve_name = f"{kind}_curve.csv"
    fit_name = f"{kind}_fit.json"
    curve.to_csv(os.path.join(outdir, curve_name))
    outputs = [curve_name, fit_name]

    if kind == "rabi":
        fit = fit_rabi_oscillation(curve.sweep_ns, curve.p_e)
        write_json(os.path.join(outdir, fit_name), fit.to_json_dict())
        _finish(f"timedomain {kind}", cfg, outdir, outputs, started)
        if not fit.converged:
            print(f"oscillation fit did not converge: {fit.message}")
            return 4
        print(f"Omega_R = {fit.params['freq_mhz']:.4f} MHz")
        tau = fit.params["tau_ns"]
        window = float(curve.sweep_ns[-1] - curve.sweep_ns[0])
        if tau > 100.0 * window:
            print(f"envelope tau not resolved within the {window:.0f} ns window")
        else:
            print(f"envelope tau = {tau:.1f} ns")
        return 0

    # decay protocols: a flat curve is a result (nothing decayed), not an error
    drop = float(curve.p_e[0] - curve.p_e[-1])
    floor = 5.0 * float(np.median(curve.stderr)) if curve.n_realizations > 1 else 0.0
    if drop <= max(floor, 0.02):
        payload = {
            "model": None,
            "converged": False,
            "message": "no decay resolved over the sweep window",
        }
        write_json(os.path.join(outdir, fit_name), payload)
        _finish(f"timedomain {kind}", cfg, outdir, outputs, started)
        print(f"no decay resolved over the sweep window (P_e drop {drop:.4f})")
        return 0

    if kind == "t1":
        fit = fit_decay(curve.sweep_ns, curve.p_e, "exp")
    else:
        fit = select_decay_family(curve.sweep_ns, curve.p_e, ("exp", "gaussian", "stretched"))
    write_json(os.path.join(outdir, fit_name), fit.to_json_dict())
    _finish(f"timedomain {kind}", cfg, outdir, outputs, started)

    if not fit.converged:
        print(f"decay fit did not converge: {fit.message}")
        return 4
    t = fit.params["time"]
    if kind == "t1":
        print(f"T1 = {t * 1e-3:.3f} us")
    else:
        label = "T2*" if kind == "ramsey" else "T2E"
        print(f"{label} = {t:.2f} ns ({fit.family} decay)")
        if fit.family == "stretched":
            print(f"stretch exponent = {fit.params['exponent']:.3f}")
    return 0


def cmd_fit(args: argparse.Namespace) -> int:
    cfg = _configure(args)
    outdir, started = cfg.outdir, time.time()
    x_col, y_col = FIT_COLUMNS[args.model]
    cols = read_csv_columns(args.file, (x_col, y_col))
    x, y = cols[x_col], cols[y_col]

    if args.model == "lorentzian":
        fit = fit_lorentzian(x, y)
    elif args.model == "vacuum_rabi":
        fit = fit_vacuum_rabi(x, y, cfg.resonator())
    elif args.model in ("exp", "gaussian", "stretched"):
        fit = fit_decay(x, y, args.model)
    elif args.model == "rabi_oscillation":
        fit = fit_rabi_oscillation(x, y)
    else:
        fit = extract_qubit_line(x, y)

    stem = os.path.splitext(os.path.basename(args.file))[0]
    fit_name = f"{stem}_fit.json"
    write_json(os.path.join(outdir, fit_name), fit.to_json_dict())
    _finish(f"fit {args.model}", cfg, outdir, [fit_name], started)

    print(f"model: {fit.model}" + (f" ({fit.family} family)" if fit.family else ""))
    _print_fit(fit)
    if not fit.converged:
        print(f"fit did not converge: {fit.message}")
        return 4
    return 0


def cmd_manifest_verify(args: argparse.Namespace) -> int:
    rows = verify_manifest(args.path)
    for row in rows:
        print(f"{row.status:9s} {row.name}")
    bad = [r for r in rows if r.status != "ok"]
    if bad:
        print(f"{len(bad)} of {len(rows)} outputs differ from the manifest")
        return 1
    print(f"all {len(rows)} outputs match")
    return 0


# --- argument parsing -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML config file")
    common.add_argument("--seed", type=int, metavar="N", help="override the config seed")
    common.add_argument(
        "--out", metavar="DIR", help=f"output directory (default: config, ${OUTDIR_ENV}, or '.')"
    )
    common.add_argument("--threads", type=int, metavar="N", help="override worker thread count")
    common.add_argument(
        "--realizations", type=int, metavar="N", help="override noise realization count"
    )

    parser = argparse.ArgumentParser(
        prog="eneqsim",
        description="Simulate and fit a single-electron qubit on solid neon.",
        epilog=key_listing(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser(
        "solve", parents=[common], help="eigenstates of the vertical (z) or in-plane (y) model"
    )
    p.add_argument("model", choices=("z", "y"))
    p.add_argument("--vrg", type=float, metavar="MV", help="gate bias in mV (y model)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("spectrum-map", parents=[common], help="qubit spectrum vs gate voltage")
    p.add_argument(
        "--two-tone", action="store_true", help="also write the simulated two-tone phase map"
    )
    p.set_defaults(func=cmd_spectrum_map)

    p = sub.add_parser(
        "rabi-split",
        parents=[common],
        help="avoided-crossing map and on-resonance splitting fit",
    )
    p.set_defaults(func=cmd_rabi_split)

    p = sub.add_parser("timedomain", parents=[common], help="simulate and fit a pulse protocol")
    p.add_argument("kind", choices=PROTOCOL_KINDS)
    p.set_defaults(func=cmd_timedomain)

    p = sub.add_parser("fit", parents=[common], help="fit a CSV trace with a named model")
    p.add_argument("file", help="input CSV; expected columns depend on the model")
    p.add_argument("--model", required=True, choices=tuple(FIT_COLUMNS))
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("manifest", help="reproducibility manifest utilities")
    msub = p.add_subparsers(dest="action", required=True, metavar="ACTION")
    v = msub.add_parser("verify", help="check recorded output hashes against files on disk")
    v.add_argument("path", help="manifest.json to verify")
    v.set_defaults(func=cmd_manifest_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except NumericError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
