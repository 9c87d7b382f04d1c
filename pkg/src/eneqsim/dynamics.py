"""Time-domain qubit protocols: Rabi, relaxation, Ramsey, Hahn echo.

Two-level dynamics in the frame rotating at the drive frequency. The state
is the Bloch vector of the 2x2 density matrix, rho = (I + r.sigma)/2 with
z = +1 the excited state, so P_e = (1 + z)/2 and the ground state is
r = (0, 0, -1). Rectangle-enveloped pulses make every propagator exact in
closed form:

  * a driven step rotates r about (Omega cos phi, Omega sin phi, delta),
    delta = f_q + noise - f_drive,
  * free evolution under constant detuning is a rotation about z,
  * relaxation contracts (x, y) at Gamma_2 = Gamma_1/2 + Gamma_phi and pulls
    z toward the ground state at Gamma_1 = 1/T1,

combined by symmetric splitting (half damp, rotate, half damp), which is
exact when the axis is z (the maps commute) and second order otherwise.
Driven steps never exceed min(1/(50 Omega_R), 1 ns); free evolution under
purely static detuning uses the closed-form propagator in a single step, so
the step bound only matters where accuracy needs it. Trace is 1 by
construction; |r| <= 1 is checked after every segment and a violation
aborts with diagnostics.

Detuning noise has a quasi-static part (one Gaussian draw per realization,
constant within a shot) and a pink part synthesized in the frequency domain
as a Gaussian process: complex-normal bins under the envelope
PSD = A^2 (1 Hz / f)^a (uniform random phases, Rayleigh amplitudes),
sampled every PINK_STEP_NS over the whole sequence so both echo halves see
the same series. A sequence of length T cannot carry bins below 1/T, so
run_protocol folds the band power between f_min = 1/(100 T) and the first
bin into an extra per-shot static draw; within a shot those components are
constant anyway.

Averaging is deterministic for a fixed seed at any thread count: each sweep
point owns one child of the master SeedSequence and draws its realization
batch in a single vectorized call; threads only distribute whole sweep
points, assembled by index.

All segments of a protocol must share one drive frequency; phases are
frame-local and would not survive a frame hop.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NumericError, ValidationError

__all__ = [
    "PINK_STEP_NS",
    "CURVE_CSV_HEADER",
    "DecoherenceParams",
    "PulseSegment",
    "SweepSpec",
    "Protocol",
    "PopulationCurve",
    "generate_protocol",
    "pi_pulse_ns",
    "sample_quasistatic",
    "sample_pink",
    "pink_band_variance",
    "simulate_once",
    "run_protocol",
]

TWO_PI = 2.0 * math.pi

# noise-series sampling step and the hard cap on driven integration steps
PINK_STEP_NS = 1.0
MAX_STEP_NS = 1.0

# |r|^2 may not exceed 1 by more than this (positivity of the density matrix)
NORM_TOL = 1e-6

# rotating-frame validity: warn when Omega_R exceeds this fraction of f_q
FRAME_WARN_FRACTION = 0.1

PROTOCOL_KINDS = ("rabi", "t1", "ramsey", "echo")

SWEEP_VARIABLES = ("t_pulse", "t_delay", "dt")

CURVE_CSV_HEADER = ("sweep_ns", "p_e", "stderr")


@dataclass(frozen=True)
class DecoherenceParams:
    """Relaxation and dephasing channels, all optional.

    t1_us: energy relaxation time (inf disables it). white_dephasing_mhz is
    a pure dephasing rate in inverse microseconds (MHz = 1/us), added to
    Gamma_1/2 in the transverse decay. quasistatic_sigma_mhz is the
    std-dev of the shot-to-shot Gaussian detuning; pink_amplitude_mhz sets
    the 1/f-type spectral density A^2 (1 Hz/f)^a with a = pink_exponent.
    """

    t1_us: float = math.inf
    quasistatic_sigma_mhz: float = 0.0
    pink_amplitude_mhz: float = 0.0
    pink_exponent: float = 1.0
    white_dephasing_mhz: float = 0.0

    def __post_init__(self):
        if not self.t1_us > 0.0:
            raise ValidationError("t1_us must be positive (inf to disable)")
        for name in ("quasistatic_sigma_mhz", "pink_amplitude_mhz", "white_dephasing_mhz"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise ValidationError(f"{name} must be finite and >= 0")
        if self.pink_amplitude_mhz > 0.0 and not 0.5 <= self.pink_exponent <= 1.5:
            raise ValidationError("pink_exponent must lie in [0.5, 1.5]")


@dataclass(frozen=True)
class PulseSegment:
    """One rectangle-enveloped piece of a pulse sequence.

    sweep_frac is the fraction of the protocol's swept time added to the
    base duration when the sweep value is resolved; the two free halves of
    an echo carry 0.5 each so the refocusing pulse stays at the midpoint.
    """

    duration_ns: float
    rabi_mhz: float = 0.0
    f_drive_ghz: float | None = None
    phase_rad: float = 0.0
    sweep_frac: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.duration_ns) and self.duration_ns >= 0.0):
            raise ValidationError("segment duration must be finite and >= 0")
        if not (math.isfinite(self.rabi_mhz) and self.rabi_mhz >= 0.0):
            raise ValidationError("drive amplitude must be finite and >= 0")
        if not (math.isfinite(self.sweep_frac) and self.sweep_frac >= 0.0):
            raise ValidationError("sweep_frac must be finite and >= 0")
        if self.rabi_mhz > 0.0:
            if self.f_drive_ghz is None or not self.f_drive_ghz > 0.0:
                raise ValidationError("driven segment needs a positive drive frequency")


@dataclass(frozen=True)
class SweepSpec:
    """Swept time variable: start/stop/step in ns, endpoint included."""

    variable: str
    start_ns: float
    stop_ns: float
    step_ns: float

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ValidationError(
                f"unknown sweep variable {self.variable!r}; expected one of {SWEEP_VARIABLES}"
            )
        if not (math.isfinite(self.start_ns) and self.start_ns >= 0.0):
            raise ValidationError("sweep start must be finite and >= 0")
        if not self.stop_ns >= self.start_ns:
            raise ValidationError("sweep stop must be >= start")
        if not self.step_ns > 0.0:
            raise ValidationError("sweep step must be positive")

    @property
    def values(self) -> np.ndarray:
        n = int(math.floor((self.stop_ns - self.start_ns) / self.step_ns + 1e-9)) + 1
        return self.start_ns + self.step_ns * np.arange(n)


@dataclass(frozen=True)
class Protocol:
    """Pulse sequence template plus the time variable swept across it."""

    kind: str
    segments: tuple[PulseSegment, ...]
    sweep: SweepSpec

    def __post_init__(self):
        if self.kind not in PROTOCOL_KINDS:
            raise ValidationError(
                f"unknown protocol kind {self.kind!r}; expected one of {PROTOCOL_KINDS}"
            )
        if not self.segments:
            raise ValidationError("protocol needs at least one segment")
        object.__setattr__(self, "segments", tuple(self.segments))
        if self.kind == "echo":
            swept = [
                (i, s) for i, s in enumerate(self.segments) if s.sweep_frac > 0.0
            ]
            if (
                len(swept) != 2
                or swept[0][1].sweep_frac != swept[1][1].sweep_frac
                or swept[1][0] - swept[0][0] != 2
                or self.segments[swept[0][0] + 1].rabi_mhz == 0.0
            ):
                raise ValidationError(
                    "echo requires two equal swept halves separated by one refocusing pulse"
                )

    def resolve(self, sweep_ns: float) -> tuple[PulseSegment, ...]:
        """Concrete segment list at one sweep value."""
        if not (math.isfinite(sweep_ns) and sweep_ns >= 0.0):
            raise ValidationError("sweep value must be finite and >= 0")
        return tuple(
            PulseSegment(
                duration_ns=s.duration_ns + s.sweep_frac * sweep_ns,
                rabi_mhz=s.rabi_mhz,
                f_drive_ghz=s.f_drive_ghz,
                phase_rad=s.phase_rad,
            )
            for s in self.segments
        )


def pi_pulse_ns(rabi_mhz: float) -> float:
    """Duration of a pi pulse, half a Rabi period: 500/Omega_R ns."""
    if not rabi_mhz > 0.0:
        raise ValidationError("drive amplitude must be positive")
    return 500.0 / rabi_mhz


def generate_protocol(
    kind: str,
    rabi_mhz: float,
    f_drive_ghz: float,
    sweep_stop_ns: float,
    sweep_step_ns: float,
    sweep_start_ns: float = 0.0,
) -> Protocol:
    """Canonical sequence for one protocol kind.

    rabi: one pulse of swept length. t1: pi pulse, swept delay. ramsey:
    pi/2, swept delay, pi/2 (same phase, so P_e starts at 1). echo: pi/2,
    delay/2, pi, delay/2, pi/2 with the closing pulse phase-inverted so a
    perfectly refocused shot also reads P_e = 1.
    """
    t_pi = pi_pulse_ns(rabi_mhz)

    def pulse(length, phase=0.0):
        return PulseSegment(length, rabi_mhz, f_drive_ghz, phase)

    def free(frac):
        return PulseSegment(0.0, sweep_frac=frac)

    if kind == "rabi":
        segments = (PulseSegment(0.0, rabi_mhz, f_drive_ghz, 0.0, sweep_frac=1.0),)
        variable = "t_pulse"
    elif kind == "t1":
        segments = (pulse(t_pi), free(1.0))
        variable = "t_delay"
    elif kind == "ramsey":
        segments = (pulse(0.5 * t_pi), free(1.0), pulse(0.5 * t_pi))
        variable = "dt"
    elif kind == "echo":
        segments = (
            pulse(0.5 * t_pi),
            free(0.5),
            pulse(t_pi),
            free(0.5),
            pulse(0.5 * t_pi, phase=math.pi),
        )
        variable = "dt"
    else:
        raise ValidationError(
            f"unknown protocol kind {kind!r}; expected one of {PROTOCOL_KINDS}"
        )
    sweep = SweepSpec(variable, sweep_start_ns, sweep_stop_ns, sweep_step_ns)
    return Protocol(kind=kind, segments=segments, sweep=sweep)


# --- noise sampling ---------------------------------------------------------


def sample_quasistatic(sigma_mhz: float, n_realizations: int, rng) -> np.ndarray:
    """Shot-to-shot Gaussian detunings, constant within a realization."""
    if not (math.isfinite(sigma_mhz) and sigma_mhz >= 0.0):
        raise ValidationError("sigma must be finite and >= 0")
    if n_realizations < 1:
        raise ValidationError("need at least one realization")
    if sigma_mhz == 0.0:
        return np.zeros(n_realizations)
    return np.random.default_rng(rng).normal(0.0, sigma_mhz, n_realizations)


def pink_band_variance(
    amplitude_mhz: float, exponent: float, f_lo_mhz: float, f_hi_mhz: float
) -> float:
    """Integral of A^2 (1 Hz / f)^a over [f_lo, f_hi], in MHz^2."""
    if not (math.isfinite(amplitude_mhz) and amplitude_mhz >= 0.0):
        raise ValidationError("amplitude must be finite and >= 0")
    if not (0.0 < f_lo_mhz < f_hi_mhz):
        raise ValidationError("need 0 < f_lo < f_hi")
    a, b = f_lo_mhz * 1e6, f_hi_mhz * 1e6
    if exponent == 1.0:
        integral = math.log(b / a)
    else:
        integral = (b ** (1.0 - exponent) - a ** (1.0 - exponent)) / (1.0 - exponent)
    return amplitude_mhz**2 * integral


def sample_pink(
    amplitude_mhz: float,
    exponent: float,
    f_min_mhz: float,
    f_max_mhz: float,
    n_steps: int,
    rng,
    n_series: int = 1,
) -> np.ndarray:
    """Detuning series with one-sided PSD A^2 (1 Hz / f)^exponent, in MHz.

    Frequency-domain synthesis of a stationary Gaussian process:
    complex-normal coefficients scaled by the power-law envelope on the
    band [f_min, f_max), inverse FFT. The sampling step is set by the upper
    band edge, dt = 1/(2 f_max). Returns shape (n_series, n_steps). The
    periodogram of a realization scatters around the target law and its
    expectation sits on it, so slope checks should average a few series.

    Bins exist only at multiples of 1/(n_steps dt); band power requested
    below the first bin cannot be represented here, so fold it into a
    static per-shot offset via pink_band_variance.
    """
    if not (math.isfinite(amplitude_mhz) and amplitude_mhz >= 0.0):
        raise ValidationError("amplitude must be finite and >= 0")
    if not 0.5 <= exponent <= 1.5:
        raise ValidationError("exponent must lie in [0.5, 1.5]")
    if not (0.0 < f_min_mhz < f_max_mhz):
        raise ValidationError(
            f"degenerate band: need 0 < f_min < f_max, got [{f_min_mhz}, {f_max_mhz}] MHz"
        )
    if n_steps < 2:
        raise ValidationError("need at least two samples")
    if n_series < 1:
        raise ValidationError("need at least one series")
    if amplitude_mhz == 0.0:
        return np.zeros((n_series, n_steps))

    dt_s = 1e-6 / (2.0 * f_max_mhz)
    df_hz = 1.0 / (n_steps * dt_s)
    f_hz = np.arange(1, n_steps // 2 + 1) * df_hz
    psd = amplitude_mhz**2 * (1.0 / f_hz) ** exponent
    mag = n_steps * np.sqrt(0.5 * psd * df_hz)
    mag[(f_hz < f_min_mhz * 1e6) | (f_hz > f_max_mhz * 1e6)] = 0.0
    if n_steps % 2 == 0:
        mag[-1] = 0.0  # Nyquist coefficient must be real; drop the edge bin
    gen = np.random.default_rng(rng)
    z = gen.standard_normal((n_series, f_hz.size)) + 1j * gen.standard_normal(
        (n_series, f_hz.size)
    )
    spectrum = np.zeros((n_series, n_steps // 2 + 1), dtype=complex)
    spectrum[:, 1:] = mag * (z / math.sqrt(2.0))
    return np.fft.irfft(spectrum, n=n_steps)


# --- Bloch propagation ------------------------------------------------------


def _damp(r: np.ndarray, e1: float, e2: float) -> None:
    if e1 == 1.0 and e2 == 1.0:
        return
    r[:, 0] *= e2
    r[:, 1] *= e2
    r[:, 2] = -1.0 + (r[:, 2] + 1.0) * e1


def _rotate(r: np.ndarray, wx: float, wy: float, wz: np.ndarray, dt: float) -> None:
    w = np.sqrt(wx * wx + wy * wy + wz * wz)
    theta = w * dt
    c = np.cos(theta)
    s = np.sin(theta)
    inv = np.divide(1.0, w, out=np.zeros_like(w), where=w > 0.0)
    ax = wx * inv
    ay = wy * inv
    az = wz * inv
    x = r[:, 0]
    y = r[:, 1]
    z = r[:, 2]
    k = (1.0 - c) * (ax * x + ay * y + az * z)
    xn = c * x + s * (ay * z - az * y) + k * ax
    yn = c * y + s * (az * x - ax * z) + k * ay
    zn = c * z + s * (ax * y - ay * x) + k * az
    r[:, 0] = xn
    r[:, 1] = yn
    r[:, 2] = zn


def _free_exact(r: np.ndarray, delta_mhz: np.ndarray, dur_ns: float, g1: float, g2: float) -> None:
    phi = TWO_PI * 1e-3 * delta_mhz * dur_ns
    c = np.cos(phi)
    s = np.sin(phi)
    x = r[:, 0]
    y = r[:, 1]
    xn = c * x - s * y
    yn = s * x + c * y
    e2 = math.exp(-g2 * dur_ns)
    r[:, 0] = xn * e2
    r[:, 1] = yn * e2
    r[:, 2] = -1.0 + (r[:, 2] + 1.0) * math.exp(-g1 * dur_ns)


def _frame_frequency(segments: Sequence[PulseSegment], f_q_ghz: float) -> float:
    freqs = {s.f_drive_ghz for s in segments if s.rabi_mhz > 0.0}
    if len(freqs) > 1:
        raise ValidationError(
            "segments drive at different frequencies; a single rotating frame is required"
        )
    return freqs.pop() if freqs else f_q_ghz


def _warn_if_frame_invalid(segments: Sequence[PulseSegment], f_q_ghz: float) -> None:
    fastest = max((s.rabi_mhz for s in segments), default=0.0)
    if fastest > FRAME_WARN_FRACTION * f_q_ghz * 1e3:
        warnings.warn(
            f"Omega_R = {fastest:g} MHz is not small next to f_q = {f_q_ghz:g} GHz; "
            "rotating-frame dynamics are marginal",
            stacklevel=3,
        )


def _evolve(
    segments: Sequence[PulseSegment],
    f_q_ghz: float,
    frame_ghz: float,
    dec: DecoherenceParams,
    delta_qs_mhz: np.ndarray,
    pink_mhz: np.ndarray | None,
    pink_dt_ns: float,
) -> np.ndarray:
    g1 = 0.0 if math.isinf(dec.t1_us) else 1e-3 / dec.t1_us
    g2 = 0.5 * g1 + 1e-3 * dec.white_dephasing_mhz
    n = delta_qs_mhz.shape[0]
    r = np.zeros((n, 3))
    r[:, 2] = -1.0
    t_abs = 0.0
    for seg in segments:
        dur = seg.duration_ns
        if dur <= 0.0:
            continue
        if seg.rabi_mhz == 0.0 and pink_mhz is None:
            delta = (f_q_ghz - frame_ghz) * 1e3 + delta_qs_mhz
            _free_exact(r, delta, dur, g1, g2)
        else:
            if seg.rabi_mhz > 0.0:
                dt_cap = min(MAX_STEP_NS, 20.0 / seg.rabi_mhz)
                base = (f_q_ghz - seg.f_drive_ghz) * 1e3
                wx = TWO_PI * 1e-3 * seg.rabi_mhz * math.cos(seg.phase_rad)
                wy = TWO_PI * 1e-3 * seg.rabi_mhz * math.sin(seg.phase_rad)
            else:
                dt_cap = pink_dt_ns
                base = (f_q_ghz - frame_ghz) * 1e3
                wx = wy = 0.0
            n_steps = max(1, math.ceil(dur / dt_cap))
            dt = dur / n_steps
            e1h = math.exp(-0.5 * g1 * dt)
            e2h = math.exp(-0.5 * g2 * dt)
            last = pink_mhz.shape[1] - 1 if pink_mhz is not None else 0
            for k in range(n_steps):
                delta = base + delta_qs_mhz
                if pink_mhz is not None:
                    idx = min(int((t_abs + (k + 0.5) * dt) / pink_dt_ns), last)
                    delta = delta + pink_mhz[:, idx]
                _damp(r, e1h, e2h)
                _rotate(r, wx, wy, TWO_PI * 1e-3 * delta, dt)
                _damp(r, e1h, e2h)
        t_abs += dur
        worst = float(np.max(np.sum(r * r, axis=1)))
        if worst > 1.0 + NORM_TOL:
            raise NumericError(
                f"Bloch norm grew to {math.sqrt(worst):.9f} at t = {t_abs:g} ns; "
                "propagation is unstable"
            )
    return 0.5 * (1.0 + r[:, 2])


def simulate_once(
    protocol: Protocol,
    sweep_ns: float,
    f_q_ghz: float,
    decoherence: DecoherenceParams | None = None,
    static_detuning_mhz: float = 0.0,
    pink_series_mhz: np.ndarray | None = None,
    pink_step_ns: float = PINK_STEP_NS,
) -> float:
    """Final P_e of one noise realization at one sweep value.

    The realization is (static_detuning_mhz, pink_series_mhz); leave both
    at their defaults for noiseless dynamics.
    """
    dec = decoherence if decoherence is not None else DecoherenceParams()
    _warn_if_frame_invalid(protocol.segments, f_q_ghz)
    frame = _frame_frequency(protocol.segments, f_q_ghz)
    segments = protocol.resolve(sweep_ns)
    pink = None
    if pink_series_mhz is not None:
        pink = np.atleast_2d(np.asarray(pink_series_mhz, dtype=float))
    p = _evolve(
        segments, f_q_ghz, frame, dec, np.array([float(static_detuning_mhz)]), pink, pink_step_ns
    )
    return float(np.clip(p, 0.0, 1.0)[0])


@dataclass(frozen=True)
class PopulationCurve:
    """Monte-Carlo averaged excited-state population over the sweep."""

    kind: str
    sweep_ns: np.ndarray
    p_e: np.ndarray
    stderr: np.ndarray
    n_realizations: int
    seed: int

    def csv_rows(self):
        for t, p, se in zip(self.sweep_ns, self.p_e, self.stderr):
            yield (float(t), float(p), float(se))

    def to_csv(self, path) -> None:
        from .fileio import write_csv

        write_csv(path, CURVE_CSV_HEADER, self.csv_rows())


def run_protocol(
    protocol: Protocol,
    f_q_ghz: float,
    decoherence: DecoherenceParams | None = None,
    n_realizations: int = 5000,
    seed: int = 0,
    threads: int = 1,
) -> PopulationCurve:
    """Average the protocol over noise realizations at every sweep value.

    Bit-exact reproducible for fixed (seed, n_realizations) at any thread
    count: sweep point i always consumes the i-th spawned child seed.
    """
    if n_realizations < 1:
        raise ValidationError("need at least one realization")
    dec = decoherence if decoherence is not None else DecoherenceParams()
    _warn_if_frame_invalid(protocol.segments, f_q_ghz)
    frame = _frame_frequency(protocol.segments, f_q_ghz)
    sweep = protocol.sweep.values
    children = np.random.SeedSequence(seed).spawn(sweep.size)

    def point(i: int) -> tuple[float, float]:
        rng = np.random.default_rng(children[i])
        segments = protocol.resolve(float(sweep[i]))
        delta_qs = sample_quasistatic(dec.quasistatic_sigma_mhz, n_realizations, rng)
        pink = None
        if dec.pink_amplitude_mhz > 0.0:
            total = sum(s.duration_ns for s in segments)
            if total > 0.0:
                n_steps = max(2, math.ceil(total / PINK_STEP_NS) + 1)
                f_min = 10.0 / total  # 1/(100 T) in MHz for T in ns
                f_max = 500.0 / PINK_STEP_NS
                pink = sample_pink(
                    dec.pink_amplitude_mhz,
                    dec.pink_exponent,
                    f_min_mhz=f_min,
                    f_max_mhz=f_max,
                    n_steps=n_steps,
                    rng=rng,
                    n_series=n_realizations,
                )
                # band power below the first representable bin acts as a
                # constant within a shot; carry it in the static draw
                first_bin = 1e3 / (n_steps * PINK_STEP_NS)
                if first_bin > f_min:
                    var = pink_band_variance(
                        dec.pink_amplitude_mhz, dec.pink_exponent, f_min, first_bin
                    )
                    delta_qs = delta_qs + rng.normal(0.0, math.sqrt(var), n_realizations)
        p = np.clip(
            _evolve(segments, f_q_ghz, frame, dec, delta_qs, pink, PINK_STEP_NS), 0.0, 1.0
        )
        mean = float(p.mean())
        se = float(p.std(ddof=1) / math.sqrt(n_realizations)) if n_realizations > 1 else 0.0
        return mean, se

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            stats = list(pool.map(point, range(sweep.size)))
    else:
        stats = [point(i) for i in range(sweep.size)]
    p_e = np.array([m for m, _ in stats])
    stderr = np.array([se for _, se in stats])
    return PopulationCurve(
        kind=protocol.kind,
        sweep_ns=sweep,
        p_e=p_e,
        stderr=stderr,
        n_realizations=n_realizations,
        seed=seed,
    )
