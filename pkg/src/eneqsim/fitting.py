"""Damped Gauss-Newton fitters for every extracted quantity.

One engine (scipy's trust-region least squares, which checks the gradient
before stepping so restarting from an optimum terminates immediately), a
registry of models, and one convention: parameters that are physically
positive (widths, couplings, times) are optimized as logarithms, so no
bound constraints are needed. Standard errors come from the Gauss-Newton
covariance (J^T J)^-1 * RSS/(N - k) in log space, mapped back through the
chain rule.

Model selection (decay families, split vs. bare resonance) uses
AIC = N ln(RSS/N) + 2k on equal data; the preferred family is whatever
minimizes it.

A fit never fails silently: running out of iterations, a flat or
single-peaked trace, or a missing spectral peak all come back as a
FitResult with converged=False and a message saying why, so callers can
map it to an exit status. Initialization is always derived from the data
(peak location and width, spectral peak, 1/e crossing), never required
from the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import optimize
from scipy.signal import find_peaks

from .errors import ValidationError
from .inout import ResonatorParams, s21_coupled

__all__ = [
    "ModelSpec",
    "MODELS",
    "FitProblem",
    "FitResult",
    "least_squares",
    "select_by_aic",
    "fit_lorentzian",
    "fit_vacuum_rabi",
    "fit_decay",
    "select_decay_family",
    "fit_rabi_oscillation",
    "extract_qubit_line",
    "DECAY_FAMILIES",
]


# --- model registry -----------------------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    """One fittable model: y = fn(x, params, fixed)."""

    name: str
    param_names: tuple[str, ...]
    positive: tuple[bool, ...]
    fn: Callable[[np.ndarray, np.ndarray, Mapping[str, float]], np.ndarray]


def _linear(x, p, fixed):
    return p[0] * x + p[1]


def _quadratic(x, p, fixed):
    return p[0] * (x - p[1]) ** 2 + p[2]


def _lorentzian(x, p, fixed):
    f_r, kappa, amplitude = p
    df_mhz = (x - f_r) * 1e3
    return amplitude * kappa**2 / (4.0 * df_mhz**2 + kappa**2)


def _vacuum_rabi(x, p, fixed):
    res = ResonatorParams(f_r_ghz=fixed["f_r_ghz"], kappa_mhz=fixed["kappa_mhz"])
    s = s21_coupled(x, res, f_q_ghz=res.f_r_ghz, g_mhz=p[0], gamma_mhz=p[1])
    return np.abs(s) ** 2


def _vacuum_rabi_kappa(x, p, fixed):
    res = ResonatorParams(f_r_ghz=fixed["f_r_ghz"], kappa_mhz=p[2])
    s = s21_coupled(x, res, f_q_ghz=res.f_r_ghz, g_mhz=p[0], gamma_mhz=p[1])
    return np.abs(s) ** 2


def _decay(x, p, fixed):
    exponent = fixed["exponent"]
    return p[0] * np.exp(-((x / p[1]) ** exponent)) + p[2]


def _decay_stretched(x, p, fixed):
    return p[0] * np.exp(-((x / p[1]) ** p[3])) + p[2]


def _rabi_oscillation(x, p, fixed):
    amplitude, freq_mhz, phase, tau, offset = p
    return amplitude * np.cos(2e-3 * math.pi * freq_mhz * x + phase) * np.exp(-x / tau) + offset


def _phase_feature(x, p, fixed):
    base, depth, f_q, gamma_mhz = p
    return base + depth / (1.0 + (2.0 * (x - f_q) * 1e3 / gamma_mhz) ** 2)


MODELS: dict[str, ModelSpec] = {
    spec.name: spec
    for spec in (
        ModelSpec("linear", ("slope", "intercept"), (False, False), _linear),
        ModelSpec("quadratic", ("curvature", "center", "offset"), (False, False, False), _quadratic),
        ModelSpec("lorentzian", ("f_r_ghz", "kappa_mhz", "amplitude"), (False, True, True), _lorentzian),
        ModelSpec("vacuum_rabi", ("g_mhz", "gamma_mhz"), (True, True), _vacuum_rabi),
        ModelSpec(
            "vacuum_rabi_kappa",
            ("g_mhz", "gamma_mhz", "kappa_mhz"),
            (True, True, True),
            _vacuum_rabi_kappa,
        ),
        ModelSpec("decay", ("amplitude", "time", "offset"), (False, True, False), _decay),
        ModelSpec(
            "decay_stretched",
            ("amplitude", "time", "offset", "exponent"),
            (False, True, False, True),
            _decay_stretched,
        ),
        ModelSpec(
            "rabi_oscillation",
            ("amplitude", "freq_mhz", "phase_rad", "tau_ns", "offset"),
            (False, True, False, True, False),
            _rabi_oscillation,
        ),
        ModelSpec(
            "phase_feature",
            ("base_deg", "depth_deg", "f_q_ghz", "gamma_mhz"),
            (False, False, False, True),
            _phase_feature,
        ),
    )
}


# --- engine -------------------------------------------------------------------


@dataclass(frozen=True)
class FitProblem:
    model: str
    x: np.ndarray
    y: np.ndarray
    p0: np.ndarray
    sigma: np.ndarray | None = None
    fixed: Mapping[str, float] | None = None
    tol: float = 1e-10
    max_evals: int | None = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValidationError(
                f"unknown model {self.model!r}; known: {sorted(MODELS)}"
            )
        spec = MODELS[self.model]
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        p0 = np.asarray(self.p0, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise ValidationError("x and y must be 1-D and the same length")
        if p0.shape != (len(spec.param_names),):
            raise ValidationError(
                f"model {self.model!r} takes {len(spec.param_names)} parameters "
                f"{spec.param_names}, got {p0.size}"
            )
        if x.size < p0.size:
            raise ValidationError("need at least as many points as parameters")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise ValidationError("data must be finite")
        if not np.all(np.isfinite(p0)):
            raise ValidationError("initial parameters must be finite")
        for name, positive, value in zip(spec.param_names, spec.positive, p0):
            if positive and value <= 0.0:
                raise ValidationError(f"initial {name} must be positive, got {value}")
        sigma = self.sigma
        if sigma is not None:
            sigma = np.asarray(sigma, dtype=float)
            if sigma.shape != y.shape or not np.all(sigma > 0.0):
                raise ValidationError("sigma must match y and be positive")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "fixed", dict(self.fixed or {}))


@dataclass(frozen=True)
class FitResult:
    """Outcome of one fit; converged=False always carries a message.

    family names the decay law when the model is one of the shared decay
    forms, so selection results stay distinguishable.
    """

    model: str
    params: dict[str, float]
    stderr: dict[str, float]
    rss: float
    converged: bool
    iterations: int
    n_points: int
    message: str = ""
    family: str | None = None
    jacobian: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def n_params(self) -> int:
        return len(self.params)

    @property
    def aic(self) -> float:
        """N ln(RSS/N) + 2k; lower is better on the same data."""
        if self.rss <= 0.0:
            return -math.inf
        return self.n_points * math.log(self.rss / self.n_points) + 2 * self.n_params

    def to_json_dict(self) -> dict:
        out = {
            "model": self.model,
            "params": self.params,
            "stderr": self.stderr,
            "rss": self.rss,
            "aic": self.aic,
            "converged": self.converged,
            "iterations": self.iterations,
            "n_points": self.n_points,
            "message": self.message,
        }
        if self.family is not None:
            out["family"] = self.family
        return out


def _to_params(q: np.ndarray, positive: np.ndarray) -> np.ndarray:
    p = q.copy()
    p[positive] = np.exp(q[positive])
    return p


def _failed(problem: FitProblem, p: np.ndarray, message: str) -> FitResult:
    """Non-converged result evaluated at p, for honest AIC comparisons."""
    spec = MODELS[problem.model]
    resid = spec.fn(problem.x, p, problem.fixed) - problem.y
    if problem.sigma is not None:
        resid = resid / problem.sigma
    return FitResult(
        model=problem.model,
        params=dict(zip(spec.param_names, (float(v) for v in p))),
        stderr={name: math.inf for name in spec.param_names},
        rss=float(resid @ resid),
        converged=False,
        iterations=0,
        n_points=problem.x.size,
        message=message,
    )


def _central_jacobian(residuals, q: np.ndarray, n_resid: int) -> np.ndarray:
    # recomputed at the solution with central differences; the solver's own
    # forward-difference steps are too coarse for covariance work
    jac = np.empty((n_resid, q.size))
    for j in range(q.size):
        h = 1e-8 * max(1.0, abs(q[j]))
        e = np.zeros_like(q)
        e[j] = h
        jac[:, j] = (residuals(q + e) - residuals(q - e)) / (2.0 * h)
    return jac


def least_squares(problem: FitProblem) -> FitResult:
    """Trust-region minimization of the model's squared residuals.

    Positive parameters are optimized as logarithms; results come back on
    the natural scale. Deterministic for identical inputs. Exhausting the
    evaluation budget returns converged=False with the optimizer's message
    rather than raising.
    """
    spec = MODELS[problem.model]
    positive = np.asarray(spec.positive)
    q0 = problem.p0.copy()
    q0[positive] = np.log(q0[positive])
    sigma = problem.sigma

    def residuals(q):
        y = spec.fn(problem.x, _to_params(q, positive), problem.fixed)
        r = y - problem.y
        return r / sigma if sigma is not None else r

    res = optimize.least_squares(
        residuals,
        q0,
        method="trf",
        xtol=problem.tol,
        ftol=problem.tol,
        gtol=problem.tol,
        max_nfev=problem.max_evals,
    )
    p = _to_params(res.x, positive)
    rss = float(res.fun @ res.fun)
    n, k = problem.x.size, p.size
    jac = _central_jacobian(residuals, res.x, res.fun.size)
    stderr = np.full(k, math.inf)
    if n > k:
        jtj = jac.T @ jac
        cov_q = np.linalg.pinv(jtj) * (rss / (n - k))
        var_q = np.clip(np.diag(cov_q), 0.0, None)
        scale = np.where(positive, np.abs(p), 1.0)  # chain rule for log params
        stderr = scale * np.sqrt(var_q)
    return FitResult(
        model=problem.model,
        params=dict(zip(spec.param_names, (float(v) for v in p))),
        stderr=dict(zip(spec.param_names, (float(s) for s in stderr))),
        rss=rss,
        converged=bool(res.status > 0),
        iterations=int(res.njev if res.njev is not None else res.nfev),
        n_points=n,
        message="" if res.status > 0 else str(res.message),
        jacobian=jac,
    )


def select_by_aic(results: Sequence[FitResult]) -> FitResult:
    """Preferred model among fits of the same data: lowest AIC.

    Converged fits outrank non-converged ones regardless of score.
    """
    if not results:
        raise ValidationError("nothing to select from")
    return min(results, key=lambda r: (not r.converged, r.aic))


# --- trace fitters ------------------------------------------------------------


def _sorted_xy(x, y) -> tuple[np.ndarray, np.ndarray]:
    # initializers below scan for peaks and crossings, which needs ordered x;
    # the engine itself never cares about ordering
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    order = np.argsort(x, kind="stable")
    return x[order], y[order]


def _fwhm_estimate(x: np.ndarray, y: np.ndarray) -> float:
    """Width of y at half its max above baseline; 0 when undefined."""
    base = float(y.min())
    half = base + 0.5 * (float(y.max()) - base)
    above = y > half
    if not above.any():
        return 0.0
    idx = np.flatnonzero(above)
    return float(x[idx[-1]] - x[idx[0]])


def fit_lorentzian(f_p_ghz, s21_sq) -> FitResult:
    """Bare resonance: |S21|^2 = a0 kappa^2 / (4 df^2 + kappa^2).

    Initialized from the peak sample and the half-max width. A flat trace
    is reported as non-converged, not fitted.
    """
    x, y = _sorted_xy(f_p_ghz, s21_sq)
    span = float(y.max() - y.min())
    if span <= 0.0 or not math.isfinite(span):
        problem = FitProblem(
            "lorentzian", x, y, np.array([float(np.mean(x)), 1.0, max(float(y.max()), 1e-12)])
        )
        return _failed(problem, problem.p0, "flat trace; no resonance to fit")
    f_r0 = float(x[np.argmax(y)])
    width_ghz = _fwhm_estimate(x, y)
    if width_ghz <= 0.0:
        width_ghz = float(x[-1] - x[0]) / 10.0
    p0 = np.array([f_r0, width_ghz * 1e3, float(y.max())])
    return least_squares(FitProblem("lorentzian", x, y, p0))


def fit_vacuum_rabi(
    f_p_ghz,
    s21_sq,
    resonator: ResonatorParams,
    fix_kappa: bool = True,
    g0_mhz: float | None = None,
) -> FitResult:
    """Split on-resonance trace -> (g, gamma), kappa fixed or free.

    The qubit is taken at the resonator frequency (minimum-gap column).
    g is initialized as half the separation of the two strongest peaks;
    when the trace shows fewer than two peaks, that is g0 = 0 and the fit
    is reported non-converged instead of pretending.
    """
    x, y = _sorted_xy(f_p_ghz, s21_sq)
    if g0_mhz is None:
        span = float(y.max() - y.min())
        peaks, props = find_peaks(y, prominence=0.1 * span if span > 0 else None)
        if peaks.size >= 2:
            order = np.argsort(props["prominences"])[::-1]
            f_a, f_b = x[peaks[order[0]]], x[peaks[order[1]]]
            g0_mhz = abs(f_a - f_b) * 1e3 / 2.0
        else:
            g0_mhz = 0.0
    gamma0 = max(resonator.kappa_mhz, 0.1)
    if fix_kappa:
        model, p0 = "vacuum_rabi", [g0_mhz, gamma0]
        fixed = {"f_r_ghz": resonator.f_r_ghz, "kappa_mhz": resonator.kappa_mhz}
    else:
        model, p0 = "vacuum_rabi_kappa", [g0_mhz, gamma0, resonator.kappa_mhz]
        fixed = {"f_r_ghz": resonator.f_r_ghz}
    if g0_mhz <= 0.0:
        problem = FitProblem(model, x, y, np.array([1e-9] + p0[1:]), fixed=fixed)
        result = _failed(
            problem,
            np.array([0.0] + p0[1:]),
            "trace shows fewer than two peaks; no splitting to fit",
        )
        return result
    return least_squares(FitProblem(model, x, y, np.asarray(p0, dtype=float), fixed=fixed))


DECAY_FAMILIES = ("exp", "gaussian", "stretched")

_FIXED_EXPONENTS = {"exp": 1.0, "gaussian": 2.0}


def fit_decay(t, signal, family: str = "exp") -> FitResult:
    """A exp[-(t/T)^p] + c with p = 1 (exp), 2 (gaussian), or free.

    Time units follow t. Data must actually decay over the window.
    """
    if family not in DECAY_FAMILIES:
        raise ValidationError(
            f"unknown decay family {family!r}; expected one of {DECAY_FAMILIES}"
        )
    x, y = _sorted_xy(t, signal)
    if y.size < 4:
        raise ValidationError("need at least 4 points to fit a decay")
    if not y[0] > y[-1]:
        raise ValidationError("signal does not decay over the sweep window")
    c0 = float(y[-1])
    a0 = float(y[0] - c0)
    target = c0 + a0 / math.e
    below = np.flatnonzero(y <= target)
    t_scale = float(x[below[0]]) if below.size else float(x[-1] - x[0]) / 2.0
    if t_scale <= 0.0:
        t_scale = float(x[-1] - x[0]) / 2.0
    if family == "stretched":
        p0 = np.array([a0, t_scale, c0, 1.5])
        result = least_squares(FitProblem("decay_stretched", x, y, p0))
    else:
        exponent = _FIXED_EXPONENTS[family]
        p0 = np.array([a0, t_scale, c0])
        result = least_squares(FitProblem("decay", x, y, p0, fixed={"exponent": exponent}))
    return replace(result, family=family)


def select_decay_family(t, signal, families: Sequence[str] = DECAY_FAMILIES) -> FitResult:
    """Fit each family and return the AIC-preferred result."""
    return select_by_aic([fit_decay(t, signal, family) for family in families])


def fit_rabi_oscillation(t_ns, p_e) -> FitResult:
    """Damped cosine A cos(2 pi f t + phi) e^(-t/tau) + c; f in MHz, t in ns.

    The frequency is initialized from the dominant discrete-spectrum peak;
    a spectrum with no clear peak (or under three visible periods) is
    reported non-converged.
    """
    x, y = _sorted_xy(t_ns, p_e)
    if x.size < 8:
        raise ValidationError("need at least 8 points to fit an oscillation")
    centred = y - y.mean()
    spectrum = np.abs(np.fft.rfft(centred))
    dt = float(np.mean(np.diff(x)))
    freqs_mhz = np.fft.rfftfreq(x.size, d=dt) * 1e3
    peak_bin = int(np.argmax(spectrum[1:])) + 1
    floor = float(np.median(spectrum[1:]))
    a0 = float(y.max() - y.min()) / 2.0
    c0 = float(y.mean())
    f0 = float(freqs_mhz[peak_bin])
    tau0 = float(x[-1] - x[0]) if x[-1] > x[0] else 1.0
    p0 = np.array([a0 if a0 > 0 else 1.0, max(f0, 1e-6), 0.0, tau0, c0])
    problem = FitProblem("rabi_oscillation", x, y, p0)
    if spectrum[peak_bin] < 5.0 * floor:
        return _failed(problem, p0, "no spectral peak above the noise floor")
    if f0 * (x[-1] - x[0]) * 1e-3 < 3.0:
        return _failed(problem, p0, "fewer than three oscillation periods in the window")
    cos0 = (y[0] - c0) / a0 if a0 > 0 else 0.0
    phi0 = math.acos(min(1.0, max(-1.0, cos0)))
    if y.size > 1 and y[1] > y[0]:
        phi0 = -phi0
    p0[2] = phi0
    return least_squares(FitProblem("rabi_oscillation", x, y, p0))


def extract_qubit_line(f_s_ghz, phase_deg) -> FitResult:
    """Qubit frequency and linewidth from a two-tone phase trace.

    Fits base + depth / (1 + (2 (f_s - f_q)/gamma)^2); depth keeps the sign
    of the feature (dip below the resonator, peak above). gamma_mhz is the
    apparent FWHM, power-broadened by sqrt(1 + s) at saturation s. A trace
    with no feature above the point-to-point noise is non-converged.
    """
    x, y = _sorted_xy(f_s_ghz, phase_deg)
    if y.size < 8:
        raise ValidationError("need at least 8 points to fit the qubit line")
    base0 = float(np.median(y))
    dev = y - base0
    peak_idx = int(np.argmax(np.abs(dev)))
    depth0 = float(dev[peak_idx])
    noise = float(np.std(np.diff(y))) / math.sqrt(2.0)
    f_q0 = float(x[peak_idx])
    half = np.abs(dev) > abs(depth0) / 2.0
    idx = np.flatnonzero(half)
    width_ghz = float(x[idx[-1]] - x[idx[0]]) if idx.size else 0.0
    if width_ghz <= 0.0:
        width_ghz = float(x[-1] - x[0]) / 10.0
    p0 = np.array([base0, depth0, f_q0, width_ghz * 1e3])
    problem = FitProblem("phase_feature", x, y, p0)
    if abs(depth0) < 5.0 * noise or depth0 == 0.0:
        return _failed(problem, p0, "no qubit feature above the noise floor")
    return least_squares(problem)
