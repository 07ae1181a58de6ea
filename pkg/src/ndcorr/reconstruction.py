"""Recover A(x) from the impulse response of the boundary map.

Minus the time derivative of the measurement is the input convolved with
delta + h.  Given h, the symmetric second-kind equation

    f(t) + 1/2 * int_{-a}^{a} h(|t - s|) f(s) ds = 1,    -a <= t <= a,

has an even solution that holds the pressure at 1 on [0, a] at t = 0.  Its
causal half, shifted to start at t = 0, is the probe f_a; it drives a state
of unit pressure to depth a at the end of its window, and integrating the
conservation law gives

    Phi(a) = int_0^a A(x) dx = int f_a dt.

A(a) follows by differencing Phi over a grid of window lengths.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgWarning, lapack, lu_factor, lu_solve, toeplitz
from scipy.optimize import brentq
from scipy.sparse.linalg import spsolve, spsolve_triangular
from scipy.special import comb

from .profile import AreaProfile, eval_profile
from .solver import SimGrid, Trace, apply_nd, simulate

SOURCES = ("direct-deconvolution", "correlation-derived")
ILL_CONDITIONED = 1e12
PULSE_RATIO = 0.5  # geometric factor of the minimum-phase pulse


@dataclass(frozen=True)
class ImpulseResponse:
    """Regular part h of the impulse response delta + h.

    h[k] is the value at lag k*dt; h[0] is the limit from the right.
    """

    dt: float
    h: np.ndarray
    source: str
    variance: np.ndarray | None = field(default=None, repr=False)
    condition: float = math.nan
    residual: float = math.nan

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown impulse-response source {self.source!r}")

    @property
    def lags(self) -> np.ndarray:
        return np.arange(len(self.h)) * self.dt

    @property
    def t_max(self) -> float:
        return (len(self.h) - 1) * self.dt


def lag_average(h: np.ndarray) -> np.ndarray:
    """[1/4, 1/2, 1/4] average over lags, h = 0 at negative lags; drops the last lag.

    At unit Courant number the discrete response lives on alternate samples;
    this is the same average the correlation route applies implicitly.
    """
    out = 0.5 * h[:-1] + 0.25 * h[1:]
    out[1:] += 0.25 * h[:-2]
    return out


def min_phase_pulse(width: float, dt: float) -> np.ndarray:
    """Unit-mass pulse C(K, j) q^j, j = 0..K, with K = round(width/dt).

    All zeros of its z-transform sit at z = -1/q, outside the unit circle,
    so deconvolving it by forward substitution is stable.
    """
    K = int(round(width / dt))
    if K < 4:
        raise ValueError(f"pulse width {width} is below 4 dt = {4 * dt}")
    j = np.arange(K + 1)
    pulse = comb(K, j) * PULSE_RATIO**j
    return pulse / (pulse.sum() * dt)


def _toeplitz_lower(col: np.ndarray, n: int) -> sp.csr_matrix:
    K = min(len(col), n)
    return sp.diags([np.full(n - i, col[i]) for i in range(K)], [-i for i in range(K)],
                    shape=(n, n), format="csr")


def deconvolve_impulse_response(p: AreaProfile, g: SimGrid, pulse_width: float,
                                regularization: float = 0.0) -> ImpulseResponse:
    """Impulse response from one forward solve with a narrow pulse.

    The pulse starts two samples in so that centered differencing of the
    trace is valid over the whole pulse; the recovered h covers lags up to
    roughly t_max.
    """
    if regularization < 0:
        raise ValueError("regularization must be >= 0")
    dt = g.dt
    pulse = min_phase_pulse(pulse_width, dt)
    s = 2
    nh = g.nt - s - 1
    if nh <= len(pulse):
        raise ValueError("time window too short for the pulse")
    f = np.zeros(g.nt)
    f[s:s + len(pulse)] = pulse
    d = apply_nd(p, g, Trace(0.0, dt, f))
    m = -np.gradient(d.samples, dt)
    r = (m - f)[s:s + nh]
    T = _toeplitz_lower(pulse * dt, nh)
    if regularization == 0:
        h = spsolve_triangular(T, r, lower=True)
    else:
        h = spsolve((T.T @ T + regularization * sp.identity(nh)).tocsc(), T.T @ r)
    # cond_1 of a lower-triangular Toeplitz matrix: column sums of it and its inverse.
    e0 = np.zeros(nh)
    e0[0] = 1.0
    inv_col = spsolve_triangular(T, e0, lower=True)
    cond = float(np.sum(np.abs(pulse * dt)) * np.sum(np.abs(inv_col)))
    if not np.isfinite(cond) or cond > ILL_CONDITIONED:
        warnings.warn(f"deconvolution is ill-conditioned (cond ~ {cond:.3g})", RuntimeWarning)
    mm = m[s:s + nh]
    residual = float(np.linalg.norm(T @ h + f[s:s + nh] - mm) / np.linalg.norm(mm))
    return ImpulseResponse(dt, lag_average(h), "direct-deconvolution",
                           condition=cond, residual=residual)


def second_difference_smooth(y: np.ndarray, variance: np.ndarray | None = None,
                             alpha: float | None = None) -> tuple[np.ndarray, float]:
    """Tikhonov smoothing: argmin |h - y|^2 + alpha |D2 h|^2.

    Without ``alpha`` the discrepancy principle picks it: the residual
    |h - y|^2 matches the summed per-sample noise variance.
    """
    n = len(y)
    D2 = sp.diags([1.0, -2.0, 1.0], [0, 1, 2], shape=(n - 2, n))
    P = (D2.T @ D2).tocsc()
    eye = sp.identity(n, format="csc")

    def solve(a):
        return spsolve(eye + a * P, y)

    if alpha is None:
        if variance is None:
            raise ValueError("discrepancy principle needs variance estimates")
        target = float(np.sum(variance))

        def gap(log_a):
            return float(np.sum((solve(math.exp(log_a)) - y) ** 2)) - target

        lo, hi = math.log(1e-8), math.log(1e12)
        if gap(hi) <= 0:
            alpha = math.exp(hi)
        elif gap(lo) >= 0:
            alpha = math.exp(lo)
        else:
            alpha = math.exp(brentq(gap, lo, hi, xtol=1e-3))
    return solve(alpha), float(alpha)


def _trapezoid_weights(n: int) -> np.ndarray:
    wts = np.ones(n)
    wts[0] = wts[-1] = 0.5
    return wts


def _h_at(h: ImpulseResponse, n: int) -> np.ndarray:
    if n > len(h.h):
        raise ValueError(f"impulse response covers lags up to {h.t_max:.4g}; "
                         f"need {(n - 1) * h.dt:.4g}")
    return h.h[:n]


def _probe(h: ImpulseResponse, k: int) -> tuple[np.ndarray, float]:
    """Solve the symmetric probe system on 2k+1 nodes; returns (f, cond_1)."""
    n = 2 * k + 1
    M = toeplitz(_h_at(h, n)) * (0.5 * h.dt * _trapezoid_weights(n))[None, :]
    M[np.diag_indices(n)] += 1.0
    anorm = np.max(np.sum(np.abs(M), axis=0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)  # singularity is reported below
        lu = lu_factor(M, check_finite=True)
    rcond, info = lapack.dgecon(lu[0], anorm, norm="1")
    if info != 0 or rcond == 0:
        raise np.linalg.LinAlgError("probe system is singular")
    cond = 1.0 / rcond
    if cond > ILL_CONDITIONED:
        raise np.linalg.LinAlgError(f"probe system ill-conditioned (cond ~ {cond:.3g})")
    return lu_solve(lu, np.ones(n)), float(cond)


def _window_steps(h: ImpulseResponse, a: float) -> int:
    k = int(round(a / h.dt))
    if k < 1 or abs(k * h.dt - a) > 1e-6 * h.dt:
        raise ValueError(f"window length {a} is not a positive multiple of dt = {h.dt}")
    return k


def solve_probe_equation(h: ImpulseResponse, a: float, full: bool = False) -> Trace:
    """Probe input f_a on [0, a]; with ``full`` the whole even solution on [-a, a]."""
    k = _window_steps(h, a)
    f, _ = _probe(h, k)
    if full:
        return Trace(-k * h.dt, h.dt, f)
    return Trace(0.0, h.dt, f[:k + 1])


def area_from_probe(f_a: Trace) -> float:
    return float(np.trapezoid(f_a.samples, dx=f_a.dt))


@dataclass
class ReconstructionResult:
    a_grid: np.ndarray
    area_integral: np.ndarray
    A_rec: np.ndarray
    probe_inputs: list
    condition_numbers: np.ndarray
    A_true: np.ndarray | None = None
    error_rel: np.ndarray | None = None
    error_linf: float | None = None
    error_l2: float | None = None


def reconstruct_profile(h: ImpulseResponse, a_max: float, da: float | None = None,
                        truth: AreaProfile | None = None) -> ReconstructionResult:
    """Phi(a) on a = da, 2da, ..., a_max and A(a) = dPhi/da."""
    dt = h.dt
    da = 2 * dt if da is None else da
    step = int(round(da / dt))
    if step < 2 or abs(step * dt - da) > 1e-6 * dt:
        raise ValueError(f"da = {da} must be a multiple of dt = {dt} and at least 2 dt")
    n_a = int(math.floor(a_max / da + 1e-9))
    if n_a < 1:
        raise ValueError("a_max is smaller than da")
    if 2 * n_a * step > len(h.h) - 1:
        raise ValueError(f"a_max = {a_max} needs h up to lag {2 * n_a * step * dt:.4g}; "
                         f"it covers {h.t_max:.4g}")
    a_grid = np.arange(1, n_a + 1) * step * dt
    Phi = np.empty(n_a)
    conds = np.empty(n_a)
    probes = []
    for i in range(n_a):
        k = (i + 1) * step
        f, conds[i] = _probe(h, k)
        f_a = Trace(0.0, dt, f[:k + 1])
        probes.append(f_a)
        Phi[i] = area_from_probe(f_a)
    A_rec = np.gradient(np.r_[0.0, Phi], np.r_[0.0, a_grid])[1:]
    res = ReconstructionResult(a_grid, Phi, A_rec, probes, conds)
    if truth is not None:
        A_true = eval_profile(truth, a_grid)[0]
        err = np.abs(A_rec - A_true) / A_true
        res.A_true = A_true
        res.error_rel = err
        res.error_linf = float(err.max())
        res.error_l2 = float(np.linalg.norm(A_rec - A_true) / np.linalg.norm(A_true))
    return res


def probe_pressure(p: AreaProfile, f: Trace, dx: float, L: float | None = None):
    """Drive the profile with probe f; returns (x, p(x, t_end), t, p(0, t))."""
    L = max(2.0 * p.x_plus, p.x_plus + 0.5) if L is None else L
    g = SimGrid(L, int(round(L / dx)), len(f) + 2, f.dt / dx)
    r = simulate(p, g, f)
    n = len(f) - 1
    return g.x, r.pressure[n], r.field_times[:len(f)], r.pressure[:len(f), 0]


def verify_probe(p: AreaProfile, f_a: Trace, a: float, dx: float) -> float:
    """max |p(x, window end) - 1| over x in [0, a - 2 dx]."""
    x, pr, _, _ = probe_pressure(p, f_a, dx)
    sel = x <= a - 2 * dx + 1e-12
    return float(np.max(np.abs(pr[sel] - 1.0)))


def impulse_response_from_noise(p: AreaProfile, seed: int, T: float, lag_max: float,
                                L: float = 2.0, dx: float = 0.01, delta: float | None = None,
                                lag_min: float = -0.5, regularization=None):
    """Noise run -> kernel estimate -> impulse response (the passive pipeline)."""
    from .correlation import cross_correlate, estimate_impulse_response, noise_record, record_length

    dt = dx
    delta = 10 * dt if delta is None else delta
    lags = (lag_min, lag_max)
    w, f, d = noise_record(p, L, dx, seed, record_length(T, lags, dt, delta), delta)
    G = cross_correlate(d, w, lags, T, burn_in=delta, forcing=f)
    return estimate_impulse_response(G, regularization=regularization), G


def discriminate(p1: AreaProfile, p2: AreaProfile, seed: int, T: float, L: float = 2.0,
                 dx: float = 0.01, lags=(-0.5, 4.0), delta: float | None = None,
                 cfl: float = 0.5) -> tuple[float, float]:
    """L2 distances between the Dirichlet traces and the kernel estimates
    produced by one shared noise realization.

    Runs below unit Courant number by default: at cfl = 1 a noise-driven
    trace carries an undamped sublattice (Nyquist) random walk, which the
    kernel path removes by centered differencing but a raw trace comparison
    does not.
    """
    from .correlation import cross_correlate, kernel_error, noise_record, record_length

    dt = cfl * dx
    delta = 10 * dt if delta is None else delta
    dur = record_length(T, lags, dt, delta)
    w, f, d1 = noise_record(p1, L, dx, seed, dur, delta, cfl)
    _, _, d2 = noise_record(p2, L, dx, seed, dur, delta, cfl)
    trace_distance = float(np.sqrt(np.sum((d1.samples - d2.samples) ** 2) * dt))
    G1 = cross_correlate(d1, w, lags, T, burn_in=delta, forcing=f)
    G2 = cross_correlate(d2, w, lags, T, burn_in=delta, forcing=f)
    return trace_distance, kernel_error(G1, G2)


def discrimination_floor(p1: AreaProfile, p2: AreaProfile, seed: int, T: float,
                         L: float = 2.0, dx: float = 0.01, lags=(-0.5, 4.0),
                         delta: float | None = None, cfl: float = 0.5) -> float:
    """Self-convergence error of the trace difference behind ``discriminate``.

    The difference d1 - d2 is recomputed at dx/2 (input carried over by linear
    interpolation) and the L2 change at the coarse sample times is returned.
    """
    from .correlation import noise_record, record_length

    dt = cfl * dx
    delta = 10 * dt if delta is None else delta
    dur = record_length(T, lags, dt, delta)
    _, f, d1 = noise_record(p1, L, dx, seed, dur, delta, cfl)
    g = SimGrid(L, int(round(L / dx)), len(f), cfl)
    fine = g.refined(2)
    tf = f.t0 + np.arange(2 * len(f)) * fine.dt
    ff = Trace(f.t0, fine.dt, np.interp(tf, f.times, f.samples, right=0.0))
    coarse = d1.samples - apply_nd(p2, g, f).samples
    dense = (apply_nd(p1, fine, ff).samples - apply_nd(p2, fine, ff).samples)[::2]
    return float(np.sqrt(np.sum((coarse - dense) ** 2) * dt))
