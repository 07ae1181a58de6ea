"""Time-correlation of the boundary measurement with the driving noise.

The raw lag correlation (1/T) sum d(s+tau) w(s) dt does not settle as T
grows: d integrates the noise, so it wanders like Brownian motion.  The
estimator here correlates the pressure p = -d_t d with the noise instead,

    e(tau) = (1/T) sum_s p(s + tau) w(s) dt,

and integrates in lag from the most negative lag, where the kernel of the
Neumann-to-Dirichlet map vanishes by causality.  This is the pairing of d
against differences of point masses, so every test function involved has
zero mean and the estimate converges at the T^(-1/2) rate.

Lags are whole samples.  Windows start after ``burn_in`` plus the negative
lag margin so that every sample used lies in the switched-on regime.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import correlate

from .noise import CutoffChi, NoiseRealization, apply_cutoff, member_seed, sample_noise
from .profile import AreaProfile
from .reconstruction import ImpulseResponse, second_difference_smooth
from .solver import SimGrid, Trace, _offset, apply_nd

DEFAULT_BLOCKS = 8


@dataclass(frozen=True)
class CorrelationEstimate:
    lags: np.ndarray
    values: np.ndarray
    T: float
    n_windows: int
    variance_estimates: np.ndarray
    dt: float
    # Contribution of the forcing's own autocorrelation (the delta part of
    # the impulse response) and per-block estimates of values - direct.
    direct: np.ndarray | None = field(default=None, repr=False)
    blocks: np.ndarray | None = field(default=None, repr=False)

    @property
    def zero_index(self) -> int:
        return int(np.flatnonzero(np.isclose(self.lags, 0.0, atol=0.5 * self.dt))[0])


def _lag_indices(lags, dt: float) -> np.ndarray:
    lags = np.asarray(lags, dtype=float)
    if lags.shape == (2,):
        kmin, kmax = (int(round(v / dt)) for v in lags)
        return np.arange(kmin, kmax + 1)
    k = np.rint(lags / dt).astype(int)
    if np.any(np.diff(k) != 1):
        raise ValueError("lags must be consecutive multiples of dt")
    return k


def _anchored_integral(e: np.ndarray, dt: float) -> np.ndarray:
    """-int e from the first lag, trapezoid-centred on each sample."""
    return -dt * (np.cumsum(e, axis=-1) - 0.5 * e)


def _block_correlations(x: np.ndarray, w: np.ndarray, s0: int, ns: int,
                        kmin: int, kmax: int, n_blocks: int) -> np.ndarray:
    """Per-block lag correlations mean_s x[s+k] w[s]; shape (n_blocks, n_lags)."""
    edges = np.linspace(0, ns, n_blocks + 1).astype(int)
    out = np.empty((n_blocks, kmax - kmin + 1))
    for b in range(n_blocks):
        a, z = s0 + edges[b], s0 + edges[b + 1]
        seg = x[a + kmin:z + kmax]
        out[b] = correlate(seg, w[a:z], mode="valid") / (z - a)
    return out


def cross_correlate(d: Trace, w: NoiseRealization, lags, T: float,
                    burn_in: float = 0.0, forcing: Trace | None = None,
                    n_blocks: int = DEFAULT_BLOCKS) -> CorrelationEstimate:
    """Estimate the kernel G of the Neumann-to-Dirichlet map from one record.

    ``lags`` is either (tau_min, tau_max) with tau_min < 0, or an explicit
    array of consecutive lag times.  ``forcing`` is the actual boundary
    input (chi * w); it defaults to w itself, which is exact once the
    windows start after the cut-off ramp.
    """
    dt = w.dt
    if abs(d.dt - dt) > 1e-9 * dt:
        raise ValueError(f"trace dt {d.dt} does not match noise dt {dt}")
    if _offset(Trace(0.0, dt, np.zeros(1)), d) != 0:
        raise ValueError("measurement must start at t = 0 like the noise")
    k = _lag_indices(lags, dt)
    kmin, kmax = int(k[0]), int(k[-1])
    if kmin >= 0:
        raise ValueError("lag range must include negative lags (the kernel is anchored there)")
    ns = int(round(T / dt))
    if ns < n_blocks:
        raise ValueError("averaging horizon T is too short")
    s0 = int(np.ceil(burn_in / dt - 1e-9)) - kmin
    need = s0 + ns + kmax + 1
    available = min(len(d) - 1, len(w))
    if need > available:
        raise ValueError(f"T = {T} with lags up to {kmax * dt:.4g} needs {need} samples "
                         f"after burn-in; only {available} available")
    om = w.samples
    if not np.any(om[s0:s0 + ns]):
        raise ValueError("degenerate noise input: the noise vanishes on the window")
    p = -np.gradient(d.samples, dt)
    f = om if forcing is None else forcing.samples

    e_b = _block_correlations(p, om, s0, ns, kmin, kmax, n_blocks)
    dir_b = _block_correlations(f, om, s0, ns, kmin, kmax, n_blocks)
    weights = np.diff(np.linspace(0, ns, n_blocks + 1).astype(int)) / ns
    G_b = _anchored_integral(e_b, dt)
    D_b = _anchored_integral(dir_b, dt)
    values = weights @ G_b
    direct = weights @ D_b
    var = G_b.var(axis=0, ddof=1) / n_blocks
    return CorrelationEstimate(k * dt, values, ns * dt, ns, var, dt, direct, G_b - D_b)


def deterministic_kernel(p: AreaProfile, L: float, dx: float, lags, cfl: float = 1.0
                         ) -> CorrelationEstimate:
    """Expected value of ``cross_correlate`` computed from a single-sample spike.

    White noise has covariance delta/dt per sample, so the mean of the
    estimator equals the same anchored integral applied to the response to
    an input of height 1/dt on one sample.
    """
    dt = cfl * dx
    k = _lag_indices(lags, dt)
    kmin, kmax = int(k[0]), int(k[-1])
    n0 = max(1, 1 - kmin)
    nt = n0 + kmax + 3
    g = SimGrid(L, int(round(L / dx)), nt, cfl)
    spike = np.zeros(nt)
    spike[n0] = 1.0 / dt
    d = apply_nd(p, g, Trace(0.0, dt, spike))
    pr = -np.gradient(d.samples, dt)
    e = pr[n0 + kmin:n0 + kmax + 1]
    direct = np.zeros_like(e)
    direct[-kmin] = 1.0 / dt
    return CorrelationEstimate(k * dt, _anchored_integral(e, dt), np.inf, 0,
                               np.zeros(len(k)), dt, _anchored_integral(direct, dt))


def kernel_error(est: CorrelationEstimate, ref: CorrelationEstimate) -> float:
    """L2 distance over lags."""
    return float(np.sqrt(np.sum((est.values - ref.values) ** 2) * est.dt))


def estimate_impulse_response(G: CorrelationEstimate, tol: float = 0.05,
                              regularization=None) -> ImpulseResponse:
    """h = -G' for lags >= 0, after checking the unit jump of G at zero lag.

    When the estimate carries the forcing's own autocorrelation, that part
    is removed first; what remains is smooth across zero lag, so centered
    differences apply at every lag.  Otherwise the two lags touching the
    jump are filled from the next one.  ``regularization`` is None (raw),
    a Tikhonov weight, or "discrepancy".
    """
    i0 = G.zero_index
    if i0 < 1 or i0 + 2 >= len(G.values):
        raise ValueError("kernel estimate must cover negative and positive lags")
    jump = G.values[i0 + 1] - G.values[i0 - 1]
    if not abs(jump + 1.0) <= tol:
        raise ValueError(f"jump of the kernel at zero lag is {jump:.4g}, expected -1 "
                         f"within {tol}: estimate corrupted or under-averaged")
    n = len(G.values) - i0 - 1
    S = G.values if G.direct is None else G.values - G.direct
    h = -(S[i0 + 1:i0 + 1 + n] - S[i0 - 1:i0 - 1 + n]) / (2 * G.dt)
    var = None
    if G.blocks is not None:
        hb = -(G.blocks[:, i0 + 1:i0 + 1 + n] - G.blocks[:, i0 - 1:i0 - 1 + n]) / (2 * G.dt)
        var = hb.var(axis=0, ddof=1) / hb.shape[0]
    if G.direct is None:
        h[:2] = h[2]
    if regularization is not None:
        if regularization == "discrepancy":
            h, _ = second_difference_smooth(h, var)
        else:
            h, _ = second_difference_smooth(h, alpha=float(regularization))
    return ImpulseResponse(G.dt, h, "correlation-derived", variance=var)


def _windows(d: Trace, x: Trace, test: Trace, s0: int, ns: int) -> np.ndarray:
    """X_j = sum_n x(t_n + s_j) test(t_n) dt for j = 0..ns-1."""
    off = _offset(x, test) + s0
    n = len(test)
    if off < 0 or off + ns + n - 1 > len(x):
        raise ValueError("insufficient data: test function shifted past the record")
    return np.correlate(x.samples[off:off + ns + n - 1], test.samples, mode="valid") * x.dt


def pair_ct(w: NoiseRealization, d: Trace, phi: Trace, psi: Trace, T: float,
            burn_in: float = 0.0) -> float:
    """(1/T) sum_s <shift_s d, phi> <shift_s w, psi> ds over whole-sample shifts."""
    dt = w.dt
    ns = int(round(T / dt))
    s0 = int(np.ceil(burn_in / dt - 1e-9))
    X = _windows(d, d, phi, s0, ns)
    Y = _windows(d, w.as_trace(), psi, s0, ns)
    return float(np.dot(X, Y) * dt / (ns * dt))


def pair_ct_lagdomain(w: NoiseRealization, d: Trace, phi: Trace, psi: Trace, T: float,
                      burn_in: float = 0.0) -> float:
    """Same number as ``pair_ct`` via the lag correlations R(t_n, t_m).

    Sums phi(t_n) psi(t_m) R(t_n, t_m) dt^2 where R is the window-averaged
    product of d(t_n + s) and w(t_m + s).  Quadratic in the test-function
    lengths; meant for checking.
    """
    dt = w.dt
    ns = int(round(T / dt))
    s0 = int(np.ceil(burn_in / dt - 1e-9))
    a = _offset(d, phi) + s0
    b = _offset(d, psi) + s0
    if min(a, b) < 0 or a + len(phi) + ns - 1 > len(d) or b + len(psi) + ns - 1 > len(w):
        raise ValueError("insufficient data")
    total = 0.0
    for n, fn in enumerate(phi.samples):
        if fn == 0.0:
            continue
        dn = d.samples[a + n:a + n + ns]
        for m, gm in enumerate(psi.samples):
            if gm == 0.0:
                continue
            R = np.dot(dn, w.samples[b + m:b + m + ns]) * dt / (ns * dt)
            total += fn * gm * R * dt * dt
    return float(total)


@dataclass(frozen=True)
class ConvergenceStudy:
    T_list: tuple
    mean_error: np.ndarray
    std_error: np.ndarray  # sample standard deviation across seeds
    errors: np.ndarray     # shape (n_seeds, n_T)
    seeds: tuple

    def rows(self):
        return list(zip(self.T_list, self.mean_error, self.std_error))


def noise_record(p: AreaProfile, L: float, dx: float, seed: int, duration: float,
                 delta: float | None = None, cfl: float = 1.0):
    """Drive the profile with chi * noise for ``duration``; returns (noise, forcing, trace)."""
    dt = cfl * dx
    nt = int(round(duration / dt))
    w = sample_noise(seed, nt, dt)
    chi = CutoffChi(10 * dt if delta is None else delta)
    f = apply_cutoff(chi, w)
    g = SimGrid(L, int(round(L / dx)), nt, cfl)
    return w, f, apply_nd(p, g, f)


def record_length(T: float, lags, dt: float, delta: float) -> float:
    """Duration a noise run needs to support ``cross_correlate`` at horizon T."""
    k = _lag_indices(lags, dt)
    return T + delta + (k[-1] - k[0] + 4) * dt


def convergence_study(p: AreaProfile, T_list, seeds, lags=(-0.5, 4.0), L: float = 2.0,
                      dx: float = 0.01, delta: float | None = None, cfl: float = 1.0
                      ) -> ConvergenceStudy:
    """Kernel error against the deterministic oracle for each horizon and seed.

    Each seed drives one run long enough for the largest T; smaller horizons
    use the leading part of the same windows.
    """
    T_list = tuple(float(T) for T in T_list)
    if any(b <= a for a, b in zip(T_list, T_list[1:])):
        raise ValueError("T_list must be increasing")
    seeds = tuple(int(s) for s in seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    dt = cfl * dx
    delta = 10 * dt if delta is None else delta
    ref = deterministic_kernel(p, L, dx, lags, cfl)
    errs = np.empty((len(seeds), len(T_list)))
    for i, s in enumerate(seeds):
        w, f, d = noise_record(p, L, dx, s, record_length(T_list[-1], lags, dt, delta),
                               delta, cfl)
        for j, T in enumerate(T_list):
            est = cross_correlate(d, w, lags, T, burn_in=delta, forcing=f)
            errs[i, j] = kernel_error(est, ref)
    std = errs.std(axis=0, ddof=1) if len(seeds) > 1 else np.zeros(len(T_list))
    return ConvergenceStudy(T_list, errs.mean(axis=0), std, errs, seeds)


def ensemble_seeds(seed: int, n: int) -> list[int]:
    return [member_seed(seed, i) for i in range(n)]
