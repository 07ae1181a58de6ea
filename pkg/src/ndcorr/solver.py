"""Leapfrog solver for A w_tt = (A w_x)_x with Neumann forcing at x = 0.

The half line is truncated at x = L with a first-order outgoing condition.
A is sampled at half points x_{i+1/2}; the nodal weight is the mean of its
two neighbours, A_i = (A_{i-1/2} + A_{i+1/2}) / 2.  With this pairing the
stiffness never exceeds four times the mass, so the scheme is stable up to
and including unit Courant number, where it is exact for A = 1.

Time stepping runs in a numba kernel; ``engine="numpy"`` selects a
vectorized reference implementation of the same update.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numba import njit
from scipy.integrate import cumulative_trapezoid, quad, trapezoid

from .profile import AreaProfile, eval_profile

_ALIGN_TOL = 1e-9


@dataclass(frozen=True)
class SimGrid:
    L: float
    nx: int
    nt: int
    cfl: float = 1.0

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise ValueError(f"CFL number must lie in (0, 1], got {self.cfl}")
        if self.nx < 2 or self.nt < 1:
            raise ValueError("grid needs nx >= 2 and nt >= 1")
        if not self.L > 0:
            raise ValueError("L must be positive")

    @classmethod
    def from_spacing(cls, L: float, dx: float, t_max: float, cfl: float = 1.0):
        if not 0 < cfl <= 1:
            raise ValueError(f"CFL number must lie in (0, 1], got {cfl}")
        nx = int(round(L / dx))
        nt = int(round(t_max / (cfl * L / nx)))
        return cls(L=L, nx=nx, nt=nt, cfl=cfl)

    @property
    def dx(self) -> float:
        return self.L / self.nx

    @property
    def dt(self) -> float:
        return self.cfl * self.dx

    @property
    def t_max(self) -> float:
        return self.nt * self.dt

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.nx + 1) * self.dx

    def refined(self, factor: int = 2) -> "SimGrid":
        return SimGrid(self.L, self.nx * factor, self.nt * factor, self.cfl)


@dataclass(frozen=True)
class Trace:
    """Uniformly sampled signal; sample k sits at time t0 + k*dt."""

    t0: float
    dt: float
    samples: np.ndarray

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("trace dt must be positive")
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.samples)) * self.dt

    @property
    def t_end(self) -> float:
        return self.t0 + (len(self.samples) - 1) * self.dt

    def shifted(self, n: int) -> "Trace":
        """Delay by n whole samples."""
        return Trace(self.t0 + n * self.dt, self.dt, self.samples)

    def reversed_about(self, t_rev: float) -> "Trace":
        """The signal t -> self(t_rev - t)."""
        return Trace(t_rev - self.t_end, self.dt, self.samples[::-1].copy())

    def support(self, tol: float = 0.0) -> tuple[float, float] | None:
        nz = np.flatnonzero(np.abs(self.samples) > tol)
        if nz.size == 0:
            return None
        return self.t0 + nz[0] * self.dt, self.t0 + nz[-1] * self.dt


def _offset(a: Trace, b: Trace) -> int:
    """Index offset of b's first sample on a's lattice."""
    if abs(a.dt - b.dt) > _ALIGN_TOL * a.dt:
        raise ValueError(f"sampling mismatch: dt {a.dt} vs {b.dt}")
    k = (b.t0 - a.t0) / a.dt
    if abs(k - round(k)) > 1e-6:
        raise ValueError("traces are not aligned to a common time lattice")
    return int(round(k))


def trace_inner(a: Trace, b: Trace) -> float:
    """Sum of a(t_n) b(t_n) dt over the common samples."""
    k = _offset(a, b)
    lo = max(0, k)
    hi = min(len(a), k + len(b))
    if hi <= lo:
        return 0.0
    return float(np.dot(a.samples[lo:hi], b.samples[lo - k:hi - k]) * a.dt)


def bump_trace(start: float, width: float, dt: float, nt: int, t0: float = 0.0,
               mass: float = 1.0) -> Trace:
    """C-infinity bump supported on (start, start+width) with the given integral."""
    t = t0 + np.arange(nt) * dt
    s = (t - start) / width
    inside = (s > 0) & (s < 1)
    y = np.zeros(nt)
    y[inside] = np.exp(-1.0 / (s[inside] * (1.0 - s[inside])))
    norm = quad(lambda u: math.exp(-1.0 / (u * (1.0 - u))), 0.0, 1.0,
                epsabs=1e-15, epsrel=1e-13)[0] * width
    return Trace(t0, dt, y * (mass / norm))


@dataclass
class SimulationRecord:
    grid: SimGrid
    profile: AreaProfile
    neumann_input: Trace
    dirichlet_trace: Trace
    field: np.ndarray | None = None  # rows are times t0 + k*decimate*dt
    decimate: int = 1

    @property
    def field_dt(self) -> float:
        return self.grid.dt * self.decimate

    @property
    def field_times(self) -> np.ndarray:
        return self.neumann_input.t0 + np.arange(self.field.shape[0]) * self.field_dt

    def _need_field(self):
        if self.field is None:
            raise ValueError("record was produced without store_field")

    @cached_property
    def pressure(self) -> np.ndarray:
        """p = -dw/dt (centered, one-sided at the ends)."""
        self._need_field()
        return -np.gradient(self.field, self.field_dt, axis=0)

    @cached_property
    def w_x(self) -> np.ndarray:
        self._need_field()
        return np.gradient(self.field, self.grid.dx, axis=1)

    @cached_property
    def flux(self) -> np.ndarray:
        """q = A dw/dx."""
        return self.w_x * eval_profile(self.profile, self.grid.x)[0]

    def time_index(self, t: float) -> int:
        self._need_field()
        k = (t - self.neumann_input.t0) / self.field_dt
        n = int(round(k))
        if abs(k - n) > 1e-6 or not 0 <= n < self.field.shape[0]:
            raise ValueError(f"time {t} is not a stored field time")
        return n


def scheme_coefficients(p: AreaProfile, g: SimGrid):
    """Stencil weights of the interior update and the boundary node."""
    nx, dx, c2 = g.nx, g.dx, g.cfl**2
    Ah = eval_profile(p, (np.arange(nx) + 0.5) * dx)[0]
    An = 0.5 * (Ah[:-1] + Ah[1:])
    cr = c2 * Ah[1:] / An
    cl = c2 * Ah[:-1] / An
    cc = 2.0 - cr - cl
    # Ghost node mirrored about x = 0, so A_{-1/2} = A_{1/2} and A_0 = A_{1/2}.
    b0 = 2.0 * c2
    bf = 2.0 * c2 * dx
    return cc, cr, cl, b0, bf


@njit(cache=True)
def _leapfrog(cc, cr, cl, b0, bf, cfl, f, stride, out):
    nx = cc.shape[0] + 1
    nt = f.shape[0]
    w = np.zeros(nx + 1)
    wo = np.zeros(nx + 1)
    wn = np.zeros(nx + 1)
    trace = np.empty(nt)
    row = 0
    for n in range(nt):
        trace[n] = w[0]
        if stride > 0 and n % stride == 0:
            out[row, :] = w
            row += 1
        for i in range(1, nx):
            wn[i] = cc[i - 1] * w[i] + cr[i - 1] * w[i + 1] + cl[i - 1] * w[i - 1] - wo[i]
        wn[0] = 2.0 * w[0] - wo[0] + b0 * (w[1] - w[0]) - bf * f[n]
        wn[nx] = w[nx] - cfl * (w[nx] - w[nx - 1])
        tmp = wo
        wo = w
        w = wn
        wn = tmp
        if n % 256 == 255 or n == nt - 1:
            acc = 0.0
            for i in range(nx + 1):
                acc += w[i]
            if not np.isfinite(acc):
                return trace, n
    return trace, -1


def _leapfrog_numpy(cc, cr, cl, b0, bf, cfl, f, stride, out):
    nx = cc.shape[0] + 1
    w, wo, wn = np.zeros(nx + 1), np.zeros(nx + 1), np.zeros(nx + 1)
    trace = np.empty(f.shape[0])
    row = 0
    for n in range(f.shape[0]):
        trace[n] = w[0]
        if stride > 0 and n % stride == 0:
            out[row] = w
            row += 1
        wn[1:nx] = cc * w[1:nx] + cr * w[2:] + cl * w[:nx - 1] - wo[1:nx]
        wn[0] = 2.0 * w[0] - wo[0] + b0 * (w[1] - w[0]) - bf * f[n]
        wn[nx] = w[nx] - cfl * (w[nx] - w[nx - 1])
        wo, w, wn = w, wn, wo
        if not np.isfinite(w[0]):
            return trace, n
    return trace, -1


def simulate(p: AreaProfile, g: SimGrid, f: Trace, store_field: bool = True,
             decimate: int = 1, engine: str = "numba") -> SimulationRecord:
    """Solve from rest with Neumann data f over g.nt steps starting at f.t0.

    Inputs shorter than the grid are padded with zeros.
    """
    if abs(f.dt - g.dt) > _ALIGN_TOL * g.dt:
        raise ValueError(f"input dt {f.dt} does not match grid dt {g.dt}")
    if not g.L > p.x_plus + 2 * g.dx:
        raise ValueError(f"domain L={g.L} must exceed x_plus + 2 dx = {p.x_plus + 2 * g.dx}")
    if len(f) > g.nt:
        raise ValueError(f"input has {len(f)} samples but the grid only {g.nt} steps")
    if decimate < 1:
        raise ValueError("decimate must be >= 1")
    fs = np.zeros(g.nt)
    fs[:len(f)] = f.samples
    if not np.all(np.isfinite(fs)):
        raise ValueError("input contains non-finite samples")
    cc, cr, cl, b0, bf = scheme_coefficients(p, g)
    stride = decimate if store_field else 0
    rows = (g.nt + decimate - 1) // decimate if store_field else 0
    out = np.zeros((rows, g.nx + 1))
    step = {"numba": _leapfrog, "numpy": _leapfrog_numpy}[engine]
    trace, bad = step(cc, cr, cl, b0, bf, g.cfl, fs, stride, out)
    if bad >= 0:
        raise FloatingPointError(
            f"non-finite field after step {bad} (t = {f.t0 + (bad + 1) * g.dt:.6g}); "
            f"dx={g.dx:.4g}, cfl={g.cfl}, input max |f| = {np.max(np.abs(fs)):.3g}")
    return SimulationRecord(g, p, Trace(f.t0, g.dt, fs), Trace(f.t0, g.dt, trace),
                            out if store_field else None, decimate)


def apply_nd(p: AreaProfile, g: SimGrid, f: Trace, engine: str = "numba") -> Trace:
    """Neumann-to-Dirichlet map: boundary value w(0, .) for input f."""
    return simulate(p, g, f, store_field=False, engine=engine).dirichlet_trace


def apply_nd_reversed(p: AreaProfile, g: SimGrid, phi: Trace, t_rev: float) -> Trace:
    """Time-reversed map: t -> u_psi(0, t_rev - t) with psi(t) = phi(t_rev - t).

    The result is anti-causal and covers g.nt samples ending at phi's last sample.
    """
    supp = phi.support()
    if supp is not None and t_rev < supp[1] - _ALIGN_TOL:
        raise ValueError(f"t_rev = {t_rev} lies inside the support of phi {supp}")
    psi = phi.reversed_about(t_rev)
    u = apply_nd(p, g, psi)
    return u.reversed_about(t_rev)


def exact_constant_oracle(f: Trace) -> Trace:
    """Exact Neumann-to-Dirichlet map for A = 1: minus the running integral."""
    return Trace(f.t0, f.dt, -cumulative_trapezoid(f.samples, dx=f.dt, initial=0.0))


def conservation_check(r: SimulationRecord, a: float, t_end: float,
                       t_start: float | None = None) -> tuple[float, float]:
    """Return (int_0^a A p(x, t_end) dx, int_{t_start}^{t_end} f dt).

    The two agree while the disturbance launched after t_start has not yet
    reached depth a, i.e. for t_end - t_start <= a.
    """
    t_start = r.neumann_input.t0 if t_start is None else t_start
    if t_end - t_start > a + 1e-12:
        raise ValueError("window longer than depth a: identity does not apply")
    if t_start < r.neumann_input.t0 - 1e-12:
        raise ValueError("window starts before the simulation")
    if a > r.grid.L:
        raise ValueError("depth a exceeds the domain")
    n = r.time_index(t_end)
    if n == 0 or n >= r.field.shape[0] - 1:
        raise ValueError("t_end needs stored neighbours on both sides")
    x = r.grid.x
    sel = x <= a + 1e-12
    A = eval_profile(r.profile, x[sel])[0]
    lhs = trapezoid(A * r.pressure[n, sel], x[sel])
    f = r.neumann_input
    i0 = int(round((t_start - f.t0) / f.dt))
    i1 = int(round((t_end - f.t0) / f.dt))
    rhs = trapezoid(f.samples[i0:i1 + 1], dx=f.dt)
    return float(lhs), float(rhs)


def refinement_floor(p: AreaProfile, g: SimGrid, f: Trace) -> float:
    """L2 distance between boundary traces at spacing dx and dx/2.

    The input is carried to the fine grid by linear interpolation, and traces
    are compared at the coarse sample times.
    """
    fine = g.refined(2)
    tf = f.t0 + np.arange(2 * len(f)) * fine.dt
    ff = Trace(f.t0, fine.dt, np.interp(tf, f.times, f.samples, right=0.0))
    coarse = apply_nd(p, g, f).samples
    dense = apply_nd(p, fine, ff).samples[::2]
    return float(np.sqrt(np.sum((coarse - dense) ** 2) * g.dt))
