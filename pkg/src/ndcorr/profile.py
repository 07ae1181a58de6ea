"""Admissible area profiles A(x) and the decay constants derived from them.

A profile equals 1 on [0, x_minus], equals A_inf on [x_plus, inf) and is a
smooth positive transition in between.  Four kinds are supported:

``constant``
    A = 1 everywhere (requires A_inf = 1).
``smoothstep``
    1 + (A_inf - 1) S(s) with the C^2 ramp S(s) = 3s^2 - 2s^3,
    s = (x - x_minus) / (x_plus - x_minus).
``bump``
    The smoothstep ramp plus a bump (4s(1-s))^3 scaled so that the value at
    the middle of the transition zone equals ``peak``.
``tabulated``
    Linear interpolation of (x, A) samples; A' is the interpolated centered
    difference of the table.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

KINDS = ("constant", "smoothstep", "bump", "tabulated")

# M is a grid maximum; the grid is this many times finer than the solver grid.
M_REFINE = 16
DEFAULT_SOLVER_DX = 0.01


@dataclass(frozen=True)
class AreaProfile:
    kind: str
    A_inf: float
    x_minus: float
    x_plus: float
    shape_params: tuple = ()
    table_x: np.ndarray | None = field(default=None, compare=False, repr=False)
    table_A: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __call__(self, x):
        return eval_profile(self, x)[0]

    def derivative(self, x):
        return eval_profile(self, x)[1]

    @property
    def peak(self) -> float | None:
        return self.shape_params[0] if self.kind == "bump" else None


@dataclass(frozen=True)
class DecayConstants:
    M: float
    ell: float
    lam: float
    resolution: float = 0.0  # grid spacing used for the maximum of |A'/A|


def _ramp(s):
    return s * s * (3.0 - 2.0 * s), 6.0 * s * (1.0 - s)


def _bump_shape(s):
    b = 4.0 * s * (1.0 - s)
    return b**3, 3.0 * b**2 * 4.0 * (1.0 - 2.0 * s)


def eval_profile(p: AreaProfile, x):
    """Return ``(A(x), A'(x))``; scalars in, scalars out."""
    xa = np.asarray(x, dtype=float)
    if p.kind == "constant":
        A, Ap = np.ones_like(xa), np.zeros_like(xa)
    elif p.kind == "tabulated":
        A = np.interp(xa, p.table_x, p.table_A)
        slope = np.gradient(p.table_A, p.table_x)
        Ap = np.interp(xa, p.table_x, slope, left=0.0, right=0.0)
        Ap = np.where((xa <= p.x_minus) | (xa >= p.x_plus), 0.0, Ap)
    else:
        width = p.x_plus - p.x_minus
        s = np.clip((xa - p.x_minus) / width, 0.0, 1.0)
        inside = (xa > p.x_minus) & (xa < p.x_plus)
        S, dS = _ramp(s)
        A = 1.0 + (p.A_inf - 1.0) * S
        Ap = (p.A_inf - 1.0) * dS / width
        if p.kind == "bump":
            # Amplitude chosen so that A equals the peak at s = 1/2.
            amp = p.shape_params[0] - 1.0 - 0.5 * (p.A_inf - 1.0)
            B, dB = _bump_shape(s)
            A = A + amp * B
            Ap = Ap + amp * dB / width
        Ap = np.where(inside, Ap, 0.0)
        A = np.where(xa >= p.x_plus, p.A_inf, np.where(xa <= p.x_minus, 1.0, A))
    if np.ndim(x) == 0:
        return float(A), float(Ap)
    return A, Ap


def _check_positive(p: AreaProfile) -> None:
    xs = np.linspace(0.0, p.x_plus + 0.1 * (p.x_plus - p.x_minus), 20001)
    A, _ = eval_profile(p, xs)
    if not np.all(A > 0):
        i = int(np.argmin(A))
        raise ValueError(f"profile is not positive: A({xs[i]:.4g}) = {A[i]:.4g}")


def read_table(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a CSV with header columns ``x,A``."""
    xs, As = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"x", "A"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: table needs header columns x,A")
        for row in reader:
            try:
                xs.append(float(row["x"]))
                As.append(float(row["A"]))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{reader.line_num}: bad table row") from exc
    return np.array(xs), np.array(As)


def make_profile(spec: Mapping[str, Any]) -> AreaProfile:
    """Build a validated profile from a mapping like the config ``profile`` section.

    Keys: ``kind``, ``a_inf``, ``x_minus``, ``x_plus``, ``peak`` (bump),
    ``table_path`` or ``table`` = (x, A) (tabulated).
    """
    kind = spec.get("kind")
    if kind not in KINDS:
        raise ValueError(f"unknown profile kind {kind!r}; expected one of {KINDS}")
    default_ainf = 1.0 if kind in ("constant", "bump") else None
    a_inf = spec.get("a_inf", default_ainf)
    if a_inf is None:
        raise ValueError(f"profile kind {kind!r} needs a_inf")
    a_inf = float(a_inf)
    if not a_inf > 0:
        raise ValueError(f"a_inf must be > 0, got {a_inf}")
    x_minus = float(spec.get("x_minus", 0.5))
    x_plus = float(spec.get("x_plus", 1.5))
    if not 0 < x_minus < x_plus:
        raise ValueError(f"need 0 < x_minus < x_plus, got {x_minus}, {x_plus}")

    if kind == "constant":
        if a_inf != 1.0:
            raise ValueError("constant profile requires a_inf = 1 (A = 1 near the boundary)")
        p = AreaProfile(kind, 1.0, x_minus, x_plus)
    elif kind == "smoothstep":
        p = AreaProfile(kind, a_inf, x_minus, x_plus)
    elif kind == "bump":
        if "peak" not in spec:
            raise ValueError("bump profile needs a 'peak' value")
        p = AreaProfile(kind, a_inf, x_minus, x_plus, (float(spec["peak"]),))
    else:
        if "table" in spec:
            tx, tA = (np.asarray(v, dtype=float) for v in spec["table"])
        elif "table_path" in spec:
            tx, tA = read_table(Path(spec["table_path"]))
        else:
            raise ValueError("tabulated profile needs table_path")
        p = _tabulated(tx, tA, a_inf, x_minus, x_plus)
    _check_positive(p)
    return p


def _tabulated(tx, tA, a_inf, x_minus, x_plus) -> AreaProfile:
    if tx.ndim != 1 or tx.shape != tA.shape or tx.size < 2:
        raise ValueError("table must have at least two (x, A) rows")
    if not np.all(np.isfinite(tA)) or np.any(tA <= 0):
        raise ValueError("tabulated A must be finite and strictly positive")
    if np.any(np.diff(tx) <= 0):
        raise ValueError("table x values must be strictly increasing")
    if tx[0] > x_minus or tx[-1] < x_plus:
        raise ValueError("table must cover [x_minus, x_plus]")
    A_lo = np.interp(x_minus, tx, tA)
    A_hi = np.interp(x_plus, tx, tA)
    left = tA[tx <= x_minus]
    right = tA[tx >= x_plus]
    if abs(A_lo - 1) > 1e-9 or np.any(np.abs(left - 1) > 1e-9):
        raise ValueError("tabulated A must equal 1 for x <= x_minus")
    if abs(A_hi - a_inf) > 1e-9 * a_inf or np.any(np.abs(right - a_inf) > 1e-9 * a_inf):
        raise ValueError("tabulated A must equal a_inf for x >= x_plus")
    tx = tx.copy()
    tA = tA.copy()
    tx.flags.writeable = False
    tA.flags.writeable = False
    return AreaProfile("tabulated", a_inf, x_minus, x_plus, (), tx, tA)


def constant_profile() -> AreaProfile:
    return make_profile({"kind": "constant"})


def smoothstep_profile(a_inf=2.0, x_minus=0.5, x_plus=1.5) -> AreaProfile:
    return make_profile({"kind": "smoothstep", "a_inf": a_inf,
                         "x_minus": x_minus, "x_plus": x_plus})


def bump_profile(peak, x_minus=0.5, x_plus=1.5, a_inf=1.0) -> AreaProfile:
    return make_profile({"kind": "bump", "peak": peak, "a_inf": a_inf,
                         "x_minus": x_minus, "x_plus": x_plus})


def decay_rate(M: float, ell: float) -> float:
    """Closed-form certified decay rate for given M and ell."""
    if M == 0:
        return 0.0
    q = M * ell
    return 0.5 * M * math.exp(-q) * math.sqrt(1.0 - 2.0 * q * math.exp(-2.0 * q))


def decay_constants(p: AreaProfile, solver_dx: float = DEFAULT_SOLVER_DX,
                    refine: int = M_REFINE) -> DecayConstants:
    """M = max |A'/A| on [0, x_plus] over a grid of spacing solver_dx/refine."""
    ell = p.x_plus
    h = solver_dx / refine
    n = int(math.ceil(ell / h)) + 1
    xs = np.linspace(0.0, ell, n)
    A, Ap = eval_profile(p, xs)
    M = float(np.max(np.abs(Ap / A)))
    return DecayConstants(M=M, ell=ell, lam=decay_rate(M, ell), resolution=ell / (n - 1))
