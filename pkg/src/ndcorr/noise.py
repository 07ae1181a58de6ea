"""Discrete white noise, the switch-on cut-off chi and the pairing <w, phi>.

White noise is discretized as one N(0, 1/dt) sample per time step, which
makes sum(w_n phi(t_n) dt) an unbiased, variance-consistent stand-in for
the L^2 isometry.  Samples come from numpy's Philox4x64-10 counter-based
bit generator feeding ``Generator.standard_normal``; both are fixed
algorithms, so a seed reproduces the same path on every platform.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .solver import Trace, trace_inner

GENERATOR = "numpy.random.Philox(4x64-10) + Generator.standard_normal"


@dataclass(frozen=True)
class NoiseRealization:
    seed: int
    dt: float
    samples: np.ndarray

    t0 = 0.0

    def __len__(self) -> int:
        return len(self.samples)

    def as_trace(self) -> Trace:
        return Trace(0.0, self.dt, self.samples)


@dataclass(frozen=True)
class CutoffChi:
    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("cut-off ramp length delta must be positive")

    def __call__(self, t):
        s = np.clip(np.asarray(t, dtype=float) / self.delta, 0.0, 1.0)
        return s * s * (3.0 - 2.0 * s)


def member_seed(seed: int, member: int) -> int:
    """Seed of ensemble member ``member``: SeedSequence hash of (seed, member)."""
    return int(np.random.SeedSequence([seed, member]).generate_state(1, np.uint64)[0])


def sample_noise(seed: int, nt: int, dt: float) -> NoiseRealization:
    if nt < 1 or not dt > 0:
        raise ValueError("need nt >= 1 and dt > 0")
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    rng = np.random.Generator(np.random.Philox(seed))
    samples = rng.standard_normal(nt) / np.sqrt(dt)
    samples.flags.writeable = False
    return NoiseRealization(int(seed), float(dt), samples)


def apply_cutoff(chi: CutoffChi, w: NoiseRealization) -> Trace:
    t = np.arange(len(w)) * w.dt
    return Trace(0.0, w.dt, chi(t) * w.samples)


def pair(w, phi: Trace) -> float:
    """Discrete pairing sum(w(t_n) phi(t_n) dt) over common samples."""
    if isinstance(w, NoiseRealization):
        w = w.as_trace()
    return trace_inner(w, phi)
