"""Recover the area profile from the boundary, with and without noise.

The impulse response h comes either from a noiseless pulse experiment
(deconvolution) or from correlating ambient noise.  For each depth a the
probe equation gives an input f_a whose integral is the volume
Phi(a) = int_0^a A dx, and A(a) = dPhi/da.

Run:  python tutorials/04_reconstruction.py [--plot]
"""
import sys

import numpy as np

from ndcorr.profile import smoothstep_profile
from ndcorr.reconstruction import (deconvolve_impulse_response, impulse_response_from_noise,
                                   reconstruct_profile, solve_probe_equation, verify_probe)
from ndcorr.solver import SimGrid

p = smoothstep_profile(2.0)
dx, a_max = 0.01, 2.0
g = SimGrid.from_spacing(2.0, dx, 2 * a_max + 0.11)
h = deconvolve_impulse_response(p, g, pulse_width=0.05)
print(f"deconvolution: condition {h.condition:.0f}, round-trip residual {h.residual:.1e}")
direct = reconstruct_profile(h, a_max, 0.02, truth=p)
print(f"noiseless: Phi(2) = {direct.area_integral[-1]:.4f} (exact 3), "
      f"max relative error {direct.error_linf:.2e}")
for a in (1.0, 2.0):
    print(f"   interior pressure check at a = {a}: "
          f"{verify_probe(p, solve_probe_equation(h, a), a, dx):.2e}")

errs = []
for seed in range(3):
    ir, _ = impulse_response_from_noise(p, seed, T=2000.0, lag_max=4.1)
    res = reconstruct_profile(ir, a_max, 0.02, truth=p)
    errs.append(res.error_linf)
    print(f"from noise, seed {seed}: max relative error {res.error_linf:.3f}")
print(f"median {np.median(errs):.3f}")

if "--plot" in sys.argv:
    import matplotlib.pyplot as plt

    plt.plot(direct.a_grid, direct.A_true, "k", label="truth")
    plt.plot(direct.a_grid, direct.A_rec, "--", label="noiseless")
    plt.plot(res.a_grid, res.A_rec, ":", label="from noise (last seed)")
    plt.xlabel("depth a")
    plt.ylabel("A")
    plt.legend()
    plt.savefig("reconstruction.png", dpi=120)
    print("wrote reconstruction.png")
