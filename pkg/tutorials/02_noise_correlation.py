"""Passive measurement: drive the pipe with white noise and correlate.

The measured trace alone looks like a random walk.  Correlating its time
derivative against the noise recovers the kernel of the Neumann-to-Dirichlet
map, and the error against the deterministic kernel falls like T^-1/2.

Run:  python tutorials/02_noise_correlation.py [--plot]
"""
import sys

import numpy as np

from ndcorr.correlation import (convergence_study, cross_correlate, deterministic_kernel,
                                kernel_error, noise_record, record_length)
from ndcorr.profile import smoothstep_profile

p = smoothstep_profile(2.0)
dx, lags, T = 0.01, (-0.5, 4.0), 2000.0
w, f, d = noise_record(p, L=2.0, dx=dx, seed=0, duration=record_length(T, lags, dx, 0.1))
G = cross_correlate(d, w, lags, T, burn_in=0.1, forcing=f)
ref = deterministic_kernel(p, 2.0, dx, lags)

print(f"noise record: {len(w)} samples, trace range [{d.samples.min():.1f}, {d.samples.max():.1f}]")
i0 = G.zero_index
print(f"jump at zero lag: {G.values[i0 + 1] - G.values[i0 - 1]:+.3f} (expected -1)")
rel = kernel_error(G, ref) / np.sqrt(np.sum(ref.values**2) * dx)
print(f"relative L2 error of the kernel at T = {T:g}: {rel:.3f}")
for tau in (-0.3, 0.5, 1.0, 2.0, 3.0):
    k = np.argmin(np.abs(G.lags - tau))
    print(f"  tau = {tau:+.1f}   estimate {G.values[k]:+.4f} +- {np.sqrt(G.variance_estimates[k]):.4f}"
          f"   oracle {ref.values[k]:+.4f}")

study = convergence_study(p, [250, 1000, 4000], range(8))
for T_, m, s in study.rows():
    print(f"T = {T_:6g}   mean error {m:.4f}   std {s:.4f}")
print("ratios", np.round(study.mean_error / study.mean_error[0], 3), "(ideal 1, 0.5, 0.25)")

if "--plot" in sys.argv:
    import matplotlib.pyplot as plt

    plt.plot(G.lags, G.values, label=f"estimate, T = {T:g}")
    plt.plot(ref.lags, ref.values, "--", label="deterministic kernel")
    plt.xlabel("lag")
    plt.legend()
    plt.savefig("noise_correlation.png", dpi=120)
    print("wrote noise_correlation.png")
