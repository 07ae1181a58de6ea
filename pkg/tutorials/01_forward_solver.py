"""Forward problem: push a unit-mass bump into the pipe and listen at the mouth.

For a uniform pipe the boundary value is minus the running integral of the
input, so it settles at -1.  A widening pipe (smoothstep, A_inf = 2) sends
part of the wave back, and the mouth slowly drifts toward -1/A_inf.

Run:  python tutorials/01_forward_solver.py [--plot]
"""
import sys

import numpy as np

from ndcorr.profile import constant_profile, smoothstep_profile
from ndcorr.solver import SimGrid, apply_nd, bump_trace, exact_constant_oracle

g = SimGrid.from_spacing(L=4.0, dx=0.005, t_max=12.0)
f = bump_trace(start=0.1, width=0.5, dt=g.dt, nt=g.nt)

flat = apply_nd(constant_profile(), g, f)
wide = apply_nd(smoothstep_profile(2.0), g, f)
oracle = exact_constant_oracle(f)

print(f"grid: dx={g.dx}, dt={g.dt}, {g.nt} steps")
print(f"uniform pipe, max deviation from d'Alembert: "
      f"{np.max(np.abs(flat.samples - oracle.samples)):.2e}")
for t in (1.0, 2.0, 4.0, 8.0, 12.0):
    n = min(int(round(t / g.dt)), g.nt - 1)
    print(f"t = {t:5.1f}   uniform {flat.samples[n]:+.4f}   widening {wide.samples[n]:+.4f}")
print("the widening pipe approaches -1/A_inf = -0.5")

# Second-order convergence: halve dx and watch the error drop by 4.
errs = []
for dx in (0.02, 0.01, 0.005):
    gg = SimGrid.from_spacing(2.0, dx, 3.0)
    ff = bump_trace(0.1, 0.5, gg.dt, gg.nt)
    errs.append(np.max(np.abs(apply_nd(constant_profile(), gg, ff).samples
                              - exact_constant_oracle(ff).samples)))
print("errors", [f"{e:.2e}" for e in errs], "ratios", np.round(np.array(errs[:-1]) / errs[1:], 2))

if "--plot" in sys.argv:
    import matplotlib.pyplot as plt

    plt.plot(flat.times, flat.samples, label="A = 1")
    plt.plot(wide.times, wide.samples, label="smoothstep, A_inf = 2")
    plt.xlabel("t")
    plt.ylabel("w(0, t)")
    plt.legend()
    plt.savefig("forward_solver.png", dpi=120)
    print("wrote forward_solver.png")
