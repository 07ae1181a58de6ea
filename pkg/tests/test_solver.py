import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ndcorr.profile import bump_profile, constant_profile, make_profile, smoothstep_profile
from ndcorr.solver import (SimGrid, Trace, apply_nd, apply_nd_reversed, bump_trace,
                           conservation_check, exact_constant_oracle, refinement_floor,
                           simulate, trace_inner)

SHORT = make_profile({"kind": "constant", "x_minus": 0.1, "x_plus": 0.2})


def _bump_setup(p, dx, t_max=4.0, L=2.0, cfl=1.0, start=0.1, width=0.5):
    g = SimGrid.from_spacing(L, dx, t_max, cfl)
    return g, bump_trace(start, width, g.dt, g.nt)


def test_grid_properties():
    g = SimGrid.from_spacing(2.0, 0.01, 3.0, 0.5)
    assert g.nx == 200 and g.dt == pytest.approx(0.005)
    assert g.t_max == pytest.approx(3.0)
    assert g.dt <= g.dx
    assert g.refined(2).dx == pytest.approx(0.005)


@pytest.mark.parametrize("cfl", [0.0, -0.1, 1.2])
def test_cfl_gate(cfl):
    with pytest.raises(ValueError, match="CFL"):
        SimGrid(2.0, 200, 100, cfl)


def test_bump_has_unit_mass():
    f = bump_trace(0.1, 0.5, 1e-3, 1000)
    assert np.trapezoid(f.samples, dx=f.dt) == pytest.approx(1.0, abs=1e-12)
    assert f.support()[0] > 0.1 and f.support()[1] < 0.6


def test_zero_input_gives_zero_field():
    p = smoothstep_profile()
    g = SimGrid.from_spacing(2.0, 0.02, 3.0)
    r = simulate(p, g, Trace(0.0, g.dt, np.zeros(g.nt)))
    assert not np.any(r.field)
    assert not np.any(r.dirichlet_trace.samples)


def test_constant_profile_matches_dalembert():
    g, f = _bump_setup(constant_profile(), 0.005)
    d = apply_nd(constant_profile(), g, f)
    assert np.max(np.abs(d.samples - exact_constant_oracle(f).samples)) < 5e-4
    late = d.times >= 1.0
    assert np.allclose(d.samples[late], -1.0, atol=5e-4)


def test_oracle_of_zero_is_zero():
    assert not np.any(exact_constant_oracle(Trace(0.0, 0.1, np.zeros(7))).samples)


def test_trace_is_first_field_column():
    p = bump_profile(1.8)
    g, f = _bump_setup(p, 0.02)
    r = simulate(p, g, f)
    assert np.array_equal(r.field[:, 0], r.dirichlet_trace.samples)


def test_decimated_field_rows():
    p = smoothstep_profile()
    g, f = _bump_setup(p, 0.02)
    full = simulate(p, g, f)
    dec = simulate(p, g, f, decimate=5)
    assert np.array_equal(dec.field, full.field[::5])
    assert np.array_equal(dec.dirichlet_trace.samples, full.dirichlet_trace.samples)


def test_numba_and_numpy_engines_agree():
    p = smoothstep_profile(2.5)
    g, f = _bump_setup(p, 0.02, cfl=0.7)
    a = simulate(p, g, f, engine="numba")
    b = simulate(p, g, f, engine="numpy")
    assert np.allclose(a.field, b.field, rtol=0, atol=1e-13)


@pytest.mark.parametrize("p", [constant_profile(), smoothstep_profile(), bump_profile(1.8)])
def test_causality_cone(p):
    start = 0.4
    g, f = _bump_setup(p, 0.01, t_max=2.0, start=start)
    r = simulate(p, g, f)
    t = r.field_times[:, None]
    x = g.x[None, :]
    outside = t < start + x - 2 * g.dx
    assert np.max(np.abs(r.field[np.broadcast_to(outside, r.field.shape)])) <= \
        1e-10 * np.max(np.abs(r.field))


def test_shift_equivariance_is_exact():
    p = smoothstep_profile()
    g, f = _bump_setup(p, 0.01, t_max=3.0)
    n = 37
    shifted = Trace(0.0, g.dt, np.r_[np.zeros(n), f.samples[:-n]])
    a = apply_nd(p, g, f).samples
    b = apply_nd(p, g, shifted).samples
    assert np.array_equal(b[n:], a[:-n])
    assert not np.any(b[:n])


def test_transparent_boundary_reflection():
    g, f = _bump_setup(SHORT, 0.01, t_max=4.0, L=1.0, cfl=0.5)
    d = apply_nd(SHORT, g, f)
    err = np.abs(d.samples - exact_constant_oracle(f).samples)
    # The reflected wave would return to x = 0 after t = 0.6 + 2L.
    assert np.max(err[d.times > 2.7]) < 1e-3


def test_reversed_map_constant_profile():
    g = SimGrid.from_spacing(2.0, 0.005, 4.0)
    phi = bump_trace(1.0, 0.6, g.dt, g.nt)
    t_rev = (g.nt - 1) * g.dt
    lt = apply_nd_reversed(constant_profile(), g, phi, t_rev)
    tail = np.cumsum(phi.samples[::-1])[::-1] * g.dt
    exact = -(tail - 0.5 * phi.samples * g.dt)
    assert np.max(np.abs(lt.samples - exact)) < 1e-3


def test_reversing_twice_returns_forward_map():
    p = smoothstep_profile()
    g, f = _bump_setup(p, 0.01, t_max=3.0)
    t_rev = (g.nt - 1) * g.dt
    twice = apply_nd_reversed(p, g, f.reversed_about(t_rev), t_rev).reversed_about(t_rev)
    assert np.allclose(twice.samples, apply_nd(p, g, f).samples, atol=1e-14)
    assert twice.t0 == pytest.approx(0.0, abs=1e-12)


def test_reversed_map_rejects_window_inside_support():
    g = SimGrid.from_spacing(2.0, 0.01, 3.0)
    phi = bump_trace(1.0, 0.6, g.dt, g.nt)
    with pytest.raises(ValueError, match="support"):
        apply_nd_reversed(constant_profile(), g, phi, 1.2)


def test_reciprocity_bump_pair():
    p = bump_profile(1.8)
    g = SimGrid.from_spacing(3.0, 0.01, 6.0)
    f = bump_trace(0.2, 0.5, g.dt, g.nt)
    phi = bump_trace(1.5, 0.7, g.dt, g.nt)
    lhs = trace_inner(apply_nd(p, g, f), phi)
    rhs = trace_inner(f, apply_nd_reversed(p, g, phi, (g.nt - 1) * g.dt))
    assert abs(lhs - rhs) <= 1e-3 * abs(lhs)


def test_conservation_zero_input():
    p = smoothstep_profile()
    g = SimGrid.from_spacing(2.0, 0.02, 2.0)
    r = simulate(p, g, Trace(0.0, g.dt, np.zeros(g.nt)))
    assert conservation_check(r, 1.0, 1.0) == (0.0, 0.0)


def test_conservation_window_longer_than_depth():
    p = smoothstep_profile()
    g, f = _bump_setup(p, 0.02, t_max=2.0)
    r = simulate(p, g, f)
    with pytest.raises(ValueError, match="window"):
        conservation_check(r, 0.5, 1.0)


def test_self_convergence_smoothstep():
    p = smoothstep_profile()
    traces = []
    for dx in (0.02, 0.01, 0.005, 0.0025):
        g, f = _bump_setup(p, dx, t_max=4.0)
        traces.append(apply_nd(p, g, f).samples[::round(0.02 / dx)])
    fine = traces[-1] + (traces[-1] - traces[-2]) / 3  # Richardson limit
    errs = [np.max(np.abs(t - fine)) for t in traces[:-1]]
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_refinement_floor_small_for_smooth_input():
    p = smoothstep_profile()
    g, f = _bump_setup(p, 0.01, t_max=3.0)
    assert refinement_floor(p, g, f) < 1e-3


def test_simulate_errors():
    p = smoothstep_profile()
    g = SimGrid.from_spacing(2.0, 0.01, 1.0)
    with pytest.raises(ValueError, match="dt"):
        simulate(p, g, Trace(0.0, 0.02, np.zeros(10)))
    with pytest.raises(ValueError, match="domain"):
        simulate(p, SimGrid.from_spacing(1.5, 0.01, 1.0), Trace(0.0, g.dt, np.zeros(10)))
    with pytest.raises(ValueError, match="samples"):
        simulate(p, g, Trace(0.0, g.dt, np.zeros(g.nt + 1)))
    bad = np.zeros(10)
    bad[3] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        simulate(p, g, Trace(0.0, g.dt, bad))


def test_overflow_is_reported():
    p = smoothstep_profile()
    g = SimGrid.from_spacing(2.0, 0.01, 0.5)
    f = np.zeros(g.nt)
    f[1:] = 1.7e308
    with pytest.raises(FloatingPointError, match="non-finite field"):
        simulate(p, g, Trace(0.0, g.dt, f))


@settings(max_examples=20, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 2**31))
def test_linearity(a, b, seed):
    p = bump_profile(1.8)
    g = SimGrid.from_spacing(2.0, 0.02, 2.0)
    r = np.random.default_rng(seed)
    f1 = Trace(0.0, g.dt, r.standard_normal(g.nt))
    f2 = Trace(0.0, g.dt, r.standard_normal(g.nt))
    combo = apply_nd(p, g, Trace(0.0, g.dt, a * f1.samples + b * f2.samples)).samples
    sep = a * apply_nd(p, g, f1).samples + b * apply_nd(p, g, f2).samples
    assert np.allclose(combo, sep, atol=1e-9 * (1 + np.max(np.abs(sep))))
