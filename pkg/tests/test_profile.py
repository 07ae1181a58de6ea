import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ndcorr.profile import (bump_profile, constant_profile, decay_constants, decay_rate,
                            eval_profile, make_profile, read_table, smoothstep_profile)

# Frozen with mpmath at 30 digits (see _lam_mp below).
LAMBDA_ORACLE = {
    (1.0, 1.0): 0.15708596807094542,
    (2.0, 0.5): 0.3141719361418908,
    (0.5, 2.0): 0.0785429840354727,
}


def _lam_mp(M, ell):
    mp.mp.dps = 30
    M, ell = mp.mpf(M), mp.mpf(ell)
    q = M * ell
    return M / 2 * mp.e ** (-q) * mp.sqrt(1 - 2 * q * mp.e ** (-2 * q))


def test_constant_far_point():
    assert eval_profile(constant_profile(), 3.7) == (1.0, 0.0)


def test_smoothstep_left_plateau():
    A, Ap = eval_profile(smoothstep_profile(2.0, 0.5, 1.5), 0.2)
    assert (A, Ap) == (1.0, 0.0)


def test_smoothstep_midpoint():
    A, Ap = eval_profile(smoothstep_profile(2.0, 0.5, 1.5), 1.0)
    assert A == pytest.approx(1.5, abs=1e-15)
    assert Ap == pytest.approx(1.5, abs=1e-15)


def test_smoothstep_right_plateau_and_beyond():
    p = smoothstep_profile(2.0)
    A, Ap = eval_profile(p, np.array([1.5, 2.0, 40.0]))
    assert np.all(A == 2.0) and np.all(Ap == 0.0)


def test_smoothstep_area_integral_matches_quadrature():
    p = smoothstep_profile(2.0)
    mp.mp.dps = 20
    exact = mp.quad(lambda x: float(p(float(x))), [0, 0.5, 1.5, 2])
    assert float(exact) == pytest.approx(3.0, abs=1e-12)


def test_derivative_matches_finite_difference():
    for p in (smoothstep_profile(2.5), bump_profile(1.8)):
        x = np.linspace(0.55, 1.45, 50)
        h = 1e-6
        fd = (p(x + h) - p(x - h)) / (2 * h)
        assert np.allclose(p.derivative(x), fd, atol=1e-7)


def test_bump_peak_value():
    p = bump_profile(1.8)
    x = np.linspace(0, 2, 20001)
    assert p.peak == 1.8
    assert p(1.0) == pytest.approx(1.8, abs=1e-14)
    assert x[np.argmax(p(x))] == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("key", sorted(LAMBDA_ORACLE))
def test_decay_rate_oracle(key):
    lam = decay_rate(*key)
    assert lam == pytest.approx(LAMBDA_ORACLE[key], rel=1e-14)
    assert lam == pytest.approx(float(_lam_mp(*key)), rel=1e-12)


def test_decay_constants_constant_profile():
    dc = decay_constants(constant_profile())
    assert dc.M == 0.0 and dc.lam == 0.0


def test_decay_constants_smoothstep_frozen():
    dc = decay_constants(smoothstep_profile(2.0))
    assert dc.ell == 1.5
    # max |A'/A| for the cubic ramp, from a 10^6-point grid (independent of the 16x rule).
    x = np.linspace(0.5, 1.5, 1_000_001)
    s = x - 0.5
    ref = np.max(6 * s * (1 - s) / (1 + 3 * s**2 - 2 * s**3))
    assert dc.M == pytest.approx(ref, rel=1e-6)
    assert dc.lam == pytest.approx(decay_rate(dc.M, 1.5), rel=1e-15)


def test_narrower_ramp_doubles_M():
    wide = decay_constants(smoothstep_profile(2.0, 0.5, 1.5))
    narrow = decay_constants(smoothstep_profile(2.0, 0.5, 1.0))
    assert narrow.M >= 2 * wide.M * (1 - 1e-6)


@given(M=st.floats(1e-3, 20), ell=st.floats(1e-3, 20))
def test_sqrt_argument_bounded_below(M, ell):
    q = M * ell
    assert 1 - 2 * q * math.exp(-2 * q) >= 1 - 2 / math.e - 1e-15
    lam = decay_rate(M, ell)
    assert 0 < lam <= M / 2


@settings(max_examples=40, deadline=None)
@given(a_inf=st.floats(0.2, 5.0), xm=st.floats(0.05, 1.0), width=st.floats(0.1, 2.0))
def test_smoothstep_positive_with_exact_plateaus(a_inf, xm, width):
    p = smoothstep_profile(a_inf, xm, xm + width)
    x = np.linspace(0, xm + 2 * width, 2001)
    A, Ap = eval_profile(p, x)
    assert np.all(A > 0)
    assert np.all(A[x <= xm] == 1.0) and np.all(Ap[x <= xm] == 0.0)
    assert np.all(A[x >= xm + width] == a_inf)
    lo, hi = min(1.0, a_inf), max(1.0, a_inf)
    assert np.all((A >= lo - 1e-15) & (A <= hi + 1e-15))


@settings(max_examples=30, deadline=None)
@given(peak=st.floats(0.3, 3.0))
def test_bump_positive(peak):
    p = bump_profile(peak)
    A = p(np.linspace(0, 2, 2001))
    assert np.all(A > 0)


def test_tabulated_profile_roundtrip(tmp_path):
    x = np.linspace(0, 2, 201)
    src = smoothstep_profile(2.0)
    path = tmp_path / "area.csv"
    path.write_text("x,A\n" + "".join(f"{float(a)!r},{float(b)!r}\n" for a, b in zip(x, src(x))))
    tx, tA = read_table(path)
    p = make_profile({"kind": "tabulated", "a_inf": 2.0, "table_path": str(path)})
    xs = np.linspace(0, 2, 777)
    assert np.allclose(p(xs), np.interp(xs, tx, tA), atol=1e-15)
    assert np.max(np.abs(p(xs) - src(xs))) < 1e-3
    assert np.max(np.abs(p.derivative(xs) - src.derivative(xs))) < 2e-2


@pytest.mark.parametrize("spec, match", [
    ({"kind": "banana"}, "unknown profile kind"),
    ({"kind": "smoothstep"}, "needs a_inf"),
    ({"kind": "smoothstep", "a_inf": -1.0}, "a_inf must be"),
    ({"kind": "smoothstep", "a_inf": 2.0, "x_minus": 1.5, "x_plus": 0.5}, "x_minus < x_plus"),
    ({"kind": "constant", "a_inf": 2.0}, "requires a_inf = 1"),
    ({"kind": "bump"}, "peak"),
    ({"kind": "bump", "peak": -3.0}, "not positive"),
    ({"kind": "tabulated", "a_inf": 2.0, "table": ([0, 0.5, 1, 1.5, 2], [1.0, 1.0, 1.7, 2.1, 2.1])}, "equal a_inf"),
    ({"kind": "tabulated", "a_inf": 2.0, "table": ([0, 1, 2], [1.0, -1, 2.0])}, "positive"),
])
def test_make_profile_rejects(spec, match):
    with pytest.raises(ValueError, match=match):
        make_profile(spec)


def test_malformed_table(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,A\n0,1\n1,oops\n")
    with pytest.raises(ValueError, match="bad table row"):
        read_table(path)
