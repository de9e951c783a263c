import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dfrelay.channel import ChannelParams, FadeDraw, draw_fades
from dfrelay.constellation import make_mpsk
from dfrelay.labeling import LabelingProfile, identity_profile
from dfrelay.pep import (BOUNDS, BoundContext, full_pep_bound, ideal_link_conditional_pep,
                         ideal_link_pep_bound, nodf_pep_bound, odf_pep_bound, qfunc,
                         threshold_error_bound, threshold_error_exact, union_bound)

P = ChannelParams(0, 10, 10)


def test_qfunc_values():
    assert qfunc(0.0) == 0.5
    assert float(qfunc(1.0)) == pytest.approx(0.158655254, rel=1e-8)
    assert float(qfunc(-1.0)) == pytest.approx(1 - 0.158655254, rel=1e-8)
    assert qfunc([0, 3]).shape == (2,)


def test_threshold_reference_values():
    assert threshold_error_exact(2.0, 0.0, 0.0) == pytest.approx(0.0786496, abs=1e-6)
    assert threshold_error_bound(2.0, 0.0, 0.0) == pytest.approx(0.5 * math.exp(-1), rel=1e-12)
    x1, x2 = np.array([1 + 1j, 0.5]), np.array([0.2j, -0.5])
    n2 = np.sum(np.abs(x1 - x2) ** 2)
    assert threshold_error_exact(x1, x2, -n2) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        threshold_error_exact(1.0, 1.0, 0.0)


def test_threshold_bound_holds_for_nonnegative_offsets():
    rng = np.random.default_rng(11)
    for _ in range(10_000):
        k = rng.integers(1, 4)
        x1 = rng.normal(size=k) + 1j * rng.normal(size=k)
        x2 = rng.normal(size=k) + 1j * rng.normal(size=k)
        c = rng.exponential(2.0) * rng.integers(0, 2)
        assert threshold_error_exact(x1, x2, c) <= threshold_error_bound(x1, x2, c) + 1e-15


def test_threshold_bound_fails_far_below_minus_n_squared():
    # n = 0.1, c = -0.03 < -n^2: exact ~ 0.556 exceeds the bound ~ 0.506
    exact = threshold_error_exact(0.1, 0.0, -0.03)
    bound = threshold_error_bound(0.1, 0.0, -0.03)
    assert exact == pytest.approx(float(qfunc(-0.1 * math.sqrt(2))), rel=1e-12)
    assert exact > bound


def test_threshold_exact_by_monte_carlo():
    rng = np.random.default_rng(2)
    x1, x2, c = np.array([0.7 + 0.2j, -0.4j]), np.array([-0.1, 0.3 + 0.3j]), 0.4
    n = 400_000
    z = (rng.standard_normal((n, 2)) + 1j * rng.standard_normal((n, 2))) / math.sqrt(2)
    y = x1 + z
    hit = np.sum(np.abs(y - x1) ** 2, 1) > np.sum(np.abs(y - x2) ** 2, 1) + c
    p = threshold_error_exact(x1, x2, c)
    assert abs(hit.mean() - p) < 4 * math.sqrt(p * (1 - p) / n)


def _sq(a, b):
    return abs(a - b) ** 2


def test_nodf_bound_pinned_pair(psk8, nodf8):
    ctx = BoundContext(psk8, nodf8, P.at(20))
    es = 100.0
    S = psk8
    d1 = es * _sq(S[nodf8.x_s1(7)], S[nodf8.x_s1(8)])
    dr = es * _sq(S[nodf8.x_r(7)], S[nodf8.x_r(8)])
    d2 = es * _sq(S[nodf8.x_s2(7)], S[nodf8.x_s2(8)])
    expect = 0.5 / (1 + d1 / 4) / (1 + d2 / 4 + 10 * dr / 4)
    assert nodf_pep_bound(ctx, 7, 8) == pytest.approx(expect, rel=1e-13)
    assert nodf_pep_bound(ctx, 7, 8) == pytest.approx(5.4506e-5, rel=1e-4)


def test_odf_bound_bpsk_by_hand():
    S = make_mpsk(2)
    prof = identity_profile("odf", 2)
    ctx = BoundContext(S, prof, ChannelParams(0, 10, 10, 10))
    d = 10 * 4.0
    expect = 1 / (1 + d / 4) / (1 + 10 * d / 4) + 1 / (1 + d / 4) / (1 + 10 * (d + d) / 8)
    assert odf_pep_bound(ctx, 1, 2) == pytest.approx(expect, rel=1e-13)
    with pytest.raises(ValueError, match="ODF"):
        odf_pep_bound(BoundContext(S, identity_profile("nodf", 2), P), 1, 2)


def test_odf_bound_tends_to_ideal_link_for_perfect_source_relay(psk8, odf8):
    ctx = BoundContext(psk8, odf8, ChannelParams(0, 200, 10, 15))
    assert odf_pep_bound(ctx, 2, 5) == pytest.approx(ideal_link_pep_bound(ctx, 2, 5), rel=1e-12)


def test_ideal_link_is_twice_nodf(psk8, nodf8):
    for es in (0, 13, 30):
        ctx = BoundContext(psk8, nodf8, P.at(es))
        for a, b in [(1, 2), (3, 8), (6, 4)]:
            assert ideal_link_pep_bound(ctx, a, b) == pytest.approx(2 * nodf_pep_bound(ctx, a, b), rel=1e-14)
    far = BoundContext(psk8, nodf8, ChannelParams(0, 10, 300, 10))
    assert ideal_link_pep_bound(far, 1, 2) < 1e-30


def test_full_bound_contains_truncated_term(psk8, nodf8):
    ctx = BoundContext(psk8, nodf8, P.at(25))
    for a, b in [(1, 2), (7, 8), (4, 1)]:
        full = full_pep_bound(ctx, a, b)
        assert full > nodf_pep_bound(ctx, a, b)
    hi = BoundContext(psk8, nodf8, P.at(40))
    for a in range(1, 9):
        for b in range(1, 9):
            if a != b:
                ratio = full_pep_bound(hi, a, b) / nodf_pep_bound(hi, a, b)
                assert 1.0 <= ratio < 1.05


def test_full_bound_decreases_with_snr(psk8, odf8):
    vals = [full_pep_bound(BoundContext(psk8, odf8, P.at(es)), 3, 6) for es in range(0, 41, 5)]
    assert np.all(np.diff(vals) < 0)


def test_pair_validation(psk8, nodf8):
    ctx = BoundContext(psk8, nodf8, P)
    for fn in BOUNDS.values():
        with pytest.raises(ValueError):
            fn(ctx, 2, 2)
    with pytest.raises(ValueError):
        nodf_pep_bound(ctx, 0, 2)
    with pytest.raises(ValueError, match="disagree"):
        BoundContext(make_mpsk(4), nodf8, P)


def test_conditional_pep_limits(psk8, nodf8):
    ctx = BoundContext(psk8, nodf8, P.at(10))
    zero = FadeDraw(0j, 0j, 0j, 0j)
    assert ideal_link_conditional_pep(zero, ctx, 1, 2) == 0.5
    f = FadeDraw(0.3j, 0.2, -0.5, 0.1 + 0.1j)
    g = FadeDraw(0.6j, 0.4, -1.0, 0.2 + 0.2j)
    assert ideal_link_conditional_pep(g, ctx, 1, 2) < ideal_link_conditional_pep(f, ctx, 1, 2)


def test_conditional_pep_average_below_bound(psk8, nodf8, odf8):
    rng = np.random.default_rng(8)
    for prof in (nodf8, odf8):
        ctx = BoundContext(psk8, prof, P.at(10))
        fades = draw_fades(ctx.params, rng, 1_000_000)
        for a, b in [(1, 2), (5, 8)]:
            avg = ideal_link_conditional_pep(fades, ctx, a, b).mean()
            assert avg <= ideal_link_pep_bound(ctx, a, b)


def test_union_bound_properties(psk8, nodf8, odf8):
    grid = np.arange(0, 41, 5)
    u_n = union_bound(BoundContext(psk8, nodf8, P), grid)
    u_o = union_bound(BoundContext(psk8, odf8, P), grid)
    assert np.all(np.diff(u_n) < 0) and np.all(np.diff(u_o) < 0)
    assert u_n[6] < u_o[6]
    S = make_mpsk(2)
    ctx = BoundContext(S, identity_profile("nodf", 2), P)
    assert union_bound(ctx, [12.0], "full")[0] == pytest.approx(full_pep_bound(ctx.at(12.0), 1, 2))
    np.testing.assert_allclose(union_bound(BoundContext(psk8, nodf8, P), grid, nodf_pep_bound), u_n)


perms8 = st.permutations(range(1, 9)).map(tuple)


@settings(max_examples=25)
@given(perms8, perms8, st.sampled_from(["nodf", "odf", "full", "ideal"]))
def test_bound_slope_is_second_order(xr, xs2, name):
    scheme = "ODF" if name == "odf" else "NODF"
    prof = LabelingProfile(scheme, tuple(range(1, 9)), xr, xs2 if scheme == "NODF" else None)
    u = union_bound(BoundContext(make_mpsk(8), prof, P), [30.0, 40.0], name)
    assert -math.log10(u[1] / u[0]) == pytest.approx(2.0, abs=0.1)


@settings(max_examples=25)
@given(st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi), st.sampled_from(sorted(BOUNDS)),
       st.floats(0, 40))
def test_bounds_rotation_invariant(theta, phi, name, es):
    S = make_mpsk(8)
    scheme = "ODF" if name == "odf" else "NODF"
    prof = LabelingProfile(scheme, tuple(range(1, 9)), (1, 5, 2, 7, 3, 8, 4, 6),
                           (1, 3, 5, 6, 8, 2, 4, 7) if scheme == "NODF" else None)
    base = BoundContext(S, prof, P.at(es))
    rot = BoundContext(S.rotated(theta), prof, P.at(es), relay_set=S.rotated(phi))
    for a, b in [(1, 2), (4, 7), (8, 3)]:
        assert BOUNDS[name](rot, a, b) == pytest.approx(BOUNDS[name](base, a, b), rel=1e-12)
