import math

import numpy as np
import pytest

from dfrelay.channel import (ChannelParams, FadeDraw, complex_normal, db_to_linear, draw_fades,
                             draw_noise, phase1, transmit, transmit_nodf, transmit_odf)


def test_params_linear_values():
    p = ChannelParams(0, 10, 20, 3)
    assert (p.var_ds, p.var_rs, p.var_dr) == pytest.approx((1.0, 10.0, 100.0))
    assert p.es == pytest.approx(10**0.3)
    assert p.amplitude == pytest.approx(math.sqrt(10**0.3))
    assert p.at(7).es_db == 7.0 and p.at(7).sigma_dr_db == 20.0


def test_params_reject_non_finite():
    with pytest.raises(ValueError, match="es_db"):
        ChannelParams(es_db=float("nan"))


def test_db_to_linear():
    np.testing.assert_allclose(db_to_linear([0, 10, -10]), [1, 10, 0.1])


def test_complex_normal_moments():
    rng = np.random.default_rng(5)
    z = complex_normal(rng, 4.0, 200_000)
    assert np.mean(np.abs(z) ** 2) == pytest.approx(4.0, rel=0.02)
    assert abs(np.mean(z)) < 0.02
    assert np.mean(z.real**2) == pytest.approx(np.mean(z.imag**2), rel=0.03)
    assert abs(np.mean(z * z)) < 0.03  # circular symmetry
    assert isinstance(complex_normal(rng, 1.0), complex)


def test_draw_order_is_fixed():
    p = ChannelParams(0, 10, 10)
    f = draw_fades(p, np.random.default_rng(1), 3)
    rng = np.random.default_rng(1)
    z = rng.standard_normal((2, 3))
    np.testing.assert_array_equal(f.c_rs, math.sqrt(5.0) * (z[0] + 1j * z[1]))
    assert len(draw_noise(np.random.default_rng(0), 4)) == 3


def _fades():
    return FadeDraw(c_rs=0.5 + 0.1j, c_ds1=1 - 1j, c_ds2=0.3j, c_dr=2.0)


def test_noiseless_nodf(psk8, nodf8):
    p = ChannelParams(es_db=6)
    a = p.amplitude
    f = _fades()
    rx = transmit(p, f, 3, 5, nodf8, psk8)
    assert rx.y_r == pytest.approx(f.c_rs * a * psk8[nodf8.x_s1(3)])
    assert rx.y_d1 == pytest.approx(f.c_ds1 * a * psk8[nodf8.x_s1(3)])
    assert rx.y_d2 == pytest.approx(f.c_ds2 * a * psk8[nodf8.x_s2(3)] + f.c_dr * a * psk8[nodf8.x_r(5)])


def test_noiseless_odf_has_no_source_phase2(psk8, odf8):
    p = ChannelParams(es_db=0)
    f = _fades()
    rx = transmit_odf(p, f, 2, 2, odf8, psk8)
    assert rx.y_d2 == pytest.approx(f.c_dr * psk8[odf8.x_r(2)])


def test_explicit_noise_and_relay_set(psk8, nodf8):
    p = ChannelParams(es_db=0)
    f = _fades()
    noise = (0.1, 0.2j, -0.3)
    rot = psk8.rotated(0.4)
    rx = transmit(p, f, 1, 1, nodf8, psk8, noise=noise, relay_set=rot)
    assert rx.y_r == pytest.approx(f.c_rs * psk8[1] + 0.1)
    assert rx.y_d2 == pytest.approx(f.c_ds2 * psk8[1] + f.c_dr * rot[1] - 0.3)
    y_r, y_d1 = phase1(p, f, 1, nodf8, psk8, noise)
    assert y_d1 == pytest.approx(f.c_ds1 * psk8[1] + 0.2j)


def test_vectorised_with_rng(psk8, nodf8):
    p = ChannelParams(es_db=10)
    rng = np.random.default_rng(3)
    f = draw_fades(p, rng, 50)
    m = rng.integers(1, 9, 50)
    rx = transmit_nodf(p, f, m, m, nodf8, psk8, rng)
    assert rx.y_d2.shape == (50,)


def test_scheme_checks(psk8, nodf8, odf8):
    p = ChannelParams()
    with pytest.raises(ValueError):
        transmit_nodf(p, _fades(), 1, 1, odf8, psk8)
    with pytest.raises(ValueError):
        transmit_odf(p, _fades(), 1, 1, nodf8, psk8)
