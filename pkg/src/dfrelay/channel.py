"""Rayleigh block-free channel model for both relaying phases.

All functions broadcast over arrays of trials. Noise is unit-variance
circularly symmetric complex Gaussian (1/2 per real dimension); transmit
symbols are scaled by ``sqrt(Es)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .labeling import Scheme

__all__ = [
    "ChannelParams",
    "FadeDraw",
    "ReceivedPair",
    "db_to_linear",
    "complex_normal",
    "draw_fades",
    "draw_noise",
    "phase1",
    "transmit_nodf",
    "transmit_odf",
    "transmit",
]


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


@dataclass(frozen=True)
class ChannelParams:
    """Link variances and symbol energy, all in dB."""

    sigma_ds_db: float = 0.0
    sigma_rs_db: float = 10.0
    sigma_dr_db: float = 10.0
    es_db: float = 0.0

    def __post_init__(self):
        for name in ("sigma_ds_db", "sigma_rs_db", "sigma_dr_db", "es_db"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
            object.__setattr__(self, name, v)

    @property
    def var_ds(self):
        return float(db_to_linear(self.sigma_ds_db))

    @property
    def var_rs(self):
        return float(db_to_linear(self.sigma_rs_db))

    @property
    def var_dr(self):
        return float(db_to_linear(self.sigma_dr_db))

    @property
    def es(self):
        return float(db_to_linear(self.es_db))

    @property
    def amplitude(self):
        return math.sqrt(self.es)

    def at(self, es_db):
        return replace(self, es_db=float(es_db))


@dataclass(frozen=True)
class FadeDraw:
    """Fade coefficients for one trial (scalars) or a batch (equal-shape arrays).

    ``c_ds1`` doubles as the single S-D coefficient of the orthogonal scheme.
    """

    c_rs: np.ndarray
    c_ds1: np.ndarray
    c_ds2: np.ndarray
    c_dr: np.ndarray


@dataclass(frozen=True)
class ReceivedPair:
    y_r: np.ndarray
    y_d1: np.ndarray
    y_d2: np.ndarray


def complex_normal(rng, variance, size=None):
    """Zero-mean circularly symmetric complex Gaussian with ``E|c|^2 = variance``."""
    scale = math.sqrt(variance / 2.0)
    shape = (2,) if size is None else (2, *np.atleast_1d(size))
    z = rng.standard_normal(size=shape)
    out = scale * (z[0] + 1j * z[1])
    return complex(out) if size is None else out


def draw_fades(params, rng, size=None):
    """Draw ``(c_rs, c_ds1, c_ds2, c_dr)`` independently, in that order."""
    return FadeDraw(
        c_rs=complex_normal(rng, params.var_rs, size),
        c_ds1=complex_normal(rng, params.var_ds, size),
        c_ds2=complex_normal(rng, params.var_ds, size),
        c_dr=complex_normal(rng, params.var_dr, size),
    )


def draw_noise(rng, size=None):
    """Unit-variance noise samples ``(z_r, z_d1, z_d2)``."""
    return tuple(complex_normal(rng, 1.0, size) for _ in range(3))


def _symbols(labeling, signal_set, messages):
    return labeling.symbols(signal_set)[np.asarray(messages) - 1]


def _noise(rng, noise, shape):
    if noise is not None:
        return noise
    if rng is None:
        return (0.0, 0.0, 0.0)
    return draw_noise(rng, shape if shape else None)


def phase1(params, fades, m, profile, signal_set, noise=(0.0, 0.0, 0.0)):
    """Relay and destination observations of the phase-1 source symbol."""
    x = params.amplitude * _symbols(profile.x_s1, signal_set, m)
    return fades.c_rs * x + noise[0], fades.c_ds1 * x + noise[1]


def _phase2(params, fades, m, m_hat, profile, signal_set, relay_set, z):
    amp = params.amplitude
    y = fades.c_dr * amp * _symbols(profile.x_r, relay_set, m_hat) + z
    if profile.scheme is Scheme.NODF:
        y = y + fades.c_ds2 * amp * _symbols(profile.x_s2, signal_set, m)
    return y


def transmit(params, fades, m, m_hat, profile, signal_set, rng=None, *, noise=None,
             relay_set=None):
    """Received samples for messages ``m`` when the relay forwards ``m_hat``.

    Noise comes from ``noise`` (a ``(z_r, z_d1, z_d2)`` tuple) if given,
    otherwise it is drawn from ``rng``; with neither, the channel is noiseless.
    ``relay_set`` lets the relay use a different (e.g. rotated) constellation.
    """
    shape = np.shape(m)
    z = _noise(rng, noise, shape)
    y_r, y_d1 = phase1(params, fades, m, profile, signal_set, z)
    y_d2 = _phase2(params, fades, m, m_hat, profile, signal_set,
                   signal_set if relay_set is None else relay_set, z[2])
    return ReceivedPair(y_r, y_d1, y_d2)


def transmit_nodf(params, fades, m, m_hat, profile, signal_set, rng=None, **kw):
    if profile.scheme is not Scheme.NODF:
        raise ValueError("transmit_nodf needs an NODF profile")
    return transmit(params, fades, m, m_hat, profile, signal_set, rng, **kw)


def transmit_odf(params, fades, m, m_hat, profile, signal_set, rng=None, **kw):
    if profile.scheme is not Scheme.ODF:
        raise ValueError("transmit_odf needs an ODF profile")
    return transmit(params, fades, m, m_hat, profile, signal_set, rng, **kw)
