"""Relay ML, destination near-ML and ideal-link ML decisions.

Every decision function is vectorised over trials and returns 1-based
messages. Ties go to the lowest message index (``argmin`` order).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .channel import ChannelParams, FadeDraw
from .labeling import Scheme

__all__ = [
    "DecoderInput",
    "relay_ml",
    "f_metric",
    "f_metric_table",
    "near_ml",
    "near_ml_symbols",
    "ideal_ml",
    "ideal_ml_symbols",
    "check_observations",
    "RelayDetector",
    "NearMLDetector",
    "IdealLinkDetector",
]

_CHUNK = 8192


def _abs2(z):
    return z.real**2 + z.imag**2


@dataclass(frozen=True)
class DecoderInput:
    """Destination observations with full CSI.

    ``params`` only contributes ``es_db``. ``relay_set`` overrides the
    constellation the relay map indexes into.
    """

    y_d1: np.ndarray
    y_d2: np.ndarray
    fades: FadeDraw
    params: ChannelParams
    profile: object
    signal_set: object
    relay_set: object = None

    def symbol_tables(self):
        amp = self.params.amplitude
        rs = self.signal_set if self.relay_set is None else self.relay_set
        s1 = amp * self.profile.x_s1.symbols(self.signal_set)
        r = amp * self.profile.x_r.symbols(rs)
        s2 = None
        if self.profile.scheme is Scheme.NODF:
            s2 = amp * self.profile.x_s2.symbols(self.signal_set)
        return s1, s2, r


def relay_ml(y_r, c_rs, signal_set, x_s1, es_db):
    """ML message estimate at the relay: ``argmin_m |y_r - c_rs*sqrt(Es)*X_s1(m)|^2``."""
    amp = np.sqrt(10.0 ** (es_db / 10.0))
    s1 = amp * x_s1.symbols(signal_set)
    y = np.asarray(y_r)[..., None]
    c = np.asarray(c_rs)[..., None]
    return np.argmin(_abs2(y - c * s1), axis=-1) + 1


def _f_table(y_d1, y_d2, c_rs, c_ds1, c_ds2, c_dr, s1, s2, r):
    """Metric array indexed ``[..., j, a]`` (relay hypothesis, source hypothesis)."""
    d1 = _abs2(s1[None, :] - s1[:, None])  # [j, a]
    y_d1 = np.asarray(y_d1)[..., None]
    t1 = 0.25 * _abs2(np.asarray(c_rs))[..., None, None] * d1
    t2 = _abs2(y_d1 - np.asarray(c_ds1)[..., None] * s1)
    u = np.asarray(y_d2)[..., None]
    if s2 is not None:
        u = u - np.asarray(c_ds2)[..., None] * s2  # [..., a]
    v = np.asarray(c_dr)[..., None] * r  # [..., j]
    t3 = _abs2(u[..., None, :] - v[..., :, None])
    return t1 + t2[..., None, :] + t3


def f_metric_table(inp):
    """All ``f^j(a)`` values as an array ``[..., j-1, a-1]``."""
    s1, s2, r = inp.symbol_tables()
    f = inp.fades
    return _f_table(inp.y_d1, inp.y_d2, f.c_rs, f.c_ds1, f.c_ds2, f.c_dr, s1, s2, r)


def f_metric(inp, j, a):
    """Single metric value ``f^j(a)`` for 1-based relay hypothesis ``j`` and message ``a``."""
    M = inp.signal_set.M
    if not (1 <= j <= M and 1 <= a <= M):
        raise ValueError(f"messages must lie in 1..{M}")
    return f_metric_table(inp)[..., j - 1, a - 1]


def near_ml_symbols(y_d1, y_d2, c_rs, c_ds1, c_ds2, c_dr, s1, s2, r):
    """Min-min decision from pre-scaled symbol tables; ``s2=None`` drops the source term."""
    y_d1 = np.asarray(y_d1)
    shape = y_d1.shape
    args = [np.ravel(np.broadcast_to(np.asarray(v), shape)) for v in
            (y_d1, y_d2, c_rs, c_ds1, c_ds2, c_dr)]
    n = args[0].size
    out = np.empty(n, dtype=np.intp)
    for lo in range(0, n, _CHUNK):
        sl = slice(lo, lo + _CHUNK)
        f = _f_table(*(v[sl] for v in args), s1, s2, r)
        out[sl] = np.argmin(f.min(axis=-2), axis=-1)
    return (out + 1).reshape(shape)


def near_ml(inp):
    """Destination near-ML decision ``argmin_a min_j f^j(a)``."""
    s1, s2, r = inp.symbol_tables()
    f = inp.fades
    return near_ml_symbols(inp.y_d1, inp.y_d2, f.c_rs, f.c_ds1, f.c_ds2, f.c_dr, s1, s2, r)


def ideal_ml_symbols(y_d1, y_d2, c_ds1, c_ds2, c_dr, s1, s2, r):
    y_d1 = np.asarray(y_d1)[..., None]
    y_d2 = np.asarray(y_d2)[..., None]
    u = y_d2
    if s2 is not None:
        u = u - np.asarray(c_ds2)[..., None] * s2
    u = u - np.asarray(c_dr)[..., None] * r
    metric = _abs2(y_d1 - np.asarray(c_ds1)[..., None] * s1) + _abs2(u)
    return np.argmin(metric, axis=-1) + 1


def ideal_ml(inp):
    """ML decision assuming the relay always forwards the true message."""
    s1, s2, r = inp.symbol_tables()
    f = inp.fades
    return ideal_ml_symbols(inp.y_d1, inp.y_d2, f.c_ds1, f.c_ds2, f.c_dr, s1, s2, r)


# ---------------------------------------------------------------------------
# estimator wrappers


def check_observations(X, n_columns):
    """Validate a 2-D complex observation matrix with ``n_columns`` columns."""
    X = np.asarray(X)
    if X.ndim == 1 and n_columns == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[1] != n_columns:
        raise ValueError(f"expected an array of shape (n_samples, {n_columns}), got {X.shape}")
    if not np.issubdtype(X.dtype, np.number):
        raise TypeError(f"observations must be numeric, got dtype {X.dtype}")
    X = X.astype(complex, copy=False)
    if not np.all(np.isfinite(X)):
        raise ValueError("observations contain NaN or infinity")
    return X


class _DetectorBase(ClassifierMixin, BaseEstimator):
    n_columns = None

    def __init__(self, signal_set, profile, es_db=0.0, relay_set=None):
        self.signal_set = signal_set
        self.profile = profile
        self.es_db = es_db
        self.relay_set = relay_set

    def fit(self, X=None, y=None):
        """Precompute scaled symbol tables; no parameters are learned from data."""
        if self.profile.M != self.signal_set.M:
            raise ValueError("profile and signal set disagree on M")
        inp = DecoderInput(None, None, None, ChannelParams(es_db=self.es_db), self.profile,
                           self.signal_set, self.relay_set)
        self.symbols_ = inp.symbol_tables()
        self.classes_ = np.arange(1, self.signal_set.M + 1)
        return self

    def _check(self, X):
        check_is_fitted(self, "symbols_")
        return check_observations(X, self.n_columns)


class RelayDetector(_DetectorBase):
    """Relay ML detector; ``X`` columns are ``[y_r, c_rs]``."""

    n_columns = 2

    def predict(self, X):
        X = self._check(X)
        s1 = self.symbols_[0]
        return np.argmin(_abs2(X[:, :1] - X[:, 1:2] * s1), axis=1) + 1


class NearMLDetector(_DetectorBase):
    """Destination near-ML detector.

    ``X`` columns are ``[y_d1, y_d2, c_rs, c_ds1, c_ds2, c_dr]``; the
    ``c_ds2`` column is ignored for ODF profiles.
    """

    n_columns = 6

    def predict(self, X):
        X = self._check(X)
        s1, s2, r = self.symbols_
        return near_ml_symbols(*X.T, s1, s2, r)


class IdealLinkDetector(_DetectorBase):
    """ML detector for an error-free relay; same columns as :class:`NearMLDetector`."""

    n_columns = 6

    def predict(self, X):
        X = self._check(X)
        s1, s2, r = self.symbols_
        return ideal_ml_symbols(X[:, 0], X[:, 1], X[:, 3], X[:, 4], X[:, 5], s1, s2, r)
