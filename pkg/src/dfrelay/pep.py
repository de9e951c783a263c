"""Pairwise error probability bounds for the near-ML and ideal-link decoders.

Squared symbol distances are multiplied by the linear symbol energy, so a
single unit-energy constellation serves every point of an ``Es`` sweep.
Names map to the analysis as follows:

* :func:`threshold_error_exact` / :func:`threshold_error_bound` - the
  shifted-threshold binary test with complex Gaussian noise and its
  exponential bound.
* :func:`nodf_pep_bound` - second-order bound for the non-orthogonal scheme.
* :func:`odf_pep_bound` - second-order bound for the orthogonal scheme,
  including the relay-error terms.
* :func:`full_pep_bound` - the complete double sum before truncation.
* :func:`ideal_link_pep_bound` / :func:`ideal_link_conditional_pep` - the
  error-free relay case, averaged and conditioned on the fades.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .channel import ChannelParams
from .constellation import SignalSet
from .labeling import LabelingProfile, Scheme

__all__ = [
    "qfunc",
    "BoundContext",
    "threshold_error_exact",
    "threshold_error_bound",
    "nodf_pep_bound",
    "odf_pep_bound",
    "full_pep_bound",
    "ideal_link_pep_bound",
    "ideal_link_conditional_pep",
    "union_bound",
    "BOUNDS",
]


def qfunc(x):
    """Gaussian tail probability ``Q(x) = P(N(0,1) > x)``."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


@dataclass(frozen=True)
class BoundContext:
    signal_set: SignalSet
    profile: LabelingProfile
    params: ChannelParams
    relay_set: SignalSet | None = None

    def __post_init__(self):
        if self.profile.M != self.signal_set.M:
            raise ValueError("profile and signal set disagree on M")
        if self.relay_set is not None and self.relay_set.M != self.signal_set.M:
            raise ValueError("relay set and signal set disagree on M")

    @property
    def M(self):
        return self.signal_set.M

    def at(self, es_db):
        return BoundContext(self.signal_set, self.profile, self.params.at(es_db), self.relay_set)

    def scaled_distances(self):
        """``Es``-scaled ``(m1, m2, m3)`` message-pair matrices; ``m3`` is zero for ODF."""
        es = self.params.es
        S = self.signal_set
        rs = S if self.relay_set is None else self.relay_set

        def dist(lab, base):
            x = lab.symbols(base)
            d = x[:, None] - x[None, :]
            return es * (d.real**2 + d.imag**2)

        m1 = dist(self.profile.x_s1, S)
        m2 = dist(self.profile.x_r, rs)
        if self.profile.scheme is Scheme.NODF:
            m3 = dist(self.profile.x_s2, S)
        else:
            m3 = np.zeros_like(m1)
        return m1, m2, m3


def _pair_check(ctx, a, abar):
    M = ctx.M
    if not (1 <= a <= M and 1 <= abar <= M):
        raise ValueError(f"messages must lie in 1..{M}")
    if a == abar:
        raise ValueError("a PEP needs two distinct messages")
    return a - 1, abar - 1


def _gap(x1, x2):
    d = np.asarray(x1, dtype=complex).ravel() - np.asarray(x2, dtype=complex).ravel()
    n2 = float(np.sum(d.real**2 + d.imag**2))
    if n2 == 0.0:
        raise ValueError("x1 and x2 must differ")
    return n2


def threshold_error_exact(x1, x2, c):
    """Probability that ``|y-x1|^2 > |y-x2|^2 + c`` when ``y = x1 + CN(0, I)``."""
    n2 = _gap(x1, x2)
    n = math.sqrt(n2)
    return float(qfunc(math.sqrt(2.0) * (n / 2.0 + c / (2.0 * n))))


def threshold_error_bound(x1, x2, c):
    """Exponential bound ``0.5*exp(-|x1-x2|^2/4 - c/2)`` on :func:`threshold_error_exact`.

    Valid whenever ``c >= -|x1-x2|^2``; below that it can fail for short
    distances (see the tests).
    """
    n2 = _gap(x1, x2)
    return 0.5 * math.exp(-n2 / 4.0 - c / 2.0)


def nodf_pep_bound(ctx, a, abar):
    """Second-order PEP bound of the near-ML decoder (non-orthogonal scheme)."""
    i, k = _pair_check(ctx, a, abar)
    m1, m2, m3 = ctx.scaled_distances()
    p = ctx.params
    t_sd = 1.0 / (1.0 + 0.25 * p.var_ds * m1[i, k])
    t_p2 = 1.0 / (1.0 + 0.25 * p.var_ds * m3[i, k] + 0.25 * p.var_dr * m2[i, k])
    return 0.5 * t_sd * t_p2


def odf_pep_bound(ctx, a, abar):
    """Second-order PEP bound of the near-ML decoder (orthogonal scheme).

    The first product depends on the labelling; the relay-error sum over
    ``j != a`` does not involve the relay map.
    """
    if ctx.profile.scheme is not Scheme.ODF:
        raise ValueError("odf_pep_bound needs an ODF profile")
    i, k = _pair_check(ctx, a, abar)
    m1, m2, _ = ctx.scaled_distances()
    p = ctx.params
    t_sd = 1.0 / (1.0 + 0.25 * p.var_ds * m1[i, k])
    term_a = t_sd / (1.0 + 0.25 * p.var_dr * m2[i, k])
    others = np.delete(m1[i], i)
    term_b = t_sd * np.sum(1.0 / (1.0 + 0.125 * p.var_rs * (others + m1[i, k])))
    return float(term_a + term_b)


def full_pep_bound(ctx, a, abar):
    """Untruncated PEP bound: correct-relay sum plus relay-error double sum.

    The ``l = abar`` term of the correct-relay sum is :func:`nodf_pep_bound`.
    """
    i, k = _pair_check(ctx, a, abar)
    m1, m2, m3 = ctx.scaled_distances()
    p = ctx.params
    t_sd = 1.0 / (1.0 + 0.25 * p.var_ds * m1[i, k])
    # relay forwards the true message; sum over the competing relay hypothesis l
    r_l = 1.0 / (1.0 + 0.25 * p.var_ds * m3[i, k] + 0.25 * p.var_dr * m2[i, :])
    rs_l = 1.0 / (1.0 + 0.125 * p.var_rs * m1[k, :])
    first = 0.5 * np.sum(t_sd * r_l * rs_l)
    # relay forwards j != a; m indexes the competing hypothesis
    j = np.delete(np.arange(ctx.M), i)
    rs_jm = 1.0 / (1.0 + 0.125 * p.var_rs * (m1[i, j][:, None] + m1[k, :][None, :]))
    second = 0.25 * np.sum(t_sd * r_l[None, :] * rs_jm)
    return float(first + second)


def ideal_link_pep_bound(ctx, a, abar):
    """PEP bound for ML decoding with an error-free relay (no 1/2 prefactor)."""
    i, k = _pair_check(ctx, a, abar)
    m1, m2, m3 = ctx.scaled_distances()
    p = ctx.params
    return (1.0 / (1.0 + 0.25 * p.var_ds * m1[i, k])) / (
        1.0 + 0.25 * p.var_ds * m3[i, k] + 0.25 * p.var_dr * m2[i, k])


def ideal_link_conditional_pep(fades, ctx, a, abar):
    """Exact error-free-relay PEP given the fades; broadcasts over fade arrays."""
    i, k = _pair_check(ctx, a, abar)
    amp = ctx.params.amplitude
    S = ctx.signal_set
    rs = S if ctx.relay_set is None else ctx.relay_set
    P = ctx.profile
    d1 = amp * (P.x_s1.symbols(S)[i] - P.x_s1.symbols(S)[k])
    dr = amp * (P.x_r.symbols(rs)[i] - P.x_r.symbols(rs)[k])
    d2 = amp * (P.x_s2.symbols(S)[i] - P.x_s2.symbols(S)[k]) if P.x_s2 is not None else 0.0
    e1 = np.asarray(fades.c_ds1) * d1
    e2 = np.asarray(fades.c_ds2) * d2 + np.asarray(fades.c_dr) * dr
    energy = e1.real**2 + e1.imag**2 + e2.real**2 + e2.imag**2
    out = qfunc(np.sqrt(energy) / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


BOUNDS = {
    "nodf": nodf_pep_bound,
    "odf": odf_pep_bound,
    "full": full_pep_bound,
    "ideal": ideal_link_pep_bound,
}


def union_bound(ctx, es_grid, bound=None):
    """Average over ``a`` of the summed pairwise bounds, per ``Es`` value.

    ``bound`` defaults to the second-order bound matching the scheme.
    """
    if bound is None:
        bound = nodf_pep_bound if ctx.profile.scheme is Scheme.NODF else odf_pep_bound
    elif isinstance(bound, str):
        bound = BOUNDS[bound]
    M = ctx.M
    out = []
    for es in np.atleast_1d(es_grid):
        c = ctx.at(float(es))
        total = sum(bound(c, a, b) for a in range(1, M + 1) for b in range(1, M + 1) if a != b)
        out.append(total / M)
    return np.array(out)
