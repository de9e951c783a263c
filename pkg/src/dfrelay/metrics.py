"""High-SNR labelling metrics, worst-case per-message values and labelling gain."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constellation import SignalSet, bit_string
from .labeling import LabelingProfile, Scheme, identity_profile

__all__ = [
    "MetricContext",
    "alpha_from_params",
    "pair_metric",
    "pair_metric_matrix",
    "worst_case_per_message",
    "labeling_min_metric",
    "labeling_gain_db",
    "labeling_table",
    "format_labeling_table",
]


@dataclass(frozen=True)
class MetricContext:
    """Inputs of the product metric.

    ``alpha`` is the S-D to R-D variance ratio (linear); ODF ignores it.
    """

    signal_set: SignalSet
    profile: LabelingProfile
    alpha: float = 0.1

    def __post_init__(self):
        if not self.alpha >= 0 or not math.isfinite(self.alpha):
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha}")
        if self.profile.M != self.signal_set.M:
            raise ValueError("profile and signal set disagree on M")

    @property
    def M(self):
        return self.signal_set.M

    def with_profile(self, profile):
        return MetricContext(self.signal_set, profile, self.alpha)


def alpha_from_params(params):
    """``sigma_ds^2 / sigma_dr^2`` from a :class:`~dfrelay.channel.ChannelParams`."""
    return params.var_ds / params.var_dr


def _map_distances(signal_set, labeling):
    """``|X(a) - X(b)|^2`` for all message pairs (0-based)."""
    idx = labeling.index0
    return signal_set.distance_matrix()[np.ix_(idx, idx)]


def distance_components(ctx):
    """Return the ``(m1, m2, m3)`` matrices; ``m3`` is zeros for ODF."""
    m1 = _map_distances(ctx.signal_set, ctx.profile.x_s1)
    m2 = _map_distances(ctx.signal_set, ctx.profile.x_r)
    if ctx.profile.scheme is Scheme.NODF:
        m3 = _map_distances(ctx.signal_set, ctx.profile.x_s2)
    else:
        m3 = np.zeros_like(m1)
    return m1, m2, m3


def pair_metric_matrix(ctx):
    """Full ``(M, M)`` matrix of pair metrics with ``inf`` on the diagonal."""
    m1, m2, m3 = distance_components(ctx)
    alpha = ctx.alpha if ctx.profile.scheme is Scheme.NODF else 0.0
    m = m1 * (alpha * m3 + m2)
    m[np.diag_indices(ctx.M)] = np.inf
    return m


def _check_message(ctx, a):
    if not 1 <= a <= ctx.M:
        raise ValueError(f"message {a} outside 1..{ctx.M}")


def pair_metric(ctx, a, abar):
    """Product metric for the message pair ``(a, abar)``.

    NODF: ``m1 * (alpha*m3 + m2)``; ODF: ``m1 * m2``.
    """
    _check_message(ctx, a)
    _check_message(ctx, abar)
    if a == abar:
        raise ValueError("pair metric needs two distinct messages")
    return float(pair_metric_matrix(ctx)[a - 1, abar - 1])


def worst_case_per_message(ctx, a=None):
    """Smallest pair metric involving message ``a``.

    With ``a=None`` the values for all messages are returned as an array.
    """
    p = pair_metric_matrix(ctx).min(axis=1)
    if a is None:
        return p
    _check_message(ctx, a)
    return float(p[a - 1])


def labeling_min_metric(ctx):
    """Worst pair metric over all distinct message pairs."""
    return float(pair_metric_matrix(ctx).min())


def labeling_gain_db(ctx, ctx_ref=None):
    """Gain in dB of ``ctx.profile`` over a reference profile.

    The default reference is the identical-maps profile for the same scheme.
    """
    if ctx_ref is None:
        ctx_ref = ctx.with_profile(identity_profile(ctx.profile.scheme, ctx.M))
    if ctx_ref.signal_set != ctx.signal_set:
        raise ValueError("contexts use different signal sets")
    if ctx_ref.profile.scheme is not ctx.profile.scheme:
        raise ValueError("contexts use different schemes")
    if ctx.profile.scheme is Scheme.NODF and ctx_ref.alpha != ctx.alpha:
        raise ValueError("contexts use different alpha")
    d_ref = labeling_min_metric(ctx_ref)
    if d_ref <= 0:
        raise ValueError("reference labelling has zero minimum metric")
    return 10.0 * math.log10(labeling_min_metric(ctx) / d_ref)


def _fmt_set(s):
    return "{" + ",".join(str(v) for v in sorted(s)) + "}"


def labeling_table(ctx, h_sets=None, k_sets=None):
    """Rows in the standard per-message labelling table layout.

    Each row is a dict with ``bits, message, x_s1, H, x_r, [K, x_s2], p, p0``.
    ``p0`` refers to the identical-maps profile. Neighbour sets default to
    the ones implied by ``ctx.profile``.
    """
    from .labeling_search import compute_h_sets, compute_k_sets

    prof, S = ctx.profile, ctx.signal_set
    M = ctx.M
    if h_sets is None:
        h_sets = compute_h_sets(S, prof.x_s1).h
    nodf = prof.scheme is Scheme.NODF
    if nodf and k_sets is None:
        k_sets = compute_k_sets(S, prof.x_s1, prof.x_r).k
    p = worst_case_per_message(ctx)
    p0 = worst_case_per_message(ctx.with_profile(identity_profile(prof.scheme, M)))
    rows = []
    for j in range(1, M + 1):
        row = {
            "bits": bit_string(j, M),
            "message": j,
            "x_s1": f"s{prof.x_s1(j)}",
            "H": _fmt_set(h_sets[j - 1]),
            "x_r": f"s{prof.x_r(j)}",
        }
        if nodf:
            row["K"] = _fmt_set(k_sets[j - 1])
            row["x_s2"] = f"s{prof.x_s2(j)}"
        row["p"] = f"{p[j - 1]:.4f}"
        row["p0"] = f"{p0[j - 1]:.4f}"
        rows.append(row)
    return rows


_HEADERS = {
    "bits": "Bits",
    "message": "Message j",
    "x_s1": "X_s1(j)",
    "H": "H_j",
    "x_r": "X_r(j)",
    "K": "K_j",
    "x_s2": "X_s2(j)",
    "p": "p(j)",
    "p0": "p0(j)",
}


def format_labeling_table(rows):
    """Aligned plain-text rendering of :func:`labeling_table` rows."""
    cols = list(rows[0])
    cells = [[_HEADERS.get(c, c) for c in cols]] + [[str(r[c]) for c in cols] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(cols))]
    lines = []
    for n, row in enumerate(cells):
        lines.append(" | ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip())
        if n == 0:
            lines.append("-+-".join("-" * w for w in widths))
    return "\n".join(lines)
