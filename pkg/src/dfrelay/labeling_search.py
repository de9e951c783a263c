"""Greedy construction of relay and phase-2 source maps, plus an exhaustive oracle.

The greedy chain seeds message 1 on ``s_1`` and walks the nearest-neighbour
sets of already-labelled messages, giving each neighbour the free point that
lies farthest from its parent's symbol. For the relay map, a result whose
worst ``m1*m2`` product equals the squared minimum distance triggers a
bounded depth-first revision of the most recent choices.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_is_fitted

from .constellation import SignalSet, min_sq_dist
from .labeling import Labeling, LabelingProfile, Scheme, identity_profile
from .metrics import MetricContext, labeling_gain_db, labeling_min_metric

__all__ = [
    "NeighborSets",
    "GreedyResult",
    "ExhaustiveResult",
    "TABLE_TIE_OVERRIDES_8PSK",
    "compute_h_sets",
    "compute_k_sets",
    "greedy_xr",
    "greedy_xs2",
    "exhaustive_best",
    "signal_set_automorphisms",
    "GreedyLabeler",
]

TIE_TOL = 1e-9

#: Tie resolutions that reproduce the reference 8-PSK tables. In each case the
#: tied candidates are mirror images of each other, so no distance-based rule
#: separates them and the lowest-index default picks the other point.
TABLE_TIE_OVERRIDES_8PSK = {"x_r": {8: 6}, "x_s2": {5: 8, 4: 6}}


@dataclass(frozen=True)
class NeighborSets:
    """Per-message nearest-neighbour sets (1-based message numbers).

    ``h[i-1]`` holds the messages closest to ``i`` under ``m1``; ``k[i-1]``
    those minimising ``m1*m2``.
    """

    h: tuple
    k: tuple | None = None


def _argmin_sets(matrix):
    M = matrix.shape[0]
    out = []
    for i in range(M):
        row = matrix[i].copy()
        row[i] = np.inf
        lo = row.min()
        tol = TIE_TOL * max(1.0, abs(lo))
        out.append(frozenset(int(j) + 1 for j in np.flatnonzero(row <= lo + tol)))
    return tuple(out)


def _map_dist(signal_set, labeling):
    idx = labeling.index0
    return signal_set.distance_matrix()[np.ix_(idx, idx)]


def compute_h_sets(signal_set, x_s1):
    """Nearest neighbours of every message under the phase-1 source map."""
    return NeighborSets(h=_argmin_sets(_map_dist(signal_set, x_s1)))


def compute_k_sets(signal_set, x_s1, x_r):
    """Messages minimising the source/relay distance product, per message."""
    m1 = _map_dist(signal_set, x_s1)
    m2 = _map_dist(signal_set, x_r)
    return NeighborSets(h=_argmin_sets(m1), k=_argmin_sets(m1 * m2))


@dataclass(frozen=True)
class GreedyResult:
    """Greedy map plus bookkeeping.

    ``exceeded_delta_sq`` is only meaningful for the relay map: False means
    the bounded revision could not lift ``min m1*m2`` above ``delta^2`` and
    the best labeling seen (earliest on ties) is returned.
    """

    labeling: Labeling
    exceeded_delta_sq: bool = True
    revisions: int = 0
    decisions: tuple = field(default=(), repr=False)


def _tie_priorities(M, tie_rule, random_state):
    """Return ``priority(message, point) -> sortable`` for ranking tied candidates."""
    if tie_rule == "lowest":
        return lambda message, point: point
    if tie_rule == "random":
        rng = check_random_state(random_state)
        table = {j: rng.permutation(M) for j in range(1, M + 1)}
        return lambda message, point: int(table[message][point - 1])
    raise ValueError(f"unknown tie_rule {tie_rule!r}; expected 'lowest' or 'random'")


def _greedy_chain(dist, nbr, seed_point, priority, overrides, choices):
    """Run the neighbour-set chain once.

    ``choices[k]`` selects the rank used at decision ``k`` (0 = best); later
    decisions take rank 0. Returns ``(assign, decisions)`` where ``decisions``
    lists ``(message, ranked_candidates)`` in assignment order.
    """
    M = dist.shape[0]
    assign = {1: seed_point}
    used = {seed_point}
    processed = set()
    decisions = []

    def choose(message, refs):
        free = [p for p in range(1, M + 1) if p not in used]
        if refs:
            score = {p: min(dist[r - 1, p - 1] for r in refs) for p in free}
        else:
            score = {p: 0.0 for p in free}
        pref = overrides.get(message)

        def key(p):
            return (-round(score[p], 9), 0 if p == pref else 1, priority(message, p))

        ranked = sorted(free, key=key)
        k = len(decisions)
        pick = choices[k] if k < len(choices) else 0
        decisions.append((message, tuple(ranked)))
        p = ranked[pick]
        assign[message] = p
        used.add(p)

    while len(assign) < M:
        pending = sorted(l for l in assign if l not in processed)
        if pending:
            l = pending[0]
            processed.add(l)
            for j in sorted(nbr[l - 1]):
                if j not in assign:
                    choose(j, [assign[l]])
        else:
            j = min(m for m in range(1, M + 1) if m not in assign)
            choose(j, [assign[l] for l in nbr[j - 1] if l in assign])
    return assign, decisions


def _to_labeling(assign):
    return Labeling(tuple(assign[j] for j in range(1, len(assign) + 1)))


def _check_overrides(overrides, M):
    out = {}
    for msg, pt in dict(overrides or {}).items():
        msg, pt = int(msg), int(pt)
        if not (1 <= msg <= M and 1 <= pt <= M):
            raise ValueError(f"tie override {msg}->{pt} outside 1..{M}")
        out[msg] = pt
    return out


def greedy_xr(signal_set, x_s1, h_sets=None, tie_rule="lowest", *, overrides=None,
              random_state=None, seed_point=1, max_revisions=None):
    """Build the relay map from the phase-1 source map.

    Parameters
    ----------
    signal_set : SignalSet
    x_s1 : Labeling
        Phase-1 source map.
    h_sets : NeighborSets, optional
        Precomputed neighbour sets of ``x_s1``.
    tie_rule : {'lowest', 'random'}
        Resolution among equally distant free points.
    overrides : dict, optional
        ``message -> point`` preferences applied only when that point is among
        the tied best candidates.
    max_revisions : int, optional
        Revision budget for the ``delta^2`` repair; defaults to ``M*(M-1)``.

    Returns
    -------
    GreedyResult
    """
    M = signal_set.M
    if x_s1.M != M:
        raise ValueError("x_s1 and signal set disagree on M")
    if h_sets is None:
        h_sets = compute_h_sets(signal_set, x_s1)
    dist = signal_set.distance_matrix()
    priority = _tie_priorities(M, tie_rule, random_state)
    overrides = _check_overrides(overrides, M)
    budget = M * (M - 1) if max_revisions is None else int(max_revisions)

    m1 = _map_dist(signal_set, x_s1)
    iu = np.triu_indices(M, 1)
    floor = min_sq_dist(signal_set) ** 2
    floor_tol = TIE_TOL * max(1.0, floor)

    def worst(assign):
        lab = _to_labeling(assign)
        return float((m1 * _map_dist(signal_set, lab))[iu].min()), lab

    choices = []
    assign, decisions = _greedy_chain(dist, h_sets.h, seed_point, priority, overrides, choices)
    choices = [0] * len(decisions)
    value, lab = worst(assign)
    best_value, best_lab, best_dec = value, lab, decisions
    revisions = 0
    while value <= floor + floor_tol and revisions < budget:
        # revise the most recent decision that still has untried candidates
        k = len(choices) - 1
        while k >= 0 and choices[k] + 1 >= len(decisions[k][1]):
            k -= 1
        if k < 0:
            break
        choices = choices[:k] + [choices[k] + 1]
        assign, decisions = _greedy_chain(dist, h_sets.h, seed_point, priority, overrides, choices)
        choices = choices + [0] * (len(decisions) - len(choices))
        revisions += 1
        value, lab = worst(assign)
        if value > best_value + floor_tol:
            best_value, best_lab, best_dec = value, lab, decisions
    return GreedyResult(best_lab, best_value > floor + floor_tol, revisions, tuple(best_dec))


def greedy_xs2(signal_set, x_s1, x_r, k_sets=None, tie_rule="lowest", *, overrides=None,
               random_state=None, seed_point=1):
    """Build the phase-2 source map from the phase-1 source and relay maps.

    Same chain as :func:`greedy_xr` but walking the sets that minimise the
    ``m1*m2`` product, and without the repair step.
    """
    M = signal_set.M
    if k_sets is None:
        k_sets = compute_k_sets(signal_set, x_s1, x_r)
    priority = _tie_priorities(M, tie_rule, random_state)
    overrides = _check_overrides(overrides, M)
    assign, decisions = _greedy_chain(signal_set.distance_matrix(), k_sets.k, seed_point,
                                      priority, overrides, [])
    return GreedyResult(_to_labeling(assign), True, 0, tuple(decisions))


# ---------------------------------------------------------------------------
# exhaustive oracle

EXHAUSTIVE_MAX_M = 8


@dataclass(frozen=True)
class ExhaustiveResult:
    profile: LabelingProfile
    min_metric: float
    n_candidates: int


def signal_set_automorphisms(signal_set, tol=1e-9):
    """Permutations of point indices (0-based arrays) preserving all distances."""
    D = signal_set.distance_matrix()
    M = signal_set.M
    found = []

    def extend(perm):
        i = len(perm)
        if i == M:
            found.append(np.array(perm))
            return
        for c in range(M):
            if c in perm:
                continue
            if all(abs(D[i, k] - D[c, perm[k]]) <= tol for k in range(i)):
                extend(perm + [c])

    extend([])
    return found


def _orbit_representatives(M, group):
    """Point permutations that are lexicographically smallest within their orbit."""
    perms = np.array(list(itertools.permutations(range(M))), dtype=np.int64)
    weights = M ** np.arange(M - 1, -1, -1, dtype=np.int64)
    code = perms @ weights
    keep = np.ones(len(perms), dtype=bool)
    for g in group:
        keep &= code <= g[perms] @ weights
    return perms[keep]


def _pair_distances(D, perms, iu):
    """``|s_{p(a)} - s_{p(b)}|^2`` over upper-triangle pairs, batched over perms."""
    return D[perms[:, iu[0]], perms[:, iu[1]]]


def _score_chunk(args):
    m1, m2_all, m3_all, alpha = args
    if m3_all is None:
        return (m1[None, :] * m2_all).min(axis=1), np.zeros(len(m2_all), dtype=np.int64)
    best = np.empty(len(m2_all))
    arg = np.empty(len(m2_all), dtype=np.int64)
    base = alpha * m3_all
    for r, m2 in enumerate(m2_all):
        v = (m1[None, :] * (base + m2[None, :])).min(axis=1)
        k = int(np.argmax(v))
        best[r], arg[r] = v[k], k
    return best, arg


def exhaustive_best(signal_set, scheme, alpha=0.1, fixed_x_s1=None, workers=1):
    """Best profile by enumeration for ``M <= 8``.

    Maps are enumerated up to the isometries of the signal set (which leave
    every metric unchanged). Among maximisers, the lexicographically smallest
    ``(x_r, x_s2)`` is returned regardless of ``workers``.
    """
    scheme = Scheme.parse(scheme)
    M = signal_set.M
    if M > EXHAUSTIVE_MAX_M:
        raise ValueError(f"exhaustive search supports M <= {EXHAUSTIVE_MAX_M}, got {M}")
    x_s1 = Labeling.identity(M) if fixed_x_s1 is None else fixed_x_s1
    D = signal_set.distance_matrix()
    iu = np.triu_indices(M, 1)
    reps = _orbit_representatives(M, signal_set_automorphisms(signal_set))
    m1 = _pair_distances(D, x_s1.index0[None, :], iu)[0]
    m2_all = _pair_distances(D, reps, iu)
    m3_all = m2_all if scheme is Scheme.NODF else None

    chunks = np.array_split(np.arange(len(reps)), max(1, int(workers)))
    payload = [(m1, m2_all[c], m3_all, float(alpha)) for c in chunks if len(c)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_score_chunk, payload))
    else:
        parts = [_score_chunk(p) for p in payload]
    best = np.concatenate([p[0] for p in parts])
    arg = np.concatenate([p[1] for p in parts])

    top = best.max()
    tol = 1e-12 * max(1.0, abs(top))
    r = int(np.flatnonzero(best >= top - tol)[0])
    x_r = Labeling(tuple(int(v) + 1 for v in reps[r]))
    if scheme is Scheme.NODF:
        v = (m1[None, :] * (alpha * m3_all + m2_all[r][None, :])).min(axis=1)
        s = int(np.flatnonzero(v >= top - tol)[0])
        x_s2 = Labeling(tuple(int(q) + 1 for q in reps[s]))
        profile = LabelingProfile(scheme, x_s1, x_r, x_s2)
        n = len(reps) ** 2
    else:
        profile = LabelingProfile(scheme, x_s1, x_r)
        n = len(reps)
    d = labeling_min_metric(MetricContext(signal_set, profile, alpha))
    return ExhaustiveResult(profile, d, n)


# ---------------------------------------------------------------------------
# estimator front end


def check_signal_set(X):
    """Accept a :class:`SignalSet` or an array of complex points."""
    if isinstance(X, SignalSet):
        return X
    if isinstance(X, (int, np.integer)):
        raise TypeError("pass a SignalSet or an array of points, not an integer")
    return SignalSet(np.asarray(X, dtype=complex))


class GreedyLabeler(BaseEstimator):
    """Fit source and relay labelings to a signal set.

    Parameters
    ----------
    scheme : {'NODF', 'ODF'}
    alpha : float
        S-D to R-D variance ratio used for the reported NODF metrics.
    tie_rule : {'lowest', 'random'}
    tie_overrides : dict or 'table', optional
        ``{'x_r': {message: point}, 'x_s2': {...}}`` tie preferences.
        ``'table'`` selects :data:`TABLE_TIE_OVERRIDES_8PSK` for 8 points and
        nothing otherwise.
    random_state : int, RandomState or None
        Only used with ``tie_rule='random'``.
    x_s1 : Labeling or sequence, optional
        Phase-1 source map; identity by default.

    Attributes
    ----------
    profile_ : LabelingProfile
    neighbor_sets_ : NeighborSets
    min_metric_, baseline_min_metric_ : float
    gain_db_ : float
    exceeded_delta_sq_ : bool
    """

    def __init__(self, scheme="NODF", alpha=0.1, tie_rule="lowest", tie_overrides=None,
                 random_state=None, x_s1=None):
        self.scheme = scheme
        self.alpha = alpha
        self.tie_rule = tie_rule
        self.tie_overrides = tie_overrides
        self.random_state = random_state
        self.x_s1 = x_s1

    def fit(self, X, y=None):
        signal_set = check_signal_set(X)
        scheme = Scheme.parse(self.scheme)
        M = signal_set.M
        x_s1 = Labeling.identity(M) if self.x_s1 is None else Labeling(tuple(self.x_s1))
        overrides = self.tie_overrides
        if isinstance(overrides, str):
            if overrides != "table":
                raise ValueError(f"unknown tie_overrides preset {overrides!r}")
            overrides = TABLE_TIE_OVERRIDES_8PSK if M == 8 else {}
        overrides = dict(overrides or {})
        unknown = set(overrides) - {"x_r", "x_s2"}
        if unknown:
            raise ValueError(f"tie_overrides keys must be 'x_r'/'x_s2', got {sorted(unknown)}")
        rng = check_random_state(self.random_state)

        h = compute_h_sets(signal_set, x_s1)
        xr = greedy_xr(signal_set, x_s1, h, self.tie_rule, overrides=overrides.get("x_r"),
                       random_state=rng)
        if scheme is Scheme.NODF:
            k = compute_k_sets(signal_set, x_s1, xr.labeling)
            xs2 = greedy_xs2(signal_set, x_s1, xr.labeling, k, self.tie_rule,
                             overrides=overrides.get("x_s2"), random_state=rng)
            profile = LabelingProfile(scheme, x_s1, xr.labeling, xs2.labeling)
            self.neighbor_sets_ = k
        else:
            profile = LabelingProfile(scheme, x_s1, xr.labeling)
            self.neighbor_sets_ = h
        ctx = MetricContext(signal_set, profile, float(self.alpha))
        self.signal_set_ = signal_set
        self.profile_ = profile
        self.exceeded_delta_sq_ = xr.exceeded_delta_sq
        self.revisions_ = xr.revisions
        self.min_metric_ = labeling_min_metric(ctx)
        self.baseline_min_metric_ = labeling_min_metric(
            ctx.with_profile(identity_profile(scheme, M)))
        self.gain_db_ = labeling_gain_db(ctx)
        return self

    def transform(self, X):
        """Symbols ``[X_s1(m), X_r(m), X_s2(m)]`` for messages ``m`` (1-based).

        The third column is zero for ODF.
        """
        check_is_fitted(self, "profile_")
        m = np.asarray(X, dtype=np.intp).ravel()
        if m.size and (m.min() < 1 or m.max() > self.profile_.M):
            raise ValueError(f"messages must lie in 1..{self.profile_.M}")
        S = self.signal_set_
        cols = [self.profile_.x_s1.symbols(S)[m - 1], self.profile_.x_r.symbols(S)[m - 1]]
        if self.profile_.x_s2 is not None:
            cols.append(self.profile_.x_s2.symbols(S)[m - 1])
        else:
            cols.append(np.zeros(m.shape, dtype=complex))
        return np.column_stack(cols)

    def fit_transform(self, X, y=None):
        raise TypeError("fit takes a signal set and transform takes messages; call them separately")
