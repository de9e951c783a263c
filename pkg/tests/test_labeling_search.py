import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from conftest import XR_4, XR_8, XS2_4, XS2_8
from dfrelay.constellation import SignalSet, make_mpsk, min_sq_dist
from dfrelay.labeling import Labeling, Scheme
from dfrelay.labeling_search import (TABLE_TIE_OVERRIDES_8PSK, GreedyLabeler, compute_h_sets,
                                     compute_k_sets, exhaustive_best, greedy_xr, greedy_xs2,
                                     signal_set_automorphisms)
from dfrelay.metrics import MetricContext, labeling_min_metric


def fs(*sets):
    return tuple(frozenset(s) for s in sets)


def test_h_sets_of_psk_identity_are_cyclic_neighbours():
    for M in (4, 8, 16):
        h = compute_h_sets(make_mpsk(M), Labeling.identity(M)).h
        for i in range(1, M + 1):
            assert h[i - 1] == {(i - 2) % M + 1, i % M + 1}


def test_8psk_tables_reproduced_with_overrides(psk8):
    ident = Labeling.identity(8)
    xr = greedy_xr(psk8, ident, overrides=TABLE_TIE_OVERRIDES_8PSK["x_r"])
    assert xr.labeling.assign == XR_8
    assert xr.exceeded_delta_sq and xr.revisions == 0
    k = compute_k_sets(psk8, ident, xr.labeling).k
    assert k == fs({3}, {8}, {1, 5}, {6}, {3, 7}, {4}, {5, 8}, {2, 7})
    xs2 = greedy_xs2(psk8, ident, xr.labeling, overrides=TABLE_TIE_OVERRIDES_8PSK["x_s2"])
    assert xs2.labeling.assign == XS2_8


def test_4psk_tables_reproduced_without_overrides(psk4):
    ident = Labeling.identity(4)
    xr = greedy_xr(psk4, ident)
    assert xr.labeling.assign == XR_4
    assert not xr.exceeded_delta_sq
    assert compute_k_sets(psk4, ident, xr.labeling).k == fs({4}, {3}, {2}, {1})
    assert greedy_xs2(psk4, ident, xr.labeling).labeling.assign == XS2_4


def test_lowest_index_rule_without_overrides(psk8):
    """The plain tie rule picks mirror points and needs two relay revisions."""
    est = GreedyLabeler(scheme="NODF").fit(psk8)
    assert est.profile_.x_r.assign == (1, 5, 2, 6, 8, 3, 7, 4)
    assert est.profile_.x_s2.assign == (1, 2, 5, 6, 3, 4, 8, 7)
    assert est.revisions_ == 2 and est.exceeded_delta_sq_
    assert est.min_metric_ == pytest.approx(1.3716, abs=5e-5)


def test_override_only_acts_on_ties(psk8):
    # s3 is not among the farthest points from s1, so the preference is ignored
    res = greedy_xr(psk8, Labeling.identity(8), overrides={2: 3})
    assert res.labeling(2) == 5


def test_override_validation(psk8):
    with pytest.raises(ValueError, match="outside"):
        greedy_xr(psk8, Labeling.identity(8), overrides={9: 1})


@given(st.sampled_from([2, 4, 8, 16]), st.integers(0, 2**31 - 1), st.sampled_from(["NODF", "ODF"]))
def test_greedy_is_bijective_any_seed(M, seed, scheme):
    est = GreedyLabeler(scheme=scheme, tie_rule="random", random_state=seed).fit(make_mpsk(M))
    for lab in est.profile_.maps():
        assert sorted(lab.assign) == list(range(1, M + 1))
    assert est.profile_.x_r(1) == 1


@given(st.permutations(range(1, 9)))
def test_greedy_bijective_for_any_source_map(x_s1):
    est = GreedyLabeler(scheme="NODF", x_s1=tuple(x_s1)).fit(make_mpsk(8))
    assert est.profile_.x_s1.assign == tuple(x_s1)
    for lab in est.profile_.maps():
        assert sorted(lab.assign) == list(range(1, 9))


def test_revision_budget_respected(psk8):
    res = greedy_xr(psk8, Labeling.identity(8), max_revisions=1)
    assert res.revisions <= 1


def test_bpsk_is_identity_equivalent():
    est = GreedyLabeler(scheme="NODF").fit(make_mpsk(2))
    assert est.profile_.x_r.assign == (1, 2)
    assert est.gain_db_ == 0.0


def test_automorphisms_of_psk_form_dihedral_group():
    for M in (4, 8):
        g = signal_set_automorphisms(make_mpsk(M))
        assert len(g) == 2 * M


def test_exhaustive_known_optima(psk4, psk8):
    assert exhaustive_best(psk4, "NODF").min_metric == pytest.approx(4.8)
    assert exhaustive_best(psk4, "ODF").min_metric == pytest.approx(4.0)
    r = exhaustive_best(psk8, "ODF")
    assert r.min_metric == pytest.approx(2.0)
    assert r.n_candidates == 2520


@pytest.mark.parametrize("scheme", ["NODF", "ODF"])
@pytest.mark.parametrize("M", [2, 4, 8])
def test_exhaustive_never_below_greedy(M, scheme):
    S = make_mpsk(M)
    est = GreedyLabeler(scheme=scheme, tie_overrides="table").fit(S)
    ex = exhaustive_best(S, scheme, 0.1)
    assert ex.min_metric >= est.min_metric_ - 1e-12
    assert labeling_min_metric(MetricContext(S, ex.profile, 0.1)) == pytest.approx(ex.min_metric)


def test_exhaustive_independent_of_workers(psk8):
    a = exhaustive_best(psk8, "ODF", workers=1)
    b = exhaustive_best(psk8, "ODF", workers=3)
    assert a.profile == b.profile


def test_exhaustive_size_limit():
    with pytest.raises(ValueError, match="M <= 8"):
        exhaustive_best(make_mpsk(16), "ODF")


def test_labeler_estimator_api(psk8):
    est = GreedyLabeler(scheme="odf", alpha=0.2)
    assert est.get_params()["alpha"] == 0.2
    c = clone(est).set_params(scheme="nodf")
    assert c.fit(psk8) is c
    X = c.transform([1, 2, 8])
    assert X.shape == (3, 3)
    np.testing.assert_allclose(X[1], [psk8[2], psk8[c.profile_.x_r(2)], psk8[c.profile_.x_s2(2)]])
    with pytest.raises(TypeError):
        c.fit_transform(psk8)
    with pytest.raises(ValueError):
        c.transform([0])


def test_labeler_accepts_point_arrays(psk8):
    est = GreedyLabeler(scheme="odf").fit(psk8.points)
    assert est.signal_set_ == psk8
    with pytest.raises(TypeError):
        GreedyLabeler().fit(8)


def test_labeler_rejects_bad_overrides(psk8):
    with pytest.raises(ValueError):
        GreedyLabeler(tie_overrides="bogus").fit(psk8)
    with pytest.raises(ValueError):
        GreedyLabeler(tie_overrides={"x_q": {}}).fit(psk8)
    with pytest.raises(ValueError):
        GreedyLabeler(tie_rule="median").fit(psk8)


def test_ties_scored_after_rounding():
    # a slightly perturbed 8-PSK keeps the same greedy result
    S = make_mpsk(8)
    T = SignalSet(S.points * (1 + 1e-13))
    a = GreedyLabeler(tie_overrides="table").fit(S).profile_
    b = GreedyLabeler(tie_overrides="table").fit(T).profile_
    assert a == b
    assert min_sq_dist(T) == pytest.approx(min_sq_dist(S))
