import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mwglmb.core import (AssociationHistory, AssociationMap, Hypothesis, Label, LabeledStateSet,
                         format_history, lifespan, parse_history, validate_history)


def L(s, i):
    return Label(s, i)


def history(*rows, m=3):
    maps = [AssociationMap(0, (), 0)]
    for j, row in enumerate(rows, 1):
        maps.append(AssociationMap(j, row, m))
    return AssociationHistory(maps)


def test_label_text_round_trip():
    assert str(L(12, 3)) == "12.3"
    assert Label.parse("12.3") == L(12, 3)


def test_map_defaults_to_nonexistence():
    amap = AssociationMap(1, {L(1, 1): 2}, 3)
    assert amap[L(1, 1)] == 2
    assert amap[L(1, 2)] == -1
    assert amap.live_labels() == {L(1, 1)}


def test_map_positive_one_to_one():
    assert AssociationMap(1, {L(1, 1): 0, L(1, 2): 0}, 1).is_positive_one_to_one()
    assert not AssociationMap(1, {L(1, 1): 1, L(1, 2): 1}, 1).is_positive_one_to_one()


def test_map_equality_ignores_entry_order():
    a = AssociationMap(2, [(L(2, 1), 1), (L(1, 1), 0)], 2)
    b = AssociationMap(2, [(L(1, 1), 0), (L(2, 1), 1)], 2)
    assert a == b and hash(a) == hash(b)


def test_valid_history_with_birth_misdetection_and_death():
    g = history({L(1, 1): 1, L(1, 2): -1},
                {L(1, 1): 0, L(2, 1): 2, L(2, 2): -1},
                {L(1, 1): -1, L(2, 1): 1, L(3, 1): -1, L(3, 2): -1})
    assert validate_history(g)
    assert lifespan(g, L(1, 1)) == (1, 2)
    assert lifespan(g, L(2, 1)) == (2, 3)
    assert lifespan(g, L(1, 2)) is None
    assert g.tracks()[L(1, 1)] == (1, 0, -1)


def test_rejects_duplicate_positive_assignment():
    g = history({L(1, 1): 1, L(1, 2): 1})
    assert not validate_history(g)


def test_rejects_resurrection():
    g = history({L(1, 1): 1},
                {L(1, 1): -1},
                {L(1, 1): 0})
    assert not validate_history(g)


def test_rejects_missing_live_label():
    g = history({L(1, 1): 1}, {L(2, 1): -1})
    assert not validate_history(g)


def test_rejects_label_born_at_wrong_scan():
    g = history({L(1, 1): -1}, {L(1, 1): 0})
    assert not validate_history(g)


def test_rejects_out_of_range_value():
    g = history({L(1, 1): 4}, m=3)
    assert not validate_history(g)


def test_replace_from_shares_frozen_prefix():
    g = history({L(1, 1): 1}, {L(1, 1): 0, L(2, 1): -1})
    new = AssociationMap(2, {L(1, 1): 2, L(2, 1): -1}, 3)
    h = g.replace_from(2, [new])
    assert all(a is b for a, b in zip(h.maps[:2], g.maps[:2]))
    assert h.maps[2] == new


def test_hypothesis_identity_is_history():
    g = history({L(1, 1): 1})
    assert Hypothesis(g, 0.0) == Hypothesis(g, -5.0)
    assert len({Hypothesis(g, 0.0), Hypothesis(g, 1.0)}) == 1


def test_labeled_state_set_rejects_duplicate_labels():
    x = np.zeros(4)
    with pytest.raises(ValueError):
        LabeledStateSet(1, ((x, L(1, 1)), (x, L(1, 1))))


@st.composite
def random_histories(draw):
    """Valid histories built scan by scan from random choices."""
    k = draw(st.integers(1, 5))
    maps = [AssociationMap(0, (), 0)]
    live = []
    for j in range(1, k + 1):
        m = draw(st.integers(0, 3))
        domain = sorted(live + [L(j, 1), L(j, 2)])
        values = {}
        free = list(range(1, m + 1))
        for ell in domain:
            choices = [-1, 0] + free
            a = draw(st.sampled_from(choices))
            if a > 0:
                free.remove(a)
            values[ell] = a
        amap = AssociationMap(j, values, m)
        maps.append(amap)
        live = sorted(amap.live_labels())
    return AssociationHistory(maps)


@settings(max_examples=150, deadline=None)
@given(random_histories())
def test_text_format_round_trip(g):
    assert validate_history(g)
    back = parse_history(format_history(g))
    assert back == g
    assert [m.m_count for m in back.maps] == [m.m_count for m in g.maps]


@settings(max_examples=150, deadline=None)
@given(random_histories())
def test_tracks_agree_with_maps(g):
    for ell, seq in g.tracks().items():
        for i, a in enumerate(seq):
            assert g.alpha(ell, ell.s + i) == a
        first, last = g.lifespan(ell)
        assert all(g.alpha(ell, j) >= 0 for j in range(first, last + 1))
        assert all(g.alpha(ell, j) < 0 for j in range(last + 1, g.k + 1))
