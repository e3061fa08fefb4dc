from __future__ import annotations

from itertools import combinations, product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from codedshuffle.design import (MAX_POINTS, DesignParams, build_design, build_spc_matrix,
                                 enumerate_groups, make_design, missing_point)
from codedshuffle.errors import ParameterError

from helpers import blocks_by_brute_force, spc_columns

small = st.tuples(st.integers(2, 5), st.integers(2, 5)).filter(lambda p: p[0] ** (p[1] - 1) <= 625)


def test_q2_k3_matrix():
    T = build_spc_matrix(DesignParams(2, 3))
    assert T.tolist() == [[0, 0, 1, 1], [0, 1, 0, 1], [0, 1, 1, 0]]


def test_q2_k2_matrix():
    assert build_spc_matrix(DesignParams(2, 2)).tolist() == [[0, 1], [0, 1]]


def test_q3_k3_matrix():
    T = build_spc_matrix(DesignParams(3, 3))
    assert T.tolist() == [
        [0, 0, 0, 1, 1, 1, 2, 2, 2],
        [0, 1, 2, 0, 1, 2, 0, 1, 2],
        [0, 2, 1, 2, 1, 0, 1, 0, 2],
    ]
    assert (T.sum(axis=0) % 3 == 0).all()


def test_matrix_is_read_only():
    T = build_spc_matrix(DesignParams(2, 3))
    with pytest.raises(ValueError):
        T[0, 0] = 1


@pytest.mark.parametrize("q,k", [(1, 3), (2, 1), (0, 0)])
def test_rejects_degenerate_params(q, k):
    with pytest.raises(ParameterError):
        DesignParams(q, k)


def test_rejects_overflowing_point_count():
    with pytest.raises(ParameterError):
        DesignParams(2, 65)
    assert DesignParams(2, 63).N <= MAX_POINTS


def test_q2_k3_blocks_and_classes():
    d = make_design(2, 3)
    assert [d.block(s) for s in range(1, 7)] == [(1, 2), (3, 4), (1, 3), (2, 4), (1, 4), (2, 3)]
    assert d.classes == [[1, 2], [3, 4], [5, 6]]
    assert d.server_id(2, 1) == 4 and d.block_of(4) == (2, 1)


def test_q2_k2_singletons():
    d = make_design(2, 2)
    assert d.classes == [[1, 2], [3, 4]]
    assert [d.block(s) for s in range(1, 5)] == [(1,), (2,), (1,), (2,)]
    groups = enumerate_groups(d)
    assert [g.members for g in groups] == [(1, 4), (2, 3)]


def test_q2_k3_groups():
    groups = enumerate_groups(make_design(2, 3))
    assert [g.members for g in groups] == [(1, 3, 6), (1, 4, 5), (2, 3, 5), (2, 4, 6)]


def test_missing_points_of_first_group():
    d = make_design(2, 3)
    g = enumerate_groups(d)[0]
    assert missing_point(d, g, 1) == 3
    assert missing_point(d, g, 3) == 1


def test_build_design_from_matrix_infers_q():
    T = np.array([[0, 0, 1, 1], [0, 1, 0, 1], [0, 1, 1, 0]])
    assert build_design(T).blocks == make_design(2, 3).blocks


def test_q3_k3_exhaustive_groups():
    d = make_design(3, 3)
    brute = blocks_by_brute_force(3, 3)
    empty = [sel for sel in product(range(3), repeat=3)
             if not set.intersection(*(brute[(i + 1, l)] for i, l in enumerate(sel)))]
    groups = enumerate_groups(d)
    assert len(groups) == 18 == len(empty)
    assert [g.levels for g in groups] == empty
    for g in groups:
        for m in range(1, 4):
            others = set.intersection(*(brute[(i + 1, l)] for i, l in enumerate(g.levels) if i + 1 != m))
            assert others == {missing_point(d, g, m)}


def test_golden_json(tmp_path):
    from pathlib import Path
    d = make_design(2, 3)
    golden = (Path(__file__).parent / "golden" / "design_q2_k3.json").read_text()
    assert d.to_json(enumerate_groups(d)) == golden


@settings(max_examples=40, deadline=None)
@given(small)
def test_blocks_match_brute_force(qk):
    q, k = qk
    d = make_design(q, k)
    assert {key: set(v) for key, v in d.blocks.items()} == blocks_by_brute_force(q, k)
    T = build_spc_matrix(DesignParams(q, k))
    assert [tuple(c) for c in T.T.tolist()] == spc_columns(q, k)


@settings(max_examples=40, deadline=None)
@given(small)
def test_classes_partition_points(qk):
    q, k = qk
    d = make_design(q, k)
    for cls in d.classes:
        pts = [p for s in cls for p in d.block(s)]
        assert sorted(pts) == list(range(1, d.N + 1))
    assert all(len(d.block(s)) == q ** (k - 2) for s in range(1, d.K + 1))


@settings(max_examples=30, deadline=None)
@given(small.filter(lambda p: p[0] <= 4 and p[1] <= 4))
def test_distinct_class_blocks_meet_once(qk):
    q, k = qk
    d = make_design(q, k)
    for chosen in combinations(range(k), k - 1):
        for picks in product(*(d.classes[c] for c in chosen)):
            assert len(set.intersection(*(set(d.block(s)) for s in picks))) == 1


@settings(max_examples=30, deadline=None)
@given(small)
def test_group_counts_and_injectivity(qk):
    q, k = qk
    d = make_design(q, k)
    groups = enumerate_groups(d)
    assert len(groups) == q ** (k - 1) * (q - 1)
    for s in range(1, d.K + 1):
        mine = [g for g in groups if s in g.members]
        assert len(mine) == q ** (k - 2) * (q - 1)
        missed = {missing_point(d, g, g.members.index(s) + 1) for g in mine}
        assert len(missed) == len(mine)
        assert not missed & set(d.block(s))
