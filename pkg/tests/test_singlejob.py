from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from codedshuffle.design import DesignParams, enumerate_groups, make_design
from codedshuffle.errors import ParameterError
from codedshuffle.exchange import random_matching
from codedshuffle.simnet import CostModel
from codedshuffle.singlejob import (SingleJobSpec, cyclic_placement, lookup, place,
                                    predict_loads, reduce_assignment, run_single_job, run_uncoded)
from codedshuffle.workloads.wordcount import WordCountWorkload, generate_text

from helpers import centralized_values, wordcount_spec


def test_placement_q2_k3():
    plan = place(wordcount_spec(2, 3))
    assert plan.map_assignment == {1: (1, 2), 2: (3, 4), 3: (1, 3), 4: (2, 4), 5: (1, 4), 6: (2, 3)}
    assert plan.reduce_assignment == {s: (s,) for s in range(1, 7)}


def test_q3_k3_placement_counts():
    plan = place(wordcount_spec(3, 3))
    assert all(len(v) == 3 for v in plan.map_assignment.values())
    assert set(plan.replication().values()) == {3}


def test_round_robin_reduce_assignment():
    assert reduce_assignment(3, 9) == {1: (1, 4, 7), 2: (2, 5, 8), 3: (3, 6, 9)}
    with pytest.raises(ParameterError, match="multiple of K"):
        reduce_assignment(6, 5)


def test_spec_validation():
    spec = wordcount_spec(2, 3)
    with pytest.raises(ParameterError, match="multiple of K"):
        SingleJobSpec(spec.params, 5, spec.files, spec.workload)
    with pytest.raises(ParameterError, match="N = q"):
        SingleJobSpec(spec.params, 6, spec.files[:3], spec.workload)


def test_example_transcript_has_twelve_half_packets():
    res = run_single_job(wordcount_spec(2, 3, width=8))
    t = res.transcript
    assert len(t.entries) == 12
    assert all(e.payload_bytes == 4 and len(e.receivers) == 2 for e in t.entries)
    assert t.total_bytes == 6 * 8
    assert res.reports[0].normalized_load == Fraction(1, 4)
    groups = [g.group_id for g in enumerate_groups(make_design(2, 3))]
    assert [e.group_id for e in t.entries] == [g for g in groups for _ in range(3)]


def test_k2_plain_forward():
    res = run_single_job(wordcount_spec(2, 2))
    assert res.reports[0].normalized_load == Fraction(1, 2)
    assert len(res.transcript.entries) == 4


def test_q3_k3_load_is_one_third():
    res = run_single_job(wordcount_spec(3, 3))
    assert res.reports[0].normalized_load == Fraction(1, 3)


def test_concat_rounds_moves_the_same_bytes():
    spec = wordcount_spec(2, 3, Q=12)
    spec_c = SingleJobSpec(spec.params, 12, spec.files, spec.workload, concat_rounds=True)
    a, b = run_single_job(spec), run_single_job(spec_c)
    assert len(a.transcript.rounds) == 2 * len(b.transcript.rounds)
    assert a.transcript.total_bytes == b.transcript.total_bytes
    assert a.outputs == b.outputs


def test_random_matching_gives_same_outputs():
    spec = wordcount_spec(3, 3, Q=18)
    assert run_single_job(spec).outputs == run_single_job(spec, matching=random_matching(7)).outputs


def test_every_server_sees_distinct_missing_values():
    res = run_single_job(wordcount_spec(3, 3))
    for w in res.workers.values():
        q, k = 3, 3
        assert len(w.received) == q ** (k - 1) - q ** (k - 2)


@pytest.mark.parametrize("K,r,expected", [(4, 1, Fraction(3, 4)), (6, 2, Fraction(2, 3)),
                                          (6, 6, Fraction(0))])
def test_uncoded_cyclic_loads(K, r, expected):
    text = generate_text(60, seed=3)
    wl = WordCountWorkload([b"the", b"of", b"and", b"to", b"a", b"in"][:K])
    files = wl.split(text, K)
    transcript, report = run_uncoded(files, K, K, r, wl)
    assert report.normalized_load == expected
    if K == 4:
        assert transcript.total_bytes == 12 * 8


def test_uncoded_on_design_placement_is_half():
    spec = wordcount_spec(2, 3)
    d = make_design(2, 3)
    placement = {s: d.block(s) for s in range(1, 7)}
    transcript, report = run_uncoded(spec.files, 6, 6, 3, spec.workload, placement)
    assert report.normalized_load == Fraction(1, 2)
    assert transcript.total_bytes == 12 * 8


def test_cyclic_placement_rejects_bad_shapes():
    with pytest.raises(ParameterError):
        cyclic_placement(4, 6, 1)
    with pytest.raises(ParameterError):
        cyclic_placement(6, 6, 0)


def test_predict_loads():
    p = predict_loads(DesignParams(2, 3))
    assert p["proposed"] == Fraction(1, 4) and p["cdc"] == Fraction(1, 6)
    p = predict_loads(DesignParams(4, 4), r=4)
    assert p["proposed"] == Fraction(1, 4) and p["n_proposed"] == 64 and p["n_cdc"] == 1820
    p = predict_loads(DesignParams(2, 3), r=1)
    assert p["uncoded"] == p["cdc"] == Fraction(5, 6)
    assert predict_loads(DesignParams(2, 8))["proposed"] == Fraction(1, 14)


def test_per_receiver_doubles_the_charge():
    res = run_single_job(wordcount_spec(2, 3), CostModel("per-receiver"))
    assert res.transcript.total_bytes == 12 * 8
    assert res.reports[0].normalized_load == Fraction(1, 2)


@settings(max_examples=12, deadline=None)
@given(st.sampled_from([(2, 2), (2, 3), (3, 2), (3, 3), (2, 4), (4, 2)]), st.sampled_from([1, 2]),
       st.integers(0, 10 ** 6))
def test_decodability_against_centralized_values(qk, gamma, seed):
    q, k = qk
    spec = wordcount_spec(q, k, Q=gamma * q * k, lines=30, seed=seed, width=3)
    res = run_single_job(spec)
    oracle = centralized_values(spec)
    for s, funcs in res.plan.reduce_assignment.items():
        for f in funcs:
            for n in range(1, spec.params.N + 1):
                assert lookup(res.workers[s], f, n) == oracle[(f, n)]
    lo = Fraction(1, k - 1) * (1 - Fraction(k, q * k))
    rep = res.reports[0]
    assert rep.load_without_slack == lo
