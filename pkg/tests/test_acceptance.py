"""End-to-end acceptance checks, one test per numbered criterion.

The terminal summary prints a PASS/FAIL line for each criterion.
"""
from __future__ import annotations

import time
from contextlib import contextmanager
from fractions import Fraction
from itertools import combinations, product
from math import ceil, comb
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from codedshuffle.analysis import matvec_cost_ratio, matvec_shuffle_gain
from codedshuffle.camr import MultiJobRun, predict_loads_multi, run_multi_job
from codedshuffle.design import (DesignParams, build_design, build_spc_matrix, enumerate_groups,
                                 make_design)
from codedshuffle.exchange import Chunk, ExchangeRound, decode_round, encode_round
from codedshuffle.simnet.audit import group_count_audit
from codedshuffle.simnet.pipeline import run_pipeline
from codedshuffle.singlejob import SingleJobSpec, lookup, run_single_job, run_uncoded
from codedshuffle.workloads.matvec import (dense_product, generate_matvec_jobs, matvec_camr,
                                           matvec_uncoded)
from codedshuffle.workloads.sort import SortWorkload, generate_records, split_records
from codedshuffle.workloads.wordcount import count_words, encode_count

from helpers import (blocks_by_brute_force, centralized_values, multi_wordcount_spec, wordcount_spec,
                     xor_oracle)

GOLDEN = Path(__file__).parent / "golden" / "design_q2_k3.json"


@contextmanager
def within(seconds: float):
    start = time.perf_counter()
    yield
    elapsed = time.perf_counter() - start
    assert elapsed < seconds, f"took {elapsed:.2f}s, limit {seconds}s"


@pytest.mark.criterion(1, "design reproduction against golden JSON")
def test_design_reproduction():
    with within(1):
        T = build_spc_matrix(DesignParams(2, 3))
        assert T.tolist() == [[0, 0, 1, 1], [0, 1, 0, 1], [0, 1, 1, 0]]
        d = build_design(T)
        assert [[d.block(s) for s in cls] for cls in d.classes] == [
            [(1, 2), (3, 4)], [(1, 3), (2, 4)], [(1, 4), (2, 3)]]
        assert d.to_json(enumerate_groups(d)) == GOLDEN.read_text()


@pytest.mark.criterion(2, "design property suite, q and k in 2..4")
def test_design_properties():
    with within(10):
        for q, k in product(range(2, 5), repeat=2):
            d = make_design(q, k)
            brute = blocks_by_brute_force(q, k)
            blocks = {s: set(d.block(s)) for s in range(1, d.K + 1)}
            assert {key: set(v) for key, v in d.blocks.items()} == brute
            for cls in d.classes:
                assert sorted(p for s in cls for p in blocks[s]) == list(range(1, d.N + 1))
            assert all(len(b) == q ** (k - 2) for b in blocks.values())
            for chosen in combinations(range(k), k - 1):
                for picks in product(*(d.classes[c] for c in chosen)):
                    assert len(set.intersection(*(blocks[s] for s in picks))) == 1
            groups = enumerate_groups(d)
            assert len(groups) == q ** (k - 1) * (q - 1)
            for s in blocks:
                assert sum(s in g.members for g in groups) == q ** (k - 2) * (q - 1)
            for g in groups:
                assert not set.intersection(*(blocks[s] for s in g.members))


@pytest.mark.criterion(3, "exchange round-trip, k in 2..6, 200 random rounds each")
def test_exchange_round_trip():
    with within(30):
        for k in range(2, 7):
            @settings(max_examples=200, deadline=None, database=None)
            @given(st.integers(1, 4096).flatmap(
                lambda B: st.lists(st.binary(min_size=B, max_size=B), min_size=k, max_size=k)))
            def check(payloads):
                B = len(payloads[0])
                chunks = [Chunk(p, j) for j, p in enumerate(payloads, 1)]
                packets = encode_round(chunks)
                assert sum(len(p.payload) for p in packets) == k * ceil(B / (k - 1))
                rnd = ExchangeRound(k, (B,) * k)
                for m in range(1, k + 1):
                    local = {j: payloads[j - 1] for j in range(1, k + 1) if j != m}
                    got = decode_round(rnd, [p for p in packets if p.sender != m], local, m)
                    assert got.payload == payloads[m - 1]
            check()


@pytest.mark.criterion(4, "single-job loads 1/4 vs uncoded 1/2, and 1/14 at K=16")
def test_single_job_loads():
    with within(30):
        spec = wordcount_spec(2, 3, Q=6, width=8)
        coded = run_single_job(spec).reports[0]
        assert coded.normalized_load == Fraction(1, 4)
        assert coded.load_without_slack == Fraction(1, 4)

        # the 0.5 comparison baseline: uncoded shuffling on the same placement
        _, uncoded, _ = run_pipeline("uncoded", spec)
        assert uncoded[0].normalized_load == Fraction(1, 2)
        # with no replication at all the uncoded load is 1 - 1/K
        files = spec.workload.split(b"".join(spec.files), 6)
        _, r1 = run_uncoded(files, 6, 6, 1, spec.workload)
        assert r1.normalized_load == Fraction(5, 6)

        big = run_single_job(wordcount_spec(2, 8, Q=16, lines=300, width=8)).reports[0]
        assert big.normalized_load > Fraction(1, 14)
        assert big.load_without_slack == Fraction(1, 14)
        exact = run_single_job(wordcount_spec(2, 8, Q=16, lines=300, width=14)).reports[0]
        assert exact.normalized_load == Fraction(1, 14) and exact.slack_bits == 0


@pytest.mark.criterion(5, "single-job decodability against a centralized oracle")
def test_single_job_decodability():
    with within(60):
        for q, k in product((2, 3), (2, 3, 4)):
            K = q * k
            for Q in (K, 2 * K):
                spec = wordcount_spec(q, k, Q=Q, lines=40, seed=q * 10 + k, width=4)
                res = run_single_job(spec)
                oracle = centralized_values(spec)
                for s, funcs in res.plan.reduce_assignment.items():
                    for f in funcs:
                        got = [lookup(res.workers[s], f, n) for n in range(1, spec.params.N + 1)]
                        assert got == [oracle[(f, n)] for n in range(1, spec.params.N + 1)]


def aggregate_oracle(spec, texts_files, vocabs, job, fn, files):
    total = sum(count_words(texts_files[job - 1][n - 1], vocabs[job - 1])[fn - 1] for n in files)
    return encode_count(total, spec.workload.width)


@pytest.mark.criterion(6, "multi-job stage loads and q=2, k=3 stage-2/stage-3 transmissions")
def test_camr_q2_k3_transmissions():
    with within(30):
        spec, texts, vocabs = multi_wordcount_spec(2, 3, gamma=2)
        res = run_multi_job(spec)
        loads = {r.stage: r.normalized_load for r in res.reports}
        assert loads == {"stage1": Fraction(1, 4), "stage2": Fraction(1, 4),
                         "stage3": Fraction(1, 2), None: Fraction(1)}

        def agg(job, fn, files):
            return aggregate_oracle(spec, spec.files, vocabs, job, fn, files)

        # stage 2 in group {U1, U3, U6}: packet halves exactly as tabulated
        run = MultiJobRun(spec)
        run.codegen()
        run.map()
        run.shuffle_.encode("stage1")
        run.shuffle_.send("stage1")
        run.shuffle_.decode("stage1")
        run.shuffle_.encode("stage2")
        run.shuffle_.send("stage2")
        group = next(g for g in enumerate_groups(run.design) if g.members == (1, 3, 6))
        sent = {}
        for w in run.workers.values():
            for msg in w.inbox:
                if msg.stage == "stage2" and msg.group_id == group.group_id:
                    sent[msg.sender] = msg.payload
        a1, a3, a6 = agg(3, 1, (5, 6)), agg(2, 3, (1, 2)), agg(1, 6, (3, 4))
        assert sent == {1: xor_oracle(a6[:4], a3[:4]), 3: xor_oracle(a6[4:], a1[:4]),
                        6: xor_oracle(a3[4:], a1[4:])}
        run.shuffle_.decode("stage2")
        for server, job, fn, files, value in ((1, 3, 1, {5, 6}, a1), (3, 2, 3, {1, 2}, a3),
                                              (6, 1, 6, {3, 4}, a6)):
            got = run.workers[server].received[(job, fn, "stage2")]
            assert got.covered == files and got.payload == value

        # stage 3 unicasts: what each server still needs after stage 2
        needs = {1: {3: {1, 2, 3, 4}, 4: {1, 2, 3, 4}}, 2: {1: {1, 2, 3, 4}, 2: {1, 2, 3, 4}},
                 3: {2: {3, 4, 5, 6}, 4: {3, 4, 5, 6}}, 4: {1: {3, 4, 5, 6}, 3: {3, 4, 5, 6}},
                 5: {2: {1, 2, 5, 6}, 3: {1, 2, 5, 6}}, 6: {1: {1, 2, 5, 6}, 4: {1, 2, 5, 6}}}
        for server, jobs in needs.items():
            w = res.workers[server]
            got = {job: set(v.covered) for (job, fn, stage), v in w.received.items()
                   if stage == "stage3"}
            assert got == jobs
            for job, files in jobs.items():
                assert w.received[(job, server, "stage3")].payload == agg(job, server, files)
        senders = [(e.receivers[0], e.sender) for e in res.transcript.entries if e.stage == "stage3"]
        assert senders[:2] == [(1, 2), (1, 2)]
        assert len(senders) == 12


@pytest.mark.criterion(7, "multi-job load equals the compressed baseline; job counts 20 vs 4")
def test_formula_identities():
    with within(1):
        for q, k in product(range(2, 6), repeat=2):
            p = predict_loads_multi(DesignParams(q, k))
            assert p["camr_total"] == p["ccdc_at_same_mu"]
            assert isinstance(p["camr_total"], Fraction)
        p = predict_loads_multi(DesignParams(2, 3))
        assert p["j_min_ccdc"] == 20 and p["j_min_camr"] == 4


@pytest.mark.criterion(8, "sort of 10^5 records, coded and uncoded, byte-identical to oracle")
def test_sort_end_to_end():
    with within(60):
        data = generate_records(100_000, seed=2024)
        params = DesignParams(2, 3)
        wl = SortWorkload(6)
        spec = SingleJobSpec(params, 6, wl.split(data, params.N), wl)
        oracle = b"".join(sorted(split_records(data)))
        coded_t, _, coded_out = run_pipeline("single", spec)
        plain_t, _, plain_out = run_pipeline("uncoded", spec)
        assert wl.combine_outputs(coded_out) == oracle
        assert wl.combine_outputs(plain_out) == oracle
        assert coded_t.total_bytes < plain_t.total_bytes


@pytest.mark.criterion(9, "matrix-vector products, cost ratio k-1, shuffle gain")
def test_matvec_end_to_end():
    with within(30):
        q, k = 2, 3
        jobs = generate_matvec_jobs(4, 120, 6, seed=77)
        plain = matvec_uncoded(jobs, q, k)
        coded = matvec_camr(jobs, q, k)
        for job, a, b in zip(jobs, plain.results, coded.results):
            oracle = dense_product(job)
            assert a.tolist() == oracle and b.tolist() == oracle
        per_plain = set(plain.map_cost.values())
        per_coded = set(coded.map_cost.values())
        assert len(per_plain) == len(per_coded) == 1
        assert Fraction(per_coded.pop(), per_plain.pop()) == matvec_cost_ratio(k) == 2
        gain = matvec_shuffle_gain(q, k)
        assert gain == 2
        u, c = plain.transcript.total_bytes, coded.transcript.total_bytes
        slack = coded.transcript.padding_slack()
        assert Fraction(u) / c <= gain <= Fraction(u) / (c - slack)


@pytest.mark.criterion(10, "communicator group counts")
def test_group_count_audit():
    with within(1):
        a = group_count_audit(16, 3, q=4, k=4)
        assert a["prior_groups"] == comb(16, 4) == 1820
        assert a["proposed_groups"] == 192
        b = group_count_audit(50, 10, q=5, k=10)
        assert b["prior_groups"] == comb(50, 11) == 37353738800
        assert {"MPICH", "MVAPICH"} <= set(b["exceeds"]["prior"])
        assert b["proposed_groups"] == 5 ** 9 * 4 == 7812500
        assert group_count_audit(50, 10, q=2, k=25)["proposed_groups"] == 16777216
