"""Single-job coded MapReduce on a resolvable design, plus the uncoded baseline.

Files are the design's points and servers its blocks: server B_{i,l} maps
every file in B_{i,l}, so each file is mapped k times.  For every group of k
servers (one per class, empty common intersection) each member is missing the
one file the other k-1 share, and a coded exchange round delivers that
file's intermediate value for the member's reduce function.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

from .analysis import (LoadReport, cdc_load, cdc_min_files, load_report, proposed_single_load,
                       uncoded_load)
from .design import (DesignParams, ResolvableDesign, ServerGroup, enumerate_groups, make_design,
                     missing_point)
from .errors import ParameterError, ProtocolError
from .exchange import (CodedPacket, ExchangeRound, Matching, canonical_matching, decode_round,
                       encode_member)
from .simnet import Bus, CostModel, ShuffleTranscript, WorkerState, make_cluster
from .simnet.phases import execute
from .workloads.base import Workload

CODED_STAGE = "coded"
UNCODED_STAGE = "uncoded"


def reduce_assignment(K: int, Q: int) -> dict[int, tuple[int, ...]]:
    """Round-robin: server s reduces functions s, s + K, s + 2K, ..."""
    if Q <= 0 or Q % K:
        raise ParameterError(f"Q must be a multiple of K = kq = {K} (got Q={Q})")
    return {s: tuple(range(s, Q + 1, K)) for s in range(1, K + 1)}


@dataclass
class SingleJobSpec:
    params: DesignParams
    Q: int
    files: list
    workload: Workload
    concat_rounds: bool = False

    def __post_init__(self):
        K, N = self.params.K, self.params.N
        if self.Q % K:
            raise ParameterError(f"Q must be a multiple of K = kq = {K} (got Q={self.Q})")
        if len(self.files) != N:
            raise ParameterError(f"the job must be split into N = q^(k-1) = {N} files, "
                                 f"got {len(self.files)}")
        if self.workload.Q != self.Q:
            raise ParameterError(f"workload computes {self.workload.Q} functions, spec says Q={self.Q}")


@dataclass(frozen=True)
class PlacementPlan:
    map_assignment: dict[int, tuple[int, ...]]
    reduce_assignment: dict[int, tuple[int, ...]]
    N: int
    Q: int

    @property
    def K(self) -> int:
        return len(self.map_assignment)

    def holders(self, n: int) -> list[int]:
        return [s for s, files in self.map_assignment.items() if n in files]

    def replication(self) -> dict[int, int]:
        count = defaultdict(int)
        for files in self.map_assignment.values():
            for n in files:
                count[n] += 1
        return dict(count)


def place(spec: SingleJobSpec, design: ResolvableDesign | None = None) -> PlacementPlan:
    design = design or make_design(spec.params.q, spec.params.k)
    maps = {s: design.block(s) for s in range(1, design.K + 1)}
    return PlacementPlan(maps, reduce_assignment(design.K, spec.Q), design.N, spec.Q)


def map_phase(workers: dict[int, WorkerState], plan: PlacementPlan, files: Sequence,
              workload: Workload):
    for s, assigned in plan.map_assignment.items():
        w = workers[s]
        for n in assigned:
            w.stored_files[n] = files[n - 1]
            values = workload.map(files[n - 1])
            if len(values) != plan.Q:
                raise ProtocolError(f"map of file {n} produced {len(values)} values, expected {plan.Q}")
            w.map_cost += workload.map_cost(files[n - 1])
            for f, v in enumerate(values, start=1):
                w.mapped_values[(f, n)] = v


def lookup(worker: WorkerState, f: int, n: int) -> bytes | None:
    v = worker.mapped_values.get((f, n))
    return v if v is not None else worker.received.get((f, n))


def check_decodability(plan: PlacementPlan, workers: dict[int, WorkerState]):
    for s, funcs in plan.reduce_assignment.items():
        for f in funcs:
            for n in range(1, plan.N + 1):
                if lookup(workers[s], f, n) is None:
                    raise ProtocolError(f"decodability failure: server {s} lacks value "
                                        f"for function {f} on file {n} after the shuffle")


def reduce_phase(plan: PlacementPlan, workers: dict[int, WorkerState], workload: Workload):
    for s, funcs in plan.reduce_assignment.items():
        w = workers[s]
        for f in funcs:
            w.reduce_outputs[f] = workload.reduce(f, [lookup(w, f, n) for n in range(1, plan.N + 1)])


class CodedShuffle:
    """Encode, send and decode every exchange round of the single-job scheme.

    Rounds run groups in ``enumerate_groups`` order inside an outer loop over
    the Q/K reduce slots; with ``concat_rounds`` a group instead runs a single
    round whose chunks concatenate all Q/K values.
    """

    def __init__(self, design: ResolvableDesign, plan: PlacementPlan,
                 workers: dict[int, WorkerState], bus: Bus,
                 matching: Matching = canonical_matching, concat_rounds: bool = False,
                 groups: list[ServerGroup] | None = None):
        self.design = design
        self.plan = plan
        self.workers = workers
        self.bus = bus
        self.matching = matching
        self.concat_rounds = concat_rounds
        self.groups = groups if groups is not None else enumerate_groups(design)
        self.slots = plan.Q // design.K
        self._packets = {}
        self._rounds = {}

    def schedule(self) -> list[tuple[tuple[int, ...], ServerGroup]]:
        if self.concat_rounds:
            slot_sets = [tuple(range(1, self.slots + 1))]
        else:
            slot_sets = [(g,) for g in range(1, self.slots + 1)]
        return [(slots, grp) for slots in slot_sets for grp in self.groups]

    def chunk_keys(self, group: ServerGroup, member: int, slots: tuple[int, ...]) -> list[tuple[int, int]]:
        """(function, file) pairs making up the chunk that ``member`` is missing."""
        server = group.members[member - 1]
        n = missing_point(self.design, group, member)
        funcs = self.plan.reduce_assignment[server]
        return [(funcs[g - 1], n) for g in slots]

    def _local_chunks(self, server: int, group: ServerGroup, slots) -> dict[int, bytes]:
        w = self.workers[server]
        out = {}
        for j in range(1, group.size + 1):
            if group.members[j - 1] == server:
                continue
            parts = []
            for key in self.chunk_keys(group, j, slots):
                v = w.mapped_values.get(key)
                if v is None:
                    break
                parts.append(v)
            else:
                out[j] = b"".join(parts)
        return out

    def encode(self):
        t = self.bus.transcript
        for slots, grp in self.schedule():
            k = grp.size
            part_lengths = []
            for j in range(1, k + 1):
                # any other member holds chunk j; its size is round metadata
                peer = self.workers[grp.members[j % k]]
                part_lengths.append(tuple(len(peer.mapped_values[key])
                                          for key in self.chunk_keys(grp, j, slots)))
            lengths = tuple(sum(p) for p in part_lengths)
            rnd0 = ExchangeRound(k, lengths)
            rid = t.new_round(CODED_STAGE, grp.members, lengths, rnd0.packet_len, grp.group_id)
            rnd = ExchangeRound(k, lengths, rid, grp.group_id)
            self._rounds[rid] = (rnd, grp, slots, tuple(part_lengths))
            self._packets[rid] = [
                encode_member(rnd, m, self._local_chunks(s, grp, slots), self.matching)
                for m, s in enumerate(grp.members, start=1)
            ]

    def send(self):
        for rid, packets in self._packets.items():
            rnd, grp, slots, parts = self._rounds[rid]
            for pkt in packets:
                sender = grp.members[pkt.sender - 1]
                others = [s for s in grp.members if s != sender]
                self.bus.send(sender, others, pkt.payload, stage=CODED_STAGE, round_id=rid,
                              group_id=grp.group_id, meta=(rnd, parts))
        self._packets.clear()

    def decode(self):
        for s in sorted(self.workers):
            w = self.workers[s]
            by_round = defaultdict(list)
            meta = {}
            for msg in w.take(CODED_STAGE):
                by_round[msg.round_id].append(msg)
                meta[msg.round_id] = msg.meta
            for rid in sorted(by_round):
                rnd, parts = meta[rid]
                _, grp, slots = self._rounds[rid][:3]
                m = grp.members.index(s) + 1
                received = [CodedPacket(grp.members.index(x.sender) + 1, x.payload, x.group_id, rid)
                            for x in by_round[rid]]
                chunk = decode_round(rnd, received, self._local_chunks(s, grp, slots), m,
                                     self.matching)
                offset = 0
                for key, size in zip(self.chunk_keys(grp, m, slots), parts[m - 1]):
                    w.received[key] = chunk.payload[offset:offset + size]
                    offset += size

    def run(self) -> ShuffleTranscript:
        self.encode()
        self.send()
        self.decode()
        check_decodability(self.plan, self.workers)
        return self.bus.transcript


def run_shuffle(design: ResolvableDesign, plan: PlacementPlan, workers: dict[int, WorkerState],
                bus: Bus, matching: Matching = canonical_matching,
                concat_rounds: bool = False) -> ShuffleTranscript:
    return CodedShuffle(design, plan, workers, bus, matching, concat_rounds).run()


def total_value_bytes(workers: dict[int, WorkerState], plan: PlacementPlan) -> int:
    """Sum of |nu_{f,n}| over all functions and files: the QNB normalizer."""
    total = 0
    for n in range(1, plan.N + 1):
        s = plan.holders(n)[0]
        total += sum(len(workers[s].mapped_values[(f, n)]) for f in range(1, plan.Q + 1))
    return total


@dataclass
class RunResult:
    transcript: ShuffleTranscript
    reports: list[LoadReport]
    outputs: dict
    workers: dict[int, WorkerState]
    plan: object = None
    design: ResolvableDesign | None = None
    phases: list[str] = field(default_factory=list)

    def combined_output(self, workload) -> bytes:
        return workload.combine_outputs(self.outputs)


class SingleJobRun:
    """The proposed scheme as six barrier-separated phases."""

    def __init__(self, spec: SingleJobSpec, cost_model: CostModel | None = None, seed: int = 0,
                 matching: Matching = canonical_matching):
        self.spec = spec
        self.cost_model = cost_model or CostModel()
        self.seed = seed
        self.matching = matching

    def phases(self):
        return [("CodeGen", self.codegen), ("Map", self.map), ("Pack/Encode", self.encode),
                ("Shuffle", self.shuffle), ("Unpack/Decode", self.decode), ("Reduce", self.reduce)]

    def codegen(self):
        p = self.spec.params
        self.design = make_design(p.q, p.k)
        self.plan = place(self.spec, self.design)
        meta = {"protocol": "single", "scheme": "proposed", "q": p.q, "k": p.k, "K": p.K,
                "Q": self.spec.Q, "N": p.N, "J": None, "gamma": None, "r": p.k, "seed": self.seed,
                "workload": self.spec.workload.name, "fixed_width": self.spec.workload.fixed_width,
                "concat_rounds": self.spec.concat_rounds}
        self.transcript = ShuffleTranscript(meta, self.cost_model)
        self.workers, self.bus = make_cluster(p.K, self.transcript)
        self.shuffle_ = CodedShuffle(self.design, self.plan, self.workers, self.bus, self.matching,
                                     self.spec.concat_rounds)

    def map(self):
        map_phase(self.workers, self.plan, self.spec.files, self.spec.workload)
        self.transcript.meta["normalizer_bytes"] = total_value_bytes(self.workers, self.plan)

    def encode(self):
        self.shuffle_.encode()

    def shuffle(self):
        self.shuffle_.send()

    def decode(self):
        self.shuffle_.decode()
        check_decodability(self.plan, self.workers)

    def reduce(self):
        reduce_phase(self.plan, self.workers, self.spec.workload)

    def result(self, phases) -> RunResult:
        p = self.spec.params
        note = "" if self.spec.workload.fixed_width else \
            "B varies per bucket; load is normalized by actual intermediate bytes"
        report = load_report(self.transcript, "proposed", self.transcript.meta["normalizer_bytes"],
                             proposed_single_load(p.q, p.k), note=note)
        outputs = {f: w.reduce_outputs[f] for w in self.workers.values() for f in w.reduce_outputs}
        return RunResult(self.transcript, [report], outputs, self.workers, self.plan, self.design,
                         phases)


def run_single_job(spec: SingleJobSpec, cost_model: CostModel | None = None, seed: int = 0,
                   matching: Matching = canonical_matching) -> RunResult:
    run = SingleJobRun(spec, cost_model, seed, matching)
    return run.result(execute(run))


# -- uncoded baseline --------------------------------------------------------

def cyclic_placement(N: int, K: int, r: int) -> dict[int, tuple[int, ...]]:
    """File n goes to servers n, n+1, ..., n+r-1 (mod K)."""
    if not 1 <= r <= K:
        raise ParameterError(f"computation load r must be in 1..K={K}, got {r}")
    if N % K:
        raise ParameterError(f"cyclic replication needs K | N (K={K}, N={N})")
    out = {s: [] for s in range(1, K + 1)}
    for n in range(1, N + 1):
        for t in range(r):
            out[(n - 1 + t) % K + 1].append(n)
    return {s: tuple(sorted(v)) for s, v in out.items()}


class UncodedRun:
    """Each reducer gets every missing value by unicast from one holder of its file."""

    def __init__(self, files: Sequence, Q: int, K: int, r: int, workload: Workload,
                 placement: dict[int, tuple[int, ...]] | None = None,
                 cost_model: CostModel | None = None, seed: int = 0):
        self.files = list(files)
        self.Q, self.K, self.r = Q, K, r
        self.workload = workload
        self.placement = placement
        self.cost_model = cost_model or CostModel()
        self.seed = seed

    def phases(self):
        return [("CodeGen", self.codegen), ("Map", self.map), ("Pack/Encode", self.pack),
                ("Shuffle", self.shuffle), ("Unpack/Decode", self.unpack), ("Reduce", self.reduce)]

    def codegen(self):
        N = len(self.files)
        maps = self.placement or cyclic_placement(N, self.K, self.r)
        if len(maps) != self.K:
            raise ParameterError(f"placement covers {len(maps)} servers, expected K={self.K}")
        self.plan = PlacementPlan(dict(maps), reduce_assignment(self.K, self.Q), N, self.Q)
        rep = self.plan.replication()
        if any(rep.get(n, 0) != self.r for n in range(1, N + 1)):
            raise ParameterError(f"placement does not replicate every file exactly r={self.r} times")
        meta = {"protocol": "uncoded", "scheme": "uncoded-r", "q": None, "k": None, "K": self.K,
                "Q": self.Q, "N": N, "J": None, "gamma": None, "r": self.r, "seed": self.seed,
                "workload": self.workload.name, "fixed_width": self.workload.fixed_width}
        self.transcript = ShuffleTranscript(meta, self.cost_model)
        self.workers, self.bus = make_cluster(self.K, self.transcript)

    def map(self):
        map_phase(self.workers, self.plan, self.files, self.workload)
        self.transcript.meta["normalizer_bytes"] = total_value_bytes(self.workers, self.plan)

    def pack(self):
        # (sender, receiver) -> [(f, n)], one message per value
        self._out = []
        for d in range(1, self.K + 1):
            for f in self.plan.reduce_assignment[d]:
                for n in range(1, self.plan.N + 1):
                    if n in self.plan.map_assignment[d]:
                        continue
                    holders = self.plan.holders(n)
                    sender = holders[(d + f) % len(holders)]
                    self._out.append((sender, d, f, n))

    def shuffle(self):
        for sender, d, f, n in self._out:
            self.bus.send(sender, [d], self.workers[sender].mapped_values[(f, n)],
                          stage=UNCODED_STAGE, meta=(f, n))

    def unpack(self):
        for w in self.workers.values():
            for msg in w.take(UNCODED_STAGE):
                w.received[msg.meta] = msg.payload
        check_decodability(self.plan, self.workers)

    def reduce(self):
        reduce_phase(self.plan, self.workers, self.workload)

    def result(self, phases) -> RunResult:
        report = load_report(self.transcript, "uncoded-r", self.transcript.meta["normalizer_bytes"],
                             uncoded_load(self.K, self.r))
        outputs = {f: w.reduce_outputs[f] for w in self.workers.values() for f in w.reduce_outputs}
        return RunResult(self.transcript, [report], outputs, self.workers, self.plan, None, phases)


def run_uncoded(files: Sequence, Q: int, K: int, r: int, workload: Workload,
                placement: dict[int, tuple[int, ...]] | None = None,
                cost_model: CostModel | None = None, seed: int = 0):
    """Uncoded shuffle at computation load r; returns (transcript, LoadReport).

    Without ``placement`` files are replicated cyclically, which needs K | N.
    """
    run = UncodedRun(files, Q, K, r, workload, placement, cost_model, seed)
    res = run.result(execute(run))
    return res.transcript, res.reports[0]


def predict_loads(params: DesignParams, r: int | None = None) -> dict:
    """Closed-form single-job loads; ``r`` (default k) is the baselines' computation load."""
    r = params.k if r is None else r
    return {
        "proposed": proposed_single_load(params.q, params.k),
        "uncoded": uncoded_load(params.K, r),
        "cdc": cdc_load(params.K, r),
        "n_proposed": params.N,
        "n_cdc": cdc_min_files(params.K, r),
    }
