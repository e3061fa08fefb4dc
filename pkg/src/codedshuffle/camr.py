"""Coded aggregated MapReduce (CAMR) for J = q^(k-1) jobs with aggregatable functions.

Jobs are the design's points and servers its blocks; the k servers whose
blocks contain point j own job j.  Each job's N = k*gamma files form k batches,
each labelled with one owner, and an owner stores every batch of its jobs
except the one carrying its own label.  The shuffle runs in three stages:

1. the owners of each job exchange the aggregates of their missing batches;
2. every empty-intersection group runs one coded round in which each member
   receives an aggregate of a job it does not own;
3. inside each parallel class the unique owner of each job unicasts one
   aggregate covering everything the non-owner still misses.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .analysis import (camr_stage_loads, camr_storage_fraction, camr_total_load, ccdc_load,
                       ccdc_min_jobs, load_report)
from .design import (DesignParams, ResolvableDesign, ServerGroup, enumerate_groups, make_design,
                     missing_point)
from .errors import ParameterError, ProtocolError
from .exchange import (CodedPacket, ExchangeRound, Matching, canonical_matching, decode_round,
                       encode_member)
from .simnet import Bus, CostModel, ShuffleTranscript, WorkerState, make_cluster
from .simnet.phases import execute
from .singlejob import RunResult, reduce_assignment
from .workloads.base import AggregateWorkload

STAGES = ("stage1", "stage2", "stage3")


@dataclass
class MultiJobSpec:
    params: DesignParams
    Q: int
    gamma: int
    files: list  # files[j-1][n-1]
    workload: AggregateWorkload

    def __post_init__(self):
        K, J = self.params.K, self.params.N
        if self.Q % K:
            raise ParameterError(f"Q must be a multiple of K = kq = {K} (got Q={self.Q})")
        if self.gamma < 1:
            raise ParameterError(f"batch size gamma must be >= 1 (got {self.gamma})")
        if len(self.files) != J:
            raise ParameterError(f"need J = q^(k-1) = {J} jobs, got {len(self.files)}")
        for j, job in enumerate(self.files, start=1):
            if len(job) != self.N:
                raise ParameterError(f"job {j} must have N = k*gamma = {self.N} files, got {len(job)}")
        if self.workload.Q != self.Q:
            raise ParameterError(f"workload computes {self.workload.Q} functions, spec says Q={self.Q}")

    @property
    def J(self) -> int:
        return self.params.N

    @property
    def N(self) -> int:
        return self.params.k * self.gamma


@dataclass(frozen=True)
class OwnerMap:
    owners: dict[int, tuple[int, ...]]  # job -> owners in class order

    def owned_by(self, server: int) -> list[int]:
        return [j for j, xs in self.owners.items() if server in xs]


@dataclass(frozen=True)
class BatchPlan:
    batches: dict[tuple[int, int], tuple[int, ...]]  # (job, owner label) -> files
    holdings: dict[int, frozenset]  # server -> {(job, label)}
    N: int

    def storage_fraction(self, server: int) -> Fraction:
        stored = sum(len(self.batches[b]) for b in self.holdings[server])
        total = sum(len(v) for v in self.batches.values())
        return Fraction(stored, total)


@dataclass(frozen=True)
class AggregateValue:
    job: int
    function: int
    covered: frozenset
    payload: bytes


def owner_map(design: ResolvableDesign) -> OwnerMap:
    return OwnerMap({j: design.servers_containing(j) for j in design.points})


def batch_labels(owners: Sequence[int]) -> list[int]:
    """Owner label of each batch in file order.

    Batch b goes to owner b+1 (cyclically), so the owner in class position p
    misses batch p-1.  For q=2, k=3 the owners 1, 3, 5 of job 1 miss files
    5-6, 1-2 and 3-4.
    """
    k = len(owners)
    return [owners[b % k] for b in range(1, k + 1)]


def place_multi(design: ResolvableDesign, gamma: int) -> tuple[OwnerMap, BatchPlan]:
    if gamma < 1:
        raise ParameterError(f"batch size gamma must be >= 1 (got {gamma})")
    om = owner_map(design)
    k = design.k
    batches = {}
    holdings = defaultdict(set)
    for j, xs in om.owners.items():
        for b, label in enumerate(batch_labels(xs)):
            batches[(j, label)] = tuple(range(b * gamma + 1, (b + 1) * gamma + 1))
        for u in xs:
            holdings[u].update((j, label) for label in xs if label != u)
    hold = {s: frozenset(holdings.get(s, ())) for s in range(1, design.K + 1)}
    return om, BatchPlan(batches, hold, k * gamma)


def aggregate_values(workload: AggregateWorkload, parts: Sequence[AggregateValue]) -> AggregateValue:
    job, fn = parts[0].job, parts[0].function
    covered = frozenset()
    for p in parts:
        if (p.job, p.function) != (job, fn):
            raise ProtocolError("cannot aggregate values of different jobs or functions")
        if covered & p.covered:
            raise ProtocolError(f"job {job} function {fn}: overlapping file sets in aggregation")
        covered |= p.covered
    return AggregateValue(job, fn, covered, workload.aggregate([p.payload for p in parts]))


def map_multi(workers: dict[int, WorkerState], spec: MultiJobSpec, plan: BatchPlan):
    """Map every stored file for all Q functions and aggregate per batch.

    ``mapped_values[(job, function, label)]`` holds the batch aggregate.
    """
    wl = spec.workload
    for s, held in plan.holdings.items():
        w = workers[s]
        for (j, label) in sorted(held):
            files = plan.batches[(j, label)]
            per_fn = [[] for _ in range(spec.Q)]
            for n in files:
                payload = spec.files[j - 1][n - 1]
                w.stored_files[(j, n)] = payload
                values = wl.map(j, payload)
                if len(values) != spec.Q:
                    raise ProtocolError(f"map of job {j} file {n} gave {len(values)} values")
                w.map_cost += wl.map_cost(payload)
                for f, v in enumerate(values):
                    if len(v) != wl.width:
                        raise ProtocolError(f"job {j} file {n}: value of {len(v)} bytes, "
                                            f"expected fixed width {wl.width}")
                    per_fn[f].append(v)
            for f in range(1, spec.Q + 1):
                w.mapped_values[(j, f, label)] = AggregateValue(
                    j, f, frozenset(files), wl.aggregate(per_fn[f - 1]))


class CAMRShuffle:
    """The three shuffle stages, each an encode/send/decode barrier."""

    def __init__(self, design: ResolvableDesign, owners: OwnerMap, plan: BatchPlan,
                 workers: dict[int, WorkerState], bus: Bus, Q: int,
                 workload: AggregateWorkload, matching: Matching = canonical_matching,
                 groups: list[ServerGroup] | None = None):
        self.design = design
        self.owners = owners
        self.plan = plan
        self.workers = workers
        self.bus = bus
        self.workload = workload
        self.matching = matching
        self.groups = groups if groups is not None else enumerate_groups(design)
        self.functions = reduce_assignment(design.K, Q)
        self.slots = Q // design.K
        self._packets = {}
        self._rounds = {}
        self._unicasts = []

    # chunk bookkeeping shared by encoders and decoders

    def stage1_key(self, job: int, member: int, slot: int) -> tuple[int, int, int]:
        u = self.owners.owners[job][member - 1]
        return (job, self.functions[u][slot - 1], u)

    def stage2_key(self, group: ServerGroup, member: int, slot: int) -> tuple[int, int, int]:
        u = group.members[member - 1]
        job = missing_point(self.design, group, member)
        xs = self.owners.owners[job]
        # the remaining owner sits in the excluded member's class
        rest = [x for x in xs if x not in group.members]
        if len(rest) != 1 or self.design.class_of(rest[0]) != self.design.class_of(u):
            raise ProtocolError(f"group {group.group_id}: job {job} has no owner in the class "
                                f"of server {u}")
        return (job, self.functions[u][slot - 1], rest[0])

    def _rounds_for(self, stage: str):
        if stage == "stage1":
            for slot in range(1, self.slots + 1):
                for j in self.design.points:
                    members = self.owners.owners[j]
                    yield slot, j, members, lambda m, j=j, slot=slot: self.stage1_key(j, m, slot)
        else:
            for slot in range(1, self.slots + 1):
                for g in self.groups:
                    yield slot, g.group_id, g.members, \
                        lambda m, g=g, slot=slot: self.stage2_key(g, m, slot)

    def _local(self, server: int, members, key_of) -> dict[int, bytes]:
        w = self.workers[server]
        out = {}
        for j, u in enumerate(members, start=1):
            if u == server:
                continue
            v = w.mapped_values.get(key_of(j))
            if v is not None:
                out[j] = v.payload
        return out

    def encode(self, stage: str):
        t = self.bus.transcript
        if stage == "stage3":
            self._encode_stage3()
            return
        B = self.workload.width
        for slot, gid, members, key_of in self._rounds_for(stage):
            k = len(members)
            lengths = (B,) * k
            rid = t.new_round(stage, members, lengths, ExchangeRound(k, lengths).packet_len, gid)
            rnd = ExchangeRound(k, lengths, rid, gid)
            self._rounds[rid] = (stage, rnd, members, key_of)
            self._packets[rid] = [encode_member(rnd, m, self._local(u, members, key_of), self.matching)
                                  for m, u in enumerate(members, start=1)]

    def _encode_stage3(self):
        # ascending (receiver, sender, job)
        d = self.design
        for slot in range(1, self.slots + 1):
            for recv in range(1, d.K + 1):
                cls = d.class_of(recv)
                fn = self.functions[recv][slot - 1]
                for sender in d.classes[cls - 1]:
                    if sender == recv:
                        continue
                    w = self.workers[sender]
                    for j in self.owners.owned_by(sender):
                        if recv in self.owners.owners[j]:
                            continue
                        parts = [w.mapped_values[(j, fn, label)]
                                 for label in self.owners.owners[j] if label != sender]
                        value = aggregate_values(self.workload, parts)
                        self._unicasts.append((sender, recv, value))

    def send(self, stage: str):
        if stage == "stage3":
            for sender, recv, value in self._unicasts:
                self.bus.send(sender, [recv], value.payload, stage=stage,
                              meta=(value.job, value.function))
            self._unicasts.clear()
            return
        for rid in [r for r in self._packets if self._rounds[r][0] == stage]:
            _, rnd, members, _ = self._rounds[rid]
            for pkt in self._packets.pop(rid):
                sender = members[pkt.sender - 1]
                self.bus.send(sender, [u for u in members if u != sender], pkt.payload,
                              stage=stage, round_id=rid, group_id=rnd.group_id, meta=rnd)

    def decode(self, stage: str):
        for s in sorted(self.workers):
            w = self.workers[s]
            msgs = w.take(stage)
            if stage == "stage3":
                for msg in msgs:
                    job, fn = msg.meta
                    # the sender stores every batch of the job except its own
                    files = frozenset(n for (jj, label), fs in self.plan.batches.items()
                                      if jj == job and label != msg.sender for n in fs)
                    w.received[(job, fn, stage)] = AggregateValue(job, fn, files, msg.payload)
                continue
            by_round = defaultdict(list)
            for msg in msgs:
                by_round[msg.round_id].append(msg)
            for rid in sorted(by_round):
                _, rnd, members, key_of = self._rounds[rid]
                m = members.index(s) + 1
                pkts = [CodedPacket(members.index(x.sender) + 1, x.payload, x.group_id, rid)
                        for x in by_round[rid]]
                chunk = decode_round(rnd, pkts, self._local(s, members, key_of), m, self.matching)
                job, fn, label = key_of(m)
                w.received[(job, fn, stage)] = AggregateValue(
                    job, fn, frozenset(self.plan.batches[(job, label)]), chunk.payload)


def collect_parts(design: ResolvableDesign, owners: OwnerMap, worker: WorkerState, job: int,
                  fn: int) -> list[AggregateValue]:
    """Every aggregate a server holds for (job, function), local or received."""
    s = worker.id
    parts = []
    if s in owners.owners[job]:
        parts += [worker.mapped_values[(job, fn, label)]
                  for label in owners.owners[job] if label != s]
    parts += [worker.received[(job, fn, st)] for st in STAGES if (job, fn, st) in worker.received]
    return parts


def reduce_all(design: ResolvableDesign, owners: OwnerMap, workers: dict[int, WorkerState],
               workload: AggregateWorkload, Q: int, N: int) -> dict[tuple[int, int, int], bytes]:
    """Final value of every (server, job, function); checks exact, disjoint coverage."""
    functions = reduce_assignment(design.K, Q)
    everything = frozenset(range(1, N + 1))
    out = {}
    for s, w in sorted(workers.items()):
        for fn in functions[s]:
            for j in design.points:
                parts = collect_parts(design, owners, w, j, fn)
                if not parts:
                    raise ProtocolError(f"server {s} has no aggregate for job {j} function {fn}")
                value = aggregate_values(workload, parts)
                if value.covered != everything:
                    raise ProtocolError(f"server {s} job {j} function {fn}: aggregates cover files "
                                        f"{sorted(value.covered)}, need 1..{N}")
                w.reduce_outputs[(j, fn)] = value.payload
                out[(s, j, fn)] = value.payload
    return out


def predict_loads_multi(params: DesignParams) -> dict:
    q, k, K = params.q, params.k, params.K
    s1, s2, s3 = camr_stage_loads(q, k)
    mu = camr_storage_fraction(q, k)
    return {
        "stage1": s1, "stage2": s2, "stage3": s3,
        "camr_total": camr_total_load(q, k),
        "ccdc_at_same_mu": ccdc_load(mu, K),
        "mu": mu,
        "j_min_camr": params.N,
        "j_min_ccdc": ccdc_min_jobs(mu, K),
    }


class MultiJobRun:
    def __init__(self, spec: MultiJobSpec, cost_model: CostModel | None = None, seed: int = 0,
                 matching: Matching = canonical_matching):
        self.spec = spec
        self.cost_model = cost_model or CostModel()
        self.seed = seed
        self.matching = matching

    def phases(self):
        steps = [("CodeGen", self.codegen), ("Map", self.map)]
        for st in STAGES:
            steps += [(f"Pack/Encode[{st}]", lambda st=st: self.shuffle_.encode(st)),
                      (f"Shuffle[{st}]", lambda st=st: self.shuffle_.send(st)),
                      (f"Unpack/Decode[{st}]", lambda st=st: self.shuffle_.decode(st))]
        steps.append(("Reduce", self.reduce))
        return steps

    def codegen(self):
        p, spec = self.spec.params, self.spec
        self.design = make_design(p.q, p.k)
        self.owners, self.plan = place_multi(self.design, spec.gamma)
        B = spec.workload.width
        meta = {"protocol": "multi", "scheme": "proposed", "q": p.q, "k": p.k, "K": p.K,
                "Q": spec.Q, "N": spec.N, "J": spec.J, "gamma": spec.gamma, "r": p.k,
                "seed": self.seed, "workload": spec.workload.name, "fixed_width": True,
                "normalizer_bytes": spec.J * spec.Q * B}
        self.transcript = ShuffleTranscript(meta, self.cost_model)
        self.workers, self.bus = make_cluster(p.K, self.transcript)
        self.shuffle_ = CAMRShuffle(self.design, self.owners, self.plan, self.workers, self.bus,
                                    spec.Q, spec.workload, self.matching)

    def map(self):
        map_multi(self.workers, self.spec, self.plan)

    def reduce(self):
        self.outputs = reduce_all(self.design, self.owners, self.workers, self.spec.workload,
                                  self.spec.Q, self.spec.N)

    def result(self, phases) -> RunResult:
        p = self.spec.params
        norm = self.transcript.meta["normalizer_bytes"]
        preds = predict_loads_multi(p)
        reports = [load_report(self.transcript, "proposed", norm, preds[st], stage=st)
                   for st in STAGES]
        reports.append(load_report(self.transcript, "proposed", norm, preds["camr_total"]))
        return RunResult(self.transcript, reports, self.outputs, self.workers,
                         (self.owners, self.plan), self.design, phases)


def run_multi_job(spec: MultiJobSpec, cost_model: CostModel | None = None, seed: int = 0,
                  matching: Matching = canonical_matching) -> RunResult:
    run = MultiJobRun(spec, cost_model, seed, matching)
    return run.result(execute(run))


def stage1(run: MultiJobRun) -> ShuffleTranscript:
    return _one_stage(run, "stage1")


def stage2(run: MultiJobRun) -> ShuffleTranscript:
    return _one_stage(run, "stage2")


def stage3(run: MultiJobRun) -> ShuffleTranscript:
    return _one_stage(run, "stage3")


def _one_stage(run: MultiJobRun, stage: str) -> ShuffleTranscript:
    run.shuffle_.encode(stage)
    run.shuffle_.send(stage)
    run.shuffle_.decode(stage)
    return run.transcript
