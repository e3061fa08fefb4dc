"""Batched matrix-vector products c = A b, one product per job.

Reducer i always owns row segment i (m/K rows) of every job's result.  The
uncoded baseline tiles each A into q x k blocks, one per server; the coded
scheme hands each job's k block-columns to its owners as batches of one file.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import ParameterError, ProtocolError
from ..simnet import CostModel, ShuffleTranscript, make_cluster
from .base import AggregateWorkload

DTYPES = {"int64": np.dtype("<i8"), "float64": np.dtype("<f8")}
FLOAT_RTOL = 1e-9


@dataclass
class MatVecJob:
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if self.A.ndim != 2 or self.b.shape != (self.A.shape[1],):
            raise ParameterError(f"A is {self.A.shape} but b is {self.b.shape}")

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]


def check_shapes(jobs: Sequence[MatVecJob], q: int, k: int):
    K = q * k
    shapes = {(j.m, j.n) for j in jobs}
    if len(shapes) != 1:
        raise ParameterError("every job needs the same matrix shape")
    m, n = shapes.pop()
    if m % K:
        raise ParameterError(f"row count m={m} must be a multiple of K = kq = {K}")
    if n % k:
        raise ParameterError(f"column count n={n} must be a multiple of k={k}")


def block_columns(job: MatVecJob, k: int) -> list[tuple[np.ndarray, np.ndarray]]:
    w = job.n // k
    return [(job.A[:, c * w:(c + 1) * w], job.b[c * w:(c + 1) * w]) for c in range(k)]


class MatVecWorkload(AggregateWorkload):
    """Files are (block-column, sub-vector) pairs; function i is row segment i."""
    name = "matvec"

    def __init__(self, K: int, m: int, dtype: str = "int64"):
        if dtype not in DTYPES:
            raise ParameterError(f"unknown element type {dtype!r}")
        if m % K:
            raise ParameterError(f"row count m={m} must be a multiple of K={K}")
        self.dtype = DTYPES[dtype]
        self.rows = m // K
        super().__init__(K, self.rows * self.dtype.itemsize)

    def map(self, job: int, file) -> list[bytes]:
        A, b = file
        c = (A @ b).astype(self.dtype)
        return [c[i * self.rows:(i + 1) * self.rows].tobytes() for i in range(self.Q)]

    def aggregate(self, values: Sequence[bytes]) -> bytes:
        acc = np.zeros(self.rows, dtype=self.dtype)
        for v in values:
            acc += np.frombuffer(v, dtype=self.dtype)
        return acc.tobytes()

    def map_cost(self, file) -> int:
        return int(file[0].size)

    def decode(self, value: bytes) -> np.ndarray:
        return np.frombuffer(value, dtype=self.dtype)


def camr_files(jobs: Sequence[MatVecJob], k: int) -> list[list]:
    return [block_columns(job, k) for job in jobs]


def assemble(outputs: dict, workload: MatVecWorkload, J: int) -> list[np.ndarray]:
    """Concatenate reducer row segments into full result vectors, job by job."""
    results = []
    for j in range(1, J + 1):
        segs = {}
        for key, v in outputs.items():
            s, job, fn = key
            if job == j:
                segs[fn] = workload.decode(v)
        if sorted(segs) != list(range(1, workload.Q + 1)):
            raise ProtocolError(f"job {j}: missing row segments")
        results.append(np.concatenate([segs[f] for f in sorted(segs)]))
    return results


@dataclass
class MatVecResult:
    results: list[np.ndarray]
    transcript: ShuffleTranscript
    map_cost: dict[int, int]
    reports: list


def matvec_uncoded(jobs: Sequence[MatVecJob], q: int, k: int, dtype: str = "int64",
                   cost_model: CostModel | None = None, seed: int = 0) -> MatVecResult:
    """Tile every A into q x k blocks; server i maps block (ceil(i/k), ((i-1) mod k)+1)."""
    from ..analysis import load_report, matvec_uncoded_load

    check_shapes(jobs, q, k)
    K, J = q * k, len(jobs)
    m, n = jobs[0].m, jobs[0].n
    wl = MatVecWorkload(K, m, dtype)
    mq, nk = m // q, n // k
    meta = {"protocol": "matvec-uncoded", "scheme": "uncoded", "q": q, "k": k, "K": K, "Q": K,
            "J": J, "r": 1, "seed": seed, "workload": "matvec", "fixed_width": True,
            "normalizer_bytes": J * K * wl.width}
    transcript = ShuffleTranscript(meta, cost_model or CostModel())
    workers, bus = make_cluster(K, transcript)

    # map: partial products of each server's block, split into reducer segments
    partial = {}
    for s in range(1, K + 1):
        row, col = (s - 1) // k, (s - 1) % k
        for j, job in enumerate(jobs, start=1):
            A = job.A[row * mq:(row + 1) * mq, col * nk:(col + 1) * nk]
            c = (A @ job.b[col * nk:(col + 1) * nk]).astype(wl.dtype)
            workers[s].map_cost += A.size
            for t in range(k):
                reducer = row * k + t + 1
                partial[(s, j, reducer)] = c[t * wl.rows:(t + 1) * wl.rows].tobytes()

    # shuffle: each reducer gets k-1 partials from the rest of its block-row
    for reducer in range(1, K + 1):
        row = (reducer - 1) // k
        for s in range(row * k + 1, row * k + k + 1):
            if s == reducer:
                continue
            for j in range(1, J + 1):
                bus.send(s, [reducer], partial[(s, j, reducer)], stage="uncoded", meta=j)

    outputs = {}
    for reducer, w in workers.items():
        got = {j: [partial[(reducer, j, reducer)]] for j in range(1, J + 1)}
        for msg in w.take("uncoded"):
            got[msg.meta].append(msg.payload)
        for j, parts in got.items():
            if len(parts) != k:
                raise ProtocolError(f"reducer {reducer} job {j}: {len(parts)} of {k} partials")
            outputs[(reducer, j, reducer)] = wl.aggregate(parts)

    report = load_report(transcript, "uncoded", meta["normalizer_bytes"], matvec_uncoded_load(k))
    return MatVecResult(assemble(outputs, wl, J), transcript,
                        {s: w.map_cost for s, w in workers.items()}, [report])


def matvec_camr(jobs: Sequence[MatVecJob], q: int, k: int, dtype: str = "int64",
                cost_model: CostModel | None = None, seed: int = 0) -> MatVecResult:
    from ..camr import MultiJobSpec, run_multi_job
    from ..design import DesignParams

    check_shapes(jobs, q, k)
    params = DesignParams(q, k)
    if len(jobs) != params.N:
        raise ParameterError(f"the coded scheme needs J = q^(k-1) = {params.N} jobs, got {len(jobs)}")
    wl = MatVecWorkload(params.K, jobs[0].m, dtype)
    spec = MultiJobSpec(params, params.K, 1, camr_files(jobs, k), wl)
    res = run_multi_job(spec, cost_model, seed)
    res.transcript.meta["workload"] = "matvec"
    return MatVecResult(assemble(res.outputs, wl, len(jobs)), res.transcript,
                        {s: w.map_cost for s, w in res.workers.items()}, res.reports)


def dense_product(job: MatVecJob) -> list:
    """Pure-Python reference product."""
    A, b = job.A.tolist(), job.b.tolist()
    return [sum(a * x for a, x in zip(row, b)) for row in A]


def generate_matvec_jobs(J: int, m: int, n: int, seed: int = 0, low: int = -100,
                         high: int = 100, dtype: str = "int64") -> list[MatVecJob]:
    rng = np.random.default_rng(seed)
    jobs = []
    for _ in range(J):
        if dtype == "int64":
            A = rng.integers(low, high + 1, size=(m, n), dtype=np.int64)
            b = rng.integers(low, high + 1, size=n, dtype=np.int64)
        else:
            A = rng.uniform(low, high, size=(m, n))
            b = rng.uniform(low, high, size=n)
        jobs.append(MatVecJob(A, b))
    return jobs


def save_jobs(jobs: Sequence[MatVecJob], directory: str | Path, dtype: str = "int64") -> Path:
    """Write A.bin and b.bin (little-endian, row-major, job after job) plus a JSON sidecar."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    dt = DTYPES[dtype]
    with open(d / "A.bin", "wb") as fa, open(d / "b.bin", "wb") as fb:
        for job in jobs:
            fa.write(job.A.astype(dt).tobytes())
            fb.write(job.b.astype(dt).tobytes())
    sidecar = {"m": jobs[0].m, "n": jobs[0].n, "J": len(jobs), "element_bits": 8 * dt.itemsize,
               "dtype": dtype}
    (d / "matvec.json").write_text(json.dumps(sidecar, sort_keys=True) + "\n")
    return d


def load_jobs(directory: str | Path) -> tuple[list[MatVecJob], str]:
    d = Path(directory)
    meta = json.loads((d / "matvec.json").read_text())
    dtype = meta.get("dtype", "int64")
    dt = DTYPES[dtype]
    if meta["element_bits"] != 8 * dt.itemsize:
        raise ParameterError(f"element_bits {meta['element_bits']} does not match {dtype}")
    m, n, J = meta["m"], meta["n"], meta["J"]
    A = np.fromfile(d / "A.bin", dtype=dt)
    b = np.fromfile(d / "b.bin", dtype=dt)
    if A.size != J * m * n or b.size != J * n:
        raise ParameterError("matrix files do not match the sidecar dimensions")
    A = A.reshape(J, m, n)
    b = b.reshape(J, n)
    return [MatVecJob(A[j].astype(dt.newbyteorder("=")), b[j].astype(dt.newbyteorder("=")))
            for j in range(J)], dtype
