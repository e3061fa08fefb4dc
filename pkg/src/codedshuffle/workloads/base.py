from __future__ import annotations

from typing import Any, Sequence


class Workload:
    """A single-job MapReduce computation with Q output functions.

    ``map`` turns one input file into its Q intermediate values (function
    order); ``reduce`` combines one function's values, ordered by file index,
    into that function's output.
    """
    name = "workload"
    fixed_width = True

    def __init__(self, Q: int):
        self.Q = Q

    def split(self, data: Any, n_files: int) -> list:
        raise NotImplementedError

    def map(self, file) -> list[bytes]:
        raise NotImplementedError

    def reduce(self, function: int, values: Sequence[bytes]) -> bytes:
        raise NotImplementedError

    def map_cost(self, file) -> int:
        return 0

    def combine_outputs(self, outputs: dict[int, bytes]) -> bytes:
        return b"".join(outputs[f] for f in sorted(outputs))


class AggregateWorkload:
    """A family of J jobs whose Q functions all aggregate with one combiner.

    Every intermediate value and every aggregate is exactly ``width`` bytes.
    """
    name = "aggregate"

    def __init__(self, Q: int, width: int):
        self.Q = Q
        self.width = width

    def map(self, job: int, file) -> list[bytes]:
        raise NotImplementedError

    def aggregate(self, values: Sequence[bytes]) -> bytes:
        raise NotImplementedError

    def map_cost(self, file) -> int:
        return 0


def split_evenly(items: Sequence, n: int) -> list:
    """Cut a sequence into ``n`` contiguous parts whose sizes differ by at most one."""
    size, extra = divmod(len(items), n)
    out, start = [], 0
    for i in range(n):
        end = start + size + (1 if i < extra else 0)
        out.append(items[start:end])
        start = end
    return out
