"""TeraSort-style key-range sort over 100-byte records (10-byte key, 90-byte value).

Function f collects the records whose key falls in the f-th key range; its
reduce sorts them.  Concatenating the reduced buckets in function order gives
the globally sorted data set.
"""
from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ParameterError
from .base import Workload, split_evenly

KEY_LEN = 10
VALUE_LEN = 90
RECORD_LEN = KEY_LEN + VALUE_LEN
KEY_SPACE = 256 ** KEY_LEN


@dataclass(frozen=True)
class KVRecord:
    key: bytes
    value: bytes

    def __post_init__(self):
        if len(self.key) != KEY_LEN or len(self.value) != VALUE_LEN:
            raise ParameterError(
                f"records are {KEY_LEN}+{VALUE_LEN} bytes, got {len(self.key)}+{len(self.value)}")

    def to_bytes(self) -> bytes:
        return self.key + self.value

    @classmethod
    def from_bytes(cls, raw: bytes) -> KVRecord:
        if len(raw) != RECORD_LEN:
            raise ParameterError(f"malformed record of length {len(raw)}")
        return cls(raw[:KEY_LEN], raw[KEY_LEN:])


def split_records(data: bytes) -> list[bytes]:
    if len(data) % RECORD_LEN:
        raise ParameterError(f"input length {len(data)} is not a multiple of {RECORD_LEN}")
    return [data[i:i + RECORD_LEN] for i in range(0, len(data), RECORD_LEN)]


def equal_width_splitters(Q: int) -> list[bytes]:
    """Q-1 keys cutting the 10-byte key space into Q equal ranges."""
    return [(-(-i * KEY_SPACE // Q)).to_bytes(KEY_LEN, "big") for i in range(1, Q)]


def sampled_splitters(records: Sequence[bytes], Q: int, sample_size: int = 1000,
                      seed: int = 0) -> list[bytes]:
    """Quantile splitters estimated from a seeded random sample of keys."""
    if not records:
        return equal_width_splitters(Q)
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(records), size=min(sample_size, len(records)), replace=False)
    keys = sorted(records[i][:KEY_LEN] for i in idx)
    return [keys[(i * len(keys)) // Q] for i in range(1, Q)]


def bucket_of(key: bytes, splitters: Sequence[bytes]) -> int:
    """0-based bucket: the number of splitters <= key."""
    return bisect_right(splitters, key)


def sort_map(file: bytes, splitters: Sequence[bytes]) -> list[bytes]:
    if len(file) % RECORD_LEN:
        raise ParameterError(f"malformed record: file length {len(file)} not a multiple of {RECORD_LEN}")
    buckets: list[list[bytes]] = [[] for _ in range(len(splitters) + 1)]
    for i in range(0, len(file), RECORD_LEN):
        rec = file[i:i + RECORD_LEN]
        buckets[bisect_right(splitters, rec[:KEY_LEN])].append(rec)
    return [b"".join(b) for b in buckets]


def sort_reduce(values: Sequence[bytes]) -> bytes:
    # whole-record order breaks key ties deterministically
    return b"".join(sorted(split_records(b"".join(values))))


class SortWorkload(Workload):
    name = "sort"
    fixed_width = False

    def __init__(self, Q: int, splitters: Sequence[bytes] | None = None):
        super().__init__(Q)
        self.splitters = list(splitters) if splitters is not None else equal_width_splitters(Q)
        if len(self.splitters) != Q - 1:
            raise ParameterError(f"need {Q - 1} splitters for Q={Q}, got {len(self.splitters)}")

    def split(self, data: bytes, n_files: int) -> list[bytes]:
        return [b"".join(part) for part in split_evenly(split_records(data), n_files)]

    def map(self, file: bytes) -> list[bytes]:
        return sort_map(file, self.splitters)

    def reduce(self, function: int, values: Sequence[bytes]) -> bytes:
        return sort_reduce(values)

    def map_cost(self, file: bytes) -> int:
        return len(file) // RECORD_LEN


def generate_records(n: int, seed: int = 0) -> bytes:
    """TeraGen-like data: uniform random binary keys, printable 90-byte values."""
    rng = np.random.default_rng(seed)
    keys = rng.integers(0, 256, size=(n, KEY_LEN), dtype=np.uint8)
    filler = rng.integers(ord("A"), ord("Z") + 1, size=(n, 50), dtype=np.uint8)
    out = bytearray()
    for i in range(n):
        value = b"00" + f"{i:032X}".encode() + b"    " + filler[i].tobytes() + b"\r\n"
        out += keys[i].tobytes() + value
    return bytes(out)
