"""Resolvable designs generated by (k, k-1) single parity-check codes over Z_q.

Blocks are addressed two ways: by ``(cls, level)`` with ``cls`` in 1..k and
``level`` in 0..q-1, and by a 1-based server id ``(cls - 1) * q + level + 1``.
Points (files or jobs, depending on the protocol) are 1-based.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ParameterError

# points must stay addressable as signed 64-bit indices
MAX_POINTS = 2**63 - 1


@dataclass(frozen=True)
class DesignParams:
    q: int
    k: int

    def __post_init__(self):
        if not isinstance(self.q, int) or not isinstance(self.k, int):
            raise ParameterError("q and k must be integers")
        if self.q < 2:
            raise ParameterError(f"q must be >= 2 (got q={self.q})")
        if self.k < 2:
            raise ParameterError(f"k must be >= 2 (got k={self.k})")
        if self.q ** (self.k - 1) > MAX_POINTS:
            raise ParameterError(
                f"q^(k-1) = {self.q}^{self.k - 1} exceeds the supported point range")

    @property
    def K(self) -> int:
        return self.k * self.q

    @property
    def N(self) -> int:
        return self.q ** (self.k - 1)

    @property
    def block_size(self) -> int:
        return self.q ** (self.k - 2)

    @property
    def group_count(self) -> int:
        return self.q ** (self.k - 1) * (self.q - 1)


def build_spc_matrix(params: DesignParams) -> np.ndarray:
    """Stack all codewords of the SPC code as columns of a k x q^(k-1) matrix.

    Messages are enumerated lexicographically with the first coordinate varying
    slowest; the last row is the parity symbol -(u_1 + ... + u_{k-1}) mod q.
    """
    q, k = params.q, params.k
    messages = np.array(list(itertools.product(range(q), repeat=k - 1)), dtype=np.int64)
    messages = messages.reshape(params.N, k - 1)
    parity = (-messages.sum(axis=1)) % q
    T = np.concatenate([messages.T, parity[None, :]], axis=0)
    T.setflags(write=False)
    return T


@dataclass(frozen=True)
class ServerGroup:
    """One block per parallel class (class order), with empty common intersection."""
    levels: tuple[int, ...]
    members: tuple[int, ...]  # server ids
    group_id: int = 0

    @property
    def size(self) -> int:
        return len(self.members)


class ResolvableDesign:
    """The design (points, blocks B_{i,l}, parallel classes) built from a codeword matrix."""

    def __init__(self, params: DesignParams, matrix: np.ndarray):
        self.params = params
        self.matrix = matrix
        q, k = params.q, params.k
        blocks = {}
        for i in range(k):
            row = matrix[i]
            for level in range(q):
                blocks[(i + 1, level)] = tuple(int(j) + 1 for j in np.flatnonzero(row == level))
        self.blocks: dict[tuple[int, int], tuple[int, ...]] = blocks

    @property
    def q(self) -> int:
        return self.params.q

    @property
    def k(self) -> int:
        return self.params.k

    @property
    def K(self) -> int:
        return self.params.K

    @property
    def N(self) -> int:
        return self.params.N

    @property
    def points(self) -> range:
        return range(1, self.N + 1)

    def server_id(self, cls: int, level: int) -> int:
        return (cls - 1) * self.q + level + 1

    def block_of(self, server: int) -> tuple[int, int]:
        if not 1 <= server <= self.K:
            raise ParameterError(f"server id {server} out of range 1..{self.K}")
        return (server - 1) // self.q + 1, (server - 1) % self.q

    def block(self, server: int) -> tuple[int, ...]:
        return self.blocks[self.block_of(server)]

    def class_of(self, server: int) -> int:
        return self.block_of(server)[0]

    @property
    def classes(self) -> list[list[int]]:
        """Parallel classes as lists of server ids."""
        return [[self.server_id(i, l) for l in range(self.q)] for i in range(1, self.k + 1)]

    def column(self, point: int) -> tuple[int, ...]:
        return tuple(int(x) for x in self.matrix[:, point - 1])

    def servers_containing(self, point: int) -> tuple[int, ...]:
        """The k servers whose blocks contain ``point``, in class order."""
        return tuple(self.server_id(i + 1, level) for i, level in enumerate(self.column(point)))

    @cached_property
    def _codewords(self) -> dict[tuple[int, ...], int]:
        return {tuple(int(x) for x in self.matrix[:, j]): j + 1 for j in range(self.N)}

    @cached_property
    def _punctured(self) -> list[dict[tuple[int, ...], int]]:
        # for each class i: codeword with coordinate i deleted -> point
        out = []
        for i in range(self.k):
            table = {}
            for word, point in self._codewords.items():
                table[word[:i] + word[i + 1:]] = point
            out.append(table)
        return out

    def common_point(self, levels: tuple[int, ...]) -> int | None:
        """Point lying in B_{1,l_1} ∩ ... ∩ B_{k,l_k}, if any (there is at most one)."""
        return self._codewords.get(tuple(levels))

    def to_json(self, groups: list[ServerGroup] | None = None) -> str:
        if groups is None:
            groups = enumerate_groups(self)
        data = {
            "q": self.q,
            "k": self.k,
            "matrix": self.matrix.tolist(),
            "blocks": [list(self.block(s)) for s in range(1, self.K + 1)],
            "classes": self.classes,
            "groups": [list(g.members) for g in groups],
        }
        return json.dumps(data, sort_keys=True) + "\n"

    def __repr__(self):
        return f"ResolvableDesign(q={self.q}, k={self.k})"


def build_design(T: np.ndarray, q: int | None = None) -> ResolvableDesign:
    T = np.asarray(T, dtype=np.int64)
    k = T.shape[0]
    if q is None:
        q = int(T.max()) + 1
    params = DesignParams(q, k)
    if T.shape != (k, params.N):
        raise ParameterError(f"codeword matrix must be {k} x {params.N}, got {T.shape}")
    return ResolvableDesign(params, T)


def make_design(q: int, k: int) -> ResolvableDesign:
    params = DesignParams(q, k)
    return build_design(build_spc_matrix(params), q)


def enumerate_groups(design: ResolvableDesign) -> list[ServerGroup]:
    """All one-block-per-class selections with empty common intersection.

    A selection (l_1, ..., l_k) meets in a point exactly when it is itself a
    codeword column, so the groups are the non-codewords in lexicographic order.
    """
    groups = []
    for levels in itertools.product(range(design.q), repeat=design.k):
        if design.common_point(levels) is None:
            members = tuple(design.server_id(i + 1, l) for i, l in enumerate(levels))
            groups.append(ServerGroup(levels, members, len(groups) + 1))
    return groups


def missing_point(design: ResolvableDesign, group: ServerGroup, excluded: int) -> int:
    """The unique point shared by every member except member ``excluded`` (1-based)."""
    if not 1 <= excluded <= len(group.levels):
        raise ParameterError(f"excluded member index must be in 1..{len(group.levels)}")
    i = excluded - 1
    key = group.levels[:i] + group.levels[i + 1:]
    return design._punctured[i][key]
