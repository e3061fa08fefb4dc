"""Group-local coded exchange.

Every member of a k-server group is missing exactly one chunk that all the
other members hold.  Each chunk is split into k-1 packets, each member
broadcasts the XOR of one packet from every chunk it holds, and every member
cancels the packets it already knows to recover the one it is missing.
Members are indexed 1..k inside a round.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import CorruptRoundError, IncompleteRoundError, ParameterError, PreconditionError

Matching = Callable[[int, int], dict[int, int]]


def xor_bytes(parts: Sequence[bytes], length: int) -> bytes:
    acc = np.zeros(length, dtype=np.uint8)
    for p in parts:
        acc ^= np.frombuffer(p, dtype=np.uint8)
    return acc.tobytes()


@dataclass(frozen=True)
class Chunk:
    payload: bytes
    owner: int  # member index that is missing this chunk


@dataclass(frozen=True)
class PacketSplit:
    packets: tuple[bytes, ...]
    pad_len: int

    def join(self) -> bytes:
        data = b"".join(self.packets)
        return data[:len(data) - self.pad_len] if self.pad_len else data


def packet_length(chunk_len: int, k: int) -> int:
    return -(-chunk_len // (k - 1))


def split_chunk(payload: bytes, parts: int, packet_len: int | None = None) -> PacketSplit:
    """Zero-pad ``payload`` to ``parts * packet_len`` bytes and cut it into ``parts`` packets."""
    if packet_len is None:
        packet_len = -(-len(payload) // parts)
    total = parts * packet_len
    if total < len(payload):
        raise ParameterError(f"{parts} packets of {packet_len} bytes cannot hold {len(payload)} bytes")
    pad = total - len(payload)
    data = payload + bytes(pad)
    return PacketSplit(tuple(data[i * packet_len:(i + 1) * packet_len] for i in range(parts)), pad)


def canonical_matching(k: int, j: int) -> dict[int, int]:
    """Match the r-th smallest member other than ``j`` to packet r of chunk j."""
    if not 1 <= j <= k:
        raise ParameterError(f"missing index {j} outside 1..{k}")
    others = [m for m in range(1, k + 1) if m != j]
    return {m: r for r, m in enumerate(others, start=1)}


def random_matching(seed: int) -> Matching:
    """A seeded matching; every member computing it for the same (k, j) agrees."""
    def matching(k: int, j: int) -> dict[int, int]:
        if not 1 <= j <= k:
            raise ParameterError(f"missing index {j} outside 1..{k}")
        others = [m for m in range(1, k + 1) if m != j]
        slots = list(range(1, k))
        random.Random(f"{seed}:{k}:{j}").shuffle(slots)
        return dict(zip(others, slots))
    return matching


@dataclass(frozen=True)
class ExchangeRound:
    """Metadata every member of a round agrees on before encoding."""
    k: int
    lengths: tuple[int, ...]  # original chunk length per member (index 0 is member 1)
    round_id: int = 0
    group_id: int = 0

    def __post_init__(self):
        if self.k < 2:
            raise ParameterError("a round needs at least two members")
        if len(self.lengths) != self.k:
            raise ParameterError(f"expected {self.k} chunk lengths, got {len(self.lengths)}")

    @property
    def packet_len(self) -> int:
        return packet_length(max(self.lengths), self.k)

    def pad_len(self, member: int) -> int:
        return (self.k - 1) * self.packet_len - self.lengths[member - 1]

    @property
    def total_bytes(self) -> int:
        return self.k * self.packet_len


@dataclass(frozen=True)
class CodedPacket:
    sender: int
    payload: bytes
    group_id: int
    round_id: int = 0


def encode_member(rnd: ExchangeRound, m: int, local: Mapping[int, bytes],
                  matching: Matching = canonical_matching) -> CodedPacket:
    """Coded packet of member ``m`` built only from the chunks it holds locally."""
    plen = rnd.packet_len
    terms = []
    for j in range(1, rnd.k + 1):
        if j == m:
            continue
        if j not in local:
            raise PreconditionError(
                f"member {m} of group {rnd.group_id} must hold the chunk missing at member {j}")
        chunk = local[j]
        if len(chunk) != rnd.lengths[j - 1]:
            raise PreconditionError(
                f"member {m} holds a {len(chunk)}-byte chunk for member {j}, "
                f"round expects {rnd.lengths[j - 1]}")
        split = split_chunk(chunk, rnd.k - 1, plen)
        terms.append(split.packets[matching(rnd.k, j)[m] - 1])
    return CodedPacket(m, xor_bytes(terms, plen), rnd.group_id, rnd.round_id)


def encode_round(chunks: Sequence[Chunk], access: Mapping[int, set[int]] | None = None,
                 group_id: int = 0, round_id: int = 0,
                 matching: Matching = canonical_matching) -> list[CodedPacket]:
    """Encode a whole round given every chunk and which chunks each member holds.

    ``access[m]`` lists the member indices whose chunks member m holds; by
    default member m holds every chunk except its own.
    """
    k = len(chunks)
    by_owner = {c.owner: c.payload for c in chunks}
    if sorted(by_owner) != list(range(1, k + 1)):
        raise ParameterError("chunks must be owned by members 1..k, one each")
    rnd = ExchangeRound(k, tuple(len(by_owner[j]) for j in range(1, k + 1)), round_id, group_id)
    packets = []
    for m in range(1, k + 1):
        held = access[m] if access is not None else set(by_owner) - {m}
        if m in held:
            raise PreconditionError(f"member {m} already holds the chunk it is meant to receive")
        local = {j: by_owner[j] for j in held if j in by_owner}
        packets.append(encode_member(rnd, m, local, matching))
    return packets


def decode_round(rnd: ExchangeRound, received: Sequence[CodedPacket], local: Mapping[int, bytes],
                 m: int, matching: Matching = canonical_matching) -> Chunk:
    """Recover member m's missing chunk from the k-1 packets sent by the other members."""
    plen = rnd.packet_len
    by_sender = {}
    for pkt in received:
        if pkt.sender == m:
            continue
        if len(pkt.payload) != plen:
            raise CorruptRoundError(
                f"group {rnd.group_id}: packet from member {pkt.sender} is {len(pkt.payload)} "
                f"bytes, expected {plen}")
        by_sender[pkt.sender] = pkt.payload
    missing = [s for s in range(1, rnd.k + 1) if s != m and s not in by_sender]
    if missing:
        raise IncompleteRoundError(
            f"group {rnd.group_id}: member {m} lacks packets from members {missing}")

    splits = {j: split_chunk(local[j], rnd.k - 1, plen) for j in range(1, rnd.k + 1) if j != m}
    own_matching = matching(rnd.k, m)
    recovered: dict[int, bytes] = {}
    for s, payload in by_sender.items():
        known = [splits[j].packets[matching(rnd.k, j)[s] - 1]
                 for j in range(1, rnd.k + 1) if j not in (s, m)]
        recovered[own_matching[s]] = xor_bytes([payload, *known], plen)
    packets = tuple(recovered[r] for r in range(1, rnd.k))
    return Chunk(PacketSplit(packets, rnd.pad_len(m)).join(), m)
