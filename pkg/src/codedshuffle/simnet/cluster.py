from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Iterable

from ..errors import ProtocolError
from .transcript import CostModel, ShuffleTranscript, TranscriptEntry


@dataclass(frozen=True)
class Message:
    sender: int
    payload: bytes
    stage: str
    round_id: int | None = None
    group_id: int | None = None
    meta: Any = None


@dataclass
class WorkerState:
    id: int
    stored_files: dict = field(default_factory=dict)
    mapped_values: dict = field(default_factory=dict)
    received: dict = field(default_factory=dict)
    reduce_outputs: dict = field(default_factory=dict)
    inbox: list[Message] = field(default_factory=list)
    map_cost: int = 0

    def take(self, stage: str) -> list[Message]:
        """Pop every queued message of ``stage`` in arrival order."""
        out = [m for m in self.inbox if m.stage == stage]
        self.inbox = [m for m in self.inbox if m.stage != stage]
        return out


class Bus:
    """The only path by which one worker's data reaches another.

    Every send is appended to the transcript before delivery, so anything a
    worker holds in ``received`` can be traced back to a transcript entry.
    """

    def __init__(self, workers: dict[int, WorkerState], transcript: ShuffleTranscript):
        self.workers = workers
        self.transcript = transcript
        self.delivered = defaultdict(int)

    @property
    def cost_model(self) -> CostModel:
        return self.transcript.cost_model

    def send(self, sender: int, receivers: Iterable[int], payload: bytes, *, stage: str,
             round_id: int | None = None, group_id: int | None = None, meta: Any = None):
        receivers = tuple(receivers)
        if sender in receivers:
            raise ProtocolError(f"server {sender} cannot send to itself")
        for r in receivers:
            if r not in self.workers:
                raise ProtocolError(f"unknown receiver {r}")
        entry = TranscriptEntry(round_id, stage, sender, receivers, len(payload),
                                self.cost_model.charge(len(payload), len(receivers)), group_id)
        self.transcript.record(entry)
        msg = Message(sender, payload, stage, round_id, group_id, meta)
        for r in receivers:
            self.workers[r].inbox.append(msg)
            self.delivered[r] += len(payload)
        return entry


def make_cluster(K: int, transcript: ShuffleTranscript) -> tuple[dict[int, WorkerState], Bus]:
    workers = {s: WorkerState(s) for s in range(1, K + 1)}
    return workers, Bus(workers, transcript)
