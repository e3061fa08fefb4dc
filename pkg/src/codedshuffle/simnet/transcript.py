from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from dataclasses import asdict, dataclass
from fractions import Fraction

from ..errors import ParameterError

COST_MODES = ("multicast-once", "per-receiver")


@dataclass(frozen=True)
class CostModel:
    """How a transmission is charged.

    ``multicast-once`` charges a packet once no matter how many servers hear it;
    ``per-receiver`` charges it once per receiver (a basic linear broadcast).
    """
    mode: str = "multicast-once"
    header_bytes: int = 0

    def __post_init__(self):
        if self.mode not in COST_MODES:
            raise ParameterError(f"cost model must be one of {COST_MODES}, got {self.mode!r}")
        if self.header_bytes < 0:
            raise ParameterError("header_bytes must be >= 0")

    def multiplicity(self, n_receivers: int) -> int:
        return n_receivers if self.mode == "per-receiver" else 1

    def charge(self, payload_bytes: int, n_receivers: int) -> int:
        return (payload_bytes + self.header_bytes) * self.multiplicity(n_receivers)


@dataclass(frozen=True)
class TranscriptEntry:
    round_id: int | None
    stage: str
    sender: int
    receivers: tuple[int, ...]
    payload_bytes: int
    charged_bytes: int
    group_id: int | None = None


@dataclass(frozen=True)
class RoundInfo:
    round_id: int
    stage: str
    group_id: int | None
    members: tuple[int, ...]
    lengths: tuple[int, ...]
    packet_len: int

    @property
    def slack(self) -> Fraction:
        """Bytes sent beyond the ideal k * B / (k - 1), caused only by padding."""
        k = len(self.members)
        return k * self.packet_len - Fraction(sum(self.lengths), k - 1)


class ShuffleTranscript:
    def __init__(self, meta: dict | None = None, cost_model: CostModel | None = None):
        self.meta = dict(meta or {})
        self.cost_model = cost_model or CostModel()
        self.meta.setdefault("cost_model", asdict(self.cost_model))
        self.entries: list[TranscriptEntry] = []
        self.rounds: dict[int, RoundInfo] = {}
        self._next_round = 1

    def new_round(self, stage: str, members, lengths, packet_len: int,
                  group_id: int | None = None) -> int:
        rid = self._next_round
        self._next_round += 1
        self.rounds[rid] = RoundInfo(rid, stage, group_id, tuple(members), tuple(lengths), packet_len)
        return rid

    def record(self, entry: TranscriptEntry):
        self.entries.append(entry)

    @property
    def total_bytes(self) -> int:
        return sum(e.charged_bytes for e in self.entries)

    @property
    def payload_bytes(self) -> int:
        return sum(e.payload_bytes for e in self.entries)

    def stage_bytes(self, stage: str) -> int:
        return sum(e.charged_bytes for e in self.entries if e.stage == stage)

    @property
    def stages(self) -> list[str]:
        return list(dict.fromkeys(e.stage for e in self.entries))

    def padding_slack(self, stage: str | None = None) -> Fraction:
        """Charged bytes attributable to padding, under this transcript's cost model."""
        total = Fraction(0)
        for r in self.rounds.values():
            if stage is None or r.stage == stage:
                total += r.slack * self.cost_model.multiplicity(len(r.members) - 1)
        return total

    @property
    def phase_totals(self) -> dict:
        by_stage = defaultdict(int)
        for e in self.entries:
            by_stage[e.stage] += e.charged_bytes
        return {
            "shuffle": self.total_bytes,
            "payload": self.payload_bytes,
            "transmissions": len(self.entries),
            "by_stage": dict(by_stage),
            "padding_slack": str(self.padding_slack()),
        }

    def to_dict(self) -> dict:
        return {
            "meta": self.meta,
            "entries": [
                {"round_id": e.round_id, "stage": e.stage, "sender": e.sender,
                 "receivers": list(e.receivers), "payload_bytes": e.payload_bytes,
                 "charged_bytes": e.charged_bytes, "group_id": e.group_id}
                for e in self.entries
            ],
            "rounds": [
                {"round_id": r.round_id, "stage": r.stage, "group_id": r.group_id,
                 "members": list(r.members), "lengths": list(r.lengths),
                 "packet_len": r.packet_len}
                for r in self.rounds.values()
            ],
            "totals": self.phase_totals,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> ShuffleTranscript:
        meta = dict(data.get("meta", {}))
        cm = meta.get("cost_model") or {}
        t = cls(meta, CostModel(**cm) if cm else None)
        for e in data.get("entries", []):
            t.record(TranscriptEntry(e["round_id"], e["stage"], e["sender"], tuple(e["receivers"]),
                                     e["payload_bytes"], e["charged_bytes"], e.get("group_id")))
        for r in data.get("rounds", []):
            t.rounds[r["round_id"]] = RoundInfo(r["round_id"], r["stage"], r.get("group_id"),
                                                tuple(r["members"]), tuple(r["lengths"]),
                                                r["packet_len"])
        t._next_round = max(t.rounds, default=0) + 1
        return t

    @classmethod
    def from_json(cls, text: str) -> ShuffleTranscript:
        return cls.from_dict(json.loads(text))

    def stage_csv(self) -> str:
        """Per-stage byte counts as CSV, for plotting."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["stage", "transmissions", "payload_bytes", "charged_bytes", "padding_slack"])
        for stage in self.stages:
            es = [e for e in self.entries if e.stage == stage]
            w.writerow([stage, len(es), sum(e.payload_bytes for e in es),
                        sum(e.charged_bytes for e in es), str(self.padding_slack(stage))])
        return buf.getvalue()

    def __len__(self):
        return len(self.entries)
