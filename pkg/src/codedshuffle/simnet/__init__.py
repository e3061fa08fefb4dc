"""Deterministic in-process cluster: workers, a byte-accounting bus, transcripts."""
from .cluster import Bus, Message, WorkerState, make_cluster
from .transcript import COST_MODES, CostModel, RoundInfo, ShuffleTranscript, TranscriptEntry

__all__ = [
    "Bus", "Message", "WorkerState", "make_cluster", "COST_MODES", "CostModel", "RoundInfo",
    "ShuffleTranscript", "TranscriptEntry",
]
