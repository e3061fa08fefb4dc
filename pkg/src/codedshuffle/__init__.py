"""Coded shuffling for MapReduce built on resolvable designs from single parity-check codes."""
from .camr import MultiJobSpec, predict_loads_multi, run_multi_job
from .design import (DesignParams, ResolvableDesign, ServerGroup, build_design, build_spc_matrix,
                     enumerate_groups, make_design, missing_point)
from .errors import (CodedShuffleError, CorruptRoundError, IncompleteRoundError, ParameterError,
                     PreconditionError, ProtocolError, ReportError)
from .exchange import ExchangeRound, canonical_matching, decode_round, encode_round, random_matching
from .simnet import CostModel, ShuffleTranscript
from .simnet.audit import group_count_audit
from .simnet.pipeline import run_pipeline
from .singlejob import SingleJobSpec, predict_loads, run_single_job, run_uncoded

__all__ = [
    "MultiJobSpec", "predict_loads_multi", "run_multi_job", "DesignParams", "ResolvableDesign",
    "ServerGroup", "build_design", "build_spc_matrix", "enumerate_groups", "make_design",
    "missing_point", "CodedShuffleError", "CorruptRoundError", "IncompleteRoundError",
    "ParameterError", "PreconditionError", "ProtocolError", "ReportError", "ExchangeRound",
    "canonical_matching", "decode_round", "encode_round", "random_matching", "CostModel",
    "ShuffleTranscript", "group_count_audit", "run_pipeline", "SingleJobSpec", "predict_loads",
    "run_single_job", "run_uncoded",
]
