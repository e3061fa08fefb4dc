"""One entry point for every protocol: run all phases and hand back the results."""
from __future__ import annotations

from ..errors import ParameterError
from ..exchange import Matching, canonical_matching
from .transcript import CostModel

PROTOCOLS = ("single", "multi", "uncoded")


def run_pipeline(protocol: str, spec, cost_model: CostModel | None = None, seed: int = 0,
                 matching: Matching = canonical_matching):
    """Run ``spec`` under ``protocol`` and return (transcript, reports, outputs).

    ``uncoded`` takes a single-job spec and shuffles without coding on the
    same design placement, so both runs do identical map work.
    """
    from ..camr import run_multi_job
    from ..design import make_design
    from ..singlejob import UncodedRun, run_single_job
    from .phases import execute

    if protocol == "single":
        res = run_single_job(spec, cost_model, seed, matching)
    elif protocol == "multi":
        res = run_multi_job(spec, cost_model, seed, matching)
    elif protocol == "uncoded":
        p = spec.params
        design = make_design(p.q, p.k)
        placement = {s: design.block(s) for s in range(1, p.K + 1)}
        run = UncodedRun(spec.files, spec.Q, p.K, p.k, spec.workload, placement, cost_model, seed)
        res = run.result(execute(run))
    else:
        raise ParameterError(f"unknown protocol {protocol!r}; choose from {', '.join(PROTOCOLS)}")
    return res.transcript, res.reports, res.outputs
