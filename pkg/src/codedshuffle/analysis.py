"""Closed-form loads, costs and counts, and measured-vs-predicted reconciliation.

Everything predicted here is an exact ``Fraction``; floats only appear in
rendered output.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

from .design import DesignParams
from .errors import ParameterError, ReportError

SCHEME_TAGS = ("uncoded-r", "proposed", "cdc", "ccdc")


def _params(q: int, k: int) -> DesignParams:
    return DesignParams(q, k)


# -- single job -------------------------------------------------------------

def uncoded_load(K: int, r: int) -> Fraction:
    if not 1 <= r <= K:
        raise ParameterError(f"computation load r must be in 1..K={K}, got {r}")
    return 1 - Fraction(r, K)


def cdc_load(K: int, r: int) -> Fraction:
    return Fraction(1, r) * uncoded_load(K, r)


def cdc_min_files(K: int, r: int, eta1: int = 1) -> int:
    return comb(K, r) * eta1


def proposed_single_load(q: int, k: int) -> Fraction:
    K = _params(q, k).K
    return Fraction(1, k - 1) * (1 - Fraction(k, K))


# -- multi job --------------------------------------------------------------

def camr_stage_loads(q: int, k: int) -> tuple[Fraction, Fraction, Fraction]:
    K = _params(q, k).K
    s1 = Fraction(k, K * (k - 1))
    s2 = Fraction((q - 1) * k, K * (k - 1))
    s3 = Fraction(q - 1, q)
    return s1, s2, s3


def camr_total_load(q: int, k: int) -> Fraction:
    return Fraction(k * (q - 1) + 1, q * (k - 1))


def camr_storage_fraction(q: int, k: int) -> Fraction:
    return Fraction(k - 1, _params(q, k).K)


def ccdc_load(mu: Fraction, K: int) -> Fraction:
    mu = Fraction(mu)
    muK = mu * K
    if muK.denominator != 1 or not 1 <= muK <= K - 1:
        raise ParameterError(f"mu*K must be an integer in 1..K-1, got {muK}")
    return (1 - mu) * (muK + 1) / muK


def ccdc_min_jobs(mu: Fraction, K: int) -> int:
    muK = Fraction(mu) * K
    if muK.denominator != 1:
        raise ParameterError("mu*K must be an integer")
    return comb(K, int(muK) + 1)


# -- matrix-vector ----------------------------------------------------------

def matvec_uncoded_load(k: int) -> Fraction:
    return Fraction(k - 1)


def matvec_cost_ratio(k: int) -> Fraction:
    return Fraction(k - 1)


def matvec_shuffle_gain(q: int, k: int) -> Fraction:
    return Fraction((k - 1) ** 2 * q, k * (q - 1) + 1)


# -- communicator / group counts -------------------------------------------

def prior_group_count(K: int, r: int) -> int:
    return comb(K, r + 1)


def proposed_group_count(q: int, k: int) -> int:
    return q ** (k - 1) * (q - 1)


def formulas(params: DesignParams, r: int | None = None) -> dict:
    """Every closed form for one (q, k), with r the prior schemes' computation load.

    ``r`` defaults to k, the computation load of the resolvable-design schemes.
    """
    q, k, K = params.q, params.k, params.K
    r = k if r is None else r
    mu = camr_storage_fraction(q, k)
    s1, s2, s3 = camr_stage_loads(q, k)
    return {
        "q": q, "k": k, "K": K, "r": r,
        "single": {
            "proposed": proposed_single_load(q, k),
            "uncoded": uncoded_load(K, r),
            "uncoded_r1": uncoded_load(K, 1),
            "cdc": cdc_load(K, r),
            "computation_load_proposed": k,
            "files_proposed": params.N,
            "files_cdc": cdc_min_files(K, r),
        },
        "multi": {
            "stage1": s1, "stage2": s2, "stage3": s3,
            "camr_total": camr_total_load(q, k),
            "mu": mu,
            "ccdc_at_same_mu": ccdc_load(mu, K),
            "j_min_camr": params.N,
            "j_min_ccdc": ccdc_min_jobs(mu, K),
        },
        "matvec": {
            "uncoded_load": matvec_uncoded_load(k),
            "cost_ratio": matvec_cost_ratio(k),
            "shuffle_gain": matvec_shuffle_gain(q, k),
        },
        "groups": {
            "proposed": proposed_group_count(q, k),
            "prior": prior_group_count(K, r),
        },
    }


def render(x) -> str:
    """Exact fraction plus a 4-place decimal, e.g. ``1/14 (0.0714)``."""
    if isinstance(x, Fraction):
        return f"{x} ({float(x):.4f})"
    return str(x)


# -- measured loads ----------------------------------------------------------

@dataclass(frozen=True)
class LoadReport:
    scheme_tag: str
    total_bits: int
    normalizer_bits: int
    predicted_load: Fraction | None
    slack_bits: Fraction = Fraction(0)
    stage: str | None = None
    note: str = ""

    @property
    def normalized_load(self) -> Fraction | None:
        if self.normalizer_bits == 0:
            return None
        return Fraction(self.total_bits, self.normalizer_bits)

    @property
    def load_without_slack(self) -> Fraction | None:
        if self.normalizer_bits == 0:
            return None
        return (self.total_bits - self.slack_bits) / self.normalizer_bits

    def to_dict(self) -> dict:
        def s(x):
            return None if x is None else str(x)
        return {
            "scheme": self.scheme_tag, "stage": self.stage,
            "total_bits": self.total_bits, "normalizer_bits": self.normalizer_bits,
            "normalized_load": s(self.normalized_load),
            "load_without_slack": s(self.load_without_slack),
            "predicted_load": s(self.predicted_load),
            "slack_bits": s(self.slack_bits),
            "decimal": None if self.normalized_load is None else round(float(self.normalized_load), 4),
            "note": self.note,
        }


def load_report(transcript, scheme_tag: str, normalizer_bytes: int, predicted: Fraction | None,
                stage: str | None = None, note: str = "") -> LoadReport:
    """Normalize a transcript's charged bytes (optionally one stage of it)."""
    total = transcript.total_bytes if stage is None else transcript.stage_bytes(stage)
    return LoadReport(scheme_tag, 8 * total, 8 * normalizer_bytes, predicted,
                      8 * transcript.padding_slack(stage), stage, note)


@dataclass
class SchemeComparison:
    rows: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({"rows": self.rows}, sort_keys=True, indent=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ["scheme", "stage", "r_or_k", "q", "N_or_J_required", "predicted_load",
                "measured_load", "deviation", "slack", "groups_count", "flag", "note"]
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for row in self.rows:
            w.writerow(row)
        return buf.getvalue()

    def to_markdown(self) -> str:
        cols = ["scheme", "stage", "r_or_k", "q", "N_or_J_required", "predicted_load",
                "measured_load", "deviation", "groups_count", "flag"]
        lines = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
        for row in self.rows:
            lines.append("| " + " | ".join("" if row.get(c) is None else str(row.get(c))
                                           for c in cols) + " |")
        return "\n".join(lines) + "\n"


def reconcile(transcript, predictions: dict | None = None) -> SchemeComparison:
    """Join a transcript's measured loads with closed-form predictions.

    ``predictions`` maps stage tag (or ``"total"``) to a predicted load; when
    omitted they are rebuilt from the transcript's meta block.  A deviation
    larger than the padding slack is flagged; under a per-receiver or header
    cost model that flag is attributed to the cost model, not the protocol.
    """
    meta = transcript.meta
    normalizer = meta.get("normalizer_bytes", 0)
    if not normalizer:
        raise ReportError("normalization divisor is zero (empty workload); no load to report")
    if predictions is None:
        predictions = predictions_from_meta(meta)
    cm = transcript.cost_model
    plain = cm.mode == "multicast-once" and cm.header_bytes == 0
    protocol = meta.get("protocol", "")
    q, k = meta.get("q"), meta.get("k")
    groups = proposed_group_count(q, k) if q and k and protocol in ("single", "multi") else None
    fixed = meta.get("fixed_width", True)

    comp = SchemeComparison()
    stages = transcript.stages if len(transcript.stages) > 1 else []
    for stage in [*stages, None]:
        key = stage or "total"
        measured_bytes = transcript.total_bytes if stage is None else transcript.stage_bytes(stage)
        measured = Fraction(measured_bytes, normalizer)
        slack = transcript.padding_slack(stage) / normalizer
        pred = predictions.get(key)
        row = {
            "scheme": meta.get("scheme", protocol), "stage": key,
            "r_or_k": meta.get("r", k), "q": q,
            "N_or_J_required": meta.get("J") or meta.get("N"),
            "predicted_load": None if pred is None else str(pred),
            "measured_load": str(measured),
            "measured_decimal": round(float(measured), 4),
            "slack": str(slack),
            "groups_count": groups,
            "deviation": None, "flag": "", "note": "",
        }
        if pred is not None:
            dev = measured - pred
            row["deviation"] = str(dev)
            if not fixed:
                row["flag"] = "variable-width"
                row["note"] = ("intermediate values vary in size per bucket; the closed form "
                               "assumes fixed-width values and is only indicative")
            elif not (0 <= dev <= slack):
                if plain:
                    row["flag"] = "protocol-deviation"
                else:
                    row["flag"] = "cost-model"
                    row["note"] = (f"measured under {cm.mode} with {cm.header_bytes} header bytes; "
                                   "prediction assumes multicast-once accounting")
        comp.rows.append(row)
    return comp


def predictions_from_meta(meta: dict) -> dict:
    protocol = meta.get("protocol")
    q, k = meta.get("q"), meta.get("k")
    if protocol == "single":
        return {"total": proposed_single_load(q, k)}
    if protocol == "uncoded":
        return {"total": uncoded_load(meta["K"], meta["r"])}
    if protocol == "multi":
        s1, s2, s3 = camr_stage_loads(q, k)
        return {"stage1": s1, "stage2": s2, "stage3": s3, "total": camr_total_load(q, k)}
    if protocol == "matvec-uncoded":
        return {"total": matvec_uncoded_load(k)}
    return {}
