"""How many communicators each scheme must create, against MPI implementation limits."""
from __future__ import annotations

from math import comb

DEFAULT_LIMITS = {"Open MPI": 2 ** 30 - 1, "MPICH": 16000, "MVAPICH": 2000}


def group_count_audit(K: int, r: int, q: int | None = None, k: int | None = None,
                      limits: dict[str, int] | None = None) -> dict:
    """Compare C(K, r+1) prior-scheme groups with q^(k-1)(q-1) design groups.

    ``exceeds`` lists, per scheme, the limits its group count goes over.
    """
    limits = DEFAULT_LIMITS if limits is None else limits
    prior = comb(K, r + 1)
    proposed = q ** (k - 1) * (q - 1) if q is not None and k is not None else None
    exceeds = {"prior": sorted(name for name, cap in limits.items() if prior > cap)}
    if proposed is not None:
        exceeds["proposed"] = sorted(name for name, cap in limits.items() if proposed > cap)
    return {"K": K, "r": r, "q": q, "k": k, "prior_groups": prior, "proposed_groups": proposed,
            "limits": dict(limits), "exceeds": exceeds}
