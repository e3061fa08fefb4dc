from __future__ import annotations

import logging

from ..errors import CodedShuffleError

log = logging.getLogger(__name__)

PHASES = ("CodeGen", "Map", "Pack/Encode", "Shuffle", "Unpack/Decode", "Reduce")


def execute(run) -> list[str]:
    """Run every phase of ``run`` in order, each a barrier for the next.

    A failure is re-raised as the same exception type with the phase name
    prefixed, so callers can still map it onto an exit code.
    """
    done = []
    for name, step in run.phases():
        log.debug("phase %s", name)
        try:
            step()
        except CodedShuffleError as e:
            raise type(e)(f"{name} phase failed: {e}") from e
        done.append(name)
    return done
