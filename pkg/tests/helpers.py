"""Independent reference implementations used as test oracles."""
from __future__ import annotations

from itertools import product

from codedshuffle.design import DesignParams
from codedshuffle.singlejob import SingleJobSpec
from codedshuffle.workloads.wordcount import WordCountWorkload, choose_vocabulary, generate_text


def spc_columns(q: int, k: int) -> list[tuple[int, ...]]:
    """All codewords of the length-k single parity-check code, messages in lexicographic order."""
    return [msg + ((-sum(msg)) % q,) for msg in product(range(q), repeat=k - 1)]


def blocks_by_brute_force(q: int, k: int) -> dict[tuple[int, int], set[int]]:
    cols = spc_columns(q, k)
    return {(i, l): {j + 1 for j, c in enumerate(cols) if c[i - 1] == l}
            for i in range(1, k + 1) for l in range(q)}


def xor_oracle(*parts: bytes) -> bytes:
    n = max(len(p) for p in parts)
    acc = 0
    for p in parts:
        acc ^= int.from_bytes(p.ljust(n, b"\0"), "big")
    return acc.to_bytes(n, "big")


def wordcount_spec(q: int, k: int, Q: int | None = None, lines: int = 80, seed: int = 0,
                   width: int = 8) -> SingleJobSpec:
    params = DesignParams(q, k)
    Q = Q or params.K
    text = generate_text(lines, seed)
    wl = WordCountWorkload(choose_vocabulary(text, Q), width)
    return SingleJobSpec(params, Q, wl.split(text, params.N), wl)


def centralized_values(spec: SingleJobSpec) -> dict[tuple[int, int], bytes]:
    """(function, file) -> intermediate value, computed in one place."""
    out = {}
    for n, file in enumerate(spec.files, start=1):
        for f, v in enumerate(spec.workload.map(file), start=1):
            out[(f, n)] = v
    return out


def multi_wordcount_spec(q: int, k: int, gamma: int = 2, Q: int | None = None, lines: int = 40,
                         seed: int = 0, width: int = 8):
    from codedshuffle.camr import MultiJobSpec
    from codedshuffle.workloads.wordcount import MultiWordCount

    params = DesignParams(q, k)
    Q = Q or params.K
    texts = [generate_text(lines, seed + j) for j in range(params.N)]
    vocabs = [choose_vocabulary(t, Q) for t in texts]
    files = [WordCountWorkload(v).split(t, k * gamma) for v, t in zip(vocabs, texts)]
    return MultiJobSpec(params, Q, gamma, files, MultiWordCount(vocabs, width)), texts, vocabs
