"""Word counting: function f counts occurrences of the f-th vocabulary word.

Counts travel as fixed-width little-endian unsigned integers and add modulo
2^(8 * width), so every intermediate value and every aggregate has the same
size whatever the corpus.
"""
from __future__ import annotations

from collections import Counter
from typing import Sequence

import numpy as np

from ..errors import ParameterError
from .base import AggregateWorkload, Workload, split_evenly

_WORDS = (
    "the of and to in a is that for it as was with be by on not he this are or his from at "
    "which but have an they you were her she there one all we their been has would when who "
    "will more no if out so said what up its about into than them can only other new some "
    "could time these two may then do first any my now such like our over man me even most "
    "made after also did many before must through back years where much your way well down "
    "should because each just those people how too little state good very make world still "
    "own see men work long get here between both life being under never day same another know "
    "while last might us great old year off come since against go came right used take three"
).split()


def tokenize(text: bytes) -> list[bytes]:
    return text.lower().split()


def choose_vocabulary(text: bytes, Q: int) -> list[bytes]:
    """The Q most frequent words (ties alphabetical), padded with never-seen words."""
    counts = Counter(tokenize(text))
    vocab = [w for w, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))][:Q]
    i = 0
    while len(vocab) < Q:
        vocab.append(f"<unused-{i}>".encode())
        i += 1
    return vocab


def encode_count(n: int, width: int) -> bytes:
    return (n % (1 << (8 * width))).to_bytes(width, "little")


def decode_count(raw: bytes) -> int:
    return int.from_bytes(raw, "little")


def count_words(text: bytes, vocabulary: Sequence[bytes]) -> list[int]:
    counts = Counter(tokenize(text))
    return [counts.get(w, 0) for w in vocabulary]


class WordCountWorkload(Workload):
    name = "wordcount"
    fixed_width = True

    def __init__(self, vocabulary: Sequence[bytes], width: int = 8):
        super().__init__(len(vocabulary))
        if width < 1:
            raise ParameterError("count width must be at least one byte")
        self.vocabulary = [w if isinstance(w, bytes) else w.encode() for w in vocabulary]
        self.width = width

    def split(self, data: bytes, n_files: int) -> list[bytes]:
        lines = data.splitlines(keepends=True)
        return [b"".join(part) for part in split_evenly(lines, n_files)]

    def map(self, file: bytes) -> list[bytes]:
        return [encode_count(c, self.width) for c in count_words(file, self.vocabulary)]

    def reduce(self, function: int, values: Sequence[bytes]) -> bytes:
        return encode_count(sum(decode_count(v) for v in values), self.width)

    def map_cost(self, file: bytes) -> int:
        return len(tokenize(file))


class MultiWordCount(AggregateWorkload):
    """J books; function f of job j counts word f of that job's own vocabulary."""
    name = "wordcount"

    def __init__(self, vocabularies: Sequence[Sequence[bytes]], width: int = 8):
        Qs = {len(v) for v in vocabularies}
        if len(Qs) != 1:
            raise ParameterError("every job needs a vocabulary of the same size Q")
        super().__init__(Qs.pop(), width)
        self.vocabularies = [[w if isinstance(w, bytes) else w.encode() for w in v]
                             for v in vocabularies]

    def map(self, job: int, file: bytes) -> list[bytes]:
        return [encode_count(c, self.width)
                for c in count_words(file, self.vocabularies[job - 1])]

    def aggregate(self, values: Sequence[bytes]) -> bytes:
        return encode_count(sum(decode_count(v) for v in values), self.width)

    def map_cost(self, file: bytes) -> int:
        return len(tokenize(file))


def generate_text(n_lines: int, seed: int = 0, words_per_line: int = 12,
                  vocab_size: int = len(_WORDS)) -> bytes:
    """Synthetic corpus with Zipf-like word frequencies."""
    rng = np.random.default_rng(seed)
    words = _WORDS[:vocab_size]
    weights = 1.0 / np.arange(1, len(words) + 1)
    weights /= weights.sum()
    idx = rng.choice(len(words), size=(n_lines, words_per_line), p=weights)
    return "".join(" ".join(words[i] for i in row) + "\n" for row in idx).encode()
