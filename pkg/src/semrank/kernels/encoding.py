"""Array encoding of judgment and scoring workloads for the kernels.

Texts are deduplicated into one flat CSR-style token table (embedding row
ids, one slice per text); pairs then reference texts by index. Tokens
missing from the vocabulary are dropped, matching the zero-contribution
policy of the forward pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..judgments import PairwiseJudgment
from ..logs import TokenSeq


class _TextTable:
    """Deduplicating token-sequence -> index table."""

    def __init__(self, vocab: dict[str, int]):
        self._vocab = vocab
        self._index: dict[TokenSeq, int] = {}
        self._rows: list[list[int]] = []

    def add(self, text: TokenSeq) -> int:
        idx = self._index.get(text)
        if idx is None:
            idx = len(self._rows)
            self._index[text] = idx
            self._rows.append([self._vocab[t] for t in text if t in self._vocab])
        return idx

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        offsets = np.zeros(len(self._rows) + 1, dtype=np.int64)
        for i, rows in enumerate(self._rows):
            offsets[i + 1] = offsets[i] + len(rows)
        tokens = np.empty(int(offsets[-1]), dtype=np.int32)
        for i, rows in enumerate(self._rows):
            tokens[offsets[i] : offsets[i + 1]] = rows
        return tokens, offsets


@dataclass
class EncodedJudgments:
    """Judgment triples as text indices over a shared token table."""

    tokens: np.ndarray  # int32 embedding row ids, all texts concatenated
    offsets: np.ndarray  # int64, text i spans tokens[offsets[i]:offsets[i+1]]
    q: np.ndarray  # int32 text index per pair
    p: np.ndarray
    n: np.ndarray

    def __len__(self) -> int:
        return len(self.q)


@dataclass
class EncodedScorePairs:
    """(query, title) pairs as text indices over a shared token table."""

    tokens: np.ndarray
    offsets: np.ndarray
    q: np.ndarray
    t: np.ndarray

    def __len__(self) -> int:
        return len(self.q)


def encode_judgments(
    judgments: Sequence[PairwiseJudgment], vocab: dict[str, int]
) -> EncodedJudgments:
    table = _TextTable(vocab)
    q = np.empty(len(judgments), dtype=np.int32)
    p = np.empty(len(judgments), dtype=np.int32)
    n = np.empty(len(judgments), dtype=np.int32)
    for i, j in enumerate(judgments):
        q[i] = table.add(j.query)
        p[i] = table.add(j.preferred)
        n[i] = table.add(j.dispreferred)
    tokens, offsets = table.arrays()
    return EncodedJudgments(tokens=tokens, offsets=offsets, q=q, p=p, n=n)


def encode_score_pairs(
    pairs: Iterable[tuple[TokenSeq, TokenSeq]], vocab: dict[str, int]
) -> EncodedScorePairs:
    table = _TextTable(vocab)
    q_idx: list[int] = []
    t_idx: list[int] = []
    for query, title in pairs:
        q_idx.append(table.add(query))
        t_idx.append(table.add(title))
    tokens, offsets = table.arrays()
    return EncodedScorePairs(
        tokens=tokens,
        offsets=offsets,
        q=np.array(q_idx, dtype=np.int32),
        t=np.array(t_idx, dtype=np.int32),
    )
