"""Two-tower embedding model for query/title relevance.

Both towers share one word-embedding table. A text is encoded by summing
its word embeddings element-wise, squashing through softsign, and applying
the tower's affine projection; relevance is the cosine of the two final
embeddings. All arithmetic is float64.

Model file format (text, UTF-8):

    SEMV1 <d_emb> <d_out> <vocab_size>
    <token> <v1> ... <v_d_emb>          # vocab_size embedding rows
    <query tower: d_out rows of W, then one row of b>
    <title tower: likewise>

Floats are written with 17 significant digits, so save -> load is
bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, TextIO

import numpy as np

from .errors import ModelFormatError
from .logs import TokenSeq

#: Norms below this make a cosine degenerate (reported as 0, flagged).
DEGENERATE_NORM = 1e-12

_MAGIC = "SEMV1"


@dataclass
class EmbeddingTable:
    """Token -> row map plus the |V| x d_emb embedding matrix."""

    vocab: dict[str, int]
    matrix: np.ndarray

    @property
    def d_emb(self) -> int:
        return self.matrix.shape[1]

    def row(self, token: str) -> int | None:
        return self.vocab.get(token)


@dataclass
class TowerParams:
    """Affine projection of one tower: output = W @ g + b."""

    W: np.ndarray
    b: np.ndarray


@dataclass
class SemModel:
    """Shared embeddings plus per-tower projections."""

    embeddings: EmbeddingTable
    query_tower: TowerParams
    title_tower: TowerParams

    @property
    def d_emb(self) -> int:
        return self.embeddings.d_emb

    @property
    def d_out(self) -> int:
        return self.query_tower.W.shape[0]

    def copy(self) -> "SemModel":
        return SemModel(
            embeddings=EmbeddingTable(dict(self.embeddings.vocab), self.embeddings.matrix.copy()),
            query_tower=TowerParams(self.query_tower.W.copy(), self.query_tower.b.copy()),
            title_tower=TowerParams(self.title_tower.W.copy(), self.title_tower.b.copy()),
        )


@dataclass
class ForwardTrace:
    """Intermediate values of one tower pass, kept for backprop."""

    h: np.ndarray  # element-wise sum of word embeddings
    g: np.ndarray  # softsign(h)
    O: np.ndarray  # W @ g + b
    oov_count: int
    rows: tuple[int, ...]  # embedding rows used, one entry per occurrence


def build_vocab(texts: Iterable[TokenSeq]) -> dict[str, int]:
    """Token -> row index, in first-seen order (deterministic)."""
    vocab: dict[str, int] = {}
    for text in texts:
        for token in text:
            if token not in vocab:
                vocab[token] = len(vocab)
    return vocab


def init_model(
    vocab: dict[str, int], d_emb: int, d_out: int, rng: np.random.Generator
) -> SemModel:
    """Fresh model: embeddings and W uniform in +-1/sqrt(d_emb), b zero."""
    bound = 1.0 / np.sqrt(d_emb)
    matrix = rng.uniform(-bound, bound, size=(len(vocab), d_emb))
    towers = []
    for _ in range(2):
        W = rng.uniform(-bound, bound, size=(d_out, d_emb))
        towers.append(TowerParams(W=W, b=np.zeros(d_out)))
    return SemModel(EmbeddingTable(dict(vocab), matrix), towers[0], towers[1])


def embed_sum(text: TokenSeq, table: EmbeddingTable) -> np.ndarray:
    """Element-wise sum of the word embeddings of in-vocabulary tokens.

    Out-of-vocabulary tokens contribute nothing; an all-OOV or empty text
    sums to the zero vector.
    """
    rows = [table.vocab[t] for t in text if t in table.vocab]
    if not rows:
        return np.zeros(table.d_emb)
    return table.matrix[rows].sum(axis=0)


def softsign(h: np.ndarray) -> np.ndarray:
    """x / (1 + |x|), element-wise; bounded to (-1, 1)."""
    h = np.asarray(h, dtype=np.float64)
    return h / (1.0 + np.abs(h))


def softsign_grad(h: np.ndarray) -> np.ndarray:
    """Derivative 1 / (1 + |x|)^2, element-wise."""
    h = np.asarray(h, dtype=np.float64)
    return 1.0 / (1.0 + np.abs(h)) ** 2


def project(g: np.ndarray, tower: TowerParams) -> np.ndarray:
    """Affine map W @ g + b."""
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (tower.W.shape[1],):
        raise ValueError(f"expected vector of dim {tower.W.shape[1]}, got shape {g.shape}")
    return tower.W @ g + tower.b


def cosine_detailed(o_q: np.ndarray, o_d: np.ndarray) -> tuple[float, bool]:
    """Cosine similarity and a degenerate flag.

    A near-zero norm on either side makes the cosine undefined; such pairs
    report 0.0 with the flag set instead of raising.
    """
    nq = float(np.linalg.norm(o_q))
    nd = float(np.linalg.norm(o_d))
    if nq < DEGENERATE_NORM or nd < DEGENERATE_NORM:
        return 0.0, True
    return float(o_q @ o_d) / (nq * nd), False


def cosine(o_q: np.ndarray, o_d: np.ndarray) -> float:
    return cosine_detailed(o_q, o_d)[0]


def forward(text: TokenSeq, table: EmbeddingTable, tower: TowerParams) -> ForwardTrace:
    """Full tower pass, recording intermediates and OOV statistics."""
    rows = tuple(table.vocab[t] for t in text if t in table.vocab)
    oov = len(text) - len(rows)
    if rows:
        h = table.matrix[list(rows)].sum(axis=0)
    else:
        h = np.zeros(table.d_emb)
    g = softsign(h)
    return ForwardTrace(h=h, g=g, O=tower.W @ g + tower.b, oov_count=oov, rows=rows)


def score_detailed(model: SemModel, query: TokenSeq, title: TokenSeq) -> tuple[float, bool]:
    """Relevance of a title to a query, with the degenerate flag."""
    tq = forward(query, model.embeddings, model.query_tower)
    td = forward(title, model.embeddings, model.title_tower)
    return cosine_detailed(tq.O, td.O)


def score(model: SemModel, query: TokenSeq, title: TokenSeq) -> float:
    """Cosine relevance in [-1, 1]; 0.0 for degenerate inputs."""
    return score_detailed(model, query, title)[0]


def _fmt(values: Iterable[float]) -> str:
    return " ".join(format(v, ".17g") for v in values)


def save_model(model: SemModel, sink: TextIO) -> None:
    """Write the text format described in the module docstring."""
    emb = model.embeddings
    sink.write(f"{_MAGIC} {model.d_emb} {model.d_out} {len(emb.vocab)}\n")
    by_row = sorted(emb.vocab.items(), key=lambda kv: kv[1])
    for token, row in by_row:
        sink.write(f"{token} {_fmt(emb.matrix[row])}\n")
    for tower in (model.query_tower, model.title_tower):
        for row in tower.W:
            sink.write(_fmt(row) + "\n")
        sink.write(_fmt(tower.b) + "\n")


def _next_line(lines: Iterator[str], what: str) -> str:
    try:
        return next(lines)
    except StopIteration:
        raise ModelFormatError(f"truncated file: missing {what}") from None


def _parse_floats(line: str, count: int, what: str) -> np.ndarray:
    parts = line.split()
    if len(parts) != count:
        raise ModelFormatError(f"{what}: expected {count} values, got {len(parts)}")
    try:
        return np.array([float(p) for p in parts], dtype=np.float64)
    except ValueError as exc:
        raise ModelFormatError(f"{what}: {exc}") from exc


def load_model(stream: Iterable[str]) -> SemModel:
    """Read a model file; raises ModelFormatError on any defect."""
    lines = (line.rstrip("\n") for line in stream)
    header = _next_line(lines, "header").split()
    if len(header) != 4 or header[0] != _MAGIC:
        raise ModelFormatError(f"bad header; expected '{_MAGIC} d_emb d_out vocab_size'")
    try:
        d_emb, d_out, vocab_size = (int(x) for x in header[1:])
    except ValueError as exc:
        raise ModelFormatError(f"bad header dimensions: {exc}") from exc
    if d_emb < 1 or d_out < 1 or vocab_size < 0:
        raise ModelFormatError("header dimensions must be positive")

    vocab: dict[str, int] = {}
    matrix = np.empty((vocab_size, d_emb))
    for row in range(vocab_size):
        parts = _next_line(lines, f"embedding row {row}").split()
        if len(parts) != d_emb + 1:
            raise ModelFormatError(
                f"embedding row {row}: expected token + {d_emb} values, got {len(parts)} fields"
            )
        token = parts[0]
        if token in vocab:
            raise ModelFormatError(f"duplicate token {token!r}")
        vocab[token] = row
        matrix[row] = _parse_floats(" ".join(parts[1:]), d_emb, f"embedding row {row}")

    towers = []
    for name in ("query", "title"):
        W = np.empty((d_out, d_emb))
        for i in range(d_out):
            W[i] = _parse_floats(
                _next_line(lines, f"{name} tower W row {i}"), d_emb, f"{name} W row {i}"
            )
        b = _parse_floats(_next_line(lines, f"{name} tower bias"), d_out, f"{name} bias")
        towers.append(TowerParams(W=W, b=b))

    for extra in lines:
        if extra.strip():
            raise ModelFormatError("trailing content after title tower")
    return SemModel(EmbeddingTable(vocab, matrix), towers[0], towers[1])
