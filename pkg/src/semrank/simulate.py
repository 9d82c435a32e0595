"""Synthetic corpus and click-log generation with known relevance.

The generator builds topical queries and candidate titles with relevance
grades 0/1/2 (off-topic, mixed, on-topic), then simulates users who browse
each ranked result list top to bottom: every examined result is clicked
with a grade-dependent probability, and browsing continues with one
probability after a click and another after a non-click. Presentation
order is relevance plus Gaussian noise, so clicks carry position bias and
sessions contain skipped results. Everything is deterministic per seed,
with one derived random stream per session.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np

from . import rng as rng_streams
from .errors import ConfigError, ParseError
from .judgments import PairwiseJudgment, Strategy
from .logs import MAX_RESULTS, ResultRecord, SearchSession, TokenSeq, text_of
from .rng import subrng

GRADES = (0, 1, 2)

#: Share of each grade among a query's candidates (grade 0, 1, 2).
_GRADE_SHARES = (0.5, 0.3, 0.2)


@dataclass
class SimConfig:
    """Knobs of the corpus generator and the browsing model."""

    seed: int = 0
    vocab_size: int = 400
    num_topics: int = 20
    query_count: int = 500
    results_per_query: int = 10
    sessions_per_query: int = 20
    tokens_per_query: int = 3
    tokens_per_title: int = 5
    click_prob: dict[int, float] = field(default_factory=lambda: {0: 0.05, 1: 0.3, 2: 0.7})
    continue_after_nonclick: float = 0.8
    continue_after_click: float = 0.5
    rank_noise: float = 1.0

    def validate(self) -> None:
        if not 1 <= self.results_per_query <= MAX_RESULTS:
            raise ConfigError(f"results_per_query must be in 1..{MAX_RESULTS}")
        if self.num_topics < 2:
            raise ConfigError("need >= 2 topics so off-topic (grade-0) titles exist")
        if self.vocab_size < self.num_topics * self.tokens_per_title:
            raise ConfigError(
                "vocab_size must be >= num_topics * tokens_per_title "
                f"({self.num_topics * self.tokens_per_title})"
            )
        if set(self.click_prob) != set(GRADES):
            raise ConfigError("click_prob must map exactly grades 0, 1, 2")
        probs = list(self.click_prob.values()) + [
            self.continue_after_nonclick,
            self.continue_after_click,
        ]
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ConfigError("probabilities must lie in [0, 1]")
        if self.rank_noise < 0:
            raise ConfigError("rank_noise must be >= 0")
        if min(self.query_count, self.sessions_per_query, self.tokens_per_query,
               self.tokens_per_title) < 1:
            raise ConfigError("counts must be >= 1")


@dataclass
class QueryRecord:
    """One query, its topic, and its graded candidate titles."""

    query: TokenSeq
    topic: int
    titles: tuple[TokenSeq, ...]
    grades: tuple[int, ...]


@dataclass
class Corpus:
    queries: list[QueryRecord]


@dataclass
class GroundTruth:
    """Relevance grade per (query text, title text)."""

    grades: dict[tuple[str, str], int] = field(default_factory=dict)

    def grade(self, query: str, title: str) -> int:
        return self.grades[(query, title)]

    def __len__(self) -> int:
        return len(self.grades)


def _grade_counts(results_per_query: int) -> list[int]:
    """Largest-remainder split of the candidate list across grades 0/1/2."""
    exact = [results_per_query * s for s in _GRADE_SHARES]
    counts = [int(x) for x in exact]
    remainders = sorted(range(3), key=lambda i: exact[i] - counts[i], reverse=True)
    for i in remainders[: results_per_query - sum(counts)]:
        counts[i] += 1
    return counts


def generate_corpus(config: SimConfig) -> tuple[Corpus, GroundTruth]:
    """Build queries, graded titles, and the ground-truth grade table.

    The vocabulary is partitioned into topic pools. Query tokens come from
    the query's topic; grade-2 titles draw only topic tokens, grade-1
    titles mix topic and off-topic tokens, grade-0 titles are fully
    off-topic. Titles are unique within a query.
    """
    config.validate()
    rng = subrng(config.seed, rng_streams.CORPUS)
    vocab = [f"w{i:04d}" for i in range(config.vocab_size)]
    pool_size = config.vocab_size // config.num_topics
    pools = [
        vocab[k * pool_size : (k + 1) * pool_size] for k in range(config.num_topics)
    ]
    counts = _grade_counts(config.results_per_query)

    queries: list[QueryRecord] = []
    truth = GroundTruth()
    for qi in range(config.query_count):
        topic = qi % config.num_topics
        topic_pool = pools[topic]
        off_pool = [t for k, p in enumerate(pools) if k != topic for t in p]
        query = _sample_text(rng, topic_pool, config.tokens_per_query)

        titles: list[TokenSeq] = []
        grades: list[int] = []
        seen: set[TokenSeq] = set()
        for grade in (2, 1, 0):
            for _ in range(counts[grade]):
                title = _draw_title(rng, grade, topic_pool, off_pool, config.tokens_per_title, seen)
                titles.append(title)
                grades.append(grade)
                seen.add(title)
        queries.append(
            QueryRecord(query=query, topic=topic, titles=tuple(titles), grades=tuple(grades))
        )
        q_text = text_of(query)
        for title, grade in zip(titles, grades):
            truth.grades[(q_text, text_of(title))] = grade
    return Corpus(queries=queries), truth


def _sample_text(rng: np.random.Generator, pool: list[str], k: int) -> TokenSeq:
    replace = k > len(pool)
    return tuple(str(t) for t in rng.choice(pool, size=k, replace=replace))


def _draw_title(
    rng: np.random.Generator,
    grade: int,
    topic_pool: list[str],
    off_pool: list[str],
    length: int,
    seen: set[TokenSeq],
) -> TokenSeq:
    for _ in range(50):
        if grade == 2:
            title = _sample_text(rng, topic_pool, length)
        elif grade == 0:
            title = _sample_text(rng, off_pool, length)
        else:
            on = (length + 1) // 2
            title = _sample_text(rng, topic_pool, on) + _sample_text(rng, off_pool, length - on)
        if title not in seen:
            return title
    raise ConfigError("could not draw a unique title; enlarge the vocabulary")


def cascade_clicks(
    grades_in_rank_order: Iterable[int],
    config: SimConfig,
    rng: np.random.Generator,
) -> tuple[list[bool], int]:
    """Browse one ranked list top to bottom.

    Returns (clicked flags, number of examined results). Clicks happen
    only on examined results; examination always starts at rank 1 and
    continues with continue_after_click after a click, otherwise with
    continue_after_nonclick.
    """
    grades = list(grades_in_rank_order)
    clicks: list[bool] = []
    examined = 0
    for grade in grades:
        examined += 1
        clicked = rng.random() < config.click_prob[grade]
        clicks.append(clicked)
        p_continue = (
            config.continue_after_click if clicked else config.continue_after_nonclick
        )
        if rng.random() >= p_continue:
            break
    clicks.extend([False] * (len(grades) - len(clicks)))
    return clicks, examined


def _rank_candidates(
    record: QueryRecord, noise: float, rng: np.random.Generator
) -> np.ndarray:
    scores = np.array(record.grades, dtype=np.float64)
    scores = scores + noise * rng.standard_normal(len(scores))
    return np.argsort(-scores, kind="stable")


def simulate_sessions(
    corpus: Corpus, ground_truth: GroundTruth, config: SimConfig
) -> list[SearchSession]:
    """Simulate sessions_per_query browsing sessions for every query.

    Presentation order is grade plus seeded Gaussian noise (rank_noise),
    re-drawn per session. Sessions without clicks are still emitted;
    judgment formulation discards them downstream.
    """
    sessions: list[SearchSession] = []
    for qi, record in enumerate(corpus.queries):
        for si in range(config.sessions_per_query):
            rng = subrng(config.seed, rng_streams.SESSION, qi, si)
            order = _rank_candidates(record, config.rank_noise, rng)
            ranked_grades = [record.grades[i] for i in order]
            clicks, _ = cascade_clicks(ranked_grades, config, rng)
            results = tuple(
                ResultRecord(title=record.titles[i], rank=pos + 1, clicked=clicks[pos])
                for pos, i in enumerate(order)
            )
            sessions.append(
                SearchSession(session_id=f"q{qi:05d}s{si:04d}", query=record.query, results=results)
            )
    return sessions


def ground_truth_pairs(
    corpus: Corpus,
    ground_truth: GroundTruth,
    pairs_per_query: int,
    seed: int,
) -> tuple[list[PairwiseJudgment], int]:
    """Sample graded preference pairs per query (higher grade preferred).

    Returns (pairs, skipped_query_count); a query is skipped when it has
    no two titles with strictly different grades.
    """
    pairs: list[PairwiseJudgment] = []
    skipped = 0
    for qi, record in enumerate(corpus.queries):
        candidates = [
            (i, j)
            for i in range(len(record.titles))
            for j in range(len(record.titles))
            if record.grades[i] > record.grades[j] and record.titles[i] != record.titles[j]
        ]
        if not candidates:
            skipped += 1
            continue
        rng = subrng(seed, rng_streams.GT_PAIRS, qi)
        take = min(pairs_per_query, len(candidates))
        chosen = rng.choice(len(candidates), size=take, replace=False)
        for c in sorted(int(c) for c in chosen):
            i, j = candidates[c]
            pairs.append(
                PairwiseJudgment(
                    query=record.query,
                    preferred=record.titles[i],
                    dispreferred=record.titles[j],
                    source=Strategy.GROUND_TRUTH,
                )
            )
    return pairs, skipped


def write_ground_truth(truth: GroundTruth, sink: TextIO) -> None:
    """TSV rows query/title/grade, sorted for determinism."""
    for (query, title) in sorted(truth.grades):
        sink.write(f"{query}\t{title}\t{truth.grades[(query, title)]}\n")


def read_ground_truth(stream: Iterable[str]) -> GroundTruth:
    truth = GroundTruth()
    for line_no, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(f"expected 3 fields, got {len(parts)}", line_no)
        try:
            grade = int(parts[2])
        except ValueError as exc:
            raise ParseError("grade must be an integer", line_no) from exc
        if grade not in GRADES:
            raise ParseError(f"grade must be one of {GRADES}", line_no)
        truth.grades[(parts[0], parts[1])] = grade
    return truth
