"""Pairwise judgment formulation from classified sessions.

Four atomic strategies pair two disjoint result classes within a session
(Clicked>Skipped, Clicked>Clicked via CTR, Clicked>NonExamined,
Skipped>NonExamined); the hybrid Clicked>NonClicked is the union of
Clicked>Skipped and Clicked>NonExamined. Judgments serialize as TSV rows

    query \t preferred_title \t dispreferred_title \t strategy_tag
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, TextIO

from .errors import ConfigError, EmptyLogError, ParseError
from .logs import (
    CtrTable,
    ResultLabel,
    ResultRecord,
    SearchSession,
    iter_classified,
    text_of,
    tokenize,
)


class Strategy(Enum):
    """Pairwise judgment source. Values are the serialized tags."""

    CLICKED_OVER_SKIPPED = "C>S"
    CLICKED_OVER_CLICKED = "C>C"
    CLICKED_OVER_NON_EXAMINED = "C>NE"
    SKIPPED_OVER_NON_EXAMINED = "S>NE"
    CLICKED_OVER_NON_CLICKED = "C>NC"
    GROUND_TRUTH = "GT"  # reserved for simulator-labeled pairs


# Canonical reporting order for the distribution table.
ATOMIC_STRATEGIES = (
    Strategy.CLICKED_OVER_CLICKED,
    Strategy.CLICKED_OVER_SKIPPED,
    Strategy.SKIPPED_OVER_NON_EXAMINED,
    Strategy.CLICKED_OVER_NON_EXAMINED,
)

FORMULATION_STRATEGIES = (
    Strategy.CLICKED_OVER_SKIPPED,
    Strategy.CLICKED_OVER_CLICKED,
    Strategy.CLICKED_OVER_NON_EXAMINED,
    Strategy.SKIPPED_OVER_NON_EXAMINED,
    Strategy.CLICKED_OVER_NON_CLICKED,
)

# Label classes paired by each simple cross-product strategy.
_PAIRING = {
    Strategy.CLICKED_OVER_SKIPPED: (ResultLabel.CLICKED, ResultLabel.SKIPPED),
    Strategy.CLICKED_OVER_NON_EXAMINED: (ResultLabel.CLICKED, ResultLabel.NON_EXAMINED),
    Strategy.SKIPPED_OVER_NON_EXAMINED: (ResultLabel.SKIPPED, ResultLabel.NON_EXAMINED),
}


@dataclass(frozen=True)
class PairwiseJudgment:
    """Preference triple: for this query, preferred beats dispreferred."""

    query: tuple[str, ...]
    preferred: tuple[str, ...]
    dispreferred: tuple[str, ...]
    source: Strategy


@dataclass(frozen=True)
class CtrParams:
    """Noise floor for CTR-differentiated clicked pairs."""

    min_impressions: int = 5
    min_gap: float = 0.05


@dataclass
class DistributionReport:
    """Pair counts and share per atomic strategy over one session list."""

    counts: dict[Strategy, int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def percentage(self, strategy: Strategy) -> float:
        return 100.0 * self.counts[strategy] / self.total


def _cross_pairs(
    session: SearchSession,
    labels: list[ResultLabel],
    strategy: Strategy,
) -> Iterable[PairwiseJudgment]:
    """All (preferred, dispreferred) pairs of the strategy's two classes.

    Rank order on both sides; pairs with identical titles are dropped
    (a judgment must prefer one title over a different one).
    """
    left, right = _PAIRING[strategy]
    preferred = [r for r, lab in zip(session.results, labels) if lab is left]
    dispreferred = [r for r, lab in zip(session.results, labels) if lab is right]
    for p in preferred:
        for n in dispreferred:
            if p.title != n.title:
                yield PairwiseJudgment(session.query, p.title, n.title, strategy)


def _ctr_pairs(
    session: SearchSession,
    labels: list[ResultLabel],
    ctr: CtrTable,
    params: CtrParams,
) -> Iterable[PairwiseJudgment]:
    """Clicked-vs-clicked pairs ordered by corpus-level CTR.

    Both sides need at least min_impressions; the CTR gap must reach
    min_gap, and equal CTRs never pair.
    """
    query_text = text_of(session.query)
    clicked = [r for r, lab in zip(session.results, labels) if lab is ResultLabel.CLICKED]
    for p in clicked:
        for n in clicked:
            if p.title == n.title:
                continue
            pt, nt = text_of(p.title), text_of(n.title)
            if ctr.impressions(query_text, pt) < params.min_impressions:
                continue
            if ctr.impressions(query_text, nt) < params.min_impressions:
                continue
            gap = ctr.ctr(query_text, pt) - ctr.ctr(query_text, nt)
            if gap >= params.min_gap and gap > 0.0:
                yield PairwiseJudgment(
                    session.query, p.title, n.title, Strategy.CLICKED_OVER_CLICKED
                )


def formulate(
    sessions: list[SearchSession],
    strategy: Strategy,
    ctr: Optional[CtrTable] = None,
    ctr_params: Optional[CtrParams] = None,
) -> list[PairwiseJudgment]:
    """Derive all pairwise judgments for one strategy.

    Sessions without clicks contribute nothing. Output order is
    deterministic: session order, then preferred rank, then dispreferred
    rank; the hybrid strategy is the concatenation of its two atomic
    outputs, re-tagged. Duplicate judgments across sessions are kept.
    """
    if strategy is Strategy.CLICKED_OVER_NON_CLICKED:
        first = formulate(sessions, Strategy.CLICKED_OVER_SKIPPED)
        second = formulate(sessions, Strategy.CLICKED_OVER_NON_EXAMINED)
        return [
            PairwiseJudgment(j.query, j.preferred, j.dispreferred, strategy)
            for j in first + second
        ]
    if strategy is Strategy.CLICKED_OVER_CLICKED:
        if ctr is None:
            raise ConfigError("ClickedOverClicked needs a CTR table")
        params = ctr_params or CtrParams()
        return [
            j
            for session, labels in iter_classified(sessions)
            for j in _ctr_pairs(session, labels, ctr, params)
        ]
    if strategy in _PAIRING:
        return [
            j
            for session, labels in iter_classified(sessions)
            for j in _cross_pairs(session, labels, strategy)
        ]
    raise ConfigError(f"{strategy} is not a formulation strategy")


def distribution(
    sessions: list[SearchSession],
    ctr: CtrTable,
    ctr_params: Optional[CtrParams] = None,
) -> DistributionReport:
    """Pair counts of the four atomic strategies over one session list."""
    counts = {
        s: len(formulate(sessions, s, ctr=ctr, ctr_params=ctr_params))
        for s in ATOMIC_STRATEGIES
    }
    if sum(counts.values()) == 0:
        raise EmptyLogError("no pairs produced by any atomic strategy")
    return DistributionReport(counts=counts)


def write_distribution(report: DistributionReport, sink: TextIO) -> None:
    """CSV rows strategy,count,percentage in canonical strategy order."""
    sink.write("strategy,count,percentage\n")
    for strategy in ATOMIC_STRATEGIES:
        sink.write(
            f"{strategy.value},{report.counts[strategy]},"
            f"{report.percentage(strategy):.4f}\n"
        )


def write_judgments(judgments: Iterable[PairwiseJudgment], sink: TextIO) -> None:
    for j in judgments:
        sink.write(
            f"{text_of(j.query)}\t{text_of(j.preferred)}\t"
            f"{text_of(j.dispreferred)}\t{j.source.value}\n"
        )


_TAG_TO_STRATEGY = {s.value: s for s in Strategy}


def read_judgments(stream: Iterable[str]) -> list[PairwiseJudgment]:
    """Inverse of write_judgments; raises ParseError with the row number."""
    judgments = []
    for row_no, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise ParseError(f"expected 4 fields, got {len(parts)}", row_no)
        query, preferred, dispreferred, tag = parts
        strategy = _TAG_TO_STRATEGY.get(tag)
        if strategy is None:
            raise ParseError(f"unknown strategy tag {tag!r}", row_no)
        judgments.append(
            PairwiseJudgment(
                tokenize(query), tokenize(preferred), tokenize(dispreferred), strategy
            )
        )
    return judgments
