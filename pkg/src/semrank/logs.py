"""Search click-log data model: parsing, labeling, and CTR aggregation.

A log is a sequence of search sessions. Each session holds one query and up
to ten ranked results with click flags. Sessions arrive as JSONL, one object
per line:

    {"sid": "s1", "query": "red shoes",
     "results": [{"title": "buy red shoes", "clicked": 1},
                 {"title": "shoe history", "clicked": 0}]}

Array order defines rank (first element = rank 1). All text is lowercased
and split on whitespace runs; a token sequence joined with single spaces is
the canonical text form used as CTR keys and in every file format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, TextIO

from .errors import NoClicksError, ParseError, ValidationError

MAX_RESULTS = 10

TokenSeq = tuple[str, ...]


def tokenize(text: str) -> tuple[str, ...]:
    """Lowercase and split on whitespace runs. No stemming, no filtering."""
    return tuple(text.lower().split())


def text_of(tokens: tuple[str, ...]) -> str:
    """Canonical text form of a token sequence."""
    return " ".join(tokens)


class ResultLabel(Enum):
    """Click-derived class of one result within a session."""

    CLICKED = "Clicked"
    SKIPPED = "Skipped"
    NON_EXAMINED = "NonExamined"


@dataclass(frozen=True)
class ResultRecord:
    """One ranked result: title tokens, 1-based rank, click flag."""

    title: tuple[str, ...]
    rank: int
    clicked: bool


@dataclass(frozen=True)
class SearchSession:
    """One query with its ranked result list (order = rank)."""

    session_id: str
    query: tuple[str, ...]
    results: tuple[ResultRecord, ...]

    @property
    def clicked_ranks(self) -> tuple[int, ...]:
        return tuple(r.rank for r in self.results if r.clicked)


@dataclass
class CtrTable:
    """Impression/click counts per (query text, title text) pair."""

    counts: dict[tuple[str, str], tuple[int, int]] = field(default_factory=dict)

    def add(self, query: str, title: str, clicked: bool) -> None:
        imps, clicks = self.counts.get((query, title), (0, 0))
        self.counts[(query, title)] = (imps + 1, clicks + int(clicked))

    def impressions(self, query: str, title: str) -> int:
        return self.counts.get((query, title), (0, 0))[0]

    def ctr(self, query: str, title: str) -> float:
        """Clicks / impressions; 0.0 for never-seen pairs."""
        imps, clicks = self.counts.get((query, title), (0, 0))
        return clicks / imps if imps else 0.0

    def __len__(self) -> int:
        return len(self.counts)


def _session_from_obj(obj: dict, line_no: int) -> SearchSession:
    try:
        sid = obj["sid"]
        query_text = obj["query"]
        results_arr = obj["results"]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"missing field {exc}", line_no) from exc
    if not isinstance(sid, str) or not isinstance(query_text, str):
        raise ParseError("sid and query must be strings", line_no)
    if not isinstance(results_arr, list):
        raise ParseError("results must be an array", line_no)

    query = tokenize(query_text)
    if not query:
        raise ValidationError("empty query", session_id=sid)
    if not 1 <= len(results_arr) <= MAX_RESULTS:
        raise ValidationError(
            f"session must have 1..{MAX_RESULTS} results, got {len(results_arr)}",
            session_id=sid,
        )

    results = []
    for pos, item in enumerate(results_arr):
        try:
            title_text = item["title"]
            clicked = item["clicked"]
        except (KeyError, TypeError) as exc:
            raise ParseError(f"result {pos}: missing field {exc}", line_no) from exc
        if clicked not in (0, 1, True, False):
            raise ParseError(f"result {pos}: clicked must be 0 or 1", line_no)
        results.append(
            ResultRecord(title=tokenize(title_text), rank=pos + 1, clicked=bool(clicked))
        )
    return SearchSession(session_id=sid, query=query, results=tuple(results))


def parse_sessions(stream: Iterable[str | bytes]) -> list[SearchSession]:
    """Parse JSONL session records in file order.

    Raises ParseError (with line number) for malformed lines and
    ValidationError (with session id) for invariant violations.
    """
    sessions = []
    for line_no, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line_no) from exc
        sessions.append(_session_from_obj(obj, line_no))
    return sessions


def session_to_json(session: SearchSession) -> str:
    """One JSONL line for a session (inverse of parse, canonical text)."""
    obj = {
        "sid": session.session_id,
        "query": text_of(session.query),
        "results": [
            {"title": text_of(r.title), "clicked": int(r.clicked)} for r in session.results
        ],
    }
    return json.dumps(obj, ensure_ascii=False)


def write_sessions(sessions: Iterable[SearchSession], sink: TextIO) -> None:
    for session in sessions:
        sink.write(session_to_json(session) + "\n")


def classify_results(session: SearchSession) -> list[ResultLabel]:
    """Label each result Clicked, Skipped, or NonExamined.

    Clicked results keep their flag; a non-clicked result ranked above the
    last clicked one was examined and passed over (Skipped); anything ranked
    below every click is NonExamined. Undefined without a click anchor:
    raises NoClicksError so the caller can discard the session.
    """
    clicked_ranks = session.clicked_ranks
    if not clicked_ranks:
        raise NoClicksError(f"session {session.session_id!r} has no clicks")
    last_click = max(clicked_ranks)
    labels = []
    for r in session.results:
        if r.clicked:
            labels.append(ResultLabel.CLICKED)
        elif r.rank < last_click:
            labels.append(ResultLabel.SKIPPED)
        else:
            labels.append(ResultLabel.NON_EXAMINED)
    return labels


def iter_classified(
    sessions: Iterable[SearchSession],
) -> Iterator[tuple[SearchSession, list[ResultLabel]]]:
    """Yield (session, labels) for click-containing sessions, in order."""
    for session in sessions:
        try:
            yield session, classify_results(session)
        except NoClicksError:
            continue


def aggregate_ctr(sessions: Iterable[SearchSession]) -> CtrTable:
    """Count impressions and clicks for every observed (query, title) pair."""
    table = CtrTable()
    for session in sessions:
        q = text_of(session.query)
        for r in session.results:
            table.add(q, text_of(r.title), r.clicked)
    return table


def write_ctr(table: CtrTable, sink: TextIO) -> None:
    """TSV rows query/title/impressions/clicks, sorted for determinism."""
    for (query, title) in sorted(table.counts):
        imps, clicks = table.counts[(query, title)]
        sink.write(f"{query}\t{title}\t{imps}\t{clicks}\n")


def read_ctr(stream: Iterable[str]) -> CtrTable:
    table = CtrTable()
    for line_no, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise ParseError(f"expected 4 fields, got {len(parts)}", line_no)
        query, title, imps_s, clicks_s = parts
        try:
            imps, clicks = int(imps_s), int(clicks_s)
        except ValueError as exc:
            raise ParseError("counts must be integers", line_no) from exc
        if imps < 1 or clicks < 0 or clicks > imps:
            raise ParseError("need 0 <= clicks <= impressions, impressions >= 1", line_no)
        table.counts[(query, title)] = (imps, clicks)
    return table
