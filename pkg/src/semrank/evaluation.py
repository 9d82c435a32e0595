"""Holdout test sets, pairwise precision, and the strategy comparison.

Test-1 takes one (clicked, non-clicked) pair per eligible holdout session
and asks whether the model scores the clicked title higher. Ground-truth
pairs from the simulator play the role of human-labeled preferences. The
comparison pipeline formulates judgments per strategy on the training
sessions, trains each strategy from one shared initialization, and records
precision on every test set after every iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, TextIO

import numpy as np

from . import rng as rng_streams
from .errors import EmptyTestSetError, ParseError, ValidationError
from .judgments import (
    FORMULATION_STRATEGIES,
    CtrParams,
    PairwiseJudgment,
    Strategy,
    formulate,
)
from .kernels import get_backend
from .kernels.encoding import EncodedScorePairs, encode_score_pairs
from .logs import SearchSession, aggregate_ctr
from .model import SemModel, init_model
from .rng import subrng
from .training import TrainingConfig, judgment_vocab, train

TEST1 = "Test1"
GROUND_TRUTH_SET = "GroundTruth"


@dataclass
class TestSet:
    """Fixed list of preference pairs with a named origin."""

    __test__ = False  # not a pytest class, despite the name

    pairs: list[PairwiseJudgment]
    origin: str


@dataclass
class ReportRow:
    strategy: str
    iteration: int
    testset: str
    precision: float
    pairs: int


@dataclass
class EvaluationReport:
    """Per-strategy, per-iteration precision plus run metadata."""

    rows: list[ReportRow] = field(default_factory=list)
    # precision of the shared initialization (iteration 0), per test set
    baselines: dict[str, ReportRow] = field(default_factory=dict)
    judgment_counts: dict[str, int] = field(default_factory=dict)
    statuses: dict[str, str] = field(default_factory=dict)  # "ok" | "empty"
    final_models: dict[str, SemModel] = field(default_factory=dict)


def build_test1(holdout_sessions: Sequence[SearchSession], seed: int) -> TestSet:
    """One uniformly chosen (clicked, non-clicked) pair per eligible session.

    A session qualifies with at least one clicked and one non-clicked
    result; combinations with identical titles are excluded. Deterministic
    per seed.
    """
    rng = subrng(seed, rng_streams.TEST1)
    pairs: list[PairwiseJudgment] = []
    for session in holdout_sessions:
        clicked = [r for r in session.results if r.clicked]
        non_clicked = [r for r in session.results if not r.clicked]
        combos = [
            (c, n) for c in clicked for n in non_clicked if c.title != n.title
        ]
        if not combos:
            continue
        c, n = combos[rng.integers(len(combos))]
        pairs.append(
            PairwiseJudgment(
                query=session.query,
                preferred=c.title,
                dispreferred=n.title,
                source=Strategy.CLICKED_OVER_NON_CLICKED,
            )
        )
    if not pairs:
        raise EmptyTestSetError("no session has both a clicked and a non-clicked result")
    return TestSet(pairs=pairs, origin=TEST1)


class _PairScorer:
    """Encodes a test set once and re-scores it against model arrays."""

    def __init__(self, pairs: Sequence[PairwiseJudgment], vocab: dict[str, int],
                 backend: Optional[str] = None):
        self.n = len(pairs)
        self._pref = encode_score_pairs(((j.query, j.preferred) for j in pairs), vocab)
        self._disp = encode_score_pairs(((j.query, j.dispreferred) for j in pairs), vocab)
        self._kernel = get_backend(backend)

    def _scores(self, model: SemModel, enc: EncodedScorePairs) -> np.ndarray:
        return self._kernel.score_pairs(
            model.embeddings.matrix,
            model.query_tower.W,
            model.query_tower.b,
            model.title_tower.W,
            model.title_tower.b,
            enc.tokens,
            enc.offsets,
            enc.q,
            enc.t,
        )

    def precision(self, model: SemModel) -> float:
        """Fraction of pairs scored strictly in preference order."""
        pref = self._scores(model, self._pref)
        disp = self._scores(model, self._disp)
        return float(np.count_nonzero(pref > disp)) / self.n


def precision(model: SemModel, test: TestSet, backend: Optional[str] = None) -> float:
    """Fraction of test pairs with score(q, preferred) > score(q, dispreferred).

    Ties count as incorrect. Raises EmptyTestSetError on an empty set.
    """
    if not test.pairs:
        raise EmptyTestSetError(f"test set {test.origin!r} is empty")
    return _PairScorer(test.pairs, model.embeddings.vocab, backend).precision(model)


def scored_precision(scores: Iterable[tuple[float, float]]) -> float:
    """Precision over explicit (preferred, dispreferred) score pairs."""
    pairs = list(scores)
    if not pairs:
        raise EmptyTestSetError("no score pairs")
    return sum(1 for p, n in pairs if p > n) / len(pairs)


def check_disjoint(
    train_sessions: Sequence[SearchSession], holdout_sessions: Sequence[SearchSession]
) -> None:
    overlap = {s.session_id for s in train_sessions} & {
        s.session_id for s in holdout_sessions
    }
    if overlap:
        raise ValidationError(
            f"{len(overlap)} session ids appear in both train and holdout "
            f"(e.g. {sorted(overlap)[0]!r})"
        )


def split_sessions(
    sessions: Sequence[SearchSession], holdout_fraction: float, seed: int
) -> tuple[list[SearchSession], list[SearchSession]]:
    """Seeded by-session split into (train, holdout)."""
    if not 0.0 < holdout_fraction < 1.0:
        raise ValidationError("holdout fraction must be in (0, 1)")
    order = subrng(seed, rng_streams.SPLIT).permutation(len(sessions))
    n_holdout = max(1, int(round(len(sessions) * holdout_fraction)))
    holdout_idx = set(int(i) for i in order[:n_holdout])
    train = [s for i, s in enumerate(sessions) if i not in holdout_idx]
    holdout = [s for i, s in enumerate(sessions) if i in holdout_idx]
    return train, holdout


def compare_strategies(
    sessions_train: Sequence[SearchSession],
    sessions_holdout: Sequence[SearchSession],
    gt_pairs: Sequence[PairwiseJudgment],
    strategies: Sequence[Strategy],
    config: TrainingConfig,
    ctr_params: Optional[CtrParams] = None,
    backend: Optional[str] = None,
) -> EvaluationReport:
    """Train one model per strategy and track precision per iteration.

    All strategies share one vocabulary (the union of their judgment
    texts) and therefore one seeded initialization; the baselines record
    that shared model's iteration-0 precision. Strategies producing zero
    judgments are reported with status "empty" and skipped.
    """
    check_disjoint(sessions_train, sessions_holdout)
    test_sets = [build_test1(sessions_holdout, seed=config.seed)]
    if gt_pairs:
        test_sets.append(TestSet(pairs=list(gt_pairs), origin=GROUND_TRUTH_SET))

    ctr = aggregate_ctr(sessions_train)
    per_strategy: dict[Strategy, list[PairwiseJudgment]] = {}
    for strategy in strategies:
        per_strategy[strategy] = formulate(
            sessions_train, strategy, ctr=ctr, ctr_params=ctr_params
        )

    all_judgments: list[PairwiseJudgment] = []
    for strategy in strategies:
        all_judgments.extend(per_strategy[strategy])
    vocab = judgment_vocab(all_judgments)

    report = EvaluationReport()
    scorers = {
        ts.origin: _PairScorer(ts.pairs, vocab, backend) for ts in test_sets
    }
    shared_init = init_model(
        vocab, config.d_emb, config.d_out, subrng(config.seed, rng_streams.INIT)
    )
    for ts in test_sets:
        report.baselines[ts.origin] = ReportRow(
            strategy="init",
            iteration=0,
            testset=ts.origin,
            precision=scorers[ts.origin].precision(shared_init),
            pairs=len(ts.pairs),
        )

    for strategy in strategies:
        judgments = per_strategy[strategy]
        report.judgment_counts[strategy.value] = len(judgments)
        if not judgments:
            report.statuses[strategy.value] = "empty"
            continue
        report.statuses[strategy.value] = "ok"

        def hook(iteration: int, snapshot: SemModel, _tag=strategy.value) -> None:
            for ts in test_sets:
                report.rows.append(
                    ReportRow(
                        strategy=_tag,
                        iteration=iteration,
                        testset=ts.origin,
                        precision=scorers[ts.origin].precision(snapshot),
                        pairs=len(ts.pairs),
                    )
                )

        model, _ = train(judgments, config, eval_hook=hook, vocab=vocab, backend=backend)
        report.final_models[strategy.value] = model
    return report


DEFAULT_COMPARE_STRATEGIES = FORMULATION_STRATEGIES


def write_report(report: EvaluationReport, sink: TextIO) -> None:
    """CSV rows strategy,iteration,testset,precision,pairs (no baselines).

    Precision uses repr formatting: the shortest decimal string that
    round-trips the exact float.
    """
    sink.write("strategy,iteration,testset,precision,pairs\n")
    for r in report.rows:
        sink.write(
            f"{r.strategy},{r.iteration},{r.testset},{r.precision!r},{r.pairs}\n"
        )


def write_baselines(report: EvaluationReport, sink: TextIO) -> None:
    """CSV of iteration-0 (shared initialization) precision per test set."""
    sink.write("testset,precision,pairs\n")
    for origin in sorted(report.baselines):
        row = report.baselines[origin]
        sink.write(f"{origin},{row.precision!r},{row.pairs}\n")


def write_strategy_summary(report: EvaluationReport, sink: TextIO) -> None:
    """CSV of judgment counts and status per strategy."""
    sink.write("strategy,judgments,status\n")
    for tag in report.judgment_counts:
        sink.write(f"{tag},{report.judgment_counts[tag]},{report.statuses[tag]}\n")


def read_report(stream: Iterable[str]) -> EvaluationReport:
    report = EvaluationReport()
    for row_no, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("strategy,"):
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise ParseError(f"expected 5 fields, got {len(parts)}", row_no)
        report.rows.append(
            ReportRow(parts[0], int(parts[1]), parts[2], float(parts[3]), int(parts[4]))
        )
    return report


# ---------------------------------------------------------------------------
# Chart emission (plain SVG, no plotting dependency)
# ---------------------------------------------------------------------------

_CHART_W, _CHART_H = 720, 480
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 64, 160, 40, 48
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def render_chart(report: EvaluationReport, testset: str) -> str:
    """Line chart (SVG) of precision vs iteration, one curve per strategy."""
    series: dict[str, list[tuple[int, float]]] = {}
    for r in report.rows:
        if r.testset == testset:
            series.setdefault(r.strategy, []).append((r.iteration, r.precision))
    if not series:
        raise EmptyTestSetError(f"no report rows for test set {testset!r}")

    x_max = max(it for pts in series.values() for it, _ in pts)
    y_lo = min(p for pts in series.values() for _, p in pts)
    y_hi = max(p for pts in series.values() for _, p in pts)
    y_lo, y_hi = min(0.4, y_lo), max(0.9, y_hi)
    span_x = _CHART_W - _MARGIN_L - _MARGIN_R
    span_y = _CHART_H - _MARGIN_T - _MARGIN_B

    def px(it: float) -> float:
        return _MARGIN_L + span_x * it / x_max

    def py(p: float) -> float:
        return _MARGIN_T + span_y * (1.0 - (p - y_lo) / (y_hi - y_lo))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_CHART_W}" height="{_CHART_H}" '
        f'viewBox="0 0 {_CHART_W} {_CHART_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_CHART_W}" height="{_CHART_H}" fill="white"/>',
        f'<text x="{_CHART_W / 2:.0f}" y="20" text-anchor="middle" font-size="15">'
        f"Pairwise precision on {testset}</text>",
    ]
    # axes and ticks
    x0, y0 = _MARGIN_L, _CHART_H - _MARGIN_B
    x1, y1 = _CHART_W - _MARGIN_R, _MARGIN_T
    out.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>')
    out.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>')
    for i in range(6):
        yv = y_lo + (y_hi - y_lo) * i / 5
        yp = py(yv)
        out.append(f'<line x1="{x0 - 4}" y1="{yp:.1f}" x2="{x0}" y2="{yp:.1f}" stroke="black"/>')
        out.append(
            f'<text x="{x0 - 8}" y="{yp + 4:.1f}" text-anchor="end">{yv:.2f}</text>'
        )
        if i:
            out.append(
                f'<line x1="{x0}" y1="{yp:.1f}" x2="{x1}" y2="{yp:.1f}" '
                'stroke="#dddddd" stroke-dasharray="3,3"/>'
            )
    for it in range(0, x_max + 1, max(1, x_max // 10)):
        xp = px(it)
        out.append(f'<line x1="{xp:.1f}" y1="{y0}" x2="{xp:.1f}" y2="{y0 + 4}" stroke="black"/>')
        out.append(f'<text x="{xp:.1f}" y="{y0 + 18}" text-anchor="middle">{it}</text>')
    out.append(
        f'<text x="{(x0 + x1) / 2:.0f}" y="{_CHART_H - 10}" text-anchor="middle">iteration</text>'
    )

    for k, (tag, pts) in enumerate(sorted(series.items())):
        color = _COLORS[k % len(_COLORS)]
        path = " ".join(f"{px(it):.1f},{py(p):.1f}" for it, p in sorted(pts))
        out.append(
            f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.8"/>'
        )
        ly = _MARGIN_T + 16 * k
        out.append(
            f'<line x1="{x1 + 10}" y1="{ly}" x2="{x1 + 34}" y2="{ly}" '
            f'stroke="{color}" stroke-width="1.8"/>'
        )
        out.append(f'<text x="{x1 + 40}" y="{ly + 4}">{_escape(tag)}</text>')
    out.append("</svg>")
    return "\n".join(out)


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
