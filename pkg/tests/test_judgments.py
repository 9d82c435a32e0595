"""Judgment formulation strategies against brute-force oracles."""

import io

import pytest

from semrank.errors import ConfigError, EmptyLogError, ParseError
from semrank.judgments import (
    ATOMIC_STRATEGIES,
    CtrParams,
    PairwiseJudgment,
    Strategy,
    distribution,
    formulate,
    read_judgments,
    write_distribution,
    write_judgments,
)
from semrank.logs import (
    ResultLabel,
    ResultRecord,
    SearchSession,
    aggregate_ctr,
    classify_results,
)

def oracle_cross(sessions, pref_label, disp_label, tag):
    """Enumerate ordered result pairs and filter by label pattern."""
    out = []
    for session in sessions:
        try:
            labels = classify_results(session)
        except Exception:
            continue
        for a, la in zip(session.results, labels):
            for b, lb in zip(session.results, labels):
                if la is pref_label and lb is disp_label and a.title != b.title:
                    out.append(PairwiseJudgment(session.query, a.title, b.title, tag))
    return out


def oracle_ctr(sessions, ctr, params, tag):
    out = []
    for session in sessions:
        try:
            labels = classify_results(session)
        except Exception:
            continue
        clicked = [r for r, l in zip(session.results, labels) if l is ResultLabel.CLICKED]
        q = " ".join(session.query)
        for a in clicked:
            for b in clicked:
                if a.title == b.title:
                    continue
                ta, tb = " ".join(a.title), " ".join(b.title)
                if min(ctr.impressions(q, ta), ctr.impressions(q, tb)) < params.min_impressions:
                    continue
                gap = ctr.ctr(q, ta) - ctr.ctr(q, tb)
                if gap >= params.min_gap and gap > 0:
                    out.append(PairwiseJudgment(session.query, a.title, b.title, tag))
    return out


ORACLE_LABELS = {
    Strategy.CLICKED_OVER_SKIPPED: (ResultLabel.CLICKED, ResultLabel.SKIPPED),
    Strategy.CLICKED_OVER_NON_EXAMINED: (ResultLabel.CLICKED, ResultLabel.NON_EXAMINED),
    Strategy.SKIPPED_OVER_NON_EXAMINED: (ResultLabel.SKIPPED, ResultLabel.NON_EXAMINED),
}


def two_result_session(sid, query, t_pref, t_disp, clicks):
    results = tuple(
        ResultRecord(title=t, rank=i + 1, clicked=bool(c))
        for i, (t, c) in enumerate(zip((t_pref, t_disp), clicks))
    )
    return SearchSession(session_id=sid, query=query, results=results)


class TestOracleEquivalence:
    """Cross-product strategies must equal literal enumeration on random logs."""

    @pytest.mark.parametrize("strategy", list(ORACLE_LABELS))
    def test_cross_strategies(self, make_sessions, strategy):
        sessions = make_sessions(400, seed=21)
        pref, disp = ORACLE_LABELS[strategy]
        assert formulate(sessions, strategy) == oracle_cross(sessions, pref, disp, strategy)

    def test_ctr_strategy(self, make_sessions):
        sessions = make_sessions(400, seed=22)
        ctr = aggregate_ctr(sessions)
        params = CtrParams(min_impressions=1, min_gap=0.0)
        got = formulate(sessions, Strategy.CLICKED_OVER_CLICKED, ctr=ctr, ctr_params=params)
        want = oracle_ctr(sessions, ctr, params, Strategy.CLICKED_OVER_CLICKED)
        assert got == want

    def test_hybrid_is_exact_concatenation(self, make_sessions):
        sessions = make_sessions(400, seed=23)
        hybrid = formulate(sessions, Strategy.CLICKED_OVER_NON_CLICKED)
        cs = formulate(sessions, Strategy.CLICKED_OVER_SKIPPED)
        cne = formulate(sessions, Strategy.CLICKED_OVER_NON_EXAMINED)
        assert len(hybrid) == len(cs) + len(cne)
        stripped = [(j.query, j.preferred, j.dispreferred) for j in hybrid]
        assert stripped == [(j.query, j.preferred, j.dispreferred) for j in cs + cne]
        assert all(j.source is Strategy.CLICKED_OVER_NON_CLICKED for j in hybrid)


def test_clickless_sessions_contribute_nothing():
    s = two_result_session("s1", ("q",), ("a",), ("b",), clicks=(0, 0))
    for strategy in ATOMIC_STRATEGIES:
        ctr = aggregate_ctr([s])
        assert formulate([s], strategy, ctr=ctr) == []


def test_ctr_threshold_example():
    """CTR 0.8 (8/10) vs 0.2 (2/10) with min_gap 0.1 pairs high over low."""
    sessions = []
    for i in range(10):
        sessions.append(
            two_result_session(
                f"s{i}", ("q",), ("high",), ("low",),
                clicks=(1 if i < 8 else 0, 1 if i < 2 else 0),
            )
        )
    # keep only co-clicked sessions as pair sources; CTR counts all ten
    ctr = aggregate_ctr(sessions)
    assert ctr.ctr("q", "high") == pytest.approx(0.8)
    assert ctr.ctr("q", "low") == pytest.approx(0.2)
    params = CtrParams(min_impressions=5, min_gap=0.1)
    got = formulate(sessions, Strategy.CLICKED_OVER_CLICKED, ctr=ctr, ctr_params=params)
    assert got, "expected at least one CTR-differentiated pair"
    assert {(j.preferred, j.dispreferred) for j in got} == {(("high",), ("low",))}


def test_equal_ctr_never_pairs():
    sessions = [
        two_result_session(f"s{i}", ("q",), ("a",), ("b",), clicks=(1, 1))
        for i in range(6)
    ]
    ctr = aggregate_ctr(sessions)
    got = formulate(
        sessions, Strategy.CLICKED_OVER_CLICKED,
        ctr=ctr, ctr_params=CtrParams(min_impressions=1, min_gap=0.0),
    )
    assert got == []


def test_ctr_strategy_requires_table(make_sessions):
    with pytest.raises(ConfigError):
        formulate(make_sessions(5, seed=1), Strategy.CLICKED_OVER_CLICKED)


def test_ground_truth_is_not_a_formulation_strategy(make_sessions):
    with pytest.raises(ConfigError):
        formulate(make_sessions(5, seed=1), Strategy.GROUND_TRUTH)


class TestDistribution:
    def test_percentages_sum_to_100(self, make_sessions):
        sessions = make_sessions(500, seed=31)
        report = distribution(sessions, aggregate_ctr(sessions))
        total = sum(report.percentage(s) for s in ATOMIC_STRATEGIES)
        assert total == pytest.approx(100.0, abs=0.01)
        assert all(report.percentage(s) >= 0 for s in ATOMIC_STRATEGIES)

    def test_counts_match_formulate(self, make_sessions):
        sessions = make_sessions(200, seed=32)
        ctr = aggregate_ctr(sessions)
        report = distribution(sessions, ctr)
        for s in ATOMIC_STRATEGIES:
            assert report.counts[s] == len(formulate(sessions, s, ctr=ctr))

    def test_empty_log_raises(self):
        s = two_result_session("s1", ("q",), ("a",), ("b",), clicks=(0, 0))
        with pytest.raises(EmptyLogError):
            distribution([s], aggregate_ctr([s]))

    def test_csv_shape(self, make_sessions):
        sessions = make_sessions(100, seed=33)
        sink = io.StringIO()
        write_distribution(distribution(sessions, aggregate_ctr(sessions)), sink)
        lines = sink.getvalue().splitlines()
        assert lines[0] == "strategy,count,percentage"
        assert len(lines) == 5  # header + four atomic strategies


def test_judgments_round_trip(make_sessions):
    sessions = make_sessions(150, seed=41)
    judgments = formulate(sessions, Strategy.CLICKED_OVER_NON_CLICKED)
    sink = io.StringIO()
    write_judgments(judgments, sink)
    assert read_judgments(sink.getvalue().splitlines()) == judgments


def test_read_judgments_row_error():
    with pytest.raises(ParseError) as err:
        read_judgments(["q\tp\tn\tC>S", "q\tp\tn"])
    assert err.value.line_no == 2


def test_read_judgments_unknown_tag():
    with pytest.raises(ParseError):
        read_judgments(["q\tp\tn\tBOGUS"])
