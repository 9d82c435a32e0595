"""Click-log parsing, result classification, and CTR aggregation."""

import io

import pytest

from semrank.errors import NoClicksError, ParseError, ValidationError
from semrank.logs import (
    ResultLabel,
    ResultRecord,
    SearchSession,
    aggregate_ctr,
    classify_results,
    parse_sessions,
    read_ctr,
    tokenize,
    write_ctr,
    write_sessions,
)

C = ResultLabel.CLICKED
S = ResultLabel.SKIPPED
NE = ResultLabel.NON_EXAMINED


def session_from_clicks(clicks, sid="s1"):
    results = tuple(
        ResultRecord(title=(f"t{i}",), rank=i + 1, clicked=bool(c))
        for i, c in enumerate(clicks)
    )
    return SearchSession(session_id=sid, query=("q",), results=results)


def test_parse_single_line():
    line = (
        '{"sid":"s1","query":"red shoes","results":'
        '[{"title":"buy red shoes","clicked":1},{"title":"shoe history","clicked":0}]}'
    )
    sessions = parse_sessions([line])
    assert len(sessions) == 1
    s = sessions[0]
    assert s.session_id == "s1"
    assert s.query == ("red", "shoes")
    assert [r.rank for r in s.results] == [1, 2]
    assert [r.clicked for r in s.results] == [True, False]
    assert s.results[0].title == ("buy", "red", "shoes")


def test_parse_reports_line_number():
    lines = ['{"sid":"a","query":"q","results":[{"title":"t","clicked":0}]}', "{badjson"]
    with pytest.raises(ParseError) as err:
        parse_sessions(lines)
    assert err.value.line_no == 2


def test_parse_rejects_empty_query():
    line = '{"sid":"s9","query":"  ","results":[{"title":"t","clicked":0}]}'
    with pytest.raises(ValidationError, match="s9"):
        parse_sessions([line])


def test_parse_rejects_too_many_results():
    results = ",".join('{"title":"t%d","clicked":0}' % i for i in range(11))
    line = '{"sid":"s2","query":"q","results":[%s]}' % results
    with pytest.raises(ValidationError, match="s2"):
        parse_sessions([line])


def test_parse_rejects_zero_results():
    with pytest.raises(ValidationError):
        parse_sessions(['{"sid":"s3","query":"q","results":[]}'])


def test_tokenize_lowercases_and_splits():
    assert tokenize("  Red   SHOES ") == ("red", "shoes")


def test_sessions_round_trip(make_sessions):
    sessions = make_sessions(200, seed=11)
    sink = io.StringIO()
    write_sessions(sessions, sink)
    assert parse_sessions(sink.getvalue().splitlines()) == sessions


class TestClassification:
    def test_clicks_at_2_and_4_of_5(self):
        labels = classify_results(session_from_clicks([0, 1, 0, 1, 0]))
        assert labels == [S, C, S, C, NE]

    def test_all_clicked(self):
        assert classify_results(session_from_clicks([1, 1, 1])) == [C, C, C]

    def test_no_clicks_raises(self):
        with pytest.raises(NoClicksError):
            classify_results(session_from_clicks([0, 0, 0]))

    def test_single_click_at_top(self):
        # nothing ranks above the click, so the rest is non-examined
        assert classify_results(session_from_clicks([1, 0, 0])) == [C, NE, NE]

    def test_matches_literal_oracle(self, make_sessions):
        """Label each result by scanning all clicked ranks directly."""
        for session in make_sessions(300, seed=5, force_click=True):
            clicked_ranks = [r.rank for r in session.results if r.clicked]
            expected = []
            for r in session.results:
                if r.clicked:
                    expected.append(C)
                elif any(r.rank < cr for cr in clicked_ranks):
                    expected.append(S)
                else:
                    expected.append(NE)
            assert classify_results(session) == expected


class TestCtr:
    def test_counts_impressions_and_clicks(self):
        sessions = [
            session_from_clicks([1, 0], sid=f"s{i}") for i in range(10)
        ]
        # flip 7 of the clicks on t0 off: 3 clicks over 10 impressions
        for i in range(3, 10):
            r = sessions[i].results
            sessions[i] = SearchSession(
                session_id=sessions[i].session_id,
                query=sessions[i].query,
                results=(ResultRecord(r[0].title, 1, False), r[1]),
            )
        table = aggregate_ctr(sessions)
        assert table.impressions("q", "t0") == 10
        assert table.ctr("q", "t0") == pytest.approx(0.3)
        assert table.ctr("q", "t1") == 0.0

    def test_clicks_never_exceed_impressions(self, make_sessions):
        table = aggregate_ctr(make_sessions(200, seed=3))
        for impressions, clicks in table.counts.values():
            assert 1 <= impressions
            assert 0 <= clicks <= impressions

    def test_round_trip_sorted(self, make_sessions):
        table = aggregate_ctr(make_sessions(100, seed=9))
        sink = io.StringIO()
        write_ctr(table, sink)
        lines = sink.getvalue().splitlines()
        assert lines == sorted(lines)
        assert read_ctr(lines).counts == table.counts
