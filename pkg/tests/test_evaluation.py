"""Test-set construction, pairwise precision, and the strategy comparison."""

import io

import numpy as np
import pytest

from semrank.errors import EmptyTestSetError, ValidationError
from semrank.evaluation import (
    EvaluationReport,
    ReportRow,
    TestSet,
    build_test1,
    compare_strategies,
    precision,
    read_report,
    render_chart,
    split_sessions,
    write_baselines,
    write_report,
)
from semrank.judgments import FORMULATION_STRATEGIES, PairwiseJudgment, Strategy
from semrank.logs import ResultRecord, SearchSession
from semrank.model import EmbeddingTable, SemModel, TowerParams, init_model
from semrank.rng import INIT, subrng
from semrank.simulate import (
    SimConfig,
    generate_corpus,
    ground_truth_pairs,
    simulate_sessions,
)
from semrank.training import TrainingConfig


def session(sid, clicks, query=("q",)):
    results = tuple(
        ResultRecord(title=(f"t{i}",), rank=i + 1, clicked=bool(c))
        for i, c in enumerate(clicks)
    )
    return SearchSession(session_id=sid, query=query, results=results)


class TestBuildTest1:
    def test_one_pair_per_eligible_session(self):
        sessions = [
            session("a", [1, 0, 0]),
            session("b", [1, 1, 1]),  # no non-click: ineligible
            session("c", [0, 0, 0]),  # no click: ineligible
            session("d", [0, 1, 0]),
        ]
        test = build_test1(sessions, seed=0)
        assert len(test.pairs) == 2
        assert test.origin == "Test1"
        for j in test.pairs:
            assert j.preferred != j.dispreferred

    def test_pair_comes_from_session_combinations(self):
        s = session("a", [0, 1, 0])
        (pair,) = build_test1([s], seed=5).pairs
        assert pair.preferred == ("t1",)
        assert pair.dispreferred in {("t0",), ("t2",)}

    def test_deterministic_per_seed(self):
        sessions = [session(f"s{i}", [1, 0, 0, 0, 1]) for i in range(50)]
        assert build_test1(sessions, seed=1).pairs == build_test1(sessions, seed=1).pairs
        # different seeds eventually pick different non-clicks
        a = build_test1(sessions, seed=1).pairs
        b = build_test1(sessions, seed=2).pairs
        assert a != b

    def test_empty_raises(self):
        with pytest.raises(EmptyTestSetError):
            build_test1([session("a", [1, 1])], seed=0)

    def test_size_equals_eligible_session_count(self):
        sessions = [session(f"s{i}", [0, 1, 0, 0]) for i in range(1000)]
        assert len(build_test1(sessions, seed=3).pairs) == 1000


class TestPrecision:
    def make_model(self):
        emb = EmbeddingTable({"q": 0, "good": 1, "bad": 2},
                             np.array([[1.0, 0.0], [1.0, 0.0], [-1.0, 0.0]]))
        eye = TowerParams(W=np.eye(2), b=np.zeros(2))
        eye2 = TowerParams(W=np.eye(2), b=np.zeros(2))
        return SemModel(embeddings=emb, query_tower=eye, title_tower=eye2)

    def judgment(self, pref, disp):
        return PairwiseJudgment(("q",), (pref,), (disp,), Strategy.GROUND_TRUTH)

    def test_perfect_and_zero(self):
        model = self.make_model()
        right = TestSet([self.judgment("good", "bad")] * 4, origin="Test1")
        wrong = TestSet([self.judgment("bad", "good")] * 4, origin="Test1")
        assert precision(model, right) == 1.0
        assert precision(model, wrong) == 0.0

    def test_ties_count_as_incorrect(self):
        model = self.make_model()
        tie = TestSet([self.judgment("good", "good")], origin="Test1")
        assert precision(model, tie) == 0.0

    def test_empty_test_set_raises(self):
        with pytest.raises(EmptyTestSetError):
            precision(self.make_model(), TestSet([], origin="Test1"))

    def test_random_model_near_half_on_random_pairs(self):
        """Untrained scores are symmetric: expect precision ~ 0.5."""
        rng = np.random.default_rng(0)
        words = [f"w{i}" for i in range(50)]
        vocab = {w: i for i, w in enumerate(words)}
        model = init_model(vocab, 16, 16, subrng(0, INIT))
        pairs = []
        for _ in range(4000):
            q, p, n = (
                tuple(words[i] for i in rng.integers(0, 50, size=3)) for _ in range(3)
            )
            pairs.append(PairwiseJudgment(q, p, n, Strategy.GROUND_TRUTH))
        value = precision(model, TestSet(pairs, origin="Test1"))
        assert value == pytest.approx(0.5, abs=0.03)

    def test_invariant_under_query_tower_rescaling(self):
        """Precision compares cosines, so scaling a tower cannot change it."""
        rng = np.random.default_rng(3)
        words = [f"w{i}" for i in range(30)]
        model = init_model({w: i for i, w in enumerate(words)}, 8, 8, subrng(3, INIT))
        pairs = [
            PairwiseJudgment(
                *(tuple(words[i] for i in rng.integers(0, 30, size=2)) for _ in range(3)),
                Strategy.GROUND_TRUTH,
            )
            for _ in range(200)
        ]
        test = TestSet(pairs, origin="Test1")
        before = precision(model, test)
        model.query_tower.W *= 2.0
        model.query_tower.b *= 2.0
        assert precision(model, test) == before


class TestSplit:
    def test_partition(self):
        sessions = [session(f"s{i}", [1, 0]) for i in range(100)]
        train, holdout = split_sessions(sessions, 0.2, seed=0)
        assert len(holdout) == 20
        assert len(train) == 80
        assert {s.session_id for s in train} | {s.session_id for s in holdout} == {
            s.session_id for s in sessions
        }
        assert not {s.session_id for s in train} & {s.session_id for s in holdout}

    def test_seed_changes_split(self):
        sessions = [session(f"s{i}", [1, 0]) for i in range(100)]
        _, h0 = split_sessions(sessions, 0.2, seed=0)
        _, h1 = split_sessions(sessions, 0.2, seed=1)
        assert {s.session_id for s in h0} != {s.session_id for s in h1}

    def test_bad_fraction(self):
        with pytest.raises(ValidationError):
            split_sessions([session("a", [1])], 0.0, seed=0)


def test_overlap_detection():
    shared = session("dup", [1, 0])
    config = TrainingConfig(iterations=1, d_emb=4, d_out=4)
    with pytest.raises(ValidationError, match="dup"):
        compare_strategies([shared], [shared], [], [Strategy.CLICKED_OVER_SKIPPED], config)


@pytest.fixture(scope="module")
def small_experiment():
    sim = SimConfig(seed=2, query_count=60, sessions_per_query=10)
    corpus, truth = generate_corpus(sim)
    sessions = simulate_sessions(corpus, truth, sim)
    train_side, holdout = split_sessions(sessions, 0.2, seed=2)
    gt, _ = ground_truth_pairs(corpus, truth, pairs_per_query=5, seed=2)
    config = TrainingConfig(iterations=8, d_emb=16, d_out=16, seed=2)
    report = compare_strategies(train_side, holdout, gt, FORMULATION_STRATEGIES, config)
    return config, report


class TestCompare:
    def test_row_count(self, small_experiment):
        config, report = small_experiment
        # 5 strategies x iterations x 2 test sets
        assert len(report.rows) == 5 * config.iterations * 2

    def test_baselines_present_for_both_sets(self, small_experiment):
        _, report = small_experiment
        assert set(report.baselines) == {"Test1", "GroundTruth"}
        for row in report.baselines.values():
            assert row.iteration == 0
            assert 0.0 <= row.precision <= 1.0

    def test_all_strategies_trained(self, small_experiment):
        _, report = small_experiment
        assert set(report.judgment_counts) == {s.value for s in FORMULATION_STRATEGIES}
        assert all(status == "ok" for status in report.statuses.values())
        assert set(report.final_models) == set(report.judgment_counts)

    def test_hybrid_judgment_count_is_sum_of_parts(self, small_experiment):
        _, report = small_experiment
        counts = report.judgment_counts
        assert counts["C>NC"] == counts["C>S"] + counts["C>NE"]

    def test_pair_counts_fixed_per_test_set(self, small_experiment):
        """The test sets are built once, so every row reuses the same counts."""
        _, report = small_experiment
        for origin in ("Test1", "GroundTruth"):
            sizes = {r.pairs for r in report.rows if r.testset == origin}
            sizes.add(report.baselines[origin].pairs)
            assert len(sizes) == 1

    def test_training_beats_baseline_on_ground_truth(self, small_experiment):
        config, report = small_experiment
        base = report.baselines["GroundTruth"].precision
        finals = [
            r.precision
            for r in report.rows
            if r.testset == "GroundTruth" and r.iteration == config.iterations
        ]
        assert max(finals) > base + 0.1

    def test_report_round_trip(self, small_experiment):
        _, report = small_experiment
        sink = io.StringIO()
        write_report(report, sink)
        back = read_report(sink.getvalue().splitlines())
        assert back.rows == report.rows

    def test_baseline_csv_shape(self, small_experiment):
        _, report = small_experiment
        sink = io.StringIO()
        write_baselines(report, sink)
        lines = sink.getvalue().splitlines()
        assert lines[0] == "testset,precision,pairs"
        assert len(lines) == 3


class TestChart:
    def test_svg_contains_every_strategy(self, small_experiment):
        _, report = small_experiment
        svg = render_chart(report, "Test1")
        assert svg.startswith("<svg")
        assert svg.rstrip().endswith("</svg>")
        for s in FORMULATION_STRATEGIES:
            assert f">{s.value.replace('>', '&gt;')}</text>" in svg

    def test_unknown_testset_raises(self):
        with pytest.raises(EmptyTestSetError):
            render_chart(EvaluationReport(), "Nope")

    def test_handles_single_strategy(self):
        report = EvaluationReport(
            rows=[ReportRow("C>S", i, "Test1", 0.5 + 0.01 * i, 10) for i in (1, 2, 3)]
        )
        svg = render_chart(report, "Test1")
        assert "polyline" in svg
