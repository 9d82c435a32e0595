"""Hand-written gradients against finite differences and structure checks."""

import numpy as np
import pytest

from semrank.gradients import (
    GradientSet,
    branch_workspace,
    hinge_loss,
    pair_gradients,
    sgd_step,
)
from semrank.judgments import PairwiseJudgment, Strategy
from semrank.model import build_vocab, forward, init_model, score
from semrank.rng import INIT, subrng

MARGIN = 0.1


def random_instance(seed, d_emb=4, d_out=3):
    """Model plus judgment over a tiny vocabulary; texts use 2 tokens each."""
    rng = np.random.default_rng(seed)
    vocab = build_vocab([(f"t{i}",) for i in range(8)])
    model = init_model(vocab, d_emb, d_out, subrng(seed, INIT))
    tokens = list(vocab)

    def text():
        return tuple(tokens[i] for i in rng.integers(0, len(tokens), size=2))

    judgment = PairwiseJudgment(text(), text(), text(), Strategy.GROUND_TRUTH)
    return model, judgment


def active_instance(seed):
    """Resample until the hinge is active and clear of the kink."""
    for offset in range(60):
        model, judgment = random_instance(seed * 101 + offset)
        loss = hinge_loss(model, judgment, MARGIN)
        if loss > 1e-2:
            return model, judgment
    raise AssertionError("no active instance found")


def numeric_grad(model, judgment, param, index, step=1e-6):
    original = param[index]
    param[index] = original + step
    up = hinge_loss(model, judgment, MARGIN)
    param[index] = original - step
    down = hinge_loss(model, judgment, MARGIN)
    param[index] = original
    return (up - down) / (2 * step)


@pytest.mark.parametrize("seed", range(8))
def test_tower_gradients_match_finite_differences(seed):
    model, judgment = active_instance(seed)
    grads = pair_gradients(model, judgment, MARGIN)
    for param, analytic in (
        (model.query_tower.W, grads.dW_q),
        (model.query_tower.b, grads.db_q),
        (model.title_tower.W, grads.dW_d),
        (model.title_tower.b, grads.db_d),
    ):
        it = np.nditer(param, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            numeric = numeric_grad(model, judgment, param, idx)
            assert analytic[idx] == pytest.approx(numeric, abs=2e-6, rel=1e-5)


@pytest.mark.parametrize("seed", range(8))
def test_embedding_gradients_match_finite_differences(seed):
    model, judgment = active_instance(seed + 50)
    grads = pair_gradients(model, judgment, MARGIN)
    matrix = model.embeddings.matrix
    for row in range(matrix.shape[0]):
        analytic_row = grads.d_embeddings.get(row, np.zeros(model.d_emb))
        for col in range(matrix.shape[1]):
            numeric = numeric_grad(model, judgment, matrix, (row, col))
            assert analytic_row[col] == pytest.approx(numeric, abs=2e-6, rel=1e-5)


def test_cosine_gradient_orthogonality():
    """d cos/d O_q is orthogonal to O_q itself (same for the title side).

    The cosine is scale-invariant in each argument, so its gradient has no
    radial component.
    """
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        model, judgment = random_instance(int(rng.integers(1 << 31)))
        tq = forward(judgment.query, model.embeddings, model.query_tower)
        td = forward(judgment.preferred, model.embeddings, model.title_tower)
        ws = branch_workspace(tq, td, model.query_tower, model.title_tower)
        if ws is None:
            continue
        scale_q = np.linalg.norm(ws.delta_oq) * np.linalg.norm(tq.O)
        scale_d = np.linalg.norm(ws.delta_od) * np.linalg.norm(td.O)
        worst = max(
            worst,
            abs(float(ws.delta_oq @ tq.O)) / max(scale_q, 1e-30),
            abs(float(ws.delta_od @ td.O)) / max(scale_d, 1e-30),
        )
    assert worst < 1e-9


def test_inactive_pair_has_zero_gradients():
    # widen the score gap far past the margin by reusing the query as the
    # preferred title; seed 1 makes the hinge exactly zero
    model, judgment = random_instance(1)
    easy = PairwiseJudgment(judgment.query, judgment.query, judgment.dispreferred,
                            judgment.source)
    assert hinge_loss(model, easy, MARGIN) == 0.0
    grads = pair_gradients(model, easy, MARGIN)
    assert not grads.d_embeddings
    assert not grads.dW_q.any() and not grads.db_q.any()
    assert not grads.dW_d.any() and not grads.db_d.any()


def test_zero_margin_loss_is_nonnegative():
    for seed in range(20):
        model, judgment = random_instance(seed)
        assert hinge_loss(model, judgment, 0.0) >= 0.0


def test_sgd_step_descends():
    """A small step along the negative gradient must reduce the loss."""
    descended = 0
    for seed in range(10):
        model, judgment = active_instance(seed + 100)
        before = hinge_loss(model, judgment, MARGIN)
        grads = pair_gradients(model, judgment, MARGIN)
        sgd_step(model, grads, gamma=1e-3)
        after = hinge_loss(model, judgment, MARGIN)
        assert after <= before + 1e-12
        descended += after < before
    assert descended >= 8  # strict descent in almost every trial


def test_sgd_step_touches_only_used_rows():
    model, judgment = active_instance(4)
    untouched = [
        row for row in range(model.embeddings.matrix.shape[0])
        if row not in {model.embeddings.vocab[t]
                       for text in (judgment.query, judgment.preferred, judgment.dispreferred)
                       for t in text}
    ]
    before = model.embeddings.matrix.copy()
    sgd_step(model, pair_gradients(model, judgment, MARGIN), gamma=0.05)
    for row in untouched:
        np.testing.assert_array_equal(model.embeddings.matrix[row], before[row])


def test_zeros_shapes():
    model, _ = random_instance(0)
    zeros = GradientSet.zeros(model)
    assert zeros.dW_q.shape == model.query_tower.W.shape
    assert zeros.db_d.shape == model.title_tower.b.shape
    assert zeros.d_embeddings == {}
    assert not zeros.degenerate


def test_hinge_matches_scores():
    """hinge = max(0, margin - (s_pref - s_disp)) for the model's own scores."""
    for seed in range(30):
        model, judgment = random_instance(seed)
        gap = (score(model, judgment.query, judgment.preferred)
               - score(model, judgment.query, judgment.dispreferred))
        expected = max(0.0, MARGIN - gap)
        assert hinge_loss(model, judgment, MARGIN) == pytest.approx(expected, abs=1e-15)


def test_sgd_step_scalar_arithmetic():
    """One parameter, gradient 0.5, rate 0.1: 1.0 becomes 0.95."""
    model, _ = random_instance(0)
    model.query_tower.W[0, 0] = 1.0
    grads = GradientSet.zeros(model)
    grads.dW_q[0, 0] = 0.5
    sgd_step(model, grads, gamma=0.1)
    assert model.query_tower.W[0, 0] == pytest.approx(0.95, abs=1e-15)


def test_zero_rate_and_zero_gradients_change_nothing():
    model, judgment = active_instance(7)
    reference = model.copy()
    sgd_step(model, pair_gradients(model, judgment, MARGIN), gamma=0.0)
    sgd_step(model, GradientSet.zeros(model), gamma=0.3)
    np.testing.assert_array_equal(model.embeddings.matrix, reference.embeddings.matrix)
    np.testing.assert_array_equal(model.query_tower.W, reference.query_tower.W)
    np.testing.assert_array_equal(model.query_tower.b, reference.query_tower.b)
    np.testing.assert_array_equal(model.title_tower.W, reference.title_tower.W)
    np.testing.assert_array_equal(model.title_tower.b, reference.title_tower.b)


def test_repeated_steps_drive_single_pair_loss_to_zero():
    model, judgment = active_instance(11)
    loss = hinge_loss(model, judgment, MARGIN)
    for _ in range(5000):
        if loss == 0.0:
            break
        sgd_step(model, pair_gradients(model, judgment, MARGIN), gamma=0.01)
        new_loss = hinge_loss(model, judgment, MARGIN)
        assert new_loss < loss
        loss = new_loss
    assert loss == 0.0
