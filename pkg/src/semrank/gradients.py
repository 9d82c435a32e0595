"""Hinge objective and hand-derived gradients for the pairwise model.

For an active judgment (query, preferred, dispreferred) the loss is

    max(0, margin - (cos(O_q, O_p) - cos(O_q, O_n)))

With a = O_q . O_d, b = 1/|O_q|, c = 1/|O_d|, the cosine gradients with
respect to the tower outputs are

    d cos / d O_q = b c O_d - a c b^3 O_q
    d cos / d O_d = b c O_q - a b c^3 O_d

both orthogonal to their own argument. Projection-weight gradients are the
outer product of these deltas with the tower's post-softsign activation;
backprop through softsign multiplies element-wise by 1/(1+|h|)^2, and each
token occurrence receives the full resulting row gradient (the embedding
sum is unweighted). All of this is validated against central finite
differences by training.gradient_check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .judgments import PairwiseJudgment
from .model import (
    DEGENERATE_NORM,
    ForwardTrace,
    SemModel,
    TowerParams,
    cosine_detailed,
    forward,
    softsign_grad,
)


@dataclass
class GradientSet:
    """Loss gradients for every parameter; embedding rows stored sparsely."""

    d_embeddings: dict[int, np.ndarray]
    dW_q: np.ndarray
    db_q: np.ndarray
    dW_d: np.ndarray
    db_d: np.ndarray
    degenerate: bool = False  # some cosine had a near-zero norm

    @classmethod
    def zeros(cls, model: SemModel) -> "GradientSet":
        return cls(
            d_embeddings={},
            dW_q=np.zeros_like(model.query_tower.W),
            db_q=np.zeros_like(model.query_tower.b),
            dW_d=np.zeros_like(model.title_tower.W),
            db_d=np.zeros_like(model.title_tower.b),
        )


@dataclass
class GradientWorkspace:
    """Per-branch cosine gradient pieces, exposed for verification."""

    a: float  # O_q . O_d
    inv_norm_q: float  # 1 / |O_q|
    inv_norm_d: float  # 1 / |O_d|
    delta_oq: np.ndarray  # d cos / d O_q
    delta_od: np.ndarray  # d cos / d O_d
    delta_hq: np.ndarray  # backprop to the query-side embedding sum
    delta_hd: np.ndarray  # backprop to the title-side embedding sum


def branch_workspace(
    tq: ForwardTrace,
    td: ForwardTrace,
    query_tower: TowerParams,
    title_tower: TowerParams,
) -> Optional[GradientWorkspace]:
    """Gradient pieces for one cosine branch; None when degenerate."""
    nq = float(np.linalg.norm(tq.O))
    nd = float(np.linalg.norm(td.O))
    if nq < DEGENERATE_NORM or nd < DEGENERATE_NORM:
        return None
    a = float(tq.O @ td.O)
    b = 1.0 / nq
    c = 1.0 / nd
    delta_oq = b * c * td.O - a * c * b**3 * tq.O
    delta_od = b * c * tq.O - a * b * c**3 * td.O
    delta_hq = softsign_grad(tq.h) * (query_tower.W.T @ delta_oq)
    delta_hd = softsign_grad(td.h) * (title_tower.W.T @ delta_od)
    return GradientWorkspace(a, b, c, delta_oq, delta_od, delta_hq, delta_hd)


def hinge_loss(model: SemModel, judgment: PairwiseJudgment, margin: float) -> float:
    """max(0, margin - (score(q, preferred) - score(q, dispreferred)))."""
    tq = forward(judgment.query, model.embeddings, model.query_tower)
    tp = forward(judgment.preferred, model.embeddings, model.title_tower)
    tn = forward(judgment.dispreferred, model.embeddings, model.title_tower)
    cos_p, _ = cosine_detailed(tq.O, tp.O)
    cos_n, _ = cosine_detailed(tq.O, tn.O)
    return max(0.0, margin - (cos_p - cos_n))


def pair_gradients(
    model: SemModel, judgment: PairwiseJudgment, margin: float
) -> GradientSet:
    """Loss gradients for one judgment.

    Inactive pairs (hinge already zero) yield the zero set. A degenerate
    cosine branch contributes nothing and flags the set so the trainer can
    drop the pair from its statistics.
    """
    tq = forward(judgment.query, model.embeddings, model.query_tower)
    tp = forward(judgment.preferred, model.embeddings, model.title_tower)
    tn = forward(judgment.dispreferred, model.embeddings, model.title_tower)
    cos_p, deg_p = cosine_detailed(tq.O, tp.O)
    cos_n, deg_n = cosine_detailed(tq.O, tn.O)

    grads = GradientSet.zeros(model)
    grads.degenerate = deg_p or deg_n
    loss = margin - (cos_p - cos_n)
    if loss <= 0.0:
        return grads

    # d loss / d cos_p = -1, d loss / d cos_n = +1 on the active side.
    for sign, td in ((-1.0, tp), (1.0, tn)):
        ws = branch_workspace(tq, td, model.query_tower, model.title_tower)
        if ws is None:
            continue
        grads.dW_q += sign * np.outer(ws.delta_oq, tq.g)
        grads.db_q += sign * ws.delta_oq
        grads.dW_d += sign * np.outer(ws.delta_od, td.g)
        grads.db_d += sign * ws.delta_od
        for row in tq.rows:
            _accumulate(grads.d_embeddings, row, sign * ws.delta_hq)
        for row in td.rows:
            _accumulate(grads.d_embeddings, row, sign * ws.delta_hd)
    return grads


def _accumulate(rows: dict[int, np.ndarray], row: int, value: np.ndarray) -> None:
    if row in rows:
        rows[row] = rows[row] + value
    else:
        rows[row] = np.array(value)


def sgd_step(model: SemModel, grads: GradientSet, gamma: float) -> None:
    """In-place update p <- p - gamma * grad; untouched rows stay bit-identical."""
    model.query_tower.W -= gamma * grads.dW_q
    model.query_tower.b -= gamma * grads.db_q
    model.title_tower.W -= gamma * grads.dW_d
    model.title_tower.b -= gamma * grads.db_d
    matrix = model.embeddings.matrix
    for row, grad in grads.d_embeddings.items():
        matrix[row] -= gamma * grad
