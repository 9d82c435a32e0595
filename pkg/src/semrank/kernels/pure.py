"""Pure-numpy kernel backend.

Reference implementation of the hot loops: one SGD epoch over encoded
judgment triples and batch pair scoring. Semantically identical to the
compiled backend in _fast.pyx (same update order per pair); the compiled
version exists only for speed. See benchmarks/benchmark_kernels.py.
"""

from __future__ import annotations

import numpy as np

NAME = "pure"

_DEGENERATE_NORM = 1e-12


def _forward_all(emb, W, b, tokens, offsets):
    """H, G, O for every text through one tower (vectorized per text)."""
    n_texts = len(offsets) - 1
    d_emb = emb.shape[1]
    H = np.zeros((n_texts, d_emb))
    for i in range(n_texts):
        rows = tokens[offsets[i] : offsets[i + 1]]
        if rows.size:
            H[i] = emb[rows].sum(axis=0)
    G = H / (1.0 + np.abs(H))
    O = G @ W.T + b
    return H, G, O


def score_pairs(emb, Wq, bq, Wd, bd, tokens, offsets, q_idx, t_idx):
    """Cosine of (query tower, title tower) per pair; degenerate pairs -> 0."""
    _, _, Oq = _forward_all(emb, Wq, bq, tokens, offsets)
    _, _, Ot = _forward_all(emb, Wd, bd, tokens, offsets)
    a = Oq[q_idx]
    d = Ot[t_idx]
    num = np.einsum("ij,ij->i", a, d)
    norms = np.linalg.norm(a, axis=1) * np.linalg.norm(d, axis=1)
    degenerate = (np.linalg.norm(a, axis=1) < _DEGENERATE_NORM) | (
        np.linalg.norm(d, axis=1) < _DEGENERATE_NORM
    )
    scores = np.zeros(len(q_idx))
    ok = ~degenerate
    scores[ok] = num[ok] / norms[ok]
    return scores


def _forward_one(emb, W, b, rows):
    if rows.size:
        h = emb[rows].sum(axis=0)
    else:
        h = np.zeros(emb.shape[1])
    g = h / (1.0 + np.abs(h))
    return h, g, W @ g + b


def _branch(o_q, o_d, h_q, h_d, Wq, Wd):
    """Cosine gradient pieces for one branch; None when degenerate."""
    nq = np.linalg.norm(o_q)
    nd = np.linalg.norm(o_d)
    if nq < _DEGENERATE_NORM or nd < _DEGENERATE_NORM:
        return None
    a = o_q @ o_d
    b = 1.0 / nq
    c = 1.0 / nd
    cos = a * b * c
    delta_oq = b * c * o_d - a * c * b**3 * o_q
    delta_od = b * c * o_q - a * b * c**3 * o_d
    delta_hq = (Wq.T @ delta_oq) / (1.0 + np.abs(h_q)) ** 2
    delta_hd = (Wd.T @ delta_od) / (1.0 + np.abs(h_d)) ** 2
    return cos, delta_oq, delta_od, delta_hq, delta_hd


def train_epoch(
    emb, Wq, bq, Wd, bd, tokens, offsets, q_idx, p_idx, n_idx, order, gamma, margin
):
    """One in-place SGD pass over the pairs in `order`.

    Returns (loss_sum, active_count, skipped_count). Pairs with a
    degenerate cosine update only their sound branch and are excluded
    from the statistics.
    """
    loss_sum = 0.0
    active = 0
    skipped = 0
    for pair in order:
        rows_q = tokens[offsets[q_idx[pair]] : offsets[q_idx[pair] + 1]]
        rows_p = tokens[offsets[p_idx[pair]] : offsets[p_idx[pair] + 1]]
        rows_n = tokens[offsets[n_idx[pair]] : offsets[n_idx[pair] + 1]]
        h_q, g_q, o_q = _forward_one(emb, Wq, bq, rows_q)
        h_p, g_p, o_p = _forward_one(emb, Wd, bd, rows_p)
        h_n, g_n, o_n = _forward_one(emb, Wd, bd, rows_n)

        bp = _branch(o_q, o_p, h_q, h_p, Wq, Wd)
        bn = _branch(o_q, o_n, h_q, h_n, Wq, Wd)
        cos_p = bp[0] if bp is not None else 0.0
        cos_n = bn[0] if bn is not None else 0.0
        loss = margin - (cos_p - cos_n)

        degenerate = bp is None or bn is None
        if degenerate:
            skipped += 1
        else:
            if loss > 0.0:
                loss_sum += loss
                active += 1
        if loss <= 0.0:
            continue

        # d loss / d cos_p = -1, d loss / d cos_n = +1.
        delta_oq = np.zeros_like(bq)
        if bp is not None:
            delta_oq -= bp[1]
            Wd -= gamma * np.outer(-bp[2], g_p)
            bd -= gamma * -bp[2]
        if bn is not None:
            delta_oq += bn[1]
            Wd -= gamma * np.outer(bn[2], g_n)
            bd -= gamma * bn[2]
        Wq -= gamma * np.outer(delta_oq, g_q)
        bq -= gamma * delta_oq

        if bp is not None or bn is not None:
            delta_hq = np.zeros(emb.shape[1])
            if bp is not None:
                delta_hq -= bp[3]
            if bn is not None:
                delta_hq += bn[3]
            for row in rows_q:
                emb[row] -= gamma * delta_hq
        if bp is not None:
            for row in rows_p:
                emb[row] -= gamma * -bp[4]
        if bn is not None:
            for row in rows_n:
                emb[row] -= gamma * bn[4]
    return loss_sum, active, skipped
