# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel backend: per-pair SGD epoch and batch pair scoring.

Mirrors kernels/pure.py operation for operation (same per-pair update
order), so the two backends agree to floating-point noise. Keep the two
files in sync when touching the math.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

NAME = "fast"

cdef double _DEGENERATE_NORM = 1e-12


cdef inline void _forward(
    double[:, ::1] emb, double[:, ::1] W, double[::1] b,
    cnp.int32_t[::1] tokens, cnp.int64_t start, cnp.int64_t end,
    double* h, double* g, double* o, int d_emb, int d_out,
) noexcept nogil:
    cdef int i, j, row
    cdef cnp.int64_t k
    cdef double acc
    for i in range(d_emb):
        h[i] = 0.0
    for k in range(start, end):
        row = tokens[k]
        for i in range(d_emb):
            h[i] += emb[row, i]
    for i in range(d_emb):
        g[i] = h[i] / (1.0 + fabs(h[i]))
    for j in range(d_out):
        acc = b[j]
        for i in range(d_emb):
            acc += W[j, i] * g[i]
        o[j] = acc


cdef inline int _branch(
    double* o_q, double* o_d, double* h_q, double* h_d,
    double[:, ::1] Wq, double[:, ::1] Wd,
    double* delta_oq, double* delta_od, double* delta_hq, double* delta_hd,
    int d_emb, int d_out, double* cos_out,
) noexcept nogil:
    """Cosine gradient pieces for one branch. Returns 0 when degenerate."""
    cdef int i, j
    cdef double a = 0.0, nq = 0.0, nd = 0.0, b, c, s
    for j in range(d_out):
        a += o_q[j] * o_d[j]
        nq += o_q[j] * o_q[j]
        nd += o_d[j] * o_d[j]
    nq = sqrt(nq)
    nd = sqrt(nd)
    if nq < _DEGENERATE_NORM or nd < _DEGENERATE_NORM:
        cos_out[0] = 0.0
        return 0
    b = 1.0 / nq
    c = 1.0 / nd
    cos_out[0] = a * b * c
    for j in range(d_out):
        delta_oq[j] = b * c * o_d[j] - a * c * b * b * b * o_q[j]
        delta_od[j] = b * c * o_q[j] - a * b * c * c * c * o_d[j]
    for i in range(d_emb):
        s = 0.0
        for j in range(d_out):
            s += Wq[j, i] * delta_oq[j]
        delta_hq[i] = s / ((1.0 + fabs(h_q[i])) * (1.0 + fabs(h_q[i])))
        s = 0.0
        for j in range(d_out):
            s += Wd[j, i] * delta_od[j]
        delta_hd[i] = s / ((1.0 + fabs(h_d[i])) * (1.0 + fabs(h_d[i])))
    return 1


def score_pairs(
    double[:, ::1] emb, double[:, ::1] Wq, double[::1] bq,
    double[:, ::1] Wd, double[::1] bd,
    cnp.int32_t[::1] tokens, cnp.int64_t[::1] offsets,
    cnp.int32_t[::1] q_idx, cnp.int32_t[::1] t_idx,
):
    """Cosine of (query tower, title tower) per pair; degenerate pairs -> 0."""
    cdef int n_texts = offsets.shape[0] - 1
    cdef int n_pairs = q_idx.shape[0]
    cdef int d_emb = emb.shape[1]
    cdef int d_out = Wq.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Oq = np.empty((n_texts, d_out))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Ot = np.empty((n_texts, d_out))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] scores = np.zeros(n_pairs)
    cdef double[:, ::1] oq_v = Oq
    cdef double[:, ::1] ot_v = Ot
    cdef double[::1] scores_v = scores
    cdef cnp.ndarray[cnp.float64_t, ndim=1] work = np.empty(2 * d_emb)
    cdef double[::1] work_v = work
    cdef double* h = &work_v[0]
    cdef double* g = &work_v[d_emb]
    cdef int i, j
    cdef double a, nq, nd
    with nogil:
        for i in range(n_texts):
            _forward(emb, Wq, bq, tokens, offsets[i], offsets[i + 1],
                     h, g, &oq_v[i, 0], d_emb, d_out)
            _forward(emb, Wd, bd, tokens, offsets[i], offsets[i + 1],
                     h, g, &ot_v[i, 0], d_emb, d_out)
        for i in range(n_pairs):
            a = 0.0
            nq = 0.0
            nd = 0.0
            for j in range(d_out):
                a += oq_v[q_idx[i], j] * ot_v[t_idx[i], j]
                nq += oq_v[q_idx[i], j] * oq_v[q_idx[i], j]
                nd += ot_v[t_idx[i], j] * ot_v[t_idx[i], j]
            nq = sqrt(nq)
            nd = sqrt(nd)
            if nq >= _DEGENERATE_NORM and nd >= _DEGENERATE_NORM:
                scores_v[i] = a / (nq * nd)
    return scores


def train_epoch(
    double[:, ::1] emb, double[:, ::1] Wq, double[::1] bq,
    double[:, ::1] Wd, double[::1] bd,
    cnp.int32_t[::1] tokens, cnp.int64_t[::1] offsets,
    cnp.int32_t[::1] q_idx, cnp.int32_t[::1] p_idx, cnp.int32_t[::1] n_idx,
    cnp.int64_t[::1] order, double gamma, double margin,
):
    """One in-place SGD pass over the pairs in `order`.

    Returns (loss_sum, active_count, skipped_count); degenerate pairs are
    excluded from the statistics, matching the pure backend.
    """
    cdef int d_emb = emb.shape[1]
    cdef int d_out = Wq.shape[0]
    # one scratch buffer: 11 d_emb-sized slots, then 8 d_out-sized slots
    cdef cnp.ndarray[cnp.float64_t, ndim=1] work = np.empty(11 * d_emb + 8 * d_out)
    cdef double[::1] w = work
    cdef double* h_q = &w[0]
    cdef double* g_q = &w[d_emb]
    cdef double* h_p = &w[2 * d_emb]
    cdef double* g_p = &w[3 * d_emb]
    cdef double* h_n = &w[4 * d_emb]
    cdef double* g_n = &w[5 * d_emb]
    cdef double* dhq_p = &w[6 * d_emb]
    cdef double* dhd_p = &w[7 * d_emb]
    cdef double* dhq_n = &w[8 * d_emb]
    cdef double* dhd_n = &w[9 * d_emb]
    cdef double* dhq_total = &w[10 * d_emb]
    cdef double* o_q = &w[11 * d_emb]
    cdef double* o_p = &w[11 * d_emb + d_out]
    cdef double* o_n = &w[11 * d_emb + 2 * d_out]
    cdef double* doq_p = &w[11 * d_emb + 3 * d_out]
    cdef double* dod_p = &w[11 * d_emb + 4 * d_out]
    cdef double* doq_n = &w[11 * d_emb + 5 * d_out]
    cdef double* dod_n = &w[11 * d_emb + 6 * d_out]
    cdef double* doq_total = &w[11 * d_emb + 7 * d_out]

    cdef double loss_sum = 0.0
    cdef long long active = 0, skipped = 0
    cdef cnp.int64_t idx
    cdef int pair, i, j, row, ok_p, ok_n
    cdef cnp.int64_t k
    cdef double cos_p, cos_n, loss

    with nogil:
        for idx in range(order.shape[0]):
            pair = <int> order[idx]
            _forward(emb, Wq, bq, tokens, offsets[q_idx[pair]], offsets[q_idx[pair] + 1],
                     h_q, g_q, o_q, d_emb, d_out)
            _forward(emb, Wd, bd, tokens, offsets[p_idx[pair]], offsets[p_idx[pair] + 1],
                     h_p, g_p, o_p, d_emb, d_out)
            _forward(emb, Wd, bd, tokens, offsets[n_idx[pair]], offsets[n_idx[pair] + 1],
                     h_n, g_n, o_n, d_emb, d_out)

            ok_p = _branch(o_q, o_p, h_q, h_p, Wq, Wd,
                           doq_p, dod_p, dhq_p, dhd_p, d_emb, d_out, &cos_p)
            ok_n = _branch(o_q, o_n, h_q, h_n, Wq, Wd,
                           doq_n, dod_n, dhq_n, dhd_n, d_emb, d_out, &cos_n)
            loss = margin - (cos_p - cos_n)

            if not ok_p or not ok_n:
                skipped += 1
            elif loss > 0.0:
                loss_sum += loss
                active += 1
            if loss <= 0.0:
                continue

            # d loss / d cos_p = -1, d loss / d cos_n = +1.
            for j in range(d_out):
                doq_total[j] = 0.0
            if ok_p:
                for j in range(d_out):
                    doq_total[j] -= doq_p[j]
                for j in range(d_out):
                    for i in range(d_emb):
                        Wd[j, i] += gamma * dod_p[j] * g_p[i]
                    bd[j] += gamma * dod_p[j]
            if ok_n:
                for j in range(d_out):
                    doq_total[j] += doq_n[j]
                for j in range(d_out):
                    for i in range(d_emb):
                        Wd[j, i] -= gamma * dod_n[j] * g_n[i]
                    bd[j] -= gamma * dod_n[j]
            for j in range(d_out):
                for i in range(d_emb):
                    Wq[j, i] -= gamma * doq_total[j] * g_q[i]
                bq[j] -= gamma * doq_total[j]

            if ok_p or ok_n:
                for i in range(d_emb):
                    dhq_total[i] = 0.0
                if ok_p:
                    for i in range(d_emb):
                        dhq_total[i] -= dhq_p[i]
                if ok_n:
                    for i in range(d_emb):
                        dhq_total[i] += dhq_n[i]
                for k in range(offsets[q_idx[pair]], offsets[q_idx[pair] + 1]):
                    row = tokens[k]
                    for i in range(d_emb):
                        emb[row, i] -= gamma * dhq_total[i]
            if ok_p:
                for k in range(offsets[p_idx[pair]], offsets[p_idx[pair] + 1]):
                    row = tokens[k]
                    for i in range(d_emb):
                        emb[row, i] += gamma * dhd_p[i]
            if ok_n:
                for k in range(offsets[n_idx[pair]], offsets[n_idx[pair] + 1]):
                    row = tokens[k]
                    for i in range(d_emb):
                        emb[row, i] -= gamma * dhd_n[i]
    return loss_sum, int(active), int(skipped)
