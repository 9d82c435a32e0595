"""Compare the compiled training kernel against the pure-numpy fallback.

Builds a realistic workload (simulated click logs, C>NC judgments), then
times train_epoch and score_pairs for every available backend on identical
inputs. Also cross-checks that both backends leave the model in the same
state, since speed is worthless if the kernels disagree.

Run from the repository root:

    python3 benchmarks/benchmark_kernels.py
    python3 benchmarks/benchmark_kernels.py --queries 400 --epochs 8
"""

import argparse
import time

import numpy as np

from semrank.judgments import Strategy, formulate
from semrank.kernels import available_backends, get_backend
from semrank.kernels.encoding import encode_judgments, encode_score_pairs
from semrank.logs import aggregate_ctr
from semrank.model import init_model
from semrank.rng import INIT, subrng
from semrank.simulate import SimConfig, generate_corpus, simulate_sessions
from semrank.training import judgment_vocab


def build_workload(queries, sessions_per_query, seed):
    sim = SimConfig(seed=seed, query_count=queries, sessions_per_query=sessions_per_query)
    corpus, truth = generate_corpus(sim)
    sessions = simulate_sessions(corpus, truth, sim)
    ctr = aggregate_ctr(sessions)
    judgments = formulate(sessions, Strategy.CLICKED_OVER_NON_CLICKED, ctr=ctr)
    return judgments, judgment_vocab(judgments)


def time_train(kernel, model, enc, order, epochs, gamma, margin):
    emb = model.embeddings.matrix.copy()
    wq, bq = model.query_tower.W.copy(), model.query_tower.b.copy()
    wd, bd = model.title_tower.W.copy(), model.title_tower.b.copy()
    args = (enc.tokens, enc.offsets, enc.q, enc.p, enc.n, order)
    kernel.train_epoch(emb, wq, bq, wd, bd, *args, gamma, margin)  # warm-up
    started = time.perf_counter()
    for _ in range(epochs):
        kernel.train_epoch(emb, wq, bq, wd, bd, *args, gamma, margin)
    elapsed = time.perf_counter() - started
    return elapsed, emb


def time_score(kernel, model, enc, repeats):
    args = (
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
    kernel.score_pairs(*args)
    started = time.perf_counter()
    for _ in range(repeats):
        scores = kernel.score_pairs(*args)
    return time.perf_counter() - started, scores


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--queries", type=int, default=300)
    ap.add_argument("--sessions-per-query", type=int, default=15)
    ap.add_argument("--epochs", type=int, default=5)
    ap.add_argument("--score-repeats", type=int, default=20)
    ap.add_argument("--d-emb", type=int, default=32)
    ap.add_argument("--d-out", type=int, default=32)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    judgments, vocab = build_workload(args.queries, args.sessions_per_query, args.seed)
    model = init_model(vocab, args.d_emb, args.d_out, subrng(args.seed, INIT))
    enc = encode_judgments(judgments, vocab)
    score_enc = encode_score_pairs(
        [(j.query, j.preferred) for j in judgments], vocab
    )
    order = np.arange(len(enc), dtype=np.int64)

    print(f"workload: {len(enc)} pairs, vocab {len(vocab)}, "
          f"d_emb={args.d_emb}, d_out={args.d_out}")
    print(f"{'backend':<8} {'train pairs/s':>14} {'score pairs/s':>14}")

    train_rates = {}
    final_embeddings = {}
    score_vectors = {}
    for name in available_backends():
        kernel = get_backend(name)
        train_s, emb = time_train(
            kernel, model, enc, order, args.epochs, gamma=0.05, margin=0.1
        )
        score_s, scores = time_score(kernel, model, score_enc, args.score_repeats)
        train_rates[name] = len(enc) * args.epochs / train_s
        final_embeddings[name] = emb
        score_vectors[name] = scores
        score_rate = len(score_enc) * args.score_repeats / score_s
        print(f"{name:<8} {train_rates[name]:>14,.0f} {score_rate:>14,.0f}")

    names = list(train_rates)
    if len(names) == 2:
        a, b = sorted(names, key=train_rates.get)
        print(f"\n{b} is {train_rates[b] / train_rates[a]:.1f}x faster than {a} "
              f"on train_epoch")
        emb_diff = np.max(np.abs(final_embeddings[a] - final_embeddings[b]))
        score_diff = np.max(np.abs(score_vectors[a] - score_vectors[b]))
        print(f"agreement: max |emb diff| {emb_diff:.2e}, "
              f"max |score diff| {score_diff:.2e}")
        if emb_diff > 1e-9 or score_diff > 1e-12:
            raise SystemExit("backends disagree beyond tolerance")


if __name__ == "__main__":
    main()
