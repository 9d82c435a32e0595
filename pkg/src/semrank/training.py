"""SGD training loop, configuration, statistics, and gradient checking.

Training is strictly sequential per-pair SGD (batch size 1) with an
optional seeded shuffle each iteration. Given identical judgments and
config, two runs produce bit-identical models. The per-epoch inner loop is
delegated to a kernel backend (compiled or pure numpy, semantically
identical); pair_gradients/sgd_step in gradients.py stay the reference
path, validated against finite differences by gradient_check.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, TextIO

import numpy as np

from . import rng as rng_streams
from .errors import ConfigError, ParseError
from .gradients import pair_gradients
from .judgments import PairwiseJudgment
from .kernels import get_backend
from .kernels.encoding import encode_judgments
from .model import SemModel, build_vocab, init_model
from .rng import subrng

DECAY_MODES = ("constant", "linear")


@dataclass
class TrainingConfig:
    """Everything a bit-reproducible training run depends on."""

    margin: float = 0.1
    learning_rate: float = 0.05
    decay: str = "constant"  # "constant" or "linear" (to zero)
    iterations: int = 50
    d_emb: int = 32
    d_out: int = 32
    seed: int = 0
    shuffle: bool = True

    def validate(self) -> None:
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.margin < 0:
            raise ConfigError("margin must be >= 0")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.decay not in DECAY_MODES:
            raise ConfigError(f"decay must be one of {DECAY_MODES}")
        if self.d_emb < 1 or self.d_out < 1:
            raise ConfigError("dimensions must be >= 1")

    def learning_rate_at(self, iteration: int) -> float:
        """Rate for a 1-based iteration; linear decay reaches 0 one past the end."""
        if self.decay == "constant":
            return self.learning_rate
        return self.learning_rate * (self.iterations - (iteration - 1)) / self.iterations


@dataclass
class IterationStats:
    iteration: int
    mean_loss: float
    active_fraction: float
    seconds: float


@dataclass
class TrainStats:
    rows: list[IterationStats] = field(default_factory=list)

    def final_mean_loss(self) -> float:
        return self.rows[-1].mean_loss if self.rows else 0.0


def write_stats(stats: TrainStats, sink: TextIO) -> None:
    sink.write("iteration,mean_loss,active_fraction,seconds\n")
    for r in stats.rows:
        sink.write(
            f"{r.iteration},{r.mean_loss:.17g},{r.active_fraction:.17g},{r.seconds:.6f}\n"
        )


def read_stats(stream: Iterable[str]) -> TrainStats:
    stats = TrainStats()
    for row_no, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("iteration,"):
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ParseError(f"expected 4 fields, got {len(parts)}", row_no)
        stats.rows.append(
            IterationStats(int(parts[0]), float(parts[1]), float(parts[2]), float(parts[3]))
        )
    return stats


def judgment_vocab(judgments: Sequence[PairwiseJudgment]) -> dict[str, int]:
    """First-seen-order vocabulary over all judgment texts."""
    def texts():
        for j in judgments:
            yield j.query
            yield j.preferred
            yield j.dispreferred

    return build_vocab(texts())


EvalHook = Callable[[int, SemModel], None]


def train(
    judgments: Sequence[PairwiseJudgment],
    config: TrainingConfig,
    eval_hook: Optional[EvalHook] = None,
    vocab: Optional[dict[str, int]] = None,
    backend: Optional[str] = None,
) -> tuple[SemModel, TrainStats]:
    """Train a fresh model on the judgments.

    The vocabulary defaults to all judgment texts (so nothing is OOV during
    training); pass `vocab` to share an initialization across runs with
    different judgment sets. The hook, if any, receives (iteration, model
    snapshot) after each iteration. Pairs whose cosine is degenerate update
    only their sound branch and are dropped from the statistics; see
    gradients.pair_gradients.
    """
    config.validate()
    if not judgments:
        raise ConfigError("judgment list is empty")
    if vocab is None:
        vocab = judgment_vocab(judgments)
    model = init_model(vocab, config.d_emb, config.d_out, subrng(config.seed, rng_streams.INIT))
    enc = encode_judgments(judgments, vocab)
    kernel = get_backend(backend)
    n = len(enc)
    stats = TrainStats()
    for iteration in range(1, config.iterations + 1):
        if config.shuffle:
            order = subrng(config.seed, rng_streams.SHUFFLE, iteration).permutation(n)
            order = order.astype(np.int64)
        else:
            order = np.arange(n, dtype=np.int64)
        gamma = config.learning_rate_at(iteration)
        started = time.perf_counter()
        loss_sum, active, skipped = kernel.train_epoch(
            model.embeddings.matrix,
            model.query_tower.W,
            model.query_tower.b,
            model.title_tower.W,
            model.title_tower.b,
            enc.tokens,
            enc.offsets,
            enc.q,
            enc.p,
            enc.n,
            order,
            gamma,
            config.margin,
        )
        seconds = time.perf_counter() - started
        counted = n - skipped
        stats.rows.append(
            IterationStats(
                iteration=iteration,
                mean_loss=loss_sum / counted if counted else 0.0,
                active_fraction=active / counted if counted else 0.0,
                seconds=seconds,
            )
        )
        if eval_hook is not None:
            eval_hook(iteration, model.copy())
    return model, stats


# ---------------------------------------------------------------------------
# Finite-difference gradient checking
# ---------------------------------------------------------------------------

PARAM_CLASSES = ("embeddings", "W_q", "b_q", "W_d", "b_d")

#: Components whose analytic and numeric values both sit below this are
#: treated as matching; central differences cannot resolve them.
_REL_ERR_FLOOR = 1e-6


@dataclass
class GradientCheckReport:
    trials: int
    tolerance: float
    step: float
    max_rel_err: dict[str, float]
    failures: list[tuple[int, str, float]]  # (trial, parameter class, error)

    @property
    def passed(self) -> bool:
        return not self.failures

    def format(self) -> str:
        lines = [
            f"gradient check: {self.trials} trials, step {self.step:g}, "
            f"tolerance {self.tolerance:g}"
        ]
        for cls in PARAM_CLASSES:
            lines.append(f"  {cls:12s} max relative error {self.max_rel_err[cls]:.3e}")
        lines.append(
            "PASS" if self.passed else f"FAIL ({len(self.failures)} class failures)"
        )
        return "\n".join(lines)


def _rel_err(analytic: float, numeric: float) -> float:
    scale = max(abs(analytic), abs(numeric), _REL_ERR_FLOOR)
    return abs(analytic - numeric) / scale


def _random_check_instance(config: TrainingConfig, trial_rng: np.random.Generator):
    """A tiny model and an active, well-conditioned judgment."""
    from .gradients import hinge_loss
    from .judgments import Strategy
    from .model import forward

    vocab = {f"t{i}": i for i in range(8)}
    toks = list(vocab)
    for _ in range(200):
        model = init_model(vocab, config.d_emb, config.d_out, trial_rng)
        texts = [
            tuple(str(t) for t in trial_rng.choice(toks, size=2)) for _ in range(3)
        ]
        judgment = PairwiseJudgment(texts[0], texts[1], texts[2], Strategy.GROUND_TRUTH)
        if judgment.preferred == judgment.dispreferred:
            continue
        loss = hinge_loss(model, judgment, config.margin)
        norms = [
            np.linalg.norm(forward(t, model.embeddings, tower).O)
            for t, tower in (
                (judgment.query, model.query_tower),
                (judgment.preferred, model.title_tower),
                (judgment.dispreferred, model.title_tower),
            )
        ]
        # stay clear of the hinge kink and of degenerate norms so the
        # +-step probes remain inside a smooth region
        if loss > 1e-2 and min(norms) > 1e-2:
            return model, judgment
    raise RuntimeError("could not draw an active gradient-check instance")


def gradient_check(
    config: TrainingConfig,
    trials: int,
    tolerance: float,
    seed: int = 0,
    step: float = 1e-5,
) -> GradientCheckReport:
    """Compare pair_gradients against central finite differences.

    Every parameter of every class is perturbed independently; the loss is
    re-evaluated through the full forward pass. Per class the max relative
    error is reported, and any (trial, class) exceeding the tolerance is a
    failure.
    """
    from .gradients import hinge_loss

    if trials < 1:
        raise ConfigError("trials must be >= 1")
    max_err = {cls: 0.0 for cls in PARAM_CLASSES}
    failures = []
    for trial in range(trials):
        model, judgment = _random_check_instance(
            config, subrng(seed, rng_streams.GRADCHECK, trial)
        )
        grads = pair_gradients(model, judgment, config.margin)
        arrays = {
            "embeddings": (model.embeddings.matrix, None),
            "W_q": (model.query_tower.W, grads.dW_q),
            "b_q": (model.query_tower.b, grads.db_q),
            "W_d": (model.title_tower.W, grads.dW_d),
            "b_d": (model.title_tower.b, grads.db_d),
        }
        trial_err = {}
        for cls, (params, analytic_arr) in arrays.items():
            worst = 0.0
            flat = params.reshape(-1)
            for idx in range(flat.size):
                original = flat[idx]
                flat[idx] = original + step
                up = hinge_loss(model, judgment, config.margin)
                flat[idx] = original - step
                down = hinge_loss(model, judgment, config.margin)
                flat[idx] = original
                numeric = (up - down) / (2.0 * step)
                if cls == "embeddings":
                    row, col = divmod(idx, params.shape[1])
                    row_grad = grads.d_embeddings.get(row)
                    analytic = float(row_grad[col]) if row_grad is not None else 0.0
                else:
                    analytic = float(analytic_arr.reshape(-1)[idx])
                worst = max(worst, _rel_err(analytic, numeric))
            trial_err[cls] = worst
            max_err[cls] = max(max_err[cls], worst)
        for cls, err in trial_err.items():
            if err > tolerance:
                failures.append((trial, cls, err))
    return GradientCheckReport(
        trials=trials,
        tolerance=tolerance,
        step=step,
        max_rel_err=max_err,
        failures=failures,
    )
