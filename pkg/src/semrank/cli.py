"""Command-line front end: reproducible simulate/formulate/train/eval pipelines.

Every subcommand derives all randomness from --seed, writes its artifacts
into --out, and finishes with a manifest.json recording the fully resolved
configuration, input/output checksums, and a replay argv that reproduces
the run (identical output checksums) from the manifest alone.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

from .errors import ConfigError, SemrankError, ValidationError
from .evaluation import (
    GROUND_TRUTH_SET,
    TEST1,
    TestSet,
    build_test1,
    check_disjoint,
    compare_strategies,
    precision,
    render_chart,
    split_sessions,
    write_baselines,
    write_report,
    write_strategy_summary,
)
from .judgments import (
    FORMULATION_STRATEGIES,
    CtrParams,
    Strategy,
    distribution,
    formulate,
    read_judgments,
    write_distribution,
    write_judgments,
)
from .kernels import default_backend_name
from .logs import aggregate_ctr, parse_sessions, write_sessions
from .model import load_model, save_model
from .simulate import (
    SimConfig,
    generate_corpus,
    ground_truth_pairs,
    simulate_sessions,
    write_ground_truth,
)
from .training import TrainingConfig, gradient_check, train, write_stats

_STRATEGY_BY_FLAG = {
    "C-S": Strategy.CLICKED_OVER_SKIPPED,
    "C-C": Strategy.CLICKED_OVER_CLICKED,
    "C-NE": Strategy.CLICKED_OVER_NON_EXAMINED,
    "S-NE": Strategy.SKIPPED_OVER_NON_EXAMINED,
    "C-NC": Strategy.CLICKED_OVER_NON_CLICKED,
    "GT": Strategy.GROUND_TRUTH,
}
_FLAG_BY_STRATEGY = {s: f for f, s in _STRATEGY_BY_FLAG.items()}
_FORMULATE_CHOICES = ("C-S", "C-C", "C-NE", "S-NE", "C-NC", "all")


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


class _Run:
    """Collects inputs/outputs of one command and writes the manifest."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.out_dir = Path(args.out)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.started = _utcnow()
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, str] = {}

    def read_text(self, path: str) -> list[str]:
        p = Path(path)
        lines = p.read_text(encoding="utf-8").splitlines(keepends=True)
        self.inputs[str(p)] = _sha256(p)
        return lines

    def write(self, name: str, render) -> Path:
        path = self.out_dir / name
        with open(path, "w", encoding="utf-8", newline="\n") as sink:
            render(sink)
        self.outputs[name] = _sha256(path)
        return path

    def finish(self, parser: argparse.ArgumentParser) -> int:
        manifest = {
            "command": self.args.command,
            "seed": self.args.seed,
            "backend": getattr(self.args, "backend", None) or default_backend_name(),
            "config": _resolved_config(self.args),
            "replay": _replay_argv(parser, self.args),
            "inputs": self.inputs,
            "outputs": self.outputs,
            "started": self.started,
            "finished": _utcnow(),
        }
        with open(self.out_dir / "manifest.json", "w", encoding="utf-8") as sink:
            json.dump(manifest, sink, indent=2, sort_keys=True)
            sink.write("\n")
        return 0


_SKIP_DESTS = {"command", "func", "config"}


def _resolved_config(args: argparse.Namespace) -> dict:
    return {
        key: value
        for key, value in sorted(vars(args).items())
        if key not in _SKIP_DESTS and not callable(value)
    }


def _replay_argv(parser: argparse.ArgumentParser, args: argparse.Namespace) -> list[str]:
    """Reconstruct a full argv with every default materialized."""
    argv = [args.command]
    for action in parser._actions:
        if not action.option_strings or action.dest in _SKIP_DESTS:
            continue
        value = getattr(args, action.dest, None)
        flag = action.option_strings[-1]
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            if value is action.const:
                argv.append(flag)
        elif value is not None:
            argv.extend([flag, str(value)])
    return argv


# ---------------------------------------------------------------------------
# Shared flag groups
# ---------------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="master seed for all randomness")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument(
        "--config",
        default=None,
        help="key=value file of flag defaults (explicit flags win)",
    )


def _add_training(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--gamma", type=float, default=0.05, help="initial learning rate")
    parser.add_argument("--margin", type=float, default=0.1)
    parser.add_argument("--decay", choices=("constant", "linear"), default="constant")
    parser.add_argument("--iterations", type=int, default=50)
    parser.add_argument("--d-emb", type=int, default=32, help="word embedding width")
    parser.add_argument("--d-out", type=int, default=32, help="tower output width")
    parser.add_argument(
        "--no-shuffle", action="store_true", help="keep judgment order fixed across iterations"
    )
    parser.add_argument(
        "--backend", choices=("pure", "fast"), default=None, help="kernel backend override"
    )


def _training_config(args: argparse.Namespace) -> TrainingConfig:
    config = TrainingConfig(
        margin=args.margin,
        learning_rate=args.gamma,
        decay=args.decay,
        iterations=args.iterations,
        d_emb=args.d_emb,
        d_out=args.d_out,
        seed=args.seed,
        shuffle=not args.no_shuffle,
    )
    config.validate()
    return config


def _sim_config(args: argparse.Namespace) -> SimConfig:
    config = SimConfig(
        seed=args.seed,
        vocab_size=args.vocab_size,
        num_topics=args.topics,
        query_count=args.queries,
        results_per_query=args.results_per_query,
        sessions_per_query=args.sessions_per_query,
        tokens_per_query=args.tokens_per_query,
        tokens_per_title=args.tokens_per_title,
        click_prob={0: args.click_prob_0, 1: args.click_prob_1, 2: args.click_prob_2},
        continue_after_nonclick=args.continue_after_nonclick,
        continue_after_click=args.continue_after_click,
        rank_noise=args.rank_noise,
    )
    config.validate()
    return config


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    config = _sim_config(args)
    run = _Run(args)
    corpus, truth = generate_corpus(config)
    sessions = simulate_sessions(corpus, truth, config)
    pairs, skipped = ground_truth_pairs(
        corpus, truth, pairs_per_query=args.gt_pairs_per_query, seed=args.seed
    )
    run.write("sessions.jsonl", lambda sink: write_sessions(sessions, sink))
    run.write("ground_truth.tsv", lambda sink: write_ground_truth(truth, sink))
    run.write("gt_pairs.tsv", lambda sink: write_judgments(pairs, sink))
    print(
        f"simulate: {len(sessions)} sessions, {len(pairs)} ground-truth pairs "
        f"({skipped} queries without graded pairs) -> {run.out_dir}"
    )
    return run.finish(parser)


def cmd_formulate(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    run = _Run(args)
    sessions = parse_sessions(run.read_text(args.infile))
    ctr = aggregate_ctr(sessions)
    params = CtrParams(min_impressions=args.min_impressions, min_gap=args.min_gap)

    if args.strategy == "all":
        chosen = list(FORMULATION_STRATEGIES)
    else:
        chosen = [_STRATEGY_BY_FLAG[args.strategy]]
    for strategy in chosen:
        judgments = formulate(sessions, strategy, ctr=ctr, ctr_params=params)
        name = f"judgments_{_FLAG_BY_STRATEGY[strategy]}.tsv"
        run.write(name, lambda sink, js=judgments: write_judgments(js, sink))
        print(f"formulate: {strategy.value} -> {len(judgments)} pairs ({name})")

    report = distribution(sessions, ctr, ctr_params=params)
    run.write("distribution.csv", lambda sink: write_distribution(report, sink))
    return run.finish(parser)


def cmd_train(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    config = _training_config(args)
    run = _Run(args)
    judgments = read_judgments(run.read_text(args.infile))
    model, stats = train(judgments, config, backend=args.backend)
    run.write("model.sem", lambda sink: save_model(model, sink))
    run.write("stats.csv", lambda sink: write_stats(stats, sink))
    final = stats.rows[-1]
    print(
        f"train: {len(judgments)} judgments, {config.iterations} iterations, "
        f"final mean loss {final.mean_loss:.6f}, active {final.active_fraction:.3f}"
    )
    return run.finish(parser)


def cmd_eval(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    if (args.pairs is None) == (args.sessions is None):
        raise ConfigError("give exactly one of --pairs or --sessions")
    run = _Run(args)
    model = load_model(run.read_text(args.model))

    if args.pairs is not None:
        pairs = read_judgments(run.read_text(args.pairs))
        origin = GROUND_TRUTH_SET if all(
            j.source is Strategy.GROUND_TRUTH for j in pairs
        ) else TEST1
        test = TestSet(pairs=pairs, origin=origin)
    else:
        holdout = parse_sessions(run.read_text(args.sessions))
        if args.train_sessions is not None:
            train_side = parse_sessions(run.read_text(args.train_sessions))
            check_disjoint(train_side, holdout)
        test = build_test1(holdout, seed=args.seed)

    value = precision(model, test, backend=args.backend)
    run.write(
        "eval.csv",
        lambda sink: sink.write(
            "testset,precision,pairs\n"
            f"{test.origin},{value!r},{len(test.pairs)}\n"
        ),
    )
    print(f"eval: {test.origin} precision {value:.4f} over {len(test.pairs)} pairs")
    return run.finish(parser)


def cmd_compare(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    config = _training_config(args)
    run = _Run(args)
    sessions = parse_sessions(run.read_text(args.sessions))
    train_side, holdout = split_sessions(sessions, args.holdout_fraction, seed=args.seed)

    gt_pairs = []
    if args.gt_pairs is not None:
        gt_pairs = read_judgments(run.read_text(args.gt_pairs))

    if args.strategies == "all":
        chosen = list(FORMULATION_STRATEGIES)
    else:
        chosen = []
        for flag in args.strategies.split(","):
            flag = flag.strip()
            if flag not in _STRATEGY_BY_FLAG or flag == "GT":
                raise ConfigError(f"unknown strategy flag {flag!r}")
            chosen.append(_STRATEGY_BY_FLAG[flag])

    params = CtrParams(min_impressions=args.min_impressions, min_gap=args.min_gap)
    report = compare_strategies(
        train_side, holdout, gt_pairs, chosen, config,
        ctr_params=params, backend=args.backend,
    )
    run.write("report.csv", lambda sink: write_report(report, sink))
    run.write("baseline.csv", lambda sink: write_baselines(report, sink))
    run.write("strategies.csv", lambda sink: write_strategy_summary(report, sink))
    if args.save_models:
        for strategy in chosen:
            model = report.final_models.get(strategy.value)
            if model is not None:
                name = f"model_{_FLAG_BY_STRATEGY[strategy]}.sem"
                run.write(name, lambda sink, m=model: save_model(m, sink))
    if args.charts:
        for origin in sorted({row.testset for row in report.rows}):
            svg = render_chart(report, origin)
            run.write(f"chart_{origin}.svg", lambda sink, s=svg: sink.write(s + "\n"))

    for origin, row in sorted(report.baselines.items()):
        print(f"compare: {origin} baseline {row.precision:.4f} over {row.pairs} pairs")
    best: dict[str, tuple[str, float]] = {}
    for row in report.rows:
        if row.iteration == config.iterations:
            top = best.get(row.testset)
            if top is None or row.precision > top[1]:
                best[row.testset] = (row.strategy, row.precision)
    for origin, (tag, value) in sorted(best.items()):
        print(f"compare: {origin} best final {tag} = {value:.4f}")
    return run.finish(parser)


def cmd_gradcheck(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    config = TrainingConfig(
        margin=args.margin, d_emb=args.d_emb, d_out=args.d_out, seed=args.seed
    )
    report = gradient_check(
        config,
        trials=args.trials,
        tolerance=args.tolerance,
        seed=args.seed,
        step=args.step,
    )
    text = report.format()
    print(text)
    run = _Run(args)
    run.write("gradcheck.txt", lambda sink: sink.write(text + "\n"))
    status = run.finish(parser)
    if not report.passed:
        return 1
    return status


# ---------------------------------------------------------------------------
# Parser assembly
# ---------------------------------------------------------------------------


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="semrank",
        description="Click-log judgment formulation and embedding-model training.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    subs: dict[str, argparse.ArgumentParser] = {}

    sim = subparsers.add_parser("simulate", help="generate a synthetic click log")
    _add_common(sim)
    sim.add_argument("--queries", type=int, default=500)
    sim.add_argument("--sessions-per-query", type=int, default=20)
    sim.add_argument("--results-per-query", type=int, default=10)
    sim.add_argument("--vocab-size", type=int, default=400)
    sim.add_argument("--topics", type=int, default=20)
    sim.add_argument("--tokens-per-query", type=int, default=3)
    sim.add_argument("--tokens-per-title", type=int, default=5)
    sim.add_argument("--rank-noise", type=float, default=1.0)
    sim.add_argument("--click-prob-0", type=float, default=0.05)
    sim.add_argument("--click-prob-1", type=float, default=0.3)
    sim.add_argument("--click-prob-2", type=float, default=0.7)
    sim.add_argument("--continue-after-click", type=float, default=0.5)
    sim.add_argument("--continue-after-nonclick", type=float, default=0.8)
    sim.add_argument("--gt-pairs-per-query", type=int, default=10)
    sim.set_defaults(func=cmd_simulate)
    subs["simulate"] = sim

    form = subparsers.add_parser("formulate", help="derive pairwise judgments from a log")
    _add_common(form)
    form.add_argument("--in", dest="infile", required=True, help="sessions JSONL file")
    form.add_argument("--strategy", choices=_FORMULATE_CHOICES, default="all")
    form.add_argument("--min-impressions", type=int, default=5)
    form.add_argument("--min-gap", type=float, default=0.05)
    form.set_defaults(func=cmd_formulate)
    subs["formulate"] = form

    tr = subparsers.add_parser("train", help="train a model on a judgments file")
    _add_common(tr)
    tr.add_argument("--in", dest="infile", required=True, help="judgments TSV file")
    _add_training(tr)
    tr.set_defaults(func=cmd_train)
    subs["train"] = tr

    ev = subparsers.add_parser("eval", help="score a saved model on one test set")
    _add_common(ev)
    ev.add_argument("--model", required=True, help="saved model file")
    ev.add_argument("--pairs", default=None, help="judgments TSV used as test pairs")
    ev.add_argument("--sessions", default=None, help="holdout sessions JSONL for Test-1")
    ev.add_argument(
        "--train-sessions",
        default=None,
        help="training sessions to verify holdout disjointness",
    )
    ev.add_argument("--backend", choices=("pure", "fast"), default=None)
    ev.set_defaults(func=cmd_eval)
    subs["eval"] = ev

    comp = subparsers.add_parser(
        "compare", help="train every strategy and track test precision"
    )
    _add_common(comp)
    comp.add_argument("--sessions", required=True, help="full sessions JSONL (gets split)")
    comp.add_argument("--gt-pairs", default=None, help="graded preference pairs TSV")
    comp.add_argument("--holdout-fraction", type=float, default=0.2)
    comp.add_argument(
        "--strategies",
        default="all",
        help='comma-separated strategy flags (C-S,C-C,C-NE,S-NE,C-NC) or "all"',
    )
    comp.add_argument("--min-impressions", type=int, default=5)
    comp.add_argument("--min-gap", type=float, default=0.05)
    comp.add_argument("--charts", action="store_true", help="emit SVG charts per test set")
    comp.add_argument(
        "--save-models", action="store_true", help="write each strategy's final model"
    )
    _add_training(comp)
    comp.set_defaults(func=cmd_compare)
    subs["compare"] = comp

    gc = subparsers.add_parser("gradcheck", help="finite-difference gradient check")
    _add_common(gc)
    gc.add_argument("--trials", type=int, default=100)
    gc.add_argument("--tolerance", type=float, default=1e-4)
    gc.add_argument("--step", type=float, default=1e-5)
    gc.add_argument("--margin", type=float, default=0.1)
    gc.add_argument("--d-emb", type=int, default=4)
    gc.add_argument("--d-out", type=int, default=3)
    gc.set_defaults(func=cmd_gradcheck)
    subs["gradcheck"] = gc

    return parser, subs


def _apply_config_file(
    argv: Sequence[str], subs: dict[str, argparse.ArgumentParser]
) -> None:
    """Turn a key=value file into subparser defaults (explicit flags win)."""
    command = next((token for token in argv if not token.startswith("-")), None)
    if command not in subs:
        return
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config", default=None)
    known, _ = probe.parse_known_args(list(argv))
    if known.config is None:
        return

    sub = subs[command]
    actions = {
        action.dest: action for action in sub._actions if action.option_strings
    }
    overrides: dict[str, object] = {}
    for line_no, raw in enumerate(
        Path(known.config).read_text(encoding="utf-8").splitlines(), start=1
    ):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{known.config}:{line_no}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        dest = key.strip().replace("-", "_")
        action = actions.get(dest)
        if action is None or dest in _SKIP_DESTS:
            raise ConfigError(f"{known.config}:{line_no}: unknown key {key.strip()!r}")
        value = value.strip()
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            if value.lower() not in ("true", "false", "1", "0"):
                raise ConfigError(f"{known.config}:{line_no}: boolean expected")
            overrides[dest] = value.lower() in ("true", "1")
        elif action.type is not None:
            try:
                overrides[dest] = action.type(value)
            except ValueError as exc:
                raise ConfigError(f"{known.config}:{line_no}: {exc}") from exc
        else:
            overrides[dest] = value
    sub.set_defaults(**overrides)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser, subs = build_parser()
        _apply_config_file(argv, subs)
        args = parser.parse_args(argv)
        return args.func(args, subs[args.command])
    except SemrankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse usage errors / --help
        code = exc.code
        return code if isinstance(code, int) else 2


if __name__ == "__main__":
    sys.exit(main())
