#!/usr/bin/env python3
"""
Adaptive Bidirectional Attention Reader - Main Entry Point

Extractive question answering over SQuAD 2.0-style data.
Subcommands:
- train               fit the reader (or the final-layer-only baseline)
- evaluate            SQuAD EM/F1 of a predictions file, printed as JSON
- predict             answer every question in a data file
- dump-attention      write one example's passage-to-question weights
- generate-synthetic  write a synthetic span-extraction corpus
- ablate              reader vs. baseline over several seeds

Exit codes: 0 success, 1 input/config error, 2 training diverged.
"""

import argparse
import json
import logging
import os
import sys
from typing import List, Optional

import config
from core.tensor import Rng
from pipeline.ablation import run_ablation, write_ablation_csv
from pipeline.attention import dump_attention
from pipeline.checkpoint import load_checkpoint, save_checkpoint
from pipeline.model import predict
from pipeline.settings import RunConfig, load_run_config
from pipeline.trainer import train, write_metrics_csv
from services.data import (
    SynthTaskSpec, generate_synthetic, hard_task_spec, load_corpus, read_jsonl,
    references_of, split_corpus, write_jsonl,
)
from services.database import open_ledger
from services.metrics import evaluate, load_predictions, load_references, write_per_question_csv
from utils.errors import DivergenceError, InputError, ReaderError
from utils.io import write_json

logger = logging.getLogger(__name__)

_SPLIT_STREAM = 20


def configure_logging(debug: bool = False):
    """stderr (stdout carries command output) plus an optional log file."""
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if config.LOG_FILE:
        handlers.append(logging.FileHandler(config.LOG_FILE))
    logging.basicConfig(
        level=getattr(logging, config.LOG_LEVEL, logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
    )
    if debug:
        logging.getLogger().setLevel(logging.DEBUG)


def print_banner():
    """Print startup banner."""
    banner = """
    ╔═══════════════════════════════════════════════════════════════╗
    ║                                                               ║
    ║   📖 ADAPTIVE BIDIRECTIONAL ATTENTION - Span Reader          ║
    ║                                                               ║
    ║   Every encoder layer feeds the answer, gated per feature     ║
    ║                                                               ║
    ╚═══════════════════════════════════════════════════════════════╝
    """
    print(banner, file=sys.stderr)


def _overrides(args) -> dict:
    return {
        "seed": getattr(args, "seed", None),
        "gate_init": getattr(args, "gate_init", None),
        "epochs": getattr(args, "epochs", None),
        "lr": getattr(args, "lr", None),
        "batch_size": getattr(args, "batch_size", None),
    }


def _ledger_for(out_dir: str):
    return open_ledger(os.path.join(out_dir, config.RUN_LEDGER) if config.RUN_LEDGER else None)


def _train_dev_split(args, model_config, train_config):
    corpus = load_corpus(args.data, model_config.max_passage_len, model_config.max_question_len)
    if args.dev:
        dev = load_corpus(args.dev, model_config.max_passage_len, model_config.max_question_len)
        return corpus, dev
    rng = Rng(model_config.seed).child(_SPLIT_STREAM)
    return split_corpus(corpus, train_config.dev_fraction, rng)


# ========== SUBCOMMANDS ==========

def cmd_train(args) -> int:
    model_config, train_config = load_run_config(args.config, _overrides(args))
    run = RunConfig(
        subcommand="train", model=model_config, train=train_config,
        input_paths={"config": args.config, "data": args.data, "dev": args.dev},
        output_paths={"out_dir": args.out},
    )
    run.validate_paths()

    train_set, dev = _train_dev_split(args, model_config, train_config)
    kind = "baseline" if args.baseline else "aba"
    logger.info(f"📋 {kind} | d={model_config.d} n={model_config.n} seed={run.seed} | "
                f"{len(train_set)} train / {len(dev)} dev")

    os.makedirs(args.out, exist_ok=True)
    ledger = _ledger_for(args.out)
    try:
        result = train(train_set, model_config, train_config, dev=dev, kind=kind, ledger=ledger)
    finally:
        if ledger is not None:
            ledger.flush()

    save_checkpoint(result.checkpoint, os.path.join(args.out, config.CHECKPOINT_FILE))
    write_metrics_csv(result.history, os.path.join(args.out, config.METRICS_FILE))
    return 0


def cmd_evaluate(args) -> int:
    run = RunConfig(
        subcommand="evaluate",
        input_paths={"predictions": args.predictions, "data": args.data},
        output_paths={"per_question_csv": args.per_question_csv},
    )
    run.validate_paths()

    predictions = load_predictions(args.predictions)
    if args.data.endswith(".jsonl"):
        references = references_of(read_jsonl(args.data))
    else:
        references = load_references(args.data)
    result = evaluate(predictions, references)

    if args.per_question_csv:
        write_per_question_csv(result, args.per_question_csv)
    print(json.dumps(result.summary(), sort_keys=True))
    return 0


def cmd_predict(args) -> int:
    run = RunConfig(
        subcommand="predict",
        input_paths={"checkpoint": args.checkpoint, "data": args.data},
        output_paths={"out": args.out},
    )
    run.validate_paths()

    model = load_checkpoint(args.checkpoint).to_model()
    examples = load_corpus(args.data, model.config.max_passage_len, model.config.max_question_len)
    answers = predict(model, examples)
    write_json(args.out, answers)
    empty = sum(1 for text in answers.values() if not text)
    logger.info(f"✅ Wrote {len(answers)} predictions ({empty} unanswerable) to {args.out}")
    return 0


def cmd_dump_attention(args) -> int:
    run = RunConfig(
        subcommand="dump-attention",
        input_paths={"checkpoint": args.checkpoint, "data": args.data},
        output_paths={"out": args.out},
    )
    run.validate_paths()

    checkpoint = load_checkpoint(args.checkpoint)
    examples = load_corpus(args.data, checkpoint.config.max_passage_len, checkpoint.config.max_question_len)
    matches = [e for e in examples if e.id == args.id]
    if not matches:
        raise InputError(f"unknown question id '{args.id}' in {args.data}")
    dump_attention(checkpoint, matches[0], args.out)
    return 0


def cmd_generate_synthetic(args) -> int:
    RunConfig(subcommand="generate-synthetic", output_paths={"out": args.out}).validate_paths()
    spec = hard_task_spec(args.seed) if args.hard else SynthTaskSpec(seed=args.seed)
    write_jsonl(generate_synthetic(spec, args.count), args.out)
    return 0


def cmd_ablate(args) -> int:
    model_config, train_config = load_run_config(args.config, _overrides(args))
    run = RunConfig(
        subcommand="ablate", model=model_config, train=train_config,
        input_paths={"config": args.config, "data": args.data, "dev": args.dev},
        output_paths={"out_dir": args.out},
    )
    run.validate_paths()

    train_set, dev = _train_dev_split(args, model_config, train_config)
    os.makedirs(args.out, exist_ok=True)
    ledger = _ledger_for(args.out)
    try:
        rows = run_ablation(train_set, dev, args.seeds, model_config, train_config, ledger=ledger)
    finally:
        if ledger is not None:
            ledger.flush()

    write_ablation_csv(rows, os.path.join(args.out, config.ABLATION_FILE))
    return 0


# ========== ARGUMENTS ==========

def _add_model_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", default=None, help="JSON config with 'model'/'train' sections")
    parser.add_argument("--seed", type=int, default=None, help="Seed for init, shuffling and dropout")
    parser.add_argument("--epochs", type=int, default=None)
    parser.add_argument("--lr", type=float, default=None, help="Adam learning rate")
    parser.add_argument("--batch-size", type=int, default=None)
    parser.add_argument("--gate-init", choices=["first", "last"], default=None,
                        help="Which stacked layer the gate starts fully open on")
    parser.add_argument("--dev", default=None, help="Held-out file (default: split off the training data)")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--debug", action="store_true", help="Enable debug logging")

    parser = argparse.ArgumentParser(
        description="Adaptive Bidirectional Attention reader for extractive QA",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="Train a model")
    p.add_argument("--data", required=True, help="SQuAD 2.0 JSON or .jsonl corpus")
    p.add_argument("--out", required=True, help="Output directory")
    p.add_argument("--baseline", action="store_true", help="Train the final-layer-only baseline")
    _add_model_flags(p)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="Score a predictions file")
    p.add_argument("--predictions", required=True)
    p.add_argument("--data", required=True, help="References: SQuAD 2.0 JSON or .jsonl corpus")
    p.add_argument("--per-question-csv", default=None)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("predict", parents=[common], help="Predict answers with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="Predictions JSON")
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("dump-attention", parents=[common], help="Write one example's attention weights")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--id", required=True, help="Question id")
    p.add_argument("--out", required=True, help="Attention JSON")
    p.set_defaults(handler=cmd_dump_attention)

    p = sub.add_parser("generate-synthetic", parents=[common], help="Write a synthetic corpus")
    p.add_argument("--out", required=True, help=".jsonl output")
    p.add_argument("--count", type=int, default=2000)
    p.add_argument("--seed", type=int, default=config.SEED)
    p.add_argument("--hard", action="store_true", help="Distractor cues and 30%% unanswerable")
    p.set_defaults(handler=cmd_generate_synthetic)

    p = sub.add_parser("ablate", parents=[common], help="Reader vs. baseline over seeds")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="Output directory")
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    _add_model_flags(p)
    p.set_defaults(handler=cmd_ablate)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    args = build_parser().parse_args(argv)
    configure_logging(args.debug)
    print_banner()

    try:
        return args.handler(args)
    except DivergenceError as e:
        logger.error(f"🚨 {e}")
        return 2
    except (ReaderError, OSError) as e:
        logger.error(f"❌ {e}")
        return 1
    except KeyboardInterrupt:
        logger.info("🛑 Stopped by user")
        return 1
    except Exception as e:
        logger.exception(f"Fatal error: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
