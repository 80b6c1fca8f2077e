"""Command-line interface.

Every subcommand takes ``--config <path>`` (flat ``key = value`` text with
``#`` comments), repeatable ``--set key=value`` overrides, and ``--seed``
which overrides the config seed. Exit codes: 0 success, 2 configuration
error, 3 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import MODES, load_config
from .errors import ConfigError, ContractError, DomainError, FormatError
from .harness import (ablate, ablation_csv, evaluate, export_attention,
                      train_student, train_teacher)
from .synthdata import gen_corpus, load_corpus, save_corpus


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="path to a key = value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config entry (repeatable)")
    p.add_argument("--seed", type=int, help="override the master seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="libs-kd",
                                     description="cross-modal distillation workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate the synthetic paired corpus")
    _add_common(p)

    p = sub.add_parser("train-teacher", help="train the audio-side recognizer")
    _add_common(p)
    p.add_argument("--resume", help="resume from a .last checkpoint")

    p = sub.add_parser("train-student", help="train the video-side recognizer")
    _add_common(p)
    p.add_argument("--mode", choices=MODES, default="full")
    p.add_argument("--teacher", help="teacher checkpoint (required unless baseline)")
    p.add_argument("--resume", help="resume from a .last checkpoint")
    p.add_argument("--out-name", help="checkpoint base name")

    p = sub.add_parser("eval", help="evaluate a checkpoint on a corpus split")
    _add_common(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--beam-width", type=int, help="override config beam width")
    p.add_argument("--tag", default="eval", help="report file name prefix")

    p = sub.add_parser("ablate", help="train and evaluate all six modes")
    _add_common(p)
    p.add_argument("--teacher", required=True)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")

    p = sub.add_parser("export-attention", help="dump attention matrices as CSV")
    _add_common(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--sample-id", type=int, required=True)
    p.add_argument("--teacher", help="teacher checkpoint, enables the alignment matrix")
    p.add_argument("--out", help="output directory (default: report dir)")
    return parser


def _run(args: argparse.Namespace) -> int:
    run = load_config(args.config, args.set, args.seed)
    cfg = run.train

    if args.command == "gen-data":
        corpus = gen_corpus(run.gen)
        save_corpus(corpus, cfg.corpus_dir)
        print(f"wrote {len(corpus.train)}/{len(corpus.val)}/{len(corpus.test)} "
              f"samples to {cfg.corpus_dir}")
        return 0

    corpus = load_corpus(cfg.corpus_dir)

    if args.command == "train-teacher":
        result = train_teacher(run, corpus, resume_from=args.resume, log=print)
        print(f"best val CER {result.best_val_cer:.4f} -> {result.best_path}")
        return 0

    if args.command == "train-student":
        if args.mode != "baseline" and not args.teacher:
            raise ConfigError(f"mode {args.mode!r} requires --teacher")
        result = train_student(run, corpus, args.teacher, args.mode,
                               resume_from=args.resume, out_name=args.out_name,
                               log=print)
        print(f"best val CER {result.best_val_cer:.4f} -> {result.best_path}")
        return 0

    if args.command == "eval":
        width = args.beam_width if args.beam_width is not None else cfg.beam_width
        report = evaluate(args.ckpt, corpus, args.split, width, cfg.max_decode_len,
                          report_dir=cfg.report_dir, tag=args.tag)
        print(report.summary(), end="")
        return 0

    if args.command == "ablate":
        table = ablate(run, corpus, args.teacher, split=args.split, log=print)
        text = ablation_csv(table)
        out = Path(cfg.report_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "ablation.csv").write_text(text)
        print(text, end="")
        return 0

    if args.command == "export-attention":
        out_dir = args.out or cfg.report_dir
        info = export_attention(args.ckpt, corpus, args.sample_id, out_dir,
                                cfg.max_decode_len, teacher_ckpt=args.teacher)
        print(f"decoder attention {info['alpha_shape']} -> {info['alpha_path']}")
        print(f"diagonal mass (+-2 tokens): {info['diagonal_mass']:.4f}")
        if "beta_path" in info:
            print(f"alignment matrix {info['beta_shape']} -> {info['beta_path']}")
        return 0

    raise ConfigError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except (ConfigError, DomainError, ContractError, LookupError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (FormatError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
