"""Command-line entry points: train, eval, difficulty, synth, dump-features."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .data import SynthSpec, dump_features, load_dataset, save_dataset, synthesize
from .errors import ConfigError, ErnetclError
from .model import ModelConfig, load_checkpoint, save_checkpoint
from .train import Flags, evaluate, train

SEED_ENV = "ERNETCL_SEED"


def _config(path: str) -> ModelConfig:
    cfg = ModelConfig.load(path)
    if os.environ.get(SEED_ENV):
        try:
            cfg = cfg.replace(seed=int(os.environ[SEED_ENV]))
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {os.environ[SEED_ENV]!r}") from exc
    return cfg


def cmd_train(args) -> int:
    cfg = _config(args.config)
    train_ds = load_dataset(args.train)
    val_ds = load_dataset(args.val, num_classes=None)
    result = train(cfg, train_ds, val_ds, Flags(args.no_te, args.no_se, args.no_cl))
    save_checkpoint(args.out, result.config, result.params)
    if args.history:
        h = result.history
        rows = ["epoch\ttrain_loss\tval_loss\tval_weighted_f1\tval_micro_f1\tmean_weight\tseconds"]
        for i in range(len(h)):
            rows.append(
                f"{i + 1}\t{h.train_loss[i]!r}\t{h.val_loss[i]!r}\t{h.val_weighted_f1[i]!r}\t"
                f"{h.val_micro_f1[i]!r}\t{h.mean_weight[i]!r}\t{h.epoch_seconds[i]:.3f}"
            )
        Path(args.history).write_text("\n".join(rows) + "\n")
    report = evaluate(result.params, val_ds, result.config.batch_size)
    print(f"best_epoch={result.best_epoch}")
    print(report.render(), end="")
    return 0


def cmd_eval(args) -> int:
    cfg, params = load_checkpoint(args.ckpt)
    ds = load_dataset(args.data, labels_path=args.labels)
    print(evaluate(params, ds, cfg.batch_size).render(), end="")
    return 0


def cmd_difficulty(args) -> int:
    ds = load_dataset(args.data)
    for conv in ds.conversations:
        print(f"{conv.id}\t{conv.difficulty:.6f}")
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec.from_text(Path(args.spec).read_text())
    ds = synthesize(spec, np.random.default_rng(args.seed))
    save_dataset(ds, args.out)
    print(f"wrote {len(ds)} conversations ({ds.num_utterances} utterances) to {args.out}")
    return 0


def cmd_dump(args) -> int:
    cfg, params = load_checkpoint(args.ckpt)
    ds = load_dataset(args.data)
    n = dump_features(params, ds, args.out, cfg.batch_size)
    print(f"wrote {n} records to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ernetcl", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log every epoch")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write the best checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--no-te", action="store_true", help="drop the temporal encoder")
    p.add_argument("--no-se", action="store_true", help="drop the spatial encoder")
    p.add_argument("--no-cl", action="store_true", help="plain cross-entropy instead of curriculum weights")
    p.add_argument("--out", required=True)
    p.add_argument("--history", help="optional TSV of per-epoch statistics")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a dataset")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--labels", help="label map; defaults to the <data>.labels sidecar")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("difficulty", help="print per-conversation difficulty")
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_difficulty)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("dump-features", help="write encoder outputs per utterance")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dump)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ErnetclError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
