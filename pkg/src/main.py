"""
Command-line entry point: ``python -m src.main <command>``.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from .checkpoint import load_checkpoint, save_checkpoint
from .config import format_config, parse_config
from .data import generate_dataset, read_dataset, write_dataset
from .errors import ConfigError, ContourRendError
from .evaluation import evaluate
from .inference import infer
from .training import run_ablation, train
from .verification import gradcheck_command, tiny_config

logger = logging.getLogger(__name__)

# flag dest -> config key
CONFIG_FLAGS = {
    "lr": "lr",
    "epochs": "epochs",
    "k_vertices": "k_vertices",
    "grid_n": "grid_n",
    "square_s": "square_s",
    "threshold": "threshold",
    "seed": "seed",
    "image_size": "image_size",
    "train_size": "train_size",
    "val_size": "val_size",
    "test_size": "test_size",
}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("configuration")
    group.add_argument("--config", type=Path, help="key = value config file")
    group.add_argument("--lr", type=float)
    group.add_argument("--epochs", type=int)
    group.add_argument("--k-vertices", type=int)
    group.add_argument("--grid-n", type=int, help="test grid side N")
    group.add_argument("--square-s", type=float, help="test grid square size s")
    group.add_argument("--threshold", type=float, help="foreground probability threshold")
    group.add_argument("--seed", type=int)
    group.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key (repeatable)"
    )


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("--quiet", action="store_true", help="no progress bars")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="contourrend", description="Contour generator + renderer segmentation.")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen-data", help="generate the synthetic dataset")
    gen.add_argument("--out-dir", type=Path, required=True)
    gen.add_argument("--image-size", type=int)
    gen.add_argument("--train-size", type=int)
    gen.add_argument("--val-size", type=int)
    gen.add_argument("--test-size", type=int)
    _add_config_flags(gen)

    trainer = commands.add_parser("train", help="train a model")
    trainer.add_argument("--data", type=Path, required=True)
    trainer.add_argument("--out-dir", type=Path, required=True)
    _add_config_flags(trainer)

    evaluator = commands.add_parser("eval", help="per-category IoU of a checkpoint")
    evaluator.add_argument("--checkpoint", type=Path, required=True)
    evaluator.add_argument("--data", type=Path, required=True)
    evaluator.add_argument("--split", default="test", choices=("train", "val", "test"))
    evaluator.add_argument("--out-dir", type=Path)
    evaluator.add_argument("--oracle", action="store_true", help="score ground-truth contours")
    evaluator.add_argument("--workers", type=int, help="evaluation threads")

    inferer = commands.add_parser("infer", help="segment one PPM image")
    inferer.add_argument("--checkpoint", type=Path, required=True)
    inferer.add_argument("--image", type=Path, required=True)
    inferer.add_argument("--out-dir", type=Path, required=True)

    checker = commands.add_parser("gradcheck", help="finite-difference check of the full loss on a tiny model")
    checker.add_argument("--max-entries", type=int, default=6, help="entries checked per parameter")
    _add_config_flags(checker)

    ablation = commands.add_parser("ablation", help="train with and without the renderer loss and compare")
    ablation.add_argument("--data", type=Path, required=True)
    ablation.add_argument("--out-dir", type=Path, required=True)
    ablation.add_argument("--split", default="test", choices=("train", "val", "test"))
    _add_config_flags(ablation)

    for sub in commands.choices.values():
        _add_common_flags(sub)
    return parser


def collect_overrides(args: argparse.Namespace) -> Dict[str, object]:
    overrides: Dict[str, object] = {}
    for dest, key in CONFIG_FLAGS.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides[key] = value
    for item in getattr(args, "set", []):
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value.strip()
    return overrides


def _gen_data(args, progress: bool) -> int:
    config = parse_config(args.config, collect_overrides(args))
    dataset = generate_dataset(
        config.seed, config.generator.image_size, config.train_size, config.val_size, config.test_size, progress
    )
    write_dataset(dataset, args.out_dir)
    return 0


def _train(args, progress: bool) -> int:
    config = parse_config(args.config, collect_overrides(args))
    dataset = read_dataset(args.data)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    (args.out_dir / "config.txt").write_text(format_config(config))
    result = train(config, dataset, progress)
    save_checkpoint(result.checkpoint, args.out_dir / "checkpoint.crnd")
    result.metrics.to_csv(args.out_dir / "metrics.csv", index=False)
    return 0


def _eval(args, progress: bool) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    samples = read_dataset(args.data).split(args.split)
    workers = args.workers or checkpoint.config.eval_workers
    report = evaluate(checkpoint.model(), samples, oracle=args.oracle, workers=workers, progress=progress)
    if args.out_dir is not None:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        report.to_csv(args.out_dir / "eval.csv")
    print(report.format())
    return 0


def _infer(args, progress: bool) -> int:
    artifacts = infer(load_checkpoint(args.checkpoint), args.image, args.out_dir)
    for path in artifacts:
        print(path)
    return 0


def _gradcheck(args, progress: bool) -> int:
    return gradcheck_command(tiny_config(args.config, collect_overrides(args)), args.max_entries)


def _ablation(args, progress: bool) -> int:
    config = parse_config(args.config, collect_overrides(args))
    table, _ = run_ablation(config, read_dataset(args.data), args.split, progress)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    table.to_csv(args.out_dir / "ablation.csv", float_format="%.6f")
    print(table.to_string(float_format=lambda value: f"{100.0 * value:6.2f}"))
    return 0


COMMANDS = {
    "gen-data": _gen_data,
    "train": _train,
    "eval": _eval,
    "infer": _infer,
    "gradcheck": _gradcheck,
    "ablation": _ablation,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    progress = not args.quiet and sys.stderr.isatty()
    try:
        return COMMANDS[args.command](args, progress)
    except ContourRendError as exc:
        logger.error("%s failed: %s", args.command, exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
