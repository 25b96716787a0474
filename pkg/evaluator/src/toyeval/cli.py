"""Command line: serve the evaluation protocol with chosen training knobs."""

from __future__ import annotations

import argparse
import logging
import sys

from .server import serve
from .train import ToyTrainConfig


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="toyeval",
        description=(
            "Reference fitness evaluator: reads descriptor requests as JSON"
            " lines on stdin, trains a small CNN per request, writes fitness"
            " responses to stdout."
        ),
    )
    parser.add_argument("--epochs", type=int, default=4)
    parser.add_argument("--train-size", type=int, default=4000)
    parser.add_argument("--val-size", type=int, default=1000)
    parser.add_argument("--batch-size", type=int, default=128)
    parser.add_argument("--filter-scale", type=float, default=0.25)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--data-seed", type=int, default=1234)
    parser.add_argument(
        "--data",
        default=None,
        help="optional CIFAR-10 python archive (directory or .tar.gz);"
        " without it a deterministic synthetic set is used",
    )
    parser.add_argument("--no-augment", action="store_true")
    parser.add_argument("--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    config = ToyTrainConfig(
        train_size=args.train_size,
        val_size=args.val_size,
        epochs=args.epochs,
        batch_size=args.batch_size,
        filter_scale=args.filter_scale,
        seed=args.seed,
        data_seed=args.data_seed,
        data_path=args.data,
        augment=not args.no_augment,
    )
    serve(config)
    return 0


if __name__ == "__main__":
    sys.exit(main())
