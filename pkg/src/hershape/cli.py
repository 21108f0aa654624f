"""Command line: ``train``, ``eval``, ``decompose`` and ``plot``.

Exit status 0 on success, 1 for usage or configuration errors, 2 for I/O and
other runtime errors, 3 when training diverges.
"""

from __future__ import annotations

import argparse
import logging
import sys

from hershape.config import ConfigError, load_config
from hershape.envs import ENV_NAMES
from hershape.geometry import CONVENTIONS, UnitQuaternion, decompose
from hershape.neuralnet import CheckpointError, DivergenceError

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_DIVERGED = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hershape", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train an agent from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=_u64)
    p.add_argument("--out")

    p = sub.add_parser("eval", help="evaluate a checkpoint greedily")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--env", required=True, choices=ENV_NAMES)
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--seed", type=_u64, default=0)

    p = sub.add_parser("decompose", help="split a quaternion into proper Euler angles")
    p.add_argument("--quat", type=float, nargs=4, required=True, metavar=("W", "X", "Y", "Z"))
    p.add_argument("--convention", choices=CONVENTIONS, default="zxz")

    p = sub.add_parser("plot", help="draw success-rate curves from metrics files")
    p.add_argument("--out", required=True)
    p.add_argument("metrics", nargs="+")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "decompose":
            try:
                q = UnitQuaternion(*args.quat)
            except ValueError as exc:
                print(f"hershape: {exc}", file=sys.stderr)
                return EXIT_USAGE
            e = decompose(q, args.convention)
            for v in (e.alpha, e.beta, e.gamma):
                print(format(v, ".17g"))
            return EXIT_OK

        if args.command == "train":
            from hershape.training import run_training

            try:
                config = load_config(args.config)
            except ConfigError as exc:
                print(f"hershape: {args.config}: {exc}", file=sys.stderr)
                return EXIT_USAGE
            ckpt, metrics = run_training(config, seed=args.seed, out_dir=args.out)
            print(ckpt)
            print(metrics)
            return EXIT_OK

        if args.command == "eval":
            from hershape.training import evaluate

            if args.episodes < 1:
                print("hershape: --episodes must be >= 1", file=sys.stderr)
                return EXIT_USAGE
            rate, ret = evaluate(args.checkpoint, args.env, args.episodes, args.seed)
            print(f"success_rate {format(rate, '.17g')}")
            print(f"mean_return {format(ret, '.17g')}")
            return EXIT_OK

        if args.command == "plot":
            from hershape.plot import emit_plot

            print(emit_plot(args.metrics, args.out))
            return EXIT_OK
    except DivergenceError as exc:
        print(f"hershape: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (OSError, CheckpointError, ValueError) as exc:
        print(f"hershape: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
