"""Main entry point for the ``am-ppo`` command."""

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any, get_origin

from am_ppo.core.errors import ConfigurationError

from .schemas import RunConfig
from .services import (
    EXIT_CONFIG,
    RunService,
    build_run_config,
    load_config_file,
)

logger = logging.getLogger(__name__)

ALGO_ALIASES = {"ppo": "ppo", "am-ppo": "am_ppo", "am_ppo": "am_ppo"}


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(
            f"expected comma separated integers, got {text!r}"
        ) from e


def _parse_positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from e
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _add_run_config_flags(parser: argparse.ArgumentParser) -> None:
    """One ``--field-name`` flag per ``RunConfig`` field, defaulting to unset."""
    for name, field in RunConfig.model_fields.items():
        flags = [f"--{name.replace('_', '-')}"]
        kwargs: dict[str, Any] = {"dest": name, "default": None}
        annotation = field.annotation
        if name == "out_dir":
            flags.append("--out")
        if name == "algo":
            kwargs["choices"] = sorted(ALGO_ALIASES)
        elif annotation is bool:
            kwargs["type"] = _parse_bool
        elif annotation is int:
            kwargs["type"] = int
        elif annotation is float:
            kwargs["type"] = float
        elif get_origin(annotation) is tuple:
            kwargs["type"] = _parse_int_list
        description = field.description or f"override '{name}'"
        kwargs["help"] = f"{description} (default: {field.default})"
        parser.add_argument(*flags, **kwargs)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="am-ppo",
        description="PPO with alpha-modulated advantages on point-mass tasks",
    )
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level (default: INFO)",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train", help="Train a policy")
    train.add_argument("--config", type=str, default=None, help="YAML run config")
    train.add_argument(
        "--resume",
        type=str,
        default=None,
        help="Checkpoint to continue from; only --total-timesteps, --out and "
        "--stop-after-iterations apply",
    )
    train.add_argument(
        "--stop-after-iterations",
        type=_parse_positive_int,
        default=None,
        help="Checkpoint and stop after this many iterations; the learning-rate "
        "schedule still spans --total-timesteps",
    )
    _add_run_config_flags(train)

    evaluate = commands.add_parser("eval", help="Evaluate a checkpoint")
    evaluate.add_argument("--checkpoint", type=str, required=True)
    evaluate.add_argument("--episodes", type=int, default=10)
    evaluate.add_argument("--seed", type=int, default=0)
    evaluate.add_argument(
        "--out",
        type=str,
        default=None,
        help="Directory for eval.json (default: the checkpoint's directory)",
    )

    replay = commands.add_parser(
        "replay-controller", help="Replay an advantage trace through the controller"
    )
    replay.add_argument("--trace", type=str, required=True, help="CSV iteration,value")
    replay.add_argument("--config", type=str, default=None, help="YAML run config")
    replay.add_argument("--out", type=str, default=".", help="Output directory")

    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge the config file (if any) with the flags that were given."""
    values = load_config_file(args.config) if args.config else {}
    overrides = {
        name: getattr(args, name)
        for name in RunConfig.model_fields
        if getattr(args, name, None) is not None
    }
    if "algo" in overrides:
        overrides["algo"] = ALGO_ALIASES[overrides["algo"]]
    return build_run_config(values, overrides)


RESUME_FLAGS = ("total_timesteps", "out_dir")


def _check_resume_flags(args: argparse.Namespace) -> None:
    """Reject settings a resumed run would silently ignore.

    Raises:
        ConfigurationError: Naming the first flag other than ``RESUME_FLAGS``.
    """
    if args.config:
        raise ConfigurationError(
            "--config cannot be combined with --resume; the checkpoint holds the "
            "run config",
            field="config",
        )
    for name in RunConfig.model_fields:
        if name not in RESUME_FLAGS and getattr(args, name, None) is not None:
            raise ConfigurationError(
                f"--{name.replace('_', '-')} cannot be combined with --resume; only "
                f"--total-timesteps and --out apply",
                field=name,
            )


def _train(args: argparse.Namespace) -> dict[str, Any]:
    if args.resume:
        _check_resume_flags(args)
        out_dir = args.out_dir or Path(args.resume).parent
        return RunService(out_dir).resume(
            args.resume, args.total_timesteps, args.stop_after_iterations
        )
    config = resolve_config(args)
    return RunService(config.out_dir).train(config, args.stop_after_iterations)


def _evaluate(args: argparse.Namespace) -> dict[str, Any]:
    out_dir = Path(args.out) if args.out else Path(args.checkpoint).parent
    result = RunService(out_dir).evaluate(args.checkpoint, args.episodes, args.seed)
    if result["status"] == "success":
        summary = result["summary"]
        sys.stdout.write(
            json.dumps(
                {
                    "mean_return": summary["mean_return"],
                    "std_return": summary["std_return"],
                    "episodes": summary["episodes"],
                }
            )
            + "\n"
        )
    return result


def _replay(args: argparse.Namespace) -> dict[str, Any]:
    values = load_config_file(args.config) if args.config else {}
    config = build_run_config(values)
    return RunService(args.out).replay(args.trace, config)


COMMANDS = {"train": _train, "eval": _evaluate, "replay-controller": _replay}


def main(argv: Sequence[str] | None = None) -> int:
    """Run one sub-command and return its exit code."""
    args = build_parser().parse_args(argv)

    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )

    try:
        result = COMMANDS[args.command](args)
    except ConfigurationError as e:
        field = f" (field: {e.field})" if e.field else ""
        logger.error(f"{e}{field}")
        return EXIT_CONFIG

    if result["status"] != "success":
        return result["exit_code"]
    logger.info(result.get("message", "done"))
    return result["exit_code"]


if __name__ == "__main__":
    sys.exit(main())
