"""
Subcommand handlers.

Every handler receives the parsed arguments, writes its outputs under one
run directory and returns the process exit code. Errors propagate to the
entry point, which maps them onto exit codes.
"""

import argparse
import logging
from pathlib import Path
from typing import Callable

from src.config.experiment import ExperimentConfig, parse_config
from src.config.settings import settings
from src.core.errors import ConfigError
from src.core.episode import EpisodeLog
from src.services.baselines import sweep_opposition_gain, train_global
from src.services.checks import run_checks
from src.services.controllers import ConvolutionalController
from src.services.ddpg import DdpgAgent, PolicyCheckpoint, load_checkpoint
from src.services.storage import RunStore
from src.services.trainer import check_transfer, evaluate, train, transfer

logger = logging.getLogger(__name__)

Handler = Callable[[argparse.Namespace], int]


def _experiment(args: argparse.Namespace) -> ExperimentConfig:
    """Parses --config; the seed comes from --seed, then [training] seed, then CONVRL_DEFAULT_SEED."""
    config = parse_config(args.config)
    if args.seed is not None:
        seed = args.seed
    elif "seed" in config.training.model_fields_set:
        seed = config.training.seed
    else:
        seed = settings.default_seed
    if seed < 0:
        raise ConfigError(f"seed must be non-negative, got {seed}", None, config.source)
    return config.with_seed(seed)


def _run_name(config: ExperimentConfig) -> str:
    source = config.source.removeprefix("preset:")
    return Path(source).name.removesuffix(".cfg")


def _open_store(args: argparse.Namespace, config: ExperimentConfig) -> RunStore:
    """Resolves the run directory, clears earlier outputs and writes the manifest."""
    if args.out is not None:
        root = Path(args.out)
    elif config.output.run_dir is not None:
        root = Path(config.output.run_dir)
    else:
        root = Path(settings.runs_root) / f"{args.command}-{_run_name(config)}-s{config.training.seed}"
    store = RunStore(root)
    store.reset()
    store.write_manifest(args.command, config.training.seed, config.echo())
    return store


def _load_policy(args: argparse.Namespace) -> PolicyCheckpoint:
    return load_checkpoint(Path(args.policy))


def _write_logs(store: RunStore, logs: list[EpisodeLog], label: str) -> None:
    with store.curve_writer() as write:
        for log in logs:
            for record in log.records:
                write(record)
    for log in logs:
        store.append_eval(log.episode, log.total_return(), log.final_mse())
        store.save_snapshots(log, f"{label}{log.episode}")


def train_command(args: argparse.Namespace) -> int:
    config = _experiment(args)
    store = _open_store(args, config)
    result = train(config.train_config(), store)
    logger.info(
        "Training finished after %d episodes; best eval return %.4g", result.episodes_run, result.best_return
    )
    print(f"{store.root}: {result.episodes_run} episodes, best eval return {result.best_return:.6g}")
    return 0


def eval_command(args: argparse.Namespace) -> int:
    config = _experiment(args)
    checkpoint = _load_policy(args)
    train_config = config.train_config()
    check_transfer(checkpoint, train_config)
    store = _open_store(args, config)
    controller = ConvolutionalController(DdpgAgent.from_checkpoint(checkpoint))
    summary = evaluate(train_config, controller)
    _write_logs(store, summary.logs, "eval")
    print(f"{store.root}: mean return {summary.mean_return:.6g}, final mse {summary.final_mse:.6g}")
    return 0


def transfer_command(args: argparse.Namespace) -> int:
    config = _experiment(args)
    checkpoint = _load_policy(args)
    store = _open_store(args, config)
    log = transfer(checkpoint, config.train_config())
    _write_logs(store, [log], "transfer")
    print(f"{store.root}: return {log.total_return():.6g}, final mse {log.final_mse():.6g}")
    return 0


def baseline_command(args: argparse.Namespace) -> int:
    config = _experiment(args)
    store = _open_store(args, config)
    if args.kind == "opposition":
        results = sweep_opposition_gain(config.train_config(), store=store)
        best = max(results, key=lambda r: r.mean_return)
        print(f"{store.root}: best opposition gain {best.gain:g}, return {best.mean_return:.6g}")
    else:
        result = train_global(config.train_config(), store)
        print(f"{store.root}: global agent, best eval return {result.best_return:.6g}")
    return 0


def check_command(args: argparse.Namespace) -> int:
    results = run_checks(args.tolerance_scale)
    width = max(len(r.name) for r in results)
    for result in results:
        status = "ok" if result.passed else "FAILED"
        print(f"{result.name.ljust(width)}  {result.error:.3e} <= {result.tolerance:.1e}  {status}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.error("%d of %d checks failed: %s", len(failed), len(results), ", ".join(failed))
        return 1
    return 0


HANDLERS: dict[str, Handler] = {
    "train": train_command,
    "eval": eval_command,
    "transfer": transfer_command,
    "baseline": baseline_command,
    "check": check_command,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conv-rl", description="Convolutional multi-agent reinforcement learning for PDE control."
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="config file or preset name (e.g. ks-L22)")
    common.add_argument("--seed", type=int, default=None, help="global seed (overrides [training] seed)")
    common.add_argument("--out", default=None, help="run directory")

    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("train", parents=[common], help="train the convolutional agent")
    for name, text in (("eval", "evaluate a policy"), ("transfer", "apply a policy to another domain")):
        command = commands.add_parser(name, parents=[common], help=text)
        command.add_argument("--policy", required=True, help="policy checkpoint file")
    baseline = commands.add_parser("baseline", parents=[common], help="run a reference controller")
    baseline.add_argument("--kind", choices=("opposition", "global"), default="opposition")
    check = commands.add_parser("check", help="run the deterministic property suite")
    check.add_argument("--tolerance-scale", type=float, default=None, help="multiplies every tolerance")
    return parser


def dispatch(args: argparse.Namespace) -> int:
    return HANDLERS[args.command](args)
