"""
Command-line entry point.

    roads toy-gen  --out runs/toy
    roads train    --preset roads-3 --out runs/roads-3
    roads eval     --checkpoint runs/roads-3/checkpoint --corruption all --out runs/roads-3/eval
    roads corrupt  --source data/mvtec --kind gaussian_noise --severity 3 --out data/mvtec_noise
    roads report   runs/roads-0/eval runs/roads-3/eval --out runs/report

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical abort.
"""

import argparse
import json
import logging
import os
import sys

from config.corruptions import CORRUPTION_KINDS
from config.presets import get_preset_names
from data.corruptions import CorruptionSpec, corrupt_dataset
from data.mvtec_loader import export_dataset, load_dataset
from data.toy_generator import ToySpec, generate_toy_dataset
from utils.checkpoint import save_checkpoint
from utils.config_loader import resolve_config, write_resolved_config
from utils.evaluator import evaluate
from utils.exceptions import ConfigError, RoadsError
from utils.report import collect_summaries, write_report
from utils.trainer import RoadsTrainer
from visualizations.charts import create_class_metric_chart, create_training_curve_chart, save_figure

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger("RoadsCLI")

CORRUPTION_CHOICES = ["none", "all"] + CORRUPTION_KINDS


def load_index(config):
    """
    Dataset of a run: MVTec-layout directory when data.root is set, otherwise
    the in-memory toy dataset.

    Args:
        config (dict): Resolved configuration

    Returns:
        DatasetIndex: Validated index
    """
    root = config["data"]["root"]
    if root:
        index = load_dataset(root, config["data"]["layout"])
    else:
        index = generate_toy_dataset(ToySpec(**config["toy"]))
    index.validate(check_masks=False)
    return index


def cmd_toy_gen(config):
    """Write the toy dataset in MVTec layout under <out>/dataset."""
    out = config["out"]
    write_resolved_config(config, out)
    index = generate_toy_dataset(ToySpec(**config["toy"]))
    root = export_dataset(index, os.path.join(out, "dataset"))
    index.to_frame().to_csv(os.path.join(out, "index.csv"), index=False)
    return str(root)


def cmd_train(config):
    """Train a model; writes checkpoint/, train_log.jsonl, history.csv and a loss chart."""
    out = config["out"]
    write_resolved_config(config, out)
    index = load_index(config)

    trainer = RoadsTrainer(config, index, out_dir=out)
    trainer.pretrain_teacher()
    style_before = trainer.style_shift()
    history = trainer.fit()
    style_after = trainer.style_shift()

    history.to_csv(os.path.join(out, "history.csv"), index=False)
    save_figure(create_training_curve_chart(history), os.path.join(out, "training_curve"))
    with open(os.path.join(out, "style_shift.json"), "w") as f:
        json.dump({"before": style_before, "after": style_after}, f, indent=2)
    if style_before is not None:
        logger.info(f"Style consistency loss on held-out pairs: {style_before:.4f} -> {style_after:.4f}")

    return save_checkpoint(trainer.model, os.path.join(out, "checkpoint"), index.classes, config, trainer.weights)


def _conditions(eval_config):
    corruption = eval_config["corruption"]
    if corruption in (None, "none"):
        return [None]
    kinds = CORRUPTION_KINDS if corruption == "all" else [corruption]
    try:
        specs = [CorruptionSpec(kind, eval_config["severity"], eval_config["corruption_seed"]) for kind in kinds]
    except ValueError as e:
        raise ConfigError(str(e)) from e
    return ([None] if corruption == "all" else []) + specs


def cmd_eval(config):
    """Evaluate a checkpoint under each requested condition; one report directory per condition."""
    eval_config = config["eval"]
    checkpoint = eval_config["checkpoint"]
    if not checkpoint:
        raise ConfigError("eval needs a checkpoint (--checkpoint or eval.checkpoint)")
    out = config["out"]
    write_resolved_config(config, out)
    index = load_index(config)

    reports = []
    for corruption in _conditions(eval_config):
        tag = corruption.tag if corruption is not None else "id"
        condition_dir = os.path.join(out, tag)
        heatmap_dir = os.path.join(condition_dir, "heatmaps") if eval_config["heatmaps"] else None
        report = evaluate(
            checkpoint,
            index,
            corruption=corruption,
            eval_config=eval_config,
            heatmap_dir=heatmap_dir,
            corrupt_before_resize=config["data"]["corrupt_before_resize"],
        )
        report.write(condition_dir)
        save_figure(create_class_metric_chart(report.per_class, report.condition),
                    os.path.join(condition_dir, "per_class"))
        reports.append(report)
    return reports


def cmd_corrupt(config):
    """Copy a dataset with corrupted test images (one copy per kind with --kind all)."""
    corrupt_config = config["corrupt"]
    source = corrupt_config["source"]
    if not source:
        raise ConfigError("corrupt needs a source dataset (--source or corrupt.source)")
    kind = corrupt_config["kind"]
    if not kind:
        raise ConfigError("corrupt needs a corruption kind (--kind or corrupt.kind)")
    out = config["out"]
    write_resolved_config(config, out)

    kinds = CORRUPTION_KINDS if kind == "all" else [kind]
    targets = []
    for name in kinds:
        try:
            spec = CorruptionSpec(name, corrupt_config["severity"], corrupt_config["seed"])
        except ValueError as e:
            raise ConfigError(str(e)) from e
        target = os.path.join(out, spec.tag) if len(kinds) > 1 else os.path.join(out, "dataset")
        corrupt_dataset(source, target, spec, max_workers=corrupt_config["max_workers"])
        targets.append(target)
    return targets


def cmd_report(config):
    """Aggregate evaluation summaries into report.csv/xlsx and comparison charts."""
    inputs = config["report"]["inputs"]
    if not inputs:
        raise ConfigError("report needs at least one evaluation directory")
    out = config["out"]
    write_resolved_config(config, out)
    df = collect_summaries(inputs)
    return write_report(df, out)


COMMANDS = {
    "toy-gen": cmd_toy_gen,
    "train": cmd_train,
    "eval": cmd_eval,
    "corrupt": cmd_corrupt,
    "report": cmd_report,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="roads", description="Multi-class anomaly detection under domain shift")
    subparsers = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--preset", choices=get_preset_names(), help="Ablation preset")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="Override a config key, e.g. --set train.epochs=5")
    common.add_argument("--seed", type=int, help="Global seed")
    common.add_argument("--out", help="Output directory")

    subparsers.add_parser("toy-gen", parents=[common], help="Write the toy dataset to disk")
    subparsers.add_parser("train", parents=[common], help="Train a model")

    eval_parser = subparsers.add_parser("eval", parents=[common], help="Evaluate a checkpoint")
    eval_parser.add_argument("--checkpoint", help="Checkpoint directory")
    eval_parser.add_argument("--corruption", choices=CORRUPTION_CHOICES, help="Test-time corruption")
    eval_parser.add_argument("--severity", type=int, help="Corruption severity 1..5")
    eval_parser.add_argument("--heatmaps", action="store_true", help="Write per-image heatmaps")

    corrupt_parser = subparsers.add_parser("corrupt", parents=[common], help="Write a corrupted dataset copy")
    corrupt_parser.add_argument("--source", help="Dataset root to copy")
    corrupt_parser.add_argument("--kind", choices=["all"] + CORRUPTION_KINDS, help="Corruption kind")
    corrupt_parser.add_argument("--severity", type=int, help="Corruption severity 1..5")

    report_parser = subparsers.add_parser("report", parents=[common], help="Compare evaluation results")
    report_parser.add_argument("inputs", nargs="*", help="Evaluation directories or summary.json files")

    return parser


def flags_to_config(args):
    """
    Nested config overrides from the dedicated flags.

    Args:
        args (Namespace): Parsed arguments

    Returns:
        dict: Overrides (flags that were not given are absent)
    """
    flags = {}
    if args.seed is not None:
        flags["seed"] = args.seed
    if args.out:
        flags["out"] = args.out

    if args.command == "eval":
        section = {}
        if args.checkpoint:
            section["checkpoint"] = args.checkpoint
        if args.corruption:
            section["corruption"] = args.corruption
        if args.severity is not None:
            if args.corruption in (None, "none"):
                raise ConfigError("--severity has no effect without --corruption")
            section["severity"] = args.severity
        if args.heatmaps:
            section["heatmaps"] = True
        if section:
            flags["eval"] = section
    elif args.command == "corrupt":
        section = {}
        if args.source:
            section["source"] = args.source
        if args.kind:
            section["kind"] = args.kind
        if args.severity is not None:
            section["severity"] = args.severity
        if section:
            flags["corrupt"] = section
    elif args.command == "report" and args.inputs:
        flags["report"] = {"inputs": args.inputs}
    return flags


def main(argv=None):
    """
    Run one command.

    Args:
        argv (list, optional): Arguments without the program name

    Returns:
        int: Process exit code
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args.config, args.preset, args.overrides, flags_to_config(args))
        COMMANDS[args.command](config)
        logger.info(f"'{args.command}' finished")
        return 0
    except RoadsError as e:
        logger.error(f"'{args.command}' failed: {str(e)}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
