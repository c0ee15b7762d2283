"""Kommandozeile: Daten erzeugen, trainieren, übersetzen, evaluieren."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Optional, Sequence

from config.settings import (
    DEFAULT_DURATION_POLICY,
    DURATION_POLICIES,
    EXIT_NUMERIC,
    EXIT_OK,
    EXIT_VALIDATION,
    INERTIA,
    RATES_HZ,
    TRAJECTORY,
)
from . import data
from .evaluation import EvalSplits, ablation_suite, paired_partners, run_evaluation
from .exceptions import AirWritingError, ConfigError, DatasetError
from .model import load_checkpoint, other_domain, save_checkpoint, translate_samples
from .numerics.gradcheck import run_gradient_suite
from .report_generator import ReportGenerator, write_svgs
from .run_config import RunConfig
from .synth import synth_generate
from .training import read_metrics, train
from .utils import setup_logging

logger = logging.getLogger(__name__)

DIRECTIONS = {"i2t": INERTIA, "t2i": TRAJECTORY}
CHECKPOINT_NAME = "checkpoint.joblib"
PREVIEW_LIMIT = 8
METRICS_NAME = "metrics.csv"


class _Parser(argparse.ArgumentParser):
    """Argumentfehler als :class:`ConfigError` (Exit-Code 1)."""

    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="airwriting", description="Air-Writing Translater")
    parser.add_argument("--verbose", action="store_true", help="DEBUG-Logging")
    parser.add_argument("--config", help="key=value Konfigurationsdatei")
    parser.add_argument("--seed", type=int, help="Seed für alle Zufallsquellen")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="Synthetische gepaarte Daten erzeugen")
    p.add_argument("--out-dir")
    p.add_argument("--seed", type=int, dest="cmd_seed")

    p = sub.add_parser("train", help="Translater trainieren")
    p.add_argument("--inertia")
    p.add_argument("--trajectory")
    p.add_argument("--out-dir")
    p.add_argument("--epochs", type=int)
    p.add_argument("--ablate", choices=("cls", "gan"))
    p.add_argument("--seed", type=int, dest="cmd_seed")

    p = sub.add_parser("translate", help="Proben in die andere Domäne übersetzen")
    p.add_argument("--checkpoint")
    p.add_argument("--input", required=True)
    p.add_argument("--direction", choices=sorted(DIRECTIONS), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--svg-dir")
    p.add_argument("--policy", choices=DURATION_POLICIES)
    p.add_argument("--target-rate", type=float, help="Abtastrate der Ausgabe in Hz")
    p.add_argument("--reference", help="Echte Daten der Zieldomäne (Rate, Vorschau)")
    p.add_argument("--pairs", help="Paarungsmanifest für die Vorschau")
    p.add_argument("--seed", type=int, dest="cmd_seed")

    p = sub.add_parser("eval", help="Checkpoint evaluieren")
    p.add_argument("--checkpoint")
    p.add_argument("--inertia")
    p.add_argument("--trajectory")
    p.add_argument("--pairs")
    p.add_argument("--report")
    p.add_argument("--no-two-stream", action="store_true")
    p.add_argument("--seed", type=int, dest="cmd_seed")

    p = sub.add_parser("ablate", help="Ablation: voll, ohne L_cls, ohne L_gan")
    p.add_argument("--inertia")
    p.add_argument("--trajectory")
    p.add_argument("--pairs")
    p.add_argument("--out-dir")
    p.add_argument("--epochs", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--seed", type=int, dest="cmd_seed")

    p = sub.add_parser("gradcheck", help="Gradientenprüfung des numerischen Kerns")
    p.add_argument("--seed", type=int, dest="cmd_seed")

    p = sub.add_parser("convert", help="CSV-Aufnahmen nach AWT-JSONL importieren")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--domain", choices=(INERTIA, TRAJECTORY), required=True)
    p.add_argument("--rate", type=float)
    p.add_argument("--out", required=True)
    return parser


def _load_config(args) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    seed = getattr(args, "cmd_seed", None)
    seed = seed if seed is not None else args.seed
    return config.with_seed(seed) if seed is not None else config


def _require(value: Optional[str], name: str) -> str:
    if not value:
        raise ConfigError(f"Pfad fehlt: --{name} oder paths.{name.replace('-', '_')}")
    return value


def _load_pair(config: RunConfig, args):
    inertia_path = _require(config.path("inertia", args.inertia), "inertia")
    trajectory_path = _require(config.path("trajectory", args.trajectory), "trajectory")
    dataset_i = data.load_dataset(inertia_path, INERTIA)
    dataset_t = data.load_dataset(trajectory_path, TRAJECTORY)
    data.check_class_maps(dataset_i, dataset_t)
    return dataset_i, dataset_t


def _splits(dataset_i, dataset_t, seed: int, stats=None) -> tuple:
    stats = stats or {}
    train_i, test_i, stats_i = data.prepare_split(dataset_i, seed, stats.get(INERTIA))
    train_t, test_t, stats_t = data.prepare_split(dataset_t, seed, stats.get(TRAJECTORY))
    return EvalSplits(train_i, test_i, train_t, test_t), {INERTIA: stats_i, TRAJECTORY: stats_t}


def cmd_gen_data(config: RunConfig, args) -> int:
    out_dir = _require(config.path("out_dir", args.out_dir), "out-dir")
    trajectories, inertials, manifest = synth_generate(config.synth)
    data.save_dataset(trajectories, os.path.join(out_dir, "trajectory.jsonl"))
    data.save_dataset(inertials, os.path.join(out_dir, "inertia.jsonl"))
    data.save_manifest(manifest, os.path.join(out_dir, "pairs.json"))
    logger.info(f"Daten geschrieben nach {out_dir}")
    return EXIT_OK


def cmd_train(config: RunConfig, args) -> int:
    out_dir = _require(config.path("out_dir", args.out_dir), "out-dir")
    train_config = config.train
    if args.epochs is not None:
        train_config.epochs = args.epochs
    if args.ablate == "cls":
        train_config.enable_cls = False
    elif args.ablate == "gan":
        train_config.enable_gan = False
    train_config.validate()

    dataset_i, dataset_t = _load_pair(config, args)
    splits, stats = _splits(dataset_i, dataset_t, config.seed)
    metrics_path = os.path.join(out_dir, METRICS_NAME)
    params, log = train(train_config, splits.train_i, splits.train_t, metrics_path)
    save_checkpoint(os.path.join(out_dir, CHECKPOINT_NAME), params, stats,
                    dataset_i.class_map, train_config.to_dict(),
                    {INERTIA: dataset_i.rate_hz, TRAJECTORY: dataset_t.rate_hz})
    ReportGenerator(out_dir).create_loss_plot(read_metrics(metrics_path))
    logger.info(f"Training beendet nach {len(log)} Iterationen")
    return EXIT_OK


def _checkpoint_path(config: RunConfig, override: Optional[str]) -> str:
    path = config.path("checkpoint", override)
    if path is None and config.paths.get("out_dir"):
        path = os.path.join(config.paths["out_dir"], CHECKPOINT_NAME)
    return _require(path, "checkpoint")


def _translation_policy(config: RunConfig, checkpoint, override: Optional[str] = None) -> str:
    return (override or config.eval.policy or checkpoint.train_config.get("duration_policy")
            or DEFAULT_DURATION_POLICY)


def _write_preview(generator: ReportGenerator, translated, reference: data.Dataset,
                   manifest: data.PairingManifest, filename: str) -> Optional[str]:
    """x-y-Vorschau übersetzter Trajektorien neben ihrem gepaarten Original."""
    shown = list(translated[:PREVIEW_LIMIT])
    return generator.create_translation_preview(shown, paired_partners(shown, reference, manifest),
                                                filename, PREVIEW_LIMIT)


def cmd_translate(config: RunConfig, args) -> int:
    checkpoint = load_checkpoint(_checkpoint_path(config, args.checkpoint))
    source_domain = DIRECTIONS[args.direction]
    target_domain = other_domain(source_domain)
    dataset = data.load_dataset(args.input, source_domain)
    reference = data.load_dataset(args.reference, target_domain) if args.reference else None
    if args.target_rate is not None:
        target_rate = args.target_rate
    elif reference is not None:
        target_rate = reference.rate_hz
    else:
        target_rate = checkpoint.rates_hz.get(target_domain, RATES_HZ[target_domain])

    prepared = checkpoint.stats[source_domain].apply(data.preprocess_dataset(dataset))
    policy = _translation_policy(config, checkpoint, args.policy)
    translated = translate_samples(checkpoint.params, prepared.samples, policy, target_rate)
    target_stats = checkpoint.stats[target_domain]
    translated = [s.with_values(target_stats.inverse(s.values)) for s in translated]
    output = data.Dataset(translated, dict(dataset.class_map), target_rate, target_domain)
    data.save_dataset(output, args.out)
    logger.info(f"{len(translated)} Proben übersetzt ({args.direction}, {target_rate:g} Hz) "
                f"nach {args.out}")

    if args.svg_dir:
        if args.direction == "i2t":
            write_svgs(translated, args.svg_dir)
        else:
            logger.warning("--svg-dir wird nur für i2t ausgewertet")
    pairs_path = config.path("pairs", args.pairs)
    if args.direction == "i2t" and reference is not None and pairs_path:
        stem = os.path.splitext(os.path.basename(args.out))[0]
        _write_preview(ReportGenerator(os.path.dirname(args.out) or "."), translated,
                       reference, data.load_manifest(pairs_path), f"{stem}_preview.png")
    return EXIT_OK


def cmd_eval(config: RunConfig, args) -> int:
    checkpoint = load_checkpoint(_checkpoint_path(config, args.checkpoint))
    dataset_i, dataset_t = _load_pair(config, args)
    if dataset_i.class_map != checkpoint.class_map:
        raise DatasetError("Klassen der Daten passen nicht zum Checkpoint")
    seed = config.seed if (args.cmd_seed is not None or args.seed is not None) \
        else int(checkpoint.train_config.get("seed", config.seed))
    splits, _ = _splits(dataset_i, dataset_t, seed, checkpoint.stats)
    pairs_path = config.path("pairs", args.pairs)
    manifest = data.load_manifest(pairs_path) if pairs_path else None

    options = config.eval
    options.seed = seed
    options.policy = _translation_policy(config, checkpoint)
    if args.no_two_stream:
        options.two_stream = False
    report = run_evaluation(checkpoint.params, splits, options, manifest)

    report_path = _require(config.path("report", args.report), "report")
    generator = ReportGenerator(os.path.dirname(report_path) or ".")
    generator.write_eval_report([report.to_dict()], report_path)
    stem = os.path.splitext(os.path.basename(report_path))[0]
    generator.create_per_class_plot(report.to_dict(), f"{stem}_per_class.png")
    if manifest is not None:
        translated = translate_samples(checkpoint.params, splits.test_i.samples[:PREVIEW_LIMIT],
                                       options.policy, splits.test_t.rate_hz)
        reference = data.Dataset(splits.train_t.samples + splits.test_t.samples,
                                 splits.test_t.class_map, splits.test_t.rate_hz, TRAJECTORY)
        _write_preview(generator, translated, reference, manifest, f"{stem}_preview.png")
    return EXIT_OK


def cmd_ablate(config: RunConfig, args) -> int:
    out_dir = _require(config.path("out_dir", args.out_dir), "out-dir")
    train_config = config.train
    if args.epochs is not None:
        train_config.epochs = args.epochs
    options = config.eval
    if args.jobs is not None:
        options.n_jobs = args.jobs
    dataset_i, dataset_t = _load_pair(config, args)
    splits, _ = _splits(dataset_i, dataset_t, config.seed)
    pairs_path = config.path("pairs", args.pairs)
    manifest = data.load_manifest(pairs_path) if pairs_path else None

    reports = ablation_suite(train_config, splits, options, manifest)
    ReportGenerator(out_dir).write_eval_report([r.to_dict() for r in reports], "ablation_report.json")
    return EXIT_OK


def cmd_gradcheck(config: RunConfig, args) -> int:
    results = run_gradient_suite(config.seed)
    failed = [r for r in results if not r.passed]
    for r in results:
        print(f"{'OK    ' if r.passed else 'FEHLER'} {r.name:<28} {r.error:.2e}")
    print(f"{len(results) - len(failed)}/{len(results)} Prüfungen bestanden")
    return EXIT_NUMERIC if failed else EXIT_OK


def cmd_convert(config: RunConfig, args) -> int:
    rate = args.rate if args.rate is not None else RATES_HZ[args.domain]
    dataset = data.import_csv_samples(args.inputs, args.domain, rate)
    data.save_dataset(dataset, args.out)
    logger.info(f"{len(dataset)} Aufnahmen nach {args.out} konvertiert")
    return EXIT_OK


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "translate": cmd_translate,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "gradcheck": cmd_gradcheck,
    "convert": cmd_convert,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except ConfigError as e:
        parser.print_usage(sys.stderr)
        print(f"airwriting: Fehler: {e}", file=sys.stderr)
        return e.exit_code

    setup_logging(verbose=args.verbose)
    try:
        config = _load_config(args)
        return COMMANDS[args.command](config, args)
    except AirWritingError as e:
        logger.error(f"{args.command}: {e}")
        return e.exit_code
    except (OSError, ValueError) as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_VALIDATION


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    run()
