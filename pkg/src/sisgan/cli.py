"""Command-line entry point for reproducible experiment runs.

Subcommands: simulate, train, generate, eval, probe, fft-report and
default-config. Experiment definitions live in a JSON config file; flags
only pick command targets and paths. Exit codes are a stable contract:
0 success, 2 config error, 3 IO error, 4 data-invariant violation,
5 roster mismatch.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import artifacts, storage
from .config import ExperimentConfig, config_hash, load_config, write_default_config
from .data import Dataset
from .errors import (
    ConfigError,
    IoFailure,
    RosterMismatch,
    RosterOverlap,
    SisganError,
)
from .evaluation import (
    ProtocolReport,
    probe_subject_softmax,
    fft_validation_report,
    run_cross_task_protocol,
    run_leave_one_out_protocol,
    run_single_subject_protocol,
    subject_biometric_eval,
    write_probe_csv,
)
from .nn import Head, freeze
from .oracle import synthesize_dataset
from .training import (
    GanTrainResult,
    generate_synthetic,
    train_acgan,
    train_classifier,
    train_dcgan,
    train_sisgan,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DATA = 4
EXIT_ROSTER = 5

ARTIFACT_DIR_ENV = "SISGAN_ARTIFACT_DIR"

_CLI_VARIANTS = ("dcgan", "acgan", "sisgan", "ssvep-clf", "subject-clf")
_PROTOCOLS = ("single-subject", "loo", "cross-task", "subject-biometric")


def _artifact_dir(config: ExperimentConfig) -> Path:
    override = os.environ.get(ARTIFACT_DIR_ENV)
    return Path(override) if override else Path(config.io.artifact_dir)


def _verify_artifact_hash(meta: dict, expected: str, what: str) -> None:
    recorded = meta.get("config_hash")
    if recorded != expected:
        raise SisganError(
            f"{what}: recorded config hash {recorded!r} does not match "
            f"the supplied config ({expected[:12]}...)"
        )


def _maybe_verify(args, metas: list[tuple[dict, str]]) -> None:
    if not getattr(args, "verify", False):
        return
    if not getattr(args, "config", None):
        raise ConfigError("--verify needs --config to recompute the hash against")
    expected = config_hash(load_config(args.config))
    for meta, what in metas:
        _verify_artifact_hash(meta, expected, what)


def cmd_default_config(args) -> int:
    write_default_config(args.out)
    print(f"wrote default config to {args.out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = load_config(args.config)
    chash = config_hash(config)
    out_dir = Path(args.out) if args.out else _artifact_dir(config)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {out_dir}: {exc}") from exc

    for name, sim in (("offline", config.simulation.offline),
                      ("online", config.simulation.online)):
        dataset = synthesize_dataset(sim)
        dataset = dataset.with_trials(dataset.trials, config_hash=chash)
        path = out_dir / f"{name}.dset"
        storage.save_dataset(dataset, path)
        print(f"{name}: {len(dataset)} trials, {dataset.n_channels} channels x "
              f"{dataset.time_steps} steps @ {dataset.sample_rate_hz:g} Hz, "
              f"subjects {list(dataset.subject_roster)} -> {path}")
    return EXIT_OK


def _write_gan_outputs(result: GanTrainResult, out: Path, chash: str, loss_log) -> None:
    artifacts.save_generator(
        result.generator, result.generator_store, out,
        result.class_table, result.sample_rate_hz,
        config_hash=chash, seed=result.config.seed, variant=result.config.variant)
    log_path = Path(loss_log) if loss_log else out.with_suffix(out.suffix + ".losses.csv")
    result.log.to_csv(log_path)
    print(f"checkpoint -> {out}")
    print(f"loss log   -> {log_path}")


def cmd_train(args) -> int:
    config = load_config(args.config)
    chash = config_hash(config)
    dataset = storage.load_dataset(args.data)
    _maybe_verify(args, [(dataset.meta, f"dataset {args.data}")])
    out = Path(args.out)

    if args.variant == "sisgan" and not args.frozen_subject:
        raise ConfigError("sisgan training requires --frozen-subject pointing at a "
                          "frozen subject-classifier checkpoint (train one with "
                          "--variant subject-clf, it is saved frozen)")

    if args.variant in ("dcgan",):
        labels = dataset.labels()
        gan_config = config.gan_train_config("dcgan")
        for c in range(len(dataset.class_table)):
            idx = np.flatnonzero(labels == c)
            class_ds = Dataset(
                trials=tuple(dataset.trials[i] for i in idx),
                class_table=dataset.class_table,
                subject_roster=dataset.subject_roster,
                meta=dict(dataset.meta),
            )
            result = train_dcgan(class_ds, gan_config)
            class_out = out.with_name(f"{out.stem}-class{c}{out.suffix}")
            _write_gan_outputs(result, class_out, chash, None)
        return EXIT_OK

    if args.variant == "acgan":
        result = train_acgan(dataset, config.gan_train_config("acgan"))
        _write_gan_outputs(result, out, chash, args.loss_log)
        return EXIT_OK

    if args.variant == "sisgan":
        subject_net, subject_store, subject_meta = artifacts.load_backbone(
            args.frozen_subject, frozen=True)
        _maybe_verify(args, [(subject_meta, f"checkpoint {args.frozen_subject}")])
        result = train_sisgan(dataset, subject_net, config.gan_train_config("sisgan"))
        _write_gan_outputs(result, out, chash, args.loss_log)
        return EXIT_OK

    # classifier variants
    role = Head.SSVEP_CLASSIFIER if args.variant == "ssvep-clf" else Head.SUBJECT_CLASSIFIER
    section = (config.training.classifier if role is Head.SSVEP_CLASSIFIER
               else config.training.subject_classifier)
    result = train_classifier(dataset, role, config.classifier_config(section))
    if role is Head.SUBJECT_CLASSIFIER:
        freeze(result.store)  # saved frozen so it can feed sisgan directly
    artifacts.save_backbone(
        result.network, result.store, out,
        config_hash=chash, seed=result.config.seed, variant=args.variant,
        label_map=list(result.label_map))
    log_path = Path(args.loss_log) if args.loss_log else out.with_suffix(out.suffix + ".losses.csv")
    result.log.to_csv(log_path)
    print(f"checkpoint -> {out}")
    print(f"loss log   -> {log_path}")
    return EXIT_OK


def cmd_generate(args) -> int:
    checkpoints = args.checkpoint
    if len(checkpoints) == 1:
        generator, _, meta = artifacts.load_generator(checkpoints[0])
        _maybe_verify(args, [(meta, f"checkpoint {checkpoints[0]}")])
        table = artifacts.class_table_from_meta(meta)
        rate = float(meta["sample_rate_hz"])
        source = generator
    else:
        per_class = {}
        table = rate = None
        for path in checkpoints:
            generator, _, meta = artifacts.load_generator(path)
            _maybe_verify(args, [(meta, f"checkpoint {path}")])
            table = artifacts.class_table_from_meta(meta)
            rate = float(meta["sample_rate_hz"])
            label = meta.get("class_label")
            if label is None:
                # per-class checkpoints written by `train --variant dcgan`
                # encode the class in the file stem: <stem>-class<k>
                stem = Path(path).stem
                if "-class" not in stem:
                    raise SisganError(f"{path}: cannot infer class; use -classK naming")
                label = int(stem.rsplit("-class", 1)[1])
            per_class[int(label)] = generator
        source = per_class
    dataset = generate_synthetic(source, args.n_per_class, args.seed, table, rate)
    dataset = dataset.with_trials(dataset.trials, seed=int(args.seed))
    storage.save_dataset(dataset, args.out)
    print(f"generated {len(dataset)} trials ({args.n_per_class} per class) -> {args.out}")
    return EXIT_OK


def _report_paths(out_dir: Path, name: str) -> tuple[Path, Path]:
    return out_dir / f"{name}.json", out_dir / f"{name}.csv"


def cmd_eval(args) -> int:
    config = load_config(args.config)
    chash = config_hash(config)
    art = _artifact_dir(config)
    out_dir = Path(args.out) if args.out else art
    out_dir.mkdir(parents=True, exist_ok=True)

    offline_path = art / "offline.dset"
    if not offline_path.exists():
        raise IoFailure(f"prerequisite dataset missing: {offline_path} (run simulate first)")
    offline = storage.load_dataset(offline_path)
    _maybe_verify(args, [(offline.meta, f"dataset {offline_path}")])

    pcfg = config.protocol_config(jobs=args.jobs)
    regimes = config.regimes()

    if args.protocol == "subject-biometric":
        report = subject_biometric_eval(
            offline, n_folds=config.evaluation.biometric_folds,
            config=config.classifier_config(config.training.subject_classifier),
            seed=config.evaluation.base_seed)
        json_path, csv_path = _report_paths(out_dir, "subject_biometric")
        import json as _json

        payload = report.to_json_dict()
        payload["config_hash"] = chash
        storage._atomic_write(json_path, (_json.dumps(payload, indent=2, sort_keys=True) + "\n").encode())
        lines = ["fold,accuracy"] + [f"{i},{a!r}" for i, a in enumerate(report.fold_accuracies)]
        lines.append(f"mean,{report.mean!r}")
        lines.append(f"std,{report.std!r}")
        storage._atomic_write(csv_path, ("\n".join(lines) + "\n").encode())
        print(f"subject-biometric CV accuracy: {report.mean:.3f} +- {report.std:.3f}")
        print(f"reports -> {json_path}, {csv_path}")
        return EXIT_OK

    if args.protocol == "single-subject":
        report = run_single_subject_protocol(offline, regimes, pcfg, chash)
    elif args.protocol == "loo":
        report = run_leave_one_out_protocol(offline, regimes, pcfg, chash)
    else:  # cross-task
        online_path = art / "online.dset"
        if not online_path.exists():
            raise IoFailure(f"prerequisite dataset missing: {online_path} (run simulate first)")
        online = storage.load_dataset(online_path)
        _maybe_verify(args, [(online.meta, f"dataset {online_path}")])
        report = run_cross_task_protocol(offline, online, regimes, pcfg, chash)

    json_path, csv_path = _report_paths(out_dir, report.protocol)
    report.write_json(json_path)
    report.write_csv(csv_path)
    _print_report_summary(report)
    print(f"reports -> {json_path}, {csv_path}")
    return EXIT_OK


def _print_report_summary(report: ProtocolReport) -> None:
    subject_units = [u for u in report.units if u != "overall"]
    print(f"protocol {report.protocol}: {len(subject_units)} unit(s), "
          f"{len(report.seeds)} seed(s)")
    for regime in report.regimes:
        mean = report.regime_mean(regime, subject_units)
        print(f"  {regime:>24s}: mean accuracy {mean:.3f}")


def cmd_probe(args) -> int:
    generated = storage.load_dataset(args.generated)
    subject_net, _, meta = artifacts.load_backbone(args.checkpoint, frozen=True)
    _maybe_verify(args, [(generated.meta, f"dataset {args.generated}"),
                         (meta, f"checkpoint {args.checkpoint}")])
    report = probe_subject_softmax(generated, subject_net)
    write_probe_csv(report, args.out)
    print(f"mean max-softmax over {report.n_trials} generated trials: "
          f"{report.mean_max_softmax:.4f} (uniform floor "
          f"{1.0 / len(report.per_subject_mean_softmax):.4f})")
    print(f"probe CSV -> {args.out}")
    return EXIT_OK


def cmd_fft_report(args) -> int:
    real = storage.load_dataset(args.real)
    generated = storage.load_dataset(args.generated)
    _maybe_verify(args, [(real.meta, f"dataset {args.real}"),
                         (generated.meta, f"dataset {args.generated}")])
    report = fft_validation_report(real, generated)
    out = Path(args.out)
    report.write_csv(out)
    peaks = out.with_suffix(out.suffix + ".peaks.csv")
    report.write_peaks_csv(peaks)
    for row in report.rows:
        print(f"class {row.class_label} ({row.stimulus_hz:g} Hz): real peak "
              f"{row.real_peak_hz:.2f} Hz, generated peak {row.generated_peak_hz:.2f} Hz, "
              f"hit fraction {row.generated_hit_fraction:.2f}")
    print(f"spectra CSV -> {out}; peak table -> {peaks}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sisgan",
        description="Subject-invariant SSVEP signal generation and zero-calibration "
                    "evaluation pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("default-config", help="write a config file with every default")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_default_config)

    p = sub.add_parser("simulate", help="synthesize offline/online oracle datasets")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="output directory (default: io.artifact_dir)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train a GAN variant or classifier")
    p.add_argument("--config", required=True)
    p.add_argument("--variant", required=True, choices=_CLI_VARIANTS)
    p.add_argument("--data", required=True, help="training dataset file")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--frozen-subject", default=None,
                   help="frozen subject-classifier checkpoint (sisgan only)")
    p.add_argument("--loss-log", default=None, help="loss CSV path (default: <out>.losses.csv)")
    p.add_argument("--verify", action="store_true",
                   help="check input artifacts against this config's hash")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="sample a synthetic dataset from checkpoints")
    p.add_argument("--checkpoint", action="append", required=True,
                   help="generator checkpoint; repeat for per-class generators")
    p.add_argument("--n-per-class", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--verify", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("eval", help="run an evaluation protocol end to end")
    p.add_argument("--config", required=True)
    p.add_argument("--protocol", required=True, choices=_PROTOCOLS)
    p.add_argument("--out", default=None, help="report directory (default: artifact dir)")
    p.add_argument("--jobs", type=int, default=1, help="parallel protocol cells")
    p.add_argument("--verify", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("probe", help="softmax-probe generated data with a subject net")
    p.add_argument("--generated", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--verify", action="store_true")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("fft-report", help="compare real vs generated spectra per class")
    p.add_argument("--real", required=True)
    p.add_argument("--generated", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--verify", action="store_true")
    p.set_defaults(func=cmd_fft_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IoFailure, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (RosterMismatch, RosterOverlap) as exc:
        print(f"roster error: {exc}", file=sys.stderr)
        return EXIT_ROSTER
    except SisganError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
