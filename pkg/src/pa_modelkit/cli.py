"""Command line front end: ``pa-modelkit generate|train|evaluate|all``.

Exit codes: 0 success, 1 usage error, 2 IO/missing artifact, 3 unsupported
configuration, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import ExperimentConfig, derive_seed, load_config
from .errors import ArgumentError, ConfigurationError, ModelkitError, PipelineError, TrainingError
from .evaluation import ComparisonReport, error_spectrum, evaluate_model
from .models import build_arvtdnn, build_drvcnn, build_dnn, train_mlp, train_two_stage
from .gmp import gmp_fit
from .neuralcore import count_parameters
from .persistence import load_model, read_dataset, save_model, write_dataset
from .signals import split_dataset, synthesize_dataset

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_UNSUPPORTED, EXIT_NUMERIC = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _paths(cfg: ExperimentConfig, args):
    out = Path(args.out or cfg.output_dir)
    dataset = Path(args.dataset) if args.dataset else out / "dataset.csv"
    return out, dataset


def _load_dataset(path: Path):
    try:
        return read_dataset(path)
    except FileNotFoundError as exc:
        raise CliError(f"dataset not found: {exc.filename}", EXIT_IO) from exc


def cmd_generate(cfg: ExperimentConfig, args) -> int:
    out, dataset = _paths(cfg, args)
    try:
        ds = synthesize_dataset(cfg.signal, cfg.pa, cfg.num_samples)
    except PipelineError as exc:
        raise CliError(str(exc), EXIT_NUMERIC) from exc
    try:
        csv_path, _ = write_dataset(ds, dataset)
    except OSError as exc:
        raise CliError(f"cannot write dataset: {exc}", EXIT_IO) from exc
    print(f"wrote {csv_path}: {ds.num_samples} samples, K={ds.K}")
    return EXIT_OK


def _build(spec, cfg: ExperimentConfig):
    K, M = cfg.K, cfg.feature.M
    exps = cfg.feature.envelope_exponents
    seed = int(spec.settings.get("seed", derive_seed(cfg.seed, f"model:{spec.name}")))
    if spec.type == "drvcnn":
        return build_drvcnn(K, M, seed, exps)
    if spec.type == "arvtdnn":
        return build_arvtdnn(K, M, spec.settings.get("hidden"), seed, exps)
    return build_dnn(K, M, spec.settings.get("hidden"), seed, exps)


def cmd_train(cfg: ExperimentConfig, args) -> int:
    out, dataset = _paths(cfg, args)
    ds = _load_dataset(dataset)
    if ds.K != cfg.K:
        raise CliError(f"dataset has K={ds.K} but the config describes K={cfg.K}", EXIT_UNSUPPORTED)
    train, _ = split_dataset(ds, *cfg.split)
    extra = {"scale_factors": list(ds.scale_factors), "dataset": dataset.name}
    for spec in cfg.models:
        if spec.type == "gmp":
            if cfg.K > 1:
                raise CliError("multi-carrier GMP unsupported", EXIT_UNSUPPORTED)
            model = gmp_fit(train.inputs[0], train.outputs[0], spec.gmp_index)
            train_log = None
        else:
            model = _build(spec, cfg)
            try:
                if spec.type == "drvcnn":
                    model, train_log = train_two_stage(model, train, cfg.train)
                else:
                    model, train_log = train_mlp(model, train, cfg.train)
            except TrainingError as exc:
                raise CliError(f"{spec.name}: {exc}", EXIT_NUMERIC) from exc
        path = save_model(model, out / "models" / f"{spec.name}.json", {"name": spec.name, **extra})
        if train_log is not None:
            (out / "logs").mkdir(parents=True, exist_ok=True)
            (out / "logs" / f"{spec.name}.csv").write_text(train_log.to_csv())
        print(f"trained {spec.name}: {count_parameters(model)} coefficients -> {path}")
    return EXIT_OK


def cmd_evaluate(cfg: ExperimentConfig, args) -> int:
    out, dataset = _paths(cfg, args)
    ds = _load_dataset(dataset)
    _, test = split_dataset(ds, *cfg.split)
    files = [Path(p) for p in args.models] if args.models else [out / "models" / f"{s.name}.json" for s in cfg.models]
    report = ComparisonReport()
    spectra = out / "spectra"
    spectra.mkdir(parents=True, exist_ok=True)
    for path in files:
        try:
            model = load_model(path)
        except FileNotFoundError as exc:
            raise CliError(f"model file not found: {path}", EXIT_IO) from exc
        name = path.stem
        row, pred = evaluate_model(name, model, test, dataset_id=dataset.name)
        report.rows.append(row)
        for k in range(test.K):
            trace = error_spectrum(pred[k], test.outputs[k], test.sample_rate_hz, cfg.nfft, cfg.overlap,
                                   label=f"{name} carrier {k + 1}")
            (spectra / f"{name}_carrier{k + 1}.csv").write_text(trace.to_csv())
    (out / "report.csv").write_text(report.to_csv())
    (out / "report.json").write_text(report.to_json())
    sys.stdout.write(report.to_csv())
    return EXIT_OK


def cmd_all(cfg, args) -> int:
    for step in (cmd_generate, cmd_train, cmd_evaluate):
        code = step(cfg, args)
        if code:
            return code
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "evaluate": cmd_evaluate, "all": cmd_all}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pa-modelkit", description="PA behavioral modeling experiments")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in (("generate", "synthesize the dataset"), ("train", "train the configured models"),
                        ("evaluate", "report NMSE and error spectra on the test split"),
                        ("all", "generate, train and evaluate")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="experiment JSON")
        p.add_argument("--dataset", help="dataset CSV (default: <out>/dataset.csv)")
        p.add_argument("--out", help="output directory (overrides config output_dir)")
        if name == "evaluate":
            p.add_argument("--models", nargs="+", help="model JSON files (default: those named in the config)")
        else:
            p.set_defaults(models=None)
    return parser


def _thread_limit():
    raw = os.environ.get("PA_MODELKIT_THREADS")
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise CliError(f"PA_MODELKIT_THREADS must be an integer, got {raw!r}", EXIT_USAGE)
    return n if n > 0 else None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        try:
            cfg = load_config(args.config)
        except FileNotFoundError as exc:
            raise CliError(f"config not found: {args.config}", EXIT_IO) from exc
        except (json.JSONDecodeError, ConfigurationError, TypeError) as exc:
            raise CliError(f"invalid config: {exc}", EXIT_USAGE) from exc
        limit = _thread_limit()
        if limit:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=limit):
                return COMMANDS[args.command](cfg, args)
        return COMMANDS[args.command](cfg, args)
    except CliError as exc:
        print(f"pa-modelkit: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigurationError, ArgumentError) as exc:
        print(f"pa-modelkit: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except OSError as exc:
        print(f"pa-modelkit: {exc}", file=sys.stderr)
        return EXIT_IO
    except ModelkitError as exc:
        print(f"pa-modelkit: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
