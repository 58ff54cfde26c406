"""Command line entry point: ``costconv <verb> [options]``.

Exit codes: 0 ok, 1 usage or configuration error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from . import evalkit
from .claims import write_claims, write_cohort_cache, write_taxonomy
from .cohort import generate_cohort, write_labels
from .convnet import NumericError
from .experiment import (
    OUT_ENV,
    PRESETS,
    ConfigError,
    ExperimentConfig,
    coerce,
    cohort_spec,
    load_cohort,
    make_config,
    output_dir,
    run_experiment,
    run_mining,
    run_sweep,
    score_external,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _config_options() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    g = p.add_argument_group("configuration")
    g.add_argument("--preset", default="paper-shape", choices=sorted(PRESETS))
    g.add_argument("--config", metavar="FILE", help="flat key = value config file")
    g.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one key (repeatable)")
    g.add_argument("-v", "--verbose", action="store_true")
    fields = p.add_argument_group("config keys (same names as in the config file)")
    for f in dataclasses.fields(ExperimentConfig):
        fields.add_argument(f"--{f.name.replace('_', '-')}", dest=f"key_{f.name}", metavar="V",
                            help=f"default {f.default!r}")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _config_options()
    parser = _Parser(prog="costconv", description="Cost prediction workbench on synthetic or supplied claims. "
                     f"Relative output directories are placed under ${OUT_ENV} when set.")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    sub.add_parser("gen", parents=[common], help="generate a synthetic cohort (claims, labels, taxonomy)")
    fz = sub.add_parser("featurize", parents=[common], help="build the cohort matrix cache")
    fz.add_argument("--output", metavar="FILE", help="cache path (default <out_dir>/cohort.ccmx)")
    sub.add_parser("train", parents=[common], help="train the CNN and score it on the holdout")
    sub.add_parser("mine", parents=[common], help="mine TIRPs on the training share")
    sub.add_parser("eval", parents=[common], help="run every enabled method and write reports")
    sub.add_parser("sweep", parents=[common], help="hyper-parameter sweep over the grid_* keys")
    se = sub.add_parser("score-external", parents=[common], help="score a patient_id<TAB>prediction file")
    se.add_argument("--predictions", required=True, metavar="FILE")
    return parser


def config_from_args(args) -> ExperimentConfig:
    overrides = {}
    for f in dataclasses.fields(ExperimentConfig):
        raw = getattr(args, f"key_{f.name}")
        if raw is not None:
            overrides[f.name] = coerce(f.name, raw)
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = coerce(key.strip(), value)
    return make_config(args.preset, args.config, overrides)


def _print_reports(reports) -> None:
    for r in reports:
        print(f"{r.method}\tmape={evalkit.format_value(r.mape)}\taccuracy={evalkit.format_value(r.accuracy)}"
              f"\tpenalty_error={evalkit.format_value(r.penalty)}")


def _run(args) -> None:
    config = config_from_args(args)
    out = output_dir(config)
    if args.verb == "gen":
        if config.source != "synthetic":
            raise ConfigError("gen needs source = synthetic")
        spec = cohort_spec(config)
        claims, labels = generate_cohort(spec)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "claims.jsonl", "w", encoding="utf-8") as fh:
            write_claims(claims, fh)
        with open(out / "labels.tsv", "w", encoding="utf-8") as fh:
            write_labels(labels, fh)
        with open(out / "taxonomy.tsv", "w", encoding="utf-8") as fh:
            write_taxonomy(spec.taxonomy, fh)
        print(f"{len(labels)} patients, {len(claims)} claims -> {out}")
    elif args.verb == "featurize":
        cohort, _ = load_cohort(config)
        path = args.output or out / "cohort.ccmx"
        out.mkdir(parents=True, exist_ok=True)
        write_cohort_cache(cohort, path)
        print(f"{len(cohort)} patients, {cohort.X.shape[1]}x{cohort.X.shape[2]} matrices -> {path}")
    elif args.verb == "train":
        result = run_experiment(config.replace(tirp_gbt=False, global_mean=False, ablations="",
                                               external_predictions=""))
        _print_reports(result.reports)
    elif args.verb == "mine":
        tirps = run_mining(config)
        print(f"{len(tirps)} frequent TIRPs -> {out / 'tirps.tsv'}")
    elif args.verb == "eval":
        result = run_experiment(config)
        _print_reports(result.reports)
        for pair, t, p, sig in result.significance:
            print(f"{pair}\tt={evalkit.format_value(t)}\tp={evalkit.format_value(p)}\tsignificant={sig}")
    elif args.verb == "sweep":
        rows = run_sweep(config)
        best = [r for r in rows if r.selected][-1]
        print(f"{len(rows)} sweep rows -> {out / 'sweep.csv'}; selected {best.point}")
    elif args.verb == "score-external":
        cohort, _ = load_cohort(config)
        report = score_external(args.predictions, cohort, config)
        out.mkdir(parents=True, exist_ok=True)
        evalkit.write_report_csv([report], out / "report.csv")
        _print_reports([report])


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _run(args)
    except ConfigError as exc:
        print(f"costconv: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, FloatingPointError, OverflowError) as exc:
        print(f"costconv: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError, KeyError) as exc:
        print(f"costconv: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
