"""Command line entry point: cohort generation, replay, benchmarking, report conversion."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .bench import BenchConfig, compare_pruners, emit_report, load_report
from .engine import CvShape, StudyReport, run_study
from .errors import FormatError
from .metrics import Direction, ExtrapolationMethod
from .pruners import AshaConfig, PrunerConfig
from .trace import TraceGenConfig, generate_cohort, read_traces, write_traces

_DIRECTIONS = {"min": Direction.MINIMIZE, "max": Direction.MAXIMIZE}

_PRUNER_PRESETS = {
    # preset -> (semantic, threshold, comparison)
    "none": (False, False, False),
    "asha": (False, False, True),
    "semantic": (True, False, False),
    "threshold": (False, True, False),
    "three-layer": (True, True, True),
}


class _Parser(argparse.ArgumentParser):
    """Argument parser that exits with status 1 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _default(cls, name: str):
    for f in dataclasses.fields(cls):
        if f.name == name:
            if f.default is not dataclasses.MISSING:
                return f.default
            return f.default_factory()
    raise AttributeError(name)


def _add_gen_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--noise-sd", type=float, default=_default(TraceGenConfig, "noise_sd"),
                        help="per-step Gaussian noise (default %(default)s)")
    parser.add_argument("--outlier-prob", type=float,
                        default=_default(TraceGenConfig, "outlier_prob"),
                        help="per-step outlier probability (default %(default)s)")
    parser.add_argument("--outlier-mag", type=float,
                        default=_default(TraceGenConfig, "outlier_magnitude"),
                        help="outlier spike size (default %(default)s)")
    parser.add_argument("--zero-feature-prob", type=float,
                        default=_default(TraceGenConfig, "zero_feature_prob"),
                        help="probability a trial selects no features (default %(default)s)")
    parser.add_argument("--base-min", type=float, default=_default(TraceGenConfig, "base_min"),
                        help="best per-trial base metric (default %(default)s)")
    parser.add_argument("--base-max", type=float, default=_default(TraceGenConfig, "base_max"),
                        help="worst per-trial base metric (default %(default)s)")


def _add_asha_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--min-resource", type=int, default=_default(AshaConfig, "min_resource"),
                        help="completed inner loops at the first rung unit (default %(default)s)")
    parser.add_argument("--reduction-factor", type=int,
                        default=_default(AshaConfig, "reduction_factor"),
                        help="fraction kept per rung is 1/factor (default %(default)s)")
    parser.add_argument("--min-early-stopping-rate", type=int,
                        default=_default(AshaConfig, "min_early_stopping_rate"),
                        help="rung-0 delay exponent (default %(default)s)")
    parser.add_argument("--bootstrap-count", type=int,
                        default=_default(AshaConfig, "bootstrap_count"),
                        help="values required at a rung before it may prune (default %(default)s)")


def build_parser() -> _Parser:
    parser = _Parser(prog="nestedprune",
                     description="Trial pruning and benchmarking over nested-CV metric traces.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", help="generate a synthetic cohort trace file")
    gen.add_argument("--trials", type=int, required=True, help="number of trials")
    gen.add_argument("--outer", type=int, required=True, help="outer folds")
    gen.add_argument("--inner", type=int, required=True, help="inner folds")
    gen.add_argument("--seed", type=int, required=True, help="generator seed")
    gen.add_argument("--out", required=True, help="output trace CSV path")
    _add_gen_flags(gen)

    replay = sub.add_parser("replay", help="replay recorded traces through a pruner")
    replay.add_argument("--traces", required=True, help="trace CSV file or directory")
    replay.add_argument("--pruner", required=True, choices=sorted(_PRUNER_PRESETS),
                        help="which layers are active")
    replay.add_argument("--direction", choices=sorted(_DIRECTIONS), default="min",
                        help="optimization direction (default %(default)s)")
    replay.add_argument("--threshold", type=float, default=None,
                        help="minimum acceptable metric (required by threshold/three-layer)")
    replay.add_argument("--extrapolation",
                        choices=[m.value for m in ExtrapolationMethod],
                        default=_default(PrunerConfig, "extrapolation").value,
                        help="threshold-layer completion estimate (default %(default)s)")
    replay.add_argument("--optimal", type=float, default=_default(PrunerConfig, "optimal_value"),
                        help="ideal metric value for 'optimal' extrapolation "
                             "(default %(default)s)")
    replay.add_argument("--trim", type=float, default=_default(PrunerConfig, "trim_fraction"),
                        help="trim fraction for smoothed values (default %(default)s)")
    replay.add_argument("--window-fraction", type=float,
                        default=_default(PrunerConfig, "threshold_window_fraction"),
                        help="outer-fold fraction where the threshold layer is active "
                             "(default 1/3)")
    _add_asha_flags(replay)
    replay.add_argument("--workers", type=int, default=1,
                        help="concurrent trial workers (default %(default)s)")

    bench = sub.add_parser("bench", help="compare pruner variants over repeated studies")
    bench.add_argument("--reps", type=int, default=_default(BenchConfig, "repetitions"),
                       help="repetitions (default %(default)s)")
    bench.add_argument("--trials", type=int, default=_default(BenchConfig, "trials_per_rep"),
                       help="trials per repetition (default %(default)s)")
    bench.add_argument("--outer", type=int, default=None, help="outer folds (generated cohorts)")
    bench.add_argument("--inner", type=int, default=None, help="inner folds (generated cohorts)")
    bench.add_argument("--base-seed", type=int, default=_default(BenchConfig, "base_seed"),
                       help="repetition r uses seed base+r (default %(default)s)")
    bench.add_argument("--direction", choices=sorted(_DIRECTIONS), default="min",
                       help="optimization direction (default %(default)s)")
    bench.add_argument("--traces", default=None,
                       help="replay this recorded cohort instead of generating")
    _add_gen_flags(bench)
    bench.add_argument("--variants", required=True,
                       help="JSON file mapping variant names to pruner settings")
    bench.add_argument("--baseline", required=True,
                       help="variant name percent-saved is measured against")
    bench.add_argument("--out", required=True, help="output report JSON path")
    bench.add_argument("--require-best-preserved", action="store_true",
                       help="exit 2 if any repetition pruned the ground-truth best trial")
    bench.add_argument("--workers", type=int, default=_default(BenchConfig, "workers"),
                       help="concurrent trial workers (default %(default)s)")

    report = sub.add_parser("report", help="convert a bench report between formats")
    report.add_argument("--in", dest="input", required=True, help="report JSON path")
    report.add_argument("--format", required=True, choices=["json", "csv"],
                        help="output format")
    report.add_argument("--out", required=True, help="output path")

    return parser


def _cmd_gen(args) -> int:
    config = TraceGenConfig(
        trials=args.trials,
        shape=CvShape(outer_folds=args.outer, inner_folds=args.inner),
        seed=args.seed,
        base_min=args.base_min,
        base_max=args.base_max,
        noise_sd=args.noise_sd,
        outlier_prob=args.outlier_prob,
        outlier_magnitude=args.outlier_mag,
        zero_feature_prob=args.zero_feature_prob,
    )
    cohort = generate_cohort(config)
    write_traces(cohort, args.out)
    shape = config.shape
    print(f"wrote {len(cohort)} trials ({shape.outer_folds}x{shape.inner_folds} grid) "
          f"to {args.out}")
    return 0


def _pruner_config_from_args(args) -> PrunerConfig:
    semantic, threshold_layer, comparison = _PRUNER_PRESETS[args.pruner]
    if threshold_layer and args.threshold is None:
        raise ValueError(f"--threshold is required with --pruner {args.pruner}")
    return PrunerConfig(
        direction=_DIRECTIONS[args.direction],
        threshold=args.threshold,
        extrapolation=ExtrapolationMethod(args.extrapolation),
        optimal_value=args.optimal,
        trim_fraction=args.trim,
        threshold_window_fraction=args.window_fraction,
        asha=AshaConfig(
            min_resource=args.min_resource,
            reduction_factor=args.reduction_factor,
            min_early_stopping_rate=args.min_early_stopping_rate,
            bootstrap_count=args.bootstrap_count,
        ),
        semantic_enabled=semantic,
        threshold_enabled=threshold_layer,
        comparison_enabled=comparison,
    )


def _print_study(report: StudyReport) -> None:
    width = max([len("trial")] + [len(o.trial_id) for o in report.outcomes])
    print(f"{'trial':<{width}}  {'status':<9}  {'layer':<10}  {'models':>6}  reported")
    for o in report.outcomes:
        layer = o.pruned_layer.value if o.pruned_layer else "-"
        reported = format(o.reported_value, ".6g") if o.reported_value is not None else "-"
        print(f"{o.trial_id:<{width}}  {o.status.value:<9}  {layer:<10}  "
              f"{o.models_trained:>6}  {reported}")
    print(
        f"totals: trials={len(report.outcomes)} models={report.models_trained_total} "
        f"semantic={report.semantic_prunes} threshold={report.threshold_prunes} "
        f"comparison={report.comparison_prunes} completed={report.completed} "
        f"workers={report.workers}"
    )
    if report.best_trial_id is not None:
        print(f"best: {report.best_trial_id} reported={format(report.best_value, '.6g')}")


def _cmd_replay(args) -> int:
    config = _pruner_config_from_args(args)
    cohort = read_traces(args.traces)
    report = run_study(cohort, config, workers=args.workers)
    _print_study(report)
    return 0


_VARIANT_KEYS = {
    "direction",
    "threshold",
    "extrapolation",
    "optimal_value",
    "trim_fraction",
    "min_threshold_steps",
    "threshold_window_fraction",
    "asha",
    "semantic_enabled",
    "threshold_enabled",
    "comparison_enabled",
}
_ASHA_KEYS = {"min_resource", "reduction_factor", "min_early_stopping_rate", "bootstrap_count"}


def _variant_config(name: str, data: dict, default_direction: Direction) -> PrunerConfig:
    if not isinstance(data, dict):
        raise ValueError(f"variants file: variant {name!r} must be an object")
    unknown = set(data) - _VARIANT_KEYS
    if unknown:
        raise ValueError(f"variants file: variant {name!r}: unknown key {sorted(unknown)[0]!r}")
    asha_data = data.get("asha", {})
    if not isinstance(asha_data, dict):
        raise ValueError(f"variants file: variant {name!r}: 'asha' must be an object")
    unknown = set(asha_data) - _ASHA_KEYS
    if unknown:
        raise ValueError(
            f"variants file: variant {name!r}: unknown asha key {sorted(unknown)[0]!r}"
        )
    direction = default_direction
    if "direction" in data:
        direction = Direction(data["direction"])
    kwargs = {
        key: data[key]
        for key in (
            "threshold",
            "optimal_value",
            "trim_fraction",
            "min_threshold_steps",
            "threshold_window_fraction",
            "semantic_enabled",
            "threshold_enabled",
            "comparison_enabled",
        )
        if key in data
    }
    if "extrapolation" in data:
        kwargs["extrapolation"] = ExtrapolationMethod(data["extrapolation"])
    return PrunerConfig(direction=direction, asha=AshaConfig(**asha_data), **kwargs)


def _load_variants(path: str, default_direction: Direction) -> dict[str, PrunerConfig]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except OSError as exc:
        raise ValueError(f"cannot open variants file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"variants file {path}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(data, dict) or not data:
        raise ValueError(f"variants file {path} must be a non-empty JSON object")
    return {
        name: _variant_config(name, variant, default_direction)
        for name, variant in data.items()
    }


def _cmd_bench(args) -> int:
    direction = _DIRECTIONS[args.direction]
    variants = _load_variants(args.variants, direction)
    if args.traces is not None:
        source = args.traces
    else:
        if args.outer is None or args.inner is None:
            raise ValueError("--outer and --inner are required unless --traces is given")
        source = TraceGenConfig(
            trials=args.trials,
            shape=CvShape(outer_folds=args.outer, inner_folds=args.inner),
            seed=args.base_seed,
            base_min=args.base_min,
            base_max=args.base_max,
            noise_sd=args.noise_sd,
            outlier_prob=args.outlier_prob,
            outlier_magnitude=args.outlier_mag,
            zero_feature_prob=args.zero_feature_prob,
            direction=direction,
        )
    config = BenchConfig(
        variants=variants,
        baseline=args.baseline,
        source=source,
        repetitions=args.reps,
        trials_per_rep=args.trials,
        base_seed=args.base_seed,
        workers=args.workers,
    )
    report = compare_pruners(config)
    emit_report(report, "json", args.out)

    width = max(len("variant"), max(len(v.name) for v in report.variants))
    print(f"{'variant':<{width}}  {'models':>8}  {'saved%':>7}  {'false':>5}  best_preserved")
    for v in report.variants:
        print(f"{v.name:<{width}}  {v.models_trained_total:>8}  "
              f"{v.percent_models_saved_vs_baseline:>7.1f}  {v.falsely_pruned_total:>5}  "
              f"{str(v.best_preserved_all).lower()}")
    print(f"report written to {args.out}")

    if args.require_best_preserved:
        failing = [v.name for v in report.variants if not v.best_preserved_all]
        if failing:
            print(f"error: best trial was pruned under: {', '.join(failing)}", file=sys.stderr)
            return 2
    return 0


def _cmd_report(args) -> int:
    report = load_report(args.input)
    emit_report(report, args.format, args.out)
    print(f"wrote {args.format} report to {args.out}")
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "replay": _cmd_replay,
    "bench": _cmd_bench,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (FormatError, ValueError, OverflowError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
