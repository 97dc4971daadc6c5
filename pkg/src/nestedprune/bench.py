"""Repeated-study benchmark harness comparing pruner variants on identical cohorts.

Every repetition draws one fresh cohort and replays it under every variant,
so differences between variants are purely due to pruning behavior. Costs are
counted in trained models. Reports capture, per variant: model totals with
their spread over repetitions, per-layer prune counts, threshold prunes that
were wrong relative to ground truth (with the largest error margin per
repetition), and whether the ground-truth best trial survived.
"""

from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

from .engine import TrialOutcome, TrialStatus, full_objective, run_study
from .errors import FormatError
from .metrics import Direction
from .pruners import PruneLayer, PrunerConfig
from .trace import TraceGenConfig, TrialTrace, generate_cohort, read_traces

REPORT_SCHEMA = "nestedprune-bench-report/v1"


@dataclass(frozen=True)
class FalsePruneRecord:
    """A threshold prune whose trial would actually have beaten the threshold."""

    rep: int
    trial_id: str
    full_objective: float
    threshold: float
    margin: float


@dataclass(frozen=True)
class RepStats:
    """One variant's results on one repetition's cohort."""

    rep: int
    models_trained: int
    semantic_prunes: int
    threshold_prunes: int
    comparison_prunes: int
    completed: int
    falsely_pruned: int
    max_margin: float | None
    best_preserved: bool


@dataclass(frozen=True)
class VariantReport:
    name: str
    models_trained_total: int
    models_trained_stddev: float
    semantic_prunes: int
    threshold_prunes: int
    comparison_prunes: int
    completed: int
    falsely_pruned_total: int
    best_preserved_all: bool
    percent_models_saved_vs_baseline: float
    per_rep: tuple[RepStats, ...]
    false_prunes: tuple[FalsePruneRecord, ...]


@dataclass(frozen=True)
class BenchReport:
    baseline: str
    repetitions: int
    trials_per_rep: int
    workers: int
    direction: str
    outer_folds: int
    inner_folds: int
    variants: tuple[VariantReport, ...]


@dataclass(frozen=True)
class BenchConfig:
    """Benchmark setup: variants to compare and where cohorts come from.

    ``source`` is either a ``TraceGenConfig`` (repetition ``r`` generates a
    fresh cohort with seed ``base_seed + r`` and ``trials_per_rep`` trials) or
    a path to recorded traces (the same cohort is replayed each repetition).
    """

    variants: Mapping[str, PrunerConfig]
    baseline: str
    source: TraceGenConfig | str | Path
    repetitions: int = 30
    trials_per_rep: int = 40
    base_seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if not self.variants:
            raise ValueError("at least one pruner variant is required")
        if self.baseline not in self.variants:
            raise ValueError(f"baseline {self.baseline!r} is not among the variants")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.trials_per_rep < 1:
            raise ValueError("trials_per_rep must be >= 1")
        directions = {config.direction for config in self.variants.values()}
        if len(directions) != 1:
            raise ValueError("all variants must share one optimization direction")
        if isinstance(self.source, TraceGenConfig):
            if self.source.direction not in directions:
                raise ValueError("cohort generation direction must match the variants")


def classify_false_prunes(
    outcomes: Sequence[TrialOutcome],
    cohort: Sequence[TrialTrace],
    config: PrunerConfig,
    rep: int = 0,
) -> list[FalsePruneRecord]:
    """Threshold-pruned trials whose full-run objective beat the threshold.

    Only the threshold layer is judged against its own threshold; comparison
    prunes have no such reference and are assessed via best-trial
    preservation instead.
    """
    if config.threshold is None:
        return []
    traces = {trace.trial_id: trace for trace in cohort}
    records = []
    for outcome in outcomes:
        if outcome.pruned_layer is not PruneLayer.THRESHOLD:
            continue
        objective = full_objective(traces[outcome.trial_id], config.trim_fraction)
        if config.direction.is_worse(config.threshold, objective):
            records.append(
                FalsePruneRecord(
                    rep=rep,
                    trial_id=outcome.trial_id,
                    full_objective=objective,
                    threshold=config.threshold,
                    margin=abs(objective - config.threshold),
                )
            )
    return records


def _best_trial_id(
    cohort: Sequence[TrialTrace], direction: Direction, trim_fraction: float
) -> str:
    objectives = [(full_objective(t, trim_fraction), t.trial_id) for t in cohort]
    pick = min if direction is Direction.MINIMIZE else max
    return pick(objectives, key=lambda pair: pair[0])[1]


def compare_pruners(config: BenchConfig) -> BenchReport:
    """Run every variant over every repetition's cohort and aggregate."""
    if isinstance(config.source, TraceGenConfig):
        fixed_cohort = None
        trials_per_rep = config.trials_per_rep
        shape = config.source.shape
    else:
        fixed_cohort = read_traces(config.source)
        trials_per_rep = len(fixed_cohort)
        shape = fixed_cohort[0].shape

    per_variant: dict[str, list[RepStats]] = {name: [] for name in config.variants}
    false_prunes: dict[str, list[FalsePruneRecord]] = {name: [] for name in config.variants}

    for rep in range(config.repetitions):
        if fixed_cohort is None:
            cohort = generate_cohort(
                replace(config.source, seed=config.base_seed + rep, trials=trials_per_rep)
            )
        else:
            cohort = fixed_cohort
        for name, variant in config.variants.items():
            study = run_study(cohort, variant, workers=config.workers)
            records = []
            if variant.threshold_enabled:
                records = classify_false_prunes(study.outcomes, cohort, variant, rep=rep)
            false_prunes[name].extend(records)
            best_id = _best_trial_id(cohort, variant.direction, variant.trim_fraction)
            best_outcome = next(o for o in study.outcomes if o.trial_id == best_id)
            per_variant[name].append(
                RepStats(
                    rep=rep,
                    models_trained=study.models_trained_total,
                    semantic_prunes=study.semantic_prunes,
                    threshold_prunes=study.threshold_prunes,
                    comparison_prunes=study.comparison_prunes,
                    completed=study.completed,
                    falsely_pruned=len(records),
                    max_margin=max((r.margin for r in records), default=None),
                    best_preserved=best_outcome.status is TrialStatus.COMPLETED,
                )
            )

    baseline_total = sum(r.models_trained for r in per_variant[config.baseline])
    variant_reports = []
    for name in config.variants:
        reps = per_variant[name]
        models = [r.models_trained for r in reps]
        total = sum(models)
        variant_reports.append(
            VariantReport(
                name=name,
                models_trained_total=total,
                models_trained_stddev=statistics.stdev(models) if len(models) > 1 else 0.0,
                semantic_prunes=sum(r.semantic_prunes for r in reps),
                threshold_prunes=sum(r.threshold_prunes for r in reps),
                comparison_prunes=sum(r.comparison_prunes for r in reps),
                completed=sum(r.completed for r in reps),
                falsely_pruned_total=sum(r.falsely_pruned for r in reps),
                best_preserved_all=all(r.best_preserved for r in reps),
                percent_models_saved_vs_baseline=100.0 * (1.0 - total / baseline_total),
                per_rep=tuple(reps),
                false_prunes=tuple(false_prunes[name]),
            )
        )

    direction = next(iter(config.variants.values())).direction
    return BenchReport(
        baseline=config.baseline,
        repetitions=config.repetitions,
        trials_per_rep=trials_per_rep,
        workers=config.workers,
        direction=direction.value,
        outer_folds=shape.outer_folds,
        inner_folds=shape.inner_folds,
        variants=tuple(variant_reports),
    )


def _report_to_dict(report: BenchReport) -> dict:
    return {
        "schema": REPORT_SCHEMA,
        "baseline": report.baseline,
        "repetitions": report.repetitions,
        "trials_per_rep": report.trials_per_rep,
        "workers": report.workers,
        "direction": report.direction,
        "outer_folds": report.outer_folds,
        "inner_folds": report.inner_folds,
        "variants": [
            {
                "name": v.name,
                "models_trained_total": v.models_trained_total,
                "models_trained_stddev": v.models_trained_stddev,
                "semantic_prunes": v.semantic_prunes,
                "threshold_prunes": v.threshold_prunes,
                "comparison_prunes": v.comparison_prunes,
                "completed": v.completed,
                "falsely_pruned_total": v.falsely_pruned_total,
                "best_preserved_all": v.best_preserved_all,
                "percent_models_saved_vs_baseline": v.percent_models_saved_vs_baseline,
                "per_rep": [
                    {
                        "rep": r.rep,
                        "models_trained": r.models_trained,
                        "semantic_prunes": r.semantic_prunes,
                        "threshold_prunes": r.threshold_prunes,
                        "comparison_prunes": r.comparison_prunes,
                        "completed": r.completed,
                        "falsely_pruned": r.falsely_pruned,
                        "max_margin": r.max_margin,
                        "best_preserved": r.best_preserved,
                    }
                    for r in v.per_rep
                ],
                "false_prunes": [
                    {
                        "rep": f.rep,
                        "trial_id": f.trial_id,
                        "full_objective": f.full_objective,
                        "threshold": f.threshold,
                        "margin": f.margin,
                    }
                    for f in v.false_prunes
                ],
            }
            for v in report.variants
        ],
    }


def report_to_json(report: BenchReport) -> str:
    return json.dumps(_report_to_dict(report), indent=2) + "\n"


_DETAIL_COLUMNS = (
    "variant",
    "rep",
    "models_trained",
    "semantic_prunes",
    "threshold_prunes",
    "comparison_prunes",
    "completed",
    "falsely_pruned",
    "max_margin",
    "best_preserved",
)
_SUMMARY_COLUMNS = (
    "variant",
    "models_trained_total",
    "models_trained_stddev",
    "semantic_prunes",
    "threshold_prunes",
    "comparison_prunes",
    "completed",
    "falsely_pruned_total",
    "best_preserved_all",
    "percent_models_saved_vs_baseline",
)


def report_to_csv(report: BenchReport) -> str:
    """Detail rows (one per variant and repetition) followed by a summary block."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(_DETAIL_COLUMNS)
    for v in report.variants:
        for r in v.per_rep:
            writer.writerow(
                [
                    v.name,
                    r.rep,
                    r.models_trained,
                    r.semantic_prunes,
                    r.threshold_prunes,
                    r.comparison_prunes,
                    r.completed,
                    r.falsely_pruned,
                    "" if r.max_margin is None else repr(r.max_margin),
                    str(r.best_preserved).lower(),
                ]
            )
    writer.writerow([])
    writer.writerow(_SUMMARY_COLUMNS)
    for v in report.variants:
        writer.writerow(
            [
                v.name,
                v.models_trained_total,
                repr(v.models_trained_stddev),
                v.semantic_prunes,
                v.threshold_prunes,
                v.comparison_prunes,
                v.completed,
                v.falsely_pruned_total,
                str(v.best_preserved_all).lower(),
                repr(v.percent_models_saved_vs_baseline),
            ]
        )
    return buffer.getvalue()


def emit_report(report: BenchReport, format: str, path) -> None:
    """Serialize a finalized report. Two emissions of one report are byte-identical."""
    if format == "json":
        text = report_to_json(report)
    elif format == "csv":
        text = report_to_csv(report)
    else:
        raise ValueError(f"unknown report format {format!r} (expected 'json' or 'csv')")
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)


def load_report(path) -> BenchReport:
    """Parse a JSON report back into a structurally equal ``BenchReport``."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read report {path}: {exc}") from exc
    try:
        if data["schema"] != REPORT_SCHEMA:
            raise FormatError(f"unsupported report schema {data['schema']!r}")
        variants = tuple(
            VariantReport(
                name=v["name"],
                models_trained_total=v["models_trained_total"],
                models_trained_stddev=v["models_trained_stddev"],
                semantic_prunes=v["semantic_prunes"],
                threshold_prunes=v["threshold_prunes"],
                comparison_prunes=v["comparison_prunes"],
                completed=v["completed"],
                falsely_pruned_total=v["falsely_pruned_total"],
                best_preserved_all=v["best_preserved_all"],
                percent_models_saved_vs_baseline=v["percent_models_saved_vs_baseline"],
                per_rep=tuple(
                    RepStats(
                        rep=r["rep"],
                        models_trained=r["models_trained"],
                        semantic_prunes=r["semantic_prunes"],
                        threshold_prunes=r["threshold_prunes"],
                        comparison_prunes=r["comparison_prunes"],
                        completed=r["completed"],
                        falsely_pruned=r["falsely_pruned"],
                        max_margin=r["max_margin"],
                        best_preserved=r["best_preserved"],
                    )
                    for r in v["per_rep"]
                ),
                false_prunes=tuple(
                    FalsePruneRecord(
                        rep=f["rep"],
                        trial_id=f["trial_id"],
                        full_objective=f["full_objective"],
                        threshold=f["threshold"],
                        margin=f["margin"],
                    )
                    for f in v["false_prunes"]
                ),
            )
            for v in data["variants"]
        )
        return BenchReport(
            baseline=data["baseline"],
            repetitions=data["repetitions"],
            trials_per_rep=data["trials_per_rep"],
            workers=data["workers"],
            direction=data["direction"],
            outer_folds=data["outer_folds"],
            inner_folds=data["inner_folds"],
            variants=variants,
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed report {path}: missing or bad field {exc}") from exc
