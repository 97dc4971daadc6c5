"""Synthetic cohort generation and the trace CSV interchange format.

Trace files are UTF-8 CSV with LF line endings, header
``trial_id,outer_fold,inner_fold,metric,n_selected_features`` and one row per
trained model in row-major order (all inner folds of outer fold 0, then outer
fold 1, ...). Metrics are written with 17 significant digits so a round trip
preserves them bit for bit. A cohort is either one combined file or a
directory of per-trial ``*.csv`` files; writing emits the combined form by
default.

Users with real data record their per-fold validation metrics in this format
from their own training loop and feed the file to ``replay``/``bench``.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .engine import CvShape, StepRecord
from .errors import TraceFormatError
from .metrics import Direction

TRACE_HEADER = ("trial_id", "outer_fold", "inner_fold", "metric", "n_selected_features")


@dataclass(frozen=True)
class TraceGenConfig:
    """Synthetic cohort parameters.

    Each trial draws a base quality level uniformly from
    ``[base_min, base_max]``; steps add Gaussian noise and, with
    ``outlier_prob``, a spike of ``outlier_magnitude`` in the pessimistic
    direction (both directions when ``symmetric_outliers`` is set). A trial is
    a zero-selected-features trial with probability ``zero_feature_prob``;
    such models predict a constant, so their base is pinned to the worst end
    of the quality spread. Minimized metrics are clamped at zero, mirroring
    logloss.
    """

    trials: int
    shape: CvShape
    seed: int
    base_min: float = 0.2
    base_max: float = 0.9
    noise_sd: float = 0.15
    outlier_prob: float = 0.05
    outlier_magnitude: float = 1.0
    zero_feature_prob: float = 0.10
    direction: Direction = Direction.MINIMIZE
    symmetric_outliers: bool = False

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.base_min <= self.base_max:
            raise ValueError("base_min must not exceed base_max")
        for name in ("outlier_prob", "zero_feature_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        if self.outlier_magnitude < 0:
            raise ValueError("outlier_magnitude must be >= 0")


@dataclass(frozen=True)
class TrialTrace:
    """The complete ordered step sequence of one trial over the full grid."""

    trial_id: str
    shape: CvShape
    steps: tuple[StepRecord, ...]

    def __post_init__(self) -> None:
        if len(self.steps) != self.shape.total_steps:
            raise TraceFormatError(
                f"trial {self.trial_id!r} has {len(self.steps)} steps, "
                f"expected {self.shape.total_steps}"
            )
        for index, step in enumerate(self.steps):
            expected = divmod(index, self.shape.inner_folds)
            if step.trial_id != self.trial_id:
                raise TraceFormatError(
                    f"step {index} of trial {self.trial_id!r} carries id {step.trial_id!r}"
                )
            if (step.outer_idx, step.inner_idx) != expected:
                raise TraceFormatError(
                    f"trial {self.trial_id!r}: step {index} is "
                    f"({step.outer_idx}, {step.inner_idx}), expected {expected}"
                )


def generate_cohort(config: TraceGenConfig) -> list[TrialTrace]:
    """Generate a deterministic cohort; identical configs yield identical cohorts."""
    rng = random.Random(config.seed)
    minimize = config.direction is Direction.MINIMIZE
    worst_base = config.base_max if minimize else config.base_min
    cohort: list[TrialTrace] = []
    for index in range(config.trials):
        base = rng.uniform(config.base_min, config.base_max)
        zero_features = rng.random() < config.zero_feature_prob
        if zero_features:
            base = worst_base
        trial_id = f"trial_{index:03d}"
        steps = []
        for outer in range(config.shape.outer_folds):
            for inner in range(config.shape.inner_folds):
                metric = base + rng.gauss(0.0, config.noise_sd)
                if rng.random() < config.outlier_prob:
                    magnitude = config.outlier_magnitude
                    if config.symmetric_outliers and rng.random() < 0.5:
                        magnitude = -magnitude
                    metric += magnitude if minimize else -magnitude
                if minimize and metric < 0.0:
                    metric = 0.0
                steps.append(
                    StepRecord(
                        trial_id=trial_id,
                        outer_idx=outer,
                        inner_idx=inner,
                        metric=metric,
                        selected_feature_count=0 if zero_features else rng.randint(1, 100),
                    )
                )
        cohort.append(TrialTrace(trial_id=trial_id, shape=config.shape, steps=tuple(steps)))
    return cohort


def write_traces(cohort: Sequence[TrialTrace], path, per_trial: bool = False) -> None:
    """Write a cohort as one combined CSV file, or one file per trial in a directory."""
    target = Path(path)
    if per_trial:
        target.mkdir(parents=True, exist_ok=True)
        for trace in cohort:
            _write_file([trace], target / f"{trace.trial_id}.csv")
    else:
        _write_file(cohort, target)


def _write_file(traces: Iterable[TrialTrace], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for trace in traces:
            for step in trace.steps:
                writer.writerow(
                    [
                        trace.trial_id,
                        step.outer_idx,
                        step.inner_idx,
                        format(step.metric, ".17g"),
                        step.selected_feature_count,
                    ]
                )


def read_traces(path) -> list[TrialTrace]:
    """Read a cohort from a combined trace file or a directory of per-trial files."""
    source = Path(path)
    if source.is_dir():
        files = sorted(source.glob("*.csv"))
        if not files:
            raise TraceFormatError("no .csv trace files found", path=source)
        cohort: list[TrialTrace] = []
        seen: set[str] = set()
        for file in files:
            for trace in _read_file(file):
                if trace.trial_id in seen:
                    raise TraceFormatError(
                        f"duplicate trial id {trace.trial_id!r} across files", path=file
                    )
                if cohort and trace.shape != cohort[0].shape:
                    raise TraceFormatError(
                        f"trial {trace.trial_id!r} shape {trace.shape} differs from "
                        f"cohort shape {cohort[0].shape}",
                        path=file,
                    )
                seen.add(trace.trial_id)
                cohort.append(trace)
        return cohort
    return _read_file(source)


def _read_file(path: Path) -> list[TrialTrace]:
    try:
        handle = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise TraceFormatError(f"cannot open trace file: {exc}", path=path) from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(header) != TRACE_HEADER:
            raise TraceFormatError(
                f"header must be {','.join(TRACE_HEADER)}", path=path, line=1
            )
        rows = []
        for row in reader:
            rows.append((reader.line_num, _parse_row(row, path, reader.line_num)))
    if not rows:
        raise TraceFormatError("trace file contains no step rows", path=path)

    blocks: list[tuple[str, list[tuple[int, StepRecord]]]] = []
    block_of: dict[str, int] = {}
    for line, step in rows:
        if blocks and blocks[-1][0] == step.trial_id:
            blocks[-1][1].append((line, step))
            continue
        if step.trial_id in block_of:
            raise TraceFormatError(
                f"rows of trial {step.trial_id!r} must be contiguous", path=path, line=line
            )
        block_of[step.trial_id] = len(blocks)
        blocks.append((step.trial_id, [(line, step)]))

    shape: CvShape | None = None
    cohort = []
    for trial_id, block in blocks:
        cohort.append(_assemble_trial(trial_id, block, shape, path))
        shape = cohort[0].shape
    return cohort


def _parse_row(row: list[str], path: Path, line: int) -> StepRecord:
    if len(row) != len(TRACE_HEADER):
        raise TraceFormatError(
            f"expected {len(TRACE_HEADER)} fields, got {len(row)}", path=path, line=line
        )
    trial_id, outer_text, inner_text, metric_text, count_text = row
    if not trial_id:
        raise TraceFormatError("trial_id must be non-empty", path=path, line=line)
    try:
        outer = int(outer_text)
        inner = int(inner_text)
        count = int(count_text)
    except ValueError as exc:
        raise TraceFormatError(f"bad integer field: {exc}", path=path, line=line) from exc
    try:
        metric = float(metric_text)
    except ValueError as exc:
        raise TraceFormatError(f"bad metric field: {exc}", path=path, line=line) from exc
    if not math.isfinite(metric):
        raise TraceFormatError(f"metric must be finite, got {metric_text}", path=path, line=line)
    try:
        return StepRecord(
            trial_id=trial_id,
            outer_idx=outer,
            inner_idx=inner,
            metric=metric,
            selected_feature_count=count,
        )
    except ValueError as exc:
        raise TraceFormatError(str(exc), path=path, line=line) from exc


def _assemble_trial(
    trial_id: str,
    block: list[tuple[int, StepRecord]],
    cohort_shape: CvShape | None,
    path: Path,
) -> TrialTrace:
    if cohort_shape is not None:
        inner_folds = cohort_shape.inner_folds
    else:
        # row-major order puts all of outer fold 0 first
        inner_folds = 0
        for _, step in block:
            if step.outer_idx != 0:
                break
            inner_folds += 1
        if inner_folds == 0:
            raise TraceFormatError(
                f"trial {trial_id!r} must start at step (outer, inner)=(0, 0)",
                path=path,
                line=block[0][0],
            )
    for index, (line, step) in enumerate(block):
        expected = divmod(index, inner_folds)
        if (step.outer_idx, step.inner_idx) != expected:
            raise TraceFormatError(
                f"trial {trial_id!r}: expected step (outer, inner)={expected}, "
                f"got ({step.outer_idx}, {step.inner_idx}); grid rows must be "
                "complete, unique, and in row-major order",
                path=path,
                line=line,
            )
    if cohort_shape is None:
        if len(block) % inner_folds != 0:
            raise TraceFormatError(
                f"trial {trial_id!r} ends mid inner loop: {len(block)} rows with "
                f"{inner_folds} inner folds",
                path=path,
                line=block[-1][0],
            )
        try:
            shape = CvShape(outer_folds=len(block) // inner_folds, inner_folds=inner_folds)
        except ValueError as exc:
            raise TraceFormatError(str(exc), path=path, line=block[-1][0]) from exc
    else:
        shape = cohort_shape
        if len(block) != shape.total_steps:
            raise TraceFormatError(
                f"trial {trial_id!r} has {len(block)} rows, cohort shape "
                f"{shape.outer_folds}x{shape.inner_folds} requires {shape.total_steps}",
                path=path,
                line=block[-1][0],
            )
    return TrialTrace(trial_id=trial_id, shape=shape, steps=tuple(s for _, s in block))
