"""Independent brute-force oracles for checking the library's numerics.

These deliberately avoid the library's code paths: medians come from explicit
sorting, means from exact rational arithmetic (every float is a dyadic
rational), decisions from a direct transcription of the definitions.
"""

from __future__ import annotations

import math
from fractions import Fraction

from nestedprune import Direction, ExtrapolationMethod


def exact_mean(values) -> Fraction:
    """Exact rational mean via integer mantissas (denominators are powers of two)."""
    pairs = [float(v).as_integer_ratio() for v in values]
    common = 1
    for _, den in pairs:
        common = max(common, den)
    total = sum(num * (common // den) for num, den in pairs)
    return Fraction(total, common * len(pairs))


def exact_median(values) -> Fraction:
    ordered = sorted(Fraction(float(v)) for v in values)
    mid = len(ordered) // 2
    if len(ordered) % 2:
        return ordered[mid]
    return (ordered[mid - 1] + ordered[mid]) / 2


def exact_trimmed_mean(values, trim_fraction: float) -> Fraction:
    ordered = sorted(values)
    k = math.floor(trim_fraction * len(ordered))
    core = ordered[k : len(ordered) - k] if k else ordered
    return exact_mean(core)


def within_one_ulp(actual: float, exact: Fraction) -> bool:
    reference = float(exact)
    scale = max(abs(actual), abs(reference), 5e-324)
    return abs(Fraction(actual) - exact) <= Fraction(math.ulp(scale))


def brute_threshold_prunes(
    values,
    steps_missing: int,
    direction: Direction,
    method: ExtrapolationMethod,
    optimal_value: float,
    threshold: float,
) -> bool:
    """Exact-arithmetic recomputation of the threshold-layer prune decision."""
    center = exact_median(values)
    if method is ExtrapolationMethod.OPTIMAL_METRIC:
        optimistic = Fraction(float(optimal_value))
    elif method is ExtrapolationMethod.NO_EXTRAPOLATION:
        optimistic = center
    else:
        if direction is Direction.MINIMIZE:
            deviations = [center - Fraction(float(v)) for v in values if Fraction(float(v)) < center]
        else:
            deviations = [Fraction(float(v)) - center for v in values if Fraction(float(v)) > center]
        if not deviations:
            optimistic = center
        elif method is ExtrapolationMethod.MAX_DEVIATION:
            step = max(deviations)
            optimistic = center - step if direction is Direction.MINIMIZE else center + step
        else:
            step = sum(deviations, Fraction(0)) / len(deviations)
            optimistic = center - step if direction is Direction.MINIMIZE else center + step
    done = len(values)
    composite = (center * done + optimistic * steps_missing) / (done + steps_missing)
    if direction is Direction.MINIMIZE:
        return composite > Fraction(float(threshold))
    return composite < Fraction(float(threshold))


def brute_rung_survivors(values: dict, direction: Direction, reduction_factor: int) -> set:
    """Top-``ceil(n / factor)`` trial ids by sorting, ties with the cutoff surviving."""
    if not values:
        return set()
    keep = math.ceil(len(values) / reduction_factor)
    best_first = sorted(values.values(), reverse=direction is Direction.MAXIMIZE)
    cutoff = best_first[keep - 1]
    if direction is Direction.MINIMIZE:
        return {tid for tid, v in values.items() if v <= cutoff}
    return {tid for tid, v in values.items() if v >= cutoff}
