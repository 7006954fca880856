"""Per-scenario value metrics and their statistical aggregation.

For each scenario the pipeline computes baseline curtailment and storage
sizing from the original net loads, applies the converter, recomputes both
from the updated net loads, and expresses the change as reduction rates.
A rate with a zero baseline is undefined (``None``): it is excluded from
aggregation and counted, never coerced to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .engine import ConverterSpec, GridLimits, apply_converter, curtailed_energy
from .errors import AggregationError, ValidationError
from .profiles import Profile
from .storage import StorageConfig, StorageSizing, count_deep_cycles, simulate_storage, size_storage

RATE_NAMES = ("r_ec", "r_ees", "r_pes", "r_deep")


@dataclass(frozen=True)
class SystemResult:
    """Metric values for one system of one scenario."""

    e_c: float
    e_c_prime: float
    capacity_kwh: float
    capacity_prime_kwh: float
    rating_kw: float
    rating_prime_kw: float
    deep: int
    deep_prime: int
    r_ec: float | None
    r_ees: float | None
    r_pes: float | None
    r_deep: float | None

    def rate(self, name: str) -> float | None:
        if name not in RATE_NAMES:
            raise ValidationError(f"unknown metric {name!r}; expected one of {RATE_NAMES}")
        return getattr(self, name)


@dataclass(frozen=True)
class ScenarioResult:
    system1: SystemResult
    system2: SystemResult

    def system(self, index: int) -> SystemResult:
        if index == 1:
            return self.system1
        if index == 2:
            return self.system2
        raise ValidationError(f"system index must be 1 or 2, got {index}")


@dataclass(frozen=True)
class StatSummary:
    max: float
    mean: float
    min: float
    median: float
    percentiles: dict[float, float]
    n: int
    n_undefined: int


@dataclass(frozen=True)
class MarginalCurve:
    capacities_kw: tuple[float, ...]
    means: tuple[float, ...]
    deltas: tuple[float, ...]


def reduction_rate(before: float, after: float) -> float | None:
    """(before - after) / before, or None when the baseline is zero."""
    if before == 0:
        return None
    return (before - after) / before


@dataclass(frozen=True)
class _Baseline:
    e_c: float
    sizing: StorageSizing
    deep: int


def _baseline_side(net: Profile, limits: GridLimits, cfg: StorageConfig) -> _Baseline:
    e_c = curtailed_energy(net, limits)
    traj = simulate_storage(net, limits, cfg)
    sizing = size_storage(traj, cfg)
    deep = count_deep_cycles(traj, sizing.rating_kw, cfg.deep_cycle_threshold)
    return _Baseline(e_c, sizing, deep)


def _updated_side(net_updated: Profile, limits: GridLimits, cfg: StorageConfig,
                  base: _Baseline) -> SystemResult:
    e_c_prime = curtailed_energy(net_updated, limits)
    traj = simulate_storage(net_updated, limits, cfg)
    sizing_prime = size_storage(traj, cfg)
    # deep cycles of both cases are judged against the baseline rating, so
    # the comparison is of one storage design with and without the tie
    deep_prime = count_deep_cycles(traj, base.sizing.rating_kw, cfg.deep_cycle_threshold)
    return SystemResult(
        e_c=base.e_c, e_c_prime=e_c_prime,
        capacity_kwh=base.sizing.capacity_kwh, capacity_prime_kwh=sizing_prime.capacity_kwh,
        rating_kw=base.sizing.rating_kw, rating_prime_kw=sizing_prime.rating_kw,
        deep=base.deep, deep_prime=deep_prime,
        r_ec=reduction_rate(base.e_c, e_c_prime),
        r_ees=reduction_rate(base.sizing.capacity_kwh, sizing_prime.capacity_kwh),
        r_pes=reduction_rate(base.sizing.rating_kw, sizing_prime.rating_kw),
        r_deep=reduction_rate(float(base.deep), float(deep_prime)),
    )


def evaluate_pair(net1: Profile, net2: Profile, conv: ConverterSpec, limits: GridLimits,
                  storage_cfg: StorageConfig) -> ScenarioResult:
    """Full with/without comparison for one pair of net-load profiles."""
    base1 = _baseline_side(net1, limits, storage_cfg)
    base2 = _baseline_side(net2, limits, storage_cfg)
    return _evaluate_updated(net1, net2, conv, limits, storage_cfg, base1, base2)


def _evaluate_updated(net1, net2, conv, limits, storage_cfg, base1, base2) -> ScenarioResult:
    transfer = apply_converter(net1, net2, conv)
    return ScenarioResult(
        system1=_updated_side(transfer.net1_updated, limits, storage_cfg, base1),
        system2=_updated_side(transfer.net2_updated, limits, storage_cfg, base2),
    )


def evaluate_scenario(scenario, conv: ConverterSpec, limits: GridLimits,
                      storage_cfg: StorageConfig) -> ScenarioResult:
    """Evaluate a generated scenario (anything exposing net1/net2)."""
    return evaluate_pair(scenario.net1, scenario.net2, conv, limits, storage_cfg)


def evaluate_over_capacities(net1: Profile, net2: Profile, capacities_kw, limits: GridLimits,
                             storage_cfg: StorageConfig) -> list[ScenarioResult]:
    """Evaluate one scenario at several capacities, sharing the baseline."""
    base1 = _baseline_side(net1, limits, storage_cfg)
    base2 = _baseline_side(net2, limits, storage_cfg)
    return [
        _evaluate_updated(net1, net2, ConverterSpec(c), limits, storage_cfg, base1, base2)
        for c in capacities_kw
    ]


def _interp_percentile(ordered: list[float], q: float) -> float:
    # linear interpolation between closest ranks, inclusive endpoints
    pos = (len(ordered) - 1) * (q / 100.0)
    lo = math.floor(pos)
    hi = math.ceil(pos)
    if lo == hi:
        return ordered[int(pos)]
    frac = pos - lo
    return ordered[lo] + frac * (ordered[hi] - ordered[lo])


def mean_defined(values) -> tuple[float, int, int]:
    """Left-fold mean over defined values; returns (mean, n, n_undefined)."""
    total = 0.0
    n = 0
    undefined = 0
    for v in values:
        if v is None:
            undefined += 1
            continue
        total += float(v)
        n += 1
    if n == 0:
        raise AggregationError("all samples are undefined")
    return total / n, n, undefined


def summarize(values, percentiles=(5.0, 95.0)) -> StatSummary:
    """Max/mean/min/median plus requested percentiles over defined samples.

    ``None`` entries are excluded and counted. The mean is clipped into
    [min, max] so summation rounding can never break the ordering
    invariants on near-constant data.
    """
    defined = [float(v) for v in values if v is not None]
    n_undefined = sum(1 for v in values if v is None)
    if not defined:
        raise AggregationError("all samples are undefined")
    for q in percentiles:
        if not (0.0 <= q <= 100.0):
            raise ValidationError(f"percentile {q} outside [0, 100]")
    ordered = sorted(defined)
    vmin, vmax = ordered[0], ordered[-1]
    total = 0.0
    for v in defined:
        total += v
    mean = total / len(defined)
    mean = min(max(mean, vmin), vmax)
    return StatSummary(
        max=vmax,
        mean=mean,
        min=vmin,
        median=_interp_percentile(ordered, 50.0),
        percentiles={float(q): _interp_percentile(ordered, float(q)) for q in percentiles},
        n=len(defined),
        n_undefined=n_undefined,
    )


def marginal_sweep(scenarios, capacities_kw, limits: GridLimits, storage_cfg: StorageConfig,
                   metric: str = "r_ec", system: int = 1) -> MarginalCurve:
    """Mean of one metric across scenarios at each capacity, plus first
    differences between consecutive capacities."""
    caps = [float(c) for c in capacities_kw]
    if len(caps) < 2:
        raise ValidationError("marginal sweep needs at least two capacities")
    if any(b <= a for a, b in zip(caps, caps[1:])):
        raise ValidationError("capacity grid must be strictly increasing")
    if metric not in RATE_NAMES:
        raise ValidationError(f"unknown metric {metric!r}; expected one of {RATE_NAMES}")

    per_capacity: list[list[float | None]] = [[] for _ in caps]
    for scenario in scenarios:
        results = evaluate_over_capacities(scenario.net1, scenario.net2, caps, limits, storage_cfg)
        for i, res in enumerate(results):
            per_capacity[i].append(res.system(system).rate(metric))
    means = tuple(mean_defined(vals)[0] for vals in per_capacity)
    deltas = tuple(b - a for a, b in zip(means, means[1:]))
    return MarginalCurve(tuple(caps), means, deltas)
