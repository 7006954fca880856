"""Sizing-oriented energy-storage simulation and deep-cycle counting.

The store absorbs excess generation and discharges to cover unserved load,
one step at a time:

    E(t) = E(t-1) - P(t) * dt        (P positive = discharge)

Sizing takes the peak stored energy and the peak absolute power, each scaled
by the tolerance coefficient eta. The model is deliberately ideal: no
round-trip losses, no capacity cap while charging (the peak defines the
capacity to build).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .engine import GridLimits
from .errors import ValidationError
from .profiles import Profile


class ClampMode(enum.Enum):
    # CLAMPED: discharge stops at an empty store; LITERAL: run the
    # recurrence verbatim and let the energy trace go negative.
    CLAMPED = "clamped"
    LITERAL = "literal"


class AbsorbMode(enum.Enum):
    # ALL_EXCESS: charge with the full excess generation; ABOVE_LIMIT:
    # charge only with the portion that exceeds the back-feed limit.
    ALL_EXCESS = "all_excess"
    ABOVE_LIMIT = "above_limit"


@dataclass(frozen=True)
class StorageConfig:
    eta: float = 1.0
    initial_energy_kwh: float = 0.0
    clamp_mode: ClampMode = ClampMode.CLAMPED
    absorb_mode: AbsorbMode = AbsorbMode.ALL_EXCESS
    deep_cycle_threshold: float = 0.8

    def __post_init__(self):
        if not (0.0 < self.eta <= 1.0):
            raise ValidationError(f"eta must be in (0, 1], got {self.eta}")
        if not self.initial_energy_kwh >= 0:
            raise ValidationError("initial energy must be >= 0")
        if not (0.0 < self.deep_cycle_threshold <= 1.0):
            raise ValidationError("deep-cycle threshold must be in (0, 1]")


@dataclass(frozen=True)
class StorageTrajectory:
    """Stored energy and realized power series for one net-load input."""

    energy_kwh: np.ndarray
    power_kw: np.ndarray
    dt_hours: float


@dataclass(frozen=True)
class StorageSizing:
    capacity_kwh: float
    rating_kw: float
    deep_cycle_count: int | None = None


def _desired_power(net: Profile, limits: GridLimits, cfg: StorageConfig) -> np.ndarray:
    v = net.values
    if cfg.absorb_mode is AbsorbMode.ALL_EXCESS:
        return v.copy()
    # charge only with export beyond the back-feed limit; discharge untouched
    charge = np.maximum(-v - limits.back_feed_limit_kw, 0.0)
    return np.where(v >= 0.0, v, -charge)


def _clamped_steps(desired, dt: float, e0: float):
    # Sequential on purpose: each step's clamp depends on realized energy.
    energy = []
    power = []
    add_e = energy.append
    add_p = power.append
    e = e0
    for d in desired:
        if d > 0.0:
            drop = d * dt
            if drop > e:
                d = e / dt
                e = 0.0
            else:
                e = e - drop
        else:
            e = e - d * dt
        add_e(e)
        add_p(d)
    return energy, power


def simulate_storage(net: Profile, limits: GridLimits, cfg: StorageConfig) -> StorageTrajectory:
    """Run the storage recurrence over one net-load profile."""
    desired = _desired_power(net, limits, cfg)
    dt = net.dt_hours
    if cfg.clamp_mode is ClampMode.LITERAL:
        # cumsum with the initial energy prepended reproduces the
        # step-by-step recurrence bit for bit (left-to-right additions)
        deltas = -(desired * dt)
        energy = np.cumsum(np.concatenate(([cfg.initial_energy_kwh], deltas)))[1:]
        return StorageTrajectory(energy, desired, dt)
    energy, power = _clamped_steps(desired.tolist(), dt, cfg.initial_energy_kwh)
    return StorageTrajectory(np.asarray(energy), np.asarray(power), dt)


def size_storage(traj: StorageTrajectory, cfg: StorageConfig) -> StorageSizing:
    """Capacity from the energy peak, rating from the absolute power peak."""
    cap = cfg.eta * max(0.0, float(np.max(traj.energy_kwh)))
    rating = cfg.eta * float(np.max(np.abs(traj.power_kw)))
    return StorageSizing(cap, rating)


def count_deep_cycles(traj: StorageTrajectory, rating_kw: float, threshold: float = 0.8) -> int:
    """Count charge/discharge cycles whose peak power exceeds the threshold.

    The power series splits into maximal constant-sign runs (zeros break
    runs). A cycle is a charging run directly followed by a discharging
    run; it is deep when the larger of the two run peaks exceeds
    ``threshold * rating_kw``. A trailing unpaired run is not a cycle.
    """
    if not rating_kw >= 0:
        raise ValidationError("rating must be >= 0")
    runs: list[tuple[int, float]] = []  # (sign, peak |power|) per run
    sign = 0
    run_peak = 0.0
    for p in traj.power_kw.tolist():
        s = 1 if p > 0.0 else (-1 if p < 0.0 else 0)
        if s != sign:
            if sign != 0:
                runs.append((sign, run_peak))
            sign = s
            run_peak = 0.0
        if s != 0:
            run_peak = max(run_peak, abs(p))
    if sign != 0:
        runs.append((sign, run_peak))

    bar = threshold * rating_kw
    deep = 0
    for (s1, p1), (s2, p2) in zip(runs, runs[1:]):
        if s1 < 0 and s2 > 0 and max(p1, p2) > bar:
            deep += 1
    return deep


def write_trajectory_csv(traj: StorageTrajectory, path) -> None:
    """Export the trajectory as ``t,energy_kwh,power_kw``."""
    path = Path(path)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("t,energy_kwh,power_kw\n")
        for t, (e, p) in enumerate(zip(traj.energy_kwh, traj.power_kw)):
            fh.write(f"{t},{float(e)!r},{float(p)!r}\n")
