"""Shared synthetic profiles, pools and study fixtures.

The pool archetypes are deliberately anti-correlated: residential load
peaks in the evening, commercial load peaks near midday, and PV follows a
midday bell. Everything is deterministic given the constructor arguments.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from b2bvalue.profiles import PoolClass, PoolEntry, Profile, ProfilePool

DT = 0.5


def _hours(days: int, dt: float = DT) -> np.ndarray:
    steps = int(round(24.0 / dt)) * days
    return (np.arange(steps) * dt) % 24.0


def residential_profile(days: int, peak_kw: float = 100.0, dt: float = DT,
                        phase_h: float = 0.0, base: float = 0.25) -> Profile:
    """Evening-peaking load: low at midday, maximum around 19:00."""
    h = _hours(days, dt)
    shape = base + (1.0 - base) * np.exp(-((h - (19.0 + phase_h)) / 2.5) ** 2)
    shape += 0.15 * np.exp(-((h - 7.0) / 1.5) ** 2)
    return Profile(peak_kw * shape / shape.max(), dt, label="residential")


def commercial_profile(days: int, peak_kw: float = 100.0, dt: float = DT,
                       width_h: float = 3.5, base: float = 0.2) -> Profile:
    """Midday-peaking load: business-hours plateau centered on 12:30."""
    h = _hours(days, dt)
    shape = base + (1.0 - base) * np.exp(-((h - 12.5) / width_h) ** 2)
    return Profile(peak_kw * shape / shape.max(), dt, label="commercial")


def pv_per_unit_profile(days: int, dt: float = DT, day_scales=None,
                        width_h: float = 2.8) -> Profile:
    """Per-unit PV bell centered at noon; one brightness scale per day."""
    steps_per_day = int(round(24.0 / dt))
    h = (np.arange(steps_per_day) * dt) % 24.0
    bell = np.exp(-((h - 12.0) / width_h) ** 2)
    bell[bell < 1e-3] = 0.0
    if day_scales is None:
        day_scales = [1.0] * days
    assert len(day_scales) == days
    values = np.concatenate([bell * s for s in day_scales])
    return Profile(values / max(values.max(), 1e-12), dt, label="pv")


def make_pool(days: int = 3, dt: float = DT, n_r: int = 3, n_c: int = 3,
              n_pv: int = 3) -> ProfilePool:
    """Anti-correlated synthetic pool with per-entry variety."""
    rng = np.random.default_rng(20240811)
    entries = []
    for i in range(n_r):
        profile = residential_profile(days, peak_kw=80.0 + 30.0 * i, dt=dt,
                                      phase_h=0.5 * i, base=0.2 + 0.05 * i)
        entries.append(PoolEntry(f"r{i}", PoolClass.RESIDENTIAL, profile))
    for i in range(n_c):
        profile = commercial_profile(days, peak_kw=120.0 + 40.0 * i, dt=dt,
                                     width_h=3.0 + 0.5 * i)
        entries.append(PoolEntry(f"c{i}", PoolClass.COMMERCIAL, profile))
    for i in range(n_pv):
        scales = np.clip(rng.uniform(0.25, 1.0, size=days), 0.0, 1.0)
        scales[i % days] = 1.0  # every entry has one clear-sky day
        profile = pv_per_unit_profile(days, dt=dt, day_scales=list(scales))
        entries.append(PoolEntry(f"pv{i}", PoolClass.PV, profile, per_unit=True))
    return ProfilePool(tuple(entries))


def write_pool(pool: ProfilePool, directory: Path) -> Path:
    """Persist a pool as profile CSVs plus a manifest; returns manifest path."""
    directory.mkdir(parents=True, exist_ok=True)
    lines = ["id,class,path,nameplate_kw"]
    for entry in pool.entries:
        fname = f"{entry.id}.csv"
        with open(directory / fname, "w", newline="\n", encoding="utf-8") as fh:
            fh.write("kw\n")
            for v in entry.profile.values:
                fh.write("%.17g\n" % v)
        nameplate = "1" if entry.pool_class is PoolClass.PV else ""
        lines.append(f"{entry.id},{entry.pool_class.value},{fname},{nameplate}")
    manifest = directory / "manifest.csv"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


def random_profile(rng, n: int, dt: float = DT, lo: float = -200.0, hi: float = 200.0) -> Profile:
    return Profile(rng.uniform(lo, hi, size=n), dt)


def write_study_config(path: Path, pool_manifest: Path, *, sets, master_seed=42,
                       capacities=(500.0,), back_feed_limit=0.0, percentiles=(5, 95),
                       storage=None, hosting=None, metric=None) -> Path:
    doc = {
        "master_seed": master_seed,
        "pool_manifest": str(pool_manifest),
        "back_feed_limit_kw": back_feed_limit,
        "converter_capacities_kw": list(capacities),
        "percentiles": list(percentiles),
        "sets": sets,
    }
    if storage is not None:
        doc["storage"] = storage
    if hosting is not None:
        doc["hosting"] = hosting
    if metric is not None:
        doc["metric"] = metric
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return path


def simple_set(set_id="set1", x1=0.0, x2=1.0, nodes=4, penetrations=(1.0,),
               reps=2, **extra) -> dict:
    doc = {
        "set_id": set_id,
        "system1": {"commercial_fraction": x1, "node_count": nodes},
        "system2": {"commercial_fraction": x2, "node_count": nodes},
        "pv_penetrations": list(penetrations),
        "profiles_per_subset": reps,
    }
    doc.update(extra)
    return doc


@pytest.fixture()
def pool():
    return make_pool()


@pytest.fixture()
def pool_dir(tmp_path):
    pool = make_pool()
    manifest = write_pool(pool, tmp_path / "pool")
    return manifest
