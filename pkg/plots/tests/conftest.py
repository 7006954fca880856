"""Fixtures: build real study outputs through the primary CLI.

The plots package consumes the primary component only through its external
interfaces (pool manifest CSV, study JSON, the ``b2bvalue`` command, result
CSVs), so the fixtures below drive exactly those.
"""

from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest


def _write_profile(path: Path, values) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("kw\n")
        for v in values:
            fh.write("%.17g\n" % float(v))


def _shapes(days: int, dt: float = 0.5):
    steps = int(round(24 / dt)) * days
    h = (np.arange(steps) * dt) % 24.0
    residential = 0.25 + 0.75 * np.exp(-((h - 19.0) / 2.5) ** 2)
    commercial = 0.2 + 0.8 * np.exp(-((h - 12.5) / 3.0) ** 2)
    bell = np.exp(-((h - 12.0) / 2.5) ** 2)
    day_scale = np.repeat([1.0, 0.55, 0.85, 0.4, 0.95, 0.7, 0.6, 1.0, 0.5, 0.8][:days]
                          if days <= 10 else [1.0] * days, int(round(24 / dt)))
    pv = bell * day_scale[:steps]
    return residential, commercial, pv / pv.max()


def make_pool_dir(directory: Path, days: int = 10) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    residential, commercial, pv = _shapes(days)
    rows = ["id,class,path,nameplate_kw"]
    for i, scale in enumerate((90.0, 120.0, 150.0)):
        _write_profile(directory / f"r{i}.csv", residential * scale)
        rows.append(f"r{i},R,r{i}.csv,")
        _write_profile(directory / f"c{i}.csv", commercial * (scale + 40.0))
        rows.append(f"c{i},C,c{i}.csv,")
        _write_profile(directory / f"pv{i}.csv", np.roll(pv, 4 * i))
        rows.append(f"pv{i},PV,pv{i}.csv,1")
    manifest = directory / "manifest.csv"
    manifest.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return manifest


def run_primary(*args: str) -> subprocess.CompletedProcess:
    return subprocess.run([sys.executable, "-m", "b2bvalue.cli", *args],
                          capture_output=True, text=True)


@pytest.fixture(scope="session")
def study_outputs(tmp_path_factory) -> dict:
    """A small anti-correlated study: 2 sets x 2 PV subsets, 100% PV included."""
    root = tmp_path_factory.mktemp("study")
    manifest = make_pool_dir(root / "pool")
    config = {
        "master_seed": 2024,
        "pool_manifest": str(manifest),
        "back_feed_limit_kw": 0.0,
        "converter_capacities_kw": [100.0, 400.0],
        "sets": [
            {
                "set_id": "resC",
                "system1": {"commercial_fraction": 0.0, "node_count": 4},
                "system2": {"commercial_fraction": 1.0, "node_count": 4},
                "pv_penetrations": [1.0, 1.5],
                "profiles_per_subset": 8,
            },
            {
                "set_id": "mix",
                "system1": {"commercial_fraction": 0.4, "node_count": 4},
                "system2": {"commercial_fraction": 0.6, "node_count": 4},
                "pv_penetrations": [1.0, 1.5],
                "profiles_per_subset": 8,
            },
        ],
    }
    config_path = root / "study.json"
    config_path.write_text(json.dumps(config, indent=2), encoding="utf-8")
    out = root / "out"
    proc = run_primary("run", "--config", str(config_path), "--out", str(out),
                       "--jobs", "1")
    assert proc.returncode == 0, proc.stderr
    report = root / "report"
    proc = run_primary("report", "--results", str(out / "results"), "--out", str(report))
    assert proc.returncode == 0, proc.stderr
    return {
        "per_scenario": report / "all_scenarios__cap400kw.csv",
        "per_scenario_low": report / "all_scenarios__cap100kw.csv",
        "marginal": report / "marginal.csv",
        "report_dir": report,
    }
