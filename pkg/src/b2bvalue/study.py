"""End-to-end study orchestration: config file, database cache, result files.

A study is one JSON document: the profile pool, the set specs, the
evaluation parameters, and a master seed. ``run_study`` materializes (or
reuses) the scenario database on disk, evaluates every scenario at every
configured converter capacity, and writes per-scenario, summary, marginal
and hosting CSVs plus a manifest with a content hash per file. Outputs are
byte-identical across reruns and across worker counts: scenarios are
generated from per-scenario seeds, evaluated independently, and aggregated
in canonical (set, subset, repetition) order.
"""

from __future__ import annotations

import hashlib
import json
import logging
import multiprocessing
import os
import shutil
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import pandas as pd

from .engine import GridLimits, UNLIMITED
from .errors import AggregationError, B2BValueError, ConfigError, EvaluationError, ValidationError
from .hosting import (
    AggMode,
    HostingQuery,
    estimate_vlsm,
    evaluate_hosting,
    load_network_json,
    load_vlsm_csv,
)
from .metrics import RATE_NAMES, evaluate_over_capacities, mean_defined, summarize
from .profiles import Profile, load_pool_manifest
from .scenario import (
    MixSpec,
    PvSpec,
    SetSpec,
    ShuffleMode,
    SubsetSpec,
    load_database_manifest,
    save_database,
)
from .storage import AbsorbMode, ClampMode, StorageConfig

log = logging.getLogger("b2bvalue")

TOOLKIT_VERSION = "0.1.0"

SCENARIO_COLUMNS = [
    "set", "subset", "rep", "system",
    "r_ec", "r_ees", "r_pes", "r_deep",
    "e_c", "e_c_prime", "cap_kwh", "cap_prime_kwh",
    "rating_kw", "rating_prime_kw", "deep", "deep_prime",
]

_NUMBER = {"type": "number"}
_NONNEG = {"type": "number", "minimum": 0}
_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_LIMIT = {"oneOf": [{"type": "number", "minimum": 0}, {"const": "unlimited"}]}
_CAPACITIES = {"type": "array", "minItems": 1, "items": _NONNEG}

_STORAGE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "eta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "initial_energy_kwh": _NONNEG,
        "clamp_mode": {"enum": ["clamped", "literal"]},
        "absorb_mode": {"enum": ["all_excess", "above_limit"]},
        "deep_cycle_threshold": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
    },
}

_SYSTEM_SCHEMA = {
    "type": "object",
    "required": ["commercial_fraction", "node_count"],
    "additionalProperties": False,
    "properties": {
        "commercial_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "node_count": {"type": "integer", "minimum": 1},
        "target_peak_kw": _POSITIVE,
    },
}

_SET_SCHEMA = {
    "type": "object",
    "required": ["set_id", "system1", "system2", "pv_penetrations"],
    "additionalProperties": False,
    "properties": {
        "set_id": {"type": "string", "pattern": "^[A-Za-z0-9._-]+$"},
        "system1": _SYSTEM_SCHEMA,
        "system2": _SYSTEM_SCHEMA,
        "pv_penetrations": {
            "type": "array",
            "minItems": 1,
            "items": {
                "oneOf": [
                    _POSITIVE,
                    {"type": "array", "minItems": 2, "maxItems": 2, "items": _POSITIVE},
                ]
            },
        },
        "shuffle_mode": {"enum": ["free", "seasonal"]},
        "profiles_per_subset": {"type": "integer", "minimum": 1},
        "converter_capacities_kw": _CAPACITIES,
        "back_feed_limit_kw": _LIMIT,
        "storage": _STORAGE_SCHEMA,
    },
}

_HOSTING_SCHEMA = {
    "type": "object",
    "required": ["beta", "weak_buses", "delta_p_kw"],
    "additionalProperties": False,
    "properties": {
        "network": {"type": "string"},
        "vlsm": {"type": "string"},
        "vlsm_q": {"type": "string"},
        "perturbation_w": _POSITIVE,
        "beta": {"type": "string"},
        "weak_buses": {"type": "array", "minItems": 1, "items": {"type": "string"}},
        "delta_p_kw": _NONNEG,
        "aggregate": {"enum": ["min", "mean"]},
        "base_capacity_kw": _POSITIVE,
        "baseline_voltages_v": {"type": "object", "additionalProperties": _NUMBER},
    },
}

STUDY_SCHEMA = {
    "type": "object",
    "required": ["master_seed", "pool_manifest", "sets"],
    "additionalProperties": False,
    "properties": {
        "master_seed": {"type": "integer", "minimum": 0},
        "pool_manifest": {"type": "string"},
        "output_dir": {"type": "string"},
        "percentiles": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 100}},
        "back_feed_limit_kw": _LIMIT,
        "storage": _STORAGE_SCHEMA,
        "converter_capacities_kw": _CAPACITIES,
        "metric": {"enum": list(RATE_NAMES)},
        "hosting": _HOSTING_SCHEMA,
        "sets": {"type": "array", "minItems": 1, "items": _SET_SCHEMA},
    },
}


@dataclass(frozen=True)
class HostingStudySpec:
    beta: str
    weak_buses: tuple[str, ...]
    delta_p_kw: float
    aggregate: AggMode
    network_path: Path | None = None
    vlsm_path: Path | None = None
    vlsm_q_path: Path | None = None
    perturbation_w: float = 1000.0
    base_capacity_kw: float | None = None
    baseline_voltages_v: dict[str, float] | None = None


@dataclass(frozen=True)
class StudyConfig:
    master_seed: int
    pool_manifest: Path
    sets: tuple[SetSpec, ...]
    grid: GridLimits
    storage: StorageConfig
    percentiles: tuple[float, ...]
    metric: str
    converter_capacities_kw: tuple[float, ...] | None
    output_dir: Path | None
    hosting: HostingStudySpec | None
    config_sha256: str

    def capacities_for(self, spec: SetSpec) -> tuple[float, ...]:
        caps = spec.converter_capacities_kw or self.converter_capacities_kw
        if not caps:
            raise ConfigError(
                f"set {spec.set_id!r}: no converter capacities configured (set "
                "'converter_capacities_kw' globally or per set)"
            )
        return caps

    def grid_for(self, spec: SetSpec) -> GridLimits:
        return spec.grid if spec.grid is not None else self.grid

    def storage_for(self, spec: SetSpec) -> StorageConfig:
        return spec.storage if spec.storage is not None else self.storage


def _require_increasing(caps, where: str) -> None:
    if caps is None:
        return
    values = [float(c) for c in caps]
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError(f"{where}: capacity grid must be strictly increasing")


def _parse_limit(value) -> GridLimits:
    if value == "unlimited":
        return GridLimits(UNLIMITED)
    return GridLimits(float(value))


def _parse_storage(obj: dict) -> StorageConfig:
    return StorageConfig(
        eta=float(obj.get("eta", 1.0)),
        initial_energy_kwh=float(obj.get("initial_energy_kwh", 0.0)),
        clamp_mode=ClampMode(obj.get("clamp_mode", "clamped")),
        absorb_mode=AbsorbMode(obj.get("absorb_mode", "all_excess")),
        deep_cycle_threshold=float(obj.get("deep_cycle_threshold", 0.8)),
    )


def _parse_set(obj: dict) -> SetSpec:
    shuffle = ShuffleMode(obj.get("shuffle_mode", "free"))
    subsets = []
    for pen in obj["pv_penetrations"]:
        if isinstance(pen, list):
            p1, p2 = float(pen[0]), float(pen[1])
        else:
            p1 = p2 = float(pen)
        subsets.append(SubsetSpec(PvSpec(p1, shuffle), PvSpec(p2, shuffle)))
    sys1, sys2 = obj["system1"], obj["system2"]
    return SetSpec(
        set_id=obj["set_id"],
        system1=MixSpec(float(sys1["commercial_fraction"]), int(sys1["node_count"])),
        system2=MixSpec(float(sys2["commercial_fraction"]), int(sys2["node_count"])),
        subsets=tuple(subsets),
        profiles_per_subset=int(obj.get("profiles_per_subset", 500)),
        target_peak1_kw=sys1.get("target_peak_kw"),
        target_peak2_kw=sys2.get("target_peak_kw"),
        converter_capacities_kw=(
            tuple(float(c) for c in obj["converter_capacities_kw"])
            if "converter_capacities_kw" in obj else None
        ),
        grid=_parse_limit(obj["back_feed_limit_kw"]) if "back_feed_limit_kw" in obj else None,
        storage=_parse_storage(obj["storage"]) if "storage" in obj else None,
    )


def _parse_hosting(obj: dict, base_dir: Path) -> HostingStudySpec:
    if ("network" in obj) == ("vlsm" in obj):
        raise ConfigError("$.hosting: give exactly one of 'network' or 'vlsm'")
    voltages = obj.get("baseline_voltages_v")
    return HostingStudySpec(
        beta=obj["beta"],
        weak_buses=tuple(obj["weak_buses"]),
        delta_p_kw=float(obj["delta_p_kw"]),
        aggregate=AggMode(obj.get("aggregate", "min")),
        network_path=base_dir / obj["network"] if "network" in obj else None,
        vlsm_path=base_dir / obj["vlsm"] if "vlsm" in obj else None,
        vlsm_q_path=base_dir / obj["vlsm_q"] if "vlsm_q" in obj else None,
        perturbation_w=float(obj.get("perturbation_w", 1000.0)),
        base_capacity_kw=obj.get("base_capacity_kw"),
        baseline_voltages_v={str(k): float(v) for k, v in voltages.items()} if voltages else None,
    )


def load_study_config(path) -> StudyConfig:
    """Parse and validate a study JSON document; paths resolve relative to it."""
    path = Path(path)
    raw_bytes = path.read_bytes()
    try:
        doc = json.loads(raw_bytes)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    validator = jsonschema.Draft202012Validator(STUDY_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: e.json_path)
    if errors:
        first = errors[0]
        raise ConfigError(f"{path}: {first.json_path}: {first.message}")

    base_dir = path.parent
    try:
        sets = tuple(_parse_set(s) for s in doc["sets"])
    except B2BValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    set_ids = [s.set_id for s in sets]
    if len(set(set_ids)) != len(set_ids):
        raise ConfigError(f"{path}: duplicate set_id")
    caps = doc.get("converter_capacities_kw")
    _require_increasing(caps, f"{path}: $.converter_capacities_kw")
    for i, spec in enumerate(sets):
        _require_increasing(spec.converter_capacities_kw,
                            f"{path}: $.sets[{i}].converter_capacities_kw")
    return StudyConfig(
        master_seed=int(doc["master_seed"]),
        pool_manifest=base_dir / doc["pool_manifest"],
        sets=sets,
        grid=_parse_limit(doc.get("back_feed_limit_kw", "unlimited")),
        storage=_parse_storage(doc.get("storage", {})),
        percentiles=tuple(float(q) for q in doc.get("percentiles", (5.0, 95.0))),
        metric=doc.get("metric", "r_ec"),
        converter_capacities_kw=tuple(float(c) for c in caps) if caps else None,
        output_dir=base_dir / doc["output_dir"] if "output_dir" in doc else None,
        hosting=_parse_hosting(doc["hosting"], base_dir) if "hosting" in doc else None,
        config_sha256=hashlib.sha256(raw_bytes).hexdigest(),
    )


# ---------------------------------------------------------------------------
# generation fingerprint and database cache


def pool_digest(manifest_path) -> str:
    """Hash of the pool manifest plus every referenced profile file."""
    manifest_path = Path(manifest_path)
    h = hashlib.sha256()
    h.update(manifest_path.read_bytes())
    frame = pd.read_csv(manifest_path, dtype=str)
    for rel in frame["path"]:
        h.update((manifest_path.parent / rel).read_bytes())
    return h.hexdigest()


def _subset_dict(sub: SubsetSpec) -> dict:
    return {
        "label": sub.label,
        "pv1": {"penetration": sub.pv1.penetration, "mode": sub.pv1.shuffle_mode.value},
        "pv2": {"penetration": sub.pv2.penetration, "mode": sub.pv2.shuffle_mode.value},
    }


def generation_fingerprint(config: StudyConfig, pool_hash: str) -> str:
    """Hash of everything that influences scenario generation."""
    doc = {
        "master_seed": config.master_seed,
        "pool": pool_hash,
        "sets": [
            {
                "set_id": s.set_id,
                "system1": {"x": s.system1.commercial_fraction, "n": s.system1.node_count},
                "system2": {"x": s.system2.commercial_fraction, "n": s.system2.node_count},
                "subsets": [_subset_dict(u) for u in s.subsets],
                "profiles_per_subset": s.profiles_per_subset,
                "target_peak1_kw": s.target_peak1_kw,
                "target_peak2_kw": s.target_peak2_kw,
            }
            for s in config.sets
        ],
    }
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _looks_like_partial_database(db_dir: Path) -> bool:
    for entry in db_dir.iterdir():
        if not entry.is_dir():
            return False
        for item in entry.iterdir():
            ok = item.name == "manifest.json" or (
                item.is_file() and item.name.startswith("sub") and item.suffix == ".csv")
            if not ok:
                return False
    return True


def ensure_database(db_dir, pool, config: StudyConfig, gen_hash: str) -> None:
    """Reuse a cached database when its generation hash matches, else rebuild."""
    db_dir = Path(db_dir)
    if (db_dir / "manifest.json").exists():
        manifest = load_database_manifest(db_dir)
        if manifest.get("generation_hash") == gen_hash:
            log.info("reusing cached database at %s", db_dir)
            return
        log.info("database at %s is stale; regenerating", db_dir)
        shutil.rmtree(db_dir)
    elif db_dir.exists() and any(db_dir.iterdir()):
        # no top-level manifest: either an interrupted generation (set dirs
        # holding only scenario CSVs and set manifests) or a directory that
        # is not ours; never delete the latter
        if _looks_like_partial_database(db_dir):
            log.info("removing incomplete database at %s", db_dir)
            shutil.rmtree(db_dir)
        else:
            raise ConfigError(
                f"{db_dir}: directory exists, is not a scenario database, and is "
                "not empty; refusing to overwrite"
            )
    save_database(db_dir, pool, config.sets, config.master_seed, generation_hash=gen_hash)


# ---------------------------------------------------------------------------
# parallel evaluation (workers read scenario CSVs and return plain tuples)

_WORKER: dict = {}


def _init_worker(db_dir, set_params) -> None:
    _WORKER["db_dir"] = Path(db_dir)
    _WORKER["params"] = set_params


def _system_tuple(sr) -> tuple:
    return (
        sr.r_ec, sr.r_ees, sr.r_pes, sr.r_deep,
        sr.e_c, sr.e_c_prime, sr.capacity_kwh, sr.capacity_prime_kwh,
        sr.rating_kw, sr.rating_prime_kw, sr.deep, sr.deep_prime,
    )


def _evaluate_task(task) -> list:
    set_id, fname, dt, subset_label, rep_index = task
    caps, limits, storage_cfg = _WORKER["params"][set_id]
    try:
        frame = pd.read_csv(_WORKER["db_dir"] / set_id / fname, float_precision="round_trip")
        net1 = Profile(frame["net1_kw"].to_numpy(), dt, label="net1")
        net2 = Profile(frame["net2_kw"].to_numpy(), dt, label="net2")
        results = evaluate_over_capacities(net1, net2, caps, limits, storage_cfg)
    except (B2BValueError, OSError, KeyError) as exc:
        raise EvaluationError(
            f"set {set_id} subset {subset_label} rep {rep_index}: {exc}"
        ) from None
    out = []
    for cap, res in zip(caps, results):
        out.append((cap, _system_tuple(res.system1), _system_tuple(res.system2)))
    return out


def _collect_tasks(db_dir, config: StudyConfig):
    db_dir = Path(db_dir)
    manifest = load_database_manifest(db_dir)
    configured = {s.set_id for s in config.sets}
    tasks = []
    for set_info in manifest["sets"]:
        set_id = set_info["set_id"]
        if set_id not in configured:
            raise ConfigError(f"database contains set {set_id!r} not present in the config")
        with open(db_dir / set_id / "manifest.json", encoding="utf-8") as fh:
            set_manifest = json.load(fh)
        for meta in set_manifest["scenarios"]:
            tasks.append((
                set_id, meta["file"], float(meta["dt_hours"]),
                meta["subset_label"], int(meta["rep_index"]),
            ))
    return tasks


def evaluate_database(db_dir, config: StudyConfig, jobs: int | None = None,
                      capacities_override=None):
    """Evaluate every stored scenario; returns (tasks, per-task rows)."""
    set_params = {}
    for spec in config.sets:
        caps = tuple(capacities_override) if capacities_override else config.capacities_for(spec)
        set_params[spec.set_id] = (caps, config.grid_for(spec), config.storage_for(spec))
    tasks = _collect_tasks(db_dir, config)
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs <= 1 or len(tasks) <= 1:
        _init_worker(db_dir, set_params)
        results = [_evaluate_task(t) for t in tasks]
    else:
        with multiprocessing.Pool(jobs, initializer=_init_worker,
                                  initargs=(db_dir, set_params)) as pool:
            results = pool.map(_evaluate_task, tasks)
    return tasks, results


# ---------------------------------------------------------------------------
# result files


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        raise AssertionError("unexpected bool")
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def _cap_label(cap: float) -> str:
    return f"cap{cap:g}kw"


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if not isinstance(v, str) else v for v in row) + "\n")


def write_result_files(out_dir, config: StudyConfig, tasks, results,
                       metric: str | None = None) -> dict[str, str]:
    """Write per-scenario, summary and marginal CSVs; returns name->sha256."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metric = metric or config.metric

    per_file_rows: dict[str, list] = {}
    summary_values: dict = {}
    marginal_values: dict = {}
    cap_labels: dict[float, str] = {}

    for task, task_rows in zip(tasks, results):
        set_id, _fname, _dt, subset_label, rep_index = task
        for cap, sys1_tuple, sys2_tuple in task_rows:
            label = cap_labels.setdefault(cap, _cap_label(cap))
            fname = f"scenarios_{set_id}__{label}.csv"
            rows = per_file_rows.setdefault(fname, [])
            for system, values in ((1, sys1_tuple), (2, sys2_tuple)):
                rows.append((set_id, subset_label, rep_index, system) + values)
                rates = values[:4]
                for rate_name, rate in zip(RATE_NAMES, rates):
                    summary_values.setdefault(
                        (label, set_id, subset_label, system, rate_name), []
                    ).append(rate)
                metric_value = rates[RATE_NAMES.index(metric)]
                marginal_values.setdefault((set_id, system), {}).setdefault(cap, []).append(
                    metric_value)

    hashes: dict[str, str] = {}
    for fname, rows in per_file_rows.items():
        path = out_dir / fname
        _write_csv(path, SCENARIO_COLUMNS, rows)
        hashes[fname] = _sha256(path)

    # one summary file per capacity: a row per (set, subset, system, metric)
    pct_headers = [f"p{q:g}" for q in config.percentiles]
    by_label: dict[str, list] = {}
    for (label, set_id, subset_label, system, rate_name), values in summary_values.items():
        by_label.setdefault(label, []).append((set_id, subset_label, system, rate_name, values))
    for label, entries in by_label.items():
        rows = []
        for set_id, subset_label, system, rate_name, values in entries:
            try:
                stats = summarize(values, config.percentiles)
                rows.append(
                    (set_id, subset_label, system, rate_name,
                     stats.max, stats.mean, stats.min, stats.median)
                    + tuple(stats.percentiles[q] for q in config.percentiles)
                    + (stats.n, stats.n_undefined)
                )
            except AggregationError:
                rows.append((set_id, subset_label, system, rate_name,
                             None, None, None, None) + (None,) * len(config.percentiles)
                            + (0, len(values)))
        fname = f"summary__{label}.csv"
        header = (["set", "subset", "system", "metric", "max", "mean", "min", "median"]
                  + pct_headers + ["n", "n_undefined"])
        _write_csv(out_dir / fname, header, rows)
        hashes[fname] = _sha256(out_dir / fname)

    # marginal curve per (set, system) when the capacity grid has >= 2 points
    marginal_rows = []
    for (set_id, system), by_cap in marginal_values.items():
        caps = sorted(by_cap)
        if len(caps) < 2:
            continue
        means = []
        for cap in caps:
            try:
                means.append(mean_defined(by_cap[cap])[0])
            except AggregationError:
                means.append(None)
        for i, (cap, mean) in enumerate(zip(caps, means)):
            delta = None
            if i > 0 and mean is not None and means[i - 1] is not None:
                delta = mean - means[i - 1]
            marginal_rows.append((set_id, system, metric, cap, mean, delta))
    if marginal_rows:
        fname = "marginal.csv"
        _write_csv(out_dir / fname,
                   ["set", "system", "metric", "capacity_kw", "mean_value", "delta"],
                   marginal_rows)
        hashes[fname] = _sha256(out_dir / fname)
    return hashes


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def run_hosting_study(spec: HostingStudySpec, out_path: Path) -> dict[str, str]:
    """Evaluate the hosting query and write ``hosting.csv``."""
    if spec.vlsm_path is not None:
        vlsm = load_vlsm_csv(spec.vlsm_path, spec.vlsm_q_path)
    else:
        network = load_network_json(spec.network_path)
        vlsm = estimate_vlsm(network, spec.perturbation_w)
    query = HostingQuery(
        beta=spec.beta,
        weak_buses=spec.weak_buses,
        delta_p_beta_w=spec.delta_p_kw * 1000.0,
        v_alpha_v=spec.baseline_voltages_v,
        base_capacity_w=spec.base_capacity_kw * 1000.0 if spec.base_capacity_kw else None,
    )
    result = evaluate_hosting(vlsm, query, spec.aggregate)
    rows = []
    for bus in result.per_bus:
        rows.append(("delta_kw", bus.bus, bus.delta_c_w / 1000.0, bus.v_alpha_v, bus.v_prime_v))
    rows.append((f"aggregate_{result.mode.value}_kw", "", result.aggregate_w / 1000.0, None, None))
    if result.r_cder is not None:
        rows.append(("r_cder", "", result.r_cder, None, None))
    _write_csv(out_path, ["record", "bus", "value", "v_alpha_v", "v_prime_v"], rows)
    return {out_path.name: _sha256(out_path)}


def run_study(config: StudyConfig, out_dir, jobs: int | None = None,
              db_dir=None, capacities_override=None, metric: str | None = None) -> dict:
    """Generate (or reuse) the database, evaluate, and write all result files.

    Returns the run manifest. ``db_dir`` points at an externally generated
    database; by default the database lives under ``<out_dir>/db``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pool = load_pool_manifest(config.pool_manifest)
    gen_hash = generation_fingerprint(config, pool_digest(config.pool_manifest))

    if db_dir is None:
        db_dir = out_dir / "db"
        ensure_database(db_dir, pool, config, gen_hash)
    else:
        db_dir = Path(db_dir)
        manifest = load_database_manifest(db_dir)
        if manifest.get("generation_hash") != gen_hash:
            raise ConfigError(
                f"database at {db_dir} was generated from a different config/seed/pool"
            )

    tasks, results = evaluate_database(db_dir, config, jobs, capacities_override)
    results_dir = out_dir / "results"
    if results_dir.exists():
        shutil.rmtree(results_dir)
    hashes = write_result_files(results_dir, config, tasks, results, metric)
    if config.hosting is not None:
        hashes.update(run_hosting_study(config.hosting, results_dir / "hosting.csv"))

    manifest = {
        "toolkit_version": TOOLKIT_VERSION,
        "master_seed": config.master_seed,
        "config_sha256": config.config_sha256,
        "generation_hash": gen_hash,
        "files": {f"results/{name}": digest for name, digest in sorted(hashes.items())},
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def write_report(results_dir, out_dir) -> dict:
    """Collate per-set scenario CSVs and summaries for the plot component."""
    results_dir = Path(results_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scenario_files = sorted(results_dir.glob("scenarios_*__cap*.csv"))
    if not scenario_files:
        raise ValidationError(f"{results_dir}: no scenario CSVs found")
    by_label: dict[str, list[Path]] = {}
    for path in scenario_files:
        label = path.stem.rsplit("__", 1)[1]
        by_label.setdefault(label, []).append(path)
    written: dict[str, str] = {}
    for label, paths in sorted(by_label.items()):
        out_path = out_dir / f"all_scenarios__{label}.csv"
        with open(out_path, "w", newline="\n", encoding="utf-8") as out:
            for i, path in enumerate(paths):
                lines = path.read_text(encoding="utf-8").splitlines(keepends=True)
                out.writelines(lines if i == 0 else lines[1:])
        written[out_path.name] = _sha256(out_path)

    summary_files = sorted(results_dir.glob("summary__cap*.csv"),
                           key=lambda p: float(p.stem.rsplit("__", 1)[1][3:-2]))
    if summary_files:
        out_path = out_dir / "all_summary.csv"
        with open(out_path, "w", newline="\n", encoding="utf-8") as out:
            for i, path in enumerate(summary_files):
                label = path.stem.rsplit("__", 1)[1]
                cap_value = label[len("cap"):-len("kw")]
                lines = path.read_text(encoding="utf-8").splitlines()
                if i == 0:
                    out.write("capacity_kw," + lines[0] + "\n")
                for line in lines[1:]:
                    out.write(f"{cap_value},{line}\n")
        written[out_path.name] = _sha256(out_path)

    marginal = results_dir / "marginal.csv"
    if marginal.exists():
        shutil.copyfile(marginal, out_dir / "marginal.csv")
        written["marginal.csv"] = _sha256(out_dir / "marginal.csv")

    manifest = {"files": dict(sorted(written.items()))}
    with open(out_dir / "report_manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
