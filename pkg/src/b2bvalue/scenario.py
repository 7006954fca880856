"""Seeded Monte Carlo scenario database over load-mix / PV-penetration sets.

Each scenario pairs two feeders. A feeder's load is composed by drawing
profiles from the categorized pool (with replacement), aggregating per
class, and scaling the commercial aggregate so the realized commercial
peak share hits the requested fraction exactly. PV is a per-unit pool
profile scaled to ``penetration * peak load``. All randomness flows from a
single master seed through stable hashes, so regeneration is byte-identical
no matter how generation is ordered or parallelized.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .engine import GridLimits, net_load
from .errors import DegenerateInputError, GenerationError, ValidationError
from .profiles import PoolClass, Profile, ProfilePool, aggregate, peak, scale
from .storage import StorageConfig

_DAYS_PER_YEAR = 365
# cumulative day-of-year bounds of the four calendar quarters (non-leap)
_QUARTER_ENDS = (90, 181, 273, 365)


class ShuffleMode(enum.Enum):
    FREE = "free"
    SEASONAL = "seasonal"


@dataclass(frozen=True)
class MixSpec:
    """Load mix: commercial share of the class peak sum, and pool draws."""

    commercial_fraction: float
    node_count: int

    def __post_init__(self):
        if not (0.0 <= self.commercial_fraction <= 1.0):
            raise ValidationError("commercial_fraction must be in [0, 1]")
        if self.node_count < 1:
            raise ValidationError("node_count must be >= 1")


@dataclass(frozen=True)
class PvSpec:
    penetration: float
    shuffle_mode: ShuffleMode = ShuffleMode.FREE

    def __post_init__(self):
        if not self.penetration > 0:
            raise ValidationError("penetration must be > 0")


@dataclass(frozen=True)
class SubsetSpec:
    """One PV-penetration subset of a set (one PvSpec per system)."""

    pv1: PvSpec
    pv2: PvSpec
    label: str = ""

    def __post_init__(self):
        if not self.label:
            p1, p2 = self.pv1.penetration, self.pv2.penetration
            text = f"pv{p1 * 100:g}" if p1 == p2 else f"pv{p1 * 100:g}-{p2 * 100:g}"
            object.__setattr__(self, "label", text)


@dataclass(frozen=True)
class SetSpec:
    """One data set: two feeder mixes crossed with PV-penetration subsets."""

    set_id: str
    system1: MixSpec
    system2: MixSpec
    subsets: tuple[SubsetSpec, ...]
    profiles_per_subset: int = 500
    target_peak1_kw: float | None = None
    target_peak2_kw: float | None = None
    converter_capacities_kw: tuple[float, ...] | None = None
    grid: GridLimits | None = None
    storage: StorageConfig | None = None

    def __post_init__(self):
        if not self.subsets:
            raise ValidationError(f"set {self.set_id!r}: needs at least one subset")
        if self.profiles_per_subset < 1:
            raise ValidationError(f"set {self.set_id!r}: profiles_per_subset must be >= 1")
        for target in (self.target_peak1_kw, self.target_peak2_kw):
            if target is not None and not target > 0:
                raise ValidationError(f"set {self.set_id!r}: target peak must be > 0")


@dataclass(frozen=True)
class FeederProvenance:
    residential_ids: tuple[str, ...]
    commercial_ids: tuple[str, ...]
    residential_peak_kw: float
    commercial_peak_kw: float
    commercial_scale: float | None
    target_scale: float | None = None


@dataclass(frozen=True)
class PvProvenance:
    source_id: str
    nameplate_kw: float
    shuffle_mode: str


@dataclass(frozen=True)
class Scenario:
    set_id: str
    subset_index: int
    subset_label: str
    rep_index: int
    sub_seed: int
    load1: Profile
    pv1: Profile
    net1: Profile
    load2: Profile
    pv2: Profile
    net2: Profile
    prov_load1: FeederProvenance
    prov_pv1: PvProvenance
    prov_load2: FeederProvenance
    prov_pv2: PvProvenance


@dataclass(frozen=True)
class ScenarioDatabase:
    master_seed: int
    scenarios: tuple[Scenario, ...] = field(default_factory=tuple)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for s in self.scenarios:
            h.update(f"{s.set_id}/{s.subset_index}/{s.rep_index}/{s.sub_seed}".encode())
            for p in (s.load1, s.pv1, s.net1, s.load2, s.pv2, s.net2):
                h.update(np.ascontiguousarray(p.values, dtype="<f8").tobytes())
        return h.hexdigest()


def derive_sub_seed(master_seed: int, *indices) -> int:
    """Stable 64-bit seed from the master seed and hierarchical indices."""
    h = hashlib.sha256()
    h.update(b"b2bvalue-seed:")
    h.update(str(int(master_seed)).encode())
    for ix in indices:
        h.update(b"/")
        h.update(str(ix).encode())
    return int.from_bytes(h.digest()[:8], "little")


def _draw(entries, rng, count):
    idx = rng.integers(0, len(entries), size=count)
    return [entries[int(i)] for i in idx]


def compose_feeder_load(pool: ProfilePool, mix: MixSpec, sub_seed: int):
    """Draw and combine pool profiles for one feeder.

    Returns ``(profile, provenance)``. For a mixed draw, the commercial
    aggregate is scaled by ``s = (x / (1 - x)) * (R_peak / C_peak)`` so the
    realized commercial peak share equals ``x`` exactly.
    """
    x = mix.commercial_fraction
    n = mix.node_count
    rng = np.random.default_rng(sub_seed)

    residential = pool.by_class(PoolClass.RESIDENTIAL)
    commercial = pool.by_class(PoolClass.COMMERCIAL)
    if x < 1.0 and not residential:
        raise GenerationError("pool has no residential profiles")
    if x > 0.0 and not commercial:
        raise GenerationError("pool has no commercial profiles")

    if x == 0.0:
        n_c = 0
    elif x == 1.0:
        n_c = n
    else:
        if n < 2:
            raise GenerationError("mixed loads need node_count >= 2")
        n_c = min(max(int(round(x * n)), 1), n - 1)
    n_r = n - n_c

    r_entries = _draw(residential, rng, n_r) if n_r else []
    c_entries = _draw(commercial, rng, n_c) if n_c else []
    r_agg = aggregate([e.profile for e in r_entries]) if r_entries else None
    c_agg = aggregate([e.profile for e in c_entries]) if c_entries else None
    r_peak = peak(r_agg) if r_agg is not None else 0.0
    c_peak = peak(c_agg) if c_agg is not None else 0.0

    if x == 0.0:
        if r_peak <= 0.0:
            raise DegenerateInputError("residential aggregate has zero peak")
        combined, s = r_agg, None
    elif x == 1.0:
        if c_peak <= 0.0:
            raise DegenerateInputError("commercial aggregate has zero peak")
        combined, s = c_agg, None
    else:
        if c_peak <= 0.0 or r_peak <= 0.0:
            raise DegenerateInputError("class aggregate has zero peak; mix ratio undefined")
        s = (x / (1.0 - x)) * (r_peak / c_peak)
        combined = aggregate([r_agg, scale(c_agg, s)])

    prov = FeederProvenance(
        residential_ids=tuple(e.id for e in r_entries),
        commercial_ids=tuple(e.id for e in c_entries),
        residential_peak_kw=r_peak,
        commercial_peak_kw=c_peak,
        commercial_scale=s,
    )
    return combined.with_values(combined.values, label="load"), prov


def _quarter_of_day(day_index: int) -> int:
    doy = day_index % _DAYS_PER_YEAR
    for q, end in enumerate(_QUARTER_ENDS):
        if doy < end:
            return q
    raise AssertionError("unreachable")


def _seasonal_shuffle(values: np.ndarray, dt_hours: float, rng) -> np.ndarray:
    """Permute whole days, keeping every day within its calendar quarter."""
    day_steps = int(round(24.0 / dt_hours))
    n_days = values.size // day_steps
    if day_steps < 1 or n_days < 2:
        return values.copy()
    groups: dict[int, list[int]] = {}
    for d in range(n_days):
        groups.setdefault(_quarter_of_day(d), []).append(d)
    order = np.arange(n_days)
    for q in sorted(groups):
        days = groups[q]
        perm = rng.permutation(len(days))
        order[days] = [days[int(i)] for i in perm]
    out = values.copy()
    for dst in range(n_days):
        src = int(order[dst])
        out[dst * day_steps:(dst + 1) * day_steps] = values[src * day_steps:(src + 1) * day_steps]
    return out


def assign_pv(pool: ProfilePool, pv: PvSpec, peak_load_kw: float, sub_seed: int):
    """Pick a per-unit PV profile and scale it to the penetration nameplate.

    Returns ``(profile, provenance)``. Seasonal shuffling reorders whole
    days within calendar quarters; free mode uses the drawn profile as-is
    (variety comes from the draw itself).
    """
    entries = pool.by_class(PoolClass.PV)
    if not entries:
        raise GenerationError("pool has no PV profiles")
    rng = np.random.default_rng(sub_seed)
    entry = entries[int(rng.integers(0, len(entries)))]
    values = entry.profile.values
    if pv.shuffle_mode is ShuffleMode.SEASONAL:
        values = _seasonal_shuffle(values, entry.profile.dt_hours, rng)
    nameplate = pv.penetration * peak_load_kw
    profile = scale(Profile(values, entry.profile.dt_hours, label="pv"), nameplate)
    return profile, PvProvenance(entry.id, nameplate, pv.shuffle_mode.value)


def materialize_scenario(pool: ProfilePool, spec: SetSpec, subset_index: int,
                         rep_index: int, master_seed: int, set_index: int) -> Scenario:
    """Build one scenario deterministically from its hierarchical indices."""
    subset = spec.subsets[subset_index]
    sub_seed = derive_sub_seed(master_seed, set_index, subset_index, rep_index)

    sides = []
    for sys_no, (mix, pvspec, target) in enumerate(
        ((spec.system1, subset.pv1, spec.target_peak1_kw),
         (spec.system2, subset.pv2, spec.target_peak2_kw)), start=1):
        load, prov_load = compose_feeder_load(pool, mix, derive_sub_seed(sub_seed, f"load{sys_no}"))
        if target is not None:
            load_peak = peak(load)
            if load_peak <= 0.0:
                raise DegenerateInputError("cannot retarget a zero-peak load")
            factor = target / load_peak
            load = scale(load, factor)
            prov_load = FeederProvenance(**{**asdict(prov_load), "target_scale": factor})
        pv, prov_pv = assign_pv(pool, pvspec, peak(load), derive_sub_seed(sub_seed, f"pv{sys_no}"))
        sides.append((load, pv, net_load(load, pv), prov_load, prov_pv))

    (load1, pv1, net1, pl1, pp1), (load2, pv2, net2, pl2, pp2) = sides
    return Scenario(
        set_id=spec.set_id, subset_index=subset_index, subset_label=subset.label,
        rep_index=rep_index, sub_seed=sub_seed,
        load1=load1, pv1=pv1, net1=net1, load2=load2, pv2=pv2, net2=net2,
        prov_load1=pl1, prov_pv1=pp1, prov_load2=pl2, prov_pv2=pp2,
    )


def iter_scenarios(pool: ProfilePool, specs, master_seed: int):
    """Yield scenarios in canonical (set, subset, repetition) order."""
    for set_index, spec in enumerate(specs):
        for subset_index in range(len(spec.subsets)):
            for rep_index in range(spec.profiles_per_subset):
                yield materialize_scenario(pool, spec, subset_index, rep_index,
                                           master_seed, set_index)


def generate_database(pool: ProfilePool, specs, master_seed: int) -> ScenarioDatabase:
    """Materialize every scenario of every set, in canonical order."""
    specs = list(specs)
    if not specs:
        raise ValidationError("at least one set spec is required")
    return ScenarioDatabase(master_seed, tuple(iter_scenarios(pool, specs, master_seed)))


# ---------------------------------------------------------------------------
# persistence: one directory per set, one CSV per scenario, manifests with
# provenance and content hashes


_SCENARIO_COLUMNS = ["load1_kw", "pv1_kw", "net1_kw", "load2_kw", "pv2_kw", "net2_kw"]


def _scenario_frame(s: Scenario) -> pd.DataFrame:
    return pd.DataFrame({
        "load1_kw": s.load1.values, "pv1_kw": s.pv1.values, "net1_kw": s.net1.values,
        "load2_kw": s.load2.values, "pv2_kw": s.pv2.values, "net2_kw": s.net2.values,
    })


def _scenario_filename(s: Scenario) -> str:
    return f"sub{s.subset_index:02d}_rep{s.rep_index:04d}.csv"


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def save_database(out_dir, pool: ProfilePool, specs, master_seed: int,
                  generation_hash: str | None = None) -> dict:
    """Generate and persist the database, streaming one scenario at a time.

    The top-level ``manifest.json`` is written last, so its presence marks
    a complete database. Returns the manifest dict.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    specs = list(specs)
    sets_meta = []
    combined = hashlib.sha256()
    for set_index, spec in enumerate(specs):
        set_dir = out_dir / spec.set_id
        set_dir.mkdir(parents=True, exist_ok=True)
        scen_meta = []
        for subset_index in range(len(spec.subsets)):
            for rep_index in range(spec.profiles_per_subset):
                s = materialize_scenario(pool, spec, subset_index, rep_index,
                                         master_seed, set_index)
                fname = _scenario_filename(s)
                fpath = set_dir / fname
                _scenario_frame(s).to_csv(fpath, index=False, float_format="%.17g",
                                          lineterminator="\n")
                digest = _sha256_file(fpath)
                combined.update(digest.encode())
                scen_meta.append({
                    "file": fname,
                    "subset_index": subset_index,
                    "subset_label": s.subset_label,
                    "rep_index": rep_index,
                    "sub_seed": s.sub_seed,
                    "dt_hours": s.net1.dt_hours,
                    "sha256": digest,
                    "provenance": {
                        "load1": asdict(s.prov_load1), "pv1": asdict(s.prov_pv1),
                        "load2": asdict(s.prov_load2), "pv2": asdict(s.prov_pv2),
                    },
                })
        set_manifest = {"set_id": spec.set_id, "scenarios": scen_meta}
        _write_json(set_dir / "manifest.json", set_manifest)
        sets_meta.append({"set_id": spec.set_id, "n_scenarios": len(scen_meta)})
    manifest = {
        "master_seed": master_seed,
        "sets": sets_meta,
        "content_hash": combined.hexdigest(),
    }
    if generation_hash is not None:
        manifest["generation_hash"] = generation_hash
    _write_json(out_dir / "manifest.json", manifest)
    return manifest


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_database_manifest(db_dir) -> dict:
    db_dir = Path(db_dir)
    manifest_path = db_dir / "manifest.json"
    if not manifest_path.exists():
        raise ValidationError(f"{db_dir}: no manifest.json (incomplete or missing database)")
    with open(manifest_path, encoding="utf-8") as fh:
        return json.load(fh)


def iter_saved_scenarios(db_dir):
    """Yield ``(set_id, meta, net1, net2)`` from a persisted database."""
    db_dir = Path(db_dir)
    manifest = load_database_manifest(db_dir)
    for set_info in manifest["sets"]:
        set_dir = db_dir / set_info["set_id"]
        with open(set_dir / "manifest.json", encoding="utf-8") as fh:
            set_manifest = json.load(fh)
        for meta in set_manifest["scenarios"]:
            # round_trip parsing recovers the exact float64 written as %.17g
            frame = pd.read_csv(set_dir / meta["file"], float_precision="round_trip")
            dt = float(meta["dt_hours"])
            net1 = Profile(frame["net1_kw"].to_numpy(), dt, label="net1")
            net2 = Profile(frame["net2_kw"].to_numpy(), dt, label="net2")
            yield set_info["set_id"], meta, net1, net2
