"""Time-series power profiles and the categorized profile pool.

A profile is a uniformly sampled real-power series in kW with a fixed step
length in hours (default 0.5 h, i.e. 30-minute data). Load consumption is
positive; PV pool entries are stored per-unit of nameplate so penetration
scaling stays explicit.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path

import numpy as np

from .errors import ProfileParseError, ResolutionError, ValidationError

DEFAULT_DT_HOURS = 0.5

# 17 significant digits round-trip any float64 exactly.
_FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class Profile:
    """A uniformly sampled power series (kW)."""

    values: np.ndarray
    dt_hours: float = DEFAULT_DT_HOURS
    label: str = ""

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValidationError(f"profile {self.label!r}: need a 1-D series with >= 1 step")
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"profile {self.label!r}: non-finite value present")
        if not (self.dt_hours > 0 and math.isfinite(self.dt_hours)):
            raise ValidationError(f"profile {self.label!r}: dt_hours must be positive")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.size

    def with_values(self, values: np.ndarray, label: str | None = None) -> "Profile":
        return replace(self, values=values, label=self.label if label is None else label)


class PoolClass(enum.Enum):
    """Pool entry category; manifest codes are R, C and PV."""

    RESIDENTIAL = "R"
    COMMERCIAL = "C"
    PV = "PV"


@dataclass(frozen=True)
class PoolEntry:
    """One categorized pool profile; PV entries are per-unit of nameplate."""

    id: str
    pool_class: PoolClass
    profile: Profile
    per_unit: bool = False

    def __post_init__(self):
        vals = self.profile.values
        if np.any(vals < 0):
            raise ValidationError(f"pool entry {self.id!r}: negative power value")
        if self.pool_class is PoolClass.PV:
            if not self.per_unit:
                raise ValidationError(f"pool entry {self.id!r}: PV entries must be per-unit")
            if np.any(vals > 1.0):
                raise ValidationError(f"pool entry {self.id!r}: per-unit value above 1")
        elif self.per_unit:
            raise ValidationError(f"pool entry {self.id!r}: only PV entries are per-unit")


@dataclass(frozen=True)
class ProfilePool:
    """The categorized pool that scenario generation draws from."""

    entries: tuple[PoolEntry, ...] = field(default_factory=tuple)

    def __post_init__(self):
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValidationError("pool entry ids must be unique")

    def by_class(self, pool_class: PoolClass) -> tuple[PoolEntry, ...]:
        return tuple(e for e in self.entries if e.pool_class is pool_class)


def _require_compatible(profiles) -> tuple[float, int]:
    first = profiles[0]
    for p in profiles[1:]:
        if p.dt_hours != first.dt_hours:
            raise ValidationError(
                f"dt mismatch: {p.dt_hours} h vs {first.dt_hours} h ({p.label!r} vs {first.label!r})"
            )
        if len(p) != len(first):
            raise ValidationError(
                f"length mismatch: {len(p)} vs {len(first)} ({p.label!r} vs {first.label!r})"
            )
    return first.dt_hours, len(first)


def aggregate(profiles) -> Profile:
    """Element-wise sum of profiles sharing one step length and length.

    Summation is a left fold in list order, so the result is reproducible
    bit for bit.
    """
    profiles = list(profiles)
    if not profiles:
        raise ValidationError("aggregate needs at least one profile")
    _require_compatible(profiles)
    acc = profiles[0].values.copy()
    for p in profiles[1:]:
        acc += p.values
    return Profile(acc, profiles[0].dt_hours, label="aggregate")


def peak(profile: Profile) -> float:
    """Maximum power over all steps (kW)."""
    return float(np.max(profile.values))


def scale(profile: Profile, factor: float) -> Profile:
    """Element-wise multiply by a nonnegative factor."""
    if not (factor >= 0):
        raise ValidationError(f"scale factor must be >= 0, got {factor}")
    return profile.with_values(profile.values * factor)


def _parse_timestamp(text: str, path, line_no: int) -> datetime:
    try:
        return datetime.fromisoformat(text)
    except ValueError:
        raise ProfileParseError(path, line_no, f"bad timestamp {text!r}") from None


def parse_profile_csv(path, expected_dt_hours: float | None = None, label: str | None = None) -> Profile:
    """Read one profile from a CSV file.

    The file carries a header of either ``kw`` or ``timestamp,kw``. When
    timestamps are present, consecutive spacings must agree with each other
    (and with ``expected_dt_hours`` when given) to within one second;
    otherwise a :class:`ResolutionError` is raised.
    """
    if expected_dt_hours is not None and not (expected_dt_hours > 0):
        raise ValidationError("expected_dt_hours must be positive")
    path = Path(path)
    values: list[float] = []
    stamps: list[datetime] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ProfileParseError(path, 1, "empty file") from None
        cols = [c.strip().lower() for c in header]
        if cols == ["kw"]:
            has_ts = False
        elif cols == ["timestamp", "kw"]:
            has_ts = True
        else:
            raise ProfileParseError(path, 1, f"expected header 'kw' or 'timestamp,kw', got {header!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != (2 if has_ts else 1):
                raise ProfileParseError(path, line_no, f"expected {2 if has_ts else 1} column(s), got {len(row)}")
            if has_ts:
                stamps.append(_parse_timestamp(row[0].strip(), path, line_no))
            try:
                value = float(row[-1])
            except ValueError:
                raise ProfileParseError(path, line_no, f"bad power value {row[-1]!r}") from None
            if not math.isfinite(value):
                raise ValidationError(f"{path}:{line_no}: non-finite power value")
            values.append(value)
    if not values:
        raise ValidationError(f"{path}: no data rows")

    dt_hours = expected_dt_hours if expected_dt_hours is not None else DEFAULT_DT_HOURS
    if stamps and len(stamps) > 1:
        spacings = [(b - a).total_seconds() for a, b in zip(stamps, stamps[1:])]
        ref = spacings[0] if expected_dt_hours is None else expected_dt_hours * 3600.0
        for i, s in enumerate(spacings):
            if abs(s - ref) > 1.0:
                raise ResolutionError(
                    f"{path}: step {i + 1} spacing {s:.0f} s does not match {ref:.0f} s"
                )
        if expected_dt_hours is None:
            dt_hours = ref / 3600.0
    return Profile(np.array(values), dt_hours, label=label if label is not None else path.stem)


def write_profile_csv(profile: Profile, path) -> None:
    """Write a profile as a ``kw`` CSV; values keep full float64 precision."""
    path = Path(path)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("kw\n")
        for v in profile.values:
            fh.write(_FLOAT_FMT % v + "\n")


def load_pool_manifest(path, default_dt_hours: float | None = None) -> ProfilePool:
    """Load a pool from a manifest CSV with columns ``id,class,path``.

    Profile paths are resolved relative to the manifest location. PV
    profiles are normalized per-unit at ingest: by the optional
    ``nameplate_kw`` column when present, otherwise by their own maximum.
    """
    path = Path(path)
    base = path.parent
    entries: list[PoolEntry] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"id", "class", "path"}
        if reader.fieldnames is None or not required.issubset(set(reader.fieldnames)):
            raise ValidationError(f"{path}: manifest needs columns id,class,path")
        for line_no, row in enumerate(reader, start=2):
            code = row["class"].strip().upper()
            try:
                pool_class = PoolClass(code)
            except ValueError:
                raise ValidationError(f"{path}:{line_no}: unknown class {row['class']!r}") from None
            profile = parse_profile_csv(base / row["path"], expected_dt_hours=default_dt_hours,
                                        label=row["id"].strip())
            per_unit = False
            if pool_class is PoolClass.PV:
                nameplate = row.get("nameplate_kw")
                if nameplate is not None and nameplate.strip():
                    basis = float(nameplate)
                else:
                    basis = peak(profile)
                if not basis > 0:
                    raise ValidationError(f"{path}:{line_no}: PV entry has no positive nameplate basis")
                # divide (not multiply by reciprocal) so the peak maps to 1.0 exactly
                profile = profile.with_values(profile.values / basis)
                per_unit = True
            entries.append(PoolEntry(row["id"].strip(), pool_class, profile, per_unit=per_unit))
    return ProfilePool(tuple(entries))
