"""Net-load computation, converter power transfer, and curtailment accounting.

The converter moves real power between two feeders only when one has excess
generation (negative net load) and the other has unserved load (positive net
load). Per step, the transferred amount is the least of the exporter's
excess, the importer's need, and the converter capacity; the exchange is
lossless, so the combined net load of the two systems is conserved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .profiles import Profile, _require_compatible

UNLIMITED = math.inf


@dataclass(frozen=True)
class ConverterSpec:
    """Real-power capacity of the feeder tie (kW)."""

    capacity_kw: float

    def __post_init__(self):
        if not self.capacity_kw >= 0:
            raise ValidationError(f"converter capacity must be >= 0, got {self.capacity_kw}")


@dataclass(frozen=True)
class GridLimits:
    """Back-feed limit: reverse power a feeder may export upstream (kW)."""

    back_feed_limit_kw: float = UNLIMITED

    def __post_init__(self):
        if not self.back_feed_limit_kw >= 0:
            raise ValidationError(f"back-feed limit must be >= 0, got {self.back_feed_limit_kw}")


@dataclass(frozen=True)
class TransferResult:
    """Updated net loads plus the signed transfer series.

    ``transfer_kw`` is positive when power flows from system 1 to system 2.
    """

    net1_updated: Profile
    net2_updated: Profile
    transfer_kw: np.ndarray


def net_load(load: Profile, der: Profile) -> Profile:
    """Load minus generation; negative values mean excess generation."""
    _require_compatible([load, der])
    return Profile(load.values - der.values, load.dt_hours, label="net")


def apply_converter(net1: Profile, net2: Profile, conv: ConverterSpec) -> TransferResult:
    """Transfer power between the systems wherever their net loads oppose.

    Steps where both systems import, both export, or either is exactly
    zero transfer nothing.
    """
    _require_compatible([net1, net2])
    a = net1.values
    b = net2.values
    cap = conv.capacity_kw

    transfer = np.zeros_like(a)
    to2 = (a < 0.0) & (b > 0.0)
    if np.any(to2):
        transfer[to2] = np.minimum(np.minimum(-a[to2], b[to2]), cap)
    to1 = (a > 0.0) & (b < 0.0)
    if np.any(to1):
        transfer[to1] = -np.minimum(np.minimum(a[to1], -b[to1]), cap)

    upd1 = Profile(a + transfer, net1.dt_hours, label=net1.label)
    upd2 = Profile(b - transfer, net2.dt_hours, label=net2.label)
    return TransferResult(upd1, upd2, transfer)


def curtailed_energy(net: Profile, limits: GridLimits) -> float:
    """Energy curtailed because export exceeds the back-feed limit (kWh).

    Only the excess above the limit is curtailed, at steps where the net
    load is negative and its magnitude exceeds the limit.
    """
    excess = -net.values - limits.back_feed_limit_kw
    mask = (net.values < 0.0) & (excess > 0.0)
    if not np.any(mask):
        return 0.0
    return float(np.sum(excess[mask]) * net.dt_hours)


def write_transfer_csv(result: TransferResult, path) -> None:
    """Audit export of the transfer series as ``t,transfer_kw``."""
    path = Path(path)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("t,transfer_kw\n")
        for t, x in enumerate(result.transfer_kw):
            fh.write(f"{t},{float(x)!r}\n")
