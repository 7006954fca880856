"""Voltage-sensitivity-based hosting-capacity improvement.

A linearized radial (tree) feeder model supplies voltages: walking from the
source, each line adds ``(R * P + X * Q) / V_source`` where P, Q are the net
injections (generation positive) flowing through that line. Perturbing one
bus at a time and differencing voltages yields the voltage-load sensitivity
matrices, from which the capacity headroom freed by exporting power at the
tie bus follows in closed form.

Sign convention: sensitivities are w.r.t. net injection, so entries are
positive on a radial feeder; the exported tie power is given as a magnitude
and lowers the weak-bus voltage.
"""

from __future__ import annotations

import csv
import enum
import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    AggregationError,
    ModelError,
    SingularSensitivityError,
    ValidationError,
)


@dataclass(frozen=True)
class Bus:
    id: str
    v_nom: float

    def __post_init__(self):
        if not self.v_nom > 0:
            raise ValidationError(f"bus {self.id!r}: nominal voltage must be > 0")


@dataclass(frozen=True)
class Line:
    from_bus: str
    to_bus: str
    r_ohm: float
    x_ohm: float


@dataclass(frozen=True)
class RadialNetwork:
    """A tree of buses rooted at the source bus."""

    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    source_id: str
    source_v: float

    def __post_init__(self):
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            raise ModelError("bus ids must be unique")
        if self.source_id not in ids:
            raise ModelError(f"source bus {self.source_id!r} not among buses")
        if not self.source_v > 0:
            raise ModelError("source voltage must be > 0")
        known = set(ids)
        for ln in self.lines:
            if ln.from_bus not in known or ln.to_bus not in known:
                raise ModelError(f"line {ln.from_bus}->{ln.to_bus} references unknown bus")
        if len(self.lines) != len(self.buses) - 1:
            raise ModelError("not a tree: need exactly n_buses - 1 lines")
        # connectivity check doubles as cycle detection given the line count
        adjacency: dict[str, list[str]] = {i: [] for i in ids}
        for ln in self.lines:
            adjacency[ln.from_bus].append(ln.to_bus)
            adjacency[ln.to_bus].append(ln.from_bus)
        seen = {self.source_id}
        queue = deque([self.source_id])
        while queue:
            node = queue.popleft()
            for nxt in adjacency[node]:
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        if seen != known:
            raise ModelError("not a tree: network is disconnected")

    def bfs_order(self):
        """(ordered bus ids, parent map, line map keyed by child id)."""
        line_by_pair = {}
        adjacency: dict[str, list[str]] = {b.id: [] for b in self.buses}
        for ln in self.lines:
            adjacency[ln.from_bus].append(ln.to_bus)
            adjacency[ln.to_bus].append(ln.from_bus)
            line_by_pair[(ln.from_bus, ln.to_bus)] = ln
            line_by_pair[(ln.to_bus, ln.from_bus)] = ln
        order = [self.source_id]
        parent: dict[str, str | None] = {self.source_id: None}
        line_up: dict[str, Line] = {}
        queue = deque([self.source_id])
        while queue:
            node = queue.popleft()
            for nxt in adjacency[node]:
                if nxt not in parent:
                    parent[nxt] = node
                    line_up[nxt] = line_by_pair[(node, nxt)]
                    order.append(nxt)
                    queue.append(nxt)
        return order, parent, line_up

    def load_bus_ids(self) -> tuple[str, ...]:
        """Every bus except the source, in definition order."""
        return tuple(b.id for b in self.buses if b.id != self.source_id)


@dataclass(frozen=True)
class Vlsm:
    """Voltage sensitivities to real (V/W) and reactive (V/VAr) injections."""

    p_matrix: np.ndarray
    bus_ids: tuple[str, ...]
    q_matrix: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.bus_ids)
        for name, m in (("p_matrix", self.p_matrix), ("q_matrix", self.q_matrix)):
            if m is None:
                continue
            m = np.asarray(m, dtype=np.float64)
            if m.shape != (n, n):
                raise ValidationError(f"{name} must be {n}x{n}, got {m.shape}")
            if not np.all(np.isfinite(m)):
                raise ValidationError(f"{name} has non-finite entries")
            object.__setattr__(self, name, m)

    def index(self, bus_id: str) -> int:
        try:
            return self.bus_ids.index(bus_id)
        except ValueError:
            raise ValidationError(f"bus {bus_id!r} not in the sensitivity matrix") from None

    def p(self, i_bus: str, j_bus: str) -> float:
        return float(self.p_matrix[self.index(i_bus), self.index(j_bus)])


class AggMode(enum.Enum):
    MIN = "min"
    MEAN = "mean"


@dataclass(frozen=True)
class HostingQuery:
    """Exported tie power plus the weak buses it is judged against."""

    beta: str
    weak_buses: tuple[str, ...]
    delta_p_beta_w: float
    v_alpha_v: dict[str, float] | None = None
    base_capacity_w: float | None = None

    def __post_init__(self):
        if not self.weak_buses:
            raise ValidationError("need at least one weak bus")
        if not self.delta_p_beta_w >= 0:
            raise ValidationError("exported power magnitude must be >= 0")
        if self.base_capacity_w is not None and not self.base_capacity_w > 0:
            raise ValidationError("base capacity must be > 0")


@dataclass(frozen=True)
class BusHosting:
    bus: str
    delta_c_w: float
    v_alpha_v: float | None = None
    v_prime_v: float | None = None


@dataclass(frozen=True)
class HostingResult:
    per_bus: tuple[BusHosting, ...]
    mode: AggMode
    aggregate_w: float
    r_cder: float | None


def solve_lindistflow(net: RadialNetwork, p_injections_w: dict[str, float],
                      q_injections_var: dict[str, float] | None = None) -> dict[str, float]:
    """Per-bus voltages under the linearized, loss-free radial model."""
    for key in list(p_injections_w) + list(q_injections_var or {}):
        if key not in {b.id for b in net.buses}:
            raise ModelError(f"injection references unknown bus {key!r}")
    order, parent, line_up = net.bfs_order()
    p_sub = {b: float(p_injections_w.get(b, 0.0)) for b in order}
    q_sub = {b: float((q_injections_var or {}).get(b, 0.0)) for b in order}
    for node in reversed(order):
        up = parent[node]
        if up is not None:
            p_sub[up] += p_sub[node]
            q_sub[up] += q_sub[node]
    voltages = {net.source_id: net.source_v}
    for node in order[1:]:
        ln = line_up[node]
        voltages[node] = voltages[parent[node]] + (
            ln.r_ohm * p_sub[node] + ln.x_ohm * q_sub[node]
        ) / net.source_v
    return voltages


def estimate_vlsm(net: RadialNetwork, perturbation_w: float = 1000.0) -> Vlsm:
    """Finite-difference sensitivities, one injection column per load bus.

    The model is linear, so any positive perturbation yields the same
    matrices. The source bus is excluded: its voltage is fixed.
    """
    if not perturbation_w > 0:
        raise ValidationError("perturbation must be > 0")
    bus_ids = net.load_bus_ids()
    base = solve_lindistflow(net, {})
    n = len(bus_ids)
    p_matrix = np.zeros((n, n))
    q_matrix = np.zeros((n, n))
    for j, bus in enumerate(bus_ids):
        v_p = solve_lindistflow(net, {bus: perturbation_w})
        v_q = solve_lindistflow(net, {}, {bus: perturbation_w})
        for i, target in enumerate(bus_ids):
            p_matrix[i, j] = (v_p[target] - base[target]) / perturbation_w
            q_matrix[i, j] = (v_q[target] - base[target]) / perturbation_w
    return Vlsm(p_matrix, bus_ids, q_matrix)


def voltage_shift(v_alpha_v: float, p_alpha_beta: float, delta_p_beta_w: float) -> float:
    """Weak-bus voltage after exporting ``delta_p_beta_w`` at the tie bus."""
    return v_alpha_v - p_alpha_beta * delta_p_beta_w


def hosting_delta(p_alpha_beta: float, p_alpha_alpha: float, delta_p_beta_w: float) -> float:
    """Capacity headroom (W) freed at a weak bus by the exported tie power."""
    if p_alpha_alpha == 0:
        raise SingularSensitivityError("self-sensitivity is zero")
    return p_alpha_beta * delta_p_beta_w / p_alpha_alpha


def aggregate_hosting(deltas_w, mode: AggMode, base_capacity_w: float | None = None):
    """Min or mean of the per-bus deltas, plus the improvement rate."""
    deltas = [float(d) for d in deltas_w]
    if not deltas:
        raise AggregationError("no hosting deltas to aggregate")
    if mode is AggMode.MIN:
        value = min(deltas)
    else:
        total = 0.0
        for d in deltas:
            total += d
        value = total / len(deltas)
    r_cder = None
    if base_capacity_w is not None:
        if not base_capacity_w > 0:
            raise ValidationError("base capacity must be > 0")
        r_cder = value / base_capacity_w
    return value, r_cder


def evaluate_hosting(vlsm: Vlsm, query: HostingQuery, mode: AggMode = AggMode.MIN) -> HostingResult:
    """Per-weak-bus deltas and voltage shifts, plus the chosen aggregate."""
    per_bus = []
    for alpha in query.weak_buses:
        p_ab = vlsm.p(alpha, query.beta)
        p_aa = vlsm.p(alpha, alpha)
        delta = hosting_delta(p_ab, p_aa, query.delta_p_beta_w)
        v_alpha = None if query.v_alpha_v is None else query.v_alpha_v.get(alpha)
        v_prime = None if v_alpha is None else voltage_shift(v_alpha, p_ab, query.delta_p_beta_w)
        per_bus.append(BusHosting(alpha, delta, v_alpha, v_prime))
    aggregate, r_cder = aggregate_hosting([b.delta_c_w for b in per_bus], mode,
                                          query.base_capacity_w)
    return HostingResult(tuple(per_bus), mode, aggregate, r_cder)


# ---------------------------------------------------------------------------
# file formats


def load_network_json(path) -> RadialNetwork:
    """Read ``{buses:[{id,v_nom}], lines:[{from,to,r_ohm,x_ohm}], source:{id,v}}``."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError(f"{path}: invalid JSON: {exc}") from None
    try:
        buses = tuple(Bus(str(b["id"]), float(b["v_nom"])) for b in doc["buses"])
        lines = tuple(
            Line(str(l["from"]), str(l["to"]), float(l["r_ohm"]), float(l["x_ohm"]))
            for l in doc["lines"]
        )
        source = doc["source"]
        return RadialNetwork(buses, lines, str(source["id"]), float(source["v"]))
    except (KeyError, TypeError) as exc:
        raise ModelError(f"{path}: malformed network document ({exc})") from None


def load_vlsm_csv(p_path, q_path=None) -> Vlsm:
    """Read a square sensitivity matrix with bus-id header row and column."""
    bus_ids, p_matrix = _read_matrix_csv(p_path)
    q_matrix = None
    if q_path is not None:
        q_ids, q_matrix = _read_matrix_csv(q_path)
        if q_ids != bus_ids:
            raise ValidationError("P and Q matrices list different buses")
    return Vlsm(p_matrix, bus_ids, q_matrix)


def _read_matrix_csv(path):
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or len(rows[0]) < 2:
        raise ValidationError(f"{path}: expected a header row of bus ids")
    bus_ids = tuple(c.strip() for c in rows[0][1:])
    n = len(bus_ids)
    matrix = np.zeros((n, n))
    body = [r for r in rows[1:] if r]
    if len(body) != n:
        raise ValidationError(f"{path}: expected {n} data rows, got {len(body)}")
    for i, row in enumerate(body):
        if len(row) != n + 1:
            raise ValidationError(f"{path}: row {i + 2} has {len(row)} cells, expected {n + 1}")
        if row[0].strip() != bus_ids[i]:
            raise ValidationError(f"{path}: row {i + 2} id {row[0]!r} does not match header order")
        try:
            matrix[i, :] = [float(c) for c in row[1:]]
        except ValueError:
            raise ValidationError(f"{path}: row {i + 2} has a non-numeric entry") from None
    return bus_ids, matrix


def write_vlsm_csv(vlsm: Vlsm, p_path, q_path=None) -> None:
    _write_matrix_csv(p_path, vlsm.bus_ids, vlsm.p_matrix)
    if q_path is not None:
        if vlsm.q_matrix is None:
            raise ValidationError("no reactive matrix to write")
        _write_matrix_csv(q_path, vlsm.bus_ids, vlsm.q_matrix)


def _write_matrix_csv(path, bus_ids, matrix) -> None:
    path = Path(path)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("," + ",".join(bus_ids) + "\n")
        for i, bus in enumerate(bus_ids):
            cells = ",".join(repr(float(v)) for v in matrix[i, :])
            fh.write(f"{bus},{cells}\n")
