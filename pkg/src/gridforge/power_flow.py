"""Balanced AC power flow and the operational constraint checks.

Newton-Raphson in polar form on the conducting, energized MV sub-graph.
Every transformer acts as an ideal voltage source holding its MV busbar at
the scenario setpoint (slack); lines are series R+jX branches. Dense numpy
linear algebra is used throughout — planning areas are a few dozen buses,
where dense factorization beats any sparse machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from gridforge.grid_model import Grid, Scenario, apply_scenario
from gridforge.topology import _conducting_lines, _energized, _state_map, find_feeders, resupply_sequence

S_BASE_MVA = 1.0
TOLERANCE = 1e-8  # pu mismatch, infinity norm
MAX_ITERATIONS = 30


@dataclass(frozen=True)
class PfResult:
    converged: bool
    iterations: int
    vm: dict[str, float]  # pu, solved buses only
    va: dict[str, float]  # rad
    loading: dict[str, float]  # percent of i_max per line
    p_slack_mw: float
    q_slack_mvar: float

    @property
    def v(self) -> dict[str, float]:
        return self.vm


@dataclass(frozen=True)
class Violation:
    kind: str  # undervoltage | overvoltage | overload | unsupplied | nonconvergence
    element: str  # bus id, line id or scenario name
    magnitude: float  # pu below/above band, % points above limit; 1.0 for discrete kinds
    scenario: str
    contingency: str | None = None  # failed line id for contingency checks

    def __str__(self) -> str:
        ctx = f" (outage of {self.contingency})" if self.contingency else ""
        return f"{self.kind}({self.element})={self.magnitude:.4g} in {self.scenario}{ctx}"


@dataclass(frozen=True)
class ViolationReport:
    entries: tuple[Violation, ...] = ()

    @property
    def feasible(self) -> bool:
        return not self.entries

    @property
    def total_magnitude(self) -> float:
        return sum(v.magnitude for v in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def merged(self, other: "ViolationReport") -> "ViolationReport":
        return ViolationReport(self.entries + other.entries)


def polar_mismatch(ybus: np.ndarray, vm: np.ndarray, va: np.ndarray,
                   sbus: np.ndarray, pq: np.ndarray) -> np.ndarray:
    """Stacked real/imag power mismatch at the PQ buses (pu)."""
    v = vm * np.exp(1j * va)
    mis = v * np.conj(ybus @ v) - sbus
    return np.concatenate([mis[pq].real, mis[pq].imag])


def polar_jacobian(ybus: np.ndarray, vm: np.ndarray, va: np.ndarray,
                   pq: np.ndarray) -> np.ndarray:
    """Jacobian of :func:`polar_mismatch` w.r.t. [va[pq], vm[pq]]."""
    v = vm * np.exp(1j * va)
    i = ybus @ v
    diag_v = np.diag(v)
    ds_dva = 1j * diag_v @ np.conj(np.diag(i) - ybus @ diag_v)
    ds_dvm = diag_v @ np.conj(ybus @ np.diag(v / np.abs(v))) + np.conj(np.diag(i)) @ np.diag(v / np.abs(v))
    j11 = ds_dva[np.ix_(pq, pq)].real
    j12 = ds_dvm[np.ix_(pq, pq)].real
    j21 = ds_dva[np.ix_(pq, pq)].imag
    j22 = ds_dvm[np.ix_(pq, pq)].imag
    return np.block([[j11, j12], [j21, j22]])


def _newton(ybus: np.ndarray, sbus: np.ndarray, vm: np.ndarray, va: np.ndarray,
            pq: np.ndarray) -> tuple[np.ndarray, np.ndarray, int, bool]:
    n_pq = len(pq)
    for iteration in range(MAX_ITERATIONS + 1):
        f = polar_mismatch(ybus, vm, va, sbus, pq)
        if f.size == 0 or np.max(np.abs(f)) < TOLERANCE:
            return vm, va, iteration, True
        if iteration == MAX_ITERATIONS:
            break
        jac = polar_jacobian(ybus, vm, va, pq)
        try:
            dx = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            return vm, va, iteration, False
        if not np.all(np.isfinite(dx)):
            return vm, va, iteration, False
        va[pq] += dx[:n_pq]
        vm[pq] += dx[n_pq:]
    return vm, va, MAX_ITERATIONS, False


def run_power_flow(grid: Grid, scenario: Scenario,
                   switch_state: dict[str, bool] | None = None,
                   exclude_lines: frozenset[str] = frozenset()) -> PfResult:
    """Solve the energized MV grid for one scenario.

    Each conducting component holding at least one transformer busbar is
    solved with the busbar(s) fixed at the scenario setpoint. Buses without
    a voltage in the result were not energized (or not solvable) — the
    checks report the stations among them as unsupplied.
    """
    state = _state_map(grid, switch_state)
    inj = apply_scenario(grid, scenario)
    energized = _energized(grid, state, exclude_lines)
    lines = [l for l in _conducting_lines(grid, state, exclude_lines)
             if l.from_bus in energized and l.to_bus in energized]

    setpoint: dict[str, float] = {}
    for t in grid.transformers:
        if t.lv_bus in energized:
            setpoint[t.lv_bus] = inj.setpoints[t.id]

    # connected components of the solvable (line-coupled) MV graph
    adj: dict[str, list[str]] = {}
    for line in lines:
        adj.setdefault(line.from_bus, []).append(line.to_bus)
        adj.setdefault(line.to_bus, []).append(line.from_bus)
    todo = set(adj) | set(setpoint)
    components: list[list[str]] = []
    while todo:
        start = min(todo)
        comp = [start]
        todo.discard(start)
        queue = [start]
        while queue:
            bus = queue.pop()
            for other in adj.get(bus, ()):
                if other in todo:
                    todo.discard(other)
                    comp.append(other)
                    queue.append(other)
        components.append(sorted(comp))

    vm_out: dict[str, float] = {}
    va_out: dict[str, float] = {}
    loading: dict[str, float] = {}
    p_slack = q_slack = 0.0
    iterations = 0
    converged = True

    for comp in components:
        slack = [b for b in comp if b in setpoint]
        if not slack:
            continue  # nothing holds the voltage here; stays unsolved
        index = {bus: i for i, bus in enumerate(comp)}
        n = len(comp)
        vn = grid.buses_by_id[comp[0]].vn
        z_base = vn * vn / S_BASE_MVA

        ybus = np.zeros((n, n), dtype=complex)
        comp_lines = []
        for line in lines:
            if line.from_bus not in index:
                continue
            lt = grid.line_types_by_name[line.line_type]
            z = complex(lt.r_per_km, lt.x_per_km) * line.length / z_base
            if z == 0:
                raise ValueError(f"line {line.id} has zero impedance")
            y = 1.0 / z
            f, t = index[line.from_bus], index[line.to_bus]
            ybus[f, f] += y
            ybus[t, t] += y
            ybus[f, t] -= y
            ybus[t, f] -= y
            comp_lines.append((line, f, t, y))

        sbus = np.zeros(n, dtype=complex)
        for bus, i in index.items():
            sbus[i] = complex(-inj.p_mw.get(bus, 0.0), -inj.q_mvar.get(bus, 0.0)) / S_BASE_MVA

        vm = np.ones(n)
        va = np.zeros(n)
        slack_idx = np.array([index[b] for b in slack])
        vm[slack_idx] = [setpoint[b] for b in slack]
        pq = np.array([i for i in range(n) if comp[i] not in setpoint], dtype=int)

        vm, va, its, ok = _newton(ybus, sbus, vm, va, pq)
        iterations = max(iterations, its)
        converged = converged and ok
        if not ok:
            continue

        v = vm * np.exp(1j * va)
        i_inj = ybus @ v
        s_slack = (v[slack_idx] * np.conj(i_inj[slack_idx])).sum()
        p_slack += s_slack.real * S_BASE_MVA
        q_slack += s_slack.imag * S_BASE_MVA

        i_base_ka = S_BASE_MVA / (math.sqrt(3.0) * vn)
        for line, f, t, y in comp_lines:
            lt = grid.line_types_by_name[line.line_type]
            i_ka = abs((v[f] - v[t]) * y) * i_base_ka
            loading[line.id] = 100.0 * i_ka / lt.i_max
        for bus, i in index.items():
            vm_out[bus] = float(vm[i])
            va_out[bus] = float(va[i])

    return PfResult(converged=converged, iterations=iterations, vm=vm_out,
                    va=va_out, loading=loading, p_slack_mw=p_slack,
                    q_slack_mvar=q_slack)


def _band_violations(grid: Grid, result: PfResult, scenario: Scenario,
                     contingency: str | None) -> list[Violation]:
    v_min = scenario.v_min_cont if contingency else scenario.v_min
    v_max = scenario.v_max_cont if contingency else scenario.v_max
    out: list[Violation] = []
    if not result.converged:
        out.append(Violation("nonconvergence", scenario.name, 1.0, scenario.name, contingency))
    for bus in sorted(result.vm):
        vm = result.vm[bus]
        if vm < v_min:
            out.append(Violation("undervoltage", bus, v_min - vm, scenario.name, contingency))
        elif vm > v_max:
            out.append(Violation("overvoltage", bus, vm - v_max, scenario.name, contingency))
    for line in sorted(result.loading):
        pct = result.loading[line]
        if pct > scenario.loading_max:
            out.append(Violation("overload", line, pct - scenario.loading_max,
                                 scenario.name, contingency))
    return out


def check_normal_operation(grid: Grid, scenarios: Iterable[Scenario],
                           switch_state: dict[str, bool] | None = None) -> ViolationReport:
    """Voltage band and loading limits for every scenario, normal state."""
    entries: list[Violation] = []
    for scenario in scenarios:
        result = run_power_flow(grid, scenario, switch_state)
        entries.extend(_band_violations(grid, result, scenario, None))
        for station in grid.stations():
            if station.id not in result.vm:
                entries.append(Violation("unsupplied", station.id, 1.0, scenario.name))
    return ViolationReport(tuple(entries))


def check_contingency_operation(grid: Grid, scenarios: Sequence[Scenario],
                                switch_state: dict[str, bool] | None = None) -> ViolationReport:
    """N-1 check: fail each feeder-head line, resupply, verify the restored
    state under peak load against the widened contingency band.

    Only ``peak_load`` is evaluated — voltage support from generation gets
    no credit in contingency planning. Stations that stay dark are reported
    unless they are exempt (``requires_contingency_supply = False``).
    """
    peak_load = next((s for s in scenarios if s.name == "peak_load"), None)
    if peak_load is None:
        raise ValueError("contingency check needs a 'peak_load' scenario")
    entries: list[Violation] = []
    state = _state_map(grid, switch_state)
    for feeder in find_feeders(grid, state):
        failed = feeder.head_line
        sequence = resupply_sequence(grid, failed, state)
        result = run_power_flow(grid, peak_load, sequence.resulting_state,
                                exclude_lines=frozenset((failed,)))
        entries.extend(_band_violations(grid, result, peak_load, failed))
        for bus_id in sequence.unsupplied:
            if grid.buses_by_id[bus_id].requires_contingency_supply:
                entries.append(Violation("unsupplied", bus_id, 1.0, peak_load.name, failed))
    return ViolationReport(tuple(entries))
