"""Orchestration: plan one grid area under all three concepts and compare.

For each concept the area is dismantled, rebuilt ``n_topologies`` times,
reinforced, automated and (for closed rings) meshed; the cheapest feasible
plan per concept becomes the reference after an independent re-validation
that trusts nothing the optimizer claimed. Reports land in
``<out>/<area>/<concept>/topology_<k>.json`` plus ``comparison.json`` and
``comparison.csv``.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

from gridforge.economics import (
    CONCEPTS,
    CostBreakdown,
    concept_overhead,
    plan_cost,
)
from gridforge.grid_model import (
    STATION_KINDS,
    Grid,
    grid_to_dict,
    validate_grid,
)
from gridforge.planner import (
    Measure,
    PlannerError,
    ReinforcementPlan,
    candidate_trails,
    dismantle,
    phase1_topologies,
    phase2_reinforce,
    phase3_automate,
    phase4_mesh,
)
from gridforge.power_flow import (
    check_contingency_operation,
    check_normal_operation,
)
from gridforge.principles import PlanningPrinciples
from gridforge.reliability import (
    FmeaResult,
    ReliabilityError,
    check_reliability,
    fmea,
)
from gridforge.topology import (
    check_contingency_supply,
    check_radiality,
    check_supply,
    find_stubs,
)

SEED_ENV_VAR = "GRIDFORGE_SEED"


@dataclass
class ConceptPlan:
    """One optimized topology under one concept, plus its paper trail."""

    concept: str
    topology: int
    feasible: bool
    grid: Grid | None = None
    measures: tuple[Measure, ...] = ()
    cost: CostBreakdown | None = None
    fmea: FmeaResult | None = None
    violations: tuple[str, ...] = ()
    reference: bool = False
    error: str | None = None


@dataclass
class ComparisonReport:
    area: str
    plans: dict[str, list[ConceptPlan]] = field(default_factory=dict)
    references: dict[str, ConceptPlan | None] = field(default_factory=dict)
    winner: str | None = None
    deltas: dict[str, dict[str, float | None]] = field(default_factory=dict)


def _flag_contingency_supply(grid: Grid) -> Grid:
    """Mark which stations must survive any single line failure.

    Explicit flags in the input win; otherwise every station that is not a
    structural stub in the baseline is required to keep a second path.
    """
    if any(b.requires_contingency_supply for b in grid.buses):
        return grid
    stubs = find_stubs(grid)
    buses = tuple(
        replace(b, requires_contingency_supply=True)
        if b.kind in STATION_KINDS and b.id not in stubs else b
        for b in grid.buses)
    return grid.replace(buses=buses)


def _phase_seeds(params_seed: int, k: int) -> tuple[int, int]:
    base = params_seed + 104729 * (k + 1)
    return base + 1, base + 3  # reinforcement seed, meshing seed


def _plan_chain(k: int, dismantled: Grid, trails: list[Measure],
                principles: PlanningPrinciples, baseline: FmeaResult,
                removed_station: str | None,
                with_closed_ring: bool) -> dict[str, ConceptPlan]:
    """Phases 1-3 for one radial topology, plus the derived closed-ring plan."""
    params = principles.planner
    seed2, seed4 = _phase_seeds(params.seed, k)
    out: dict[str, ConceptPlan] = {}
    bookkeeping = ()
    if removed_station is not None:
        bookkeeping = (Measure(kind="RemoveSwitchingStation", target=removed_station),)

    try:
        topo = phase1_topologies(
            dismantled, trails, replace(params, n_topologies=1, seed=params.seed + k))[0]
        reinf = phase2_reinforce(topo.grid, principles.scenarios,
                                 principles.cost_model, params, seed=seed2)
        auto = phase3_automate(reinf.grid, baseline, principles.reliability,
                               principles.cost_model)
    except (PlannerError, ReliabilityError) as exc:
        failed = ConceptPlan("radial", k, feasible=False, error=str(exc))
        out["radial"] = failed
        if with_closed_ring:
            out["closed_ring"] = ConceptPlan("closed_ring", k, feasible=False,
                                             error=str(exc))
        return out

    measures = topo.measures + reinf.measures + auto.measures + bookkeeping
    out["radial"] = ConceptPlan(
        "radial", k, feasible=True, grid=auto.grid, measures=measures,
        cost=plan_cost(auto.grid, measures, principles.cost_model),
        fmea=fmea(auto.grid, principles.reliability))

    if with_closed_ring:
        out["closed_ring"] = _mesh_plan(k, reinf, auto.measures, topo.measures,
                                        bookkeeping, principles, seed4)
    return out


def _mesh_plan(k: int, reinf: ReinforcementPlan, auto_measures: tuple[Measure, ...],
               topo_measures: tuple[Measure, ...], bookkeeping: tuple[Measure, ...],
               principles: PlanningPrinciples, seed: int) -> ConceptPlan:
    try:
        mesh = phase4_mesh(reinf, [m.target for m in auto_measures],
                           principles.scenarios, principles.cost_model,
                           principles.planner, seed=seed)
    except PlannerError as exc:
        return ConceptPlan("closed_ring", k, feasible=False, error=str(exc))
    moves = tuple(m for m in reinf.measures if m.kind == "SetSectioningPoint")
    measures = topo_measures + moves + auto_measures + mesh.measures + bookkeeping
    cost = (plan_cost(mesh.grid, measures, principles.cost_model)
            + concept_overhead(mesh.grid, "closed_ring", principles.cost_model))
    return ConceptPlan(
        "closed_ring", k, feasible=True, grid=mesh.grid, measures=measures,
        cost=cost,
        fmea=fmea(mesh.grid, principles.reliability, ring_protection=True))


def _plan_station(k: int, dismantled: Grid, trails: list[Measure],
                  principles: PlanningPrinciples, baseline: FmeaResult,
                  station: str) -> ConceptPlan:
    """Phases 1-3 for one topology that keeps (and renews) the station."""
    params = principles.planner
    seed2, _ = _phase_seeds(params.seed + 500009, k)
    try:
        topo = phase1_topologies(
            dismantled, trails,
            replace(params, n_topologies=1, seed=params.seed + 500009 + k))[0]
        reinf = phase2_reinforce(topo.grid, principles.scenarios,
                                 principles.cost_model, params, seed=seed2)
        auto = phase3_automate(reinf.grid, baseline, principles.reliability,
                               principles.cost_model)
    except (PlannerError, ReliabilityError) as exc:
        return ConceptPlan("switching_station", k, feasible=False, error=str(exc))
    renew = Measure(kind="RenewSwitchingStation", target=station,
                    cost_per_year=principles.cost_model.switching_station)
    measures = topo.measures + reinf.measures + auto.measures + (renew,)
    return ConceptPlan(
        "switching_station", k, feasible=True, grid=auto.grid, measures=measures,
        cost=plan_cost(auto.grid, measures, principles.cost_model),
        fmea=fmea(auto.grid, principles.reliability))


def _run_task(payload) -> tuple[str, int, dict[str, ConceptPlan]]:
    kind, k, args = payload
    if kind == "chain":
        return kind, k, _plan_chain(k, *args)
    return kind, k, {"switching_station": _plan_station(k, *args)}


def _validation_findings(plan: ConceptPlan, principles: PlanningPrinciples,
                         baseline: FmeaResult) -> tuple[str, ...]:
    """Re-run every validator the concept must satisfy, from scratch."""
    grid = plan.grid
    findings = [str(f) for f in validate_grid(grid)]
    findings += [str(v) for v in check_supply(grid)]
    if plan.concept != "closed_ring":
        findings += [str(v) for v in check_radiality(grid)]
    findings += [str(v) for v in check_contingency_supply(grid)]
    report = check_normal_operation(grid, principles.scenarios).merged(
        check_contingency_operation(grid, principles.scenarios))
    findings += [str(v) for v in report.entries]
    if plan.concept != "closed_ring":
        # closed rings are at least as reliable by construction: every
        # closed sectioning point is automated and ring faults clear
        # selectively, so the radial FMEA verdict carries over
        findings += [str(v) for v in
                     check_reliability(grid, principles.reliability, baseline)]
    return tuple(findings)


def _select_reference(plans: list[ConceptPlan], principles: PlanningPrinciples,
                      baseline: FmeaResult) -> ConceptPlan | None:
    """Cheapest plan that survives independent re-validation."""
    for plan in sorted((p for p in plans if p.feasible),
                       key=lambda p: (p.cost.total, p.topology)):
        plan.violations = _validation_findings(plan, principles, baseline)
        if not plan.violations:
            plan.reference = True
            return plan
        plan.feasible = False
        plan.error = "independent validation failed"
    return None


def compare(area: str, plans: dict[str, list[ConceptPlan]]) -> ComparisonReport:
    """Pick the winner and the pairwise annual cost deltas."""
    references = {
        concept: next((p for p in concept_plans if p.reference), None)
        for concept, concept_plans in plans.items()}
    costed = {c: r.cost.total for c, r in references.items() if r is not None}
    winner = min(sorted(costed), key=costed.get) if costed else None
    deltas: dict[str, dict[str, float | None]] = {}
    for a in sorted(plans):
        deltas[a] = {}
        for b in sorted(plans):
            if a == b:
                continue
            deltas[a][b] = (costed[a] - costed[b]
                            if a in costed and b in costed else None)
    return ComparisonReport(area=area, plans=plans, references=references,
                            winner=winner, deltas=deltas)


def run_area(grid: Grid, principles: PlanningPrinciples, *, area: str = "area",
             concepts: tuple[str, ...] = CONCEPTS, jobs: int = 1) -> ComparisonReport:
    """Plan and compare the requested concepts for one grid area.

    The environment variable ``GRIDFORGE_SEED`` overrides the configured
    search seed. Individual topology failures mark that topology (or the
    whole concept, if all fail) infeasible instead of raising.

    Raises:
        ValueError: unknown concept, empty cable catalog, catalog naming
            unknown line types, or a grid without any load.
    """
    for concept in concepts:
        if concept not in CONCEPTS:
            raise ValueError(f"unknown concept {concept!r}")
    params = principles.planner
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        params = replace(params, seed=int(env_seed))
        principles = replace(principles, planner=params)
    if not params.cable_catalog:
        raise ValueError("planner_params.cable_catalog must name at least one line type")
    for name in params.cable_catalog:
        if name not in grid.line_types_by_name:
            raise ValueError(f"cable catalog names unknown line type {name!r}")
    trail_type = params.cable_catalog[-1]  # largest standard cable

    baseline_grid = _flag_contingency_supply(grid)
    baseline = fmea(baseline_grid, principles.reliability)

    stations = [b.id for b in grid.buses if b.kind == "switching_station"]
    tasks = []
    plans: dict[str, list[ConceptPlan]] = {c: [] for c in concepts}

    want_chain = "radial" in concepts or "closed_ring" in concepts
    if want_chain:
        removed = dismantle(baseline_grid, params.dismantle_threshold_km,
                            remove_station=bool(stations))
        trails = candidate_trails(removed, trail_type,
                                  trail_factor=params.trail_factor,
                                  cost_model=principles.cost_model)
        chain_args = (removed, trails, principles, baseline,
                      stations[0] if stations else None, "closed_ring" in concepts)
        tasks += [("chain", k, chain_args) for k in range(params.n_topologies)]

    if "switching_station" in concepts:
        if len(stations) == 1:
            kept = dismantle(baseline_grid, params.dismantle_threshold_km,
                             remove_station=False)
            station_trails = candidate_trails(kept, trail_type,
                                              trail_factor=params.trail_factor,
                                              cost_model=principles.cost_model)
            station_args = (kept, station_trails, principles, baseline, stations[0])
            tasks += [("station", k, station_args) for k in range(params.n_topologies)]
        else:
            reason = ("no switching station in the area" if not stations
                      else "more than one switching station in the area")
            plans["switching_station"] = [
                ConceptPlan("switching_station", k, feasible=False, error=reason)
                for k in range(params.n_topologies)]

    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [_run_task(t) for t in tasks]

    by_key = {(kind, k): result for kind, k, result in results}
    for kind, k, _ in sorted(results, key=lambda r: (r[0], r[1])):
        for concept, plan in by_key[(kind, k)].items():
            if concept in plans:
                plans[concept].append(plan)
    for concept_plans in plans.values():
        concept_plans.sort(key=lambda p: p.topology)

    for concept in concepts:
        _select_reference(plans[concept], principles, baseline)
    return compare(area, plans)


# --------------------------------------------------------------------------
# report files


def _measure_to_dict(m: Measure) -> dict:
    doc = {"kind": m.kind, "target": m.target, "cost_per_year": m.cost_per_year}
    for key in ("to_station", "line_type", "length_km", "closed"):
        value = getattr(m, key)
        if value is not None:
            doc[key] = value
    return doc


def _plan_to_dict(plan: ConceptPlan) -> dict:
    doc = {
        "concept": plan.concept,
        "topology": plan.topology,
        "feasible": plan.feasible,
        "reference": plan.reference,
        "error": plan.error,
        "violations": list(plan.violations),
        "measures": [_measure_to_dict(m) for m in plan.measures],
        "cost": None,
        "asidi": None,
        "grid": grid_to_dict(plan.grid) if plan.grid is not None else None,
    }
    if plan.cost is not None:
        doc["cost"] = {"categories": dict(sorted(plan.cost.categories.items())),
                       "total": plan.cost.total}
    if plan.fmea is not None:
        doc["asidi"] = plan.fmea.asidi
        doc["worst_station_energy"] = max(plan.fmea.e_out.values(), default=0.0)
    return doc


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _comparison_csv(report: ComparisonReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["concept", "topology", "feasible", "cost_total", "reference"])
    for concept in sorted(report.plans):
        for plan in report.plans[concept]:
            writer.writerow([
                concept, plan.topology, plan.feasible,
                f"{plan.cost.total:.2f}" if plan.cost is not None else "",
                plan.reference])
    return buffer.getvalue()


def write_report(report: ComparisonReport, out_dir: str | Path, *,
                 timestamp: str | None = None) -> Path:
    """Write per-topology JSON plans plus the comparison pair; returns the
    area directory. Output is byte-deterministic except ``generated_at``."""
    area_dir = Path(out_dir) / report.area
    for concept in sorted(report.plans):
        concept_dir = area_dir / concept
        concept_dir.mkdir(parents=True, exist_ok=True)
        for plan in report.plans[concept]:
            path = concept_dir / f"topology_{plan.topology}.json"
            path.write_text(_dump(_plan_to_dict(plan)), encoding="utf-8")

    concepts_doc = {}
    for concept in sorted(report.plans):
        reference = report.references.get(concept)
        concepts_doc[concept] = {
            "feasible": reference is not None,
            "reference_topology": reference.topology if reference else None,
            "reference_cost": reference.cost.total if reference else None,
            "topology_costs": [
                plan.cost.total if plan.cost is not None else None
                for plan in report.plans[concept]],
        }
    comparison = {
        "area": report.area,
        "generated_at": timestamp or datetime.now(timezone.utc).isoformat(),
        "winner": report.winner,
        "concepts": concepts_doc,
        "deltas": report.deltas,
    }
    (area_dir / "comparison.json").write_text(_dump(comparison), encoding="utf-8")
    (area_dir / "comparison.csv").write_text(_comparison_csv(report), encoding="utf-8")
    return area_dir
