"""Planner tests.

The two search components get independent oracles: the subset search is
checked against exhaustive enumeration of every measure combination, and
the neighbour-pair generator against a brute-force empty-circumcircle
test.  The staged phases run on small fixtures with frozen outcomes.
"""

import itertools
import random
import time
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridforge import fixtures as fx
from gridforge.economics import CostModel, concept_overhead
from gridforge.grid_model import air_line_km, default_scenarios
from gridforge.planner import (
    Measure,
    PlannerError,
    PlannerParams,
    _delaunay_pairs,
    apply_measures,
    candidate_trails,
    dismantle,
    ils,
    phase1_topologies,
    phase2_reinforce,
    phase3_automate,
    phase4_mesh,
)
from gridforge.power_flow import check_contingency_operation, check_normal_operation
from gridforge.principles import principles_from_dict
from gridforge.reliability import ReliabilityParams, check_reliability, fmea
from gridforge.topology import check_contingency_supply, check_radiality, check_supply

# The planning fixtures hold their slack busbars at 1.05 pu, so operational
# checks run with the relaxed upper band the principles files use.
SCENARIOS = tuple(replace(s, v_max=1.06) for s in default_scenarios())


# --------------------------------------------------------------------------
# oracle 1: exhaustive subset enumeration
#
# Weighted cover instances: each measure covers a few elements of a small
# universe, uncovered elements count as violations.  The search documents
# that any feasible subset beats every infeasible one and that cost breaks
# ties, so the exhaustive optimum is the lexicographic minimum of
# (uncovered elements, total cost) over all 2^n activation vectors.


def make_cover_instance(seed):
    rng = random.Random(seed)
    n = rng.randint(8, 13)
    universe = rng.randint(5, 9)
    cover, costs = [], []
    for i in range(n):
        bits = 0
        for e in rng.sample(range(universe), rng.randint(1, max(2, universe // 2))):
            bits |= 1 << e
        cover.append(bits)
        costs.append(float(rng.randrange(500, 4000, 7)))
    pool = [Measure(kind="AutomateStation", target=f"m{i}", cost_per_year=costs[i])
            for i in range(n)]
    index = {f"m{i}": i for i in range(n)}
    full = (1 << universe) - 1

    def objective(active):
        covered, cost = 0, 0.0
        for m in active:
            covered |= cover[index[m.target]]
            cost += m.cost_per_year
        return cost, (full & ~covered).bit_count(), 0.0

    return pool, objective, cover, costs, full


def exhaustive_subset_optimum(cover, costs, full):
    """(uncovered, cost) minimum over all subsets, by incremental masks."""
    n = len(cover)
    cost_of = [0.0] * (1 << n)
    bits_of = [0] * (1 << n)
    best = (full.bit_count() + 1, float("inf"))
    for mask in range(1 << n):
        if mask:
            low = mask & -mask
            i = low.bit_length() - 1
            cost_of[mask] = cost_of[mask ^ low] + costs[i]
            bits_of[mask] = bits_of[mask ^ low] | cover[i]
        key = ((full & ~bits_of[mask]).bit_count(), cost_of[mask])
        if key < best:
            best = key
    return best


# --------------------------------------------------------------------------
# oracle 2: brute-force empty-circumcircle neighbour test
#
# An edge belongs to the triangulation exactly when some triangle through
# it has a circumcircle free of all other points (general position).


def brute_force_delaunay(points):
    n = len(points)
    if n <= 1:
        return set()
    if n <= 3:
        return {(i, j) for i in range(n) for j in range(i + 1, n)}
    edges = set()
    for i, j, k in itertools.combinations(range(n), 3):
        ax, ay = points[i]
        bx, by = points[j]
        cx, cy = points[k]
        d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
        if d == 0.0:
            continue  # collinear triple spans no circle
        a2, b2, c2 = ax * ax + ay * ay, bx * bx + by * by, cx * cx + cy * cy
        ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d
        uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d
        r2 = (ax - ux) ** 2 + (ay - uy) ** 2
        if any((px - ux) ** 2 + (py - uy) ** 2 < r2 * (1.0 - 1e-9)
               for m, (px, py) in enumerate(points) if m not in (i, j, k)):
            continue
        edges.update(((min(i, j), max(i, j)), (min(i, k), max(i, k)),
                      (min(j, k), max(j, k))))
    return edges


def random_points(rng, n):
    return [(rng.uniform(0.0, 5000.0), rng.uniform(0.0, 5000.0)) for _ in range(n)]


# --------------------------------------------------------------------------
# search core


def test_search_matches_exhaustive_enumeration():
    params = PlannerParams(max_evaluations=6000, non_improving_limit=12,
                           restarts=3, perturbation=0.3)
    hits = 0
    started = time.monotonic()
    for seed in range(100):
        pool, objective, cover, costs, full = make_cover_instance(seed)
        want = exhaustive_subset_optimum(cover, costs, full)
        got = ils(pool, objective, params, seed=seed).best
        if want[0] == 0:
            # a feasible subset exists, so the search must never settle on
            # an infeasible one, optimal or not
            assert got.feasible, f"instance {seed} lost feasibility"
        if got.violation_count == want[0] and abs(got.cost - want[1]) <= 1e-9:
            hits += 1
    elapsed = time.monotonic() - started
    assert hits >= 95, f"only {hits}/100 runs found the exhaustive optimum"
    assert elapsed < 60.0


def test_search_rejects_an_empty_pool():
    with pytest.raises(ValueError, match="empty"):
        ils([], lambda active: (0.0, 0, 0.0), PlannerParams())


def test_search_rejects_a_zero_evaluation_budget():
    pool = [Measure(kind="AutomateStation", target="a")]
    with pytest.raises(ValueError, match="budget"):
        ils(pool, lambda active: (0.0, 0, 0.0), PlannerParams(max_evaluations=0))


def test_search_rejects_a_start_vector_of_the_wrong_length():
    pool = [Measure(kind="AutomateStation", target="a"),
            Measure(kind="AutomateStation", target="b")]
    with pytest.raises(ValueError, match="start vector"):
        ils(pool, lambda active: (0.0, 0, 0.0), PlannerParams(), start=[True])


def test_search_evaluates_the_all_off_vector_first():
    pool, objective, *_ = make_cover_instance(4)
    seen = []

    def recorder(active):
        seen.append(active)
        return objective(active)

    ils(pool, recorder, PlannerParams(max_evaluations=50), seed=1)
    assert seen[0] == ()


def test_search_is_deterministic_for_a_fixed_seed():
    pool, objective, *_ = make_cover_instance(7)
    params = PlannerParams(max_evaluations=800, non_improving_limit=5, restarts=1)
    a = ils(pool, objective, params, seed=42)
    b = ils(pool, objective, params, seed=42)
    assert a.best == b.best
    assert a.evaluations == b.evaluations
    assert a.trace == b.trace


def test_search_memoizes_and_respects_the_budget():
    pool, objective, *_ = make_cover_instance(9)
    calls = []

    def counting(active):
        calls.append(active)
        return objective(active)

    result = ils(pool, counting, PlannerParams(max_evaluations=300), seed=5)
    # every objective call is one evaluation; revisited vectors are free
    assert len(calls) == result.evaluations
    assert result.evaluations <= 300


def test_search_survives_a_tiny_budget():
    pool, objective, *_ = make_cover_instance(2)
    result = ils(pool, objective, PlannerParams(max_evaluations=7), seed=0)
    assert result.evaluations <= 7
    assert result.best is not None


def test_search_trace_is_strictly_improving():
    pool, objective, *_ = make_cover_instance(11)
    result = ils(pool, objective, PlannerParams(max_evaluations=2000), seed=3)
    assert result.trace[0][0] == 1  # the first evaluation opens the record
    evals = [e for e, _ in result.trace]
    scores = [s for _, s in result.trace]
    assert evals == sorted(set(evals))
    assert all(b < a for a, b in zip(scores, scores[1:]))


def test_search_keeps_a_cost_free_optimum():
    pool = [Measure(kind="AutomateStation", target=f"m{i}", cost_per_year=100.0)
            for i in range(6)]
    result = ils(pool, lambda active: (sum(m.cost_per_year for m in active), 0, 0.0),
                 PlannerParams(max_evaluations=500), seed=8)
    assert result.best.active == (False,) * 6
    assert result.best.cost == 0.0


# --------------------------------------------------------------------------
# neighbour pairs


def test_neighbour_pairs_for_tiny_point_sets():
    assert _delaunay_pairs([]) == set()
    assert _delaunay_pairs([(0.0, 0.0)]) == set()
    assert _delaunay_pairs([(0.0, 0.0), (1.0, 1.0)]) == {(0, 1)}
    # three points pair completely, even collinear ones
    assert _delaunay_pairs([(0.0, 0.0), (4.0, 0.0), (0.0, 3.0)]) == {(0, 1), (0, 2), (1, 2)}
    assert _delaunay_pairs([(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]) == {(0, 1), (0, 2), (1, 2)}


def test_neighbour_pairs_match_the_circumcircle_definition():
    for case in range(100):
        rng = random.Random(1000 + case)
        points = random_points(rng, rng.randint(4, 25))
        assert _delaunay_pairs(points) == brute_force_delaunay(points), f"case {case}"


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_neighbour_pairs_match_the_oracle_for_random_seeds(seed):
    rng = random.Random(seed)
    points = random_points(rng, rng.randint(4, 12))
    assert _delaunay_pairs(points) == brute_force_delaunay(points)


def test_collinear_points_fall_back_to_a_sorted_chain():
    rng = random.Random(5)
    xs = [float(v) for v in rng.sample(range(-40, 90), 9)]
    points = [(x, 2.0 * x - 7.0) for x in xs]  # shuffled points on one line
    order = sorted(range(len(points)), key=lambda i: points[i])
    chain = {tuple(sorted(p)) for p in zip(order, order[1:])}
    assert _delaunay_pairs(points) == chain


# --------------------------------------------------------------------------
# dismantling


def test_dismantle_strips_only_lines_beyond_the_threshold():
    gone = dismantle(fx.two_bus_grid(length_km=5.0), 2.0)
    assert [l.id for l in gone.lines] == []
    assert gone.meta["removed_lines"] == ["l1"]
    # the threshold itself survives: strictly-longer only
    kept = dismantle(fx.two_bus_grid(length_km=2.0), 2.0)
    assert [l.id for l in kept.lines] == ["l1"]
    assert kept.meta["removed_lines"] == []


def test_dismantle_records_stations_and_busbars_but_not_junctions():
    gone = dismantle(fx.two_bus_grid(), 2.0)
    assert gone.meta["dismantled_stations"] == ["mv", "s1"]
    assert gone.meta["removed_station"] is None
    # switches of removed lines disappear with them
    assert [s for s in gone.switches if s.line == "l1"] == []


def test_dismantle_on_the_station_area():
    area = dismantle(fx.station_tradeoff_area(), 2.0)
    assert area.meta["removed_lines"] == ["sup1a", "sup1b", "sup2a", "sup2b"]
    assert area.meta["dismantled_stations"] == ["m1", "m2", "mv", "ss"]
    assert area.meta["removed_station"] is None
    assert "ss" in area.buses_by_id  # stays unless explicitly removed


def test_dismantle_can_take_the_switching_station_with_it():
    area = dismantle(fx.station_tradeoff_area(), 2.0, remove_station=True)
    assert area.meta["removed_station"] == "ss"
    assert area.meta["removed_lines"] == ["c_1", "c_4", "sup1a", "sup1b",
                                          "sup2a", "sup2b"]
    # the station itself is not on the rebuild list
    assert area.meta["dismantled_stations"] == ["c1", "c4", "m1", "m2", "mv"]
    assert sorted(b.id for b in area.buses) == ["c1", "c2", "c3", "c4",
                                                "hv", "m1", "m2", "mv"]
    assert sorted(l.id for l in area.lines) == ["c_2", "c_3", "c_tie"]
    assert all(s.bus != "ss" for s in area.switches)


def test_dismantle_requires_exactly_one_switching_station():
    with pytest.raises(ValueError, match="found 0"):
        dismantle(fx.two_bus_grid(), 2.0, remove_station=True)


# --------------------------------------------------------------------------
# trail candidates


def test_trail_candidates_cover_the_neighbour_pairs():
    area = dismantle(fx.station_tradeoff_area(), 2.0, remove_station=True)
    trails = candidate_trails(area, fx.CABLE_150.name)
    assert [(m.target, m.to_station) for m in trails] == [
        ("c1", "c4"), ("c1", "m1"), ("c1", "m2"), ("c4", "m2"),
        ("m1", "m2"), ("m1", "mv"), ("m2", "mv")]
    for m in trails:
        assert m.kind == "AddTrail"
        assert m.line_type == fx.CABLE_150.name
        air = air_line_km(area.buses_by_id[m.target], area.buses_by_id[m.to_station])
        assert m.length_km == pytest.approx(air * 1.5)
        assert m.cost_per_year == pytest.approx(m.length_km * 7000.0)
    assert trails[0].length_km == pytest.approx(2.4)  # 1.6 km air line


def test_trail_candidates_skip_pairs_already_joined_by_a_line():
    area = fx.station_tradeoff_area()
    assert candidate_trails(area, fx.CABLE_150.name, stations=["c1", "c2"]) == []
    # an open sectioning point still counts as joined: the line exists
    assert candidate_trails(area, fx.CABLE_150.name, stations=["c2", "c3"]) == []
    free = candidate_trails(area, fx.CABLE_150.name, stations=["c1", "c3"])
    assert [(m.target, m.to_station) for m in free] == [("c1", "c3")]


def test_trail_candidates_need_a_dismantling_record():
    with pytest.raises(ValueError, match="dismantling record"):
        candidate_trails(fx.two_bus_grid(), fx.CABLE_150.name)


def test_trail_candidates_ignore_unknown_station_ids():
    area = dismantle(fx.station_tradeoff_area(), 2.0, remove_station=True)
    trails = candidate_trails(area, fx.CABLE_150.name,
                              stations=["c1", "c4", "ghost"])
    assert [(m.target, m.to_station) for m in trails] == [("c1", "c4")]


def test_trail_candidates_skip_coincident_stations():
    b = fx.GridBuilder(fx.CABLE_150)
    b.infeed("hv", "mv", 0.0, 0.0)
    b.bus("a", "secondary_substation", 100.0, 100.0)
    b.bus("b", "secondary_substation", 100.0, 100.0)  # same cabinet location
    b.bus("c", "secondary_substation", 400.0, 500.0)
    grid = b.build()
    trails = candidate_trails(grid, fx.CABLE_150.name, stations=["a", "b", "c"])
    assert [(m.target, m.to_station) for m in trails] == [("a", "c"), ("b", "c")]


# --------------------------------------------------------------------------
# measure application


def test_replace_line_swaps_the_conductor_type():
    grid = fx.double_feeder_grid()
    out = apply_measures(grid, [Measure(kind="ReplaceLine", target="d2",
                                        line_type=fx.CABLE_300.name)])
    assert out.lines_by_id["d2"].line_type == fx.CABLE_300.name
    assert out.lines_by_id["d1"].line_type == grid.lines_by_id["d1"].line_type
    with pytest.raises(ValueError, match="does not exist"):
        apply_measures(grid, [Measure(kind="ReplaceLine", target="nope",
                                      line_type=fx.CABLE_300.name)])


def test_parallel_lines_get_numbered_ids_and_end_switches():
    grid = fx.double_feeder_grid()
    once = apply_measures(grid, [Measure(kind="AddParallel", target="d2")])
    twin = once.lines_by_id["d2__p1"]
    assert (twin.from_bus, twin.to_bus, twin.length) == ("s1", "s2", 0.8)
    assert twin.line_type == grid.lines_by_id["d2"].line_type
    assert twin.origin == "parallel"
    ends = [s for s in once.switches if s.line == "d2__p1"]
    assert [(s.id, s.bus, s.kind, s.remote_controlled, s.closed) for s in ends] == [
        ("d2__p1_a", "s1", "load_break", False, True),
        ("d2__p1_b", "s2", "load_break", False, True)]
    twice = apply_measures(once, [Measure(kind="AddParallel", target="d2")])
    assert "d2__p2" in twice.lines_by_id


def test_parallel_from_a_busbar_gets_a_remote_breaker():
    grid = fx.double_feeder_grid()
    out = apply_measures(grid, [Measure(kind="AddParallel", target="d1",
                                        line_type="OVERHEAD_50")])
    assert out.lines_by_id["d1__p1"].line_type == "OVERHEAD_50"
    ends = {s.id: s for s in out.switches if s.line == "d1__p1"}
    assert ends["d1__p1_a"].bus == "mv"
    assert ends["d1__p1_a"].kind == "circuit_breaker"
    assert ends["d1__p1_a"].remote_controlled
    assert ends["d1__p1_b"].kind == "load_break"
    assert not ends["d1__p1_b"].remote_controlled


def test_trail_measures_build_the_line_and_its_switches():
    grid = fx.double_feeder_grid()
    out = apply_measures(grid, [Measure(kind="AddTrail", target="mv",
                                        to_station="s5", line_type=fx.CABLE_150.name,
                                        length_km=2.5)])
    line = out.lines_by_id["trail__mv__s5"]
    assert (line.length, line.origin) == (2.5, "new_trail")
    ends = {s.id: (s.bus, s.kind, s.remote_controlled)
            for s in out.switches if s.line == "trail__mv__s5"}
    assert ends == {"trail__mv__s5_a": ("mv", "circuit_breaker", True),
                    "trail__mv__s5_b": ("s5", "load_break", False)}


def test_trail_measures_validate_their_inputs():
    grid = fx.double_feeder_grid()
    with pytest.raises(ValueError, match="line type"):
        apply_measures(grid, [Measure(kind="AddTrail", target="mv", to_station="s5")])
    with pytest.raises(ValueError, match="does not exist"):
        apply_measures(grid, [Measure(kind="AddTrail", target="mv", to_station="xx",
                                      line_type=fx.CABLE_150.name, length_km=1.0)])
    trail = Measure(kind="AddTrail", target="mv", to_station="s5",
                    line_type=fx.CABLE_150.name, length_km=2.5)
    with pytest.raises(ValueError, match="already built"):
        apply_measures(grid, [trail, trail])


def test_sectioning_point_measures_move_switch_positions():
    grid = fx.double_feeder_grid()
    # without an explicit position the point is opened
    opened = apply_measures(grid, [Measure(kind="SetSectioningPoint", target="d2@s1")])
    assert not opened.switches_by_id["d2@s1"].closed
    closed = apply_measures(opened, [Measure(kind="CloseRing", target="d2@s1")])
    assert closed.switches_by_id["d2@s1"].closed
    with pytest.raises(ValueError, match="does not exist"):
        apply_measures(grid, [Measure(kind="SetSectioningPoint", target="ghost@x")])


def test_automate_station_measure_marks_every_switch_remote():
    grid = fx.double_feeder_grid()
    out = apply_measures(grid, [Measure(kind="AutomateStation", target="s4")])
    assert all(s.remote_controlled for s in out.switches if s.bus == "s4")
    with pytest.raises(ValueError, match="does not exist"):
        apply_measures(grid, [Measure(kind="AutomateStation", target="s99")])


def test_renewal_is_pure_bookkeeping():
    grid = fx.station_tradeoff_area()
    out = apply_measures(grid, [Measure(kind="RenewSwitchingStation", target="ss")])
    assert out is grid
    with pytest.raises(ValueError, match="does not exist"):
        apply_measures(grid, [Measure(kind="RenewSwitchingStation", target="zz")])


def test_station_removal_measure_takes_the_attached_lines():
    grid = fx.station_tradeoff_area()
    out = apply_measures(grid, [Measure(kind="RemoveSwitchingStation", target="ss")])
    assert "ss" not in out.buses_by_id
    for line_id in ("sup1b", "sup2b", "c_1", "c_4"):
        assert line_id not in out.lines_by_id
    assert all(s.bus != "ss" for s in out.switches)
    assert "sup1a" in out.lines_by_id  # mv-m1 does not touch the station


# --------------------------------------------------------------------------
# phase 1: topology


def test_phase1_without_candidates_repositions_the_switches():
    grid = fx.double_feeder_grid()
    params = PlannerParams(n_topologies=3, max_evaluations=500, seed=11)
    plans = phase1_topologies(grid, [], params)
    assert len(plans) == 3
    assert all(p.grid == plans[0].grid and p.measures == plans[0].measures
               for p in plans)
    assert [(m.kind, m.target, m.closed) for m in plans[0].measures] == [
        ("SetSectioningPoint", "d3@s2", False),
        ("SetSectioningPoint", "tie@s3", True)]
    built = plans[0].grid
    assert check_radiality(built, None) == []
    assert check_supply(built, None) == []
    assert check_contingency_supply(built, None) == []


def test_phase1_without_candidates_raises_on_a_broken_grid():
    broken = dismantle(fx.two_bus_grid(), 2.0)
    with pytest.raises(PlannerError, match="not viable") as info:
        phase1_topologies(broken, [], PlannerParams(n_topologies=1))
    assert [(v.kind, v.element) for v in info.value.violations] == [("unsupplied", "s1")]


def test_phase1_builds_feasible_radial_topologies_from_trails():
    area = dismantle(fx.station_tradeoff_area(), 2.0, remove_station=True)
    trails = candidate_trails(area, fx.CABLE_150.name)
    params = PlannerParams(n_topologies=3, max_evaluations=600,
                           non_improving_limit=4, restarts=0, seed=3)
    plans = phase1_topologies(area, trails, params)
    assert len(plans) == 3
    picks = [[(m.target, m.to_station) for m in p.measures if m.kind == "AddTrail"]
             for p in plans]
    # the runs land on two cost-equal three-trail skeletons
    assert picks[0] == [("c4", "m2"), ("m1", "m2"), ("m1", "mv")]
    assert picks[1] == picks[2] == [("c1", "m1"), ("m1", "m2"), ("m1", "mv")]
    for plan in plans:
        assert sum(m.cost_per_year for m in plan.measures) == pytest.approx(47609.433, abs=1e-2)
        assert plan.grid.switches_by_id["c_tie@c2"].closed
        assert check_radiality(plan.grid, None) == []
        assert check_supply(plan.grid, None) == []
        assert check_contingency_supply(plan.grid, None) == []


# --------------------------------------------------------------------------
# phase 2: operational reinforcement


def _lopsided_ring(load_sn=2.4, segment_km=4.0):
    """Four stations on one leg of an open ring; the return leg is empty.
    Moving the open point rebalances the feeders without any new cable."""
    b = fx.GridBuilder(fx.CABLE_150)
    b.infeed("hv", "mv", 0.0, 0.0)
    for i in range(1, 5):
        b.bus(f"g{i}", "secondary_substation", i * segment_km * 1000.0, 0.0)
        b.load(f"g{i}", load_sn)
    b.line("k1", "mv", "g1", segment_km, fx.CABLE_150,
           breaker_at=("mv",), remote_at=("mv",))
    b.line("k2", "g1", "g2", segment_km, fx.CABLE_150)
    b.line("k3", "g2", "g3", segment_km, fx.CABLE_150)
    b.line("k4", "g3", "g4", segment_km, fx.CABLE_150)
    b.line("k5", "g4", "mv", segment_km, fx.CABLE_150,
           breaker_at=("mv",), open_at="g4")
    return b.build()


def test_phase2_rebalances_feeders_for_free():
    grid = _lopsided_ring()
    assert not check_normal_operation(grid, SCENARIOS).feasible
    plan = phase2_reinforce(grid, SCENARIOS, CostModel(), PlannerParams())
    assert plan.cable_measures == ()
    assert [(m.kind, m.target, m.closed) for m in plan.measures] == [
        ("SetSectioningPoint", "k5@g4", True),
        ("SetSectioningPoint", "k4@g3", False)]
    assert plan.grid is plan.base_grid
    report = check_normal_operation(plan.grid, SCENARIOS).merged(
        check_contingency_operation(plan.grid, SCENARIOS))
    assert report.feasible


def test_phase2_chooses_cables_when_switching_cannot_help():
    mesh = fx.mesh_tradeoff_area()
    pr = principles_from_dict(fx.tradeoff_principles_dict())
    plan = phase2_reinforce(mesh, pr.scenarios, pr.cost_model, pr.planner)
    assert plan.measures == plan.cable_measures  # no free moves existed
    assert sorted((m.kind, m.target) for m in plan.cable_measures) == [
        ("AddParallel", "h3"), ("ReplaceLine", "h7")]
    assert all(m.cost_per_year == pytest.approx(13300.0) for m in plan.cable_measures)
    assert plan.base_grid == mesh
    report = check_normal_operation(plan.grid, pr.scenarios).merged(
        check_contingency_operation(plan.grid, pr.scenarios))
    assert report.feasible


def test_phase2_raises_without_reinforcement_candidates():
    grid = fx.two_bus_grid(sn_mva=12.0)  # overloaded, nothing in the catalog
    with pytest.raises(PlannerError, match="catalog empty"):
        phase2_reinforce(grid, SCENARIOS, CostModel(), PlannerParams(cable_catalog=()))


def test_phase2_raises_when_the_catalog_cannot_clear_the_violations():
    grid = _lopsided_ring(load_sn=4.8)  # beyond any split and any rung
    params = PlannerParams(max_evaluations=2000, non_improving_limit=6, restarts=1,
                           cable_catalog=(fx.CABLE_150.name, fx.CABLE_300.name))
    with pytest.raises(PlannerError, match="within the catalog") as info:
        phase2_reinforce(grid, SCENARIOS, CostModel(), params)
    assert info.value.violations


# --------------------------------------------------------------------------
# phase 3: automation


def test_phase3_wraps_the_automation_loop_into_measures():
    reliability = ReliabilityParams()
    baseline = fmea(fx.ring_pair_grid(1.6), reliability)
    grid = fx.ring_pair_grid(1.9)
    plan = phase3_automate(grid, baseline, reliability, CostModel())
    assert [m.target for m in plan.measures] == ["r6", "r5", "r7", "r8",
                                                 "r3", "r4", "r2"]
    assert all(m.kind == "AutomateStation" for m in plan.measures)
    assert all(m.cost_per_year == 1200.0 for m in plan.measures)
    automated = {m.target for m in plan.measures}
    assert all(s.remote_controlled for s in plan.grid.switches
               if s.bus in automated)
    assert check_reliability(plan.grid, reliability, baseline) == []


# --------------------------------------------------------------------------
# phase 4: meshing

MESH_SEARCH = PlannerParams(n_topologies=3, max_evaluations=3000,
                            non_improving_limit=10, restarts=1,
                            perturbation=0.12, seed=3,
                            cable_catalog=(fx.CABLE_300.name,))


def test_phase4_closes_the_ring_when_links_are_cheap():
    mesh = fx.mesh_tradeoff_area()
    pr = principles_from_dict(fx.tradeoff_principles_dict(communication_link=1200.0))
    reinf = phase2_reinforce(mesh, pr.scenarios, pr.cost_model, pr.planner)
    plan = phase4_mesh(reinf, [], pr.scenarios, pr.cost_model, MESH_SEARCH, seed=3)
    assert [(m.kind, m.target, m.cost_per_year) for m in plan.measures] == [
        ("AddParallel", "h3", 13300.0),
        ("CloseRing", "h_tie@r4", 0.0),
        ("AutomateStation", "r4", 1200.0)]  # the closure drags its link along
    assert all(s.closed for s in plan.grid.switches)
    total = (sum(m.cost_per_year for m in plan.measures)
             + concept_overhead(plan.grid, "closed_ring", pr.cost_model).total)
    assert total == pytest.approx(15540.0)


def test_phase4_stays_radial_when_links_are_dear():
    mesh = fx.mesh_tradeoff_area()
    pr = principles_from_dict(fx.tradeoff_principles_dict(communication_link=30000.0))
    reinf = phase2_reinforce(mesh, pr.scenarios, pr.cost_model, pr.planner)
    plan = phase4_mesh(reinf, [], pr.scenarios, pr.cost_model, MESH_SEARCH, seed=3)
    assert sorted((m.kind, m.target) for m in plan.measures) == [
        ("AddParallel", "h3"), ("ReplaceLine", "h7")]
    assert not plan.grid.switches_by_id["h_tie@r4"].closed


def test_phase4_with_nothing_to_decide_returns_the_base():
    grid = fx.two_bus_grid()
    reinf = phase2_reinforce(grid, SCENARIOS, CostModel(), PlannerParams())
    plan = phase4_mesh(reinf, [], SCENARIOS, CostModel(), PlannerParams())
    assert plan.measures == ()
    assert plan.grid == reinf.base_grid


# --------------------------------------------------------------------------
# parameter validation


def test_planner_params_validation():
    with pytest.raises(ValueError, match="n_topologies"):
        PlannerParams(n_topologies=0)
    with pytest.raises(ValueError, match="trail_factor"):
        PlannerParams(trail_factor=0.9)
    with pytest.raises(ValueError, match="perturbation"):
        PlannerParams(perturbation=0.0)
    with pytest.raises(ValueError, match="perturbation"):
        PlannerParams(perturbation=1.5)
    PlannerParams(perturbation=1.0)  # the inclusive end is legal
