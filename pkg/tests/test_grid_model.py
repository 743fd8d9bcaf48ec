"""Grid data model: JSON interchange, integrity checks, scenario scaling."""

import json
import math

import pytest
from hypothesis import given, strategies as st

import gridforge.fixtures as fx
from gridforge.grid_model import (
    Bus,
    ExternalSource,
    Grid,
    Injection,
    Line,
    LineType,
    Scenario,
    SchemaError,
    Switch,
    Transformer,
    air_line_km,
    apply_scenario,
    default_scenarios,
    grid_from_dict,
    grid_to_dict,
    load_grid,
    save_grid,
    validate_grid,
)

ALL_FIXTURES = [
    fx.two_bus_grid,
    fx.single_station_grid,
    fx.open_ring_demo,
    fx.coupled_ring_demo,
    fx.station_ring_demo,
    fx.resupply_demo,
    fx.double_feeder_grid,
    fx.example_area,
    fx.station_tradeoff_area,
    fx.mesh_tradeoff_area,
]


# --------------------------------------------------------------------------
# JSON roundtrip


@pytest.mark.parametrize("build", ALL_FIXTURES, ids=lambda f: f.__name__)
def test_roundtrip_through_file(build, tmp_path):
    grid = build()
    path = tmp_path / "grid.json"
    save_grid(grid, path)
    assert load_grid(path) == grid


def test_roundtrip_through_dict():
    grid = fx.example_area()
    assert grid_from_dict(grid_to_dict(grid)) == grid


def test_saved_file_is_plain_json(tmp_path):
    path = tmp_path / "grid.json"
    save_grid(fx.two_bus_grid(), path)
    doc = json.loads(path.read_text())
    assert set(doc) == {"meta", "buses", "line_types", "lines", "switches",
                        "transformers", "injections", "external_sources"}
    # None-valued optionals are dropped, not serialized as null
    for lt in doc["line_types"]:
        assert "insulation" not in lt or lt["insulation"] is not None


def test_meta_roundtrips(tmp_path):
    grid = fx.two_bus_grid().replace(meta={"area": "west", "revision": 3})
    path = tmp_path / "grid.json"
    save_grid(grid, path)
    assert load_grid(path).meta == {"area": "west", "revision": 3}


# --------------------------------------------------------------------------
# schema errors


def _minimal_doc():
    return grid_to_dict(fx.two_bus_grid())


def test_document_must_be_object():
    with pytest.raises(SchemaError):
        grid_from_dict([1, 2, 3])


def test_unexpected_top_level_key():
    doc = _minimal_doc()
    doc["busses"] = []
    with pytest.raises(SchemaError, match="busses"):
        grid_from_dict(doc)


def test_missing_container():
    doc = _minimal_doc()
    del doc["switches"]
    with pytest.raises(SchemaError, match="switches"):
        grid_from_dict(doc)


def test_container_must_be_list():
    doc = _minimal_doc()
    doc["lines"] = {}
    with pytest.raises(SchemaError, match="expected a list"):
        grid_from_dict(doc)


def test_duplicate_id_rejected_on_parse():
    doc = _minimal_doc()
    doc["buses"].append(dict(doc["buses"][0]))
    with pytest.raises(SchemaError, match="duplicate id"):
        grid_from_dict(doc)


def test_unknown_element_field():
    doc = _minimal_doc()
    doc["buses"][0]["color"] = "red"
    with pytest.raises(SchemaError, match="color"):
        grid_from_dict(doc)


def test_missing_required_field():
    doc = _minimal_doc()
    del doc["lines"][0]["length"]
    with pytest.raises(SchemaError, match="length"):
        grid_from_dict(doc)


def test_bool_is_not_a_number():
    doc = _minimal_doc()
    doc["buses"][0]["x"] = True
    with pytest.raises(SchemaError, match="expected a number"):
        grid_from_dict(doc)


def test_setpoints_must_be_numbers():
    doc = _minimal_doc()
    doc["transformers"][0]["setpoint_by_scenario"]["peak_load"] = "high"
    with pytest.raises(SchemaError, match="setpoint"):
        grid_from_dict(doc)


def test_load_grid_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(SchemaError, match="not valid JSON"):
        load_grid(path)


def test_injection_p_factor_default_depends_on_category():
    doc = _minimal_doc()
    doc["injections"] = [
        {"id": "l", "bus": "s1", "sn": 1.0, "category": "load"},
        {"id": "w", "bus": "s1", "sn": 1.0, "category": "wind"},
    ]
    grid = grid_from_dict(doc)
    by_id = {i.id: i for i in grid.injections}
    assert by_id["l"].p_factor == pytest.approx(0.97)
    assert by_id["w"].p_factor == pytest.approx(1.0)


# --------------------------------------------------------------------------
# integrity validation


@pytest.mark.parametrize("build", ALL_FIXTURES, ids=lambda f: f.__name__)
def test_fixtures_are_valid(build):
    assert validate_grid(build()) == []


def _rules(grid):
    return {(f.element, f.rule) for f in validate_grid(grid)}


def test_validation_catches_duplicates():
    grid = fx.two_bus_grid()
    grid = grid.replace(buses=grid.buses + (grid.buses[0],))
    assert (grid.buses[0].id, "duplicate_id") in _rules(grid)


def test_validation_bus_rules():
    grid = fx.two_bus_grid().replace(buses=(
        Bus("a", "palace", 0, 0, vn=20),
        Bus("b", "junction", 0, 0, vn=-5),
    ))
    rules = _rules(grid)
    assert ("a", "bad_kind") in rules
    assert ("b", "non_positive_vn") in rules


def test_validation_line_type_rules():
    grid = fx.two_bus_grid().replace(line_types=(
        LineType("t1", r_per_km=-1, x_per_km=0.1, i_max=0.0, construction="subsea"),
    ))
    rules = _rules(grid)
    assert {("t1", "non_positive_ampacity"), ("t1", "negative_impedance"),
            ("t1", "bad_construction")} <= rules


def test_validation_line_rules():
    base = fx.two_bus_grid()
    bad = Line("weird", "s1", "s1", length=2.0, line_type="nope", origin="found")
    grid = base.replace(lines=base.lines + (bad,))
    rules = _rules(grid)
    assert {("weird", "self_loop"), ("weird", "dangling_line_type"),
            ("weird", "bad_origin")} <= rules

    grid = base.replace(lines=base.lines + (
        Line("dang", "s1", "ghost", length=1.0, line_type=base.lines[0].line_type),))
    assert ("dang", "dangling_bus") in _rules(grid)


def test_validation_switch_rules():
    base = fx.two_bus_grid()
    line = base.lines[0]
    extra = (
        Switch("sw1", "ghost", line.id, closed=True),
        Switch("sw2", "s1", "ghost_line", closed=True),
        Switch("sw3", "s1", line.id, closed=True, kind="toggle"),
        # breaker at a secondary substation is not allowed
        Switch("sw4", "s1", line.id, closed=True, kind="circuit_breaker"),
    )
    grid = base.replace(switches=base.switches + extra)
    rules = _rules(grid)
    assert ("sw1", "dangling_bus") in rules
    assert ("sw2", "dangling_line") in rules
    assert ("sw3", "bad_kind") in rules
    assert ("sw4", "breaker_location") in rules


def test_validation_switch_must_sit_on_line_end():
    base = fx.open_ring_demo()
    # pick a bus that exists but is not an endpoint of f1
    wrong = Switch("off", "s3", "f1", closed=True)
    grid = base.replace(switches=base.switches + (wrong,))
    assert ("off", "switch_off_line") in _rules(grid)


def test_validation_transformer_rules():
    base = fx.two_bus_grid()
    t = base.transformers[0]
    grid = base.replace(transformers=(
        Transformer(t.id, t.hv_bus, t.lv_bus, sn=-1.0, setpoint_by_scenario={}),))
    rules = _rules(grid)
    assert (t.id, "non_positive_sn") in rules
    assert (t.id, "missing_setpoint") in rules

    # transformer fed from a bus without an external source
    grid = base.replace(external_sources=(ExternalSource("x", base.buses[0].id),))
    if base.buses[0].id != t.hv_bus:
        assert (t.id, "unsourced_hv_side") in _rules(grid)


def test_validation_injection_rules():
    base = fx.two_bus_grid()
    extra = (
        Injection("i1", "ghost", 1.0, "load"),
        Injection("i2", "s1", -1.0, "load"),
        Injection("i3", "s1", 1.0, "load", p_factor=1.5),
        Injection("i4", "s1", 1.0, "diesel"),
    )
    grid = base.replace(injections=base.injections + extra)
    rules = _rules(grid)
    assert ("i1", "dangling_bus") in rules
    assert ("i2", "negative_sn") in rules
    assert ("i3", "bad_p_factor") in rules
    assert ("i4", "bad_category") in rules


def test_validation_requires_a_source():
    grid = fx.two_bus_grid().replace(external_sources=())
    assert ("grid", "no_source") in _rules(grid)
    grid = fx.two_bus_grid().replace(external_sources=(ExternalSource("x", "ghost"),))
    assert ("x", "dangling_bus") in _rules(grid)


# --------------------------------------------------------------------------
# geometry and lookups


def test_air_line_km_is_euclidean_in_km():
    a = Bus("a", "junction", 0.0, 0.0, 20.0)
    b = Bus("b", "junction", 3000.0, 4000.0, 20.0)
    assert air_line_km(a, b) == pytest.approx(5.0)
    assert air_line_km(a, a) == 0.0


def test_source_buses_and_stations():
    grid = fx.two_bus_grid()
    assert grid.source_buses == frozenset({"hv"})
    assert [b.id for b in grid.stations()] == ["s1"]
    area = fx.example_area()
    kinds = {b.kind for b in area.stations()}
    assert kinds == {"secondary_substation", "switching_station"}


def test_switch_lookup_by_bus_and_line():
    grid = fx.open_ring_demo()
    sw = grid.switch_at[("s3", "tie")]
    assert sw.bus == "s3" and sw.line == "tie" and not sw.closed


# --------------------------------------------------------------------------
# scenario scaling


def test_apply_scenario_signs_and_scaling():
    grid = fx.two_bus_grid(sn_mva=4.0, p_factor=0.8)
    wind = Injection("w", "s1", 2.0, "wind", p_factor=1.0)
    grid = grid.replace(injections=grid.injections + (wind,))
    scenario = Scenario("mix", scale_load=0.5, scale_pv=0.0, scale_wind=1.0)
    grid = grid.replace(transformers=tuple(
        Transformer(t.id, t.hv_bus, t.lv_bus, t.sn, {"mix": 1.0})
        for t in grid.transformers))
    inj = apply_scenario(grid, scenario)
    # consumption positive: 4 MVA * 0.8 pf * 0.5 load scale - 2 MW wind
    assert inj.p_mw["s1"] == pytest.approx(4.0 * 0.8 * 0.5 - 2.0)
    q_load = 4.0 * math.sqrt(1 - 0.8 ** 2) * 0.5
    assert inj.q_mvar["s1"] == pytest.approx(q_load)  # unity-pf wind adds no q
    assert inj.setpoints == {"hv_mv": 1.0}


def test_apply_scenario_rejects_out_of_range_scale():
    grid = fx.two_bus_grid()
    with pytest.raises(ValueError, match="scale_load"):
        apply_scenario(grid, Scenario("x", scale_load=1.2, scale_pv=0, scale_wind=0))


def test_apply_scenario_requires_setpoint():
    grid = fx.two_bus_grid()
    with pytest.raises(ValueError, match="setpoint"):
        apply_scenario(grid, Scenario("unknown", 1.0, 0.0, 0.0))


def test_default_scenarios_cover_both_extremes():
    peak_load, peak_gen = default_scenarios()
    assert peak_load.scale_load == 1.0 and peak_load.scale_wind == 0.0
    assert peak_gen.scale_wind == 1.0 and peak_gen.scale_load < 1.0


@given(sn=st.floats(0.0, 10.0), scale=st.floats(0.0, 1.0))
def test_apply_scenario_is_linear_in_sn(sn, scale):
    grid = fx.two_bus_grid(sn_mva=1.0, p_factor=0.9)
    inj = grid.injections[0]
    scaled = grid.replace(injections=(Injection(inj.id, inj.bus, sn, "load", 0.9),))
    scenario = Scenario("peak_load", scale_load=scale, scale_pv=0.0, scale_wind=0.0)
    got = apply_scenario(scaled, scenario).p_mw.get("s1", 0.0)
    assert got == pytest.approx(sn * 0.9 * scale, abs=1e-12)
