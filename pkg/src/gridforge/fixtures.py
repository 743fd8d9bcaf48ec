"""Synthetic grid areas used by the test suite and the bundled example data.

Everything in here is plain model construction — no randomness, no planning
logic — so tests can rely on exact coordinates, lengths and ratings.
Coordinates are metres, lengths kilometres, powers MVA.
"""

from __future__ import annotations

from gridforge.grid_model import (
    Bus,
    ExternalSource,
    Grid,
    Injection,
    Line,
    LineType,
    Switch,
    Transformer,
)

# Catalogue of line types shared by the fixtures.  Ratings are typical for
# 20 kV material: two cross sections of XLPE cable, a small overhead
# conductor and an ageing paper-insulated cable with generous copper but
# poor impedance.
CABLE_150 = LineType("NA2XS2Y 3x1x150", r_per_km=0.206, x_per_km=0.116,
                     i_max=0.319, construction="cable")
CABLE_300 = LineType("NA2XS2Y 3x1x300", r_per_km=0.100, x_per_km=0.102,
                     i_max=0.468, construction="cable")
OVERHEAD_50 = LineType("AL/ST 3x50", r_per_km=0.576, x_per_km=0.397,
                       i_max=0.145, construction="overhead")
CABLE_LEGACY = LineType("NKBA 3x120", r_per_km=0.576, x_per_km=0.400,
                        i_max=0.450, construction="cable")

#: Transformer voltage setpoints used by all fixtures: nominal at peak load,
#: slightly raised at peak generation to mirror common tap-changer practice.
SETPOINTS = {"peak_load": 1.0, "peak_generation": 1.05}


class GridBuilder:
    """Small incremental builder so fixtures stay declarative."""

    def __init__(self, *line_types: LineType) -> None:
        self._buses: list[Bus] = []
        self._lines: list[Line] = []
        self._switches: list[Switch] = []
        self._transformers: list[Transformer] = []
        self._injections: list[Injection] = []
        self._sources: list[ExternalSource] = []
        self._line_types = list(line_types)

    def bus(self, bus_id: str, kind: str, x: float, y: float, *,
            vn: float = 20.0, contingency: bool = False) -> "GridBuilder":
        self._buses.append(Bus(id=bus_id, kind=kind, x=x, y=y, vn=vn,
                               requires_contingency_supply=contingency))
        return self

    def infeed(self, hv_id: str, mv_id: str, x: float, y: float, *,
               sn: float = 25.0) -> "GridBuilder":
        """HV bus + external source + transformer feeding an MV busbar."""
        self.bus(hv_id, "primary_substation", x - 150.0, y, vn=110.0)
        self.bus(mv_id, "primary_substation", x, y)
        self._sources.append(ExternalSource(id=f"{hv_id}_net", bus=hv_id))
        self._transformers.append(Transformer(
            id=f"{hv_id}_{mv_id}", hv_bus=hv_id, lv_bus=mv_id, sn=sn,
            setpoint_by_scenario=dict(SETPOINTS)))
        return self

    def line(self, line_id: str, a: str, b: str, length: float,
             line_type: LineType, *, open_at: str | None = None,
             breaker_at: tuple[str, ...] = (),
             remote_at: tuple[str, ...] = (),
             switches: bool = True) -> "GridBuilder":
        self._lines.append(Line(id=line_id, from_bus=a, to_bus=b,
                                length=length, line_type=line_type.name))
        if switches:
            for bus in (a, b):
                kind = "circuit_breaker" if bus in breaker_at else "load_break"
                self._switches.append(Switch(
                    id=f"{line_id}@{bus}", bus=bus, line=line_id,
                    closed=bus != open_at, kind=kind,
                    remote_controlled=bus in remote_at))
        return self

    def load(self, bus: str, sn: float, *, p_factor: float = 0.97) -> "GridBuilder":
        self._injections.append(Injection(id=f"load_{bus}", bus=bus, sn=sn,
                                          category="load", p_factor=p_factor))
        return self

    def wind(self, bus: str, sn: float) -> "GridBuilder":
        self._injections.append(Injection(id=f"wind_{bus}", bus=bus, sn=sn,
                                          category="wind", p_factor=1.0))
        return self

    def build(self, **meta: object) -> Grid:
        return Grid(buses=tuple(self._buses),
                    line_types=tuple(self._line_types),
                    lines=tuple(self._lines),
                    switches=tuple(self._switches),
                    transformers=tuple(self._transformers),
                    injections=tuple(self._injections),
                    external_sources=tuple(self._sources),
                    meta=dict(meta))


# --------------------------------------------------------------------------
# Elementary fixtures


def two_bus_grid(*, length_km: float = 5.0, sn_mva: float = 4.0,
                 p_factor: float = 0.97,
                 line_type: LineType = CABLE_150) -> Grid:
    """One feeder, one station: small enough for closed-form load flow."""
    b = GridBuilder(line_type)
    b.infeed("hv", "mv", 0.0, 0.0)
    b.bus("s1", "secondary_substation", length_km * 1000.0, 0.0)
    b.line("l1", "mv", "s1", length_km, line_type,
           breaker_at=("mv",), remote_at=("mv",))
    b.load("s1", sn_mva, p_factor=p_factor)
    return b.build()


def single_station_grid() -> Grid:
    """One 10 km cable and one 0.1 MVA unity-power-factor station.

    Small enough that the outage bookkeeping can be done on paper: the cable
    contributes 10 km x 0.02 /(km a) = 0.2 faults per year, every fault takes
    the station out for locating plus on-site switching.
    """
    b = GridBuilder(CABLE_150)
    b.infeed("hv", "mv", 0.0, 0.0)
    b.bus("s1", "secondary_substation", 10000.0, 0.0)
    b.line("l1", "mv", "s1", 10.0, CABLE_150,
           breaker_at=("mv",), remote_at=("mv",))
    b.load("s1", 0.1, p_factor=1.0)
    return b.build()


# --------------------------------------------------------------------------
# Structure-rule demonstrations (one passing ring, one coupling fault, one
# double supply through a switching station)


def _ring_base() -> GridBuilder:
    b = GridBuilder(CABLE_150)
    b.infeed("hv", "mv", 0.0, 0.0)
    for i, (x, y) in enumerate([(800, 600), (1700, 800), (2600, 600),
                                (2600, -600), (1700, -800), (800, -600)], 1):
        b.bus(f"s{i}", "secondary_substation", float(x), float(y))
        b.load(f"s{i}", 0.4)
    b.line("f1", "mv", "s1", 1.05, CABLE_150, breaker_at=("mv",), remote_at=("mv",))
    b.line("f2", "s1", "s2", 0.95, CABLE_150)
    b.line("f3", "s2", "s3", 0.95, CABLE_150)
    b.line("f6", "mv", "s6", 1.05, CABLE_150, breaker_at=("mv",), remote_at=("mv",))
    b.line("f5", "s6", "s5", 0.95, CABLE_150)
    b.line("f4", "s5", "s4", 0.95, CABLE_150)
    return b


def open_ring_demo() -> Grid:
    """Two feeders joined by a normally-open tie: the textbook open ring."""
    b = _ring_base()
    b.line("tie", "s3", "s4", 1.25, CABLE_150, open_at="s3")
    return b.build()


def coupled_ring_demo() -> Grid:
    """Same ring with the tie closed: both feeders galvanically coupled."""
    b = _ring_base()
    b.line("tie", "s3", "s4", 1.25, CABLE_150)
    return b.build()


def station_ring_demo() -> Grid:
    """A switching station supplied by two closed lines; rings that close
    through station busbars are legitimate."""
    b = GridBuilder(CABLE_300, CABLE_150)
    b.infeed("hv", "mv", 0.0, 0.0)
    b.bus("ss", "switching_station", 4000.0, 0.0, contingency=True)
    b.line("sup1", "mv", "ss", 4.3, CABLE_300,
           breaker_at=("mv", "ss"), remote_at=("mv", "ss"))
    b.line("sup2", "mv", "ss", 4.6, CABLE_300,
           breaker_at=("mv", "ss"), remote_at=("mv", "ss"))
    for i, (x, y) in enumerate([(4800, 700), (5600, 500)], 1):
        b.bus(f"x{i}", "secondary_substation", float(x), float(y))
        b.load(f"x{i}", 0.4)
    b.line("c1", "ss", "x1", 1.1, CABLE_150, breaker_at=("ss",), remote_at=("ss",))
    b.line("c2", "x1", "x2", 0.85, CABLE_150)
    return b.build()


# --------------------------------------------------------------------------
# Fault handling fixtures


def resupply_demo() -> Grid:
    """Two feeders with an open tie, sized for replaying a mid-feeder fault:
    breaker trip, two-point isolation, breaker re-close, tie close."""
    b = GridBuilder(CABLE_150)
    b.infeed("hv", "mv", 0.0, 0.0)
    for i, (x, y) in enumerate([(1000, 400), (1800, 500), (1800, -500),
                                (1000, -400)], 1):
        b.bus(f"s{i}", "secondary_substation", float(x), float(y))
        b.load(f"s{i}", 0.4)
    b.line("l1", "mv", "s1", 1.1, CABLE_150, breaker_at=("mv",), remote_at=("mv",))
    b.line("l2", "s1", "s2", 0.85, CABLE_150)
    b.line("l4", "mv", "s4", 1.1, CABLE_150, breaker_at=("mv",), remote_at=("mv",))
    b.line("l3", "s4", "s3", 0.85, CABLE_150)
    b.line("tie", "s2", "s3", 1.05, CABLE_150, open_at="s2")
    return b.build()


def double_feeder_grid() -> Grid:
    """Asymmetric two-feeder grid with mixed manual/remote switching and
    mixed construction; compact enough for exhaustive fault enumeration."""
    b = GridBuilder(CABLE_150, OVERHEAD_50)
    b.infeed("hv", "mv", 0.0, 0.0)
    stations = [("s1", 1100, 500, 0.4), ("s2", 2000, 650, 0.63),
                ("s3", 2900, 500, 0.5), ("s4", 1200, -500, 0.8),
                ("s5", 2300, -600, 0.3)]
    for bus_id, x, y, sn in stations:
        b.bus(bus_id, "secondary_substation", float(x), float(y))
        b.load(bus_id, sn)
    b.line("d1", "mv", "s1", 1.2, CABLE_150, breaker_at=("mv",), remote_at=("mv",))
    b.line("d2", "s1", "s2", 0.8, CABLE_150, remote_at=("s1", "s2"))
    b.line("d3", "s2", "s3", 0.9, CABLE_150, remote_at=("s2",))
    b.line("d4", "mv", "s4", 1.0, OVERHEAD_50, breaker_at=("mv",), remote_at=("mv",))
    b.line("d5", "s4", "s5", 0.7, OVERHEAD_50)
    b.line("tie", "s3", "s5", 0.6, CABLE_150, open_at="s3", remote_at=("s3",))
    return b.build()


def ring_pair_grid(segment_km: float, *, load_sn: float = 1.1,
                   tie_km: float = 0.5) -> Grid:
    """Symmetric eight-station open ring, parameterised by segment length.

    Two instances of this grid (short segments vs. long segments) form a
    before/after pair for the reliability constraints: the long variant
    breaches both the energy cap and the system index unless stations are
    automated.
    """
    b = GridBuilder(CABLE_150)
    b.infeed("hv", "mv", 0.0, 0.0)
    step = segment_km * 1000.0
    for i in range(1, 5):
        b.bus(f"r{i}", "secondary_substation", i * step, 400.0)
        b.bus(f"r{9 - i}", "secondary_substation", i * step, -400.0)
        b.load(f"r{i}", load_sn)
        b.load(f"r{9 - i}", load_sn)
    b.line("g1", "mv", "r1", segment_km, CABLE_150,
           breaker_at=("mv",), remote_at=("mv",))
    b.line("g2", "r1", "r2", segment_km, CABLE_150)
    b.line("g3", "r2", "r3", segment_km, CABLE_150)
    b.line("g4", "r3", "r4", segment_km, CABLE_150)
    b.line("g8", "mv", "r8", segment_km, CABLE_150,
           breaker_at=("mv",), remote_at=("mv",))
    b.line("g7", "r8", "r7", segment_km, CABLE_150)
    b.line("g6", "r7", "r6", segment_km, CABLE_150)
    b.line("g5", "r6", "r5", segment_km, CABLE_150)
    b.line("tie", "r4", "r5", tie_km, CABLE_150, open_at="r4")
    return b.build()


# --------------------------------------------------------------------------
# Planning areas


def example_area() -> Grid:
    """A 25-station area: two open rings at the primary substation, one
    legacy overhead ring, a remote switching station fed by two long cable
    routes, two rings behind it, two stub stations and one large customer.

    The supply routes exceed the dismantling threshold, the overhead ring is
    too weak for backup operation and carries a wind farm that lifts the
    feed-in voltage band, so all planning stages have real work to do.
    """
    b = GridBuilder(CABLE_150, CABLE_300, OVERHEAD_50)
    b.infeed("hv", "mv", 0.0, 0.0)

    stations = [
        # northern cable ring
        ("a1", -600, 900, 0.63), ("a2", -200, 1700, 0.63),
        ("a3", 300, 2500, 0.63), ("a4", 1000, 2400, 0.63),
        ("a5", 900, 1600, 0.63), ("a6", 700, 800, 0.63),
        # southern overhead ring
        ("b1", -500, -950, 1.0), ("b2", -100, -1750, 1.0),
        ("b3", 400, -2500, 1.0), ("b4", 950, -2450, 1.0),
        ("b5", 850, -1650, 1.0), ("b6", 650, -850, 1.0),
        # stations on the way to the switching station
        ("m1", 2900, 400, 0.63), ("m2", 2900, -500, 0.63),
        # rings behind the switching station
        ("c1", 6500, 750, 0.63), ("c2", 7300, 850, 0.63),
        ("c3", 8000, 200, 0.63), ("c4", 7200, -100, 0.63),
        ("c5", 6300, -850, 0.63), ("c6", 7100, -1000, 0.63),
        ("c7", 7800, -500, 0.63), ("c8", 6900, -200, 0.63),
        # stubs and a large single customer
        ("s23", 1300, 500, 0.4), ("z24", 1200, -700, 0.4),
        ("d25", -900, -300, 1.2),
    ]
    for bus_id, x, y, sn in stations:
        b.bus(bus_id, "secondary_substation", float(x), float(y))
        b.load(bus_id, sn)
    b.bus("ss", "switching_station", 6000.0, 0.0)
    b.wind("b3", 3.6)

    # ring A (cable)
    b.line("a_1", "mv", "a1", 1.15, CABLE_150, breaker_at=("mv",), remote_at=("mv",))
    b.line("a_2", "a1", "a2", 0.95, CABLE_150)
    b.line("a_3", "a2", "a3", 1.0, CABLE_150)
    b.line("a_6", "mv", "a6", 1.1, CABLE_150, breaker_at=("mv",), remote_at=("mv",))
    b.line("a_5", "a6", "a5", 0.85, CABLE_150)
    b.line("a_4", "a5", "a4", 0.85, CABLE_150)
    b.line("a_tie", "a3", "a4", 0.75, CABLE_150, open_at="a3")
    b.line("a_stub", "a6", "s23", 0.7, CABLE_150)

    # ring B (overhead, weak)
    b.line("b_1", "mv", "b1", 1.2, OVERHEAD_50, breaker_at=("mv",), remote_at=("mv",))
    b.line("b_2", "b1", "b2", 0.9, OVERHEAD_50)
    b.line("b_3", "b2", "b3", 0.95, OVERHEAD_50)
    b.line("b_6", "mv", "b6", 1.05, OVERHEAD_50, breaker_at=("mv",), remote_at=("mv",))
    b.line("b_5", "b6", "b5", 0.9, OVERHEAD_50)
    b.line("b_4", "b5", "b4", 0.9, OVERHEAD_50)
    b.line("b_tie", "b3", "b4", 0.7, OVERHEAD_50, open_at="b3")
    b.line("b_stub", "b6", "z24", 0.6, OVERHEAD_50)

    # large customer
    b.line("d_1", "mv", "d25", 0.95, CABLE_300, breaker_at=("mv",), remote_at=("mv",))

    # supply routes to the switching station; route 2 is the hot standby
    b.line("sup1a", "mv", "m1", 3.1, CABLE_300, breaker_at=("mv",), remote_at=("mv",))
    b.line("sup1b", "m1", "ss", 3.3, CABLE_300, breaker_at=("ss",), remote_at=("ss",))
    b.line("sup2a", "mv", "m2", 3.1, CABLE_300, breaker_at=("mv",), remote_at=("mv",))
    b.line("sup2b", "m2", "ss", 3.3, CABLE_300, open_at="ss")

    # rings C1/C2 behind the switching station
    b.line("c_1", "ss", "c1", 0.95, CABLE_150, breaker_at=("ss",), remote_at=("ss",))
    b.line("c_2", "c1", "c2", 0.85, CABLE_150)
    b.line("c_3", "c2", "c3", 1.0, CABLE_150, open_at="c2")
    b.line("c_4", "c3", "c4", 0.9, CABLE_150)
    b.line("c_5", "c4", "ss", 1.25, CABLE_150, breaker_at=("ss",), remote_at=("ss",))
    b.line("c_6", "ss", "c5", 0.95, CABLE_150, breaker_at=("ss",), remote_at=("ss",))
    b.line("c_7", "c5", "c6", 0.85, CABLE_150)
    b.line("c_8", "c6", "c7", 0.9, CABLE_150, open_at="c6")
    b.line("c_9", "c7", "c8", 1.0, CABLE_150)
    b.line("c_10", "c8", "ss", 0.95, CABLE_150, breaker_at=("ss",), remote_at=("ss",))

    return b.build()


def example_principles_dict() -> dict:
    """Planning principles matching :func:`example_area`, with a search
    budget small enough for test runs."""
    return {
        "voltage_bands": {
            "normal": [0.96, 1.06],
            "contingency": [0.90, 1.10],
            "loading_max": 100.0,
        },
        "cost_model": {
            "interest_rate": 5.0,
            "cable_per_km": 7000.0,
            "switching_station": 35900.0,
            "communication_link": 1200.0,
            "directional_indicator_per_station": 30.0,
            "impedance_protection_per_feeder": 400.0,
        },
        "reliability_params": {
            "t_locate": 0.75,
            "t_onsite": 0.25,
            "t_remote": 0.02,
            "e_out_max": 150.0,
        },
        "planner_params": {
            "n_topologies": 5,
            "dismantle_threshold_km": 2.0,
            "trail_factor": 1.5,
            "max_evaluations": 600,
            "perturbation": 0.05,
            "non_improving_limit": 4,
            "restarts": 0,
            "seed": 17,
            "cable_catalog": [CABLE_150.name, CABLE_300.name],
        },
    }


def station_tradeoff_area() -> Grid:
    """A small area whose switching station can be dismantled cheaply: the
    replacement trails cost clearly less than renewing the station."""
    b = GridBuilder(CABLE_300, CABLE_150)
    b.infeed("hv", "mv", 0.0, 0.0)
    b.bus("ss", "switching_station", 2600.0, 0.0)
    stations = [("m1", 1400, 600, 0.3), ("m2", 1400, -600, 0.3),
                ("c1", 3200, 800, 0.3), ("c2", 4000, 800, 0.3),
                ("c3", 4000, -800, 0.3), ("c4", 3200, -800, 0.3)]
    for bus_id, x, y, sn in stations:
        b.bus(bus_id, "secondary_substation", float(x), float(y))
        b.load(bus_id, sn)
    b.line("sup1a", "mv", "m1", 2.1, CABLE_300, breaker_at=("mv",), remote_at=("mv",))
    b.line("sup1b", "m1", "ss", 2.05, CABLE_300, breaker_at=("ss",), remote_at=("ss",))
    b.line("sup2a", "mv", "m2", 2.1, CABLE_300, breaker_at=("mv",), remote_at=("mv",))
    b.line("sup2b", "m2", "ss", 2.05, CABLE_300, open_at="ss")
    b.line("c_1", "ss", "c1", 1.1, CABLE_150, breaker_at=("ss",), remote_at=("ss",))
    b.line("c_2", "c1", "c2", 0.85, CABLE_150)
    b.line("c_tie", "c2", "c3", 1.7, CABLE_150, open_at="c2")
    b.line("c_3", "c3", "c4", 0.85, CABLE_150)
    b.line("c_4", "c4", "ss", 1.1, CABLE_150, breaker_at=("ss",), remote_at=("ss",))
    return b.build()


def mesh_tradeoff_area() -> Grid:
    """An open ring on ageing high-impedance cable whose far ends sag below
    the voltage band at peak load.  Radial operation needs reinforcement;
    closing the ring fixes the profile with a communication link instead."""
    b = GridBuilder(CABLE_LEGACY, CABLE_300)
    b.infeed("hv", "mv", 0.0, 0.0)
    left = [("r1", 1800, 300), ("r2", 3600, 500), ("r3", 5400, 300),
            ("r4", 7200, 400)]
    right = [("r8", 1800, -400), ("r7", 3600, -600), ("r6", 5400, -400),
             ("r5", 7200, -500)]
    for bus_id, x, y in left + right:
        b.bus(bus_id, "secondary_substation", float(x), float(y))
        b.load(bus_id, 1.3)
    b.line("h1", "mv", "r1", 1.9, CABLE_LEGACY, breaker_at=("mv",), remote_at=("mv",))
    b.line("h2", "r1", "r2", 1.9, CABLE_LEGACY)
    b.line("h3", "r2", "r3", 1.9, CABLE_LEGACY)
    b.line("h4", "r3", "r4", 1.9, CABLE_LEGACY)
    b.line("h8", "mv", "r8", 1.9, CABLE_LEGACY, breaker_at=("mv",), remote_at=("mv",))
    b.line("h7", "r8", "r7", 1.9, CABLE_LEGACY)
    b.line("h6", "r7", "r6", 1.9, CABLE_LEGACY)
    b.line("h5", "r6", "r5", 1.9, CABLE_LEGACY)
    b.line("h_tie", "r4", "r5", 0.95, CABLE_LEGACY, open_at="r4")
    return b.build()


def tradeoff_principles_dict(*, communication_link: float = 1200.0,
                             seed: int = 3) -> dict:
    """Principles for the trade-off areas: one reinforcement cable in the
    catalogue, a relaxed contingency voltage band (rural long-line area) and
    a small search budget."""
    return {
        "voltage_bands": {
            "normal": [0.96, 1.06],
            "contingency": [0.80, 1.10],
            "loading_max": 100.0,
        },
        "cost_model": {"communication_link": communication_link},
        "planner_params": {
            "n_topologies": 3,
            "max_evaluations": 600,
            "non_improving_limit": 4,
            "restarts": 0,
            "seed": seed,
            "cable_catalog": [CABLE_300.name],
        },
    }
