"""Target-grid planning for medium-voltage distribution areas.

Builds and compares green-field target grids for a planning area around an
aging switching station: an open-ring (radial) concept, a closed-ring concept
and a renewed switching-station concept. Plans are found with an iterated
local search over discrete expansion measures and validated against
operational (power flow), topological and reliability (FMEA) constraints.
"""

from gridforge.grid_model import (
    Bus,
    ExternalSource,
    Grid,
    GridFault,
    Injection,
    Line,
    LineType,
    Scenario,
    Switch,
    Transformer,
    apply_scenario,
    load_grid,
    save_grid,
    validate_grid,
)
from gridforge.principles import PlanningPrinciples, load_principles

__all__ = [
    "Bus",
    "ExternalSource",
    "Grid",
    "GridFault",
    "Injection",
    "Line",
    "LineType",
    "PlanningPrinciples",
    "Scenario",
    "Switch",
    "Transformer",
    "apply_scenario",
    "load_grid",
    "load_principles",
    "save_grid",
    "validate_grid",
]

__version__ = "0.1.0"
